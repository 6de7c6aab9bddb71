//! Flat key-value experiment configuration.
//!
//! The file format is line-oriented: `[section]` headers, `key = value`
//! pairs, `#` comments, blank lines. Sections are `[system]`, `[quantizer]`,
//! `[map]`, `[mobility]`, and `[experiment]`; unknown sections or keys are
//! hard errors. Every key is optional and falls back to the desk-scale
//! default.

use super::mobility::MobilityParams;
use super::session::{EstimationMode, MapParams, MetricMode};
use super::SimError;
use crate::config::SystemConfig;
use std::fmt::Write as _;
use std::path::Path;

/// Codebook design knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerConfig {
    pub shadow_levels: usize,
    pub distance_levels: usize,
    /// All-pilot warmup sessions used to collect training gains.
    pub training_sessions: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            shadow_levels: 8,
            distance_levels: 8,
            training_sessions: 300,
            max_iters: 100,
            tol: 1e-10,
        }
    }
}

/// Everything one experiment needs: system model, codebook sizes, map
/// learning parameters, mobility, and sweep settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub quantizer: QuantizerConfig,
    pub map_params: MapParams,
    pub mobility: MobilityParams,
    pub num_sessions: usize,
    pub snr_sweep_db: Vec<f64>,
    pub metric_mode: MetricMode,
    pub estimation: EstimationMode,
    pub window: usize,
    pub sinr_cap: f64,
    pub hit_bands: Vec<f64>,
    pub band_search_budget: usize,
    pub band_tolerance: f64,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 6 cells, 128 antennas, 8 terminals per cell.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            system: SystemConfig::desk_scale(),
            quantizer: QuantizerConfig::default(),
            map_params: MapParams::default(),
            mobility: MobilityParams::default(),
            num_sessions: 20_000,
            snr_sweep_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            metric_mode: MetricMode::PaperFaithful,
            estimation: EstimationMode::Asymptotic,
            window: 500,
            sinr_cap: 1e6,
            hit_bands: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            band_search_budget: 10,
            band_tolerance: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.system.validate()?;
        self.mobility.validate().map_err(SimError::Mobility)?;
        let fail = |reason: String| Err(SimError::ConfigFile { line: 0, reason });
        if self.num_sessions == 0 {
            return fail("num_sessions must be at least 1".into());
        }
        if self.snr_sweep_db.is_empty() {
            return fail("snr_sweep_db must not be empty".into());
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.quantizer.shadow_levels == 0 || self.quantizer.distance_levels == 0 {
            return fail("codebook sizes must be at least 1".into());
        }
        if self.quantizer.training_sessions == 0 {
            return fail("training_sessions must be at least 1".into());
        }
        if self.sinr_cap.is_nan() || self.sinr_cap <= 0.0 {
            return fail(format!("sinr_cap must be positive, got {}", self.sinr_cap));
        }
        if self.hit_bands.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return fail("hit_bands entries must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the flat key-value format; see the module docs.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg = ExperimentConfig::desk_default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |reason: String| SimError::ConfigFile {
                line: lineno,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?;
                match name {
                    "system" | "quantizer" | "map" | "mobility" | "experiment" => {
                        section = name.to_string();
                    }
                    other => return Err(err(format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            if value.is_empty() {
                return Err(err(format!("empty value for key {key:?}")));
            }
            apply_key(&mut cfg, &section, key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Deterministic dump of every setting, used for config hashing and as
    /// a template config file.
    pub fn canonical_text(&self) -> String {
        let s = &self.system;
        let q = &self.quantizer;
        let m = &self.map_params;
        let mut out = String::new();
        let _ = writeln!(out, "[system]");
        let _ = writeln!(out, "cells = {}", s.cells);
        let _ = writeln!(out, "antennas = {}", s.antennas);
        let _ = writeln!(out, "uts_per_cell = {}", s.uts_per_cell);
        let _ = writeln!(out, "pilot_len = {}", s.pilot_len);
        let _ = writeln!(out, "path_loss_exponent = {}", s.path_loss_exponent);
        let _ = writeln!(out, "shadow_sigma_db = {}", s.shadow_sigma_db);
        let _ = writeln!(out, "uplink_snr_db = {}", to_db(s.uplink_snr));
        let _ = writeln!(out, "downlink_snr_db = {}", to_db(s.downlink_snr));
        let _ = writeln!(out, "cell_area_m2 = {}", s.cell_area);
        let _ = writeln!(out, "overlap_fraction = {}", s.overlap_fraction);
        let _ = writeln!(out, "snr_threshold_db = {}", to_db(s.snr_threshold));
        let _ = writeln!(out, "\n[quantizer]");
        let _ = writeln!(out, "shadow_levels = {}", q.shadow_levels);
        let _ = writeln!(out, "distance_levels = {}", q.distance_levels);
        let _ = writeln!(out, "training_sessions = {}", q.training_sessions);
        let _ = writeln!(out, "max_iters = {}", q.max_iters);
        let _ = writeln!(out, "tol = {}", q.tol);
        let _ = writeln!(out, "\n[map]");
        let _ = writeln!(out, "learning_rate = {}", m.learning_rate);
        let _ = writeln!(out, "prune_threshold = {}", m.prune_threshold);
        let _ = writeln!(out, "gc_period = {}", m.gc_period);
        let _ = writeln!(out, "\n[mobility]");
        let _ = writeln!(out, "grid_step_m = {}", self.mobility.grid_step);
        let _ = writeln!(out, "dwell_prob = {}", self.mobility.dwell_prob);
        let _ = writeln!(out, "\n[experiment]");
        let _ = writeln!(out, "seed = {}", s.rng_seed);
        let _ = writeln!(out, "num_sessions = {}", self.num_sessions);
        let _ = writeln!(out, "snr_sweep_db = {}", join(&self.snr_sweep_db));
        let _ = writeln!(
            out,
            "metric_mode = {}",
            match self.metric_mode {
                MetricMode::PaperFaithful => "paper-faithful",
                MetricMode::Penalized => "penalized",
            }
        );
        let _ = writeln!(
            out,
            "estimation = {}",
            match self.estimation {
                EstimationMode::Asymptotic => "asymptotic",
                EstimationMode::Matrix => "matrix",
            }
        );
        let _ = writeln!(out, "window = {}", self.window);
        let _ = writeln!(out, "sinr_cap = {}", self.sinr_cap);
        let _ = writeln!(out, "hit_bands = {}", join(&self.hit_bands));
        let _ = writeln!(out, "band_search_budget = {}", self.band_search_budget);
        let _ = writeln!(out, "band_tolerance = {}", self.band_tolerance);
        out
    }
}

fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn apply_key(
    cfg: &mut ExperimentConfig,
    section: &str,
    key: &str,
    value: &str,
) -> Result<(), String> {
    let parse_f64 = || {
        value
            .parse::<f64>()
            .map_err(|_| format!("bad number for {key:?}: {value:?}"))
    };
    let parse_usize = || {
        value
            .parse::<usize>()
            .map_err(|_| format!("bad integer for {key:?}: {value:?}"))
    };
    let parse_u64 = || {
        value
            .parse::<u64>()
            .map_err(|_| format!("bad integer for {key:?}: {value:?}"))
    };
    let parse_list = || -> Result<Vec<f64>, String> {
        value
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad list entry for {key:?}: {v:?}"))
            })
            .collect()
    };
    match section {
        "system" => match key {
            "cells" => cfg.system.cells = parse_usize()?,
            "antennas" => cfg.system.antennas = parse_usize()?,
            "uts_per_cell" => cfg.system.uts_per_cell = parse_usize()?,
            "pilot_len" => cfg.system.pilot_len = parse_usize()?,
            "path_loss_exponent" => cfg.system.path_loss_exponent = parse_f64()?,
            "shadow_sigma_db" => cfg.system.shadow_sigma_db = parse_f64()?,
            "uplink_snr_db" => cfg.system.uplink_snr = from_db(parse_f64()?),
            "downlink_snr_db" => cfg.system.downlink_snr = from_db(parse_f64()?),
            "cell_area_m2" => cfg.system.cell_area = parse_f64()?,
            "overlap_fraction" => cfg.system.overlap_fraction = parse_f64()?,
            "snr_threshold_db" => cfg.system.snr_threshold = from_db(parse_f64()?),
            other => return Err(format!("unknown key {other:?} in [system]")),
        },
        "quantizer" => match key {
            "shadow_levels" => cfg.quantizer.shadow_levels = parse_usize()?,
            "distance_levels" => cfg.quantizer.distance_levels = parse_usize()?,
            "training_sessions" => cfg.quantizer.training_sessions = parse_usize()?,
            "max_iters" => cfg.quantizer.max_iters = parse_usize()?,
            "tol" => cfg.quantizer.tol = parse_f64()?,
            other => return Err(format!("unknown key {other:?} in [quantizer]")),
        },
        "map" => match key {
            "learning_rate" => cfg.map_params.learning_rate = parse_f64()?,
            "prune_threshold" => cfg.map_params.prune_threshold = parse_f64()?,
            "gc_period" => cfg.map_params.gc_period = parse_usize()?,
            other => return Err(format!("unknown key {other:?} in [map]")),
        },
        "mobility" => match key {
            "grid_step_m" => cfg.mobility.grid_step = parse_f64()?,
            "dwell_prob" => cfg.mobility.dwell_prob = parse_f64()?,
            other => return Err(format!("unknown key {other:?} in [mobility]")),
        },
        "experiment" => match key {
            "seed" => cfg.system.rng_seed = parse_u64()?,
            "num_sessions" => cfg.num_sessions = parse_usize()?,
            "snr_sweep_db" => cfg.snr_sweep_db = parse_list()?,
            "metric_mode" => {
                cfg.metric_mode = match value {
                    "paper-faithful" => MetricMode::PaperFaithful,
                    "penalized" => MetricMode::Penalized,
                    other => {
                        return Err(format!(
                            "metric_mode must be paper-faithful or penalized, got {other:?}"
                        ))
                    }
                }
            }
            "estimation" => {
                cfg.estimation = match value {
                    "asymptotic" => EstimationMode::Asymptotic,
                    "matrix" => EstimationMode::Matrix,
                    other => {
                        return Err(format!(
                            "estimation must be asymptotic or matrix, got {other:?}"
                        ))
                    }
                }
            }
            "window" => cfg.window = parse_usize()?,
            "sinr_cap" => cfg.sinr_cap = parse_f64()?,
            "hit_bands" => cfg.hit_bands = parse_list()?,
            "band_search_budget" => cfg.band_search_budget = parse_usize()?,
            "band_tolerance" => cfg.band_tolerance = parse_f64()?,
            other => return Err(format!("unknown key {other:?} in [experiment]")),
        },
        "" => return Err(format!("key {key:?} appears before any section header")),
        other => return Err(format!("unknown section [{other}]")),
    }
    Ok(())
}
