//! Session-protocol invariants that span modules: pilot accounting, the
//! frozen-terminal convergence guarantee, and the hybrid matrix assembly.

use csimap::downlink::ColumnSource;
use csimap::quantizer::{design_codebook, DesignParams, SeedHints};
use csimap::sim::{
    build_state, collect_training_data, drive, EstimationMode, ExperimentConfig, RunOptions,
    UtClass,
};
use csimap::uplink::pilot_participation;
use csimap::Codebook;

fn setup(mutate: impl FnOnce(&mut ExperimentConfig)) -> (ExperimentConfig, Codebook) {
    let mut cfg = ExperimentConfig::desk_default();
    cfg.quantizer.training_sessions = 50;
    cfg.window = 100;
    mutate(&mut cfg);
    let data =
        collect_training_data(&cfg.system, &cfg.mobility, cfg.quantizer.training_sessions).unwrap();
    let params = DesignParams::new(
        cfg.quantizer.shadow_levels,
        cfg.quantizer.distance_levels,
        cfg.system.path_loss_exponent,
    );
    let hints = SeedHints {
        distances: Some(&data.distances),
        shadows: Some(&data.shadows),
    };
    let (codebook, _) = design_codebook(&data.gains, &params, hints).unwrap();
    (cfg, codebook)
}

#[test]
fn frozen_mobility_reaches_095_hit_ratio_quickly() {
    // Within 50 * K sessions the windowed hit ratio must exceed 0.95 when
    // nobody moves.
    let (cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 41;
        cfg.mobility.dwell_prob = 1.0;
        cfg.num_sessions = 50 * 8;
    });
    let mut state = build_state(&cfg, &codebook, RunOptions::default()).unwrap();
    let metrics = drive(&mut state, cfg.num_sessions, cfg.window, false);
    assert!(
        metrics.final_hit_ratio > 0.95,
        "final hit ratio {} after {} sessions",
        metrics.final_hit_ratio,
        cfg.num_sessions
    );
    // And the trend is upward in expectation.
    assert!(metrics.hit_ratio_series[cfg.num_sessions - 1] >= metrics.hit_ratio_series[20]);
}

#[test]
fn initiative_fraction_matches_alpha_and_participation() {
    let (cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 42;
        cfg.num_sessions = 600;
    });
    let mut state = build_state(&cfg, &codebook, RunOptions::default()).unwrap();
    let metrics = drive(&mut state, cfg.num_sessions, cfg.window, false);

    // Class counts and the alpha trajectory must describe the same pilots.
    let pilots = metrics.class_counts[0] + metrics.class_counts[1];
    let total = metrics.class_counts.iter().sum::<usize>();
    let from_classes = pilots as f64 / total as f64;
    assert!((from_classes - metrics.mean_alpha).abs() < 1e-12);

    // Realized co-pilot cell count vs the rounding formula, within one cell.
    let formula = pilot_participation(cfg.system.cells, metrics.mean_alpha) as f64;
    assert!(
        (metrics.mean_copilot_cells - formula).abs() <= 1.0,
        "realized {} vs formula {}",
        metrics.mean_copilot_cells,
        formula
    );
}

#[test]
fn forced_band_alpha_complements_the_band() {
    let (cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 43;
        cfg.num_sessions = 500;
    });
    for band in [0.0, 0.25, 0.75] {
        let mut state = build_state(
            &cfg,
            &codebook,
            RunOptions {
                force_hit_ratio: Some(band),
            },
        )
        .unwrap();
        let metrics = drive(&mut state, cfg.num_sessions, cfg.window, false);
        assert!(
            (metrics.mean_alpha - (1.0 - band)).abs() < 0.03,
            "band {band}: mean alpha {}",
            metrics.mean_alpha
        );
        // No misses in oracle mode.
        assert_eq!(metrics.class_counts[3], 0);
    }
}

#[test]
fn hybrid_matrix_tags_match_formats() {
    let (mut cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 44;
        cfg.system.cells = 2;
        cfg.system.antennas = 32;
        cfg.system.uts_per_cell = 4;
        cfg.system.pilot_len = 4;
    });
    cfg.estimation = EstimationMode::Matrix;
    let mut state = build_state(&cfg, &codebook, RunOptions::default()).unwrap();
    // Cold start: everything estimated.
    state.run_session();

    // Build a hybrid with two predicted columns out of four.
    let estimate = ndarray::Array2::from_elem((32, 4), csimap::Cplx::new(1.0, 0.0));
    let q = state.true_qcsi(0, 1);
    let predictions = vec![None, Some(q), None, Some(q)];
    let hybrid = state.assemble_hybrid(0, &estimate, &predictions).unwrap();
    assert_eq!(
        hybrid.sources,
        vec![
            ColumnSource::Estimated,
            ColumnSource::Predicted,
            ColumnSource::Estimated,
            ColumnSource::Predicted
        ]
    );
    assert_eq!(hybrid.matrix.dim(), (32, 4));
    // Estimated columns are rescaled off the pilot amplitude.
    let scale = 1.0 / (4.0 * cfg.system.uplink_snr).sqrt();
    assert!((hybrid.matrix[(0, 0)].re - scale).abs() < 1e-12);
    // Predicted columns carry the reconstructed gain in their energy.
    let (gain, _) = csimap::quantizer::dequantize(q, state.codebook()).unwrap();
    let energy: f64 = hybrid
        .matrix
        .column(1)
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / 32.0;
    assert!(
        (energy / (gain * gain) - 1.0).abs() < 0.8,
        "energy {energy} vs gain^2 {}",
        gain * gain
    );
}

#[test]
fn every_session_classifies_every_terminal_once() {
    let (cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 45;
        cfg.num_sessions = 300;
    });
    let mut state = build_state(&cfg, &codebook, RunOptions::default()).unwrap();
    let mut counts = [0usize; 4];
    for _ in 0..cfg.num_sessions {
        let record = state.run_session();
        for cell in &record.cells {
            for ut in &cell.terminals {
                counts[match ut.class() {
                    UtClass::Initiative => 0,
                    UtClass::ForcedInitiative => 1,
                    UtClass::PredictiveHit => 2,
                    UtClass::PredictiveMiss => 3,
                }] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    assert_eq!(
        total,
        cfg.num_sessions * cfg.system.cells * cfg.system.uts_per_cell
    );
    assert!(
        counts.iter().all(|c| *c > 0),
        "all four classes occur: {counts:?}"
    );
}

#[test]
fn matrix_and_asymptotic_paths_agree_on_dynamics() {
    // Same seed, both estimation modes. The matrix measurement concentrates
    // on the asymptotic value only when the pilot energy dominates the
    // noise floor for the weakest gains, hence the high uplink SNR here.
    let (mut cfg, codebook) = setup(|cfg| {
        cfg.system.rng_seed = 46;
        cfg.system.cells = 2;
        cfg.system.antennas = 512;
        cfg.system.uts_per_cell = 4;
        cfg.system.pilot_len = 4;
        cfg.system.uplink_snr = 1000.0;
        cfg.num_sessions = 200;
    });
    let run = |cfg: &ExperimentConfig, codebook: &Codebook| {
        let mut state = build_state(cfg, codebook, RunOptions::default()).unwrap();
        drive(&mut state, cfg.num_sessions, cfg.window, false)
    };
    let asym = run(&cfg, &codebook);
    cfg.estimation = EstimationMode::Matrix;
    let matrix = run(&cfg, &codebook);
    assert!(
        (asym.final_hit_ratio - matrix.final_hit_ratio).abs() < 0.15,
        "asymptotic {} vs matrix {}",
        asym.final_hit_ratio,
        matrix.final_hit_ratio
    );
    assert!(
        (asym.mean_alpha - matrix.mean_alpha).abs() < 0.15,
        "asymptotic {} vs matrix {}",
        asym.mean_alpha,
        matrix.mean_alpha
    );
}
