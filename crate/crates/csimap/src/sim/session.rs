//! One full TDD session: format decision, pilot phase with estimation (or
//! map prediction), downlink metrics, SNR feedback, map learning, garbage
//! collection, and the mobility step.

use super::environment::{mix_seed, Environment};
use super::geometry::{FloorPlan, GridPos};
use super::mobility::{initial_positions, mobility_step, MobilityParams};
use super::SimError;
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::downlink::{asymptotic_sinr, ColumnSource, HybridChannel, DEFAULT_SINR_CAP};
use crate::map::CsiMap;
use crate::quantizer::{dequantize, quantize, Codebook, Qcsi};
use crate::uplink::{
    decide_format, ls_estimate, received_pilot_signal, PilotBook, PilotIndicator, TddFormat,
};
use crate::Cplx;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SESSION_STREAM: u64 = 0x5345_5353;
const PLACEMENT_STREAM: u64 = 0x504f_5321;

/// CSI map learning knobs shared by every base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    /// Reinforcement step for the winning edge, in (0, 1).
    pub learning_rate: f64,
    /// Garbage-collection weight cutoff, in [0, 1).
    pub prune_threshold: f64,
    /// Sessions between garbage-collection passes (0 disables GC).
    pub gc_period: usize,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            learning_rate: 0.1,
            prune_threshold: 0.02,
            gc_period: 1000,
        }
    }
}

/// How a mispredicted terminal is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// Score every terminal by the asymptotic SINR and only record the miss.
    PaperFaithful,
    /// Zero out the rate of mispredicted terminals.
    Penalized,
}

/// Where per-terminal gain measurements come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMode {
    /// Large-antenna limit: the measured gain is the exact band-gated
    /// co-pilot sum, with no fast-fading or noise wobble. Fast enough for
    /// hundred-thousand-session sweeps.
    Asymptotic,
    /// Full pilot-phase Monte Carlo: fresh fading, received-signal matrix,
    /// least-squares estimation, and energy-based gain extraction.
    Matrix,
}

/// Per-run switches that do not belong in the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Oracle mode: each terminal independently skips its pilot and gets the
    /// true quantized state injected with this probability.
    pub force_hit_ratio: Option<f64>,
}

/// How one terminal spent the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtClass {
    Initiative,
    ForcedInitiative,
    PredictiveHit,
    PredictiveMiss,
}

/// Per-terminal session outcome.
#[derive(Debug, Clone)]
pub struct UtRecord {
    pub format: TddFormat,
    /// Prediction was requested but fell back to a pilot upload.
    pub forced: bool,
    /// Observed (Initiative) or predicted (Predictive) quantized state.
    pub qcsi: Option<Qcsi>,
    /// Quantization of the terminal's exact own-cell gain this session.
    pub true_qcsi: Qcsi,
    /// Defined only for Predictive terminals.
    pub hit: Option<bool>,
    pub sinr: f64,
    pub rate: f64,
}

impl UtRecord {
    pub fn class(&self) -> UtClass {
        match (self.format, self.forced, self.hit) {
            (TddFormat::Initiative, true, _) => UtClass::ForcedInitiative,
            (TddFormat::Initiative, false, _) => UtClass::Initiative,
            (TddFormat::Predictive, _, Some(true)) => UtClass::PredictiveHit,
            (TddFormat::Predictive, _, _) => UtClass::PredictiveMiss,
        }
    }
}

/// Per-cell session outcome.
#[derive(Debug, Clone)]
pub struct CellRecord {
    /// Fraction of terminals that uploaded a pilot, exactly `K'/K`.
    pub alpha: f64,
    pub sum_rate: f64,
    pub terminals: Vec<UtRecord>,
    pub map_nodes: usize,
    pub map_edges: usize,
}

/// Everything observable about one TDD session.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    /// 1-based session counter.
    pub index: usize,
    pub cells: Vec<CellRecord>,
}

impl SessionRecord {
    pub fn mean_alpha(&self) -> f64 {
        self.cells.iter().map(|c| c.alpha).sum::<f64>() / self.cells.len() as f64
    }

    pub fn mean_sum_rate(&self) -> f64 {
        self.cells.iter().map(|c| c.sum_rate).sum::<f64>() / self.cells.len() as f64
    }

    pub fn predictive_counts(&self) -> (usize, usize) {
        let mut hits = 0;
        let mut total = 0;
        for cell in &self.cells {
            for ut in &cell.terminals {
                if let Some(hit) = ut.hit {
                    total += 1;
                    hits += hit as usize;
                }
            }
        }
        (hits, total)
    }
}

/// The live simulator: geometry, gain tables, per-station maps, terminal
/// positions, and the SNR feedback memory.
pub struct SimState {
    cfg: SystemConfig,
    env: Environment,
    codebook: Codebook,
    pilot_book: PilotBook,
    maps: Vec<CsiMap>,
    positions: Vec<Vec<GridPos>>,
    prev_snr: Vec<Vec<Option<f64>>>,
    force_pilot: Vec<Vec<bool>>,
    mobility: MobilityParams,
    map_params: MapParams,
    pub metric_mode: MetricMode,
    pub estimation: EstimationMode,
    pub sinr_cap: f64,
    options: RunOptions,
    /// Last session's prediction per terminal, awaiting confirmation: a
    /// terminal that still reports high SNR one session later validates the
    /// followed edge, which is the only way pilot-free sessions can feed
    /// the map (staying put never triggers a pilot).
    pending_prediction: Vec<Vec<Option<Qcsi>>>,
    session_index: usize,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(
        cfg: SystemConfig,
        codebook: Codebook,
        mobility: MobilityParams,
        map_params: MapParams,
        options: RunOptions,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        mobility.validate().map_err(SimError::Mobility)?;
        if let Some(h) = options.force_hit_ratio {
            if !(0.0..=1.0).contains(&h) {
                return Err(SimError::Mobility(format!(
                    "force_hit_ratio must lie in [0,1], got {h}"
                )));
            }
        }
        let plan = FloorPlan::new(
            cfg.cells,
            cfg.cell_area,
            cfg.overlap_fraction,
            mobility.grid_step,
        )?;
        let env = Environment::new(
            plan,
            cfg.shadow_sigma_db,
            cfg.path_loss_exponent,
            cfg.rng_seed,
        );
        let pilot_book = PilotBook::dft(cfg.pilot_len, cfg.uts_per_cell)?;
        let maps = (0..cfg.cells)
            .map(|_| {
                CsiMap::new(
                    cfg.uts_per_cell,
                    map_params.learning_rate,
                    map_params.prune_threshold,
                    codebook.version(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut placement_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, PLACEMENT_STREAM));
        let positions =
            initial_positions(cfg.cells, cfg.uts_per_cell, env.plan(), &mut placement_rng);
        let rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, SESSION_STREAM));
        Ok(SimState {
            prev_snr: vec![vec![None; cfg.uts_per_cell]; cfg.cells],
            force_pilot: vec![vec![false; cfg.uts_per_cell]; cfg.cells],
            pending_prediction: vec![vec![None; cfg.uts_per_cell]; cfg.cells],
            positions,
            maps,
            pilot_book,
            env,
            codebook,
            cfg,
            mobility,
            map_params,
            metric_mode: MetricMode::PaperFaithful,
            estimation: EstimationMode::Asymptotic,
            sinr_cap: DEFAULT_SINR_CAP,
            options,
            session_index: 0,
            rng,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn map(&self, cell: usize) -> &CsiMap {
        &self.maps[cell]
    }

    pub fn positions(&self) -> &[Vec<GridPos>] {
        &self.positions
    }

    pub fn sessions_run(&self) -> usize {
        self.session_index
    }

    /// The base-station-side pilot force flag (test-symbol power control).
    pub fn set_force_pilot(&mut self, cell: usize, terminal: usize, force: bool) {
        self.force_pilot[cell][terminal] = force;
    }

    /// True quantized state of a terminal's own-cell gain right now.
    pub fn true_qcsi(&self, cell: usize, terminal: usize) -> Qcsi {
        let gain = self
            .env
            .own_gain(cell, self.positions[cell][terminal])
            .sqrt();
        quantize(gain, &self.codebook)
    }

    /// Runs one complete TDD session and advances the mobility walk.
    pub fn run_session(&mut self) -> SessionRecord {
        let cells = self.cfg.cells;
        let uts = self.cfg.uts_per_cell;
        self.session_index += 1;

        // Format decision, including predictions and their fallbacks, so the
        // final pilot indicator set is known before the pilot phase.
        let mut formats = vec![vec![TddFormat::Initiative; uts]; cells];
        let mut forced = vec![vec![false; uts]; cells];
        let mut predicted: Vec<Vec<Option<Qcsi>>> = vec![vec![None; uts]; cells];
        for cell in 0..cells {
            for ut in 0..uts {
                // A prediction followed by another high-SNR session is
                // confirmed: fold it into the map exactly like a fresh
                // estimate (reinforce cursor -> predicted, move cursor).
                // A low-SNR continuation means the prediction missed; the
                // cursor stays at the last confirmed state and the pilot
                // session below relearns from there.
                if let Some(confirmed) = self.pending_prediction[cell][ut].take() {
                    if self.prev_snr[cell][ut].unwrap_or(0.0) >= self.cfg.snr_threshold {
                        self.maps[cell]
                            .observe(ut, confirmed)
                            .expect("terminal in range");
                    }
                }
                let format = match self.options.force_hit_ratio {
                    Some(h) => {
                        if self.rng.gen::<f64>() < h {
                            TddFormat::Predictive
                        } else {
                            TddFormat::Initiative
                        }
                    }
                    None => decide_format(
                        self.prev_snr[cell][ut],
                        self.cfg.snr_threshold,
                        self.force_pilot[cell][ut],
                    ),
                };
                formats[cell][ut] = format;
                if format != TddFormat::Predictive {
                    continue;
                }
                if self.options.force_hit_ratio.is_some() {
                    // Oracle injection: the predicted state is the truth.
                    predicted[cell][ut] = Some(self.true_qcsi(cell, ut));
                    continue;
                }
                match self.maps[cell].predict(ut) {
                    Ok(qcsi) => {
                        predicted[cell][ut] = Some(qcsi);
                        self.pending_prediction[cell][ut] = Some(qcsi);
                    }
                    Err(_) => {
                        // No usable history: fall back to a pilot upload.
                        formats[cell][ut] = TddFormat::Initiative;
                        forced[cell][ut] = true;
                    }
                }
            }
        }
        let indicators: Vec<PilotIndicator> = formats
            .iter()
            .map(|row| PilotIndicator(row.iter().map(|f| *f == TddFormat::Initiative).collect()))
            .collect();

        // Pilot phase: measured own-cell gain per Initiative terminal.
        let measured = match self.estimation {
            EstimationMode::Asymptotic => self.measure_asymptotic(&indicators),
            EstimationMode::Matrix => self.measure_matrix(&indicators),
        };

        // Downlink metrics, SNR feedback, and map learning.
        let mut records = Vec::with_capacity(cells);
        for cell in 0..cells {
            let mut terminals = Vec::with_capacity(uts);
            let mut sum_rate = 0.0;
            for ut in 0..uts {
                let own = self.env.own_gain(cell, self.positions[cell][ut]);
                let true_qcsi = quantize(own.sqrt(), &self.codebook);
                let format = formats[cell][ut];
                let (qcsi, hit, sinr) = match format {
                    TddFormat::Initiative => {
                        let interferers = self.copilot_gains(cell, ut, &indicators);
                        let sinr = asymptotic_sinr(own, &interferers, self.sinr_cap)
                            .expect("positive own gain");
                        let gain_est = measured[cell][ut].expect("measured initiative terminal");
                        let q = quantize(gain_est.max(0.0).sqrt(), &self.codebook);
                        self.maps[cell].observe(ut, q).expect("terminal in range");
                        (Some(q), None, sinr)
                    }
                    TddFormat::Predictive => {
                        let q = predicted[cell][ut].expect("predicted terminal");
                        let hit = q == true_qcsi;
                        // Pilot-free precoding carries no co-pilot terms, so
                        // the asymptotic ratio is contamination-free.
                        let sinr =
                            asymptotic_sinr(own, &[], self.sinr_cap).expect("positive own gain");
                        (Some(q), Some(hit), sinr)
                    }
                };
                let rate = match (self.metric_mode, hit) {
                    (MetricMode::Penalized, Some(false)) => 0.0,
                    _ => (1.0 + sinr).log2(),
                };
                sum_rate += rate;
                // What the terminal will compare against the threshold next
                // session: a missed prediction steers the beam away from the
                // terminal, so its measured test-symbol SNR collapses.
                self.prev_snr[cell][ut] = Some(match hit {
                    Some(false) => 0.0,
                    _ => sinr,
                });
                terminals.push(UtRecord {
                    format,
                    forced: forced[cell][ut],
                    qcsi,
                    true_qcsi,
                    hit,
                    sinr,
                    rate,
                });
            }
            records.push(CellRecord {
                alpha: indicators[cell].alpha(),
                sum_rate,
                terminals,
                map_nodes: self.maps[cell].node_count(),
                map_edges: self.maps[cell].edge_count(),
            });
        }

        if self.map_params.gc_period > 0
            && self.session_index.is_multiple_of(self.map_params.gc_period)
        {
            for map in &mut self.maps {
                map.garbage_collect_default();
            }
        }

        mobility_step(
            &mut self.positions,
            self.env.plan(),
            &self.mobility,
            &mut self.rng,
        );

        SessionRecord {
            index: self.session_index,
            cells: records,
        }
    }

    /// Band-gated co-pilot gains toward `cell` for the pilot of terminal
    /// `ut`: every other cell whose same-index terminal transmitted this
    /// session and stands in its border band toward `cell`.
    fn copilot_gains(&self, cell: usize, ut: usize, indicators: &[PilotIndicator]) -> Vec<f64> {
        let mut gains = Vec::new();
        for other in 0..self.cfg.cells {
            if other == cell || !indicators[other].0[ut] {
                continue;
            }
            let gain = self
                .env
                .effective_gain(cell, other, self.positions[other][ut]);
            if gain > 0.0 {
                gains.push(gain);
            }
        }
        gains
    }

    /// Large-antenna-limit measurement: the estimate's energy concentrates
    /// on the band-gated co-pilot gain sum, own cell included.
    fn measure_asymptotic(&self, indicators: &[PilotIndicator]) -> Vec<Vec<Option<f64>>> {
        let cells = self.cfg.cells;
        let uts = self.cfg.uts_per_cell;
        let mut measured = vec![vec![None; uts]; cells];
        for cell in 0..cells {
            for ut in 0..uts {
                if !indicators[cell].0[ut] {
                    continue;
                }
                let own = self.env.own_gain(cell, self.positions[cell][ut]);
                let contamination: f64 = self.copilot_gains(cell, ut, indicators).iter().sum();
                measured[cell][ut] = Some(own + contamination);
            }
        }
        measured
    }

    /// Full Monte-Carlo pilot phase per base station: draw fading, build the
    /// received block, estimate by correlation, and extract the squared-gain
    /// measurement from the column energy after removing the noise floor.
    fn measure_matrix(&mut self, indicators: &[PilotIndicator]) -> Vec<Vec<Option<f64>>> {
        let cells = self.cfg.cells;
        let uts = self.cfg.uts_per_cell;
        let antennas = self.cfg.antennas;
        let tau = self.cfg.pilot_len as f64;
        let p_u = self.cfg.uplink_snr;
        let mut measured = vec![vec![None; uts]; cells];
        for bs in 0..cells {
            let channels: Vec<Array2<Cplx>> = (0..cells)
                .map(|cell| {
                    let large_scale: Vec<f64> = (0..uts)
                        .map(|ut| self.env.effective_gain(bs, cell, self.positions[cell][ut]))
                        .collect();
                    ChannelRealization::draw(large_scale, antennas, &mut self.rng)
                        .expect("nonnegative gains")
                        .composite
                })
                .collect();
            let received = received_pilot_signal(
                &channels,
                indicators,
                &self.pilot_book,
                p_u,
                1.0,
                &mut self.rng,
            )
            .expect("consistent shapes");
            let estimate = ls_estimate(&received, &self.pilot_book).expect("consistent shapes");
            for ut in 0..uts {
                if !indicators[bs].0[ut] {
                    continue;
                }
                let energy: f64 = estimate.column(ut).iter().map(|v| v.norm_sqr()).sum();
                let beta = (energy / antennas as f64 - 1.0).max(0.0) / (tau * p_u);
                measured[bs][ut] = Some(beta);
            }
        }
        measured
    }

    /// Assembles the hybrid precoding matrix for one base station out of the
    /// current session's estimates and predictions (diagnostic path; needs
    /// [`EstimationMode::Matrix`]-style inputs).
    pub fn assemble_hybrid(
        &mut self,
        cell: usize,
        estimate: &Array2<Cplx>,
        predictions: &[Option<Qcsi>],
    ) -> Result<HybridChannel, SimError> {
        let uts = self.cfg.uts_per_cell;
        let antennas = self.cfg.antennas;
        let scale = 1.0 / (self.cfg.pilot_len as f64 * self.cfg.uplink_snr).sqrt();
        let mut matrix = Array2::zeros((antennas, uts));
        let mut sources = Vec::with_capacity(uts);
        for ut in 0..uts {
            match predictions[ut] {
                Some(qcsi) => {
                    if self.maps[cell].codebook_version() != self.codebook.version() {
                        return Err(SimError::CodebookVersion {
                            map: self.maps[cell].codebook_version(),
                            codebook: self.codebook.version(),
                        });
                    }
                    let (gain, _) = dequantize(qcsi, &self.codebook)?;
                    // Fast fading is unknowable without a pilot; a fresh
                    // isotropic draw carries the predicted large-scale gain.
                    let fading = crate::channel::draw_fast_fading(antennas, 1, &mut self.rng);
                    for m in 0..antennas {
                        matrix[(m, ut)] = fading[(m, 0)] * gain;
                    }
                    sources.push(ColumnSource::Predicted);
                }
                None => {
                    for m in 0..antennas {
                        matrix[(m, ut)] = estimate[(m, ut)] * scale;
                    }
                    sources.push(ColumnSource::Estimated);
                }
            }
        }
        Ok(HybridChannel::new(matrix, sources))
    }
}

/// Everything the codebook designer needs from a pilot-only warmup run:
/// measured gains plus the geometry side information for seeding.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub gains: Vec<f64>,
    pub distances: Vec<f64>,
    pub shadows: Vec<f64>,
}

/// Simulates `sessions` all-pilot sessions and collects the measured gain
/// of every terminal at its serving station, with the true distances and
/// shadow draws alongside.
pub fn collect_training_data(
    cfg: &SystemConfig,
    mobility: &MobilityParams,
    sessions: usize,
) -> Result<TrainingData, SimError> {
    cfg.validate()?;
    mobility.validate().map_err(SimError::Mobility)?;
    let plan = FloorPlan::new(
        cfg.cells,
        cfg.cell_area,
        cfg.overlap_fraction,
        mobility.grid_step,
    )?;
    let env = Environment::new(
        plan,
        cfg.shadow_sigma_db,
        cfg.path_loss_exponent,
        cfg.rng_seed,
    );
    let mut placement_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, PLACEMENT_STREAM));
    let mut positions =
        initial_positions(cfg.cells, cfg.uts_per_cell, env.plan(), &mut placement_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, SESSION_STREAM));
    let mut data = TrainingData {
        gains: Vec::new(),
        distances: Vec::new(),
        shadows: Vec::new(),
    };
    for _ in 0..sessions {
        for cell in 0..cfg.cells {
            for ut in 0..cfg.uts_per_cell {
                let grid = positions[cell][ut];
                let ls = env.large_scale(cell, cell, grid);
                // All-pilot warmup: every co-pilot cell contaminates.
                let contamination: f64 = (0..cfg.cells)
                    .filter(|other| *other != cell)
                    .map(|other| env.effective_gain(cell, other, positions[other][ut]))
                    .sum();
                data.gains.push((ls.gain + contamination).sqrt());
                data.distances.push(ls.distance);
                data.shadows.push(ls.shadow);
            }
        }
        mobility_step(&mut positions, env.plan(), mobility, &mut rng);
    }
    Ok(data)
}
