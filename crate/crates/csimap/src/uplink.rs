//! Uplink side of the TDD session: format decision, pilot book with
//! cross-cell reuse, the pilot-phase received signal, and least-squares
//! channel estimation under contamination.

use crate::channel::draw_fast_fading;
use crate::Cplx;
use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UplinkError {
    #[error("pilot columns are not orthonormal (worst deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("pilot book needs 1 <= columns <= rows, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("cell {cell}: channel is {rows}x{cols}, expected {exp_rows}x{exp_cols}")]
    ChannelShape {
        cell: usize,
        rows: usize,
        cols: usize,
        exp_rows: usize,
        exp_cols: usize,
    },
    #[error("expected {expected} indicator vectors of length {len}, got {got}")]
    IndicatorShape {
        expected: usize,
        len: usize,
        got: usize,
    },
    #[error("received signal is {rows}x{cols}, pilot book expects {exp_cols} symbol columns")]
    SignalShape {
        rows: usize,
        cols: usize,
        exp_cols: usize,
    },
}

/// The two reverse-link frame types a terminal can upload.
///
/// `Initiative` carries a pilot sequence and triggers estimation at the base
/// station; `Predictive` carries none and asks the base station to predict
/// the channel from its CSI map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TddFormat {
    Initiative,
    Predictive,
}

/// Picks the frame format from the previously measured downlink SNR.
///
/// Terminals with no history upload `Initiative`; so do terminals the base
/// station flagged via `force_pilot` (the test-symbol power control). The
/// boundary `snr == threshold` lands on the high side, i.e. `Predictive`.
pub fn decide_format(
    prev_downlink_snr: Option<f64>,
    snr_threshold: f64,
    force_pilot: bool,
) -> TddFormat {
    match prev_downlink_snr {
        _ if force_pilot => TddFormat::Initiative,
        None => TddFormat::Initiative,
        Some(snr) if snr < snr_threshold => TddFormat::Initiative,
        Some(_) => TddFormat::Predictive,
    }
}

/// Number of cells uploading the same pilot sequence: `round(cells * alpha)`
/// with half-up rounding, clamped to `[0, cells]`.
pub fn pilot_participation(cells: usize, alpha: f64) -> usize {
    let raw = (cells as f64 * alpha).round();
    (raw.max(0.0) as usize).min(cells)
}

/// Per-cell binary flags: `true` marks a terminal uploading an Initiative
/// frame (and therefore transmitting its pilot) this session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotIndicator(pub Vec<bool>);

impl PilotIndicator {
    pub fn all_on(len: usize) -> Self {
        PilotIndicator(vec![true; len])
    }

    pub fn all_off(len: usize) -> Self {
        PilotIndicator(vec![false; len])
    }

    pub fn alpha(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().filter(|s| **s).count() as f64 / self.0.len() as f64
    }
}

/// Orthonormal pilot sequences, one column per terminal index.
///
/// Column `k` is assigned to terminal `k` in every cell, so the same
/// sequence is reused exactly once per cell.
#[derive(Debug, Clone)]
pub struct PilotBook {
    /// pilot_len x terminals, columns pairwise orthonormal.
    sequences: Array2<Cplx>,
    /// Terminal index -> column index (identity by default).
    reuse_map: Vec<usize>,
}

const ORTHONORMALITY_TOL: f64 = 1e-9;

impl PilotBook {
    /// Discrete-Fourier construction: column `k` has entries
    /// `exp(2*pi*i*t*k/len) / sqrt(len)`, orthonormal for `terminals <= len`.
    pub fn dft(pilot_len: usize, terminals: usize) -> Result<Self, UplinkError> {
        if terminals == 0 || terminals > pilot_len {
            return Err(UplinkError::BadShape {
                rows: pilot_len,
                cols: terminals,
            });
        }
        let scale = 1.0 / (pilot_len as f64).sqrt();
        let step = 2.0 * std::f64::consts::PI / pilot_len as f64;
        let sequences = Array2::from_shape_fn((pilot_len, terminals), |(t, k)| {
            let phase = step * (t as f64) * (k as f64);
            Cplx::new(phase.cos() * scale, phase.sin() * scale)
        });
        Ok(PilotBook {
            sequences,
            reuse_map: (0..terminals).collect(),
        })
    }

    /// Wraps an arbitrary matrix, verifying that columns are orthonormal.
    pub fn from_matrix(sequences: Array2<Cplx>) -> Result<Self, UplinkError> {
        let (rows, cols) = sequences.dim();
        if cols == 0 || cols > rows {
            return Err(UplinkError::BadShape { rows, cols });
        }
        let mut worst: f64 = 0.0;
        for a in 0..cols {
            for b in a..cols {
                let mut acc = Cplx::new(0.0, 0.0);
                for t in 0..rows {
                    acc += sequences[(t, a)].conj() * sequences[(t, b)];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        if worst > ORTHONORMALITY_TOL {
            return Err(UplinkError::NotOrthonormal(worst));
        }
        let reuse_map = (0..cols).collect();
        Ok(PilotBook {
            sequences,
            reuse_map,
        })
    }

    pub fn pilot_len(&self) -> usize {
        self.sequences.nrows()
    }

    pub fn terminals(&self) -> usize {
        self.sequences.ncols()
    }

    pub fn column_for(&self, terminal: usize) -> usize {
        self.reuse_map[terminal]
    }

    pub fn sequences(&self) -> &Array2<Cplx> {
        &self.sequences
    }
}

/// Received pilot-phase signal at one base station.
///
/// `Y = sqrt(pilot_len * uplink_snr) * sum_l G_l * diag(s_l) * P^T + W`,
/// with `W` i.i.d. unit-variance complex Gaussian noise scaled by
/// `noise_scale` (pass 0 for the noiseless oracle path).
pub fn received_pilot_signal<R: Rng>(
    channels: &[Array2<Cplx>],
    indicators: &[PilotIndicator],
    book: &PilotBook,
    uplink_snr: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Array2<Cplx>, UplinkError> {
    let tau = book.pilot_len();
    let k = book.terminals();
    if indicators.len() != channels.len() || indicators.iter().any(|s| s.0.len() != k) {
        return Err(UplinkError::IndicatorShape {
            expected: channels.len(),
            len: k,
            got: indicators.len(),
        });
    }
    let antennas = channels.first().map(|g| g.nrows()).unwrap_or(0);
    for (cell, g) in channels.iter().enumerate() {
        if g.nrows() != antennas || g.ncols() != k {
            return Err(UplinkError::ChannelShape {
                cell,
                rows: g.nrows(),
                cols: g.ncols(),
                exp_rows: antennas,
                exp_cols: k,
            });
        }
    }

    let amp = (tau as f64 * uplink_snr).sqrt();
    let mut received = if noise_scale == 0.0 {
        Array2::zeros((antennas, tau))
    } else {
        let mut noise = draw_fast_fading(antennas, tau, rng);
        noise.mapv_inplace(|v| v * noise_scale);
        noise
    };
    for (g, s) in channels.iter().zip(indicators) {
        for (ut, &active) in s.0.iter().enumerate() {
            if !active {
                continue;
            }
            let col = book.column_for(ut);
            for t in 0..tau {
                // Terminal `ut` transmits symbol P[t, col] at time t.
                let sym = book.sequences[(t, col)] * amp;
                for m in 0..antennas {
                    received[(m, t)] += g[(m, ut)] * sym;
                }
            }
        }
    }
    Ok(received)
}

/// Least-squares channel estimate: correlation of the received pilot block
/// against each (orthonormal) pilot sequence.
///
/// With zero noise and a single transmitting cell this recovers
/// `sqrt(pilot_len * uplink_snr) * G` exactly; under pilot reuse it returns
/// the same scale times the sum of all co-pilot channels plus filtered
/// noise that is still unit-variance i.i.d.
pub fn ls_estimate(received: &Array2<Cplx>, book: &PilotBook) -> Result<Array2<Cplx>, UplinkError> {
    let tau = book.pilot_len();
    if received.ncols() != tau {
        return Err(UplinkError::SignalShape {
            rows: received.nrows(),
            cols: received.ncols(),
            exp_cols: tau,
        });
    }
    let antennas = received.nrows();
    let k = book.terminals();
    let mut estimate = Array2::zeros((antennas, k));
    for ut in 0..k {
        let col = book.column_for(ut);
        for m in 0..antennas {
            let mut acc = Cplx::new(0.0, 0.0);
            for t in 0..tau {
                acc += received[(m, t)] * book.sequences[(t, col)].conj();
            }
            estimate[(m, ut)] = acc;
        }
    }
    Ok(estimate)
}
