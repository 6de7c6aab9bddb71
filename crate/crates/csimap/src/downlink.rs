//! Forward link: conjugate beamforming from the hybrid channel matrix, the
//! asymptotic per-terminal SINR, and Shannon sum-rate.

use crate::channel::draw_fast_fading;
use crate::Cplx;
use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

/// SINR assigned when a terminal has no co-pilot contaminators; the
/// interference-limited ratio degenerates otherwise.
pub const DEFAULT_SINR_CAP: f64 = 1e6;

/// Denominators below `cap threshold * beta_own^2` count as contamination-free.
const EMPTY_DENOMINATOR_FRACTION: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DownlinkError {
    #[error("precoder is {rows}x{cols} but got {symbols} symbols")]
    SymbolMismatch {
        rows: usize,
        cols: usize,
        symbols: usize,
    },
    #[error("cell {cell}: channel/precoder dimensions disagree")]
    CellMismatch { cell: usize },
    #[error("SINR undefined: own gain and all interferer gains are zero")]
    UndefinedTerminal,
    #[error("SINR must be nonnegative and finite, got {0}")]
    BadSinr(f64),
}

/// How each column of a hybrid channel matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSource {
    /// Fresh least-squares estimate from this session's pilots.
    Estimated,
    /// Reconstructed from the CSI map's predicted quantized state.
    Predicted,
    /// Carried over unchanged from an earlier session.
    Stale,
}

/// Per-cell precoding matrix whose columns mix fresh estimates and
/// map predictions, with one source tag per column.
#[derive(Debug, Clone)]
pub struct HybridChannel {
    pub matrix: Array2<Cplx>,
    pub sources: Vec<ColumnSource>,
}

impl HybridChannel {
    pub fn new(matrix: Array2<Cplx>, sources: Vec<ColumnSource>) -> Self {
        assert_eq!(matrix.ncols(), sources.len(), "one source tag per column");
        HybridChannel { matrix, sources }
    }
}

/// Per-terminal link quality for one cell and one session.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    /// Linear SINR per terminal.
    pub sinr: Vec<f64>,
    /// `log2(1 + sinr)` per terminal, bits/s/Hz.
    pub rate: Vec<f64>,
    /// Sum of the per-terminal rates.
    pub sum_rate: f64,
}

/// Conjugate (eigen-)beamforming: the transmitted vector is `conj(G_hat) * x`.
pub fn precode_conjugate(
    estimate: &Array2<Cplx>,
    symbols: &[Cplx],
) -> Result<Vec<Cplx>, DownlinkError> {
    if estimate.ncols() != symbols.len() {
        return Err(DownlinkError::SymbolMismatch {
            rows: estimate.nrows(),
            cols: estimate.ncols(),
            symbols: symbols.len(),
        });
    }
    let mut out = vec![Cplx::new(0.0, 0.0); estimate.nrows()];
    for (col, sym) in symbols.iter().enumerate() {
        for m in 0..estimate.nrows() {
            out[m] += estimate[(m, col)].conj() * sym;
        }
    }
    Ok(out)
}

/// Signal seen by the terminals of one cell: every base station's transmit
/// vector rides through the transpose of its channel toward those terminals,
/// scaled by `sqrt(downlink_snr)`, plus unit-variance noise times
/// `noise_scale`.
///
/// `channels[l]` is the (antennas x terminals) matrix between base station
/// `l` and this cell's terminals; `transmits[l]` is what station `l` radiates.
pub fn downlink_received<R: Rng>(
    channels: &[Array2<Cplx>],
    transmits: &[Vec<Cplx>],
    downlink_snr: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Vec<Cplx>, DownlinkError> {
    let terminals = channels.first().map(|g| g.ncols()).unwrap_or(0);
    if channels.len() != transmits.len() {
        return Err(DownlinkError::CellMismatch {
            cell: transmits.len(),
        });
    }
    let mut received: Vec<Cplx> = if noise_scale == 0.0 {
        vec![Cplx::new(0.0, 0.0); terminals]
    } else {
        let noise = draw_fast_fading(terminals, 1, rng);
        noise.column(0).iter().map(|v| v * noise_scale).collect()
    };
    let amp = downlink_snr.sqrt();
    for (cell, (g, t)) in channels.iter().zip(transmits).enumerate() {
        if g.ncols() != terminals || g.nrows() != t.len() {
            return Err(DownlinkError::CellMismatch { cell });
        }
        for k in 0..terminals {
            let mut acc = Cplx::new(0.0, 0.0);
            for m in 0..g.nrows() {
                acc += g[(m, k)] * t[m];
            }
            received[k] += acc * amp;
        }
    }
    Ok(received)
}

/// Large-antenna-limit SINR: own large-scale gain squared over the sum of
/// squared co-pilot gains. An (effectively) empty denominator returns `cap`.
pub fn asymptotic_sinr(
    beta_own: f64,
    beta_interferers: &[f64],
    cap: f64,
) -> Result<f64, DownlinkError> {
    let denominator: f64 = beta_interferers.iter().map(|b| b * b).sum();
    if beta_own == 0.0 && denominator == 0.0 {
        return Err(DownlinkError::UndefinedTerminal);
    }
    if denominator < EMPTY_DENOMINATOR_FRACTION * beta_own * beta_own {
        return Ok(cap);
    }
    Ok(beta_own * beta_own / denominator)
}

/// Shannon mapping `rate_k = log2(1 + sinr_k)` and the cell sum.
pub fn sum_rate(sinr: &[f64]) -> Result<LinkMetrics, DownlinkError> {
    if let Some(&bad) = sinr.iter().find(|s| **s < 0.0 || !s.is_finite()) {
        return Err(DownlinkError::BadSinr(bad));
    }
    let rate: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
    let sum = rate.iter().sum();
    Ok(LinkMetrics {
        sinr: sinr.to_vec(),
        rate,
        sum_rate: sum,
    })
}
