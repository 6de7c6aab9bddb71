//! Physical channel generation.
//!
//! The channel between a base station and the terminals of one cell is
//! `G = H * D^(1/2)`: independent unit-variance complex Gaussian fast fading
//! `H` scaled per column by the square root of the large-scale coefficient.
//! The large-scale coefficient itself decomposes as `beta = z / r^gamma`
//! (lognormal shadowing over distance-power path loss).

use crate::Cplx;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Terminals may not sit closer to the array than this; `beta` diverges as
/// the distance goes to zero.
pub const MIN_BS_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("shadow coefficient must be nonnegative, got {0}")]
    NegativeShadow(f64),
    #[error("dimension mismatch: H is {h_rows}x{h_cols}, D has {d_len} diagonal entries")]
    DimensionMismatch {
        h_rows: usize,
        h_cols: usize,
        d_len: usize,
    },
    #[error("large-scale diagonal entry {index} is negative ({value})")]
    NegativeLargeScale { index: usize, value: f64 },
    #[error("large-scale diagonal is all zero")]
    ZeroLargeScale,
}

/// One large-scale fading entry with the components it was built from.
///
/// The stored `gain` is exactly `shadow / distance^exponent`; keeping the
/// factors around lets the quantizer seed its distance codebook from real
/// geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleFading {
    /// Linear gain `beta`.
    pub gain: f64,
    /// Linear shadow draw `z`.
    pub shadow: f64,
    /// BS-UT distance in meters (already clamped to [`MIN_BS_DISTANCE_M`]).
    pub distance: f64,
}

impl LargeScaleFading {
    /// Builds the coefficient from its factors, clamping the distance.
    pub fn new(shadow: f64, distance: f64, exponent: f64) -> Result<Self, ChannelError> {
        let distance = distance.max(MIN_BS_DISTANCE_M);
        let gain = large_scale_fading(shadow, distance, exponent)?;
        Ok(LargeScaleFading {
            gain,
            shadow,
            distance,
        })
    }
}

/// A full channel draw for one (BS, cell) pair.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Fast-fading matrix, antennas x terminals.
    pub fast: Array2<Cplx>,
    /// Diagonal of the large-scale matrix, one entry per terminal.
    pub large_scale: Vec<f64>,
    /// Composite channel `G = H * D^(1/2)`.
    pub composite: Array2<Cplx>,
}

impl ChannelRealization {
    pub fn draw<R: Rng>(
        large_scale: Vec<f64>,
        antennas: usize,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        let fast = draw_fast_fading(antennas, large_scale.len(), rng);
        let composite = assemble_channel(&fast, &large_scale)?;
        Ok(ChannelRealization {
            fast,
            large_scale,
            composite,
        })
    }
}

/// Draws one linear shadow coefficient: `10^(N(0, sigma_db) / 10)`.
///
/// `sigma_db = 0` degenerates to exactly 1.
pub fn draw_shadow<R: Rng>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let n: f64 = StandardNormal.sample(rng);
    10f64.powf(sigma_db * n / 10.0)
}

/// `beta = z / r^gamma`, exactly as stored downstream.
pub fn large_scale_fading(shadow: f64, distance: f64, exponent: f64) -> Result<f64, ChannelError> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    if shadow < 0.0 {
        return Err(ChannelError::NegativeShadow(shadow));
    }
    Ok(shadow / distance.powf(exponent))
}

/// Draws an antennas x terminals matrix of i.i.d. circularly-symmetric
/// complex Gaussians with unit variance (each part has variance 1/2).
pub fn draw_fast_fading<R: Rng>(antennas: usize, terminals: usize, rng: &mut R) -> Array2<Cplx> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_fn((antennas, terminals), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Cplx::new(re * scale, im * scale)
    })
}

/// `G = H * D^(1/2)`: column `k` of `H` scaled by `sqrt(beta_k)`.
pub fn assemble_channel(
    fast: &Array2<Cplx>,
    large_scale: &[f64],
) -> Result<Array2<Cplx>, ChannelError> {
    if fast.ncols() != large_scale.len() {
        return Err(ChannelError::DimensionMismatch {
            h_rows: fast.nrows(),
            h_cols: fast.ncols(),
            d_len: large_scale.len(),
        });
    }
    if let Some((index, &value)) = large_scale.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(ChannelError::NegativeLargeScale { index, value });
    }
    let mut composite = fast.clone();
    for (mut col, &beta) in composite.columns_mut().into_iter().zip(large_scale) {
        let s = beta.sqrt();
        col.mapv_inplace(|v| v * s);
    }
    Ok(composite)
}

/// Relative Frobenius distance between `G^H G / M` and the large-scale
/// diagonal: diagnostic for channel hardening, shrinking as `O(1/sqrt(M))`.
pub fn hardening_deviation(
    composite: &Array2<Cplx>,
    large_scale: &[f64],
) -> Result<f64, ChannelError> {
    if composite.ncols() != large_scale.len() {
        return Err(ChannelError::DimensionMismatch {
            h_rows: composite.nrows(),
            h_cols: composite.ncols(),
            d_len: large_scale.len(),
        });
    }
    let d_norm_sq: f64 = large_scale.iter().map(|b| b * b).sum();
    if d_norm_sq == 0.0 {
        return Err(ChannelError::ZeroLargeScale);
    }
    let m = composite.nrows() as f64;
    let k = composite.ncols();
    let mut dev_sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            let mut acc = Cplx::new(0.0, 0.0);
            for row in 0..composite.nrows() {
                acc += composite[(row, a)].conj() * composite[(row, b)];
            }
            let mut entry = acc / m;
            if a == b {
                entry -= large_scale[a];
            }
            dev_sq += entry.norm_sqr();
        }
    }
    Ok((dev_sq / d_norm_sq).sqrt())
}
