//! Scalar system parameters shared by every stage of the simulator.

use thiserror::Error;

/// Validation failures for [`SystemConfig`].
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("pilot_len ({pilot_len}) must be at least uts_per_cell ({uts_per_cell}) so orthogonal pilots exist within a cell")]
    PilotBookTooShort {
        pilot_len: usize,
        uts_per_cell: usize,
    },
    #[error("overlap_fraction must lie in [0, 1), got {0}")]
    OverlapOutOfRange(f64),
    #[error("shadow_sigma_db must be finite and >= 0, got {0}")]
    BadShadowSigma(f64),
    #[error("{field} must be a positive integer")]
    ZeroCount { field: &'static str },
}

/// All scalar model parameters: cell counts, array size, pilot length,
/// power levels, fading parameters, and floor geometry.
///
/// Power fields (`uplink_snr`, `downlink_snr`, `snr_threshold`) are linear
/// ratios, not dB. `shadow_sigma_db` is the dB-domain standard deviation of
/// the lognormal shadowing.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of cells, each served by one base station.
    pub cells: usize,
    /// Antennas per base station.
    pub antennas: usize,
    /// Single-antenna user terminals per cell.
    pub uts_per_cell: usize,
    /// Pilot sequence length in symbols.
    pub pilot_len: usize,
    /// Path-loss exponent applied to the BS-UT distance.
    pub path_loss_exponent: f64,
    /// Shadow fading standard deviation in dB (0 disables shadowing).
    pub shadow_sigma_db: f64,
    /// Normalized uplink SNR per terminal, linear.
    pub uplink_snr: f64,
    /// Normalized downlink SNR per terminal, linear.
    pub downlink_snr: f64,
    /// Floor area of a single cell in square meters.
    pub cell_area: f64,
    /// Fraction of each cell's area shared with neighbor cells, in [0, 1).
    pub overlap_fraction: f64,
    /// Linear downlink SNR above which a terminal skips its pilot.
    pub snr_threshold: f64,
    /// Seed for the geometry/shadow-field and session randomness.
    pub rng_seed: u64,
}

impl SystemConfig {
    /// Desk-scale defaults: small enough for fast tests, same cell layout as
    /// the shipped `full.cfg` profile (six cells over 300 m², 15% overlap).
    pub fn desk_scale() -> Self {
        SystemConfig {
            cells: 6,
            antennas: 128,
            uts_per_cell: 8,
            pilot_len: 8,
            path_loss_exponent: 3.8,
            shadow_sigma_db: 8.0,
            uplink_snr: 10.0,
            downlink_snr: 10.0,
            cell_area: 50.0,
            overlap_fraction: 0.15,
            snr_threshold: 10.0,
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("cells", self.cells),
            ("antennas", self.antennas),
            ("uts_per_cell", self.uts_per_cell),
            ("pilot_len", self.pilot_len),
        ] {
            if value == 0 {
                return Err(ConfigError::ZeroCount { field });
            }
        }
        if self.pilot_len < self.uts_per_cell {
            return Err(ConfigError::PilotBookTooShort {
                pilot_len: self.pilot_len,
                uts_per_cell: self.uts_per_cell,
            });
        }
        for (field, value) in [
            ("path_loss_exponent", self.path_loss_exponent),
            ("uplink_snr", self.uplink_snr),
            ("downlink_snr", self.downlink_snr),
            ("cell_area", self.cell_area),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        // An infinite threshold is meaningful: it pins every terminal to
        // pilot uploads, the conventional all-pilot baseline.
        if self.snr_threshold.is_nan() || self.snr_threshold <= 0.0 {
            return Err(ConfigError::NonPositive {
                field: "snr_threshold",
                value: self.snr_threshold,
            });
        }
        if !self.shadow_sigma_db.is_finite() || self.shadow_sigma_db < 0.0 {
            return Err(ConfigError::BadShadowSigma(self.shadow_sigma_db));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(ConfigError::OverlapOutOfRange(self.overlap_fraction));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_is_valid() {
        SystemConfig::desk_scale().validate().unwrap();
    }

    #[test]
    fn pilot_book_shorter_than_uts_is_rejected() {
        let mut cfg = SystemConfig::desk_scale();
        cfg.pilot_len = cfg.uts_per_cell - 1;
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::PilotBookTooShort {
                pilot_len: cfg.pilot_len,
                uts_per_cell: cfg.uts_per_cell
            })
        );
    }

    #[test]
    fn overlap_must_stay_below_one() {
        let mut cfg = SystemConfig::desk_scale();
        cfg.overlap_fraction = 1.0;
        assert_eq!(cfg.validate(), Err(ConfigError::OverlapOutOfRange(1.0)));
        cfg.overlap_fraction = -0.1;
        assert!(cfg.validate().is_err());
        cfg.overlap_fraction = 0.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn zero_power_is_rejected() {
        let mut cfg = SystemConfig::desk_scale();
        cfg.uplink_snr = 0.0;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::NonPositive {
                field: "uplink_snr",
                ..
            })
        ));
    }
}
