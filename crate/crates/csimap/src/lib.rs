//! Multi-cell massive MIMO TDD simulator with quantized-CSI map learning.
//!
//! Base stations learn a weighted directed graph ("CSI map") of quantized
//! channel states from uplink pilot estimates. User terminals that previously
//! saw a good downlink SNR skip their pilots; the base station predicts their
//! channel by following the maximum-weight edge out of the terminal's current
//! node. Fewer simultaneous pilots mean fewer co-pilot cells and less pilot
//! contamination, which raises the downlink sum-rate.
//!
//! The crate is organised around the simulation pipeline:
//!
//! - [`channel`] — large-scale fading (shadowing over distance-power path
//!   loss), fast fading, and the channel-hardening diagnostic.
//! - [`uplink`] — TDD format decision, orthonormal pilot book with cross-cell
//!   reuse, the pilot-phase received signal, and least-squares estimation.
//! - [`downlink`] — conjugate beamforming, per-terminal asymptotic SINR and
//!   sum-rate.
//! - [`quantizer`] — the two-part codebook (shadow set, distance set) designed
//!   by Lloyd iteration, with quantize/dequantize and a flat file format.
//! - [`map`] — the CSI map graph: online edge reinforcement, max-weight
//!   prediction, and threshold garbage collection.
//! - [`sim`] — geometry, grid mobility, the per-session protocol loop, and
//!   experiment sweeps that write CSV outputs.
//!
//! Runnable walkthroughs for each capability live under `examples/`; the
//! `csimap` binary exposes the same machinery as subcommands.

// Cell and terminal indices address several parallel tables at once, so the
// protocol loops stay index-based.
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod config;
pub mod downlink;
pub mod map;
pub mod quantizer;
pub mod sim;
pub mod uplink;

pub use config::SystemConfig;
pub use map::{CsiMap, MapError, PredictError};
pub use quantizer::{Codebook, Qcsi, QuantizerError};
pub use uplink::TddFormat;

/// Complex sample type used throughout the simulator.
pub type Cplx = num_complex::Complex64;

/// Formats an `f64` with 17 significant digits, enough to reparse bit-exactly.
pub(crate) fn fmt_f64_exact(v: f64) -> String {
    format!("{:.16e}", v)
}
