//! Static radio environment over the mobility lattice.
//!
//! Shadowing is a property of a location, so each (base station, lattice
//! point) pair gets one shadow draw that never changes; a terminal
//! revisiting a grid position sees exactly the same large-scale gain, which
//! is what makes quantized states recur and the CSI map learnable. The full
//! gain tables are precomputed at construction.

use super::geometry::{FloorPlan, GridPos};
use crate::channel::{draw_shadow, LargeScaleFading};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Precomputed large-scale fading between every base station and every
/// lattice point of every cell.
#[derive(Debug, Clone)]
pub struct Environment {
    plan: FloorPlan,
    /// `[bs][cell][point]` with `point = iy * lattice_n + ix`.
    entries: Vec<Vec<Vec<LargeScaleFading>>>,
}

/// Distinct RNG stream tags, mixed into the master seed.
const SHADOW_STREAM: u64 = 0x5348_4144;

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the xor of seed and stream tag.
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Environment {
    pub fn new(plan: FloorPlan, shadow_sigma_db: f64, path_loss_exponent: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, SHADOW_STREAM));
        let n = plan.lattice_n();
        let cells = plan.cells();
        let mut entries = Vec::with_capacity(cells);
        for bs in 0..cells {
            let mut per_cell = Vec::with_capacity(cells);
            for cell in 0..cells {
                let mut per_point = Vec::with_capacity(n * n);
                for iy in 0..n {
                    for ix in 0..n {
                        let pos = plan.position(cell, GridPos { ix, iy });
                        let z = draw_shadow(shadow_sigma_db, &mut rng);
                        let r = plan.distance_to_bs(pos, bs);
                        let ls = LargeScaleFading::new(z, r, path_loss_exponent)
                            .expect("positive distance and shadow");
                        per_point.push(ls);
                    }
                }
                per_cell.push(per_point);
            }
            entries.push(per_cell);
        }
        Environment { plan, entries }
    }

    pub fn plan(&self) -> &FloorPlan {
        &self.plan
    }

    fn point_index(&self, grid: GridPos) -> usize {
        grid.iy * self.plan.lattice_n() + grid.ix
    }

    /// Large-scale fading between base station `bs` and a terminal of
    /// `cell` sitting at `grid`.
    pub fn large_scale(&self, bs: usize, cell: usize, grid: GridPos) -> LargeScaleFading {
        self.entries[bs][cell][self.point_index(grid)]
    }

    /// Gain toward the serving base station.
    pub fn own_gain(&self, cell: usize, grid: GridPos) -> f64 {
        self.large_scale(cell, cell, grid).gain
    }

    /// Gain a terminal of `cell` at `grid` contributes at base station `bs`,
    /// after the interference-band gate: cross-cell gains count only when
    /// the terminal stands in its cell's band toward `bs`.
    pub fn effective_gain(&self, bs: usize, cell: usize, grid: GridPos) -> f64 {
        if bs == cell {
            return self.entries[bs][cell][self.point_index(grid)].gain;
        }
        let pos = self.plan.position(cell, grid);
        if self.plan.in_band_toward(pos, bs) {
            self.entries[bs][cell][self.point_index(grid)].gain
        } else {
            0.0
        }
    }
}
