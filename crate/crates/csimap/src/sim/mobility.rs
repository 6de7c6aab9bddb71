//! Discrete random-walk mobility over each cell's lattice.

use super::geometry::{FloorPlan, GridPos};
use rand::Rng;

/// Random-walk knobs: terminals hold their position with `dwell_prob`,
/// otherwise take one lattice step in a uniformly random cardinal
/// direction, reflecting off their home cell's walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub grid_step: f64,
    pub dwell_prob: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            grid_step: 1.0,
            dwell_prob: 0.8,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.grid_step.is_nan() || self.grid_step <= 0.0 {
            return Err(format!(
                "grid_step must be positive, got {}",
                self.grid_step
            ));
        }
        if !(0.0..=1.0).contains(&self.dwell_prob) {
            return Err(format!(
                "dwell_prob must lie in [0, 1], got {}",
                self.dwell_prob
            ));
        }
        Ok(())
    }
}

/// Mirrors an out-of-range step around the boundary node, so a moving
/// terminal never lands back on its own position (for lattices of 2+
/// points): `-1 -> 1` and `n -> n-2`.
fn reflect(proposed: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    if proposed < 0 {
        (-proposed) as usize
    } else if proposed as usize >= n {
        2 * (n - 1) - proposed as usize
    } else {
        proposed as usize
    }
}

/// Advances every terminal one session: `positions[cell][ut]` is updated in
/// place. Draw order is (cell, terminal), so the walk is reproducible for a
/// given RNG state.
pub fn mobility_step<R: Rng>(
    positions: &mut [Vec<GridPos>],
    plan: &FloorPlan,
    params: &MobilityParams,
    rng: &mut R,
) {
    let n = plan.lattice_n();
    for cell_positions in positions.iter_mut() {
        for pos in cell_positions.iter_mut() {
            if rng.gen::<f64>() < params.dwell_prob {
                continue;
            }
            let (dx, dy): (isize, isize) = match rng.gen_range(0..4u8) {
                0 => (1, 0),
                1 => (-1, 0),
                2 => (0, 1),
                _ => (0, -1),
            };
            pos.ix = reflect(pos.ix as isize + dx, n);
            pos.iy = reflect(pos.iy as isize + dy, n);
        }
    }
}

/// Uniform initial placement over the cell lattice.
pub fn initial_positions<R: Rng>(
    cells: usize,
    uts_per_cell: usize,
    plan: &FloorPlan,
    rng: &mut R,
) -> Vec<Vec<GridPos>> {
    let n = plan.lattice_n();
    (0..cells)
        .map(|_| {
            (0..uts_per_cell)
                .map(|_| GridPos {
                    ix: rng.gen_range(0..n),
                    iy: rng.gen_range(0..n),
                })
                .collect()
        })
        .collect()
}
