//! Floor geometry: rectangular cells tiling the floor, base stations at
//! cell centers, a per-cell mobility lattice, and the border bands through
//! which terminals contaminate neighbor cells.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cell count must be positive")]
    NoCells,
    #[error("cell area must be positive, got {0}")]
    BadArea(f64),
    #[error("grid step must be positive, got {0}")]
    BadGridStep(f64),
    #[error("overlap fraction must lie in [0, 1), got {0}")]
    BadOverlap(f64),
}

/// A terminal location: floor coordinates plus the owning cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub cell: usize,
}

/// Lattice coordinates of a terminal inside its home cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPos {
    pub ix: usize,
    pub iy: usize,
}

/// Cells arranged in a `rows x cols` grid of `side x side` squares; the
/// factorization of the cell count is chosen as close to square as possible.
#[derive(Debug, Clone)]
pub struct FloorPlan {
    cells: usize,
    rows: usize,
    cols: usize,
    side: f64,
    lattice_n: usize,
    lattice_margin: f64,
    grid_step: f64,
    overlap_fraction: f64,
    band_width: Vec<f64>,
}

impl FloorPlan {
    pub fn new(
        cells: usize,
        cell_area: f64,
        overlap_fraction: f64,
        grid_step: f64,
    ) -> Result<Self, GeometryError> {
        if cells == 0 {
            return Err(GeometryError::NoCells);
        }
        if cell_area.is_nan() || cell_area <= 0.0 {
            return Err(GeometryError::BadArea(cell_area));
        }
        if grid_step.is_nan() || grid_step <= 0.0 {
            return Err(GeometryError::BadGridStep(grid_step));
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(GeometryError::BadOverlap(overlap_fraction));
        }
        let rows = (1..=cells)
            .filter(|r| cells.is_multiple_of(*r) && *r * *r <= cells)
            .max()
            .unwrap_or(1);
        let cols = cells / rows;
        let side = cell_area.sqrt();
        // Span the whole cell: edge lattice points must be able to reach
        // the interference band even when it is narrow.
        let lattice_n = ((side / grid_step).floor() as usize + 1).max(1);
        let lattice_margin = (side - (lattice_n - 1) as f64 * grid_step) / 2.0;
        let mut plan = FloorPlan {
            cells,
            rows,
            cols,
            side,
            lattice_n,
            lattice_margin,
            grid_step,
            overlap_fraction,
            band_width: Vec::new(),
        };
        plan.band_width = (0..cells).map(|c| plan.solve_band_width(c)).collect();
        Ok(plan)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cell_side(&self) -> f64 {
        self.side
    }

    /// Lattice points per axis inside one cell.
    pub fn lattice_n(&self) -> usize {
        self.lattice_n
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    fn grid_of(&self, cell: usize) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    fn cell_at(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> (f64, f64) {
        let (row, col) = self.grid_of(cell);
        (col as f64 * self.side, row as f64 * self.side)
    }

    /// Base stations sit at cell centers.
    pub fn bs_position(&self, cell: usize) -> (f64, f64) {
        let (x0, y0) = self.cell_origin(cell);
        (x0 + self.side / 2.0, y0 + self.side / 2.0)
    }

    /// Cells sharing an edge with `cell`, in index order.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        let (row, col) = self.grid_of(cell);
        let mut out = Vec::new();
        if row > 0 {
            out.push(self.cell_at(row - 1, col));
        }
        if col > 0 {
            out.push(self.cell_at(row, col - 1));
        }
        if col + 1 < self.cols {
            out.push(self.cell_at(row, col + 1));
        }
        if row + 1 < self.rows {
            out.push(self.cell_at(row + 1, col));
        }
        out.sort_unstable();
        out
    }

    /// Floor coordinates of a lattice point inside a cell.
    pub fn position(&self, cell: usize, grid: GridPos) -> Position {
        let (x0, y0) = self.cell_origin(cell);
        Position {
            x: x0 + self.lattice_margin + grid.ix as f64 * self.grid_step,
            y: y0 + self.lattice_margin + grid.iy as f64 * self.grid_step,
            cell,
        }
    }

    pub fn distance_to_bs(&self, pos: Position, bs: usize) -> f64 {
        let (bx, by) = self.bs_position(bs);
        ((pos.x - bx).powi(2) + (pos.y - by).powi(2)).sqrt()
    }

    /// Width of the interference band along each shared edge of `cell`,
    /// chosen so the band's total area is `overlap_fraction` of the cell.
    /// The union of per-edge strips double-counts shared corners, so for
    /// `e` shared edges and `c` shared corners the width solves
    /// `e*side*t - c*t^2 = overlap_fraction * side^2`.
    fn solve_band_width(&self, cell: usize) -> f64 {
        let target = self.overlap_fraction * self.side * self.side;
        if target == 0.0 {
            return 0.0;
        }
        let (row, col) = self.grid_of(cell);
        let north = row + 1 < self.rows;
        let south = row > 0;
        let east = col + 1 < self.cols;
        let west = col > 0;
        let edges = [north, south, east, west].iter().filter(|b| **b).count();
        if edges == 0 {
            return 0.0;
        }
        let corners = [(north, east), (north, west), (south, east), (south, west)]
            .iter()
            .filter(|(a, b)| *a && *b)
            .count();
        let e = edges as f64 * self.side;
        if corners == 0 {
            return (target / e).min(self.side);
        }
        let c = corners as f64;
        let disc = e * e - 4.0 * c * target;
        if disc <= 0.0 {
            return self.side / 2.0;
        }
        ((e - disc.sqrt()) / (2.0 * c)).min(self.side)
    }

    pub fn band_width(&self, cell: usize) -> f64 {
        self.band_width[cell]
    }

    /// Whether a terminal at `pos` (inside its home cell) sits within its
    /// cell's interference band toward `neighbor`. Always false for
    /// non-adjacent cells.
    pub fn in_band_toward(&self, pos: Position, neighbor: usize) -> bool {
        if neighbor == pos.cell || neighbor >= self.cells {
            return false;
        }
        let (row, col) = self.grid_of(pos.cell);
        let (n_row, n_col) = self.grid_of(neighbor);
        let (x0, y0) = self.cell_origin(pos.cell);
        let t = self.band_width[pos.cell];
        let adjacent_row = n_row == row && (n_col + 1 == col || col + 1 == n_col);
        let adjacent_col = n_col == col && (n_row + 1 == row || row + 1 == n_row);
        if t == 0.0 {
            return false;
        }
        if adjacent_row {
            let dist = if n_col + 1 == col {
                pos.x - x0 // neighbor to the west
            } else {
                x0 + self.side - pos.x // east
            };
            dist < t
        } else if adjacent_col {
            let dist = if n_row + 1 == row {
                pos.y - y0 // south
            } else {
                y0 + self.side - pos.y // north
            };
            dist < t
        } else {
            false
        }
    }
}
