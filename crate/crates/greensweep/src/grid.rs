//! Occupancy rasterization: field polygon in, boolean cell grid out.
//!
//! Unit cells are the robot's detection-zone footprint (0.3 m squares by
//! default). Megacells are 2x2 blocks of unit cells; the planner operates on
//! megacells and the wall-following walk expands them back to unit cells.

use crate::geo::{LocalPoint, Polygon};

/// Numerical slack for flush-with-boundary cells, in meters.
const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(String),
    #[error("field contains no free megacell")]
    EmptyField,
}

/// Rasterized field: unit-cell and megacell occupancy on a common origin.
#[derive(Debug, Clone)]
pub struct GridMap {
    origin: LocalPoint,
    cell_size: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
    mega_nx: usize,
    mega_ny: usize,
    mega_free: Vec<bool>,
}

impl GridMap {
    /// Rasterize a field boundary with obstacles.
    ///
    /// A unit cell is free iff it lies entirely inside the boundary (flush
    /// contact allowed) and no obstacle reaches into its open interior. A
    /// megacell is free iff all four of its unit cells exist and are free.
    /// The grid is anchored at the minimum corner of the boundary's bounding
    /// box.
    pub fn rasterize_field(
        boundary: &Polygon,
        obstacles: &[Polygon],
        cell_size: f64,
    ) -> Result<Self, GridError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(GridError::InvalidCellSize(format!("{cell_size}")));
        }
        let (bmin, bmax) = boundary.bounding_box();
        let nx = cell_count(bmax.x - bmin.x, cell_size);
        let ny = cell_count(bmax.y - bmin.y, cell_size);

        let mut free = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let min = LocalPoint::new(
                    bmin.x + i as f64 * cell_size,
                    bmin.y + j as f64 * cell_size,
                );
                // Shrink the probe square by EDGE_TOL so cells flush with the
                // boundary survive floating point wobble.
                let probe = LocalPoint::new(min.x + EDGE_TOL, min.y + EDGE_TOL);
                let probe_size = cell_size - 2.0 * EDGE_TOL;
                let inside = boundary.contains_cell(probe, probe_size);
                let blocked = inside
                    && obstacles
                        .iter()
                        .any(|o| o.overlaps_cell_interior(probe, probe_size));
                free[j * nx + i] = inside && !blocked;
            }
        }
        Self::from_cells(bmin, cell_size, nx, ny, free)
    }

    /// Build a grid directly from a unit-cell occupancy mask (row-major,
    /// index `j * nx + i`). Megacell occupancy is derived.
    pub fn from_cells(
        origin: LocalPoint,
        cell_size: f64,
        nx: usize,
        ny: usize,
        free: Vec<bool>,
    ) -> Result<Self, GridError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(GridError::InvalidCellSize(format!("{cell_size}")));
        }
        assert_eq!(free.len(), nx * ny, "mask length must equal nx * ny");
        let mega_nx = nx.div_ceil(2);
        let mega_ny = ny.div_ceil(2);
        let mut mega_free = vec![false; mega_nx * mega_ny];
        let mut any_free = false;
        for mj in 0..mega_ny {
            for mi in 0..mega_nx {
                // Partial megacells on the far edges stay blocked.
                let full = 2 * mi + 1 < nx && 2 * mj + 1 < ny;
                let ok = full
                    && (0..2).all(|dj| {
                        (0..2).all(|di| free[(2 * mj + dj) * nx + 2 * mi + di])
                    });
                mega_free[mj * mega_nx + mi] = ok;
                any_free |= ok;
            }
        }
        if !any_free {
            return Err(GridError::EmptyField);
        }
        Ok(Self {
            origin,
            cell_size,
            nx,
            ny,
            free,
            mega_nx,
            mega_ny,
            mega_free,
        })
    }

    pub fn origin(&self) -> LocalPoint {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn mega_nx(&self) -> usize {
        self.mega_nx
    }

    pub fn mega_ny(&self) -> usize {
        self.mega_ny
    }

    /// Is unit cell (i, j) free? Out-of-range indices are not free.
    pub fn cell_free(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return false;
        }
        self.free[j as usize * self.nx + i as usize]
    }

    /// Is megacell (mi, mj) free? Out-of-range indices are not free.
    pub fn mega_free(&self, mi: isize, mj: isize) -> bool {
        if mi < 0 || mj < 0 || mi as usize >= self.mega_nx || mj as usize >= self.mega_ny {
            return false;
        }
        self.mega_free[mj as usize * self.mega_nx + mi as usize]
    }

    pub fn free_cell_count(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    pub fn free_mega_count(&self) -> usize {
        self.mega_free.iter().filter(|f| **f).count()
    }

    /// Min corner of unit cell (i, j).
    pub fn cell_min(&self, i: usize, j: usize) -> LocalPoint {
        LocalPoint::new(
            self.origin.x + i as f64 * self.cell_size,
            self.origin.y + j as f64 * self.cell_size,
        )
    }

    /// Center of unit cell (i, j).
    pub fn cell_center(&self, i: usize, j: usize) -> LocalPoint {
        let min = self.cell_min(i, j);
        LocalPoint::new(min.x + self.cell_size / 2.0, min.y + self.cell_size / 2.0)
    }

    /// Unit cell containing `p`, or None if outside the grid extent.
    pub fn cell_of_point(&self, p: LocalPoint) -> Option<(usize, usize)> {
        let fi = (p.x - self.origin.x) / self.cell_size;
        let fj = (p.y - self.origin.y) / self.cell_size;
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let (i, j) = (fi.floor() as usize, fj.floor() as usize);
        if i >= self.nx || j >= self.ny {
            return None;
        }
        Some((i, j))
    }

    /// Megacell containing unit cell (i, j).
    pub fn mega_of_cell(&self, i: usize, j: usize) -> (usize, usize) {
        (i / 2, j / 2)
    }

    /// All free megacell indices in row-major order.
    pub fn free_megacells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.free_mega_count());
        for mj in 0..self.mega_ny {
            for mi in 0..self.mega_nx {
                if self.mega_free[mj * self.mega_nx + mi] {
                    out.push((mi, mj));
                }
            }
        }
        out
    }
}

fn cell_count(extent: f64, cell_size: f64) -> usize {
    if extent <= 0.0 {
        return 0;
    }
    (extent / cell_size - EDGE_TOL).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Polygon {
        Polygon::new(vec![
            LocalPoint::new(0.0, 0.0),
            LocalPoint::new(side, 0.0),
            LocalPoint::new(side, side),
            LocalPoint::new(0.0, side),
        ])
        .unwrap()
    }

    fn square_at(x: f64, y: f64, side: f64) -> Polygon {
        Polygon::new(vec![
            LocalPoint::new(x, y),
            LocalPoint::new(x + side, y),
            LocalPoint::new(x + side, y + side),
            LocalPoint::new(x, y + side),
        ])
        .unwrap()
    }

    #[test]
    fn small_square_field() {
        let g = GridMap::rasterize_field(&square(1.2), &[], 0.3).unwrap();
        assert_eq!((g.nx(), g.ny()), (4, 4));
        assert_eq!((g.mega_nx(), g.mega_ny()), (2, 2));
        assert_eq!(g.free_cell_count(), 16);
        assert_eq!(g.free_mega_count(), 4);
    }

    #[test]
    fn obstacle_blocks_one_megacell() {
        let obstacle = square_at(0.6, 0.6, 0.6);
        let g = GridMap::rasterize_field(&square(1.2), &[obstacle], 0.3).unwrap();
        assert_eq!(g.free_mega_count(), 3);
        assert!(!g.mega_free(1, 1));
        assert!(g.mega_free(0, 0));
        assert!(g.mega_free(1, 0));
        assert!(g.mega_free(0, 1));
        // Only the 4 covered unit cells are lost; grazing neighbors stay free.
        assert_eq!(g.free_cell_count(), 12);
    }

    #[test]
    fn field_smaller_than_megacell_is_empty() {
        let err = GridMap::rasterize_field(&square(0.3), &[], 0.3).unwrap_err();
        assert_eq!(err, GridError::EmptyField);
        let err = GridMap::rasterize_field(&square(0.5), &[], 0.3).unwrap_err();
        assert_eq!(err, GridError::EmptyField);
    }

    #[test]
    fn invalid_cell_size_rejected() {
        assert!(matches!(
            GridMap::rasterize_field(&square(1.2), &[], 0.0),
            Err(GridError::InvalidCellSize(_))
        ));
        assert!(matches!(
            GridMap::rasterize_field(&square(1.2), &[], -0.3),
            Err(GridError::InvalidCellSize(_))
        ));
    }

    #[test]
    fn partial_edge_cells_blocked() {
        // 1.5 m wide: 5 cells fit, the 5th column has no megacell partner.
        let g = GridMap::rasterize_field(&square_at(0.0, 0.0, 1.5), &[], 0.3).unwrap();
        // Not square: height also 1.5 -> 5x5 cells, 3x3 mega raster.
        assert_eq!((g.nx(), g.ny()), (5, 5));
        assert_eq!((g.mega_nx(), g.mega_ny()), (3, 3));
        // Partial megacells in row/column 2 are blocked.
        assert_eq!(g.free_mega_count(), 4);
        for (mi, mj) in [(2, 0), (2, 1), (2, 2), (0, 2), (1, 2)] {
            assert!(!g.mega_free(mi as isize, mj as isize));
        }
        assert_eq!(g.free_cell_count(), 25);
    }

    #[test]
    fn non_axis_aligned_boundary() {
        // Right triangle: hypotenuse cuts cells along the diagonal.
        let tri = Polygon::new(vec![
            LocalPoint::new(0.0, 0.0),
            LocalPoint::new(2.4, 0.0),
            LocalPoint::new(0.0, 2.4),
        ])
        .unwrap();
        let g = GridMap::rasterize_field(&tri, &[], 0.3).unwrap();
        assert_eq!((g.nx(), g.ny()), (8, 8));
        // Cells strictly under the diagonal are free; cut cells are not.
        // Row j admits cells i with (i+1)+(j+1) <= 8.
        let expect: usize = (0..8).map(|j| (8usize - 1 - j).min(8)).sum();
        assert_eq!(g.free_cell_count(), expect);
        assert!(g.cell_free(0, 0));
        assert!(g.cell_free(6, 0));
        assert!(!g.cell_free(7, 0));
        assert!(!g.cell_free(4, 3));
        assert!(g.cell_free(3, 3));
    }

    #[test]
    fn cell_lookup_round_trip() {
        let g = GridMap::rasterize_field(&square(1.2), &[], 0.3).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let c = g.cell_center(i, j);
                assert_eq!(g.cell_of_point(c), Some((i, j)));
                assert_eq!(g.mega_of_cell(i, j), (i / 2, j / 2));
            }
        }
        assert_eq!(g.cell_of_point(LocalPoint::new(-0.1, 0.5)), None);
        assert_eq!(g.cell_of_point(LocalPoint::new(0.5, 1.3)), None);
    }

    #[test]
    fn from_cells_respects_mask() {
        let mut mask = vec![true; 16];
        mask[5] = false; // cell (1,1) blocks megacell (0,0)
        let g = GridMap::from_cells(LocalPoint::new(0.0, 0.0), 0.3, 4, 4, mask).unwrap();
        assert!(!g.mega_free(0, 0));
        assert_eq!(g.free_mega_count(), 3);
        assert_eq!(
            g.free_megacells(),
            vec![(1, 0), (0, 1), (1, 1)]
        );
    }

    #[test]
    fn obstacle_grazing_cell_edge_does_not_block() {
        // Obstacle sits exactly on the boundary between cell columns 1 and 2.
        let obstacle = square_at(0.6, 0.0, 0.3);
        let g = GridMap::rasterize_field(&square(1.2), &[obstacle], 0.3).unwrap();
        assert!(g.cell_free(1, 0));
        assert!(!g.cell_free(2, 0));
        assert!(g.cell_free(3, 0));
    }
}
