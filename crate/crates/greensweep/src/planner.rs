//! Spanning-tree coverage planning.
//!
//! The planner spans the free megacells with a depth-first tree, then walks
//! unit cells around that tree keeping tree edges on the path's right. The
//! walk is a Hamiltonian cycle over the unit cells of every megacell in the
//! tree: 4 waypoints per megacell, each cell visited exactly once, closed.

use crate::geo::{LocalFrame, LocalPoint};
use crate::grid::GridMap;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

/// Megacell index (column, row).
pub type Mega = (usize, usize);

/// Unit-cell index (column, row).
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("start megacell ({0}, {1}) is not a free megacell")]
    StartBlocked(usize, usize),
}

/// Neighbor visit order for all traversals: north, east, south, west.
const DIRS: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

fn offset(m: Mega, d: (isize, isize)) -> Option<Mega> {
    let mi = m.0 as isize + d.0;
    let mj = m.1 as isize + d.1;
    if mi < 0 || mj < 0 {
        None
    } else {
        Some((mi as usize, mj as usize))
    }
}

/// 4-connectivity graph over free megacells.
#[derive(Debug, Clone)]
pub struct MegacellGraph {
    nodes: BTreeSet<Mega>,
    edges: BTreeSet<(Mega, Mega)>,
}

impl MegacellGraph {
    pub fn build(grid: &GridMap) -> Self {
        let nodes: BTreeSet<Mega> = grid.free_megacells().into_iter().collect();
        let mut edges = BTreeSet::new();
        for &m in &nodes {
            for d in DIRS {
                if let Some(n) = offset(m, d) {
                    if nodes.contains(&n) {
                        edges.insert(if m < n { (m, n) } else { (n, m) });
                    }
                }
            }
        }
        Self { nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, m: Mega) -> bool {
        self.nodes.contains(&m)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Mega> + '_ {
        self.nodes.iter().copied()
    }
}

/// Depth-first spanning tree over one connected component of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    root: Mega,
    parent: BTreeMap<Mega, Option<Mega>>,
}

impl SpanningTree {
    /// Depth-first traversal from `start`, exploring neighbors in the order
    /// north, east, south, west. Deterministic for a given graph and start.
    pub fn dfs(graph: &MegacellGraph, start: Mega) -> Result<Self, PlanError> {
        if !graph.contains(start) {
            return Err(PlanError::StartBlocked(start.0, start.1));
        }
        let mut parent: BTreeMap<Mega, Option<Mega>> = BTreeMap::new();
        parent.insert(start, None);
        // Explicit stack of (node, next direction) keeps recursive DFS order.
        let mut stack: Vec<(Mega, usize)> = vec![(start, 0)];
        while let Some((node, di)) = stack.last_mut() {
            if *di == DIRS.len() {
                stack.pop();
                continue;
            }
            let d = DIRS[*di];
            *di += 1;
            let node = *node;
            if let Some(nb) = offset(node, d) {
                if graph.contains(nb) && !parent.contains_key(&nb) {
                    parent.insert(nb, Some(node));
                    stack.push((nb, 0));
                }
            }
        }
        Ok(Self { root: start, parent })
    }

    pub fn root(&self) -> Mega {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn contains(&self, m: Mega) -> bool {
        self.parent.contains_key(&m)
    }

    pub fn parent(&self, m: Mega) -> Option<Mega> {
        self.parent.get(&m).copied().flatten()
    }

    /// Is the megacell in direction `d` from `m` joined to `m` by a tree edge?
    fn has_edge_toward(&self, m: Mega, d: (isize, isize)) -> bool {
        match offset(m, d) {
            Some(n) => self.parent(m) == Some(n) || self.parent(n) == Some(m),
            None => false,
        }
    }
}

/// Closed unit-cell coverage cycle around a spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePath {
    waypoints: Vec<LocalPoint>,
    cells: Vec<Cell>,
    cell_size: f64,
}

impl CoveragePath {
    /// Walk the unit cells around `tree` with tree edges on the path's right,
    /// starting from `start_cell`. The result visits all 4 sub-cells of every
    /// tree megacell exactly once and returns to the start.
    pub fn generate(
        grid: &GridMap,
        tree: &SpanningTree,
        start_cell: Cell,
    ) -> Result<Self, PlanError> {
        let mega = grid.mega_of_cell(start_cell.0, start_cell.1);
        if !tree.contains(mega) {
            return Err(PlanError::StartBlocked(mega.0, mega.1));
        }
        let expected = 4 * tree.node_count();
        let mut cells = Vec::with_capacity(expected);
        let mut cur = start_cell;
        loop {
            cells.push(cur);
            cur = successor(cur, tree);
            if cur == start_cell {
                break;
            }
            assert!(
                cells.len() <= expected,
                "coverage walk failed to close after {expected} steps"
            );
        }
        let waypoints = cells.iter().map(|&(i, j)| grid.cell_center(i, j)).collect();
        Ok(Self {
            waypoints,
            cells,
            cell_size: grid.cell_size(),
        })
    }

    pub fn waypoints(&self) -> &[LocalPoint] {
        &self.waypoints
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Total cycle length: one cell-size step per waypoint, closing included.
    pub fn length_m(&self) -> f64 {
        self.waypoints.len() as f64 * self.cell_size
    }

    /// Write the path as CSV: local meters plus geodetic degrees per waypoint.
    pub fn write_csv<W: Write>(&self, frame: &LocalFrame, mut w: W) -> io::Result<()> {
        writeln!(w, "index,x_m,y_m,lat_deg,lon_deg")?;
        for (idx, p) in self.waypoints.iter().enumerate() {
            let g = frame.local_to_geo(*p);
            writeln!(
                w,
                "{},{:.4},{:.4},{:.9},{:.9}",
                idx, p.x, p.y, g.lat, g.lon
            )?;
        }
        Ok(())
    }
}

/// One wall-following step. The quadrant of the cell within its megacell
/// determines the outward side to test for a tree edge ("wall"): follow the
/// wall if present, otherwise turn around the megacell.
fn successor(cell: Cell, tree: &SpanningTree) -> Cell {
    let (i, j) = cell;
    let mega = (i / 2, j / 2);
    const N: (isize, isize) = (0, 1);
    const E: (isize, isize) = (1, 0);
    const S: (isize, isize) = (0, -1);
    const W: (isize, isize) = (-1, 0);
    match (i % 2, j % 2) {
        // SW: cross to the west megacell along the wall, else go north.
        (0, 0) => {
            if tree.has_edge_toward(mega, W) {
                (i - 1, j)
            } else {
                (i, j + 1)
            }
        }
        // NW: cross north, else go east.
        (0, 1) => {
            if tree.has_edge_toward(mega, N) {
                (i, j + 1)
            } else {
                (i + 1, j)
            }
        }
        // NE: cross east, else go south.
        (1, 1) => {
            if tree.has_edge_toward(mega, E) {
                (i + 1, j)
            } else {
                (i, j - 1)
            }
        }
        // SE: cross south, else go west.
        (1, 0) => {
            if tree.has_edge_toward(mega, S) {
                (i, j - 1)
            } else {
                (i - 1, j)
            }
        }
        _ => unreachable!(),
    }
}

/// Convenience wrapper: rasterized grid to coverage path in one call.
pub fn plan_coverage(grid: &GridMap, start_cell: Cell) -> Result<CoveragePath, PlanError> {
    let graph = MegacellGraph::build(grid);
    let mega = grid.mega_of_cell(start_cell.0, start_cell.1);
    let tree = SpanningTree::dfs(&graph, mega)?;
    CoveragePath::generate(grid, &tree, start_cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Polygon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_grid(side_cells: usize) -> GridMap {
        let side = side_cells as f64 * 0.3;
        let boundary = Polygon::new(vec![
            LocalPoint::new(0.0, 0.0),
            LocalPoint::new(side, 0.0),
            LocalPoint::new(side, side),
            LocalPoint::new(0.0, side),
        ])
        .unwrap();
        GridMap::rasterize_field(&boundary, &[], 0.3).unwrap()
    }

    /// Grid whose unit cells mirror a random megacell mask.
    fn grid_from_mega_mask(mega_nx: usize, mega_ny: usize, mask: &[bool]) -> Option<GridMap> {
        let (nx, ny) = (2 * mega_nx, 2 * mega_ny);
        let mut free = vec![false; nx * ny];
        for mj in 0..mega_ny {
            for mi in 0..mega_nx {
                if mask[mj * mega_nx + mi] {
                    for dj in 0..2 {
                        for di in 0..2 {
                            free[(2 * mj + dj) * nx + 2 * mi + di] = true;
                        }
                    }
                }
            }
        }
        GridMap::from_cells(LocalPoint::new(0.0, 0.0), 0.3, nx, ny, free).ok()
    }

    #[test]
    fn graph_counts() {
        let g = square_grid(4); // 2x2 megacells
        let graph = MegacellGraph::build(&g);
        assert_eq!(graph.node_count(), 4);
        assert_eq!(graph.edge_count(), 4);

        let single = square_grid(2);
        let graph = MegacellGraph::build(&single);
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.edge_count(), 0);

        // L-shape: block one megacell of the 2x2.
        let mask = [true, true, true, false];
        let g = grid_from_mega_mask(2, 2, &mask).unwrap();
        let graph = MegacellGraph::build(&g);
        assert_eq!(graph.node_count(), 3);
        assert_eq!(graph.edge_count(), 2);
    }

    #[test]
    fn spanning_tree_basics() {
        let g = square_grid(4);
        let graph = MegacellGraph::build(&g);
        let tree = SpanningTree::dfs(&graph, (0, 0)).unwrap();
        assert_eq!(tree.node_count(), 4);
        assert_eq!(tree.edge_count(), 3);
        assert_eq!(tree.root(), (0, 0));
        // Deterministic: same input, same tree.
        assert_eq!(tree, SpanningTree::dfs(&graph, (0, 0)).unwrap());

        let single = square_grid(2);
        let tree = SpanningTree::dfs(&MegacellGraph::build(&single), (0, 0)).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.edge_count(), 0);

        assert_eq!(
            SpanningTree::dfs(&graph, (7, 7)),
            Err(PlanError::StartBlocked(7, 7))
        );
    }

    #[test]
    fn dfs_prefers_north_then_east() {
        // 2x2 megacells from (0,0): north first -> (0,1), then east -> (1,1),
        // then south -> (1,0).
        let g = square_grid(4);
        let tree = SpanningTree::dfs(&MegacellGraph::build(&g), (0, 0)).unwrap();
        assert_eq!(tree.parent((0, 1)), Some((0, 0)));
        assert_eq!(tree.parent((1, 1)), Some((0, 1)));
        assert_eq!(tree.parent((1, 0)), Some((1, 1)));
    }

    #[test]
    fn single_megacell_cycle() {
        let g = square_grid(2);
        let path = plan_coverage(&g, (0, 0)).unwrap();
        assert_eq!(path.len(), 4);
        assert_eq!(path.cells(), &[(0, 0), (0, 1), (1, 1), (1, 0)]);
        assert!((path.length_m() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn vertical_pair_cycle() {
        // 1x2 megacells: 8 cells, one closed circuit.
        let mask = [true, true];
        let g = grid_from_mega_mask(1, 2, &mask).unwrap();
        let path = plan_coverage(&g, (0, 0)).unwrap();
        assert_eq!(path.len(), 8);
        let mut seen = std::collections::BTreeSet::new();
        for &c in path.cells() {
            assert!(seen.insert(c), "cell {c:?} visited twice");
        }
        assert_eq!(seen.len(), 8);
        // The tree edge between (0,0) and (0,1) sits on the path's right:
        // the walk climbs the west flank before touching the east flank.
        assert_eq!(
            path.cells(),
            &[(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (1, 2), (1, 1), (1, 0)]
        );
    }

    #[test]
    fn horizontal_pair_cycle() {
        let mask = [true, true];
        let g = grid_from_mega_mask(2, 1, &mask).unwrap();
        let path = plan_coverage(&g, (0, 0)).unwrap();
        assert_eq!(path.len(), 8);
        assert_eq!(
            path.cells(),
            &[(0, 0), (0, 1), (1, 1), (2, 1), (3, 1), (3, 0), (2, 0), (1, 0)]
        );
    }

    #[test]
    fn start_inside_blocked_megacell_errors() {
        let mask = [true, true, true, false];
        let g = grid_from_mega_mask(2, 2, &mask).unwrap();
        assert_eq!(
            plan_coverage(&g, (2, 2)),
            Err(PlanError::StartBlocked(1, 1))
        );
    }

    /// Brute-force oracle: count visits per unit cell, check steps and closure.
    fn check_path_covers_component(g: &GridMap, start_cell: Cell) {
        let graph = MegacellGraph::build(g);
        let start_mega = g.mega_of_cell(start_cell.0, start_cell.1);
        let tree = SpanningTree::dfs(&graph, start_mega).unwrap();
        let path = CoveragePath::generate(g, &tree, start_cell).unwrap();

        assert_eq!(path.len(), 4 * tree.node_count());

        let mut visits = vec![0u32; g.nx() * g.ny()];
        for &(i, j) in path.cells() {
            visits[j * g.nx() + i] += 1;
        }
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let expected = u32::from(tree.contains(g.mega_of_cell(i, j)));
                assert_eq!(
                    visits[j * g.nx() + i],
                    expected,
                    "cell ({i},{j}) visit count"
                );
            }
        }
        // Unit steps, including the closing one.
        let w = path.waypoints();
        for k in 0..w.len() {
            let d = w[k].distance(&w[(k + 1) % w.len()]);
            assert!((d - g.cell_size()).abs() < 1e-9, "step {k} length {d}");
        }
    }

    #[test]
    fn random_masks_covered_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut done = 0;
        while done < 120 {
            let mnx = rng.gen_range(1..=5);
            let mny = rng.gen_range(1..=5);
            let mask: Vec<bool> = (0..mnx * mny).map(|_| rng.gen_bool(0.72)).collect();
            let Some(g) = grid_from_mega_mask(mnx, mny, &mask) else {
                continue;
            };
            let free = g.free_megacells();
            let &(mi, mj) = &free[rng.gen_range(0..free.len())];
            let sub = rng.gen_range(0..4);
            let start_cell = (2 * mi + sub % 2, 2 * mj + sub / 2);
            check_path_covers_component(&g, start_cell);
            done += 1;
        }
    }

    #[test]
    fn csv_export_format() {
        let frame = LocalFrame::new(crate::geo::GeoPoint::new(36.97, -122.03));
        let g = square_grid(2);
        let path = plan_coverage(&g, (0, 0)).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&frame, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,x_m,y_m,lat_deg,lon_deg");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0.1500,0.1500,"));
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 5);
        // 9 decimal places on the degree columns.
        assert_eq!(fields[3].split('.').nth(1).unwrap().len(), 9);
        assert_eq!(fields[4].split('.').nth(1).unwrap().len(), 9);
    }

    #[test]
    fn path_obstacle_safety() {
        // Field with central obstacle: no waypoint may fall in the obstacle.
        let boundary = Polygon::new(vec![
            LocalPoint::new(0.0, 0.0),
            LocalPoint::new(3.0, 0.0),
            LocalPoint::new(3.0, 3.0),
            LocalPoint::new(0.0, 3.0),
        ])
        .unwrap();
        let obstacle = Polygon::new(vec![
            LocalPoint::new(1.2, 1.2),
            LocalPoint::new(1.8, 1.2),
            LocalPoint::new(1.8, 1.8),
            LocalPoint::new(1.2, 1.8),
        ])
        .unwrap();
        let g = GridMap::rasterize_field(&boundary, &[obstacle.clone()], 0.3).unwrap();
        let path = plan_coverage(&g, (0, 0)).unwrap();
        assert!(path.len() >= 4);
        for p in path.waypoints() {
            assert!(!obstacle.contains(*p), "waypoint {p:?} inside obstacle");
            assert!(boundary.contains(*p));
        }
    }
}
