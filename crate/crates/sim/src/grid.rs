//! Occupancy grid and 8-connected shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::polygon::{Polygon, P2};

pub const DEFAULT_CELL: f64 = 0.25;

type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    /// World position of the corner of cell (0, 0).
    pub origin: P2,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major over `j` then `i`; `true` is traversable.
    pub free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    /// Cells after the start, ending at the goal. Empty when start == goal.
    pub cells: Vec<Cell>,
    /// Length in meters.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // Min-heap on f, then prefer larger g, then lower index.
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl OccupancyGrid {
    pub fn new(origin: P2, cell: f64, nx: usize, ny: usize, free: Vec<bool>) -> Self {
        assert_eq!(free.len(), nx * ny, "grid occupancy has wrong length");
        Self {
            origin,
            cell,
            nx,
            ny,
            free,
        }
    }

    /// Cells whose centers lie inside `poly` with `clearance` to its boundary
    /// and are not `blocked`.
    pub fn from_polygon(poly: &Polygon, cell: f64, clearance: f64, blocked: impl Fn(P2) -> bool) -> Self {
        let (lo, hi) = poly.bounds();
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut g = Self::new(lo, cell, nx, ny, vec![false; nx * ny]);
        for j in 0..ny {
            for i in 0..nx {
                let c = g.center((i, j));
                g.free[j * nx + i] = poly.contains_disc(c, clearance) && !blocked(c);
            }
        }
        g
    }

    #[inline]
    pub fn index(&self, (i, j): Cell) -> usize {
        j * self.nx + i
    }

    #[inline]
    fn cell_at(&self, idx: usize) -> Cell {
        (idx % self.nx, idx / self.nx)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.0 < self.nx && c.1 < self.ny && self.free[self.index(c)]
    }

    pub fn center(&self, (i, j): Cell) -> P2 {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell,
            self.origin[1] + (j as f64 + 0.5) * self.cell,
        ]
    }

    pub fn cell_of(&self, p: P2) -> Option<Cell> {
        let fi = ((p[0] - self.origin[0]) / self.cell).floor();
        let fj = ((p[1] - self.origin[1]) / self.cell).floor();
        if fi < 0.0 || fj < 0.0 || !fi.is_finite() || !fj.is_finite() {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Free cell whose center is closest to `p`.
    pub fn nearest_free(&self, p: P2) -> Option<Cell> {
        if let Some(c) = self.cell_of(p) {
            if self.is_free(c) {
                return Some(c);
            }
        }
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for idx in 0..self.free.len() {
            if self.free[idx] {
                let c = self.cell_at(idx);
                let q = self.center(c);
                let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                if d < best_d {
                    best_d = d;
                    best = Some(c);
                }
            }
        }
        best
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.free.len()).filter(|&i| self.free[i]).map(|i| self.cell_at(i)).collect()
    }

    /// Neighbors with step length in meters. Diagonal moves need both
    /// orthogonal cells free.
    pub fn neighbors(&self, (i, j): Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const STEPS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        STEPS.iter().filter_map(move |&(di, dj)| {
            let ni = i as i64 + di;
            let nj = j as i64 + dj;
            if ni < 0 || nj < 0 {
                return None;
            }
            let n = (ni as usize, nj as usize);
            if !self.is_free(n) {
                return None;
            }
            if di != 0 && dj != 0 && !(self.is_free((n.0, j)) && self.is_free((i, n.1))) {
                return None;
            }
            let len = if di != 0 && dj != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            Some((n, len * self.cell))
        })
    }

    fn octile(&self, a: Cell, b: Cell) -> f64 {
        let dx = a.0.abs_diff(b.0) as f64;
        let dy = a.1.abs_diff(b.1) as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo + std::f64::consts::SQRT_2 * lo) * self.cell
    }

    /// A* with the octile heuristic. `None` if either end is blocked or the
    /// goal is unreachable.
    pub fn astar(&self, start: Cell, goal: Cell) -> Option<GridPath> {
        if !self.is_free(start) || !self.is_free(goal) {
            return None;
        }
        if start == goal {
            return Some(GridPath {
                cells: Vec::new(),
                cost: 0.0,
            });
        }
        let n = self.free.len();
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let (s, t) = (self.index(start), self.index(goal));
        g[s] = 0.0;
        let mut open = BinaryHeap::new();
        open.push(Entry {
            f: self.octile(start, goal),
            g: 0.0,
            idx: s,
        });
        while let Some(Entry { idx, .. }) = open.pop() {
            if closed[idx] {
                continue;
            }
            closed[idx] = true;
            if idx == t {
                break;
            }
            let c = self.cell_at(idx);
            for (nb, w) in self.neighbors(c) {
                let ni = self.index(nb);
                let ng = g[idx] + w;
                if !closed[ni] && ng < g[ni] {
                    g[ni] = ng;
                    parent[ni] = idx;
                    open.push(Entry {
                        f: ng + self.octile(nb, goal),
                        g: ng,
                        idx: ni,
                    });
                }
            }
        }
        if !closed[t] {
            return None;
        }
        let mut cells = Vec::new();
        let mut cur = t;
        while cur != s {
            cells.push(self.cell_at(cur));
            cur = parent[cur];
        }
        cells.reverse();
        Some(GridPath { cells, cost: g[t] })
    }

    /// Single-source shortest distances over the same graph, for reference.
    pub fn dijkstra(&self, start: Cell) -> Vec<f64> {
        let n = self.free.len();
        let mut dist = vec![f64::INFINITY; n];
        if !self.is_free(start) {
            return dist;
        }
        let s = self.index(start);
        dist[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry { f: 0.0, g: 0.0, idx: s });
        while let Some(Entry { f, idx, .. }) = heap.pop() {
            if f > dist[idx] {
                continue;
            }
            for (nb, w) in self.neighbors(self.cell_at(idx)) {
                let ni = self.index(nb);
                if f + w < dist[ni] {
                    dist[ni] = f + w;
                    heap.push(Entry {
                        f: dist[ni],
                        g: 0.0,
                        idx: ni,
                    });
                }
            }
        }
        dist
    }

    /// Waypoints from world `start` to world `goal`: centers of the path
    /// cells, with the last replaced by `goal` itself when it lies in the
    /// goal cell. `None` when either point has no free cell or no path exists.
    pub fn plan(&self, start: P2, goal: P2) -> Option<Vec<P2>> {
        let a = self.nearest_free(start)?;
        let b = self.nearest_free(goal)?;
        let path = self.astar(a, b)?;
        Some(path.cells.iter().map(|&c| self.center(c)).collect())
    }

    /// Shortest grid distance between two world points, including the legs
    /// to and from the nearest free cell centers.
    pub fn shortest_distance(&self, start: P2, goal: P2) -> Option<f64> {
        let a = self.nearest_free(start)?;
        let b = self.nearest_free(goal)?;
        let path = self.astar(a, b)?;
        let (ca, cb) = (self.center(a), self.center(b));
        Some((ca[0] - start[0]).hypot(ca[1] - start[1]) + path.cost + (cb[0] - goal[0]).hypot(cb[1] - goal[1]))
    }
}

/// Total length of a polyline.
pub fn polyline_length(points: &[P2]) -> f64 {
    points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(nx: usize, ny: usize) -> OccupancyGrid {
        OccupancyGrid::new([0.0, 0.0], 0.25, nx, ny, vec![true; nx * ny])
    }

    #[test]
    fn straight_corridor() {
        let g = open(20, 3);
        let p = g.astar((0, 1), (19, 1)).unwrap();
        assert_eq!(p.cells.len(), 19);
        assert!((p.cost - 19.0 * 0.25).abs() < 1e-12);
        assert!(p.cells.iter().all(|c| c.1 == 1));
    }

    #[test]
    fn start_equals_goal_is_empty() {
        let p = open(3, 3).astar((1, 1), (1, 1)).unwrap();
        assert!(p.cells.is_empty() && p.cost == 0.0);
    }

    #[test]
    fn wall_with_gap() {
        let mut g = open(9, 9);
        for j in 0..9 {
            if j != 7 {
                let k = g.index((4, j));
                g.free[k] = false;
            }
        }
        let p = g.astar((0, 0), (8, 0)).unwrap();
        assert!(p.cells.contains(&(4, 7)));
        let d = g.dijkstra((0, 0));
        assert!((p.cost - d[g.index((8, 0))]).abs() < 1e-9);
    }

    #[test]
    fn no_corner_cutting() {
        let mut g = open(2, 2);
        let k = g.index((1, 0));
        g.free[k] = false;
        let p = g.astar((0, 0), (1, 1)).unwrap();
        assert_eq!(p.cells, vec![(0, 1), (1, 1)]);
        let k = g.index((0, 1));
        g.free[k] = false;
        assert!(g.astar((0, 0), (1, 1)).is_none());
    }
}
