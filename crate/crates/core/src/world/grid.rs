//! Occupancy grid navigation: 8-connected A* with an octile heuristic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::scene::{SceneDocument, STANCE_RADIUS};

pub const DEFAULT_RESOLUTION: f64 = 0.1;
pub const DEFAULT_AGENT_RADIUS: f64 = 0.3;
/// Margin added around the scene points when no bounds are given.
const AUTO_BOUNDS_MARGIN: f64 = 2.0;

pub type Cell = (usize, usize);

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// In cell units: 1 per straight move, sqrt(2) per diagonal.
    pub cost: f64,
}

pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

impl OccupancyGrid {
    /// Grid from explicit cells, row-major (`blocked[y * width + x]`).
    pub fn from_cells(width: usize, height: usize, blocked: Vec<bool>, resolution: f64, origin: [f64; 2]) -> Self {
        assert_eq!(blocked.len(), width * height, "cell count mismatch");
        Self {
            origin,
            resolution,
            width,
            height,
            blocked,
        }
    }

    /// Rasterize the scene's obstacles, inflated by the agent radius.
    pub fn from_scene(scene: &SceneDocument, resolution: f64, agent_radius: f64) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        let (min, max) = match &scene.metadata.bounds {
            Some(b) => (b.min, b.max),
            None => {
                let mut min = [f64::INFINITY; 2];
                let mut max = [f64::NEG_INFINITY; 2];
                let positions = scene
                    .object_points
                    .iter()
                    .map(|o| o.position)
                    .chain(scene.interaction_points.iter().map(|p| p.position))
                    .chain(scene.metadata.agent_start.iter().map(|p| p.position));
                for p in positions {
                    for k in 0..2 {
                        min[k] = min[k].min(p[k]);
                        max[k] = max[k].max(p[k]);
                    }
                }
                if min[0] > max[0] {
                    min = [0.0; 2];
                    max = [0.0; 2];
                }
                (
                    [min[0] - AUTO_BOUNDS_MARGIN, min[1] - AUTO_BOUNDS_MARGIN],
                    [max[0] + AUTO_BOUNDS_MARGIN, max[1] + AUTO_BOUNDS_MARGIN],
                )
            }
        };
        let width = (((max[0] - min[0]) / resolution).ceil() as usize).max(1);
        let height = (((max[1] - min[1]) / resolution).ceil() as usize).max(1);
        let mut grid = Self::from_cells(width, height, vec![false; width * height], resolution, min);
        for iy in 0..height {
            for ix in 0..width {
                let [x, y] = grid.center((ix, iy));
                if scene
                    .obstacles
                    .iter()
                    .any(|o| o.footprint_contains(x, y, agent_radius))
                {
                    grid.blocked[iy * width + ix] = true;
                }
            }
        }
        grid
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.blocked[self.index(cell)]
    }

    pub fn center(&self, cell: Cell) -> [f64; 2] {
        [
            self.origin[0] + (cell.0 as f64 + 0.5) * self.resolution,
            self.origin[1] + (cell.1 as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let fx = ((x - self.origin[0]) / self.resolution).floor();
        let fy = ((y - self.origin[1]) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let cell = (fx as usize, fy as usize);
        self.in_bounds(cell).then_some(cell)
    }

    fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
            let nx = cell.0.checked_add_signed(dx)?;
            let ny = cell.1.checked_add_signed(dy)?;
            let n = (nx, ny);
            if !self.is_free(n) {
                return None;
            }
            let step = if dx != 0 && dy != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            };
            Some((n, step))
        })
    }

    fn check_endpoints(&self, start: Cell, goal: Cell) -> Result<()> {
        for c in [start, goal] {
            if !self.is_free(c) {
                return Err(Error::BadCell(c));
            }
        }
        Ok(())
    }

    /// A* search. Open-list ties are broken by f, then h, then cell index,
    /// so the returned path is fully determined by the grid.
    pub fn plan_path(&self, start: Cell, goal: Cell) -> Result<GridPath> {
        self.check_endpoints(start, goal)?;
        self.search(start, goal, |c| octile(c, goal))
            .ok_or(Error::NoPath { start, goal })
    }

    /// Uniform-cost search, the zero-heuristic case of `plan_path`.
    pub fn dijkstra(&self, start: Cell, goal: Cell) -> Result<GridPath> {
        self.check_endpoints(start, goal)?;
        self.search(start, goal, |_| 0.0).ok_or(Error::NoPath { start, goal })
    }

    fn search(&self, start: Cell, goal: Cell, h: impl Fn(Cell) -> f64) -> Option<GridPath> {
        let n = self.width * self.height;
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let mut open = BinaryHeap::new();
        let s = self.index(start);
        g[s] = 0.0;
        open.push(OpenEntry {
            f: h(start),
            h: h(start),
            index: s,
        });
        while let Some(OpenEntry { index, .. }) = open.pop() {
            if closed[index] {
                continue;
            }
            closed[index] = true;
            let cell = (index % self.width, index / self.width);
            if cell == goal {
                let mut cells = vec![cell];
                let mut at = index;
                while parent[at] != usize::MAX {
                    at = parent[at];
                    cells.push((at % self.width, at / self.width));
                }
                cells.reverse();
                return Some(GridPath { cells, cost: g[index] });
            }
            for (next, step) in self.neighbors(cell) {
                let ni = self.index(next);
                if closed[ni] {
                    continue;
                }
                let tentative = g[index] + step;
                if tentative < g[ni] {
                    g[ni] = tentative;
                    parent[ni] = index;
                    let hn = h(next);
                    open.push(OpenEntry {
                        f: tentative + hn,
                        h: hn,
                        index: ni,
                    });
                }
            }
        }
        None
    }

    /// Nearest free cell to an object point within the stance radius,
    /// other than the cell containing the point itself. The agent faces
    /// the point; ties go to the lower cell index.
    pub fn select_stance(&self, object_id: u32, target: Vec3) -> Result<Pose> {
        let own = self.cell_of(target[0], target[1]);
        let reach = (STANCE_RADIUS / self.resolution).ceil() as isize + 1;
        let (cx, cy) = (
            ((target[0] - self.origin[0]) / self.resolution).floor() as isize,
            ((target[1] - self.origin[1]) / self.resolution).floor() as isize,
        );
        let mut best: Option<(f64, usize, [f64; 2])> = None;
        for iy in (cy - reach)..=(cy + reach) {
            for ix in (cx - reach)..=(cx + reach) {
                if ix < 0 || iy < 0 {
                    continue;
                }
                let cell = (ix as usize, iy as usize);
                if Some(cell) == own || !self.is_free(cell) {
                    continue;
                }
                let c = self.center(cell);
                let d = (c[0] - target[0]).hypot(c[1] - target[1]);
                if d > STANCE_RADIUS {
                    continue;
                }
                let idx = self.index(cell);
                let better = match best {
                    None => true,
                    Some((bd, bi, _)) => d < bd || (d == bd && idx < bi),
                };
                if better {
                    best = Some((d, idx, c));
                }
            }
        }
        let (_, _, c) = best.ok_or(Error::UnreachableStance(object_id))?;
        let yaw = (target[1] - c[1]).atan2(target[0] - c[0]);
        Ok(Pose::new([c[0], c[1], target[2]], yaw))
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    index: usize,
}

impl Ord for OpenEntry {
    // Reversed: BinaryHeap is a max-heap and we want the smallest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::from_cells(w, h, vec![false; w * h], 0.1, [0.0, 0.0])
    }

    #[test]
    fn diagonal_across_open_grid() {
        let g = open_grid(10, 10);
        let p = g.plan_path((0, 0), (9, 9)).unwrap();
        assert!((p.cost - 9.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert_eq!(p.cells.len(), 10);
    }

    #[test]
    fn start_equals_goal() {
        let g = open_grid(3, 3);
        let p = g.plan_path((1, 1), (1, 1)).unwrap();
        assert_eq!(p.cells, vec![(1, 1)]);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn wall_forces_detour_and_sealed_goal_fails() {
        let mut blocked = vec![false; 25];
        for y in 0..4 {
            blocked[y * 5 + 2] = true;
        }
        let g = OccupancyGrid::from_cells(5, 5, blocked.clone(), 0.1, [0.0, 0.0]);
        let p = g.plan_path((0, 0), (4, 0)).unwrap();
        assert!(p.cells.iter().all(|c| g.is_free(*c)));
        let d = g.dijkstra((0, 0), (4, 0)).unwrap();
        assert!((p.cost - d.cost).abs() < 1e-9);

        blocked[4 * 5 + 2] = true;
        let g = OccupancyGrid::from_cells(5, 5, blocked, 0.1, [0.0, 0.0]);
        assert!(matches!(g.plan_path((0, 0), (4, 0)), Err(Error::NoPath { .. })));
        assert!(matches!(g.plan_path((2, 0), (4, 0)), Err(Error::BadCell((2, 0)))));
    }

    #[test]
    fn stance_avoids_own_cell_and_faces_target() {
        let g = open_grid(20, 20);
        let pose = g.select_stance(1, [1.05, 1.05, 0.7]).unwrap();
        assert_ne!(g.cell_of(pose.position[0], pose.position[1]), Some((10, 10)));
        assert_eq!(pose.position[2], 0.7);
        let (fwd, lat) = pose.to_local([1.05, 1.05, 0.7]);
        assert!(fwd > 0.0 && lat.abs() < 1e-9);
    }

    #[test]
    fn stance_fails_when_surrounded() {
        let g = OccupancyGrid::from_cells(30, 30, vec![true; 900], 0.1, [0.0, 0.0]);
        assert!(matches!(g.select_stance(4, [1.5, 1.5, 0.0]), Err(Error::UnreachableStance(4))));
    }
}
