//! Grid A* planning around walls.
//!
//! The floor is rasterized into square cells; a cell is blocked when a wall
//! overlaps it with positive area. Moves are 8-connected with cost 1
//! (orthogonal) or √2 (diagonal), and a diagonal move is only allowed when
//! both orthogonal neighbours it passes between are free. Costs are carried
//! exactly as a count of orthogonal and diagonal moves.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Rect, Vec2};
use crate::world::ScenarioConfig;

pub const DEFAULT_CELL_SIZE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("no path between {start:?} and {goal:?}")]
    NoPath { start: Cell, goal: Cell },
    #[error("cell {0:?} is outside the grid")]
    OutOfBounds(Cell),
    #[error("endpoint {0:?} is blocked")]
    BlockedEndpoint(Cell),
    #[error("path is empty")]
    EmptyPath,
}

/// Grid cell; `col` indexes x and `row` indexes y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Exact path cost `orthogonal + diagonal·√2` (in cells).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PathCost {
    pub orthogonal: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost { orthogonal: 0, diagonal: 0 };
    const ORTHO: PathCost = PathCost { orthogonal: 1, diagonal: 0 };
    const DIAG: PathCost = PathCost { orthogonal: 0, diagonal: 1 };

    pub fn cells(self) -> f64 {
        self.orthogonal as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    /// Octile distance between two cells.
    pub fn octile(a: Cell, b: Cell) -> Self {
        let dx = a.col.abs_diff(b.col) as u32;
        let dy = a.row.abs_diff(b.row) as u32;
        PathCost { orthogonal: dx.max(dy) - dx.min(dy), diagonal: dx.min(dy) }
    }
}

impl std::ops::Add for PathCost {
    type Output = PathCost;
    fn add(self, o: PathCost) -> PathCost {
        PathCost { orthogonal: self.orthogonal + o.orthogonal, diagonal: self.diagonal + o.diagonal }
    }
}

impl Ord for PathCost {
    /// Exact comparison of `a + b√2` values using integer arithmetic.
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.orthogonal as i64 - other.orthogonal as i64;
        let db = self.diagonal as i64 - other.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            // Opposite signs: compare |da| with |db|·√2 by squaring.
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub cell_size_m: f64,
    pub cols: usize,
    pub rows: usize,
    blocked: Vec<bool>,
}

/// Overlap of `[lo, hi]` with the cell span `[c, c + size]`: positive length,
/// or (for a zero-width wall) containment.
fn axis_overlap(lo: f64, hi: f64, c: f64, size: f64) -> bool {
    if lo == hi {
        lo >= c && lo <= c + size
    } else {
        lo < c + size && hi > c
    }
}

impl OccupancyGrid {
    pub fn empty(cols: usize, rows: usize, cell_size_m: f64) -> Self {
        Self { cell_size_m, cols, rows, blocked: vec![false; cols * rows] }
    }

    pub fn rasterize(config: &ScenarioConfig) -> Self {
        Self::rasterize_walls(config.width_m, config.height_m, &config.walls, DEFAULT_CELL_SIZE_M)
    }

    pub fn rasterize_walls(width_m: f64, height_m: f64, walls: &[Rect], cell_size_m: f64) -> Self {
        let cols = (width_m / cell_size_m).ceil() as usize;
        let rows = (height_m / cell_size_m).ceil() as usize;
        let mut grid = Self::empty(cols, rows, cell_size_m);
        for w in walls {
            // Only scan the cells the wall's bounding box can touch.
            let c0 = ((w.x_min / cell_size_m).floor().max(1.0) as usize - 1).min(cols);
            let c1 = ((w.x_max / cell_size_m).ceil() as usize + 1).min(cols);
            let r0 = ((w.y_min / cell_size_m).floor().max(1.0) as usize - 1).min(rows);
            let r1 = ((w.y_max / cell_size_m).ceil() as usize + 1).min(rows);
            for row in r0..r1 {
                for col in c0..c1 {
                    let x = col as f64 * cell_size_m;
                    let y = row as f64 * cell_size_m;
                    if axis_overlap(w.x_min, w.x_max, x, cell_size_m) && axis_overlap(w.y_min, w.y_max, y, cell_size_m)
                    {
                        grid.blocked[row * cols + col] = true;
                    }
                }
            }
        }
        grid
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col < self.cols && c.row < self.rows
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[c.row * self.cols + c.col]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        self.blocked[c.row * self.cols + c.col] = blocked;
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// Cell containing a point; points on the far edge map into the last cell.
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let col = ((p.x / self.cell_size_m).floor() as usize).min(self.cols.checked_sub(1)?);
        let row = ((p.y / self.cell_size_m).floor() as usize).min(self.rows.checked_sub(1)?);
        let c = Cell::new(col, row);
        (p.x <= self.cols as f64 * self.cell_size_m && p.y <= self.rows as f64 * self.cell_size_m).then_some(c)
    }

    pub fn center(&self, c: Cell) -> Vec2 {
        Vec2::new((c.col as f64 + 0.5) * self.cell_size_m, (c.row as f64 + 0.5) * self.cell_size_m)
    }

    /// Free 8-neighbours reachable from `c` without cutting a blocked corner,
    /// in a fixed order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = (Cell, PathCost)> + '_ {
        const STEPS: [(isize, isize); 8] = [(0, -1), (-1, 0), (1, 0), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];
        STEPS.iter().filter_map(move |&(dc, dr)| {
            let col = c.col.checked_add_signed(dc)?;
            let row = c.row.checked_add_signed(dr)?;
            let n = Cell::new(col, row);
            if !self.in_bounds(n) || self.is_blocked(n) {
                return None;
            }
            if dc != 0 && dr != 0 {
                let side_a = Cell::new(col, c.row);
                let side_b = Cell::new(c.col, row);
                if self.is_blocked(side_a) || self.is_blocked(side_b) {
                    return None;
                }
                Some((n, PathCost::DIAG))
            } else {
                Some((n, PathCost::ORTHO))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub cost: PathCost,
}

impl Path {
    pub fn length_m(&self, grid: &OccupancyGrid) -> f64 {
        self.cost.cells() * grid.cell_size_m
    }
}

/// A* search. On equal f-score the open cell with the lower `(row, col)` is expanded first.
pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Path, PathError> {
    for c in [start, goal] {
        if !grid.in_bounds(c) {
            return Err(PathError::OutOfBounds(c));
        }
        if grid.is_blocked(c) {
            return Err(PathError::BlockedEndpoint(c));
        }
    }
    let idx = |c: Cell| c.row * grid.cols + c.col;
    let n = grid.cols * grid.rows;
    let mut g: Vec<Option<PathCost>> = vec![None; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    g[idx(start)] = Some(PathCost::ZERO);
    open.push(Reverse((PathCost::octile(start, goal), start.row, start.col)));

    while let Some(Reverse((_, row, col))) = open.pop() {
        let cur = Cell::new(col, row);
        if closed[idx(cur)] {
            continue;
        }
        closed[idx(cur)] = true;
        let g_cur = g[idx(cur)].expect("opened cells have a cost");
        if cur == goal {
            let mut cells = vec![cur];
            let mut at = cur;
            while let Some(p) = parent[idx(at)] {
                cells.push(p);
                at = p;
            }
            cells.reverse();
            return Ok(Path { cells, cost: g_cur });
        }
        for (next, step) in grid.neighbors(cur) {
            let i = idx(next);
            if closed[i] {
                continue;
            }
            let cand = g_cur + step;
            if g[i].is_none_or(|old| cand < old) {
                g[i] = Some(cand);
                parent[i] = Some(cur);
                open.push(Reverse((cand + PathCost::octile(next, goal), next.row, next.col)));
            }
        }
    }
    Err(PathError::NoPath { start, goal })
}

/// Cell centers in meters, with interior points on straight runs removed.
pub fn path_to_waypoints(path: &Path, grid: &OccupancyGrid) -> Result<Vec<Vec2>, PathError> {
    let cells = &path.cells;
    if cells.is_empty() {
        return Err(PathError::EmptyPath);
    }
    let dir = |a: Cell, b: Cell| (b.col as isize - a.col as isize, b.row as isize - a.row as isize);
    let mut out = vec![grid.center(cells[0])];
    for i in 1..cells.len() {
        let is_last = i + 1 == cells.len();
        if is_last || dir(cells[i - 1], cells[i]) != dir(cells[i], cells[i + 1]) {
            out.push(grid.center(cells[i]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(v: &[(usize, usize)]) -> Vec<Cell> {
        v.iter().map(|&(c, r)| Cell::new(c, r)).collect()
    }

    #[test]
    fn empty_floor_has_no_blocked_cells() {
        let cfg = ScenarioConfig { walls: vec![], ..Default::default() };
        let g = OccupancyGrid::rasterize(&cfg);
        assert_eq!((g.cols, g.rows), (100, 100));
        assert_eq!(g.blocked_count(), 0);
    }

    #[test]
    fn single_wall_rasterization() {
        let cfg = ScenarioConfig { walls: vec![Rect::new(10.0, 10.0, 20.0, 11.0)], ..Default::default() };
        let g = OccupancyGrid::rasterize(&cfg);
        assert_eq!(g.blocked_count(), 10);
        for col in 10..20 {
            assert!(g.is_blocked(Cell::new(col, 10)));
        }
        assert!(!g.is_blocked(Cell::new(20, 10)));
        assert!(!g.is_blocked(Cell::new(15, 11)));
    }

    #[test]
    fn zero_thickness_wall_still_blocks() {
        let g = OccupancyGrid::rasterize_walls(10.0, 10.0, &[Rect::new(5.0, 2.0, 5.0, 4.0)], 1.0);
        assert!(g.is_blocked(Cell::new(4, 2)) && g.is_blocked(Cell::new(5, 3)));
        assert!(!g.is_blocked(Cell::new(3, 2)));
    }

    #[test]
    fn straight_line_and_identity() {
        let g = OccupancyGrid::empty(10, 10, 1.0);
        let p = astar(&g, Cell::new(0, 0), Cell::new(0, 5)).unwrap();
        assert_eq!(p.cost, PathCost { orthogonal: 5, diagonal: 0 });
        assert_eq!(p.cells.len(), 6);
        let p = astar(&g, Cell::new(3, 3), Cell::new(3, 3)).unwrap();
        assert_eq!(p.cells, vec![Cell::new(3, 3)]);
        assert_eq!(p.cost, PathCost::ZERO);
    }

    #[test]
    fn endpoint_errors() {
        let mut g = OccupancyGrid::empty(5, 5, 1.0);
        g.set_blocked(Cell::new(2, 2), true);
        assert_eq!(astar(&g, Cell::new(9, 0), Cell::new(0, 0)), Err(PathError::OutOfBounds(Cell::new(9, 0))));
        assert_eq!(astar(&g, Cell::new(0, 0), Cell::new(2, 2)), Err(PathError::BlockedEndpoint(Cell::new(2, 2))));
        for r in 0..5 {
            g.set_blocked(Cell::new(3, r), true);
        }
        assert!(matches!(astar(&g, Cell::new(0, 0), Cell::new(4, 4)), Err(PathError::NoPath { .. })));
    }

    #[test]
    fn no_corner_cutting() {
        let mut g = OccupancyGrid::empty(3, 3, 1.0);
        g.set_blocked(Cell::new(1, 0), true);
        let p = astar(&g, Cell::new(0, 0), Cell::new(1, 1)).unwrap();
        assert_eq!(p.cost, PathCost { orthogonal: 2, diagonal: 0 });
    }

    #[test]
    fn cost_ordering_is_exact() {
        let a = PathCost { orthogonal: 3, diagonal: 0 };
        let b = PathCost { orthogonal: 1, diagonal: 1 };
        let c = PathCost { orthogonal: 0, diagonal: 2 };
        assert!(b < a && a > c && c > b);
        assert!(PathCost { orthogonal: 7, diagonal: 0 } > PathCost { orthogonal: 0, diagonal: 4 });
        assert!(PathCost { orthogonal: 5, diagonal: 0 } < PathCost { orthogonal: 0, diagonal: 4 });
    }

    #[test]
    fn waypoint_examples() {
        let g = OccupancyGrid::empty(5, 5, 1.0);
        let straight = Path { cells: cells(&[(0, 0), (0, 1), (0, 2)]), cost: PathCost::ZERO };
        assert_eq!(path_to_waypoints(&straight, &g).unwrap(), vec![Vec2::new(0.5, 0.5), Vec2::new(0.5, 2.5)]);
        let single = Path { cells: cells(&[(2, 3)]), cost: PathCost::ZERO };
        assert_eq!(path_to_waypoints(&single, &g).unwrap(), vec![Vec2::new(2.5, 3.5)]);
        let ell = Path { cells: cells(&[(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]), cost: PathCost::ZERO };
        assert_eq!(
            path_to_waypoints(&ell, &g).unwrap(),
            vec![Vec2::new(0.5, 0.5), Vec2::new(2.5, 0.5), Vec2::new(2.5, 2.5)]
        );
        let empty = Path { cells: vec![], cost: PathCost::ZERO };
        assert_eq!(path_to_waypoints(&empty, &g), Err(PathError::EmptyPath));
    }

    #[test]
    fn cell_of_edges() {
        let g = OccupancyGrid::empty(100, 100, 1.0);
        assert_eq!(g.cell_of(Vec2::new(0.0, 0.0)), Some(Cell::new(0, 0)));
        assert_eq!(g.cell_of(Vec2::new(100.0, 99.5)), Some(Cell::new(99, 99)));
        assert_eq!(g.cell_of(Vec2::new(-0.1, 5.0)), None);
        assert_eq!(g.cell_of(Vec2::new(100.1, 5.0)), None);
    }
}
