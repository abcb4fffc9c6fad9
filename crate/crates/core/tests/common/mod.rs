//! Helpers shared by integration test targets.
#![allow(dead_code)]

use std::collections::BinaryHeap;

use semrobo::pathplan::{astar, Cell, OccupancyGrid, PathError};
use semrobo::rng::SimRng;

pub const SIDE: usize = 20;

/// Dijkstra with float priorities; the returned pair (orthogonal, diagonal)
/// is carried alongside so the comparison with A* is exact.
pub fn dijkstra(blocked: &[bool], start: (usize, usize), goal: (usize, usize)) -> Option<(u32, u32)> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }

    let at = |c: usize, r: usize| r * SIDE + c;
    let free = |c: isize, r: isize| {
        c >= 0 && r >= 0 && c < SIDE as isize && r < SIDE as isize && !blocked[at(c as usize, r as usize)]
    };
    let mut dist = vec![f64::INFINITY; SIDE * SIDE];
    let mut pair = vec![(0u32, 0u32); SIDE * SIDE];
    let mut heap = BinaryHeap::new();
    dist[at(start.0, start.1)] = 0.0;
    heap.push(Item(0.0, at(start.0, start.1)));
    while let Some(Item(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == at(goal.0, goal.1) {
            return Some(pair[i]);
        }
        let (c, r) = ((i % SIDE) as isize, (i / SIDE) as isize);
        for dc in -1isize..=1 {
            for dr in -1isize..=1 {
                if (dc, dr) == (0, 0) || !free(c + dc, r + dr) {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                // No squeezing past a blocked corner.
                if diagonal && (!free(c + dc, r) || !free(c, r + dr)) {
                    continue;
                }
                let j = at((c + dc) as usize, (r + dr) as usize);
                let nd = d + if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
                if nd < dist[j] {
                    dist[j] = nd;
                    let (a, b) = pair[i];
                    pair[j] = if diagonal { (a, b + 1) } else { (a + 1, b) };
                    heap.push(Item(nd, j));
                }
            }
        }
    }
    None
}

pub fn random_grid(rng: &mut SimRng) -> (OccupancyGrid, Vec<bool>) {
    let density = rng.uniform(0.1, 0.4);
    let mut grid = OccupancyGrid::empty(SIDE, SIDE, 1.0);
    let mut blocked = vec![false; SIDE * SIDE];
    for r in 0..SIDE {
        for c in 0..SIDE {
            if rng.next_f64() < density {
                grid.set_blocked(Cell::new(c, r), true);
                blocked[r * SIDE + c] = true;
            }
        }
    }
    (grid, blocked)
}

pub fn random_free(rng: &mut SimRng, blocked: &[bool]) -> (usize, usize) {
    loop {
        let c = rng.below(SIDE as u64) as usize;
        let r = rng.below(SIDE as u64) as usize;
        if !blocked[r * SIDE + c] {
            return (c, r);
        }
    }
}

/// Outcome of comparing A* with Dijkstra over `trials` random grids.
pub struct OracleRun {
    pub trials: usize,
    pub reachable: usize,
    pub mismatches: Vec<String>,
}

pub fn run_oracle(seed: u64, trials: usize) -> OracleRun {
    let mut rng = SimRng::new(seed);
    let mut run = OracleRun { trials, reachable: 0, mismatches: Vec::new() };
    for trial in 0..trials {
        let (grid, blocked) = random_grid(&mut rng);
        let s = random_free(&mut rng, &blocked);
        let g = random_free(&mut rng, &blocked);
        let expected = dijkstra(&blocked, s, g);
        let got = match astar(&grid, Cell::new(s.0, s.1), Cell::new(g.0, g.1)) {
            Ok(p) => {
                run.reachable += 1;
                Some((p.cost.orthogonal, p.cost.diagonal))
            }
            Err(PathError::NoPath { .. }) => None,
            Err(e) => {
                run.mismatches.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        if got != expected {
            run.mismatches.push(format!("trial {trial}: {s:?}->{g:?} astar {got:?} dijkstra {expected:?}"));
        }
    }
    run
}
