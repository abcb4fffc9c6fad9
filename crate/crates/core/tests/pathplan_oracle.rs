//! A* against a plain Dijkstra over random grids.

mod common;

use std::time::Instant;

use common::{dijkstra, random_free, random_grid};
use semrobo::pathplan::{astar, Cell, OccupancyGrid, PathError};
use semrobo::rng::SimRng;

#[test]
fn astar_matches_dijkstra_on_200_grids() {
    let t0 = Instant::now();
    let mut rng = SimRng::new(2024);
    let mut reachable = 0;
    for trial in 0..200 {
        let (grid, blocked) = random_grid(&mut rng);
        let s = random_free(&mut rng, &blocked);
        let g = random_free(&mut rng, &blocked);
        let expected = dijkstra(&blocked, s, g);
        match astar(&grid, Cell::new(s.0, s.1), Cell::new(g.0, g.1)) {
            Ok(path) => {
                reachable += 1;
                let got = (path.cost.orthogonal, path.cost.diagonal);
                assert_eq!(Some(got), expected, "trial {trial}: {s:?} -> {g:?}");
                check_path(&grid, &path.cells, s, g, got);
            }
            Err(PathError::NoPath { .. }) => assert_eq!(expected, None, "trial {trial}"),
            Err(e) => panic!("trial {trial}: unexpected {e}"),
        }
    }
    assert!(reachable > 100, "too few reachable instances ({reachable}) to be a meaningful check");
    assert!(t0.elapsed().as_secs_f64() < 5.0);
}

fn check_path(grid: &OccupancyGrid, cells: &[Cell], s: (usize, usize), g: (usize, usize), cost: (u32, u32)) {
    assert_eq!(cells.first(), Some(&Cell::new(s.0, s.1)));
    assert_eq!(cells.last(), Some(&Cell::new(g.0, g.1)));
    let (mut ortho, mut diag) = (0, 0);
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(!grid.is_blocked(b));
        let dc = b.col as isize - a.col as isize;
        let dr = b.row as isize - a.row as isize;
        assert!(dc.abs() <= 1 && dr.abs() <= 1 && (dc, dr) != (0, 0));
        if dc != 0 && dr != 0 {
            diag += 1;
            assert!(!grid.is_blocked(Cell::new(b.col, a.row)) && !grid.is_blocked(Cell::new(a.col, b.row)));
        } else {
            ortho += 1;
        }
    }
    assert_eq!((ortho, diag), cost);
}

#[test]
fn blocked_or_outside_endpoints_are_rejected() {
    let mut grid = OccupancyGrid::empty(5, 5, 1.0);
    grid.set_blocked(Cell::new(2, 2), true);
    assert!(matches!(astar(&grid, Cell::new(2, 2), Cell::new(0, 0)), Err(PathError::BlockedEndpoint(_))));
    assert!(matches!(astar(&grid, Cell::new(0, 0), Cell::new(9, 0)), Err(PathError::OutOfBounds(_))));
}
