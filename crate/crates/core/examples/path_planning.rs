//! Plan a route across the default floor plan and print it as ASCII.
//!
//! cargo run --example path_planning

use semrobo::geometry::Vec2;
use semrobo::pathplan::{astar, path_to_waypoints, OccupancyGrid};
use semrobo::world::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig::default();
    let grid = OccupancyGrid::rasterize(&config);
    let start = grid.cell_of(Vec2::new(5.5, 5.5)).ok_or("start outside grid")?;
    let goal = grid.cell_of(Vec2::new(94.5, 90.5)).ok_or("goal outside grid")?;

    let path = astar(&grid, start, goal)?;
    println!(
        "{} cells, {} straight + {} diagonal moves, {:.2} m",
        path.cells.len(),
        path.cost.orthogonal,
        path.cost.diagonal,
        path.length_m(&grid)
    );
    let waypoints = path_to_waypoints(&path, &grid)?;
    println!("first waypoints: {:?}", &waypoints[..waypoints.len().min(3)]);

    // Every other row and column keeps the picture terminal-sized.
    let on_path: std::collections::HashSet<_> = path.cells.iter().copied().collect();
    for row in (0..grid.rows).rev().step_by(2) {
        let line: String = (0..grid.cols)
            .step_by(2)
            .map(|col| {
                let c = semrobo::pathplan::Cell::new(col, row);
                if c == start || c == goal {
                    '@'
                } else if on_path.contains(&c) || on_path.contains(&semrobo::pathplan::Cell::new(col + 1, row)) {
                    '*'
                } else if grid.is_blocked(c) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
