//! Prediction grids: a rectangle, a polygon mask and a convex-hull mask.
//!
//! cargo run --example grid_masking

use stexceed::grid::{grid_for_polygon, make_grid, mask_convex_hull, PredictionGrid, Rect};
use stexceed::linalg::RngStream;

fn show(name: &str, g: &PredictionGrid) {
    println!("{name}: {} of {} pixels", g.len(), g.nx * g.ny);
    for iy in (0..g.ny).rev() {
        let row: String = (0..g.nx)
            .map(|ix| {
                if g.cells.iter().any(|c| c.ix == ix && c.iy == iy) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("  {row}");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rect = make_grid(Rect::new(0.0, 0.0, 2.0, 1.0)?, 16, 8)?;
    show("rectangle", &rect);

    let l_shape = [[0.0, 0.0], [2.0, 0.0], [2.0, 0.4], [0.8, 0.4], [0.8, 1.0], [0.0, 1.0]];
    show("polygon", &grid_for_polygon(&l_shape, 16, 8)?);

    let mut rng = RngStream::new(4);
    let sites: Vec<[f64; 2]> = (0..12)
        .map(|_| [0.3 + 1.4 * rng.uniform(), 0.1 + 0.8 * rng.uniform()])
        .collect();
    show("convex hull of 12 sites", &mask_convex_hull(&rect, &sites)?);
    Ok(())
}
