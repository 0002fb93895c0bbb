//! Pixel grids over a rectangle, optionally masked by a polygon or by the
//! convex hull of a point set. A pixel is retained when its center lies in
//! the region; centers on the boundary count as inside.
//!
//! Retained pixels are always ordered row-major by `(iy, ix)`, so masks
//! produced downstream are index-aligned with [`PredictionGrid::cells`].

use serde::{Deserialize, Serialize};

use crate::covariance::SpaceTimePoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let r = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn unit() -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Smallest rectangle containing `points`.
    pub fn bounding(points: &[[f64; 2]]) -> Result<Self> {
        let mut r = Rect {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            r.x_min = r.x_min.min(p[0]);
            r.y_min = r.y_min.min(p[1]);
            r.x_max = r.x_max.max(p[0]);
            r.y_max = r.y_max.max(p[1]);
        }
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::DegenerateRectangle(format!(
                "[{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Rectangle,
    Polygon,
    ConvexHull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub ix: usize,
    pub iy: usize,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub cell_width: f64,
    pub cell_height: f64,
    pub cells: Vec<GridCell>,
    pub mask: MaskKind,
}

impl PredictionGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.cells.iter().map(|c| c.center)
    }

    /// Pixel centers as space-time points at time `t`.
    pub fn points_at(&self, t: f64) -> Vec<SpaceTimePoint> {
        self.cells
            .iter()
            .map(|c| SpaceTimePoint::new(c.center[0], c.center[1], t))
            .collect()
    }

    fn retain(&self, keep: impl Fn([f64; 2]) -> bool, mask: MaskKind) -> Result<Self> {
        let cells: Vec<GridCell> = self.cells.iter().copied().filter(|c| keep(c.center)).collect();
        if cells.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self {
            cells,
            mask,
            ..self.clone()
        })
    }
}

/// Uniform `nx` by `ny` pixel grid over `rect`.
pub fn make_grid(rect: Rect, nx: usize, ny: usize) -> Result<PredictionGrid> {
    rect.validate()?;
    if nx == 0 || ny == 0 {
        return Err(Error::DegenerateRectangle(format!(
            "grid needs nx, ny >= 1 (got {nx} x {ny})"
        )));
    }
    let w = rect.width() / nx as f64;
    let h = rect.height() / ny as f64;
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            // (2i + 1) / (2n) keeps midpoints within one rounding of exact.
            let cx = rect.x_min + rect.width() * ((2 * ix + 1) as f64 / (2 * nx) as f64);
            let cy = rect.y_min + rect.height() * ((2 * iy + 1) as f64 / (2 * ny) as f64);
            cells.push(GridCell {
                ix,
                iy,
                center: [cx, cy],
            });
        }
    }
    Ok(PredictionGrid {
        rect,
        nx,
        ny,
        cell_width: w,
        cell_height: h,
        cells,
        mask: MaskKind::Rectangle,
    })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    cross(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Drops a repeated closing vertex.
fn open_ring(ring: &[[f64; 2]]) -> &[[f64; 2]] {
    match ring {
        [first, .., last] if ring.len() > 1 && first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

/// Even-odd point-in-polygon test; points on an edge are inside.
pub fn point_in_polygon(p: [f64; 2], ring: &[[f64; 2]]) -> bool {
    let ring = open_ring(ring);
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(p1, q1, q2) || on_segment(p2, q1, q2) || on_segment(q1, p1, p2) || on_segment(q2, p1, p2)
}

/// Checks the ring is a simple polygon with at least three vertices.
pub fn validate_polygon(ring: &[[f64; 2]]) -> Result<()> {
    let ring = open_ring(ring);
    let n = ring.len();
    if n < 3 {
        return Err(Error::Data(format!("polygon needs at least 3 vertices, got {n}")));
    }
    if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonFinite("polygon vertex".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return Err(Error::SelfIntersectingPolygon(i, j));
            }
        }
    }
    Ok(())
}

/// Keeps the pixels whose centers lie inside `ring`.
pub fn mask_polygon(grid: &PredictionGrid, ring: &[[f64; 2]]) -> Result<PredictionGrid> {
    validate_polygon(ring)?;
    grid.retain(|c| point_in_polygon(c, ring), MaskKind::Polygon)
}

/// Grid over the bounding box of `ring`, masked by `ring`.
pub fn grid_for_polygon(ring: &[[f64; 2]], nx: usize, ny: usize) -> Result<PredictionGrid> {
    validate_polygon(ring)?;
    let grid = make_grid(Rect::bounding(ring)?, nx, ny)?;
    mask_polygon(&grid, ring)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear boundary points.
pub fn convex_hull(points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonFinite("hull input point".into()));
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    Ok(hull)
}

/// Keeps the pixels whose centers lie in the convex hull of `points`.
pub fn mask_convex_hull(grid: &PredictionGrid, points: &[[f64; 2]]) -> Result<PredictionGrid> {
    let hull = convex_hull(points)?;
    grid.retain(|c| point_in_polygon(c, &hull), MaskKind::ConvexHull)
}
