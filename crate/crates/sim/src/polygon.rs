//! Planar walkable region.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub type P2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub points: Vec<P2>,
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: P2, a: P2, b: P2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

pub fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    q[0].hypot(q[1])
}

pub fn segment_segment_distance(a: P2, b: P2, c: P2, d: P2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

impl Polygon {
    pub fn new(points: Vec<P2>) -> Result<Self> {
        let p = Self { points };
        p.validate()?;
        Ok(p)
    }

    pub fn rectangle(lo: P2, hi: P2) -> Self {
        Self {
            points: vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]],
        }
    }

    fn edges(&self) -> impl Iterator<Item = (P2, P2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// At least three vertices, non-zero area, and no two non-adjacent edges
    /// touching.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n < 3 {
            return Err(SimError::Config("walkable polygon needs at least 3 vertices".into()));
        }
        if self.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(SimError::Config("walkable polygon has non-finite vertices".into()));
        }
        if self.area() <= 0.0 {
            return Err(SimError::Config("walkable polygon has zero area".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                let (c, d) = (self.points[j], self.points[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(SimError::Config(format!("walkable polygon self-intersects (edges {i} and {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        let s: f64 = self.edges().map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum();
        (0.5 * s).abs()
    }

    pub fn bounds(&self) -> (P2, P2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Even-odd test; points on the boundary count as inside.
    pub fn contains(&self, p: P2) -> bool {
        if self.edges().any(|(a, b)| point_segment_distance(p, a, b) == 0.0) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: P2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Inside with at least `clearance` to the boundary.
    pub fn contains_disc(&self, p: P2, clearance: f64) -> bool {
        self.contains(p) && self.boundary_distance(p) >= clearance
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }

    /// Rejection sample of an interior point with the given clearance.
    pub fn sample<R: Rng>(&self, rng: &mut R, clearance: f64, attempts: usize) -> Option<P2> {
        let (lo, hi) = self.bounds();
        for _ in 0..attempts {
            let p = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
            if self.contains_disc(p, clearance) {
                return Some(p);
            }
        }
        None
    }
}
