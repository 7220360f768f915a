use std::path::Path;

use super::{boundary_nodes, check_spacing, Aabb, BoundarySample, Domain, BOUNDARY_TOL};
use crate::error::{input, PumError, Result};

/// Simple (non-self-intersecting) polygon, implicitly closed.
#[derive(Debug, Clone)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
    label: String,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::with_label(vertices, "polygon")
    }

    fn with_label(mut vertices: Vec<[f64; 2]>, label: &str) -> Result<Self> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return input("a polygon needs at least three vertices");
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return input("polygon vertices must be finite");
        }
        let poly = Polygon {
            vertices,
            label: label.to_string(),
        };
        if poly.signed_area().abs() < 1e-14 {
            return input("polygon has zero area");
        }
        if let Some((a, b)) = poly.find_self_intersection() {
            return input(format!("polygon edges {a} and {b} intersect"));
        }
        Ok(poly)
    }

    /// Reads a vertex file: two numbers per line, `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(PumError::Parse {
                    line: lineno + 1,
                    message: format!("expected two coordinates, found {}", fields.len()),
                });
            }
            let mut v = [0.0; 2];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| PumError::Parse {
                    line: lineno + 1,
                    message: format!("not a number: `{f}`"),
                })?;
            }
            vertices.push(v);
        }
        Self::new(vertices)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut p = Self::parse(&text)?;
        p.label = format!("polygon:{}", path.display());
        Ok(p)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| seg_len(a, b)).sum()
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges may only share their common vertex.
                    if n > 3 && collinear_overlap(a, b, c, d) {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Even-odd crossing count.
    fn crossing_inside(&self, x: &[f64]) -> bool {
        let (px, py) = (x[0], x[1]);
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > py) != (b[1] > py) {
                let t = (py - a[1]) / (b[1] - a[1]);
                if px < a[0] + t * (b[0] - a[0]) {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

impl Domain for Polygon {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn dim(&self) -> usize {
        2
    }

    fn inside(&self, x: &[f64]) -> bool {
        self.crossing_inside(x) && self.distance_to_boundary(x) > BOUNDARY_TOL
    }

    fn bounding_box(&self) -> Aabb {
        let mut lo = vec![f64::INFINITY; 2];
        let mut hi = vec![f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Aabb { lo, hi }
    }

    /// Each edge is split into `round(length / spacing)` equal pieces, so
    /// every vertex is part of the sample.
    fn boundary_sample(&self, spacing: f64) -> Result<BoundarySample> {
        check_spacing(spacing)?;
        let too_coarse = spacing > self.perimeter();
        let mut coords = Vec::new();
        for (a, b) in self.edges() {
            let pieces = if too_coarse {
                1
            } else {
                ((seg_len(a, b) / spacing).round() as usize).max(1)
            };
            for i in 0..pieces {
                let t = i as f64 / pieces as f64;
                coords.push(a[0] + t * (b[0] - a[0]));
                coords.push(a[1] + t * (b[1] - a[1]));
            }
        }
        Ok(BoundarySample {
            points: boundary_nodes(2, coords)?,
            spacing,
            too_coarse,
        })
    }

    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance([x[0], x[1]], a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn measure(&self) -> f64 {
        self.signed_area().abs()
    }
}

fn seg_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

pub(crate) fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - (a[0] + t * dx)).hypot(p[1] - (a[1] + t * dy))
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) - 1e-15
        && p[0] <= a[0].max(b[0]) + 1e-15
        && p[1] >= a[1].min(b[1]) - 1e-15
        && p[1] <= a[1].max(b[1]) + 1e-15
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn collinear_overlap(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    if orient(a, b, c) != 0.0 || orient(a, b, d) != 0.0 {
        return false;
    }
    // Shared vertex is b == c; overlap means the edges fold back.
    let u = [b[0] - a[0], b[1] - a[1]];
    let v = [d[0] - c[0], d[1] - c[1]];
    u[0] * v[0] + u[1] * v[1] < 0.0
}
