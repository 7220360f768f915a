use super::polygon::Polygon;
use super::{check_spacing, Aabb, BoundarySample, Domain, BOUNDARY_TOL};
use crate::error::{input, Result};

/// Open axis-aligned box in 2D or 3D.
#[derive(Debug, Clone)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || !(2..=3).contains(&lo.len()) {
            return input("box corners must both be 2D or both 3D");
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return input("box must have positive extent in every direction");
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The square `(-half, half)²`.
    pub fn square(half: f64) -> Self {
        BoxDomain {
            lo: vec![-half; 2],
            hi: vec![half; 2],
        }
    }

    fn outline(&self) -> Polygon {
        let (a, b) = ([self.lo[0], self.lo[1]], [self.hi[0], self.hi[1]]);
        Polygon::new(vec![a, [b[0], a[1]], b, [a[0], b[1]]]).expect("box outline is a valid polygon")
    }

    fn faces_sample(&self, spacing: f64) -> BoundarySample {
        // Each face gets a cell-centred grid; the three pairs of faces are
        // disjoint so no point is repeated.
        let mut coords = Vec::new();
        let area: f64 = (0..3)
            .map(|k| 2.0 * self.extent(k) * self.extent((k + 1) % 3))
            .sum();
        let too_coarse = spacing * spacing > area;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let ni = ((self.extent(i) / spacing).round() as usize).max(1);
            let nj = ((self.extent(j) / spacing).round() as usize).max(1);
            for side in [self.lo[k], self.hi[k]] {
                for a in 0..ni {
                    for b in 0..nj {
                        let mut p = [0.0; 3];
                        p[k] = side;
                        p[i] = self.lo[i] + (a as f64 + 0.5) * self.extent(i) / ni as f64;
                        p[j] = self.lo[j] + (b as f64 + 0.5) * self.extent(j) / nj as f64;
                        coords.extend_from_slice(&p);
                    }
                }
            }
        }
        BoundarySample {
            points: super::boundary_nodes(3, coords).expect("three-dimensional coordinates"),
            spacing,
            too_coarse,
        }
    }

    fn extent(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }
}

impl Domain for BoxDomain {
    fn name(&self) -> String {
        "box".into()
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn inside(&self, x: &[f64]) -> bool {
        self.distance_to_boundary(x) > BOUNDARY_TOL
            && x.iter()
                .enumerate()
                .all(|(k, &v)| v > self.lo[k] && v < self.hi[k])
    }

    fn bounding_box(&self) -> Aabb {
        Aabb {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }

    fn boundary_sample(&self, spacing: f64) -> Result<BoundarySample> {
        check_spacing(spacing)?;
        if self.dim() == 2 {
            self.outline().boundary_sample(spacing)
        } else {
            Ok(self.faces_sample(spacing))
        }
    }

    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(k, &v)| (v - self.lo[k]).abs().min((self.hi[k] - v).abs()))
            .fold(f64::INFINITY, f64::min)
    }

    fn measure(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }
}
