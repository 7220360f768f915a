use std::f64::consts::PI;

use super::{
    boundary_nodes, check_spacing, curve_count, fibonacci_sphere, Aabb, BoundarySample, Domain,
    BOUNDARY_TOL,
};
use crate::nodes::norm;

/// Open ball centred at the origin, in 2D or 3D.
#[derive(Debug, Clone)]
pub struct Ball {
    dim: usize,
    radius: f64,
}

impl Ball {
    pub fn new(dim: usize, radius: f64) -> Self {
        assert!((2..=3).contains(&dim) && radius > 0.0);
        Ball { dim, radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Domain for Ball {
    fn name(&self) -> String {
        "ball".into()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn inside(&self, x: &[f64]) -> bool {
        norm(x) < self.radius - BOUNDARY_TOL
    }

    fn bounding_box(&self) -> Aabb {
        Aabb {
            lo: vec![-self.radius; self.dim],
            hi: vec![self.radius; self.dim],
        }
    }

    fn boundary_sample(&self, spacing: f64) -> crate::error::Result<BoundarySample> {
        check_spacing(spacing)?;
        let r = self.radius;
        let (coords, too_coarse) = if self.dim == 2 {
            let (count, coarse) = curve_count(2.0 * PI * r, spacing);
            let coords = (0..count)
                .flat_map(|i| {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    [r * t.cos(), r * t.sin()]
                })
                .collect();
            (coords, coarse)
        } else {
            let area = 4.0 * PI * r * r;
            let count = ((area / (spacing * spacing)).round() as usize).max(4);
            let coords = fibonacci_sphere(count).into_iter().map(|u| r * u).collect();
            (coords, spacing * spacing > area)
        };
        Ok(BoundarySample {
            points: boundary_nodes(self.dim, coords)?,
            spacing,
            too_coarse,
        })
    }

    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        (self.radius - norm(x)).abs()
    }

    fn measure(&self) -> f64 {
        match self.dim {
            2 => PI * self.radius.powi(2),
            _ => 4.0 / 3.0 * PI * self.radius.powi(3),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_count_tracks_area() {
        let b = Ball::new(3, 1.0);
        for s in [0.05, 0.1, 0.2, 0.4] {
            let n = b.boundary_sample(s).unwrap().points.len() as f64;
            let expect = 4.0 * PI / (s * s);
            assert!((n / expect - 1.0).abs() < 0.2, "s={s}: {n} vs {expect}");
        }
    }

    #[test]
    fn unit_ball_bbox() {
        let bb = Ball::new(3, 1.0).bounding_box();
        assert_eq!(bb.lo, vec![-1.0; 3]);
        assert_eq!(bb.hi, vec![1.0; 3]);
    }

    #[test]
    fn circle_spacing_is_uniform() {
        let s = Ball::new(2, 1.0).boundary_sample(0.1).unwrap();
        let n = s.points.len();
        for i in 0..n {
            let d = crate::nodes::distance(s.points.point(i), s.points.point((i + 1) % n));
            assert!((d / 0.1 - 1.0).abs() < 0.1);
        }
    }
}
