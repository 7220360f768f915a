//! Computational domains: membership, bounding boxes and boundary sampling.
//!
//! Every domain is an open bounded set. Points on the boundary (and inside a
//! thin tolerance band around it) are *not* contained, so boundary samples
//! always fail [`Domain::contains`].

mod ball;
mod box_domain;
mod polar_star;
mod polygon;
mod radial_star;

pub use ball::Ball;
pub use box_domain::BoxDomain;
pub use polar_star::PolarStar;
pub use polygon::Polygon;
pub use radial_star::RadialStar3d;

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{PumError, Result};
use crate::nodes::{NodeSet, Role};

/// Width of the band around the boundary that counts as outside.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn contains_closed(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, &v)| v >= self.lo[k] - tol && v <= self.hi[k] + tol)
    }
}

/// Points on the boundary spaced (approximately) uniformly.
#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub points: NodeSet,
    /// Requested separation.
    pub spacing: f64,
    /// Set when the spacing exceeded the boundary size and a minimal set was
    /// returned instead.
    pub too_coarse: bool,
}

/// A computational domain.
pub trait Domain: Send + Sync + std::fmt::Debug {
    /// Short identifier used in reports.
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Membership test for a point of the right dimension.
    fn inside(&self, x: &[f64]) -> bool;

    fn bounding_box(&self) -> Aabb;

    fn boundary_sample(&self, spacing: f64) -> Result<BoundarySample>;

    /// Distance from an interior point to the boundary. Curved domains may
    /// return a close approximation.
    fn distance_to_boundary(&self, x: &[f64]) -> f64;

    /// Membership test that validates the dimension first.
    fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(PumError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.inside(x))
    }

    /// Volume (area in 2D) estimated from the bounding box and Halton probes
    /// unless the domain knows it exactly.
    fn measure(&self) -> f64 {
        let bb = self.bounding_box();
        let n = 20_000;
        let hits = crate::sampling::halton_points(n, self.dim(), 1)
            .chunks_exact(self.dim())
            .filter(|u| {
                let x: Vec<f64> = (0..self.dim())
                    .map(|k| bb.lo[k] + u[k] * bb.extent(k))
                    .collect();
                self.inside(&x)
            })
            .count();
        bb.volume() * hits as f64 / n as f64
    }
}

pub(crate) fn check_spacing(spacing: f64) -> Result<()> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(PumError::Input(format!(
            "boundary spacing must be positive, got {spacing}"
        )));
    }
    Ok(())
}

/// Number of samples for a closed curve of length `length`.
pub(crate) fn curve_count(length: f64, spacing: f64) -> (usize, bool) {
    if spacing > length {
        return (4, true);
    }
    (((length / spacing).round() as usize).max(4), false)
}

/// Unit vectors of a spherical Fibonacci lattice.
pub fn fibonacci_sphere(count: usize) -> Vec<f64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(3 * count);
    for i in 0..count {
        let z = 1.0 - (2 * i + 1) as f64 / count as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        out.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
    }
    out
}

pub(crate) fn boundary_nodes(dim: usize, coords: Vec<f64>) -> Result<NodeSet> {
    NodeSet::new_unchecked(dim, coords, Role::BoundaryEval)
}

/// Looks up a domain by identifier.
///
/// Accepted ids: `box`, `star`, `ball`, `qstar`, and `polygon:<file>`.
pub fn domain_by_name(id: &str) -> Result<Arc<dyn Domain>> {
    if let Some(path) = id.strip_prefix("polygon:") {
        return Ok(Arc::new(Polygon::from_file(Path::new(path))?));
    }
    let d: Arc<dyn Domain> = match id {
        "box" | "B" => Arc::new(BoxDomain::square(2.0)),
        "star" | "S" => Arc::new(PolarStar::omega_s()),
        "ball" | "U" => Arc::new(Ball::new(3, 1.0)),
        "qstar" | "Q" => Arc::new(RadialStar3d::omega_q()),
        _ => {
            return Err(PumError::Unknown {
                kind: "domain",
                name: id.to_string(),
                available: DOMAIN_NAMES.join(", "),
            })
        }
    };
    Ok(d)
}

pub const DOMAIN_NAMES: &[&str] = &["box", "star", "ball", "qstar", "polygon:<file>"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_builtin_ids() {
        for id in ["box", "star", "ball", "qstar"] {
            assert!(domain_by_name(id).is_ok(), "{id}");
        }
        assert!(matches!(
            domain_by_name("sweden"),
            Err(PumError::Unknown { .. })
        ));
    }

    #[test]
    fn boundary_points_are_outside_and_in_the_box() {
        for id in ["box", "star", "ball", "qstar"] {
            let d = domain_by_name(id).unwrap();
            let bb = d.bounding_box();
            let s = d.boundary_sample(0.1).unwrap();
            for p in s.points.iter() {
                assert!(!d.inside(p), "{id}: {p:?} counted as interior");
                assert!(bb.contains_closed(p, 1e-9), "{id}: {p:?} outside bbox");
            }
        }
    }

    #[test]
    fn fibonacci_points_are_unit() {
        for p in fibonacci_sphere(100).chunks(3) {
            assert!((crate::nodes::norm(p) - 1.0).abs() < 1e-14);
        }
    }
}
