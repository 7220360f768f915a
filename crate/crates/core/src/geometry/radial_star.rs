use std::f64::consts::PI;

use super::{boundary_nodes, check_spacing, fibonacci_sphere, Aabb, BoundarySample, Domain, BOUNDARY_TOL};
use crate::error::Result;
use crate::nodes::norm;

/// Star-shaped 3D domain `|x| < R(x/|x|)` for a radius function on the
/// unit sphere.
#[derive(Debug, Clone)]
pub struct RadialStar3d {
    label: &'static str,
    radius: fn(&[f64; 3]) -> f64,
    area: f64,
    bbox: Aabb,
}

fn r_q(u: &[f64; 3]) -> f64 {
    let s = |v: f64| (2.0 * v).sin().powi(2);
    (1.0 + s(u[0]) * s(u[1]) * s(u[2])).sqrt()
}

fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
}

impl RadialStar3d {
    pub fn new(label: &'static str, radius: fn(&[f64; 3]) -> f64) -> Self {
        let mut s = RadialStar3d {
            label,
            radius,
            area: 0.0,
            bbox: Aabb {
                lo: vec![],
                hi: vec![],
            },
        };
        s.area = s.surface_area();
        s.bbox = s.compute_bbox();
        s
    }

    /// The bumpy star with `R² = 1 + sin²(2u₁) sin²(2u₂) sin²(2u₃)`.
    pub fn omega_q() -> Self {
        Self::new("qstar", r_q)
    }

    pub fn radius_at(&self, u: &[f64; 3]) -> f64 {
        (self.radius)(u)
    }

    fn surface_point(&self, theta: f64, phi: f64) -> [f64; 3] {
        let u = direction(theta, phi);
        let r = self.radius_at(&u);
        [r * u[0], r * u[1], r * u[2]]
    }

    /// Midpoint rule over (θ, φ) of |∂ₜX × ∂ᵩX| with centred differences.
    fn surface_area(&self) -> f64 {
        let (nt, np) = (400, 200);
        let (dt, dp) = (2.0 * PI / nt as f64, PI / np as f64);
        let e = 1e-6;
        let mut total = 0.0;
        for i in 0..nt {
            let t = (i as f64 + 0.5) * dt;
            for j in 0..np {
                let p = (j as f64 + 0.5) * dp;
                let d = |a: [f64; 3], b: [f64; 3]| [(a[0] - b[0]) / (2.0 * e), (a[1] - b[1]) / (2.0 * e), (a[2] - b[2]) / (2.0 * e)];
                let xt = d(self.surface_point(t + e, p), self.surface_point(t - e, p));
                let xp = d(self.surface_point(t, p + e), self.surface_point(t, p - e));
                let c = [
                    xt[1] * xp[2] - xt[2] * xp[1],
                    xt[2] * xp[0] - xt[0] * xp[2],
                    xt[0] * xp[1] - xt[1] * xp[0],
                ];
                total += norm(&c) * dt * dp;
            }
        }
        total
    }

    pub fn surface_area_estimate(&self) -> f64 {
        self.area
    }

    /// Coarse grid over the sphere, then a compass search from the best
    /// grid point of each signed coordinate.
    fn compute_bbox(&self) -> Aabb {
        let (nt, np) = (360, 180);
        let mut lo = vec![0.0; 3];
        let mut hi = vec![0.0; 3];
        for k in 0..3 {
            for sign in [1.0, -1.0] {
                let f = |t: f64, p: f64| sign * self.surface_point(t, p)[k];
                let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
                for i in 0..nt {
                    let t = 2.0 * PI * i as f64 / nt as f64;
                    for j in 0..=np {
                        let p = PI * j as f64 / np as f64;
                        let v = f(t, p);
                        if v > best.0 {
                            best = (v, t, p);
                        }
                    }
                }
                let (mut v, mut t, mut p) = best;
                let mut step = PI / np as f64;
                while step > 1e-13 {
                    let mut moved = false;
                    for (a, b) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        let w = f(t + a, p + b);
                        if w > v {
                            (v, t, p) = (w, t + a, p + b);
                            moved = true;
                        }
                    }
                    if !moved {
                        step *= 0.5;
                    }
                }
                if sign > 0.0 {
                    hi[k] = v;
                } else {
                    lo[k] = -v;
                }
            }
        }
        Aabb { lo, hi }
    }
}

impl Domain for RadialStar3d {
    fn name(&self) -> String {
        self.label.into()
    }

    fn dim(&self) -> usize {
        3
    }

    fn inside(&self, x: &[f64]) -> bool {
        let r = norm(x);
        if r == 0.0 {
            return true;
        }
        let u = [x[0] / r, x[1] / r, x[2] / r];
        r < self.radius_at(&u) - BOUNDARY_TOL
    }

    fn bounding_box(&self) -> Aabb {
        self.bbox.clone()
    }

    /// Fibonacci lattice on the unit sphere pushed out radially to the
    /// surface; the count comes from the estimated surface area.
    fn boundary_sample(&self, spacing: f64) -> Result<BoundarySample> {
        check_spacing(spacing)?;
        let count = ((self.area / (spacing * spacing)).round() as usize).max(4);
        let mut coords = fibonacci_sphere(count);
        for p in coords.chunks_exact_mut(3) {
            let r = self.radius_at(&[p[0], p[1], p[2]]);
            p.iter_mut().for_each(|v| *v *= r);
        }
        Ok(BoundarySample {
            points: boundary_nodes(3, coords)?,
            spacing,
            too_coarse: spacing * spacing > self.area,
        })
    }

    /// Radial gap to the surface; an upper bound on the true distance.
    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return self.radius_at(&[0.0, 0.0, 1.0]);
        }
        let u = [x[0] / r, x[1] / r, x[2] / r];
        (self.radius_at(&u) - r).abs()
    }
}
