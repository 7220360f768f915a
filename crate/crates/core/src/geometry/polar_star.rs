use std::f64::consts::TAU;

use super::{boundary_nodes, check_spacing, curve_count, Aabb, BoundarySample, Domain, BOUNDARY_TOL};
use crate::error::Result;

/// Star-shaped planar domain `r < scale·(base + Σ aₖ sin(mₖθ))`.
#[derive(Debug, Clone)]
pub struct PolarStar {
    scale: f64,
    base: f64,
    terms: Vec<(f64, f64)>,
    // θ-grid and cumulative chord length, uniform in θ.
    arc: Vec<f64>,
    bbox: Aabb,
    // Dense polyline for distance queries.
    outline: Vec<[f64; 2]>,
}

const OUTLINE_POINTS: usize = 4096;

impl PolarStar {
    /// `terms` holds `(amplitude, frequency)` pairs; frequencies must be
    /// integers so the curve closes.
    pub fn new(scale: f64, base: f64, terms: Vec<(f64, f64)>) -> Self {
        assert!(scale > 0.0);
        let mut s = PolarStar {
            scale,
            base,
            terms,
            arc: Vec::new(),
            bbox: Aabb {
                lo: vec![],
                hi: vec![],
            },
            outline: Vec::new(),
        };
        let min_r = (0..10_000)
            .map(|i| s.radius(TAU * i as f64 / 10_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(min_r > 0.0, "radius function must stay positive");
        s.arc = s.arc_table();
        s.outline = (0..OUTLINE_POINTS)
            .map(|i| s.point_at(TAU * i as f64 / OUTLINE_POINTS as f64))
            .collect();
        s.bbox = s.compute_bbox();
        s
    }

    /// The lobed star `r < 2(0.7 + 0.12(sin 6θ + sin 3θ))`.
    pub fn omega_s() -> Self {
        Self::new(2.0, 0.7, vec![(0.12, 6.0), (0.12, 3.0)])
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.scale
            * (self.base
                + self
                    .terms
                    .iter()
                    .map(|&(a, m)| a * (m * theta).sin())
                    .sum::<f64>())
    }

    pub fn point_at(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Cumulative chord lengths of the boundary, doubling the resolution
    /// until the total converges to 1e-10 relative.
    fn arc_table(&self) -> Vec<f64> {
        let table = |n: usize| {
            let mut cum = Vec::with_capacity(n + 1);
            cum.push(0.0);
            let mut prev = self.point_at(0.0);
            let mut acc = 0.0;
            for i in 1..=n {
                let p = self.point_at(TAU * i as f64 / n as f64);
                acc += (p[0] - prev[0]).hypot(p[1] - prev[1]);
                cum.push(acc);
                prev = p;
            }
            cum
        };
        let mut n = 1024;
        let mut cur = table(n);
        loop {
            n *= 2;
            let next = table(n);
            let (a, b) = (*cur.last().unwrap(), *next.last().unwrap());
            cur = next;
            if (b - a).abs() <= 1e-10 * b || n >= 1 << 22 {
                return cur;
            }
        }
    }

    /// Parameter value at arc length `s ∈ [0, L]`.
    fn theta_at_arc(&self, s: f64) -> f64 {
        let n = self.arc.len() - 1;
        let i = self.arc.partition_point(|&v| v <= s).clamp(1, n);
        let (a, b) = (self.arc[i - 1], self.arc[i]);
        let t = if b > a { (s - a) / (b - a) } else { 0.0 };
        TAU * ((i - 1) as f64 + t) / n as f64
    }

    fn compute_bbox(&self) -> Aabb {
        let mut lo = vec![0.0; 2];
        let mut hi = vec![0.0; 2];
        let n = 20_000;
        let dt = TAU / n as f64;
        for k in 0..2 {
            for (sign, out) in [(1.0, &mut hi[k]), (-1.0, &mut lo[k])] {
                let f = |t: f64| sign * self.point_at(t)[k];
                let best = (0..n)
                    .map(|i| i as f64 * dt)
                    .max_by(|&a, &b| f(a).total_cmp(&f(b)))
                    .unwrap();
                let t = golden_max(&f, best - dt, best + dt);
                *out = sign * f(t).max(f(best));
            }
        }
        Aabb { lo, hi }
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if b - a < 1e-14 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

impl Domain for PolarStar {
    fn name(&self) -> String {
        "star".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn inside(&self, x: &[f64]) -> bool {
        let r = x[0].hypot(x[1]);
        r < self.radius(x[1].atan2(x[0])) - BOUNDARY_TOL
    }

    fn bounding_box(&self) -> Aabb {
        self.bbox.clone()
    }

    fn boundary_sample(&self, spacing: f64) -> Result<BoundarySample> {
        check_spacing(spacing)?;
        let len = self.length();
        let (count, too_coarse) = curve_count(len, spacing);
        let coords = (0..count)
            .flat_map(|i| self.point_at(self.theta_at_arc(len * i as f64 / count as f64)))
            .collect();
        Ok(BoundarySample {
            points: boundary_nodes(2, coords)?,
            spacing,
            too_coarse,
        })
    }

    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let p = [x[0], x[1]];
        let n = self.outline.len();
        let (i, _) = self
            .outline
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (q[0] - p[0]).hypot(q[1] - p[1])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // Refine on the true curve next to the closest outline vertex.
        let dt = TAU / n as f64;
        let t0 = i as f64 * dt;
        let f = |t: f64| {
            let q = self.point_at(t);
            -(q[0] - p[0]).hypot(q[1] - p[1])
        };
        let t = golden_max(&f, t0 - dt, t0 + dt);
        (-f(t)).min(-f(t0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polar(r: f64, t: f64) -> [f64; 2] {
        [r * t.cos(), r * t.sin()]
    }

    #[test]
    fn membership_near_lobe() {
        let s = PolarStar::omega_s();
        // r(π/12) = 2(0.7 + 0.12(1 + 1/√2)) ≈ 1.8097
        let t = PI / 12.0;
        assert!((s.radius(t) - 1.4 - 0.24 * (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
        assert!(s.contains(&polar(1.39, t)).unwrap());
        assert!(s.contains(&polar(1.80, t)).unwrap());
        assert!(!s.contains(&polar(1.82, t)).unwrap());
    }

    #[test]
    fn radius_is_periodic() {
        let s = PolarStar::omega_s();
        for i in 0..50 {
            let t = 0.37 * i as f64;
            let (a, b) = (s.point_at(t), s.point_at(t + TAU));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn bbox_matches_brute_force() {
        let s = PolarStar::omega_s();
        let bb = s.bounding_box();
        let n = 2_000_000;
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        let mut rmax: f64 = 0.0;
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let p = s.point_at(t);
            rmax = rmax.max(s.radius(t));
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..2 {
            assert!((bb.lo[k] - lo[k]).abs() < 1e-9 && bb.lo[k] <= lo[k]);
            assert!((bb.hi[k] - hi[k]).abs() < 1e-9 && bb.hi[k] >= hi[k]);
        }
        // Largest radius bounds every half-width.
        assert!((rmax - 1.8216).abs() < 1e-3, "{rmax}");
    }

    #[test]
    fn samples_are_equally_spaced_in_arc_length() {
        let s = PolarStar::omega_s();
        let h = 0.1;
        let b = s.boundary_sample(h).unwrap();
        let n = b.points.len();
        let step = s.length() / n as f64;
        assert!((step / h - 1.0).abs() < 0.1);
        for i in 0..n {
            let d = crate::nodes::distance(b.points.point(i), b.points.point((i + 1) % n));
            // Chords are slightly shorter than arcs on curved stretches.
            assert!(d <= step * (1.0 + 1e-9) && d > 0.9 * step, "{i}: {d}");
        }
    }

    #[test]
    fn distance_to_boundary_is_accurate() {
        let s = PolarStar::omega_s();
        assert!(s.distance_to_boundary(&s.point_at(1.0)) < 1e-10);
        let d = s.distance_to_boundary(&[0.0, 0.0]);
        let rmin = (0..100_000)
            .map(|i| s.radius(TAU * i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((d - rmin).abs() < 1e-8);
    }
}
