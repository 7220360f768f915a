//! Manufactured solutions of `-Δu = f` with Dirichlet data `g = u`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{PumError, Result};
use crate::kernels::{InverseQuadratic, RadialKernel};
use crate::nodes::distance;

pub trait Problem: Send + Sync + Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn exact(&self, x: &[f64]) -> f64;
    fn laplacian(&self, x: &[f64]) -> f64;
    /// Shape parameter the experiments use for this solution.
    fn default_eps(&self) -> f64 {
        1.0
    }

    fn forcing(&self, x: &[f64]) -> f64 {
        -self.laplacian(x)
    }

    fn dirichlet(&self, x: &[f64]) -> f64 {
        self.exact(x)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(PumError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `sinh(0.3(x-2) sin(2y) exp(-(x-0.1)⁴))`
#[derive(Debug, Clone, Copy)]
pub struct SinhBump;

impl SinhBump {
    // g = a(x)·b(y) with first and second derivatives of each factor.
    fn parts(x: &[f64]) -> ([f64; 3], [f64; 3]) {
        let s = x[0] - 0.1;
        let s2 = s * s;
        let s3 = s2 * s;
        let e = (-s2 * s2).exp();
        let t = x[0] - 2.0;
        let inner = 1.0 - 4.0 * t * s3;
        let a = [
            0.3 * t * e,
            0.3 * e * inner,
            0.3 * e * (-4.0 * s3 * inner - 4.0 * s3 - 12.0 * t * s2),
        ];
        let y2 = 2.0 * x[1];
        let b = [y2.sin(), 2.0 * y2.cos(), -4.0 * y2.sin()];
        (a, b)
    }
}

impl Problem for SinhBump {
    fn name(&self) -> String {
        "u1".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn exact(&self, x: &[f64]) -> f64 {
        let (a, b) = Self::parts(x);
        (a[0] * b[0]).sinh()
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let (a, b) = Self::parts(x);
        let g = a[0] * b[0];
        let gx = a[1] * b[0];
        let gy = a[0] * b[1];
        let lap_g = a[2] * b[0] + a[0] * b[2];
        g.cosh() * lap_g + g.sinh() * (gx * gx + gy * gy)
    }
}

/// `sin(2(x-0.1)²) cos((x-0.3)²) + sin²((y-0.5)²)`
#[derive(Debug, Clone, Copy)]
pub struct Trig;

impl Problem for Trig {
    fn name(&self) -> String {
        "u2".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn exact(&self, x: &[f64]) -> f64 {
        let p = x[0] - 0.1;
        let t = x[0] - 0.3;
        let v = x[1] - 0.5;
        (2.0 * p * p).sin() * (t * t).cos() + (v * v).sin().powi(2)
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let p = x[0] - 0.1;
        let t = x[0] - 0.3;
        let v = x[1] - 0.5;
        let (sa, ca) = (2.0 * p * p).sin_cos();
        let (sb, cb) = (t * t).sin_cos();
        let (a, da, dda) = (sa, 4.0 * p * ca, 4.0 * ca - 16.0 * p * p * sa);
        let (b, db, ddb) = (cb, -2.0 * t * sb, -2.0 * sb - 4.0 * t * t * cb);
        let (s2, c2) = (2.0 * v * v).sin_cos();
        let ddc = 2.0 * s2 + 8.0 * v * v * c2;
        dda * b + 2.0 * da * db + a * ddb + ddc
    }
}

/// `1/(25x² + 25y² + 1)`
#[derive(Debug, Clone, Copy)]
pub struct Runge;

impl Problem for Runge {
    fn name(&self) -> String {
        "u3".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn default_eps(&self) -> f64 {
        4.0
    }
    fn exact(&self, x: &[f64]) -> f64 {
        1.0 / (25.0 * x[0] * x[0] + 25.0 * x[1] * x[1] + 1.0)
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let p = self.exact(x);
        -100.0 * p * p + 5000.0 * r2 * p * p * p
    }
}

/// `Σ_{j=0}^{5} exp(-√(2ʲ)) (cos(2ʲx) + cos(2ʲy))`
#[derive(Debug, Clone, Copy)]
pub struct LacunarySum;

impl Problem for LacunarySum {
    fn name(&self) -> String {
        "u4".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn default_eps(&self) -> f64 {
        4.0
    }
    fn exact(&self, x: &[f64]) -> f64 {
        (0..=5)
            .map(|j| {
                let k = f64::powi(2.0, j);
                (-k.sqrt()).exp() * ((k * x[0]).cos() + (k * x[1]).cos())
            })
            .sum()
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        (0..=5)
            .map(|j| {
                let k = f64::powi(2.0, j);
                -k * k * (-k.sqrt()).exp() * ((k * x[0]).cos() + (k * x[1]).cos())
            })
            .sum()
    }
}

/// `sin(π(x-0.5)z / ln(y+3))` in three dimensions.
#[derive(Debug, Clone, Copy)]
pub struct LogWave;

impl Problem for LogWave {
    fn name(&self) -> String {
        "u5".into()
    }
    fn dim(&self) -> usize {
        3
    }
    fn exact(&self, x: &[f64]) -> f64 {
        (PI * (x[0] - 0.5) * x[2] / (x[1] + 3.0).ln()).sin()
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        let y3 = x[1] + 3.0;
        let l = y3.ln();
        let c = PI * (x[0] - 0.5) * x[2];
        let theta = c / l;
        let tx = PI * x[2] / l;
        let tz = PI * (x[0] - 0.5) / l;
        let ty = -c / (l * l * y3);
        let tyy = c * (2.0 + l) / (l * l * l * y3 * y3);
        theta.cos() * tyy - theta.sin() * (tx * tx + ty * ty + tz * tz)
    }
}

/// A single kernel translate; it lies in the trial space when the kernel
/// matches the discretization and the centre is a node.
#[derive(Debug, Clone)]
pub struct KernelBump {
    pub kernel: Arc<dyn RadialKernel>,
    pub center: Vec<f64>,
}

impl Problem for KernelBump {
    fn name(&self) -> String {
        format!("{}-bump", self.kernel.name())
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn default_eps(&self) -> f64 {
        self.kernel.eps()
    }
    fn exact(&self, x: &[f64]) -> f64 {
        self.kernel.phi(distance(x, &self.center))
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        self.kernel.laplacian(distance(x, &self.center), x.len())
    }
}

/// `u ≡ c`
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub value: f64,
    pub dim: usize,
}

impl Problem for Constant {
    fn name(&self) -> String {
        format!("const({})", self.value)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn exact(&self, _: &[f64]) -> f64 {
        self.value
    }
    fn laplacian(&self, _: &[f64]) -> f64 {
        0.0
    }
}

pub const PROBLEM_NAMES: &[&str] = &["u1", "u2", "u3", "u4", "u5"];

pub fn problem_by_name(name: &str) -> Result<Arc<dyn Problem>> {
    Ok(match name {
        "u1" => Arc::new(SinhBump),
        "u2" => Arc::new(Trig),
        "u3" => Arc::new(Runge),
        "u4" => Arc::new(LacunarySum),
        "u5" => Arc::new(LogWave),
        _ => {
            return Err(PumError::Unknown {
                kind: "solution",
                name: name.into(),
                available: PROBLEM_NAMES.join(", "),
            })
        }
    })
}

/// Laplacian from fourth-order central differences with step `h`.
pub fn fd_laplacian(p: &dyn Problem, x: &[f64], h: f64) -> f64 {
    let mut y = x.to_vec();
    let f0 = p.exact(x);
    let mut total = 0.0;
    for k in 0..x.len() {
        let mut at = |off: f64| {
            y[k] = x[k] + off;
            let v = p.exact(&y);
            y[k] = x[k];
            v
        };
        let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        total += (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
    }
    total
}

/// Checks that the runge solution matches the inverse quadratic kernel.
pub fn runge_kernel() -> InverseQuadratic {
    InverseQuadratic(5.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::halton_points;

    #[test]
    fn point_values() {
        let u3 = Runge;
        assert_eq!(u3.exact(&[0.0, 0.0]), 1.0);
        assert_eq!(u3.exact(&[0.2, 0.0]), 0.5);
        assert_eq!(u3.forcing(&[0.0, 0.0]), 100.0);
        assert_eq!(u3.exact(&[0.3, -0.7]), u3.exact(&[-0.3, 0.7]));
        let u2 = Trig.exact(&[2.0, 2.0]);
        let hand = (2.0f64 * 1.9 * 1.9).sin() * (1.7f64 * 1.7).cos() + (1.5f64 * 1.5).sin().powi(2);
        assert!((u2 - hand).abs() < 1e-15);
        assert_eq!(SinhBump.exact(&[2.0, 0.77]), 0.0);
        assert_eq!(LogWave.exact(&[0.5, 0.3, -0.9]), 0.0);
    }

    #[test]
    fn plane_of_zeros_has_zero_forcing() {
        // θ and every derivative except θ_x vanish on x = 0.5, so f = 0 there.
        assert_eq!(LogWave.forcing(&[0.5, 0.0, 0.5]), 0.0);
        assert!(LogWave.forcing(&[0.6, 0.0, 0.5]).abs() > 1e-3);
    }

    #[test]
    fn runge_is_an_inverse_quadratic() {
        let k = runge_kernel();
        for p in halton_points(100, 2, 1).chunks(2) {
            let x = [2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0];
            let r = x[0].hypot(x[1]);
            assert!((Runge.exact(&x) - k.phi(r)).abs() < 1e-15);
            assert!((Runge.laplacian(&x) - k.laplacian(r, 2)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacians_match_finite_differences() {
        for name in PROBLEM_NAMES {
            let p = problem_by_name(name).unwrap();
            let d = p.dim();
            for u in halton_points(200, d, 1).chunks(d) {
                let x: Vec<f64> = u.iter().map(|v| 4.0 * v - 2.0).collect();
                let x = if d == 3 { x.iter().map(|v| v / 2.0).collect() } else { x };
                let a = p.laplacian(&x);
                let fd = fd_laplacian(p.as_ref(), &x, 1e-3);
                assert!((a - fd).abs() <= 1e-7 * (1.0 + a.abs()), "{name} at {x:?}: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn defaults_and_registry() {
        assert_eq!(problem_by_name("u3").unwrap().default_eps(), 4.0);
        assert_eq!(problem_by_name("u4").unwrap().default_eps(), 4.0);
        assert_eq!(problem_by_name("u5").unwrap().default_eps(), 1.0);
        assert!(problem_by_name("u6").is_err());
        assert!(Trig.check_dim(&[0.0; 3]).is_err());
    }
}
