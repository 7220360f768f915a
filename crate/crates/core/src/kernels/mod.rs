//! Radial kernels and local RBF differentiation matrices.

mod local;

pub use local::{
    diff_matrices, diff_matrix, kernel_matrix, weighted_matrix, LocalFactorization, Precision, RowWeights, COND_LIMIT,
    PRECISION_NAMES,
};

use std::fmt::Debug;
use std::sync::Arc;

use crate::dd::Dd;
use crate::error::{input, PumError, Result};

/// A radial function `φ(r)` with shape parameter `ε`.
///
/// Derivatives are given as `φ'(r)/r` and `φ''(r)` so that gradients and
/// Laplacians stay finite at `r = 0`.
pub trait RadialKernel: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn eps(&self) -> f64;
    fn phi(&self, r: f64) -> f64;
    fn dphi_over_r(&self, r: f64) -> f64;
    fn d2phi(&self, r: f64) -> f64;
    /// Whether `φ(X,X)` is positive definite for distinct nodes.
    fn positive_definite(&self) -> bool;
    /// `[φ, φ'/r, φ'']` in double-double, as functions of `r²`.
    fn profile_dd(&self, r2: Dd) -> [Dd; 3];

    /// `Δφ(|x|)` in `dim` dimensions.
    fn laplacian(&self, r: f64, dim: usize) -> f64 {
        self.d2phi(r) + (dim as f64 - 1.0) * self.dphi_over_r(r)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Gaussian(pub f64);

impl RadialKernel for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn eps(&self) -> f64 {
        self.0
    }
    fn phi(&self, r: f64) -> f64 {
        (-(self.0 * r).powi(2)).exp()
    }
    fn dphi_over_r(&self, r: f64) -> f64 {
        -2.0 * self.0 * self.0 * self.phi(r)
    }
    fn d2phi(&self, r: f64) -> f64 {
        let e2 = self.0 * self.0;
        (4.0 * e2 * e2 * r * r - 2.0 * e2) * self.phi(r)
    }
    fn positive_definite(&self) -> bool {
        true
    }
    fn profile_dd(&self, r2: Dd) -> [Dd; 3] {
        let e2 = Dd::mul_f64_exact(self.0, self.0);
        let e = (-(e2 * r2)).exp();
        let d1 = -(e2 * e).mul_f64(2.0);
        let d2 = (e2 * e2 * r2).mul_f64(4.0) * e - (e2 * e).mul_f64(2.0);
        [e, d1, d2]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Multiquadric(pub f64);

impl RadialKernel for Multiquadric {
    fn name(&self) -> &'static str {
        "multiquadric"
    }
    fn eps(&self) -> f64 {
        self.0
    }
    fn phi(&self, r: f64) -> f64 {
        (1.0 + (self.0 * r).powi(2)).sqrt()
    }
    fn dphi_over_r(&self, r: f64) -> f64 {
        self.0 * self.0 / self.phi(r)
    }
    fn d2phi(&self, r: f64) -> f64 {
        self.0 * self.0 / self.phi(r).powi(3)
    }
    fn positive_definite(&self) -> bool {
        false
    }
    fn profile_dd(&self, r2: Dd) -> [Dd; 3] {
        let e2 = Dd::mul_f64_exact(self.0, self.0);
        let q = Dd::ONE + e2 * r2;
        let s = q.sqrt();
        let d1 = e2 / s;
        [s, d1, d1 / q]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InverseQuadratic(pub f64);

impl RadialKernel for InverseQuadratic {
    fn name(&self) -> &'static str {
        "inverse-quadratic"
    }
    fn eps(&self) -> f64 {
        self.0
    }
    fn phi(&self, r: f64) -> f64 {
        1.0 / (1.0 + (self.0 * r).powi(2))
    }
    fn dphi_over_r(&self, r: f64) -> f64 {
        -2.0 * self.0 * self.0 * self.phi(r).powi(2)
    }
    fn d2phi(&self, r: f64) -> f64 {
        let e2 = self.0 * self.0;
        let p = self.phi(r);
        -2.0 * e2 * p * p + 8.0 * e2 * e2 * r * r * p * p * p
    }
    fn positive_definite(&self) -> bool {
        true
    }
    fn profile_dd(&self, r2: Dd) -> [Dd; 3] {
        let e2 = Dd::mul_f64_exact(self.0, self.0);
        let p = (Dd::ONE + e2 * r2).recip();
        let p2 = p * p;
        let d1 = -(e2 * p2).mul_f64(2.0);
        [p, d1, d1 + (e2 * e2 * r2 * p2 * p).mul_f64(8.0)]
    }
}

pub const KERNEL_NAMES: &[&str] = &["gaussian", "multiquadric", "inverse-quadratic"];

/// Looks up a kernel family by name (short forms `ga`, `mq`, `iq` work too).
pub fn kernel_by_name(name: &str, eps: f64) -> Result<Arc<dyn RadialKernel>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return input(format!("shape parameter must be positive, got {eps}"));
    }
    Ok(match name {
        "gaussian" | "ga" => Arc::new(Gaussian(eps)),
        "multiquadric" | "mq" => Arc::new(Multiquadric(eps)),
        "inverse-quadratic" | "iq" => Arc::new(InverseQuadratic(eps)),
        _ => {
            return Err(PumError::Unknown {
                kind: "kernel",
                name: name.into(),
                available: KERNEL_NAMES.join(", "),
            })
        }
    })
}

/// Linear operator applied to the kernel in its first argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Identity,
    /// Partial derivative along the given axis.
    Grad(usize),
    Laplacian,
}

/// `Lφ(|x - c|)` for one operator.
pub fn kernel_derivative(k: &dyn RadialKernel, op: Op, x: &[f64], c: &[f64]) -> f64 {
    let r = crate::nodes::distance(x, c);
    match op {
        Op::Identity => k.phi(r),
        Op::Grad(i) => k.dphi_over_r(r) * (x[i] - c[i]),
        Op::Laplacian => k.laplacian(r, x.len()),
    }
}
