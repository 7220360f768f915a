use std::sync::Arc;

use faer::linalg::solvers::{DenseSolveCore, Lblt, Llt, Solve};
use faer::{Mat, MatMut, Side};

use super::{kernel_derivative, Op, RadialKernel};
use crate::dd::Dd;
use crate::error::{input, PumError, Result};
use crate::nodes::{distance, DISTINCT_TOL};

/// Condition numbers above this abort a run in double precision.
pub const COND_LIMIT: f64 = 1e15;

/// Arithmetic used for the local kernel solves.
///
/// Small shape parameters make `φ(X,X)` badly conditioned, and the
/// differentiation matrices lose about `cond·u` relative accuracy.
/// Double-double pushes that floor down by sixteen orders of magnitude;
/// the global system is always solved in `f64`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Precision {
    Double,
    #[default]
    DoubleDouble,
}

pub const PRECISION_NAMES: &[&str] = &["double", "double-double"];

impl Precision {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "double" | "f64" => Ok(Precision::Double),
            "double-double" | "dd" => Ok(Precision::DoubleDouble),
            _ => Err(PumError::Unknown {
                kind: "precision",
                name: name.into(),
                available: PRECISION_NAMES.join(", "),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::DoubleDouble => "double-double",
        }
    }

    /// Largest condition number that still leaves `cond·u ≲ 0.1`.
    pub fn cond_limit(self) -> f64 {
        match self {
            Precision::Double => COND_LIMIT,
            Precision::DoubleDouble => 1e30,
        }
    }
}

/// `φ(‖aᵢ - bₖ‖)` for flat coordinate arrays.
pub fn kernel_matrix(k: &dyn RadialKernel, dim: usize, a: &[f64], b: &[f64]) -> Mat<f64> {
    let (m, n) = (a.len() / dim, b.len() / dim);
    Mat::from_fn(m, n, |i, j| {
        k.phi(distance(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]))
    })
}

/// Exact differences `a - b` and the double-double `‖a - b‖²`.
fn diff_dd(a: &[f64], b: &[f64], out: &mut [Dd]) -> Dd {
    let mut r2 = Dd::ZERO;
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = Dd::from(x) - Dd::from(y);
        r2 += o.sqr();
    }
    r2
}

/// Row-major LU with partial pivoting and the explicit inverse.
#[derive(Debug)]
struct DdFactor {
    n: usize,
    lu: Vec<Dd>,
    perm: Vec<usize>,
    inverse: Vec<Dd>,
}

impl DdFactor {
    fn new(mut a: Vec<Dd>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap())?;
            if a[p * n + k].hi == 0.0 || !a[p * n + k].hi.is_finite() {
                return None;
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / piv;
                a[i * n + k] = l;
                for c in k + 1..n {
                    let v = a[k * n + c];
                    a[i * n + c] -= l * v;
                }
            }
        }
        let mut f = DdFactor {
            n,
            lu: a,
            perm,
            inverse: Vec::new(),
        };
        let mut inv = vec![Dd::ZERO; n * n];
        let mut col = vec![Dd::ZERO; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = Dd::ZERO);
            col[j] = Dd::ONE;
            f.solve(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        f.inverse = inv;
        Some(f)
    }

    fn solve(&self, b: &mut [Dd]) {
        let n = self.n;
        let mut x: Vec<Dd> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = self.lu[i * n + k] * x[k];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.lu[i * n + k] * x[k];
                x[i] -= v;
            }
            x[i] = x[i] / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// `Pᵀ L U`, rounded.
    fn reconstruct(&self) -> Mat<f64> {
        let n = self.n;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = Dd::ZERO;
                for k in 0..=i.min(j) {
                    let l = if k == i { Dd::ONE } else { self.lu[i * n + k] };
                    s += l * self.lu[k * n + j];
                }
                a[(self.perm[i], j)] = s.to_f64();
            }
        }
        a
    }
}

fn norm1_dd(a: &[Dd], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs().to_f64()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug)]
enum Factor {
    Llt(Llt<f64>),
    Lblt(Lblt<f64>),
    Dd(DdFactor),
}

/// Factorization of the local interpolation matrix `φ(X,X) + ridge·I`.
///
/// Build it once in patch-local coordinates and share it between all
/// patches with the same node layout.
#[derive(Debug)]
pub struct LocalFactorization {
    kernel: Arc<dyn RadialKernel>,
    dim: usize,
    nodes: Vec<f64>,
    factor: Factor,
    precision: Precision,
    ridge: f64,
    condition: f64,
}

impl LocalFactorization {
    pub fn new(kernel: Arc<dyn RadialKernel>, dim: usize, nodes: &[f64]) -> Result<Self> {
        Self::build(kernel, dim, nodes, Precision::default(), 0.0)
    }

    pub fn with_precision(kernel: Arc<dyn RadialKernel>, dim: usize, nodes: &[f64], precision: Precision) -> Result<Self> {
        Self::build(kernel, dim, nodes, precision, 0.0)
    }

    /// Factorizes with the given ridge, retrying with `1e-12·max diag` if
    /// the factorization fails or the 1-norm condition exceeds the limit of
    /// the chosen precision.
    pub fn build(
        kernel: Arc<dyn RadialKernel>,
        dim: usize,
        nodes: &[f64],
        precision: Precision,
        ridge: f64,
    ) -> Result<Self> {
        let n = nodes.len() / dim.max(1);
        if n == 0 || dim == 0 || nodes.len() % dim != 0 {
            return input("local node set is empty or malformed");
        }
        for i in 0..n {
            for j in 0..i {
                if distance(&nodes[i * dim..(i + 1) * dim], &nodes[j * dim..(j + 1) * dim]) <= DISTINCT_TOL {
                    return input(format!("local nodes {j} and {i} coincide"));
                }
            }
        }
        let limit = precision.cond_limit();
        let attempt: Box<dyn Fn(f64) -> Option<(Factor, f64)>> = match precision {
            Precision::Double => {
                let a = kernel_matrix(kernel.as_ref(), dim, nodes, nodes);
                let kernel = kernel.clone();
                Box::new(move |ridge: f64| {
                    let mut ar = a.clone();
                    for i in 0..n {
                        ar[(i, i)] += ridge;
                    }
                    let factor = if kernel.positive_definite() {
                        Factor::Llt(ar.llt(Side::Lower).ok()?)
                    } else {
                        Factor::Lblt(ar.lblt(Side::Lower))
                    };
                    let inv = match &factor {
                        Factor::Llt(f) => f.inverse(),
                        Factor::Lblt(f) => f.inverse(),
                        Factor::Dd(_) => unreachable!(),
                    };
                    let cond = ar.norm_l1() * inv.norm_l1();
                    cond.is_finite().then_some((factor, cond))
                })
            }
            Precision::DoubleDouble => {
                let mut a = vec![Dd::ZERO; n * n];
                let mut scratch = vec![Dd::ZERO; dim];
                for i in 0..n {
                    for j in 0..=i {
                        let r2 = diff_dd(&nodes[i * dim..(i + 1) * dim], &nodes[j * dim..(j + 1) * dim], &mut scratch);
                        let v = kernel.profile_dd(r2)[0];
                        a[i * n + j] = v;
                        a[j * n + i] = v;
                    }
                }
                Box::new(move |ridge: f64| {
                    let mut ar = a.clone();
                    for i in 0..n {
                        ar[i * n + i] += Dd::from(ridge);
                    }
                    let norm = norm1_dd(&ar, n);
                    let f = DdFactor::new(ar, n)?;
                    let cond = norm * norm1_dd(&f.inverse, n);
                    cond.is_finite().then_some((Factor::Dd(f), cond))
                })
            }
        };
        let maxdiag = kernel.phi(0.0).abs();
        let mut used = ridge;
        let mut result = attempt(ridge).filter(|(_, c)| *c <= limit);
        if result.is_none() {
            used = ridge.max(1e-12 * maxdiag);
            result = attempt(used);
        }
        match result {
            Some((factor, condition)) if condition <= limit => Ok(LocalFactorization {
                kernel,
                dim,
                nodes: nodes.to_vec(),
                factor,
                precision,
                ridge: used,
                condition,
            }),
            other => Err(PumError::Conditioning {
                condition: other.map_or(f64::INFINITY, |(_, c)| c),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kernel(&self) -> &Arc<dyn RadialKernel> {
        &self.kernel
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Ridge actually added to the diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// 1-norm condition number of the factorized matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `φ(X,X) Z = rhs` column by column.
    pub fn solve_in_place(&self, mut rhs: MatMut<'_, f64>) {
        match &self.factor {
            Factor::Llt(f) => f.solve_in_place(rhs),
            Factor::Lblt(f) => f.solve_in_place(rhs),
            Factor::Dd(f) => {
                let mut col = vec![Dd::ZERO; f.n];
                for c in 0..rhs.ncols() {
                    for i in 0..f.n {
                        col[i] = Dd::from(rhs[(i, c)]);
                    }
                    f.solve(&mut col);
                    for i in 0..f.n {
                        rhs[(i, c)] = col[i].to_f64();
                    }
                }
            }
        }
    }

    pub fn reconstruct(&self) -> Mat<f64> {
        let mut a = match &self.factor {
            Factor::Llt(f) => f.reconstruct(),
            Factor::Lblt(f) => f.reconstruct(),
            Factor::Dd(f) => f.reconstruct(),
        };
        for i in 0..self.len() {
            a[(i, i)] -= self.ridge;
        }
        a
    }
}

/// Replaces identity rows of points that coincide with a node by exact
/// unit rows.
fn snap_identity_rows(d: &mut Mat<f64>, y: &[f64], x: &[f64], dim: usize) {
    let n = x.len() / dim;
    for i in 0..d.nrows() {
        let yi = &y[i * dim..(i + 1) * dim];
        if let Some(j) = (0..n).find(|&j| distance(yi, &x[j * dim..(j + 1) * dim]) <= DISTINCT_TOL) {
            for c in 0..n {
                d[(i, c)] = if c == j { 1.0 } else { 0.0 };
            }
        }
    }
}

/// `Lφ(Y,X)·φ(X,X)⁻¹` for each requested operator.
///
/// `y` must be in the same coordinates as the factorized nodes. Identity
/// rows for points that coincide with a node are exact unit rows.
pub fn diff_matrices(ops: &[Op], y: &[f64], fact: &LocalFactorization) -> Vec<Mat<f64>> {
    let mut out = match &fact.factor {
        Factor::Dd(f) => diff_matrices_dd(ops, y, fact, f),
        _ => diff_matrices_f64(ops, y, fact),
    };
    for (d, &op) in out.iter_mut().zip(ops) {
        if op == Op::Identity {
            snap_identity_rows(d, y, &fact.nodes, fact.dim);
        }
    }
    out
}

fn diff_matrices_f64(ops: &[Op], y: &[f64], fact: &LocalFactorization) -> Vec<Mat<f64>> {
    let dim = fact.dim;
    let n = fact.len();
    let m = y.len() / dim;
    let k = fact.kernel.as_ref();
    let x = &fact.nodes;
    // Columns hold (Lφ(y_i, X))ᵀ for every op and point, solved at once.
    let mut rhs = Mat::<f64>::zeros(n, m * ops.len());
    for (o, &op) in ops.iter().enumerate() {
        for i in 0..m {
            let yi = &y[i * dim..(i + 1) * dim];
            for j in 0..n {
                rhs[(j, o * m + i)] = kernel_derivative(k, op, yi, &x[j * dim..(j + 1) * dim]);
            }
        }
    }
    fact.solve_in_place(rhs.as_mut());
    (0..ops.len())
        .map(|o| Mat::from_fn(m, n, |i, j| rhs[(j, o * m + i)]))
        .collect()
}

fn diff_matrices_dd(ops: &[Op], y: &[f64], fact: &LocalFactorization, f: &DdFactor) -> Vec<Mat<f64>> {
    let dim = fact.dim;
    let n = fact.len();
    let m = y.len() / dim;
    let k = fact.kernel.as_ref();
    let x = &fact.nodes;
    let mut out: Vec<Mat<f64>> = ops.iter().map(|_| Mat::zeros(m, n)).collect();
    let mut diff = vec![Dd::ZERO; n * dim];
    let mut prof = vec![[Dd::ZERO; 3]; n];
    let mut b = vec![Dd::ZERO; n];
    let mut acc = vec![Dd::ZERO; n];
    for i in 0..m {
        let yi = &y[i * dim..(i + 1) * dim];
        for j in 0..n {
            let r2 = diff_dd(yi, &x[j * dim..(j + 1) * dim], &mut diff[j * dim..(j + 1) * dim]);
            prof[j] = k.profile_dd(r2);
        }
        for (o, &op) in ops.iter().enumerate() {
            for j in 0..n {
                let [p, d1, d2] = prof[j];
                b[j] = match op {
                    Op::Identity => p,
                    Op::Grad(a) => d1 * diff[j * dim + a],
                    Op::Laplacian => d2 + d1.mul_f64(dim as f64 - 1.0),
                };
            }
            acc.iter_mut().for_each(|v| *v = Dd::ZERO);
            for j in 0..n {
                let bj = b[j];
                let row = &f.inverse[j * n..(j + 1) * n];
                for (a, &r) in acc.iter_mut().zip(row) {
                    *a += bj * r;
                }
            }
            for c in 0..n {
                out[o][(i, c)] = acc[c].to_f64();
            }
        }
    }
    out
}

pub fn diff_matrix(op: Op, y: &[f64], fact: &LocalFactorization) -> Mat<f64> {
    diff_matrices(&[op], y, fact).pop().unwrap()
}

/// Per-row coefficients of a first/second order operator
/// `a·u + b·∇u + c·Δu`. Empty slices mean zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct RowWeights<'a> {
    pub value: &'a [f64],
    /// `dim` entries per row.
    pub grad: &'a [f64],
    pub lap: &'a [f64],
}

/// Rows `(aᵢ φ + bᵢ·∇φ + cᵢ Δφ)(yᵢ, X)·φ(X,X)⁻¹`, combining before the
/// solve. Rows with only a value coefficient at a node are exact.
pub fn weighted_matrix(y: &[f64], fact: &LocalFactorization, wts: RowWeights<'_>) -> Mat<f64> {
    let dim = fact.dim;
    let n = fact.len();
    let m = y.len() / dim;
    let x = &fact.nodes;
    let k = fact.kernel.as_ref();
    let coef = |s: &[f64], i: usize| if s.is_empty() { 0.0 } else { s[i] };
    let mut out = match &fact.factor {
        Factor::Dd(f) => {
            let mut out = Mat::<f64>::zeros(m, n);
            let mut diff = vec![Dd::ZERO; dim];
            let mut b = vec![Dd::ZERO; n];
            let mut acc = vec![Dd::ZERO; n];
            for i in 0..m {
                let yi = &y[i * dim..(i + 1) * dim];
                let (a, c) = (coef(wts.value, i), coef(wts.lap, i));
                for j in 0..n {
                    let r2 = diff_dd(yi, &x[j * dim..(j + 1) * dim], &mut diff);
                    let [p, d1, d2] = k.profile_dd(r2);
                    let mut v = p.mul_f64(a);
                    if c != 0.0 {
                        v += (d2 + d1.mul_f64(dim as f64 - 1.0)).mul_f64(c);
                    }
                    if !wts.grad.is_empty() {
                        let mut g = Dd::ZERO;
                        for (q, dq) in diff.iter().enumerate() {
                            g += dq.mul_f64(wts.grad[i * dim + q]);
                        }
                        v += d1 * g;
                    }
                    b[j] = v;
                }
                acc.iter_mut().for_each(|v| *v = Dd::ZERO);
                for j in 0..n {
                    let bj = b[j];
                    for (s, &r) in acc.iter_mut().zip(&f.inverse[j * n..(j + 1) * n]) {
                        s.mul_acc(bj, r);
                    }
                }
                for c in 0..n {
                    out[(i, c)] = acc[c].to_f64();
                }
            }
            out
        }
        _ => {
            let mut rhs = Mat::<f64>::zeros(n, m);
            for i in 0..m {
                let yi = &y[i * dim..(i + 1) * dim];
                for j in 0..n {
                    let xj = &x[j * dim..(j + 1) * dim];
                    let mut v = coef(wts.value, i) * kernel_derivative(k, Op::Identity, yi, xj);
                    v += coef(wts.lap, i) * kernel_derivative(k, Op::Laplacian, yi, xj);
                    if !wts.grad.is_empty() {
                        for q in 0..dim {
                            v += wts.grad[i * dim + q] * kernel_derivative(k, Op::Grad(q), yi, xj);
                        }
                    }
                    rhs[(j, i)] = v;
                }
            }
            fact.solve_in_place(rhs.as_mut());
            Mat::from_fn(m, n, |i, j| rhs[(j, i)])
        }
    };
    for i in 0..m {
        let pure = coef(wts.lap, i) == 0.0
            && (wts.grad.is_empty() || wts.grad[i * dim..(i + 1) * dim].iter().all(|&g| g == 0.0));
        if !pure {
            continue;
        }
        let yi = &y[i * dim..(i + 1) * dim];
        if let Some(j) = (0..n).find(|&j| distance(yi, &x[j * dim..(j + 1) * dim]) <= DISTINCT_TOL) {
            let a = coef(wts.value, i);
            for c in 0..n {
                out[(i, c)] = if c == j { a } else { 0.0 };
            }
        }
    }
    out
}
