use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::{PartialPivLu, Qr, Solve, SolveLstsq};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::sparse::linalg::solvers::{Llt as SparseLlt, Lu as SparseLu, Qr as SparseQr};
use faer::{get_global_parallelism, Mat, MatRef, Side};

use super::SparseMatrix;
use crate::dd::Dd;
use crate::error::{PumError, Result};

/// Below this many unknowns dense QR backs up a failed sparse QR.
pub const DENSE_QR_LIMIT: usize = 5000;

/// A factorized global operator `L` (square or tall).
pub trait Factored: Send + Sync {
    /// Least-squares (or exact, when square) solution of `L u = rhs`.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_extended(rhs)?.0)
    }
    /// The solution as an unevaluated sum `hi + lo`. Least-squares
    /// backends carry the low part through refinement; others return zeros.
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// `(L⁺)ᵀ V` for a block of `N`-vectors, giving `M`-vectors.
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>>;
}

pub trait SolverBackend: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>>;
}

pub const BACKEND_NAMES: &[&str] = &["auto", "dense-lu", "sparse-lu", "dense-qr", "sparse-qr", "normal-eq"];

pub fn backend_by_name(name: &str) -> Result<Arc<dyn SolverBackend>> {
    Ok(match name {
        "auto" => Arc::new(Auto),
        "dense-lu" => Arc::new(DenseLuBackend),
        "sparse-lu" => Arc::new(SparseLuBackend),
        "dense-qr" => Arc::new(DenseQrBackend),
        "sparse-qr" => Arc::new(SparseQrBackend),
        "normal-eq" => Arc::new(NormalEqBackend),
        _ => {
            return Err(PumError::Unknown {
                kind: "solver backend",
                name: name.into(),
                available: BACKEND_NAMES.join(", "),
            })
        }
    })
}

/// Refinement steps applied to least-squares solutions.
const REFINE_STEPS: usize = 2;

/// `u ← u + L⁺(b - Lu)` with the iterate kept in double-double. Rounding
/// `u` to f64 alone perturbs `Lᵀr` by about `‖LᵀL‖·ulp(u)`, which for
/// ill-conditioned operators is far above the orthogonality the QR
/// factorization actually delivers.
fn refine(
    l: &SparseMatrix,
    rhs: &[f64],
    u: Vec<f64>,
    solve: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut u: Vec<Dd> = u.into_iter().map(Dd::from).collect();
    for _ in 0..REFINE_STEPS {
        let r = l.residual_dd(&u, rhs);
        let du = solve(&r)?;
        for (a, d) in u.iter_mut().zip(du) {
            *a += Dd::from(d);
        }
    }
    Ok(u.into_iter().map(|x| (x.hi, x.lo)).unzip())
}

fn plain(u: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let lo = vec![0.0; u.len()];
    (u, lo)
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn finite_column(m: &Mat<f64>, what: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = (0..m.nrows()).map(|i| m[(i, 0)]).collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(PumError::Solver(format!("{what} produced a non-finite value in entry {i}; the operator is singular")));
    }
    Ok(out)
}

fn require_square(l: &SparseMatrix, name: &str) -> Result<()> {
    if l.nrows() != l.ncols() {
        return Err(PumError::Solver(format!(
            "{name} needs a square operator, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    Ok(())
}

/// Square systems go to sparse LU. Tall ones go to the refined normal
/// equations, then sparse QR, then (when small) dense QR.
#[derive(Debug)]
struct Auto;

impl SolverBackend for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        if l.nrows() == l.ncols() {
            return SparseLuBackend.factorize(l);
        }
        if let Ok(f) = NormalEqBackend.factorize(l) {
            return Ok(f);
        }
        match SparseQrBackend.factorize(l) {
            Err(_) if l.ncols() < DENSE_QR_LIMIT => DenseQrBackend.factorize(l),
            other => other,
        }
    }
}

#[derive(Debug)]
struct DenseLuBackend;

struct DenseLu(PartialPivLu<f64>);

impl SolverBackend for DenseLuBackend {
    fn name(&self) -> &'static str {
        "dense-lu"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        require_square(l, self.name())?;
        Ok(Box::new(DenseLu(l.to_dense().partial_piv_lu())))
    }
}

impl Factored for DenseLu {
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        finite_column(&self.0.solve(column(rhs)), "dense LU").map(plain)
    }
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(self.0.solve_transpose(v))
    }
}

#[derive(Debug)]
struct SparseLuBackend;

struct SparseLuFactor(SparseLu<usize, f64>);

impl SolverBackend for SparseLuBackend {
    fn name(&self) -> &'static str {
        "sparse-lu"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        require_square(l, self.name())?;
        let lu = l
            .to_faer()?
            .sp_lu()
            .map_err(|e| PumError::Solver(format!("sparse LU failed: {e:?}")))?;
        Ok(Box::new(SparseLuFactor(lu)))
    }
}

impl Factored for SparseLuFactor {
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = column(rhs);
        self.0.solve_in_place(x.as_mut());
        finite_column(&x, "sparse LU").map(plain)
    }
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let mut x = v.to_owned();
        self.0.solve_transpose_in_place(x.as_mut());
        Ok(x)
    }
}

#[derive(Debug)]
struct DenseQrBackend;

struct DenseQr {
    l: SparseMatrix,
    qr: Qr<f64>,
}

impl SolverBackend for DenseQrBackend {
    fn name(&self) -> &'static str {
        "dense-qr"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        if l.nrows() < l.ncols() {
            return Err(PumError::Solver(format!(
                "least squares needs at least as many rows as columns, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        let qr = l.to_dense().qr();
        let r = qr.thin_R();
        let diag: Vec<f64> = (0..r.ncols()).map(|i| r[(i, i)].abs()).collect();
        let big = diag.iter().cloned().fold(0.0, f64::max);
        if let Some(k) = diag.iter().position(|&v| !(v > 1e-14 * big)) {
            return Err(PumError::Solver(format!(
                "operator is rank deficient: column {k} has R diagonal {:e} against {big:e}",
                diag[k]
            )));
        }
        Ok(Box::new(DenseQr { l: l.clone(), qr }))
    }
}

impl Factored for DenseQr {
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let once = |b: &[f64]| finite_column(&self.qr.solve_lstsq(column(b)), "dense QR");
        refine(&self.l, rhs, once(rhs)?, once)
    }
    /// `L R⁻¹ R⁻ᵀ v`, since `Q = L R⁻¹`.
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let r = self.qr.thin_R();
        let par = get_global_parallelism();
        let mut t = v.to_owned();
        solve_lower_triangular_in_place(r.transpose(), t.as_mut(), par);
        solve_upper_triangular_in_place(r, t.as_mut(), par);
        let mut out = Mat::zeros(self.l.nrows(), t.ncols());
        for c in 0..t.ncols() {
            let col: Vec<f64> = (0..t.nrows()).map(|i| t[(i, c)]).collect();
            for (i, v) in self.l.matvec(&col).into_iter().enumerate() {
                out[(i, c)] = v;
            }
        }
        Ok(out)
    }
}

#[derive(Debug)]
struct SparseQrBackend;

struct SparseQrFactor {
    l: SparseMatrix,
    qr: SparseQr<usize, f64>,
    augmented: OnceLock<std::result::Result<SparseLu<usize, f64>, String>>,
}

impl SolverBackend for SparseQrBackend {
    fn name(&self) -> &'static str {
        "sparse-qr"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        if l.nrows() < l.ncols() {
            return Err(PumError::Solver(format!(
                "least squares needs at least as many rows as columns, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        let qr = l
            .to_faer()?
            .sp_qr()
            .map_err(|e| PumError::Solver(format!("sparse QR failed: {e:?}")))?;
        Ok(Box::new(SparseQrFactor {
            l: l.clone(),
            qr,
            augmented: OnceLock::new(),
        }))
    }
}

impl SparseQrFactor {
    /// LU of `[[αI, L], [Lᵀ, 0]]`; its solution with right-hand side
    /// `[0; v]` has `L(LᵀL)⁻¹v` in the top block, whatever `α > 0` is.
    fn augmented(&self) -> Result<&SparseLu<usize, f64>> {
        let aug = self.augmented.get_or_init(|| {
            let (m, n) = (self.l.nrows(), self.l.ncols());
            let alpha = self.l.max_abs();
            let mut t: Vec<(usize, usize, f64)> = (0..m).map(|i| (i, i, alpha)).collect();
            for (i, j, v) in self.l.triplets() {
                t.push((i, m + j, v));
                t.push((m + j, i, v));
            }
            SparseMatrix::from_triplets(m + n, m + n, t)
                .to_faer()
                .map_err(|e| e.to_string())
                .and_then(|a| a.sp_lu().map_err(|e| format!("{e:?}")))
        });
        aug.as_ref()
            .map_err(|e| PumError::Solver(format!("augmented system factorization failed: {e}")))
    }
}

impl Factored for SparseQrFactor {
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let once = |b: &[f64]| {
            let mut x = column(b);
            self.qr.solve_lstsq_in_place(x.as_mut());
            let top = Mat::from_fn(self.l.ncols(), 1, |i, _| x[(i, 0)]);
            finite_column(&top, "sparse QR")
        };
        refine(&self.l, rhs, once(rhs)?, once)
    }
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let lu = self.augmented()?;
        let (m, n) = (self.l.nrows(), self.l.ncols());
        let mut rhs = Mat::zeros(m + n, v.ncols());
        for c in 0..v.ncols() {
            for i in 0..n {
                rhs[(m + i, c)] = v[(i, c)];
            }
        }
        lu.solve_in_place(rhs.as_mut());
        Ok(Mat::from_fn(m, v.ncols(), |i, c| rhs[(i, c)]))
    }
}

/// Column-scaled normal equations `D LᵀL D` with a sparse Cholesky
/// factor, refined against the true residual computed in double-double.
/// The squared conditioning only slows the refinement down; when it
/// stops contracting the solve is handed to sparse QR.
#[derive(Debug)]
struct NormalEqBackend;

struct NormalEq {
    l: SparseMatrix,
    scale: Vec<f64>,
    llt: SparseLlt<usize, f64>,
    fallback: OnceLock<Result<Box<dyn Factored>>>,
}

const NORMAL_EQ_MAX_STEPS: usize = 20;

impl SolverBackend for NormalEqBackend {
    fn name(&self) -> &'static str {
        "normal-eq"
    }
    fn factorize(&self, l: &SparseMatrix) -> Result<Box<dyn Factored>> {
        if l.nrows() < l.ncols() {
            return Err(PumError::Solver(format!(
                "least squares needs at least as many rows as columns, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        let norms = l.column_norms();
        if let Some(j) = norms.iter().position(|&v| !(v > 0.0)) {
            return Err(PumError::Solver(format!("operator is rank deficient: column {j} is zero")));
        }
        let scale: Vec<f64> = norms.iter().map(|v| 1.0 / v).collect();
        let llt = l
            .scaled_gram_lower(&scale)
            .sp_cholesky(Side::Lower)
            .map_err(|e| PumError::Solver(format!("normal equations are not positive definite: {e:?}")))?;
        Ok(Box::new(NormalEq {
            l: l.clone(),
            scale,
            llt,
            fallback: OnceLock::new(),
        }))
    }
}

impl NormalEq {
    /// `D (D LᵀL D)⁻¹ D g`
    fn normal_solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut x = Mat::from_fn(g.len(), 1, |i, _| g[i] * self.scale[i]);
        self.llt.solve_in_place(x.as_mut());
        let y = finite_column(&x, "normal equations")?;
        Ok(y.iter().zip(&self.scale).map(|(a, d)| a * d).collect())
    }

    fn fallback(&self) -> Result<&dyn Factored> {
        self.fallback
            .get_or_init(|| SparseQrBackend.factorize(&self.l))
            .as_ref()
            .map(|f| f.as_ref())
            .map_err(|e| PumError::Solver(format!("fallback sparse QR failed: {e}")))
    }
}

impl Factored for NormalEq {
    fn solve_extended(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut u = vec![Dd::ZERO; self.l.ncols()];
        let size = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut last = f64::INFINITY;
        for _ in 0..NORMAL_EQ_MAX_STEPS {
            let du = self.normal_solve(&self.l.normal_residual_dd(&u, rhs))?;
            for (a, d) in u.iter_mut().zip(&du) {
                *a += Dd::from(*d);
            }
            let step = size(&du);
            if step <= 1e-16 * u.iter().fold(0.0f64, |m, x| m.max(x.hi.abs())) {
                return Ok(u.into_iter().map(|x| (x.hi, x.lo)).unzip());
            }
            if step > 0.5 * last {
                break;
            }
            last = step;
        }
        self.fallback()?.solve_extended(rhs)
    }
    /// `L D (D LᵀL D)⁻¹ D v`
    fn pinv_transpose(&self, v: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let n = self.l.ncols();
        let mut t = Mat::from_fn(n, v.ncols(), |i, c| v[(i, c)] * self.scale[i]);
        self.llt.solve_in_place(t.as_mut());
        let mut out = Mat::zeros(self.l.nrows(), v.ncols());
        for c in 0..v.ncols() {
            let col: Vec<f64> = (0..n).map(|i| t[(i, c)] * self.scale[i]).collect();
            for (i, x) in self.l.matvec(&col).into_iter().enumerate() {
                out[(i, c)] = x;
            }
        }
        Ok(out)
    }
}
