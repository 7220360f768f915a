use std::sync::Arc;
use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;

use super::{
    assemble, backend_by_name, evaluate_solution, method_by_name, operator_rows, orthogonality, Discretization,
    Factored, Layout, LayoutRequest, RowKind, SolverBackend, SparseMatrix,
};
use crate::dd::Dd;
use crate::error::{PumError, Result};
use crate::geometry::{domain_by_name, Domain};
use crate::kernels::{kernel_by_name, Precision, RadialKernel};
use crate::nodes::{NodeSet, Role};
use crate::partition::PatchCover;
use crate::problems::{problem_by_name, Problem};
use crate::sampling::halton_in_domain;

/// Everything one solve needs, by registry name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: String,
    pub problem: String,
    pub method: String,
    pub kernel: String,
    /// Defaults to the problem's own shape parameter.
    pub eps: Option<f64>,
    pub box_size: f64,
    pub n: usize,
    pub delta: f64,
    pub beta: f64,
    pub probes: usize,
    /// Overrides the node (collocation) or evaluation (LS) grid spacing.
    pub spacing: Option<f64>,
    pub backend: String,
    /// Arithmetic of the local kernel solves.
    pub precision: String,
    pub stability: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: "box".into(),
            problem: "u1".into(),
            method: "least-squares".into(),
            kernel: "gaussian".into(),
            eps: None,
            box_size: 0.4,
            n: 28,
            delta: 0.2,
            beta: 1.5,
            probes: 1000,
            spacing: None,
            backend: "auto".into(),
            precision: "double-double".into(),
            stability: false,
        }
    }
}

/// Resolved strategies for a run.
#[derive(Debug, Clone)]
pub struct Components {
    pub domain: Arc<dyn Domain>,
    pub problem: Arc<dyn Problem>,
    pub kernel: Arc<dyn RadialKernel>,
    pub method: Arc<dyn Discretization>,
    pub backend: Arc<dyn SolverBackend>,
    pub precision: Precision,
}

impl RunConfig {
    pub fn components(&self) -> Result<Components> {
        let domain = domain_by_name(&self.domain)?;
        let problem = problem_by_name(&self.problem)?;
        if domain.dim() != problem.dim() {
            return Err(PumError::Dimension {
                expected: domain.dim(),
                got: problem.dim(),
            });
        }
        let eps = self.eps.unwrap_or_else(|| problem.default_eps());
        Ok(Components {
            domain,
            problem,
            kernel: kernel_by_name(&self.kernel, eps)?,
            method: method_by_name(&self.method)?,
            backend: backend_by_name(&self.backend)?,
            precision: Precision::by_name(&self.precision)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    /// Cover, node layouts and local factorizations.
    pub setup: f64,
    pub assemble: f64,
    /// Factorization and solve of the global system.
    pub solve: f64,
    /// Probe evaluation and stability norm.
    pub evaluate: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.setup + self.assemble + self.solve + self.evaluate
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub error_inf: f64,
    /// Unknowns `N`.
    pub nodes: usize,
    /// Rows `M`.
    pub rows: usize,
    pub patches: usize,
    pub radius: f64,
    pub stab_norm: Option<f64>,
    pub spacing: f64,
    pub timings: Timings,
    pub max_condition: f64,
    pub ridged: usize,
    /// Normalized `‖Lᵀr‖∞` for the extended solution `u + u_lo`, least
    /// squares only.
    pub orthogonality: Option<f64>,
    /// The same with `u` alone; floored by the rounding of `u` to f64.
    pub orthogonality_rounded: Option<f64>,
    pub residual_inf: f64,
    pub warnings: Vec<String>,
    pub u: Vec<f64>,
    /// Low-order part of the solution left over from refinement.
    pub u_lo: Vec<f64>,
    pub layout: Layout,
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    run_with(&cfg.components()?, cfg)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn run_with(c: &Components, cfg: &RunConfig) -> Result<RunReport> {
    let t0 = Instant::now();
    let cover = PatchCover::build(c.domain.as_ref(), cfg.box_size, cfg.delta)?;
    let layout = c.method.layout(LayoutRequest {
        domain: c.domain.as_ref(),
        cover,
        kernel: c.kernel.clone(),
        n: cfg.n,
        beta: cfg.beta,
        spacing: cfg.spacing,
        precision: c.precision,
    })?;
    let setup = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let system = assemble(&layout, c.problem.as_ref())?;
    let assemble_time = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let factor = c.backend.factorize(&system.matrix)?;
    let (u, u_lo) = factor.solve_extended(&system.rhs)?;
    let solve = t2.elapsed().as_secs_f64();

    let extended: Vec<Dd> = u.iter().zip(&u_lo).map(|(&h, &l)| Dd::new(h, l)).collect();
    let residual = system.matrix.residual_dd(&extended, &system.rhs);
    let tall = !layout.is_square();
    let orth = tall.then(|| orthogonality(&system.matrix, &residual));
    let orth_rounded = tall.then(|| orthogonality(&system.matrix, &system.matrix.residual(&u, &system.rhs)));

    let t3 = Instant::now();
    let mut warnings = layout.warnings.clone();
    let probes = covered_probes(&layout, c.domain.as_ref(), cfg.probes, &mut warnings)?;
    let approx = evaluate_solution(&layout, &u, &probes)?;
    let error_inf = probes
        .iter()
        .zip(&approx)
        .map(|(x, a)| (a - c.problem.exact(x)).abs())
        .fold(0.0f64, f64::max);
    let stab_norm = if cfg.stability {
        let rows = operator_rows(&layout, &probes, &vec![RowKind::Pde; probes.len()])?;
        Some(stability_norm(factor.as_ref(), &rows)?)
    } else {
        None
    };
    let evaluate = t3.elapsed().as_secs_f64();

    Ok(RunReport {
        error_inf,
        nodes: layout.nodes.len(),
        rows: layout.eval.len(),
        patches: layout.cover.len(),
        radius: layout.cover.radius(),
        stab_norm,
        spacing: layout.spacing,
        timings: Timings {
            setup,
            assemble: assemble_time,
            solve,
            evaluate,
        },
        max_condition: layout.max_condition(),
        ridged: layout.ridged_patches(),
        orthogonality: orth,
        orthogonality_rounded: orth_rounded,
        residual_inf: max_abs(&residual),
        warnings,
        u,
        u_lo,
        layout,
    })
}

/// Halton probes in the domain; any that fall outside every (pruned) patch
/// are dropped with a warning.
fn covered_probes(layout: &Layout, domain: &dyn Domain, n: usize, warnings: &mut Vec<String>) -> Result<NodeSet> {
    let probes = halton_in_domain(domain, n, Role::Probe)?;
    let keep: Vec<bool> = (0..probes.len())
        .into_par_iter()
        .map(|i| !layout.cover.covering(probes.point(i)).is_empty())
        .collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    if dropped == 0 {
        return Ok(probes);
    }
    warnings.push(format!("{dropped} probes outside every patch were skipped"));
    let coords = probes
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .flat_map(|(p, _)| p.iter().copied())
        .collect();
    NodeSet::new_unchecked(probes.dim(), coords, Role::Probe)
}

const PROBE_CHUNK: usize = 64;

/// `max_k ‖ℓ_k L⁺‖₁` over the rows `ℓ_k` of `probe_rows`, i.e. the
/// ∞-norm of `L(probes, X) L⁺`.
pub fn stability_norm(factor: &dyn Factored, probe_rows: &SparseMatrix) -> Result<f64> {
    let n = probe_rows.ncols();
    let starts: Vec<usize> = (0..probe_rows.nrows()).step_by(PROBE_CHUNK).collect();
    let norms = starts
        .par_iter()
        .map(|&s| {
            let e = (s + PROBE_CHUNK).min(probe_rows.nrows());
            let mut v = Mat::<f64>::zeros(n, e - s);
            for r in s..e {
                let (cols, vals) = probe_rows.row(r);
                for (&c, &x) in cols.iter().zip(vals) {
                    v[(c, r - s)] = x;
                }
            }
            let p = factor.pinv_transpose(v.as_ref())?;
            let mut best = 0.0f64;
            for k in 0..p.ncols() {
                let s: f64 = (0..p.nrows()).map(|i| p[(i, k)].abs()).sum();
                if !s.is_finite() {
                    return Err(PumError::Solver("stability norm is not finite".into()));
                }
                best = best.max(s);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}
