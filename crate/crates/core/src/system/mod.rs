//! Global PUM operators: layouts, local blocks, sparse assembly, solves
//! and the stability norm.

mod backend;
mod layout;
mod run;
mod sparse;

pub use backend::{backend_by_name, Factored, SolverBackend, BACKEND_NAMES, DENSE_QR_LIMIT};
pub use layout::{
    greedy_order, method_by_name, node_template, supplement_points, Collocation, Discretization, Layout,
    LayoutRequest, LeastSquares, METHOD_NAMES, SUPPLEMENT_SEPARATION,
};
pub use run::{run, run_with, stability_norm, Components, RunConfig, RunReport, Timings};
pub use sparse::SparseMatrix;

use faer::Mat;
use rayon::prelude::*;

use crate::error::Result;
use crate::kernels::{weighted_matrix, RowWeights};
use crate::nodes::NodeSet;
use crate::partition::{shepard_weights, PatchWeights};
use crate::problems::Problem;

/// What a row of the operator represents at its evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `-Δu`
    Pde,
    /// Point value `u`, used for Dirichlet rows and for evaluation.
    Value,
}

/// Dense contribution of one patch.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    /// Row indices into the evaluated point set.
    pub rows: Vec<usize>,
    /// Global node indices.
    pub cols: Vec<usize>,
    pub block: Mat<f64>,
}

/// Blends the local cardinal functions of patch `j` with its weights:
/// `-(Δw·D⁰ + 2∇w·D^∇ + w·D^Δ)` for PDE rows and `w·D⁰` for value rows.
/// The weights are folded into the kernel rows before the local solve.
pub fn local_operator(
    layout: &Layout,
    j: usize,
    weights: &PatchWeights,
    points: &NodeSet,
    kinds: &[RowKind],
) -> LocalOperator {
    let fact = &layout.factors[j];
    let d = points.dim();
    let c = layout.cover.center(j);
    let n = fact.len();
    let m = weights.points.len();
    let local = |list: &[usize]| -> Vec<f64> {
        list.iter()
            .flat_map(|&a| points.point(weights.points[a]).iter().zip(c).map(|(y, c)| y - c))
            .collect()
    };
    let (pde, val): (Vec<usize>, Vec<usize>) = (0..m).partition(|&a| kinds[weights.points[a]] == RowKind::Pde);
    let mut block = Mat::<f64>::zeros(m, n);
    if !pde.is_empty() {
        let value: Vec<f64> = pde.iter().map(|&a| -weights.lap[a]).collect();
        let grad: Vec<f64> = pde
            .iter()
            .flat_map(|&a| weights.grad[a * d..(a + 1) * d].iter().map(|g| -2.0 * g))
            .collect();
        let lap: Vec<f64> = pde.iter().map(|&a| -weights.w[a]).collect();
        let rows = weighted_matrix(&local(&pde), fact, RowWeights { value: &value, grad: &grad, lap: &lap });
        for (r, &a) in pde.iter().enumerate() {
            for col in 0..n {
                block[(a, col)] = rows[(r, col)];
            }
        }
    }
    if !val.is_empty() {
        let value: Vec<f64> = val.iter().map(|&a| weights.w[a]).collect();
        let rows = weighted_matrix(&local(&val), fact, RowWeights { value: &value, ..Default::default() });
        for (r, &a) in val.iter().enumerate() {
            for col in 0..n {
                block[(a, col)] = rows[(r, col)];
            }
        }
    }
    LocalOperator {
        rows: weights.points.clone(),
        cols: layout.patch_nodes[j].clone(),
        block,
    }
}

/// Global operator rows at arbitrary points. Patch blocks are computed in
/// parallel and summed in patch order, so the result is deterministic.
pub fn operator_rows(layout: &Layout, points: &NodeSet, kinds: &[RowKind]) -> Result<SparseMatrix> {
    assert_eq!(kinds.len(), points.len());
    let weights = shepard_weights(&layout.cover, points)?;
    let blocks: Vec<Vec<(usize, usize, f64)>> = weights
        .patches
        .par_iter()
        .enumerate()
        .map(|(j, pw)| {
            let op = local_operator(layout, j, pw, points, kinds);
            let mut t = Vec::with_capacity(op.rows.len() * op.cols.len());
            for (a, &r) in op.rows.iter().enumerate() {
                for (b, &c) in op.cols.iter().enumerate() {
                    t.push((r, c, op.block[(a, b)]));
                }
            }
            t
        })
        .collect();
    let triplets = blocks.into_iter().flatten().collect();
    Ok(SparseMatrix::from_triplets(points.len(), layout.nodes.len(), triplets))
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

pub fn row_kinds(layout: &Layout) -> Vec<RowKind> {
    layout
        .eval_on_boundary
        .iter()
        .map(|&b| if b { RowKind::Value } else { RowKind::Pde })
        .collect()
}

/// `f` on interior rows and `g` on boundary rows.
pub fn right_hand_side(layout: &Layout, problem: &dyn Problem) -> Vec<f64> {
    layout
        .eval
        .iter()
        .zip(&layout.eval_on_boundary)
        .map(|(y, &b)| if b { problem.dirichlet(y) } else { problem.forcing(y) })
        .collect()
}

pub fn assemble(layout: &Layout, problem: &dyn Problem) -> Result<GlobalSystem> {
    let matrix = operator_rows(layout, &layout.eval, &row_kinds(layout))?;
    Ok(GlobalSystem {
        matrix,
        rhs: right_hand_side(layout, problem),
    })
}

/// `ũ(x) = Σ_j w_j(x) φ(x,X_j) φ(X_j,X_j)⁻¹ U(X_j)` at every point.
pub fn evaluate_solution(layout: &Layout, u: &[f64], points: &NodeSet) -> Result<Vec<f64>> {
    let e = operator_rows(layout, points, &vec![RowKind::Value; points.len()])?;
    Ok(e.matvec(u))
}

/// `‖Lᵀr‖∞ / (‖L‖∞‖r‖∞)`, zero for a zero residual.
pub fn orthogonality(matrix: &SparseMatrix, residual: &[f64]) -> f64 {
    let ltr = matrix.matvec_t_accurate(residual);
    let num = ltr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rn = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let den = matrix.norm_inf() * rn;
    if den == 0.0 {
        0.0
    } else {
        num / (den + f64::MIN_POSITIVE)
    }
}
