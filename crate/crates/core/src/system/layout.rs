use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{input, PumError, Result};
use crate::geometry::Domain;
use crate::kernels::{LocalFactorization, Precision, RadialKernel};
use crate::nodes::{distance, NodeSet, Role};
use crate::partition::PatchCover;
use crate::sampling::{cartesian_layout, halton_points, packed_ball_nodes, plan_oversampling, vogel_nodes};

/// Minimum separation of supplementary evaluation points.
pub const SUPPLEMENT_SEPARATION: f64 = 1e-3;

/// Global node and evaluation sets with their per-patch structure.
#[derive(Debug, Clone)]
pub struct Layout {
    pub method: &'static str,
    pub cover: PatchCover,
    /// Global trial nodes X.
    pub nodes: NodeSet,
    /// Evaluation points Y, interior rows and boundary rows mixed.
    pub eval: NodeSet,
    pub eval_on_boundary: Vec<bool>,
    /// Global node indices of each patch, in the order of its factorization.
    pub patch_nodes: Vec<Vec<usize>>,
    pub factors: Vec<Arc<LocalFactorization>>,
    /// Spacing used for the Cartesian part of the layout.
    pub spacing: f64,
    pub warnings: Vec<String>,
}

impl Layout {
    pub fn is_square(&self) -> bool {
        self.eval.len() == self.nodes.len()
    }

    pub fn max_condition(&self) -> f64 {
        self.factors.iter().map(|f| f.condition()).fold(0.0, f64::max)
    }

    /// Patches whose factorization needed the ridge fallback (shared
    /// factorizations are counted per patch).
    pub fn ridged_patches(&self) -> usize {
        self.factors.iter().filter(|f| f.ridge() > 0.0).count()
    }
}

pub struct LayoutRequest<'a> {
    pub domain: &'a dyn Domain,
    pub cover: PatchCover,
    pub kernel: Arc<dyn RadialKernel>,
    /// Target nodes per patch.
    pub n: usize,
    /// Oversampling ratio M/N (least squares only).
    pub beta: f64,
    /// Explicit Cartesian spacing; otherwise derived from `n`.
    pub spacing: Option<f64>,
    pub precision: Precision,
}

/// A way of choosing trial nodes and evaluation points.
pub trait Discretization: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn layout(&self, req: LayoutRequest<'_>) -> Result<Layout>;
}

pub const METHOD_NAMES: &[&str] = &["collocation", "least-squares"];

pub fn method_by_name(name: &str) -> Result<Arc<dyn Discretization>> {
    match name {
        "c" | "collocation" => Ok(Arc::new(Collocation)),
        "ls" | "least-squares" => Ok(Arc::new(LeastSquares)),
        _ => Err(PumError::Unknown {
            kind: "method",
            name: name.into(),
            available: METHOD_NAMES.join(", "),
        }),
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    if dim == 2 {
        PI * r * r
    } else {
        4.0 / 3.0 * PI * r * r * r
    }
}

/// Permutation listing points by the first patch that contains them;
/// ties keep the original order. Points in no patch come last.
pub fn greedy_order(cover: &PatchCover, points: &NodeSet) -> Vec<usize> {
    let first: Vec<usize> = (0..points.len())
        .into_par_iter()
        .map(|i| cover.covering(points.point(i)).first().copied().unwrap_or(usize::MAX))
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (first[i], i));
    order
}

fn permute(points: &NodeSet, order: &[usize], role: Role) -> NodeSet {
    let d = points.dim();
    let coords = order.iter().flat_map(|&i| points.point(i).iter().copied()).collect();
    NodeSet::new_unchecked(d, coords, role).expect("same dimension")
}

/// Keeps covered points only, in greedy order; returns the dropped count.
fn covered_in_order(cover: &PatchCover, points: &NodeSet, flags: &[bool]) -> (NodeSet, Vec<bool>, usize) {
    let order: Vec<usize> = greedy_order(cover, points)
        .into_iter()
        .filter(|&i| !cover.covering(points.point(i)).is_empty())
        .collect();
    let dropped = points.len() - order.len();
    let set = permute(points, &order, points.role());
    let flags = order.iter().map(|&i| flags[i]).collect();
    (set, flags, dropped)
}

/// Collocation: one Cartesian node set, nodes and evaluation points coincide.
#[derive(Debug, Clone, Copy)]
pub struct Collocation;

impl Collocation {
    /// Grid spacing putting about `n` nodes in a patch.
    pub fn spacing_for(cover: &PatchCover, n: usize) -> f64 {
        let d = cover.dim();
        (ball_volume(d, cover.radius()) / n as f64).powf(1.0 / d as f64)
    }
}

impl Discretization for Collocation {
    fn name(&self) -> &'static str {
        "collocation"
    }

    fn layout(&self, req: LayoutRequest<'_>) -> Result<Layout> {
        let mut cover = req.cover;
        let h = match req.spacing {
            Some(h) => h,
            None => {
                if req.n == 0 {
                    return input("nodes per patch must be positive");
                }
                Self::spacing_for(&cover, req.n)
            }
        };
        let split = cartesian_layout(req.domain, h, Role::RbfCenters)?;
        let mut flags = vec![false; split.interior.len()];
        flags.extend(std::iter::repeat(true).take(split.boundary.len()));
        let all = split.joined(Role::RbfCenters);
        let mut warnings = Vec::new();

        // Patches without nodes carry no approximation.
        let all_index = crate::spatial::PointIndex::new(all.dim(), all.coords(), Some(h));
        let empty: Vec<usize> = (0..cover.len())
            .filter(|&j| all_index.within(cover.center(j), cover.radius()).is_empty())
            .collect();
        if !empty.is_empty() {
            warnings.push(format!("{} patches hold no nodes and were removed", empty.len()));
            cover = cover.without(&empty)?;
        }
        let (nodes, flags, dropped) = covered_in_order(&cover, &all, &flags);
        if dropped > 0 {
            warnings.push(format!("{dropped} nodes outside every patch were dropped"));
        }
        let index = crate::spatial::PointIndex::new(nodes.dim(), nodes.coords(), Some(h));
        let patch_nodes: Vec<Vec<usize>> = (0..cover.len())
            .map(|j| index.within(cover.center(j), cover.radius()))
            .collect();
        let d = nodes.dim();
        let factors = patch_nodes
            .par_iter()
            .enumerate()
            .map(|(j, idx)| {
                let c = cover.center(j);
                let local: Vec<f64> = idx
                    .iter()
                    .flat_map(|&i| nodes.point(i).iter().zip(c).map(|(x, c)| x - c))
                    .collect();
                LocalFactorization::with_precision(req.kernel.clone(), d, &local, req.precision).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let eval = nodes.relabel(Role::InteriorEval);
        Ok(Layout {
            method: self.name(),
            cover,
            nodes: nodes.with_fill_distance(h),
            eval,
            eval_on_boundary: flags,
            patch_nodes,
            factors,
            spacing: h,
            warnings,
        })
    }
}

/// Least squares: one node template shared by every patch, evaluation
/// points on a finer Cartesian layout.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquares;

/// The per-patch node template in the unit ball.
pub fn node_template(dim: usize, n: usize) -> Result<NodeSet> {
    match dim {
        2 => vogel_nodes(n),
        3 => packed_ball_nodes(n, 3),
        _ => input(format!("unsupported dimension {dim}")),
    }
}

/// Halton points in the ball of patch `j` that lie in the domain and keep
/// [`SUPPLEMENT_SEPARATION`] from `existing` and from each other, until the
/// patch holds `need` points. Returns `None` when the first `50·need`
/// Halton points in the ball cannot supply enough.
pub fn supplement_points(
    domain: &dyn Domain,
    center: &[f64],
    radius: f64,
    existing: &[f64],
    have: usize,
    need: usize,
) -> Option<Vec<f64>> {
    let d = center.len();
    if have >= need {
        return Some(Vec::new());
    }
    let budget = 50 * need;
    let mut added: Vec<f64> = Vec::new();
    let mut tried = 0;
    let mut idx = 1u64;
    let far_enough = |x: &[f64], pts: &[f64]| pts.chunks_exact(d).all(|p| distance(p, x) >= SUPPLEMENT_SEPARATION);
    while tried < budget && idx < 1_000_000 {
        let u: Vec<f64> = halton_points(1, d, idx).iter().map(|v| 2.0 * v - 1.0).collect();
        idx += 1;
        if crate::nodes::norm(&u) >= 1.0 {
            continue;
        }
        tried += 1;
        let x: Vec<f64> = center.iter().zip(&u).map(|(c, v)| c + radius * v).collect();
        if domain.inside(&x) && far_enough(&x, existing) && far_enough(&x, &added) {
            added.extend_from_slice(&x);
            if have + added.len() / d >= need {
                return Some(added);
            }
        }
    }
    None
}

impl Discretization for LeastSquares {
    fn name(&self) -> &'static str {
        "least-squares"
    }

    fn layout(&self, req: LayoutRequest<'_>) -> Result<Layout> {
        let mut cover = req.cover;
        let d = cover.dim();
        let n = req.n;
        let rho = cover.radius();
        let template: Vec<f64> = node_template(d, n)?.into_coords().into_iter().map(|v| v * rho).collect();
        let fact = Arc::new(LocalFactorization::with_precision(req.kernel.clone(), d, &template, req.precision)?);

        let h = match req.spacing {
            Some(h) => h,
            None => plan_oversampling(req.domain, cover.len() * n, req.beta)?.interior_spacing,
        };
        let split = cartesian_layout(req.domain, h, Role::InteriorEval)?;
        let mut flags = vec![false; split.interior.len()];
        flags.extend(std::iter::repeat(true).take(split.boundary.len()));
        let mut eval = split.joined(Role::InteriorEval);
        let mut warnings = Vec::new();
        let need = n + 2;
        let mut supplements = 0;
        let mut pruned = 0;
        loop {
            let (kept, kept_flags, dropped) = covered_in_order(&cover, &eval, &flags);
            if dropped > 0 {
                warnings.push(format!("{dropped} evaluation points outside every patch were dropped"));
            }
            eval = kept;
            flags = kept_flags;
            let index = crate::spatial::PointIndex::new(d, eval.coords(), Some(rho / 2.0));
            let mut extra: Vec<f64> = Vec::new();
            let mut prune = Vec::new();
            for j in 0..cover.len() {
                let c = cover.center(j);
                let members = index.within(c, rho);
                // Earlier supplements inside this ball count too.
                let mine: Vec<f64> = extra
                    .chunks_exact(d)
                    .filter(|p| distance(p, c) < rho)
                    .flatten()
                    .copied()
                    .collect();
                let have = members.len() + mine.len() / d;
                if have >= need {
                    continue;
                }
                let near = index.within(c, rho + SUPPLEMENT_SEPARATION);
                let mut existing: Vec<f64> = near.iter().flat_map(|&i| eval.point(i).iter().copied()).collect();
                existing.extend_from_slice(&extra);
                match supplement_points(req.domain, c, rho, &existing, have, need) {
                    Some(pts) => extra.extend(pts),
                    None => prune.push(j),
                }
            }
            if !extra.is_empty() {
                supplements += extra.len() / d;
                let mut coords = eval.coords().to_vec();
                coords.extend_from_slice(&extra);
                flags.extend(std::iter::repeat(false).take(extra.len() / d));
                eval = NodeSet::new_unchecked(d, coords, Role::InteriorEval)?;
            }
            if prune.is_empty() {
                break;
            }
            pruned += prune.len();
            cover = cover.without(&prune)?;
        }
        if supplements > 0 {
            warnings.push(format!("added {supplements} supplementary evaluation points to reach n+2 per patch"));
        }
        if pruned > 0 {
            warnings.push(format!("pruned {pruned} patches that could not hold n+2 evaluation points"));
        }
        let (eval, flags, _) = covered_in_order(&cover, &eval, &flags);

        let p = cover.len();
        let mut coords = Vec::with_capacity(p * n * d);
        for j in 0..p {
            let c = cover.center(j);
            for t in template.chunks_exact(d) {
                coords.extend(t.iter().zip(c).map(|(a, b)| a + b));
            }
        }
        let nodes = NodeSet::new_unchecked(d, coords, Role::RbfCenters)?;
        let patch_nodes = (0..p).map(|j| (j * n..(j + 1) * n).collect()).collect();
        Ok(Layout {
            method: self.name(),
            cover,
            nodes,
            eval,
            eval_on_boundary: flags,
            patch_nodes,
            factors: vec![fact; p],
            spacing: h,
            warnings,
        })
    }
}
