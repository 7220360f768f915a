//! Patch covers and Shepard partition-of-unity weights.

use rayon::prelude::*;

use crate::error::{input, PumError, Result};
use crate::geometry::Domain;
use crate::nodes::{distance, NodeSet, Role};
use crate::sampling::halton_in_domain;
use crate::spatial::PointIndex;

/// Patches narrower than this fraction of ρ count as not covering a point
/// when deciding whether a boundary patch is redundant.
const PRUNE_MARGIN: f64 = 0.98;

/// Spherical patches with a common radius.
#[derive(Debug, Clone)]
pub struct PatchCover {
    dim: usize,
    centers: Vec<f64>,
    radius: f64,
    box_size: f64,
    delta: f64,
    index: PointIndex,
}

/// The C² Wendland function `(1-r)₊⁴(4r+1)` with its first two derivatives.
pub fn wendland(r: f64) -> Result<(f64, f64, f64)> {
    if !(r >= 0.0) {
        return input(format!("Wendland radius must be nonnegative, got {r}"));
    }
    Ok(wendland_unchecked(r))
}

fn wendland_unchecked(r: f64) -> (f64, f64, f64) {
    if r >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 - r;
    let s3 = s * s * s;
    (s3 * s * (4.0 * r + 1.0), -20.0 * r * s3, 20.0 * s * s * (4.0 * r - 1.0))
}

/// Generator `φ(x) = ψ(|x-c|/ρ)`: value, gradient and Laplacian at `x`.
fn generator(x: &[f64], c: &[f64], rho: f64, grad: &mut [f64]) -> (f64, f64) {
    let d = x.len();
    let r = distance(x, c) / rho;
    if r >= 1.0 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return (0.0, 0.0);
    }
    let s = 1.0 - r;
    let s3 = s * s * s;
    // ψ'(r)/r = -20(1-r)³ stays finite at the centre.
    let dpsi_over_r = -20.0 * s3;
    let rho2 = rho * rho;
    for k in 0..d {
        grad[k] = dpsi_over_r * (x[k] - c[k]) / rho2;
    }
    let ddpsi = 20.0 * s * s * (4.0 * r - 1.0);
    let lap = (ddpsi + (d as f64 - 1.0) * dpsi_over_r) / rho2;
    (s3 * s * (4.0 * r + 1.0), lap)
}

impl PatchCover {
    /// Box grid of side `h` centred on the bounding box of the domain.
    ///
    /// Boxes that miss the domain are dropped. Boundary boxes whose patch
    /// adds no coverage beyond its neighbours are then pruned, smallest
    /// contribution first.
    pub fn build(domain: &dyn Domain, h: f64, delta: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return input(format!("box size must be positive, got {h}"));
        }
        if !(delta >= 0.0) {
            return input(format!("overlap must be nonnegative, got {delta}"));
        }
        let dim = domain.dim();
        let radius = (1.0 + delta) * (dim as f64).sqrt() * h / 2.0;
        let bb = domain.bounding_box();
        let counts: Vec<usize> = (0..dim)
            .map(|k| ((bb.extent(k) / h - 1e-9).ceil() as usize).max(1))
            .collect();
        let origin: Vec<f64> = (0..dim)
            .map(|k| 0.5 * (bb.lo[k] + bb.hi[k]) - 0.5 * counts[k] as f64 * h)
            .collect();

        let sample = coverage_sample(domain, h)?;
        let total: usize = counts.iter().product();
        let mut boxes = Vec::new();
        let mut cell = vec![0usize; dim];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..dim).rev() {
                cell[k] = rem % counts[k];
                rem /= counts[k];
            }
            let lo: Vec<f64> = (0..dim).map(|k| origin[k] + cell[k] as f64 * h).collect();
            boxes.push(lo);
        }

        // Which sample points fall in each box (closed box).
        let index = PointIndex::new(dim, sample.coords(), Some(h / 4.0));
        let mut centers = Vec::new();
        let mut boundary_box = Vec::new();
        for lo in &boxes {
            let c: Vec<f64> = lo.iter().map(|v| v + 0.5 * h).collect();
            let half_diag = 0.5 * h * (dim as f64).sqrt();
            let hit = index
                .within(&c, half_diag * (1.0 + 1e-9))
                .into_iter()
                .any(|i| {
                    let p = sample.point(i);
                    (0..dim).all(|k| p[k] >= lo[k] - 1e-12 && p[k] <= lo[k] + h + 1e-12)
                });
            if !hit {
                continue;
            }
            centers.extend_from_slice(&c);
            boundary_box.push(!box_inside(domain, lo, h));
        }
        if centers.is_empty() {
            return input(format!("no box of size {h} intersects the domain"));
        }
        let keep = prune(dim, &centers, &boundary_box, radius, &sample);
        let centers: Vec<f64> = centers
            .chunks_exact(dim)
            .zip(&keep)
            .filter(|(_, &k)| k)
            .flat_map(|(c, _)| c.iter().copied())
            .collect();
        Ok(Self::assemble(dim, centers, radius, h, delta))
    }

    /// Cover with explicit centres.
    pub fn from_centers(dim: usize, centers: Vec<f64>, radius: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() % dim != 0 {
            return input("patch centres must be a nonempty list of points");
        }
        if !(radius > 0.0) {
            return input(format!("patch radius must be positive, got {radius}"));
        }
        let h = 2.0 * radius / (dim as f64).sqrt();
        Ok(Self::assemble(dim, centers, radius, h, 0.0))
    }

    fn assemble(dim: usize, centers: Vec<f64>, radius: f64, box_size: f64, delta: f64) -> Self {
        let index = PointIndex::new(dim, &centers, Some(radius));
        PatchCover {
            dim,
            centers,
            radius,
            box_size,
            delta,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn box_size(&self) -> f64 {
        self.box_size
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Patches whose open ball contains `x`, in increasing index order.
    pub fn covering(&self, x: &[f64]) -> Vec<usize> {
        self.index.within(x, self.radius)
    }

    /// Largest number of patches overlapping at any of the given points.
    pub fn max_overlap(&self, points: &NodeSet) -> usize {
        points.iter().map(|p| self.covering(p).len()).max().unwrap_or(0)
    }

    /// Drops patches by index, keeping the order of the rest.
    pub fn without(&self, drop: &[usize]) -> Result<Self> {
        let centers: Vec<f64> = (0..self.len())
            .filter(|j| !drop.contains(j))
            .flat_map(|j| self.center(j).iter().copied())
            .collect();
        if centers.is_empty() {
            return input("every patch was removed from the cover");
        }
        Ok(Self::assemble(self.dim, centers, self.radius, self.box_size, self.delta))
    }

    pub fn summary(&self) -> String {
        format!("P={} rho={}", self.len(), self.radius)
    }
}

/// Dense sample of the closed domain used to decide box membership and
/// redundancy: Halton points inside plus a fine boundary sample.
fn coverage_sample(domain: &dyn Domain, h: f64) -> Result<NodeSet> {
    let dim = domain.dim();
    let div = if dim == 2 { 10.0 } else { 6.0 };
    let s = h / div;
    let n = ((domain.measure() / s.powi(dim as i32)).ceil() as usize).clamp(2000, 400_000);
    let mut coords = halton_in_domain(domain, n, Role::Probe)?.into_coords();
    coords.extend_from_slice(domain.boundary_sample(s)?.points.coords());
    NodeSet::new_unchecked(dim, coords, Role::Probe)
}

/// True when every point of a small lattice in the closed box is inside.
fn box_inside(domain: &dyn Domain, lo: &[f64], h: f64) -> bool {
    let dim = lo.len();
    let m = 4usize;
    let total = (m + 1).pow(dim as u32);
    let mut x = vec![0.0; dim];
    (0..total).all(|flat| {
        let mut rem = flat;
        for k in 0..dim {
            x[k] = lo[k] + (rem % (m + 1)) as f64 * h / m as f64;
            rem /= m + 1;
        }
        domain.inside(&x)
    })
}

fn prune(dim: usize, centers: &[f64], boundary: &[bool], radius: f64, sample: &NodeSet) -> Vec<bool> {
    let p = centers.len() / dim;
    let index = PointIndex::new(dim, sample.coords(), Some(radius / 4.0));
    let members: Vec<Vec<usize>> = (0..p)
        .into_par_iter()
        .map(|j| index.within(&centers[j * dim..(j + 1) * dim], radius))
        .collect();
    // Number of live patches covering each sample point with margin.
    let mut cover_count = vec![0u32; sample.len()];
    let inner = PRUNE_MARGIN * radius;
    let strongly = |j: usize, i: usize| distance(&centers[j * dim..(j + 1) * dim], sample.point(i)) < inner;
    for (j, m) in members.iter().enumerate() {
        for &i in m {
            if strongly(j, i) {
                cover_count[i] += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..p).filter(|&j| boundary[j]).collect();
    order.sort_by_key(|&j| (members[j].len(), j));
    let mut keep = vec![true; p];
    for j in order {
        // Every sample point in the patch must stay covered with margin.
        let redundant = members[j].iter().all(|&i| {
            let own = u32::from(strongly(j, i));
            cover_count[i] > own
        });
        if redundant {
            keep[j] = false;
            for &i in &members[j] {
                if strongly(j, i) {
                    cover_count[i] -= 1;
                }
            }
        }
    }
    keep
}

/// Shepard weights and their derivatives, stored per patch.
#[derive(Debug, Clone)]
pub struct PatchWeights {
    /// Indices into the evaluated point set, ascending.
    pub points: Vec<usize>,
    pub w: Vec<f64>,
    /// `dim` entries per point.
    pub grad: Vec<f64>,
    pub lap: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct WeightEval {
    pub dim: usize,
    pub patches: Vec<PatchWeights>,
}

struct PointWeights {
    patches: Vec<usize>,
    w: Vec<f64>,
    grad: Vec<f64>,
    lap: Vec<f64>,
}

fn weights_at(cover: &PatchCover, x: &[f64], patches: Vec<usize>) -> PointWeights {
    let d = cover.dim;
    let k = patches.len();
    if k == 1 {
        return PointWeights {
            patches,
            w: vec![1.0],
            grad: vec![0.0; d],
            lap: vec![0.0],
        };
    }
    let rho = cover.radius;
    let mut phi = vec![0.0; k];
    let mut gphi = vec![0.0; k * d];
    let mut lphi = vec![0.0; k];
    for (a, &j) in patches.iter().enumerate() {
        let (v, l) = generator(x, cover.center(j), rho, &mut gphi[a * d..(a + 1) * d]);
        phi[a] = v;
        lphi[a] = l;
    }
    let s: f64 = phi.iter().sum();
    let mut gs = vec![0.0; d];
    for a in 0..k {
        for i in 0..d {
            gs[i] += gphi[a * d + i];
        }
    }
    let ls: f64 = lphi.iter().sum();
    let gs2: f64 = gs.iter().map(|v| v * v).sum();
    let mut w = vec![0.0; k];
    let mut grad = vec![0.0; k * d];
    let mut lap = vec![0.0; k];
    for a in 0..k {
        w[a] = phi[a] / s;
        let mut dot = 0.0;
        for i in 0..d {
            let g = gphi[a * d + i];
            grad[a * d + i] = g / s - phi[a] * gs[i] / (s * s);
            dot += g * gs[i];
        }
        lap[a] = lphi[a] / s - 2.0 * dot / (s * s) - phi[a] * ls / (s * s)
            + 2.0 * phi[a] * gs2 / (s * s * s);
    }
    PointWeights {
        patches,
        w,
        grad,
        lap,
    }
}

/// Evaluates `w_j`, `∇w_j` and `Δw_j` at every point for every patch that
/// contains it.
pub fn shepard_weights(cover: &PatchCover, points: &NodeSet) -> Result<WeightEval> {
    if points.dim() != cover.dim {
        return Err(PumError::Dimension {
            expected: cover.dim,
            got: points.dim(),
        });
    }
    let per_point: Vec<PointWeights> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points.point(i);
            let patches = cover.covering(x);
            if patches.is_empty() {
                return Err(PumError::Coverage {
                    index: i,
                    coords: x.to_vec(),
                });
            }
            Ok(weights_at(cover, x, patches))
        })
        .collect::<Result<_>>()?;
    let d = cover.dim;
    let mut patches: Vec<PatchWeights> = (0..cover.len())
        .map(|_| PatchWeights {
            points: Vec::new(),
            w: Vec::new(),
            grad: Vec::new(),
            lap: Vec::new(),
        })
        .collect();
    for (i, pw) in per_point.iter().enumerate() {
        for (a, &j) in pw.patches.iter().enumerate() {
            let p = &mut patches[j];
            p.points.push(i);
            p.w.push(pw.w[a]);
            p.grad.extend_from_slice(&pw.grad[a * d..(a + 1) * d]);
            p.lap.push(pw.lap[a]);
        }
    }
    Ok(WeightEval { dim: d, patches })
}

impl WeightEval {
    /// Sums of `w`, `∇w` and `Δw` over patches at each point; a point that
    /// no patch touches gets zeros.
    pub fn sums(&self, n_points: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut w = vec![0.0; n_points];
        let mut g = vec![0.0; n_points * d];
        let mut l = vec![0.0; n_points];
        for p in &self.patches {
            for (a, &i) in p.points.iter().enumerate() {
                w[i] += p.w[a];
                for k in 0..d {
                    g[i * d + k] += p.grad[a * d + k];
                }
                l[i] += p.lap[a];
            }
        }
        (w, g, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxDomain, PolarStar};

    #[test]
    fn wendland_values() {
        assert_eq!(wendland(0.0).unwrap().0, 1.0);
        let (v, d1, d2) = wendland(1.0).unwrap();
        assert_eq!((v, d1, d2), (0.0, 0.0, 0.0));
        assert!((wendland(0.5).unwrap().0 - 0.1875).abs() < 1e-15);
        assert!(wendland(-0.1).is_err());
        let e = 1e-5;
        for r in [0.1, 0.37, 0.8] {
            let (_, d1, d2) = wendland(r).unwrap();
            let f = |t: f64| wendland(t).unwrap().0;
            assert!((d1 - (f(r + e) - f(r - e)) / (2.0 * e)).abs() < 1e-8);
            assert!((d2 - (f(r + e) - 2.0 * f(r) + f(r - e)) / (e * e)).abs() < 1e-4);
        }
    }

    #[test]
    fn box_cover_counts() {
        let b = BoxDomain::square(2.0);
        let c = PatchCover::build(&b, 0.4, 0.2).unwrap();
        assert_eq!(c.len(), 100);
        assert_eq!(c.radius(), 1.2 * 2f64.sqrt() * 0.4 / 2.0);
        assert_eq!(PatchCover::build(&b, 4.0 / 11.0, 0.2).unwrap().len(), 121);
    }

    #[test]
    fn star_cover_count() {
        let s = PolarStar::omega_s();
        let c = PatchCover::build(&s, 0.6, 0.2).unwrap();
        assert!((23..=25).contains(&c.len()), "P={}", c.len());
        let probes = halton_in_domain(&s, 5000, Role::Probe).unwrap();
        assert!(probes.iter().all(|p| !c.covering(p).is_empty()));
        let bs = s.boundary_sample(0.02).unwrap().points;
        assert!(bs.iter().all(|p| !c.covering(p).is_empty()));
    }

    #[test]
    fn single_and_twin_patches() {
        let one = PatchCover::from_centers(2, vec![0.0, 0.0], 1.0).unwrap();
        let pts = NodeSet::new(2, vec![0.1, 0.2, -0.5, 0.3], Role::Probe).unwrap();
        let w = shepard_weights(&one, &pts).unwrap();
        assert_eq!(w.patches[0].w, vec![1.0, 1.0]);
        assert!(w.patches[0].grad.iter().all(|&g| g == 0.0));
        assert!(w.patches[0].lap.iter().all(|&l| l.abs() < 1e-15));

        let twin = PatchCover::from_centers(2, vec![0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let w = shepard_weights(&twin, &pts).unwrap();
        assert!(w.patches.iter().all(|p| p.w.iter().all(|&v| v == 0.5)));
    }

    #[test]
    fn uncovered_point_is_reported() {
        let one = PatchCover::from_centers(2, vec![0.0, 0.0], 1.0).unwrap();
        let pts = NodeSet::new(2, vec![0.0, 0.0, 2.0, 0.0], Role::Probe).unwrap();
        match shepard_weights(&one, &pts) {
            Err(PumError::Coverage { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = BoxDomain::square(2.0);
        let c = PatchCover::build(&b, 0.4, 0.2).unwrap();
        let probes = halton_in_domain(&b, 50, Role::Probe).unwrap();
        let e = 1e-5 * c.radius();
        for (i, x) in probes.iter().enumerate() {
            let base = weights_at(&c, x, c.covering(x));
            for (a, &j) in base.patches.iter().enumerate() {
                let w_at = |y: &[f64]| {
                    let pw = weights_at(&c, y, c.covering(y));
                    pw.patches.iter().position(|&q| q == j).map_or(0.0, |t| pw.w[t])
                };
                let mut lap_fd = 0.0;
                for k in 0..2 {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += e;
                    xm[k] -= e;
                    let (fp, fm) = (w_at(&xp), w_at(&xm));
                    let g_fd = (fp - fm) / (2.0 * e);
                    let g = base.grad[a * 2 + k];
                    assert!((g - g_fd).abs() <= 1e-6 * (1.0 + g.abs()) / c.radius(), "{i} {j} {g} {g_fd}");
                    lap_fd += (fp - 2.0 * base.w[a] + fm) / (e * e);
                }
                let l = base.lap[a];
                // Second differences lose about half the digits.
                assert!((l - lap_fd).abs() <= 1e-3 * (1.0 + l.abs()), "{i} {j} {l} {lap_fd}");
            }
        }
    }
}
