//! Node generators: local patch templates, Halton sequences, Cartesian
//! layouts clipped to a domain, and fill distance estimates.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{input, PumError, Result};
use crate::geometry::Domain;
use crate::nodes::{NodeSet, Role};
use crate::spatial::PointIndex;

/// Golden-angle spiral in the unit disc; the i-th point (1-based) has
/// radius `sqrt(i/n)`.
pub fn vogel_nodes(n: usize) -> Result<NodeSet> {
    if n == 0 {
        return input("vogel_nodes needs at least one point");
    }
    let step = PI * (3.0 - 5f64.sqrt());
    let mut coords = Vec::with_capacity(2 * n);
    for i in 1..=n {
        let r = (i as f64 / n as f64).sqrt();
        let t = i as f64 * step;
        coords.push(r * t.cos());
        coords.push(r * t.sin());
    }
    NodeSet::new(2, coords, Role::RbfCenters)
}

/// Lattice refinement used by the greedy packer: candidates sit on a grid
/// of spacing `1/PACK_DIV` times the separation constraint.
pub const PACK_DIV: i64 = 7;

/// Greedy packing with unit separation, before scaling: points are taken in
/// order of distance to the origin, ties broken by the lowest lexicographic
/// coordinate, skipping any candidate closer than 1 to an accepted point.
pub fn packed_ball_unscaled(n: usize, dim: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return input("packed_ball_nodes needs at least one point");
    }
    if !(2..=3).contains(&dim) {
        return input(format!("packed_ball_nodes supports 2D and 3D, got {dim}D"));
    }
    let sep2 = PACK_DIV * PACK_DIV;
    let mut reach = ((0.6 * (n as f64).powf(1.0 / dim as f64) + 1.5) * PACK_DIV as f64) as i64;
    loop {
        // Integer lattice coordinates keep norms and ties exact.
        let mut cands: Vec<[i64; 3]> = Vec::new();
        let r3 = if dim == 3 { reach } else { 0 };
        for a in -reach..=reach {
            for b in -reach..=reach {
                for c in -r3..=r3 {
                    if a * a + b * b + c * c <= reach * reach {
                        cands.push([a, b, c]);
                    }
                }
            }
        }
        cands.sort_by_key(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2], *p));
        let mut chosen: Vec<[i64; 3]> = Vec::with_capacity(n);
        for p in cands {
            let ok = chosen.iter().all(|q| {
                let d: i64 = (0..3).map(|k| (p[k] - q[k]).pow(2)).sum();
                d >= sep2
            });
            if ok {
                chosen.push(p);
                if chosen.len() == n {
                    break;
                }
            }
        }
        if chosen.len() == n {
            return Ok(chosen
                .iter()
                .flat_map(|p| p[..dim].iter().map(|&v| v as f64 / PACK_DIV as f64))
                .collect());
        }
        reach *= 2;
    }
}

/// Greedy packed nodes scaled so the farthest point lies on the unit sphere.
pub fn packed_ball_nodes(n: usize, dim: usize) -> Result<NodeSet> {
    let mut coords = packed_ball_unscaled(n, dim)?;
    let rmax = coords
        .chunks_exact(dim)
        .map(crate::nodes::norm)
        .fold(0.0, f64::max);
    if rmax > 0.0 {
        coords.iter_mut().for_each(|v| *v /= rmax);
    }
    NodeSet::new(dim, coords, Role::RbfCenters)
}

const PRIMES: [u64; 3] = [2, 3, 5];

pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Flat coordinates of Halton points `start .. start+n` in the unit cube.
pub fn halton_points(n: usize, dim: usize, start: u64) -> Vec<f64> {
    assert!((1..=3).contains(&dim), "halton supports up to three dimensions");
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n as u64 {
        for &b in &PRIMES[..dim] {
            out.push(radical_inverse(start + i, b));
        }
    }
    out
}

/// Halton sequence in `(0,1)^dim`, starting at index 1.
pub fn halton(n: usize, dim: usize) -> Result<NodeSet> {
    if !(2..=3).contains(&dim) {
        return input(format!("halton supports 2D and 3D, got {dim}D"));
    }
    NodeSet::new_unchecked(dim, halton_points(n, dim, 1), Role::Probe)
}

/// The first `n` Halton points (mapped into the bounding box) that lie
/// inside the domain.
pub fn halton_in_domain(domain: &dyn Domain, n: usize, role: Role) -> Result<NodeSet> {
    let dim = domain.dim();
    let bb = domain.bounding_box();
    let mut coords = Vec::with_capacity(n * dim);
    let mut index = 1u64;
    let mut x = vec![0.0; dim];
    let limit = 1000 * n as u64 + 100_000;
    while coords.len() < n * dim {
        if index > limit {
            return input(format!("domain {} is too thin to place probe points", domain.name()));
        }
        for (k, &b) in PRIMES[..dim].iter().enumerate() {
            x[k] = bb.lo[k] + radical_inverse(index, b) * bb.extent(k);
        }
        if domain.inside(&x) {
            coords.extend_from_slice(&x);
        }
        index += 1;
    }
    NodeSet::new_unchecked(dim, coords, role)
}

/// Interior and boundary parts of a global node layout.
#[derive(Debug, Clone)]
pub struct SplitNodes {
    pub interior: NodeSet,
    pub boundary: NodeSet,
    pub spacing: f64,
}

impl SplitNodes {
    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior points first, then boundary points.
    pub fn joined(&self, role: Role) -> NodeSet {
        let mut coords = self.interior.coords().to_vec();
        coords.extend_from_slice(self.boundary.coords());
        NodeSet::new_unchecked(self.interior.dim(), coords, role)
            .expect("parts share a dimension")
            .with_fill_distance(self.spacing)
    }
}

fn interior_grid(domain: &dyn Domain, h: f64) -> Vec<f64> {
    let dim = domain.dim();
    let bb = domain.bounding_box();
    let counts: Vec<usize> = (0..dim)
        .map(|k| (bb.extent(k) / h + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let mut coords = Vec::new();
    let mut x = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        // Last axis varies fastest.
        for k in (0..dim).rev() {
            x[k] = bb.lo[k] + (rem % counts[k]) as f64 * h;
            rem /= counts[k];
        }
        if domain.inside(&x) && domain.distance_to_boundary(&x) >= 0.5 * h * (1.0 - 1e-12) {
            coords.extend_from_slice(&x);
        }
    }
    coords
}

/// Grid of spacing `h` anchored at the lower bounding-box corner, minus
/// points closer than `h/2` to the boundary, plus a boundary sample of
/// spacing `h`.
pub fn cartesian_layout(domain: &dyn Domain, h: f64, interior_role: Role) -> Result<SplitNodes> {
    if !(h > 0.0) || !h.is_finite() {
        return input(format!("grid spacing must be positive, got {h}"));
    }
    let dim = domain.dim();
    let interior = NodeSet::new_unchecked(dim, interior_grid(domain, h), interior_role)?;
    let boundary = domain.boundary_sample(h)?.points;
    if interior.is_empty() {
        return input(format!(
            "spacing {h} leaves no interior grid points in {}",
            domain.name()
        ));
    }
    Ok(SplitNodes {
        interior,
        boundary,
        spacing: h,
    })
}

/// Global Cartesian node set with fill distance `h`.
pub fn cartesian_nodes(domain: &dyn Domain, h: f64) -> Result<NodeSet> {
    Ok(cartesian_layout(domain, h, Role::RbfCenters)?.joined(Role::RbfCenters))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OversamplingPlan {
    pub beta_target: f64,
    pub beta_achieved: f64,
    pub interior_spacing: f64,
    pub boundary_spacing: f64,
    pub eval_count: usize,
    /// False when the target could not be met within 2%.
    pub on_target: bool,
}

fn layout_count(domain: &dyn Domain, h: f64) -> usize {
    let interior = interior_grid(domain, h).len() / domain.dim();
    let boundary = domain.boundary_sample(h).map(|b| b.points.len()).unwrap_or(0);
    interior + boundary
}

/// Picks the evaluation spacing so that `M/N` is close to `beta_target`.
pub fn plan_oversampling(domain: &dyn Domain, n: usize, beta_target: f64) -> Result<OversamplingPlan> {
    if !(beta_target > 1.0) {
        return input(format!("oversampling ratio must exceed 1, got {beta_target}"));
    }
    if n == 0 {
        return input("cannot plan evaluation points for an empty node set");
    }
    let dim = domain.dim() as f64;
    let target = beta_target * n as f64;
    let guess = (domain.measure() / target).powf(1.0 / dim);
    let (mut lo, mut hi) = (guess / 8.0, guess * 8.0);
    let eval = |h: f64| {
        let m = layout_count(domain, h);
        (m, m as f64 / n as f64)
    };
    let mut best = (f64::INFINITY, guess, 0usize);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let (m, beta) = eval(mid);
        let miss = (beta - beta_target).abs();
        if m > n && miss < best.0 {
            best = (miss, mid, m);
        }
        if miss <= 0.02 * beta_target {
            break;
        }
        if beta > beta_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (mut miss, mut h, mut m) = best;
    if m <= n {
        // Keep refining until the system is overdetermined.
        h = guess;
        loop {
            m = layout_count(domain, h);
            if m > n {
                break;
            }
            h *= 0.9;
            if h < 1e-6 * guess {
                return Err(PumError::Input("could not place more evaluation points than nodes".into()));
            }
        }
        miss = (m as f64 / n as f64 - beta_target).abs();
    }
    Ok(OversamplingPlan {
        beta_target,
        beta_achieved: m as f64 / n as f64,
        interior_spacing: h,
        boundary_spacing: h,
        eval_count: m,
        on_target: miss <= 0.02 * beta_target,
    })
}

/// Largest nearest-node distance over 10⁴ Halton probes in the domain.
/// This underestimates the true fill distance.
pub fn fill_distance(nodes: &NodeSet, domain: &dyn Domain) -> Result<f64> {
    if nodes.is_empty() {
        return input("fill distance of an empty node set");
    }
    let probes = halton_in_domain(domain, 10_000, Role::Probe)?;
    let index = PointIndex::new(nodes.dim(), nodes.coords(), None);
    Ok(probes
        .iter()
        .filter_map(|p| index.nearest(p).map(|(_, d)| d))
        .fold(0.0, f64::max))
}

/// Writes the plain-text node format: a `# dim=<d> role=<role>` header and
/// one point per line.
pub fn write_nodes(nodes: &NodeSet, mut out: impl Write) -> Result<()> {
    writeln!(out, "# dim={} role={}", nodes.dim(), nodes.role().as_str())?;
    for p in nodes.iter() {
        let line: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_nodes(text: &str) -> Result<NodeSet> {
    let mut lines = text.lines().enumerate();
    let (dim, role) = loop {
        let Some((no, line)) = lines.next() else {
            return input("node file is empty");
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let header = line.strip_prefix('#').ok_or(PumError::Parse {
            line: no + 1,
            message: "missing `# dim=<d> role=<role>` header".into(),
        })?;
        let mut dim = None;
        let mut role = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("dim=") {
                dim = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("role=") {
                role = Role::parse(v);
            }
        }
        match (dim, role) {
            (Some(d), Some(r)) if d > 0 => break (d, r),
            _ => {
                return Err(PumError::Parse {
                    line: no + 1,
                    message: format!("bad header `{line}`"),
                })
            }
        }
    };
    let mut coords = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != dim {
            return Err(PumError::Parse {
                line: no + 1,
                message: format!("expected {dim} coordinates, found {}", vals.len()),
            });
        }
        for v in vals {
            coords.push(v.parse::<f64>().map_err(|_| PumError::Parse {
                line: no + 1,
                message: format!("not a number: `{v}`"),
            })?);
        }
    }
    NodeSet::new(dim, coords, role)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, BoxDomain, PolarStar};
    use crate::nodes::{distance, norm};

    #[test]
    fn vogel_radii_and_angles() {
        let n = 28;
        let v = vogel_nodes(n).unwrap();
        let step = PI * (3.0 - 5f64.sqrt());
        for (i, p) in v.iter().enumerate() {
            let k = (i + 1) as f64;
            assert!((norm(p) - (k / n as f64).sqrt()).abs() < 1e-12);
            let c = (k * step).cos() * norm(p);
            assert!((p[0] - c).abs() < 1e-12);
        }
        assert!((norm(v.point(n - 1)) - 1.0).abs() < 1e-15);
        let sep = v.min_separation();
        assert!((0.15..=0.35).contains(&sep), "{sep}");
        assert!(vogel_nodes(0).is_err());
    }

    #[test]
    fn packing_small_cases() {
        let one = packed_ball_nodes(1, 3).unwrap();
        assert_eq!(one.point(0), &[0.0, 0.0, 0.0]);
        let two = packed_ball_unscaled(2, 3).unwrap();
        assert_eq!(distance(&two[..3], &two[3..]), 1.0);
    }

    #[test]
    fn packed_35_is_quasi_uniform() {
        let p = packed_ball_nodes(35, 3).unwrap();
        assert_eq!(p.len(), 35);
        let nn: Vec<f64> = (0..35)
            .map(|i| {
                (0..35)
                    .filter(|&j| j != i)
                    .map(|j| distance(p.point(i), p.point(j)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let lo = nn.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = nn.iter().cloned().fold(0.0, f64::max);
        assert!(lo >= 0.9 * hi, "{lo} vs {hi}");
        assert!(p.iter().all(|x| norm(x) <= 1.0 + 1e-15));
        assert_eq!(p, packed_ball_nodes(35, 3).unwrap());
    }

    #[test]
    fn halton_first_points() {
        let h = halton_points(3, 2, 1);
        assert_eq!(&h[..4], &[0.5, 1.0 / 3.0, 0.25, 2.0 / 3.0]);
        let h3 = halton_points(2000, 3, 1);
        assert!(h3.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn box_layout_counts() {
        let b = BoxDomain::square(2.0);
        let s = cartesian_layout(&b, 0.5, Role::InteriorEval).unwrap();
        assert_eq!(s.interior.len(), 49);
        assert_eq!(s.boundary.len(), 32);
        assert!(cartesian_layout(&b, 10.0, Role::InteriorEval).is_err());
    }

    #[test]
    fn star_layout_interior_points_are_inside() {
        let s = PolarStar::omega_s();
        let nodes = cartesian_layout(&s, 0.15, Role::RbfCenters).unwrap();
        assert!(nodes.interior.iter().all(|p| s.inside(p)));
        let all = nodes.joined(Role::RbfCenters);
        assert!(all.find_duplicate().is_none());
        // Grid spacing 0.15 has a fill distance near 0.12 and gives about
        // three hundred nodes.
        let n = all.len() as f64;
        assert!((n / 321.0 - 1.0).abs() < 0.1, "{n}");
        let h = fill_distance(&all, &s).unwrap();
        assert!((h / 0.12 - 1.0).abs() < 0.15, "{h}");
    }

    #[test]
    fn oversampling_plans() {
        let s = PolarStar::omega_s();
        let plan = plan_oversampling(&s, 700, 1.5).unwrap();
        assert!((plan.eval_count as f64 / 1073.0 - 1.0).abs() < 0.05, "{plan:?}");
        let b = BoxDomain::square(2.0);
        let plan = plan_oversampling(&b, 1000, 2.0).unwrap();
        assert!((1.96..=2.04).contains(&plan.beta_achieved), "{plan:?}");
        let plan = plan_oversampling(&b, 1000, 1.0001).unwrap();
        assert!(plan.eval_count > 1000);
    }

    #[test]
    fn fill_distance_examples() {
        let ball = Ball::new(3, 1.0);
        let one = NodeSet::new(3, vec![0.0; 3], Role::RbfCenters).unwrap();
        let h = fill_distance(&one, &ball).unwrap();
        assert!((h - 1.0).abs() < 0.05, "{h}");

        let b = BoxDomain::square(2.0);
        let hgrid = 0.2;
        let mut coords = Vec::new();
        for i in 0..=20 {
            for j in 0..=20 {
                coords.extend([-2.0 + i as f64 * hgrid, -2.0 + j as f64 * hgrid]);
            }
        }
        let grid = NodeSet::new(2, coords, Role::RbfCenters).unwrap();
        let f = fill_distance(&grid, &b).unwrap();
        assert!((f / (hgrid * 0.5f64.sqrt()) - 1.0).abs() < 0.1, "{f}");
    }

    #[test]
    fn node_file_round_trip() {
        let v = vogel_nodes(10).unwrap();
        let mut buf = Vec::new();
        write_nodes(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# dim=2 role=rbf-centers\n"));
        assert_eq!(read_nodes(&text).unwrap(), v);
        assert!(read_nodes("0 1\n").is_err());
        assert!(read_nodes("# dim=2 role=probe\n0 1 2\n").is_err());
    }
}
