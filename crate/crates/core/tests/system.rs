use std::sync::Arc;

use proptest::prelude::*;
use rbf_pum::dd::Dd;
use rbf_pum::geometry::{domain_by_name, BoxDomain, Domain, PolarStar};
use rbf_pum::kernels::{kernel_by_name, Precision, RadialKernel};
use rbf_pum::nodes::{distance, NodeSet, Role};
use rbf_pum::partition::PatchCover;
use rbf_pum::problems::{problem_by_name, Constant, Problem};
use rbf_pum::sampling::halton_points;
use rbf_pum::system::*;

fn layout(domain: &dyn Domain, cover: PatchCover, method: &str, kernel: Arc<dyn RadialKernel>, n: usize) -> Layout {
    method_by_name(method)
        .unwrap()
        .layout(LayoutRequest {
            domain,
            cover,
            kernel,
            n,
            beta: 1.5,
            spacing: None,
            precision: Precision::DoubleDouble,
        })
        .unwrap()
}

fn gaussian() -> Arc<dyn RadialKernel> {
    kernel_by_name("gaussian", 1.0).unwrap()
}

fn box_layout(method: &str, h: f64) -> (Arc<dyn Domain>, Layout) {
    let dom = domain_by_name("box").unwrap();
    let cover = PatchCover::build(dom.as_ref(), h, 0.2).unwrap();
    let l = layout(dom.as_ref(), cover, method, gaussian(), 28);
    (dom, l)
}

fn solve(l: &SparseMatrix, rhs: &[f64]) -> Vec<f64> {
    backend_by_name("auto").unwrap().factorize(l).unwrap().solve(rhs).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug)]
struct Sum(Arc<dyn Problem>, Arc<dyn Problem>);

impl Problem for Sum {
    fn name(&self) -> String {
        "sum".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn exact(&self, x: &[f64]) -> f64 {
        self.0.exact(x) + self.1.exact(x)
    }
    fn laplacian(&self, x: &[f64]) -> f64 {
        self.0.laplacian(x) + self.1.laplacian(x)
    }
    fn forcing(&self, x: &[f64]) -> f64 {
        self.0.forcing(x) + self.1.forcing(x)
    }
}

#[test]
fn right_hand_side_is_linear_in_the_data() {
    let (_, lay) = box_layout("ls", 1.0);
    let (a, b) = (problem_by_name("u1").unwrap(), problem_by_name("u2").unwrap());
    let fa = right_hand_side(&lay, a.as_ref());
    let fb = right_hand_side(&lay, b.as_ref());
    let fs = right_hand_side(&lay, &Sum(a, b));
    for i in 0..fs.len() {
        assert_eq!(fs[i], fa[i] + fb[i]);
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    for method in ["collocation", "ls"] {
        let (_, lay) = box_layout(method, 1.0);
        let sys = assemble(&lay, &Constant { value: 0.0, dim: 2 }).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let u = solve(&sys.matrix, &sys.rhs);
        assert_eq!(max_abs(&u), 0.0, "{method}");
    }
}

#[test]
fn collocation_reproduces_boundary_data_at_boundary_nodes() {
    let (_, lay) = box_layout("collocation", 0.8);
    assert!(lay.is_square());
    let p = problem_by_name("u2").unwrap();
    let sys = assemble(&lay, p.as_ref()).unwrap();
    let u = solve(&sys.matrix, &sys.rhs);
    let mut checked = 0;
    for (i, x) in lay.eval.iter().enumerate() {
        if lay.eval_on_boundary[i] {
            assert!((u[i] - p.exact(x)).abs() < 1e-9, "node {i}: {} vs {}", u[i], p.exact(x));
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn collocation_stability_norm_at_own_points_is_one() {
    let (_, lay) = box_layout("collocation", 1.0);
    let sys = assemble(&lay, problem_by_name("u1").unwrap().as_ref()).unwrap();
    let f = backend_by_name("sparse-lu").unwrap().factorize(&sys.matrix).unwrap();
    let rows = operator_rows(&lay, &lay.eval, &row_kinds(&lay)).unwrap();
    assert_eq!(rows, sys.matrix);
    let norm = stability_norm(f.as_ref(), &rows).unwrap();
    assert!((norm - 1.0).abs() < 1e-8, "{norm}");
}

#[test]
fn single_patch_covers_and_weights_are_one() {
    let (_, lay) = box_layout("ls", 4.0);
    assert_eq!(lay.cover.len(), 1);
    let e = operator_rows(&lay, &lay.eval, &vec![RowKind::Value; lay.eval.len()]).unwrap();
    // Each value row is the cardinal-function row of the only patch.
    assert_eq!(e.nnz(), lay.eval.len() * lay.nodes.len());
}

#[test]
fn kernel_solution_is_reproduced_on_one_patch() {
    // u3 is the inverse quadratic with ε=5 centred at the origin, which is
    // a node of the centred Cartesian layout.
    let dom = BoxDomain::square(1.0);
    let cover = PatchCover::build(&dom, 2.0, 0.2).unwrap();
    assert_eq!(cover.len(), 1);
    let kernel = kernel_by_name("inverse-quadratic", 5.0).unwrap();
    let lay = method_by_name("collocation")
        .unwrap()
        .layout(LayoutRequest {
            domain: &dom,
            cover,
            kernel,
            n: 0,
            beta: 1.5,
            spacing: Some(0.25),
            precision: Precision::DoubleDouble,
        })
        .unwrap();
    assert!(lay.nodes.iter().any(|x| x.iter().all(|v| *v == 0.0)));
    let p = problem_by_name("u3").unwrap();
    let sys = assemble(&lay, p.as_ref()).unwrap();
    let u = solve(&sys.matrix, &sys.rhs);
    let probes = NodeSet::new(2, halton_points(500, 2, 1).iter().map(|v| 2.0 * v - 1.0).collect(), Role::Probe).unwrap();
    let approx = evaluate_solution(&lay, &u, &probes).unwrap();
    let err = probes.iter().zip(&approx).map(|(x, a)| (a - p.exact(x)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn discrete_operator_is_consistent() {
    let p = problem_by_name("u2").unwrap();
    let mut errs = Vec::new();
    for h in [0.5, 0.4, 0.3, 0.2] {
        let (_, lay) = box_layout("collocation", h);
        let sys = assemble(&lay, p.as_ref()).unwrap();
        let exact: Vec<f64> = lay.nodes.iter().map(|x| p.exact(x)).collect();
        errs.push(max_abs(&sys.matrix.residual(&exact, &sys.rhs)));
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

/// `(LᵀL) U = LᵀF` in double-double with partial pivoting.
fn normal_equations(l: &SparseMatrix, f: &[f64]) -> Vec<f64> {
    let n = l.ncols();
    let mut a = vec![vec![Dd::ZERO; n + 1]; n];
    for i in 0..l.nrows() {
        let (c, v) = l.row(i);
        for (&j, &x) in c.iter().zip(v) {
            for (&k, &y) in c.iter().zip(v) {
                a[j][k].mul_acc(Dd::from(x), Dd::from(y));
            }
            a[j][n].mul_acc(Dd::from(x), Dd::from(f[i]));
        }
    }
    for k in 0..n {
        let p = (k..n).max_by(|&r, &s| a[r][k].abs().hi.total_cmp(&a[s][k].abs().hi)).unwrap();
        a.swap(k, p);
        for r in k + 1..n {
            let m = a[r][k] / a[k][k];
            for c in k..=n {
                let t = a[k][c];
                a[r][c] -= m * t;
            }
        }
    }
    let mut x = vec![Dd::ZERO; n];
    for k in (0..n).rev() {
        let mut s = a[k][n];
        for c in k + 1..n {
            s -= a[k][c] * x[c];
        }
        x[k] = s / a[k][k];
    }
    x.into_iter().map(Dd::to_f64).collect()
}

#[test]
fn two_patch_least_squares_matches_normal_equations() {
    let dom = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
    let cover = PatchCover::from_centers(2, vec![0.25, 0.25, 0.75, 0.25], 0.4).unwrap();
    let lay = layout(&dom, cover, "ls", gaussian(), 28);
    assert_eq!(lay.nodes.len(), 56);
    let sys = assemble(&lay, problem_by_name("u2").unwrap().as_ref()).unwrap();
    let oracle = normal_equations(&sys.matrix, &sys.rhs);
    for backend in ["dense-qr", "sparse-qr"] {
        let u = backend_by_name(backend).unwrap().factorize(&sys.matrix).unwrap().solve(&sys.rhs).unwrap();
        let diff: Vec<f64> = u.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        let rel = max_abs(&diff) / max_abs(&oracle);
        assert!(rel < 1e-8, "{backend}: {rel:e}");
    }
}

#[test]
fn short_patch_gets_supplements() {
    let dom = BoxDomain::square(2.0);
    let n = 28;
    let center = [0.0, 0.0];
    let existing: Vec<f64> = halton_points(n - 3, 2, 1).iter().map(|v| 0.5 * v - 0.25).collect();
    let extra = supplement_points(&dom, &center, 0.5, &existing, n - 3, n + 2).unwrap();
    assert_eq!(extra.len() / 2, 5);
    let mut all = existing.clone();
    all.extend_from_slice(&extra);
    for (i, p) in all.chunks_exact(2).enumerate() {
        for q in all.chunks_exact(2).skip(i + 1) {
            assert!(distance(p, q) >= SUPPLEMENT_SEPARATION);
        }
    }
    for p in extra.chunks_exact(2) {
        assert!(distance(p, &center) < 0.5 && dom.inside(p));
    }
}

#[test]
fn sliver_patch_cannot_be_supplemented() {
    let star = PolarStar::omega_s();
    // A ball that only grazes the star at its rightmost tip.
    let tip = (0..20000)
        .map(|i| star.point_at(i as f64 * std::f64::consts::TAU / 20000.0))
        .max_by(|a, b| a[0].total_cmp(&b[0]))
        .unwrap();
    let r = 0.5;
    let center = [tip[0] + r - 0.01, tip[1]];
    let sample = halton_points(20000, 2, 1);
    let inside = sample
        .chunks_exact(2)
        .map(|u| [center[0] + r * (2.0 * u[0] - 1.0), center[1] + r * (2.0 * u[1] - 1.0)])
        .filter(|x| distance(x, &center) < r)
        .filter(|x| star.inside(x))
        .count();
    let area = inside as f64 / 20000.0 * 4.0 * r * r;
    assert!(area > 0.0 && area < 0.01 * std::f64::consts::PI * r * r, "{area}");
    assert!(supplement_points(&star, &center, r, &[], 0, 30).is_none());
}

#[test]
fn least_squares_rows_are_orthogonal_to_the_residual() {
    let (_, lay) = box_layout("ls", 0.8);
    let sys = assemble(&lay, problem_by_name("u2").unwrap().as_ref()).unwrap();
    let f = backend_by_name("auto").unwrap().factorize(&sys.matrix).unwrap();
    let (hi, lo) = f.solve_extended(&sys.rhs).unwrap();
    let u: Vec<Dd> = hi.iter().zip(&lo).map(|(&h, &l)| Dd::new(h, l)).collect();
    let r = sys.matrix.residual_dd(&u, &sys.rhs);
    assert!(orthogonality(&sys.matrix, &r) < 1e-12);
}

#[test]
fn assembly_is_deterministic() {
    let (_, a) = box_layout("ls", 0.8);
    let (_, b) = box_layout("ls", 0.8);
    let p = problem_by_name("u1").unwrap();
    assert_eq!(assemble(&a, p.as_ref()).unwrap().matrix, assemble(&b, p.as_ref()).unwrap().matrix);
}

#[test]
fn run_reports_match_the_configuration() {
    let cfg = RunConfig {
        box_size: 1.0,
        probes: 200,
        ..RunConfig::default()
    };
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.patches, 16);
    assert_eq!(rep.nodes, 16 * 28);
    assert!(rep.rows as f64 > 1.2 * rep.nodes as f64);
    assert!(rep.orthogonality.unwrap() < 1e-10);
    assert!(rep.error_inf.is_finite() && rep.error_inf > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_order_is_a_permutation(pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..200)) {
        let dom = domain_by_name("box").unwrap();
        let cover = PatchCover::build(dom.as_ref(), 0.8, 0.2).unwrap();
        let set = NodeSet::new_unchecked(2, pts.iter().flat_map(|&(x, y)| [x, y]).collect(), Role::Probe).unwrap();
        let once = greedy_order(&cover, &set);
        let mut sorted = once.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..pts.len()).collect::<Vec<_>>());
        // Sorting by first covering patch is idempotent.
        let coords: Vec<f64> = once.iter().flat_map(|&i| set.point(i).to_vec()).collect();
        let again = greedy_order(&cover, &NodeSet::new_unchecked(2, coords, Role::Probe).unwrap());
        prop_assert_eq!(again, (0..pts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn triplets_sum_like_a_dense_matrix(t in prop::collection::vec((0usize..6, 0usize..4, -5i32..5), 0..40)) {
        let trip: Vec<(usize, usize, f64)> = t.iter().map(|&(r, c, v)| (r, c, v as f64)).collect();
        let s = SparseMatrix::from_triplets(6, 4, trip.clone());
        let mut dense = [[0.0; 4]; 6];
        for (r, c, v) in trip {
            dense[r][c] += v;
        }
        let d = s.to_dense();
        for r in 0..6 {
            for c in 0..4 {
                prop_assert_eq!(d[(r, c)], dense[r][c]);
            }
        }
    }

    #[test]
    fn solution_evaluation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (_, lay) = box_layout("ls", 2.0);
        let n = lay.nodes.len();
        let u: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let probes = NodeSet::new(2, halton_points(50, 2, 1).iter().map(|x| 4.0 * x - 2.0).collect(), Role::Probe).unwrap();
        let eu = evaluate_solution(&lay, &u, &probes).unwrap();
        let ev = evaluate_solution(&lay, &v, &probes).unwrap();
        let ew = evaluate_solution(&lay, &w, &probes).unwrap();
        for i in 0..ew.len() {
            prop_assert!((ew[i] - (a * eu[i] + b * ev[i])).abs() < 1e-10 * (1.0 + ew[i].abs()));
        }
    }
}
