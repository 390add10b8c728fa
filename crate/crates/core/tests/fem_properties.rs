use proptest::prelude::*;
use stochastic_fracture::fem::*;
use stochastic_fracture::mesh::{AntiplaneGeometry, NodeMarker, TriMesh};

/// Structured `n x n` grid of the unit square with interior nodes moved by
/// up to `jitter * h`.
fn jittered_square(n: usize, offsets: &[(f64, f64)], jitter: f64) -> TriMesh {
    let h = 1.0 / n as f64;
    let mut nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let mut p = [i as f64 * h, j as f64 * h];
            if i > 0 && i < n && j > 0 && j < n {
                let (dx, dy) = offsets[(j * (n + 1) + i) % offsets.len()];
                p[0] += jitter * h * dx;
                p[1] += jitter * h * dy;
            }
            nodes.push(p);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::new();
    for j in 0..n {
        for i in 0..n {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let markers = vec![NodeMarker::Free; nodes.len()];
    TriMesh::new(nodes, tris, markers, AntiplaneGeometry::default(), h, h).unwrap()
}

fn params(penalty: f64, dissipation: Dissipation) -> PhaseFieldParams {
    PhaseFieldParams {
        modulus: Coefficient::Uniform(1.3),
        toughness: Coefficient::Uniform(0.8),
        length_scale: 0.15,
        dissipation,
        penalty,
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn fd_gradient(n: usize, h: f64, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    (0..n).map(|i| (f(i, h) - f(i, -h)) / (2.0 * h)).collect()
}

/// Finite-difference step of the gradient checks.
const EPS: f64 = 1e-4;
/// Allowed relative error of the gradient checks.
const GRAD_TOL: f64 = 1e-5;

/// Keeps every node away from the kinks of the penalty terms.
fn smooth_branch(alpha: &[f64], prev: &[f64]) -> bool {
    alpha.iter().zip(prev).all(|(a, p)| (a - p).abs() > 2.0 * EPS && (a - 1.0).abs() > 2.0 * EPS)
}

fn offsets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25)
}

#[test]
fn patch_test_is_exact() {
    // a linear field is discretely harmonic on any mesh: K u vanishes at
    // interior nodes
    for seed in 0..5 {
        let offs: Vec<(f64, f64)> = (0..25).map(|k| (((k * 7 + seed) % 11) as f64 / 5.5 - 1.0, ((k * 3 + seed) % 13) as f64 / 6.5 - 1.0)).collect();
        let mesh = jittered_square(6, &offs, 0.3);
        let g = P1Geometry::from_trimesh(&mesh);
        let k = assemble_weighted_stiffness(&g, &vec![1.0; g.elements().len()]).unwrap();
        let u: Vec<f64> = mesh.nodes().iter().map(|p| 0.7 * p[0] - 1.9 * p[1] + 0.25).collect();
        let r = k.mul_vec(&u);
        for (i, p) in mesh.nodes().iter().enumerate() {
            if p[0] > 1e-12 && p[0] < 1.0 - 1e-12 && p[1] > 1e-12 && p[1] < 1.0 - 1e-12 {
                assert!(r[i].abs() < 1e-12, "node {i}: {}", r[i]);
            }
        }
        // gradient of the interpolant is recovered exactly
        for e in g.elements() {
            let gr = e.gradient(&u);
            assert!((gr[0] - 0.7).abs() < 1e-12 && (gr[1] + 1.9).abs() < 1e-12);
        }
    }
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn elimination_matches_lagrange_multipliers() {
    // 10 nodes: a 4 x 1 strip of squares plus one extra node on top
    let nodes = vec![
        [0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0],
        [0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0], [2.1, 1.8],
    ];
    let tris = vec![
        [0, 1, 6], [0, 6, 5], [1, 2, 7], [1, 7, 6], [2, 3, 8], [2, 8, 7], [3, 4, 8], [6, 7, 9], [7, 8, 9],
    ];
    let mesh = TriMesh::new(nodes, tris, vec![NodeMarker::Free; 10], AntiplaneGeometry::default(), 1.0, 1.0).unwrap();
    let g = P1Geometry::from_trimesh(&mesh);
    let weight: Vec<f64> = (0..g.elements().len()).map(|e| 1.0 + 0.3 * e as f64).collect();
    let k = assemble_weighted_stiffness(&g, &weight).unwrap();
    let f: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.3).collect();
    let fixed = [(0usize, 0.5), (5, -0.25), (9, 1.0)];

    let mut system = SparseSystem::new(k.clone(), f.clone());
    for &(i, v) in &fixed {
        system.constrain(i, v);
    }
    system.eliminate_constraints();
    assert!(system.matrix.is_symmetric(0.0));
    let (u, _) = solve_spd(&system, 1e-14, 1000, None).unwrap();

    // saddle point [K B^T; B 0] [u; lambda] = [f; g]
    let n = 10 + fixed.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..10 {
        for j in 0..10 {
            a[i][j] = k.get(i, j);
        }
    }
    let mut rhs = f.clone();
    for (c, &(i, v)) in fixed.iter().enumerate() {
        a[10 + c][i] = 1.0;
        a[i][10 + c] = 1.0;
        rhs.push(v);
    }
    let x = dense_solve(a, rhs);
    for i in 0..10 {
        assert!((u[i] - x[i]).abs() < 1e-10, "node {i}: {} vs {}", u[i], x[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phase_residual_is_energy_gradient(
        offs in offsets(),
        u_coef in prop::collection::vec(-2.0f64..2.0, 3),
        a_vals in prop::collection::vec(0.0f64..1.1, 36),
        prev_vals in prop::collection::vec(0.0f64..1.0, 36),
        at1 in any::<bool>(),
    ) {
        let mesh = jittered_square(5, &offs, 0.3);
        let g = P1Geometry::from_trimesh(&mesh);
        let p = params(50.0, if at1 { Dissipation::At1 } else { Dissipation::At2 });
        let u: Vec<f64> = mesh.nodes().iter().map(|q| u_coef[0] * q[0] + u_coef[1] * q[1] * q[1] + u_coef[2]).collect();
        prop_assume!(smooth_branch(&a_vals, &prev_vals));
        let alpha = a_vals.clone();
        let prev = prev_vals.clone();
        let r = assemble_phase_residual(&g, &u, &alpha, &prev, &p).unwrap();
        let fd = fd_gradient(alpha.len(), EPS, |i, h| {
            let mut a = alpha.clone();
            a[i] += h;
            evaluate_energy(&g, &u, &a, &prev, &p).unwrap().total
        });
        prop_assert!(rel_err(&fd, &r) < GRAD_TOL, "relative error {}", rel_err(&fd, &r));
    }

    #[test]
    fn displacement_residual_is_energy_gradient(
        offs in offsets(),
        u_vals in prop::collection::vec(-1.0f64..1.0, 36),
        a_vals in prop::collection::vec(0.0f64..1.0, 36),
    ) {
        let mesh = jittered_square(5, &offs, 0.3);
        let g = P1Geometry::from_trimesh(&mesh);
        let p = params(0.0, Dissipation::At2);
        let r = assemble_displacement_residual(&g, &u_vals, &a_vals, &p).unwrap();
        let fd = fd_gradient(u_vals.len(), EPS, |i, h| {
            let mut u = u_vals.clone();
            u[i] += h;
            evaluate_energy(&g, &u, &a_vals, &a_vals, &p).unwrap().total
        });
        prop_assert!(rel_err(&fd, &r) < GRAD_TOL, "relative error {}", rel_err(&fd, &r));
    }

    #[test]
    fn phase_jacobian_is_residual_derivative(
        offs in offsets(),
        u_vals in prop::collection::vec(-1.0f64..1.0, 36),
        a_vals in prop::collection::vec(0.0f64..1.1, 36),
        prev in prop::collection::vec(0.0f64..1.0, 36),
        dir in prop::collection::vec(-1.0f64..1.0, 36),
    ) {
        prop_assume!(smooth_branch(&a_vals, &prev));
        let mesh = jittered_square(5, &offs, 0.3);
        let g = P1Geometry::from_trimesh(&mesh);
        let p = params(50.0, Dissipation::At2);
        let j = assemble_phase_jacobian(&g, &u_vals, &a_vals, &prev, &p).unwrap();
        prop_assert!(j.is_symmetric(1e-12));
        let jd = j.mul_vec(&dir);
        let h = EPS;
        let shifted = |s: f64| {
            let a: Vec<f64> = a_vals.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            assemble_phase_residual(&g, &u_vals, &a, &prev, &p).unwrap()
        };
        let (rp, rm) = (shifted(h), shifted(-h));
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        prop_assert!(rel_err(&fd, &jd) < GRAD_TOL, "relative error {}", rel_err(&fd, &jd));
    }

    #[test]
    fn stiffness_is_symmetric_with_constant_kernel(offs in offsets(), w in 0.1f64..10.0) {
        let mesh = jittered_square(5, &offs, 0.3);
        let g = P1Geometry::from_trimesh(&mesh);
        let k = assemble_weighted_stiffness(&g, &vec![w; g.elements().len()]).unwrap();
        prop_assert!(k.is_symmetric(1e-12));
        let r = k.mul_vec(&vec![3.0; g.n_nodes()]);
        prop_assert!(r.iter().all(|v| v.abs() < 1e-11));
    }
}
