mod common;

use common::{gaussian, jacobi_eigenvalues, rng};
use conesv_core::bfas::{solve_bfas, BfasOptions};
use conesv_core::cones::{make_cone, orthant, schur_cone, PolyhedralCone};
use conesv_core::instance::{
    check_extreme_case, check_nonnegative_case, kkt_residual, reduce_to_ma, ExtremeMode, PreprocessKind, SVInstance,
    Solution,
};
use conesv_core::numerics::{Mat, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn psv(a: Mat) -> SVInstance {
    let (m, n) = a.shape();
    SVInstance::new(a, orthant(m).unwrap(), orthant(n).unwrap()).unwrap()
}

/// Largest singular value from the eigenvalues of AᵀA.
fn norm_oracle(a: &Mat) -> f64 {
    let ata = a.transpose() * a;
    let rows: Vec<Vec<f64>> = (0..ata.nrows()).map(|i| (0..ata.ncols()).map(|j| ata[(i, j)]).collect()).collect();
    jacobi_eigenvalues(&rows).last().unwrap().max(0.0).sqrt()
}

fn nonneg_cone(r: &mut ChaCha8Rng, dim: usize, gens: usize) -> PolyhedralCone {
    make_cone(&Mat::from_fn(dim, gens, |_, _| r.random_range(0.0..1.0) + 1e-3)).unwrap()
}

/// Preprocessing, then enumeration.
fn exact(inst: &SVInstance) -> Solution {
    if let Some(s) = check_nonnegative_case(inst, 0.0).unwrap().certificate {
        return s;
    }
    if let Some(s) = check_extreme_case(inst, ExtremeMode::Deterministic).unwrap().certificate {
        return s;
    }
    solve_bfas(inst, &BfasOptions::default()).unwrap().0
}

fn random_unit_in(r: &mut ChaCha8Rng, k: &PolyhedralCone) -> Vector {
    let x = Vector::from_fn(k.num_generators(), |_, _| r.random_range(0.0..1.0));
    (k.generators() * x).normalize()
}

#[test]
fn nonnegative_instances_are_case_one() {
    let mut r = rng(100);
    for _ in 0..100 {
        let (m, n) = (r.random_range(1..7), r.random_range(1..7));
        let a = Mat::from_fn(m, n, |_, _| r.random_range(0.0..3.0));
        let (p, q) = (r.random_range(1..6), r.random_range(1..6));
        let inst = SVInstance::new(a, nonneg_cone(&mut r, m, p), nonneg_cone(&mut r, n, q)).unwrap();
        let out = check_nonnegative_case(&inst, 0.0).unwrap();
        let PreprocessKind::NonnegativeCase { lambda, i, j } = out.kind else {
            panic!("nonnegative data must be Case 1");
        };
        let c = inst.cross();
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(lambda, min);
        // lexicographically first minimizer
        let first = (0..c.nrows()).flat_map(|i| (0..c.ncols()).map(move |j| (i, j))).find(|&(i, j)| c[(i, j)] == min).unwrap();
        assert_eq!((i, j), first);
        let sol = out.certificate.unwrap();
        assert_eq!(sol.lambda, min);
        assert!(sol.kkt_residual <= 1e-8);
        sol.check_invariants(&inst).unwrap();
        for _ in 0..1000 {
            let u = random_unit_in(&mut r, inst.p());
            let v = random_unit_in(&mut r, inst.q());
            assert!(inst.value(&u, &v) >= lambda - 1e-8);
        }
    }
}

#[test]
fn negative_orthant_instances_are_case_two() {
    let mut r = rng(200);
    for k in 0..100 {
        let (m, n) = (r.random_range(1..7), r.random_range(1..7));
        let a = Mat::from_fn(m, n, |_, _| -r.random_range(0.01..3.0));
        let norm = norm_oracle(&a);
        let inst = psv(a);
        let mode = if k % 4 == 0 { ExtremeMode::Randomized(k) } else { ExtremeMode::Deterministic };
        let out = check_extreme_case(&inst, mode).unwrap();
        let PreprocessKind::ExtremeCase { lambda } = out.kind else {
            panic!("negative data must be Case 2 ({m}×{n}, {mode:?})");
        };
        assert!((lambda + norm).abs() <= 1e-8, "{lambda} vs {norm}");
        let sol = out.certificate.unwrap();
        assert!((sol.lambda + norm).abs() <= 1e-8);
        assert!(sol.kkt_residual <= 1e-6);
        sol.check_invariants(&inst).unwrap();
    }
}

#[test]
fn extreme_case_is_not_claimed_when_absent() {
    let mut r = rng(300);
    let mut checked = 0;
    while checked < 30 {
        let a = Mat::from_fn(3, 3, |_, _| gaussian(&mut r));
        let inst = psv(a.clone());
        let out = check_extreme_case(&inst, ExtremeMode::Deterministic).unwrap();
        let sol = exact(&inst);
        if (sol.lambda + inst.norm()).abs() > 1e-6 {
            assert!(matches!(out.kind, PreprocessKind::None), "{:?}", out.kind);
            checked += 1;
        }
    }
}

#[test]
fn exact_answers_scale_with_the_matrix() {
    let mut r = rng(400);
    let mut seen = 0;
    while seen < 20 {
        let a = Mat::from_fn(3, 4, |_, _| gaussian(&mut r));
        let inst = psv(a.clone());
        if inst.min_cross_entry().0 >= 0.0 {
            continue;
        }
        seen += 1;
        let c = r.random_range(0.1..10.0);
        let base = exact(&inst);
        let scaled = exact(&psv(a * c));
        assert!((scaled.lambda - c * base.lambda).abs() <= 1e-8 * c.max(1.0));
        assert!((scaled.u - &base.u).amax() < 1e-8 && (scaled.v - &base.v).amax() < 1e-8);
        assert_eq!((scaled.support_i, scaled.support_j), (base.support_i, base.support_j));
    }
}

#[test]
fn maximal_angle_reduction_preserves_the_value() {
    let mut r = rng(500);
    for _ in 0..20 {
        let a = Mat::from_fn(4, 3, |_, _| gaussian(&mut r));
        let inst = psv(a);
        let red = reduce_to_ma(&inst).unwrap();
        assert_eq!(red.ma.a(), &Mat::identity(red.ma.m(), red.ma.m()));
        for g in red.ma.p().generators().column_iter().chain(red.ma.q().generators().column_iter()) {
            assert!((g.norm() - 1.0).abs() < 1e-10);
        }
        let direct = exact(&inst);
        let lifted = exact(&red.ma);
        assert!((direct.lambda - red.scale * lifted.lambda).abs() <= 1e-8, "{} vs {}", direct.lambda, red.scale * lifted.lambda);
        let (u, v) = red.back_map(&lifted.u, &lifted.v);
        assert!(kkt_residual(&inst, &u, &v).unwrap() <= 1e-6);
        assert!((inst.value(&u.normalize(), &v.normalize()) - direct.lambda).abs() <= 1e-8);
    }
    // wide matrices are transposed first
    let wide = psv(Mat::from_fn(2, 4, |_, _| gaussian(&mut r)));
    let red = reduce_to_ma(&wide).unwrap();
    let direct = exact(&wide);
    let lifted = exact(&red.ma);
    assert!((direct.lambda - red.scale * lifted.lambda).abs() <= 1e-8);
    let (u, v) = red.back_map(&lifted.u, &lifted.v);
    assert_eq!((u.len(), v.len()), (2, 4));
}

#[test]
fn orthonormal_columns_need_no_lift() {
    let s = 0.5f64.sqrt();
    let a = Mat::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
    let inst = psv(a.clone());
    let red = reduce_to_ma(&inst).unwrap();
    assert_eq!(red.ma.m(), 3);
    assert!((red.ma.q().generators() - &a).amax() < 1e-12);
    assert!(reduce_to_ma(&psv(Mat::zeros(2, 2))).is_err());
}

#[test]
fn residual_separates_critical_from_perturbed_pairs() {
    let mut r = rng(600);
    for n in [4usize, 6] {
        let inst = SVInstance::new(Mat::identity(n, n), schur_cone(n).unwrap(), orthant(n).unwrap()).unwrap();
        let sol = exact(&inst);
        assert!(sol.kkt_residual <= 1e-8);
        for _ in 0..10 {
            let du = Vector::from_fn(n, |_, _| gaussian(&mut r)).normalize() * 0.1;
            let u = inst.p().project(&(&sol.u + du)).0;
            let v = inst.q().project(&(&sol.v + Vector::from_fn(n, |_, _| gaussian(&mut r)).normalize() * 0.1)).0;
            if u.norm() > 0.5 && v.norm() > 0.5 {
                assert!(kkt_residual(&inst, &u, &v).unwrap() > 1e-3);
            }
        }
    }
    let inst = psv(Mat::identity(2, 2));
    assert!(kkt_residual(&inst, &Vector::zeros(2), &Vector::from_row_slice(&[1.0, 0.0])).is_err());
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let a = Mat::identity(3, 2);
    assert!(SVInstance::new(a.clone(), orthant(2).unwrap(), orthant(2).unwrap()).is_err());
    assert!(SVInstance::new(a.clone(), orthant(3).unwrap(), orthant(3).unwrap()).is_err());
    let inst = SVInstance::new(a, orthant(3).unwrap(), orthant(2).unwrap()).unwrap();
    assert_eq!(inst.cross().shape(), (3, 2));
    let mut bad = Mat::identity(2, 2);
    bad[(0, 1)] = f64::NAN;
    assert!(SVInstance::new(bad, orthant(2).unwrap(), orthant(2).unwrap()).is_err());
}
