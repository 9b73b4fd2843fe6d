mod common;

use common::{face_projection, gaussian, jacobi_eigenvalues, rng};
use conesv_core::cones::{
    make_cone, nonneg_sym_oracle, orthant, psd_oracle, ray_subproblem, schur_cone, smat, svec, ConeOracle,
    PolyhedralCone,
};
use conesv_core::numerics::{Mat, Vector};
use proptest::prelude::*;
use rand::Rng;

fn random_cone(r: &mut rand_chacha::ChaCha8Rng, dim: usize, gens: usize) -> PolyhedralCone {
    make_cone(&Mat::from_fn(dim, gens, |_, _| gaussian(r))).unwrap()
}

fn columns(k: &PolyhedralCone) -> Vec<Vec<f64>> {
    k.generators().column_iter().map(|c| c.iter().copied().collect()).collect()
}

#[test]
fn projection_matches_face_enumeration() {
    let mut r = rng(7);
    for _ in 0..200 {
        let dim = r.random_range(2..5);
        let gens = r.random_range(1..6);
        let k = random_cone(&mut r, dim, gens);
        let z = Vector::from_fn(dim, |_, _| gaussian(&mut r));
        let (point, coeffs) = k.project(&z);
        let want = face_projection(&columns(&k), z.as_slice());
        let err = point.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(coeffs.iter().all(|&c| c >= 0.0));
        assert!((k.generators() * &coeffs - &point).amax() < 1e-12);
        assert!((&z - &point).dot(&point).abs() <= 1e-8 * z.norm_squared());
    }
}

#[test]
fn generators_are_unit_and_deduplicated() {
    let raw = Mat::from_row_slice(3, 4, &[2.0, 0.0, 4.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let k = make_cone(&raw).unwrap();
    assert_eq!(k.num_generators(), 3);
    for g in k.generators().column_iter() {
        assert!((g.norm() - 1.0).abs() < 1e-10);
    }
    // nearly parallel but outside the duplicate threshold survives
    let eps = 1e-4;
    let k = make_cone(&Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, eps])).unwrap();
    assert_eq!(k.num_generators(), 2);
}

#[test]
fn schur_cone_is_pointed_with_full_column_rank() {
    for n in 2..=9 {
        let s = schur_cone(n).unwrap();
        assert!(s.is_pointed());
        assert_eq!(s.num_generators(), n - 1);
        let g = s.generators();
        let gram: Vec<Vec<f64>> = (0..n - 1)
            .map(|i| (0..n - 1).map(|j| g.column(i).dot(&g.column(j))).collect())
            .collect();
        assert!(jacobi_eigenvalues(&gram)[0] > 1e-6, "n={n}");
        for col in g.column_iter() {
            assert_eq!(col.sum(), 0.0);
        }
    }
    for n in 1..6 {
        let k = orthant(n).unwrap();
        assert!(k.is_pointed());
        assert_eq!(k.generators(), &Mat::identity(n, n));
    }
}

#[test]
fn pointedness_detects_hidden_lines() {
    // g1 + g2 = −g3: no generator pair is antipodal, yet the cone holds a line
    let k = make_cone(&Mat::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, -1.0])).unwrap();
    assert!(!k.is_pointed());
    let k = make_cone(&Mat::from_row_slice(3, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0])).unwrap();
    assert!(k.is_pointed());
}

#[test]
fn ray_subproblem_matches_angular_grid() {
    let mut r = rng(3);
    for _ in 0..40 {
        let a0: f64 = r.random_range(0.0..6.28);
        let width: f64 = r.random_range(0.1..3.0);
        let k = make_cone(&Mat::from_row_slice(2, 2, &[a0.cos(), (a0 + width).cos(), a0.sin(), (a0 + width).sin()])).unwrap();
        let a = Mat::from_fn(2, 2, |_, _| gaussian(&mut r));
        let t: f64 = r.random_range(0.0..6.28);
        let z = Vector::from_row_slice(&[t.cos(), t.sin()]);
        let (v, val) = ray_subproblem(&a, &z, &k);
        let atz = a.tr_mul(&z);
        let steps = 100_000;
        let grid = (0..=steps)
            .map(|s| {
                let th = a0 + width * s as f64 / steps as f64;
                atz[0] * th.cos() + atz[1] * th.sin()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(val <= grid + 1e-12, "{val} vs {grid}");
        assert!(val >= grid - 1e-8 * width, "{val} vs {grid}");
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((z.dot(&(&a * &v)) - val).abs() < 1e-12);
    }
}

#[test]
fn orthant_generator_choice_uses_negative_part() {
    // the minimizer is (−c)₊ normalized, which is nonnegative
    let k = orthant(4).unwrap();
    let c = Vector::from_row_slice(&[0.5, -3.0, 2.0, -4.0]);
    let v = ray_subproblem(&Mat::identity(4, 4), &c.normalize(), &k).0;
    let want = Vector::from_row_slice(&[0.0, 3.0, 0.0, 4.0]) / 5.0;
    assert!((v - want).amax() < 1e-14);
    let g = k.best_generator(&c).unwrap();
    assert!(g.iter().all(|&t| t >= 0.0));
    assert!((g.norm() - 1.0).abs() < 1e-15);
}

#[test]
fn matrix_oracles_project_correctly() {
    let mut r = rng(5);
    for n in 2..5 {
        let psd = psd_oracle(n);
        let nn = nonneg_sym_oracle(n);
        for _ in 0..20 {
            let raw = Mat::from_fn(n, n, |_, _| gaussian(&mut r));
            let s = (&raw + raw.transpose()) * 0.5;
            let z = svec(&s);
            let p = psd.project(&z);
            let pm = smat(&p, n);
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| pm[(i, j)]).collect()).collect();
            assert!(jacobi_eigenvalues(&rows)[0] > -1e-10);
            assert!((&z - &p).dot(&p).abs() < 1e-8 * z.norm_squared());
            assert!((psd.project(&p) - &p).amax() < 1e-10);

            let q = nn.project(&z);
            assert!(smat(&q, n).iter().all(|&t| t >= 0.0));
            assert!((&z - &q).dot(&q).abs() < 1e-12 * z.norm_squared().max(1.0));
            if let Ok(g) = psd.best_generator(&z) {
                assert!((g.norm() - 1.0).abs() < 1e-12);
            }
            if let Ok(g) = nn.best_generator(&z) {
                assert!((g.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in 0u64..100_000, dim in 2usize..6, gens in 1usize..8) {
        let mut r = rng(seed);
        let k = random_cone(&mut r, dim, gens);
        let z = Vector::from_fn(dim, |_, _| gaussian(&mut r));
        let (p, _) = k.project(&z);
        let (pp, _) = k.project(&p);
        prop_assert!((&pp - &p).amax() <= 1e-8);
        let moreau = z.norm_squared() - p.norm_squared() - (&z - &p).norm_squared();
        prop_assert!(moreau.abs() <= 1e-6 * z.norm_squared().max(1.0));
    }

    #[test]
    fn ray_value_is_at_least_minus_norm(seed in 0u64..100_000, m in 1usize..5, n in 1usize..5, gens in 1usize..6) {
        let mut r = rng(seed);
        let a = Mat::from_fn(m, n, |_, _| gaussian(&mut r));
        let k = random_cone(&mut r, n, gens);
        let z = Vector::from_fn(m, |_, _| gaussian(&mut r)).normalize();
        let (v, val) = ray_subproblem(&a, &z, &k);
        let norm = a.singular_values().max();
        prop_assert!(val >= -norm - 1e-8);
        prop_assert!((v.norm() - 1.0).abs() < 1e-10);
    }
}
