mod common;

use conesv_core::cones::{orthant, schur_cone, sphere_linmin, psd_oracle, smat, svec};
use conesv_core::eao::{eao_core, eao_run, multistart_eao, multistart_eao_traced, write_trace_csv, EaoConfig};
use conesv_core::instance::{kkt_residual, SVInstance, Status};
use conesv_core::numerics::{Mat, Vector};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::time::Duration;

fn to_mat(rows: &[Vec<f64>]) -> Mat {
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn psv(a: Mat) -> SVInstance {
    let (m, n) = a.shape();
    SVInstance::new(a, orthant(m).unwrap(), orthant(n).unwrap()).unwrap()
}

#[test]
fn sphere_linmin_examples() {
    let o = orthant(2).unwrap();
    let x = sphere_linmin(&o, &Vector::from_vec(vec![1.0, -2.0]));
    assert!((x - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-15);
    let x = sphere_linmin(&o, &Vector::from_vec(vec![1.0, 2.0]));
    assert!((x - Vector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);

    let psd = psd_oracle(2);
    let c = svec(&Mat::from_diagonal(&Vector::from_vec(vec![1.0, -3.0])));
    let x = smat(&sphere_linmin(&psd, &c), 2);
    assert!((x - Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-12);
}

#[test]
fn nonnegative_matrix_reaches_min_entry() {
    let a = Mat::from_row_slice(3, 3, &[2.0, 0.7, 1.5, 0.9, 3.0, 0.4, 1.2, 2.2, 0.8]);
    let inst = psv(a.clone());
    // start at the column holding the minimal entry
    let v0 = Vector::from_vec(vec![0.0, 0.0, 1.0]);
    let cfg = EaoConfig { polish: false, ..Default::default() };
    let (sol, _) = eao_run(&inst, &v0, &cfg).unwrap();
    assert!((sol.lambda - 0.4).abs() < 1e-12);
    assert_eq!(sol.support_i, vec![1]);
    assert_eq!(sol.support_j, vec![2]);
}

#[test]
fn random_orthant_instances_end_nearly_critical() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let inst = psv(to_mat(&common::random_matrix(&mut rng, 4, 4)));
        let cfg = EaoConfig { restarts: 5, seed: 3, ..Default::default() };
        let sol = multistart_eao(&inst, &cfg).unwrap();
        assert_eq!(sol.status, Status::Heuristic);
        assert!(sol.kkt_residual <= 1e-6, "kkt {}", sol.kkt_residual);
        sol.check_invariants(&inst).unwrap();
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let mut rng = common::rng(22);
    let inst = psv(to_mat(&common::random_matrix(&mut rng, 5, 6)));
    let cfg = EaoConfig { restarts: 1, seed: 99, ..Default::default() };
    let a = multistart_eao(&inst, &cfg).unwrap();
    let b = multistart_eao(&inst, &cfg).unwrap();
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.u, b.u);
    let cfg4 = EaoConfig { restarts: 8, threads: 4, ..cfg.clone() };
    let cfg1 = EaoConfig { restarts: 8, threads: 1, ..cfg };
    let c = multistart_eao(&inst, &cfg4).unwrap();
    let d = multistart_eao(&inst, &cfg1).unwrap();
    assert_eq!(c.lambda.to_bits(), d.lambda.to_bits());
}

#[test]
fn schur_20_restarts_reach_the_closed_form() {
    let n = 20;
    let inst = SVInstance::new(Mat::identity(n, n), schur_cone(n).unwrap(), orthant(n).unwrap()).unwrap();
    let cfg = EaoConfig {
        restarts: 60,
        seed: 1,
        time_budget: Some(Duration::from_secs(10)),
        ..Default::default()
    };
    let sol = multistart_eao(&inst, &cfg).unwrap();
    let expect = (-(1.0 - 1.0 / n as f64).sqrt()).acos() / PI;
    assert!((sol.angle() / PI - expect).abs() < 1e-6, "{} vs {expect}", sol.angle() / PI);
    assert!(sol.kkt_residual <= 1e-6);
}

#[test]
fn trace_csv_layout() {
    let inst = psv(Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 1.0]));
    let (_, trace) = eao_run(&inst, &Vector::from_vec(vec![1.0, 0.0]), &EaoConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,e_k,beta,restarted"));
    assert_eq!(lines.count(), trace.len());
}

#[test]
fn stop_value_ends_multistart_early() {
    let inst = SVInstance::new(Mat::identity(6, 6), schur_cone(6).unwrap(), orthant(6).unwrap()).unwrap();
    let cfg = EaoConfig { restarts: 20, seed: 1, ..Default::default() };
    let (_, _, all) = multistart_eao_traced(&inst, &cfg).unwrap();
    assert_eq!(all, 20);
    let (_, _, one) = multistart_eao_traced(&inst, &EaoConfig { stop_at: Some(1.0), ..cfg.clone() }).unwrap();
    assert_eq!(one, 1);
    // unreachable value: every restart runs
    let (_, _, none) = multistart_eao_traced(&inst, &EaoConfig { stop_at: Some(-2.0), ..cfg }).unwrap();
    assert_eq!(none, 20);
}

fn unit_gaussian(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| common::gaussian(rng)).normalize()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_and_beta_invariants(seed in 0u64..10_000, m in 2usize..6, n in 2usize..6) {
        let mut rng = common::rng(seed);
        let a = to_mat(&common::random_matrix(&mut rng, m, n));
        let inst = psv(a.clone());
        let v0 = unit_gaussian(&mut rng, n).map(f64::abs).normalize();
        let run = eao_core(&a, inst.p(), inst.q(), &v0, &EaoConfig::default());
        for w in run.trace.windows(2) {
            // steps without extrapolation can only rise by rounding
            prop_assert!(w[1].e <= w[0].e + 1e-12 * w[0].e.abs().max(1.0));
        }
        for r in &run.trace {
            prop_assert!((0.0..=1.0).contains(&r.beta));
        }
        prop_assert!((run.u.norm() - 1.0).abs() < 1e-8 && run.u.min() >= 0.0);
        prop_assert!((run.v.norm() - 1.0).abs() < 1e-8 && run.v.min() >= 0.0);
        let kkt = kkt_residual(&inst, &run.u, &run.v).unwrap();
        prop_assert!(kkt.is_finite());
    }

    #[test]
    fn no_extrapolation_is_monotone(seed in 0u64..10_000, m in 2usize..6, n in 2usize..6) {
        let mut rng = common::rng(seed);
        let a = to_mat(&common::random_matrix(&mut rng, m, n));
        let inst = psv(a.clone());
        let v0 = unit_gaussian(&mut rng, n).map(f64::abs).normalize();
        let cfg = EaoConfig { beta0: 0.0, ..Default::default() };
        let run = eao_core(&a, inst.p(), inst.q(), &v0, &cfg);
        prop_assert!(run.trace.iter().all(|r| !r.restarted));
        for w in run.trace.windows(2) {
            prop_assert!(w[1].e <= w[0].e + 1e-12 * w[0].e.abs().max(1.0));
        }
    }
}
