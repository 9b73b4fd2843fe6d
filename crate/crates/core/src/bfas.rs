//! Exact solver by enumeration of active sets.
//!
//! Every optimal pair lives on a face `(Ḡ, H̄)` of the two cones where it is
//! an eigenvector pair of `Ḡ⁺AH̄·H̄⁺AᵀḠ` for its least eigenvalue. The
//! enumeration visits all support pairs up to the saddle cardinality bound,
//! computes that eigenvalue through a symmetric similarity, and keeps the
//! best pair whose eigenvector is nonnegative.

use crate::error::{Error, Result};
use crate::instance::{dominated_generators, kkt_residual, normalized_nnls, saddle_cardinality_bound, SVInstance, Solution, Status};
use crate::numerics::{orth_basis, sym_eig, Mat, Vector, RANK_TOL};
use rayon::prelude::*;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Minimum improvement for a candidate to replace the incumbent.
const IMPROVE_TOL: f64 = 1e-12;
/// KKT residual a candidate must meet before it becomes the incumbent.
const CANDIDATE_KKT: f64 = 1e-7;
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy)]
pub struct BfasProgress {
    pub pairs_evaluated: u64,
    pub incumbent: f64,
    pub elapsed: f64,
}

pub type ProgressFn = Arc<dyn Fn(&BfasProgress) + Send + Sync>;

#[derive(Clone)]
pub struct BfasOptions {
    pub time_limit: Option<Duration>,
    pub threads: usize,
    /// Visit large supports first and skip subsets of dominated pairs.
    pub subset_prune: bool,
    /// Drop generators that no optimal pair needs before enumerating.
    pub drop_dominated: bool,
    pub progress: Option<ProgressFn>,
}

impl Default for BfasOptions {
    fn default() -> Self {
        BfasOptions {
            time_limit: None,
            threads: 1,
            subset_prune: false,
            drop_dominated: true,
            progress: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BfasReport {
    pub pairs_evaluated: u64,
    pub pairs_pruned: u64,
    pub rank_deficient: u64,
    pub candidates: u64,
    pub subset_skipped: u64,
    pub eigen_failures: u64,
    pub complete: bool,
    pub elapsed: f64,
    /// Values of the certified critical pairs met along the way.
    pub critical_values: Vec<f64>,
    pub generators_kept: (usize, usize),
}

#[derive(Debug, Clone)]
pub enum PairEval {
    RankDeficient,
    /// `ρ ≤ λ²`: this face cannot beat the incumbent.
    Pruned { mu: f64 },
    /// The eigenspace holds no nonnegative pair.
    Infeasible { mu: f64 },
    Candidate { mu: f64, u: Vector, v: Vector },
}

/// `N^{-1/2}` and `N^{-1}` of a Gram matrix, or `None` if it is singular.
fn gram_roots(n: &Mat) -> Option<(Mat, Mat)> {
    let (vals, q) = sym_eig(&((n + n.transpose()) * 0.5)).ok()?;
    let top = vals[vals.len() - 1];
    if !(vals[0] > (RANK_TOL * RANK_TOL) * top && vals[0] > 0.0) {
        return None;
    }
    let inv_sqrt = Mat::from_fn(n.nrows(), n.ncols(), |r, c| {
        (0..vals.len()).map(|k| q[(r, k)] * q[(c, k)] / vals[k].sqrt()).sum()
    });
    let inv = Mat::from_fn(n.nrows(), n.ncols(), |r, c| {
        (0..vals.len()).map(|k| q[(r, k)] * q[(c, k)] / vals[k]).sum()
    });
    Some((inv_sqrt, inv))
}

/// Least critical value of the face `(I, J)` and, when its eigenvector can be
/// chosen nonnegative, the corresponding unit pair.
///
/// `incumbent` enables the `ρ ≤ λ²` skip.
pub fn eval_support_pair(inst: &SVInstance, i_set: &[usize], j_set: &[usize], incumbent: Option<f64>) -> Result<PairEval> {
    let (a, b) = (i_set.len(), j_set.len());
    if a == 0 || b == 0 || a > inst.m() || b > inst.n() {
        return Ok(PairEval::RankDeficient);
    }
    let g_bar = inst.p().generators().select_columns(i_set);
    let h_bar = inst.q().generators().select_columns(j_set);
    let gram_g = inst.p().gram().select_rows(i_set).select_columns(i_set);
    let gram_h = inst.q().gram().select_rows(j_set).select_columns(j_set);
    let Some((g_isqrt, g_inv)) = gram_roots(&gram_g) else {
        return Ok(PairEval::RankDeficient);
    };
    let Some((h_isqrt, h_inv)) = gram_roots(&gram_h) else {
        return Ok(PairEval::RankDeficient);
    };
    let k = inst.cross().select_rows(i_set).select_columns(j_set);
    let bm = &g_isqrt * &k * &h_isqrt;
    let left_side = a <= b;
    let s = if left_side { &bm * bm.transpose() } else { bm.transpose() * &bm };
    let s = (&s + s.transpose()) * 0.5;
    let (vals, vecs) = sym_eig(&s).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let dim = vals.len();
    let rho = vals[dim - 1].max(0.0);
    if let Some(lambda) = incumbent {
        if lambda < 0.0 && rho <= lambda * lambda + 1e-12 {
            return Ok(PairEval::Pruned { mu: -rho.sqrt() });
        }
    }
    if rho <= 0.0 {
        return Ok(PairEval::Infeasible { mu: 0.0 });
    }
    let mu = -rho.sqrt();
    let top: Vec<usize> = (0..dim).filter(|&t| vals[t] >= rho - 1e-9 * rho).collect();
    let basis = vecs.select_columns(&top);

    // rows 0..b hold y, rows b..b+a hold x
    let a_x = &h_inv * k.transpose();
    let a_y = &g_inv * &k;
    let mut w = Mat::zeros(a + b, top.len());
    if left_side {
        let xs = &g_isqrt * &basis;
        let ys = (&a_x * &xs) / mu;
        w.rows_mut(0, b).copy_from(&ys);
        w.rows_mut(b, a).copy_from(&xs);
    } else {
        let ys = &h_isqrt * &basis;
        let xs = (&a_y * &ys) / mu;
        w.rows_mut(0, b).copy_from(&ys);
        w.rows_mut(b, a).copy_from(&xs);
    }

    let z = if top.len() == 1 {
        let col = w.column(0).into_owned();
        let scale = col.amax();
        if col.min() >= -1e-10 * scale {
            Some(col.map(|t| t.max(0.0)))
        } else if col.max() <= 1e-10 * scale {
            Some(col.map(|t| (-t).max(0.0)))
        } else {
            None
        }
    } else {
        feasibility_check(&orth_basis(&w, 1e-12))
    };
    let Some(z) = z else {
        return Ok(PairEval::Infeasible { mu });
    };
    let y = z.rows(0, b).into_owned();
    let x = z.rows(b, a).into_owned();
    let u = &g_bar * x;
    let v = &h_bar * y;
    let (nu, nv) = (u.norm(), v.norm());
    if nu < 1e-12 || nv < 1e-12 {
        return Ok(PairEval::Infeasible { mu });
    }
    Ok(PairEval::Candidate {
        mu,
        u: u / nu,
        v: v / nv,
    })
}

/// A nonnegative vector in the span of the orthonormal columns of `v`, found
/// by `min ‖(VVᵀ − I)z‖` over `z ≥ 0, eᵀz = 1`.
pub fn feasibility_check(v: &Mat) -> Option<Vector> {
    let d = v.nrows();
    if v.ncols() == 0 {
        return None;
    }
    let r = v * v.transpose() - Mat::identity(d, d);
    normalized_nnls(&r, &Vector::from_element(d, 1.0), 1e-7)
}

/// Snap a nearly critical pair onto the exact critical pair of its face.
///
/// Supports are read off the generator coefficients at a few thresholds; the
/// best face candidate that passes the KKT test and does not increase the
/// value is returned.
pub fn polish_pair(inst: &SVInstance, u: &Vector, v: &Vector) -> Option<(Vector, Vector)> {
    let (_, x) = inst.p().project(u);
    let (_, y) = inst.q().project(v);
    let (xm, ym) = (x.amax(), y.amax());
    let base = inst.value(u, v);
    let mut best: Option<(f64, Vector, Vector)> = None;
    let mut tried: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for thr in [1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 1e-2] {
        let i_set: Vec<usize> = (0..x.len()).filter(|&i| x[i] > thr * xm).collect();
        let j_set: Vec<usize> = (0..y.len()).filter(|&j| y[j] > thr * ym).collect();
        if tried.iter().any(|(a, b)| *a == i_set && *b == j_set) {
            continue;
        }
        tried.push((i_set.clone(), j_set.clone()));
        if let Ok(PairEval::Candidate { u: cu, v: cv, .. }) = eval_support_pair(inst, &i_set, &j_set, None) {
            let val = inst.value(&cu, &cv);
            if val > base + 1e-9 * inst.norm().max(1.0) {
                continue;
            }
            if kkt_residual(inst, &cu, &cv).map_or(true, |r| r > CANDIDATE_KKT) {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _, _)| val < *b) {
                best = Some((val, cu, cv));
            }
        }
    }
    best.map(|(_, u, v)| (u, v))
}

/// Visit support pairs in enumeration order; `f` returns false to stop.
fn for_each_pair(
    p: usize,
    q: usize,
    m: usize,
    n: usize,
    bound: usize,
    descending: bool,
    mut f: impl FnMut(&[usize], &[usize]) -> bool,
) {
    let max_k = bound.min(p.min(m) + q.min(n));
    if max_k < 3 {
        return;
    }
    let ks: Vec<usize> = if descending {
        (3..=max_k).rev().collect()
    } else {
        (3..=max_k).collect()
    };
    for k in ks {
        let lo = 1.max(k.saturating_sub(q.min(n)));
        let hi = p.min(m).min(k - 1);
        for a in lo..=hi {
            let b = k - a;
            let mut i_set: Vec<usize> = (0..a).collect();
            loop {
                let mut j_set: Vec<usize> = (0..b).collect();
                loop {
                    if !f(&i_set, &j_set) {
                        return;
                    }
                    if !next_combination(&mut j_set, q) {
                        break;
                    }
                }
                if !next_combination(&mut i_set, p) {
                    break;
                }
            }
        }
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn mask(set: &[usize]) -> u128 {
    set.iter().fold(0u128, |m, &i| m | (1u128 << i))
}

struct Incumbent {
    lambda: f64,
    u: Vector,
    v: Vector,
}

pub fn solve_bfas(inst: &SVInstance, opts: &BfasOptions) -> Result<(Solution, BfasReport)> {
    let start = Instant::now();
    let (min_entry, gi, hj) = inst.min_cross_entry();
    if min_entry >= 0.0 {
        return Err(Error::Precondition("GᵀAH is nonnegative; the minimal entry is the answer".into()));
    }
    let (keep_p, keep_q) = if opts.drop_dominated {
        dominated_generators(inst)
    } else {
        ((0..inst.p().num_generators()).collect(), (0..inst.q().num_generators()).collect())
    };
    let work = inst.with_cones(inst.p().restrict(&keep_p), inst.q().restrict(&keep_q));
    let (p, q) = (work.p().num_generators(), work.q().num_generators());
    let bound = saddle_cardinality_bound(inst);
    let prune = opts.subset_prune && p <= 128 && q <= 128;

    let mut report = BfasReport {
        generators_kept: (p, q),
        ..Default::default()
    };
    let mut best = Incumbent {
        lambda: min_entry,
        u: inst.p().generator(gi),
        v: inst.q().generator(hj),
    };
    let mut dominators: Vec<(u128, u128)> = Vec::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;

    let mut batch: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(BATCH);
    let mut timed_out = false;
    let process = |batch: &mut Vec<(Vec<usize>, Vec<usize>)>,
                   best: &mut Incumbent,
                   report: &mut BfasReport,
                   dominators: &mut Vec<(u128, u128)>| {
        let snapshot = best.lambda;
        let evals: Vec<Result<PairEval>> = pool.install(|| {
            batch
                .par_iter()
                .map(|(i_set, j_set)| eval_support_pair(&work, i_set, j_set, Some(snapshot)))
                .collect()
        });
        for ((i_set, j_set), ev) in batch.iter().zip(evals) {
            report.pairs_evaluated += 1;
            let dominated = match ev {
                Err(_) => {
                    report.eigen_failures += 1;
                    false
                }
                Ok(PairEval::RankDeficient) => {
                    report.rank_deficient += 1;
                    false
                }
                Ok(PairEval::Pruned { .. }) => {
                    report.pairs_pruned += 1;
                    true
                }
                Ok(PairEval::Infeasible { mu }) => mu >= best.lambda,
                Ok(PairEval::Candidate { u, v, .. }) => {
                    report.candidates += 1;
                    let val = inst.value(&u, &v);
                    if kkt_residual(inst, &u, &v).is_ok_and(|r| r <= CANDIDATE_KKT) {
                        report.critical_values.push(val);
                        if val < best.lambda - IMPROVE_TOL {
                            *best = Incumbent { lambda: val, u, v };
                        }
                    }
                    true
                }
            };
            if prune && dominated {
                dominators.push((mask(i_set), mask(j_set)));
            }
        }
        batch.clear();
        if let Some(cb) = &opts.progress {
            cb(&BfasProgress {
                pairs_evaluated: report.pairs_evaluated,
                incumbent: best.lambda,
                elapsed: start.elapsed().as_secs_f64(),
            });
        }
    };

    for_each_pair(p, q, work.m(), work.n(), bound, prune, |i_set, j_set| {
        if prune {
            let (mi, mj) = (mask(i_set), mask(j_set));
            if dominators.iter().any(|&(di, dj)| mi & !di == 0 && mj & !dj == 0) {
                report.subset_skipped += 1;
                return true;
            }
        }
        batch.push((i_set.to_vec(), j_set.to_vec()));
        if batch.len() == BATCH {
            process(&mut batch, &mut best, &mut report, &mut dominators);
            if opts.time_limit.is_some_and(|t| start.elapsed() > t) {
                timed_out = true;
                return false;
            }
        }
        true
    });
    if !timed_out && !batch.is_empty() {
        process(&mut batch, &mut best, &mut report, &mut dominators);
    }

    report.complete = !timed_out && report.eigen_failures == 0;
    report.elapsed = start.elapsed().as_secs_f64();
    report.critical_values.sort_by(f64::total_cmp);
    report.critical_values.dedup_by(|a, b| (*a - *b).abs() <= 1e-10);
    let status = if report.complete {
        Status::ExactGlobal
    } else {
        Status::BoundPair {
            lower: -inst.norm(),
            upper: best.lambda,
        }
    };
    let sol = Solution::certify(inst, &best.u, &best.v, status, report.elapsed)?;
    Ok((sol, report))
}
