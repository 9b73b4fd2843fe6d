//! Alternating optimization with extrapolation and restarts.
//!
//! Each half-step minimizes a linear function over the unit sphere of one
//! cone; extrapolated points feed the next cost. When the objective rises the
//! step is rolled back and the extrapolation weight is reduced.

use crate::bfas::polish_pair;
use crate::cones::{sphere_linmin_warm, ConeOracle};
use crate::error::{Error, Result};
use crate::instance::{SVInstance, Solution, Status};
use crate::numerics::{Mat, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::Write;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct EaoConfig {
    /// Iteration cap `K`.
    pub max_iter: usize,
    pub delta: f64,
    pub beta0: f64,
    pub eta: f64,
    pub gamma: f64,
    pub restarts: usize,
    pub seed: u64,
    pub threads: usize,
    /// Multistart stops launching restarts once this is exceeded.
    pub time_budget: Option<Duration>,
    /// Multistart also stops once a restart reaches a value at or below this.
    pub stop_at: Option<f64>,
    /// Snap the final pair onto the exact critical pair of its face.
    pub polish: bool,
}

impl Default for EaoConfig {
    fn default() -> Self {
        EaoConfig {
            max_iter: 500,
            delta: 1e-6,
            beta0: 0.5,
            eta: 2.0,
            gamma: 1.05,
            restarts: 1,
            seed: 0,
            threads: 1,
            time_budget: None,
            stop_at: None,
            polish: true,
        }
    }
}

impl EaoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("K must be at least 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        if !(self.eta > self.gamma && self.gamma > 1.0) {
            return Err(Error::InvalidInput("need eta > gamma > 1".into()));
        }
        // β0 = 0 turns extrapolation off and is allowed
        if !(0.0..=1.0).contains(&self.beta0) {
            return Err(Error::InvalidInput("beta0 must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub e: f64,
    pub beta: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct EaoRun {
    pub u: Vector,
    pub v: Vector,
    pub value: f64,
    pub trace: Vec<TraceRow>,
}

/// One E-AO run from `v0` on arbitrary cones accessed through oracles.
/// Returns the best pair visited.
pub fn eao_core(a: &Mat, p: &dyn ConeOracle, q: &dyn ConeOracle, v0: &Vector, cfg: &EaoConfig) -> EaoRun {
    let at = a.transpose();
    let mut u = Vector::zeros(a.nrows());
    let mut v = Vector::zeros(a.ncols());
    let mut ve = v0.clone();
    let mut beta = cfg.beta0;
    let mut beta_p = beta;
    let mut up = u.clone();
    let mut vp = v.clone();
    let mut rs = false;
    let mut e: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vector, Vector)> = None;
    let (mut hint_p, mut hint_q) = (None, None);
    let mut k = 1;
    while k <= cfg.max_iter
        && (rs
            || (&u - &up).norm() >= cfg.delta
            || (&v - &vp).norm() >= cfg.delta
            || k <= 3
            || e[k - 3] - e[k - 2] >= cfg.delta * e[k - 3])
    {
        up = u.clone();
        u = sphere_linmin_warm(p, &(a * &ve), &mut hint_p);
        let ue = &u + (&u - &up) * beta;

        vp = v.clone();
        v = sphere_linmin_warm(q, &(&at * &ue), &mut hint_q);
        ve = &v + (&v - &vp) * beta;

        let mut ek = u.dot(&(a * &v));
        if best.as_ref().is_none_or(|(b, _, _)| ek < *b) {
            best = Some((ek, u.clone(), v.clone()));
        }
        rs = false;
        if k >= 2 && ek > e[k - 2] && beta > 0.0 {
            u = up.clone();
            v = vp.clone();
            ve = vp.clone();
            beta_p = beta / cfg.eta;
            beta = 0.0;
            rs = true;
            ek = e[k - 2];
        } else {
            beta = (cfg.gamma * beta_p).min(1.0);
            beta_p = beta;
        }
        e.push(ek);
        trace.push(TraceRow {
            iteration: k,
            e: ek,
            beta,
            restarted: rs,
        });
        k += 1;
    }
    let (value, u, v) = best.expect("at least one iteration runs");
    EaoRun { u, v, value, trace }
}

/// Starting point in Q for a Gaussian `u0`: the minimizer of `⟨u0, Av⟩` over
/// the unit ball of Q, or the best extreme ray when that minimizer is zero.
pub fn initial_v(a: &Mat, q: &dyn ConeOracle, u0: &Vector) -> Vector {
    let c = a.tr_mul(u0);
    let p = q.project(&(-&c));
    let n = p.norm();
    if n > 1e-12 * c.norm().max(1e-300) {
        p / n
    } else {
        q.extreme_minimizer(&c)
    }
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Best of several E-AO runs from Gaussian starts, one RNG stream per
/// restart. Ties are broken by restart index. Returns the winning run and
/// the number of restarts performed.
pub fn multistart_core(a: &Mat, p: &dyn ConeOracle, q: &dyn ConeOracle, cfg: &EaoConfig) -> Result<(EaoRun, usize)> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
    let chunk = cfg.threads.max(1);
    let mut best: Option<(EaoRun, usize)> = None;
    let mut done = 0;
    while done < cfg.restarts.max(1) {
        let hi = (done + chunk).min(cfg.restarts.max(1));
        let runs: Vec<EaoRun> = pool.install(|| {
            (done..hi)
                .into_par_iter()
                .map(|r| {
                    let mut rng = restart_rng(cfg.seed, r);
                    let u0 = Vector::from_fn(a.nrows(), |_, _| StandardNormal.sample(&mut rng));
                    let v0 = initial_v(a, q, &u0);
                    eao_core(a, p, q, &v0, cfg)
                })
                .collect()
        });
        for (offset, run) in runs.into_iter().enumerate() {
            if best.as_ref().is_none_or(|(b, _)| run.value < b.value) {
                best = Some((run, done + offset));
            }
        }
        done = hi;
        let reached = cfg.stop_at.is_some_and(|t| best.as_ref().is_some_and(|(b, _)| b.value <= t));
        if reached || cfg.time_budget.is_some_and(|t| start.elapsed() >= t) {
            break;
        }
    }
    let (run, _) = best.expect("at least one restart runs");
    Ok((run, done))
}

/// Turn a heuristic pair on a polyhedral instance into a certified solution.
/// When the best generator pair beats the heuristic it seeds one more E-AO
/// run, since that pair is rarely critical; the result is then polished.
pub(crate) fn finish_heuristic(inst: &SVInstance, u: &Vector, v: &Vector, cfg: &EaoConfig, start: Instant) -> Result<Solution> {
    let (mut u, mut v) = (u.clone(), v.clone());
    let (min_entry, _, j) = inst.min_cross_entry();
    if min_entry < inst.value(&u, &v) {
        let run = eao_core(inst.a(), inst.p(), inst.q(), &inst.q().generator(j), cfg);
        u = run.u;
        v = run.v;
    }
    if cfg.polish {
        if let Some((pu, pv)) = polish_pair(inst, &u, &v) {
            if inst.value(&pu, &pv) <= inst.value(&u, &v) + 1e-12 {
                u = pu;
                v = pv;
            }
        }
    }
    Solution::certify(inst, &u, &v, Status::Heuristic, start.elapsed().as_secs_f64())
}

pub fn eao_run(inst: &SVInstance, v0: &Vector, cfg: &EaoConfig) -> Result<(Solution, Vec<TraceRow>)> {
    cfg.validate()?;
    let start = Instant::now();
    if (v0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput("v0 must be a unit vector".into()));
    }
    let run = eao_core(inst.a(), inst.p(), inst.q(), v0, cfg);
    let sol = finish_heuristic(inst, &run.u, &run.v, cfg, start)?;
    Ok((sol, run.trace))
}

pub fn multistart_eao(inst: &SVInstance, cfg: &EaoConfig) -> Result<Solution> {
    multistart_eao_traced(inst, cfg).map(|(sol, _, _)| sol)
}

/// [`multistart_eao`] that also returns the trace of the winning restart and
/// the number of restarts performed.
pub fn multistart_eao_traced(inst: &SVInstance, cfg: &EaoConfig) -> Result<(Solution, Vec<TraceRow>, usize)> {
    let start = Instant::now();
    let (run, restarts) = multistart_core(inst.a(), inst.p(), inst.q(), cfg)?;
    let sol = finish_heuristic(inst, &run.u, &run.v, cfg, start)?;
    Ok((sol, run.trace, restarts))
}

pub fn write_trace_csv(trace: &[TraceRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iteration,e_k,beta,restarted")?;
    for r in trace {
        writeln!(out, "{},{:.17e},{},{}", r.iteration, r.e, r.beta, u8::from(r.restarted))?;
    }
    Ok(())
}
