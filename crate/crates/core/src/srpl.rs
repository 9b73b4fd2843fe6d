//! Sequential regularized partial linearization.
//!
//! Works on the fractional form `Φ(x, y) = ⟨Gx, AHy⟩ / (‖Gx‖‖Hy‖)` over two
//! probability simplices. Each iteration linearizes the Dinkelbach function
//! in one block at a time, takes a proximal step (a simplex projection) and
//! an Armijo backtracking line search along the joint direction.

use crate::eao::{finish_heuristic, EaoConfig};
use crate::error::{Error, Result};
use crate::instance::{SVInstance, Solution};
use crate::numerics::{project_simplex, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use std::io::Write;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct SrplConfig {
    pub mu1: f64,
    pub mu2: f64,
    /// Initial step of the line search.
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
    pub max_iter: usize,
    pub delta: f64,
    pub restarts: usize,
    pub seed: u64,
    pub threads: usize,
    pub time_budget: Option<Duration>,
    pub polish: bool,
}

impl Default for SrplConfig {
    fn default() -> Self {
        SrplConfig {
            mu1: 0.25,
            mu2: 0.01,
            beta: 1.0,
            alpha: 0.001,
            rho: 0.2,
            max_iter: 5000,
            delta: 1e-6,
            restarts: 1,
            seed: 0,
            threads: 1,
            time_budget: None,
            polish: true,
        }
    }
}

impl SrplConfig {
    fn with_mu(mu1: f64, mu2: f64) -> Self {
        SrplConfig {
            mu1,
            mu2,
            ..Default::default()
        }
    }

    pub fn schur_orthant() -> Self {
        Self::with_mu(0.25, 0.01)
    }

    pub fn schur_schur() -> Self {
        Self::with_mu(1.0, 1.0)
    }

    pub fn circulant() -> Self {
        Self::with_mu(0.25, 0.01)
    }

    pub fn matrix_cone() -> Self {
        Self::with_mu(0.1, 5.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu1 >= 0.0
            && self.mu2 >= 0.0
            && self.beta > 0.0
            && self.alpha > 0.0
            && self.alpha < 1.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("SRPL parameters out of range".into()))
        }
    }

    /// Backtracking steps allowed: as many as 60 halvings would shrink.
    pub fn max_backtracks(&self) -> usize {
        (60.0 * std::f64::consts::LN_2 / (1.0 / self.rho).ln()).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrplTraceRow {
    pub iteration: usize,
    pub phi: f64,
    pub l1: f64,
    pub l2: f64,
    /// Accepted step, 0 on the final row.
    pub step: f64,
    /// Right-hand side of the Armijo test for the accepted step.
    pub armijo_bound: f64,
    /// Φ at the accepted point.
    pub phi_next: f64,
}

#[derive(Debug, Clone)]
pub struct SrplRun {
    pub x: Vector,
    pub y: Vector,
    pub value: f64,
    pub trace: Vec<SrplTraceRow>,
}

/// The linear model of one block: `L(d) = ⟨c, d⟩`.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub c: Vector,
}

impl Linearization {
    pub fn eval(&self, d: &Vector) -> f64 {
        self.c.dot(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
}

/// `Φ(x, y)`; fails when either image vanishes.
pub fn phi(inst: &SVInstance, x: &Vector, y: &Vector) -> Result<f64> {
    let gx = inst.p().generators() * x;
    let hy = inst.q().generators() * y;
    let (ngx, nhy) = (gx.norm(), hy.norm());
    if ngx < 1e-14 || nhy < 1e-14 {
        return Err(Error::NonPointedDegeneracy);
    }
    Ok(gx.dot(&(inst.a() * hy)) / (ngx * nhy))
}

/// Coefficients of the block linearization at `(x, y)` with parameter `δ_k`.
pub fn srpl_linearization(inst: &SVInstance, x: &Vector, y: &Vector, delta_k: f64, which: Block) -> Result<Linearization> {
    let gx = inst.p().generators() * x;
    let hy = inst.q().generators() * y;
    let (ngx, nhy) = (gx.norm(), hy.norm());
    if ngx < 1e-14 || nhy < 1e-14 {
        return Err(Error::NonPointedDegeneracy);
    }
    let c = match which {
        Block::X => inst.p().generators().tr_mul(&(inst.a() * &hy - (delta_k * nhy / ngx) * &gx)),
        Block::Y => inst.q().generators().tr_mul(&(inst.a().tr_mul(&gx) - (delta_k * ngx / nhy) * &hy)),
    };
    Ok(Linearization { c })
}

/// `argmin ⟨c, z⟩ + μ/2 ‖z − x‖²` over the simplex.
fn prox_step(x: &Vector, c: &Vector, mu: f64) -> Vector {
    if mu > 0.0 {
        let shifted: Vec<f64> = x.iter().zip(c.iter()).map(|(xi, ci)| xi - ci / mu).collect();
        Vector::from_vec(project_simplex(&shifted))
    } else {
        let mut z = Vector::zeros(x.len());
        z[c.argmin().0] = 1.0;
        z
    }
}

pub fn srpl_core(inst: &SVInstance, x0: &Vector, y0: &Vector, cfg: &SrplConfig) -> Result<SrplRun> {
    cfg.validate()?;
    if !inst.p().is_pointed() || !inst.q().is_pointed() {
        return Err(Error::NotPointed);
    }
    let max_back = cfg.max_backtracks();
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut trace = Vec::new();
    let mut k = 0;
    loop {
        let gx = inst.p().generators() * &x;
        let hy = inst.q().generators() * &y;
        let (ngx, nhy) = (gx.norm(), hy.norm());
        if ngx < 1e-14 || nhy < 1e-14 {
            return Err(Error::NonPointedDegeneracy);
        }
        let phi_k = gx.dot(&(inst.a() * &hy)) / (ngx * nhy);
        let lin1 = srpl_linearization(inst, &x, &y, phi_k, Block::X)?;
        let lin2 = srpl_linearization(inst, &x, &y, phi_k, Block::Y)?;
        let d1 = prox_step(&x, &lin1.c, cfg.mu1) - &x;
        let d2 = prox_step(&y, &lin2.c, cfg.mu2) - &y;
        let (l1, l2) = (lin1.eval(&d1), lin2.eval(&d2));
        let mut row = SrplTraceRow {
            iteration: k,
            phi: phi_k,
            l1: l1.abs(),
            l2: l2.abs(),
            step: 0.0,
            armijo_bound: phi_k,
            phi_next: phi_k,
        };
        if (l1.abs() < cfg.delta && l2.abs() < cfg.delta) || k >= cfg.max_iter {
            trace.push(row);
            break;
        }
        let slope = (l1 + l2) / (ngx * nhy);
        let mut accepted = None;
        let mut t = cfg.beta;
        for _ in 0..=max_back {
            let xt = &x + t * &d1;
            let yt = &y + t * &d2;
            if let Ok(val) = phi(inst, &xt, &yt) {
                let bound = phi_k + cfg.alpha * t * slope;
                if val <= bound {
                    accepted = Some((xt, yt, val, bound, t));
                    break;
                }
            }
            t *= cfg.rho;
        }
        let Some((xt, yt, val, bound, t)) = accepted else {
            // line search failure ends the run as converged
            trace.push(row);
            break;
        };
        row.step = t;
        row.armijo_bound = bound;
        row.phi_next = val;
        trace.push(row);
        x = xt;
        y = yt;
        // keep iterates exactly on the simplex despite rounding
        clamp_simplex(&mut x);
        clamp_simplex(&mut y);
        k += 1;
    }
    let value = phi(inst, &x, &y)?;
    Ok(SrplRun { x, y, value, trace })
}

fn clamp_simplex(z: &mut Vector) {
    z.iter_mut().for_each(|t| *t = t.max(0.0));
    let s = z.sum();
    *z /= s;
}

/// Uniform sample from the probability simplex.
pub fn dirichlet_point(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    let mut z = Vector::from_fn(d, |_, _| Exp1.sample(rng));
    let s: f64 = z.sum();
    z /= s;
    z
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Best of several SRPL runs from Dirichlet starts; returns the winning run
/// and the number of restarts performed.
pub fn multistart_srpl_core(inst: &SVInstance, cfg: &SrplConfig) -> Result<(SrplRun, usize)> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
    let total = cfg.restarts.max(1);
    let chunk = cfg.threads.max(1);
    let (p, q) = (inst.p().num_generators(), inst.q().num_generators());
    let mut best: Option<SrplRun> = None;
    let mut done = 0;
    while done < total {
        let hi = (done + chunk).min(total);
        let runs: Vec<Result<SrplRun>> = pool.install(|| {
            (done..hi)
                .into_par_iter()
                .map(|r| {
                    let mut rng = restart_rng(cfg.seed, r);
                    let x0 = dirichlet_point(&mut rng, p);
                    let y0 = dirichlet_point(&mut rng, q);
                    srpl_core(inst, &x0, &y0, cfg)
                })
                .collect()
        });
        for run in runs {
            let run = run?;
            if best.as_ref().is_none_or(|b| run.value < b.value) {
                best = Some(run);
            }
        }
        done = hi;
        if cfg.time_budget.is_some_and(|t| start.elapsed() >= t) {
            break;
        }
    }
    Ok((best.expect("at least one restart runs"), done))
}

pub fn srpl_run(inst: &SVInstance, x0: &Vector, y0: &Vector, cfg: &SrplConfig) -> Result<(Solution, Vec<SrplTraceRow>)> {
    let start = Instant::now();
    let run = srpl_core(inst, x0, y0, cfg)?;
    let sol = finish(inst, &run, cfg, start)?;
    Ok((sol, run.trace))
}

pub fn multistart_srpl(inst: &SVInstance, cfg: &SrplConfig) -> Result<Solution> {
    multistart_srpl_traced(inst, cfg).map(|(sol, _, _)| sol)
}

/// [`multistart_srpl`] that also returns the trace of the winning restart and
/// the number of restarts performed.
pub fn multistart_srpl_traced(inst: &SVInstance, cfg: &SrplConfig) -> Result<(Solution, Vec<SrplTraceRow>, usize)> {
    let start = Instant::now();
    let (run, restarts) = multistart_srpl_core(inst, cfg)?;
    let sol = finish(inst, &run, cfg, start)?;
    Ok((sol, run.trace, restarts))
}

fn finish(inst: &SVInstance, run: &SrplRun, cfg: &SrplConfig, start: Instant) -> Result<Solution> {
    let u = inst.p().generators() * &run.x;
    let v = inst.q().generators() * &run.y;
    let eao = EaoConfig {
        polish: cfg.polish,
        ..Default::default()
    };
    finish_heuristic(inst, &u.normalize(), &v.normalize(), &eao, start)
}

pub fn write_trace_csv(trace: &[SrplTraceRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "k,phi,abs_l1,abs_l2,t")?;
    for r in trace {
        writeln!(out, "{},{:.17e},{:.6e},{:.6e},{:.6e}", r.iteration, r.phi, r.l1, r.l2, r.step)?;
    }
    Ok(())
}
