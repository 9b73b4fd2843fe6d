//! Preprocessing followed by the selected solver.

use crate::error::CliResult;
use clap::ValueEnum;
use conesv_core::bfas::{solve_bfas, BfasOptions};
use conesv_core::bnb::{solve_bnb, BnbOptions, NodeLogRow};
use conesv_core::cones::{ray_subproblem, sphere_linmin};
use conesv_core::eao::{multistart_eao_traced, EaoConfig, TraceRow};
use conesv_core::instance::{check_extreme_case, check_nonnegative_case, ExtremeMode, SVInstance, Solution, Status};
use conesv_core::srpl::{multistart_srpl_traced, SrplConfig, SrplTraceRow};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Bfas,
    Bnb,
    Eao,
    Srpl,
    Auto,
}

/// SRPL prox weights tuned per instance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SchurOrthant,
    SchurSchur,
    Circulant,
    MatrixCone,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algo: Algo,
    /// BnB relative gap.
    pub tol: f64,
    pub time_limit: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
    pub threads: usize,
    pub preset: Option<Preset>,
    /// Largest `p + q` routed to enumeration by `auto`.
    pub auto_cap: usize,
    pub extreme: ExtremeMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algo::Auto,
            tol: 1e-6,
            time_limit: None,
            restarts: 32,
            seed: 0,
            threads: 1,
            preset: None,
            auto_cap: 24,
            extreme: ExtremeMode::Deterministic,
        }
    }
}

impl RunConfig {
    fn budget(&self) -> Option<Duration> {
        self.time_limit.map(Duration::from_secs_f64)
    }

    pub fn eao_config(&self) -> EaoConfig {
        EaoConfig {
            restarts: self.restarts,
            seed: self.seed,
            threads: self.threads,
            time_budget: self.budget(),
            ..Default::default()
        }
    }

    pub fn srpl_config(&self) -> SrplConfig {
        let base = match self.preset {
            Some(Preset::SchurOrthant) | None => SrplConfig::schur_orthant(),
            Some(Preset::SchurSchur) => SrplConfig::schur_schur(),
            Some(Preset::Circulant) => SrplConfig::circulant(),
            Some(Preset::MatrixCone) => SrplConfig::matrix_cone(),
        };
        SrplConfig {
            restarts: self.restarts,
            seed: self.seed,
            threads: self.threads,
            time_budget: self.budget(),
            ..base
        }
    }
}

/// Which part of the pipeline produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    NonnegativeCase,
    ExtremeCase,
    GeneratorScan,
    Bfas,
    Bnb,
    Eao,
    Srpl,
}

/// Per-solver trace kept for the bench harness.
#[derive(Debug, Clone)]
pub enum Trace {
    Eao(Vec<TraceRow>),
    Srpl(Vec<SrplTraceRow>),
    Bnb(Vec<NodeLogRow>),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: Solution,
    pub stage: Stage,
    pub restarts: Option<usize>,
    pub nodes: Option<usize>,
    pub trace: Option<Trace>,
}

impl Outcome {
    fn plain(solution: Solution, stage: Stage) -> Self {
        Outcome {
            solution,
            stage,
            restarts: None,
            nodes: None,
            trace: None,
        }
    }
}

/// The two preprocessing cases; `None` when neither applies.
pub fn preprocess(inst: &SVInstance, cfg: &RunConfig) -> CliResult<Option<Outcome>> {
    if let Some(sol) = check_nonnegative_case(inst, 0.0)?.certificate {
        return Ok(Some(Outcome::plain(sol, Stage::NonnegativeCase)));
    }
    if let Some(sol) = check_extreme_case(inst, cfg.extreme)?.certificate {
        return Ok(Some(Outcome::plain(sol, Stage::ExtremeCase)));
    }
    Ok(None)
}

pub fn solve(inst: &SVInstance, cfg: &RunConfig) -> CliResult<Outcome> {
    match preprocess(inst, cfg)? {
        Some(out) => Ok(out),
        None => run_solver(inst, cfg),
    }
}

/// Maximal angle between two cones. In ambient dimension at most three one
/// member of an optimal pair is an extreme ray, so scanning the generators
/// of both cones is exact.
pub fn solve_angle(inst: &SVInstance, cfg: &RunConfig) -> CliResult<Outcome> {
    if let Some(out) = preprocess(inst, cfg)? {
        return Ok(out);
    }
    if inst.m() <= 3 && cfg.algo == Algo::Auto {
        return generator_scan(inst);
    }
    run_solver(inst, cfg)
}

pub fn generator_scan(inst: &SVInstance) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut best: Option<(f64, _, _)> = None;
    for i in 0..inst.p().num_generators() {
        let u = inst.p().generator(i);
        let (v, val) = ray_subproblem(inst.a(), &u, inst.q());
        if best.as_ref().is_none_or(|b| val < b.0) {
            best = Some((val, u, v));
        }
    }
    for j in 0..inst.q().num_generators() {
        let v = inst.q().generator(j);
        let u = sphere_linmin(inst.p(), &(inst.a() * &v));
        let val = inst.value(&u, &v);
        if best.as_ref().is_none_or(|b| val < b.0) {
            best = Some((val, u, v));
        }
    }
    let (_, u, v) = best.expect("cones have generators");
    let sol = Solution::certify(inst, &u, &v, Status::ExactGlobal, start.elapsed().as_secs_f64())?;
    Ok(Outcome::plain(sol, Stage::GeneratorScan))
}

/// The selected solver without preprocessing. Exact solvers require that
/// preprocessing found nothing.
pub fn run_solver(inst: &SVInstance, cfg: &RunConfig) -> CliResult<Outcome> {
    let algo = match cfg.algo {
        Algo::Auto if inst.p().num_generators() + inst.q().num_generators() <= cfg.auto_cap => Algo::Bfas,
        Algo::Auto => Algo::Bnb,
        other => other,
    };
    Ok(match algo {
        Algo::Bfas => {
            let opts = BfasOptions {
                time_limit: cfg.budget(),
                threads: cfg.threads,
                ..Default::default()
            };
            let (sol, report) = solve_bfas(inst, &opts)?;
            Outcome {
                nodes: Some(report.pairs_evaluated as usize),
                ..Outcome::plain(sol, Stage::Bfas)
            }
        }
        Algo::Bnb => {
            let opts = BnbOptions {
                gap_tol: cfg.tol,
                time_limit: cfg.budget(),
                warm_start: Some(EaoConfig {
                    restarts: cfg.restarts.clamp(1, 16),
                    seed: cfg.seed,
                    threads: cfg.threads,
                    ..Default::default()
                }),
                ..Default::default()
            };
            let (sol, report) = solve_bnb(inst, &opts)?;
            Outcome {
                nodes: Some(report.nodes),
                trace: Some(Trace::Bnb(report.log)),
                ..Outcome::plain(sol, Stage::Bnb)
            }
        }
        Algo::Eao => {
            let (sol, trace, restarts) = multistart_eao_traced(inst, &cfg.eao_config())?;
            Outcome {
                restarts: Some(restarts),
                trace: Some(Trace::Eao(trace)),
                ..Outcome::plain(sol, Stage::Eao)
            }
        }
        Algo::Srpl => {
            let (sol, trace, restarts) = multistart_srpl_traced(inst, &cfg.srpl_config())?;
            Outcome {
                restarts: Some(restarts),
                trace: Some(Trace::Srpl(trace)),
                ..Outcome::plain(sol, Stage::Srpl)
            }
        }
        Algo::Auto => unreachable!("auto resolved above"),
    })
}
