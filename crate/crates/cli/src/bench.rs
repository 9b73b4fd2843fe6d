//! Benchmark harness: every (instance, algorithm) cell of a suite under a
//! budget, one CSV row per cell.

use crate::error::{CliError, CliResult};
use crate::gen::{self, GenKind, GenParams};
use crate::matfile::read_matrix;
use crate::pipeline::{solve, Algo, RunConfig, Trace};
use crate::report::stage_name;
use conesv_core::bnb::write_node_log;
use conesv_core::cones::make_cone;
use conesv_core::instance::{SVInstance, Status};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const HEADER: [&str; 18] = [
    "instance",
    "algo",
    "m",
    "n",
    "p",
    "q",
    "lambda",
    "angle_pi",
    "status",
    "lower",
    "upper",
    "elapsed",
    "kkt_residual",
    "stage",
    "nodes",
    "restarts",
    "truth_angle_pi",
    "error",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Generated { kind: GenKind, params: GenParams },
    /// Matrix files, relative to the suite file.
    Files { a: PathBuf, g: PathBuf, h: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteInstance {
    pub name: String,
    #[serde(flatten)]
    pub source: InstanceSource,
    /// Overrides the suite budget for this instance.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suite {
    pub instances: Vec<SuiteInstance>,
    pub algos: Vec<Algo>,
    /// Seconds per cell.
    #[serde(default)]
    pub time_limit: Option<f64>,
    #[serde(default)]
    pub restarts: Option<usize>,
}

impl Suite {
    pub fn read(path: &Path) -> CliResult<Suite> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

/// Instance plus the known optimal angle when there is one.
fn build(source: &InstanceSource, base: &Path) -> CliResult<(SVInstance, Option<f64>)> {
    Ok(match source {
        InstanceSource::Files { a, g, h } => {
            let a = read_matrix(&base.join(a))?;
            let g = read_matrix(&base.join(g))?;
            let h = read_matrix(&base.join(h))?;
            (SVInstance::new(a, make_cone(&g)?, make_cone(&h)?)?, None)
        }
        InstanceSource::Generated { kind, params } => {
            let g = gen::build(*kind, params)?;
            (g.inst, g.truth.map(|t| t.angle_pi))
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub algo: String,
    pub dims: Option<(usize, usize, usize, usize)>,
    pub lambda: Option<f64>,
    pub angle_pi: Option<f64>,
    pub status: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub elapsed: f64,
    pub kkt_residual: Option<f64>,
    pub stage: Option<String>,
    pub nodes: Option<usize>,
    pub restarts: Option<usize>,
    pub truth_angle_pi: Option<f64>,
    pub error: Option<String>,
}

impl BenchRow {
    fn record(&self) -> Vec<String> {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.10}")).unwrap_or_default();
        let u = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let d = self.dims;
        vec![
            self.instance.clone(),
            self.algo.clone(),
            u(d.map(|d| d.0)),
            u(d.map(|d| d.1)),
            u(d.map(|d| d.2)),
            u(d.map(|d| d.3)),
            f(self.lambda),
            f(self.angle_pi),
            self.status.clone(),
            f(self.lower),
            f(self.upper),
            format!("{:.3}", self.elapsed),
            self.kkt_residual.map(|v| format!("{v:.3e}")).unwrap_or_default(),
            self.stage.clone().unwrap_or_default(),
            u(self.nodes),
            u(self.restarts),
            f(self.truth_angle_pi),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn write_trace(dir: &Path, name: &str, trace: &Trace) -> CliResult<()> {
    let path = dir.join(format!("{name}.csv"));
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let out = std::io::BufWriter::new(file);
    match trace {
        Trace::Bnb(log) => write_node_log(log, out),
        Trace::Eao(rows) => conesv_core::eao::write_trace_csv(rows, out),
        Trace::Srpl(rows) => conesv_core::srpl::write_trace_csv(rows, out),
    }
    .map_err(|e| CliError::io(&path, e))
}

fn algo_name(a: Algo) -> String {
    serde_json::to_value(a).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Run every cell. A failing cell becomes a row with status `error`; the
/// remaining cells still run.
pub fn run_suite(suite: &Suite, base: &Path, cfg: &RunConfig, trace_dir: Option<&Path>) -> CliResult<Vec<BenchRow>> {
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut rows = Vec::new();
    for item in &suite.instances {
        let built = build(&item.source, base);
        for &algo in &suite.algos {
            let mut row = BenchRow {
                instance: item.name.clone(),
                algo: algo_name(algo),
                ..Default::default()
            };
            let (inst, truth) = match &built {
                Ok(b) => b,
                Err(e) => {
                    row.status = "error".into();
                    row.error = Some(e.to_string());
                    rows.push(row);
                    continue;
                }
            };
            row.truth_angle_pi = *truth;
            row.dims = Some((inst.m(), inst.n(), inst.p().num_generators(), inst.q().num_generators()));
            let cell = RunConfig {
                algo,
                time_limit: item.time_limit.or(suite.time_limit).or(cfg.time_limit),
                restarts: suite.restarts.unwrap_or(cfg.restarts),
                ..cfg.clone()
            };
            let start = Instant::now();
            let result = solve(inst, &cell);
            row.elapsed = start.elapsed().as_secs_f64();
            match result {
                Ok(out) => {
                    let sol = &out.solution;
                    row.lambda = Some(sol.lambda);
                    row.angle_pi = Some(sol.angle() / PI);
                    row.status = sol.status.name().into();
                    if let Status::BoundPair { lower, upper } = sol.status {
                        row.lower = Some(lower);
                        row.upper = Some(upper);
                    }
                    row.kkt_residual = Some(sol.kkt_residual);
                    row.stage = Some(stage_name(out.stage));
                    row.nodes = out.nodes;
                    row.restarts = out.restarts;
                    if let (Some(dir), Some(trace)) = (trace_dir, &out.trace) {
                        if let Err(e) = write_trace(dir, &format!("{}-{}", item.name, row.algo), trace) {
                            row.error = Some(e.to_string());
                        }
                    }
                }
                Err(e) => {
                    row.status = "error".into();
                    row.error = Some(e.to_string());
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}
