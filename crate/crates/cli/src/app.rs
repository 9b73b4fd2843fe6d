//! Argument definitions and subcommand dispatch.

use crate::bench::{run_suite, write_csv, Suite};
use crate::error::{CliError, CliResult};
use crate::gen::{generate, GenKind, GenParams};
use crate::matfile::read_matrix;
use crate::pipeline::{solve, solve_angle, Algo, Preset, RunConfig};
use crate::report::{OutputFormat, Report, ReportContext};
use clap::{Args, Parser, Subcommand};
use conesv_core::cones::{make_cone, orthant};
use conesv_core::instance::SVInstance;
use conesv_core::numerics::Mat;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "conesv", version, about = "Least singular value of a matrix restricted to two polyhedral cones")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// min ⟨u, A v⟩ over unit u ∈ cone(G), v ∈ cone(H).
    Solve {
        a: PathBuf,
        g: PathBuf,
        h: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Maximal angle between cone(G) and cone(H).
    Angle {
        g: PathBuf,
        h: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Least Pareto singular value of A (both cones orthants).
    Psv {
        a: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a generated instance and its manifest into a directory.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        /// Graph rows for biclique instances (defaults to n).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        density: Option<f64>,
        /// Planted block size as ROWSxCOLS.
        #[arg(long, value_parser = parse_block)]
        planted: Option<(usize, usize)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run a benchmark suite and print a CSV table.
    Bench {
        suite: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for per-run solver traces.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "auto")]
    pub algo: Algo,
    /// Relative gap for branch and bound.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "CONESV_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub output: OutputFormat,
    /// SRPL prox weights.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Leave wall time out of reports so they are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

impl Common {
    pub fn run_config(&self) -> CliResult<RunConfig> {
        if self.threads == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Input("--tol must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::Input("--time-limit must be positive".into()));
        }
        Ok(RunConfig {
            algo: self.algo,
            tol: self.tol,
            time_limit: self.time_limit,
            restarts: self.restarts.max(1),
            seed: self.seed,
            threads: self.threads,
            preset: self.preset,
            ..RunConfig::default()
        })
    }
}

fn parse_block(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X', ',']).ok_or("expected ROWSxCOLS")?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(r)?, p(c)?))
}

pub struct Completed {
    pub stdout: String,
    pub code: i32,
}

fn solved(command: &str, inst: &SVInstance, common: &Common, angle: bool) -> CliResult<Completed> {
    let cfg = common.run_config()?;
    let out = if angle { solve_angle(inst, &cfg)? } else { solve(inst, &cfg)? };
    let report = Report::new(
        inst,
        &out,
        &ReportContext {
            command,
            algo: cfg.algo,
            seed: cfg.seed,
            threads: cfg.threads,
            timing: !common.no_timing,
        },
    );
    let mut stdout = report.render(common.output);
    if !stdout.ends_with('\n') {
        stdout.push('\n');
    }
    Ok(Completed {
        stdout,
        code: if report.is_bound_only() { 2 } else { 0 },
    })
}

fn cone(path: &Path) -> CliResult<conesv_core::cones::PolyhedralCone> {
    Ok(make_cone(&read_matrix(path)?)?.with_label(path.display().to_string()))
}

pub fn run(cli: &Cli) -> CliResult<Completed> {
    match &cli.command {
        Command::Solve { a, g, h, common } => {
            let inst = SVInstance::new(read_matrix(a)?, cone(g)?, cone(h)?)?;
            solved("solve", &inst, common, false)
        }
        Command::Angle { g, h, common } => {
            let (p, q) = (cone(g)?, cone(h)?);
            if p.dim() != q.dim() {
                return Err(CliError::Input(format!(
                    "cones live in different spaces: ℝ^{} and ℝ^{}",
                    p.dim(),
                    q.dim()
                )));
            }
            let n = p.dim();
            let inst = SVInstance::new(Mat::identity(n, n), p, q)?;
            solved("angle", &inst, common, true)
        }
        Command::Psv { a, common } => {
            let a = read_matrix(a)?;
            let (m, n) = a.shape();
            let inst = SVInstance::new(a, orthant(m)?, orthant(n)?)?;
            solved("psv", &inst, common, false)
        }
        Command::Gen {
            kind,
            n,
            m,
            density,
            planted,
            seed,
            out,
        } => {
            let params = GenParams {
                n: *n,
                m: *m,
                density: *density,
                planted: *planted,
                seed: *seed,
            };
            let manifest = generate(*kind, &params, out)?;
            Ok(Completed {
                stdout: serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
                code: 0,
            })
        }
        Command::Bench {
            suite,
            csv,
            trace_dir,
            common,
        } => {
            let cfg = common.run_config()?;
            let parsed = Suite::read(suite)?;
            let base = suite.parent().unwrap_or(Path::new("."));
            let rows = run_suite(&parsed, base, &cfg, trace_dir.as_deref())?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).map_err(|e| CliError::Input(e.to_string()))?;
            let table = String::from_utf8(buf).expect("csv is utf-8");
            let stdout = match csv {
                Some(path) => {
                    std::fs::write(path, &table).map_err(|e| CliError::io(path, e))?;
                    String::new()
                }
                None => table,
            };
            Ok(Completed { stdout, code: 0 })
        }
    }
}
