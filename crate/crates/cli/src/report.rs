//! JSON and text rendering of a solve.

use crate::pipeline::{Algo, Outcome, Stage};
use conesv_core::instance::{SVInstance, Status};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

pub const SCHEMA: &str = "cone-sv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub upper: Option<f64>,
}

impl From<Status> for StatusReport {
    fn from(s: Status) -> Self {
        let (lower, upper) = match s {
            Status::BoundPair { lower, upper } => (Some(lower), Some(upper)),
            _ => (None, None),
        };
        StatusReport {
            kind: s.name().to_string(),
            lower,
            upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supports {
    pub p: Vec<usize>,
    pub q: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub algo: String,
    pub stage: String,
    pub dims: Dims,
    pub lambda: f64,
    /// Radians.
    pub angle: f64,
    /// `angle / π`.
    pub angle_pi: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub kkt_residual: f64,
    pub status: StatusReport,
    pub supports: Supports,
    /// `null` when timing is suppressed for reproducible output.
    pub wall_time: Option<f64>,
    pub seed: u64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restarts: Option<usize>,
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub struct ReportContext<'a> {
    pub command: &'a str,
    pub algo: Algo,
    pub seed: u64,
    pub threads: usize,
    pub timing: bool,
}

impl Report {
    pub fn new(inst: &SVInstance, out: &Outcome, ctx: &ReportContext) -> Report {
        let sol = &out.solution;
        let angle = sol.angle();
        Report {
            schema: SCHEMA.to_string(),
            command: ctx.command.to_string(),
            algo: kebab(&ctx.algo),
            stage: kebab(&out.stage),
            dims: Dims {
                m: inst.m(),
                n: inst.n(),
                p: inst.p().num_generators(),
                q: inst.q().num_generators(),
            },
            lambda: sol.lambda,
            angle,
            angle_pi: angle / PI,
            u: sol.u.iter().copied().collect(),
            v: sol.v.iter().copied().collect(),
            kkt_residual: sol.kkt_residual,
            status: sol.status.into(),
            supports: Supports {
                p: sol.support_i.clone(),
                q: sol.support_j.clone(),
            },
            wall_time: ctx.timing.then_some(sol.wall_time),
            seed: ctx.seed,
            threads: ctx.threads,
            nodes: out.nodes,
            restarts: out.restarts,
        }
    }

    pub fn is_bound_only(&self) -> bool {
        self.status.lower.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let vec = |x: &[f64]| x.iter().map(|t| format!("{t:.8}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "lambda    {:.10}", self.lambda);
        let _ = writeln!(s, "angle     {:.6}π", self.angle_pi);
        let _ = write!(s, "status    {}", self.status.kind);
        if let (Some(lo), Some(hi)) = (self.status.lower, self.status.upper) {
            let _ = write!(s, " [{lo:.10}, {hi:.10}]");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "stage     {}", self.stage);
        let _ = writeln!(s, "kkt       {:.3e}", self.kkt_residual);
        let _ = writeln!(s, "u         {}", vec(&self.u));
        let _ = writeln!(s, "v         {}", vec(&self.v));
        let _ = writeln!(s, "supports  P{:?} Q{:?}", self.supports.p, self.supports.q);
        if let Some(n) = self.nodes {
            let _ = writeln!(s, "nodes     {n}");
        }
        if let Some(r) = self.restarts {
            let _ = writeln!(s, "restarts  {r}");
        }
        if let Some(t) = self.wall_time {
            let _ = writeln!(s, "time      {t:.3}s");
        }
        s
    }

    pub fn render(&self, fmt: OutputFormat) -> String {
        match fmt {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Text => self.to_text(),
        }
    }
}

/// Stage label as written in reports and bench tables.
pub fn stage_name(stage: Stage) -> String {
    kebab(&stage)
}
