//! Exact global minimization of the bilinear form by branch and bound.
//!
//! The problem `min xᵀCy` over `x, y ≥ 0`, `‖Gx‖ ≤ 1`, `‖Hy‖ ≤ 1` with
//! `C = GᵀAH` is searched best-first. Two bounding schemes are available:
//!
//! * [`BoundingScheme::Conical`] (default) splits the generator simplex of one
//!   cone into subcones. The inner minimum over the other cone is a concave,
//!   positively homogeneous function of `y`, so on a subcone it is bounded
//!   below by its linear interpolation at the edge directions; minimizing
//!   that interpolant over the unit ball is a least-distance problem.
//! * [`BoundingScheme::McCormick`] splits coordinate boxes and bounds each box
//!   by an LP in which every product `x_i y_j` with `C_ij ≠ 0` is replaced by
//!   a variable constrained by its McCormick envelope, and each ball by a
//!   pool of supporting halfspaces (Kelley cuts).

mod conical;
mod mccormick;
mod miqcp;

pub use mccormick::{mccormick, McCormick, Plane};
pub use miqcp::{export_miqcp, model_text, read_miqcp, MiqcpModel};

use crate::bfas::polish_pair;
use crate::cones::{is_pointed, PolyhedralCone};
use crate::eao::{multistart_eao, EaoConfig};
use crate::error::{Error, Result};
use crate::instance::{dominated_generators, SVInstance, Solution, Status};
use crate::numerics::{has_full_column_rank, lp_solve, pinv_full_rank, LpStatus, Mat, Vector};
use std::cmp::Ordering;
use std::io::Write;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundingScheme {
    #[default]
    Conical,
    McCormick,
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub max_nodes: Option<usize>,
    pub scheme: BoundingScheme,
    /// LP re-solves per node that may add ball cuts (McCormick only).
    pub cut_rounds: usize,
    /// Multistart E-AO run for the initial incumbent; `None` starts from the
    /// best generator pair.
    pub warm_start: Option<EaoConfig>,
    /// Iterations of the E-AO run started from each LP witness (McCormick
    /// only).
    pub witness_iter: usize,
    pub drop_dominated: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            gap_tol: 1e-6,
            time_limit: None,
            max_nodes: None,
            scheme: BoundingScheme::default(),
            cut_rounds: 4,
            warm_start: Some(EaoConfig {
                restarts: 8,
                ..Default::default()
            }),
            witness_iter: 60,
            drop_dominated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLogRow {
    pub node: usize,
    pub bound: f64,
    /// Smallest bound over the open nodes when this node was processed.
    pub global_lower: f64,
    pub incumbent: f64,
    pub depth: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BnbReport {
    pub nodes: usize,
    pub lp_failures: usize,
    pub lower: f64,
    pub upper: f64,
    pub complete: bool,
    pub log: Vec<NodeLogRow>,
    /// Unit directions `g` of the cuts `gᵀGx ≤ 1` (P side) and `hᵀHy ≤ 1`.
    pub cuts_p: Vec<Vector>,
    pub cuts_q: Vec<Vector>,
}

/// Upper bounds on the generator coefficients of points of the cone with
/// norm at most one: `max x_i` over `x ≥ 0`, `−e ≤ Gx ≤ e`.
pub fn variable_bounds(cone: &PolyhedralCone) -> Result<Vec<f64>> {
    if !is_pointed(cone) {
        return Err(Error::NotPointed);
    }
    let g = cone.generators();
    let (m, p) = g.shape();
    let mut a = Mat::zeros(2 * m, p);
    a.rows_mut(0, m).copy_from(g);
    a.rows_mut(m, m).copy_from(&(-g));
    let b = vec![1.0; 2 * m];
    let bounds = vec![(0.0, f64::INFINITY); p];
    (0..p)
        .map(|i| {
            let mut c = vec![0.0; p];
            c[i] = -1.0;
            let out = lp_solve(&c, &a, &b, &bounds)?;
            match out.status {
                LpStatus::Optimal => Ok(-out.objective),
                LpStatus::Unbounded => Err(Error::NotPointed),
                LpStatus::Infeasible => Err(Error::NumericalFailure("bound LP infeasible".into())),
            }
        })
        .collect()
}

/// Root bounds: the LP bounds, tightened by `x = G⁺u` when G has full
/// column rank.
fn root_bounds(cone: &PolyhedralCone) -> Result<Vec<f64>> {
    let mut b = variable_bounds(cone)?;
    if has_full_column_rank(cone.generators()) {
        let pinv = pinv_full_rank(cone.generators())?;
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = bi.min(pinv.row(i).norm() * (1.0 + 1e-12));
        }
    }
    Ok(b)
}

/// Best pair found so far, stored for the original instance.
struct Incumbent {
    value: f64,
    u: Vector,
    v: Vector,
}

impl Incumbent {
    fn offer(&mut self, inst: &SVInstance, u: &Vector, v: &Vector) {
        let (nu, nv) = (u.norm(), v.norm());
        if !(nu > 1e-12 && nv > 1e-12) {
            return;
        }
        let (u, v) = (u / nu, v / nv);
        let val = inst.value(&u, &v);
        if val < self.value {
            *self = Incumbent { value: val, u, v };
        }
    }
}

/// Open node in a best-first queue: smallest bound first, then the deepest,
/// then the oldest.
struct Queued<T> {
    bound: f64,
    depth: usize,
    id: usize,
    item: T,
}

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Queued<T> {}
impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Queued<T> {
    // BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// State shared by both searches.
struct Search<'a> {
    inst: &'a SVInstance,
    opts: &'a BnbOptions,
    start: Instant,
    inc: Incumbent,
    report: BnbReport,
}

impl Search<'_> {
    fn gap(&self) -> f64 {
        self.opts.gap_tol * self.inc.value.abs().max(1.0)
    }

    fn closes(&self, bound: f64) -> bool {
        bound >= self.inc.value - self.gap()
    }

    fn out_of_budget(&self) -> bool {
        self.opts.time_limit.is_some_and(|t| self.start.elapsed() > t)
            || self.opts.max_nodes.is_some_and(|m| self.report.nodes >= m)
    }

    /// Record a popped node; with best-first order its bound is the global
    /// lower bound.
    fn log(&mut self, id: usize, bound: f64, depth: usize) {
        self.report.nodes += 1;
        self.report.log.push(NodeLogRow {
            node: id,
            bound,
            global_lower: bound,
            incumbent: self.inc.value,
            depth,
            time: self.start.elapsed().as_secs_f64(),
        });
    }
}

pub fn solve_bnb(inst: &SVInstance, opts: &BnbOptions) -> Result<(Solution, BnbReport)> {
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
    if !work.p().is_pointed() || !work.q().is_pointed() {
        return Err(Error::NotPointed);
    }

    let mut inc = Incumbent {
        value: f64::INFINITY,
        u: inst.p().generator(gi),
        v: inst.q().generator(hj),
    };
    inc.offer(inst, &inst.p().generator(gi), &inst.q().generator(hj));
    if let Some(cfg) = &opts.warm_start {
        let sol = multistart_eao(inst, cfg)?;
        inc.offer(inst, &sol.u, &sol.v);
    }
    let mut search = Search {
        inst,
        opts,
        start,
        inc,
        report: BnbReport::default(),
    };
    let (lower, complete) = match opts.scheme {
        BoundingScheme::Conical => conical::search(&mut search, &work)?,
        BoundingScheme::McCormick => mccormick::search(&mut search, &work)?,
    };
    let Search { inc, mut report, .. } = search;
    report.complete = complete;
    report.lower = lower.min(inc.value);
    report.upper = inc.value;

    let (mut u, mut v) = (inc.u, inc.v);
    if let Some((pu, pv)) = polish_pair(inst, &u, &v) {
        if inst.value(&pu, &pv) <= inst.value(&u, &v) + 1e-12 {
            u = pu;
            v = pv;
        }
    }
    let status = if complete {
        Status::ExactGlobal
    } else {
        Status::BoundPair {
            lower: report.lower,
            upper: inst.value(&u, &v),
        }
    };
    let sol = Solution::certify(inst, &u, &v, status, start.elapsed().as_secs_f64())?;
    Ok((sol, report))
}

pub fn write_node_log(log: &[NodeLogRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "node,bound,global_lower,incumbent,depth,time")?;
    for r in log {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{},{:.6}",
            r.node, r.bound, r.global_lower, r.incumbent, r.depth, r.time
        )?;
    }
    Ok(())
}
