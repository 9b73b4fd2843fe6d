//! Box branch and bound with McCormick envelopes and Kelley cuts.

use super::{root_bounds, Queued, Search};
use crate::eao::{eao_core, EaoConfig};
use crate::error::Result;
use crate::instance::SVInstance;
use crate::numerics::{lp_solve, LpStatus, Mat, Vector};
use std::collections::BinaryHeap;

/// A halfspace `w ≥ cx·x + cy·y + c0` (lower) or `w ≤ …` (upper).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub cx: f64,
    pub cy: f64,
    pub c0: f64,
}

impl Plane {
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.cx * x + self.cy * y + self.c0
    }
}

/// McCormick envelope of `w = xy` on `[lx, ux] × [ly, uy]`.
#[derive(Debug, Clone, Copy)]
pub struct McCormick {
    pub lower: [Plane; 2],
    pub upper: [Plane; 2],
}

pub fn mccormick(lx: f64, ux: f64, ly: f64, uy: f64) -> McCormick {
    McCormick {
        lower: [
            Plane { cx: ly, cy: lx, c0: -lx * ly },
            Plane { cx: uy, cy: ux, c0: -ux * uy },
        ],
        upper: [
            Plane { cx: uy, cy: lx, c0: -lx * uy },
            Plane { cx: ly, cy: ux, c0: -ux * ly },
        ],
    }
}

#[derive(Debug, Clone)]
struct Boxes {
    lx: Vec<f64>,
    ux: Vec<f64>,
    ly: Vec<f64>,
    uy: Vec<f64>,
    /// LP solution `(x, y, w)` when the bound came from a solved LP.
    witness: Option<Vec<f64>>,
}

/// A ball cut `dirᵀGx ≤ 1` stored with its row `Gᵀdir`.
struct Cut {
    dir: Vector,
    row: Vector,
    last_binding: usize,
    permanent: bool,
}

/// Cuts not binding in this many consecutive LPs leave the pool.
const CUT_AGE: usize = 100;

struct Relaxation<'a> {
    c: &'a Mat,
    g: &'a Mat,
    h: &'a Mat,
    terms: Vec<(usize, usize, f64)>,
    /// Cut pools for the x side and the y side.
    cuts: [Vec<Cut>; 2],
    lp_count: usize,
}

enum LpResult {
    Bound(f64, Vec<f64>),
    Infeasible,
    Failed,
}

impl<'a> Relaxation<'a> {
    fn new(c: &'a Mat, g: &'a Mat, h: &'a Mat) -> Self {
        let mut terms = Vec::new();
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                if c[(i, j)] != 0.0 {
                    terms.push((i, j, c[(i, j)]));
                }
            }
        }
        let mut relax = Relaxation {
            c,
            g,
            h,
            terms,
            cuts: [Vec::new(), Vec::new()],
            lp_count: 0,
        };
        // initial pool: the supporting planes at each generator
        for (side, gen) in [(0, g), (1, h)] {
            for k in 0..gen.ncols() {
                relax.add_cut(side, gen.column(k).into_owned(), true);
            }
        }
        relax
    }

    fn generators(&self, side: usize) -> &Mat {
        if side == 0 {
            self.g
        } else {
            self.h
        }
    }

    /// Add the cut with unit normal `dir` unless it is already pooled.
    fn add_cut(&mut self, side: usize, dir: Vector, permanent: bool) -> bool {
        if self.cuts[side].iter().any(|c| c.dir.dot(&dir) > 1.0 - 1e-12) {
            return false;
        }
        let row = self.generators(side).tr_mul(&dir);
        self.cuts[side].push(Cut {
            dir,
            row,
            last_binding: self.lp_count,
            permanent,
        });
        true
    }

    fn pool(&self, side: usize) -> Vec<Vector> {
        self.cuts[side].iter().map(|c| c.dir.clone()).collect()
    }

    fn solve(&mut self, node: &Boxes) -> LpResult {
        let (p, q, k) = (self.c.nrows(), self.c.ncols(), self.terms.len());
        let nvar = p + q + k;
        // cuts that cannot bind anywhere in the box are left out
        let mut included = Vec::new();
        for side in 0..2 {
            let (lo, hi) = if side == 0 { (&node.lx, &node.ux) } else { (&node.ly, &node.uy) };
            for (idx, cut) in self.cuts[side].iter().enumerate() {
                let top: f64 = cut.row.iter().zip(lo.iter().zip(hi)).map(|(c, (l, h))| c * if *c > 0.0 { h } else { l }).sum();
                if top > 1.0 + 1e-12 {
                    included.push((side, idx));
                }
            }
        }
        let rows = 2 * k + included.len();
        let mut a = Mat::zeros(rows, nvar);
        let mut b = vec![0.0; rows];
        let mut r = 0;
        for (t, &(i, j, coef)) in self.terms.iter().enumerate() {
            let env = mccormick(node.lx[i], node.ux[i], node.ly[j], node.uy[j]);
            // the objective pushes w_t against one side of the envelope only
            let (planes, sign) = if coef > 0.0 { (env.lower, -1.0) } else { (env.upper, 1.0) };
            for pl in planes {
                // sign·(w − cx·x − cy·y) ≤ sign·c0
                a[(r, p + q + t)] = sign;
                a[(r, i)] = -sign * pl.cx;
                a[(r, p + j)] = -sign * pl.cy;
                b[r] = sign * pl.c0;
                r += 1;
            }
        }
        for &(side, idx) in &included {
            let off = if side == 0 { 0 } else { p };
            for (t, &c) in self.cuts[side][idx].row.iter().enumerate() {
                a[(r, off + t)] = c;
            }
            b[r] = 1.0;
            r += 1;
        }
        let mut cost = vec![0.0; nvar];
        let mut bounds = Vec::with_capacity(nvar);
        for i in 0..p {
            bounds.push((node.lx[i], node.ux[i]));
        }
        for j in 0..q {
            bounds.push((node.ly[j], node.uy[j]));
        }
        for (t, &(i, j, coef)) in self.terms.iter().enumerate() {
            cost[p + q + t] = coef;
            bounds.push((node.lx[i] * node.ly[j], node.ux[i] * node.uy[j]));
        }
        self.lp_count += 1;
        let out = match lp_solve(&cost, &a, &b, &bounds) {
            Ok(out) => out,
            Err(_) => return LpResult::Failed,
        };
        match out.status {
            LpStatus::Optimal => {
                for (row, &(side, idx)) in included.iter().enumerate() {
                    let lhs: f64 = (0..nvar).map(|v| a[(2 * k + row, v)] * out.x[v]).sum();
                    if lhs >= 1.0 - 1e-9 {
                        self.cuts[side][idx].last_binding = self.lp_count;
                    }
                }
                LpResult::Bound(out.objective, out.x)
            }
            LpStatus::Infeasible => LpResult::Infeasible,
            LpStatus::Unbounded => LpResult::Failed,
        }
    }

    /// Solve with a few rounds of ball cuts at the witness.
    fn bound(&mut self, node: &Boxes, rounds: usize) -> LpResult {
        let (p, q) = (self.c.nrows(), self.c.ncols());
        let now = self.lp_count;
        for pool in &mut self.cuts {
            pool.retain(|c| c.permanent || now - c.last_binding <= CUT_AGE);
        }
        let mut res = self.solve(node);
        for _ in 0..rounds {
            let LpResult::Bound(_, z) = &res else { break };
            let gx = self.g * Vector::from_column_slice(&z[..p]);
            let hy = self.h * Vector::from_column_slice(&z[p..p + q]);
            let mut added = false;
            if gx.norm() > 1.0 + 1e-8 {
                added |= self.add_cut(0, gx.normalize(), false);
            }
            if hy.norm() > 1.0 + 1e-8 {
                added |= self.add_cut(1, hy.normalize(), false);
            }
            if !added {
                break;
            }
            res = self.solve(node);
        }
        res
    }
}

pub(super) fn search(s: &mut Search, work: &SVInstance) -> Result<(f64, bool)> {
    let c = work.cross().clone();
    let (g, h) = (work.p().generators().clone(), work.q().generators().clone());
    let (p, q) = (c.nrows(), c.ncols());
    let mut relax = Relaxation::new(&c, &g, &h);
    let witness_cfg = EaoConfig {
        max_iter: s.opts.witness_iter.max(1),
        polish: false,
        ..Default::default()
    };

    // LP bound for a box, with incumbent updates from the witness
    let evaluate = |mut node: Boxes, parent: f64, relax: &mut Relaxation, s: &mut Search| -> Option<(Boxes, f64)> {
        match relax.bound(&node, s.opts.cut_rounds) {
            LpResult::Bound(val, z) => {
                let (u, v) = (&g * Vector::from_column_slice(&z[..p]), &h * Vector::from_column_slice(&z[p..p + q]));
                s.inc.offer(s.inst, &u, &v);
                if v.norm() > 1e-12 {
                    let run = eao_core(s.inst.a(), s.inst.p(), s.inst.q(), &v.normalize(), &witness_cfg);
                    s.inc.offer(s.inst, &run.u, &run.v);
                }
                node.witness = Some(z);
                Some((node, val.max(parent)))
            }
            LpResult::Infeasible => None,
            LpResult::Failed => {
                s.report.lp_failures += 1;
                node.witness = None;
                Some((node, parent))
            }
        }
    };

    let root = Boxes {
        lx: vec![0.0; p],
        ux: root_bounds(work.p())?,
        ly: vec![0.0; q],
        uy: root_bounds(work.q())?,
        witness: None,
    };
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    if let Some((node, bound)) = evaluate(root, -s.inst.norm(), &mut relax, s) {
        heap.push(Queued { bound, depth: 0, id: next_id, item: node });
    }
    next_id += 1;

    let mut result = (f64::INFINITY, true);
    while let Some(Queued { bound, depth, id, item: node }) = heap.pop() {
        s.log(id, bound, depth);
        if s.closes(bound) {
            result = (bound, true);
            break;
        }
        if s.out_of_budget() {
            result = (bound, false);
            break;
        }
        let (var_is_x, idx, split) = branch_choice(&node, &relax.terms, p, q);
        for side in 0..2 {
            let mut child = node.clone();
            let (lo, hi) = if var_is_x { (&mut child.lx, &mut child.ux) } else { (&mut child.ly, &mut child.uy) };
            if side == 0 {
                hi[idx] = split;
            } else {
                lo[idx] = split;
            }
            if let Some((child, cb)) = evaluate(child, bound, &mut relax, s) {
                if !s.closes(cb) {
                    heap.push(Queued { bound: cb, depth: depth + 1, id: next_id, item: child });
                }
            }
            next_id += 1;
        }
    }
    s.report.cuts_p = relax.pool(0);
    s.report.cuts_q = relax.pool(1);
    Ok(result)
}

/// Variable and split point for a box: the factor of the worst relaxed
/// product with the longer interval, cut at the witness clamped to the
/// middle 40%. Without a witness the longest interval is halved.
fn branch_choice(node: &Boxes, terms: &[(usize, usize, f64)], p: usize, q: usize) -> (bool, usize, f64) {
    let widest = || {
        let mut best = (true, 0, -1.0);
        for i in 0..p {
            if node.ux[i] - node.lx[i] > best.2 {
                best = (true, i, node.ux[i] - node.lx[i]);
            }
        }
        for j in 0..q {
            if node.uy[j] - node.ly[j] > best.2 {
                best = (false, j, node.uy[j] - node.ly[j]);
            }
        }
        let (is_x, k, _) = best;
        let mid = if is_x { 0.5 * (node.lx[k] + node.ux[k]) } else { 0.5 * (node.ly[k] + node.uy[k]) };
        (is_x, k, mid)
    };
    let Some(z) = &node.witness else { return widest() };
    let mut worst = (0.0, usize::MAX);
    for (t, &(i, j, _)) in terms.iter().enumerate() {
        let err = (z[p + q + t] - z[i] * z[p + j]).abs();
        if err > worst.0 {
            worst = (err, t);
        }
    }
    if worst.1 == usize::MAX || worst.0 <= 1e-12 {
        return widest();
    }
    let (i, j, _) = terms[worst.1];
    let (wx, wy) = (node.ux[i] - node.lx[i], node.uy[j] - node.ly[j]);
    let (is_x, k, lo, hi, at) = if wx >= wy {
        (true, i, node.lx[i], node.ux[i], z[i])
    } else {
        (false, j, node.ly[j], node.uy[j], z[p + j])
    };
    let len = hi - lo;
    (is_x, k, at.clamp(lo + 0.3 * len, lo + 0.7 * len))
}
