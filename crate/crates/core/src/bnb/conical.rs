//! Conical branch and bound over the generator simplex of one cone.
//!
//! With `φ(y) = min_{x ≥ 0, ‖Gx‖ ≤ 1} xᵀCy = −‖Π_P(−AHy)‖`, φ is concave and
//! positively homogeneous, hence superadditive: on the subcone spanned by
//! directions `d_i` (scaled so `‖Hd_i‖ = 1`), `φ(Σ t_i d_i) ≥ Σ t_i φ(d_i)`.
//! The node bound `min Σ t_i φ(d_i)` over `t ≥ 0`, `‖HDt‖ ≤ 1` equals
//! `−min{‖z‖ : (HD)ᵀz ≥ −φ(d)}`, a least-distance problem.

use super::{Queued, Search};
use crate::error::Result;
use crate::instance::SVInstance;
use crate::numerics::{least_distance, Mat, Vector};
use std::collections::BinaryHeap;

struct Simplex {
    /// Edge directions in generator coordinates, one per column.
    d: Mat,
    phi: Vec<f64>,
}

struct Side<'s, 'a> {
    work: SVInstance,
    swapped: bool,
    search: &'s mut Search<'a>,
}

impl Side<'_, '_> {
    /// `φ(d)` for `‖Hd‖ = 1`; the minimizing pair is offered as incumbent.
    fn phi(&mut self, d: &Vector) -> f64 {
        let v = self.work.q().generators() * d;
        let c = self.work.a() * &v;
        let (proj, _) = self.work.p().project(&(-c));
        let n = proj.norm();
        if n > 0.0 {
            if self.swapped {
                self.search.inc.offer(self.search.inst, &v, &proj);
            } else {
                self.search.inc.offer(self.search.inst, &proj, &v);
            }
        }
        -n
    }

    fn unit(&self, d: Vector) -> Vector {
        let n = (self.work.q().generators() * &d).norm();
        d / n
    }

    /// Lower bound of the subcone, or `None` if the least-distance solve
    /// failed. The interpolant's minimizer is evaluated as a candidate.
    fn bound(&mut self, node: &Simplex) -> Option<f64> {
        let m = self.work.q().generators() * &node.d;
        let f = -Vector::from_column_slice(&node.phi);
        let (z, w) = least_distance(&m.transpose(), &f)?;
        let dir = &node.d * &w;
        if dir.norm() > 1e-14 {
            let dir = self.unit(dir);
            self.phi(&dir);
        }
        let best_vertex = node.phi.iter().copied().fold(f64::INFINITY, f64::min);
        Some((-z.norm()).min(best_vertex))
    }
}

pub(super) fn search(s: &mut Search, work: &SVInstance) -> Result<(f64, bool)> {
    // split the cone with fewer generators
    let swapped = work.p().num_generators() < work.q().num_generators();
    let work = if swapped { work.transposed() } else { work.clone() };
    let q = work.q().num_generators();
    let mut side = Side { work, swapped, search: s };

    let d0 = Mat::from_fn(q, q, |i, j| if i == j { 1.0 } else { 0.0 });
    let d0 = Mat::from_columns(&(0..q).map(|j| side.unit(d0.column(j).into_owned())).collect::<Vec<_>>());
    let phi0 = (0..q).map(|j| side.phi(&d0.column(j).into_owned())).collect();
    let root = Simplex { d: d0, phi: phi0 };
    let parent0 = -side.search.inst.norm();
    let root_bound = side.bound(&root).unwrap_or_else(|| {
        side.search.report.lp_failures += 1;
        parent0
    });
    let mut heap = BinaryHeap::new();
    heap.push(Queued { bound: root_bound.max(parent0), depth: 0, id: 0, item: root });
    let mut next_id = 1;

    let mut result = (f64::INFINITY, true);
    while let Some(Queued { bound, depth, id, item: node }) = heap.pop() {
        side.search.log(id, bound, depth);
        if side.search.closes(bound) {
            result = (bound, true);
            break;
        }
        if side.search.out_of_budget() {
            result = (bound, false);
            break;
        }
        let Some((i, j)) = longest_edge(&side.work, &node.d) else {
            // a single ray: its value is exact and already offered
            continue;
        };
        let mid = side.unit((node.d.column(i) + node.d.column(j)) * 0.5);
        let phi_mid = side.phi(&mid);
        for k in [i, j] {
            let mut child = Simplex { d: node.d.clone(), phi: node.phi.clone() };
            child.d.set_column(k, &mid);
            child.phi[k] = phi_mid;
            let cb = match side.bound(&child) {
                Some(b) => b.max(bound),
                None => {
                    side.search.report.lp_failures += 1;
                    bound
                }
            };
            if !side.search.closes(cb) {
                heap.push(Queued { bound: cb, depth: depth + 1, id: next_id, item: child });
            }
            next_id += 1;
        }
    }
    Ok(result)
}

/// Pair of edge directions farthest apart after mapping by H, or `None`
/// when all edges coincide.
fn longest_edge(work: &SVInstance, d: &Mat) -> Option<(usize, usize)> {
    let v = work.q().generators() * d;
    let mut best = (1e-12, None);
    for i in 0..v.ncols() {
        for j in i + 1..v.ncols() {
            let len = (v.column(i) - v.column(j)).norm();
            if len > best.0 {
                best = (len, Some((i, j)));
            }
        }
    }
    best.1
}
