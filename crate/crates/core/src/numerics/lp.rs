//! Bounded-variable primal simplex on a dense tableau.
//!
//! Solves `min cᵀx  s.t.  A x ≤ b,  lo ≤ x ≤ hi` with possibly infinite
//! bounds. Dantzig pricing is used until a run of degenerate pivots, after
//! which Bland's rule takes over until progress resumes.

use super::Mat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;

/// How a user variable maps onto nonnegative internal columns.
#[derive(Clone, Copy)]
enum VarMap {
    /// x = offset + col
    Shift { col: usize, offset: f64 },
    /// x = offset − col
    Flip { col: usize, offset: f64 },
    /// x = pos − neg
    Split { pos: usize, neg: usize },
}

pub fn lp_solve(c: &[f64], a_ub: &Mat, b_ub: &[f64], bounds: &[(f64, f64)]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a_ub.nrows();
    if a_ub.ncols() != n || b_ub.len() != m || bounds.len() != n {
        return Err(Error::InvalidInput("lp_solve: dimension mismatch".into()));
    }
    if c.iter().chain(b_ub).chain(a_ub.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("lp_solve: non-finite data".into()));
    }
    let infeasible = || LpOutcome {
        status: LpStatus::Infeasible,
        x: vec![],
        objective: f64::NAN,
    };

    // map user variables onto columns with [0, upper] bounds
    let mut maps = Vec::with_capacity(n);
    let mut upper: Vec<f64> = Vec::new();
    for &(lo, hi) in bounds {
        if lo > hi || lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Ok(infeasible());
        }
        let col = upper.len();
        if lo.is_finite() {
            maps.push(VarMap::Shift { col, offset: lo });
            upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col, offset: hi });
            upper.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split { pos: col, neg: col + 1 });
            upper.push(f64::INFINITY);
            upper.push(f64::INFINITY);
        }
    }
    let ns = upper.len();
    let mut cost = vec![0.0; ns];
    let mut rows = vec![vec![0.0; ns]; m];
    let mut rhs = b_ub.to_vec();
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shift { col, offset } => {
                cost[col] += c[j];
                for i in 0..m {
                    rows[i][col] += a_ub[(i, j)];
                    rhs[i] -= a_ub[(i, j)] * offset;
                }
            }
            VarMap::Flip { col, offset } => {
                cost[col] -= c[j];
                for i in 0..m {
                    rows[i][col] -= a_ub[(i, j)];
                    rhs[i] -= a_ub[(i, j)] * offset;
                }
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c[j];
                cost[neg] -= c[j];
                for i in 0..m {
                    rows[i][pos] += a_ub[(i, j)];
                    rows[i][neg] -= a_ub[(i, j)];
                }
            }
        }
    }

    let mut tab = Tableau::build(&rows, &rhs, &upper);
    let phase1: Vec<f64> = (0..tab.ncols)
        .map(|j| if j >= tab.art_start { 1.0 } else { 0.0 })
        .collect();
    if tab.art_start < tab.ncols {
        match tab.optimize(&phase1)? {
            Pivoted::Optimal => {}
            Pivoted::Unbounded => {
                return Err(Error::NumericalFailure("phase 1 reported unbounded".into()))
            }
        }
        let infeas: f64 = (0..tab.ncols)
            .filter(|&j| j >= tab.art_start)
            .map(|j| tab.value(j))
            .sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > 1e-9 * scale {
            return Ok(infeasible());
        }
        for j in tab.art_start..tab.ncols {
            tab.upper[j] = 0.0;
        }
    }
    let mut full_cost = cost.clone();
    full_cost.resize(tab.ncols, 0.0);
    if let Pivoted::Unbounded = tab.optimize(&full_cost)? {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            x: vec![],
            objective: f64::NEG_INFINITY,
        });
    }

    let internal: Vec<f64> = (0..ns).map(|j| tab.value(j)).collect();
    let x: Vec<f64> = maps
        .iter()
        .zip(bounds)
        .map(|(map, &(lo, hi))| {
            let v = match *map {
                VarMap::Shift { col, offset } => offset + internal[col],
                VarMap::Flip { col, offset } => offset - internal[col],
                VarMap::Split { pos, neg } => internal[pos] - internal[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();

    // a drifted tableau shows up as a violated row
    let scale_b = 1.0 + b_ub.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..m {
        let lhs: f64 = (0..n).map(|j| a_ub[(i, j)] * x[j]).sum();
        let row_scale = scale_b + (0..n).map(|j| (a_ub[(i, j)] * x[j]).abs()).sum::<f64>();
        if lhs - b_ub[i] > 1e-8 * row_scale {
            return Err(Error::NumericalFailure(format!(
                "row {i} violated by {:e} after simplex",
                lhs - b_ub[i]
            )));
        }
    }
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

enum Pivoted {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    art_start: usize,
    /// m × ncols, equals B⁻¹[A | I | ±I_art]
    t: Vec<f64>,
    /// current values of the basic variables
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
}

impl Tableau {
    fn build(rows: &[Vec<f64>], rhs: &[f64], upper: &[f64]) -> Tableau {
        let m = rows.len();
        let ns = upper.len();
        let negative: Vec<usize> = (0..m).filter(|&i| rhs[i] < 0.0).collect();
        let art_start = ns + m;
        let ncols = art_start + negative.len();
        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![0.0; m];
        let mut art = art_start;
        for i in 0..m {
            let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..ns {
                t[i * ncols + j] = sign * rows[i][j];
            }
            t[i * ncols + ns + i] = sign;
            beta[i] = sign * rhs[i];
            if sign < 0.0 {
                t[i * ncols + art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = ns + i;
            }
        }
        let mut up = upper.to_vec();
        up.resize(ncols, f64::INFINITY);
        let mut is_basic = vec![false; ncols];
        for &b in &basis {
            is_basic[b] = true;
        }
        Tableau {
            m,
            ncols,
            art_start,
            t,
            beta,
            basis,
            at_upper: vec![false; ncols],
            is_basic,
            upper: up,
        }
    }

    fn value(&self, j: usize) -> f64 {
        if self.is_basic[j] {
            let r = self.basis.iter().position(|&b| b == j).unwrap();
            self.beta[r]
        } else if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<Pivoted> {
        let (m, nc) = (self.m, self.ncols);
        let cap = 50 * (m + nc) + 1000;
        let mut degenerate_run = 0usize;
        let mut d = vec![0.0; nc];
        for _ in 0..cap {
            let bland = degenerate_run > 2 * (m + 5);
            // reduced costs
            d.copy_from_slice(cost);
            for i in 0..m {
                let cb = cost[self.basis[i]];
                if cb != 0.0 {
                    let row = &self.t[i * nc..(i + 1) * nc];
                    for j in 0..nc {
                        d[j] -= cb * row[j];
                    }
                }
            }
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..nc {
                if self.is_basic[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let gain = if self.at_upper[j] { d[j] } else { -d[j] };
                if gain > COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else { return Ok(Pivoted::Optimal) };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // ratio test
            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let alpha = dir * self.t[i * nc + j];
                let b = self.basis[i];
                let limit = if alpha > PIVOT_TOL {
                    Some((self.beta[i].max(0.0) / alpha, false))
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    Some(((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true))
                } else {
                    None
                };
                if let Some((r, to_upper)) = limit {
                    let better = match leave {
                        None => r < step,
                        Some((li, _)) => {
                            r < step - 1e-12
                                || (r <= step + 1e-12 && bland && self.basis[i] < self.basis[li])
                                || (r <= step + 1e-12
                                    && !bland
                                    && alpha.abs() > (dir * self.t[li * nc + j]).abs())
                        }
                    };
                    if better {
                        step = r;
                        leave = Some((i, to_upper));
                    }
                }
            }
            if step == f64::INFINITY {
                return Ok(Pivoted::Unbounded);
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for i in 0..m {
                self.beta[i] -= step * dir * self.t[i * nc + j];
            }
            match leave {
                None => {
                    // bound flip
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let start = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                    let old = self.basis[r];
                    self.is_basic[old] = false;
                    self.at_upper[old] = to_upper;
                    self.basis[r] = j;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.beta[r] = start + dir * step;
                    self.pivot(r, j);
                }
            }
        }
        Err(Error::NumericalFailure("simplex iteration cap reached".into()))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        for k in 0..nc {
            self.t[r * nc + k] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f != 0.0 {
                let row = &mut self.t[i * nc..(i + 1) * nc];
                for k in 0..nc {
                    row[k] -= f * pivot_row[k];
                }
                row[j] = 0.0;
            }
        }
    }
}
