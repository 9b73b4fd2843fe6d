//! Lawson–Hanson active-set NNLS working on the normal equations.
//!
//! The Gram matrix of a generator set is fixed for the life of a cone, so it
//! is factored once into a `GramSystem` and reused by every projection. Gram
//! matrices of structured cones (orthant, Schur) are banded; passive-set
//! factorizations exploit the band.

use super::{Mat, Vector};

#[derive(Debug, Clone)]
pub struct GramSystem {
    gram: Mat,
    band: usize,
    /// Number of columns of the original matrix; drives the iteration cap.
    rows: usize,
}

impl GramSystem {
    pub fn new(m: &Mat) -> Self {
        let gram = m.tr_mul(m);
        let n = gram.nrows();
        let mut band = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if gram[(i, j)] != 0.0 {
                    band = band.max(j - i);
                }
            }
        }
        GramSystem {
            gram,
            band,
            rows: m.nrows(),
        }
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Minimize `½xᵀNx − fᵀx` over `x ≥ 0`, where `f = Mᵀb`.
    pub fn solve(&self, f: &Vector) -> Vector {
        self.solve_from(f, None)
    }

    /// As [`solve`](Self::solve), starting the active set from the support
    /// of a previous solution. Nearby right-hand sides then take a handful of
    /// pivots instead of one per active index.
    pub fn solve_from(&self, f: &Vector, start: Option<&Vector>) -> Vector {
        let n = self.dim();
        if self.band == 0 {
            return Vector::from_fn(n, |i, _| {
                let d = self.gram[(i, i)];
                if d > 0.0 {
                    (f[i] / d).max(0.0)
                } else {
                    0.0
                }
            });
        }
        let diag_max = (0..n).fold(0.0f64, |a, i| a.max(self.gram[(i, i)]));
        let tol = 1e-13 * f.amax().max(diag_max).max(1e-300);
        let max_outer = 10 * self.rows.max(n);

        let mut x = Vector::zeros(n);
        let mut passive = vec![false; n];
        if let Some(x0) = start.filter(|x0| x0.len() == n) {
            for i in 0..n {
                if x0[i] > 0.0 {
                    x[i] = x0[i];
                    passive[i] = true;
                }
            }
            let idx = index_set(&passive);
            match self.solve_on(&idx, f) {
                Some(z) => self.settle(f, &mut x, &mut passive, z, max_outer),
                None => {
                    x.fill(0.0);
                    passive.fill(false);
                }
            }
        }
        let mut blocked = vec![false; n];
        let mut w = f - self.mul(&x);
        for _ in 0..max_outer {
            let pick = (0..n)
                .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
                .max_by(|&a, &b| w[a].total_cmp(&w[b]));
            let Some(j) = pick else { break };
            passive[j] = true;
            let idx = index_set(&passive);
            let z = match self.solve_on(&idx, f) {
                // a new column that cannot move off zero is numerically dependent
                Some(z) if z[idx.iter().position(|&i| i == j).unwrap()] > 0.0 => z,
                _ => {
                    passive[j] = false;
                    blocked[j] = true;
                    continue;
                }
            };
            blocked.iter_mut().for_each(|b| *b = false);
            self.settle(f, &mut x, &mut passive, z, max_outer);
            w = f - self.mul(&x);
        }
        x
    }

    /// Lawson–Hanson inner loop: move from the feasible `x` toward the
    /// passive-set solution `z`, dropping indices that hit zero, until the
    /// passive solution is strictly positive.
    fn settle(&self, f: &Vector, x: &mut Vector, passive: &mut [bool], mut z: Vec<f64>, cap: usize) {
        let mut inner = 0;
        loop {
            let idx = index_set(passive);
            if z.iter().all(|&zi| zi > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            inner += 1;
            let mut alpha = f64::INFINITY;
            let mut hit = None;
            for (k, &i) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[i] - z[k];
                    let a = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    if a < alpha {
                        alpha = a;
                        hit = Some(i);
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
            }
            if let Some(i) = hit {
                x[i] = 0.0;
            }
            for &i in &idx {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            let idx = index_set(passive);
            if idx.is_empty() || inner > cap {
                break;
            }
            z = match self.solve_on(&idx, f) {
                Some(z) => z,
                None => break,
            };
        }
        for i in 0..x.len() {
            if !passive[i] {
                x[i] = 0.0;
            }
        }
    }

    /// `N x`, skipping entries outside the band.
    fn mul(&self, x: &Vector) -> Vector {
        let n = self.dim();
        if 4 * self.band >= n {
            return &self.gram * x;
        }
        Vector::from_fn(n, |i, _| {
            let lo = i.saturating_sub(self.band);
            let hi = (i + self.band).min(n - 1);
            (lo..=hi).map(|j| self.gram[(i, j)] * x[j]).sum()
        })
    }

    /// Solve `N_PP z = f_P` by banded Cholesky; `None` when not positive definite.
    pub fn solve_on(&self, idx: &[usize], f: &Vector) -> Option<Vec<f64>> {
        let k = idx.len();
        if k == 0 {
            return Some(Vec::new());
        }
        let b = self.band.min(k - 1);
        // row i of L keeps columns i-b..=i at offsets 0..=b
        let w = b + 1;
        let at = |i: usize, j: usize| i * w + (j + b - i);
        let mut l = vec![0.0; k * w];
        for i in 0..k {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = self.gram[(idx[i], idx[j])];
                let start = lo.max(j.saturating_sub(b));
                for t in start..j {
                    s -= l[at(i, t)] * l[at(j, t)];
                }
                if i == j {
                    let d = self.gram[(idx[i], idx[i])];
                    if s <= 1e-12 * d {
                        return None;
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        let mut y: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
        for i in 0..k {
            let lo = i.saturating_sub(b);
            let mut s = y[i];
            for t in lo..i {
                s -= l[at(i, t)] * y[t];
            }
            y[i] = s / l[at(i, i)];
        }
        for i in (0..k).rev() {
            let hi = (i + b).min(k - 1);
            let mut s = y[i];
            for t in (i + 1)..=hi {
                s -= l[at(t, i)] * y[t];
            }
            y[i] = s / l[at(i, i)];
        }
        Some(y)
    }

    /// One step of iterative refinement on the passive set of `x` using the
    /// original matrix, which recovers the accuracy lost to squaring.
    pub fn refine(&self, m: &Mat, b: &Vector, x: &mut Vector) {
        let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
        if idx.is_empty() {
            return;
        }
        let r = b - m * &*x;
        let g = m.tr_mul(&r);
        if let Some(d) = self.solve_on(&idx, &g) {
            let mut trial = x.clone();
            for (k, &i) in idx.iter().enumerate() {
                trial[i] += d[k];
            }
            if idx.iter().all(|&i| trial[i] > 0.0) {
                *x = trial;
            }
        }
    }
}

fn index_set(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i))
        .collect()
}

/// Nonnegative least squares: `argmin_{x ≥ 0} ‖Mx − b‖` and the residual norm.
pub fn nnls(m: &Mat, b: &Vector) -> (Vector, f64) {
    assert_eq!(m.nrows(), b.len(), "nnls: dimension mismatch");
    let sys = GramSystem::new(m);
    let f = m.tr_mul(b);
    let mut x = sys.solve(&f);
    sys.refine(m, b, &mut x);
    let res = (m * &x - b).norm();
    (x, res)
}

/// Least-distance program `min ‖z‖ s.t. Ez ≥ f`, solved through the NNLS
/// problem `min_{w ≥ 0} ‖[Eᵀ; fᵀ]w − e_last‖`. Returns `z` and `w` (the
/// latter is proportional to the multipliers of the rows of E), or `None`
/// when the constraints are infeasible.
pub fn least_distance(e: &Mat, f: &Vector) -> Option<(Vector, Vector)> {
    let (k, n) = e.shape();
    assert_eq!(f.len(), k, "least_distance: dimension mismatch");
    let mut m = Mat::zeros(n + 1, k);
    m.rows_mut(0, n).copy_from(&e.transpose());
    m.row_mut(n).copy_from(&f.transpose());
    let mut b = Vector::zeros(n + 1);
    b[n] = 1.0;
    let (w, res) = nnls(&m, &b);
    if res < 1e-12 {
        return None;
    }
    let r = &m * &w - &b;
    let z = -r.rows(0, n) / r[n];
    Some((z, w))
}
