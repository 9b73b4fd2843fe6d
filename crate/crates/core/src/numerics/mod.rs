//! Dense linear algebra and small convex subproblems shared by the solvers.
//!
//! Everything here works on `nalgebra` dense storage. Functions are pure and
//! can be called from any thread.

mod lp;
mod nnls;

pub use lp::{lp_solve, LpOutcome, LpStatus};
pub use nnls::{least_distance, nnls, GramSystem};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used for multiplicities and rank decisions.
pub const RANK_TOL: f64 = 1e-9;

pub fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{what} has a zero dimension")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Largest singular value, its multiplicity and the matching singular bases.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub sigma_max: f64,
    pub multiplicity: usize,
    /// Left singular vectors for `sigma_max` (m × r).
    pub left: Mat,
    /// Right singular vectors for `sigma_max` (n × r).
    pub right: Mat,
}

/// Singular values in descending order with the thin factors permuted to match.
fn sorted_svd(a: &Mat) -> (Vec<f64>, Mat, Mat) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = Mat::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = Mat::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    (sv, u, v)
}

pub fn svd_spectral(a: &Mat, rank_tol: f64) -> Result<SpectralData> {
    check_finite(a, "matrix")?;
    if !(rank_tol > 0.0 && rank_tol <= 1e-4) {
        return Err(Error::InvalidInput(format!("rank_tol {rank_tol} outside (0, 1e-4]")));
    }
    let (sv, u, v) = sorted_svd(a);
    let sigma_max = sv[0];
    let multiplicity = sv
        .iter()
        .take_while(|&&s| sigma_max - s <= rank_tol * sigma_max)
        .count();
    Ok(SpectralData {
        sigma_max,
        multiplicity,
        left: u.columns(0, multiplicity).into_owned(),
        right: v.columns(0, multiplicity).into_owned(),
    })
}

pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eig(s: &Mat) -> Result<(Vector, Mat)> {
    if s.nrows() != s.ncols() {
        return Err(Error::InvalidInput("sym_eig needs a square matrix".into()));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    let n = s.nrows();
    if n == 0 {
        return Ok((Vector::zeros(0), Mat::zeros(0, 0)));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `(MᵀM)⁻¹Mᵀ` for a matrix with full column rank.
pub fn pinv_full_rank(m: &Mat) -> Result<Mat> {
    let (sv, u, v) = sorted_svd(m);
    let rank = numerical_rank(&sv, RANK_TOL);
    if sv.len() < m.ncols() || rank < m.ncols() {
        return Err(Error::RankDeficient { rank });
    }
    let mut vs = v;
    for (c, s) in sv.iter().enumerate() {
        vs.column_mut(c).scale_mut(1.0 / s);
    }
    Ok(vs * u.transpose())
}

fn numerical_rank(sv: &[f64], tol: f64) -> usize {
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

pub fn has_full_column_rank(m: &Mat) -> bool {
    if m.ncols() > m.nrows() {
        return false;
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    numerical_rank(&sv, RANK_TOL) == m.ncols()
}

/// Factor a PSD matrix as `LLᵀ` with `L` of numerical-rank width.
///
/// Eigenvalues at or below `tol·max(‖S‖, 1)` count as zero.
pub fn psd_cholesky_rank(s: &Mat, tol: f64) -> Result<(Mat, usize)> {
    let (vals, vecs) = sym_eig(s)?;
    let n = s.nrows();
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lo) = vals.iter().next() {
        if lo < -tol * norm.max(1.0) {
            return Err(Error::NotPsd { min_eig: lo });
        }
    }
    let cut = tol * norm.max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
    let l = Mat::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])] * vals[keep[c]].sqrt());
    Ok((l, keep.len()))
}

/// Orthonormal basis for the numerical range of `m`.
pub fn orth_basis(m: &Mat, tol: f64) -> Mat {
    if m.is_empty() || m.amax() == 0.0 {
        return Mat::zeros(m.nrows(), 0);
    }
    let (sv, u, _) = sorted_svd(m);
    let rank = numerical_rank(&sv, tol);
    u.columns(0, rank).into_owned()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if s - t > 0.0 {
            tau = t;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|&vi| (vi - tau).max(0.0)).collect();
    // absorb rounding so the output sums to one
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        x.iter_mut().for_each(|xi| *xi /= total);
    }
    x
}

pub fn unit(v: &Vector) -> Option<Vector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}
