//! Benchmark generators and application reconstructions: Schur cones,
//! planted bicliques, the circulant PSD/nonnegative reduction and the
//! matrix-cone maximal angle.

use crate::cones::{nonneg_sym_oracle, orthant, psd_oracle, schur_cone, smat};
use crate::eao::{multistart_core, EaoConfig};
use crate::error::{Error, Result};
use crate::instance::{oracle_kkt_residual, SVInstance, Solution};
use crate::numerics::{sym_eig, Mat, Vector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// A closed-form optimal pair with its value.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub lambda: f64,
    pub u: Vector,
    pub v: Vector,
}

/// Maximal angle between the Schur cone and the orthant, with its unique
/// antipodal pair.
pub fn gen_schur_orthant(n: usize) -> Result<(SVInstance, GroundTruth)> {
    if n < 2 {
        return Err(Error::InvalidInput("Schur instances need n ≥ 2".into()));
    }
    let inst = SVInstance::new(Mat::identity(n, n), schur_cone(n)?, orthant(n)?)?;
    let nf = n as f64;
    let scale = (nf / (nf - 1.0)).sqrt();
    let mut u = Vector::from_element(n, scale / nf);
    u[n - 1] -= scale;
    let mut v = Vector::zeros(n);
    v[n - 1] = 1.0;
    let truth = GroundTruth {
        lambda: -(1.0 - 1.0 / nf).sqrt(),
        u,
        v,
    };
    Ok((inst, truth))
}

/// Maximal angle of the Schur cone with itself and its optimal value.
pub fn gen_schur_schur(n: usize) -> Result<(SVInstance, f64)> {
    if n < 2 {
        return Err(Error::InvalidInput("Schur instances need n ≥ 2".into()));
    }
    let inst = SVInstance::new(Mat::identity(n, n), schur_cone(n)?, schur_cone(n)?)?;
    Ok((inst, ((n as f64 - 1.0) * PI / n as f64).cos()))
}

#[derive(Debug, Clone)]
pub struct BicliqueInstance {
    /// Binary biadjacency matrix.
    pub b: Mat,
    pub d: f64,
    /// `B − (eeᵀ − B)d`.
    pub m: Mat,
}

impl BicliqueInstance {
    pub fn new(b: Mat, d: f64) -> Result<Self> {
        if b.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidInput("biadjacency entries must be 0 or 1".into()));
        }
        if d < b.nrows().max(b.ncols()) as f64 {
            return Err(Error::InvalidInput("penalty d must be at least max(m, n)".into()));
        }
        let m = b.map(|t| if t == 1.0 { 1.0 } else { -d });
        Ok(BicliqueInstance { b, d, m })
    }

    /// The orthant instance `PSV(−M)`.
    pub fn sv_instance(&self) -> Result<SVInstance> {
        let (r, c) = self.m.shape();
        SVInstance::new(-&self.m, orthant(r)?, orthant(c)?)
    }
}

/// Random bipartite graph with a planted complete block.
pub fn gen_biclique(m: usize, n: usize, density: f64, planted_rows: usize, planted_cols: usize, seed: u64) -> Result<BicliqueInstance> {
    if planted_rows > m || planted_cols > n {
        return Err(Error::InvalidInput("planted block larger than the graph".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput("density must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Mat::from_fn(m, n, |_, _| if rng.random::<f64>() < density { 1.0 } else { 0.0 });
    let rows = sample(&mut rng, m, planted_rows);
    let cols = sample(&mut rng, n, planted_cols);
    for i in rows.iter() {
        for j in cols.iter() {
            b[(i, j)] = 1.0;
        }
    }
    BicliqueInstance::new(b, m.max(n) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicliqueExtraction {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// `round(λ²)`.
    pub edge_estimate: u64,
    pub valid: bool,
}

pub fn extract_biclique(inst: &BicliqueInstance, sol: &Solution, threshold: f64) -> BicliqueExtraction {
    let pick = |z: &Vector| -> Vec<usize> {
        let top = z.max();
        (0..z.len()).filter(|&i| top > 0.0 && z[i] > threshold * top).collect()
    };
    let rows = pick(&sol.u);
    let cols = pick(&sol.v);
    let valid = !rows.is_empty() && !cols.is_empty() && rows.iter().all(|&i| cols.iter().all(|&j| inst.b[(i, j)] == 1.0));
    BicliqueExtraction {
        rows,
        cols,
        edge_estimate: (sol.lambda * sol.lambda).round() as u64,
        valid,
    }
}

/// Parse a bipartite edge list: a header line `m n`, then one `u v` pair
/// per line with 1-based vertex indices. Blank lines and lines starting with
/// `#` or `%` are skipped.
pub fn read_edge_list(text: &str) -> Result<Mat> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#') && !l.starts_with('%'));
    let parse_pair = |lineno: usize, l: &str| -> Result<(usize, usize)> {
        let mut it = l.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
            _ => Err(Error::InvalidInput(format!("line {}: expected two integers", lineno + 1))),
        }
    };
    let (lineno, header) = lines.next().ok_or_else(|| Error::InvalidInput("empty edge list".into()))?;
    let (m, n) = parse_pair(lineno, header)?;
    let mut b = Mat::zeros(m, n);
    for (lineno, l) in lines {
        let (u, v) = parse_pair(lineno, l)?;
        if u == 0 || v == 0 || u > m || v > n {
            return Err(Error::InvalidInput(format!("line {}: vertex out of range", lineno + 1)));
        }
        b[(u - 1, v - 1)] = 1.0;
    }
    Ok(b)
}

#[derive(Debug, Clone)]
pub struct CirculantReduction {
    pub n: usize,
    pub mat: Mat,
}

impl CirculantReduction {
    pub fn half(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn sv_instance(&self) -> Result<SVInstance> {
        let h = self.half();
        SVInstance::new(self.mat.clone(), orthant(h)?, orthant(h)?)
    }
}

/// `M_ij = (2/√n) cos(2πij/n)` for `i, j = 1..(n−1)/2`.
pub fn gen_circulant(n: usize) -> Result<CirculantReduction> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidInput("circulant reduction needs an odd n ≥ 3".into()));
    }
    let h = (n - 1) / 2;
    let nf = n as f64;
    let mat = Mat::from_fn(h, h, |i, j| {
        2.0 / nf.sqrt() * (2.0 * PI * ((i + 1) * (j + 1)) as f64 / nf).cos()
    });
    Ok(CirculantReduction { n, mat })
}

#[derive(Debug, Clone)]
pub struct CirculantReconstruction {
    /// Symmetric circulant PSD matrix.
    pub p_mat: Mat,
    /// Symmetric circulant nonnegative matrix.
    pub n_mat: Mat,
    pub angle: f64,
}

/// Rebuild the circulant PSD / nonnegative pair from a solution of `PSV(M)`.
pub fn reconstruct_circulant(red: &CirculantReduction, sol: &Solution) -> Result<CirculantReconstruction> {
    let n = red.n;
    let h = red.half();
    if sol.u.len() != h || sol.v.len() != h {
        return Err(Error::InvalidInput("solution does not match the reduction".into()));
    }
    let nf = n as f64;
    let a = &sol.u * (2.0 * nf).sqrt();
    let eig = &sol.v * 2f64.sqrt();
    let mut first_row = vec![0.0; n];
    for k in 1..=h {
        first_row[k] = a[k - 1];
        first_row[n - k] = a[k - 1];
    }
    let n_mat = Mat::from_fn(n, n, |r, s| first_row[(s + n - r) % n]);
    let p_mat = Mat::from_fn(n, n, |r, s| {
        let diff = (r as f64) - (s as f64);
        (1..=h)
            .map(|j| eig[j - 1] * 2.0 / nf * (2.0 * PI * j as f64 * diff / nf).cos())
            .sum()
    });
    let cos = p_mat.dot(&n_mat) / (p_mat.norm() * n_mat.norm());
    Ok(CirculantReconstruction {
        angle: cos.clamp(-1.0, 1.0).acos(),
        p_mat,
        n_mat,
    })
}

/// Result of the maximal angle between the PSD cone and the cone of
/// entrywise nonnegative symmetric matrices.
#[derive(Debug, Clone)]
pub struct MatrixConeSolution {
    pub p_mat: Mat,
    pub n_mat: Mat,
    pub lambda: f64,
    pub angle: f64,
    pub kkt_residual: f64,
    pub restarts: usize,
}

pub fn ma_psd_nn(n: usize, cfg: &EaoConfig) -> Result<MatrixConeSolution> {
    if n < 2 {
        return Err(Error::InvalidInput("matrix size must be at least 2".into()));
    }
    let dim = n * (n + 1) / 2;
    let a = Mat::identity(dim, dim);
    let (p, q) = (psd_oracle(n), nonneg_sym_oracle(n));
    let (run, restarts) = multistart_core(&a, &p, &q, cfg)?;
    let kkt = oracle_kkt_residual(&p, &q, &a, &run.u, &run.v);
    Ok(MatrixConeSolution {
        p_mat: smat(&run.u, n),
        n_mat: smat(&run.v, n),
        lambda: run.value,
        angle: run.value.clamp(-1.0, 1.0).acos(),
        kkt_residual: kkt,
        restarts,
    })
}

/// Smallest eigenvalue of a symmetric matrix, for feasibility checks.
pub fn min_eigenvalue(s: &Mat) -> Result<f64> {
    Ok(sym_eig(&((s + s.transpose()) * 0.5))?.0[0])
}
