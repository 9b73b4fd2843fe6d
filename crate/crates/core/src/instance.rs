//! Problem triples, preprocessing, the reduction to a maximal-angle problem,
//! and KKT certification of candidate pairs.

use crate::cones::{ConeOracle, PolyhedralCone};
use crate::error::{Error, Result};
use crate::numerics::{
    check_finite, nnls, orth_basis, psd_cholesky_rank, svd_spectral, Mat, SpectralData, Vector,
    RANK_TOL,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `min ⟨u, A v⟩` over unit `u ∈ P`, `v ∈ Q`.
#[derive(Debug, Clone)]
pub struct SVInstance {
    a: Mat,
    p: PolyhedralCone,
    q: PolyhedralCone,
    spectral: SpectralData,
    cross: Mat,
}

impl SVInstance {
    pub fn new(a: Mat, p: PolyhedralCone, q: PolyhedralCone) -> Result<Self> {
        check_finite(&a, "A")?;
        if p.dim() != a.nrows() || q.dim() != a.ncols() {
            return Err(Error::InvalidInput(format!(
                "A is {}×{} but the cones live in ℝ^{} and ℝ^{}",
                a.nrows(),
                a.ncols(),
                p.dim(),
                q.dim()
            )));
        }
        let spectral = svd_spectral(&a, RANK_TOL)?;
        let cross = p.generators().transpose() * &a * q.generators();
        Ok(SVInstance {
            a,
            p,
            q,
            spectral,
            cross,
        })
    }

    /// Same matrix with different cones; reuses the spectral data.
    pub fn with_cones(&self, p: PolyhedralCone, q: PolyhedralCone) -> SVInstance {
        let cross = p.generators().transpose() * &self.a * q.generators();
        SVInstance {
            a: self.a.clone(),
            p,
            q,
            spectral: self.spectral.clone(),
            cross,
        }
    }

    /// The problem for `Aᵀ` with the cones swapped; same optimal value.
    pub fn transposed(&self) -> SVInstance {
        SVInstance {
            a: self.a.transpose(),
            p: self.q.clone(),
            q: self.p.clone(),
            spectral: SpectralData {
                sigma_max: self.spectral.sigma_max,
                multiplicity: self.spectral.multiplicity,
                left: self.spectral.right.clone(),
                right: self.spectral.left.clone(),
            },
            cross: self.cross.transpose(),
        }
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn p(&self) -> &PolyhedralCone {
        &self.p
    }
    pub fn q(&self) -> &PolyhedralCone {
        &self.q
    }
    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }
    /// `GᵀAH`.
    pub fn cross(&self) -> &Mat {
        &self.cross
    }
    pub fn norm(&self) -> f64 {
        self.spectral.sigma_max
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn value(&self, u: &Vector, v: &Vector) -> f64 {
        u.dot(&(&self.a * v))
    }

    /// Lexicographically first minimal entry of `GᵀAH`.
    pub fn min_cross_entry(&self) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..self.cross.nrows() {
            for j in 0..self.cross.ncols() {
                if self.cross[(i, j)] < best.0 {
                    best = (self.cross[(i, j)], i, j);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    ExactGlobal,
    /// The optimum lies in `[lower, upper]`; `upper` is attained by the pair.
    BoundPair { lower: f64, upper: f64 },
    Heuristic,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::ExactGlobal => "exact",
            Status::BoundPair { .. } => "bound",
            Status::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vector,
    pub v: Vector,
    pub lambda: f64,
    pub status: Status,
    pub kkt_residual: f64,
    pub support_i: Vec<usize>,
    pub support_j: Vec<usize>,
    pub wall_time: f64,
}

impl Solution {
    /// Normalize the pair, evaluate it and attach its certificate data.
    pub fn certify(inst: &SVInstance, u: &Vector, v: &Vector, status: Status, wall_time: f64) -> Result<Solution> {
        let (nu, nv) = (u.norm(), v.norm());
        if nu < 1e-12 || nv < 1e-12 {
            return Err(Error::InvalidInput("pair has a zero vector".into()));
        }
        let u = u / nu;
        let v = v / nv;
        let kkt = kkt_residual(inst, &u, &v)?;
        let (_, x) = inst.p().project(&u);
        let (_, y) = inst.q().project(&v);
        Ok(Solution {
            lambda: inst.value(&u, &v),
            u,
            v,
            status,
            kkt_residual: kkt,
            support_i: support(&x),
            support_j: support(&y),
            wall_time,
        })
    }

    pub fn angle(&self) -> f64 {
        self.lambda.clamp(-1.0, 1.0).acos()
    }

    pub fn is_exact(&self) -> bool {
        self.status == Status::ExactGlobal
    }

    /// Check the invariants every emitted solution must satisfy.
    pub fn check_invariants(&self, inst: &SVInstance) -> std::result::Result<(), String> {
        let norm = inst.norm();
        if (self.u.norm() - 1.0).abs() > 1e-8 || (self.v.norm() - 1.0).abs() > 1e-8 {
            return Err("pair is not unit".into());
        }
        let val = inst.value(&self.u, &self.v);
        if (self.lambda - val).abs() > 1e-8 * norm.max(1.0) {
            return Err(format!("lambda {} differs from ⟨u,Av⟩ {val}", self.lambda));
        }
        if self.lambda < -norm - 1e-8 {
            return Err(format!("lambda {} below −‖A‖", self.lambda));
        }
        let (min_entry, _, _) = inst.min_cross_entry();
        if self.lambda > min_entry + 1e-8 {
            return Err(format!("lambda {} above the min entry {min_entry}", self.lambda));
        }
        let tol = if self.is_exact() { 1e-7 } else { 1e-6 };
        if self.kkt_residual > tol {
            return Err(format!("kkt residual {:e} above {tol:e}", self.kkt_residual));
        }
        Ok(())
    }
}

fn support(coeffs: &Vector) -> Vec<usize> {
    let top = coeffs.amax();
    (0..coeffs.len())
        .filter(|&i| top > 0.0 && coeffs[i] > 1e-9 * top)
        .collect()
}

/// Stationarity measure of a pair for polyhedral cones, in generator
/// coordinates. Zero exactly at critical pairs.
pub fn kkt_residual(inst: &SVInstance, u: &Vector, v: &Vector) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu < 1e-12 || nv < 1e-12 {
        return Err(Error::InvalidInput("kkt_residual of a zero vector".into()));
    }
    let mut res = (nu - 1.0).abs().max((nv - 1.0).abs());
    let u = u / nu;
    let v = v / nv;
    let lambda = inst.value(&u, &v);
    let (pu, x) = inst.p().project(&u);
    let (pv, y) = inst.q().project(&v);
    res = res.max((&pu - &u).norm()).max((&pv - &v).norm());
    let g = inst.p().generators();
    let h = inst.q().generators();
    let dual_x = g.tr_mul(&(inst.a() * &pv - lambda * &pu));
    let dual_y = h.tr_mul(&(inst.a().tr_mul(&pu) - lambda * &pv));
    for (coef, dual) in [(&x, &dual_x), (&y, &dual_y)] {
        res = res.max((-dual.min()).max(0.0));
        res = res.max(coef.dot(dual).abs());
    }
    Ok(res)
}

/// Residual for a pair over general cone oracles: unit norms, membership,
/// and the projection form of complementarity `u = Π(u − (Av − λu))`.
pub fn oracle_kkt_residual(
    p: &dyn ConeOracle,
    q: &dyn ConeOracle,
    a: &Mat,
    u: &Vector,
    v: &Vector,
) -> f64 {
    let lambda = u.dot(&(a * v));
    let mut res = (u.norm() - 1.0).abs().max((v.norm() - 1.0).abs());
    res = res.max((p.project(u) - u).norm()).max((q.project(v) - v).norm());
    let gu = a * v - lambda * u;
    let gv = a.tr_mul(u) - lambda * v;
    res = res.max((p.project(&(u - &gu)) - u).norm());
    res.max((q.project(&(v - &gv)) - v).norm())
}

/// `m + n − r`: no optimal support pair is larger when `λ* ≠ ±‖A‖`.
pub fn saddle_cardinality_bound(inst: &SVInstance) -> usize {
    inst.m() + inst.n() - inst.spectral().multiplicity
}

#[derive(Debug, Clone)]
pub enum PreprocessKind {
    NonnegativeCase { lambda: f64, i: usize, j: usize },
    ExtremeCase { lambda: f64 },
    None,
}

#[derive(Debug, Clone)]
pub struct PreprocessOutcome {
    pub kind: PreprocessKind,
    pub certificate: Option<Solution>,
}

impl PreprocessOutcome {
    fn none() -> Self {
        PreprocessOutcome {
            kind: PreprocessKind::None,
            certificate: None,
        }
    }
}

/// When `GᵀAH ≥ −tol` the optimum is its minimal entry at a generator pair.
pub fn check_nonnegative_case(inst: &SVInstance, tol: f64) -> Result<PreprocessOutcome> {
    let (lambda, i, j) = inst.min_cross_entry();
    if lambda < -tol {
        return Ok(PreprocessOutcome::none());
    }
    let mut sol = Solution::certify(
        inst,
        &inst.p().generator(i),
        &inst.q().generator(j),
        Status::ExactGlobal,
        0.0,
    )?;
    // the entry itself, not a re-evaluation that may differ in the last bit
    sol.lambda = lambda;
    Ok(PreprocessOutcome {
        kind: PreprocessKind::NonnegativeCase { lambda, i, j },
        certificate: Some(sol),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeMode {
    Deterministic,
    Randomized(u64),
}

/// Decide whether `λ* = −‖A‖`: some nonzero `(Hy; Gx)` with `x, y ≥ 0` must
/// lie in the span of `[V; −U]` built from the top singular vectors.
pub fn check_extreme_case(inst: &SVInstance, mode: ExtremeMode) -> Result<PreprocessOutcome> {
    let (m, n) = (inst.m(), inst.n());
    let (p, q) = (inst.p().num_generators(), inst.q().num_generators());
    let sd = inst.spectral();
    if sd.sigma_max == 0.0 {
        return Ok(PreprocessOutcome::none());
    }
    let mut stacked = Mat::zeros(n + m, sd.multiplicity);
    stacked.rows_mut(0, n).copy_from(&sd.right);
    stacked.rows_mut(n, m).copy_from(&(-&sd.left));
    let w = orth_basis(&stacked, RANK_TOL);
    let mut block = Mat::zeros(n + m, q + p);
    block.view_mut((0, 0), (n, q)).copy_from(inst.q().generators());
    block.view_mut((n, q), (m, p)).copy_from(inst.p().generators());
    let resid = (Mat::identity(n + m, n + m) - &w * w.transpose()) * &block;
    let block_norm = crate::numerics::spectral_norm(&block);
    let threshold = 1e-7 * block_norm;

    let directions: Vec<Vector> = match mode {
        ExtremeMode::Deterministic => (0..n + m)
            .map(|i| block.row(i).transpose())
            .filter(|a| a.amax() > 0.0)
            .collect(),
        ExtremeMode::Randomized(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dir = Vector::from_fn(n + m, |_, _| StandardNormal.sample(&mut rng));
            vec![block.transpose() * dir]
        }
    };
    for a in directions {
        for sign in [1.0, -1.0] {
            let a = sign * &a;
            if let Some(z) = normalized_nnls(&resid, &a, threshold) {
                let y = z.rows(0, q).into_owned();
                let x = z.rows(q, p).into_owned();
                let u = inst.p().generators() * x;
                let v = inst.q().generators() * y;
                if u.norm() < 1e-12 || v.norm() < 1e-12 {
                    continue;
                }
                let sol = Solution::certify(inst, &u, &v, Status::ExactGlobal, 0.0)?;
                if (sol.lambda + sd.sigma_max).abs() <= 1e-8 * sd.sigma_max.max(1.0) {
                    return Ok(PreprocessOutcome {
                        kind: PreprocessKind::ExtremeCase { lambda: -sd.sigma_max },
                        certificate: Some(sol),
                    });
                }
            }
        }
    }
    Ok(PreprocessOutcome::none())
}

/// `min ‖R z‖` over `z ≥ 0` with `aᵀz = 1`, accepted when at most
/// `threshold`. The equality is folded in as an extra exact row, then the
/// NNLS solution is rescaled onto the hyperplane, so no penalty weight is
/// involved: a zero optimum is detected exactly.
pub fn normalized_nnls(r: &Mat, a: &Vector, threshold: f64) -> Option<Vector> {
    let rows = r.nrows();
    let mut m = Mat::zeros(rows + 1, r.ncols());
    m.rows_mut(0, rows).copy_from(r);
    m.row_mut(rows).copy_from(&a.transpose());
    let mut b = Vector::zeros(rows + 1);
    b[rows] = 1.0;
    let (z, _) = nnls(&m, &b);
    let t = a.dot(&z);
    if t < 0.5 {
        return None;
    }
    let z = z / t;
    ((r * &z).norm() <= threshold).then_some(z)
}

/// A maximal-angle instance equivalent to an SV instance.
#[derive(Debug, Clone)]
pub struct MaReduction {
    pub ma: SVInstance,
    pub scale: f64,
    transposed: bool,
    /// Isometry `ℝ^m → ℝ^{m+s}` carrying P.
    lift_u: Mat,
    /// Isometry `ℝ^n → ℝ^{m+s}` carrying Q.
    lift_v: Mat,
}

impl MaReduction {
    /// Pull a lifted pair back to the original instance.
    pub fn back_map(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        let u = self.lift_u.tr_mul(x);
        let v = self.lift_v.tr_mul(y);
        if self.transposed {
            (v, u)
        } else {
            (u, v)
        }
    }
}

pub fn reduce_to_ma(inst: &SVInstance) -> Result<MaReduction> {
    if inst.norm() == 0.0 {
        return Err(Error::InvalidInput("A = 0 has no maximal-angle reduction".into()));
    }
    let transposed = inst.m() < inst.n();
    let work = if transposed { inst.transposed() } else { inst.clone() };
    let (m, n) = (work.m(), work.n());
    let scale = work.norm();
    let a_hat = work.a() / scale;
    let s_mat = Mat::identity(n, n) - a_hat.transpose() * &a_hat;
    let (l, s) = psd_cholesky_rank(&((&s_mat + s_mat.transpose()) * 0.5), 1e-10)?;
    let mut lift_u = Mat::zeros(m + s, m);
    lift_u.view_mut((0, 0), (m, m)).fill_with_identity();
    let mut lift_v = Mat::zeros(m + s, n);
    lift_v.view_mut((0, 0), (m, n)).copy_from(&a_hat);
    lift_v.view_mut((m, 0), (s, n)).copy_from(&l.transpose());
    let p = work.p().mapped(&lift_u);
    let q = work.q().mapped(&lift_v);
    let ma = SVInstance::new(Mat::identity(m + s, m + s), p, q)?;
    Ok(MaReduction {
        ma,
        scale,
        transposed,
        lift_u,
        lift_v,
    })
}

/// Generators that some optimal pair never uses.
///
/// When `λ* < 0`, generator `gᵢ` can be dropped if row `i` of `GᵀAH` is
/// nonnegative and `gᵢ` has nonnegative inner products with the other
/// generators: removing its coefficient cannot raise the objective or the
/// norm of `Gx`, so an optimum with `xᵢ = 0` exists. Applied to both cones
/// until nothing changes. Returns the kept indices of P and Q.
pub fn dominated_generators(inst: &SVInstance) -> (Vec<usize>, Vec<usize>) {
    let c = inst.cross();
    let gp = inst.p().gram();
    let gq = inst.q().gram();
    let mut keep_p: Vec<usize> = (0..c.nrows()).collect();
    let mut keep_q: Vec<usize> = (0..c.ncols()).collect();
    if inst.min_cross_entry().0 >= 0.0 {
        return (keep_p, keep_q);
    }
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < keep_p.len() {
            let r = keep_p[i];
            let droppable = keep_q.iter().all(|&j| c[(r, j)] >= 0.0)
                && keep_p.iter().all(|&k| gp[(r, k)] >= 0.0);
            if droppable && keep_p.len() > 1 {
                keep_p.remove(i);
                changed = true;
            } else {
                i += 1;
            }
        }
        let mut j = 0;
        while j < keep_q.len() {
            let col = keep_q[j];
            let droppable = keep_p.iter().all(|&i| c[(i, col)] >= 0.0)
                && keep_q.iter().all(|&k| gq[(col, k)] >= 0.0);
            if droppable && keep_q.len() > 1 {
                keep_q.remove(j);
                changed = true;
            } else {
                j += 1;
            }
        }
        if !changed {
            return (keep_p, keep_q);
        }
    }
}
