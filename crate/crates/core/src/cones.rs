//! Finitely generated cones and the cone oracles used by the heuristics.

use crate::error::{Error, Result};
use crate::numerics::{has_full_column_rank, lp_solve, sym_eig, GramSystem, LpStatus, Mat, Vector};

/// Cosine above which two generators count as the same ray.
const DUPLICATE_COS: f64 = 1.0 - 1e-12;

/// `G·ℝᵖ₊` with unit generator columns.
#[derive(Debug, Clone)]
pub struct PolyhedralCone {
    generators: Mat,
    pointed: bool,
    label: String,
    gram: GramSystem,
}

impl PolyhedralCone {
    pub fn dim(&self) -> usize {
        self.generators.nrows()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn generators(&self) -> &Mat {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> Vector {
        self.generators.column(i).into_owned()
    }

    pub fn is_pointed(&self) -> bool {
        self.pointed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn gram(&self) -> &Mat {
        self.gram.gram()
    }

    /// Nearest cone point to `z` and its generator coefficients.
    pub fn project(&self, z: &Vector) -> (Vector, Vector) {
        self.project_from(z, None)
    }

    /// Projection warm-started from the coefficients of a nearby projection.
    pub fn project_from(&self, z: &Vector, start: Option<&Vector>) -> (Vector, Vector) {
        let f = self.generators.tr_mul(z);
        let mut coeffs = self.gram.solve_from(&f, start);
        self.gram.refine(&self.generators, z, &mut coeffs);
        (&self.generators * &coeffs, coeffs)
    }

    /// The cone spanned by a subset of the generators, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> PolyhedralCone {
        let g = self.generators.select_columns(idx);
        let pointed = self.pointed || is_pointed_matrix(&g);
        PolyhedralCone {
            gram: GramSystem::new(&g),
            generators: g,
            pointed,
            label: self.label.clone(),
        }
    }

    /// Generators of the cone mapped through a linear isometry `T` (no
    /// deduplication needed since isometries keep distinct rays distinct).
    pub fn mapped(&self, t: &Mat) -> PolyhedralCone {
        let mut g = t * &self.generators;
        for mut c in g.column_iter_mut() {
            let n = c.norm();
            c /= n;
        }
        PolyhedralCone {
            gram: GramSystem::new(&g),
            generators: g,
            pointed: self.pointed,
            label: self.label.clone(),
        }
    }
}

/// Normalize, deduplicate and classify a raw generator matrix.
pub fn make_cone(raw: &Mat) -> Result<PolyhedralCone> {
    crate::numerics::check_finite(raw, "generator matrix")?;
    let mut kept: Vec<Vector> = Vec::new();
    for (index, col) in raw.column_iter().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::InvalidGenerator { index });
        }
        let g = col / n;
        if kept.iter().all(|k| k.dot(&g) < DUPLICATE_COS) {
            kept.push(g);
        }
    }
    let g = Mat::from_columns(&kept);
    let pointed = is_pointed_matrix(&g);
    Ok(PolyhedralCone {
        gram: GramSystem::new(&g),
        generators: g,
        pointed,
        label: String::from("cone"),
    })
}

pub fn orthant(n: usize) -> Result<PolyhedralCone> {
    if n == 0 {
        return Err(Error::InvalidInput("orthant needs n ≥ 1".into()));
    }
    let g = Mat::identity(n, n);
    Ok(PolyhedralCone {
        gram: GramSystem::new(&g),
        generators: g,
        pointed: true,
        label: format!("orthant({n})"),
    })
}

/// Cone generated by `(eᵢ − eᵢ₊₁)/√2`.
pub fn schur_cone(n: usize) -> Result<PolyhedralCone> {
    if n < 2 {
        return Err(Error::InvalidInput("schur_cone needs n ≥ 2".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = Mat::from_fn(n, n - 1, |r, c| {
        if r == c {
            s
        } else if r == c + 1 {
            -s
        } else {
            0.0
        }
    });
    Ok(PolyhedralCone {
        gram: GramSystem::new(&g),
        generators: g,
        pointed: true,
        label: format!("schur({n})"),
    })
}

pub fn is_pointed(k: &PolyhedralCone) -> bool {
    k.pointed
}

/// `max eᵀx  s.t.  |Gx| ≤ 1e-9, 0 ≤ x ≤ 1` stays below 1e-6 exactly when
/// no nonzero nonnegative combination of the generators vanishes.
fn is_pointed_matrix(g: &Mat) -> bool {
    let (m, p) = g.shape();
    let mut a = Mat::zeros(2 * m, p);
    a.rows_mut(0, m).copy_from(g);
    a.rows_mut(m, m).copy_from(&(-g));
    let c = vec![-1.0; p];
    let b = vec![1e-9; 2 * m];
    match lp_solve(&c, &a, &b, &vec![(0.0, 1.0); p]) {
        Ok(out) if out.status == LpStatus::Optimal => -out.objective <= 1e-6,
        _ => has_full_column_rank(g),
    }
}

pub fn project_cone(k: &PolyhedralCone, z: &Vector) -> (Vector, Vector) {
    k.project(z)
}

/// `argmin ⟨z, A v⟩` over unit `v` in `k`, and its value.
pub fn ray_subproblem(a: &Mat, z: &Vector, k: &PolyhedralCone) -> (Vector, f64) {
    let c = a.tr_mul(z);
    let v = sphere_linmin(k, &c);
    let val = c.dot(&v);
    (v, val)
}

/// A closed convex cone accessed through projections.
pub trait ConeOracle: Send + Sync {
    fn dim(&self) -> usize;
    /// Nearest point of the cone.
    fn project(&self, z: &Vector) -> Vector;
    /// Projection that may reuse and update state from an earlier call on a
    /// nearby point.
    fn project_warm(&self, z: &Vector, _hint: &mut Option<Vector>) -> Vector {
        self.project(z)
    }
    /// Normalized negative part of `c` with respect to the cone; fails when
    /// the cone sees `c` nonnegatively.
    fn best_generator(&self, c: &Vector) -> Result<Vector>;
    /// Unit extreme element minimizing `⟨·, c⟩`.
    fn extreme_minimizer(&self, c: &Vector) -> Vector;
    fn descriptor(&self) -> String;
}

impl ConeOracle for PolyhedralCone {
    fn dim(&self) -> usize {
        self.generators.nrows()
    }

    fn project(&self, z: &Vector) -> Vector {
        PolyhedralCone::project(self, z).0
    }

    fn project_warm(&self, z: &Vector, hint: &mut Option<Vector>) -> Vector {
        let (point, coeffs) = self.project_from(z, hint.as_ref());
        *hint = Some(coeffs);
        point
    }

    fn best_generator(&self, c: &Vector) -> Result<Vector> {
        let vals = self.generators.tr_mul(c);
        if vals.min() >= 0.0 {
            return Err(Error::NoImprovingDirection);
        }
        Ok(self.extreme_minimizer(c))
    }

    fn extreme_minimizer(&self, c: &Vector) -> Vector {
        let vals = self.generators.tr_mul(c);
        self.generator(vals.argmin().0)
    }

    fn descriptor(&self) -> String {
        self.label.clone()
    }
}

/// `argmin ⟨x, c⟩` over unit `x` in the cone.
///
/// When the projection of `−c` is nonzero its normalization is optimal;
/// otherwise an extreme ray is. Both candidates are compared so a tiny,
/// inaccurate projection never wins over the exact extreme-ray answer.
pub fn sphere_linmin(oracle: &dyn ConeOracle, c: &Vector) -> Vector {
    sphere_linmin_warm(oracle, c, &mut None)
}

/// [`sphere_linmin`] with a projection warm start carried between calls.
pub fn sphere_linmin_warm(oracle: &dyn ConeOracle, c: &Vector, hint: &mut Option<Vector>) -> Vector {
    let ray = oracle.extreme_minimizer(c);
    let p = oracle.project_warm(&(-c), hint);
    let pn = p.norm();
    if pn > 1e-14 * c.norm() {
        let cand = p / pn;
        if c.dot(&cand) <= c.dot(&ray) {
            return cand;
        }
    }
    ray
}

/// Symmetric matrix → vector with `⟨svec A, svec B⟩ = tr(AB)`.
pub fn svec(s: &Mat) -> Vector {
    let n = s.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                s[(i, i)]
            } else {
                0.5 * (s[(i, j)] + s[(j, i)]) * std::f64::consts::SQRT_2
            };
            out.push(v);
        }
    }
    Vector::from_vec(out)
}

pub fn smat(v: &Vector, n: usize) -> Mat {
    let mut s = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                s[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                s[(i, j)] = x;
                s[(j, i)] = x;
            }
            k += 1;
        }
    }
    s
}

/// Positive semidefinite matrices of order `n`, flattened by `svec`.
#[derive(Debug, Clone, Copy)]
pub struct PsdOracle {
    pub n: usize,
}

/// Entrywise nonnegative symmetric matrices of order `n`, flattened by `svec`.
#[derive(Debug, Clone, Copy)]
pub struct NonnegSymOracle {
    pub n: usize,
}

pub fn psd_oracle(n: usize) -> PsdOracle {
    PsdOracle { n }
}

pub fn nonneg_sym_oracle(n: usize) -> NonnegSymOracle {
    NonnegSymOracle { n }
}

fn eig_of(v: &Vector, n: usize) -> (Vector, Mat) {
    let s = smat(v, n);
    sym_eig(&s).expect("smat output is symmetric")
}

fn rebuild(vals: &[f64], vecs: &Mat) -> Mat {
    let n = vecs.nrows();
    let mut s = Mat::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l != 0.0 {
            let q = vecs.column(k);
            s += l * q * q.transpose();
        }
    }
    s
}

impl ConeOracle for PsdOracle {
    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn project(&self, z: &Vector) -> Vector {
        let (vals, vecs) = eig_of(z, self.n);
        let clamped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
        svec(&rebuild(&clamped, &vecs))
    }

    fn best_generator(&self, c: &Vector) -> Result<Vector> {
        let (vals, vecs) = eig_of(c, self.n);
        let neg: Vec<f64> = vals.iter().map(|&l| (-l).max(0.0)).collect();
        let out = svec(&rebuild(&neg, &vecs));
        let nrm = out.norm();
        if nrm == 0.0 {
            return Err(Error::NoImprovingDirection);
        }
        Ok(out / nrm)
    }

    fn extreme_minimizer(&self, c: &Vector) -> Vector {
        let (_, vecs) = eig_of(c, self.n);
        let q = vecs.column(0);
        svec(&(q * q.transpose()))
    }

    fn descriptor(&self) -> String {
        format!("psd({})", self.n)
    }
}

impl ConeOracle for NonnegSymOracle {
    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn project(&self, z: &Vector) -> Vector {
        z.map(|v| v.max(0.0))
    }

    fn best_generator(&self, c: &Vector) -> Result<Vector> {
        let neg = c.map(|v| (-v).max(0.0));
        let nrm = neg.norm();
        if nrm == 0.0 {
            return Err(Error::NoImprovingDirection);
        }
        Ok(neg / nrm)
    }

    fn extreme_minimizer(&self, c: &Vector) -> Vector {
        let mut e = Vector::zeros(c.len());
        e[c.argmin().0] = 1.0;
        e
    }

    fn descriptor(&self) -> String {
        format!("nonneg-sym({})", self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn constructors() {
        let k = make_cone(&Mat::identity(3, 3)).unwrap();
        assert!(k.is_pointed() && k.num_generators() == 3);
        let k = make_cone(&Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0])).unwrap();
        assert_eq!(k.num_generators(), 1);
        let k = make_cone(&Mat::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0])).unwrap();
        assert!(!k.is_pointed());
        assert_eq!(
            make_cone(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap_err(),
            Error::InvalidGenerator { index: 1 }
        );
        let s = schur_cone(2).unwrap();
        assert!((s.generator(0) - v(&[1.0, -1.0]) / 2f64.sqrt()).amax() < 1e-15);
        assert!(schur_cone(1).is_err());
        for g in schur_cone(5).unwrap().generators().column_iter() {
            assert_eq!(g.sum(), 0.0);
            assert!((g.norm() - 1.0).abs() < 1e-15);
        }
        let raw = make_cone(schur_cone(6).unwrap().generators()).unwrap();
        assert!(raw.is_pointed());
    }

    #[test]
    fn projections() {
        let k = orthant(2).unwrap();
        let (p, _) = k.project(&v(&[1.0, -1.0]));
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        let s = schur_cone(4).unwrap();
        let inside = s.generators() * v(&[0.3, 1.0, 0.2]);
        let (p, c) = s.project(&inside);
        assert!((p - &inside).amax() < 1e-12);
        assert!((c - v(&[0.3, 1.0, 0.2])).amax() < 1e-12);
    }

    #[test]
    fn ray_subproblem_cases() {
        let k = orthant(2).unwrap();
        let a = Mat::identity(2, 2);
        let (x, val) = ray_subproblem(&a, &v(&[1.0, 0.0]), &k);
        assert_eq!((x.as_slice(), val), (&[0.0, 1.0][..], 0.0));
        let (x, val) = ray_subproblem(&a, &v(&[-1.0, 0.0]), &k);
        assert_eq!((x.as_slice(), val), (&[1.0, 0.0][..], -1.0));
    }

    #[test]
    fn matrix_oracles() {
        let psd = psd_oracle(2);
        let d = |a: f64, b: f64| svec(&Mat::from_diagonal(&v(&[a, b])));
        assert!((psd.project(&d(1.0, -2.0)) - d(1.0, 0.0)).amax() < 1e-14);
        assert!((psd.best_generator(&d(1.0, -3.0)).unwrap() - d(0.0, 1.0)).amax() < 1e-14);
        assert_eq!(psd.best_generator(&d(1.0, 2.0)), Err(Error::NoImprovingDirection));
        let x = sphere_linmin(&psd, &d(1.0, -3.0));
        assert!((x.dot(&d(1.0, -3.0)) + 3.0).abs() < 1e-14);

        let nn = nonneg_sym_oracle(2);
        let off = svec(&Mat::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let g = smat(&nn.best_generator(&off).unwrap(), 2);
        let want = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]) / 2f64.sqrt();
        assert!((g - want).amax() < 1e-15);
    }

    #[test]
    fn svec_preserves_frobenius() {
        let a = Mat::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, -1.0, 0.5, 3.0, 0.5, 4.0]);
        let b = Mat::from_row_slice(3, 3, &[0.0, 1.0, -2.0, 1.0, 2.0, 1.0, -2.0, 1.0, 1.0]);
        assert!((svec(&a).dot(&svec(&b)) - (&a * &b).trace()).abs() < 1e-13);
        assert!((smat(&svec(&a), 3) - a).amax() < 1e-15);
    }
}
