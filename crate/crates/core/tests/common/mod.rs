//! Independent reference computations used by the integration tests.
//!
//! Everything here is written from first principles with plain `Vec`s so it
//! shares no code path with the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| gaussian(rng)).collect())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.len();
    let mut a: Vec<Vec<f64>> = s.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// NNLS by trying every support: the optimum is the unconstrained least
/// squares solution on its own support.
pub fn nnls_enumerate(m: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let cols = m[0].len();
    let rows = m.len();
    let mut best = (vec![0.0; cols], b.iter().map(|v| v * v).sum::<f64>().sqrt());
    for mask in 1u32..(1 << cols) {
        let idx: Vec<usize> = (0..cols).filter(|&j| mask >> j & 1 == 1).collect();
        let k = idx.len();
        let ata: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|c| (0..rows).map(|r| m[r][idx[a]] * m[r][idx[c]]).sum())
                    .collect()
            })
            .collect();
        let atb: Vec<f64> = (0..k).map(|a| (0..rows).map(|r| m[r][idx[a]] * b[r]).sum()).collect();
        let Some(z) = solve_dense(ata, atb) else { continue };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; cols];
        for (t, &j) in idx.iter().enumerate() {
            x[j] = z[t];
        }
        let res: f64 = (0..rows)
            .map(|r| {
                let e: f64 = (0..cols).map(|j| m[r][j] * x[j]).sum::<f64>() - b[r];
                e * e
            })
            .sum::<f64>()
            .sqrt();
        if res < best.1 {
            best = (x, res);
        }
    }
    best
}

/// Simplex projection by enumerating supports and solving the equality
/// constrained problem on each.
pub fn simplex_enumerate(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let idx: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
        let shift = (idx.iter().map(|&j| v[j]).sum::<f64>() - 1.0) / idx.len() as f64;
        let mut x = vec![0.0; d];
        let mut ok = true;
        for &j in &idx {
            x[j] = v[j] - shift;
            ok &= x[j] >= -1e-15;
        }
        if !ok {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, x));
        }
    }
    best.unwrap().1
}

/// Minimum of `cᵀx` over `{Ax ≤ b, lo ≤ x ≤ hi}` (finite bounds) by visiting
/// every basic solution.
pub fn lp_vertex_enumerate(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    bounds: &[(f64, f64)],
) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), hi));
        e[j] = -1.0;
        rows.push((e, -lo));
    }
    let k = rows.len();
    let mut best: Option<f64> = None;
    let mut choose = vec![0usize; n];
    fn next(choose: &mut [usize], k: usize) -> bool {
        let n = choose.len();
        let mut i = n;
        while i > 0 {
            i -= 1;
            if choose[i] < k - n + i {
                choose[i] += 1;
                for j in (i + 1)..n {
                    choose[j] = choose[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, slot) in choose.iter_mut().enumerate() {
        *slot = i;
    }
    loop {
        let sys: Vec<Vec<f64>> = choose.iter().map(|&r| rows[r].0.clone()).collect();
        let rhs: Vec<f64> = choose.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = solve_dense(sys, rhs) {
            let feasible = rows
                .iter()
                .all(|(row, bi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
            if feasible {
                let val: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
        if !next(&mut choose, k) {
            break;
        }
    }
    best
}

/// `min_{v ≥ 0, ‖v‖ = 1} ⟨c, v⟩` in closed form.
pub fn orthant_ray_min(c: &[f64]) -> f64 {
    let neg: f64 = c.iter().map(|&t| t.min(0.0).powi(2)).sum();
    if neg > 0.0 {
        -neg.sqrt()
    } else {
        c.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn psv_objective(a: &[Vec<f64>], u: &[f64]) -> f64 {
    let n = a[0].len();
    let c: Vec<f64> = (0..n).map(|j| (0..a.len()).map(|i| a[i][j] * u[i]).sum()).collect();
    orthant_ray_min(&c)
}

fn octant_point(m: usize, t: &[f64]) -> Vec<f64> {
    match m {
        2 => vec![t[0].cos(), t[0].sin()],
        3 => vec![t[0].sin() * t[1].cos(), t[0].sin() * t[1].sin(), t[0].cos()],
        _ => panic!("sphere grid oracle supports m = 2 or 3"),
    }
}

/// Orthant singular value of an `m × n` matrix with `m ∈ {2, 3}`: dense grid
/// over the spherical octant for `u`, closed-form inner minimum over `v`, then
/// a pattern-search polish from the best grid point.
pub fn psv_sphere_oracle(a: &[Vec<f64>], grid: usize) -> f64 {
    let m = a.len();
    let dims = m - 1;
    let half = std::f64::consts::FRAC_PI_2;
    let h = half / grid as f64;
    let mut best = (f64::INFINITY, vec![0.0; dims]);
    let total = (grid + 1).pow(dims as u32);
    for k in 0..total {
        let t: Vec<f64> = (0..dims).map(|d| ((k / (grid + 1).pow(d as u32)) % (grid + 1)) as f64 * h).collect();
        let f = psv_objective(a, &octant_point(m, &t));
        if f < best.0 {
            best = (f, t);
        }
    }
    let (mut fbest, mut t) = best;
    let mut step = h;
    while step > 1e-13 {
        let mut moved = false;
        for d in 0..dims {
            for s in [-1.0, 1.0] {
                let mut trial = t.clone();
                trial[d] = (trial[d] + s * step).clamp(0.0, half);
                let f = psv_objective(a, &octant_point(m, &trial));
                if f < fbest {
                    fbest = f;
                    t = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    fbest
}

/// Largest edge count of a complete bipartite subgraph, by enumerating every
/// nonempty subset of the smaller side as bitmasks. Returns the count and
/// the best (rows, cols).
pub fn max_biclique(b: &[Vec<u8>]) -> (usize, Vec<usize>, Vec<usize>) {
    let (m, n) = (b.len(), b[0].len());
    let transpose = m > n;
    let (rows, cols) = if transpose { (n, m) } else { (m, n) };
    assert!(rows <= 24, "oracle limited to 24 vertices on the smaller side");
    let entry = |r: usize, c: usize| if transpose { b[c][r] } else { b[r][c] };
    let masks: Vec<u64> = (0..rows)
        .map(|r| (0..cols).filter(|&c| entry(r, c) == 1).fold(0u64, |acc, c| acc | (1 << c)))
        .collect();
    let mut best = (0usize, 0u64, 0u64);
    for set in 1u64..(1 << rows) {
        let mut common = u64::MAX >> (64 - cols);
        for (r, mask) in masks.iter().enumerate() {
            if set >> r & 1 == 1 {
                common &= mask;
            }
        }
        let edges = set.count_ones() as usize * common.count_ones() as usize;
        if edges > best.0 {
            best = (edges, set, common);
        }
    }
    let bits = |mask: u64, len: usize| (0..len).filter(|&i| mask >> i & 1 == 1).collect::<Vec<_>>();
    let (r, c) = (bits(best.1, rows), bits(best.2, cols));
    if transpose {
        (best.0, c, r)
    } else {
        (best.0, r, c)
    }
}

/// Maximum edge biclique by depth-first search over column sets, for graphs
/// too wide for subset enumeration. Columns up to 128. Prunes on
/// `|common rows| * (|chosen| + |still compatible|)`.
pub fn max_biclique_dfs(b: &[Vec<u8>]) -> usize {
    let (m, n) = (b.len(), b[0].len());
    assert!(m <= 128);
    let col_rows: Vec<u128> = (0..n)
        .map(|c| (0..m).filter(|&r| b[r][c] == 1).fold(0u128, |acc, r| acc | (1 << r)))
        .collect();
    fn dfs(col_rows: &[u128], next: usize, rows: u128, chosen: usize, best: &mut usize) {
        let r = rows.count_ones() as usize;
        *best = (*best).max(r * chosen);
        let open = col_rows[next..].iter().filter(|&&cr| cr & rows != 0).count();
        if r * (chosen + open) <= *best {
            return;
        }
        for c in next..col_rows.len() {
            let narrowed = rows & col_rows[c];
            if narrowed != 0 {
                dfs(col_rows, c + 1, narrowed, chosen + 1, best);
            }
        }
    }
    let mut best = 0;
    let all = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    dfs(&col_rows, 0, all, 0, &mut best);
    best
}

/// Nearest point of `cone(gens)` to `z`: least squares on the span of every
/// generator subset, keeping feasible (nonnegative) coefficient vectors.
/// `gens` holds one generator per entry.
pub fn face_projection(gens: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    let p = gens.len();
    let dim = z.len();
    let mut best = (z.iter().map(|t| t * t).sum::<f64>(), vec![0.0; dim]);
    for mask in 1u32..(1 << p) {
        let idx: Vec<usize> = (0..p).filter(|&i| mask >> i & 1 == 1).collect();
        let gram: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| dot(&gens[i], &gens[j])).collect())
            .collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| dot(&gens[i], z)).collect();
        let Some(c) = solve_dense(gram, rhs) else { continue };
        if c.iter().any(|&t| t < -1e-12) {
            continue;
        }
        let mut point = vec![0.0; dim];
        for (k, &i) in idx.iter().enumerate() {
            for d in 0..dim {
                point[d] += c[k] * gens[i][d];
            }
        }
        let dist: f64 = point.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best.0 - 1e-14 {
            best = (dist, point);
        }
    }
    best.1
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
