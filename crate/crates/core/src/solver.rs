//! Sparse symmetric linear algebra: CSR storage, Jacobi-preconditioned
//! conjugate gradients, and Lanczos estimates of the extreme eigenvalues.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default seed for the random Lanczos start vectors.
pub const DEFAULT_SEED: u64 = 42;

/// Rows per rayon task in matrix-vector products. Each row is summed
/// sequentially, so results do not depend on the thread count.
const ROW_CHUNK: usize = 1024;

/// Restarts of CG without progress in the true residual before giving up.
const MAX_STALLS: usize = 3;

/// Square matrix in compressed sparse row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix from unsorted `(row, col, value)` triplets.
    /// Duplicates are summed in a fixed order, so the result does not
    /// depend on how the triplets were produced.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = t.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.max(c) + 1,
            });
        }
        t.par_sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(t.len() / 4);
        let mut vals: Vec<f64> = Vec::with_capacity(t.len() / 4);
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            t.extend(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(k, chunk)| {
            for (o, yi) in chunk.iter_mut().enumerate() {
                let (cols, vals) = self.row(k * ROW_CHUNK + o);
                *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
            }
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji|`, including entries stored on one side only.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on the sorted index set `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for &i in keep {
            let (cols, vs) = self.row(i);
            for (&c, &v) in cols.iter().zip(vs) {
                if map[c] != usize::MAX {
                    col_idx.push(map[c]);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n: keep.len(),
            row_ptr,
            col_idx,
            vals,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when `‖b − Ax‖ ≤ tol·‖b‖` (true residual, checked whenever the
/// recursive one says so). A direction with `pᵀAp ≤ 0` aborts with
/// [`Error::NegativeCurvature`].
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("cg tolerance {tol} must be positive")));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    // true residual at the last restart, and restarts that failed to halve it
    let mut last_true = f64::INFINITY;
    let mut stalls = 0;
    for it in 1..=maxit {
        a.matvec(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::NegativeCurvature {
                iteration: it,
                curvature: curv,
            });
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            // the recursive residual drifts from b - Ax; check and restart
            let ax = a.mul(&x);
            r = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
            let true_rel = norm2(&r) / bnorm;
            let report = |converged| SolveReport {
                iterations: it,
                relative_residual: true_rel,
                converged,
            };
            if true_rel <= tol {
                return Ok((x, report(true)));
            }
            stalls = if true_rel > 0.5 * last_true { stalls + 1 } else { 0 };
            last_true = last_true.min(true_rel);
            rel = true_rel;
            if stalls >= MAX_STALLS {
                log::warn!("cg stagnated at relative residual {true_rel:e}, above the tolerance {tol:e}");
                return Ok((x, report(false)));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    log::warn!("cg stopped after {maxit} iterations at relative residual {rel:e}");
    Ok((
        x,
        SolveReport {
            iterations: maxit,
            relative_residual: rel,
            converged: false,
        },
    ))
}

/// Largest and smallest eigenvalue of the tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-sequence bisection.
pub fn tridiag_extreme_eigs(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let m = alpha.len();
    assert!(m > 0 && beta.len() + 1 >= m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // number of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..m {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bisect = |k: usize| -> f64 {
        // k-th smallest eigenvalue, 0-based
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(m - 1), bisect(0))
}

/// Lanczos with full reorthogonalization on the operator `op`; returns the
/// largest Ritz value once it changes by less than relative `tol` on two
/// consecutive steps.
fn lanczos_max(n: usize, op: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>, tol: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let qn = norm2(&q);
    q.iter_mut().for_each(|v| *v /= qn);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut prev = f64::NAN;
    let mut stalls = 0;
    loop {
        let k = basis.len() - 1;
        let mut w = op(&basis[k])?;
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(w, b)| *w -= c * b);
            }
        }
        let (theta, _) = tridiag_extreme_eigs(&alpha, &beta);
        if !theta.is_finite() {
            return Err(Error::EigenBreakdown(format!("non-finite Ritz value at step {k}")));
        }
        if (theta - prev).abs() <= tol * theta.abs() {
            stalls += 1;
        } else {
            stalls = 0;
        }
        prev = theta;
        let b = norm2(&w);
        // an invariant subspace makes the Ritz values exact
        if stalls >= 2 || basis.len() == n || b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) {
            log::debug!("Lanczos stopped after {} steps", k + 1);
            return Ok(theta);
        }
        beta.push(b);
        w.iter_mut().for_each(|v| *v /= b);
        basis.push(w);
    }
}

fn with_retry(seed: u64, mut f: impl FnMut(&mut ChaCha8Rng) -> Result<f64>) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match f(&mut rng) {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        first => {
            log::warn!("Lanczos attempt failed ({first:?}); retrying with a fresh start");
            let v = f(&mut rng)?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::EigenBreakdown(format!("Ritz value {v} after retry")))
            }
        }
    }
}

/// Inner solve tolerance for `λ_min`. Smooth right-hand sides cannot get
/// much below `ε λ_max/λ_min` in floating point, which is already 1e-12 on
/// the finest meshes we run.
const INNER_TOL: f64 = 1e-10;

/// `(λ_max, λ_min)` of a symmetric positive definite matrix.
///
/// `λ_max` comes from Lanczos on `A`; `λ_min` from Lanczos on `A⁻¹`, each
/// application being a CG solve to relative residual [`INNER_TOL`]. The top
/// of a stiffness spectrum is nearly continuous, so `λ_max` stops at a
/// relative step of 1e-6; the bottom is well separated and `λ_min` runs to
/// 1e-8.
pub fn extreme_eigs(a: &CsrMatrix, seed: u64) -> Result<(f64, f64)> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let lmax = with_retry(seed, |rng| lanczos_max(n, &mut |x| Ok(a.mul(x)), 1e-6, rng))?;
    let maxit = 20 * n + 100;
    let inv_max = with_retry(seed.wrapping_add(1), |rng| {
        lanczos_max(
            n,
            &mut |x| {
                let (y, rep) = cg_solve(a, x, INNER_TOL, maxit)?;
                if !rep.converged {
                    log::warn!("inner solve reached residual {:e}", rep.relative_residual);
                }
                Ok(y)
            },
            1e-8,
            rng,
        )
    })?;
    Ok((lmax, 1.0 / inv_max))
}

/// Spectral condition number `λ_max / λ_min`.
pub fn condition_number(a: &CsrMatrix, seed: u64) -> Result<f64> {
    let (hi, lo) = extreme_eigs(a, seed)?;
    Ok(hi / lo)
}
