//! Dense complex linear algebra.
//!
//! The full SVD is a one-sided (Hestenes) Jacobi iteration, which is deterministic
//! and resolves small singular values to high relative accuracy. Rank-only queries
//! go through nalgebra's bidiagonal solver and fall back to Jacobi when it fails.
//! Hermitian eigendecompositions use nalgebra's `SymmetricEigen`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RTOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn check_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Thin singular value decomposition `a = u * diag(s) * v_adj`.
///
/// `s` is sorted in non-increasing order and has length `min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v_adj: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * &self.v_adj
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    check_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Svd {
            u: CMatrix::zeros(m, 0),
            s: vec![],
            v_adj: CMatrix::zeros(0, n),
        });
    }
    if m >= n {
        let (u, s, v) = jacobi_tall(a.clone())?;
        Ok(Svd {
            u,
            s,
            v_adj: v.adjoint(),
        })
    } else {
        let (u, s, v) = jacobi_tall(a.adjoint())?;
        Ok(Svd {
            u: v,
            s,
            v_adj: u.adjoint(),
        })
    }
}

/// One-sided Jacobi on a matrix with `m >= n`. Returns `(U, s, V)` with `A = U diag(s) V^*`.
fn jacobi_tall(mut w: CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let (m, n) = w.shape();
    let mut v = CMatrix::identity(n, n);
    let tol = f64::EPSILON * (m as f64).sqrt();
    let negligible = (f64::EPSILON * w.norm()).powi(2);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let wp = w.column(p);
                    let wq = w.column(q);
                    (wp.norm_squared(), wq.norm_squared(), wp.dotc(&wq))
                };
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut w, p, q, cs, sn, phase.conj());
                rotate_columns(&mut v, p, q, cs, sn, phase.conj());
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Jacobi SVD on {m}x{n} matrix exceeded {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = vec![false; n];
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        vs.set_column(k, &v.column(j));
        if norms[j] > 0.0 && norms[j] * norms[j] > negligible {
            u.set_column(k, &(w.column(j) / real(norms[j])));
            filled[k] = true;
        }
    }
    complete_orthonormal(&mut u, &filled);
    Ok((u, s, vs))
}

fn rotate_columns(x: &mut CMatrix, p: usize, q: usize, cs: f64, sn: f64, phase: C64) {
    let rows = x.nrows();
    let data = x.as_mut_slice();
    let (left, right) = data.split_at_mut(q * rows);
    let cp = &mut left[p * rows..(p + 1) * rows];
    let cq = &mut right[..rows];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let bq = *b * phase;
        let na = *a * cs - bq * sn;
        let nb = *a * sn + bq * cs;
        *a = na;
        *b = nb;
    }
}

/// Fill the columns of `u` not marked in `filled` with an orthonormal completion.
pub(crate) fn complete_orthonormal(u: &mut CMatrix, filled: &[bool]) {
    let m = u.nrows();
    let mut done = filled.to_vec();
    let mut candidate = 0usize;
    for k in 0..u.ncols() {
        if done[k] {
            continue;
        }
        while candidate < m {
            let mut e = nalgebra::DVector::<C64>::zeros(m);
            e[candidate] = real(1.0);
            candidate += 1;
            for _ in 0..2 {
                for j in (0..u.ncols()).filter(|&j| done[j]) {
                    let proj = u.column(j).dotc(&e);
                    e -= u.column(j) * proj;
                }
            }
            let nrm = e.norm();
            if nrm > 1e-8 {
                u.set_column(k, &(e / real(nrm)));
                done[k] = true;
                break;
            }
        }
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(vec![]);
    }
    match a.clone().try_svd(false, false, f64::EPSILON, 10_000) {
        Some(dec) => {
            let mut s: Vec<f64> = dec.singular_values.iter().copied().collect();
            s.sort_by(|x, y| y.total_cmp(x));
            Ok(s)
        }
        None => Ok(svd(a)?.s),
    }
}

/// Spectral norm.
pub fn op_norm(a: &CMatrix) -> f64 {
    singular_values(a)
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or(0.0)
}

/// Number of singular values above `rtol * sigma_1`.
pub fn rank_tol(a: &CMatrix, rtol: f64) -> Result<usize> {
    let s = singular_values(a)?;
    Ok(rank_of(&s, rtol))
}

pub(crate) fn rank_of(s: &[f64], rtol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&x| x > rtol * s1).count(),
        _ => 0,
    }
}

/// Smallest singular value above `rtol * sigma_1`.
pub fn smin_nonzero(a: &CMatrix, rtol: f64) -> Result<f64> {
    let s = singular_values(a)?;
    let r = rank_of(&s, rtol);
    if r == 0 {
        return Err(Error::DegenerateInput(
            "matrix has no nonzero singular value".into(),
        ));
    }
    Ok(s[r - 1])
}

/// Machine cutoff under which singular values are treated as exact zeros.
fn machine_cutoff(a: &CMatrix, s1: f64) -> f64 {
    (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * s1
}

fn pinv_from_svd(dec: &Svd, cutoff: f64) -> CMatrix {
    let n = dec.v_adj.ncols();
    let m = dec.u.nrows();
    let mut out = CMatrix::zeros(n, m);
    for (k, &sk) in dec.s.iter().enumerate() {
        if sk > cutoff && sk > 0.0 {
            let vk = dec.v_adj.row(k).adjoint();
            let uk = dec.u.column(k).adjoint();
            out += (vk / real(sk)) * uk;
        }
    }
    out
}

/// Moore-Penrose pseudoinverse. Singular values below the machine cutoff
/// `max(m, n) * eps * sigma_1` are treated as zero.
pub fn pinv(a: &CMatrix) -> Result<CMatrix> {
    pinv_trunc(a, 0.0)
}

/// Pseudoinverse after zeroing all singular values `<= t` (absolute).
pub fn pinv_trunc(a: &CMatrix, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {t}")));
    }
    let dec = svd(a)?;
    let s1 = dec.s.first().copied().unwrap_or(0.0);
    let cutoff = t.max(machine_cutoff(a, s1));
    Ok(pinv_from_svd(&dec, cutoff))
}

/// Pseudoinverse after zeroing singular values `<= rtol * sigma_1`.
pub fn pinv_rtol(a: &CMatrix, rtol: f64) -> Result<CMatrix> {
    let dec = svd(a)?;
    let s1 = dec.s.first().copied().unwrap_or(0.0);
    let cutoff = (rtol * s1).max(machine_cutoff(a, s1));
    Ok(pinv_from_svd(&dec, cutoff))
}

/// Truncation `a_t`: `a` with all singular values `<= t` set to zero.
pub fn truncate(a: &CMatrix, t: f64) -> Result<CMatrix> {
    let mut dec = svd(a)?;
    for s in dec.s.iter_mut() {
        if *s <= t {
            *s = 0.0;
        }
    }
    Ok(dec.reconstruct())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().sum()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * real(0.5)
}

/// Largest entry of `|a - a^*|`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let d = a - a.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
///
/// The input is symmetrized first, so a slightly non-Hermitian argument is
/// treated as its Hermitian part.
pub fn eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_finite(a)?;
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigh needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok((vec![], CMatrix::zeros(0, 0)));
    }
    let h = hermitian_part(a);
    let dec = h
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NonConvergence(format!("Hermitian eigensolver on {n}x{n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[i].total_cmp(&dec.eigenvalues[j]));
    let vals = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &dec.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(a)?.0)
}

/// `V f(diag) V^*` for a Hermitian matrix.
pub fn herm_apply(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = eigh(a)?;
    Ok(from_spectrum(&vals, &vecs, f))
}

pub(crate) fn from_spectrum(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (k, &lam) in vals.iter().enumerate() {
        scaled.column_mut(k).scale_mut(f(lam));
    }
    let out = scaled * vecs.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}

/// Square root of a positive semidefinite matrix; negative eigenvalues are clipped.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    herm_apply(a, |x| x.max(0.0).sqrt())
}

/// Pseudo-inverse square root: eigenvalues `<= floor` map to zero.
pub fn psd_pinv_sqrt(a: &CMatrix, floor: f64) -> Result<CMatrix> {
    herm_apply(a, |x| if x > floor { 1.0 / x.sqrt() } else { 0.0 })
}

/// Projector onto the span of eigenvectors with eigenvalue `> tol`.
pub fn support_projector(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    herm_apply(a, |x| if x > tol { 1.0 } else { 0.0 })
}

/// Trace norm (sum of singular values).
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// Maximum absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
