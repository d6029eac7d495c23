//! Operator bases, transfer matrices and superoperator matrices.
//!
//! Multi-site operators are expanded in product bases. The coefficient of a product
//! element `F_{i_1} ⊗ ... ⊗ F_{i_n}` sits at the row-major position of `(i_1, ..., i_n)`,
//! so the first site is the slowest index. Superoperators are always stored in the
//! product of Hermitian (generalized Gell-Mann) bases.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, real, CMatrix, C64};

/// Which orthonormal operator basis to use on each site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BasisKind {
    /// `I/sqrt(d)` followed by normalized off-diagonal and diagonal Gell-Mann matrices.
    GellMann,
    /// Matrix units `|i><j|` at index `i*d + j`.
    MatrixUnit,
}

/// Orthonormal (Hilbert-Schmidt) basis of `B(C^d)`.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    pub d: usize,
    pub kind: BasisKind,
    pub elements: Vec<CMatrix>,
}

impl OperatorBasis {
    pub fn new(d: usize, kind: BasisKind) -> Self {
        let elements = match kind {
            BasisKind::GellMann => gell_mann_elements(d),
            BasisKind::MatrixUnit => (0..d * d)
                .map(|k| {
                    let mut e = CMatrix::zeros(d, d);
                    e[(k / d, k % d)] = real(1.0);
                    e
                })
                .collect(),
        };
        OperatorBasis { d, kind, elements }
    }

    pub fn gell_mann(d: usize) -> Self {
        Self::new(d, BasisKind::GellMann)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Coefficient map: `B[i, a*d + b] = conj(F_i[a, b])`, so `B vec(X)` lists `<F_i, X>`.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d * d, d * d, |i, ab| self.elements[i][(ab / d, ab % d)].conj())
    }
}

fn gell_mann_elements(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    out.push(CMatrix::identity(d, d) / real((d as f64).sqrt()));
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = real(FRAC_1_SQRT_2);
            s[(k, j)] = real(FRAC_1_SQRT_2);
            out.push(s);
            let mut a = CMatrix::zeros(d, d);
            a[(j, k)] = c64(0.0, -FRAC_1_SQRT_2);
            a[(k, j)] = c64(0.0, FRAC_1_SQRT_2);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut z = CMatrix::zeros(d, d);
        for j in 0..l {
            z[(j, j)] = real(norm);
        }
        z[(l, l)] = real(-(l as f64) * norm);
        out.push(z);
    }
    out
}

/// Hilbert-Schmidt inner product `Tr(a^* b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn op_space_dim(dims: &[usize]) -> usize {
    dims.iter().map(|d| d * d).product()
}

fn check_square(op: &CMatrix, dims: &[usize]) -> Result<()> {
    let n = total_dim(dims);
    if op.nrows() != n || op.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, site dims {:?} need {n}x{n}",
            op.nrows(),
            op.ncols(),
            dims
        )));
    }
    Ok(())
}

/// Digit offsets: `table[x] = sum_s digit_s(x) * stride_s` for a row-major multi-index.
fn digit_offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let n = total_dim(dims);
    let mut table = vec![0usize; n];
    for (x, slot) in table.iter_mut().enumerate() {
        let mut rem = x;
        let mut off = 0;
        for s in (0..dims.len()).rev() {
            off += (rem % dims[s]) * strides[s];
            rem /= dims[s];
        }
        *slot = off;
    }
    table
}

/// Row-major strides of the interleaved shape `[d1, d1, d2, d2, ...]`.
fn interleaved_offsets(dims: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = dims.len();
    let mut row_strides = vec![0usize; n];
    let mut col_strides = vec![0usize; n];
    let mut acc = 1usize;
    for s in (0..n).rev() {
        col_strides[s] = acc;
        acc *= dims[s];
        row_strides[s] = acc;
        acc *= dims[s];
    }
    (digit_offsets(dims, &row_strides), digit_offsets(dims, &col_strides))
}

/// Reorder entries of `op` into the tensor with index `((a1,b1), (a2,b2), ...)`.
fn interleave(op: &CMatrix, dims: &[usize]) -> Vec<C64> {
    let n = total_dim(dims);
    let (ra, rb) = interleaved_offsets(dims);
    let mut out = vec![C64::default(); n * n];
    for b in 0..n {
        for a in 0..n {
            out[ra[a] + rb[b]] = op[(a, b)];
        }
    }
    out
}

fn deinterleave(data: &[C64], dims: &[usize]) -> CMatrix {
    let n = total_dim(dims);
    let (ra, rb) = interleaved_offsets(dims);
    CMatrix::from_fn(n, n, |a, b| data[ra[a] + rb[b]])
}

/// Contract `mat` (shape `out x mid`) into the middle index of a `(left, mid, right)` tensor.
pub(crate) fn apply_block(data: &[C64], left: usize, mid: usize, right: usize, mat: &CMatrix) -> Vec<C64> {
    debug_assert_eq!(mat.ncols(), mid);
    debug_assert_eq!(data.len(), left * mid * right);
    let out_mid = mat.nrows();
    let mut out = vec![C64::default(); left * out_mid * right];
    for l in 0..left {
        let src = &data[l * mid * right..(l + 1) * mid * right];
        let dst = &mut out[l * out_mid * right..(l + 1) * out_mid * right];
        for j in 0..mid {
            let row = &src[j * right..(j + 1) * right];
            if row.iter().all(|z| *z == C64::default()) {
                continue;
            }
            for i in 0..out_mid {
                let m = mat[(i, j)];
                if m == C64::default() {
                    continue;
                }
                let drow = &mut dst[i * right..(i + 1) * right];
                for (o, x) in drow.iter_mut().zip(row) {
                    *o += m * x;
                }
            }
        }
    }
    out
}

/// Coefficients of `op` in the product basis of `kind` over sites `dims`.
pub fn to_components(op: &CMatrix, dims: &[usize], kind: BasisKind) -> Result<Vec<C64>> {
    check_square(op, dims)?;
    let mut data = interleave(op, dims);
    if kind == BasisKind::MatrixUnit {
        return Ok(data);
    }
    let sq: Vec<usize> = dims.iter().map(|d| d * d).collect();
    for s in 0..dims.len() {
        let b = OperatorBasis::new(dims[s], kind).coefficient_matrix();
        let left: usize = sq[..s].iter().product();
        let right: usize = sq[s + 1..].iter().product();
        data = apply_block(&data, left, sq[s], right, &b);
    }
    Ok(data)
}

/// Inverse of [`to_components`].
pub fn from_components(coeffs: &[C64], dims: &[usize], kind: BasisKind) -> Result<CMatrix> {
    let expect = op_space_dim(dims);
    if coeffs.len() != expect {
        return Err(Error::DimensionMismatch(format!(
            "got {} coefficients, dims {:?} need {expect}",
            coeffs.len(),
            dims
        )));
    }
    let mut data = coeffs.to_vec();
    if kind != BasisKind::MatrixUnit {
        let sq: Vec<usize> = dims.iter().map(|d| d * d).collect();
        for s in 0..dims.len() {
            let b = OperatorBasis::new(dims[s], kind).coefficient_matrix().adjoint();
            let left: usize = sq[..s].iter().product();
            let right: usize = sq[s + 1..].iter().product();
            data = apply_block(&data, left, sq[s], right, &b);
        }
    }
    Ok(deinterleave(&data, dims))
}

/// Product basis element with multi-index `index` (row-major over sites).
pub fn product_element(dims: &[usize], index: usize, kind: BasisKind) -> Result<CMatrix> {
    let mut e = vec![C64::default(); op_space_dim(dims)];
    e[index] = real(1.0);
    from_components(&e, dims, kind)
}

/// Transfer matrix `M[i, j] = <F_i^X ⊗ F_j^Y, op>` for the cut after `split` sites.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub x_dims: Vec<usize>,
    pub y_dims: Vec<usize>,
    pub kind: BasisKind,
    pub mat: CMatrix,
}

impl TransferMatrix {
    pub fn new(op: &CMatrix, dims: &[usize], split: usize, kind: BasisKind) -> Result<Self> {
        if split > dims.len() {
            return Err(Error::InvalidArgument(format!(
                "cut after {split} sites but only {} sites",
                dims.len()
            )));
        }
        let coeffs = to_components(op, dims, kind)?;
        let rows = op_space_dim(&dims[..split]);
        let cols = op_space_dim(&dims[split..]);
        Ok(TransferMatrix {
            x_dims: dims[..split].to_vec(),
            y_dims: dims[split..].to_vec(),
            kind,
            mat: CMatrix::from_row_slice(rows, cols, &coeffs),
        })
    }

    /// Operator Schmidt rank at relative tolerance `rtol`.
    pub fn osr(&self, rtol: f64) -> Result<usize> {
        linalg::rank_tol(&self.mat, rtol)
    }

    /// Reassemble the operator (inverse of [`TransferMatrix::new`]).
    pub fn to_operator(&self) -> Result<CMatrix> {
        let dims: Vec<usize> = self.x_dims.iter().chain(&self.y_dims).copied().collect();
        let coeffs: Vec<C64> = self.mat.transpose().iter().copied().collect();
        from_components(&coeffs, &dims, self.kind)
    }
}

pub fn transfer_matrix(op: &CMatrix, dims: &[usize], split: usize) -> Result<CMatrix> {
    Ok(TransferMatrix::new(op, dims, split, BasisKind::GellMann)?.mat)
}

/// Operator Schmidt rank of `op` across the cut after `split` sites.
pub fn osr(op: &CMatrix, dims: &[usize], split: usize, rtol: f64) -> Result<usize> {
    TransferMatrix::new(op, dims, split, BasisKind::GellMann)?.osr(rtol)
}

/// `N_X M N_Y^T`, the transfer matrix of `(N_X ⊗ N_Y)(op)`.
pub fn compose_transfer(nx: &Superoperator, m: &CMatrix, ny: &Superoperator) -> Result<CMatrix> {
    if nx.mat.ncols() != m.nrows() || ny.mat.ncols() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "transfer {}x{} against maps {:?} and {:?}",
            m.nrows(),
            m.ncols(),
            nx.mat.shape(),
            ny.mat.shape()
        )));
    }
    Ok(&nx.mat * m * ny.mat.transpose())
}

/// Partial trace over the sites listed in `remove`.
pub fn partial_trace(op: &CMatrix, dims: &[usize], remove: &[usize]) -> Result<(CMatrix, Vec<usize>)> {
    check_square(op, dims)?;
    if let Some(&bad) = remove.iter().find(|&&s| s >= dims.len()) {
        return Err(Error::InvalidArgument(format!("site {bad} out of range")));
    }
    let keep: Vec<usize> = (0..dims.len()).filter(|s| !remove.contains(s)).collect();
    let gone: Vec<usize> = (0..dims.len()).filter(|s| remove.contains(s)).collect();
    let kd: Vec<usize> = keep.iter().map(|&s| dims[s]).collect();
    let gd: Vec<usize> = gone.iter().map(|&s| dims[s]).collect();
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let ks: Vec<usize> = keep.iter().map(|&s| strides[s]).collect();
    let gs: Vec<usize> = gone.iter().map(|&s| strides[s]).collect();
    let koff = digit_offsets(&kd, &ks);
    let goff = digit_offsets(&gd, &gs);
    let nk = total_dim(&kd);
    let mut out = CMatrix::zeros(nk, nk);
    for a in 0..nk {
        for b in 0..nk {
            let mut acc = C64::default();
            for &g in &goff {
                acc += op[(koff[a] + g, koff[b] + g)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok((out, kd))
}

/// Reorder sites: site `s` of the result is site `perm[s]` of the input.
pub fn permute_sites(op: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<(CMatrix, Vec<usize>)> {
    check_square(op, dims)?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() || perm.iter().any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
    }
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let nd: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let ns: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    let off = digit_offsets(&nd, &ns);
    let n = off.len();
    Ok((CMatrix::from_fn(n, n, |a, b| op[(off[a], off[b])]), nd))
}

/// Partial transpose on the listed sites.
pub fn partial_transpose(op: &CMatrix, dims: &[usize], sites: &[usize]) -> Result<CMatrix> {
    check_square(op, dims)?;
    let n = total_dim(dims);
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let mut out = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (mut na, mut nb) = (a, b);
            for &s in sites {
                let da = (a / strides[s]) % dims[s];
                let db = (b / strides[s]) % dims[s];
                na = na - da * strides[s] + db * strides[s];
                nb = nb - db * strides[s] + da * strides[s];
            }
            out[(na, nb)] = op[(a, b)];
        }
    }
    Ok(out)
}

/// Linear map between operator spaces, stored as `[N]_{ij} = <F_i^out, N(F_j^in)>`
/// in Gell-Mann product bases.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub mat: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(in_dims: &[usize], out_dims: &[usize], mat: CMatrix) -> Result<Self> {
        if mat.nrows() != op_space_dim(out_dims) || mat.ncols() != op_space_dim(in_dims) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} does not map {:?} -> {:?}",
                mat.shape(),
                in_dims,
                out_dims
            )));
        }
        linalg::check_finite(&mat)?;
        Ok(Superoperator {
            in_dims: in_dims.to_vec(),
            out_dims: out_dims.to_vec(),
            mat,
        })
    }

    /// Tabulate a linear map given as a function on operators.
    pub fn from_fn(
        in_dims: &[usize],
        out_dims: &[usize],
        f: impl Fn(&CMatrix) -> Result<CMatrix>,
    ) -> Result<Self> {
        let n_in = op_space_dim(in_dims);
        let n_out = op_space_dim(out_dims);
        let mut mat = CMatrix::zeros(n_out, n_in);
        for j in 0..n_in {
            let fj = product_element(in_dims, j, BasisKind::GellMann)?;
            let img = f(&fj)?;
            let col = to_components(&img, out_dims, BasisKind::GellMann)?;
            for (i, v) in col.into_iter().enumerate() {
                mat[(i, j)] = v;
            }
        }
        Self::from_matrix(in_dims, out_dims, mat)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n = op_space_dim(dims);
        Superoperator {
            in_dims: dims.to_vec(),
            out_dims: dims.to_vec(),
            mat: CMatrix::identity(n, n),
        }
    }

    /// `X -> sum_k K_k X K_k^*`.
    pub fn from_kraus(in_dims: &[usize], out_dims: &[usize], kraus: &[CMatrix]) -> Result<Self> {
        let (di, dout) = (total_dim(in_dims), total_dim(out_dims));
        for k in kraus {
            if k.shape() != (dout, di) {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {:?}, expected ({dout}, {di})",
                    k.shape()
                )));
            }
        }
        Self::from_fn(in_dims, out_dims, |x| {
            let mut acc = CMatrix::zeros(dout, dout);
            for k in kraus {
                acc += k * x * k.adjoint();
            }
            Ok(acc)
        })
    }

    /// `X -> U X U^*`.
    pub fn unitary(dims: &[usize], u: &CMatrix) -> Result<Self> {
        Self::from_kraus(dims, dims, std::slice::from_ref(u))
    }

    /// Partial trace over the listed sites of `dims`.
    pub fn partial_trace(dims: &[usize], remove: &[usize]) -> Result<Self> {
        let out: Vec<usize> = (0..dims.len())
            .filter(|s| !remove.contains(s))
            .map(|s| dims[s])
            .collect();
        Self::from_fn(dims, &out, |x| Ok(partial_trace(x, dims, remove)?.0))
    }

    /// Site permutation; site `s` of the output is site `perm[s]` of the input.
    pub fn permutation(dims: &[usize], perm: &[usize]) -> Result<Self> {
        let out: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        Self::from_fn(dims, &out, |x| Ok(permute_sites(x, dims, perm)?.0))
    }

    /// Exchange sites `i` and `j`.
    pub fn swap(dims: &[usize], i: usize, j: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..dims.len()).collect();
        perm.swap(i, j);
        Self::permutation(dims, &perm)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Superoperator) -> Result<Self> {
        if inner.out_dims != self.in_dims {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {:?}->{:?} after {:?}->{:?}",
                self.in_dims, self.out_dims, inner.in_dims, inner.out_dims
            )));
        }
        Ok(Superoperator {
            in_dims: inner.in_dims.clone(),
            out_dims: self.out_dims.clone(),
            mat: &self.mat * &inner.mat,
        })
    }

    /// `self ⊗ other` acting on concatenated site lists.
    pub fn tensor(&self, other: &Superoperator) -> Self {
        Superoperator {
            in_dims: [self.in_dims.clone(), other.in_dims.clone()].concat(),
            out_dims: [self.out_dims.clone(), other.out_dims.clone()].concat(),
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn apply(&self, op: &CMatrix) -> Result<CMatrix> {
        let c = to_components(op, &self.in_dims, BasisKind::GellMann)?;
        let out = apply_block(&c, 1, c.len(), 1, &self.mat);
        from_components(&out, &self.out_dims, BasisKind::GellMann)
    }

    /// Apply to the block of sites `start .. start + in_dims.len()` of an operator on `dims`.
    pub fn apply_on(&self, op: &CMatrix, dims: &[usize], start: usize) -> Result<(CMatrix, Vec<usize>)> {
        let end = start + self.in_dims.len();
        if end > dims.len() || dims[start..end] != self.in_dims[..] {
            return Err(Error::DimensionMismatch(format!(
                "map on {:?} cannot act at site {start} of {:?}",
                self.in_dims, dims
            )));
        }
        let c = to_components(op, dims, BasisKind::GellMann)?;
        let left = op_space_dim(&dims[..start]);
        let right = op_space_dim(&dims[end..]);
        let out = apply_block(&c, left, self.mat.ncols(), right, &self.mat);
        let new_dims: Vec<usize> = dims[..start]
            .iter()
            .chain(&self.out_dims)
            .chain(&dims[end..])
            .copied()
            .collect();
        Ok((from_components(&out, &new_dims, BasisKind::GellMann)?, new_dims))
    }

    /// Hilbert-Schmidt adjoint: `<F, N(G)> = <N^*(F), G>`.
    pub fn adjoint(&self) -> Self {
        Superoperator {
            in_dims: self.out_dims.clone(),
            out_dims: self.in_dims.clone(),
            mat: self.mat.adjoint(),
        }
    }

    /// Map whose matrix is the plain transpose of this one.
    pub fn transpose_in_basis(&self) -> Self {
        Superoperator {
            in_dims: self.out_dims.clone(),
            out_dims: self.in_dims.clone(),
            mat: self.mat.transpose(),
        }
    }

    /// Choi matrix `sum_ab |a><b| ⊗ N(|a><b|)` on input ⊗ output.
    pub fn choi(&self) -> Result<CMatrix> {
        let di = total_dim(&self.in_dims);
        let dout = total_dim(&self.out_dims);
        let mut j = CMatrix::zeros(di * dout, di * dout);
        for a in 0..di {
            for b in 0..di {
                let mut e = CMatrix::zeros(di, di);
                e[(a, b)] = real(1.0);
                let img = self.apply(&e)?;
                j.view_mut((a * dout, b * dout), (dout, dout)).copy_from(&img);
            }
        }
        Ok(j)
    }

    pub fn from_choi(in_dims: &[usize], out_dims: &[usize], choi: &CMatrix) -> Result<Self> {
        let di = total_dim(in_dims);
        let dout = total_dim(out_dims);
        if choi.shape() != (di * dout, di * dout) {
            return Err(Error::DimensionMismatch(format!("Choi matrix {:?}", choi.shape())));
        }
        Self::from_fn(in_dims, out_dims, |x| {
            let mut acc = CMatrix::zeros(dout, dout);
            for a in 0..di {
                for b in 0..di {
                    let xab = x[(a, b)];
                    if xab != C64::default() {
                        acc += choi.view((a * dout, b * dout), (dout, dout)) * xab;
                    }
                }
            }
            Ok(acc)
        })
    }

    /// Smallest Choi eigenvalue and trace-preservation defect.
    pub fn cptp_report(&self) -> Result<CptpReport> {
        let j = self.choi()?;
        let min_choi_eig = linalg::eigvalsh(&j)?.first().copied().unwrap_or(0.0);
        let di = total_dim(&self.in_dims);
        let dout = total_dim(&self.out_dims);
        let (tr_out, _) = partial_trace(&j, &[di, dout], &[1])?;
        let tp_defect = linalg::max_abs(&(tr_out - CMatrix::identity(di, di)));
        Ok(CptpReport {
            min_choi_eig,
            tp_defect,
            hermiticity_defect: linalg::hermiticity_defect(&j),
        })
    }

    /// CPTP within `tol` (PSD check at `-tol`).
    pub fn is_cptp(&self, tol: f64) -> Result<bool> {
        let r = self.cptp_report()?;
        Ok(r.min_choi_eig >= -tol && r.tp_defect <= tol && r.hermiticity_defect <= tol)
    }

    /// Kraus operators from the Choi eigendecomposition. Requires complete positivity.
    pub fn kraus(&self, tol: f64) -> Result<Vec<CMatrix>> {
        let j = self.choi()?;
        let di = total_dim(&self.in_dims);
        let dout = total_dim(&self.out_dims);
        let (vals, vecs) = linalg::eigh(&j)?;
        if vals.first().copied().unwrap_or(0.0) < -tol {
            return Err(Error::NotCptp(format!("Choi eigenvalue {}", vals[0])));
        }
        let mut out = Vec::new();
        for (k, &lam) in vals.iter().enumerate().rev() {
            if lam <= tol {
                continue;
            }
            let w = lam.sqrt();
            out.push(CMatrix::from_fn(dout, di, |c, a| vecs[(a * dout + c, k)] * w));
        }
        Ok(out)
    }
}

/// Summary of a complete-positivity / trace-preservation check.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CptpReport {
    pub min_choi_eig: f64,
    pub tp_defect: f64,
    pub hermiticity_defect: f64,
}
