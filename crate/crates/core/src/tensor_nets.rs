//! Matrix-product representations (MPS, MPO, purified MPS), their construction
//! from dense states and from sequential preparation maps, mixed-canonical
//! forms, and permutation-submatrix selectors over the interface matrices.
//!
//! A core is a three-index tensor `G[b_left, i, b_right]` stored row-major. For an
//! MPO the physical index runs over an operator basis of the site; for a purified
//! MPS it is the pair `(i, i')` of physical and ancilla index, `i * d' + i'`.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, C64};
use crate::opspace::{self, BasisKind, OperatorBasis, Superoperator};
use crate::quantum::DensityOperator;
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Mps,
    Mpo,
    Pmps,
}

/// Three-index tensor `(left bond, physical, right bond)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl Core {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Core {
            left,
            phys,
            right,
            data: vec![C64::default(); left * phys * right],
        }
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> C64 {
        self.data[(a * self.phys + i) * self.right + b]
    }

    #[inline]
    pub fn at_mut(&mut self, a: usize, i: usize, b: usize) -> &mut C64 {
        &mut self.data[(a * self.phys + i) * self.right + b]
    }

    /// `G(i)`, a `left x right` matrix.
    pub fn slice(&self, i: usize) -> CMatrix {
        CMatrix::from_fn(self.left, self.right, |a, b| self.at(a, i, b))
    }

    /// Rows `(b_left, i)`, columns `b_right`.
    pub fn left_unfolding(&self) -> CMatrix {
        CMatrix::from_row_slice(self.left * self.phys, self.right, &self.data)
    }

    /// Rows `b_left`, columns `(i, b_right)`.
    pub fn right_unfolding(&self) -> CMatrix {
        CMatrix::from_row_slice(self.left, self.phys * self.right, &self.data)
    }

    pub fn from_left_unfolding(m: &CMatrix, phys: usize) -> Self {
        let left = m.nrows() / phys;
        let right = m.ncols();
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..right {
                data.push(m[(r, c)]);
            }
        }
        Core { left, phys, right, data }
    }

    pub fn from_right_unfolding(m: &CMatrix, phys: usize) -> Self {
        let left = m.nrows();
        let right = m.ncols() / phys;
        let mut data = Vec::with_capacity(m.len());
        for r in 0..left {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Core { left, phys, right, data }
    }
}

/// A matrix-product representation of a state on sites with dimensions `site_dims`.
#[derive(Clone, Debug)]
pub struct MpRep {
    pub kind: RepKind,
    pub site_dims: Vec<usize>,
    /// Ancilla dimensions (purified MPS only).
    pub ancilla_dims: Vec<usize>,
    /// Operator basis of the physical index (MPO only).
    pub basis: BasisKind,
    pub cores: Vec<Core>,
}

impl MpRep {
    pub fn new(
        kind: RepKind,
        site_dims: Vec<usize>,
        ancilla_dims: Vec<usize>,
        basis: BasisKind,
        cores: Vec<Core>,
    ) -> Result<Self> {
        let rep = MpRep {
            kind,
            site_dims,
            ancilla_dims,
            basis,
            cores,
        };
        rep.validate()?;
        Ok(rep)
    }

    pub fn n_sites(&self) -> usize {
        self.site_dims.len()
    }

    /// Size of the physical index of site `k`.
    pub fn phys_dim(&self, k: usize) -> usize {
        let d = self.site_dims[k];
        match self.kind {
            RepKind::Mps => d,
            RepKind::Mpo => d * d,
            RepKind::Pmps => d * self.ancilla_dims[k],
        }
    }

    /// `D_0, ..., D_n`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = vec![self.cores.first().map_or(1, |c| c.left)];
        out.extend(self.cores.iter().map(|c| c.right));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.site_dims.len();
        if self.cores.len() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} cores for {} sites",
                self.cores.len(),
                n
            )));
        }
        if self.kind == RepKind::Pmps && self.ancilla_dims.len() != n {
            return Err(Error::DimensionMismatch("ancilla dims must match sites".into()));
        }
        if self.cores[0].left != 1 || self.cores[n - 1].right != 1 {
            return Err(Error::DimensionMismatch("outer bond dimensions must be 1".into()));
        }
        for k in 0..n {
            let c = &self.cores[k];
            if c.phys != self.phys_dim(k) || c.data.len() != c.left * c.phys * c.right {
                return Err(Error::DimensionMismatch(format!("core {k} has wrong physical size")));
            }
            if k + 1 < n && c.right != self.cores[k + 1].left {
                return Err(Error::DimensionMismatch(format!("bond {k} mismatch")));
            }
        }
        Ok(())
    }

    /// Full contraction: entries indexed row-major by the physical indices.
    pub fn contract(&self) -> Vec<C64> {
        let mut cur = vec![real(1.0)];
        let mut prefix = 1usize;
        for c in &self.cores {
            let mut next = vec![C64::default(); prefix * c.phys * c.right];
            for p in 0..prefix {
                for a in 0..c.left {
                    let x = cur[p * c.left + a];
                    if x == C64::default() {
                        continue;
                    }
                    for i in 0..c.phys {
                        let base = (p * c.phys + i) * c.right;
                        let src = ((a * c.phys) + i) * c.right;
                        for b in 0..c.right {
                            next[base + b] += x * c.data[src + b];
                        }
                    }
                }
            }
            prefix *= c.phys;
            cur = next;
        }
        cur
    }

    /// Dense operator on the physical sites.
    pub fn to_dense(&self) -> Result<DensityOperator> {
        let t = self.contract();
        let dims = self.site_dims.clone();
        let n = opspace::total_dim(&dims);
        let mat = match self.kind {
            RepKind::Mps => {
                let v = nalgebra::DVector::from_vec(t);
                &v * v.adjoint()
            }
            RepKind::Mpo => opspace::from_components(&t, &dims, self.basis)?,
            RepKind::Pmps => {
                let anc = opspace::total_dim(&self.ancilla_dims);
                let mut psi = CMatrix::zeros(n, anc);
                let mut interleaved = Vec::with_capacity(2 * dims.len());
                for (d, e) in dims.iter().zip(&self.ancilla_dims) {
                    interleaved.push(*d);
                    interleaved.push(*e);
                }
                for (idx, &v) in t.iter().enumerate() {
                    let mut rem = idx;
                    let mut digits = vec![0usize; interleaved.len()];
                    for s in (0..interleaved.len()).rev() {
                        digits[s] = rem % interleaved[s];
                        rem /= interleaved[s];
                    }
                    let (mut row, mut col) = (0, 0);
                    for k in 0..dims.len() {
                        row = row * dims[k] + digits[2 * k];
                        col = col * self.ancilla_dims[k] + digits[2 * k + 1];
                    }
                    psi[(row, col)] = v;
                }
                &psi * psi.adjoint()
            }
        };
        DensityOperator::operator(dims, mat)
    }

    /// State vector of an MPS.
    pub fn to_ket(&self) -> Result<nalgebra::DVector<C64>> {
        if self.kind != RepKind::Mps {
            return Err(Error::InvalidArgument("only an MPS has a state vector".into()));
        }
        Ok(nalgebra::DVector::from_vec(self.contract()))
    }

    /// Re-express MPO cores in another per-site operator basis.
    pub fn to_basis(&self, kind: BasisKind) -> Result<Self> {
        if self.kind != RepKind::Mpo {
            return Err(Error::InvalidArgument("basis change applies to MPOs".into()));
        }
        if kind == self.basis {
            return Ok(self.clone());
        }
        let mut cores = Vec::with_capacity(self.cores.len());
        for (k, c) in self.cores.iter().enumerate() {
            let d = self.site_dims[k];
            let t = OperatorBasis::new(d, kind).coefficient_matrix()
                * OperatorBasis::new(d, self.basis).coefficient_matrix().adjoint();
            let mut out = Core::zeros(c.left, c.phys, c.right);
            for a in 0..c.left {
                for b in 0..c.right {
                    for i in 0..c.phys {
                        let mut acc = C64::default();
                        for j in 0..c.phys {
                            acc += t[(i, j)] * c.at(a, j, b);
                        }
                        *out.at_mut(a, i, b) = acc;
                    }
                }
            }
            cores.push(out);
        }
        MpRep::new(RepKind::Mpo, self.site_dims.clone(), vec![], kind, cores)
    }

    /// `G_{<=k}`: rows are multi-indices of sites `0..k`, columns the bond `D_k`.
    pub fn left_interface(&self, k: usize) -> CMatrix {
        let mut acc = CMatrix::identity(1, 1);
        for c in &self.cores[..k] {
            let gl = c.left_unfolding();
            let expanded = acc.kronecker(&CMatrix::identity(c.phys, c.phys));
            acc = expanded * gl;
        }
        acc
    }

    /// `G_{>k}`: rows are multi-indices of sites `k..n`, columns the bond `D_k`.
    pub fn right_interface(&self, k: usize) -> CMatrix {
        let mut acc = CMatrix::identity(1, 1);
        for c in self.cores[k..].iter().rev() {
            let gr_t = c.right_unfolding().transpose();
            let expanded = CMatrix::identity(c.phys, c.phys).kronecker(&acc);
            acc = expanded * gr_t;
        }
        acc
    }

    /// Dense unfolding `t_m` with rows over sites `0..m`, columns over `m..n`.
    pub fn unfolding(&self, m: usize) -> CMatrix {
        let rows: usize = (0..m).map(|k| self.phys_dim(k)).product();
        let cols: usize = (m..self.n_sites()).map(|k| self.phys_dim(k)).product();
        CMatrix::from_row_slice(rows, cols, &self.contract())
    }
}

/// Tensor-train decomposition of a coefficient vector with the given physical sizes.
fn tt_decompose(data: &[C64], left: usize, phys: &[usize], rtol: f64) -> Result<Vec<Core>> {
    let n = phys.len();
    let mut cores = Vec::with_capacity(n);
    let mut rest = CMatrix::from_row_slice(left, data.len() / left, data);
    let mut left = left;
    for k in 0..n - 1 {
        let rows = left * phys[k];
        let cols = rest.len() / rows;
        let unf = CMatrix::from_row_slice(rows, cols, &row_major(&rest));
        let dec = linalg::svd(&unf)?;
        let r = linalg::rank_of(&dec.s, rtol).max(1);
        let u = dec.u.columns(0, r).into_owned();
        let mut sv = dec.v_adj.rows(0, r).into_owned();
        for j in 0..r {
            sv.row_mut(j).scale_mut(dec.s[j]);
        }
        cores.push(Core::from_left_unfolding(&u, phys[k]));
        rest = sv;
        left = r;
    }
    let last = CMatrix::from_row_slice(left, phys[n - 1], &row_major(&rest));
    cores.push(Core::from_right_unfolding(&last, phys[n - 1]));
    Ok(cores)
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    m.transpose().iter().copied().collect()
}

/// MPO in the Gell-Mann product basis with bond dimensions equal to the
/// operator Schmidt ranks at relative tolerance `rtol`.
pub fn mpo_from_dense(rho: &DensityOperator, rtol: f64) -> Result<MpRep> {
    let coeffs = opspace::to_components(&rho.mat, &rho.dims, BasisKind::GellMann)?;
    let phys: Vec<usize> = rho.dims.iter().map(|d| d * d).collect();
    let cores = tt_decompose(&coeffs, 1, &phys, rtol)?;
    MpRep::new(RepKind::Mpo, rho.dims.clone(), vec![], BasisKind::GellMann, cores)
}

/// MPS of a state vector with Schmidt-rank bond dimensions.
pub fn mps_from_ket(psi: &nalgebra::DVector<C64>, dims: &[usize], rtol: f64) -> Result<MpRep> {
    if psi.len() != opspace::total_dim(dims) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for dims {:?}",
            psi.len(),
            dims
        )));
    }
    let data: Vec<C64> = psi.iter().copied().collect();
    let cores = tt_decompose(&data, 1, dims, rtol)?;
    MpRep::new(RepKind::Mps, dims.to_vec(), vec![], BasisKind::MatrixUnit, cores)
}

/// MPO (matrix-unit basis) of `Tr_anc |Psi><Psi|` for a purified MPS, with
/// cores `sum_{i'} G(i, i') ⊗ conj(G(j, i'))` and bond dimension `D^2`.
pub fn pmps_to_mpo(p: &MpRep) -> Result<MpRep> {
    if p.kind != RepKind::Pmps {
        return Err(Error::InvalidArgument("expected a purified MPS".into()));
    }
    let mut cores = Vec::with_capacity(p.n_sites());
    for (k, c) in p.cores.iter().enumerate() {
        let d = p.site_dims[k];
        let e = p.ancilla_dims[k];
        let (dl, dr) = (c.left, c.right);
        let mut out = Core::zeros(dl * dl, d * d, dr * dr);
        for i in 0..d {
            for j in 0..d {
                for ip in 0..e {
                    let gi = c.slice(i * e + ip);
                    let gj = c.slice(j * e + ip).map(|z| z.conj());
                    let kr = gi.kronecker(&gj);
                    for a in 0..dl * dl {
                        for b in 0..dr * dr {
                            *out.at_mut(a, i * d + j, b) += kr[(a, b)];
                        }
                    }
                }
            }
        }
        cores.push(out);
    }
    MpRep::new(RepKind::Mpo, p.site_dims.clone(), vec![], BasisKind::MatrixUnit, cores)
}

/// Layout of a sequential preparation: physical sites and the ancilla after each step.
struct SeqLayout {
    head: Vec<usize>,
    anc: Vec<Vec<usize>>,
}

fn seqprep_layout(initial: &DensityOperator, n_phys: usize, maps: &[Superoperator]) -> Result<SeqLayout> {
    if n_phys == 0 || n_phys > initial.dims.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_phys} physical sites in an initial state on {:?}",
            initial.dims
        )));
    }
    let mut anc = vec![initial.dims[n_phys..].to_vec()];
    for (k, w) in maps.iter().enumerate() {
        if w.in_dims != *anc.last().unwrap() || w.out_dims.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "map {} acts on {:?}, previous ancilla is {:?}",
                k + 1,
                w.in_dims,
                anc.last().unwrap()
            )));
        }
        anc.push(w.out_dims[1..].to_vec());
    }
    Ok(SeqLayout {
        head: initial.dims[..n_phys].to_vec(),
        anc,
    })
}

impl SeqLayout {
    /// Physical sites of the prepared state; a leftover ancilla becomes trailing sites.
    fn sites(&self, maps: &[Superoperator]) -> Vec<usize> {
        self.head
            .iter()
            .copied()
            .chain(maps.iter().map(|w| w.out_dims[0]))
            .chain(self.anc.last().unwrap().iter().copied())
            .collect()
    }
}

/// Cores that turn a bond indexed by a product multi-index into one physical site per factor.
fn identity_tail(phys: &[usize]) -> Vec<Core> {
    (0..phys.len())
        .map(|j| {
            let right: usize = phys[j + 1..].iter().product();
            let mut c = Core::zeros(phys[j] * right, phys[j], right);
            for y in 0..phys[j] {
                for r in 0..right {
                    *c.at_mut(y * right + r, y, r) = real(1.0);
                }
            }
            c
        })
        .collect()
}

/// MPO of `W_n ∘ ... ∘ W_2 (initial)`. The first `n_phys` sites of `initial` are
/// physical, the rest form `Y'`; each `W_k` maps the current ancilla to
/// `(site k, next ancilla)`. Bonds after the map cores are `d_{Y'_k}^2`. Any
/// ancilla left at the end is kept as trailing physical sites.
pub fn seqprep_to_mpo(initial: &DensityOperator, n_phys: usize, maps: &[Superoperator]) -> Result<MpRep> {
    let layout = seqprep_layout(initial, n_phys, maps)?;
    let sites = layout.sites(maps);
    let coeffs = opspace::to_components(&initial.mat, &initial.dims, BasisKind::GellMann)?;
    let p_anc = opspace::op_space_dim(&layout.anc[0]);
    let mut cores = if n_phys == 1 {
        vec![Core {
            left: 1,
            phys: sites[0] * sites[0],
            right: p_anc,
            data: coeffs,
        }]
    } else {
        let mut phys: Vec<usize> = layout.head.iter().map(|d| d * d).collect();
        phys.push(p_anc);
        let mut tt = tt_decompose(&coeffs, 1, &phys, 1e-15)?;
        let tail = tt.pop().unwrap();
        let last = tt.pop().unwrap();
        let merged = last.left_unfolding() * tail.right_unfolding();
        tt.push(Core::from_left_unfolding(&merged, last.phys));
        tt
    };
    for (k, w) in maps.iter().enumerate() {
        let p = sites[n_phys + k] * sites[n_phys + k];
        let dl = w.mat.ncols();
        let dr = w.mat.nrows() / p;
        let mut core = Core::zeros(dl, p, dr);
        for a in 0..dl {
            for i in 0..p {
                for b in 0..dr {
                    *core.at_mut(a, i, b) = w.mat[(i * dr + b, a)];
                }
            }
        }
        cores.push(core);
    }
    let tail: Vec<usize> = layout.anc.last().unwrap().iter().map(|e| e * e).collect();
    cores.extend(identity_tail(&tail));
    MpRep::new(RepKind::Mpo, sites, vec![], BasisKind::GellMann, cores)
}

/// Purified MPS of the same sequentially prepared state, for an initial state
/// with one physical site. Needs a PSD initial state and completely positive
/// maps. Bonds are `d_{Y'_k}`, ancilla dimensions the Kraus ranks.
pub fn seqprep_to_pmps(rho1: &DensityOperator, maps: &[Superoperator], tol: f64) -> Result<MpRep> {
    let layout = seqprep_layout(rho1, 1, maps)?;
    let anc = &layout.anc;
    let sites = layout.sites(maps);
    let (vals, vecs) = linalg::eigh(&rho1.mat)?;
    if vals.first().copied().unwrap_or(0.0) < -tol {
        return Err(Error::InvalidState(format!("initial operator has eigenvalue {}", vals[0])));
    }
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > tol).collect();
    let dy1 = opspace::total_dim(&anc[0]);
    let e1 = kept.len().max(1);
    let mut first = Core::zeros(1, sites[0] * e1, dy1);
    for (ip, &k) in kept.iter().enumerate() {
        let w = vals[k].sqrt();
        for i in 0..sites[0] {
            for b in 0..dy1 {
                *first.at_mut(0, i * e1 + ip, b) = vecs[(i * dy1 + b, k)] * w;
            }
        }
    }
    let mut cores = vec![first];
    let mut ancilla = vec![e1];
    for (k, w) in maps.iter().enumerate() {
        let report = w.cptp_report()?;
        if report.min_choi_eig < -tol {
            return Err(Error::NotCptp(format!(
                "map {} has Choi eigenvalue {:.3e}",
                k + 1,
                report.min_choi_eig
            )));
        }
        let kraus = w.kraus(tol)?;
        let e = kraus.len().max(1);
        let d = sites[k + 1];
        let dl = opspace::total_dim(&anc[k]);
        let dr = opspace::total_dim(&anc[k + 1]);
        let mut core = Core::zeros(dl, d * e, dr);
        for (ip, kr) in kraus.iter().enumerate() {
            for a in 0..dl {
                for i in 0..d {
                    for b in 0..dr {
                        *core.at_mut(a, i * e + ip, b) = kr[(i * dr + b, a)];
                    }
                }
            }
        }
        cores.push(core);
        ancilla.push(e);
    }
    let tail = anc.last().unwrap().clone();
    ancilla.extend(std::iter::repeat(1).take(tail.len()));
    cores.extend(identity_tail(&tail));
    MpRep::new(RepKind::Pmps, sites, ancilla, BasisKind::MatrixUnit, cores)
}

/// Cores isometric on both sides of `center`, with the bond matrix diagonal.
#[derive(Clone, Debug)]
pub struct MixedCanonical {
    pub rep: MpRep,
    /// Number of sites to the left of the diagonal bond.
    pub center: usize,
    /// Diagonal of `H_m`, non-increasing.
    pub singular_values: Vec<f64>,
}

impl MixedCanonical {
    /// `t_m = G_{<=m} H_m G_{>m}^T`.
    pub fn unfolding(&self) -> CMatrix {
        let gl = self.rep.left_interface(self.center);
        let gr = self.rep.right_interface(self.center);
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.singular_values.len(),
            self.singular_values.iter().map(|&s| real(s)),
        ));
        gl * h * gr.transpose()
    }
}

fn thin_qr(m: &CMatrix) -> (CMatrix, CMatrix) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Bring `rep` into mixed-canonical form about the bond after `center` sites.
pub fn orthogonalize(rep: &MpRep, center: usize, rtol: f64) -> Result<MixedCanonical> {
    let n = rep.n_sites();
    if center == 0 || center >= n {
        return Err(Error::InvalidArgument(format!("center {center} must lie in 1..{n}")));
    }
    let mut cores = rep.cores.clone();
    for k in 0..center - 1 {
        let (q, r) = thin_qr(&cores[k].left_unfolding());
        let phys = cores[k].phys;
        cores[k] = Core::from_left_unfolding(&q, phys);
        let next = r * cores[k + 1].right_unfolding();
        let p1 = cores[k + 1].phys;
        cores[k + 1] = Core::from_right_unfolding(&next, p1);
    }
    for k in (center + 1..n).rev() {
        let (q, r) = thin_qr(&cores[k].right_unfolding().adjoint());
        let phys = cores[k].phys;
        cores[k] = Core::from_right_unfolding(&q.adjoint(), phys);
        let prev = cores[k - 1].left_unfolding() * r.adjoint();
        let p0 = cores[k - 1].phys;
        cores[k - 1] = Core::from_left_unfolding(&prev, p0);
    }
    let (ql, rl) = thin_qr(&cores[center - 1].left_unfolding());
    let (qr_, rr) = thin_qr(&cores[center].right_unfolding().adjoint());
    let bond = rl * rr.adjoint();
    let dec = linalg::svd(&bond)?;
    let r = linalg::rank_of(&dec.s, rtol).max(1);
    let u = dec.u.columns(0, r).into_owned();
    let vh = dec.v_adj.rows(0, r).into_owned();
    let pl = cores[center - 1].phys;
    let pr = cores[center].phys;
    cores[center - 1] = Core::from_left_unfolding(&(ql * u), pl);
    cores[center] = Core::from_right_unfolding(&(vh * qr_.adjoint()), pr);
    let out = MpRep::new(
        rep.kind,
        rep.site_dims.clone(),
        rep.ancilla_dims.clone(),
        rep.basis,
        cores,
    )?;
    Ok(MixedCanonical {
        rep: out,
        center,
        singular_values: dec.s[..r].to_vec(),
    })
}

/// Which interface a selector chain compresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Chain of permutation-submatrix selectors `U_j` (left) or `V_k` (right).
///
/// `levels[j][b]` is the column picked by row `b` of the level-`j` selector
/// (`None` for a zero row). `selections[j][b]` is the resulting multi-index over
/// all sites covered so far, i.e. the single nonzero column of row `b` of the
/// accumulated selector.
#[derive(Clone, Debug)]
pub struct SelectorChain {
    pub side: Side,
    pub phys: Vec<usize>,
    pub levels: Vec<Vec<Option<usize>>>,
    pub selections: Vec<Vec<Option<Vec<usize>>>>,
    /// `rk` of the compressed interface at each level.
    pub ranks: Vec<usize>,
}

/// Greedy pivoted row selection: picks rows spanning the row space of `a`, then
/// pads with unused rows (or `None`) up to `count`.
pub fn select_rows(a: &CMatrix, count: usize, rtol: f64) -> (Vec<Option<usize>>, usize) {
    let rows = a.nrows();
    let mut resid: Vec<nalgebra::DVector<C64>> = (0..rows).map(|i| a.row(i).transpose()).collect();
    let scale = resid.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut picked: Vec<usize> = Vec::new();
    let mut used = vec![false; rows];
    while picked.len() < count {
        let (best, norm) = (0..rows)
            .filter(|&i| !used[i])
            .map(|i| (i, resid[i].norm()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || norm <= rtol * scale || norm == 0.0 {
            break;
        }
        used[best] = true;
        picked.push(best);
        let q = &resid[best] / real(norm);
        for i in 0..rows {
            if !used[i] {
                let proj = q.dotc(&resid[i]);
                resid[i] -= &q * proj;
            }
        }
    }
    let rank = picked.len();
    let mut out: Vec<Option<usize>> = picked.into_iter().map(Some).collect();
    for i in 0..rows {
        if out.len() >= count {
            break;
        }
        if !used[i] {
            used[i] = true;
            out.push(Some(i));
        }
    }
    out.resize(count, None);
    (out, rank)
}

/// Selector chain over the first `upto` sites (left) or the sites from `upto`
/// on (right), so that each compressed interface keeps the rank of the
/// uncompressed one.
pub fn build_selector_chain(rep: &MpRep, upto: usize, side: Side, rtol: f64) -> Result<SelectorChain> {
    let n = rep.n_sites();
    if upto > n {
        return Err(Error::InvalidArgument(format!("upto {upto} exceeds {n} sites")));
    }
    let phys: Vec<usize> = (0..n).map(|k| rep.phys_dim(k)).collect();
    let mut levels = Vec::new();
    let mut selections: Vec<Vec<Option<Vec<usize>>>> = Vec::new();
    let mut ranks = Vec::new();
    let mut compressed = CMatrix::identity(1, 1);
    let mut prev_sel: Vec<Option<Vec<usize>>> = vec![Some(vec![])];
    match side {
        Side::Left => {
            for j in 0..upto {
                let core = &rep.cores[j];
                let p = core.phys;
                let tilde = compressed.kronecker(&CMatrix::identity(p, p)) * core.left_unfolding();
                let (rows, rank) = select_rows(&tilde, core.right, rtol);
                compressed = pick_rows(&tilde, &rows);
                let sel = rows
                    .iter()
                    .map(|r| {
                        r.and_then(|c| {
                            let (b, i) = (c / p, c % p);
                            prev_sel[b].as_ref().map(|s| {
                                let mut v = s.clone();
                                v.push(i);
                                v
                            })
                        })
                    })
                    .collect::<Vec<_>>();
                levels.push(rows);
                selections.push(sel.clone());
                ranks.push(rank);
                prev_sel = sel;
            }
        }
        Side::Right => {
            for k in (upto..n).rev() {
                let core = &rep.cores[k];
                let p = core.phys;
                let tilde = CMatrix::identity(p, p).kronecker(&compressed) * core.right_unfolding().transpose();
                let (rows, rank) = select_rows(&tilde, core.left, rtol);
                compressed = pick_rows(&tilde, &rows);
                let dr = core.right;
                let sel = rows
                    .iter()
                    .map(|r| {
                        r.and_then(|c| {
                            let (i, b) = (c / dr, c % dr);
                            prev_sel[b].as_ref().map(|s| {
                                let mut v = vec![i];
                                v.extend(s);
                                v
                            })
                        })
                    })
                    .collect::<Vec<_>>();
                levels.push(rows);
                selections.push(sel.clone());
                ranks.push(rank);
                prev_sel = sel;
            }
        }
    }
    Ok(SelectorChain {
        side,
        phys,
        levels,
        selections,
        ranks,
    })
}

fn pick_rows(a: &CMatrix, rows: &[Option<usize>]) -> CMatrix {
    CMatrix::from_fn(rows.len(), a.ncols(), |r, c| match rows[r] {
        Some(i) => a[(i, c)],
        None => C64::default(),
    })
}

impl SelectorChain {
    /// Sites covered by level `j` (0-based level count).
    fn covered(&self, level: usize) -> Vec<usize> {
        match self.side {
            Side::Left => (0..=level).collect(),
            Side::Right => {
                let n = self.phys.len();
                (n - 1 - level..n).collect()
            }
        }
    }

    /// Row-major flat index of a multi-index over the covered sites.
    fn flat(&self, level: usize, multi: &[usize]) -> usize {
        self.covered(level)
            .iter()
            .zip(multi)
            .fold(0, |acc, (&s, &i)| acc * self.phys[s] + i)
    }

    /// Level selector `U_j` (or `V_k`) as a dense 0/1 matrix.
    pub fn level_matrix(&self, level: usize) -> CMatrix {
        let rows = &self.levels[level];
        let cols = match self.side {
            Side::Left => {
                let prev = if level == 0 { 1 } else { self.levels[level - 1].len() };
                prev * self.phys[level]
            }
            Side::Right => {
                let n = self.phys.len();
                let prev = if level == 0 { 1 } else { self.levels[level - 1].len() };
                self.phys[n - 1 - level] * prev
            }
        };
        CMatrix::from_fn(rows.len(), cols, |r, c| real(if rows[r] == Some(c) { 1.0 } else { 0.0 }))
    }

    /// Accumulated selector built from the selection sets.
    pub fn accumulated(&self, level: usize) -> CMatrix {
        let sites = self.covered(level);
        let cols: usize = sites.iter().map(|&s| self.phys[s]).product();
        let sel = &self.selections[level];
        let mut out = CMatrix::zeros(sel.len(), cols);
        for (r, s) in sel.iter().enumerate() {
            if let Some(multi) = s {
                out[(r, self.flat(level, multi))] = real(1.0);
            }
        }
        out
    }

    /// Accumulated selector built as the product of level selectors.
    pub fn accumulated_by_product(&self, level: usize) -> CMatrix {
        let mut acc = CMatrix::identity(1, 1);
        for j in 0..=level {
            let site = self.covered(j)[match self.side {
                Side::Left => j,
                Side::Right => 0,
            }];
            let p = self.phys[site];
            let expanded = match self.side {
                Side::Left => acc.kronecker(&CMatrix::identity(p, p)),
                Side::Right => CMatrix::identity(p, p).kronecker(&acc),
            };
            acc = self.level_matrix(j) * expanded;
        }
        acc
    }

    /// Every row selects at most one multi-index and no column is selected twice.
    pub fn is_permutation_submatrix(&self, level: usize) -> bool {
        let m = self.accumulated(level);
        let rows_ok = (0..m.nrows()).all(|r| m.row(r).iter().filter(|z| z.norm() > 0.0).count() <= 1);
        let cols_ok = (0..m.ncols()).all(|c| m.column(c).iter().filter(|z| z.norm() > 0.0).count() <= 1);
        rows_ok && cols_ok
    }
}

/// Random MPO-shaped tensor network with Gaussian cores and bond dimensions in `1..=max_bond`.
pub fn random_mpo<R: Rng + ?Sized>(rng: &mut R, site_dims: &[usize], max_bond: usize) -> Result<MpRep> {
    let n = site_dims.len();
    let mut bonds = vec![1usize; n + 1];
    for b in bonds.iter_mut().take(n).skip(1) {
        *b = rng.gen_range(1..=max_bond);
    }
    let cores = (0..n)
        .map(|k| {
            let p = site_dims[k] * site_dims[k];
            let g = random::gaussian_matrix(rng, bonds[k] * p, bonds[k + 1]);
            Core::from_left_unfolding(&g, p)
        })
        .collect();
    MpRep::new(RepKind::Mpo, site_dims.to_vec(), vec![], BasisKind::GellMann, cores)
}

const MAGIC: &[u8; 8] = b"QRMPREP\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: RepKind,
    site_dims: Vec<usize>,
    ancilla_dims: Vec<usize>,
    basis: BasisKind,
    bond_dims: Vec<usize>,
    phys_dims: Vec<usize>,
}

impl MpRep {
    /// Binary form: magic, little-endian `u32` header length, JSON header, then
    /// every core's entries as little-endian `f64` pairs `(re, im)`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: FORMAT_VERSION,
            kind: self.kind,
            site_dims: self.site_dims.clone(),
            ancilla_dims: self.ancilla_dims.clone(),
            basis: self.basis,
            bond_dims: self.bond_dims(),
            phys_dims: self.cores.iter().map(|c| c.phys).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Serialization(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        for c in &self.cores {
            for z in &c.data {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Serialization("bad magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let h: Header = serde_json::from_slice(&json).map_err(|e| Error::Serialization(e.to_string()))?;
        if h.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported version {}", h.version)));
        }
        if h.bond_dims.len() != h.phys_dims.len() + 1 {
            return Err(Error::Serialization("inconsistent header".into()));
        }
        let mut cores = Vec::with_capacity(h.phys_dims.len());
        let mut buf = [0u8; 8];
        for (k, &p) in h.phys_dims.iter().enumerate() {
            let mut core = Core::zeros(h.bond_dims[k], p, h.bond_dims[k + 1]);
            for z in core.data.iter_mut() {
                r.read_exact(&mut buf)?;
                let re = f64::from_le_bytes(buf);
                r.read_exact(&mut buf)?;
                *z = C64::new(re, f64::from_le_bytes(buf));
            }
            cores.push(core);
        }
        MpRep::new(h.kind, h.site_dims, h.ancilla_dims, h.basis, cores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::quantum::{ghz, ghz_ket, w_state};

    #[test]
    fn mpo_from_dense_round_trips_with_osr_bonds() {
        let w = w_state(4).unwrap();
        let m = mpo_from_dense(&w, 1e-10).unwrap();
        assert!(max_abs(&(m.to_dense().unwrap().mat - &w.mat)) < 1e-12);
        let bonds = m.bond_dims();
        for k in 1..4 {
            assert_eq!(bonds[k], w.osr(k, 1e-10).unwrap());
        }
    }

    #[test]
    fn ghz_mps_canonical_weights() {
        let mps = mps_from_ket(&ghz_ket(4, 0.0), &[2; 4], 1e-10).unwrap();
        let mc = orthogonalize(&mps, 2, 1e-10).unwrap();
        assert_eq!(mc.singular_values.len(), 2);
        for s in &mc.singular_values {
            assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        assert!(max_abs(&(mc.unfolding() - mps.unfolding(2))) < 1e-12);
    }

    #[test]
    fn mixed_canonical_is_isometric() {
        let mut rng = random::rng(3);
        let m = random_mpo(&mut rng, &[2, 2, 2, 2, 2], 3).unwrap();
        for center in 1..5 {
            let mc = orthogonalize(&m, center, 1e-12).unwrap();
            for k in 0..5 {
                let c = &mc.rep.cores[k];
                if k < center {
                    let g = c.left_unfolding();
                    let gram = g.adjoint() * &g;
                    assert!(max_abs(&(gram - CMatrix::identity(c.right, c.right))) < 1e-12);
                } else {
                    let g = c.right_unfolding();
                    let gram = &g * g.adjoint();
                    assert!(max_abs(&(gram - CMatrix::identity(c.left, c.left))) < 1e-12);
                }
            }
            let dense = m.unfolding(center);
            let s = linalg::svd(&dense).unwrap().s;
            for (a, b) in mc.singular_values.iter().zip(&s) {
                assert!((a - b).abs() < 1e-10 * s[0]);
            }
        }
    }

    #[test]
    fn basis_change_preserves_operator() {
        let g = ghz(3, 0.4).unwrap();
        let m = mpo_from_dense(&g, 1e-10).unwrap();
        let mu = m.to_basis(BasisKind::MatrixUnit).unwrap();
        assert!(max_abs(&(mu.to_dense().unwrap().mat - &g.mat)) < 1e-12);
    }

    #[test]
    fn serialization_round_trip() {
        let mut rng = random::rng(5);
        let m = random_mpo(&mut rng, &[2, 3, 2], 2).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = MpRep::read_from(&buf[..]).unwrap();
        assert_eq!(back.cores, m.cores);
        assert_eq!(back.kind, m.kind);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(MpRep::read_from(&bad[..]), Err(Error::Serialization(_))));
    }

    fn sample_seqprep() -> (DensityOperator, Vec<Superoperator>) {
        let mut rng = random::rng(11);
        let rho1 = DensityOperator::new(vec![2, 2], random::random_density(&mut rng, 4, 3)).unwrap();
        let w2 = Superoperator::from_kraus(&[2], &[2, 2], &random::random_kraus(&mut rng, 2, 4, 2)).unwrap();
        let w3 = Superoperator::from_kraus(&[2], &[3], &random::random_kraus(&mut rng, 2, 3, 3)).unwrap();
        (rho1, vec![w2, w3])
    }

    #[test]
    fn seqprep_representations_agree_with_dense() {
        let (rho1, maps) = sample_seqprep();
        let dense = rho1.apply_map(&maps[0], 1).unwrap().apply_map(&maps[1], 2).unwrap();
        assert_eq!(dense.dims, vec![2, 2, 3]);
        let mpo = seqprep_to_mpo(&rho1, 1, &maps).unwrap();
        assert_eq!(mpo.bond_dims(), vec![1, 4, 4, 1]);
        assert!(max_abs(&(mpo.to_dense().unwrap().mat - &dense.mat)) < 1e-12);
        let pmps = seqprep_to_pmps(&rho1, &maps, 1e-12).unwrap();
        assert_eq!(pmps.bond_dims(), vec![1, 2, 2, 1]);
        assert!(max_abs(&(pmps.to_dense().unwrap().mat - &dense.mat)) < 1e-12);
        let via = pmps_to_mpo(&pmps).unwrap();
        assert_eq!(via.bond_dims(), vec![1, 4, 4, 1]);
        assert!(max_abs(&(via.to_dense().unwrap().mat - &dense.mat)) < 1e-12);
    }

    #[test]
    fn seqprep_with_wide_head_and_open_tail() {
        let mut rng = random::rng(12);
        let init = DensityOperator::new(vec![2, 2, 2], random::random_density(&mut rng, 8, 2)).unwrap();
        let w = Superoperator::from_kraus(&[2], &[2, 2], &random::random_kraus(&mut rng, 2, 4, 2)).unwrap();
        let dense = init.apply_map(&w, 2).unwrap();
        let mpo = seqprep_to_mpo(&init, 2, std::slice::from_ref(&w)).unwrap();
        assert_eq!(mpo.site_dims, vec![2, 2, 2, 2]);
        assert!(max_abs(&(mpo.to_dense().unwrap().mat - &dense.mat)) < 1e-12);
        let one = DensityOperator::new(vec![2, 2], random::random_density(&mut rng, 4, 2)).unwrap();
        let dense1 = one.apply_map(&w, 1).unwrap();
        let pmps = seqprep_to_pmps(&one, std::slice::from_ref(&w), 1e-12).unwrap();
        assert!(max_abs(&(pmps.to_dense().unwrap().mat - &dense1.mat)) < 1e-12);
        let mpo1 = seqprep_to_mpo(&one, 1, std::slice::from_ref(&w)).unwrap();
        assert!(max_abs(&(mpo1.to_dense().unwrap().mat - &dense1.mat)) < 1e-12);
    }

    #[test]
    fn seqprep_rejects_mismatched_maps() {
        let (rho1, maps) = sample_seqprep();
        let rev = vec![maps[1].clone(), maps[0].clone()];
        assert!(matches!(seqprep_to_mpo(&rho1, 1, &rev), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn selectors_preserve_interface_ranks() {
        let mut rng = random::rng(17);
        let m = random_mpo(&mut rng, &[2, 2, 2, 2, 2], 3).unwrap();
        let center = 2;
        let mc = orthogonalize(&m, center, 1e-12).unwrap();
        let left = build_selector_chain(&mc.rep, center, Side::Left, 1e-10).unwrap();
        let right = build_selector_chain(&mc.rep, center, Side::Right, 1e-10).unwrap();
        for j in 0..left.levels.len() {
            assert!(left.is_permutation_submatrix(j));
            assert!(max_abs(&(left.accumulated(j) - left.accumulated_by_product(j))) == 0.0);
            let g = mc.rep.left_interface(j + 1);
            let ug = left.accumulated(j) * &g;
            assert_eq!(linalg::rank_tol(&ug, 1e-10).unwrap(), linalg::rank_tol(&g, 1e-10).unwrap());
        }
        for j in 0..right.levels.len() {
            assert!(right.is_permutation_submatrix(j));
            assert!(max_abs(&(right.accumulated(j) - right.accumulated_by_product(j))) == 0.0);
        }
        let u = left.accumulated(center - 1);
        let v = right.accumulated(right.levels.len() - 1);
        let t = m.unfolding(center);
        let core = &u * &t * v.transpose();
        assert_eq!(
            linalg::rank_tol(&core, 1e-10).unwrap(),
            linalg::rank_tol(&t, 1e-10).unwrap()
        );
    }

    #[test]
    fn select_rows_pads_and_ranks() {
        let a = CMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0].map(real));
        let (rows, rank) = select_rows(&a, 3, 1e-12);
        assert_eq!(rank, 2);
        assert_eq!(rows, vec![Some(2), Some(3), Some(0)]);
    }
}
