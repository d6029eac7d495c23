//! Observables and a POVM whose statistics determine `N(rho)` for an arbitrary
//! linear map `N: B(Y) -> B(X)`.
//!
//! Components are taken in the orthonormal Hermitian product basis `F_i` of `X`,
//! so `s_i = Tr(F_i N(rho)) = Tr(H_i rho)` with `H_i = N^*(F_i)^*`.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, real, CMatrix};
use crate::opspace::{self, BasisKind, Superoperator};

/// Added to `-λ_min(G_i)` when choosing the offsets `c_i`, and to the norm sum
/// defining the scale `c`.
pub const POVM_MARGIN: f64 = 1e-12;

/// `2 d_X²` Hermitian observables on `Y`: `G_i` carries `Re s_i` and
/// `G_{i + d_X²}` carries `Im s_i`.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub g_ops: Vec<CMatrix>,
}

impl ObservableSet {
    /// `d_X²`.
    pub fn n_components(&self) -> usize {
        self.g_ops.len() / 2
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.g_ops.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max)
    }

    /// `Tr(G_i rho)` for every observable.
    pub fn expectations(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let d = opspace::total_dim(&self.in_dims);
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "state {:?} for observables on {:?}",
                rho.shape(),
                self.in_dims
            )));
        }
        Ok(self.g_ops.iter().map(|g| linalg::trace(&(g * rho)).re).collect())
    }

    /// `N(rho) = Σ_i (e_i + i e_{i+d_X²}) F_i` from the expectation values `e`.
    pub fn reassemble(&self, expectations: &[f64]) -> Result<CMatrix> {
        let m = self.n_components();
        if expectations.len() != 2 * m {
            return Err(Error::DimensionMismatch(format!(
                "{} expectation values for {} observables",
                expectations.len(),
                2 * m
            )));
        }
        let s: Vec<_> = (0..m).map(|i| c64(expectations[i], expectations[i + m])).collect();
        opspace::from_components(&s, &self.out_dims, BasisKind::GellMann)
    }
}

pub fn observables_for_map(n: &Superoperator) -> Result<ObservableSet> {
    let adj = n.adjoint();
    let m = opspace::op_space_dim(&n.out_dims);
    let mut re = Vec::with_capacity(m);
    let mut im = Vec::with_capacity(m);
    for i in 0..m {
        let f = opspace::product_element(&n.out_dims, i, BasisKind::GellMann)?;
        let h = adj.apply(&f)?.adjoint();
        let h_adj = h.adjoint();
        re.push((&h + &h_adj) * real(0.5));
        im.push((&h - &h_adj) * c64(0.0, -0.5));
    }
    re.extend(im);
    Ok(ObservableSet {
        in_dims: n.in_dims.clone(),
        out_dims: n.out_dims.clone(),
        g_ops: re,
    })
}

/// Elements `E_0 = 1 - Σ E_i` and `E_i = c (G_i + c_i 1)` for `i = 1..=2 d_X²`.
#[derive(Clone, Debug)]
pub struct Povm {
    pub elements: Vec<CMatrix>,
    /// `c_i` at index `i - 1`.
    pub offsets: Vec<f64>,
    pub scale: f64,
    pub observables: ObservableSet,
}

impl Povm {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for e in &self.elements {
            lo = lo.min(linalg::eigvalsh(e)?[0]);
        }
        Ok(lo)
    }

    /// Largest entry of `Σ E_i - 1`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.elements[0].nrows();
        let sum = self.elements.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        linalg::max_abs(&(sum - CMatrix::identity(d, d)))
    }

    /// Exact outcome probabilities `Tr(E_i rho)`.
    pub fn probabilities(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let d = self.elements[0].nrows();
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("state {:?} for a POVM on dimension {d}", rho.shape())));
        }
        Ok(self.elements.iter().map(|e| linalg::trace(&(e * rho)).re).collect())
    }

    /// `Tr(G_i rho) = Tr(E_i rho) / c - c_i Tr(rho)`, with `Tr(rho) = Σ_i p_i`.
    pub fn expectations_from(&self, probabilities: &[f64]) -> Result<Vec<f64>> {
        if probabilities.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} outcomes",
                probabilities.len(),
                self.len()
            )));
        }
        let total: f64 = probabilities.iter().sum();
        Ok(probabilities[1..]
            .iter()
            .zip(&self.offsets)
            .map(|(p, ci)| p / self.scale - ci * total)
            .collect())
    }

    pub fn reconstruct(&self, probabilities: &[f64]) -> Result<CMatrix> {
        self.observables.reassemble(&self.expectations_from(probabilities)?)
    }
}

pub fn povm_for_map(n: &Superoperator) -> Result<Povm> {
    let observables = observables_for_map(n)?;
    let d = opspace::total_dim(&n.in_dims);
    let id = CMatrix::identity(d, d);
    let mut offsets = Vec::with_capacity(observables.g_ops.len());
    let mut shifted = Vec::with_capacity(observables.g_ops.len());
    let mut norm_sum = 0.0;
    for g in &observables.g_ops {
        let lo = linalg::eigvalsh(&linalg::hermitian_part(g))?[0];
        let ci = (-lo).max(0.0) + POVM_MARGIN;
        let s = g + &id * real(ci);
        norm_sum += linalg::op_norm(&s);
        offsets.push(ci);
        shifted.push(s);
    }
    let scale = 1.0 / (norm_sum + POVM_MARGIN);
    let mut elements: Vec<CMatrix> = Vec::with_capacity(shifted.len() + 1);
    let mut rest = id.clone();
    for s in shifted {
        let e = s * real(scale);
        rest -= &e;
        elements.push(e);
    }
    elements.insert(0, rest);
    Ok(Povm {
        elements,
        offsets,
        scale,
        observables,
    })
}
