//! Multipartite density operators, entropies and the named example states.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, C64};
use crate::opspace::{self, Superoperator};

/// Eigenvalues at or below this are dropped from entropy sums.
pub const ENTROPY_EIG_FLOOR: f64 = 1e-12;
/// Eigenvalue clamp used inside matrix logarithms.
pub const LOG_CLAMP: f64 = 1e-14;
/// Support tolerance for relative entropy.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Tolerance for the state validity checks.
pub const STATE_TOL: f64 = 1e-10;

/// Operator on a list of sites with local dimensions `dims`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub dims: Vec<usize>,
    pub mat: CMatrix,
}

impl DensityOperator {
    /// Checked constructor: Hermitian, PSD and unit trace within [`STATE_TOL`].
    pub fn new(dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let op = Self::operator(dims, mat)?;
        op.validate_state(STATE_TOL)?;
        Ok(op)
    }

    /// Unchecked apart from shape and finiteness; for general operators.
    pub fn operator(dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let n = opspace::total_dim(&dims);
        if mat.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} for site dims {:?}",
                mat.shape(),
                dims
            )));
        }
        linalg::check_finite(&mat)?;
        Ok(DensityOperator { dims, mat })
    }

    pub fn from_ket(dims: Vec<usize>, ket: &DVector<C64>) -> Result<Self> {
        let m = ket * ket.adjoint();
        Self::new(dims, m)
    }

    pub fn validate_state(&self, tol: f64) -> Result<()> {
        let herm = linalg::hermiticity_defect(&self.mat);
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = linalg::trace(&self.mat);
        if (tr - real(1.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = linalg::eigvalsh(&self.mat)?.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    /// Trace out the listed sites.
    pub fn partial_trace(&self, remove: &[usize]) -> Result<Self> {
        let (m, dims) = opspace::partial_trace(&self.mat, &self.dims, remove)?;
        Ok(DensityOperator { dims, mat: m })
    }

    /// Reduced operator on `keep`, in the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let remove: Vec<usize> = (0..self.n_sites()).filter(|s| !keep.contains(s)).collect();
        let reduced = self.partial_trace(&remove)?;
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        let perm: Vec<usize> = keep
            .iter()
            .map(|s| sorted.iter().position(|x| x == s).unwrap())
            .collect();
        reduced.permute(&perm)
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let (m, dims) = opspace::permute_sites(&self.mat, &self.dims, perm)?;
        Ok(DensityOperator { dims, mat: m })
    }

    pub fn tensor(&self, other: &Self) -> Self {
        DensityOperator {
            dims: [self.dims.clone(), other.dims.clone()].concat(),
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Apply `map` to the block of sites starting at `start`.
    pub fn apply_map(&self, map: &Superoperator, start: usize) -> Result<Self> {
        let (m, dims) = map.apply_on(&self.mat, &self.dims, start)?;
        Ok(DensityOperator { dims, mat: m })
    }

    pub fn entropy(&self) -> Result<f64> {
        von_neumann_entropy(&self.mat)
    }

    pub fn partial_transpose(&self, sites: &[usize]) -> Result<CMatrix> {
        opspace::partial_transpose(&self.mat, &self.dims, sites)
    }

    /// Operator Schmidt rank across the cut after `split` sites.
    pub fn osr(&self, split: usize, rtol: f64) -> Result<usize> {
        opspace::osr(&self.mat, &self.dims, split, rtol)
    }
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    let vals = linalg::eigvalsh(rho)?;
    Ok(vals
        .iter()
        .filter(|&&x| x > ENTROPY_EIG_FLOOR)
        .map(|&x| -x * x.log2())
        .sum())
}

/// Entropy of the marginal on `sites` (empty set gives 0).
pub fn marginal_entropy(rho: &DensityOperator, sites: &[usize]) -> Result<f64> {
    if sites.is_empty() {
        return Ok(0.0);
    }
    rho.marginal(sites)?.entropy()
}

fn check_disjoint(parts: &[&[usize]], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for part in parts {
        for &s in *part {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidArgument(format!(
                    "site sets {parts:?} overlap or exceed {n} sites"
                )));
            }
        }
    }
    Ok(())
}

/// `I(A:B) = S(A) + S(B) - S(AB)` on site subsets.
pub fn mutual_information(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b], rho.n_sites())?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    Ok(marginal_entropy(rho, a)? + marginal_entropy(rho, b)? - marginal_entropy(rho, &ab)?)
}

/// `I(A:C|B) = I(A:BC) - I(A:B)`.
pub fn conditional_mutual_information(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    check_disjoint(&[a, b, c], rho.n_sites())?;
    let bc: Vec<usize> = b.iter().chain(c).copied().collect();
    Ok(mutual_information(rho, a, &bc)? - mutual_information(rho, a, b)?)
}

/// `D(rho||sigma)` in bits; `+inf` when the support of `rho` is not inside that of `sigma`.
pub fn relative_entropy(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    let (svals, svecs) = linalg::eigh(sigma)?;
    let mut outside = 0.0;
    let mut cross = 0.0;
    for (k, &lam) in svals.iter().enumerate() {
        let v = svecs.column(k);
        let w = (v.adjoint() * rho * v)[(0, 0)].re;
        if lam > SUPPORT_TOL {
            cross += w * lam.max(LOG_CLAMP).log2();
        } else {
            outside += w;
        }
    }
    if outside > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let neg_s = linalg::eigvalsh(rho)?
        .iter()
        .filter(|&&x| x > ENTROPY_EIG_FLOOR)
        .map(|&x| x * x.max(LOG_CLAMP).log2())
        .sum::<f64>();
    Ok(neg_s - cross)
}

/// `(1/2) ||a - b||_1`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let d = a - b;
    if linalg::hermiticity_defect(&d) > 1e-12 {
        return Ok(0.5 * linalg::trace_norm(&d)?);
    }
    Ok(0.5 * linalg::eigvalsh(&d)?.iter().map(|x| x.abs()).sum::<f64>())
}

/// Computational basis ket `|digits>` on qubit-like sites.
pub fn basis_ket(dims: &[usize], digits: &[usize]) -> DVector<C64> {
    let n = opspace::total_dim(dims);
    let mut idx = 0;
    for (d, x) in dims.iter().zip(digits) {
        idx = idx * d + x;
    }
    let mut v = DVector::zeros(n);
    v[idx] = real(1.0);
    v
}

fn projector(v: &DVector<C64>) -> CMatrix {
    v * v.adjoint()
}

/// `(|0..0> + e^{i alpha}|1..1>)/sqrt(2)` on `n` qubits.
pub fn ghz_ket(n: usize, alpha: f64) -> DVector<C64> {
    let dims = vec![2; n];
    let z = basis_ket(&dims, &vec![0; n]);
    let o = basis_ket(&dims, &vec![1; n]);
    (z + o * C64::from_polar(1.0, alpha)) * real(std::f64::consts::FRAC_1_SQRT_2)
}

/// Uniform superposition of single-excitation kets on `n` qubits.
pub fn w_ket(n: usize) -> DVector<C64> {
    let dims = vec![2; n];
    let mut v = DVector::zeros(1 << n);
    for k in 0..n {
        let mut digits = vec![0; n];
        digits[k] = 1;
        v += basis_ket(&dims, &digits);
    }
    v / real((n as f64).sqrt())
}

/// Named example states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedState {
    Ghz { n: usize },
    GhzAlpha { n: usize, alpha: f64 },
    ClassicalGhz { n: usize },
    W { n: usize },
    SigmaPlus,
    SigmaMinus,
    AddState { n: usize },
}

impl NamedState {
    pub fn build(&self) -> Result<DensityOperator> {
        match *self {
            NamedState::Ghz { n } => ghz(n, 0.0),
            NamedState::GhzAlpha { n, alpha } => ghz(n, alpha),
            NamedState::ClassicalGhz { n } => cghz(n),
            NamedState::W { n } => w_state(n),
            NamedState::SigmaPlus => sigma_pm(1.0),
            NamedState::SigmaMinus => sigma_pm(-1.0),
            NamedState::AddState { n } => addstate(n),
        }
    }
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedState::Ghz { n } => write!(f, "ghz{n}"),
            NamedState::GhzAlpha { n, alpha } => write!(f, "ghz{n}@{alpha}"),
            NamedState::ClassicalGhz { n } => write!(f, "cghz{n}"),
            NamedState::W { n } => write!(f, "w{n}"),
            NamedState::SigmaPlus => write!(f, "sigma+"),
            NamedState::SigmaMinus => write!(f, "sigma-"),
            NamedState::AddState { n } => write!(f, "addstate{n}"),
        }
    }
}

impl FromStr for NamedState {
    type Err = Error;

    /// Accepts `ghz6`, `ghz6@0.5`, `cghz4`, `w4`, `sigma+`, `sigma-`, `addstate6`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown state name '{s}'"));
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "sigma+" | "sigma_plus" => return Ok(NamedState::SigmaPlus),
            "sigma-" | "sigma_minus" => return Ok(NamedState::SigmaMinus),
            _ => {}
        }
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let (name, rest) = s.split_at(split);
        let (num, alpha) = match rest.split_once('@') {
            Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|_| bad())?)),
            None => (rest, None),
        };
        let n: usize = num.parse().map_err(|_| bad())?;
        match (name, alpha) {
            ("ghz", None) => Ok(NamedState::Ghz { n }),
            ("ghz", Some(alpha)) => Ok(NamedState::GhzAlpha { n, alpha }),
            ("cghz", None) => Ok(NamedState::ClassicalGhz { n }),
            ("w", None) => Ok(NamedState::W { n }),
            ("addstate", None) => Ok(NamedState::AddState { n }),
            _ => Err(bad()),
        }
    }
}

fn need_sites(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("{what} needs at least {min} sites")));
    }
    Ok(())
}

pub fn ghz(n: usize, alpha: f64) -> Result<DensityOperator> {
    need_sites(n, 1, "GHZ")?;
    DensityOperator::from_ket(vec![2; n], &ghz_ket(n, alpha))
}

pub fn cghz(n: usize) -> Result<DensityOperator> {
    need_sites(n, 1, "classical GHZ")?;
    let dims = vec![2; n];
    let m = (projector(&basis_ket(&dims, &vec![0; n])) + projector(&basis_ket(&dims, &vec![1; n])))
        * real(0.5);
    DensityOperator::new(dims, m)
}

pub fn w_state(n: usize) -> Result<DensityOperator> {
    need_sites(n, 1, "W")?;
    DensityOperator::from_ket(vec![2; n], &w_ket(n))
}

/// `(1/32)(2 I⊗I⊗I + (I ± Z)⊗Z⊗Z) ⊗ I` on four qubits.
pub fn sigma_pm(sign: f64) -> Result<DensityOperator> {
    let i2 = CMatrix::identity(2, 2);
    let z = CMatrix::from_diagonal(&DVector::from_vec(vec![real(1.0), real(-1.0)]));
    let i8 = CMatrix::identity(8, 8);
    let first = &i2 + &z * real(sign);
    let core = i8 * real(2.0) + first.kronecker(&z).kronecker(&z);
    DensityOperator::new(vec![2; 4], core.kronecker(&i2) / real(32.0))
}

/// `(1/2)(|0...0><0...0| + |10...01><10...01|)` on `n >= 2` qubits.
pub fn addstate(n: usize) -> Result<DensityOperator> {
    need_sites(n, 2, "addstate")?;
    let dims = vec![2; n];
    let mut edge = vec![0; n];
    edge[0] = 1;
    edge[n - 1] = 1;
    let m = (projector(&basis_ket(&dims, &vec![0; n])) + projector(&basis_ket(&dims, &edge))) * real(0.5);
    DensityOperator::new(dims, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::random;

    #[test]
    fn entropy_of_simple_states() {
        assert!(ghz(3, 0.0).unwrap().entropy().unwrap().abs() < 1e-12);
        assert!((cghz(3).unwrap().entropy().unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityOperator::new(vec![2], CMatrix::identity(2, 2) * real(0.5)).unwrap();
        assert!((mixed.entropy().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_of_ghz_and_product() {
        let g = ghz(3, 0.3).unwrap();
        assert!((mutual_information(&g, &[0], &[1, 2]).unwrap() - 2.0).abs() < 1e-10);
        assert!((mutual_information(&g, &[0], &[1]).unwrap() - 1.0).abs() < 1e-10);
        let mut r = random::rng(1);
        let a = DensityOperator::new(vec![2], random::random_density(&mut r, 2, 2)).unwrap();
        let b = DensityOperator::new(vec![2], random::random_density(&mut r, 2, 2)).unwrap();
        assert!(mutual_information(&a.tensor(&b), &[0], &[1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mutual_information_matches_relative_entropy() {
        let mut r = random::rng(2);
        for _ in 0..5 {
            let rho = DensityOperator::new(vec![2, 3], random::random_density(&mut r, 6, 3)).unwrap();
            let ra = rho.marginal(&[0]).unwrap();
            let rb = rho.marginal(&[1]).unwrap();
            let d = relative_entropy(&rho.mat, &ra.mat.kronecker(&rb.mat)).unwrap();
            let i = mutual_information(&rho, &[0], &[1]).unwrap();
            assert!((d - i).abs() < 1e-10);
        }
    }

    #[test]
    fn relative_entropy_support_violation_is_infinite() {
        let p0 = projector(&basis_ket(&[2], &[0]));
        let p1 = projector(&basis_ket(&[2], &[1]));
        assert_eq!(relative_entropy(&p0, &p1).unwrap(), f64::INFINITY);
        assert!(relative_entropy(&p0, &p0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cmi_is_nonnegative_on_random_states() {
        let mut r = random::rng(3);
        for _ in 0..5 {
            let rho = DensityOperator::new(vec![2, 2, 2], random::random_density(&mut r, 8, 2)).unwrap();
            assert!(conditional_mutual_information(&rho, &[0], &[1], &[2]).unwrap() > -1e-10);
        }
    }

    #[test]
    fn marginal_reorders_sites() {
        let mut r = random::rng(4);
        let a = DensityOperator::new(vec![2], random::random_density(&mut r, 2, 2)).unwrap();
        let b = DensityOperator::new(vec![3], random::random_density(&mut r, 3, 2)).unwrap();
        let ab = a.tensor(&b);
        let ba = ab.marginal(&[1, 0]).unwrap();
        assert_eq!(ba.dims, vec![3, 2]);
        assert!(max_abs(&(ba.mat - b.mat.kronecker(&a.mat))) < 1e-14);
    }

    #[test]
    fn sigma_states_share_marginals() {
        let p = sigma_pm(1.0).unwrap();
        let m = sigma_pm(-1.0).unwrap();
        let ab = p.marginal(&[0, 1]).unwrap();
        assert!(max_abs(&(ab.mat - CMatrix::identity(4, 4) * real(0.25))) < 1e-15);
        let bcd_p = p.marginal(&[1, 2, 3]).unwrap();
        let bcd_m = m.marginal(&[1, 2, 3]).unwrap();
        assert!(max_abs(&(bcd_p.mat - bcd_m.mat)) < 1e-15);
    }

    #[test]
    fn invalid_states_are_rejected() {
        let neg = CMatrix::from_diagonal(&DVector::from_vec(vec![real(1.5), real(-0.5)]));
        assert!(matches!(DensityOperator::new(vec![2], neg), Err(Error::InvalidState(_))));
        assert!(matches!(
            DensityOperator::new(vec![2, 2], CMatrix::identity(3, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn named_states_parse() {
        assert_eq!("ghz6".parse::<NamedState>().unwrap(), NamedState::Ghz { n: 6 });
        assert_eq!("W4".parse::<NamedState>().unwrap(), NamedState::W { n: 4 });
        assert_eq!(
            "ghz6@0.5".parse::<NamedState>().unwrap(),
            NamedState::GhzAlpha { n: 6, alpha: 0.5 }
        );
        assert!("bogus3".parse::<NamedState>().is_err());
    }

    #[test]
    fn trace_distance_of_ghz_phases() {
        let a = ghz(3, 0.0).unwrap();
        let b = ghz(3, 1.0).unwrap();
        let td = trace_distance(&a.mat, &b.mat).unwrap();
        assert!((td - 0.5f64.sin()).abs() < 1e-12);
    }
}
