//! Pseudoskeleton reconstruction `M ≈ MR (LMR)^+ LM` of a matrix from the
//! row-compressed `LM`, column-compressed `MR` and core `LMR`, with a truncated
//! variant that stays bounded under perturbations.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};
use crate::random;

/// The three compressed views of a matrix used for reconstruction.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub lm: CMatrix,
    pub mr: CMatrix,
    pub lmr: CMatrix,
}

impl Marginals {
    pub fn new(lm: CMatrix, mr: CMatrix, lmr: CMatrix) -> Result<Self> {
        if lm.nrows() != lmr.nrows() || mr.ncols() != lmr.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "LM {:?}, MR {:?}, LMR {:?}",
                lm.shape(),
                mr.shape(),
                lmr.shape()
            )));
        }
        for m in [&lm, &mr, &lmr] {
            linalg::check_finite(m)?;
        }
        Ok(Marginals { lm, mr, lmr })
    }

    /// Compress `m` with `l` on the left and `r` on the right.
    pub fn from_matrix(m: &CMatrix, l: &CMatrix, r: &CMatrix) -> Result<Self> {
        if l.ncols() != m.nrows() || r.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "L {:?}, M {:?}, R {:?}",
                l.shape(),
                m.shape(),
                r.shape()
            )));
        }
        let lm = l * m;
        let mr = m * r;
        let lmr = &lm * r;
        Self::new(lm, mr, lmr)
    }
}

/// `MR (LMR)^+ LM` with singular values of `LMR` below `rtol * sigma_1` dropped.
pub fn reconstruct(m: &Marginals, rtol: f64) -> Result<CMatrix> {
    let x = linalg::pinv_rtol(&m.lmr, rtol)?;
    Ok(&m.mr * x * &m.lm)
}

/// `MR X LM` for a caller-supplied generalized inverse `X` of `LMR`.
pub fn reconstruct_with_inverse(m: &Marginals, x: &CMatrix) -> Result<CMatrix> {
    if x.shape() != (m.lmr.ncols(), m.lmr.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "generalized inverse {:?} for LMR {:?}",
            x.shape(),
            m.lmr.shape()
        )));
    }
    Ok(&m.mr * x * &m.lm)
}

/// Random generalized inverse `X` of `c` (so `c X c = c`).
pub fn random_generalized_inverse<R: Rng + ?Sized>(rng: &mut R, c: &CMatrix) -> Result<CMatrix> {
    let p = linalg::pinv(c)?;
    let y = random::gaussian_matrix(rng, c.ncols(), c.nrows());
    Ok(&p + &y - &p * c * &y * c * &p)
}

/// Ranks entering the exactness criterion `rk(LMR) = rk(M)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RankCondition {
    pub rank_m: usize,
    pub rank_lm: usize,
    pub rank_mr: usize,
    pub rank_lmr: usize,
}

impl RankCondition {
    pub fn evaluate(m: &CMatrix, l: &CMatrix, r: &CMatrix, rtol: f64) -> Result<Self> {
        let marg = Marginals::from_matrix(m, l, r)?;
        Ok(RankCondition {
            rank_m: linalg::rank_tol(m, rtol)?,
            rank_lm: linalg::rank_tol(&marg.lm, rtol)?,
            rank_mr: linalg::rank_tol(&marg.mr, rtol)?,
            rank_lmr: linalg::rank_tol(&marg.lmr, rtol)?,
        })
    }

    /// Reconstruction is exact iff this holds.
    pub fn exact(&self) -> bool {
        self.rank_lmr == self.rank_m
    }
}

/// Quantities describing a perturbed problem `M = S + E`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilityParams {
    /// `||L|| ||S|| ||R||`.
    pub eta: f64,
    /// `sigma_min(LSR) / eta`.
    pub gamma: f64,
    /// `||E|| / ||S||`.
    pub eps: f64,
    pub s_norm: f64,
}

impl StabilityParams {
    pub fn valid_regime(&self) -> bool {
        self.gamma > 2.0 * self.eps
    }

    pub fn tau_admissible(&self, tau: f64) -> bool {
        self.valid_regime() && tau >= self.eps && tau < self.gamma - self.eps
    }

    /// `||S|| / (gamma - eps) * (4 eps / gamma + 2 eps + eps^2)`.
    pub fn tight_bound(&self) -> f64 {
        let (g, e) = (self.gamma, self.eps);
        self.s_norm / (g - e) * (4.0 * e / g + 2.0 * e + e * e)
    }

    /// `7 eps ||S|| / (gamma (gamma - eps))`.
    pub fn seven_eps_bound(&self) -> f64 {
        7.0 * self.eps * self.s_norm / (self.gamma * (self.gamma - self.eps))
    }

    /// `5 eps / gamma^2`, stated for normalized `L`, `S`, `R`; scaled by `||S||` here.
    pub fn normalized_bound(&self) -> f64 {
        5.0 * self.eps / (self.gamma * self.gamma) * self.s_norm
    }
}

/// Perturbed reconstruction problem with known ground truth `S`.
#[derive(Clone, Debug)]
pub struct StabilityProblem {
    pub l: CMatrix,
    pub s: CMatrix,
    pub r: CMatrix,
    pub e: CMatrix,
}

/// Outcome of one truncated reconstruction against the known `S`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilityOutcome {
    pub params: StabilityParams,
    pub tau: f64,
    pub err: f64,
    pub bound_tight: f64,
    pub bound_7eps: f64,
    pub bound_normalized: f64,
}

impl StabilityProblem {
    pub fn new(l: CMatrix, s: CMatrix, r: CMatrix, e: CMatrix) -> Result<Self> {
        if s.shape() != e.shape() || l.ncols() != s.nrows() || r.nrows() != s.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "L {:?}, S {:?}, R {:?}, E {:?}",
                l.shape(),
                s.shape(),
                r.shape(),
                e.shape()
            )));
        }
        Ok(StabilityProblem { l, s, r, e })
    }

    pub fn measured(&self) -> CMatrix {
        &self.s + &self.e
    }

    pub fn marginals(&self) -> Result<Marginals> {
        Marginals::from_matrix(&self.measured(), &self.l, &self.r)
    }

    pub fn params(&self, rtol: f64) -> Result<StabilityParams> {
        let s_norm = linalg::op_norm(&self.s);
        if s_norm == 0.0 {
            return Err(Error::DegenerateInput("S is zero".into()));
        }
        let eta = linalg::op_norm(&self.l) * s_norm * linalg::op_norm(&self.r);
        let core = &self.l * &self.s * &self.r;
        let gamma = linalg::smin_nonzero(&core, rtol)? / eta;
        let eps = linalg::op_norm(&self.e) / s_norm;
        Ok(StabilityParams {
            eta,
            gamma,
            eps,
            s_norm,
        })
    }

    /// Truncated reconstruction error `||M_tau - S||` alongside the bounds.
    pub fn run(&self, tau: f64, rtol: f64) -> Result<StabilityOutcome> {
        let params = self.params(rtol)?;
        let rec = reconstruct_stable(&self.marginals()?, params.eta, tau)?;
        let err = linalg::op_norm(&(rec - &self.s));
        Ok(StabilityOutcome {
            params,
            tau,
            err,
            bound_tight: params.tight_bound(),
            bound_7eps: params.seven_eps_bound(),
            bound_normalized: params.normalized_bound(),
        })
    }

    /// Rescale so that `||L|| = ||S|| = ||R|| = 1`; `E` is divided by `||S||`.
    pub fn normalize(&self) -> Result<NormalizedProblem> {
        let nl = linalg::op_norm(&self.l);
        let ns = linalg::op_norm(&self.s);
        let nr = linalg::op_norm(&self.r);
        if nl == 0.0 || ns == 0.0 || nr == 0.0 {
            return Err(Error::DegenerateInput("zero factor in normalization".into()));
        }
        Ok(NormalizedProblem {
            problem: StabilityProblem {
                l: &self.l / real(nl),
                s: &self.s / real(ns),
                r: &self.r / real(nr),
                e: &self.e / real(ns),
            },
            l_norm: nl,
            s_norm: ns,
            r_norm: nr,
        })
    }
}

/// A problem rescaled to unit norms, with the factors needed to map back.
#[derive(Clone, Debug)]
pub struct NormalizedProblem {
    pub problem: StabilityProblem,
    pub l_norm: f64,
    pub s_norm: f64,
    pub r_norm: f64,
}

impl NormalizedProblem {
    /// Absolute truncation threshold on the original `LMR` for normalized threshold `tau`.
    pub fn threshold_on_original(&self, tau: f64) -> f64 {
        tau * self.l_norm * self.s_norm * self.r_norm
    }

    /// Normalized threshold corresponding to an absolute threshold on the original `LMR`.
    pub fn tau_from_original(&self, t: f64) -> f64 {
        t / (self.l_norm * self.s_norm * self.r_norm)
    }
}

/// `MR (LMR)^+_{eta tau} LM`: singular values of `LMR` at or below `eta * tau` are dropped.
pub fn reconstruct_stable(m: &Marginals, eta: f64, tau: f64) -> Result<CMatrix> {
    if !(tau >= 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta={eta}, tau={tau}")));
    }
    let x = linalg::pinv_trunc(&m.lmr, eta * tau)?;
    Ok(&m.mr * x * &m.lm)
}

/// Measured quantities for the truncated-pseudoinverse perturbation bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WedinCheck {
    pub smin_b_tau: f64,
    pub pinv_b_tau_norm: f64,
    pub b_tau_minus_b_eps: f64,
    pub b_minus_b_tau: f64,
    pub pinv_diff: f64,
    pub gamma: f64,
    pub eps: f64,
    pub tau: f64,
}

impl WedinCheck {
    pub fn pinv_bound(&self) -> f64 {
        4.0 * self.eps / (self.gamma * (self.gamma - self.eps))
    }

    /// All bounds hold, with relative slack `1e-10`.
    pub fn all_hold(&self) -> bool {
        let slack = 1.0 + 1e-10;
        let ge = self.gamma - self.eps;
        self.smin_b_tau * slack >= ge
            && self.pinv_b_tau_norm <= slack / ge
            && self.b_tau_minus_b_eps <= 1e-10 * (1.0 + self.gamma)
            && self.b_minus_b_tau <= self.eps * slack
            && self.pinv_diff <= self.pinv_bound() * slack
    }
}

/// Check the truncated-pseudoinverse perturbation bounds for `A` (smallest nonzero
/// singular value at least `gamma`) and `B` with `||B - A|| <= eps`.
pub fn wedin_truncated_pinv_bound(
    a: &CMatrix,
    b: &CMatrix,
    gamma: f64,
    eps: f64,
    tau: f64,
) -> Result<WedinCheck> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if !(gamma > 2.0 * eps) || !(eps >= 0.0) {
        return Err(Error::PremiseViolated(format!("need gamma > 2 eps, got gamma={gamma}, eps={eps}")));
    }
    if !(tau >= eps && tau < gamma - eps) {
        return Err(Error::PremiseViolated(format!("tau={tau} outside [eps, gamma - eps)")));
    }
    let smin_a = linalg::smin_nonzero(a, linalg::DEFAULT_RTOL)?;
    if smin_a < gamma * (1.0 - 1e-12) {
        return Err(Error::PremiseViolated(format!(
            "smallest nonzero singular value of A is {smin_a}, below gamma={gamma}"
        )));
    }
    let diff = linalg::op_norm(&(b - a));
    if diff > eps * (1.0 + 1e-12) {
        return Err(Error::PremiseViolated(format!("||B - A|| = {diff} exceeds eps={eps}")));
    }
    let b_tau = linalg::truncate(b, tau)?;
    let b_eps = linalg::truncate(b, eps)?;
    let pinv_b_tau = linalg::pinv_trunc(b, tau)?;
    let pinv_a = linalg::pinv(a)?;
    let smin_b_tau = linalg::smin_nonzero(&b_tau, linalg::DEFAULT_RTOL)?;
    Ok(WedinCheck {
        smin_b_tau,
        pinv_b_tau_norm: linalg::op_norm(&pinv_b_tau),
        b_tau_minus_b_eps: linalg::op_norm(&(&b_tau - &b_eps)),
        b_minus_b_tau: linalg::op_norm(&(b - &b_tau)),
        pinv_diff: linalg::op_norm(&(pinv_b_tau - pinv_a)),
        gamma,
        eps,
        tau,
    })
}

/// Bound `5 eps / gamma^2` for a normalized problem, checked against the measured error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormalizedBoundCheck {
    pub bound: f64,
    pub measured: f64,
    pub holds: bool,
}

pub fn normalized_bound_check(problem: &StabilityProblem, tau: f64, rtol: f64) -> Result<NormalizedBoundCheck> {
    for (name, m) in [("L", &problem.l), ("S", &problem.s), ("R", &problem.r)] {
        let n = linalg::op_norm(m);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::PremiseViolated(format!("||{name}|| = {n}, expected 1")));
        }
    }
    let out = problem.run(tau, rtol)?;
    if !out.params.tau_admissible(tau) {
        return Err(Error::PremiseViolated(format!(
            "tau={tau} not admissible for gamma={}, eps={}",
            out.params.gamma, out.params.eps
        )));
    }
    let bound = 5.0 * out.params.eps / (out.params.gamma * out.params.gamma);
    Ok(NormalizedBoundCheck {
        bound,
        measured: out.err,
        holds: out.err <= bound * (1.0 + 1e-10),
    })
}

fn row_selector(rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| real(if i == j { 1.0 } else { 0.0 }))
}

/// Instance on which truncation cannot beat `eps / (9 sqrt 2 (gamma - eps)^2)`.
///
/// Requires `0 < eps <= tau < 1/(3 sqrt 2)`.
pub fn optimality_example(eps: f64, tau: f64) -> Result<(StabilityProblem, f64)> {
    let limit = 1.0 / (3.0 * 2f64.sqrt());
    if !(eps > 0.0 && eps <= tau && tau < limit) {
        return Err(Error::PremiseViolated(format!(
            "need 0 < eps <= tau < {limit}, got eps={eps}, tau={tau}"
        )));
    }
    let c = tau + 2.0 * eps;
    let delta = c / (1.0 - c * c).sqrt();
    let eta = (1.0 + delta * delta).sqrt();
    let s = CMatrix::from_row_slice(
        3,
        3,
        &[0.0, delta, 1.0, delta, 0.0, 0.0, 1.0, 0.0, 0.0].map(real),
    );
    let mut e = CMatrix::zeros(3, 3);
    e[(1, 1)] = real(eta * eps);
    let l = row_selector(2, 3);
    let r = row_selector(3, 2);
    let gamma = delta / eta;
    let lower = eps / (9.0 * 2f64.sqrt() * (gamma - eps).powi(2));
    Ok((StabilityProblem::new(l, s, r, e)?, lower))
}

/// Instance where the untruncated reconstruction error grows like `1/eps`.
///
/// Requires `0 < eps < 1/2`.
pub fn divergence_example(eps: f64) -> Result<StabilityProblem> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::PremiseViolated(format!("need 0 < eps < 1/2, got {eps}")));
    }
    let mut s = CMatrix::zeros(3, 3);
    s[(0, 0)] = real(1.0);
    let e2 = eps * eps;
    let e = CMatrix::from_row_slice(
        3,
        3,
        &[0.0, 0.0, 0.0, 0.0, e2, 1.0 - e2, 0.0, 1.0 - e2, e2].map(|x| real(eps * x)),
    );
    StabilityProblem::new(row_selector(2, 3), s, row_selector(3, 2), e)
}

/// Random low-rank matrix with generic compressions `L`, `R` of the given sizes.
pub fn random_low_rank_problem<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    rank: usize,
    l_rows: usize,
    r_cols: usize,
) -> (CMatrix, CMatrix, CMatrix) {
    let m = random::gaussian_matrix(rng, rows, rank) * random::gaussian_matrix(rng, rank, cols);
    let l = random::gaussian_matrix(rng, l_rows, rows);
    let r = random::gaussian_matrix(rng, cols, r_cols);
    (m, l, r)
}

/// Random perturbed problem with unit-norm `L`, `S`, `R` and `||E|| = eps_frac * gamma`.
pub fn random_stability_problem<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    rank: usize,
    eps_frac: f64,
) -> Result<StabilityProblem> {
    let (s, l, r) = random_low_rank_problem(rng, rows, cols, rank, rank + 1, rank + 1);
    let zero = CMatrix::zeros(rows, cols);
    let base = StabilityProblem::new(l, s, r, zero)?.normalize()?.problem;
    let gamma = base.params(linalg::DEFAULT_RTOL)?.gamma;
    let e = random::gaussian_matrix(rng, rows, cols);
    let e = &e * real(eps_frac * gamma / linalg::op_norm(&e));
    StabilityProblem::new(base.l, base.s, base.r, e)
}
