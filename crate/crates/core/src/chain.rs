//! Recovery and reconstruction of spin-chain states, from local marginals and
//! from recursively defined long-range measurements.
//!
//! Site `k` is 1-based in all public names (`k = 2..=n`), matching the usual
//! chain notation; sites are 0-based when they index into a `DensityOperator`.
//! `rho_k` lives on `X_k ⊗ Y'_k` where `X_k` is sites `1..=k` and `Y'_k` an
//! ancilla; `T_k: H_k ⊗ Y'_k -> Y'_{k-1}` and `U_k: X_{k-1} -> X'_{k-1}`.

use serde::Serialize;

use crate::bipartite::{self, OsrComparison};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, DEFAULT_RTOL};
use crate::opspace::{self, Superoperator};
use crate::petz::{self, MI_TOL};
use crate::quantum::{self, DensityOperator};
use crate::tensor_nets::{self, MpRep, SelectorChain, Side};

/// Trace distance allowed between overlapping marginals.
pub const MARGINAL_TOL: f64 = 1e-10;
/// Eigenvalue threshold for the support of a reduced state.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct ChainOptions {
    pub rtol: f64,
    pub mi_tol: f64,
    /// Abort at the first failing condition instead of recording it.
    pub strict: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            rtol: DEFAULT_RTOL,
            mi_tol: MI_TOL,
            strict: false,
        }
    }
}

/// Ancilla systems and maps defining the recursion `rho_{k-1} = (id ⊗ T_k)(rho_k)`.
#[derive(Clone, Debug)]
pub struct MeasurementScheme {
    pub site_dims: Vec<usize>,
    /// `Y'_k` for `k = 0..=n`; `Y'_0` and `Y'_n` are empty.
    pub right_anc: Vec<Vec<usize>>,
    /// `X'_k` for `k = 0..=n`; only read when `U` maps are present.
    pub left_anc: Vec<Vec<usize>>,
    /// `T_k` at index `k`, present for `k = 2..=n`.
    pub t_maps: Vec<Option<Superoperator>>,
    /// `U_k` at index `k`, present for `k = 2..=n` in reconstruction schemes.
    pub u_maps: Vec<Option<Superoperator>>,
    /// Steps `first..=last` are run by the pipelines.
    pub first: usize,
    pub last: usize,
}

impl MeasurementScheme {
    pub fn n(&self) -> usize {
        self.site_dims.len()
    }

    pub fn t(&self, k: usize) -> Result<&Superoperator> {
        self.t_maps
            .get(k)
            .and_then(|m| m.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("scheme has no T_{k}")))
    }

    pub fn u(&self, k: usize) -> Result<&Superoperator> {
        self.u_maps
            .get(k)
            .and_then(|m| m.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("scheme has no U_{k}")))
    }

    pub fn has_u(&self) -> bool {
        (self.first..=self.last).all(|k| self.u(k).is_ok())
    }

    /// Dimensions of `rho_k`: sites `1..=k` then `Y'_k`.
    pub fn state_dims(&self, k: usize) -> Vec<usize> {
        [&self.site_dims[..k], &self.right_anc[k][..]].concat()
    }

    /// Dimensions of the reconstruction input `sigma_k` on `X'_{k-1} ⊗ H_k ⊗ Y'_k`.
    pub fn sigma_dims(&self, k: usize) -> Vec<usize> {
        [&self.left_anc[k - 1][..], &[self.site_dims[k - 1]], &self.right_anc[k][..]].concat()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidArgument("a chain needs at least two sites".into()));
        }
        if self.right_anc.len() != n + 1 || self.t_maps.len() != n + 1 || self.u_maps.len() != n + 1 {
            return Err(Error::DimensionMismatch("scheme lists must have n + 1 entries".into()));
        }
        if self.left_anc.len() != n + 1 {
            return Err(Error::DimensionMismatch("left ancilla list must have n + 1 entries".into()));
        }
        if !self.right_anc[0].is_empty() || !self.right_anc[n].is_empty() {
            return Err(Error::DimensionMismatch("Y'_0 and Y'_n must be trivial".into()));
        }
        if self.first < 2 || self.first > self.last + 1 || self.last > n {
            return Err(Error::InvalidArgument(format!(
                "step range {}..={} invalid for {n} sites",
                self.first, self.last
            )));
        }
        for k in 2..=n {
            let t = self.t(k)?;
            let expect_in = [&[self.site_dims[k - 1]][..], &self.right_anc[k][..]].concat();
            if t.in_dims != expect_in || t.out_dims != self.right_anc[k - 1] {
                return Err(Error::DimensionMismatch(format!(
                    "T_{k} maps {:?} -> {:?}, expected {:?} -> {:?}",
                    t.in_dims,
                    t.out_dims,
                    expect_in,
                    self.right_anc[k - 1]
                )));
            }
            if let Some(u) = &self.u_maps[k] {
                if u.in_dims != self.site_dims[..k - 1] || u.out_dims != self.left_anc[k - 1] {
                    return Err(Error::DimensionMismatch(format!(
                        "U_{k} maps {:?} -> {:?}, expected {:?} -> {:?}",
                        u.in_dims,
                        u.out_dims,
                        &self.site_dims[..k - 1],
                        self.left_anc[k - 1]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn empty_maps(n: usize) -> Vec<Option<Superoperator>> {
    vec![None; n + 1]
}

/// `Y'_k = H_{k+1}`, `T_k = Tr_{k+1}`, `T_n = id`, `X'_k = H_k`, `U_k = Tr_{1..k-2}`.
pub fn marginal_scheme(site_dims: &[usize]) -> Result<MeasurementScheme> {
    let n = site_dims.len();
    let mut right_anc = vec![vec![]; n + 1];
    let mut left_anc = vec![vec![]; n + 1];
    for k in 1..n {
        right_anc[k] = vec![site_dims[k]];
        left_anc[k] = vec![site_dims[k - 1]];
    }
    let mut t_maps = empty_maps(n);
    let mut u_maps = empty_maps(n);
    for k in 2..=n {
        t_maps[k] = Some(if k < n {
            Superoperator::partial_trace(&site_dims[k - 1..=k], &[1])?
        } else {
            Superoperator::identity(&[site_dims[n - 1]])
        });
        let xs = &site_dims[..k - 1];
        u_maps[k] = Some(if k == 2 {
            Superoperator::identity(xs)
        } else {
            Superoperator::partial_trace(xs, &(0..k - 2).collect::<Vec<_>>())?
        });
    }
    let scheme = MeasurementScheme {
        site_dims: site_dims.to_vec(),
        right_anc,
        left_anc,
        t_maps,
        u_maps,
        first: 2,
        last: n - 1,
    };
    scheme.validate()?;
    Ok(scheme)
}

/// `T_k = Tr_{k+1} ∘ SWAP_{k,k+1}`, `T_n = id`, `U_k = Tr_{1..k-2} ∘ SWAP_{1,k-1}`,
/// with `Y'_k = H_{k+1}` and `X'_{k-1} = H_{k-1}`. Needs uniform site dimension.
pub fn swap_scheme(n: usize, d: usize) -> Result<MeasurementScheme> {
    let mut scheme = marginal_scheme(&vec![d; n])?;
    let pair = [d, d];
    let t = Superoperator::partial_trace(&pair, &[1])?.compose(&Superoperator::swap(&pair, 0, 1)?)?;
    for k in 2..n {
        scheme.t_maps[k] = Some(t.clone());
    }
    for k in 3..=n {
        let xs = vec![d; k - 1];
        let u = Superoperator::partial_trace(&xs, &(0..k - 2).collect::<Vec<_>>())?
            .compose(&Superoperator::swap(&xs, 0, k - 2)?)?;
        scheme.u_maps[k] = Some(u);
    }
    scheme.last = n;
    scheme.validate()?;
    Ok(scheme)
}

/// Largest Schmidt rank of a pure state over all cuts of the chain.
pub fn max_schmidt_rank(rho: &DensityOperator) -> Result<usize> {
    let n = rho.n_sites();
    let mut best = 1;
    for k in 1..n {
        let keep: Vec<usize> = (0..k).collect();
        let m = rho.marginal(&keep)?;
        let vals = linalg::eigvalsh(&m.mat)?;
        best = best.max(vals.iter().filter(|&&v| v > SUPPORT_TOL).count());
    }
    Ok(best)
}

/// Number of ancilla sites `l = ceil(log_d D)` (at least one).
pub fn disentangling_length(rho: &DensityOperator) -> Result<usize> {
    let d = rho.dims.iter().copied().max().unwrap_or(2).max(2);
    let big_d = max_schmidt_rank(rho)?;
    let mut l = 1;
    while d.pow(l as u32) < big_d {
        l += 1;
    }
    Ok(l)
}

/// Unitary sending the columns of `v` to the columns of `t`, completed on the
/// orthogonal complements. `twist` rotates the completion.
fn completed_unitary(v: &CMatrix, t: &CMatrix, twist: Option<&CMatrix>) -> CMatrix {
    let n = v.nrows();
    let r = v.ncols();
    let full = |m: &CMatrix| {
        let mut out = CMatrix::zeros(n, n);
        out.columns_mut(0, r).copy_from(m);
        let mut filled = vec![false; n];
        filled[..r].fill(true);
        linalg::complete_orthonormal(&mut out, &filled);
        out
    };
    let vf = full(v);
    let mut tf = full(t);
    if let Some(w) = twist {
        let rest = tf.columns(r, n - r) * w;
        tf.columns_mut(r, n - r).copy_from(&rest);
    }
    tf * vf.adjoint()
}

/// Petz scheme for a state whose blocks of `l + 1` sites can be disentangled:
/// `Y'_k = H_{k+1..k+l}` and `T_k = Tr_{k+l}(U_k · U_k^*)`, with `U_k` sending
/// the support of `rho_k` on sites `k..=k+l` into states that are `|0>` on site
/// `k+l`. `twist` applies an extra unitary to the completion.
pub fn disentangling_scheme(
    rho: &DensityOperator,
    l: usize,
    twist: Option<&mut crate::random::SeededRng>,
) -> Result<MeasurementScheme> {
    let n = rho.n_sites();
    let dims = rho.dims.clone();
    let mut right_anc = vec![vec![]; n + 1];
    for (k, anc) in right_anc.iter_mut().enumerate().take(n).skip(1) {
        *anc = dims[k..(k + l).min(n)].to_vec();
    }
    let mut t_maps = empty_maps(n);
    let mut twist = twist;
    let mut cur = rho.clone();
    for k in (2..=n).rev() {
        let t = if k + l > n {
            Superoperator::identity(&dims[k - 1..])
        } else {
            let block = &dims[k - 1..k + l];
            let reduced = cur.marginal(&(k - 1..k + l).collect::<Vec<_>>())?;
            let (vals, vecs) = linalg::eigh(&reduced.mat)?;
            let support: Vec<usize> = (0..vals.len()).rev().filter(|&j| vals[j] > SUPPORT_TOL).collect();
            let last = block[l];
            let keep = opspace::total_dim(&block[..l]);
            if support.len() > keep {
                return Err(Error::PremiseViolated(format!(
                    "support of rank {} on sites {}..={} does not fit {} states",
                    support.len(),
                    k,
                    k + l,
                    keep
                )));
            }
            let big = keep * last;
            let v = CMatrix::from_fn(big, support.len(), |a, j| vecs[(a, support[j])]);
            let tgt = CMatrix::from_fn(big, support.len(), |a, j| real(if a == j * last { 1.0 } else { 0.0 }));
            let w = twist
                .as_deref_mut()
                .map(|rng| crate::random::random_unitary(rng, big - support.len()));
            let u = completed_unitary(&v, &tgt, w.as_ref());
            Superoperator::partial_trace(block, &[l])?.compose(&Superoperator::unitary(block, &u)?)?
        };
        cur = cur.apply_map(&t, k - 1)?;
        t_maps[k] = Some(t);
    }
    let scheme = MeasurementScheme {
        site_dims: dims,
        right_anc,
        left_anc: vec![vec![]; n + 1],
        t_maps,
        u_maps: empty_maps(n),
        first: 2,
        last: n,
    };
    scheme.validate()?;
    Ok(scheme)
}

/// The recursively defined operators `rho_k`, with `sigma_k` and `tau_k`.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    /// `rho_k` at index `k - 1`.
    pub rho: Vec<DensityOperator>,
    /// `sigma_k` at index `k - 1`: `(U_k ⊗ id)(rho_k)` when `U_k` exists,
    /// otherwise `Tr_{X_{k-1}}(rho_k)`; `sigma_1 = rho_1`.
    pub sigma: Vec<DensityOperator>,
    /// `tau_k = (id ⊗ T_k)(sigma_k)` at index `k - 1` (`None` for `k = 1`).
    pub tau: Vec<Option<DensityOperator>>,
}

pub fn chain_trace(rho: &DensityOperator, scheme: &MeasurementScheme) -> Result<ChainTrace> {
    scheme.validate()?;
    let n = scheme.n();
    if rho.dims != scheme.site_dims {
        return Err(Error::DimensionMismatch(format!(
            "state on {:?}, scheme on {:?}",
            rho.dims, scheme.site_dims
        )));
    }
    let mut states = vec![rho.clone()];
    for k in (2..=n).rev() {
        let next = states.last().unwrap().apply_map(scheme.t(k)?, k - 1)?;
        states.push(next);
    }
    states.reverse();
    let mut sigma = vec![states[0].clone()];
    let mut tau = vec![None];
    for k in 2..=n {
        let rk = &states[k - 1];
        let (s, offset) = match &scheme.u_maps[k] {
            Some(u) => (rk.apply_map(u, 0)?, scheme.left_anc[k - 1].len()),
            None => (rk.marginal(&(k - 1..rk.n_sites()).collect::<Vec<_>>())?, 0),
        };
        tau.push(Some(s.apply_map(scheme.t(k)?, offset)?));
        sigma.push(s);
    }
    Ok(ChainTrace {
        rho: states,
        sigma,
        tau,
    })
}

/// What the pipelines consume: `rho_{first-1}` and `sigma_k` for `k = first..=last`.
#[derive(Clone, Debug)]
pub struct ChainInputs {
    pub initial: DensityOperator,
    pub sigma: Vec<DensityOperator>,
}

fn inputs_from_trace(trace: ChainTrace, scheme: &MeasurementScheme) -> ChainInputs {
    ChainInputs {
        initial: trace.rho[scheme.first - 2].clone(),
        sigma: trace.sigma[scheme.first - 1..scheme.last].to_vec(),
    }
}

/// Inputs for long-range Petz recovery (`sigma_k = Tr_{X_{k-1}} rho_k`).
pub fn petz_inputs(rho: &DensityOperator, scheme: &MeasurementScheme) -> Result<ChainInputs> {
    let mut s = scheme.clone();
    s.u_maps = empty_maps(s.n());
    Ok(inputs_from_trace(chain_trace(rho, &s)?, scheme))
}

/// Inputs for long-range reconstruction (`sigma_k = (U_k ⊗ id)(rho_k)`).
pub fn mat_inputs(rho: &DensityOperator, scheme: &MeasurementScheme) -> Result<ChainInputs> {
    if !scheme.has_u() {
        return Err(Error::InvalidArgument("reconstruction needs U maps".into()));
    }
    Ok(inputs_from_trace(chain_trace(rho, scheme)?, scheme))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    MutualInformation,
    OperatorSchmidtRank,
}

/// Diagnostics of one recursion step.
#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub k: usize,
    pub condition: ConditionKind,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub holds: Option<bool>,
    /// Trace norm of `(id ⊗ R_k)(rho_{k-1}) - rho_k` on the reference state.
    pub residual: Option<f64>,
    pub map_in: Vec<usize>,
    pub map_out: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub state: DensityOperator,
    pub steps: Vec<StepReport>,
    pub maps: Vec<Superoperator>,
    pub mpo: MpRep,
    pub pmps: Option<MpRep>,
    /// Trace distance to the reference state, when one was given.
    pub trace_distance: Option<f64>,
    /// Scalar expectation values the inputs consist of.
    pub expectation_values: usize,
}

impl ChainOutcome {
    /// First step whose condition failed.
    pub fn first_failure(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.holds == Some(false)).map(|s| s.k)
    }

    pub fn conditions_hold(&self) -> bool {
        self.steps.iter().all(|s| s.holds != Some(false))
    }
}

fn check_inputs(scheme: &MeasurementScheme, inputs: &ChainInputs, mat: bool) -> Result<()> {
    scheme.validate()?;
    let expect = scheme.state_dims(scheme.first - 1);
    if inputs.initial.dims != expect {
        return Err(Error::DimensionMismatch(format!(
            "initial state on {:?}, expected {:?}",
            inputs.initial.dims, expect
        )));
    }
    if inputs.sigma.len() != scheme.last + 1 - scheme.first {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs for steps {}..={}",
            inputs.sigma.len(),
            scheme.first,
            scheme.last
        )));
    }
    for (i, s) in inputs.sigma.iter().enumerate() {
        let k = scheme.first + i;
        let expect = if mat {
            scheme.sigma_dims(k)
        } else {
            [&[scheme.site_dims[k - 1]][..], &scheme.right_anc[k][..]].concat()
        };
        if s.dims != expect {
            return Err(Error::DimensionMismatch(format!(
                "sigma_{k} on {:?}, expected {:?}",
                s.dims, expect
            )));
        }
    }
    Ok(())
}

fn reference_trace(reference: Option<&DensityOperator>, scheme: &MeasurementScheme) -> Result<Option<ChainTrace>> {
    reference.map(|r| chain_trace(r, scheme)).transpose()
}

fn finish(
    scheme: &MeasurementScheme,
    inputs: &ChainInputs,
    state: DensityOperator,
    steps: Vec<StepReport>,
    maps: Vec<Superoperator>,
    reference: Option<&DensityOperator>,
    expectation_values: usize,
    with_pmps: bool,
) -> Result<ChainOutcome> {
    let n_phys = scheme.first - 1;
    let mpo = tensor_nets::seqprep_to_mpo(&inputs.initial, n_phys, &maps)?;
    let pmps = if with_pmps && n_phys == 1 {
        tensor_nets::seqprep_to_pmps(&inputs.initial, &maps, 1e-12).ok()
    } else {
        None
    };
    let trace_distance = match reference {
        Some(r) if r.dims == state.dims => Some(quantum::trace_distance(&state.mat, &r.mat)?),
        _ => None,
    };
    Ok(ChainOutcome {
        state,
        steps,
        maps,
        mpo,
        pmps,
        trace_distance,
        expectation_values,
    })
}

fn step_residual(trace: &ChainTrace, map: &Superoperator, k: usize) -> Result<f64> {
    let pushed = trace.rho[k - 2].apply_map(map, k - 1)?;
    linalg::trace_norm(&(pushed.mat - &trace.rho[k - 1].mat))
}

/// Recovery `rho = R_last ... R_first (rho_{first-1})` with Petz maps
/// `R_k = R^P_{sigma_k, T_k}`. With a reference state, each step records the
/// information condition `I(X_{k-1}:Y'_{k-1})_{rho_{k-1}} = I(X_{k-1}:k Y'_k)_{rho_k}`.
pub fn petz_longrange(
    scheme: &MeasurementScheme,
    inputs: &ChainInputs,
    reference: Option<&DensityOperator>,
    opts: &ChainOptions,
) -> Result<ChainOutcome> {
    check_inputs(scheme, inputs, false)?;
    let trace = {
        let mut s = scheme.clone();
        s.u_maps = empty_maps(s.n());
        reference_trace(reference, &s)?
    };
    let mut state = inputs.initial.clone();
    let mut steps = Vec::new();
    let mut maps = Vec::new();
    let mut count = opspace::op_space_dim(&inputs.initial.dims);
    for (i, sigma) in inputs.sigma.iter().enumerate() {
        let k = scheme.first + i;
        let t = scheme.t(k)?;
        let r = petz::petz_map(&sigma.mat, t)?;
        count += opspace::op_space_dim(&sigma.dims);
        let mut report = StepReport {
            k,
            condition: ConditionKind::MutualInformation,
            lhs: None,
            rhs: None,
            holds: None,
            residual: None,
            map_in: r.in_dims.clone(),
            map_out: r.out_dims.clone(),
        };
        if let Some(tr) = &trace {
            let prev = &tr.rho[k - 2];
            let cur = &tr.rho[k - 1];
            let xs: Vec<usize> = (0..k - 1).collect();
            let lhs = quantum::mutual_information(prev, &xs, &(k - 1..prev.n_sites()).collect::<Vec<_>>())?;
            let rhs = quantum::mutual_information(cur, &xs, &(k - 1..cur.n_sites()).collect::<Vec<_>>())?;
            let holds = (lhs - rhs).abs() <= opts.mi_tol;
            if opts.strict && !holds {
                return Err(Error::InformationConditionFailed {
                    step: Some(k),
                    lhs,
                    rhs,
                });
            }
            report.lhs = Some(lhs);
            report.rhs = Some(rhs);
            report.holds = Some(holds);
            report.residual = Some(step_residual(tr, &r, k)?);
        }
        state = state.apply_map(&r, k - 1)?;
        steps.push(report);
        maps.push(r);
    }
    finish(scheme, inputs, state, steps, maps, reference, count, true)
}

/// Reconstruction `rho = R_last ... R_first (rho_{first-1})` with
/// `R_k = L_k (T_k L_k)^+`, `L_k = M_{sigma_k}^T`. Each step records the rank
/// condition `osr(X'_{k-1}:Y'_{k-1})_{tau_k} = osr(X_{k-1}:k Y'_k)_{rho_k}`; the
/// right side needs a reference state.
pub fn mat_longrange(
    scheme: &MeasurementScheme,
    inputs: &ChainInputs,
    reference: Option<&DensityOperator>,
    opts: &ChainOptions,
) -> Result<ChainOutcome> {
    check_inputs(scheme, inputs, true)?;
    let trace = reference_trace(reference, scheme)?;
    let mut state = inputs.initial.clone();
    let mut steps = Vec::new();
    let mut maps = Vec::new();
    let mut count = opspace::op_space_dim(&inputs.initial.dims);
    for (i, sigma) in inputs.sigma.iter().enumerate() {
        let k = scheme.first + i;
        let t = scheme.t(k)?;
        let split = scheme.left_anc[k - 1].len();
        let m_sigma = opspace::transfer_matrix(&sigma.mat, &sigma.dims, split)?;
        let r = bipartite::reconstruction_map(&m_sigma.transpose(), t, opts.rtol)?;
        let used_rows = match &scheme.u_maps[k] {
            Some(u) => (0..u.mat.nrows())
                .filter(|&j| u.mat.row(j).iter().any(|z| z.norm() > 0.0))
                .count(),
            None => m_sigma.nrows(),
        };
        count += used_rows * m_sigma.ncols();
        let tau = sigma.apply_map(t, split)?;
        let m_tau = opspace::transfer_matrix(&tau.mat, &tau.dims, split)?;
        let mut report = StepReport {
            k,
            condition: ConditionKind::OperatorSchmidtRank,
            lhs: Some(linalg::rank_tol(&m_tau, opts.rtol)? as f64),
            rhs: None,
            holds: None,
            residual: None,
            map_in: r.in_dims.clone(),
            map_out: r.out_dims.clone(),
        };
        if let Some(tr) = &trace {
            let cur = &tr.rho[k - 1];
            let m_rho = opspace::transfer_matrix(&cur.mat, &cur.dims, k - 1)?;
            let cmp: OsrComparison = bipartite::compare_osr(&m_tau, &m_rho, opts.rtol)?;
            if opts.strict && !cmp.holds {
                return Err(Error::RankConditionFailed {
                    step: Some(k),
                    lhs: cmp.lhs,
                    rhs: cmp.rhs,
                });
            }
            report.lhs = Some(cmp.lhs as f64);
            report.rhs = Some(cmp.rhs as f64);
            report.holds = Some(cmp.holds);
            report.residual = Some(step_residual(tr, &r, k)?);
        }
        state = state.apply_map(&r, k - 1)?;
        steps.push(report);
        maps.push(r);
    }
    finish(scheme, inputs, state, steps, maps, reference, count, false)
}

/// Nearest-neighbour marginals `rho_{k,k+1}`, `k = 1..n-1`.
pub fn pair_marginals(rho: &DensityOperator) -> Result<Vec<DensityOperator>> {
    (0..rho.n_sites() - 1).map(|k| rho.marginal(&[k, k + 1])).collect()
}

/// Three-site marginals `rho_{k-1,k,k+1}`, `k = 2..n-1`.
pub fn triple_marginals(rho: &DensityOperator) -> Result<Vec<DensityOperator>> {
    (1..rho.n_sites() - 1).map(|k| rho.marginal(&[k - 1, k, k + 1])).collect()
}

fn check_overlaps(marginals: &[DensityOperator], width: usize) -> Result<()> {
    for (i, w) in marginals.windows(2).enumerate() {
        let (a, _) = opspace::partial_trace(&w[0].mat, &w[0].dims, &[0])?;
        let (b, _) = opspace::partial_trace(&w[1].mat, &w[1].dims, &[width - 1])?;
        if a.shape() != b.shape() {
            return Err(Error::InconsistentMarginals(format!("marginals {i} and {} differ in shape", i + 1)));
        }
        let td = quantum::trace_distance(&a, &b)?;
        if td > MARGINAL_TOL {
            return Err(Error::InconsistentMarginals(format!(
                "marginals {} and {} disagree on their overlap by {td:.3e}",
                i + 1,
                i + 2
            )));
        }
    }
    Ok(())
}

fn chain_sites(marginals: &[DensityOperator], width: usize) -> Result<Vec<usize>> {
    if marginals.is_empty() || marginals.iter().any(|m| m.n_sites() != width) {
        return Err(Error::InvalidArgument(format!("expected a list of {width}-site marginals")));
    }
    let mut dims = marginals[0].dims.clone();
    dims.extend(marginals[1..].iter().map(|m| m.dims[width - 1]));
    Ok(dims)
}

/// `rho = R_{n-1} ... R_2 (rho_12)` with `R_k = R^P_{rho_{k,k+1}, Tr_{k+1}}`.
pub fn petz_from_marginals(
    marginals: &[DensityOperator],
    reference: Option<&DensityOperator>,
    opts: &ChainOptions,
) -> Result<ChainOutcome> {
    let dims = chain_sites(marginals, 2)?;
    check_overlaps(marginals, 2)?;
    let scheme = marginal_scheme(&dims)?;
    let inputs = ChainInputs {
        initial: marginals[0].clone(),
        sigma: marginals[1..].to_vec(),
    };
    petz_longrange(&scheme, &inputs, reference, opts)
}

/// `rho = R_{n-1} ... R_3 (rho_123)` with `R_k = R^M_{L_k, Tr_{k+1}}` and
/// `L_k = M_{rho_{k-1,k,k+1}}^T`.
pub fn mpo_from_marginals(
    marginals: &[DensityOperator],
    reference: Option<&DensityOperator>,
    opts: &ChainOptions,
) -> Result<ChainOutcome> {
    let dims = chain_sites(marginals, 3)?;
    check_overlaps(marginals, 3)?;
    let mut scheme = marginal_scheme(&dims)?;
    scheme.first = 3;
    let inputs = ChainInputs {
        initial: marginals[0].clone(),
        sigma: marginals[1..].to_vec(),
    };
    mat_longrange(&scheme, &inputs, reference, opts)
}

/// Information and rank conditions of the two marginal pipelines on one state.
#[derive(Clone, Debug, Serialize)]
pub struct ImplicationCheck {
    /// `(k, I(X_{k-1}:k), I(X_{k-1}:k,k+1))` for `k = 2..n-1`.
    pub mi: Vec<(usize, f64, f64)>,
    /// `(k, comparison of osr(k-1:k) and osr(X_{k-1}:k,k+1))` for `k = 3..n-1`.
    pub osr: Vec<(usize, OsrComparison)>,
    pub premise: bool,
    pub conclusion: bool,
}

impl ImplicationCheck {
    pub fn holds(&self) -> bool {
        !self.premise || self.conclusion
    }
}

/// Whether the information conditions for recovery imply the rank conditions
/// for reconstruction on `rho`.
pub fn petz_implies_mat_marginals(rho: &DensityOperator, opts: &ChainOptions) -> Result<ImplicationCheck> {
    let n = rho.n_sites();
    let mut mi = Vec::new();
    for k in 2..n {
        let xs: Vec<usize> = (0..k - 1).collect();
        let a = quantum::mutual_information(rho, &xs, &[k - 1])?;
        let b = quantum::mutual_information(rho, &xs, &[k - 1, k])?;
        mi.push((k, a, b));
    }
    let mut osr = Vec::new();
    for k in 3..n {
        let pair = rho.marginal(&[k - 2, k - 1])?;
        let head = rho.marginal(&(0..=k).collect::<Vec<_>>())?;
        let lhs = opspace::transfer_matrix(&pair.mat, &pair.dims, 1)?;
        let rhs = opspace::transfer_matrix(&head.mat, &head.dims, k - 1)?;
        osr.push((k, bipartite::compare_osr(&lhs, &rhs, opts.rtol)?));
    }
    let premise = mi.iter().all(|(_, a, b)| (a - b).abs() <= opts.mi_tol);
    let conclusion = osr.iter().all(|(_, c)| c.holds);
    Ok(ImplicationCheck {
        mi,
        osr,
        premise,
        conclusion,
    })
}

/// Reconstruction scheme with permutation-submatrix `U_k` derived from a
/// successful long-range Petz recovery.
#[derive(Clone, Debug)]
pub struct SelectorScheme {
    pub scheme: MeasurementScheme,
    pub selectors: SelectorChain,
    pub petz: ChainOutcome,
    /// Largest deviation between a `sigma_k` entry and the product-basis
    /// expectation value of `rho_k` it is supposed to equal.
    pub max_entry_deviation: f64,
}

/// Build `U_k` (with `X'_k = Y'_k`) from selectors on the MPO that the Petz
/// maps prepare, so each compressed left interface keeps its rank.
pub fn derive_selectors_for_reconstruction(
    rho: &DensityOperator,
    scheme_t_only: &MeasurementScheme,
    opts: &ChainOptions,
) -> Result<SelectorScheme> {
    let n = scheme_t_only.n();
    let mut base = scheme_t_only.clone();
    base.first = 2;
    base.last = n;
    base.u_maps = empty_maps(n);
    let inputs = petz_inputs(rho, &base)?;
    let petz = petz_longrange(&base, &inputs, Some(rho), opts)?;
    let selectors = tensor_nets::build_selector_chain(&petz.mpo, n - 1, Side::Left, opts.rtol)?;
    let mut scheme = base.clone();
    scheme.left_anc = base.right_anc.clone();
    for k in 2..=n {
        let level = k - 2;
        let interface = petz.mpo.left_interface(k - 1);
        let need = linalg::rank_tol(&interface, opts.rtol)?;
        if selectors.ranks[level] < need {
            return Err(Error::RankDeficientSelection(format!(
                "level {} keeps rank {} of {}",
                k - 1,
                selectors.ranks[level],
                need
            )));
        }
        let u = Superoperator::from_matrix(
            &base.site_dims[..k - 1],
            &base.right_anc[k - 1],
            selectors.accumulated(level),
        )?;
        scheme.u_maps[k] = Some(u);
    }
    scheme.validate()?;
    let trace = chain_trace(rho, &scheme)?;
    let mut worst: f64 = 0.0;
    for k in 2..=n {
        let rk = &trace.rho[k - 1];
        let sk = &trace.sigma[k - 1];
        let rc = opspace::to_components(&rk.mat, &rk.dims, opspace::BasisKind::GellMann)?;
        let sc = opspace::to_components(&sk.mat, &sk.dims, opspace::BasisKind::GellMann)?;
        let block = opspace::op_space_dim(&rk.dims[k - 1..]);
        for (j, sel) in selectors.selections[k - 2].iter().enumerate() {
            let src = sel.as_ref().map(|multi| {
                multi
                    .iter()
                    .zip(&base.site_dims)
                    .fold(0, |acc, (&i, &d)| acc * d * d + i)
            });
            for r in 0..block {
                let expect = src.map_or(real(0.0), |s| rc[s * block + r]);
                worst = worst.max((sc[j * block + r] - expect).norm());
            }
        }
    }
    Ok(SelectorScheme {
        scheme,
        selectors,
        petz,
        max_entry_deviation: worst,
    })
}

/// Operator `G` with `Tr(F sigma_k) = Tr(G rho)`. With `with_u`, `F` acts on
/// `X'_{k-1} ⊗ H_k ⊗ Y'_k` and `G` on all sites; otherwise `F` acts on
/// `H_k ⊗ Y'_k` and `G` on sites `k..=n`.
pub fn longrange_observable(
    scheme: &MeasurementScheme,
    k: usize,
    f: &CMatrix,
    with_u: bool,
) -> Result<(CMatrix, Vec<usize>)> {
    scheme.validate()?;
    let n = scheme.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let use_u = with_u && k >= 2;
    let x_len = if use_u { scheme.left_anc[k - 1].len() } else { 0 };
    let mut dims: Vec<usize> = if use_u {
        scheme.sigma_dims(k)
    } else {
        [&[scheme.site_dims[k - 1]][..], &scheme.right_anc[k][..]].concat()
    };
    let total = opspace::total_dim(&dims);
    if f.shape() != (total, total) {
        return Err(Error::DimensionMismatch(format!(
            "observable of shape {:?} on {:?}",
            f.shape(),
            dims
        )));
    }
    let mut g = f.adjoint();
    let mut offset = x_len + 1;
    for j in k + 1..=n {
        let adj = scheme.t(j)?.adjoint();
        let (m, d) = adj.apply_on(&g, &dims, offset)?;
        g = m;
        dims = d;
        offset += 1;
    }
    if use_u {
        let (m, d) = scheme.u(k)?.adjoint().apply_on(&g, &dims, 0)?;
        g = m;
        dims = d;
    }
    Ok((g.adjoint(), dims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{addstate, cghz, ghz, w_state};
    use crate::random;

    #[test]
    fn cghz_recovered_from_pairs() {
        let rho = cghz(5).unwrap();
        let out = petz_from_marginals(&pair_marginals(&rho).unwrap(), Some(&rho), &ChainOptions::default()).unwrap();
        assert!(out.conditions_hold());
        assert!(out.trace_distance.unwrap() < 1e-8);
        assert!(linalg::max_abs(&(out.mpo.to_dense().unwrap().mat - &out.state.mat)) < 1e-9);
        let pmps = out.pmps.as_ref().unwrap();
        assert!(linalg::max_abs(&(pmps.to_dense().unwrap().mat - &out.state.mat)) < 1e-9);
    }

    #[test]
    fn ghz_fails_at_last_step() {
        let rho = ghz(5, 0.0).unwrap();
        let opts = ChainOptions::default();
        let p = petz_from_marginals(&pair_marginals(&rho).unwrap(), Some(&rho), &opts).unwrap();
        assert_eq!(p.first_failure(), Some(4));
        assert!(p.trace_distance.unwrap() > 0.4);
        let m = mpo_from_marginals(&triple_marginals(&rho).unwrap(), Some(&rho), &opts).unwrap();
        assert_eq!(m.first_failure(), Some(4));
        let strict = ChainOptions { strict: true, ..opts };
        let err = mpo_from_marginals(&triple_marginals(&rho).unwrap(), Some(&rho), &strict).unwrap_err();
        assert!(matches!(err, Error::RankConditionFailed { step: Some(4), lhs: 2, rhs: 4 }));
    }

    #[test]
    fn w_state_reconstructed_from_triples() {
        let rho = w_state(5).unwrap();
        let out = mpo_from_marginals(&triple_marginals(&rho).unwrap(), Some(&rho), &ChainOptions::default()).unwrap();
        assert!(out.conditions_hold());
        assert!(out.trace_distance.unwrap() < 1e-8);
    }

    #[test]
    fn inconsistent_marginals_rejected() {
        let a = cghz(2).unwrap();
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = real(1.0);
        let b = DensityOperator::new(vec![2, 2], m).unwrap();
        let err = petz_from_marginals(&[a, b], None, &ChainOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InconsistentMarginals(_)));
    }

    #[test]
    fn swap_scheme_reproduces_addstate_steps() {
        let n = 5;
        let rho = addstate(n).unwrap();
        let scheme = swap_scheme(n, 2).unwrap();
        let tr = chain_trace(&rho, &scheme).unwrap();
        let s3 = addstate(3).unwrap();
        let t2 = cghz(2).unwrap();
        for k in 2..n {
            assert!(linalg::max_abs(&(&tr.sigma[k - 1].mat - &s3.mat)) < 1e-12);
        }
        for k in 2..=n {
            assert!(linalg::max_abs(&(&tr.tau[k - 1].as_ref().unwrap().mat - &t2.mat)) < 1e-12);
        }
        let out = mat_longrange(&scheme, &mat_inputs(&rho, &scheme).unwrap(), Some(&rho), &ChainOptions::default())
            .unwrap();
        assert!(out.conditions_hold());
        assert!(out.trace_distance.unwrap() < 1e-8);
    }

    #[test]
    fn disentangling_scheme_recovers_phase() {
        let rho = ghz(5, 1.0).unwrap();
        let l = disentangling_length(&rho).unwrap();
        assert_eq!(l, 1);
        let scheme = disentangling_scheme(&rho, l, None).unwrap();
        let out = petz_longrange(&scheme, &petz_inputs(&rho, &scheme).unwrap(), Some(&rho), &ChainOptions::default())
            .unwrap();
        assert!(out.conditions_hold());
        assert!(out.trace_distance.unwrap() < 1e-8);
    }

    #[test]
    fn observable_pulls_back() {
        let mut rng = random::rng(9);
        let rho = addstate(4).unwrap();
        let scheme = swap_scheme(4, 2).unwrap();
        let tr = chain_trace(&rho, &scheme).unwrap();
        for k in 2..=4 {
            let d = opspace::total_dim(&scheme.sigma_dims(k));
            let f = linalg::hermitian_part(&random::gaussian_matrix(&mut rng, d, d));
            let (g, dims) = longrange_observable(&scheme, k, &f, true).unwrap();
            assert_eq!(dims, vec![2; 4]);
            let lhs = linalg::trace(&(&f * &tr.sigma[k - 1].mat));
            let rhs = linalg::trace(&(&g * &rho.mat));
            assert!((lhs - rhs).norm() < 1e-10);
            assert!(linalg::hermiticity_defect(&g) < 1e-12);
        }
    }

    #[test]
    fn selectors_reconstruct_addstate() {
        let rho = addstate(5).unwrap();
        let scheme = swap_scheme(5, 2).unwrap();
        let opts = ChainOptions::default();
        let sel = derive_selectors_for_reconstruction(&rho, &scheme, &opts).unwrap();
        assert!(sel.max_entry_deviation < 1e-10);
        let out = mat_longrange(&sel.scheme, &mat_inputs(&rho, &sel.scheme).unwrap(), Some(&rho), &opts).unwrap();
        assert!(out.conditions_hold());
        assert!(out.trace_distance.unwrap() < 1e-8);
    }
}
