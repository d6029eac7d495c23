//! Bipartite state reconstruction from locally compressed views, and the
//! four-party condition lattice comparing rank and information criteria.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::opspace::{self, Superoperator, TransferMatrix};
use crate::quantum::{self, DensityOperator};

/// Gap ratio `sigma_{r+1} / sigma_r` above which an OSR comparison is ambiguous.
pub const OSR_GAP_RATIO: f64 = 1e-6;

/// `R = L (N L)^+`, mapping the output space of `n` back to its input space.
///
/// `l` has one row per operator-basis element of `n`'s input.
pub fn reconstruction_map(l: &CMatrix, n: &Superoperator, rtol: f64) -> Result<Superoperator> {
    if l.nrows() != n.mat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "L has {} rows, map input has dimension {}",
            l.nrows(),
            n.mat.ncols()
        )));
    }
    let nl = &n.mat * l;
    let r = l * linalg::pinv_rtol(&nl, rtol)?;
    Superoperator::from_matrix(&n.out_dims, &n.in_dims, r)
}

/// Local reconstruction maps `R_X': X' -> X` and `R_Y': Y' -> Y`.
#[derive(Clone, Debug)]
pub struct ReconstructionMaps {
    pub r_x: Superoperator,
    pub r_y: Superoperator,
}

/// Build both maps from `(id ⊗ N_Y)(rho)` on `X Y'` and `(N_X ⊗ id)(rho)` on `X' Y`.
pub fn build_reconstruction_maps(
    sigma_xy1: &DensityOperator,
    sigma_x1y: &DensityOperator,
    nx: &Superoperator,
    ny: &Superoperator,
    rtol: f64,
) -> Result<ReconstructionMaps> {
    let expect_a: Vec<usize> = nx.in_dims.iter().chain(&ny.out_dims).copied().collect();
    let expect_b: Vec<usize> = nx.out_dims.iter().chain(&ny.in_dims).copied().collect();
    if sigma_xy1.dims != expect_a || sigma_x1y.dims != expect_b {
        return Err(Error::DimensionMismatch(format!(
            "marginals on {:?} and {:?}, expected {:?} and {:?}",
            sigma_xy1.dims, sigma_x1y.dims, expect_a, expect_b
        )));
    }
    let m_a = opspace::transfer_matrix(&sigma_xy1.mat, &sigma_xy1.dims, nx.in_dims.len())?;
    let m_b = opspace::transfer_matrix(&sigma_x1y.mat, &sigma_x1y.dims, nx.out_dims.len())?;
    Ok(ReconstructionMaps {
        r_x: reconstruction_map(&m_a, nx, rtol)?,
        r_y: reconstruction_map(&m_b.transpose(), ny, rtol)?,
    })
}

/// `(R_X' ⊗ R_Y')(tau)`.
pub fn reconstruct_bipartite(tau: &DensityOperator, maps: &ReconstructionMaps) -> Result<DensityOperator> {
    let split = maps.r_x.in_dims.len();
    tau.apply_map(&maps.r_x, 0)?
        .apply_map(&maps.r_y, maps.r_x.out_dims.len())
        .map_err(|e| match e {
            Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{m} (cut after {split} sites)")),
            other => other,
        })
}

/// `(R_X' ⊗ id)((N_X ⊗ id)(rho))`.
pub fn reconstruct_one_sided(sigma_x1y: &DensityOperator, maps: &ReconstructionMaps) -> Result<DensityOperator> {
    sigma_x1y.apply_map(&maps.r_x, 0)
}

/// Numerical OSR comparison with a spectral-gap guard.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OsrComparison {
    pub lhs: usize,
    pub rhs: usize,
    pub lhs_gap: f64,
    pub rhs_gap: f64,
    pub holds: bool,
}

/// `(rank, sigma_{r+1}/sigma_r)` of a transfer matrix.
pub fn rank_with_gap(m: &CMatrix, rtol: f64) -> Result<(usize, f64)> {
    let s = linalg::singular_values(m)?;
    let r = linalg::rank_of(&s, rtol);
    let gap = if r == 0 || r >= s.len() { 0.0 } else { s[r] / s[r - 1] };
    Ok((r, gap))
}

pub fn compare_osr(lhs: &CMatrix, rhs: &CMatrix, rtol: f64) -> Result<OsrComparison> {
    let (l, lg) = rank_with_gap(lhs, rtol)?;
    let (r, rg) = rank_with_gap(rhs, rtol)?;
    Ok(OsrComparison {
        lhs: l,
        rhs: r,
        lhs_gap: lg,
        rhs_gap: rg,
        holds: l == r && lg < OSR_GAP_RATIO && rg < OSR_GAP_RATIO,
    })
}

/// `osr(X':Y')` of `(N_X ⊗ N_Y)(rho)` against `osr(X:Y)` of `rho`.
pub fn osr_condition(rho: &DensityOperator, nx: &Superoperator, ny: &Superoperator, rtol: f64) -> Result<OsrComparison> {
    let m = opspace::transfer_matrix(&rho.mat, &rho.dims, nx.in_dims.len())?;
    let mt = opspace::compose_transfer(nx, &m, ny)?;
    compare_osr(&mt, &m, rtol)
}

/// Everything produced by reconstructing a known state through local maps.
#[derive(Clone, Debug)]
pub struct BipartiteOutcome {
    pub condition: OsrComparison,
    pub tau: DensityOperator,
    pub sigma_xy1: DensityOperator,
    pub sigma_x1y: DensityOperator,
    pub maps: ReconstructionMaps,
    pub recovered: DensityOperator,
    pub recovered_one_sided: DensityOperator,
    pub trace_distance: f64,
    pub trace_distance_one_sided: f64,
}

/// Compress `rho` with `N_X`, `N_Y`, rebuild it from the two partial images.
///
/// Fails with `RankConditionFailed` (OSR of the compressed state vs OSR of `rho`)
/// when the rank condition does not hold.
pub fn reconstruct_from_state(
    rho: &DensityOperator,
    nx: &Superoperator,
    ny: &Superoperator,
    rtol: f64,
) -> Result<BipartiteOutcome> {
    let split = nx.in_dims.len();
    if split > rho.n_sites() || rho.dims[..split] != nx.in_dims[..] || rho.dims[split..] != ny.in_dims[..] {
        return Err(Error::DimensionMismatch(format!(
            "maps on {:?} | {:?} for state on {:?}",
            nx.in_dims, ny.in_dims, rho.dims
        )));
    }
    let condition = osr_condition(rho, nx, ny, rtol)?;
    if !condition.holds {
        return Err(Error::RankConditionFailed {
            step: None,
            lhs: condition.lhs,
            rhs: condition.rhs,
        });
    }
    let sigma_xy1 = rho.apply_map(ny, split)?;
    let sigma_x1y = rho.apply_map(nx, 0)?;
    let tau = sigma_x1y.apply_map(ny, nx.out_dims.len())?;
    let maps = build_reconstruction_maps(&sigma_xy1, &sigma_x1y, nx, ny, rtol)?;
    let recovered = reconstruct_bipartite(&tau, &maps)?;
    let recovered_one_sided = reconstruct_one_sided(&sigma_x1y, &maps)?;
    Ok(BipartiteOutcome {
        condition,
        trace_distance: quantum::trace_distance(&recovered.mat, &rho.mat)?,
        trace_distance_one_sided: quantum::trace_distance(&recovered_one_sided.mat, &rho.mat)?,
        tau,
        sigma_xy1,
        sigma_x1y,
        maps,
        recovered,
        recovered_one_sided,
    })
}

/// The rank and information quantities for a four-party state `ABCD`, and the
/// conditions built from them.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadConditions {
    pub osr_b_c: usize,
    pub osr_ab_cd: usize,
    pub i_b_c: f64,
    pub i_ab_cd: f64,
    pub i_a_b: f64,
    pub i_a_bc: f64,
    pub i_a_bcd: f64,
    /// `osr(B:C) = osr(AB:CD)`.
    pub c1: bool,
    /// `I(B:C) = I(AB:CD)`.
    pub c2: bool,
    /// `I(A:B) = I(A:BCD)`.
    pub c3: bool,
    /// `I(A:BC) = I(A:BCD)`.
    pub c4: bool,
}

impl QuadConditions {
    pub fn kappa_b_c(&self) -> f64 {
        (self.osr_b_c as f64).log2()
    }

    pub fn kappa_ab_cd(&self) -> f64 {
        (self.osr_ab_cd as f64).log2()
    }

    /// `C2 => C1`, `C2 => C3`, `C3 => C4`.
    pub fn implications_hold(&self) -> bool {
        (!self.c2 || self.c1) && (!self.c2 || self.c3) && (!self.c3 || self.c4)
    }

    pub fn pattern(&self) -> [bool; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }
}

fn require_four_sites(rho: &DensityOperator) -> Result<()> {
    if rho.n_sites() != 4 {
        return Err(Error::InvalidArgument(format!(
            "four-party conditions need 4 sites, got {}",
            rho.n_sites()
        )));
    }
    Ok(())
}

pub fn quadripartite_conditions(rho: &DensityOperator, rtol: f64, mi_tol: f64) -> Result<QuadConditions> {
    require_four_sites(rho)?;
    let rho_bc = rho.marginal(&[1, 2])?;
    let m_bc = TransferMatrix::new(&rho_bc.mat, &rho_bc.dims, 1, opspace::BasisKind::GellMann)?.mat;
    let m_abcd = opspace::transfer_matrix(&rho.mat, &rho.dims, 2)?;
    let osr = compare_osr(&m_bc, &m_abcd, rtol)?;
    let mi = |a: &[usize], b: &[usize]| quantum::mutual_information(rho, a, b);
    let i_b_c = mi(&[1], &[2])?;
    let i_ab_cd = mi(&[0, 1], &[2, 3])?;
    let i_a_b = mi(&[0], &[1])?;
    let i_a_bc = mi(&[0], &[1, 2])?;
    let i_a_bcd = mi(&[0], &[1, 2, 3])?;
    Ok(QuadConditions {
        osr_b_c: osr.lhs,
        osr_ab_cd: osr.rhs,
        i_b_c,
        i_ab_cd,
        i_a_b,
        i_a_bc,
        i_a_bcd,
        c1: osr.holds,
        c2: (i_b_c - i_ab_cd).abs() <= mi_tol,
        c3: (i_a_b - i_a_bcd).abs() <= mi_tol,
        c4: (i_a_bc - i_a_bcd).abs() <= mi_tol,
    })
}

/// Both sides of `I(B:C) = I(AB:CD)  <=>  [I(A:B) = I(A:BC) and I(AB:C) = I(AB:CD)]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShuffleCheck {
    pub lhs: bool,
    pub rhs: bool,
}

impl ShuffleCheck {
    pub fn consistent(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn mi_shuffle_equivalence(rho: &DensityOperator, mi_tol: f64) -> Result<ShuffleCheck> {
    require_four_sites(rho)?;
    let mi = |a: &[usize], b: &[usize]| quantum::mutual_information(rho, a, b);
    let lhs = (mi(&[1], &[2])? - mi(&[0, 1], &[2, 3])?).abs() <= mi_tol;
    let r1 = (mi(&[0], &[1])? - mi(&[0], &[1, 2])?).abs() <= mi_tol;
    let r2 = (mi(&[0, 1], &[2])? - mi(&[0, 1], &[2, 3])?).abs() <= mi_tol;
    Ok(ShuffleCheck { lhs, rhs: r1 && r2 })
}

/// Default partial traces `Tr_A` on `AB` and `Tr_D` on `CD` for qubits.
pub fn outer_traces(d: usize) -> Result<(Superoperator, Superoperator)> {
    Ok((
        Superoperator::partial_trace(&[d, d], &[0])?,
        Superoperator::partial_trace(&[d, d], &[1])?,
    ))
}

/// Column labels of [`four_party_table`].
pub const TABLE_COLUMNS: [&str; 7] = ["kappa(B:C)", "kappa(AB:CD)", "I(B:C)", "I(AB:CD)", "I(A:B)", "I(A:BC)", "I(A:BCD)"];

/// One state of the four-party comparison with its seven quantities.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub name: String,
    pub values: [f64; 7],
    pub conditions: QuadConditions,
}

/// The seven four-qubit comparison states; `rho_a` and `rho_d` are single-qubit states.
pub fn four_party_examples(
    rho_a: &DensityOperator,
    rho_d: &DensityOperator,
) -> Result<Vec<(String, DensityOperator)>> {
    if rho_a.dims != [2] || rho_d.dims != [2] {
        return Err(Error::DimensionMismatch("padding states must be single qubits".into()));
    }
    let w3 = quantum::w_state(3)?;
    let g3 = quantum::ghz(3, 0.0)?;
    Ok(vec![
        ("cGHZ_ABCD".into(), quantum::cghz(4)?),
        ("rho_A x W_BCD".into(), rho_a.tensor(&w3)),
        ("W_ABC x rho_D".into(), w3.tensor(rho_d)),
        ("W_ABCD".into(), quantum::w_state(4)?),
        ("rho_A x GHZ_BCD".into(), rho_a.tensor(&g3)),
        ("GHZ_ABC x rho_D".into(), g3.tensor(rho_d)),
        ("GHZ_ABCD".into(), quantum::ghz(4, 0.0)?),
    ])
}

pub fn four_party_table(
    rho_a: &DensityOperator,
    rho_d: &DensityOperator,
    rtol: f64,
    mi_tol: f64,
) -> Result<Vec<TableRow>> {
    four_party_examples(rho_a, rho_d)?
        .into_iter()
        .map(|(name, rho)| {
            let c = quadripartite_conditions(&rho, rtol, mi_tol)?;
            Ok(TableRow {
                name,
                values: [c.kappa_b_c(), c.kappa_ab_cd(), c.i_b_c, c.i_ab_cd, c.i_a_b, c.i_a_bc, c.i_a_bcd],
                conditions: c,
            })
        })
        .collect()
}
