//! Petz recovery maps and their bipartite use.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::opspace::{self, Superoperator};
use crate::quantum::{self, DensityOperator};

/// Eigenvalues of `N(sigma)` at or below this are outside its support.
pub const PETZ_EIG_FLOOR: f64 = 1e-14;
/// Trace distance under which a recovery counts as successful.
pub const RECOVERY_TOL: f64 = 1e-8;
/// Default tolerance (bits) for mutual-information equalities.
pub const MI_TOL: f64 = 1e-8;

/// Petz map `w -> sigma^{1/2} N^*(N(sigma)^{-1/2} w N(sigma)^{-1/2}) sigma^{1/2}`.
///
/// Inverse square roots are pseudo-inverses. The part of the input outside the
/// support of `N(sigma)` is sent to `sigma` times its weight, which keeps the map
/// trace preserving.
pub fn petz_map(sigma: &CMatrix, channel: &Superoperator) -> Result<Superoperator> {
    let d_in = opspace::total_dim(&channel.in_dims);
    if sigma.shape() != (d_in, d_in) {
        return Err(Error::DimensionMismatch(format!(
            "reference state {:?} for a map on {:?}",
            sigma.shape(),
            channel.in_dims
        )));
    }
    let image = channel.apply(sigma)?;
    let (vals, vecs) = linalg::eigh(&image)?;
    let inv_sqrt = linalg::from_spectrum(&vals, &vecs, |x| {
        if x > PETZ_EIG_FLOOR {
            1.0 / x.sqrt()
        } else {
            0.0
        }
    });
    let support = linalg::from_spectrum(&vals, &vecs, |x| if x > PETZ_EIG_FLOOR { 1.0 } else { 0.0 });
    let d_out = image.nrows();
    let off_support = CMatrix::identity(d_out, d_out) - support;
    let sqrt_sigma = linalg::psd_sqrt(sigma)?;
    let adj = channel.adjoint();
    Superoperator::from_fn(&channel.out_dims, &channel.in_dims, |w| {
        let inner = adj.apply(&(&inv_sqrt * w * &inv_sqrt))?;
        let weight = linalg::trace(&(&off_support * w));
        Ok(&sqrt_sigma * inner * &sqrt_sigma + sigma * weight)
    })
}

/// Outcome of the data-processing comparison `D(N(rho)||N(sigma))` vs `D(rho||sigma)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DpiVerdict {
    Saturated,
    NotSaturated,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DpiCheck {
    pub before: f64,
    pub after: f64,
    pub verdict: DpiVerdict,
}

pub fn dpi_saturated(rho: &CMatrix, sigma: &CMatrix, channel: &Superoperator, tol: f64) -> Result<DpiCheck> {
    let before = quantum::relative_entropy(rho, sigma)?;
    let after = quantum::relative_entropy(&channel.apply(rho)?, &channel.apply(sigma)?)?;
    let verdict = if !before.is_finite() {
        DpiVerdict::Indeterminate
    } else if (before - after).abs() <= tol {
        DpiVerdict::Saturated
    } else {
        DpiVerdict::NotSaturated
    };
    Ok(DpiCheck {
        before,
        after,
        verdict,
    })
}

/// Result of recovering a bipartite state from local channel outputs.
#[derive(Clone, Debug)]
pub struct BipartitePetz {
    pub tau: DensityOperator,
    pub recovered: DensityOperator,
    pub trace_distance: f64,
    pub mi_before: f64,
    pub mi_after: f64,
    pub map_x: Superoperator,
    pub map_y: Superoperator,
}

impl BipartitePetz {
    pub fn success(&self) -> bool {
        self.trace_distance <= RECOVERY_TOL
    }

    pub fn mi_preserved(&self, tol: f64) -> bool {
        (self.mi_before - self.mi_after).abs() <= tol
    }
}

/// Apply `N_X ⊗ N_Y` to `rho` (cut after `nx.in_dims.len()` sites), then undo it
/// with the tensor product of the Petz maps of the marginals.
pub fn bipartite_petz_recover(
    rho: &DensityOperator,
    nx: &Superoperator,
    ny: &Superoperator,
) -> Result<BipartitePetz> {
    let split = nx.in_dims.len();
    if rho.dims[..split.min(rho.dims.len())] != nx.in_dims[..]
        || rho.dims[split.min(rho.dims.len())..] != ny.in_dims[..]
    {
        return Err(Error::DimensionMismatch(format!(
            "maps on {:?} and {:?} do not match state on {:?}",
            nx.in_dims, ny.in_dims, rho.dims
        )));
    }
    let n = rho.n_sites();
    let xs: Vec<usize> = (0..split).collect();
    let ys: Vec<usize> = (split..n).collect();
    let rho_x = rho.marginal(&xs)?;
    let rho_y = rho.marginal(&ys)?;
    let tau = rho.apply_map(nx, 0)?.apply_map(ny, nx.out_dims.len())?;
    let map_x = petz_map(&rho_x.mat, nx)?;
    let map_y = petz_map(&rho_y.mat, ny)?;
    let recovered = tau.apply_map(&map_x, 0)?.apply_map(&map_y, split)?;
    let trace_distance = quantum::trace_distance(&recovered.mat, &rho.mat)?;
    let xo: Vec<usize> = (0..nx.out_dims.len()).collect();
    let yo: Vec<usize> = (nx.out_dims.len()..tau.n_sites()).collect();
    Ok(BipartitePetz {
        mi_before: quantum::mutual_information(rho, &xs, &ys)?,
        mi_after: quantum::mutual_information(&tau, &xo, &yo)?,
        tau,
        recovered,
        trace_distance,
        map_x,
        map_y,
    })
}

/// `R(N(sigma)) = sigma` residual (max entry).
pub fn recovery_identity_residual(sigma: &CMatrix, channel: &Superoperator) -> Result<f64> {
    let r = petz_map(sigma, channel)?;
    Ok(linalg::max_abs(&(r.apply(&channel.apply(sigma)?)? - sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real;
    use crate::random;

    #[test]
    fn petz_recovers_reference_state() {
        let mut rng = random::rng(1);
        for _ in 0..5 {
            let sigma = random::random_density(&mut rng, 3, 2);
            let ks = random::random_kraus(&mut rng, 3, 2, 2);
            let n = Superoperator::from_kraus(&[3], &[2], &ks).unwrap();
            assert!(recovery_identity_residual(&sigma, &n).unwrap() < 1e-10);
        }
    }

    #[test]
    fn petz_map_is_cptp() {
        let mut rng = random::rng(2);
        let sigma = random::random_density(&mut rng, 4, 3);
        let n = Superoperator::from_kraus(&[4], &[2], &random::random_kraus(&mut rng, 4, 2, 3)).unwrap();
        let p = petz_map(&sigma, &n).unwrap();
        assert!(p.is_cptp(1e-10).unwrap());
    }

    #[test]
    fn petz_of_identity_channel_on_full_rank_state_is_identity() {
        let mut rng = random::rng(3);
        let sigma = random::random_density(&mut rng, 2, 2);
        let id = Superoperator::identity(&[2]);
        let p = petz_map(&sigma, &id).unwrap();
        assert!(linalg::max_abs(&(p.mat - id.mat)) < 1e-10);
    }

    #[test]
    fn dpi_flags_unrelated_support() {
        let mut rng = random::rng(4);
        let rho = random::random_density(&mut rng, 2, 2);
        let mut sigma = CMatrix::zeros(2, 2);
        sigma[(0, 0)] = real(1.0);
        let id = Superoperator::identity(&[2]);
        assert_eq!(dpi_saturated(&rho, &sigma, &id, 1e-8).unwrap().verdict, DpiVerdict::Indeterminate);
        let sigma2 = random::random_density(&mut rng, 2, 2);
        assert_eq!(dpi_saturated(&rho, &sigma2, &id, 1e-8).unwrap().verdict, DpiVerdict::Saturated);
    }

    #[test]
    fn product_state_recovers_after_local_traces() {
        let mut rng = random::rng(5);
        let ab = DensityOperator::new(vec![2, 2], random::random_density(&mut rng, 4, 4)).unwrap();
        let cd = DensityOperator::new(vec![2, 2], random::random_density(&mut rng, 4, 4)).unwrap();
        let rho = ab.tensor(&cd);
        let nx = Superoperator::partial_trace(&[2, 2], &[0]).unwrap();
        let ny = Superoperator::partial_trace(&[2, 2], &[1]).unwrap();
        let out = bipartite_petz_recover(&rho, &nx, &ny).unwrap();
        assert!(out.success(), "trace distance {}", out.trace_distance);
        assert!(out.mi_preserved(1e-8));
    }
}
