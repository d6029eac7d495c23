//! Seeded random matrices, states and channels.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, real, CMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Real Gaussian matrix (stored as complex).
pub fn real_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| real(rng.sample(StandardNormal)))
}

/// Unit vector drawn from the uniform measure.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<C64> {
    let g = gaussian_matrix(rng, d, 1);
    let v = DVector::from_iterator(d, g.iter().copied());
    let n = v.norm();
    v / real(n)
}

/// Haar-distributed unitary.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_isometry(rng, d, d)
}

/// Isometry `V` of shape `rows x cols` (`rows >= cols`), `V^* V = 1`.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = gaussian_matrix(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { real(1.0) };
        let col = q.column(j) * ph;
        q.set_column(j, &col);
    }
    q
}

/// Density matrix `G G^* / tr` with `G` of shape `d x rank`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> CMatrix {
    let g = gaussian_matrix(rng, d, rank.max(1));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Kraus operators `d_out x d_in` of a random CPTP map with `n_kraus` terms.
pub fn random_kraus<R: Rng + ?Sized>(
    rng: &mut R,
    d_in: usize,
    d_out: usize,
    n_kraus: usize,
) -> Vec<CMatrix> {
    let v = random_isometry(rng, d_out * n_kraus, d_in);
    (0..n_kraus)
        .map(|k| v.rows(k * d_out, d_out).into_owned())
        .collect()
}

/// Probability vector from a flat Dirichlet-like draw.
pub fn random_probabilities<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-3f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn unitary_and_kraus_are_valid() {
        let mut r = rng(3);
        let u = random_unitary(&mut r, 5);
        assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(5, 5))) < 1e-12);
        let ks = random_kraus(&mut r, 3, 2, 4);
        let mut sum = CMatrix::zeros(3, 3);
        for k in &ks {
            sum += k.adjoint() * k;
        }
        assert!(max_abs(&(sum - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn density_has_unit_trace_and_rank() {
        let mut r = rng(4);
        let rho = random_density(&mut r, 6, 2);
        assert!((rho.trace() - real(1.0)).norm() < 1e-12);
        assert_eq!(crate::linalg::rank_tol(&rho, 1e-10).unwrap(), 2);
    }

    #[test]
    fn seeding_is_deterministic() {
        let a = gaussian_matrix(&mut rng(7), 3, 3);
        let b = gaussian_matrix(&mut rng(7), 3, 3);
        assert_eq!(a, b);
    }
}
