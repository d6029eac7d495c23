//! Property tests for the algebraic invariants of each module.

use proptest::prelude::*;
use qrecon::bipartite;
use qrecon::linalg::{self, real, CMatrix};
use qrecon::matrec::{self, Marginals};
use qrecon::measure;
use qrecon::opspace::{self, BasisKind, Superoperator, TransferMatrix};
use qrecon::petz;
use qrecon::quantum::{self, DensityOperator};
use qrecon::random::{self, SeededRng};
use qrecon::tensor_nets::{self, Side};
use rand::Rng;

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::max_abs(&(a - b)) / linalg::max_abs(b).max(1.0)
}

fn low_rank(rng: &mut SeededRng, m: usize, n: usize) -> CMatrix {
    let r = rng.gen_range(1..=m.min(n));
    random::gaussian_matrix(rng, m, r) * random::gaussian_matrix(rng, r, n)
}

fn state(rng: &mut SeededRng, dims: &[usize]) -> DensityOperator {
    let d = opspace::total_dim(dims);
    let rank = rng.gen_range(1..=d);
    DensityOperator::new(dims.to_vec(), random::random_density(rng, d, rank)).unwrap()
}

fn channel(rng: &mut SeededRng, din: usize, dout: usize) -> Superoperator {
    let nk = din.div_ceil(dout) + rng.gen_range(0..3);
    Superoperator::from_kraus(&[din], &[dout], &random::random_kraus(rng, din, dout, nk)).unwrap()
}

/// Random real orthogonal mix of the Gell-Mann basis, giving another Hermitian orthonormal basis.
fn mixed_transfer(rng: &mut SeededRng, rho: &DensityOperator, split: usize) -> CMatrix {
    let m = opspace::transfer_matrix(&rho.mat, &rho.dims, split).unwrap();
    let orth = |rng: &mut SeededRng, k: usize| {
        let g = CMatrix::from_fn(k, k, |_, _| real(rng.gen_range(-1.0..1.0)));
        let q = g.qr().q();
        q.map(|z| real(z.re))
    };
    let ox = orth(rng, m.nrows());
    let oy = orth(rng, m.ncols());
    ox * m * oy.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn penrose_identities(seed in any::<u64>(), m in 1usize..=64, n in 1usize..=64) {
        let mut rng = random::rng(seed);
        let a = low_rank(&mut rng, m, n);
        let x = linalg::pinv(&a).unwrap();
        prop_assert!(rel(&(&a * &x * &a), &a) < 1e-10);
        prop_assert!(rel(&(&x * &a * &x), &x) < 1e-10);
        let ax = &a * &x;
        let xa = &x * &a;
        prop_assert!(linalg::max_abs(&(&ax - ax.adjoint())) < 1e-10);
        prop_assert!(linalg::max_abs(&(&xa - xa.adjoint())) < 1e-10);
    }

    #[test]
    fn truncated_pinv_is_piecewise_constant(seed in any::<u64>(), m in 2usize..=12, n in 2usize..=12, f in 0.05f64..0.95, g in 0.05f64..0.95) {
        let mut rng = random::rng(seed);
        let a = random::gaussian_matrix(&mut rng, m, n);
        let s = linalg::singular_values(&a).unwrap();
        let j = rng.gen_range(0..s.len() - 1);
        let (lo, hi) = (s[j + 1], s[j]);
        let t1 = lo + f * (hi - lo);
        let t2 = lo + g * (hi - lo);
        let p1 = linalg::pinv_trunc(&a, t1).unwrap();
        let p2 = linalg::pinv_trunc(&a, t2).unwrap();
        prop_assert!(linalg::max_abs(&(p1 - p2)) < 1e-12);
    }

    #[test]
    fn rank_survives_recomposition(seed in any::<u64>(), m in 1usize..=20, n in 1usize..=20) {
        let mut rng = random::rng(seed);
        let a = low_rank(&mut rng, m, n);
        let d = linalg::svd(&a).unwrap();
        let k = d.s.len();
        let sigma = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, d.s.iter().map(|&x| real(x))));
        let back = d.u.columns(0, k) * sigma * d.v_adj.rows(0, k);
        prop_assert_eq!(linalg::rank_tol(&a, 1e-10).unwrap(), linalg::rank_tol(&back, 1e-10).unwrap());
    }

    #[test]
    fn reconstruction_independent_of_generalized_inverse(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let rank = rng.gen_range(1..=4);
        let (m, l, r) = matrec::random_low_rank_problem(&mut rng, 10, 9, rank, rank + 1, rank + 2);
        let marg = Marginals::from_matrix(&m, &l, &r).unwrap();
        let a = matrec::reconstruct(&marg, 1e-10).unwrap();
        let x = matrec::random_generalized_inverse(&mut rng, &marg.lmr).unwrap();
        prop_assert!(rel(&(&marg.lmr * &x * &marg.lmr), &marg.lmr) < 1e-9);
        let b = matrec::reconstruct_with_inverse(&marg, &x).unwrap();
        prop_assert!(rel(&a, &b) < 1e-8);
    }

    #[test]
    fn left_rank_condition_implies_core_rank(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let rank = rng.gen_range(1..=4);
        let (m, l, _) = matrec::random_low_rank_problem(&mut rng, 8, 8, rank, rank + 1, 1);
        let cols = rng.gen_range(1..=6);
        let r = random::gaussian_matrix(&mut rng, 8, cols);
        let rk = |x: &CMatrix| linalg::rank_tol(x, 1e-10).unwrap();
        prop_assert_eq!(rk(&(&l * &m)), rk(&m));
        prop_assert_eq!(rk(&(&l * &m * &r)), rk(&(&m * &r)));
    }

    #[test]
    fn osr_monotone_under_local_channels(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let dx = rng.gen_range(2..=4);
        let dy = rng.gen_range(2..=4);
        let rho = state(&mut rng, &[dx, dy]);
        let (ox, oy) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let nx = channel(&mut rng, dx, ox);
        let ny = channel(&mut rng, dy, oy);
        let cmp = bipartite::osr_condition(&rho, &nx, &ny, 1e-10).unwrap();
        prop_assert!(cmp.lhs <= cmp.rhs);
        let rk = |m: &CMatrix| linalg::rank_tol(m, 1e-10).unwrap();
        prop_assert!(cmp.lhs <= rk(&nx.mat).min(rk(&ny.mat)));
    }

    #[test]
    fn components_round_trip(seed in any::<u64>(), dx in 1usize..=4, dy in 1usize..=4) {
        let mut rng = random::rng(seed);
        let op = random::gaussian_matrix(&mut rng, dx * dy, dx * dy);
        for kind in [BasisKind::GellMann, BasisKind::MatrixUnit] {
            let c = opspace::to_components(&op, &[dx, dy], kind).unwrap();
            let back = opspace::from_components(&c, &[dx, dy], kind).unwrap();
            prop_assert!(linalg::max_abs(&(back - &op)) < 1e-13);
        }
    }

    #[test]
    fn osr_is_basis_independent(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let dims = [2, rng.gen_range(2..=3), 2];
        let rho = state(&mut rng, &dims);
        let split = rng.gen_range(1..=2);
        let gm = opspace::transfer_matrix(&rho.mat, &dims, split).unwrap();
        let mu = TransferMatrix::new(&rho.mat, &dims, split, BasisKind::MatrixUnit).unwrap().mat;
        let mixed = mixed_transfer(&mut rng, &rho, split);
        let r = linalg::rank_tol(&gm, 1e-10).unwrap();
        prop_assert_eq!(linalg::rank_tol(&mu, 1e-10).unwrap(), r);
        prop_assert_eq!(linalg::rank_tol(&mixed, 1e-10).unwrap(), r);
    }

    #[test]
    fn strong_subadditivity(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let rho = state(&mut rng, &[2, 2, 2]);
        let cmi = quantum::conditional_mutual_information(&rho, &[0], &[1], &[2]).unwrap();
        prop_assert!(cmi >= -1e-9);
    }

    #[test]
    fn mutual_information_is_relative_entropy(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let rho = state(&mut rng, &[2, 3]);
        let a = rho.marginal(&[0]).unwrap();
        let b = rho.marginal(&[1]).unwrap();
        let prod = linalg::kron(&a.mat, &b.mat);
        let d = quantum::relative_entropy(&rho.mat, &prod).unwrap();
        let i = quantum::mutual_information(&rho, &[0], &[1]).unwrap();
        prop_assert!((d - i).abs() < 1e-9);
    }

    #[test]
    fn petz_maps_are_channels(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let din = rng.gen_range(2..=4);
        let dout = rng.gen_range(1..=4);
        let rank = rng.gen_range(1..=din);
        let sigma = random::random_density(&mut rng, din, rank);
        let n = channel(&mut rng, din, dout);
        let r = petz::petz_map(&sigma, &n).unwrap();
        let rep = r.cptp_report().unwrap();
        prop_assert!(rep.min_choi_eig >= -1e-10);
        prop_assert!(rep.tp_defect < 1e-10);
        prop_assert!(petz::recovery_identity_residual(&sigma, &n).unwrap() < 1e-10);
    }

    #[test]
    fn petz_success_implies_reconstruction_success(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let (nx, ny) = bipartite::outer_traces(2).unwrap();
        let rho = if seed % 2 == 0 {
            state(&mut rng, &[2, 2]).tensor(&state(&mut rng, &[2, 2]))
        } else {
            state(&mut rng, &[2, 2, 2, 2])
        };
        let p = petz::bipartite_petz_recover(&rho, &nx, &ny).unwrap();
        if p.success() {
            let r = bipartite::reconstruct_from_state(&rho, &nx, &ny, 1e-10).unwrap();
            prop_assert!(r.trace_distance < 1e-8);
        }
    }

    #[test]
    fn selector_chains(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = random::rng(seed);
        let dims = vec![2; n];
        let mpo = tensor_nets::random_mpo(&mut rng, &dims, 3).unwrap();
        let m = rng.gen_range(1..n);
        for side in [Side::Left, Side::Right] {
            let chain = tensor_nets::build_selector_chain(&mpo, m, side, 1e-10).unwrap();
            for j in 0..chain.levels.len() {
                prop_assert!(chain.is_permutation_submatrix(j));
                prop_assert!(linalg::max_abs(&(chain.accumulated(j) - chain.accumulated_by_product(j))) == 0.0);
            }
        }
    }

    #[test]
    fn bond_dimensions_bound_osr(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = random::rng(seed);
        let rho = state(&mut rng, &vec![2; n]);
        let mpo = tensor_nets::mpo_from_dense(&rho, 1e-12).unwrap();
        let bonds = mpo.bond_dims();
        for k in 1..n {
            prop_assert!(rho.osr(k, 1e-10).unwrap() <= bonds[k]);
        }
    }

    #[test]
    fn povm_is_complete_and_positive(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let din = rng.gen_range(1..=3);
        let dout = rng.gen_range(1..=3);
        let n = Superoperator::from_matrix(&[din], &[dout], random::gaussian_matrix(&mut rng, dout * dout, din * din)).unwrap();
        let povm = measure::povm_for_map(&n).unwrap();
        prop_assert_eq!(povm.len(), 2 * dout * dout + 1);
        prop_assert!(povm.min_eigenvalue().unwrap() >= -1e-10);
        prop_assert!(povm.completeness_defect() < 1e-10);
    }
}
