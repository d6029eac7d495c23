use std::f64::consts::PI;

use qrecon::bipartite;
use qrecon::chain::{self, ChainOptions, MeasurementScheme};
use qrecon::error::Error;
use qrecon::linalg::{self, CMatrix};
use qrecon::measure;
use qrecon::opspace;
use qrecon::quantum::{self, DensityOperator};
use qrecon::random;
use qrecon::tensor_nets::MpRep;
use rand::Rng;

fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    linalg::max_abs(&(a - b)) <= tol
}

#[test]
fn marginal_pipelines_reduce_to_longrange() {
    let opts = ChainOptions::default();
    let rho = quantum::cghz(5).unwrap();
    let direct = chain::petz_from_marginals(&chain::pair_marginals(&rho).unwrap(), None, &opts).unwrap();
    let scheme = chain::marginal_scheme(&rho.dims).unwrap();
    let general = chain::petz_longrange(&scheme, &chain::petz_inputs(&rho, &scheme).unwrap(), None, &opts).unwrap();
    assert!(close(&direct.state.mat, &general.state.mat, 1e-12));

    let w = quantum::w_state(5).unwrap();
    let direct = chain::mpo_from_marginals(&chain::triple_marginals(&w).unwrap(), None, &opts).unwrap();
    let mut scheme = chain::marginal_scheme(&w.dims).unwrap();
    scheme.first = 3;
    let general = chain::mat_longrange(&scheme, &chain::mat_inputs(&w, &scheme).unwrap(), None, &opts).unwrap();
    assert!(close(&direct.state.mat, &general.state.mat, 1e-12));
}

#[test]
fn ghz_family_is_locally_indistinguishable() {
    let n = 5;
    let c = quantum::cghz(n).unwrap();
    for alpha in [0.0, 0.7, PI / 2.0, PI] {
        let g = quantum::ghz(n, alpha).unwrap();
        for k in 1..n {
            for start in 0..=n - k {
                let keep: Vec<usize> = (start..start + k).collect();
                let a = g.marginal(&keep).unwrap();
                let b = c.marginal(&keep).unwrap();
                assert!(close(&a.mat, &b.mat, 1e-12), "alpha {alpha}, sites {keep:?}");
            }
        }
    }
}

#[test]
fn completion_of_disentangling_unitaries_is_irrelevant() {
    let opts = ChainOptions::default();
    let rho = quantum::ghz(5, 0.4).unwrap();
    let plain = chain::disentangling_scheme(&rho, 1, None).unwrap();
    let mut rng = random::rng(31);
    let twisted = chain::disentangling_scheme(&rho, 1, Some(&mut rng)).unwrap();
    let differs = (2..5).any(|k| !close(&plain.t(k).unwrap().mat, &twisted.t(k).unwrap().mat, 1e-6));
    assert!(differs, "twist left every map unchanged");
    for scheme in [&plain, &twisted] {
        let out = chain::petz_longrange(scheme, &chain::petz_inputs(&rho, scheme).unwrap(), Some(&rho), &opts).unwrap();
        assert!(out.trace_distance.unwrap() < 1e-8);
    }
}

#[test]
fn disentangling_needs_enough_ancilla() {
    let psi = random::random_pure(&mut random::rng(4), 16);
    let rho = DensityOperator::from_ket(vec![2; 4], &psi).unwrap();
    assert_eq!(chain::max_schmidt_rank(&rho).unwrap(), 4);
    assert_eq!(chain::disentangling_length(&rho).unwrap(), 2);
    assert!(matches!(chain::disentangling_scheme(&rho, 1, None), Err(Error::PremiseViolated(_))));
    let scheme = chain::disentangling_scheme(&rho, 2, None).unwrap();
    let out = chain::petz_longrange(&scheme, &chain::petz_inputs(&rho, &scheme).unwrap(), Some(&rho), &ChainOptions::default())
        .unwrap();
    assert!(out.trace_distance.unwrap() < 1e-8);
}

fn scheme_bound(scheme: &MeasurementScheme, with_left: bool) -> usize {
    let n = scheme.n();
    let d = scheme.site_dims.iter().copied().max().unwrap();
    let dy = scheme.right_anc.iter().map(|a| opspace::total_dim(a)).max().unwrap();
    let dx = if with_left {
        scheme.left_anc.iter().map(|a| opspace::total_dim(a)).max().unwrap()
    } else {
        1
    };
    n * (d * dx * dy).pow(2)
}

#[test]
fn expectation_value_counts_are_polynomial() {
    let opts = ChainOptions::default();
    for n in [4, 5, 6] {
        let rho = quantum::addstate(n).unwrap();
        let scheme = chain::swap_scheme(n, 2).unwrap();
        let out = chain::mat_longrange(&scheme, &chain::mat_inputs(&rho, &scheme).unwrap(), None, &opts).unwrap();
        assert!(out.expectation_values <= scheme_bound(&scheme, true), "n = {n}");
        let c = quantum::cghz(n).unwrap();
        let out = chain::petz_from_marginals(&chain::pair_marginals(&c).unwrap(), None, &opts).unwrap();
        let s = chain::marginal_scheme(&c.dims).unwrap();
        assert_eq!(out.expectation_values, 16 * (n - 1));
        assert!(out.expectation_values <= scheme_bound(&s, false));
    }
}

#[test]
fn pipeline_maps_are_measurable_by_povm() {
    let opts = ChainOptions::default();
    let w = quantum::w_state(4).unwrap();
    let out = chain::mpo_from_marginals(&chain::triple_marginals(&w).unwrap(), Some(&w), &opts).unwrap();
    let c = quantum::cghz(4).unwrap();
    let petz = chain::petz_from_marginals(&chain::pair_marginals(&c).unwrap(), Some(&c), &opts).unwrap();
    let mut rng = random::rng(12);
    for map in out.maps.iter().chain(&petz.maps) {
        let povm = measure::povm_for_map(map).unwrap();
        assert!(povm.min_eigenvalue().unwrap() >= -1e-10);
        assert!(povm.completeness_defect() < 1e-10);
        let d = opspace::total_dim(&map.in_dims);
        for _ in 0..3 {
            let rank = rng.gen_range(1..=d);
            let rho = random::random_density(&mut rng, d, rank);
            let got = povm.reconstruct(&povm.probabilities(&rho).unwrap()).unwrap();
            assert!(close(&got, &map.apply(&rho).unwrap(), 1e-9));
        }
    }
}

#[test]
fn strict_mode_stops_at_first_failure() {
    let g = quantum::ghz(5, 0.0).unwrap();
    let strict = ChainOptions {
        strict: true,
        ..ChainOptions::default()
    };
    match chain::petz_from_marginals(&chain::pair_marginals(&g).unwrap(), Some(&g), &strict) {
        Err(Error::InformationConditionFailed { step, lhs, rhs }) => {
            assert_eq!(step, Some(4));
            assert!((lhs - rhs).abs() > 0.5);
        }
        other => panic!("expected an information-condition failure, got {other:?}"),
    }
}

#[test]
fn longrange_observables_reproduce_inputs() {
    let mut rng = random::rng(5);
    let rho = quantum::ghz(4, 1.1).unwrap();
    let scheme = chain::disentangling_scheme(&rho, 1, None).unwrap();
    let inputs = chain::petz_inputs(&rho, &scheme).unwrap();
    for (i, sigma) in inputs.sigma.iter().enumerate() {
        let k = scheme.first + i;
        let d = opspace::total_dim(&sigma.dims);
        let f = linalg::hermitian_part(&random::gaussian_matrix(&mut rng, d, d));
        let (g, dims) = chain::longrange_observable(&scheme, k, &f, false).unwrap();
        assert_eq!(dims, rho.dims[k - 1..].to_vec());
        let tail = rho.marginal(&(k - 1..rho.n_sites()).collect::<Vec<_>>()).unwrap();
        let lhs = linalg::trace(&(&f * &sigma.mat));
        let rhs = linalg::trace(&(&g * &tail.mat));
        assert!((lhs - rhs).norm() < 1e-10);
    }
}

#[test]
fn condition_pattern_is_seed_independent() {
    let reference: Vec<[bool; 4]> = {
        let mut rng = random::rng(0);
        let a = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2)).unwrap();
        let d = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2)).unwrap();
        bipartite::four_party_table(&a, &d, 1e-10, 1e-9)
            .unwrap()
            .iter()
            .map(|r| r.conditions.pattern())
            .collect()
    };
    for seed in 1..=5 {
        let mut rng = random::rng(seed);
        let a = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2)).unwrap();
        let d = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2)).unwrap();
        let rows = bipartite::four_party_table(&a, &d, 1e-10, 1e-9).unwrap();
        let got: Vec<[bool; 4]> = rows.iter().map(|r| r.conditions.pattern()).collect();
        assert_eq!(got, reference, "seed {seed}");
    }
}

#[test]
fn recovered_mpo_round_trips_through_file() {
    let rho = quantum::cghz(4).unwrap();
    let out = chain::petz_from_marginals(&chain::pair_marginals(&rho).unwrap(), None, &ChainOptions::default()).unwrap();
    let mut buf = Vec::new();
    out.mpo.write_to(&mut buf).unwrap();
    let back = MpRep::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.bond_dims(), out.mpo.bond_dims());
    assert!(close(&back.to_dense().unwrap().mat, &rho.mat, 1e-12));
}
