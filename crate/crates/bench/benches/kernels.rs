use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qrecon::chain::{self, ChainOptions};
use qrecon::linalg;
use qrecon::matrec::{self, Marginals};
use qrecon::opspace::Superoperator;
use qrecon::{measure, petz, quantum, random};

fn svd_and_pinv(c: &mut Criterion) {
    let mut g = c.benchmark_group("linalg");
    for n in [8, 16, 32, 64] {
        let a = random::gaussian_matrix(&mut random::rng(n as u64), n, n);
        g.bench_with_input(BenchmarkId::new("svd", n), &a, |b, a| b.iter(|| linalg::svd(black_box(a)).unwrap()));
        g.bench_with_input(BenchmarkId::new("pinv", n), &a, |b, a| {
            b.iter(|| linalg::pinv_rtol(black_box(a), linalg::DEFAULT_RTOL).unwrap())
        });
    }
    g.finish();
}

fn pseudoskeleton(c: &mut Criterion) {
    let mut rng = random::rng(1);
    let (m, l, r) = matrec::random_low_rank_problem(&mut rng, 32, 32, 8, 10, 10);
    let marg = Marginals::from_matrix(&m, &l, &r).unwrap();
    c.bench_function("matrec/reconstruct_32x32_rank8", |b| {
        b.iter(|| matrec::reconstruct(black_box(&marg), linalg::DEFAULT_RTOL).unwrap())
    });
}

fn petz_map(c: &mut Criterion) {
    let mut g = c.benchmark_group("petz_map");
    for d in [2, 4, 8] {
        let mut rng = random::rng(d as u64);
        let sigma = random::random_density(&mut rng, d, d);
        let ks = random::random_kraus(&mut rng, d, d, 2);
        let n = Superoperator::from_kraus(&[d], &[d], &ks).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(d), &(sigma, n), |b, (s, n)| {
            b.iter(|| petz::petz_map(black_box(s), n).unwrap())
        });
    }
    g.finish();
}

fn chain_pipelines(c: &mut Criterion) {
    let opts = ChainOptions::default();
    let mut g = c.benchmark_group("chain");
    g.sample_size(10);
    for n in [4, 5, 6] {
        let rho = quantum::cghz(n).unwrap();
        let pairs = chain::pair_marginals(&rho).unwrap();
        g.bench_with_input(BenchmarkId::new("petz_marginals", n), &pairs, |b, m| {
            b.iter(|| chain::petz_from_marginals(black_box(m), None, &opts).unwrap())
        });
        let w = quantum::w_state(n).unwrap();
        let triples = chain::triple_marginals(&w).unwrap();
        g.bench_with_input(BenchmarkId::new("mpo_marginals", n), &triples, |b, m| {
            b.iter(|| chain::mpo_from_marginals(black_box(m), None, &opts).unwrap())
        });
    }
    g.finish();
}

fn selectors(c: &mut Criterion) {
    let opts = ChainOptions::default();
    let mut g = c.benchmark_group("selectors");
    g.sample_size(10);
    for n in [4, 5] {
        let rho = quantum::addstate(n).unwrap();
        let scheme = chain::swap_scheme(n, 2).unwrap();
        g.bench_with_input(BenchmarkId::new("derive_and_reconstruct", n), &(rho, scheme), |b, (rho, s)| {
            b.iter(|| {
                let sel = chain::derive_selectors_for_reconstruction(black_box(rho), s, &opts).unwrap();
                chain::mat_longrange(&sel.scheme, &chain::mat_inputs(rho, &sel.scheme).unwrap(), None, &opts).unwrap()
            })
        });
    }
    g.finish();
}

fn povm(c: &mut Criterion) {
    let mut rng = random::rng(5);
    let n = Superoperator::from_matrix(&[4], &[3], random::gaussian_matrix(&mut rng, 9, 16)).unwrap();
    c.bench_function("measure/povm_for_map_4to3", |b| b.iter(|| measure::povm_for_map(black_box(&n)).unwrap()));
}

criterion_group!(benches, svd_and_pinv, pseudoskeleton, petz_map, chain_pipelines, selectors, povm);
criterion_main!(benches);
