//! Reconstruction with permutation-submatrix selectors derived from a
//! successful long-range Petz recovery.

use std::f64::consts::PI;

use qrecon::chain::{self, ChainOptions, MeasurementScheme};
use qrecon::linalg::{self, real, CMatrix};
use qrecon::quantum::{self, DensityOperator};
use qrecon::random::{self, SeededRng};
use serde_json::json;

use crate::output::{f, Report, RunConfig, Table};

pub const ENTRY_TOL: f64 = 1e-10;

/// Classical Markov chain on `n` qubits under random local unitaries.
fn markov_chain(rng: &mut SeededRng, n: usize) -> qrecon::Result<DensityOperator> {
    let mut p = random::random_probabilities(rng, 2);
    for _ in 1..n {
        let t = [random::random_probabilities(rng, 2), random::random_probabilities(rng, 2)];
        p = (0..p.len() * 2).map(|x| p[x / 2] * t[(x / 2) % 2][x % 2]).collect();
    }
    let mut diag = CMatrix::zeros(p.len(), p.len());
    for (i, v) in p.iter().enumerate() {
        diag[(i, i)] = real(*v);
    }
    let u = (0..n).fold(CMatrix::identity(1, 1), |acc, _| linalg::kron(&acc, &random::random_unitary(rng, 2)));
    DensityOperator::new(vec![2; n], &u * diag * u.adjoint())
}

fn family(n: usize, markov: usize, seed: u64) -> qrecon::Result<Vec<(String, DensityOperator, MeasurementScheme)>> {
    let mut out = Vec::new();
    let add = quantum::addstate(n)?;
    out.push((format!("addstate{n}/swap"), add, chain::swap_scheme(n, 2)?));
    let c = quantum::cghz(n)?;
    let s = chain::marginal_scheme(&c.dims)?;
    out.push((format!("cghz{n}/marginals"), c, s));
    for alpha in [0.0, PI / 3.0] {
        let g = quantum::ghz(n, alpha)?;
        let s = chain::disentangling_scheme(&g, 1, None)?;
        out.push((format!("ghz{n}@{alpha:.4}/disentangling"), g, s));
    }
    let mut rng = random::rng(seed);
    for i in 0..markov {
        let rho = markov_chain(&mut rng, n)?;
        let s = chain::marginal_scheme(&rho.dims)?;
        out.push((format!("markov{n}/{i:02}/marginals"), rho, s));
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, n: usize, markov: usize) -> qrecon::Result<Report> {
    let opts = ChainOptions {
        rtol: cfg.rtol,
        mi_tol: cfg.mi_tol,
        strict: false,
    };
    let mut pass = true;
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut used = 0;
    for (name, rho, scheme) in family(n, markov, cfg.seed)? {
        let sel = chain::derive_selectors_for_reconstruction(&rho, &scheme, &opts)?;
        let petz_td = sel.petz.trace_distance.unwrap_or(f64::NAN);
        let petz_ok = petz_td <= cfg.trace_tol;
        let permutation = (0..sel.selectors.levels.len()).all(|l| sel.selectors.is_permutation_submatrix(l));
        let out = chain::mat_longrange(&sel.scheme, &chain::mat_inputs(&rho, &sel.scheme)?, Some(&rho), &opts)?;
        let rec_td = out.trace_distance.unwrap_or(f64::NAN);
        // Only states with a successful recovery are in scope.
        let ok = !petz_ok
            || (permutation
                && sel.max_entry_deviation <= ENTRY_TOL
                && out.conditions_hold()
                && rec_td <= cfg.trace_tol);
        used += petz_ok as usize;
        pass &= ok;
        rows.push(vec![
            name.clone(),
            f(petz_td),
            permutation.to_string(),
            f(sel.max_entry_deviation),
            f(rec_td),
            out.expectation_values.to_string(),
            ok.to_string(),
        ]);
        json_rows.push(json!({
            "instance": name,
            "petz_trace_distance": petz_td,
            "petz_success": petz_ok,
            "selector_ranks": sel.selectors.ranks,
            "permutation_submatrices": permutation,
            "max_entry_deviation": sel.max_entry_deviation,
            "reconstruction_trace_distance": rec_td,
            "conditions_hold": out.conditions_hold(),
            "expectation_values": out.expectation_values,
            "pass": ok,
        }));
    }
    pass &= used > 0;
    Ok(Report {
        pass,
        summary: format!("{used} of {} states recovered and reconstructed through selectors", rows.len()),
        body: json!({ "n": n, "entry_tolerance": ENTRY_TOL, "states": json_rows }),
        table: Table {
            header: vec![
                "instance",
                "petz_trace_distance",
                "permutation_submatrices",
                "max_entry_deviation",
                "reconstruction_trace_distance",
                "expectation_values",
                "pass",
            ],
            rows,
        },
    })
}
