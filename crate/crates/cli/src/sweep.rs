//! Truncated pseudoskeleton reconstruction of perturbed low-rank matrices,
//! with the measured error next to each error bound.

use qrecon::linalg;
use qrecon::matrec::{self, StabilityOutcome, StabilityProblem};
use qrecon::random;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::output::{f, Report, RunConfig, Table};

pub struct SweepParams {
    pub count: usize,
    pub max_dim: usize,
    pub max_rank: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Check {
    /// `err` at most every bound (valid regime only).
    Bounds,
    /// `err <= 1e-10`.
    Exact,
    /// `err >= value`.
    AtLeast(f64),
    /// `err <= value`.
    AtMost(f64),
}

#[derive(Debug, Serialize)]
struct Row {
    instance: String,
    instance_seed: Option<u64>,
    shape: String,
    rank: usize,
    eps: f64,
    gamma: f64,
    tau: f64,
    err_measured: f64,
    bound_tight: f64,
    bound_7eps: f64,
    bound_5eps: f64,
    in_regime: bool,
    check: Check,
    pass: bool,
}

fn row(
    instance: String,
    instance_seed: Option<u64>,
    p: &StabilityProblem,
    out: &StabilityOutcome,
    rtol: f64,
    check: Check,
) -> qrecon::Result<Row> {
    let err = out.err;
    let in_regime = out.params.tau_admissible(out.tau);
    let pass = match check {
        Check::Bounds => {
            !in_regime || (err <= out.bound_tight && err <= out.bound_7eps && err <= out.bound_normalized)
        }
        Check::Exact => err <= 1e-10,
        Check::AtLeast(v) => err >= v,
        Check::AtMost(v) => err <= v,
    };
    Ok(Row {
        instance,
        instance_seed,
        shape: format!("{}x{}", p.s.nrows(), p.s.ncols()),
        rank: linalg::rank_tol(&p.s, rtol)?,
        eps: out.params.eps,
        gamma: out.params.gamma,
        tau: out.tau,
        err_measured: err,
        bound_tight: out.bound_tight,
        bound_7eps: out.bound_7eps,
        bound_5eps: out.bound_normalized,
        in_regime,
        check,
        pass,
    })
}

fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

pub fn run(cfg: &RunConfig, params: &SweepParams) -> qrecon::Result<Report> {
    if params.max_rank == 0 || params.max_dim <= params.max_rank {
        return Err(qrecon::Error::InvalidArgument(format!(
            "need 0 < max-rank < max-dim, got {} and {}",
            params.max_rank, params.max_dim
        )));
    }
    let rtol = cfg.rtol;
    let mut rows = Vec::new();

    for eps in [0.1, 0.05, 0.02] {
        let p = matrec::divergence_example(eps)?;
        let plain = p.run(0.0, rtol)?;
        rows.push(row(format!("divergence/eps={eps}/untruncated"), None, &p, &plain, rtol, Check::AtLeast(1.0 / (2.0 * eps)))?);
        for tau in [eps, 0.5] {
            let out = p.run(tau, rtol)?;
            rows.push(row(format!("divergence/eps={eps}/tau={tau}"), None, &p, &out, rtol, Check::AtMost(1e-12))?);
        }
    }
    for eps in [0.01, 0.05, 0.1] {
        for tau in [eps, 0.2] {
            let (p, lower) = matrec::optimality_example(eps, tau)?;
            let out = p.run(tau, rtol)?;
            rows.push(row(format!("optimality/eps={eps}/tau={tau}"), None, &p, &out, rtol, Check::AtLeast(lower))?);
        }
    }

    let sample = |i: usize, frac: Option<f64>| -> qrecon::Result<(u64, StabilityProblem, f64)> {
        let s = instance_seed(cfg.seed, i);
        let mut rng = random::rng(s);
        let rank = rng.gen_range(1..=params.max_rank);
        let rows = rng.gen_range(rank + 1..=params.max_dim);
        let cols = rng.gen_range(rank + 1..=params.max_dim);
        let frac = frac.unwrap_or_else(|| rng.gen_range(0.0..0.45));
        let p = matrec::random_stability_problem(&mut rng, rows, cols, rank, frac)?;
        let pr = p.params(rtol)?;
        let tau = pr.eps + rng.gen_range(0.0..1.0) * (pr.gamma - 2.0 * pr.eps);
        Ok((s, p, tau))
    };
    for i in 0..5 {
        let (s, p, tau) = sample(i, Some(0.0))?;
        let out = p.run(tau.max(0.5 * p.params(rtol)?.gamma), rtol)?;
        rows.push(row(format!("exact/{i:03}"), Some(s), &p, &out, rtol, Check::Exact)?);
    }
    for i in 0..params.count {
        let (s, p, tau) = sample(1000 + i, None)?;
        let out = p.run(tau, rtol)?;
        rows.push(row(format!("random/{i:04}"), Some(s), &p, &out, rtol, Check::Bounds)?);
    }

    rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    let failures: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.instance.as_str()).collect();
    let in_regime = rows.iter().filter(|r| matches!(r.check, Check::Bounds) && r.in_regime).count();
    let summary = format!(
        "{} instances, {} random in the valid regime, {} failures",
        rows.len(),
        in_regime,
        failures.len()
    );
    let table = Table {
        header: vec![
            "instance",
            "instance_seed",
            "shape",
            "rank",
            "eps",
            "gamma",
            "tau",
            "err_measured",
            "bound_tight",
            "bound_7eps",
            "bound_5eps",
            "in_regime",
            "check",
            "pass",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.instance.clone(),
                    r.instance_seed.map(|s| s.to_string()).unwrap_or_default(),
                    r.shape.clone(),
                    r.rank.to_string(),
                    f(r.eps),
                    f(r.gamma),
                    f(r.tau),
                    f(r.err_measured),
                    f(r.bound_tight),
                    f(r.bound_7eps),
                    f(r.bound_5eps),
                    r.in_regime.to_string(),
                    match r.check {
                        Check::Bounds => "bounds".into(),
                        Check::Exact => "exact".into(),
                        Check::AtLeast(v) => format!(">={}", f(v)),
                        Check::AtMost(v) => format!("<={}", f(v)),
                    },
                    r.pass.to_string(),
                ]
            })
            .collect(),
    };
    Ok(Report {
        pass: failures.is_empty(),
        summary,
        body: json!({ "failures": failures, "rows": rows }),
        table,
    })
}
