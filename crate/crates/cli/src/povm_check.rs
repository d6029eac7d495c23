//! POVMs whose exact statistics determine the output of a linear map.

use qrecon::measure;
use qrecon::opspace::{self, Superoperator};
use qrecon::{linalg, random};
use rand::Rng;
use serde_json::json;

use crate::output::{f, Report, RunConfig, Table};

pub const PSD_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

fn random_map(rng: &mut random::SeededRng, i: usize) -> qrecon::Result<(&'static str, Superoperator)> {
    let din = rng.gen_range(1..=3);
    let dout = rng.gen_range(1..=3);
    Ok(match i % 3 {
        0 => ("linear", Superoperator::from_matrix(&[din], &[dout], random::gaussian_matrix(rng, dout * dout, din * din))?),
        1 => ("transpose", Superoperator::from_fn(&[din + 1], &[din + 1], |x| Ok(x.transpose()))?),
        _ => {
            let nk = din.div_ceil(dout) + rng.gen_range(0..=2);
            let ks = random::random_kraus(rng, din, dout, nk);
            ("channel", Superoperator::from_kraus(&[din], &[dout], &ks)?)
        }
    })
}

pub fn run(cfg: &RunConfig, maps: usize, states_per_map: usize) -> qrecon::Result<Report> {
    let mut rng = random::rng(cfg.seed);
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut pass = true;
    let mut non_cp = 0;
    for i in 0..maps {
        let (kind, n) = random_map(&mut rng, i)?;
        let min_choi = n.cptp_report()?.min_choi_eig;
        non_cp += (min_choi < -1e-9) as usize;
        let povm = measure::povm_for_map(&n)?;
        let min_eig = povm.min_eigenvalue()?;
        let completeness = povm.completeness_defect();
        let d = opspace::total_dim(&n.in_dims);
        let mut err: f64 = 0.0;
        for _ in 0..states_per_map {
            let rank = rng.gen_range(1..=d);
            let rho = random::random_density(&mut rng, d, rank);
            let got = povm.reconstruct(&povm.probabilities(&rho)?)?;
            err = err.max(linalg::max_abs(&(got - n.apply(&rho)?)));
        }
        let ok = min_eig >= -PSD_TOL && completeness <= COMPLETENESS_TOL && err <= RECONSTRUCTION_TOL;
        pass &= ok;
        let dims = format!("{}->{}", d, opspace::total_dim(&n.out_dims));
        rows.push(vec![
            format!("map/{i:03}"),
            kind.into(),
            dims.clone(),
            f(min_choi),
            povm.len().to_string(),
            f(min_eig),
            f(completeness),
            f(err),
            ok.to_string(),
        ]);
        json_rows.push(json!({
            "instance": i,
            "kind": kind,
            "dims": dims,
            "min_choi_eigenvalue": min_choi,
            "elements": povm.len(),
            "scale": povm.scale,
            "min_element_eigenvalue": min_eig,
            "completeness_defect": completeness,
            "max_reconstruction_error": err,
            "pass": ok,
        }));
    }
    Ok(Report {
        pass,
        summary: format!("{maps} maps ({non_cp} not completely positive), {states_per_map} states each"),
        body: json!({
            "tolerances": { "psd": PSD_TOL, "completeness": COMPLETENESS_TOL, "reconstruction": RECONSTRUCTION_TOL },
            "non_cp_maps": non_cp,
            "maps": json_rows,
        }),
        table: Table {
            header: vec![
                "instance",
                "kind",
                "dims",
                "min_choi_eigenvalue",
                "elements",
                "min_element_eigenvalue",
                "completeness_defect",
                "max_reconstruction_error",
                "pass",
            ],
            rows,
        },
    })
}
