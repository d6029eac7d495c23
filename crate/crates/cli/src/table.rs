//! Seven four-party example states against their known entropic and rank data.

use qrecon::bipartite::{self, TABLE_COLUMNS};
use qrecon::quantum::DensityOperator;
use qrecon::random;
use serde_json::json;

use crate::output::{f, Report, RunConfig, Table};

pub const CELL_TOL: f64 = 1e-9;

/// Reference values in the row order of `four_party_examples`.
pub fn expected_values() -> [[f64; 7]; 7] {
    let l3 = 3f64.log2();
    let c184 = 2.0 * l3 - 4.0 / 3.0;
    let c162 = 4.0 - 1.5 * l3;
    let c092 = l3 - 2.0 / 3.0;
    let c062 = 3.0 - 1.5 * l3;
    [
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [2.0, 2.0, c092, c184, 0.0, 0.0, 0.0],
        [2.0, 2.0, c092, c184, c092, c184, c184],
        [2.0, 2.0, c062, 2.0, c062, 1.0, c162],
        [1.0, 2.0, 1.0, 2.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 2.0],
        [1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 2.0],
    ]
}

/// Expected `[C1, C2, C3, C4]` per row.
pub const EXPECTED_CONDITIONS: [[bool; 4]; 7] = [
    [true, true, true, true],
    [true, false, true, true],
    [true, false, false, true],
    [true, false, false, false],
    [false, false, true, true],
    [false, false, false, true],
    [false, false, false, false],
];

pub fn run(cfg: &RunConfig) -> qrecon::Result<Report> {
    let mut rng = random::rng(cfg.seed);
    let rho_a = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2))?;
    let rho_d = DensityOperator::new(vec![2], random::random_density(&mut rng, 2, 2))?;
    let rows = bipartite::four_party_table(&rho_a, &rho_d, cfg.rtol, cfg.mi_tol)?;
    let expected = expected_values();

    let mut pass = true;
    let mut failed_cells = 0;
    let mut json_rows = Vec::new();
    let mut csv_rows = Vec::new();
    for ((row, want), want_cond) in rows.iter().zip(&expected).zip(&EXPECTED_CONDITIONS) {
        let mut cells = Vec::new();
        for (c, (&got, &exp)) in row.values.iter().zip(want).enumerate() {
            let dev = (got - exp).abs();
            let ok = dev <= CELL_TOL;
            failed_cells += !ok as usize;
            cells.push(json!({
                "column": TABLE_COLUMNS[c],
                "measured": got,
                "expected": exp,
                "deviation": dev,
                "pass": ok,
            }));
            csv_rows.push(vec![
                row.name.to_string(),
                TABLE_COLUMNS[c].to_string(),
                f(got),
                f(exp),
                f(dev),
                ok.to_string(),
            ]);
        }
        let got_cond = row.conditions.pattern();
        let cond_ok = got_cond == *want_cond;
        pass &= cond_ok;
        for (i, (g, w)) in got_cond.iter().zip(want_cond).enumerate() {
            csv_rows.push(vec![
                row.name.to_string(),
                format!("C{}", i + 1),
                (*g as u8).to_string(),
                (*w as u8).to_string(),
                String::new(),
                (g == w).to_string(),
            ]);
        }
        json_rows.push(json!({
            "state": row.name,
            "cells": cells,
            "conditions": got_cond,
            "expected_conditions": want_cond,
            "conditions_pass": cond_ok,
            "implications_hold": row.conditions.implications_hold(),
        }));
    }
    pass &= failed_cells == 0;
    let summary = format!(
        "{} of 49 cells within {CELL_TOL:e}; condition grid {}",
        49 - failed_cells,
        if rows.iter().zip(&EXPECTED_CONDITIONS).all(|(r, w)| r.conditions.pattern() == *w) {
            "matches"
        } else {
            "differs"
        }
    );
    Ok(Report {
        pass,
        summary,
        body: json!({
            "columns": TABLE_COLUMNS,
            "condition_labels": ["C1", "C2", "C3", "C4"],
            "cell_tolerance": CELL_TOL,
            "rows": json_rows,
        }),
        table: Table {
            header: vec!["state", "quantity", "measured", "expected", "deviation", "pass"],
            rows: csv_rows,
        },
    })
}
