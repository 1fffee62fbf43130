//! CSV renderings of the sweep results. Metadata goes first as `# key=value` lines.

use std::fmt::Write as _;

use super::decay::DecayExperiment;
use super::sweep::{DerivativeSweep, SweepResult};

fn header(meta: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

fn pct(v: f64) -> String {
    format!("{v:.6}")
}

/// Columns `T,N,e_uN_pct,e_bar_uN_pct,dt`, one row per cell and hidden width.
pub fn table2_csv(result: &SweepResult, meta: &[(&str, String)]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "# master_seed={}", result.master_seed);
    out.push_str("T,N,e_uN_pct,e_bar_uN_pct,dt\n");
    for cell in &result.cells {
        match &cell.outcome {
            Ok(report) => {
                for w in &report.widths {
                    let _ = writeln!(out, "{},{},{},{},{}", cell.window, w.hidden, pct(w.mean), pct(w.max), cell.tap_dt);
                }
            }
            Err(msg) => {
                let _ = writeln!(out, "# failed T={} dt={}: {}", cell.window, cell.tap_dt, msg.replace('\n', " "));
            }
        }
    }
    out
}

/// Columns `beta,alpha,residual`, then the tap spacing and the number of fitted cells.
pub fn decay_fit_csv(result: &SweepResult, meta: &[(&str, String)]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "# master_seed={}", result.master_seed);
    let _ = writeln!(out, "# fit=least squares on ln e_u over cells with e_u >= {}%", result.floor_pct);
    out.push_str("beta,alpha,residual,dt,points\n");
    for row in &result.fits {
        match &row.fit {
            Ok(f) => {
                let _ = writeln!(out, "{:.6},{:.6},{:.6},{},{}", f.beta, f.alpha, f.residual, row.tap_dt, f.points);
            }
            Err(msg) => {
                let _ = writeln!(out, "# no fit for dt={}: {}", row.tap_dt, msg);
            }
        }
    }
    out
}

/// Columns `T,max_error,bound`, with the fitted rate and the bound constants as metadata.
pub fn decay_experiment_csv(exp: &DecayExperiment, meta: &[(&str, String)]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "# fit_beta={:.6}", exp.fit.beta);
    let _ = writeln!(out, "# fit_alpha={:.6}", exp.fit.alpha);
    let _ = writeln!(out, "# bound_beta1={:.6}", exp.bound.beta1);
    let _ = writeln!(out, "# bound_alpha1={:.6}", exp.bound.alpha1);
    out.push_str("T,max_error,bound\n");
    for p in &exp.points {
        let _ = writeln!(out, "{},{:.9e},{:.9e}", p.window, p.max_error, p.bound);
    }
    out
}

/// Columns `operator,regime,e_u_pct,e_bar_u_pct`, plus the selected width.
pub fn table3_csv(sweep: &DerivativeSweep, meta: &[(&str, String)]) -> String {
    let mut out = header(meta);
    let _ = writeln!(out, "# master_seed={}", sweep.master_seed);
    let _ = writeln!(out, "# snr_db={}", sweep.snr.as_db());
    out.push_str("operator,regime,e_u_pct,e_bar_u_pct,N\n");
    for row in &sweep.rows {
        match &row.outcome {
            Ok(r) => {
                let _ = writeln!(out, "{},{},{},{},{}", row.operator, row.regime.label(), pct(r.e_u), pct(r.e_bar_u), r.best_hidden);
            }
            Err(msg) => {
                let _ = writeln!(out, "# failed {} {}: {}", row.operator, row.regime.label(), msg.replace('\n', " "));
            }
        }
    }
    out
}
