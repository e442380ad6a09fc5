//! CSV writers and the companion plot script.
//!
//! Every file starts with '#'-prefixed comment lines echoing the resolved
//! configuration; failures are appended as trailer comment lines. Numbers
//! use Rust's shortest round-trip float formatting, so identical runs
//! produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::HarnessError;
use crate::grid::Density;
use crate::harness::{BetaRow, ConvergenceOutcome, EvolveOutcome, RunConfig};

pub const EVOLVE_HEADER: &str =
    "step,t,mass,mom_x,mom_y,energy,entropy,modified_entropy,r,min_f,D,xi,lambda_sum,clipped,corrected";
pub const CONVERGE_HEADER: &str = "dt,error,slope";
pub const BETA_HEADER: &str = "beta,error,slope,warned";

fn echo_block(cfg: &RunConfig) -> String {
    let mut s = String::new();
    for line in cfg.echo_lines() {
        s.push_str("# ");
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn write_evolve_csv(
    path: &Path,
    cfg: &RunConfig,
    outcome: &EvolveOutcome,
) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(&echo_block(cfg));
    out.push_str(EVOLVE_HEADER);
    out.push('\n');
    for r in &outcome.reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            r.t,
            r.mass,
            r.momentum[0],
            r.momentum[1],
            r.energy,
            r.entropy,
            r.modified_entropy,
            r.r,
            r.min_f,
            r.entropy_production,
            r.xi,
            r.lambda_sum,
            r.clipped,
            u8::from(r.corrected),
        ));
    }
    if let Some(f) = &outcome.failure {
        out.push_str(&format!(
            "# failure: step={} t={} kind={}\n",
            f.step, f.t, f.kind
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_converge_csv(
    path: &Path,
    cfg: &RunConfig,
    outcome: &ConvergenceOutcome,
) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(&echo_block(cfg));
    out.push_str(CONVERGE_HEADER);
    out.push('\n');
    let slope = outcome.slope.unwrap_or(f64::NAN);
    for row in &outcome.rows {
        out.push_str(&format!("{},{},{}\n", row.dt, row.error, slope));
    }
    for (dt, f) in &outcome.failures {
        out.push_str(&format!(
            "# failure: dt={} step={} t={} kind={}\n",
            dt, f.step, f.t, f.kind
        ));
    }
    if let Some(f) = &outcome.reference_failure {
        out.push_str(&format!(
            "# failure: reference step={} t={} kind={}\n",
            f.step, f.t, f.kind
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Beta-study summary plus one evolve/converge CSV pair per beta next to the
/// summary path.
pub fn write_beta_csv(
    path: &Path,
    cfg: &RunConfig,
    rows: &[BetaRow],
) -> Result<Vec<std::path::PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let mut out = String::new();
    out.push_str(&echo_block(cfg));
    out.push_str(BETA_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.beta,
            row.error_vs_analytic.unwrap_or(f64::NAN),
            row.convergence.slope.unwrap_or(f64::NAN),
            u8::from(row.warned),
        ));
    }
    fs::write(path, out)?;
    written.push(path.to_path_buf());

    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("beta");
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    for row in rows {
        let mut b_cfg = cfg.clone();
        b_cfg.beta = Some(row.beta);
        let tag = format!("{}", row.beta).replace('.', "p");
        let conv_path = dir.join(format!("{stem}_beta{tag}_converge.csv"));
        write_converge_csv(&conv_path, &b_cfg, &row.convergence)?;
        written.push(conv_path);
        let ev_path = dir.join(format!("{stem}_beta{tag}_evolve.csv"));
        write_evolve_csv(&ev_path, &b_cfg, &row.entropy_run)?;
        written.push(ev_path);
    }
    Ok(written)
}

/// Final field as CSV rows vx,vy,f.
pub fn write_field_csv(path: &Path, cfg: &RunConfig, f: &Density) -> Result<(), HarnessError> {
    let grid = f.grid();
    let n = grid.modes();
    let mut out = String::new();
    out.push_str(&echo_block(cfg));
    out.push_str("vx,vy,f\n");
    for ix in 0..n {
        for iy in 0..n {
            out.push_str(&format!(
                "{},{},{}\n",
                grid.node(ix),
                grid.node(iy),
                f.values()[[ix, iy]]
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// A matplotlib script that plots every CSV written by this invocation:
/// log-log error-vs-dt for convergence tables, entropy traces over time for
/// evolution series.
pub fn write_plot_script(dir: &Path, csvs: &[std::path::PathBuf]) -> Result<(), HarnessError> {
    let list = csvs
        .iter()
        .map(|p| format!("    {:?},", p.file_name().and_then(|s| s.to_str()).unwrap_or("")))
        .collect::<Vec<_>>()
        .join("\n");
    const TEMPLATE: &str = r##"#!/usr/bin/env python3
"""Plot the CSVs produced by the run that wrote this script."""
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
@FILES@
]


def read(path):
    rows, header = [], None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            if header is None:
                header = line.strip().split(",")
            else:
                rows.append([float(x) for x in line.strip().split(",")])
    return header, rows


def main():
    files = sys.argv[1:] or [os.path.join(HERE, f) for f in FILES]
    for path in files:
        header, rows = read(path)
        if not rows:
            continue
        base = os.path.splitext(path)[0]
        cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}
        fig, ax = plt.subplots()
        if header[0] == "dt":
            ax.loglog(cols["dt"], cols["error"], "o-")
            ax.set_xlabel("dt")
            ax.set_ylabel("max-norm error")
            ax.set_title("slope = %.3f" % cols["slope"][0])
        elif header[0] == "step":
            ax.plot(cols["t"], cols["entropy"], label="actual entropy")
            ax.plot(cols["t"], cols["modified_entropy"], "--", label="modified entropy")
            ax.set_xlabel("t")
            ax.set_ylabel("entropy")
            ax.legend()
        elif header[0] == "beta":
            ax.semilogx(cols["beta"], cols["error"], "o-")
            ax.set_xlabel("beta")
            ax.set_ylabel("error at fixed dt")
        else:
            plt.close(fig)
            continue
        fig.savefig(base + ".png", dpi=150, bbox_inches="tight")
        plt.close(fig)
        print("wrote", base + ".png")


if __name__ == "__main__":
    main()
"##;
    let script = TEMPLATE.replace("@FILES@", &list);
    let path = dir.join("plot.py");
    let mut fh = fs::File::create(&path)?;
    fh.write_all(script.as_bytes())?;
    Ok(())
}
