use std::path::PathBuf;

use anyhow::{bail, Result};
use cif_simul::traintoy::{run_gradient_check, CheckReport, EXTRA_CHECKS, GRADIENT_CHECKS};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{write_text, UsageError};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Run every check of a smooth operation.
    #[arg(long)]
    pub all: bool,
    /// Run one named check (repeatable).
    #[arg(long = "check", value_parser = clap::builder::PossibleValuesParser::new(GRADIENT_CHECKS.iter().chain(&EXTRA_CHECKS)))]
    pub checks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per check.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    eps: f64,
    tol: f64,
    passed: bool,
    checks: &'a [CheckReport],
}

pub fn run(a: GradcheckArgs) -> Result<()> {
    let names: Vec<&str> = if a.all {
        GRADIENT_CHECKS.to_vec()
    } else {
        a.checks.iter().map(String::as_str).collect()
    };
    if names.is_empty() {
        bail!(UsageError("select checks with --all or --check NAME".into()));
    }
    if a.points == 0 || !(a.eps > 0.0 && a.eps.is_finite()) {
        bail!(UsageError(
            "--points must be positive and --eps a positive number".into()
        ));
    }
    let reports = names
        .par_iter()
        .map(|n| run_gradient_check(n, a.seed, a.points, a.eps))
        .collect::<Result<Vec<_>, _>>()?;
    let mut passed = true;
    for r in &reports {
        let ok = r.max_rel_err < a.tol;
        passed &= ok;
        println!(
            "{:<16} points {:>4}  max rel err {:.3e}  {}",
            r.name,
            r.points,
            r.max_rel_err,
            if ok { "ok" } else { "FAIL" }
        );
    }
    let worst = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    println!("max rel err {worst:.3e} (tolerance {:.0e})", a.tol);
    if let Some(out) = &a.out {
        let s = Summary {
            seed: a.seed,
            eps: a.eps,
            tol: a.tol,
            passed,
            checks: &reports,
        };
        write_text(out, &(serde_json::to_string_pretty(&s)? + "\n"))?;
    }
    if !passed {
        bail!("gradient check exceeded tolerance {}", a.tol);
    }
    Ok(())
}
