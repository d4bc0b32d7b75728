//! `zeno lz`: measured Landau-Zener sweeps.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use zeno_core::propagate::PointKind;
use zeno_core::{lz_experiment, LzMode, LzOptions, LzParams, LzReport, LzScheduleKind};

use crate::output::{ensure_dir, resolve_out_dir, write_csv, write_json, Provenance, Row};
use crate::{thread_pool, CliError};

#[derive(Debug, Args)]
pub struct LzArgs {
    /// Coupling strength.
    #[arg(long)]
    pub delta: f64,
    /// Sweep rate.
    #[arg(long)]
    pub eps: f64,
    /// Measurement schedule: uniform, adapted or none.
    #[arg(long, default_value = "uniform")]
    pub kind: LzScheduleKind,
    /// Schedule sizes, comma separated; ignored for `none`.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub n: Vec<usize>,
    /// Schemes to run: exact, effective, closed or all.
    #[arg(long, default_value = "all")]
    pub mode: LzMode,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Local integration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Accepted change of the result under doubling of the truncation.
    #[arg(long)]
    pub truncation_tol: Option<f64>,
}

#[derive(Serialize)]
struct Parameters {
    delta: f64,
    eps: f64,
    kind: LzScheduleKind,
    n: Vec<usize>,
    mode: LzMode,
}

#[derive(Serialize)]
struct RunEntry {
    csv: String,
    report: LzReport,
}

#[derive(Serialize)]
struct Summary {
    provenance: Provenance,
    parameters: Parameters,
    options: LzOptions,
    runs: Vec<RunEntry>,
}

fn options(args: &LzArgs) -> Result<LzOptions, CliError> {
    let mut opts = LzOptions::default();
    if let Some(tol) = args.tol {
        opts.tol = tol;
    }
    if let Some(t) = args.truncation_tol {
        opts.truncation_tol = t;
    }
    if !(opts.tol > 0.0 && opts.truncation_tol > 0.0) {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    Ok(opts)
}

fn sizes(args: &LzArgs) -> Result<Vec<usize>, CliError> {
    if args.kind == LzScheduleKind::None {
        if args.mode == LzMode::Effective {
            return Err(CliError::Usage(
                "the effective equation needs measurements; use --mode exact or a schedule kind".into(),
            ));
        }
        return Ok(vec![0]);
    }
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(CliError::Usage("--n values must be at least 1".into()));
    }
    Ok(args.n.clone())
}

fn csv_name(kind: LzScheduleKind, n: usize) -> String {
    match kind {
        LzScheduleKind::None => "lz-none.csv".to_string(),
        _ => format!("lz-{kind}-n{n}.csv"),
    }
}

fn rows(p: &LzParams, report: &LzReport) -> Vec<Row> {
    let mut rows = Vec::new();
    if let Some(run) = &report.exact_run {
        // the run starts in the ground state phi_0(-T)
        rows.push(Row {
            t: -run.horizon,
            scheme: "exact",
            populations: vec![1.0, 0.0],
            offdiag_norm: 0.0,
        });
        for pt in &run.trajectory.points {
            if pt.kind == PointKind::Grid {
                continue;
            }
            let b = p.diabatic_basis(pt.t);
            rows.push(Row {
                t: pt.t,
                scheme: "exact",
                populations: pt.state.populations_in(&b),
                offdiag_norm: pt.state.offdiag_norm_in(&b),
            });
        }
    }
    if let Some(run) = &report.effective_run {
        for (&t, &r) in run.times.iter().zip(&run.rho11) {
            rows.push(Row {
                t,
                scheme: "effective",
                populations: vec![1.0 - r, r],
                offdiag_norm: 0.0,
            });
        }
    }
    if let Some(c) = report.closed_form {
        rows.push(Row {
            t: f64::INFINITY,
            scheme: "closed-form",
            populations: vec![1.0 - c, c],
            offdiag_norm: 0.0,
        });
    }
    rows
}

pub fn run(args: &LzArgs) -> Result<(), CliError> {
    let p = LzParams::new(args.delta, args.eps).map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = options(args)?;
    let ns = sizes(args)?;
    let dir = resolve_out_dir(args.out.as_deref(), None);
    ensure_dir(&dir)?;

    let pool = thread_pool(args.jobs as usize)?;
    let reports: Vec<Result<LzReport, CliError>> = pool.install(|| {
        ns.par_iter()
            .map(|&n| lz_experiment(&p, args.kind, n, args.mode, &opts).map_err(CliError::from))
            .collect()
    });

    let mut runs = Vec::with_capacity(reports.len());
    for (report, &n) in reports.into_iter().zip(&ns) {
        let report = report?;
        let name = csv_name(args.kind, n);
        write_csv(&dir.join(&name), 2, &rows(&p, &report))?;
        for w in &report.warnings {
            eprintln!("warning (n = {n}): {w}");
        }
        println!("{}", line(&report));
        runs.push(RunEntry { csv: name, report });
    }
    let summary = Summary {
        provenance: Provenance::new("lz"),
        parameters: Parameters {
            delta: args.delta,
            eps: args.eps,
            kind: args.kind,
            n: if args.kind == LzScheduleKind::None { Vec::new() } else { ns },
            mode: args.mode,
        },
        options: opts,
        runs,
    };
    write_json(&dir.join("lz-summary.json"), &summary)
}

fn line(report: &LzReport) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    format!(
        "kind={} n={} exact={} effective={} closed={}",
        report.kind,
        report.n,
        fmt(report.exact.as_ref().map(|e| e.terminal_rho11)),
        fmt(report.effective.as_ref().map(|e| e.terminal_rho11)),
        fmt(report.closed_form),
    )
}
