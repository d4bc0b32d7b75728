//! `zeno strobe`: evenly spaced measurements of a time-independent generator
//! against the Pauli rate equation, with `gamma^2 tau` held fixed.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use zeno_core::channel::{RateMatrix, RateRole};
use zeno_core::effective::{pauli_rates_dissipative, pauli_rates_hamiltonian, solve_pauli_on};
use zeno_core::operator::eigenbasis;
use zeno_core::{
    intervened_evolution, DensityOperator, MeasurementSchedule, OrthonormalBasis, PropagateOptions,
};

use crate::config::{GeneratorConfig, ScenarioConfig};
use crate::output::{ensure_dir, resolve_out_dir, write_csv, write_json, Provenance, Row};
use crate::{thread_pool, CliError};

#[derive(Debug, Args)]
pub struct StrobeArgs {
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Measurement spacings, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub taus: Vec<f64>,
    /// Length of the measured evolution.
    #[arg(long)]
    pub horizon: f64,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauRow {
    pub tau: f64,
    /// Hamiltonian scale `sqrt(strength / tau)`.
    pub gamma: f64,
    pub measurements: usize,
    /// Largest population difference at the measurement times.
    pub max_deviation: f64,
    pub csv: String,
    pub exact_steps: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HalvingRatio {
    pub from_tau: f64,
    pub to_tau: f64,
    /// `deviation(from_tau) / deviation(to_tau)`.
    pub ratio: f64,
}

#[derive(Serialize)]
struct Summary {
    provenance: Provenance,
    config: ScenarioConfig,
    horizon: f64,
    rows: Vec<TauRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    halving_ratios: Option<Vec<HalvingRatio>>,
}

fn measurement_times(tau: f64, horizon: f64) -> Vec<f64> {
    let count = (horizon / tau * (1.0 + 1e-12)).floor() as usize;
    (1..=count).map(|k| k as f64 * tau).collect()
}

/// Rate matrix of the configured generator at scale `gamma` in `basis`.
fn pauli_rates(cfg: &ScenarioConfig, basis: &OrthonormalBasis, gamma: f64, tau: f64) -> Result<RateMatrix, CliError> {
    let mut w = match cfg.hamiltonian() {
        Some(h) => pauli_rates_hamiltonian(&h, basis, gamma, tau)?,
        None => RateMatrix::zero(cfg.dimension, RateRole::Dynamical),
    };
    for (a, rate) in cfg.jumps() {
        let jump = pauli_rates_dissipative(&|_| a.clone(), &|_| rate, basis, 0.0)?;
        w = w.plus(&jump);
    }
    Ok(w)
}

fn run_tau(cfg: &ScenarioConfig, tau: f64, horizon: f64, index: usize) -> Result<(TauRow, Vec<Row>), CliError> {
    let gamma = (cfg.strength / tau).sqrt();
    let spec = cfg.generator_spec(gamma)?;
    let opts = PropagateOptions::with_tol(cfg.tolerances.tol);
    let basis = match cfg.basis()? {
        Some(b) => b,
        None => {
            let h = cfg.hamiltonian().ok_or_else(|| {
                CliError::Usage("instantaneous-eigenbasis measurement needs a Hamiltonian".into())
            })?;
            eigenbasis(&h, 0.0, opts.gap_tolerance)?.0
        }
    };
    let times = measurement_times(tau, horizon);
    let schedule = MeasurementSchedule::fixed(&times, &basis)?;
    let p0 = cfg.initial();
    let rho0 = DensityOperator::diagonal_in(&basis, &p0)?;
    let exact = intervened_evolution(&spec, &schedule, &rho0, 0.0, horizon, &opts, &[])?;

    let w = pauli_rates(cfg, &basis, gamma, tau)?;
    let pauli = solve_pauli_on(&|_| Ok(w.clone()), &p0, 0.0, &times, cfg.tolerances.tol)?;

    let mut rows = vec![
        Row {
            t: 0.0,
            scheme: "exact",
            populations: rho0.populations_in(&basis),
            offdiag_norm: rho0.offdiag_norm_in(&basis),
        },
        Row {
            t: 0.0,
            scheme: "effective",
            populations: p0.clone(),
            offdiag_norm: 0.0,
        },
    ];
    let mut max_deviation: f64 = 0.0;
    // the Pauli trajectory opens with its initial point
    for (pt, q) in exact.measurement_points().zip(&pauli.populations[1..]) {
        let p = pt.state.populations_in(&basis);
        for (a, b) in p.iter().zip(q) {
            max_deviation = max_deviation.max((a - b).abs());
        }
        rows.push(Row {
            t: pt.t,
            scheme: "exact",
            populations: p,
            offdiag_norm: pt.state.offdiag_norm_in(&basis),
        });
        rows.push(Row {
            t: pt.t,
            scheme: "effective",
            populations: q.clone(),
            offdiag_norm: 0.0,
        });
    }
    let row = TauRow {
        tau,
        gamma,
        measurements: times.len(),
        max_deviation,
        csv: format!("strobe-tau{index}.csv"),
        exact_steps: exact.meta.stats.accepted,
        warnings: exact.meta.warnings.clone(),
    };
    Ok((row, rows))
}

fn validate(cfg: &ScenarioConfig, args: &StrobeArgs) -> Result<(), CliError> {
    if let GeneratorConfig::Lz { .. } = cfg.generator {
        return Err(CliError::Usage("strobe needs a time-independent generator".into()));
    }
    if !(args.horizon > 0.0 && args.horizon.is_finite()) {
        return Err(CliError::Usage(format!("--horizon must be positive, got {}", args.horizon)));
    }
    if let Some(&tau) = args.taus.iter().find(|&&t| !(t > 0.0 && t <= args.horizon)) {
        return Err(CliError::Usage(format!("--taus entries must lie in (0, horizon], got {tau}")));
    }
    Ok(())
}

pub fn run(args: &StrobeArgs) -> Result<(), CliError> {
    let cfg = ScenarioConfig::from_path(&args.config)?;
    validate(&cfg, args)?;
    let dir = resolve_out_dir(
        args.out.as_deref(),
        cfg.output.as_ref().map(|o| o.directory.as_str()),
    );
    ensure_dir(&dir)?;

    let pool = thread_pool(args.jobs as usize)?;
    let results: Vec<Result<(TauRow, Vec<Row>), CliError>> = pool.install(|| {
        args.taus
            .par_iter()
            .enumerate()
            .map(|(i, &tau)| run_tau(&cfg, tau, args.horizon, i))
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        let (row, csv_rows) = result?;
        write_csv(&dir.join(&row.csv), cfg.dimension, &csv_rows)?;
        for w in &row.warnings {
            eprintln!("warning (tau = {}): {w}", row.tau);
        }
        println!("tau={:.6e} measurements={} max_deviation={:.6e}", row.tau, row.measurements, row.max_deviation);
        rows.push(row);
    }
    let halving_ratios = (rows.len() >= 2).then(|| {
        rows.windows(2)
            .map(|w| HalvingRatio {
                from_tau: w[0].tau,
                to_tau: w[1].tau,
                ratio: w[0].max_deviation / w[1].max_deviation,
            })
            .collect::<Vec<_>>()
    });
    if let Some(ratios) = &halving_ratios {
        for r in ratios {
            println!("ratio {:.6e} -> {:.6e}: {:.4}", r.from_tau, r.to_tau, r.ratio);
        }
    }
    let summary = Summary {
        provenance: Provenance::new("strobe"),
        config: cfg,
        horizon: args.horizon,
        rows,
        halving_ratios,
    };
    write_json(&dir.join("strobe-summary.json"), &summary)
}
