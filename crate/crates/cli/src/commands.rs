use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use mzi_phase::circular::holevo_from_sharpness;
use mzi_phase::harness::{
    run_estimation_observed, sweep_phases, write_stats_csv, RunSetup, Strategy, StatsRow,
};
use mzi_phase::interferometer::{precision_bound, standard_quantum_limit};
use mzi_phase::pso::{train_policy, POLICY_PROBE_LIMIT};
use mzi_phase::{GridGeometry, NoiseChannel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const CONFIG_FILE: &str = "run_config.toml";
pub const RECORD_FILE: &str = "run_record.json";
pub const POLICY_FILE: &str = "policy.json";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RECORDS_FILE: &str = "records.json";

/// Phase-averaged statistics for one (strategy, channel, N) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub channel: String,
    pub n: usize,
    pub phases: usize,
    pub m: usize,
    pub sigma_est: f64,
    pub sigma_est_err: f64,
    pub quad_loss: f64,
    pub quad_loss_err: f64,
    pub sql: f64,
    pub crb: f64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_config(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    prepare_out(out)?;
    write_text(&out.join(CONFIG_FILE), &config.to_toml())
}

fn model_channel(config: &RunConfig, sample: &NoiseChannel) -> NoiseChannel {
    if config.noise_aware {
        *sample
    } else {
        NoiseChannel::Ideal
    }
}

fn check_policy_length(strategy: &Strategy, n: usize) -> Result<(), CliError> {
    if let Strategy::Policy(p) = strategy {
        if p.n < n {
            return Err(CliError::Config(format!(
                "policy: covers {} probes but n = {n} was requested",
                p.n
            )));
        }
    }
    Ok(())
}

pub fn cmd_estimate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let strategy = match config.strategies()?.as_slice() {
        [s] => s.clone(),
        _ => return Err(CliError::Config("strategy: estimate takes a single strategy".into())),
    };
    let n = config.single_probe_count()?;
    let phi = config.single_phase()?;
    let channel = config.single_channel()?;
    check_policy_length(&strategy, n)?;
    let seed = config.seed.expect("seed resolved before dispatch");

    let geometry = GridGeometry::new(config.grid_size)?;
    let setup = RunSetup::new(n, strategy, geometry)
        .with_sample_channel(channel)
        .with_model_channel(model_channel(config, &channel))
        .with_support(config.support()?);

    write_config(config, out)?;
    let snapshot_dir = out.join("posterior");
    if config.output.snapshots {
        fs::create_dir_all(&snapshot_dir).map_err(|e| io_err(&snapshot_dir, e))?;
    }
    let mut write_error = None;
    let record = run_estimation_observed(&setup, phi, seed, 0, |k, grid| {
        if !config.output.snapshots || write_error.is_some() {
            return;
        }
        let path = snapshot_dir.join(format!("step_{k:04}.csv"));
        let result = create(&path).and_then(|w| grid.write_csv(w).map_err(|e| io_err(&path, e)));
        if let Err(e) = result {
            write_error = Some(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    write_json(&out.join(RECORD_FILE), &record)?;

    let last = record.steps.last().expect("n >= 1");
    println!(
        "strategy {} phi_true {:.6} estimate {:.6} sigma {}",
        record.strategy,
        record.phi_true.value(),
        record.final_estimate.value(),
        last.sigma.map_or("n/a".to_string(), |s| format!("{s:.6}"))
    );
    Ok(())
}

pub fn cmd_train_policy(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let n = config.single_probe_count()?;
    let channel = config.single_channel()?;
    let pso = config.pso_config()?;
    if n > POLICY_PROBE_LIMIT {
        eprintln!(
            "warning: trained policies lose precision beyond about {POLICY_PROBE_LIMIT} probes (n = {n})"
        );
    }
    write_config(config, out)?;
    let policy = train_policy(n, &channel, &pso)?;
    write_json(&out.join(POLICY_FILE), &policy)?;
    let sharpness = policy.sharpness.unwrap_or(0.0);
    let holevo = holevo_from_sharpness(sharpness).map_or("inf".to_string(), |v| format!("{v:.6}"));
    println!("sharpness {sharpness:.6} holevo_variance {holevo}");
    Ok(())
}

pub fn cmd_benchmark(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let strategies = config.strategies()?;
    let ns = config.probe_counts()?;
    let channels = config.channels()?;
    let phases = config.phase_set()?;
    let support = config.support()?;
    let n_max = *ns.last().expect("probe counts are non-empty");
    for s in &strategies {
        check_policy_length(s, n_max)?;
    }
    let seed = config.seed.expect("seed resolved before dispatch");
    let geometry = GridGeometry::new(config.grid_size)?;

    write_config(config, out)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut records = Vec::new();
    for channel in &channels {
        for strategy in &strategies {
            let setup = RunSetup::new(n_max, strategy.clone(), geometry.clone())
                .with_sample_channel(*channel)
                .with_model_channel(model_channel(config, channel))
                .with_support(support);
            let sweep = sweep_phases(&setup, &phases, config.m, seed, &ns, config.output.records)?;
            for row in &sweep.rows {
                rows.push(StatsRow::new(strategy.name(), channel, Some(row.phi_true), row.n, &row.stats)?);
            }
            for avg in &sweep.averages {
                summary.push(SummaryRow {
                    strategy: strategy.name().to_string(),
                    channel: channel.to_string(),
                    n: avg.n,
                    phases: avg.phases,
                    m: config.m,
                    sigma_est: avg.sigma_est,
                    sigma_est_err: avg.sigma_est_err,
                    quad_loss: avg.quad_loss,
                    quad_loss_err: avg.quad_loss_err,
                    sql: standard_quantum_limit(avg.n)?,
                    crb: precision_bound(channel, avg.n)?,
                });
            }
            records.extend(sweep.records);
        }
    }

    let path = out.join(BENCHMARK_FILE);
    write_stats_csv(create(&path)?, &rows).map_err(|e| io_err(&path, e))?;
    let path = out.join(SUMMARY_FILE);
    let mut wtr = csv::Writer::from_writer(create(&path)?);
    for row in &summary {
        wtr.serialize(row).map_err(|e| io_err(&path, e))?;
    }
    wtr.flush().map_err(|e| io_err(&path, e))?;
    if config.output.records {
        write_json(&out.join(RECORDS_FILE), &records)?;
    }
    for row in &summary {
        println!(
            "{} {} N={} sigma_est {:.5} +- {:.5} quad_loss {:.5} sql {:.5} crb {:.5}",
            row.strategy, row.channel, row.n, row.sigma_est, row.sigma_est_err, row.quad_loss, row.sql, row.crb
        );
    }
    Ok(())
}
