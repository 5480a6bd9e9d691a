//! Long-format plotting data: `figure,series,x,y,yerr`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mzi_phase::harness::{RunRecord, StatsRow};
use serde::Serialize;

use crate::commands::{prepare_out, SummaryRow};
use crate::CliError;

pub const FIGURES: [&str; 7] = [
    "trajectory-estimate",
    "trajectory-sigma",
    "sigma-vs-n",
    "loss-vs-n",
    "mean-vs-phase",
    "sigma-vs-phase",
    "loss-vs-phase",
];

#[derive(Debug, Serialize)]
struct Point<'a> {
    figure: &'a str,
    series: String,
    x: f64,
    y: f64,
    yerr: Option<f64>,
}

#[derive(Default)]
struct Inputs {
    records: Vec<RunRecord>,
    rows: Vec<StatsRow>,
    summary: Vec<SummaryRow>,
}

fn malformed(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: malformed input: {e}", path.display()))
}

fn read_inputs(paths: &[PathBuf]) -> Result<Inputs, CliError> {
    let mut inputs = Inputs::default();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with(['{', '[']);
        if is_json {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(path, e))?;
            if value.is_array() {
                let recs: Vec<RunRecord> = serde_json::from_value(value).map_err(|e| malformed(path, e))?;
                inputs.records.extend(recs);
            } else {
                inputs
                    .records
                    .push(serde_json::from_value(value).map_err(|e| malformed(path, e))?);
            }
            continue;
        }
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| malformed(path, e))?.clone();
        if headers.iter().any(|h| h == "phi_true") {
            for row in rdr.deserialize() {
                inputs.rows.push(row.map_err(|e| malformed(path, e))?);
            }
        } else if headers.iter().any(|h| h == "sigma_est_err") {
            for row in rdr.deserialize() {
                inputs.summary.push(row.map_err(|e| malformed(path, e))?);
            }
        } else {
            return Err(malformed(path, "unrecognised table header"));
        }
    }
    Ok(inputs)
}

fn record_label(r: &RunRecord, many: bool) -> String {
    if many {
        format!("{}#{}", r.strategy, r.stream)
    } else {
        r.strategy.clone()
    }
}

fn points<'a>(figure: &'a str, inputs: &Inputs) -> Result<Vec<Point<'a>>, CliError> {
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!("figure {figure} needs {what}")))
        }
    };
    let mut out = Vec::new();
    match figure {
        "trajectory-estimate" | "trajectory-sigma" => {
            need(!inputs.records.is_empty(), "run record JSON input")?;
            let many = inputs.records.len() > 1;
            for r in &inputs.records {
                let label = record_label(r, many);
                for s in &r.steps {
                    let (y, yerr) = if figure == "trajectory-estimate" {
                        (s.estimate.map(|e| e.value()), s.sigma)
                    } else {
                        (s.sigma, None)
                    };
                    if let Some(y) = y {
                        out.push(Point { figure, series: label.clone(), x: s.k as f64, y, yerr });
                    }
                }
                if figure == "trajectory-estimate" {
                    let series = if many { format!("phi_true#{}", r.stream) } else { "phi_true".into() };
                    for s in &r.steps {
                        out.push(Point { figure, series: series.clone(), x: s.k as f64, y: r.phi_true.value(), yerr: None });
                    }
                }
            }
            if figure == "trajectory-sigma" {
                let kmax = inputs.records.iter().map(|r| r.steps.len()).max().unwrap_or(0);
                for k in 1..=kmax {
                    out.push(Point { figure, series: "sql".into(), x: k as f64, y: (k as f64).powf(-0.5), yerr: None });
                }
            }
        }
        "sigma-vs-n" | "loss-vs-n" => {
            need(!inputs.summary.is_empty(), "summary CSV input")?;
            let mut references = BTreeMap::new();
            for row in &inputs.summary {
                let (y, yerr) = if figure == "sigma-vs-n" {
                    (row.sigma_est, row.sigma_est_err)
                } else {
                    (row.quad_loss, row.quad_loss_err)
                };
                out.push(Point {
                    figure,
                    series: format!("{}/{}", row.strategy, row.channel),
                    x: row.n as f64,
                    y,
                    yerr: Some(yerr),
                });
                let square = figure == "loss-vs-n";
                let sq = |v: f64| if square { v * v } else { v };
                references.insert(("sql".to_string(), row.n), sq(row.sql));
                references.insert((format!("crb/{}", row.channel), row.n), sq(row.crb));
            }
            for ((series, n), y) in references {
                out.push(Point { figure, series, x: n as f64, y, yerr: None });
            }
        }
        "mean-vs-phase" | "sigma-vs-phase" | "loss-vs-phase" => {
            need(!inputs.rows.is_empty(), "benchmark CSV input")?;
            for row in &inputs.rows {
                let Some(x) = row.phi_true else { continue };
                let (y, yerr) = match figure {
                    "mean-vs-phase" => match row.circ_mean {
                        Some(c) => (c, Some(row.err_mean)),
                        None => continue,
                    },
                    "sigma-vs-phase" => (row.sigma_est, Some(row.err_sigma)),
                    _ => (row.quad_loss, None),
                };
                out.push(Point {
                    figure,
                    series: format!("{}/{}/N={}", row.strategy, row.channel, row.n),
                    x,
                    y,
                    yerr,
                });
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "figure: unknown id {other:?} (one of {})",
                FIGURES.join(", ")
            )))
        }
    }
    Ok(out)
}

pub fn cmd_plot_data(figure: &str, inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if !FIGURES.contains(&figure) {
        return Err(CliError::Config(format!(
            "figure: unknown id {figure:?} (one of {})",
            FIGURES.join(", ")
        )));
    }
    if inputs.is_empty() {
        return Err(CliError::Config("inputs: at least one input file is required".into()));
    }
    if let Some(missing) = inputs.iter().find(|p| !p.is_file()) {
        return Err(CliError::Config(format!("inputs: {} does not exist", missing.display())));
    }
    let data = read_inputs(inputs)?;
    let pts = points(figure, &data)?;
    prepare_out(out)?;
    let path = out.join(format!("plot_{figure}.csv"));
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    wtr.write_record(["figure", "series", "x", "y", "yerr"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for p in &pts {
        wtr.serialize(p).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    wtr.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{} points written to {}", pts.len(), path.display());
    Ok(())
}
