//! Sweeps over `(scheme, b, C)` cells: epochs to a target gap per cell and
//! repeat, plus a per-cell median summary.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eso::{eso_weights, naive_weights, EsoMode, SigmaSource};
use crate::loss::LossModel;
use crate::sampling::SamplingScheme;
use crate::solver::{fmt_real, solve, SolveConfig, Status};

pub const SWEEP_HEADER: &str = "scheme,C,b,seed,iters,epochs_to_target,final_gap,status";
pub const SUMMARY_HEADER: &str = "scheme,C,b,runs,reached,median_epochs,median_final_gap,relative_epochs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Serial,
    Nice,
    Distributed,
}

/// One sweep cell, written `scheme:b[:C][:naive]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepCell {
    pub kind: SchemeKind,
    pub b: usize,
    pub machines: usize,
    pub naive: bool,
}

impl SweepCell {
    pub fn label(&self) -> String {
        let base = match self.kind {
            SchemeKind::Serial => "serial",
            SchemeKind::Nice => "nice",
            SchemeKind::Distributed => "distributed",
        };
        if self.naive {
            format!("{base}-naive")
        } else {
            base.to_string()
        }
    }

    pub fn scheme(&self, n: usize) -> Result<SamplingScheme> {
        match self.kind {
            SchemeKind::Serial => SamplingScheme::serial(n),
            SchemeKind::Nice => SamplingScheme::nice(n, self.b),
            SchemeKind::Distributed => SamplingScheme::distributed(n, self.machines, self.b),
        }
    }

    fn is_serial_reference(&self) -> bool {
        !self.naive && self.b == 1 && self.machines == 1
    }
}

impl fmt::Display for SweepCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            SchemeKind::Serial => "serial",
            SchemeKind::Nice => "nice",
            SchemeKind::Distributed => "distributed",
        };
        write!(f, "{base}:{}:{}", self.b, self.machines)?;
        if self.naive {
            write!(f, ":naive")?;
        }
        Ok(())
    }
}

impl FromStr for SweepCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("--cell: expected scheme:b[:C][:naive], got '{s}'"));
        let mut parts = s.split(':').map(str::trim);
        let kind = match parts.next() {
            Some("serial") => SchemeKind::Serial,
            Some("nice") => SchemeKind::Nice,
            Some("distributed") => SchemeKind::Distributed,
            _ => return Err(bad()),
        };
        let b: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let mut machines = 1;
        let mut naive = false;
        for p in parts {
            if p == "naive" {
                naive = true;
            } else {
                machines = p.parse().map_err(|_| bad())?;
            }
        }
        if b == 0 || machines == 0 {
            return Err(bad());
        }
        if kind == SchemeKind::Serial && b != 1 {
            return Err(Error::Config(format!("--cell {s}: serial sampling has batch size 1")));
        }
        if kind != SchemeKind::Distributed && machines != 1 {
            return Err(Error::Config(format!("--cell {s}: only distributed cells take a machine count")));
        }
        Ok(SweepCell { kind, b, machines, naive })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub loss: LossModel,
    pub lambda: f64,
    pub cells: Vec<SweepCell>,
    pub repeats: usize,
    pub base_seed: u64,
    pub target_gap: f64,
    pub max_epochs: f64,
    pub threads: usize,
    pub sigma: SigmaSource,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("a sweep needs at least one --cell".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("--repeats must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub seed: u64,
    pub iters: Option<u64>,
    pub epochs_to_target: Option<f64>,
    pub final_gap: Option<f64>,
    pub status: String,
}

fn run_cell(data: &Dataset, plan: &ExperimentPlan, cell: &SweepCell, sigma: &SigmaSource, seed: u64) -> Result<SweepRow> {
    let scheme = cell.scheme(data.n())?;
    let weights = if cell.naive {
        naive_weights(data)
    } else {
        eso_weights(data, &scheme, EsoMode::default_for(&scheme), sigma)?
    };
    let mut config = SolveConfig::new(plan.loss, plan.lambda, scheme, weights);
    config.target_gap = plan.target_gap;
    config.max_epochs = plan.max_epochs;
    config.seed = seed;
    config.threads = plan.threads;
    let r = solve(data, &config)?;
    let reached = r.trace.iter().find(|t| t.gap <= plan.target_gap).map(|t| t.epochs);
    Ok(SweepRow {
        cell: cell.clone(),
        seed,
        iters: Some(r.iterations),
        epochs_to_target: reached,
        final_gap: r.trace.last().map(|t| t.gap),
        status: match r.status {
            Status::Converged => "converged".into(),
            Status::NotConverged => "not_converged".into(),
        },
    })
}

/// Runs every cell `repeats` times with seeds `base_seed + r`. A failing cell
/// is recorded with an `error:` status and the sweep continues.
pub fn run_plan(data: &Dataset, plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    plan.loss.check_labels(data.labels())?;
    // Shared by all cells so the power iteration runs once.
    let sigma = match plan.sigma {
        SigmaSource::Given(s) => SigmaSource::Given(s),
        ref est => SigmaSource::Given(est.resolve(data)?),
    };
    let mut rows = Vec::new();
    for cell in &plan.cells {
        for r in 0..plan.repeats {
            let seed = plan.base_seed + r as u64;
            let row = run_cell(data, plan, cell, &sigma, seed).unwrap_or_else(|e| SweepRow {
                cell: cell.clone(),
                seed,
                iters: None,
                epochs_to_target: None,
                final_gap: None,
                status: format!("error: {}", e.to_string().replace([',', '\n'], ";")),
            });
            rows.push(row);
        }
    }
    Ok(rows)
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn write_rows<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.cell.label(),
            r.cell.machines,
            r.cell.b,
            r.seed,
            r.iters.map(|i| i.to_string()).unwrap_or_default(),
            opt_real(r.epochs_to_target),
            opt_real(r.final_gap),
            r.status
        )?;
    }
    Ok(())
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub runs: usize,
    pub reached: usize,
    /// Median over the runs that reached the target.
    pub median_epochs: Option<f64>,
    pub median_final_gap: Option<f64>,
    /// `median_epochs` over that of the serial `b = 1` cell.
    pub relative_epochs: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut cells: Vec<SweepCell> = Vec::new();
    for r in rows {
        if !cells.contains(&r.cell) {
            cells.push(r.cell.clone());
        }
    }
    let mut out: Vec<CellSummary> = cells
        .into_iter()
        .map(|cell| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.cell == cell).collect();
            let mut epochs: Vec<f64> = mine.iter().filter_map(|r| r.epochs_to_target).collect();
            let mut gaps: Vec<f64> = mine.iter().filter_map(|r| r.final_gap).collect();
            CellSummary {
                runs: mine.len(),
                reached: epochs.len(),
                median_epochs: median(&mut epochs),
                median_final_gap: median(&mut gaps),
                relative_epochs: None,
                cell,
            }
        })
        .collect();
    let reference = out
        .iter()
        .find(|s| s.cell.is_serial_reference())
        .and_then(|s| s.median_epochs);
    if let Some(base) = reference.filter(|b| *b > 0.0) {
        for s in &mut out {
            s.relative_epochs = s.median_epochs.map(|e| e / base);
        }
    }
    out
}

pub fn write_summary<W: Write>(mut out: W, summary: &[CellSummary]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.cell.label(),
            s.cell.machines,
            s.cell.b,
            s.runs,
            s.reached,
            opt_real(s.median_epochs),
            opt_real(s.median_final_gap),
            opt_real(s.relative_epochs)
        )?;
    }
    Ok(())
}
