//! Monte Carlo sweeps and paired-seed mode comparison.
//!
//! Trials run in parallel; results are collected in (cell, seed) order so the
//! emitted tables do not depend on scheduling.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::{summarize, StabilityReport};
use crate::scenario::{set_json_path, Mode, Scenario, Status};

/// One swept parameter: a dotted scenario path and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<Value>,
}

impl FromStr for Sweep {
    type Err = Error;

    /// `KEY=a,b,c`. Each value is read as JSON, falling back to a plain
    /// string (so `lighting=bright,dark` works unquoted).
    fn from_str(s: &str) -> Result<Self> {
        let (key, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep `{s}` must look like KEY=a,b,c")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("sweep `{s}` has an empty key")));
        }
        let values: Vec<Value> = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("sweep `{key}` has no values")));
        }
        Ok(Sweep {
            key: key.to_string(),
            values,
        })
    }
}

/// Seeds for a multi-run command: `n` consecutive seeds from the scenario's
/// base seed, else the scenario's explicit list, else just the base seed.
pub fn seed_list(scenario: &Scenario, n: Option<usize>) -> Result<Vec<u64>> {
    match n {
        Some(0) => Err(Error::Config("number of seeds must be >= 1".into())),
        Some(n) => Ok((0..n as u64).map(|k| scenario.seed.wrapping_add(k)).collect()),
        None => Ok(scenario.seeds.clone().unwrap_or_else(|| vec![scenario.seed])),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub seed: u64,
    /// `completed`, `docking_failed`, `task_incomplete` or `diverged`.
    pub status: String,
    pub failure_reason: Option<String>,
    pub dock_time: Option<f64>,
    pub sim_time: Option<f64>,
    pub rmsa: Option<f64>,
    pub mean_jerk: Option<f64>,
    pub sigma_omega: Option<f64>,
    pub transport_time: Option<f64>,
    pub trace_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: usize,
    /// Swept values of this cell, in sweep order.
    pub values: Vec<Value>,
    pub n_trials: usize,
    pub n_completed: usize,
    pub success_rate: f64,
    pub mean_dock_time: Option<f64>,
    pub mean_rmsa: Option<f64>,
    pub mean_jerk: Option<f64>,
    pub mean_sigma_omega: Option<f64>,
    pub mean_transport_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub sweep_keys: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellRecord>,
    pub trials: Vec<TrialRecord>,
}

fn grid(sweeps: &[Sweep]) -> Vec<Vec<Value>> {
    sweeps.iter().fold(vec![Vec::new()], |acc, s| {
        acc.into_iter()
            .flat_map(|prefix| {
                s.values.iter().map(move |v| {
                    let mut row = prefix.clone();
                    row.push(v.clone());
                    row
                })
            })
            .collect()
    })
}

fn trial(cell: usize, scenario: &Scenario, seed: u64) -> TrialRecord {
    match scenario.run(seed) {
        Ok(out) => {
            let s = out.summary;
            TrialRecord {
                cell,
                seed,
                status: s.status.as_str().to_string(),
                failure_reason: s.failure_reason.map(|r| r.as_str().to_string()),
                dock_time: s.dock_time,
                sim_time: Some(s.sim_time),
                rmsa: s.metrics.map(|m| m.rmsa),
                mean_jerk: s.metrics.map(|m| m.mean_jerk),
                sigma_omega: s.metrics.map(|m| m.sigma_omega),
                transport_time: s.metrics.map(|m| m.transport_time),
                trace_sha256: Some(s.trace_sha256),
            }
        }
        Err(e) => TrialRecord {
            cell,
            seed,
            status: "diverged".into(),
            failure_reason: Some(e.to_string()),
            dock_time: None,
            sim_time: None,
            rmsa: None,
            mean_jerk: None,
            sigma_omega: None,
            transport_time: None,
            trace_sha256: None,
        },
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every seed in every grid cell. A bad cell configuration aborts the
/// batch; individual trial failures are recorded.
pub fn run_batch(base: &Value, seeds: &[u64], sweeps: &[Sweep]) -> Result<BatchReport> {
    if seeds.is_empty() {
        return Err(Error::Config("number of seeds must be >= 1".into()));
    }
    let cells = grid(sweeps);
    let scenarios = cells
        .iter()
        .map(|values| {
            let mut doc = base.clone();
            for (s, v) in sweeps.iter().zip(values) {
                set_json_path(&mut doc, &s.key, v.clone())?;
            }
            Scenario::from_value(doc)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(c, seed)| trial(c, &scenarios[c], seed))
        .collect();

    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(c, values)| {
            let ts: Vec<&TrialRecord> = trials.iter().filter(|t| t.cell == c).collect();
            let done: Vec<&&TrialRecord> = ts.iter().filter(|t| t.status == "completed").collect();
            CellRecord {
                cell: c,
                values,
                n_trials: ts.len(),
                n_completed: done.len(),
                success_rate: done.len() as f64 / ts.len() as f64,
                mean_dock_time: mean_of(done.iter().map(|t| t.dock_time)),
                mean_rmsa: mean_of(done.iter().map(|t| t.rmsa)),
                mean_jerk: mean_of(done.iter().map(|t| t.mean_jerk)),
                mean_sigma_omega: mean_of(done.iter().map(|t| t.sigma_omega)),
                mean_transport_time: mean_of(done.iter().map(|t| t.transport_time)),
            }
        })
        .collect();
    Ok(BatchReport {
        sweep_keys: sweeps.iter().map(|s| s.key.clone()).collect(),
        seeds: seeds.to_vec(),
        cells,
        trials,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl BatchReport {
    /// Columns: `cell`, one column per sweep key, `n_trials`, `n_completed`,
    /// `success_rate`, `mean_dock_time`, `mean_rmsa`, `mean_jerk`,
    /// `mean_sigma_omega`, `mean_transport_time`.
    pub fn write_aggregate_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["cell".to_string()];
        header.extend(self.sweep_keys.iter().cloned());
        header.extend(
            [
                "n_trials",
                "n_completed",
                "success_rate",
                "mean_dock_time",
                "mean_rmsa",
                "mean_jerk",
                "mean_sigma_omega",
                "mean_transport_time",
            ]
            .map(String::from),
        );
        out.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut rec = vec![c.cell.to_string()];
            rec.extend(c.values.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }));
            rec.extend([
                c.n_trials.to_string(),
                c.n_completed.to_string(),
                c.success_rate.to_string(),
                opt(c.mean_dock_time),
                opt(c.mean_rmsa),
                opt(c.mean_jerk),
                opt(c.mean_sigma_omega),
                opt(c.mean_transport_time),
            ]);
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per trial, columns as the fields of [`TrialRecord`].
    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for t in &self.trials {
            out.serialize(t).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub seed: u64,
    pub docked: StabilityReport,
    pub cooperating: StabilityReport,
    pub docked_completed: bool,
    pub cooperating_completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: String,
    pub rmsa: f64,
    pub mean_jerk: f64,
    pub sigma_omega: f64,
    pub transport_time: f64,
}

/// Fraction of pairs in which docked is strictly lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRates {
    pub rmsa: f64,
    pub mean_jerk: f64,
    pub sigma_omega: f64,
    pub transport_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub table: Vec<ModeRow>,
    pub docked_wins: WinRates,
    pub pairs: Vec<PairRecord>,
}

/// Paired-seed docked vs. cooperating transport on the scenario's path.
pub fn compare(scenario: &Scenario, seeds: &[u64]) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::Config("number of seeds must be >= 1".into()));
    }
    let docked = scenario.with_mode(Mode::DockedTransport);
    let coop = scenario.with_mode(Mode::CooperatingTransport);
    let jobs: Vec<(u64, bool)> = seeds.iter().flat_map(|&s| [(s, true), (s, false)]).collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, is_docked)| {
            let s = if is_docked { &docked } else { &coop };
            let out = s.run(seed)?;
            let m = out.summary.metrics.ok_or_else(|| {
                Error::Metric(format!("{} run for seed {seed} produced too few samples", s.mode.as_str()))
            })?;
            Ok((m, out.summary.status == Status::Completed))
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<PairRecord> = seeds
        .iter()
        .zip(runs.chunks(2))
        .map(|(&seed, r)| PairRecord {
            seed,
            docked: r[0].0,
            cooperating: r[1].0,
            docked_completed: r[0].1,
            cooperating_completed: r[1].1,
        })
        .collect();

    let row = |name: &str, reports: Vec<StabilityReport>| -> Result<ModeRow> {
        let m = summarize(&reports)?.mean;
        Ok(ModeRow {
            mode: name.to_string(),
            rmsa: m.rmsa,
            mean_jerk: m.mean_jerk,
            sigma_omega: m.sigma_omega,
            transport_time: m.transport_time,
        })
    };
    let table = vec![
        row("docked", pairs.iter().map(|p| p.docked).collect())?,
        row("cooperating", pairs.iter().map(|p| p.cooperating).collect())?,
    ];
    let n = pairs.len() as f64;
    let rate = |f: fn(&StabilityReport) -> f64| {
        pairs.iter().filter(|p| f(&p.docked) < f(&p.cooperating)).count() as f64 / n
    };
    Ok(CompareReport {
        seeds: seeds.to_vec(),
        table,
        docked_wins: WinRates {
            rmsa: rate(|r| r.rmsa),
            mean_jerk: rate(|r| r.mean_jerk),
            sigma_omega: rate(|r| r.sigma_omega),
            transport_time: rate(|r| r.transport_time),
        },
        pairs,
    })
}

impl CompareReport {
    /// Columns: `mode,rmsa,mean_jerk,sigma_omega,transport_time`, one row per
    /// mode, followed by a `docked_win_rate` row.
    pub fn write_table_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.table {
            out.serialize(r).map_err(csv_err)?;
        }
        let wins = self.docked_wins;
        out.serialize(ModeRow {
            mode: "docked_win_rate".into(),
            rmsa: wins.rmsa,
            mean_jerk: wins.mean_jerk,
            sigma_omega: wins.sigma_omega,
            transport_time: wins.transport_time,
        })
        .map_err(csv_err)?;
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "approach.deviation_deg=0,30,60".parse().unwrap();
        assert_eq!(s.key, "approach.deviation_deg");
        assert_eq!(s.values, vec![json!(0), json!(30), json!(60)]);
        let l: Sweep = "lighting=bright, dark".parse().unwrap();
        assert_eq!(l.values, vec![json!("bright"), json!("dark")]);
        assert!("nokey".parse::<Sweep>().is_err());
        assert!("k=".parse::<Sweep>().is_err());
    }

    #[test]
    fn grid_is_row_major() {
        let a: Sweep = "a=1,2".parse().unwrap();
        let b: Sweep = "b=x,y,z".parse().unwrap();
        let g = grid(&[a, b]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![json!(1), json!("y")]);
        assert_eq!(grid(&[]), vec![Vec::<Value>::new()]);
    }
}
