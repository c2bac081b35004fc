//! Ride-quality metrics of the carried object and heading stability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root-mean-square planar acceleration.
pub fn rmsa(ax: &[f64], ay: &[f64]) -> Result<f64> {
    if ax.len() != ay.len() {
        return Err(Error::Metric(format!(
            "acceleration series lengths differ ({} vs {})",
            ax.len(),
            ay.len()
        )));
    }
    if ax.is_empty() {
        return Err(Error::Metric("empty acceleration series".into()));
    }
    let sum: f64 = ax.iter().zip(ay).map(|(x, y)| x * x + y * y).sum();
    Ok((sum / ax.len() as f64).sqrt())
}

/// Mean magnitude of the finite-difference jerk vector.
pub fn mean_jerk(ax: &[f64], ay: &[f64], dt: f64) -> Result<f64> {
    if ax.len() != ay.len() {
        return Err(Error::Metric("acceleration series lengths differ".into()));
    }
    if ax.len() < 2 {
        return Err(Error::Metric("jerk needs at least 2 samples".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Metric(format!("dt must be > 0, got {dt}")));
    }
    let n = ax.len() - 1;
    let sum: f64 = (0..n)
        .map(|i| ((ax[i + 1] - ax[i]) / dt).hypot((ay[i + 1] - ay[i]) / dt))
        .sum();
    Ok(sum / n as f64)
}

/// Population standard deviation of heading error (radians in), in degrees.
pub fn sigma_omega(heading_error: &[f64]) -> Result<f64> {
    if heading_error.len() < 2 {
        return Err(Error::Metric("sigma_omega needs at least 2 samples".into()));
    }
    let n = heading_error.len() as f64;
    let mean = heading_error.iter().sum::<f64>() / n;
    let var = heading_error.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// m/s²
    pub rmsa: f64,
    /// m/s³
    pub mean_jerk: f64,
    /// degrees
    pub sigma_omega: f64,
    /// seconds
    pub transport_time: f64,
    pub n_samples: usize,
}

/// Raw series needed to score one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub heading_error: Vec<f64>,
    pub dt: f64,
    pub transport_time: f64,
}

impl StabilityReport {
    pub fn from_series(s: &MetricSeries) -> Result<Self> {
        Ok(Self {
            rmsa: rmsa(&s.ax, &s.ay)?,
            mean_jerk: mean_jerk(&s.ax, &s.ay, s.dt)?,
            sigma_omega: sigma_omega(&s.heading_error)?,
            transport_time: s.transport_time,
            n_samples: s.ax.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<StabilityReport>,
    pub mean: StabilityReport,
}

/// Per-run reports and their cross-run mean. `n_samples` of the mean is the
/// total sample count.
pub fn summarize(runs: &[StabilityReport]) -> Result<Summary> {
    if runs.is_empty() {
        return Err(Error::Metric("no runs to summarize".into()));
    }
    let n = runs.len() as f64;
    let avg = |f: fn(&StabilityReport) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Ok(Summary {
        runs: runs.to_vec(),
        mean: StabilityReport {
            rmsa: avg(|r| r.rmsa),
            mean_jerk: avg(|r| r.mean_jerk),
            sigma_omega: avg(|r| r.sigma_omega),
            transport_time: avg(|r| r.transport_time),
            n_samples: runs.iter().map(|r| r.n_samples).sum(),
        },
    })
}

/// Relative closeness used when comparing modes: `|a - b| <= rel * max(|a|, |b|)`,
/// with a tiny absolute floor so two zeros compare equal.
pub fn within_relative(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-9
}
