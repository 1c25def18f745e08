//! Aggregate reports built on top of the per-instance pipeline.

use std::time::Duration;

use miso_precoding::{instantaneous_rates, Precoder64};
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentSpec};
use crate::sweep::{channel, scenario, solve, Instance, SweepRecord};
use crate::{HarnessError, Result};

/// Users holding more than this share of the power count as active.
pub const ACTIVE_THRESHOLD: f64 = 0.01;

/// Sample mean and standard error (zero for fewer than two values).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `f` on every (setup, trial) instance at one (T_dl, power) cell, in
/// parallel, returning results in (setup, trial) order.
fn map_instances<R: Send>(spec: &ExperimentSpec, pilots: usize, power_idx: usize, f: impl Fn(&Instance) -> R + Sync) -> Result<Vec<R>> {
    spec.validate()?;
    let scenarios = (0..spec.setups).map(|s| scenario(spec, s)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..spec.setups).flat_map(|s| (0..spec.trials).map(move |t| (s, t))).collect();
    cells
        .par_iter()
        .map(|&(s, t)| {
            let h = channel(spec, &scenarios[s], s, t);
            Instance::new(spec, &scenarios[s], &h, (s, t), pilots, power_idx).map(|inst| f(&inst))
        })
        .collect()
}

fn top_power_idx(spec: &ExperimentSpec) -> usize {
    (0..spec.powers_db.len()).max_by(|&a, &b| spec.powers_db[a].total_cmp(&spec.powers_db[b])).unwrap_or(0)
}

/// Sum rates before (MMSE initializer) and after optimization, computed on
/// the channel estimate and on the true channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BeforeAfter {
    pub algorithm: Algorithm,
    pub pilots: usize,
    pub power_db: f64,
    pub instances: usize,
    /// Means over all instances: `[est before, est after, true before, true after]`.
    pub mean: [f64; 4],
    /// The same quadruple for the first instance alone.
    pub single: [f64; 4],
}

impl BeforeAfter {
    pub fn est_before(&self) -> f64 {
        self.mean[0]
    }
    pub fn est_after(&self) -> f64 {
        self.mean[1]
    }
    pub fn true_before(&self) -> f64 {
        self.mean[2]
    }
    pub fn true_after(&self) -> f64 {
        self.mean[3]
    }
}

/// Before/after comparison at the first pilot count and the highest power of
/// the spec.
pub fn before_after_report(spec: &ExperimentSpec, algorithm: Algorithm) -> Result<BeforeAfter> {
    let power_idx = top_power_idx(spec);
    let pilots = spec.pilots[0];
    let rows = map_instances(spec, pilots, power_idx, |inst| {
        let out = solve(spec, inst, algorithm);
        let est = &out.knowledge.estimates;
        let h = &inst.channel.h;
        [
            instantaneous_rates(est, &out.initial).sum,
            instantaneous_rates(est, &out.precoder).sum,
            instantaneous_rates(h, &out.initial).sum,
            instantaneous_rates(h, &out.precoder).sum,
        ]
    })?;
    let mut mean = [0.0; 4];
    for row in &rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / rows.len() as f64;
        }
    }
    Ok(BeforeAfter { algorithm, pilots, power_db: spec.powers_db[power_idx], instances: rows.len(), mean, single: rows[0] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub algorithm: Algorithm,
    pub pilots: usize,
    pub power_db: f64,
    /// `‖p_k‖² / P_dl` per instance (zeros for a zero precoder).
    pub per_instance: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Share of instances with at most `T_dl` users above [`ACTIVE_THRESHOLD`].
    pub within_pilot_limit: f64,
}

pub fn active_users(fractions: &[f64]) -> usize {
    fractions.iter().filter(|&&f| f > ACTIVE_THRESHOLD).count()
}

/// Per-user power shares at the first pilot count and the given power (which
/// must belong to the power grid).
pub fn power_allocation_report(spec: &ExperimentSpec, algorithm: Algorithm, power_db: f64) -> Result<PowerAllocation> {
    let power_idx = spec
        .powers_db
        .iter()
        .position(|&p| (p - power_db).abs() <= 1e-9)
        .ok_or_else(|| HarnessError::Report(format!("power {power_db} dB is not in the configured grid")))?;
    let pilots = spec.pilots[0];
    let per_instance = map_instances(spec, pilots, power_idx, |inst| {
        let p: Precoder64 = solve(spec, inst, algorithm).precoder;
        p.power_fractions().unwrap_or_else(|| vec![0.0; spec.users])
    })?;
    let n = per_instance.len() as f64;
    let mean = (0..spec.users).map(|k| per_instance.iter().map(|f| f[k]).sum::<f64>() / n).collect();
    let within = per_instance.iter().filter(|f| active_users(f) <= pilots).count() as f64 / n;
    Ok(PowerAllocation { algorithm, pilots, power_db, per_instance, mean, within_pilot_limit: within })
}

/// Least-squares slope of the mean true sum rate against `log₂ P_dl` over the
/// powers inside `window` (inclusive, in dB).
pub fn high_snr_slope(records: &[SweepRecord], algorithm: Algorithm, pilots: usize, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = if window.0 <= window.1 { window } else { (window.1, window.0) };
    let tol = 1e-9;
    let mut points: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == algorithm && r.pilots == pilots && r.power_db >= lo - tol && r.power_db <= hi + tol) {
        match points.iter_mut().find(|(db, _)| (db - r.power_db).abs() <= tol) {
            Some((_, v)) => v.push(r.sr_true),
            None => points.push((r.power_db, vec![r.sr_true])),
        }
    }
    if points.len() < 2 {
        return Err(HarnessError::Report(format!(
            "{algorithm} T_dl={pilots}: need at least two powers in [{lo}, {hi}] dB, found {}",
            points.len()
        )));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(db, v)| (db / 10.0 * 10f64.log2(), mean_stderr(v).0)).collect();
    let n = xy.len() as f64;
    let (mx, my) = (xy.iter().map(|p| p.0).sum::<f64>() / n, xy.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub pilots: usize,
    pub power_db: f64,
    pub solves: usize,
    pub total: Duration,
}

impl BenchRow {
    pub fn mean_microseconds(&self) -> f64 {
        self.total.as_secs_f64() * 1e6 / self.solves.max(1) as f64
    }
}

/// Wall-clock solve time of each algorithm on identical instances, measured
/// sequentially on the calling thread.
pub fn runtime_benchmark(spec: &ExperimentSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let mut rows: Vec<BenchRow> = Vec::new();
    for s in 0..spec.setups {
        let sc = scenario(spec, s)?;
        for t in 0..spec.trials {
            let h = channel(spec, &sc, s, t);
            for &pilots in &spec.pilots {
                for (power_idx, &power_db) in spec.powers_db.iter().enumerate() {
                    let inst = Instance::new(spec, &sc, &h, (s, t), pilots, power_idx)?;
                    for &algorithm in &spec.algorithms {
                        let elapsed = solve(spec, &inst, algorithm).runtime;
                        match rows.iter_mut().find(|r| r.algorithm == algorithm && r.pilots == pilots && r.power_db == power_db) {
                            Some(r) => {
                                r.solves += 1;
                                r.total += elapsed;
                            }
                            None => rows.push(BenchRow { algorithm, pilots, power_db, solves: 1, total: elapsed }),
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}
