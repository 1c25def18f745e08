//! Per-instance pipeline (covariances → channel → training → LMMSE estimate →
//! MMSE initializer → precoder design) and the full parameter sweep.

use std::time::{Duration, Instant};

use miso_precoding::rng::{derive_seed, Stream};
use miso_precoding::{
    build_covariances, build_pilot_matrix, instantaneous_rates, lmmse_estimate, mmse_precoder, observe_downlink, sample_channel, solve_awamse,
    solve_iwmmse_naive, solve_siwmmse, sum_rate_lower_bound, ChannelRealization64, CovarianceModel, EstimationResult64, Precoder64, Scenario64,
    SiwmmseOptions64, SystemConfig64,
};
use rayon::prelude::*;

use crate::config::{db_to_linear, Algorithm, ExperimentSpec};
use crate::Result;

/// One (setup, trial, algorithm, T_dl, power) result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub setup_id: usize,
    pub trial_id: usize,
    pub algorithm: Algorithm,
    pub antennas: usize,
    pub users: usize,
    pub pilots: usize,
    pub power_db: f64,
    /// Instantaneous sum rate on the true channel.
    pub sr_true: f64,
    /// Instantaneous sum rate with the estimate taken as the true channel.
    pub sr_est: f64,
    /// Training-aware sum-rate lower bound.
    pub sr_bound: f64,
    pub iterations: usize,
    pub runtime_microseconds: u64,
    pub power_fractions: Vec<f64>,
    pub degenerate: bool,
}

pub(crate) fn scenario(spec: &ExperimentSpec, setup: usize) -> Result<Scenario64> {
    let config = SystemConfig64::new(spec.antennas, spec.users, spec.pilots[0], 1.0)?;
    let model = CovarianceModel { kind: spec.covariance, seed: derive_seed(spec.seed, Stream::Covariance, &[setup as u64]) };
    Ok(build_covariances(&model, &config)?)
}

pub(crate) fn channel(spec: &ExperimentSpec, scenario: &Scenario64, setup: usize, trial: usize) -> ChannelRealization64 {
    sample_channel(scenario, derive_seed(spec.seed, Stream::Channel, &[setup as u64, trial as u64]))
}

/// Everything an algorithm needs for one (setup, trial, T_dl, power) cell.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub setup: usize,
    pub trial: usize,
    pub power_idx: usize,
    pub config: SystemConfig64,
    pub channel: ChannelRealization64,
    pub estimate: EstimationResult64,
    pub init: Precoder64,
    pub init_degenerate: bool,
}

impl Instance {
    pub fn new(
        spec: &ExperimentSpec,
        scenario: &Scenario64,
        channel: &ChannelRealization64,
        (setup, trial): (usize, usize),
        pilots: usize,
        power_idx: usize,
    ) -> Result<Self> {
        let config = SystemConfig64::new(spec.antennas, spec.users, pilots, db_to_linear(spec.powers_db[power_idx]))?;
        let phi = build_pilot_matrix(&config)?;
        // one noise seed per pilot count, shared across powers
        let noise_seed = derive_seed(spec.seed, Stream::TrainingNoise, &[setup as u64, trial as u64, pilots as u64]);
        let obs = observe_downlink(&phi, channel, &config, noise_seed);
        let estimate = lmmse_estimate(scenario, &phi, &obs)?;
        let init = mmse_precoder(&estimate, &config)?;
        Ok(Self {
            setup,
            trial,
            power_idx,
            config,
            channel: channel.clone(),
            estimate,
            init: init.precoder,
            init_degenerate: init.degenerate,
        })
    }

    /// CSI the algorithm works with: the LMMSE estimate, or the true channel
    /// for the perfect-CSI reference.
    pub fn knowledge(&self, algorithm: Algorithm) -> EstimationResult64 {
        match algorithm {
            Algorithm::IwmmsePerfectCsi => EstimationResult64::perfect(&self.channel.h),
            _ => self.estimate.clone(),
        }
    }
}

/// Designed precoder of one algorithm run.
#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub precoder: Precoder64,
    pub initial: Precoder64,
    pub knowledge: EstimationResult64,
    pub iterations: usize,
    pub runtime: Duration,
    pub degenerate: bool,
}

/// Runs `algorithm` on `inst`. Solver failures fall back to the initializer
/// and are flagged instead of propagated.
pub(crate) fn solve(spec: &ExperimentSpec, inst: &Instance, algorithm: Algorithm) -> Outcome {
    let knowledge = inst.knowledge(algorithm);
    let opts = spec.awamse_options();
    let start = Instant::now();
    let (initial, init_degenerate) = match algorithm {
        Algorithm::IwmmsePerfectCsi => match mmse_precoder(&knowledge, &inst.config) {
            Ok(m) => (m.precoder, m.degenerate),
            Err(_) => (inst.init.clone(), true),
        },
        _ => (inst.init.clone(), inst.init_degenerate),
    };
    let result = match algorithm {
        Algorithm::MmseOnly => {
            return Outcome {
                precoder: initial.clone(),
                initial,
                knowledge,
                iterations: 0,
                runtime: start.elapsed(),
                degenerate: init_degenerate,
            }
        }
        Algorithm::Awamse => solve_awamse(&knowledge, &inst.config, &initial, &opts),
        Algorithm::IwmmseNaiveOnEstimate | Algorithm::IwmmsePerfectCsi => {
            solve_iwmmse_naive(&ChannelRealization64::new(knowledge.estimates.clone()), &inst.config, &initial, &opts)
        }
        Algorithm::Siwmmse => {
            let seed = derive_seed(
                spec.seed,
                Stream::ErrorSamples,
                &[inst.setup as u64, inst.trial as u64, inst.config.pilots as u64, inst.power_idx as u64],
            );
            let sopts = SiwmmseOptions64 {
                samples: spec.samples,
                max_iters: spec.max_iters,
                rel_tol: spec.rel_tol,
                seed,
                record_trace: false,
                redraw_samples: false,
            };
            solve_siwmmse(&knowledge, &inst.config, &initial, &sopts)
        }
    };
    match result {
        Ok(report) => Outcome {
            precoder: report.precoder,
            initial,
            knowledge,
            iterations: report.iterations,
            runtime: report.runtime,
            degenerate: report.degenerate || init_degenerate,
        },
        Err(_) => Outcome { precoder: initial.clone(), initial, knowledge, iterations: 0, runtime: start.elapsed(), degenerate: true },
    }
}

fn record(spec: &ExperimentSpec, inst: &Instance, algorithm: Algorithm, out: &Outcome) -> SweepRecord {
    let fractions = out.precoder.power_fractions().unwrap_or_else(|| vec![0.0; spec.users]);
    SweepRecord {
        setup_id: inst.setup,
        trial_id: inst.trial,
        algorithm,
        antennas: spec.antennas,
        users: spec.users,
        pilots: inst.config.pilots,
        power_db: spec.powers_db[inst.power_idx],
        sr_true: instantaneous_rates(&inst.channel.h, &out.precoder).sum,
        sr_est: instantaneous_rates(&out.knowledge.estimates, &out.precoder).sum,
        sr_bound: sum_rate_lower_bound(&out.knowledge, &out.precoder).sum,
        iterations: out.iterations,
        runtime_microseconds: if spec.timing { out.runtime.as_micros() as u64 } else { 0 },
        power_fractions: fractions,
        degenerate: out.degenerate,
    }
}

fn run_trial(spec: &ExperimentSpec, scenario: &Scenario64, setup: usize, trial: usize) -> Result<Vec<SweepRecord>> {
    let h = channel(spec, scenario, setup, trial);
    let mut rows = Vec::new();
    // the perfect-CSI design does not depend on the pilot count
    let mut perfect: Vec<Option<Outcome>> = vec![None; spec.powers_db.len()];
    for &pilots in &spec.pilots {
        for power_idx in 0..spec.powers_db.len() {
            let inst = Instance::new(spec, scenario, &h, (setup, trial), pilots, power_idx)?;
            for &algorithm in &spec.algorithms {
                let out = match algorithm {
                    Algorithm::IwmmsePerfectCsi => perfect[power_idx].get_or_insert_with(|| solve(spec, &inst, algorithm)).clone(),
                    _ => solve(spec, &inst, algorithm),
                };
                rows.push(record(spec, &inst, algorithm, &out));
            }
        }
    }
    Ok(rows)
}

/// Sorts into (setup, trial, algorithm, T_dl, power) order.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        (a.setup_id, a.trial_id, a.algorithm, a.pilots)
            .cmp(&(b.setup_id, b.trial_id, b.algorithm, b.pilots))
            .then(a.power_db.total_cmp(&b.power_db))
    });
}

/// Runs every (setup, trial, algorithm, T_dl, power) combination. Trials run
/// in parallel; the output order and content depend on `spec` only.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let scenarios = (0..spec.setups).map(|s| scenario(spec, s)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..spec.setups).flat_map(|s| (0..spec.trials).map(move |t| (s, t))).collect();
    let chunks = cells.par_iter().map(|&(s, t)| run_trial(spec, &scenarios[s], s, t)).collect::<Result<Vec<_>>>()?;
    let mut records: Vec<SweepRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Share of rows flagged degenerate.
pub fn degenerate_fraction(records: &[SweepRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.degenerate).count() as f64 / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            antennas: 6,
            users: 3,
            pilots: vec![2, 3],
            powers_db: vec![0.0, 10.0, 20.0],
            algorithms: vec![Algorithm::MmseOnly],
            setups: 1,
            trials: 1,
            max_iters: 20,
            samples: 10,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn mmse_only_row_count() {
        let spec = small_spec();
        assert_eq!(run_sweep(&spec).unwrap().len(), 2 * 3);
    }

    #[test]
    fn row_count_is_full_product() {
        let spec = ExperimentSpec { setups: 2, trials: 2, algorithms: Algorithm::ALL.to_vec(), ..small_spec() };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 5 * 2 * 3);
    }

    #[test]
    fn rows_are_sorted_and_fractions_sum_to_one() {
        let spec = ExperimentSpec { setups: 2, trials: 2, algorithms: vec![Algorithm::Awamse, Algorithm::MmseOnly], ..small_spec() };
        let rows = run_sweep(&spec).unwrap();
        let mut sorted = rows.clone();
        sort_records(&mut sorted);
        assert_eq!(rows, sorted);
        for r in &rows {
            assert!((r.power_fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert_eq!(r.runtime_microseconds, 0);
        }
    }

    #[test]
    fn perfect_csi_rows_agree_across_flavours_and_pilots() {
        let spec = ExperimentSpec { algorithms: vec![Algorithm::IwmmsePerfectCsi], ..small_spec() };
        let rows = run_sweep(&spec).unwrap();
        for r in &rows {
            assert!((r.sr_true - r.sr_est).abs() <= 1e-9 * r.sr_true.max(1.0));
            assert!((r.sr_true - r.sr_bound).abs() <= 1e-9 * r.sr_true.max(1.0));
        }
        let (t2, t3): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.pilots == 2);
        for (a, b) in t2.iter().zip(&t3) {
            assert_eq!(a.sr_true, b.sr_true);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = ExperimentSpec { setups: 2, trials: 2, algorithms: vec![Algorithm::Siwmmse, Algorithm::Awamse], ..small_spec() };
        assert_eq!(run_sweep(&spec).unwrap(), run_sweep(&spec).unwrap());
    }

    #[test]
    fn degenerate_fraction_counts_flags() {
        let spec = small_spec();
        let mut rows = run_sweep(&spec).unwrap();
        assert_eq!(degenerate_fraction(&rows), 0.0);
        rows[0].degenerate = true;
        assert!((degenerate_fraction(&rows) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(degenerate_fraction(&[]), 0.0);
    }
}
