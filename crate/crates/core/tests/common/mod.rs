#![allow(dead_code)]

use miso_precoding::rng::{complex_gaussian, derive_seed, seeded_rng, Stream};
use miso_precoding::{
    build_covariances, build_pilot_matrix, lmmse_estimate, mmse_precoder, observe_downlink, sample_channel, CMatrix, ChannelRealization64,
    CovarianceKind, CovarianceModel, EstimationResult64, Precoder64, SystemConfig64,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, var: f64) -> CMatrix<f64> {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, var))
}

pub fn frob(m: &CMatrix<f64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_psd(rng: &mut ChaCha8Rng, m: usize) -> CMatrix<f64> {
    let r = rng.random_range(1..=m);
    let var = rng.random_range(0.01..1.0) / r as f64;
    let a = gaussian_matrix(rng, m, r, var);
    &a * a.adjoint()
}

pub fn random_estimate(rng: &mut ChaCha8Rng, m: usize, k: usize) -> EstimationResult64 {
    let estimates = gaussian_matrix(rng, m, k, 1.0);
    let covs = (0..k).map(|_| random_psd(rng, m)).collect();
    EstimationResult64::new(estimates, covs).unwrap()
}

pub fn random_precoder(rng: &mut ChaCha8Rng, m: usize, k: usize, power: f64) -> Precoder64 {
    let p = Precoder64::new(gaussian_matrix(rng, m, k, 1.0));
    let s = (power / p.power()).sqrt();
    p.scaled(s)
}

pub struct Pipeline {
    pub config: SystemConfig64,
    pub channel: ChannelRealization64,
    pub estimate: EstimationResult64,
    pub init: Precoder64,
}

pub fn pipeline(kind: CovarianceKind<f64>, m: usize, k: usize, t: usize, power: f64, seed: u64) -> Pipeline {
    let config = SystemConfig64::new(m, k, t, power).unwrap();
    let scenario = build_covariances(&CovarianceModel { kind, seed: derive_seed(seed, Stream::Covariance, &[]) }, &config).unwrap();
    let channel = sample_channel(&scenario, derive_seed(seed, Stream::Channel, &[]));
    let phi = build_pilot_matrix(&config).unwrap();
    let obs = observe_downlink(&phi, &channel, &config, derive_seed(seed, Stream::TrainingNoise, &[]));
    let estimate = lmmse_estimate(&scenario, &phi, &obs).unwrap();
    let init = mmse_precoder(&estimate, &config).unwrap().precoder;
    Pipeline { config, channel, estimate, init }
}

pub const STEERED: CovarianceKind<f64> = CovarianceKind::SteeredExponential { rho: 0.9 };
