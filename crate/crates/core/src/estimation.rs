//! LMMSE channel estimation from downlink training and the matching
//! error covariances.

use crate::channel_model::{Observation, PilotMatrix, Scenario, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, hermitian_solve, trace_re};
use crate::scalar::{real, CMatrix, Real};

/// Channel estimates `ĥ_k` (columns of `estimates`) and error covariances `C_err,k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult<T: Real> {
    pub estimates: CMatrix<T>,
    pub error_covariances: Vec<CMatrix<T>>,
}

impl<T: Real> EstimationResult<T> {
    pub fn new(estimates: CMatrix<T>, error_covariances: Vec<CMatrix<T>>) -> Result<Self> {
        let (m, k) = estimates.shape();
        if error_covariances.len() != k || error_covariances.iter().any(|c| c.shape() != (m, m)) {
            return Err(Error::Dimension(format!("{k} users with {m} antennas need {k} error covariances of size {m}x{m}")));
        }
        Ok(Self { estimates, error_covariances })
    }

    /// Treats `channels` as error-free knowledge (`C_err,k = 0`).
    pub fn perfect(channels: &CMatrix<T>) -> Self {
        let m = channels.nrows();
        Self {
            estimates: channels.clone(),
            error_covariances: vec![CMatrix::zeros(m, m); channels.ncols()],
        }
    }

    pub fn antennas(&self) -> usize {
        self.estimates.nrows()
    }

    pub fn users(&self) -> usize {
        self.estimates.ncols()
    }

    /// `Σ_k C_err,k`.
    pub fn total_error_covariance(&self) -> CMatrix<T> {
        let m = self.antennas();
        self.error_covariances.iter().fold(CMatrix::zeros(m, m), |acc, c| acc + c)
    }
}

/// Gain `(ΦᴴCΦ + σ²I)⁻¹ ΦᴴC` (so that `ĥ = gainᴴ y`) together with `ΦᴴC`.
fn lmmse_gain<T: Real>(cov: &CMatrix<T>, pilots: &PilotMatrix<T>, noise_var: T) -> Result<Option<(CMatrix<T>, CMatrix<T>)>> {
    let phi = pilots.matrix();
    if phi.nrows() != cov.nrows() {
        return Err(Error::Dimension(format!("pilots have {} rows, covariance is {}x{}", phi.nrows(), cov.nrows(), cov.ncols())));
    }
    if phi.ncols() == 0 {
        return Ok(None);
    }
    let phc = phi.adjoint() * cov;
    let mut s = &phc * phi;
    if noise_var == T::zero() && trace_re(&s) <= T::zero() {
        // nothing observed and nothing known: the estimate is zero
        return Ok(None);
    }
    for i in 0..s.nrows() {
        s[(i, i)] += real(noise_var);
    }
    let gain = hermitian_solve(&s, &phc, "pilot-domain covariance")?;
    Ok(Some((gain, phc)))
}

/// `C_err = C − CΦ(ΦᴴCΦ + σ²I)⁻¹ΦᴴC` for an explicit noise variance.
pub fn error_covariance_with_noise<T: Real>(cov: &CMatrix<T>, pilots: &PilotMatrix<T>, noise_var: T) -> Result<CMatrix<T>> {
    Ok(match lmmse_gain(cov, pilots, noise_var)? {
        None => cov.clone(),
        Some((gain, phc)) => hermitian_part(&(cov - phc.adjoint() * gain)),
    })
}

/// Error covariance for training noise variance `1 / P_dl`. Independent of the observations.
pub fn error_covariance<T: Real>(cov: &CMatrix<T>, pilots: &PilotMatrix<T>, config: &SystemConfig<T>) -> Result<CMatrix<T>> {
    error_covariance_with_noise(cov, pilots, config.training_noise_var())
}

/// Per-user LMMSE estimate `ĥ_k = C_kΦ(ΦᴴC_kΦ + σ²I)⁻¹y_k` with `σ²` taken from the observation.
pub fn lmmse_estimate<T: Real>(scenario: &Scenario<T>, pilots: &PilotMatrix<T>, obs: &Observation<T>) -> Result<EstimationResult<T>> {
    let m = scenario.config.antennas;
    let k = scenario.covariances.len();
    if obs.y.len() != k {
        return Err(Error::Dimension(format!("{} observations for {k} users", obs.y.len())));
    }
    let mut estimates = CMatrix::zeros(m, k);
    let mut error_covariances = Vec::with_capacity(k);
    for (user, (cov, y)) in scenario.covariances.iter().zip(&obs.y).enumerate() {
        if y.len() != pilots.len() {
            return Err(Error::Dimension(format!("observation of length {} for {} pilots", y.len(), pilots.len())));
        }
        match lmmse_gain(cov, pilots, obs.noise_var)? {
            None => error_covariances.push(cov.clone()),
            Some((gain, phc)) => {
                estimates.column_mut(user).copy_from(&(gain.adjoint() * y));
                error_covariances.push(hermitian_part(&(cov - phc.adjoint() * gain)));
            }
        }
    }
    Ok(EstimationResult { estimates, error_covariances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{build_covariances, build_pilot_matrix, observe_noiseless, CovarianceKind, CovarianceModel};
    use crate::linalg::{frobenius_sq, hermitian_eigenvalues};
    use crate::scalar::{cplx, CVector};

    fn scalar_setup() -> (Scenario<f64>, PilotMatrix<f64>) {
        let config = SystemConfig::new(1, 1, 1, 1.0).unwrap();
        let scenario = Scenario::new(config, vec![CMatrix::identity(1, 1)]).unwrap();
        (scenario, build_pilot_matrix(&config).unwrap())
    }

    #[test]
    fn scalar_hand_computation() {
        let (scenario, phi) = scalar_setup();
        let obs = Observation { y: vec![CVector::from_element(1, cplx(0.6, 0.0))], noise_var: 1.0 };
        let est = lmmse_estimate(&scenario, &phi, &obs).unwrap();
        assert!((est.estimates[(0, 0)] - cplx(0.3, 0.0)).norm() < 1e-15);
        assert!((est.error_covariances[0][(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_prior_gives_zero_estimate() {
        let config = SystemConfig::new(3, 1, 2, 10.0).unwrap();
        let scenario = Scenario::new(config, vec![CMatrix::zeros(3, 3)]).unwrap();
        let phi = build_pilot_matrix(&config).unwrap();
        let obs = Observation { y: vec![CVector::from_element(2, cplx(1.0, -2.0))], noise_var: 0.1 };
        let est = lmmse_estimate(&scenario, &phi, &obs).unwrap();
        assert_eq!(est.estimates, CMatrix::zeros(3, 1));
        assert_eq!(est.error_covariances[0], CMatrix::zeros(3, 3));
    }

    #[test]
    fn noiseless_full_training_recovers_channel() {
        let config = SystemConfig::new(4, 2, 4, 1.0).unwrap();
        let scenario = build_covariances(&CovarianceModel { kind: CovarianceKind::Exponential { rho: 0.5 }, seed: 0 }, &config).unwrap();
        let phi = build_pilot_matrix(&config).unwrap();
        let h = crate::channel_model::sample_channel(&scenario, 4);
        let est = lmmse_estimate(&scenario, &phi, &observe_noiseless(&phi, &h)).unwrap();
        assert!(frobenius_sq::<f64>(&(&est.estimates - &h.h)).sqrt() < 1e-10);
        for c in &est.error_covariances {
            assert!(frobenius_sq::<f64>(c).sqrt() < 1e-10);
        }
    }

    #[test]
    fn decoupled_coordinates() {
        let config = SystemConfig::new(2, 1, 1, 1.0).unwrap();
        let phi = PilotMatrix::from_matrix(CMatrix::identity(2, 1));
        let c = error_covariance(&CMatrix::identity(2, 2), &phi, &config).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![cplx(0.5, 0.0), cplx(1.0, 0.0)]));
        assert!(frobenius_sq(&(c - expect)) < 1e-28);
    }

    #[test]
    fn no_pilots_leave_prior_untouched() {
        let config = SystemConfig::new(3, 1, 1, 1.0).unwrap();
        let cov = crate::channel_model::exponential_correlation(3, 0.7, 0.3);
        let phi = PilotMatrix::from_matrix(CMatrix::zeros(3, 0));
        assert_eq!(error_covariance(&cov, &phi, &config).unwrap(), cov);
    }

    #[test]
    fn error_trace_is_non_increasing_in_power() {
        let config = SystemConfig::new(8, 1, 3, 1.0).unwrap();
        let phi = build_pilot_matrix(&config).unwrap();
        let cov = crate::channel_model::exponential_correlation(8, 0.9, 0.4);
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let p = 10f64.powf(i as f64 / 2.0 - 1.0);
            let c = error_covariance(&cov, &phi, &config.with_power(p).unwrap()).unwrap();
            let tr = trace_re(&c);
            assert!(tr <= last + 1e-12);
            assert!(tr <= trace_re(&cov) + 1e-9);
            assert!(hermitian_eigenvalues(&c)[0] >= -1e-10);
            last = tr;
        }
    }

    #[test]
    fn observation_length_mismatch_is_rejected() {
        let (scenario, phi) = scalar_setup();
        let obs = Observation { y: vec![CVector::zeros(2)], noise_var: 1.0 };
        assert!(matches!(lmmse_estimate(&scenario, &phi, &obs), Err(Error::Dimension(_))));
    }
}
