//! Figures of merit: instantaneous rates, the effective-SINR rate lower
//! bound under LMMSE estimation error, the average MSE and the augmented
//! weighted average MSE (AWAMSE) objective.
//!
//! All rates are in bits per channel use (base-2 logarithms).

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::estimation::EstimationResult;
use crate::linalg::{frobenius_sq, trace_re};
use crate::scalar::{real, CMatrix, Real};

/// Stacked per-user precoding vectors, column `k` is `p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> Precoder<T> {
    pub fn new(matrix: CMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn zeros(antennas: usize, users: usize) -> Self {
        Self { matrix: CMatrix::zeros(antennas, users) }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn users(&self) -> usize {
        self.matrix.ncols()
    }

    /// `‖P‖_F²`.
    pub fn power(&self) -> T {
        frobenius_sq(&self.matrix)
    }

    /// `‖p_k‖²` per user.
    pub fn user_powers(&self) -> Vec<T> {
        self.matrix.column_iter().map(|c| c.iter().fold(T::zero(), |a, z| a + z.norm_sqr())).collect()
    }

    /// `‖p_k‖² / ‖P‖_F²`, or `None` for the zero precoder.
    pub fn power_fractions(&self) -> Option<Vec<T>> {
        let total = self.power();
        (total > T::zero()).then(|| self.user_powers().into_iter().map(|p| p / total).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| z.re == T::zero() && z.im == T::zero())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { matrix: self.matrix.map(|z| z.scale(factor)) }
    }

    /// True when `‖P‖_F² ≤ P_dl (1 + 1e-9)`.
    pub fn is_feasible(&self, power: T) -> bool {
        self.power() <= power * (T::one() + T::lit(1e-9))
    }
}

/// Per-user rates and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T> {
    pub per_user: Vec<T>,
    pub sum: T,
}

impl<T: Real> RateReport<T> {
    fn from_rates(per_user: Vec<T>) -> Self {
        let sum = per_user.iter().fold(T::zero(), |a, &r| a + r);
        Self { per_user, sum }
    }
}

/// Receive filters, weights and the scalar regularizers of an alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    /// Diagonal of `G`.
    pub filters: Vec<Complex<T>>,
    /// Diagonal of `U`.
    pub weights: Vec<T>,
    /// Regularizer `δ = β²λ`.
    pub delta: T,
    /// Common scaling applied to the final precoder.
    pub beta: T,
    /// One objective value per outer iteration.
    pub objective_trace: Vec<T>,
}

impl<T: Real> SolverState<T> {
    pub fn new(filters: Vec<Complex<T>>, weights: Vec<T>) -> Self {
        Self { filters, weights, delta: T::zero(), beta: T::one(), objective_trace: Vec::new() }
    }
}

/// Cross gains `ĥ_kᴴ p_j` and error quadratics `p_jᴴ C_err,k p_j`, indexed `(k, j)`.
#[derive(Debug, Clone)]
pub(crate) struct LinkTerms<T: Real> {
    pub cross: CMatrix<T>,
    pub error: DMatrix<T>,
}

impl<T: Real> LinkTerms<T> {
    pub fn new(est: &EstimationResult<T>, p: &Precoder<T>) -> Self {
        let k = est.users();
        let cross = est.estimates.adjoint() * p.matrix();
        let mut error = DMatrix::zeros(k, p.users());
        for (user, cov) in est.error_covariances.iter().enumerate() {
            if cov.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
                continue;
            }
            let cp = cov * p.matrix();
            for j in 0..p.users() {
                error[(user, j)] = p.matrix().column(j).dotc(&cp.column(j)).re;
            }
        }
        Self { cross, error }
    }

    /// `|ĥ_kᴴ p_k|²`.
    pub fn signal(&self, k: usize) -> T {
        self.cross[(k, k)].norm_sqr()
    }

    /// `Σ_j |ĥ_kᴴ p_j|² + Σ_j p_jᴴ C_err,k p_j` (no noise term).
    pub fn received(&self, k: usize) -> T {
        let mut acc = T::zero();
        for j in 0..self.cross.ncols() {
            acc += self.cross[(k, j)].norm_sqr() + self.error[(k, j)];
        }
        acc
    }
}

fn check_dims<T: Real>(est: &EstimationResult<T>, p: &Precoder<T>) {
    assert_eq!(est.antennas(), p.antennas(), "antenna count mismatch between estimate and precoder");
    assert_eq!(est.users(), p.users(), "user count mismatch between estimate and precoder");
}

/// `R_k = log₂(1 + |h_kᴴp_k|² / (Σ_{j≠k} |h_kᴴp_j|² + 1))` on the given channels.
pub fn instantaneous_rates<T: Real>(channels: &CMatrix<T>, p: &Precoder<T>) -> RateReport<T> {
    assert_eq!(channels.shape(), p.matrix().shape(), "channel and precoder shapes differ");
    let cross = channels.adjoint() * p.matrix();
    let rates = (0..cross.nrows())
        .map(|k| {
            let signal = cross[(k, k)].norm_sqr();
            let interference = (0..cross.ncols()).filter(|&j| j != k).fold(T::zero(), |a, j| a + cross[(k, j)].norm_sqr());
            (T::one() + signal / (interference + T::one())).log2()
        })
        .collect();
    RateReport::from_rates(rates)
}

/// Effective SINR with estimation-error energy charged as interference.
pub fn effective_sinr<T: Real>(est: &EstimationResult<T>, p: &Precoder<T>) -> Vec<T> {
    check_dims(est, p);
    let terms = LinkTerms::new(est, p);
    (0..est.users())
        .map(|k| {
            let signal = terms.signal(k);
            signal / (terms.received(k) - signal + T::one())
        })
        .collect()
}

/// `Σ_k log₂(1 + SINR̄_k)`.
pub fn sum_rate_lower_bound<T: Real>(est: &EstimationResult<T>, p: &Precoder<T>) -> RateReport<T> {
    RateReport::from_rates(effective_sinr(est, p).into_iter().map(|s| s.ln_1p() / T::ln_2()).collect())
}

/// Average MSE of user `k` for receive filter `g`.
pub fn average_mse<T: Real>(g: Complex<T>, k: usize, est: &EstimationResult<T>, p: &Precoder<T>) -> T {
    check_dims(est, p);
    let terms = LinkTerms::new(est, p);
    let g2 = g.norm_sqr();
    g2 * terms.received(k) - T::lit(2.0) * (g * terms.cross[(k, k)]).re + g2 + T::one()
}

/// `g_k = p_kᴴĥ_k / T_k`, `T_k = Σ_j (|ĥ_kᴴp_j|² + p_jᴴC_err,k p_j) + 1`.
pub fn mmse_receive_filter<T: Real>(k: usize, est: &EstimationResult<T>, p: &Precoder<T>) -> Complex<T> {
    check_dims(est, p);
    let terms = LinkTerms::new(est, p);
    terms.cross[(k, k)].conj().unscale(terms.received(k) + T::one())
}

/// Compact trace form of `Σ_k ξ_k`:
/// `tr U − 2Re tr(UGĤᴴP) + tr(UGĤᴴPPᴴĤG*) + tr(PPᴴZ) + tr(UGG*) − log₂det U`
/// with `Z = Σ_k u_k|g_k|² C_err,k`.
pub fn awamse_objective<T: Real>(state: &SolverState<T>, est: &EstimationResult<T>, p: &Precoder<T>) -> Result<T> {
    check_dims(est, p);
    let k = est.users();
    if state.weights.len() != k || state.filters.len() != k {
        return Err(Error::Dimension(format!("state holds {} weights and {} filters for {k} users", state.weights.len(), state.filters.len())));
    }
    if let Some(u) = state.weights.iter().find(|&&u| !(u > T::zero())) {
        return Err(Error::Domain(format!("weights must be positive (got {})", u.as_f64())));
    }
    let u = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, state.weights.iter().map(|&w| real(w))));
    let g = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&state.filters));
    let m = est.antennas();
    let z = est
        .error_covariances
        .iter()
        .zip(state.weights.iter().zip(&state.filters))
        .fold(CMatrix::zeros(m, m), |acc, (c, (&w, gk))| acc + c * real(w * gk.norm_sqr()));
    let ugt = &u * &g * est.estimates.adjoint();
    let ppt = p.matrix() * p.matrix().adjoint();
    let cross = (&ugt * p.matrix()).trace().re;
    let quad = (&ugt * &ppt * &est.estimates * g.adjoint()).trace().re;
    let err = trace_re(&(&ppt * &z));
    let noise = (&u * &g * g.adjoint()).trace().re;
    let logdet = state.weights.iter().fold(T::zero(), |a, w| a + w.log2());
    Ok(trace_re(&u) - T::lit(2.0) * cross + quad + err + noise - logdet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn scalar_est(h: f64, err: f64) -> EstimationResult<f64> {
        EstimationResult::new(CMatrix::from_element(1, 1, cplx(h, 0.0)), vec![CMatrix::from_element(1, 1, cplx(err, 0.0))]).unwrap()
    }

    fn scalar_p(p: f64) -> Precoder<f64> {
        Precoder::new(CMatrix::from_element(1, 1, cplx(p, 0.0)))
    }

    fn two_user_est() -> EstimationResult<f64> {
        EstimationResult::perfect(&CMatrix::from_element(1, 2, cplx(1.0, 0.0)))
    }

    #[test]
    fn single_user_unit_rate() {
        let r = instantaneous_rates(&CMatrix::from_element(1, 1, cplx(1.0, 0.0)), &scalar_p(1.0));
        assert!((r.sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_interference_rates() {
        let h = CMatrix::from_element(1, 2, cplx(1.0, 0.0));
        let r = instantaneous_rates(&h, &Precoder::new(h.clone()));
        for rk in &r.per_user {
            assert!((rk - 1.5f64.log2()).abs() < 1e-15);
        }
        assert!((r.sum - 2.0 * 1.5f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn zero_precoder_has_zero_rates() {
        let h = CMatrix::from_element(3, 2, cplx(0.3, 0.1));
        assert_eq!(instantaneous_rates(&h, &Precoder::zeros(3, 2)).sum, 0.0);
        assert_eq!(sum_rate_lower_bound(&EstimationResult::perfect(&h), &Precoder::zeros(3, 2)).sum, 0.0);
    }

    #[test]
    fn effective_sinr_examples() {
        assert!((effective_sinr(&scalar_est(1.0, 0.0), &scalar_p(2.0))[0] - 4.0).abs() < 1e-15);
        assert!((effective_sinr(&scalar_est(1.0, 0.5), &scalar_p(2.0))[0] - 4.0 / 3.0).abs() < 1e-15);
        let est = two_user_est();
        let sinr = effective_sinr(&est, &Precoder::new(est.estimates.clone()));
        assert!((sinr[0] - 0.5).abs() < 1e-15 && (sinr[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_from_exact_logs() {
        // SINR̄ = (1, 3) on decoupled scalar links
        let est = EstimationResult::perfect(&CMatrix::from_row_slice(2, 2, &[cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(1.0, 0.0)]));
        let p = Precoder::new(CMatrix::from_row_slice(2, 2, &[cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(3f64.sqrt(), 0.0)]));
        let r = sum_rate_lower_bound(&est, &p);
        assert!((r.per_user[0] - 1.0).abs() < 1e-15 && (r.per_user[1] - 2.0).abs() < 1e-15);
        assert!((r.sum - 3.0).abs() < 1e-14);
    }

    #[test]
    fn average_mse_examples() {
        let est = scalar_est(1.0, 0.0);
        assert!((average_mse(cplx(1.0, 0.0), 0, &est, &scalar_p(1.0)) - 1.0).abs() < 1e-15);
        assert_eq!(average_mse(cplx(0.0, 0.0), 0, &scalar_est(0.7, 0.3), &scalar_p(5.0)), 1.0);
        let g = mmse_receive_filter(0, &est, &scalar_p(1.0));
        assert!((g - cplx(0.5, 0.0)).norm() < 1e-15);
        let eps = average_mse(g, 0, &est, &scalar_p(1.0));
        assert!((eps - 0.5).abs() < 1e-15);
        assert!((-eps.log2() - sum_rate_lower_bound(&est, &scalar_p(1.0)).sum).abs() < 1e-15);
    }

    #[test]
    fn mmse_filter_of_silent_user_is_zero() {
        let est = two_user_est();
        let p = Precoder::new(CMatrix::from_row_slice(1, 2, &[cplx(0.0, 0.0), cplx(1.0, 0.0)]));
        assert_eq!(mmse_receive_filter(0, &est, &p), cplx(0.0, 0.0));
    }

    #[test]
    fn objective_of_zero_precoder_counts_users() {
        let est = two_user_est();
        let state = SolverState::new(vec![cplx(0.0, 0.0); 2], vec![1.0; 2]);
        assert!((awamse_objective(&state, &est, &Precoder::zeros(1, 2)).unwrap() - 2.0).abs() < 1e-15);
        let state = SolverState::new(vec![cplx(0.5, 0.5); 2], vec![1.0; 2]);
        // |g|² + 1 per user
        assert!((awamse_objective(&state, &est, &Precoder::zeros(1, 2)).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn objective_rejects_non_positive_weights() {
        let est = two_user_est();
        let state = SolverState::new(vec![cplx(0.0, 0.0); 2], vec![1.0, 0.0]);
        assert!(matches!(awamse_objective(&state, &est, &Precoder::zeros(1, 2)), Err(Error::Domain(_))));
    }

    #[test]
    fn power_fractions_sum_to_one() {
        let p = Precoder::new(CMatrix::from_row_slice(2, 2, &[cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(1.0, 1.0), cplx(0.0, 0.0)]));
        let f: Vec<f64> = p.power_fractions().unwrap();
        assert!((f[0] - 0.75).abs() < 1e-15 && (f[1] - 0.25).abs() < 1e-15);
        assert!(Precoder::<f64>::zeros(2, 2).power_fractions().is_none());
    }
}
