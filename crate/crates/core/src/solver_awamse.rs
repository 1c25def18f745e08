//! Alternating minimization of the augmented weighted average MSE.
//!
//! Each outer iteration computes, in closed form,
//!
//! 1. receive filters `g_k = p_kᴴĥ_k / T̃_k`,
//! 2. weights `u_k = (1 − |ĥ_kᴴp_k|² / T̃_k)⁻¹`,
//! 3. the unconstrained precoder `(Z + ĤG*UGĤᴴ + δI)⁻¹ĤG*U` with
//!    `δ = tr(UGG*) / P_dl`,
//!
//! where `T̃_k = Σ_j (|ĥ_kᴴp_j|² + p_jᴴC_err,k p_j + ‖p_j‖²/P_dl)` folds the
//! common receive/transmit scaling into the noise term. The iterate is never
//! projected onto the power constraint; a single rescaling to `‖P‖_F² = P_dl`
//! happens after convergence. The monitored sum-rate lower bound is always
//! evaluated on a rescaled copy, which the scaled filters make equal to
//! `−Σ_k log₂(1 − |ĥ_kᴴp_k|²/T̃_k)`.

use std::time::{Duration, Instant};

use nalgebra::Complex;

use crate::channel_model::SystemConfig;
use crate::error::{Error, Result};
use crate::estimation::EstimationResult;
use crate::linalg::{hermitian_solve, trace_re};
use crate::metrics::{awamse_objective, LinkTerms, Precoder, SolverState};
use crate::scalar::{real, CMatrix, Real};

/// Largest admissible `|ĥ_kᴴp_k|² / T̃_k` before the weight is clamped.
const RATIO_CLAMP: f64 = 1e-15;
/// Relative floor on `δ`.
const DELTA_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwamseOptions<T> {
    pub max_iters: usize,
    pub rel_tol: T,
    pub record_trace: bool,
}

impl<T: Real> Default for AwamseOptions<T> {
    fn default() -> Self {
        Self { max_iters: 100, rel_tol: T::lit(1e-6), record_trace: true }
    }
}

impl<T: Real> AwamseOptions<T> {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > T::zero()) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Result of an iterative precoder design.
#[derive(Debug, Clone)]
pub struct SolverReport<T: Real> {
    /// Final precoder with `‖P‖_F² = P_dl`.
    pub precoder: Precoder<T>,
    /// Number of precoder updates performed.
    pub iterations: usize,
    /// Monitored rate metric; entry 0 belongs to the initializer, entry `i`
    /// to the rescaled iterate after update `i`. Empty unless traced.
    pub bound_trace: Vec<T>,
    pub runtime: Duration,
    pub state: SolverState<T>,
    /// Set when a division or solve had to be guarded.
    pub degenerate: bool,
}

pub type AwamseReport<T> = SolverReport<T>;

/// Scaled link quantities shared by the filter and weight updates.
struct ScaledLink<T: Real> {
    /// `ĥ_kᴴ p_k`.
    gain: Vec<Complex<T>>,
    /// `T̃_k`.
    total: Vec<T>,
}

impl<T: Real> ScaledLink<T> {
    fn new(est: &EstimationResult<T>, p: &Precoder<T>, config: &SystemConfig<T>) -> Self {
        let terms = LinkTerms::new(est, p);
        let noise = p.power() / config.power;
        let k = est.users();
        Self {
            gain: (0..k).map(|u| terms.cross[(u, u)]).collect(),
            total: (0..k).map(|u| terms.received(u) + noise).collect(),
        }
    }

    fn filters(&self) -> Vec<Complex<T>> {
        self.gain
            .iter()
            .zip(&self.total)
            .map(|(h, &t)| if t > T::zero() { h.conj().unscale(t) } else { Complex::new(T::zero(), T::zero()) })
            .collect()
    }

    /// Weights and whether any of them had to be clamped.
    fn weights(&self) -> (Vec<T>, bool) {
        let cap = T::one() - T::lit(RATIO_CLAMP).max(T::default_epsilon());
        let mut clamped = false;
        let w = self
            .gain
            .iter()
            .zip(&self.total)
            .map(|(h, &t)| {
                if !(t > T::zero()) {
                    return T::one();
                }
                let ratio = h.norm_sqr() / t;
                if ratio > cap {
                    clamped = true;
                }
                T::one() / (T::one() - ratio.min(cap))
            })
            .collect();
        (w, clamped)
    }

    /// `−Σ log₂(1 − |ĥ_kᴴp_k|²/T̃_k)`, the rate bound of the rescaled precoder.
    fn bound(&self) -> T {
        self.weights().0.iter().fold(T::zero(), |a, u| a + u.log2())
    }
}

/// Receive filters for a possibly unscaled precoder; zero where `T̃_k = 0`.
pub fn update_receive_filters<T: Real>(est: &EstimationResult<T>, p: &Precoder<T>, config: &SystemConfig<T>) -> Vec<Complex<T>> {
    ScaledLink::new(est, p, config).filters()
}

/// Weights `u_k ≥ 1`; the ratio `|ĥ_kᴴp_k|²/T̃_k` is clamped below `1 − 1e-15`.
pub fn update_weights<T: Real>(est: &EstimationResult<T>, p: &Precoder<T>, config: &SystemConfig<T>) -> Vec<T> {
    ScaledLink::new(est, p, config).weights().0
}

/// `δ^opt = Σ_k u_k |g_k|² / P_dl`.
pub fn delta_opt<T: Real>(weights: &[T], filters: &[Complex<T>], config: &SystemConfig<T>) -> T {
    weights.iter().zip(filters).fold(T::zero(), |a, (&u, g)| a + u * g.norm_sqr()) / config.power
}

/// Builds `X = Z + ĤG*UGĤᴴ` and `B = ĤG*U`.
pub(crate) fn weighted_system<T: Real>(est: &EstimationResult<T>, filters: &[Complex<T>], weights: &[T]) -> (CMatrix<T>, CMatrix<T>) {
    let m = est.antennas();
    let k = est.users();
    let mut gram = CMatrix::zeros(m, m);
    let mut cross = CMatrix::zeros(m, k);
    for user in 0..k {
        let t = weights[user] * filters[user].norm_sqr();
        if t == T::zero() {
            continue;
        }
        let h = est.estimates.column(user);
        gram += &est.error_covariances[user] * real(t);
        gram.gerc(real(t), &h, &h, real(T::one()));
        cross.column_mut(user).copy_from(&(h * (filters[user].conj() * weights[user])));
    }
    (gram, cross)
}

/// Closed-form minimizer of the scaled objective for fixed filters and weights.
pub fn update_precoder_unconstrained<T: Real>(
    est: &EstimationResult<T>,
    filters: &[Complex<T>],
    weights: &[T],
    config: &SystemConfig<T>,
) -> Result<Precoder<T>> {
    let k = est.users();
    if filters.len() != k || weights.len() != k {
        return Err(Error::Dimension(format!("{} filters and {} weights for {k} users", filters.len(), weights.len())));
    }
    if let Some(u) = weights.iter().find(|&&u| !(u > T::zero())) {
        return Err(Error::Domain(format!("weights must be positive (got {})", u.as_f64())));
    }
    let (mut system, cross) = weighted_system(est, filters, weights);
    if cross.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
        return Ok(Precoder::zeros(est.antennas(), k));
    }
    let m = T::from_count(est.antennas());
    let delta = delta_opt(weights, filters, config).max(T::lit(DELTA_FLOOR) * trace_re(&system) / m);
    for i in 0..system.nrows() {
        system[(i, i)] += real(delta);
    }
    Ok(Precoder::new(hermitian_solve(&system, &cross, "AWAMSE precoder system")?))
}

/// Rescales to `‖P‖_F² = P_dl`, returning the scaled precoder and the factor.
pub fn beta_scale<T: Real>(p: &Precoder<T>, config: &SystemConfig<T>) -> Result<(Precoder<T>, T)> {
    let power = p.power();
    if !(power > T::zero()) || !power.is_finite() {
        return Err(Error::Degenerate("cannot rescale a zero precoder"));
    }
    let beta = (config.power / power).sqrt();
    Ok((p.scaled(beta), beta))
}

pub(crate) fn converged<T: Real>(current: T, previous: T, rel_tol: T) -> bool {
    (current - previous).abs() <= rel_tol * previous.abs().max(T::one())
}

/// Runs the AWAMSE iteration from a feasible initial precoder.
pub fn solve_awamse<T: Real>(
    est: &EstimationResult<T>,
    config: &SystemConfig<T>,
    init: &Precoder<T>,
    opts: &AwamseOptions<T>,
) -> Result<AwamseReport<T>> {
    opts.validate()?;
    if init.antennas() != est.antennas() || init.users() != est.users() {
        return Err(Error::Dimension(format!(
            "initial precoder is {}x{}, expected {}x{}",
            init.antennas(),
            init.users(),
            est.antennas(),
            est.users()
        )));
    }
    let start = Instant::now();
    let k = est.users();
    let mut degenerate = false;
    let mut trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut filters = vec![Complex::new(T::zero(), T::zero()); k];
    let mut weights = vec![T::one(); k];

    let (scaled_init, init_beta) = match beta_scale(init, config) {
        Ok(s) => s,
        Err(Error::Degenerate(_)) => {
            let state = SolverState::new(filters, weights);
            return Ok(SolverReport { precoder: init.clone(), iterations: 0, bound_trace: trace, runtime: start.elapsed(), state, degenerate: true });
        }
        Err(e) => return Err(e),
    };
    let mut current = init.clone();
    let mut current_scale = init_beta;
    let mut link = ScaledLink::new(est, &current, config);
    let mut previous = link.bound();
    let (mut best, mut best_bound, mut best_beta) = (scaled_init, previous, init_beta);
    if opts.record_trace {
        trace.push(previous);
    }
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        filters = link.filters();
        let (w, clamped) = link.weights();
        weights = w;
        degenerate |= clamped;

        if opts.record_trace {
            // Σξ_k at the rescaled point (βP, G/β, U)
            let state = SolverState::new(filters.iter().map(|g| g.unscale(current_scale)).collect(), weights.clone());
            objective_trace.push(awamse_objective(&state, est, &current.scaled(current_scale))?);
        }

        let next = match update_precoder_unconstrained(est, &filters, &weights, config) {
            Ok(p) => p,
            Err(Error::Singular(_)) => {
                degenerate = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let (scaled, beta) = match beta_scale(&next, config) {
            Ok(s) => s,
            Err(Error::Degenerate(_)) => {
                degenerate = true;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        link = ScaledLink::new(est, &next, config);
        let bound = link.bound();
        if opts.record_trace {
            trace.push(bound);
        }
        if bound >= best_bound {
            best_bound = bound;
            best = scaled;
            best_beta = beta;
        }
        current = next;
        current_scale = beta;
        if converged(bound, previous, opts.rel_tol) {
            break;
        }
        previous = bound;
    }

    let state = SolverState { delta: delta_opt(&weights, &filters, config), filters, weights, beta: best_beta, objective_trace };
    Ok(SolverReport { precoder: best, iterations, bound_trace: trace, runtime: start.elapsed(), state, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn scalar_est() -> EstimationResult<f64> {
        EstimationResult::perfect(&CMatrix::from_element(1, 1, cplx(1.0, 0.0)))
    }

    fn scalar_cfg(p: f64) -> SystemConfig<f64> {
        SystemConfig::new(1, 1, 1, p).unwrap()
    }

    #[test]
    fn scalar_filter_and_weight() {
        let p = Precoder::new(CMatrix::from_element(1, 1, cplx(1.0, 0.0)));
        let g = update_receive_filters(&scalar_est(), &p, &scalar_cfg(1.0));
        let u = update_weights(&scalar_est(), &p, &scalar_cfg(1.0));
        assert!((g[0] - cplx(0.5, 0.0)).norm() < 1e-15);
        assert!((u[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn silent_user_gets_zero_filter_and_unit_weight() {
        let est = EstimationResult::perfect(&CMatrix::from_element(2, 2, cplx(0.5, 0.2)));
        let p = Precoder::new(CMatrix::from_column_slice(2, 2, &[cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 1.0)]));
        let config = SystemConfig::new(2, 2, 1, 1.0).unwrap();
        assert_eq!(update_receive_filters(&est, &p, &config)[0], cplx(0.0, 0.0));
        assert_eq!(update_weights(&est, &p, &config)[0], 1.0);
    }

    #[test]
    fn zero_precoder_yields_zero_filters() {
        let est = EstimationResult::perfect(&CMatrix::from_element(2, 2, cplx(0.5, 0.2)));
        let config = SystemConfig::new(2, 2, 1, 1.0).unwrap();
        let g = update_receive_filters(&est, &Precoder::zeros(2, 2), &config);
        assert!(g.iter().all(|z| *z == cplx(0.0, 0.0)));
    }

    #[test]
    fn delta_examples() {
        assert!((delta_opt(&[2.0], &[cplx(1.0, 0.0)], &scalar_cfg(4.0)) - 0.5).abs() < 1e-15);
        assert_eq!(delta_opt(&[3.0, 2.0], &[cplx(0.0, 0.0); 2], &scalar_cfg(4.0)), 0.0);
    }

    #[test]
    fn scalar_unconstrained_precoder() {
        let p = update_precoder_unconstrained(&scalar_est(), &[cplx(1.0, 0.0)], &[1.0], &scalar_cfg(1.0)).unwrap();
        assert!((p.matrix()[(0, 0)] - cplx(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn all_zero_filters_give_zero_precoder() {
        let est = EstimationResult::perfect(&CMatrix::from_element(3, 2, cplx(0.5, 0.2)));
        let config = SystemConfig::new(3, 2, 1, 1.0).unwrap();
        let p = update_precoder_unconstrained(&est, &[cplx(0.0, 0.0); 2], &[1.0; 2], &config).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn beta_scale_examples() {
        let (p, beta) = beta_scale(&Precoder::new(CMatrix::from_element(1, 1, cplx(0.5, 0.0))), &scalar_cfg(1.0)).unwrap();
        assert!((beta - 2.0).abs() < 1e-15);
        assert!((p.power() - 1.0).abs() < 1e-15);
        let feasible = Precoder::new(CMatrix::from_element(2, 1, cplx(0.6, 0.8)));
        let (_, beta) = beta_scale(&feasible, &scalar_cfg(2.0)).unwrap();
        assert!((beta - 1.0).abs() < 1e-15);
        assert!(matches!(beta_scale(&Precoder::<f64>::zeros(2, 2), &scalar_cfg(1.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn options_are_validated() {
        let est = scalar_est();
        let init = Precoder::new(CMatrix::from_element(1, 1, cplx(1.0, 0.0)));
        let bad = AwamseOptions { max_iters: 0, ..Default::default() };
        assert!(solve_awamse(&est, &scalar_cfg(1.0), &init, &bad).is_err());
        let bad = AwamseOptions { rel_tol: 0.0, ..Default::default() };
        assert!(solve_awamse(&est, &scalar_cfg(1.0), &init, &bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let est = EstimationResult::<f32>::perfect(&CMatrix::from_element(2, 1, cplx(1.0f32, 0.5)));
        let config = SystemConfig::new(2, 1, 1, 10.0f32).unwrap();
        let init = Precoder::new(CMatrix::from_element(2, 1, cplx(1.0f32, 0.0)) * real(5f32.sqrt()));
        let rep = solve_awamse(&est, &config, &init, &AwamseOptions::default()).unwrap();
        assert!((rep.precoder.power() - 10.0).abs() < 1e-4);
    }
}
