//! MMSE precoder, used as the common initializer and as a baseline.

use crate::channel_model::SystemConfig;
use crate::error::Result;
use crate::estimation::EstimationResult;
use crate::linalg::hermitian_solve;
use crate::metrics::Precoder;
use crate::scalar::{real, Real};
use crate::solver_awamse::beta_scale;

#[derive(Debug, Clone, PartialEq)]
pub struct MmsePrecoder<T: Real> {
    pub precoder: Precoder<T>,
    /// Set when the estimate is zero and no power can be allocated.
    pub degenerate: bool,
}

/// `β (ĤĤᴴ + Σ_k C_err,k + (M/P_dl) I)⁻¹ Ĥ` with `β` meeting `‖P‖_F² = P_dl`.
pub fn mmse_precoder<T: Real>(est: &EstimationResult<T>, config: &SystemConfig<T>) -> Result<MmsePrecoder<T>> {
    let m = est.antennas();
    let alpha = T::from_count(m) / config.power;
    let mut system = &est.estimates * est.estimates.adjoint() + est.total_error_covariance();
    for i in 0..m {
        system[(i, i)] += real(alpha);
    }
    let unscaled = Precoder::new(hermitian_solve(&system, &est.estimates, "MMSE precoder system")?);
    if unscaled.is_zero() {
        return Ok(MmsePrecoder { precoder: unscaled, degenerate: true });
    }
    let (precoder, _) = beta_scale(&unscaled, config)?;
    Ok(MmsePrecoder { precoder, degenerate: false })
}
