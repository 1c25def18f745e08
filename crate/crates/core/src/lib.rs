//! Downlink precoder design for multi-user MISO FDD systems in which the base
//! station learns each user's channel from a few pilots (LMMSE estimation).
//!
//! The crate provides the training front end ([`channel_model`],
//! [`estimation`]), the rate and MSE figures of merit ([`metrics`]), the
//! closed-form AWAMSE algorithm ([`solver_awamse`]), the stochastic and
//! naive IWMMSE algorithms ([`solver_siwmmse`]) and the MMSE precoder used to
//! initialize all of them ([`baselines`]).
//!
//! Every routine is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the double-precision instantiation used by the
//! simulation harness.

pub mod baselines;
pub mod channel_model;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod solver_awamse;
pub mod solver_siwmmse;

pub use baselines::{mmse_precoder, MmsePrecoder};
pub use channel_model::{
    build_covariances, build_pilot_matrix, observe_downlink, observe_noiseless, sample_channel, ChannelRealization, ChannelSampler,
    CovarianceKind, CovarianceModel, Observation, PilotMatrix, Scenario, SystemConfig,
};
pub use error::{Error, Result};
pub use estimation::{error_covariance, lmmse_estimate, EstimationResult};
pub use metrics::{
    average_mse, awamse_objective, effective_sinr, instantaneous_rates, mmse_receive_filter, sum_rate_lower_bound, Precoder, RateReport,
    SolverState,
};
pub use scalar::{CMatrix, CVector, Cplx, Real};
pub use solver_awamse::{
    beta_scale, delta_opt, solve_awamse, update_precoder_unconstrained, update_receive_filters, update_weights, AwamseOptions, AwamseReport,
    SolverReport,
};
pub use solver_siwmmse::{
    average_statistics, bisection_precoder_oracle, constrained_precoder_bisection, draw_error_samples, per_sample_statistics, solve_iwmmse_naive,
    solve_siwmmse, solve_siwmmse_on_samples, update_precoder_siwmmse, ConstrainedSolution, SampleStats, SampleVariables, ScaledQuadratic,
    SiwmmseOptions,
};

pub type SystemConfig64 = SystemConfig<f64>;
pub type Scenario64 = Scenario<f64>;
pub type PilotMatrix64 = PilotMatrix<f64>;
pub type ChannelRealization64 = ChannelRealization<f64>;
pub type EstimationResult64 = EstimationResult<f64>;
pub type Precoder64 = Precoder<f64>;
pub type SolverReport64 = SolverReport<f64>;
pub type AwamseOptions64 = AwamseOptions<f64>;
pub type SiwmmseOptions64 = SiwmmseOptions<f64>;
pub type SolverState64 = SolverState<f64>;
