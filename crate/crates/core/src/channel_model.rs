//! System configuration, synthetic spatial covariances, channel sampling,
//! pilot construction and downlink training observations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, trace_re};
use crate::rng::{complex_gaussian, seeded_rng};
use crate::scalar::{cplx, real, CMatrix, CVector, Real};

/// Dimensions and transmit power of one downlink system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig<T> {
    /// Base-station antennas `M`.
    pub antennas: usize,
    /// Single-antenna users `K`.
    pub users: usize,
    /// Downlink pilots `T_dl`.
    pub pilots: usize,
    /// Transmit power `P_dl` on a linear scale.
    pub power: T,
}

impl<T: Real> SystemConfig<T> {
    pub fn new(antennas: usize, users: usize, pilots: usize, power: T) -> Result<Self> {
        if antennas == 0 || users == 0 || pilots == 0 {
            return Err(Error::InvalidParameter(format!(
                "antennas, users and pilots must be positive (got M={antennas}, K={users}, T_dl={pilots})"
            )));
        }
        if !(power > T::zero()) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!("transmit power must be positive and finite (got {})", power.as_f64())));
        }
        Ok(Self { antennas, users, pilots, power })
    }

    /// Same system at another transmit power.
    pub fn with_power(&self, power: T) -> Result<Self> {
        Self::new(self.antennas, self.users, self.pilots, power)
    }

    /// Per-component training noise variance `1 / P_dl`.
    pub fn training_noise_var(&self) -> T {
        T::one() / self.power
    }
}

/// Parametric family used to draw per-user covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceKind<T> {
    /// Real Toeplitz correlation `ρ^|i−j|`, identical for every user.
    Exponential { rho: T },
    /// `ρ^|i−j| e^{jφ_k (i−j)}` with a user-specific phase ramp `φ_k = π sin θ_k`,
    /// `θ_k` uniform in `[−π/2, π/2)`. Same spectrum as [`CovarianceKind::Exponential`].
    SteeredExponential { rho: T },
    /// `σ² I` (normalization makes every σ² equivalent).
    ScaledIdentity { variance: T },
    /// `A Aᴴ + ε I` with a complex Gaussian `M × r` factor `A`.
    RandomPsd { rank: usize, loading: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel<T> {
    pub kind: CovarianceKind<T>,
    pub seed: u64,
}

/// Known second-order statistics of all users.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub config: SystemConfig<T>,
    pub covariances: Vec<CMatrix<T>>,
}

impl<T: Real> Scenario<T> {
    /// Wraps externally supplied covariances after checking their shapes.
    pub fn new(config: SystemConfig<T>, covariances: Vec<CMatrix<T>>) -> Result<Self> {
        if covariances.len() != config.users {
            return Err(Error::Dimension(format!("{} covariances for {} users", covariances.len(), config.users)));
        }
        if let Some(c) = covariances.iter().find(|c| c.nrows() != config.antennas || c.ncols() != config.antennas) {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, expected {m}x{m}",
                c.nrows(),
                c.ncols(),
                m = config.antennas
            )));
        }
        Ok(Self { config, covariances })
    }

    /// Caches the covariance square roots for repeated channel draws.
    pub fn sampler(&self) -> ChannelSampler<T> {
        ChannelSampler { factors: self.covariances.iter().map(hermitian_sqrt).collect() }
    }
}

/// `M × T_dl` pilot matrix with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix<T: Real>(CMatrix<T>);

impl<T: Real> PilotMatrix<T> {
    /// Uses an arbitrary pilot matrix (no orthogonality check).
    pub fn from_matrix(matrix: CMatrix<T>) -> Self {
        Self(matrix)
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }
}

/// True channels, column `k` is `h_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T: Real> {
    pub h: CMatrix<T>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn new(h: CMatrix<T>) -> Self {
        Self { h }
    }
}

/// Per-user training observations `y_k = Φᴴ h_k + z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T: Real> {
    pub y: Vec<CVector<T>>,
    /// Variance of each noise component; zero for noiseless observations.
    pub noise_var: T,
}

/// `ρ^|i−j| e^{jφ(i−j)}`.
pub fn exponential_correlation<T: Real>(antennas: usize, rho: T, phase: T) -> CMatrix<T> {
    CMatrix::from_fn(antennas, antennas, |i, j| {
        let lag = i as i64 - j as i64;
        let mag = rho.powi(lag.unsigned_abs() as i32);
        let arg = phase * T::lit(lag as f64);
        cplx(mag * arg.cos(), mag * arg.sin())
    })
}

fn normalize_trace<T: Real>(mut c: CMatrix<T>) -> CMatrix<T> {
    let tr = trace_re(&c);
    if tr > T::zero() {
        let s = T::from_count(c.nrows()) / tr;
        c.iter_mut().for_each(|z| *z = z.scale(s));
    }
    c
}

/// Draws `K` Hermitian PSD covariances, each normalized to trace `M`.
pub fn build_covariances<T: Real>(model: &CovarianceModel<T>, config: &SystemConfig<T>) -> Result<Scenario<T>> {
    let m = config.antennas;
    let mut rng = seeded_rng(model.seed);
    let covariances = match model.kind {
        CovarianceKind::Exponential { rho } | CovarianceKind::SteeredExponential { rho } => {
            if !(rho >= T::zero() && rho < T::one()) {
                return Err(Error::InvalidParameter(format!("correlation coefficient must lie in [0, 1) (got {})", rho.as_f64())));
            }
            let steered = matches!(model.kind, CovarianceKind::SteeredExponential { .. });
            (0..config.users)
                .map(|_| {
                    let phase = if steered {
                        let theta: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                        T::lit(std::f64::consts::PI * theta.sin())
                    } else {
                        T::zero()
                    };
                    normalize_trace(exponential_correlation(m, rho, phase))
                })
                .collect()
        }
        CovarianceKind::ScaledIdentity { variance } => {
            if !(variance > T::zero()) {
                return Err(Error::InvalidParameter(format!("variance must be positive (got {})", variance.as_f64())));
            }
            (0..config.users).map(|_| normalize_trace(CMatrix::identity(m, m) * real(variance))).collect()
        }
        CovarianceKind::RandomPsd { rank, loading } => {
            if rank > m {
                return Err(Error::InvalidParameter(format!("rank {rank} exceeds antenna count {m}")));
            }
            if !(loading > T::zero()) {
                return Err(Error::InvalidParameter(format!("diagonal loading must be positive (got {})", loading.as_f64())));
            }
            (0..config.users)
                .map(|_| {
                    let a = CMatrix::<T>::from_fn(m, rank, |_, _| complex_gaussian(&mut rng, T::one()));
                    let c = &a * a.adjoint() + CMatrix::identity(m, m) * real(loading);
                    normalize_trace(c)
                })
                .collect()
        }
    };
    Ok(Scenario { config: *config, covariances })
}

/// Draws `h_k = C_k^{1/2} e_k` with `e_k ~ N_C(0, I)` for each user.
#[derive(Debug, Clone)]
pub struct ChannelSampler<T: Real> {
    factors: Vec<CMatrix<T>>,
}

impl<T: Real> ChannelSampler<T> {
    pub fn from_factors(factors: Vec<CMatrix<T>>) -> Self {
        Self { factors }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization<T> {
        let m = self.factors.first().map_or(0, |f| f.nrows());
        let mut h = CMatrix::zeros(m, self.factors.len());
        let mut e = CVector::zeros(m);
        for (k, f) in self.factors.iter().enumerate() {
            e.iter_mut().for_each(|z| *z = complex_gaussian(rng, T::one()));
            h.column_mut(k).copy_from(&(f * &e));
        }
        ChannelRealization { h }
    }

    /// Adds the sampled zero-mean part to `mean` column by column.
    pub fn sample_around<R: Rng + ?Sized>(&self, mean: &CMatrix<T>, rng: &mut R) -> ChannelRealization<T> {
        let mut draw = self.sample(rng);
        draw.h += mean;
        draw
    }
}

/// One channel draw, deterministic in `seed`.
pub fn sample_channel<T: Real>(scenario: &Scenario<T>, seed: u64) -> ChannelRealization<T> {
    scenario.sampler().sample(&mut seeded_rng(seed))
}

/// First `T_dl` columns of the unitary `M × M` DFT matrix.
pub fn build_pilot_matrix<T: Real>(config: &SystemConfig<T>) -> Result<PilotMatrix<T>> {
    let (m, t) = (config.antennas, config.pilots);
    if t > m {
        return Err(Error::Unsupported(format!("{t} pilots exceed {m} antennas")));
    }
    let norm = T::one() / T::from_count(m).sqrt();
    let two_pi = T::two_pi();
    Ok(PilotMatrix(CMatrix::from_fn(m, t, |i, j| {
        let arg = -two_pi * T::from_count((i * j) % m) / T::from_count(m);
        cplx(arg.cos() * norm, arg.sin() * norm)
    })))
}

fn project<T: Real>(pilots: &PilotMatrix<T>, channel: &ChannelRealization<T>) -> Vec<CVector<T>> {
    let proj = pilots.matrix().adjoint() * &channel.h;
    proj.column_iter().map(|c| c.into_owned()).collect()
}

/// `y_k = Φᴴ h_k + z_k` with `z_k ~ N_C(0, I / P_dl)`.
pub fn observe_downlink<T: Real>(
    pilots: &PilotMatrix<T>,
    channel: &ChannelRealization<T>,
    config: &SystemConfig<T>,
    seed: u64,
) -> Observation<T> {
    let noise_var = config.training_noise_var();
    let mut rng = seeded_rng(seed);
    let mut y = project(pilots, channel);
    for yk in y.iter_mut() {
        for z in yk.iter_mut() {
            *z += complex_gaussian::<T, _>(&mut rng, noise_var);
        }
    }
    Observation { y, noise_var }
}

/// Noise-free observations `y_k = Φᴴ h_k` (the `P_dl → ∞` training limit).
pub fn observe_noiseless<T: Real>(pilots: &PilotMatrix<T>, channel: &ChannelRealization<T>) -> Observation<T> {
    Observation { y: project(pilots, channel), noise_var: T::zero() }
}
