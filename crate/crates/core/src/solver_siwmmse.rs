//! Stochastic IWMMSE with a closed-form precoder update, the naive
//! (error-blind) IWMMSE baseline, and a Lagrangian-bisection solver for the
//! power-constrained precoder subproblem kept as a reference.
//!
//! Channel samples `h_k⁽ⁿ⁾ = ĥ_k + C_err,k^{1/2} e` are drawn once per solve
//! and reused in every iteration. Per sample and user the perfect-CSI WMMSE
//! rules are applied to the current power-feasible precoder
//! (`g = pᴴh / (Σ_j|hᴴp_j|² + 1)`, `u = 1 / (1 − |hᴴp|² / (Σ_j|hᴴp_j|² + 1))`),
//! and the averaged statistics drive the update
//! `P = (Σ_j Ψ̄_j + (Σ_j t̄_j / P_dl) I)⁻¹ F̄`.

use std::time::Instant;

use nalgebra::Complex;

use crate::channel_model::{ChannelRealization, ChannelSampler, SystemConfig};
use crate::error::{Error, Result};
use crate::estimation::EstimationResult;
use crate::linalg::{frobenius_sq, hermitian_solve, trace_re};
use crate::metrics::{Precoder, SolverState};
use crate::rng::{derive_seed, seeded_rng, Stream};
use crate::scalar::{real, CMatrix, Real};
use crate::solver_awamse::{beta_scale, converged, solve_awamse, weighted_system, AwamseOptions, SolverReport};

const RATIO_CLAMP: f64 = 1e-15;
/// Largest Lagrange multiplier tried before giving up on a bracket.
const MULTIPLIER_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiwmmseOptions<T> {
    /// Number of channel samples `N`.
    pub samples: usize,
    pub max_iters: usize,
    pub rel_tol: T,
    pub seed: u64,
    pub record_trace: bool,
    /// Draw a fresh sample set in every iteration instead of freezing one.
    /// Monotonicity of the monitored rate is lost when enabled.
    pub redraw_samples: bool,
}

impl<T: Real> Default for SiwmmseOptions<T> {
    fn default() -> Self {
        Self { samples: 100, max_iters: 100, rel_tol: T::lit(1e-6), seed: 0, record_trace: true, redraw_samples: false }
    }
}

/// Per-sample WMMSE variables for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVariables<T: Real> {
    pub filters: Vec<Complex<T>>,
    pub weights: Vec<T>,
    /// `t_k = u_k |g_k|²`.
    pub t: Vec<T>,
    /// `v_k = log₂ u_k`.
    pub v: Vec<T>,
    /// Column `k` is `f_k = u_k g_k* h_k`.
    pub f: CMatrix<T>,
    /// `Ψ_k = t_k h_k h_kᴴ`.
    pub psi: Vec<CMatrix<T>>,
}

/// Sample averages of the per-sample variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats<T: Real> {
    pub t_bar: Vec<T>,
    pub v_bar: Vec<T>,
    pub f_bar: CMatrix<T>,
    pub psi_bar: Vec<CMatrix<T>>,
    pub u_bar: Vec<T>,
    pub g_bar: Vec<Complex<T>>,
}

impl<T: Real> SampleStats<T> {
    fn zeros(antennas: usize, users: usize) -> Self {
        Self {
            t_bar: vec![T::zero(); users],
            v_bar: vec![T::zero(); users],
            f_bar: CMatrix::zeros(antennas, users),
            psi_bar: vec![CMatrix::zeros(antennas, antennas); users],
            u_bar: vec![T::zero(); users],
            g_bar: vec![Complex::new(T::zero(), T::zero()); users],
        }
    }

    /// Sample-average sum rate `(1/N) Σ_n Σ_k R_k⁽ⁿ⁾ = Σ_k v̄_k`.
    pub fn average_sum_rate(&self) -> T {
        self.v_bar.iter().fold(T::zero(), |a, &v| a + v)
    }

    fn scale(&mut self, s: T) {
        let sc = real(s);
        self.t_bar.iter_mut().chain(self.v_bar.iter_mut()).chain(self.u_bar.iter_mut()).for_each(|x| *x *= s);
        self.g_bar.iter_mut().for_each(|g| *g *= sc);
        self.f_bar *= sc;
        self.psi_bar.iter_mut().for_each(|p| *p *= sc);
    }
}

/// Perfect-CSI filter and weight of every user on one channel draw.
fn sample_rules<T: Real>(h: &CMatrix<T>, p: &Precoder<T>) -> (Vec<Complex<T>>, Vec<T>) {
    let cross = h.adjoint() * p.matrix();
    let cap = T::one() - T::lit(RATIO_CLAMP).max(T::default_epsilon());
    let k = cross.nrows();
    let mut filters = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for user in 0..k {
        let total = cross.row(user).iter().fold(T::one(), |a, z| a + z.norm_sqr());
        let gain = cross[(user, user)];
        filters.push(gain.conj().unscale(total));
        weights.push(T::one() / (T::one() - (gain.norm_sqr() / total).min(cap)));
    }
    (filters, weights)
}

/// Draws `N` channel realizations `ĥ_k + C_err,k^{1/2} e_k`.
pub fn draw_error_samples<T: Real>(est: &EstimationResult<T>, n: usize, seed: u64) -> Vec<ChannelRealization<T>> {
    let sampler = error_sampler(est);
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| sampler.sample_around(&est.estimates, &mut rng)).collect()
}

fn error_sampler<T: Real>(est: &EstimationResult<T>) -> ChannelSampler<T> {
    ChannelSampler::from_factors(est.error_covariances.iter().map(crate::linalg::hermitian_sqrt).collect())
}

/// All per-sample variables for one draw and a feasible precoder.
pub fn per_sample_statistics<T: Real>(sample: &ChannelRealization<T>, p: &Precoder<T>) -> SampleVariables<T> {
    let (filters, weights) = sample_rules(&sample.h, p);
    let k = filters.len();
    let mut t = Vec::with_capacity(k);
    let mut v = Vec::with_capacity(k);
    let mut f = CMatrix::zeros(sample.h.nrows(), k);
    let mut psi = Vec::with_capacity(k);
    for user in 0..k {
        let h = sample.h.column(user);
        let tk = weights[user] * filters[user].norm_sqr();
        t.push(tk);
        v.push(weights[user].log2());
        f.column_mut(user).copy_from(&(h * (filters[user].conj() * weights[user])));
        psi.push(h * h.adjoint() * real(tk));
    }
    SampleVariables { filters, weights, t, v, f, psi }
}

/// Averages the per-sample variables over `samples` at precoder `p`.
pub fn average_statistics<T: Real>(samples: &[ChannelRealization<T>], p: &Precoder<T>) -> SampleStats<T> {
    let (m, k) = (p.antennas(), p.users());
    let mut stats = SampleStats::zeros(m, k);
    for sample in samples {
        let (filters, weights) = sample_rules(&sample.h, p);
        for user in 0..k {
            let h = sample.h.column(user);
            let (g, u) = (filters[user], weights[user]);
            let t = u * g.norm_sqr();
            stats.t_bar[user] += t;
            stats.v_bar[user] += u.log2();
            stats.u_bar[user] += u;
            stats.g_bar[user] += g;
            let mut fcol = stats.f_bar.column_mut(user);
            fcol.axpy(g.conj() * u, &h, real(T::one()));
            if t > T::zero() {
                stats.psi_bar[user].gerc(real(t), &h, &h, real(T::one()));
            }
        }
    }
    if !samples.is_empty() {
        stats.scale(T::one() / T::from_count(samples.len()));
    }
    stats
}

/// `min_P β⁻²(tr(PᴴXP) + c) − 2β⁻¹ Re tr(BᴴP)` subject to `‖P‖_F² ≤ P_dl`,
/// jointly over `P` and the common receive scaling `β > 0`.
///
/// Both precoder subproblems reduce to this form: for AWAMSE
/// `X = Z + ĤG*UGĤᴴ`, `B = ĤG*U`, `c = tr(UGG*)`; for SIWMMSE
/// `X = Σ_k Ψ̄_k`, `B = F̄`, `c = Σ_k t̄_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledQuadratic<T: Real> {
    pub gram: CMatrix<T>,
    pub cross: CMatrix<T>,
    pub noise_weight: T,
}

/// Output of the bisection solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution<T: Real> {
    pub precoder: Precoder<T>,
    /// Lagrange multiplier of the power constraint (zero when inactive).
    pub multiplier: T,
    /// Common scaling `β` (one for the fixed-scaling problem).
    pub beta: T,
}

impl<T: Real> ScaledQuadratic<T> {
    pub fn from_awamse(est: &EstimationResult<T>, filters: &[Complex<T>], weights: &[T]) -> Self {
        let (gram, cross) = weighted_system(est, filters, weights);
        let noise_weight = weights.iter().zip(filters).fold(T::zero(), |a, (&u, g)| a + u * g.norm_sqr());
        Self { gram, cross, noise_weight }
    }

    pub fn from_stats(stats: &SampleStats<T>) -> Self {
        let m = stats.f_bar.nrows();
        let gram = stats.psi_bar.iter().fold(CMatrix::zeros(m, m), |acc, p| acc + p);
        let noise_weight = stats.t_bar.iter().fold(T::zero(), |a, &t| a + t);
        Self { gram, cross: stats.f_bar.clone(), noise_weight }
    }

    /// Unscaled closed-form minimizer `(X + (c / P_dl) I)⁻¹ B`.
    pub fn closed_form(&self, power: T) -> Result<Precoder<T>> {
        if !(self.noise_weight > T::zero()) {
            return Err(Error::Degenerate("regularizer vanishes: all receive filters are zero"));
        }
        let mut system = self.gram.clone();
        let delta = self.noise_weight / power;
        for i in 0..system.nrows() {
            system[(i, i)] += real(delta);
        }
        Ok(Precoder::new(hermitian_solve(&system, &self.cross, "stochastic precoder system")?))
    }

    /// `tr(PᴴXP) − 2Re tr(BᴴP)` for the fixed-scaling problem.
    fn quadratic(&self, p: &CMatrix<T>) -> T {
        let xp = &self.gram * p;
        let quad = (p.adjoint() * xp).trace().re;
        let lin = (self.cross.adjoint() * p).trace().re;
        quad - T::lit(2.0) * lin
    }

    /// Objective value at `(P, β)`.
    pub fn objective(&self, p: &Precoder<T>, beta: T) -> T {
        let q = p.matrix().map(|z| z.unscale(beta));
        self.quadratic(&q) + self.noise_weight / (beta * beta)
    }

    /// Solves the joint problem numerically: an outer golden-section search
    /// over `s = β⁻²` (the partial minimum is convex in `s`) around an inner
    /// Lagrangian bisection for the power-constrained problem at fixed `β`.
    pub fn solve_by_bisection(&self, power: T, tol: T) -> Result<ConstrainedSolution<T>> {
        if !(self.noise_weight > T::zero()) {
            return Err(Error::Degenerate("regularizer vanishes: all receive filters are zero"));
        }
        // J(ln s) = min_Q { tr(QᴴXQ) − 2Re tr(BᴴQ) : ‖Q‖² ≤ P_dl s } + c s
        let eval = |x: T| -> Result<(T, ConstrainedSolution<T>)> {
            let s = x.exp();
            let inner = constrained_precoder_bisection(&self.gram, &self.cross, power * s, tol)?;
            let value = self.quadratic(inner.precoder.matrix()) + self.noise_weight * s;
            Ok((value, inner))
        };

        // bracket a minimum by walking downhill with growing steps
        let (mut a, mut b) = (T::zero(), T::one());
        let (mut fa, mut fb) = (eval(a)?.0, eval(b)?.0);
        if fb > fa {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        let mut step = b - a;
        let mut c = b + step;
        let mut fc = eval(c)?.0;
        let mut guard = 0;
        while fc < fb {
            guard += 1;
            if guard > 200 {
                return Err(Error::Degenerate("could not bracket the optimal scaling"));
            }
            a = b;
            b = c;
            fb = fc;
            step *= T::lit(2.0);
            c = b + step;
            fc = eval(c)?.0;
        }
        let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };

        let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = eval(x1)?.0;
        let mut f2 = eval(x2)?.0;
        for _ in 0..300 {
            if hi - lo <= T::lit(1e-13) * (T::one() + lo.abs().max(hi.abs())) {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = eval(x1)?.0;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = eval(x2)?.0;
            }
        }
        let x = (lo + hi) * T::lit(0.5);
        let (_, inner) = eval(x)?;
        let beta = (-x * T::lit(0.5)).exp();
        Ok(ConstrainedSolution { precoder: inner.precoder.scaled(beta), multiplier: inner.multiplier / (beta * beta), beta })
    }
}

/// `min_P tr(PᴴXP) − 2Re tr(BᴴP)` subject to `‖P‖_F² ≤ budget` via bisection
/// on the multiplier `λ` of `P(λ) = (X + λI)⁻¹B`. Returns `λ = 0` when the
/// unconstrained minimizer is already feasible.
pub fn constrained_precoder_bisection<T: Real>(gram: &CMatrix<T>, cross: &CMatrix<T>, budget: T, tol: T) -> Result<ConstrainedSolution<T>> {
    let m = gram.nrows();
    let solve = |lambda: T| -> Option<CMatrix<T>> {
        let mut a = gram.clone();
        for i in 0..m {
            a[(i, i)] += real(lambda);
        }
        nalgebra::Cholesky::new(crate::linalg::hermitian_part(&a)).map(|c| c.solve(cross))
    };
    let done = |p: CMatrix<T>, lambda: T| ConstrainedSolution { precoder: Precoder::new(p), multiplier: lambda, beta: T::one() };
    if frobenius_sq(cross) == T::zero() {
        return Ok(done(CMatrix::zeros(m, cross.ncols()), T::zero()));
    }
    if let Some(p) = solve(T::zero()) {
        if frobenius_sq(&p) <= budget {
            return Ok(done(p, T::zero()));
        }
    }
    let mut hi = (trace_re(gram) / T::from_count(m)).max(T::lit(1e-12));
    let mut p_hi = loop {
        match solve(hi) {
            Some(p) if frobenius_sq(&p) <= budget => break p,
            _ => {
                hi *= T::lit(2.0);
                if hi > T::lit(MULTIPLIER_MAX) {
                    return Err(Error::Bracket(MULTIPLIER_MAX));
                }
            }
        }
    };
    let mut lo = T::zero();
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        match solve(mid) {
            Some(p) if frobenius_sq(&p) <= budget => {
                hi = mid;
                let gap = budget - frobenius_sq(&p);
                p_hi = p;
                if gap <= tol * budget {
                    break;
                }
            }
            _ => lo = mid,
        }
    }
    Ok(done(p_hi, hi))
}

/// Closed-form SIWMMSE precoder (unscaled).
pub fn update_precoder_siwmmse<T: Real>(stats: &SampleStats<T>, config: &SystemConfig<T>) -> Result<Precoder<T>> {
    ScaledQuadratic::from_stats(stats).closed_form(config.power)
}

/// Power-feasible precoder of the constrained SIWMMSE subproblem found by
/// Lagrangian bisection (with the common scaling optimized alongside).
pub fn bisection_precoder_oracle<T: Real>(stats: &SampleStats<T>, config: &SystemConfig<T>, tol: T) -> Result<ConstrainedSolution<T>> {
    ScaledQuadratic::from_stats(stats).solve_by_bisection(config.power, tol)
}

enum SampleSource<'a, T: Real> {
    Frozen(&'a [ChannelRealization<T>]),
    Fresh { est: &'a EstimationResult<T>, sampler: ChannelSampler<T>, count: usize, seed: u64 },
}

impl<T: Real> SampleSource<'_, T> {
    fn stats(&self, iteration: usize, p: &Precoder<T>) -> SampleStats<T> {
        match self {
            SampleSource::Frozen(samples) => average_statistics(samples, p),
            SampleSource::Fresh { est, sampler, count, seed } => {
                let mut rng = seeded_rng(derive_seed(*seed, Stream::ErrorSamples, &[iteration as u64]));
                let draws: Vec<_> = (0..*count).map(|_| sampler.sample_around(&est.estimates, &mut rng)).collect();
                average_statistics(&draws, p)
            }
        }
    }
}

fn run_siwmmse<T: Real>(source: SampleSource<'_, T>, config: &SystemConfig<T>, init: &Precoder<T>, opts: &SiwmmseOptions<T>) -> Result<SolverReport<T>> {
    if opts.max_iters == 0 || !(opts.rel_tol > T::zero()) {
        return Err(Error::InvalidParameter("max_iters must be at least 1 and rel_tol positive".into()));
    }
    let start = Instant::now();
    let k = init.users();
    let mut degenerate = false;
    let mut trace = Vec::new();

    let (mut current, init_beta) = match beta_scale(init, config) {
        Ok(s) => s,
        Err(Error::Degenerate(_)) => {
            let state = SolverState::new(vec![Complex::new(T::zero(), T::zero()); k], vec![T::one(); k]);
            return Ok(SolverReport { precoder: init.clone(), iterations: 0, bound_trace: trace, runtime: start.elapsed(), state, degenerate: true });
        }
        Err(e) => return Err(e),
    };
    let mut stats = source.stats(0, &current);
    let mut previous = stats.average_sum_rate();
    let (mut best, mut best_rate, mut best_beta) = (current.clone(), previous, init_beta);
    if opts.record_trace {
        trace.push(previous);
    }
    let mut iterations = 0;
    let mut last_stats = stats.clone();

    for it in 1..=opts.max_iters {
        let next = match update_precoder_siwmmse(&stats, config) {
            Ok(p) => p,
            Err(Error::Degenerate(_)) | Err(Error::Singular(_)) => {
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
        last_stats = stats;
        stats = source.stats(it, &scaled);
        let rate = stats.average_sum_rate();
        if opts.record_trace {
            trace.push(rate);
        }
        if rate >= best_rate {
            best_rate = rate;
            best = scaled.clone();
            best_beta = beta;
        }
        current = scaled;
        if converged(rate, previous, opts.rel_tol) {
            break;
        }
        previous = rate;
    }
    let _ = current;

    let noise_weight = last_stats.t_bar.iter().fold(T::zero(), |a, &t| a + t);
    let state = SolverState {
        filters: last_stats.g_bar,
        weights: last_stats.u_bar,
        delta: noise_weight / config.power,
        beta: best_beta,
        objective_trace: Vec::new(),
    };
    Ok(SolverReport { precoder: best, iterations, bound_trace: trace, runtime: start.elapsed(), state, degenerate })
}

/// SIWMMSE on samples drawn around the LMMSE estimate.
pub fn solve_siwmmse<T: Real>(est: &EstimationResult<T>, config: &SystemConfig<T>, init: &Precoder<T>, opts: &SiwmmseOptions<T>) -> Result<SolverReport<T>> {
    if opts.samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    if opts.redraw_samples {
        let source = SampleSource::Fresh { est, sampler: error_sampler(est), count: opts.samples, seed: opts.seed };
        return run_siwmmse(source, config, init, opts);
    }
    let samples = draw_error_samples(est, opts.samples, opts.seed);
    run_siwmmse(SampleSource::Frozen(&samples), config, init, opts)
}

/// SIWMMSE on a caller-supplied, fixed sample set (`opts.samples` and `opts.seed` are ignored).
pub fn solve_siwmmse_on_samples<T: Real>(
    samples: &[ChannelRealization<T>],
    config: &SystemConfig<T>,
    init: &Precoder<T>,
    opts: &SiwmmseOptions<T>,
) -> Result<SolverReport<T>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("sample set is empty".into()));
    }
    run_siwmmse(SampleSource::Frozen(samples), config, init, opts)
}

/// Standard IWMMSE that trusts `assumed` as the true channel.
pub fn solve_iwmmse_naive<T: Real>(
    assumed: &ChannelRealization<T>,
    config: &SystemConfig<T>,
    init: &Precoder<T>,
    opts: &AwamseOptions<T>,
) -> Result<SolverReport<T>> {
    solve_awamse(&EstimationResult::perfect(&assumed.h), config, init, opts)
}
