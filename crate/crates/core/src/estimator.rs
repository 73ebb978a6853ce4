//! Dissipation-rate estimation from a simulated homodyne record.
//!
//! A trajectory of the damped mode is unravelled with diffusive homodyne
//! detection of the decay channel (efficiency `η`), producing increments
//! `dy = √(ηγ)⟨a + a†⟩dt + dW`. Each candidate rate `γᵢ` runs its own filter on
//! the same record; Gaussian innovation likelihoods give the posterior
//! `Pᵢ(t)` and the estimate `γ̂(t) = Σ γᵢPᵢ(t)`.
//!
//! Time here is physical. The control Hamiltonian `γ₀(u₁n + u₂n²)` uses the
//! nominal `config.gamma`, so only the dissipator depends on the rate under
//! test.
//!
//! States are advanced with the first-order Kraus form of the Itô step,
//! `ρ ← (MρM† + (1−η)γ·dt·aρa†)/tr` with `M = 1 − (iH + ½γn)dt + √(ηγ)·a·dy`,
//! which agrees with Euler–Maruyama to `O(dt)` but keeps `ρ` positive.
//! For `η = 1` a pure state stays pure and `ψ ← Mψ/‖Mψ‖` is used instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    coherent_state, control_spectrum, hermitian_eigendecomposition, ComplexMatrix, SystemConfig,
    C64,
};

/// Largest `γ·dt` accepted by [`simulate_trajectory`].
pub const MAX_GAMMA_DT: f64 = 1e-3;
/// State invariants are checked once per this many steps.
pub const CHECK_INTERVAL: usize = 100;
/// Lowest eigenvalue tolerated in a trajectory state.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    rates: Vec<f64>,
    prior: Vec<f64>,
}

impl CandidateSet {
    pub fn new(rates: Vec<f64>, prior: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::DegenerateCandidates("empty candidate list".into()));
        }
        if rates.len() != prior.len() {
            return Err(Error::DegenerateCandidates(format!(
                "{} rates but {} prior weights",
                rates.len(),
                prior.len()
            )));
        }
        if let Some(&bad) = rates.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "rate",
                value: bad,
                reason: "candidate rates must be positive",
            });
        }
        if let Some(&bad) = prior.iter().find(|&&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "prior",
                value: bad,
                reason: "weights must be non-negative",
            });
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "prior",
                value: total,
                reason: "weights must sum to 1",
            });
        }
        Ok(Self { rates, prior })
    }

    pub fn uniform(rates: Vec<f64>) -> Result<Self> {
        let n = rates.len().max(1);
        Self::new(rates, vec![1.0 / n as f64; n])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub efficiency: f64,
}

impl MeasurementRecord {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub candidates: CandidateSet,
    pub dt: f64,
    /// Row `k` holds `Pᵢ(k·dt)`; row 0 is the prior.
    pub weights_over_time: Vec<Vec<f64>>,
    pub estimate_over_time: Vec<f64>,
    /// Log-likelihood of the record under a filter at the mean candidate rate.
    pub reference_log_likelihood: f64,
}

impl PosteriorState {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.estimate_over_time.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn final_weights(&self) -> &[f64] {
        self.weights_over_time
            .last()
            .expect("prior row always present")
    }
}

/// Random stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n` rates uniform on `[center − spread, center + spread]`, redrawing any
/// non-positive value; uniform prior.
pub fn generate_candidates(center: f64, spread: f64, n: usize, seed: u64) -> Result<CandidateSet> {
    if !(center > 0.0 && center.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "center",
            value: center,
            reason: "must be positive",
        });
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "spread",
            value: spread,
            reason: "must be non-negative",
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "need at least one candidate",
        });
    }
    if spread == 0.0 {
        return CandidateSet::uniform(vec![center; n]);
    }
    let dist = Uniform::new_inclusive(center - spread, center + spread)
        .map_err(|e| Error::DegenerateCandidates(e.to_string()))?;
    let mut rng = stream_rng(seed, 0);
    let mut rates = Vec::with_capacity(n);
    for _ in 0..n {
        let draw = (0..MAX_REDRAWS)
            .map(|_| dist.sample(&mut rng))
            .find(|&g| g > 0.0);
        match draw {
            Some(g) => rates.push(g),
            None => {
                return Err(Error::DegenerateCandidates(format!(
                    "no positive rate in {MAX_REDRAWS} draws from [{}, {}]",
                    center - spread,
                    center + spread
                )))
            }
        }
    }
    CandidateSet::uniform(rates)
}

/// Conditional state of the mode.
#[derive(Debug, Clone)]
enum FilterState {
    Pure(Vec<C64>),
    Mixed(ComplexMatrix),
}

/// Fixed data of one propagation: Hamiltonian spectrum, rate and efficiency.
struct Channel<'a> {
    spectrum: &'a [f64],
    gamma: f64,
    efficiency: f64,
    dt: f64,
}

impl Channel<'_> {
    fn measurement_rate(&self) -> f64 {
        (self.efficiency * self.gamma).sqrt()
    }

    /// `M_pp = 1 − (i·h_p + ½γp)dt`.
    fn diagonal(&self, p: usize) -> C64 {
        C64::new(
            1.0 - 0.5 * self.gamma * p as f64 * self.dt,
            -self.spectrum[p] * self.dt,
        )
    }
}

impl FilterState {
    fn initial(config: &SystemConfig, pure: bool) -> Result<Self> {
        let (psi, _) = coherent_state(config.alpha, config.dim)?;
        let psi = psi.normalized()?;
        Ok(if pure {
            Self::Pure(psi.amplitudes().to_vec())
        } else {
            Self::Mixed(psi.projector())
        })
    }

    /// `⟨a + a†⟩`.
    fn quadrature(&self) -> f64 {
        match self {
            Self::Pure(psi) => {
                let mut s = C64::new(0.0, 0.0);
                for p in 0..psi.len() - 1 {
                    s += psi[p].conj() * ((p + 1) as f64).sqrt() * psi[p + 1];
                }
                2.0 * s.re
            }
            Self::Mixed(rho) => {
                let n = rho.dim();
                let r = rho.as_slice();
                (0..n - 1)
                    .map(|p| 2.0 * ((p + 1) as f64).sqrt() * r[(p + 1) * n + p].re)
                    .sum()
            }
        }
    }

    fn step(&mut self, ch: &Channel, dy: f64, step: usize) -> Result<()> {
        let c = ch.measurement_rate() * dy;
        match self {
            Self::Pure(psi) => {
                let n = psi.len();
                let mut norm = 0.0;
                for p in 0..n {
                    let mut v = ch.diagonal(p) * psi[p];
                    if p + 1 < n {
                        v += c * ((p + 1) as f64).sqrt() * psi[p + 1];
                    }
                    psi[p] = v;
                    norm += v.norm_sqr();
                }
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: format!("state norm {norm}"),
                    });
                }
                let inv = 1.0 / norm.sqrt();
                psi.iter_mut().for_each(|z| *z *= inv);
            }
            Self::Mixed(rho) => {
                let n = rho.dim();
                let r = rho.as_slice();
                let jump = (1.0 - ch.efficiency) * ch.gamma * ch.dt;
                let diag: Vec<C64> = (0..n).map(|p| ch.diagonal(p)).collect();
                let sq: Vec<f64> = (0..=n).map(|p| (p as f64).sqrt()).collect();
                // X = Mρ
                let mut x = vec![C64::new(0.0, 0.0); n * n];
                for p in 0..n {
                    for q in 0..n {
                        let mut v = diag[p] * r[p * n + q];
                        if p + 1 < n {
                            v += c * sq[p + 1] * r[(p + 1) * n + q];
                        }
                        x[p * n + q] = v;
                    }
                }
                // XM† + jump·aρa†
                let mut out = ComplexMatrix::zeros(n)?;
                let mut trace = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        let mut v = x[p * n + q] * diag[q].conj();
                        if q + 1 < n {
                            v += x[p * n + q + 1] * c * sq[q + 1];
                        }
                        if p + 1 < n && q + 1 < n {
                            v += jump * sq[p + 1] * sq[q + 1] * r[(p + 1) * n + q + 1];
                        }
                        out[(p, q)] = v;
                    }
                    trace += out[(p, p)].re;
                }
                if !(trace > 0.0 && trace.is_finite()) {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: format!("trace {trace}"),
                    });
                }
                *rho = &out.hermitian_part() * (1.0 / trace);
            }
        }
        Ok(())
    }

    fn check(&self, step: usize) -> Result<()> {
        match self {
            Self::Pure(psi) => {
                let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
                if !((norm - 1.0).abs() <= POSITIVITY_TOLERANCE) {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: format!("norm drifted to {norm}"),
                    });
                }
            }
            Self::Mixed(rho) => {
                let trace = rho.trace();
                if !((trace.re - 1.0).abs() <= POSITIVITY_TOLERANCE
                    && trace.im.abs() <= POSITIVITY_TOLERANCE)
                {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: format!("trace drifted to {trace}"),
                    });
                }
                let eig =
                    hermitian_eigendecomposition(rho).map_err(|e| Error::IntegrationFailure {
                        step,
                        reason: e.to_string(),
                    })?;
                if eig.values[0] < -POSITIVITY_TOLERANCE {
                    return Err(Error::IntegrationFailure {
                        step,
                        reason: format!("eigenvalue {} below tolerance", eig.values[0]),
                    });
                }
            }
        }
        Ok(())
    }

    fn density(&self) -> ComplexMatrix {
        match self {
            Self::Pure(psi) => {
                ComplexMatrix::from_fn(psi.len(), |p, q| psi[p] * psi[q].conj()).expect("dim ≥ 2")
            }
            Self::Mixed(rho) => rho.clone(),
        }
    }
}

fn physical_spectrum(config: &SystemConfig) -> Vec<f64> {
    control_spectrum(config.u1, config.u2, config.dim)
        .into_iter()
        .map(|h| config.gamma * h)
        .collect()
}

fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must be positive",
        });
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "duration",
            value: duration,
            reason: "must be positive",
        });
    }
    let steps = (duration / dt).round();
    if (steps * dt - duration).abs() > 1e-9 * duration || steps < 1.0 {
        return Err(Error::InvalidParameter {
            name: "duration",
            value: duration,
            reason: "must be a whole number of steps",
        });
    }
    Ok(steps as usize)
}

/// Trajectory outputs: the record and, if requested, `ρ` at every
/// `keep_every`-th step (including step 0).
pub struct Trajectory {
    pub record: MeasurementRecord,
    pub states: Vec<ComplexMatrix>,
}

/// Homodyne record of one trajectory with true rate `gamma_true`.
pub fn simulate_trajectory(
    gamma_true: f64,
    config: &SystemConfig,
    duration: f64,
    dt: f64,
    efficiency: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    Ok(run_trajectory(
        gamma_true, config, duration, dt, efficiency, seed, None, false,
    )?
    .record)
}

/// As [`simulate_trajectory`], also returning the conditional state every
/// `keep_every` steps.
pub fn simulate_trajectory_states(
    gamma_true: f64,
    config: &SystemConfig,
    duration: f64,
    dt: f64,
    efficiency: f64,
    seed: u64,
    keep_every: usize,
) -> Result<Trajectory> {
    run_trajectory(
        gamma_true,
        config,
        duration,
        dt,
        efficiency,
        seed,
        Some(keep_every.max(1)),
        false,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_trajectory(
    gamma_true: f64,
    config: &SystemConfig,
    duration: f64,
    dt: f64,
    efficiency: f64,
    seed: u64,
    keep_every: Option<usize>,
    force_mixed: bool,
) -> Result<Trajectory> {
    config.validate()?;
    if !(gamma_true > 0.0 && gamma_true.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "gamma_true",
            value: gamma_true,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::InvalidParameter {
            name: "efficiency",
            value: efficiency,
            reason: "must lie in [0, 1]",
        });
    }
    let steps = step_count(duration, dt)?;
    if gamma_true * dt > MAX_GAMMA_DT * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must not exceed 1e-3/γ",
        });
    }

    let spectrum = physical_spectrum(config);
    let ch = Channel {
        spectrum: &spectrum,
        gamma: gamma_true,
        efficiency,
        dt,
    };
    let mut state = FilterState::initial(config, efficiency == 1.0 && !force_mixed)?;
    let mut rng = stream_rng(seed, 0);
    let sd = dt.sqrt();
    let mut samples = Vec::with_capacity(steps);
    let mut states = Vec::new();
    if keep_every.is_some() {
        states.push(state.density());
    }
    for k in 0..steps {
        let dw: f64 = StandardNormal.sample(&mut rng);
        let dy = ch.measurement_rate() * state.quadrature() * dt + sd * dw;
        samples.push(dy);
        state.step(&ch, dy, k + 1)?;
        if (k + 1) % CHECK_INTERVAL == 0 {
            state.check(k + 1)?;
        }
        if let Some(every) = keep_every {
            if (k + 1) % every == 0 {
                states.push(state.density());
            }
        }
    }
    Ok(Trajectory {
        record: MeasurementRecord {
            dt,
            samples,
            seed,
            efficiency,
        },
        states,
    })
}

/// Per-step log-likelihood increments of `record` for a filter at `gamma`.
fn filter_log_likelihoods(
    record: &MeasurementRecord,
    gamma: f64,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    let spectrum = physical_spectrum(config);
    let ch = Channel {
        spectrum: &spectrum,
        gamma,
        efficiency: record.efficiency,
        dt: record.dt,
    };
    let mut state = FilterState::initial(config, record.efficiency == 1.0)?;
    let dt = record.dt;
    let mut out = Vec::with_capacity(record.samples.len());
    for (k, &dy) in record.samples.iter().enumerate() {
        let innovation = dy - ch.measurement_rate() * state.quadrature() * dt;
        out.push(-innovation * innovation / (2.0 * dt));
        state.step(&ch, dy, k + 1)?;
    }
    Ok(out)
}

/// Bayesian weights of every candidate over the record, normalised in log
/// space at each step.
pub fn update_posteriors(
    record: &MeasurementRecord,
    candidates: &CandidateSet,
    config: &SystemConfig,
) -> Result<PosteriorState> {
    config.validate()?;
    if !(record.dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: record.dt,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&record.efficiency) {
        return Err(Error::InvalidParameter {
            name: "efficiency",
            value: record.efficiency,
            reason: "must lie in [0, 1]",
        });
    }
    let mut rates = candidates.rates().to_vec();
    rates.push(candidates.mean_rate());
    let mut increments = rates
        .par_iter()
        .map(|&g| filter_log_likelihoods(record, g, config))
        .collect::<Result<Vec<_>>>()?;
    let reference_log_likelihood = increments.pop().expect("reference filter").iter().sum();

    let n = candidates.len();
    let mut log_w: Vec<f64> = candidates.prior().iter().map(|w| w.ln()).collect();
    let estimate = |w: &[f64]| {
        let g: f64 = w.iter().zip(candidates.rates()).map(|(w, g)| w * g).sum();
        let (lo, hi) = candidates
            .rates()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| {
                (a.min(g), b.max(g))
            });
        g.clamp(lo, hi)
    };
    let mut weights_over_time = Vec::with_capacity(record.samples.len() + 1);
    let mut estimate_over_time = Vec::with_capacity(record.samples.len() + 1);
    weights_over_time.push(candidates.prior().to_vec());
    estimate_over_time.push(estimate(candidates.prior()));

    for k in 0..record.samples.len() {
        for (lw, inc) in log_w.iter_mut().zip(&increments) {
            *lw += inc[k];
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::RenormalizationFailure { step: k + 1 });
        }
        let total: f64 = log_w.iter().map(|lw| (lw - max).exp()).sum();
        let log_norm = max + total.ln();
        let mut w = Vec::with_capacity(n);
        for lw in log_w.iter_mut() {
            *lw -= log_norm;
            w.push(lw.exp());
        }
        // exp of centred logs can still miss 1 by a few ulps per candidate.
        let s: f64 = w.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::RenormalizationFailure { step: k + 1 });
        }
        w.iter_mut().for_each(|x| *x /= s);
        estimate_over_time.push(estimate(&w));
        weights_over_time.push(w);
    }

    Ok(PosteriorState {
        candidates: candidates.clone(),
        dt: record.dt,
        weights_over_time,
        estimate_over_time,
        reference_log_likelihood,
    })
}

/// Final-time `γ̂ = Σ γᵢPᵢ`.
pub fn estimate_gamma(posterior: &PosteriorState) -> f64 {
    *posterior
        .estimate_over_time
        .last()
        .expect("prior row always present")
}
