//! Time evolution of the controlled damped mode.
//!
//! Everything here is in rescaled time `τ = γt` with the rescaled controls
//! `u₁`, `u₂`; the generator is
//!
//! ```text
//! dρ/dτ = −i[u₁a†a + u₂(a†a)², ρ] + aρa† − ½a†aρ − ½ρa†a
//! ```
//!
//! Two independent routes produce `ρ(τ)` from `|α⟩⟨α|`: the closed-form
//! matrix elements ([`evolve_analytic`]) and a fixed-step RK4 integration of
//! the generator ([`evolve_ode`]). They are used as each other's oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    coherent_state, control_spectrum, ln_factorial, poisson_tail, ComplexMatrix, DensityMatrix,
    StateVector, SystemConfig, C64,
};

/// Default RK4 step in units of τ.
pub const DEFAULT_ODE_STEP: f64 = 1e-4;
/// Largest accepted RK4 step.
pub const MAX_ODE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMethod {
    Analytic,
    Ode,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub tau: f64,
    pub state: DensityMatrix,
    pub method: EvolutionMethod,
    /// `|Tr ρ − 1|` before any renormalisation.
    pub trace_drift: f64,
}

/// `ρ_{p,q}(τ)` from the closed form
///
/// ```text
/// λ·exp{−½Δτ(p+q)}·exp{−iu₁τ(p−q) − |α|²(1 − (1 − e^{−Δτ})/Δ)}
/// λ = αᵖᾱ^q/√(p!q!),   Δ = 1 + 2iu₂(p − q)
/// ```
///
/// `λ` is folded into the exponent so large `p`, `q` cannot overflow.
pub fn rho_element_analytic(p: usize, q: usize, tau: f64, config: &SystemConfig) -> Result<C64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "must be non-negative",
        });
    }
    let alpha = config.alpha;
    let n2 = alpha.norm_sqr();
    let (pf, qf) = (p as f64, q as f64);

    let ln_lambda = if n2 == 0.0 {
        if p == 0 && q == 0 {
            C64::new(0.0, 0.0)
        } else {
            return Ok(C64::new(0.0, 0.0));
        }
    } else {
        let ln_mod = 0.5 * n2.ln() * (pf + qf) - 0.5 * (ln_factorial(p) + ln_factorial(q));
        C64::new(ln_mod, alpha.arg() * (pf - qf))
    };

    let delta = C64::new(1.0, 2.0 * config.u2 * (pf - qf));
    let decay = if tau == 0.0 {
        // (1 − e^{−Δτ})/Δ → 0
        C64::new(0.0, 0.0)
    } else {
        (C64::new(1.0, 0.0) - (-delta * tau).exp()) / delta
    };
    let exponent = ln_lambda
        - 0.5 * delta * tau * (pf + qf)
        - C64::new(0.0, config.u1 * tau * (pf - qf))
        - n2 * (C64::new(1.0, 0.0) - decay);
    let value = exponent.exp();
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::NonFinite("analytic matrix element"));
    }
    Ok(value)
}

/// Assemble `ρ(τ)` over the truncated basis from [`rho_element_analytic`].
pub fn evolve_analytic(config: &SystemConfig, tau: f64) -> Result<EvolutionResult> {
    evolve_analytic_with(config, tau, false)
}

/// As [`evolve_analytic`], optionally rescaling to unit trace.
pub fn evolve_analytic_with(
    config: &SystemConfig,
    tau: f64,
    renormalize: bool,
) -> Result<EvolutionResult> {
    let matrix = analytic_matrix(config, tau)?;
    finish(config, tau, matrix, EvolutionMethod::Analytic, renormalize)
}

/// Raw matrix, without the density-matrix checks.
pub(crate) fn analytic_matrix(config: &SystemConfig, tau: f64) -> Result<ComplexMatrix> {
    config.validate()?;
    let n = config.dim;
    let mut m = ComplexMatrix::zeros(n)?;
    for p in 0..n {
        for q in p..n {
            let z = rho_element_analytic(p, q, tau, config)?;
            m[(p, q)] = z;
            m[(q, p)] = z.conj();
        }
    }
    // The diagonal is real by construction; drop the rounding residue.
    for k in 0..n {
        m[(k, k)].im = 0.0;
    }
    Ok(m)
}

fn finish(
    config: &SystemConfig,
    tau: f64,
    matrix: ComplexMatrix,
    method: EvolutionMethod,
    renormalize: bool,
) -> Result<EvolutionResult> {
    // Photon numbers only move down, so what the closed form drops at τ is the
    // Poisson tail of the decayed amplitude. The truncated generator conserves
    // the trace instead, so the integrated state keeps the initial tail.
    let mean = match method {
        EvolutionMethod::Analytic => config.mean_photons() * (-tau).exp(),
        EvolutionMethod::Ode => config.mean_photons(),
    };
    let tail = poisson_tail(mean, config.dim);
    let trace = matrix.trace().re;
    let trace_drift = (trace - 1.0).abs();
    let state = DensityMatrix::new(matrix, tail)
        .map_err(|e| Error::CorruptState(format!("{method:?} state at tau = {tau}: {e}")))?;
    let state = if renormalize {
        state.renormalized()?
    } else {
        state
    };
    Ok(EvolutionResult {
        tau,
        state,
        method,
        trace_drift,
    })
}

/// Right-hand side of the rescaled master equation, using the band
/// structure of `a` and the diagonal Hamiltonian.
pub(crate) fn lindblad_rhs(rho: &ComplexMatrix, spectrum: &[f64], out: &mut ComplexMatrix) {
    let n = rho.dim();
    let r = rho.as_slice();
    for p in 0..n {
        for q in 0..n {
            let z = r[p * n + q];
            let mut d = C64::new(0.0, -(spectrum[p] - spectrum[q])) * z - 0.5 * (p + q) as f64 * z;
            if p + 1 < n && q + 1 < n {
                d += (((p + 1) * (q + 1)) as f64).sqrt() * r[(p + 1) * n + q + 1];
            }
            out[(p, q)] = d;
        }
    }
}

/// Fixed-step RK4 integration of the rescaled master equation from `|α⟩⟨α|`.
pub fn evolve_ode(config: &SystemConfig, tau: f64, dt: f64) -> Result<EvolutionResult> {
    let mut out = evolve_ode_path(config, &[tau], dt)?;
    Ok(out.pop().expect("one requested time"))
}

/// RK4 integration sampled at each of `taus` (ascending), in one pass.
pub fn evolve_ode_path(
    config: &SystemConfig,
    taus: &[f64],
    dt: f64,
) -> Result<Vec<EvolutionResult>> {
    config.validate()?;
    if !(dt > 0.0 && dt <= MAX_ODE_STEP) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must lie in (0, 1e-3]",
        });
    }
    if taus.iter().any(|t| !(*t >= 0.0)) || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: taus.first().copied().unwrap_or(f64::NAN),
            reason: "times must be non-negative and ascending",
        });
    }
    let n = config.dim;
    let spectrum = control_spectrum(config.u1, config.u2, n);
    let (psi0, _) = coherent_state(config.alpha, n)?;
    let mut rho = psi0.projector();
    let mut k1 = ComplexMatrix::zeros(n)?;
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut stage = k1.clone();

    let mut now = 0.0;
    let mut results = Vec::with_capacity(taus.len());
    for &target in taus {
        let span = target - now;
        let steps = (span / dt).ceil() as usize;
        let h = if steps == 0 { 0.0 } else { span / steps as f64 };
        for step in 0..steps {
            lindblad_rhs(&rho, &spectrum, &mut k1);
            axpy_into(&rho, &k1, 0.5 * h, &mut stage);
            lindblad_rhs(&stage, &spectrum, &mut k2);
            axpy_into(&rho, &k2, 0.5 * h, &mut stage);
            lindblad_rhs(&stage, &spectrum, &mut k3);
            axpy_into(&rho, &k3, h, &mut stage);
            lindblad_rhs(&stage, &spectrum, &mut k4);
            let (a, b, c, d) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
            let mut next = rho.clone();
            for (i, z) in (0..n * n).zip(rho.as_slice()) {
                next[(i / n, i % n)] = z + (h / 6.0) * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
            }
            rho = next;
            if !rho.is_finite() {
                return Err(Error::StepSize {
                    tau: now + (step + 1) as f64 * h,
                });
            }
        }
        now = target;
        let hermitized = rho.hermitian_part();
        results.push(finish(
            config,
            target,
            hermitized,
            EvolutionMethod::Ode,
            false,
        )?);
    }
    Ok(results)
}

fn axpy_into(x: &ComplexMatrix, k: &ComplexMatrix, h: f64, out: &mut ComplexMatrix) {
    let n = x.dim();
    for (i, (a, b)) in x.as_slice().iter().zip(k.as_slice()).enumerate() {
        out[(i / n, i % n)] = a + h * b;
    }
}

/// Two-level pure-state approximation of the evolved state, kept exactly as
/// the small-τ expansion produces it (not normalised).
#[derive(Debug, Clone)]
pub struct ApproxPureState {
    pub tau: f64,
    pub vector: StateVector,
    /// `exp{−½|α|²e^{−τ}}`, the common factor of both amplitudes.
    pub prefactor: f64,
}

impl ApproxPureState {
    pub fn normalized(&self) -> Result<StateVector> {
        self.vector.normalized()
    }
}

/// `exp{−½|α|²e^{−τ}}·(1, α·exp{−½τ − i(u₁+u₂)τ − iu₂τ²|α|²})`.
///
/// Meant for `u₁, u₂ ≪ 1` and small τ; nothing enforces that.
pub fn pure_state_approx(tau: f64, config: &SystemConfig) -> ApproxPureState {
    let n2 = config.mean_photons();
    let prefactor = (-0.5 * n2 * (-tau).exp()).exp();
    let phase = approx_exponent(tau, config);
    let amps = vec![
        C64::new(prefactor, 0.0),
        prefactor * config.alpha * phase.exp(),
    ];
    ApproxPureState {
        tau,
        vector: StateVector::new(amps).expect("two levels"),
        prefactor,
    }
}

/// `N = −½τ − i(u₁+u₂)τ − iu₂|α|²τ²`.
fn approx_exponent(tau: f64, config: &SystemConfig) -> C64 {
    let n2 = config.mean_photons();
    C64::new(
        -0.5 * tau,
        -(config.u1 + config.u2) * tau - config.u2 * n2 * tau * tau,
    )
}

/// `∂/∂γ` of [`pure_state_approx`] at fixed `(t, u₁, u₂)`, where `τ = γt`:
///
/// ```text
/// t·e^{−½|α|²e^{−τ}}·( ½|α|²e^{−τ},  α(½|α|²e^{−τ} − ½ − i(u₁+u₂) − 2iu₂|α|²τ)·e^N )
/// ```
pub fn pure_state_gamma_derivative(t: f64, config: &SystemConfig) -> StateVector {
    let tau = config.gamma * t;
    let n2 = config.mean_photons();
    let c = 0.5 * n2 * (-tau).exp();
    let prefactor = (-c).exp();
    let slope = C64::new(
        c - 0.5,
        -(config.u1 + config.u2) - 2.0 * config.u2 * n2 * tau,
    );
    let amps = vec![
        C64::new(t * prefactor * c, 0.0),
        t * prefactor * config.alpha * slope * approx_exponent(tau, config).exp(),
    ];
    StateVector::new(amps).expect("two levels")
}
