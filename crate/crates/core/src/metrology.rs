//! Quantum Fisher information for the dissipation rate, the Cramér–Rao
//! bound, and the fidelity/deformation of the evolved state.
//!
//! All γ-derivatives are taken at fixed `(t, u₁, u₂)`: the physical controls
//! scale with γ and `∂ρ/∂γ = t·∂ρ/∂τ`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    analytic_matrix, evolve_analytic, evolve_analytic_with, pure_state_approx,
    pure_state_gamma_derivative,
};
use crate::error::{Error, Result};
use crate::fock::{
    hermitian_eigendecomposition, matrix_sqrt_psd, ComplexMatrix, DensityMatrix, StateVector,
    SystemConfig, C64,
};

/// Pairs with `p_m + p_n` at or below this are skipped in the eigenbasis sum.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;
/// Relative step for the central difference in γ.
pub const DEFAULT_H_REL: f64 = 1e-5;

/// A reference state with purity above `1 − PURE_THRESHOLD` takes the
/// `⟨φ|ρ|φ⟩` shortcut in [`fidelity_uhlmann`].
const PURE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    ExactEig,
    PureState,
    ClosedForm,
}

impl QfiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            QfiMethod::ExactEig => "exact_eig",
            QfiMethod::PureState => "pure_state",
            QfiMethod::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiResult {
    pub tau: f64,
    pub gamma: f64,
    /// In units of time².
    pub value: f64,
    pub method: QfiMethod,
    pub n_measurements: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMethod {
    Uhlmann,
    PureClosedForm,
}

impl FidelityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FidelityMethod::Uhlmann => "uhlmann",
            FidelityMethod::PureClosedForm => "pure_closed_form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub tau: f64,
    pub value: f64,
    pub method: FidelityMethod,
}

/// How [`qfi_pure`] treats a state that is not normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PureQfiMode {
    /// Normalise `ψ` and carry the matching correction into `∂ψ`.
    #[default]
    Normalized,
    /// Evaluate `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)` on the inputs as given.
    Literal,
}

/// `∂ρ/∂γ` at fixed `(t, u₁, u₂)` by a central difference of the analytic
/// state, `(ρ(γ(1+h)) − ρ(γ(1−h)))/(2hγ)`.
pub fn drho_dgamma(config: &SystemConfig, t: f64, h_rel: f64) -> Result<ComplexMatrix> {
    if !(1e-8..=1e-3).contains(&h_rel) {
        return Err(Error::InvalidParameter {
            name: "h_rel",
            value: h_rel,
            reason: "must lie in [1e-8, 1e-3]",
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be non-negative",
        });
    }
    let tau = config.gamma * t;
    let plus = analytic_matrix(config, tau * (1.0 + h_rel))?;
    let minus = analytic_matrix(config, tau * (1.0 - h_rel))?;
    Ok(&(&plus - &minus) * (1.0 / (2.0 * h_rel * config.gamma)))
}

/// `2 Σ |⟨ψ_m|∂ρ|ψ_n⟩|² / (p_m + p_n)` over eigenpairs of `ρ` with
/// `p_m + p_n > floor`.
pub fn qfi_exact(rho: &DensityMatrix, drho: &ComplexMatrix, floor: f64) -> Result<f64> {
    if drho.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: drho.dim(),
        });
    }
    let dev = drho.hermiticity_deviation();
    if dev > 1e-10 * drho.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let eig = hermitian_eigendecomposition(rho.matrix())?;
    let v = &eig.vectors;
    let projected = v.adjoint().matmul(drho)?.matmul(v)?;
    let n = rho.dim();
    let mut total = 0.0;
    for m in 0..n {
        for k in 0..n {
            let denom = eig.values[m] + eig.values[k];
            if denom > floor {
                total += projected[(m, k)].norm_sqr() / denom;
            }
        }
    }
    Ok(2.0 * total)
}

/// Exact QFI at rescaled time `tau` for the analytic state.
pub fn qfi_exact_at(config: &SystemConfig, tau: f64) -> Result<QfiResult> {
    let t = tau / config.gamma;
    let rho = evolve_analytic(config, tau)?.state;
    let drho = drho_dgamma(config, t, DEFAULT_H_REL)?;
    let value = qfi_exact(&rho, &drho, DEFAULT_EIGEN_FLOOR)?;
    Ok(QfiResult {
        tau,
        gamma: config.gamma,
        value,
        method: QfiMethod::ExactEig,
        n_measurements: None,
    })
}

/// `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)`.
pub fn qfi_pure(psi: &StateVector, dpsi: &StateVector, mode: PureQfiMode) -> Result<f64> {
    if psi.dim() != dpsi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: dpsi.dim(),
        });
    }
    let dd = dpsi.inner(dpsi)?.re;
    let overlap = psi.inner(dpsi)?;
    let raw = match mode {
        PureQfiMode::Literal => 4.0 * (dd - overlap.norm_sqr()),
        PureQfiMode::Normalized => {
            let nn = psi.norm_sqr();
            if !(nn > 0.0) {
                return Err(Error::CorruptState("zero state vector".into()));
            }
            4.0 * (dd / nn - overlap.norm_sqr() / (nn * nn))
        }
    };
    Ok(raw.max(0.0))
}

/// QFI of the two-level approximate state at rescaled time `tau`.
pub fn qfi_pure_at(config: &SystemConfig, tau: f64, mode: PureQfiMode) -> Result<QfiResult> {
    let psi = pure_state_approx(tau, config).vector;
    let dpsi = pure_state_gamma_derivative(tau / config.gamma, config);
    let value = qfi_pure(&psi, &dpsi, mode)?;
    Ok(QfiResult {
        tau,
        gamma: config.gamma,
        value,
        method: QfiMethod::PureState,
        n_measurements: None,
    })
}

/// `(τ²/γ²)|α|²e^{−τ}(1 + 4(u₁ + u₂ + 2τ|α|²u₂)²)`.
pub fn closed_form_qfi(tau: f64, gamma: f64, u1: f64, u2: f64, alpha2: f64) -> f64 {
    let t = u1 + u2 + 2.0 * tau * alpha2 * u2;
    tau * tau / (gamma * gamma) * alpha2 * (-tau).exp() * (1.0 + 4.0 * t * t)
}

pub fn qfi_approx_closed(tau: f64, config: &SystemConfig) -> QfiResult {
    QfiResult {
        tau,
        gamma: config.gamma,
        value: closed_form_qfi(
            tau,
            config.gamma,
            config.u1,
            config.u2,
            config.mean_photons(),
        ),
        method: QfiMethod::ClosedForm,
        n_measurements: None,
    }
}

/// Variance lower bound `1/(N·I)`.
pub fn cramer_rao_bound(qfi: &QfiResult, n_measurements: u64) -> Result<f64> {
    if n_measurements == 0 {
        return Err(Error::InvalidParameter {
            name: "n_measurements",
            value: 0.0,
            reason: "must be positive",
        });
    }
    if !(qfi.value > 0.0) {
        return Err(Error::UnboundedVariance);
    }
    Ok(1.0 / (n_measurements as f64 * qfi.value))
}

/// `(Tr √(√ρ ρ₀ √ρ))²`, with `⟨φ|ρ|φ⟩` when `ρ₀` is pure.
pub fn fidelity_uhlmann(rho0: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if rho0.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: rho.dim(),
        });
    }
    let value = if rho0.purity() > 1.0 - PURE_THRESHOLD {
        let eig = hermitian_eigendecomposition(rho0.matrix())?;
        let top = eig.values.len() - 1;
        let phi = eig.vector(top);
        let rho_phi = rho.matrix().apply(&phi)?;
        // Scale by the eigenvalue so a truncated pure state keeps its weight.
        eig.values[top]
            * phi
                .iter()
                .zip(&rho_phi)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                .re
    } else {
        let s = matrix_sqrt_psd(rho.matrix())?;
        let inner = s.matmul(rho0.matrix())?.matmul(&s)?.hermitian_part();
        let root = matrix_sqrt_psd(&inner)?;
        let tr = root.trace().re;
        tr * tr
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Uhlmann fidelity between `ρ(0)` and `ρ(τ)` from the analytic solution,
/// both renormalised to unit trace.
pub fn fidelity_exact_at(config: &SystemConfig, tau: f64) -> Result<FidelityResult> {
    let rho0 = evolve_analytic_with(config, 0.0, true)?.state;
    let rho = evolve_analytic_with(config, tau, true)?.state;
    Ok(FidelityResult {
        tau,
        value: fidelity_uhlmann(&rho0, &rho)?,
        method: FidelityMethod::Uhlmann,
    })
}

/// `|exp{−½|α|² − ½|α|²e^{−τ}}·[1 + |α|²exp{−½τ + i(u₁+u₂)τ + iu₂τ²|α|²}]|²`,
/// taken literally from the unnormalised two-level state.
pub fn closed_form_fidelity(tau: f64, u1: f64, u2: f64, alpha2: f64) -> f64 {
    let envelope = (-0.5 * alpha2 - 0.5 * alpha2 * (-tau).exp()).exp();
    let phase = C64::new(-0.5 * tau, (u1 + u2) * tau + u2 * tau * tau * alpha2);
    (envelope * (C64::new(1.0, 0.0) + alpha2 * phase.exp())).norm_sqr()
}

pub fn fidelity_approx(tau: f64, config: &SystemConfig) -> FidelityResult {
    FidelityResult {
        tau,
        value: closed_form_fidelity(tau, config.u1, config.u2, config.mean_photons()),
        method: FidelityMethod::PureClosedForm,
    }
}

/// The QFI-optimal time used by the deformation objective.
pub const TAU_STAR: f64 = 2.0;

/// `D = 1 − F(τ* = 2)` from the closed-form fidelity.
pub fn deformation_at(u1: f64, u2: f64, alpha2: f64) -> f64 {
    1.0 - closed_form_fidelity(TAU_STAR, u1, u2, alpha2)
}

pub fn deformation(config: &SystemConfig) -> f64 {
    deformation_at(config.u1, config.u2, config.mean_photons())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_analytic;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n2: f64, u1: f64, u2: f64, dim: usize) -> SystemConfig {
        SystemConfig::with_mean_photons(n2, 1.0, u1, u2, dim).unwrap()
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_state(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let mut m = ComplexMatrix::zeros(n).unwrap();
        for _ in 0..rank {
            let v = StateVector::new(random_vec(n, rng)).unwrap().projector();
            m = &m + &v;
        }
        let tr = m.trace().re;
        DensityMatrix::new(&m * (1.0 / tr), 0.0).unwrap()
    }

    #[test]
    fn derivative_vanishes_at_time_zero() {
        let d = drho_dgamma(&cfg(1.0, 0.1, 0.1, 10), 0.0, DEFAULT_H_REL).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn derivative_of_free_decay() {
        // Real α: ρ_pq = exp(−α²e^{−γt})·α^{p+q}e^{−γt(p+q)/2}/√(p!q!), so
        // ∂γρ_pq = ρ_pq·(α²t·e^{−γt} − t(p+q)/2).
        let c = SystemConfig::with_mean_photons(1.0, 0.8, 0.0, 0.0, 20).unwrap();
        let t = 1.7;
        let rho = analytic_matrix(&c, c.gamma * t).unwrap();
        let d = drho_dgamma(&c, t, DEFAULT_H_REL).unwrap();
        for p in 0..20 {
            for q in 0..20 {
                let want = rho[(p, q)] * (t * (-c.gamma * t).exp() - 0.5 * t * (p + q) as f64);
                assert!((d[(p, q)] - want).norm() <= 1e-6, "({p},{q})");
            }
        }
    }

    #[test]
    fn derivative_self_convergence() {
        let c = cfg(1.0, 0.05, 0.05, 15);
        let h = 1e-3;
        let coarse = drho_dgamma(&c, 1.5, h).unwrap();
        let fine = drho_dgamma(&c, 1.5, h / 2.0).unwrap();
        // Central difference: error ∝ h², so halving moves the result by ~¾h²·|ρ'''|.
        assert!(coarse.max_abs_diff(&fine).unwrap() <= 10.0 * h * h);
    }

    #[test]
    fn zero_derivative_gives_zero() {
        let rho = evolve_analytic(&cfg(1.0, 0.0, 0.0, 8), 1.0).unwrap().state;
        let z = ComplexMatrix::zeros(8).unwrap();
        assert_eq!(qfi_exact(&rho, &z, DEFAULT_EIGEN_FLOOR).unwrap(), 0.0);
        let mut bad = z.clone();
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            qfi_exact(&rho, &bad, DEFAULT_EIGEN_FLOOR),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenbasis_sum_reduces_to_pure_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 4, 9] {
            let psi = StateVector::new(random_vec(n, &mut rng))
                .unwrap()
                .normalized()
                .unwrap();
            let raw = StateVector::new(random_vec(n, &mut rng)).unwrap();
            // Stay on the unit sphere: remove Re⟨ψ|∂ψ⟩.
            let re = psi.inner(&raw).unwrap().re;
            let dpsi = StateVector::new(
                raw.amplitudes()
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(d, p)| d - re * p)
                    .collect(),
            )
            .unwrap();
            let rho = DensityMatrix::new(psi.projector(), 0.0).unwrap();
            let drho = ComplexMatrix::from_fn(n, |p, q| {
                dpsi.amplitudes()[p] * psi.amplitudes()[q].conj()
                    + psi.amplitudes()[p] * dpsi.amplitudes()[q].conj()
            })
            .unwrap();
            let exact = qfi_exact(&rho, &drho, DEFAULT_EIGEN_FLOOR).unwrap();
            let pure = qfi_pure(&psi, &dpsi, PureQfiMode::Normalized).unwrap();
            assert!(
                (exact - pure).abs() <= 1e-8 * pure.max(1.0),
                "{exact} vs {pure}"
            );
        }
    }

    #[test]
    fn pure_qfi_gauge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = StateVector::new(random_vec(5, &mut rng))
            .unwrap()
            .normalized()
            .unwrap();
        let zero = StateVector::new(vec![C64::new(0.0, 0.0); 5]).unwrap();
        assert_eq!(qfi_pure(&psi, &zero, PureQfiMode::Normalized).unwrap(), 0.0);
        let phase = psi.scale(C64::new(0.0, 0.37));
        assert!(qfi_pure(&psi, &phase, PureQfiMode::Normalized).unwrap() < 1e-14);

        let dpsi = StateVector::new(random_vec(5, &mut rng)).unwrap();
        let base = qfi_pure(&psi, &dpsi, PureQfiMode::Normalized).unwrap();
        let g = C64::new(0.0, 1.1).exp();
        let rotated = qfi_pure(&psi.scale(g), &dpsi.scale(g), PureQfiMode::Normalized).unwrap();
        assert!((base - rotated).abs() < 1e-10);

        let short = StateVector::new(vec![C64::new(1.0, 0.0); 3]).unwrap();
        assert!(matches!(
            qfi_pure(&psi, &short, PureQfiMode::Literal),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pure_state_qfi_spot_values() {
        // Two-level state at u₁ = u₂ = 0.05, n̄ = 1, τ = 2, γ = 1; both modes
        // evaluated independently in mpmath from the printed amplitudes.
        let c = cfg(1.0, 0.05, 0.05, 4);
        let norm = qfi_pure_at(&c, 2.0, PureQfiMode::Normalized).unwrap().value;
        let lit = qfi_pure_at(&c, 2.0, PureQfiMode::Literal).unwrap().value;
        assert!((norm - PURE_NORMALIZED_SPOT).abs() < 1e-12, "{norm}");
        assert!((lit - PURE_LITERAL_SPOT).abs() < 1e-12, "{lit}");
        // The closed form is the leading order in n̄; at small n̄ they meet.
        let small = cfg(1e-3, 0.05, 0.05, 4);
        let pure = qfi_pure_at(&small, 2.0, PureQfiMode::Normalized)
            .unwrap()
            .value;
        let closed = qfi_approx_closed(2.0, &small).value;
        assert!((pure - closed).abs() <= 5e-2 * closed);
    }

    const PURE_NORMALIZED_SPOT: f64 = 0.571_165_104_595_075_4;
    const PURE_LITERAL_SPOT: f64 = 0.566_561_805_341_072_8;

    #[test]
    fn exact_qfi_free_decay_baseline() {
        let c = cfg(1.0, 0.0, 0.0, 20);
        for tau in [0.1, 0.5, 1.0, 2.0, 3.0, 4.0] {
            let got = qfi_exact_at(&c, tau).unwrap().value;
            let want = tau * tau * (-tau).exp();
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "tau {tau}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn closed_form_values() {
        let c = cfg(1.0, 0.0, 0.0, 4);
        assert_eq!(qfi_approx_closed(0.0, &c).value, 0.0);
        // 4e^{-2}, mpmath.
        assert!((qfi_approx_closed(2.0, &c).value - 0.541_341_132_946_450_8).abs() < 1e-12);
        let c2 = cfg(0.6, 0.1, 0.2, 4);
        let one = qfi_approx_closed(1.3, &c2).value;
        let two = qfi_approx_closed(1.3, &c2.with_gamma(2.0)).value;
        assert_eq!(one / 4.0, two);
    }

    #[test]
    fn cramer_rao() {
        let q = |v| QfiResult {
            tau: 2.0,
            gamma: 1.0,
            value: v,
            method: QfiMethod::ClosedForm,
            n_measurements: None,
        };
        assert_eq!(cramer_rao_bound(&q(1.0), 1).unwrap(), 1.0);
        // 1/(100·4e^{-2}), mpmath.
        let four_e2 = 4.0 * (-2.0f64).exp();
        assert!(
            (cramer_rao_bound(&q(four_e2), 100).unwrap() - 0.018_472_640_247_326_626).abs() < 1e-15
        );
        assert_eq!(
            cramer_rao_bound(&q(0.3), 20).unwrap(),
            2.0 * cramer_rao_bound(&q(0.3), 40).unwrap()
        );
        assert_eq!(cramer_rao_bound(&q(0.0), 10), Err(Error::UnboundedVariance));
    }

    #[test]
    fn uhlmann_basic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random_state(5, 3, &mut rng);
        assert!((fidelity_uhlmann(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let e = |k: usize| {
            let mut v = vec![C64::new(0.0, 0.0); 3];
            v[k] = C64::new(1.0, 0.0);
            DensityMatrix::pure(&StateVector::new(v).unwrap(), 0.0).unwrap()
        };
        assert_eq!(fidelity_uhlmann(&e(0), &e(1)).unwrap(), 0.0);
    }

    #[test]
    fn uhlmann_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for (n, r0, r1) in [(3usize, 2usize, 3usize), (6, 4, 6), (8, 1, 5)] {
            let a = random_state(n, r0, &mut rng);
            let b = random_state(n, r1, &mut rng);
            let ab = fidelity_uhlmann(&a, &b).unwrap();
            let ba = fidelity_uhlmann(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-9, "{ab} vs {ba}");
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn uhlmann_pure_pure_is_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = StateVector::new(random_vec(6, &mut rng))
            .unwrap()
            .normalized()
            .unwrap();
        let phi = StateVector::new(random_vec(6, &mut rng))
            .unwrap()
            .normalized()
            .unwrap();
        let want = psi.inner(&phi).unwrap().norm_sqr();
        let a = DensityMatrix::pure(&psi, 0.0).unwrap();
        let b = DensityMatrix::pure(&phi, 0.0).unwrap();
        assert!((fidelity_uhlmann(&a, &b).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn exact_fidelity_starts_at_one() {
        // N = 10 leaves a 1e-7 Poisson tail; renormalisation removes it.
        let c = cfg(1.0, 0.05, 0.05, 10);
        assert!((fidelity_exact_at(&c, 0.0).unwrap().value - 1.0).abs() < 1e-9);
        let free = cfg(1.0, 0.0, 0.0, 20);
        // Free decay keeps a coherent state: F = exp(−|α − αe^{−τ/2}|²).
        let want = (-(1.0 - (-0.5f64).exp()).powi(2)).exp();
        assert!((fidelity_exact_at(&free, 1.0).unwrap().value - want).abs() < 1e-9);
    }

    #[test]
    fn closed_form_fidelity_values() {
        let vac = cfg(0.0, 0.3, 0.2, 4);
        for tau in [0.0, 1.0, 5.0] {
            assert_eq!(fidelity_approx(tau, &vac).value, 1.0);
        }
        // (e^{−0.2}·1.2)², mpmath.
        assert!(
            (fidelity_approx(0.0, &cfg(0.2, 0.4, 0.1, 4)).value - 0.965_260_866_291_320_6).abs()
                < 1e-14
        );
        let free = cfg(1.0, 0.0, 0.0, 4);
        // 4e^{−2} at τ = 0 and e^{−1} as τ → ∞.
        assert!((fidelity_approx(0.0, &free).value - 0.541_341_132_946_450_8).abs() < 1e-14);
        assert!((fidelity_approx(80.0, &free).value - (-1.0f64).exp()).abs() < 1e-14);
        // The unnormalised amplitude first grows: d ln F/dτ ∝ x(x² + x − 1), x = e^{−τ/2}.
        assert!(fidelity_approx(0.1, &free).value > fidelity_approx(0.0, &free).value);
        assert!(fidelity_approx(3.0, &free).value < fidelity_approx(2.0, &free).value);
    }

    #[test]
    fn deformation_values() {
        assert_eq!(deformation(&cfg(0.0, 0.3, 0.2, 4)), 0.0);
        // 1 − |e^{−0.1−0.1e^{−2}}(1 + 0.2e^{−1})|², mpmath.
        assert!((deformation(&cfg(0.2, 0.0, 0.0, 4)) - 0.081_558_438_576_449_39).abs() < 1e-14);
        let c = cfg(0.7, 0.13, 0.21, 4);
        assert_eq!(deformation(&c), 1.0 - fidelity_approx(2.0, &c).value);
        // Phase 2(u₁+u₂) + 4u₂n̄ stays inside (0, π) for this sweep.
        let mut prev = deformation_at(0.0, 0.05, 0.2);
        for k in 1..=100 {
            let d = deformation_at(k as f64 * 0.005, 0.05, 0.2);
            assert!(d > prev);
            prev = d;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pure_qfi_ignores_global_phase(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU, n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = StateVector::new(random_vec(n, &mut rng)).unwrap().normalized().unwrap();
            let dpsi = StateVector::new(random_vec(n, &mut rng)).unwrap();
            let g = C64::new(0.0, theta).exp();
            for mode in [PureQfiMode::Normalized, PureQfiMode::Literal] {
                let a = qfi_pure(&psi, &dpsi, mode).unwrap();
                let b = qfi_pure(&psi.scale(g), &dpsi.scale(g), mode).unwrap();
                prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
            }
        }

        #[test]
        fn uhlmann_stays_in_unit_interval(seed in any::<u64>(), n in 2usize..7, r0 in 1usize..7, r1 in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_state(n, r0.min(n), &mut rng);
            let b = random_state(n, r1.min(n), &mut rng);
            let f = fidelity_uhlmann(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - fidelity_uhlmann(&b, &a).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn uhlmann_of_pure_states_is_overlap(seed in any::<u64>(), n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = StateVector::new(random_vec(n, &mut rng)).unwrap().normalized().unwrap();
            let phi = StateVector::new(random_vec(n, &mut rng)).unwrap().normalized().unwrap();
            let want = psi.inner(&phi).unwrap().norm_sqr();
            let a = DensityMatrix::pure(&psi, 0.0).unwrap();
            let b = DensityMatrix::pure(&phi, 0.0).unwrap();
            prop_assert!((fidelity_uhlmann(&a, &b).unwrap() - want).abs() <= 1e-9);
        }

        #[test]
        fn deformation_is_one_minus_fidelity_at_two(u1 in 0.0..0.99f64, u2 in 0.0..0.99f64, n2 in 0.0..1.0f64) {
            let c = SystemConfig::with_mean_photons(n2, 1.0, u1, u2, 20).unwrap();
            prop_assert_eq!(deformation(&c), 1.0 - fidelity_approx(2.0, &c).value);
        }
    }
}
