//! Truncated Fock-space primitives: operators, coherent states, density
//! matrices, and the dense linear-algebra kernels everything else uses.

mod eigen;
mod matrix;

pub use eigen::{
    hermitian_eigendecomposition, matrix_sqrt_psd, Eigen, HERMITIAN_TOLERANCE, PSD_CLAMP,
};
pub use matrix::{ComplexMatrix, StateVector, C64, NORM_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use matrix::check_dim;

/// Truncation used when nothing else is specified; good for n̄ ≤ 1.
pub const DEFAULT_DIM: usize = 20;
/// Truncation that matches the ten-element figure reproduction.
pub const FIGURE_DIM: usize = 10;

/// Largest coherent-state tail accepted by [`coherent_state`].
pub const MAX_TRUNCATION_TAIL: f64 = 0.01;

/// The physical scenario: coherent amplitude, dissipation rate and the two
/// rescaled controls `u₁ = k₁/γ`, `u₂ = k₂/γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub alpha: C64,
    pub gamma: f64,
    pub u1: f64,
    pub u2: f64,
    pub dim: usize,
}

impl SystemConfig {
    pub fn new(alpha: C64, gamma: f64, u1: f64, u2: f64, dim: usize) -> Result<Self> {
        let cfg = Self {
            alpha,
            gamma,
            u1,
            u2,
            dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Real coherent amplitude `√n̄`.
    pub fn with_mean_photons(
        mean_photons: f64,
        gamma: f64,
        u1: f64,
        u2: f64,
        dim: usize,
    ) -> Result<Self> {
        if !(mean_photons >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean_photons",
                value: mean_photons,
                reason: "must be non-negative",
            });
        }
        Self::new(C64::new(mean_photons.sqrt(), 0.0), gamma, u1, u2, dim)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "must be positive",
            });
        }
        for (name, u) in [("u1", self.u1), ("u2", self.u2)] {
            if !(0.0..1.0).contains(&u) {
                return Err(Error::InvalidParameter {
                    name,
                    value: u,
                    reason: "must lie in [0, 1)",
                });
            }
        }
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::NonFinite("alpha"));
        }
        Ok(())
    }

    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Physical linear coupling `k₁ = u₁·γ`.
    pub fn k1(&self) -> f64 {
        self.u1 * self.gamma
    }

    /// Physical Kerr coupling `k₂ = u₂·γ`.
    pub fn k2(&self) -> f64 {
        self.u2 * self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }

    pub fn with_controls(&self, u1: f64, u2: f64) -> Self {
        Self { u1, u2, ..*self }
    }
}

/// A state over the truncated basis together with the probability mass that
/// the truncation is estimated to have dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    truncation_tail: f64,
}

pub const DENSITY_HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const DENSITY_TRACE_TOLERANCE: f64 = 1e-8;
pub const DENSITY_EIGEN_FLOOR: f64 = -1e-8;

impl DensityMatrix {
    /// Checks Hermiticity, trace, and positivity.
    pub fn new(matrix: ComplexMatrix, truncation_tail: f64) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, truncation_tail);
        rho.check()?;
        Ok(rho)
    }

    /// Skips the positivity check (which costs an eigendecomposition) but
    /// still checks Hermiticity and trace.
    pub fn new_cheap(matrix: ComplexMatrix, truncation_tail: f64) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, truncation_tail);
        rho.check_hermitian_and_trace()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, truncation_tail: f64) -> Self {
        Self {
            matrix,
            truncation_tail: truncation_tail.max(0.0),
        }
    }

    pub fn pure(state: &StateVector, truncation_tail: f64) -> Result<Self> {
        Self::new(state.projector(), truncation_tail)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_pq|² for Hermitian ρ.
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Copy rescaled to unit trace.
    pub fn renormalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::CorruptState(format!(
                "trace {tr} cannot be renormalised"
            )));
        }
        Ok(Self {
            matrix: &self.matrix * (1.0 / tr),
            truncation_tail: self.truncation_tail,
        })
    }

    pub fn check(&self) -> Result<()> {
        self.check_hermitian_and_trace()?;
        let eig = hermitian_eigendecomposition(&self.matrix)?;
        let lowest = eig.values[0];
        if lowest < DENSITY_EIGEN_FLOOR {
            return Err(Error::NotPositive { eigenvalue: lowest });
        }
        Ok(())
    }

    fn check_hermitian_and_trace(&self) -> Result<()> {
        if !self.matrix.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        let dev = self.matrix.hermiticity_deviation();
        if dev > DENSITY_HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = self.trace();
        // Unit trace within tolerance, once the truncated tail is put back.
        let lower = 1.0 - self.truncation_tail - DENSITY_TRACE_TOLERANCE;
        let upper = 1.0 + DENSITY_TRACE_TOLERANCE;
        if tr < lower || tr > upper {
            return Err(Error::CorruptState(format!(
                "trace {tr} outside [{lower}, {upper}]"
            )));
        }
        Ok(())
    }
}

/// `a[p,q] = √q` when `p = q − 1`.
pub fn annihilation_matrix(dim: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::from_fn(dim, |p, q| {
        if p + 1 == q {
            C64::new((q as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn number_matrix(dim: usize) -> Result<ComplexMatrix> {
    let diag: Vec<C64> = (0..dim).map(|n| C64::new(n as f64, 0.0)).collect();
    ComplexMatrix::from_diagonal(&diag)
}

/// Diagonal entries `u₁·n + u₂·n²` of the rescaled control Hamiltonian.
pub fn control_spectrum(u1: f64, u2: f64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|n| {
            let n = n as f64;
            u1 * n + u2 * n * n
        })
        .collect()
}

/// `u₁·a†a + u₂·(a†a)²` in units of γ.
pub fn control_hamiltonian(config: &SystemConfig) -> Result<ComplexMatrix> {
    config.validate()?;
    let diag: Vec<C64> = control_spectrum(config.u1, config.u2, config.dim)
        .into_iter()
        .map(|e| C64::new(e, 0.0))
        .collect();
    ComplexMatrix::from_diagonal(&diag)
}

/// `ln n!`, exact running sums up to 20 and Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    const TABLE_LEN: usize = 21;
    static TABLE: std::sync::OnceLock<[f64; TABLE_LEN]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        let mut fact = 1.0f64;
        for (k, slot) in t.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *slot = fact.ln();
        }
        t
    });
    if n < TABLE_LEN {
        return table[n];
    }
    let x = n as f64 + 1.0;
    // ln Γ(x), Stirling with four correction terms; error < 1e-15 for x > 20.
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
        - 1.0 / (1680.0 * x.powi(7))
}

/// Coherent state `|α⟩` truncated to `dim` levels and the mass beyond it.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<(StateVector, f64)> {
    check_dim(dim)?;
    let n2 = alpha.norm_sqr();
    let mut amps = Vec::with_capacity(dim);
    if alpha == C64::new(0.0, 0.0) {
        amps.push(C64::new(1.0, 0.0));
        amps.resize(dim, C64::new(0.0, 0.0));
    } else {
        let ln_abs = alpha.norm().ln();
        let phase = alpha / alpha.norm();
        let mut rot = C64::new(1.0, 0.0);
        for n in 0..dim {
            let mag = (-0.5 * n2 + n as f64 * ln_abs - 0.5 * ln_factorial(n)).exp();
            amps.push(rot * mag);
            rot *= phase;
        }
    }
    // Summed directly rather than as 1 − Σ|c_n|², which cancels catastrophically.
    let tail = poisson_tail(n2, dim);
    if tail > MAX_TRUNCATION_TAIL {
        return Err(Error::TruncationTooSmall {
            mean_photons: n2,
            dim,
            tail,
        });
    }
    Ok((StateVector::new(amps)?, tail))
}

/// `P(X ≥ dim)` for `X ~ Poisson(mean)`, summed term by term in log space.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut total = 0.0;
    let mut n = dim;
    loop {
        let term = (-mean + n as f64 * ln_mean - ln_factorial(n)).exp();
        total += term;
        let past_mode = n as f64 > mean;
        if (past_mode && term <= total * 1e-18) || n > dim + 100_000 {
            break;
        }
        n += 1;
    }
    total
}
