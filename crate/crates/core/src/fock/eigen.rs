//! Hermitian eigendecomposition by cyclic complex Jacobi rotations, and the
//! PSD square root built on it.

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Hermiticity tolerance accepted on input.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Eigenvalues above `-PSD_CLAMP` are numerical noise and clamp to zero.
pub const PSD_CLAMP: f64 = 1e-6;

const MAX_SWEEPS: usize = 100;

/// Ascending eigenvalues and the matching orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        let n = self.vectors.dim();
        (0..n).map(|p| self.vectors[(p, k)]).collect()
    }

    /// `V·diag(f(λ))·V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.dim();
        let v = &self.vectors;
        let w: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |p, q| {
            (0..n).map(|k| v[(p, k)] * w[k] * v[(q, k)].conj()).sum()
        })
        .expect("dimension already validated")
    }
}

pub fn hermitian_eigendecomposition(m: &ComplexMatrix) -> Result<Eigen> {
    let dev = m.hermiticity_deviation();
    if dev > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { deviation: dev });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigendecomposition input"));
    }
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n)?;

    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|k| a[(k, k)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, |p, k| v[(p, order[k])])?;
    Ok(Eigen { values, vectors })
}

/// One Jacobi rotation annihilating `a[p,q]`.
///
/// With `a[p,q] = |a|·e^{iφ}` the unitary is `J = U·R`, where
/// `U = diag(1, e^{-iφ})` on (p, q) makes the pivot real and `R` is the real
/// rotation of the resulting symmetric 2×2 block.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if mag <= 1e-300 || mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        return;
    }
    let phase = apq / mag; // e^{iφ}
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    let ph = phase.conj(); // e^{-iφ}

    // Columns: A ← A·J.
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * ph * s;
        a[(k, q)] = akp * s + akq * ph * c;
    }
    // Rows: A ← J†·A.
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph * s;
        v[(k, q)] = vkp * s + vkq * ph * c;
    }
}

/// Hermitian PSD square root; eigenvalues in `[-PSD_CLAMP, 0)` are clamped.
///
/// Eigenvalues within the solver's rounding floor (`8·n·ε·max|λ|`) are also
/// taken as zero, so exact null spaces do not pick up `√ε`-sized entries.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigendecomposition(m)?;
    if let Some(&lowest) = eig.values.first() {
        if lowest < -PSD_CLAMP {
            return Err(Error::NotPositive { eigenvalue: lowest });
        }
    }
    let largest = eig.values.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let floor = 8.0 * m.dim() as f64 * f64::EPSILON * largest;
    Ok(eig.reconstruct_with(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}
