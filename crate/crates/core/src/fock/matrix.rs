use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex square matrix over a truncated Fock basis, stored row-major.
///
/// Row `p` and column `q` are occupation numbers counted from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for n in 0..dim {
            m.data[n * dim + n] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for p in 0..dim {
            for q in 0..dim {
                data.push(f(p, q));
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (n, &d) in diag.iter().enumerate() {
            m.data[n * diag.len() + n] = d;
        }
        Ok(m)
    }

    /// Row-major constructor; `rows` must be square.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Result<C64> {
        self.offset(row, col).map(|i| self.data[i])
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) -> Result<()> {
        let i = self.offset(row, col)?;
        self.data[i] = value;
        Ok(())
    }

    fn offset(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.dim || col >= self.dim {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                dim: self.dim,
            });
        }
        Ok(row * self.dim + col)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for p in 0..n {
            for q in 0..n {
                out.data[p * n + q] = self.data[q * n + p].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|n| self.data[n * self.dim + n]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|n| self.data[n * self.dim + n]).collect()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.check_same(rhs)?;
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for p in 0..n {
            let row = &self.data[p * n..(p + 1) * n];
            let out_row = &mut out[p * n..(p + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { dim: n, data: out })
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        Ok(&self.matmul(rhs)? - &rhs.matmul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest `|m[p,q] − conj(m[q,p])|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in p..n {
                let d = (self.data[p * n + q] - self.data[q * n + p].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `(m + m†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for p in 0..n {
            for q in 0..n {
                out.data[p * n + q] = 0.5 * (self.data[p * n + q] + self.data[q * n + p].conj());
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: v.len(),
            });
        }
        let n = self.dim;
        Ok((0..n)
            .map(|p| {
                self.data[p * n..(p + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(())
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (row, col): (usize, usize)) -> &C64 {
        assert!(
            row < self.dim && col < self.dim,
            "index ({row}, {col}) out of range for dimension {}",
            self.dim
        );
        &self.data[row * self.dim + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut C64 {
        assert!(
            row < self.dim && col < self.dim,
            "index ({row}, {col}) out of range for dimension {}",
            self.dim
        );
        &mut self.data[row * self.dim + col]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, s: f64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }
}

/// Amplitudes `c_n` over the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    normalized: bool,
}

/// Tolerance backing the `normalized` flag.
pub const NORM_TOLERANCE: f64 = 1e-10;

impl StateVector {
    /// Unnormalised vector; the flag stays unset whatever the norm is.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        Ok(Self {
            amplitudes,
            normalized: false,
        })
    }

    /// Vector asserted to have unit norm within [`NORM_TOLERANCE`].
    pub fn new_normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = Self::new(amplitudes)?;
        let n2 = v.norm_sqr();
        if (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "norm",
                value: n2,
                reason: "normalized state must have unit norm",
            });
        }
        Ok(Self {
            normalized: true,
            ..v
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::CorruptState(
                "cannot normalise a zero or non-finite vector".into(),
            ));
        }
        Self::new_normalized(self.amplitudes.iter().map(|c| c / n).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|c| c * s).collect(),
            normalized: false,
        }
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> ComplexMatrix {
        let v = &self.amplitudes;
        ComplexMatrix::from_fn(v.len(), |p, q| v[p] * v[q].conj())
            .expect("dim checked at construction")
    }
}
