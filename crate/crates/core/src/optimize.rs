//! Precision/fidelity trade-off: the peak-QFI objective, the extremum time,
//! ε-constraint grid search and Pareto-front extraction.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::{closed_form_qfi, deformation_at, TAU_STAR};

/// One evaluated control setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub u1: f64,
    pub u2: f64,
    pub alpha2: f64,
    pub i_star: f64,
    pub d: f64,
}

impl ParetoPoint {
    pub fn evaluate(u1: f64, u2: f64, alpha2: f64, gamma: f64) -> Self {
        Self {
            u1,
            u2,
            alpha2,
            i_star: qfi_star(u1, u2, alpha2, gamma),
            d: deformation_at(u1, u2, alpha2),
        }
    }
}

/// Evenly spaced axis `lo..=hi` with `count` points; `count = 1` pins the
/// axis at `lo`. Serialised as `[lo, hi, count]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, usize)", into = "(f64, f64, usize)")]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl From<(f64, f64, usize)> for AxisRange {
    fn from((lo, hi, count): (f64, f64, usize)) -> Self {
        Self { lo, hi, count }
    }
}

impl From<AxisRange> for (f64, f64, usize) {
    fn from(r: AxisRange) -> Self {
        (r.lo, r.hi, r.count)
    }
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Self { lo, hi, count }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            count: 1,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let in_domain = |v: f64| (0.0..1.0).contains(&v);
        if !in_domain(self.lo) {
            return Err(Error::InvalidParameter {
                name,
                value: self.lo,
                reason: "axis bounds must lie in [0, 1)",
            });
        }
        if !in_domain(self.hi) {
            return Err(Error::InvalidParameter {
                name,
                value: self.hi,
                reason: "axis bounds must lie in [0, 1)",
            });
        }
        if self.lo > self.hi {
            return Err(Error::InvalidParameter {
                name,
                value: self.lo,
                reason: "lower bound exceeds upper bound",
            });
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter {
                name,
                value: 0.0,
                reason: "count must be at least 1",
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let last = self.count - 1;
        let step = (self.hi - self.lo) / last as f64;
        (0..self.count)
            .map(|k| {
                if k == last {
                    self.hi
                } else {
                    self.lo + k as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u1_range: AxisRange,
    pub u2_range: AxisRange,
    pub alpha2_range: AxisRange,
}

impl GridSpec {
    /// `n × n` over `u₁, u₂ ∈ [0, hi]` at fixed `|α|²`.
    pub fn controls(hi: f64, n: usize, alpha2: f64) -> Self {
        Self {
            u1_range: AxisRange::new(0.0, hi, n),
            u2_range: AxisRange::new(0.0, hi, n),
            alpha2_range: AxisRange::fixed(alpha2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.u1_range.validate("u1_range")?;
        self.u2_range.validate("u2_range")?;
        self.alpha2_range.validate("alpha2_range")
    }

    pub fn len(&self) -> usize {
        self.u1_range.count * self.u2_range.count * self.alpha2_range.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedOptimum {
    pub best: ParetoPoint,
    pub epsilon: f64,
    pub feasible_count: usize,
    /// `ε − D` at the optimum.
    pub boundary_distance: f64,
}

/// Peak QFI over time, `(4|α|²/γ²)e^{−2}(1 + 4(u₁+u₂+4|α|²u₂)²)`.
///
/// Shares its expression with the closed-form QFI at `τ = 2`.
pub fn qfi_star(u1: f64, u2: f64, alpha2: f64, gamma: f64) -> f64 {
    closed_form_qfi(TAU_STAR, gamma, u1, u2, alpha2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStar {
    pub tau: f64,
    /// Stationarity residual at `tau`.
    pub residual: f64,
    /// Residual of `−16u₂²|α|⁴τ³ + 64u₂²|α|⁴τ² − τ + 2` at `tau`.
    pub cubic_residual: f64,
}

/// Search window for the extremum time.
pub const TAU_STAR_BRACKET: (f64, f64) = (1.0, 6.0);

/// Time maximising the closed-form QFI.
///
/// The stationarity condition, with `T = u₁ + u₂ + 2|α|²u₂τ`, is
/// `(2 − τ)(1 + 4T²) + 16|α|²u₂Tτ = 0`, a cubic solved by safeguarded Newton
/// from `τ = 2` inside [`TAU_STAR_BRACKET`].
pub fn solve_tau_star(u1: f64, u2: f64, alpha2: f64) -> Result<TauStar> {
    let coefficients = stationarity_coefficients(u1, u2, alpha2);
    let f = |tau: f64| horner(&coefficients, tau);
    let df =
        |tau: f64| coefficients[1] + tau * (2.0 * coefficients[2] + tau * 3.0 * coefficients[3]);
    let (mut lo, mut hi) = TAU_STAR_BRACKET;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            coefficients,
        });
    }

    let mut tau = 2.0;
    for _ in 0..200 {
        let value = f(tau);
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let slope = df(tau);
        let newton = tau - value / slope;
        let next = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done =
            (next - tau).abs() <= 4.0 * f64::EPSILON * tau || hi - lo <= 4.0 * f64::EPSILON * hi;
        tau = next;
        if done {
            break;
        }
    }

    let s = 16.0 * u2 * u2 * alpha2 * alpha2;
    let cubic_residual = -s * tau.powi(3) + 4.0 * s * tau * tau - tau + 2.0;
    Ok(TauStar {
        tau,
        residual: f(tau),
        cubic_residual,
    })
}

/// `[c₀, c₁, c₂, c₃]` of the stationarity cubic.
fn stationarity_coefficients(u1: f64, u2: f64, alpha2: f64) -> [f64; 4] {
    let a = u1 + u2;
    let b = 2.0 * alpha2 * u2;
    [
        2.0 * (1.0 + 4.0 * a * a),
        24.0 * a * b - 1.0 - 4.0 * a * a,
        16.0 * b * b - 8.0 * a * b,
        -4.0 * b * b,
    ]
}

fn horner(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

/// Every grid cell in row-major order (`u₁` slowest, `|α|²` fastest).
pub fn evaluate_grid(spec: &GridSpec, gamma: f64) -> Result<Vec<ParetoPoint>> {
    spec.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    let u1s = spec.u1_range.values();
    let u2s = spec.u2_range.values();
    let a2s = spec.alpha2_range.values();
    let (n2, n3) = (u2s.len(), a2s.len());
    Ok((0..spec.len())
        .into_par_iter()
        .map(|k| ParetoPoint::evaluate(u1s[k / (n2 * n3)], u2s[(k / n3) % n2], a2s[k % n3], gamma))
        .collect())
}

/// Total preference order: larger `i_star`, then smaller `d`, then smaller
/// `(u₁, u₂, |α|²)`. `Less` means `a` is preferred.
pub fn preference(a: &ParetoPoint, b: &ParetoPoint) -> Ordering {
    b.i_star
        .total_cmp(&a.i_star)
        .then(a.d.total_cmp(&b.d))
        .then(a.u1.total_cmp(&b.u1))
        .then(a.u2.total_cmp(&b.u2))
        .then(a.alpha2.total_cmp(&b.alpha2))
}

/// Best point with `d ≤ ε` among already evaluated points.
pub fn constrained_optimum(points: &[ParetoPoint], epsilon: f64) -> Result<ConstrainedOptimum> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1]",
        });
    }
    let (best, feasible_count) = points
        .par_iter()
        .filter(|p| p.d <= epsilon)
        .map(|p| (Some(*p), 1usize))
        .reduce(
            || (None, 0),
            |(a, na), (b, nb)| {
                let pick = match (a, b) {
                    (Some(a), Some(b)) => Some(if preference(&a, &b) == Ordering::Greater {
                        b
                    } else {
                        a
                    }),
                    (a, None) => a,
                    (None, b) => b,
                };
                (pick, na + nb)
            },
        );
    match best {
        Some(best) => Ok(ConstrainedOptimum {
            best,
            epsilon,
            feasible_count,
            boundary_distance: epsilon - best.d,
        }),
        None => Err(Error::Infeasible {
            epsilon,
            min_deformation: points.iter().map(|p| p.d).fold(f64::INFINITY, f64::min),
        }),
    }
}

/// Maximise `I*` subject to `D ≤ ε` over the grid.
pub fn epsilon_constrained_optimize(
    spec: &GridSpec,
    gamma: f64,
    epsilon: f64,
) -> Result<ConstrainedOptimum> {
    constrained_optimum(&evaluate_grid(spec, gamma)?, epsilon)
}

/// Non-dominated subset under (maximise `i_star`, minimise `d`), ascending
/// in `d`; points tied in both objectives keep their input order.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.d.total_cmp(&pb.d)
            .then(pb.i_star.total_cmp(&pa.i_star))
            .then(a.cmp(&b))
    });

    let mut front = Vec::new();
    let mut best_before = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let d = points[order[start]].d;
        let mut end = start;
        while end < order.len() && points[order[end]].d.total_cmp(&d) == Ordering::Equal {
            end += 1;
        }
        // Sorted by descending i inside the group, so the first is the maximum.
        let group_max = points[order[start]].i_star;
        if group_max > best_before {
            front.extend(
                order[start..end]
                    .iter()
                    .map(|&k| points[k])
                    .take_while(|p| p.i_star.total_cmp(&group_max) == Ordering::Equal),
            );
            best_before = group_max;
        }
        start = end;
    }
    front
}
