//! Power-series expansion in μ of the geometry morph `x = x₀ + ℧₁(x₀)·μ`.
//!
//! With `g = ∇₀℧₁`, the morph gradient is `∇₀x = I + g·μ`. Its determinant
//! is a cubic in μ, its adjugate a quadratic, and the reciprocal of the
//! determinant is expanded as a truncated power series.

use nalgebra::Matrix3;
use twofloat::TwoFloat;

/// Morph gradient `∇₀℧₁` at one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphGradient(pub Matrix3<f64>);

impl MorphGradient {
    pub fn new(g: Matrix3<f64>) -> Self {
        Self(g)
    }

    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `I + g·μ`
    pub fn deformation(&self, mu: f64) -> Matrix3<f64> {
        Matrix3::identity() + self.0 * mu
    }
}

/// Coefficients of `det(I + gμ) = 1 + h1·μ + h2·μ² + h3·μ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetCoeffs {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl DetCoeffs {
    /// `[1, h1, h2, h3]`
    pub fn polynomial(&self) -> [f64; 4] {
        [1.0, self.h1, self.h2, self.h3]
    }

    pub fn eval(&self, mu: f64) -> f64 {
        1.0 + mu * (self.h1 + mu * (self.h2 + mu * self.h3))
    }
}

/// Coefficients of `adj(I + gμ) = c0 + c1·μ + c2·μ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjSeries {
    pub c0: Matrix3<f64>,
    pub c1: Matrix3<f64>,
    pub c2: Matrix3<f64>,
}

impl AdjSeries {
    pub fn eval(&self, mu: f64) -> Matrix3<f64> {
        self.c0 + self.c1 * mu + self.c2 * (mu * mu)
    }
}

/// Truncated series `1/det(I + gμ) ≈ Σ_{κ≤K} a_κ μ^κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvDetSeries {
    pub coeffs: Vec<f64>,
}

impl InvDetSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, mu: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * mu + a)
    }
}

/// Outcome of [`validity_check`]; `first_violation` holds the first sampled μ
/// where the determinant leaves `(0, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    pub valid: bool,
    pub first_violation: Option<f64>,
}

pub const DEFAULT_VALIDITY_SAMPLES: usize = 101;

pub fn adjugate3(g: &Matrix3<f64>) -> Matrix3<f64> {
    let m = |i: usize, j: usize| g[(i, j)];
    // transpose of the cofactor matrix
    Matrix3::new(
        m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1),
        m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2),
        m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1),
        m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2),
        m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0),
        m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2),
        m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0),
        m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1),
        m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
    )
}

fn det3(g: &Matrix3<f64>) -> f64 {
    g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
        - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
        + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)])
}

/// `(tr g, tr adj g, det g)`.
pub fn det_poly_coeffs(g: &MorphGradient) -> DetCoeffs {
    DetCoeffs { h1: g.0.trace(), h2: adjugate3(&g.0).trace(), h3: det3(&g.0) }
}

/// `c0 = I`, `c1 = tr(g)·I − g`, `c2 = adj(g)`.
pub fn adj_series_coeffs(g: &MorphGradient) -> AdjSeries {
    AdjSeries {
        c0: Matrix3::identity(),
        c1: Matrix3::identity() * g.0.trace() - g.0,
        c2: adjugate3(&g.0),
    }
}

/// Coefficients `a_0 … a_K` of the reciprocal determinant.
///
/// `a_κ = Σ_{σ ∈ S_κ} (σ1+σ2+σ3)!/(σ1!σ2!σ3!) (−h1)^σ1 (−h2)^σ2 (−h3)^σ3`
/// with `S_κ = {σ : σ1 + 2σ2 + 3σ3 = κ}`. The alternating sum cancels
/// heavily once `|h|` approaches 1, so terms are accumulated in
/// double-double arithmetic and rounded once.
pub fn inv_det_series(h: &DetCoeffs, order: usize) -> InvDetSeries {
    let neg = [TwoFloat::from(-h.h1), TwoFloat::from(-h.h2), TwoFloat::from(-h.h3)];
    let pow = |x: TwoFloat, k: usize| (0..k).fold(TwoFloat::from(1.0), |acc, _| acc * x);
    let coeffs = (0..=order)
        .map(|kappa| {
            let mut a = TwoFloat::from(0.0);
            for s3 in 0..=kappa / 3 {
                let rest = kappa - 3 * s3;
                for s2 in 0..=rest / 2 {
                    let s1 = rest - 2 * s2;
                    let weight = TwoFloat::from(multinomial3(s1 as u64, s2 as u64, s3 as u64) as f64);
                    a += weight * pow(neg[0], s1) * pow(neg[1], s2) * pow(neg[2], s3);
                }
            }
            f64::from(a)
        })
        .collect();
    InvDetSeries { coeffs }
}

/// `(s1+s2+s3)! / (s1! s2! s3!)` in exact integer arithmetic.
pub fn multinomial3(s1: u64, s2: u64, s3: u64) -> u128 {
    let binom = |n: u64, k: u64| -> u128 {
        let k = k.min(n - k);
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    };
    binom(s1 + s2 + s3, s1) * binom(s2 + s3, s2)
}

/// Samples `det(I + gμ)` uniformly over `[lo, hi]` and checks `0 < det < 2`.
///
/// # Panics
/// If `samples < 2`.
pub fn validity_check(g: &MorphGradient, mu_range: (f64, f64), samples: usize) -> ValidityReport {
    assert!(samples >= 2, "validity_check needs at least two samples");
    let h = det_poly_coeffs(g);
    let (lo, hi) = mu_range;
    for k in 0..samples {
        let mu = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let d = h.eval(mu);
        if !(d > 0.0 && d < 2.0) {
            return ValidityReport { valid: false, first_violation: Some(mu) };
        }
    }
    ValidityReport { valid: true, first_violation: None }
}
