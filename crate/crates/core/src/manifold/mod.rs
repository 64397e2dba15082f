//! Direct parameterization of invariant manifolds in complex normal form.
//!
//! The manifold `y = W(z)` and reduced dynamics `ż = f(z)` are stored one
//! column per canonical monomial: `W(z) = Σ_ν W_ν z^ν` over non-decreasing
//! tuples `ν`, and the columns of non-canonical tuples are zero.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::kronalg::Monomial;

mod homological;
mod recurrence;
mod rom;
mod spectrum;

pub use homological::{assemble_rhs, reduce, solve_monomial, MonomialSolution, ReduceOptions, Reduction, Termination};
pub use recurrence::{gamma_column, sigma, xi_column, GammaColumn, XiColumn};
pub use rom::{backbone_point, invariance_residual, manifold_jacobian, rom_evaluate, rom_map, BackbonePoint};
pub use spectrum::{compute_spectrum, eigendecompose, Spectrum, MAX_EIGENVECTOR_CONDITION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("eigen-decomposition failed: {0}")]
    Spectrum(String),
    #[error("linear part is defective or nearly so (eigenvector condition {condition:e})")]
    Defective { condition: f64 },
    #[error("invalid master selection: {0}")]
    BadMasters(String),
    #[error("master set not closed under conjugation: eigenvalue {eigenvalue} (index {}) lacks its conjugate", index + 1)]
    NotConjugateClosed { index: usize, eigenvalue: Complex64 },
    #[error("coefficient column for monomial ({monomial}) is not available")]
    MissingColumn { monomial: String },
    #[error("order {kappa} outside 1..={p}")]
    InvalidOrder { kappa: usize, p: usize },
    #[error("monomial ({0}) is not canonical")]
    NotCanonical(String),
    #[error("outer resonance at monomial ({}): sigma {} matches slave eigenvalue {} (index {})",
        .0.monomial, .0.sigma, .0.matched_eigenvalue, .0.matched_index + 1)]
    OuterResonance(ResonanceReport),
    #[error("homological equation for monomial ({monomial}) is singular at eigenvalue {eigenvalue}")]
    SingularHomological { monomial: String, eigenvalue: Complex64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `|σ − λ| ≤ rel·max(|σ|, |λ|) + abs` counts as resonant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for ResonanceTolerance {
    fn default() -> Self {
        Self { rel: 1e-3, abs: 1e-8 }
    }
}

impl ResonanceTolerance {
    pub fn threshold(&self, sigma: Complex64, lambda: Complex64) -> f64 {
        self.rel * sigma.norm().max(lambda.norm()) + self.abs
    }

    pub fn is_resonant(&self, sigma: Complex64, lambda: Complex64) -> bool {
        (sigma - lambda).norm() <= self.threshold(sigma, lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    Inner,
    Outer,
}

impl ResonanceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResonanceKind::Inner => "inner",
            ResonanceKind::Outer => "outer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceReport {
    pub monomial: Monomial,
    pub sigma: Complex64,
    pub matched_eigenvalue: Complex64,
    /// 0-based spectral index.
    pub matched_index: usize,
    pub kind: ResonanceKind,
}

/// Manifold coefficients `W_ν` (length-n columns) per canonical monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldExpansion {
    m: usize,
    n: usize,
    columns: BTreeMap<Monomial, Vec<Complex64>>,
}

impl ManifoldExpansion {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n, columns: BTreeMap::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Inserts a column; the monomial must be canonical and over `[m]`.
    pub fn insert(&mut self, nu: Monomial, column: Vec<Complex64>) {
        assert!(nu.is_canonical(), "manifold columns are keyed by canonical monomials");
        assert!(nu.max_index() <= self.m, "monomial index beyond reduced dimension");
        assert_eq!(column.len(), self.n, "manifold column length must equal n");
        self.columns.insert(nu, column);
    }

    /// Column for `ν`; `None` when absent (including every non-canonical tuple).
    pub fn get(&self, nu: &Monomial) -> Option<&[Complex64]> {
        self.columns.get(nu).map(Vec::as_slice)
    }

    pub(crate) fn require(&self, nu: &Monomial) -> Result<&[Complex64], ManifoldError> {
        self.get(nu).ok_or_else(|| ManifoldError::MissingColumn { monomial: nu.key() })
    }

    pub fn columns(&self) -> impl Iterator<Item = (&Monomial, &Vec<Complex64>)> {
        self.columns.iter()
    }

    pub fn max_order(&self) -> usize {
        self.columns.keys().map(Monomial::order).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Reduced-dynamics coefficients `f_ν` (length-m columns) per canonical monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDynamics {
    m: usize,
    columns: BTreeMap<Monomial, Vec<Complex64>>,
}

impl ReducedDynamics {
    pub fn new(m: usize) -> Self {
        Self { m, columns: BTreeMap::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn insert(&mut self, nu: Monomial, column: Vec<Complex64>) {
        assert!(nu.is_canonical(), "reduced-dynamics columns are keyed by canonical monomials");
        assert!(nu.max_index() <= self.m, "monomial index beyond reduced dimension");
        assert_eq!(column.len(), self.m, "reduced column length must equal m");
        self.columns.insert(nu, column);
    }

    pub fn get(&self, nu: &Monomial) -> Option<&[Complex64]> {
        self.columns.get(nu).map(Vec::as_slice)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&Monomial, &Vec<Complex64>)> {
        self.columns.iter()
    }

    /// Columns with at least one nonzero entry.
    pub fn nonzero_columns(&self) -> impl Iterator<Item = (&Monomial, &Vec<Complex64>)> {
        self.columns.iter().filter(|(_, c)| c.iter().any(|x| *x != Complex64::new(0.0, 0.0)))
    }

    pub fn max_order(&self) -> usize {
        self.columns.keys().map(Monomial::order).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_mixes_relative_and_absolute() {
        let tol = ResonanceTolerance::default();
        let i = Complex64::new(0.0, 1.0);
        assert!(tol.is_resonant(i, i));
        assert!(tol.is_resonant(i * 1.0005, i));
        assert!(!tol.is_resonant(i * 1.01, i));
        assert!(tol.is_resonant(Complex64::new(1e-9, 0.0), Complex64::new(0.0, 0.0)));
        let loose = ResonanceTolerance { rel: 0.01, abs: 0.0 };
        assert!(loose.is_resonant(Complex64::new(-0.015, 1.0), Complex64::new(-0.01, 1.0)));
    }

    #[test]
    #[should_panic(expected = "canonical")]
    fn expansion_rejects_non_canonical_keys() {
        let mut w = ManifoldExpansion::new(2, 1);
        w.insert(Monomial::new(vec![2, 1]).unwrap(), vec![Complex64::new(1.0, 0.0)]);
    }
}
