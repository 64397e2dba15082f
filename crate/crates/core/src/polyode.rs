//! Polynomial first-order systems `ẏ = A(y)` and their assembly from
//! second-order mechanical models, with forcing and parameter augmentation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::kronalg::{DenseMatrix, KronError, Monomial};

const SYMMETRY_RTOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("row {row} outside system of dimension {dim}")]
    RowOutOfRange { row: usize, dim: usize },
    #[error("monomial {monomial} references a variable beyond dimension {dim}")]
    VariableOutOfRange { monomial: String, dim: usize },
    #[error("{0}")]
    Monomial(#[from] KronError),
    #[error("{what} has shape {rows}x{cols}, expected {expected}x{expected}")]
    Shape { what: &'static str, rows: usize, cols: usize, expected: usize },
    #[error("{what} has length {len}, expected {expected}")]
    Length { what: &'static str, len: usize, expected: usize },
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("mass matrix is singular or not positive definite")]
    SingularMass,
    #[error("forcing frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error("{0}")]
    Invalid(String),
}

/// First-order polynomial vector field stored per canonical monomial.
///
/// Each canonical monomial `ν` over the state variables `1..=n` owns a
/// sparse column of row coefficients; `A(y)_i = Σ_ν a_{i,ν} y^ν`. Rows are
/// 0-based, monomial entries 1-based. There is no constant term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolySystem {
    dim: usize,
    terms: BTreeMap<Monomial, BTreeMap<usize, Complex64>>,
}

impl PolySystem {
    pub fn new(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `coeff·y^tuple` to `row`; permuted tuples accumulate on the
    /// canonical key.
    pub fn add_term(&mut self, row: usize, tuple: &[usize], coeff: Complex64) -> Result<(), PolyError> {
        if row >= self.dim {
            return Err(PolyError::RowOutOfRange { row, dim: self.dim });
        }
        let (canon, _) = Monomial::new(tuple.to_vec())?.canonical();
        if canon.max_index() > self.dim {
            return Err(PolyError::VariableOutOfRange { monomial: canon.key(), dim: self.dim });
        }
        *self.terms.entry(canon).or_default().entry(row).or_insert(Complex64::new(0.0, 0.0)) += coeff;
        Ok(())
    }

    pub fn add_real_term(&mut self, row: usize, tuple: &[usize], coeff: f64) -> Result<(), PolyError> {
        self.add_term(row, tuple, Complex64::new(coeff, 0.0))
    }

    /// Coefficient of `y^ν` in row `row` (ν canonicalized first).
    pub fn coefficient(&self, row: usize, nu: &Monomial) -> Complex64 {
        let (canon, _) = nu.canonical();
        self.terms.get(&canon).and_then(|col| col.get(&row)).copied().unwrap_or_default()
    }

    /// All canonical monomials with their sparse row columns.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BTreeMap<usize, Complex64>)> {
        self.terms.iter()
    }

    pub fn terms_of_order(&self, order: usize) -> impl Iterator<Item = (&Monomial, &BTreeMap<usize, Complex64>)> {
        self.terms.iter().filter(move |(m, _)| m.order() == order)
    }

    pub fn has_order(&self, order: usize) -> bool {
        self.terms_of_order(order).next().is_some()
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Monomial::order).max().unwrap_or(0)
    }

    pub fn term_count(&self) -> usize {
        self.terms.values().map(BTreeMap::len).sum()
    }

    /// `A(y)` evaluated monomial by monomial.
    pub fn evaluate(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.dim, "state length must equal system dimension");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (nu, col) in &self.terms {
            let v = nu.eval(y);
            for (&row, &c) in col {
                out[row] += c * v;
            }
        }
        out
    }

    /// Dense linear part `A₁`.
    pub fn linear_matrix(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.dim.max(1), self.dim.max(1));
        for (nu, col) in self.terms_of_order(1) {
            let j = nu.indices()[0] - 1;
            for (&row, &c) in col {
                a[(row, j)] += c;
            }
        }
        a
    }

    /// Copy of the system embedded in a larger state space.
    fn widened(&self, dim: usize) -> Self {
        debug_assert!(dim >= self.dim);
        Self { dim, terms: self.terms.clone() }
    }
}

/// A sparse polynomial force term `value·x_{i1}⋯x_{ik}` acting on `row`
/// (0-based DOF); `indices` are 1-based displacement DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTerm {
    pub row: usize,
    pub indices: Vec<usize>,
    pub value: f64,
}

/// Harmonic forcing `vector·cos(Ωt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub vector: Vec<f64>,
    pub omega: Option<f64>,
}

/// First-order sensitivities of the mechanical model to the geometry parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterTerms {
    pub stiffness: Option<DMatrix<f64>>,
    pub quadratic: Vec<ForceTerm>,
    pub cubic: Vec<ForceTerm>,
}

impl ParameterTerms {
    pub fn is_empty(&self) -> bool {
        self.stiffness.is_none() && self.quadratic.is_empty() && self.cubic.is_empty()
    }
}

/// `M ẍ + C ẋ + K x + g(x) + μ (K₁ x + g₁(x)) = F cos(Ωt)` with Rayleigh
/// damping `C = αM + βK` (and `βK₁` for the parameter part).
#[derive(Debug, Clone, PartialEq)]
pub struct MechSystem {
    pub n2: usize,
    pub mass: DMatrix<f64>,
    pub damping_alpha: f64,
    pub damping_beta: f64,
    pub stiffness: DMatrix<f64>,
    pub quadratic: Vec<ForceTerm>,
    pub cubic: Vec<ForceTerm>,
    pub forcing: Option<Forcing>,
    pub parameter: Option<ParameterTerms>,
}

impl MechSystem {
    /// Undamped system with no nonlinear, forcing or parameter terms.
    pub fn linear(mass: DMatrix<f64>, stiffness: DMatrix<f64>) -> Self {
        Self {
            n2: mass.nrows(),
            mass,
            damping_alpha: 0.0,
            damping_beta: 0.0,
            stiffness,
            quadratic: Vec::new(),
            cubic: Vec::new(),
            forcing: None,
            parameter: None,
        }
    }

    /// `ẍ + ω²x + γx³ = 0`
    pub fn duffing(omega: f64, gamma: f64) -> Self {
        let mut m = Self::linear(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, omega * omega));
        m.cubic.push(ForceTerm { row: 0, indices: vec![1, 1, 1], value: gamma });
        m
    }

    pub fn damping(&self) -> DMatrix<f64> {
        &self.mass * self.damping_alpha + &self.stiffness * self.damping_beta
    }

    pub fn validate(&self) -> Result<(), PolyError> {
        let n = self.n2;
        if n == 0 {
            return Err(PolyError::Invalid("n2 must be at least 1".into()));
        }
        check_square("mass", &self.mass, n)?;
        check_square("stiffness", &self.stiffness, n)?;
        check_symmetric("mass", &self.mass)?;
        check_symmetric("stiffness", &self.stiffness)?;
        if self.mass.clone().cholesky().is_none() {
            return Err(PolyError::SingularMass);
        }
        for t in self.quadratic.iter().chain(&self.cubic) {
            check_force_term(t, n)?;
        }
        if let Some(f) = &self.forcing {
            if f.vector.len() != n {
                return Err(PolyError::Length { what: "forcing vector", len: f.vector.len(), expected: n });
            }
            if let Some(w) = f.omega {
                if !(w > 0.0) {
                    return Err(PolyError::BadFrequency(w));
                }
            }
        }
        if let Some(p) = &self.parameter {
            if let Some(k1) = &p.stiffness {
                check_square("parameter stiffness", k1, n)?;
                check_symmetric("parameter stiffness", k1)?;
            }
            for t in p.quadratic.iter().chain(&p.cubic) {
                check_force_term(t, n)?;
            }
        }
        Ok(())
    }

    fn mass_inverse(&self) -> Result<DMatrix<f64>, PolyError> {
        Ok(self.mass.clone().cholesky().ok_or(PolyError::SingularMass)?.inverse())
    }
}

fn check_square(what: &'static str, m: &DMatrix<f64>, n: usize) -> Result<(), PolyError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(PolyError::Shape { what, rows: m.nrows(), cols: m.ncols(), expected: n });
    }
    Ok(())
}

fn check_symmetric(what: &'static str, m: &DMatrix<f64>) -> Result<(), PolyError> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_RTOL * scale {
        return Err(PolyError::NotSymmetric(what));
    }
    Ok(())
}

fn check_force_term(t: &ForceTerm, n: usize) -> Result<(), PolyError> {
    if t.row >= n {
        return Err(PolyError::RowOutOfRange { row: t.row, dim: n });
    }
    let m = Monomial::new(t.indices.clone())?;
    if m.max_index() > n {
        return Err(PolyError::VariableOutOfRange { monomial: m.key(), dim: n });
    }
    Ok(())
}

/// Indices (0-based) of the auxiliary states added by augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentationInfo {
    /// `(c, s)` states of the harmonic forcing.
    pub forcing_indices: Option<(usize, usize)>,
    pub parameter_index: Option<usize>,
    pub forcing_frequency: Option<f64>,
}

impl AugmentationInfo {
    pub fn is_empty(&self) -> bool {
        self.forcing_indices.is_none() && self.parameter_index.is_none()
    }

    pub fn merge(self, other: AugmentationInfo) -> AugmentationInfo {
        AugmentationInfo {
            forcing_indices: other.forcing_indices.or(self.forcing_indices),
            parameter_index: other.parameter_index.or(self.parameter_index),
            forcing_frequency: other.forcing_frequency.or(self.forcing_frequency),
        }
    }

    /// All auxiliary state indices.
    pub fn auxiliary_states(&self) -> Vec<usize> {
        let mut v = Vec::new();
        if let Some((c, s)) = self.forcing_indices {
            v.extend([c, s]);
        }
        v.extend(self.parameter_index);
        v
    }
}

/// Sensitivity terms `(row, ν) → coefficient` entering with one factor of μ.
pub type Sensitivity = BTreeMap<(usize, Monomial), Complex64>;

/// Recasts `M ẍ + C ẋ + K x + g(x) = 0` as `ẏ = A(y)` with `y = (x, ẋ)`.
pub fn second_to_first_order(m: &MechSystem) -> Result<PolySystem, PolyError> {
    m.validate()?;
    let n2 = m.n2;
    let minv = m.mass_inverse()?;
    let mk = &minv * &m.stiffness;
    let mc = &minv * m.damping();
    let mut sys = PolySystem::new(2 * n2);
    for i in 0..n2 {
        sys.add_real_term(i, &[i + n2 + 1], 1.0)?;
        for j in 0..n2 {
            if mk[(i, j)] != 0.0 {
                sys.add_real_term(i + n2, &[j + 1], -mk[(i, j)])?;
            }
            if mc[(i, j)] != 0.0 {
                sys.add_real_term(i + n2, &[j + n2 + 1], -mc[(i, j)])?;
            }
        }
    }
    for t in m.quadratic.iter().chain(&m.cubic) {
        for i in 0..n2 {
            let w = minv[(i, t.row)];
            if w != 0.0 {
                sys.add_real_term(i + n2, &t.indices, -w * t.value)?;
            }
        }
    }
    Ok(sys)
}

/// Appends harmonic forcing states `(c, s)` with `ċ = −Ωs`, `ṡ = Ωc` and
/// couples `amplitude·c` into the original rows.
pub fn augment_forcing(
    sys: &PolySystem,
    amplitude: &[Complex64],
    omega: f64,
) -> Result<(PolySystem, AugmentationInfo), PolyError> {
    if !(omega > 0.0) {
        return Err(PolyError::BadFrequency(omega));
    }
    let n = sys.dim();
    if amplitude.len() != n {
        return Err(PolyError::Length { what: "forcing amplitude", len: amplitude.len(), expected: n });
    }
    let (c, s) = (n, n + 1);
    let mut out = sys.widened(n + 2);
    out.add_real_term(c, &[s + 1], -omega)?;
    out.add_real_term(s, &[c + 1], omega)?;
    for (row, &a) in amplitude.iter().enumerate() {
        if a != Complex64::new(0.0, 0.0) {
            out.add_term(row, &[c + 1], a)?;
        }
    }
    let info = AugmentationInfo { forcing_indices: Some((c, s)), parameter_index: None, forcing_frequency: Some(omega) };
    Ok((out, info))
}

/// Appends the parameter state μ with `μ̇ = 0`; each sensitivity term
/// `(row, ν)` becomes the term `(row, ν ∪ {μ})`.
pub fn augment_parameter(sys: &PolySystem, sensitivity: &Sensitivity) -> Result<(PolySystem, AugmentationInfo), PolyError> {
    let n = sys.dim();
    let mu = n;
    let mut out = sys.widened(n + 1);
    for ((row, nu), &coeff) in sensitivity {
        if *row >= n {
            return Err(PolyError::RowOutOfRange { row: *row, dim: n });
        }
        if nu.max_index() > n {
            return Err(PolyError::VariableOutOfRange { monomial: nu.key(), dim: n });
        }
        let mut tuple = nu.indices().to_vec();
        tuple.push(mu + 1);
        out.add_term(*row, &tuple, coeff)?;
    }
    Ok((out, AugmentationInfo { parameter_index: Some(mu), ..Default::default() }))
}

/// First-order sensitivity terms of a mechanical model, over the state `(x, ẋ)`.
pub fn mech_sensitivity(m: &MechSystem) -> Result<Sensitivity, PolyError> {
    let mut out = Sensitivity::new();
    let Some(p) = &m.parameter else { return Ok(out) };
    let n2 = m.n2;
    let minv = m.mass_inverse()?;
    let mut push = |row: usize, tuple: Vec<usize>, v: f64| -> Result<(), PolyError> {
        if v != 0.0 {
            let (canon, _) = Monomial::new(tuple)?.canonical();
            *out.entry((row, canon)).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(v, 0.0);
        }
        Ok(())
    };
    if let Some(k1) = &p.stiffness {
        let mk = &minv * k1;
        for i in 0..n2 {
            for j in 0..n2 {
                push(i + n2, vec![j + 1], -mk[(i, j)])?;
                push(i + n2, vec![j + n2 + 1], -m.damping_beta * mk[(i, j)])?;
            }
        }
    }
    for t in p.quadratic.iter().chain(&p.cubic) {
        for i in 0..n2 {
            push(i + n2, t.indices.clone(), -minv[(i, t.row)] * t.value)?;
        }
    }
    Ok(out)
}

/// Full pipeline: first-order form, then forcing (if a nonzero forcing
/// vector and a frequency are available), then the parameter (if any
/// parameter terms exist).
pub fn mech_to_parametric_system(m: &MechSystem, omega: Option<f64>) -> Result<(PolySystem, AugmentationInfo), PolyError> {
    let mut sys = second_to_first_order(m)?;
    let mut info = AugmentationInfo::default();
    if let Some(f) = &m.forcing {
        let omega = omega.or(f.omega);
        if let (true, Some(w)) = (f.vector.iter().any(|&x| x != 0.0), omega) {
            let minv = m.mass_inverse()?;
            let force = DMatrix::from_column_slice(m.n2, 1, &f.vector);
            let accel = &minv * force;
            let mut amplitude = vec![Complex64::new(0.0, 0.0); sys.dim()];
            for i in 0..m.n2 {
                amplitude[i + m.n2] = Complex64::new(accel[i], 0.0);
            }
            let (s, fi) = augment_forcing(&sys, &amplitude, w)?;
            sys = s;
            info = info.merge(fi);
        }
    }
    if m.parameter.as_ref().is_some_and(|p| !p.is_empty()) {
        let sens = mech_sensitivity(m)?;
        let (s, pi) = augment_parameter(&sys, &sens)?;
        sys = s;
        info = info.merge(pi);
    }
    Ok((sys, info))
}
