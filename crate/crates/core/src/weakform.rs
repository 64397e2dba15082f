//! Weak-form integrands of the elastodynamic equation of motion at a single
//! material point, at orders μ⁰ and μ¹ of the geometry parameter.
//!
//! Gradients follow the convention `(∇u)_{ij} = ∂u_i/∂x_j`, so a morph with
//! gradient `F = I + gμ` maps `∇u = ∇₀u·F⁻¹` and `dV = det(F)·dV₀`.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geomorph::MorphGradient;

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeakFormError {
    #[error("strain is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("morph determinant {det} is not positive at mu = {mu}")]
    Orientation { mu: f64, det: f64 },
    #[error("invalid elasticity: {0}")]
    Elasticity(String),
    #[error("invalid point state: {0}")]
    State(String),
}

/// Kinematic state at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub grad_u: Matrix3<f64>,
    pub grad_w: Matrix3<f64>,
    pub grad_morph: MorphGradient,
    /// `ü·w`
    pub accel_dot_w: f64,
    pub density: f64,
}

impl PointState {
    pub fn validate(&self) -> Result<(), WeakFormError> {
        let finite = self.grad_u.iter().chain(self.grad_w.iter()).all(|x| x.is_finite())
            && self.grad_morph.is_finite()
            && self.accel_dot_w.is_finite();
        if !finite {
            return Err(WeakFormError::State("non-finite entries".into()));
        }
        if !(self.density > 0.0) {
            return Err(WeakFormError::State(format!("density {} must be positive", self.density)));
        }
        Ok(())
    }
}

/// Isotropic St. Venant–Kirchhoff elasticity given by its Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elasticity {
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

impl Elasticity {
    pub fn new(lame_lambda: f64, lame_mu: f64) -> Result<Self, WeakFormError> {
        if !(lame_mu > 0.0) {
            return Err(WeakFormError::Elasticity(format!("shear modulus {lame_mu} must be positive")));
        }
        if !(lame_lambda + 2.0 / 3.0 * lame_mu > 0.0) {
            return Err(WeakFormError::Elasticity("bulk modulus must be positive".into()));
        }
        Ok(Self { lame_lambda, lame_mu })
    }

    /// `a : 𝒜 : b` for arbitrary (not necessarily symmetric) `a`, `b`.
    pub fn contract(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        self.lame_lambda * a.trace() * b.trace() + 2.0 * self.lame_mu * sym(a).dot(&sym(b))
    }
}

/// Per-row contributions of the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegrandBreakdown {
    pub inertia: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub cubic: f64,
}

impl IntegrandBreakdown {
    pub fn total(&self) -> f64 {
        self.inertia + self.linear + self.quadratic + self.cubic
    }
}

pub fn sym(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// `λ·tr(ε)·I + 2μ·ε`
pub fn elasticity_apply(e: &Elasticity, strain: &Matrix3<f64>) -> Result<Matrix3<f64>, WeakFormError> {
    let asym = (strain - strain.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(WeakFormError::Asymmetric(asym));
    }
    Ok(Matrix3::identity() * (e.lame_lambda * strain.trace()) + strain * (2.0 * e.lame_mu))
}

/// Stress-like contraction `a : 𝒜 : sym(b)` routed through [`elasticity_apply`].
fn ddot(e: &Elasticity, a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let stress = elasticity_apply(e, &sym(b)).expect("sym() output is symmetric");
    a.dot(&stress)
}

/// The three stiffness rows of the equation of motion for given spatial
/// gradients of `u` and `w`.
fn stiffness_rows(e: &Elasticity, gu: &Matrix3<f64>, gw: &Matrix3<f64>) -> (f64, f64, f64) {
    let green = gu.transpose() * gu * 0.5;
    let utw = gu.transpose() * gw;
    let linear = ddot(e, &sym(gu), gw);
    let quadratic = ddot(e, &sym(gu), &utw) + ddot(e, &green, gw);
    let cubic = ddot(e, &green, &utw);
    (linear, quadratic, cubic)
}

/// Order-μ⁰ integrand: the standard equation of motion on the reference domain.
pub fn integrand_mu0(s: &PointState, e: &Elasticity) -> IntegrandBreakdown {
    let (linear, quadratic, cubic) = stiffness_rows(e, &s.grad_u, &s.grad_w);
    IntegrandBreakdown { inertia: s.density * s.accel_dot_w, linear, quadratic, cubic }
}

/// Order-μ¹ integrand: the derivative with respect to μ at μ = 0 of the
/// integrand pulled back to the reference domain.
pub fn integrand_mu1(s: &PointState, e: &Elasticity) -> IntegrandBreakdown {
    let g = &s.grad_morph.0;
    let gt = g.transpose();
    let tr = g.trace();
    let gu = &s.grad_u;
    let gw = &s.grad_w;
    let gut = gu.transpose();
    // C = ∇ᵀu ∇u and E = ∇ᵀu ∇w
    let c = gut * gu;
    let ew = gut * gw;
    let half_c = c * 0.5;
    let sym_u = sym(gu);

    let inertia = s.density * s.accel_dot_w * tr;

    let linear = ddot(e, &sym_u, gw) * tr - (ddot(e, &sym_u, &(gw * g)) + ddot(e, &sym(&(gu * g)), gw));

    let quadratic = (ddot(e, &sym_u, &ew) + ddot(e, &half_c, gw)) * tr
        - (ddot(e, &sym(&(gu * g)), &ew)
            + ddot(e, &sym(&(gt * c)), gw)
            + ddot(e, &sym_u, &(gt * ew))
            + ddot(e, &half_c, &(gw * g))
            + ddot(e, &sym_u, &(ew * g)));

    let cubic = ddot(e, &half_c, &ew) * tr
        - (ddot(e, &sym(&(c * g)), &ew) + ddot(e, &half_c, &(gt * ew)) + ddot(e, &half_c, &(ew * g)));

    IntegrandBreakdown { inertia, linear, quadratic, cubic }
}

/// Full integrand on the morphed domain, evaluated through the change of
/// variables: `∇u = ∇₀u·F⁻¹`, `∇w = ∇₀w·F⁻¹`, scaled by `det F`.
pub fn mapped_integrand(s: &PointState, e: &Elasticity, mu: f64) -> Result<f64, WeakFormError> {
    let f = s.grad_morph.deformation(mu);
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(WeakFormError::Orientation { mu, det });
    }
    let finv = f.try_inverse().ok_or(WeakFormError::Orientation { mu, det })?;
    let gu = s.grad_u * finv;
    let gw = s.grad_w * finv;
    let (linear, quadratic, cubic) = stiffness_rows(e, &gu, &gw);
    Ok(det * (s.density * s.accel_dot_w + linear + quadratic + cubic))
}

/// Central difference of [`mapped_integrand`] at μ = 0.
pub fn mapped_integrand_fd(s: &PointState, e: &Elasticity, step: f64) -> Result<f64, WeakFormError> {
    Ok((mapped_integrand(s, e, step)? - mapped_integrand(s, e, -step)?) / (2.0 * step))
}
