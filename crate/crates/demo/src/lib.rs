//! Browser front end for three reduced-model experiments. Each operation is
//! a plain Rust function returning a serializable result; the
//! `#[wasm_bindgen]` wrappers hand JSON strings to the page.

use num_complex::Complex64;
use serde::Serialize;
use ssmparam::geomorph::{det_poly_coeffs, inv_det_series, validity_check, MorphGradient, DEFAULT_VALIDITY_SAMPLES};
use ssmparam::manifold::{backbone_point, reduce, ManifoldError, ReduceOptions, Reduction, ResonanceTolerance, Termination};
use ssmparam::polyode::{second_to_first_order, MechSystem, PolyError, PolySystem};
use ssmparam::simulate::{simulate, SimError, SimOptions};
use thiserror::Error;
use wasm_bindgen::prelude::*;

/// Longest curve handed to the page.
const MAX_POINTS: usize = 2000;
const MAX_ORDER: usize = 9;
const STEPS_PER_PERIOD: f64 = 400.0;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    System(#[from] PolyError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), DemoError> {
    if cond {
        Ok(())
    } else {
        Err(DemoError::Input(msg.into()))
    }
}

/// `ẍ + 2ζẋ + x + γx³ = 0` in first-order form.
fn duffing(gamma: f64, zeta: f64) -> Result<PolySystem, DemoError> {
    check(gamma.is_finite() && zeta.is_finite(), "parameters must be finite")?;
    check((0.0..0.2).contains(&zeta), "damping ratio must lie in [0, 0.2)")?;
    let mut m = MechSystem::duffing(1.0, gamma);
    m.damping_alpha = 2.0 * zeta;
    Ok(second_to_first_order(&m)?)
}

/// Reduces onto the oscillating pair. The relative tolerance grows with
/// damping so the near-resonant cubic terms stay in the reduced dynamics.
fn reduce_duffing(sys: &PolySystem, zeta: f64, order: usize) -> Result<Reduction, DemoError> {
    check((1..=MAX_ORDER).contains(&order), format!("order must lie in 1..={MAX_ORDER}"))?;
    let tolerance = ResonanceTolerance { rel: 1e-3 + 2.5 * zeta, ..Default::default() };
    let red = reduce(sys, &[0, 1], &ReduceOptions { max_order: order, tolerance, threads: 1 })?;
    if let Termination::OuterResonance { order } = red.termination {
        return Err(DemoError::Input(format!("outer resonance at order {order}")));
    }
    Ok(red)
}

#[derive(Debug, Clone, Serialize)]
pub struct BackboneCurve {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
    pub damping: Vec<f64>,
    /// Single-harmonic balance of the undamped oscillator.
    pub harmonic_balance: Vec<f64>,
}

pub fn backbone_curve(gamma: f64, zeta: f64, order: usize, max_amplitude: f64, samples: usize) -> Result<BackboneCurve, DemoError> {
    check(max_amplitude > 0.0 && max_amplitude.is_finite(), "amplitude must be positive")?;
    check((2..=MAX_POINTS).contains(&samples), format!("samples must lie in 2..={MAX_POINTS}"))?;
    let sys = duffing(gamma, zeta)?;
    let red = reduce_duffing(&sys, zeta, order)?;
    let mut out = BackboneCurve { amplitude: Vec::new(), frequency: Vec::new(), damping: Vec::new(), harmonic_balance: Vec::new() };
    for k in 0..samples {
        let a = max_amplitude * k as f64 / (samples - 1) as f64;
        let p = backbone_point(&red.expansion, &red.dynamics, (0, 1), 0, a)?;
        let hb = 1.0 + 0.75 * gamma * a * a;
        out.amplitude.push(a);
        out.frequency.push(p.frequency);
        out.damping.push(p.damping);
        out.harmonic_balance.push(if hb > 0.0 { hb.sqrt() } else { f64::NAN });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MorphSeries {
    pub mu: Vec<f64>,
    pub exact: Vec<f64>,
    pub series: Vec<f64>,
    pub h: [f64; 3],
    pub coeffs: Vec<f64>,
    pub valid: bool,
}

/// `1/det(I + gμ)` against its truncated power series over `[−μmax, μmax]`.
pub fn morph_series(g: &[f64], order: usize, mu_max: f64, samples: usize) -> Result<MorphSeries, DemoError> {
    check(g.len() == 9, "morph gradient needs 9 entries (row-major)")?;
    check(g.iter().all(|x| x.is_finite()), "morph gradient must be finite")?;
    check(order <= 40, "series order must be at most 40")?;
    check(mu_max > 0.0 && mu_max.is_finite(), "range must be positive")?;
    check((2..=MAX_POINTS).contains(&samples), format!("samples must lie in 2..={MAX_POINTS}"))?;
    let rows = [[g[0], g[1], g[2]], [g[3], g[4], g[5]], [g[6], g[7], g[8]]];
    let morph = MorphGradient::from_rows(rows);
    let h = det_poly_coeffs(&morph);
    let s = inv_det_series(&h, order);
    let mut out = MorphSeries {
        mu: Vec::with_capacity(samples),
        exact: Vec::with_capacity(samples),
        series: Vec::with_capacity(samples),
        h: [h.h1, h.h2, h.h3],
        coeffs: s.coeffs.clone(),
        valid: validity_check(&morph, (-mu_max, mu_max), DEFAULT_VALIDITY_SAMPLES).valid,
    };
    for k in 0..samples {
        let mu = -mu_max + 2.0 * mu_max * k as f64 / (samples - 1) as f64;
        out.mu.push(mu);
        out.exact.push(1.0 / h.eval(mu));
        out.series.push(s.eval(mu));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryComparison {
    pub t: Vec<f64>,
    /// Displacement of the full model.
    pub fom: Vec<f64>,
    /// Displacement predicted by the reduced model.
    pub rom: Vec<f64>,
    pub max_relative_error: f64,
}

/// Full and reduced responses from the same point on the manifold.
pub fn compare_trajectories(gamma: f64, zeta: f64, order: usize, amplitude: f64, periods: f64) -> Result<TrajectoryComparison, DemoError> {
    check(amplitude > 0.0 && amplitude.is_finite(), "amplitude must be positive")?;
    check(periods > 0.0 && periods <= 200.0, "periods must lie in (0, 200]")?;
    let sys = duffing(gamma, zeta)?;
    let red = reduce_duffing(&sys, zeta, order)?;
    let period = 2.0 * std::f64::consts::PI;
    let opts = SimOptions { t_end: periods * period, dt: period / STEPS_PER_PERIOD };
    let steps = (periods * STEPS_PER_PERIOD).ceil() as usize;
    let stride = steps.div_ceil(MAX_POINTS).max(1);
    let z0 = [Complex64::new(amplitude, 0.0); 2];
    let traj = simulate(&sys, &red.expansion, &red.dynamics, &z0, &opts, stride)?;
    Ok(TrajectoryComparison {
        max_relative_error: traj.max_relative_error(),
        fom: traj.fom.iter().map(|y| y[0]).collect(),
        rom: traj.rom.iter().map(|y| y[0]).collect(),
        t: traj.t,
    })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn backbone(gamma: f64, zeta: f64, order: usize, max_amplitude: f64, samples: usize) -> Result<String, JsError> {
    to_js(backbone_curve(gamma, zeta, order, max_amplitude, samples))
}

#[wasm_bindgen]
pub fn inverse_determinant(g: &[f64], order: usize, mu_max: f64, samples: usize) -> Result<String, JsError> {
    to_js(morph_series(g, order, mu_max, samples))
}

#[wasm_bindgen]
pub fn trajectories(gamma: f64, zeta: f64, order: usize, amplitude: f64, periods: f64) -> Result<String, JsError> {
    to_js(compare_trajectories(gamma, zeta, order, amplitude, periods))
}
