//! Fixed-step RK4 integration of the full system and its reduced model from
//! matched initial conditions.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::manifold::{rom_evaluate, rom_map, ManifoldError, ManifoldExpansion, ReducedDynamics};
use crate::polyode::PolySystem;

/// Norm growth beyond this factor of the initial norm counts as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("integration became unstable at t = {t}: state norm {norm:e}")]
    Unstable { t: f64, norm: f64 },
    #[error("invalid simulation settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
}

impl SimOptions {
    pub fn validate(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Settings(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Settings(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        Ok((self.t_end / self.dt).round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub fom: Vec<Vec<f64>>,
    pub rom: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn error_norms(&self) -> Vec<f64> {
        self.fom.iter().zip(&self.rom).map(|(a, b)| dist(a, b)).collect()
    }

    /// `max_t ‖y_fom − y_rom‖ / max_t ‖y_fom‖`.
    pub fn max_relative_error(&self) -> f64 {
        let err = self.error_norms().into_iter().fold(0.0, f64::max);
        let scale = self.fom.iter().map(|y| norm(y)).fold(0.0, f64::max);
        if scale == 0.0 {
            err
        } else {
            err / scale
        }
    }

    /// CSV with columns `t, y_fom_1…, y_rom_1…, err_2norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.fom.first().map_or(0, Vec::len);
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("y_fom_{i}")));
        header.extend((1..=n).map(|i| format!("y_rom_{i}")));
        header.push("err_2norm".into());
        wtr.write_record(&header)?;
        for ((t, a), b) in self.t.iter().zip(&self.fom).zip(&self.rom) {
            let mut row = vec![t.to_string()];
            row.extend(a.iter().map(f64::to_string));
            row.extend(b.iter().map(f64::to_string));
            row.push(dist(a, b).to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &[Complex64], h: f64, k: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(rhs: &F, y: &[Complex64], dt: f64) -> Result<Vec<Complex64>, SimError>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>, SimError>,
{
    let k1 = rhs(y)?;
    let k2 = rhs(&axpy(y, 0.5 * dt, &k1))?;
    let k3 = rhs(&axpy(y, 0.5 * dt, &k2))?;
    let k4 = rhs(&axpy(y, dt, &k3))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect())
}

fn real_parts(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|x| x.re).collect()
}

/// Integrates `ẏ = A(y)` from `y₀ = W(z₀)` and `ż = f(z)` from `z₀`, recording
/// `Re y` and `Re W(z)` every `stride` steps (and at the final step).
pub fn simulate(
    sys: &PolySystem,
    w: &ManifoldExpansion,
    f: &ReducedDynamics,
    z0: &[Complex64],
    opts: &SimOptions,
    stride: usize,
) -> Result<Trajectory, SimError> {
    let steps = opts.validate()?;
    if sys.dim() != w.n() {
        return Err(SimError::Settings(format!("system has {} states, manifold has {}", sys.dim(), w.n())));
    }
    let stride = stride.max(1);
    let mut y = rom_map(w, z0)?;
    let mut z = z0.to_vec();
    let limit = BLOWUP_FACTOR * cnorm(&y).max(f64::MIN_POSITIVE);
    let fom_rhs = |v: &[Complex64]| Ok(sys.evaluate(v));
    let rom_rhs = |v: &[Complex64]| Ok(rom_evaluate(f, v)?);

    let mut traj = Trajectory { t: Vec::new(), fom: Vec::new(), rom: Vec::new() };
    let mut record = |t: f64, y: &[Complex64], z: &[Complex64]| -> Result<(), SimError> {
        traj.t.push(t);
        traj.fom.push(real_parts(y));
        traj.rom.push(real_parts(&rom_map(w, z)?));
        Ok(())
    };
    record(0.0, &y, &z)?;
    for step in 1..=steps {
        y = rk4_step(&fom_rhs, &y, opts.dt)?;
        z = rk4_step(&rom_rhs, &z, opts.dt)?;
        let t = step as f64 * opts.dt;
        for v in [&y, &rom_map(w, &z)?] {
            let nv = cnorm(v);
            if !(nv <= limit) {
                return Err(SimError::Unstable { t, norm: nv });
            }
        }
        if step % stride == 0 || step == steps {
            record(t, &y, &z)?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{reduce, ReduceOptions};

    #[test]
    fn rk4_matches_exponential() {
        let lambda = Complex64::new(-0.3, 2.0);
        let rhs = |v: &[Complex64]| Ok(vec![v[0] * lambda]);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let dt = 1e-3;
        for _ in 0..1000 {
            y = rk4_step(&rhs, &y, dt).unwrap();
        }
        assert!((y[0] - lambda.exp()).norm() < 1e-12);
    }

    #[test]
    fn linear_oscillator_stays_on_subspace() {
        let mut sys = PolySystem::new(2);
        sys.add_real_term(0, &[2], 1.0).unwrap();
        sys.add_real_term(1, &[1], -1.0).unwrap();
        let red = reduce(&sys, &[0, 1], &ReduceOptions { max_order: 3, ..Default::default() }).unwrap();
        let z0 = [Complex64::new(0.1, 0.0); 2];
        let period = 2.0 * std::f64::consts::PI;
        let opts = SimOptions { t_end: 100.0 * period, dt: period / 200.0 };
        let traj = simulate(&sys, &red.expansion, &red.dynamics, &z0, &opts, 50).unwrap();
        assert!(traj.max_relative_error() < 1e-10, "{}", traj.max_relative_error());
    }

    #[test]
    fn blowup_is_reported() {
        let mut sys = PolySystem::new(1);
        sys.add_real_term(0, &[1], 1.0).unwrap();
        sys.add_real_term(0, &[1, 1], 1.0).unwrap();
        let red = reduce(&sys, &[0], &ReduceOptions { max_order: 2, ..Default::default() }).unwrap();
        let opts = SimOptions { t_end: 50.0, dt: 0.01 };
        let err = simulate(&sys, &red.expansion, &red.dynamics, &[Complex64::new(0.5, 0.0)], &opts, 1).unwrap_err();
        assert!(matches!(err, SimError::Unstable { .. }));
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory { t: vec![0.0], fom: vec![vec![1.0, 2.0]], rom: vec![vec![1.0, 2.0]] };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,y_fom_1,y_fom_2,y_rom_1,y_rom_2,err_2norm");
        assert_eq!(text.lines().nth(1).unwrap(), "0,1,2,1,2,0");
    }
}
