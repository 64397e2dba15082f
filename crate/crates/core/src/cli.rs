//! Batch driver behind the `ssmparam` binary.
//!
//! Exit codes: 0 success, 2 input error, 3 outer resonance, 4 integration failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use num_complex::Complex64;

use crate::geomorph::{adj_series_coeffs, det_poly_coeffs, inv_det_series, validity_check, MorphGradient, DEFAULT_VALIDITY_SAMPLES};
use crate::io::{matrix_rows, parse_expand, parse_integrand, parse_system_file, read_json, ExpandOutput, RomRecord, SystemFile};
use crate::manifold::{
    compute_spectrum, eigendecompose, reduce, ManifoldError, ReduceOptions, Reduction, ResonanceTolerance, Spectrum, Termination,
};
use crate::polyode::{mech_to_parametric_system, AugmentationInfo, PolySystem};
use crate::simulate::{simulate, SimError, SimOptions};
use crate::weakform::{integrand_mu0, integrand_mu1, mapped_integrand_fd};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUTER_RESONANCE: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

/// Finite-difference step of the integrand self-check.
pub const FD_STEP: f64 = 1e-5;
/// Default parameter interval for the orientation check of `expand`.
pub const DEFAULT_MU_RANGE: [f64; 2] = [-1.0, 1.0];
pub const DEFAULT_PERIODS: f64 = 50.0;
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Reduce,
    Expand,
    Integrand,
    Simulate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub input: PathBuf,
    pub output: PathBuf,
    pub order: usize,
    /// 1-based spectral indices.
    pub masters: Option<Vec<usize>>,
    pub tolerance: ResonanceTolerance,
    pub omega: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub amplitude: f64,
    /// Parameter value for simulations of parametric systems.
    pub mu: f64,
    /// Reduction file for `simulate`; reduced in-process when absent.
    pub rom: Option<PathBuf>,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand, input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            subcommand,
            input: input.into(),
            output: output.into(),
            order: 3,
            masters: None,
            tolerance: ResonanceTolerance::default(),
            omega: None,
            t_end: None,
            dt: None,
            amplitude: 0.01,
            mu: 0.0,
            rom: None,
            threads: 1,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.order == 0 {
            return Err(anyhow!("order must be at least 1"));
        }
        let ResonanceTolerance { rel, abs } = self.tolerance;
        if !(rel > 0.0 && abs > 0.0) {
            return Err(anyhow!("tolerances must be positive (rtol = {rel}, atol = {abs})"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(anyhow!("dt must be positive, got {dt}"));
            }
        }
        if let Some(m) = &self.masters {
            if m.contains(&0) {
                return Err(anyhow!("master indices are 1-based"));
            }
        }
        Ok(())
    }
}

struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: EXIT_INPUT, error }
    }
}

impl From<crate::io::IoError> for Failure {
    fn from(error: crate::io::IoError) -> Self {
        Failure { code: EXIT_INPUT, error: error.into() }
    }
}

type Outcome = Result<i32, Failure>;

pub fn run(cfg: &RunConfig) -> i32 {
    let result = cfg.validate().map_err(Failure::from).and_then(|()| match cfg.subcommand {
        Subcommand::Reduce => reduce_cmd(cfg),
        Subcommand::Expand => expand_cmd(cfg),
        Subcommand::Integrand => integrand_cmd(cfg),
        Subcommand::Simulate => simulate_cmd(cfg),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn run_reduce(cfg: &RunConfig) -> i32 {
    run(&RunConfig { subcommand: Subcommand::Reduce, ..cfg.clone() })
}

pub fn run_expand(cfg: &RunConfig) -> i32 {
    run(&RunConfig { subcommand: Subcommand::Expand, ..cfg.clone() })
}

pub fn run_integrand(cfg: &RunConfig) -> i32 {
    run(&RunConfig { subcommand: Subcommand::Integrand, ..cfg.clone() })
}

pub fn run_simulate(cfg: &RunConfig) -> i32 {
    run(&RunConfig { subcommand: Subcommand::Simulate, ..cfg.clone() })
}

/// First-order system assembled from the input file.
pub fn load_system(path: &Path, omega: Option<f64>) -> anyhow::Result<(PolySystem, AugmentationInfo)> {
    let parsed = parse_system_file(path).with_context(|| format!("reading system {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(match parsed.system {
        SystemFile::Mechanical(m) => mech_to_parametric_system(&m, omega)?,
        SystemFile::Polynomial(p) => (p, AugmentationInfo::default()),
    })
}

/// 0-based master indices: the requested ones (or the slowest non-auxiliary
/// mode together with its conjugate), followed by every mode living on
/// forcing or parameter states.
pub fn select_masters(spec: &Spectrum, info: &AugmentationInfo, requested: Option<&[usize]>) -> Vec<usize> {
    let aux = spec.modes_on_states(&info.auxiliary_states());
    let mut masters: Vec<usize> = match requested {
        Some(r) => r.iter().map(|k| k - 1).collect(),
        None => {
            let mut internal = (0..spec.n()).filter(|k| !aux.contains(k));
            match internal.next() {
                Some(k) => {
                    let lambda = spec.eigenvalues[k];
                    let mut v = vec![k];
                    if lambda.im != 0.0 {
                        v.extend((0..spec.n()).find(|&j| j != k && spec.eigenvalues[j] == lambda.conj()));
                    }
                    v
                }
                None => Vec::new(),
            }
        }
    };
    for k in aux {
        if !masters.contains(&k) {
            masters.push(k);
        }
    }
    masters
}

fn manifold_failure(e: ManifoldError) -> Failure {
    let code = match e {
        ManifoldError::OuterResonance(_) => EXIT_OUTER_RESONANCE,
        _ => EXIT_INPUT,
    };
    Failure { code, error: e.into() }
}

fn reduce_system(cfg: &RunConfig, sys: &PolySystem, info: &AugmentationInfo) -> Result<Reduction, Failure> {
    let spec = eigendecompose(&sys.linear_matrix()).map_err(manifold_failure)?;
    let masters = select_masters(&spec, info, cfg.masters.as_deref());
    let opts = ReduceOptions { max_order: cfg.order, tolerance: cfg.tolerance, threads: cfg.threads };
    reduce(sys, &masters, &opts).map_err(manifold_failure)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn reduce_cmd(cfg: &RunConfig) -> Outcome {
    let (sys, info) = load_system(&cfg.input, cfg.omega)?;
    let red = reduce_system(cfg, &sys, &info)?;
    let record = RomRecord::from_reduction(&red);
    write_json(&cfg.output, &record)?;
    let masters: Vec<String> = record.masters.iter().map(usize::to_string).collect();
    println!(
        "reduced {} states onto masters [{}]: {} manifold columns up to order {}",
        sys.dim(),
        masters.join(","),
        red.expansion.len(),
        red.expansion.max_order()
    );
    match red.termination {
        Termination::Complete => Ok(EXIT_SUCCESS),
        Termination::OuterResonance { order } => {
            for r in red.outer_resonances() {
                eprintln!(
                    "outer resonance at order {order}: monomial ({}) sigma {} matches eigenvalue {} (index {})",
                    r.monomial,
                    r.sigma,
                    r.matched_eigenvalue,
                    r.matched_index + 1
                );
            }
            Ok(EXIT_OUTER_RESONANCE)
        }
    }
}

fn expand_cmd(cfg: &RunConfig) -> Outcome {
    let input = parse_expand(read_json(&cfg.input)?)?;
    let g = MorphGradient::from_rows(input.morph_gradient);
    let h = det_poly_coeffs(&g);
    let adj = adj_series_coeffs(&g);
    let a = inv_det_series(&h, input.order);
    let [lo, hi] = input.mu_range.unwrap_or(DEFAULT_MU_RANGE);
    let validity = validity_check(&g, (lo, hi), DEFAULT_VALIDITY_SAMPLES);
    let out = ExpandOutput {
        h: [h.h1, h.h2, h.h3],
        adj: [matrix_rows(&adj.c0), matrix_rows(&adj.c1), matrix_rows(&adj.c2)],
        a: a.coeffs,
        valid_range_check: validity.valid,
    };
    write_json(&cfg.output, &out)?;
    if let Some(mu) = validity.first_violation {
        eprintln!("warning: det(I + g mu) <= 0 at mu = {mu}");
    }
    Ok(EXIT_SUCCESS)
}

/// Header of the `integrand` CSV.
pub const INTEGRAND_COLUMNS: [&str; 10] = [
    "point",
    "mu0_inertia",
    "mu0_linear",
    "mu0_quadratic",
    "mu0_cubic",
    "mu1_inertia",
    "mu1_linear",
    "mu1_quadratic",
    "mu1_cubic",
    "fd_check",
];

fn integrand_cmd(cfg: &RunConfig) -> Outcome {
    let (e, points) = parse_integrand(read_json(&cfg.input)?)?;
    let file = File::create(&cfg.output).with_context(|| format!("writing {}", cfg.output.display()))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    wtr.write_record(INTEGRAND_COLUMNS).map_err(anyhow::Error::from)?;
    let mut worst: f64 = 0.0;
    for (i, s) in points.iter().enumerate() {
        let b0 = integrand_mu0(s, &e);
        let b1 = integrand_mu1(s, &e);
        let fd = mapped_integrand_fd(s, &e, FD_STEP).with_context(|| format!("point {}", i + 1))?;
        let total = b1.total();
        let scale = total.abs().max(fd.abs());
        let check = if scale == 0.0 { 0.0 } else { (fd - total).abs() / scale };
        worst = worst.max(check);
        let mut row = vec![(i + 1).to_string()];
        for b in [b0, b1] {
            row.extend([b.inertia, b.linear, b.quadratic, b.cubic].iter().map(f64::to_string));
        }
        row.push(check.to_string());
        wtr.write_record(&row).map_err(anyhow::Error::from)?;
    }
    wtr.flush().map_err(anyhow::Error::from)?;
    println!("evaluated {} points; worst finite-difference relative error {worst:e}", points.len());
    Ok(EXIT_SUCCESS)
}

/// Initial reduced state: `amplitude` on every internal master and, on the
/// auxiliary masters, the modal projection of the forcing phase `(1, 0)`
/// and the parameter value `mu`.
pub fn initial_reduced_state(spec: &Spectrum, info: &AugmentationInfo, amplitude: f64, mu: f64) -> Vec<Complex64> {
    let aux = spec.modes_on_states(&info.auxiliary_states());
    let mut target = vec![Complex64::new(0.0, 0.0); spec.n()];
    if let Some((c, _)) = info.forcing_indices {
        target[c] = Complex64::new(1.0, 0.0);
    }
    if let Some(p) = info.parameter_index {
        target[p] = Complex64::new(mu, 0.0);
    }
    let modal = spec.project(&target);
    spec.masters
        .iter()
        .map(|&k| if aux.contains(&k) { modal[k] } else { Complex64::new(amplitude, 0.0) })
        .collect()
}

/// Period of the slowest oscillating internal master, if any.
fn master_period(spec: &Spectrum, info: &AugmentationInfo) -> Option<f64> {
    let aux = spec.modes_on_states(&info.auxiliary_states());
    spec.masters
        .iter()
        .filter(|k| !aux.contains(k))
        .map(|&k| spec.eigenvalues[k].im.abs())
        .filter(|&w| w > 0.0)
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.min(w))))
        .map(|w| 2.0 * std::f64::consts::PI / w)
}

fn simulate_cmd(cfg: &RunConfig) -> Outcome {
    let (sys, info) = load_system(&cfg.input, cfg.omega)?;
    let (w, f, masters) = match &cfg.rom {
        Some(path) => {
            let record: RomRecord = serde_json::from_value(read_json(path)?).with_context(|| format!("parsing {}", path.display()))?;
            let (w, f) = record.to_rom()?;
            let masters: Vec<usize> = record.masters.iter().map(|k| k - 1).collect();
            (w, f, masters)
        }
        None => {
            let red = reduce_system(cfg, &sys, &info)?;
            if let Termination::OuterResonance { order } = red.termination {
                return Err(Failure { code: EXIT_OUTER_RESONANCE, error: anyhow!("outer resonance at order {order}; no valid reduced model") });
            }
            (red.expansion, red.dynamics, red.spectrum.masters)
        }
    };
    if w.n() != sys.dim() {
        return Err(anyhow!("reduction has {} states, system has {}", w.n(), sys.dim()).into());
    }
    let spec = compute_spectrum(&sys, &masters).map_err(manifold_failure)?;
    let z0 = initial_reduced_state(&spec, &info, cfg.amplitude, cfg.mu);
    let period = master_period(&spec, &info).unwrap_or(1.0);
    let opts = SimOptions {
        t_end: cfg.t_end.unwrap_or(DEFAULT_PERIODS * period),
        dt: cfg.dt.unwrap_or(period / DEFAULT_STEPS_PER_PERIOD),
    };
    let traj = simulate(&sys, &w, &f, &z0, &opts, 1).map_err(|e| match e {
        SimError::Unstable { .. } => Failure { code: EXIT_INTEGRATION, error: e.into() },
        _ => Failure { code: EXIT_INPUT, error: e.into() },
    })?;
    let file = File::create(&cfg.output).with_context(|| format!("writing {}", cfg.output.display()))?;
    traj.write_csv(BufWriter::new(file)).map_err(anyhow::Error::from)?;
    println!("max relative error {:e}", traj.max_relative_error());
    Ok(EXIT_SUCCESS)
}

/// Worker count from `SSMPARAM_THREADS`, defaulting to the available cores.
pub fn threads_from_env() -> usize {
    std::env::var("SSMPARAM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
