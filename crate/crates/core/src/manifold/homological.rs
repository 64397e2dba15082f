use std::thread;

use num_complex::Complex64;

use super::recurrence::{gamma_column, sigma, xi_column};
use super::spectrum::compute_spectrum;
use super::{ManifoldError, ManifoldExpansion, ReducedDynamics, ResonanceKind, ResonanceReport, ResonanceTolerance, Spectrum};
use crate::kronalg::{canonical_monomials, Monomial};
use crate::polyode::PolySystem;

/// Known right-hand side `R_ν` of the homological equation
/// `(σ_ν I − A₁) W_ν + W₁ f_ν = R_ν` for a canonical monomial of order `p ≥ 2`.
///
/// The per-tuple equations of every distinct permutation of `ν` are summed:
/// `R_ν = Σ_τ [Σ_{κ=2}^{p} A_κ Ξ_{τ,κ} − Σ_{κ=2}^{p−1} W_κ Γ_{τ,κ}]`.
pub fn assemble_rhs(
    nu: &Monomial,
    sys: &PolySystem,
    w: &ManifoldExpansion,
    f: &ReducedDynamics,
) -> Result<Vec<Complex64>, ManifoldError> {
    if !nu.is_canonical() {
        return Err(ManifoldError::NotCanonical(nu.key()));
    }
    if w.n() != sys.dim() {
        return Err(ManifoldError::Dimension(format!("manifold has n = {}, system has {}", w.n(), sys.dim())));
    }
    let p = nu.order();
    let mut rhs = vec![Complex64::new(0.0, 0.0); sys.dim()];
    if p < 2 {
        return Ok(rhs);
    }
    let active: Vec<usize> = (2..=p).filter(|&k| sys.has_order(k)).collect();
    for tau in nu.distinct_permutations() {
        for &kappa in &active {
            let xi = xi_column(&tau, kappa, w)?;
            for (r, v) in rhs.iter_mut().zip(xi.contract(sys, w)?) {
                *r += v;
            }
        }
        for kappa in 2..p {
            let gamma = gamma_column(&tau, kappa, f)?;
            for (t, c) in &gamma.entries {
                if !t.is_canonical() {
                    continue;
                }
                let col = w.require(t)?;
                for (r, x) in rhs.iter_mut().zip(col) {
                    *r -= c * x;
                }
            }
        }
    }
    Ok(rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialSolution {
    pub sigma: Complex64,
    pub w: Vec<Complex64>,
    pub f: Vec<Complex64>,
    /// Inner resonances absorbed into `f`.
    pub reports: Vec<ResonanceReport>,
}

/// Normal-form solve of one homological equation in modal coordinates.
///
/// Resonant master components go to `f_ν` (and `W_ν` has no component
/// along them); every other mode gets `r̃_k / (σ_ν − λ_k)`. A slave mode
/// in resonance aborts with [`ManifoldError::OuterResonance`].
pub fn solve_monomial(
    nu: &Monomial,
    rhs: &[Complex64],
    spec: &Spectrum,
    tol: &ResonanceTolerance,
) -> Result<MonomialSolution, ManifoldError> {
    if rhs.len() != spec.n() {
        return Err(ManifoldError::Dimension(format!("rhs has length {}, expected {}", rhs.len(), spec.n())));
    }
    let s = sigma(nu, spec);
    let modal = spec.project(rhs);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); spec.n()];
    let mut f = vec![Complex64::new(0.0, 0.0); spec.m()];
    let mut reports = Vec::new();
    for (k, (&lambda, &r)) in spec.eigenvalues.iter().zip(&modal).enumerate() {
        let resonant = tol.is_resonant(s, lambda);
        let report = |kind| ResonanceReport { monomial: nu.clone(), sigma: s, matched_eigenvalue: lambda, matched_index: k, kind };
        match (spec.master_position(k), resonant) {
            (Some(j), true) => {
                f[j] = r;
                reports.push(report(ResonanceKind::Inner));
            }
            (None, true) => return Err(ManifoldError::OuterResonance(report(ResonanceKind::Outer))),
            _ => {
                let d = s - lambda;
                if d == Complex64::new(0.0, 0.0) {
                    return Err(ManifoldError::SingularHomological { monomial: nu.key(), eigenvalue: lambda });
                }
                coeffs[k] = r / d;
            }
        }
    }
    Ok(MonomialSolution { sigma: s, w: spec.expand(&coeffs), f, reports })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    pub max_order: usize,
    pub tolerance: ResonanceTolerance,
    /// Worker threads for the independent monomials of one order.
    pub threads: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { max_order: 3, tolerance: ResonanceTolerance::default(), threads: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Complete,
    /// Stopped at `order`; only lower orders are kept.
    OuterResonance { order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub spectrum: Spectrum,
    pub expansion: ManifoldExpansion,
    pub dynamics: ReducedDynamics,
    pub reports: Vec<ResonanceReport>,
    pub termination: Termination,
}

impl Reduction {
    pub fn outer_resonances(&self) -> impl Iterator<Item = &ResonanceReport> {
        self.reports.iter().filter(|r| r.kind == ResonanceKind::Outer)
    }
}

/// Order-by-order reduction onto the spectral subspace of `masters`
/// (0-based spectral indices, conjugate-closed for real systems).
pub fn reduce(sys: &PolySystem, masters: &[usize], opts: &ReduceOptions) -> Result<Reduction, ManifoldError> {
    if opts.max_order == 0 {
        return Err(ManifoldError::InvalidOrder { kappa: 0, p: 0 });
    }
    let spectrum = compute_spectrum(sys, masters)?;
    let (n, m) = (spectrum.n(), spectrum.m());
    let mut expansion = ManifoldExpansion::new(m, n);
    let mut dynamics = ReducedDynamics::new(m);
    for (j, &k) in masters.iter().enumerate() {
        expansion.insert(Monomial::single(j + 1), spectrum.right_vector(k));
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        col[j] = spectrum.eigenvalues[k];
        dynamics.insert(Monomial::single(j + 1), col);
    }

    let mut reports = Vec::new();
    let mut termination = Termination::Complete;
    for p in 2..=opts.max_order {
        let monomials = canonical_monomials(m, p);
        let solve = |nu: &Monomial| -> Result<MonomialSolution, ManifoldError> {
            let rhs = assemble_rhs(nu, sys, &expansion, &dynamics)?;
            solve_monomial(nu, &rhs, &spectrum, &opts.tolerance)
        };
        let results = solve_all(&monomials, opts.threads, solve);
        let mut outer = Vec::new();
        let mut solved = Vec::with_capacity(monomials.len());
        for (nu, res) in monomials.into_iter().zip(results) {
            match res {
                Ok(sol) => solved.push((nu, sol)),
                Err(ManifoldError::OuterResonance(rep)) => outer.push(rep),
                Err(e) => return Err(e),
            }
        }
        if !outer.is_empty() {
            reports.extend(outer);
            termination = Termination::OuterResonance { order: p };
            break;
        }
        for (nu, sol) in solved {
            reports.extend(sol.reports);
            expansion.insert(nu.clone(), sol.w);
            dynamics.insert(nu, sol.f);
        }
    }
    Ok(Reduction { spectrum, expansion, dynamics, reports, termination })
}

/// Applies `solve` to every monomial; results keep the input order
/// regardless of the thread count.
fn solve_all<F>(monomials: &[Monomial], threads: usize, solve: F) -> Vec<Result<MonomialSolution, ManifoldError>>
where
    F: Fn(&Monomial) -> Result<MonomialSolution, ManifoldError> + Sync,
{
    let threads = threads.max(1).min(monomials.len().max(1));
    if threads == 1 {
        return monomials.iter().map(&solve).collect();
    }
    let chunk = monomials.len().div_ceil(threads);
    thread::scope(|scope| {
        let handles: Vec<_> = monomials
            .chunks(chunk)
            .map(|part| {
                let solve = &solve;
                scope.spawn(move || part.iter().map(solve).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("monomial worker panicked")).collect()
    })
}
