//! Per-monomial columns of the Γ and Ξ operators.
//!
//! Both act on a single tuple `ν` (not necessarily canonical). Slices of
//! `ν` address coefficient columns directly: a non-canonical slice refers
//! to a column that is zero by construction and contributes nothing.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{ManifoldError, ManifoldExpansion, ReducedDynamics, Spectrum};
use crate::kronalg::{kron_vec, Monomial};
use crate::polyode::PolySystem;

/// `σ_ν = Σ_i λ_{ν_i}` over the master eigenvalues.
pub fn sigma(nu: &Monomial, spec: &Spectrum) -> Complex64 {
    nu.indices().iter().map(|&j| spec.master_eigenvalue(j - 1)).sum()
}

/// Sparse `m^κ` column `Γ_{ν,κ}`, keyed by κ-tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaColumn {
    pub order: usize,
    pub entries: BTreeMap<Monomial, Complex64>,
}

impl GammaColumn {
    pub fn to_dense(&self, m: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); m.pow(self.order as u32)];
        for (t, c) in &self.entries {
            v[t.hot_index(m).expect("tuple entries are within [m]")] += c;
        }
        v
    }
}

fn check_order(nu: &Monomial, kappa: usize) -> Result<(), ManifoldError> {
    if kappa == 0 || kappa > nu.order() {
        return Err(ManifoldError::InvalidOrder { kappa, p: nu.order() });
    }
    Ok(())
}

/// `Γ_{ν,κ}` via `Γ_{ν,1} = f_ν` and
/// `Γ_{ν,κ+1} = e_{ν₁} ⊗ Γ_{ν[1:p],κ} + f_{ν[0:p−κ]} ⊗ e_{ν[p−κ:p]}`.
pub fn gamma_column(nu: &Monomial, kappa: usize, f: &ReducedDynamics) -> Result<GammaColumn, ManifoldError> {
    check_order(nu, kappa)?;
    let mut entries = BTreeMap::new();
    gamma_rec(nu.indices(), kappa, f, &mut Vec::new(), &mut entries)?;
    entries.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    Ok(GammaColumn { order: kappa, entries })
}

fn f_column<'a>(tuple: &[usize], f: &'a ReducedDynamics) -> Result<Option<&'a [Complex64]>, ManifoldError> {
    let mono = Monomial::from_vec_unchecked(tuple.to_vec());
    if !mono.is_canonical() {
        return Ok(None);
    }
    f.get(&mono).map(Some).ok_or(ManifoldError::MissingColumn { monomial: mono.key() })
}

fn gamma_rec(
    nu: &[usize],
    kappa: usize,
    f: &ReducedDynamics,
    prefix: &mut Vec<usize>,
    out: &mut BTreeMap<Monomial, Complex64>,
) -> Result<(), ManifoldError> {
    let p = nu.len();
    let emit = |out: &mut BTreeMap<Monomial, Complex64>, key: Vec<usize>, c: Complex64| {
        *out.entry(Monomial::from_vec_unchecked(key)).or_default() += c;
    };
    if kappa == 1 {
        if let Some(col) = f_column(nu, f)? {
            for (j, &c) in col.iter().enumerate() {
                if c != Complex64::new(0.0, 0.0) {
                    let mut key = prefix.clone();
                    key.push(j + 1);
                    emit(out, key, c);
                }
            }
        }
        return Ok(());
    }
    let k = kappa - 1;
    prefix.push(nu[0]);
    gamma_rec(&nu[1..], k, f, prefix, out)?;
    prefix.pop();
    if let Some(col) = f_column(&nu[..p - k], f)? {
        for (j, &c) in col.iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                let mut key = prefix.clone();
                key.push(j + 1);
                key.extend_from_slice(&nu[p - k..]);
                emit(out, key, c);
            }
        }
    }
    Ok(())
}

/// `Ξ_{ν,κ}` kept in factored form: a sum of κ-fold Kronecker products of
/// manifold columns, each term listed by its factor monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct XiColumn {
    pub order: usize,
    pub terms: Vec<Vec<Monomial>>,
}

impl XiColumn {
    /// Dense `n^κ` vector; only for small checks.
    pub fn materialize(&self, w: &ManifoldExpansion) -> Result<Vec<Complex64>, ManifoldError> {
        let mut out = vec![Complex64::new(0.0, 0.0); w.n().pow(self.order as u32)];
        for term in &self.terms {
            let mut acc = vec![Complex64::new(1.0, 0.0)];
            for factor in term {
                acc = kron_vec(&acc, w.require(factor)?);
            }
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a;
            }
        }
        Ok(out)
    }

    /// `A_κ Ξ_{ν,κ}` with the order-κ part of `sys`, factor by factor.
    pub fn contract(&self, sys: &PolySystem, w: &ManifoldExpansion) -> Result<Vec<Complex64>, ManifoldError> {
        let mut out = vec![Complex64::new(0.0, 0.0); sys.dim()];
        let a_terms: Vec<_> = sys.terms_of_order(self.order).collect();
        if a_terms.is_empty() {
            return Ok(out);
        }
        for term in &self.terms {
            let cols = term.iter().map(|m| w.require(m)).collect::<Result<Vec<_>, _>>()?;
            for (mono, rows) in &a_terms {
                let prod: Complex64 = mono.indices().iter().zip(&cols).map(|(&i, col)| col[i - 1]).product();
                if prod == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (&row, &a) in rows.iter() {
                    out[row] += a * prod;
                }
            }
        }
        Ok(out)
    }
}

/// `Ξ_{ν,κ}` via `Ξ_{ν,1} = W_ν` and
/// `Ξ_{ν,κ+1} = Σ_{σ=1}^{p−κ} W_{ν[0:σ]} ⊗ Ξ_{ν[σ:p],κ}`.
///
/// Every factor column referenced by the result must exist in `w`.
pub fn xi_column(nu: &Monomial, kappa: usize, w: &ManifoldExpansion) -> Result<XiColumn, ManifoldError> {
    check_order(nu, kappa)?;
    let terms = xi_rec(nu.indices(), kappa);
    for factor in terms.iter().flatten() {
        w.require(factor)?;
    }
    Ok(XiColumn { order: kappa, terms })
}

fn xi_rec(nu: &[usize], kappa: usize) -> Vec<Vec<Monomial>> {
    let p = nu.len();
    if kappa == 1 {
        let mono = Monomial::from_vec_unchecked(nu.to_vec());
        return if mono.is_canonical() { vec![vec![mono]] } else { Vec::new() };
    }
    let k = kappa - 1;
    let mut out = Vec::new();
    for split in 1..=p - k {
        let head = Monomial::from_vec_unchecked(nu[..split].to_vec());
        if !head.is_canonical() {
            // longer heads contain the same descent
            break;
        }
        for mut tail in xi_rec(&nu[split..], k) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}
