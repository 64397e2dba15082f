//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's Kronecker, recurrence or spectrum code.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssmparam::kronalg::{canonical_monomials, Monomial};
use ssmparam::manifold::{ManifoldExpansion, ReducedDynamics};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex(r: &mut impl Rng) -> Complex64 {
    c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![c(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d.data[i * n + i] = c(1.0, 0.0);
        }
        d
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn kron(&self, b: &Dense) -> Dense {
        let mut out = Dense::zeros(self.rows * b.rows, self.cols * b.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.at(i, j);
                for k in 0..b.rows {
                    for l in 0..b.cols {
                        out.set(i * b.rows + k, j * b.cols + l, a * b.at(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, b: &Dense) -> Dense {
        Dense { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&b.data).map(|(x, y)| x + y).collect() }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.at(i, j) * v[j]).sum()).collect()
    }
}

/// Position of a 1-based tuple in `[m]^p`, first entry most significant.
pub fn tuple_index(t: &[usize], m: usize) -> usize {
    t.iter().fold(0, |acc, &k| acc * m + (k - 1))
}

/// Every tuple of `[m]^p` in index order.
pub fn all_tuples(m: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..p {
        out = out
            .into_iter()
            .flat_map(|t| {
                (1..=m).map(move |k| {
                    let mut t = t.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn is_sorted(t: &[usize]) -> bool {
    t.windows(2).all(|w| w[0] <= w[1])
}

/// Dense `rows × m^q` block whose canonical columns come from `col`.
pub fn dense_block(m: usize, q: usize, rows: usize, col: impl Fn(&Monomial) -> Option<Vec<Complex64>>) -> Dense {
    let mut d = Dense::zeros(rows, m.pow(q as u32));
    for t in all_tuples(m, q) {
        if !is_sorted(&t) {
            continue;
        }
        if let Some(v) = col(&Monomial::new(t.clone()).unwrap()) {
            let j = tuple_index(&t, m);
            for (i, x) in v.into_iter().enumerate() {
                d.set(i, j, x);
            }
        }
    }
    d
}

fn kron_chain(parts: &[Dense]) -> Dense {
    let mut acc = Dense::identity(1);
    for p in parts {
        acc = acc.kron(p);
    }
    acc
}

/// `Γ_{p,κ} = Σ_i I^{⊗i} ⊗ F_{p−κ+1} ⊗ I^{⊗(κ−1−i)}` applied to `e_ν`.
pub fn gamma_brute(nu: &[usize], kappa: usize, f: &ReducedDynamics) -> Vec<Complex64> {
    let m = f.m();
    let p = nu.len();
    let q = p - kappa + 1;
    let fq = dense_block(m, q, m, |mono| f.get(mono).map(<[_]>::to_vec));
    let mut total = Dense::zeros(m.pow(kappa as u32), m.pow(p as u32));
    for i in 0..kappa {
        let mut parts = vec![Dense::identity(m); i];
        parts.push(fq.clone());
        parts.extend(vec![Dense::identity(m); kappa - 1 - i]);
        total = total.add(&kron_chain(&parts));
    }
    total.column(tuple_index(nu, m))
}

/// Compositions of `p` into `k` positive parts.
pub fn compositions(p: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![p]];
    }
    let mut out = Vec::new();
    for first in 1..=p - (k - 1) {
        for mut rest in compositions(p - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `Ξ_{p,κ} = Σ_{q ∈ 𝔸_{p,κ}} W_{q1} ⊗ … ⊗ W_{qκ}` applied to `e_ν`.
pub fn xi_brute(nu: &[usize], kappa: usize, w: &ManifoldExpansion) -> Vec<Complex64> {
    let (m, n) = (w.m(), w.n());
    let p = nu.len();
    let mut total = Dense::zeros(n.pow(kappa as u32), m.pow(p as u32));
    for comp in compositions(p, kappa) {
        let parts: Vec<Dense> = comp.iter().map(|&q| dense_block(m, q, n, |mono| w.get(mono).map(<[_]>::to_vec))).collect();
        total = total.add(&kron_chain(&parts));
    }
    total.column(tuple_index(nu, m))
}

pub fn random_dynamics(m: usize, p: usize, r: &mut impl Rng) -> ReducedDynamics {
    let mut f = ReducedDynamics::new(m);
    for q in 1..=p {
        for nu in canonical_monomials(m, q) {
            f.insert(nu, (0..m).map(|_| random_complex(r)).collect());
        }
    }
    f
}

pub fn random_expansion(m: usize, n: usize, p: usize, r: &mut impl Rng) -> ManifoldExpansion {
    let mut w = ManifoldExpansion::new(m, n);
    for q in 1..=p {
        for nu in canonical_monomials(m, q) {
            w.insert(nu, (0..n).map(|_| random_complex(r)).collect());
        }
    }
    w
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64)).collect()
}

/// Single-harmonic balance of `ẍ + ω²x + γx³ = 0` with `x = a cos(Ωt)`:
/// `Ω² = ω² + 3γa²/4`, solved exactly.
pub fn harmonic_balance_frequency(omega: f64, gamma: f64, a: f64) -> f64 {
    (omega * omega + 0.75 * gamma * a * a).sqrt()
}

/// Natural frequencies of `M ẍ + K x = 0` with `M = I`, ascending.
pub fn chain_frequencies(k: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(k.clone());
    let mut w: Vec<f64> = eig.eigenvalues.iter().map(|x| x.sqrt()).collect();
    w.sort_by(f64::total_cmp);
    w
}
