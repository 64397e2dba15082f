//! Kronecker-product and multi-index algebra.
//!
//! Monomials are tuples of 1-based variable indices. A tuple `(ν₁, …, ν_p)`
//! over `m` variables identifies the unit vector `e_{ν₁} ⊗ … ⊗ e_{ν_p}` of
//! length `m^p`, whose hot index is the mixed-radix number
//! `Σ_i (ν_i − 1)·m^(p−i)` (first index most significant). Every module uses
//! this ordering for the columns of `W_p` and `f_p`.

use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Largest dense Kronecker power materialized by default.
pub const DEFAULT_KRON_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KronError {
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("matrix dimensions must be at least 1x1")]
    Empty,
    #[error("inner dimensions do not agree: {0} vs {1}")]
    Incompatible(usize, usize),
    #[error("dense Kronecker power would hold {requested} entries (cap {cap})")]
    TooLarge { requested: usize, cap: usize },
    #[error("monomial index {index} outside 1..={m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("empty monomial tuple")]
    EmptyMonomial,
    #[error("cannot parse monomial key {0:?}")]
    BadKey(String),
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, KronError> {
        if rows == 0 || cols == 0 {
            return Err(KronError::Empty);
        }
        if data.len() != rows * cols {
            return Err(KronError::Shape { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, KronError> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = Complex64::new(1.0, 0.0);
        }
        out
    }

    /// Column vector (n × 1).
    pub fn column(v: &[Complex64]) -> Result<Self, KronError> {
        Self::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, KronError> {
        if self.cols != rhs.rows {
            return Err(KronError::Incompatible(self.cols, rhs.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, KronError> {
        if self.cols != v.len() {
            return Err(KronError::Incompatible(self.cols, v.len()));
        }
        Ok((0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Mul<Complex64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, s: Complex64) -> DenseMatrix {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..b.rows {
                let row = i * b.rows + k;
                for l in 0..b.cols {
                    data[row * cols + j * b.cols + l] = aij * b[(k, l)];
                }
            }
        }
    }
    DenseMatrix { rows, cols, data }
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        out.extend(b.iter().map(|y| x * y));
    }
    out
}

/// `v^{⊗κ}` with the default size cap.
pub fn kron_power(v: &[Complex64], kappa: usize) -> Result<Vec<Complex64>, KronError> {
    kron_power_capped(v, kappa, DEFAULT_KRON_CAP)
}

/// `v^{⊗κ}`; `κ = 0` gives `[1]`.
pub fn kron_power_capped(v: &[Complex64], kappa: usize, cap: usize) -> Result<Vec<Complex64>, KronError> {
    let requested = checked_pow(v.len(), kappa).unwrap_or(usize::MAX);
    if requested > cap {
        return Err(KronError::TooLarge { requested, cap });
    }
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..kappa {
        out = kron_vec(&out, v);
    }
    Ok(out)
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// A tuple `ν ∈ [m]^p` of 1-based variable indices.
///
/// The tuple is stored as given; [`Monomial::canonical`] sorts it. Ordering
/// is lexicographic on the tuple, so canonical monomials of one order sort
/// in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<usize>);

impl Monomial {
    pub fn new(indices: Vec<usize>) -> Result<Self, KronError> {
        if indices.is_empty() {
            return Err(KronError::EmptyMonomial);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i == 0) {
            return Err(KronError::IndexOutOfRange { index: bad, m: usize::MAX });
        }
        Ok(Self(indices))
    }

    /// Builds a monomial without validation; callers guarantee 1-based entries.
    pub(crate) fn from_vec_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(!indices.is_empty() && indices.iter().all(|&i| i >= 1));
        Self(indices)
    }

    pub fn single(index: usize) -> Self {
        assert!(index >= 1, "monomial indices are 1-based");
        Self(vec![index])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_canonical(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    /// Sorted representative and the number of distinct permutations.
    pub fn canonical(&self) -> (Monomial, u64) {
        let mut sorted = self.0.clone();
        sorted.sort_unstable();
        let mult = permutation_count(&sorted);
        (Monomial(sorted), mult)
    }

    /// Number of distinct permutations of the tuple: `p! / Π_j c_j!`.
    pub fn multiplicity(&self) -> u64 {
        let mut sorted = self.0.clone();
        sorted.sort_unstable();
        permutation_count(&sorted)
    }

    pub fn max_index(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Occurrence count of each variable `1..=m` (entry `j−1` counts `j`).
    pub fn counts(&self, m: usize) -> Vec<usize> {
        let mut c = vec![0; m];
        for &i in &self.0 {
            c[i - 1] += 1;
        }
        c
    }

    /// Sub-tuple `ν[a:b] = (ν_{a+1}, …, ν_b)`; `None` when empty.
    pub fn slice(&self, a: usize, b: usize) -> Option<Monomial> {
        (b > a).then(|| Monomial(self.0[a..b].to_vec()))
    }

    /// Product of `y_{ν_i}` over the tuple.
    pub fn eval(&self, y: &[Complex64]) -> Complex64 {
        self.0.iter().map(|&i| y[i - 1]).product()
    }

    /// Hot index of `e_ν` among `m^p` entries.
    pub fn hot_index(&self, m: usize) -> Result<usize, KronError> {
        let mut idx = 0usize;
        for &i in &self.0 {
            if i > m {
                return Err(KronError::IndexOutOfRange { index: i, m });
            }
            idx = idx * m + (i - 1);
        }
        Ok(idx)
    }

    /// Every distinct rearrangement of the tuple, in lexicographic order.
    pub fn distinct_permutations(&self) -> Vec<Monomial> {
        let mut cur = self.0.clone();
        cur.sort_unstable();
        let mut out = vec![Monomial(cur.clone())];
        while next_permutation(&mut cur) {
            out.push(Monomial(cur.clone()));
        }
        out
    }

    /// Key used by the JSON formats: entries joined by commas, e.g. `"1,1,2"`.
    pub fn key(&self) -> String {
        self.to_string()
    }

    /// Concatenation of two tuples.
    pub fn concat(&self, other: &Monomial) -> Monomial {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Monomial(v)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Monomial {
    type Err = KronError;
    fn from_str(s: &str) -> Result<Self, KronError> {
        let indices = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| KronError::BadKey(s.to_string()))?;
        Monomial::new(indices).map_err(|_| KronError::BadKey(s.to_string()))
    }
}

fn permutation_count(sorted: &[usize]) -> u64 {
    // multinomial p! / Π c_j! as a product of binomials, exact in u64 for p ≤ 20
    let mut result: u64 = 1;
    let mut placed: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let c = (j - i) as u64;
        result *= binomial(placed + c, c);
        placed += c;
        i = j;
    }
    result
}

/// Exact binomial coefficient via incremental products.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `e_{ν₁} ⊗ … ⊗ e_{ν_p}` of length `m^p`.
pub fn unit_vector(nu: &Monomial, m: usize) -> Result<Vec<Complex64>, KronError> {
    let hot = nu.hot_index(m)?;
    let len = checked_pow(m, nu.order()).unwrap_or(usize::MAX);
    if len > DEFAULT_KRON_CAP {
        return Err(KronError::TooLarge { requested: len, cap: DEFAULT_KRON_CAP });
    }
    let mut v = vec![Complex64::new(0.0, 0.0); len];
    v[hot] = Complex64::new(1.0, 0.0);
    Ok(v)
}

/// Canonical representative of a raw tuple and its permutation multiplicity.
pub fn canonicalize(tuple: &[usize]) -> Result<(Monomial, u64), KronError> {
    Ok(Monomial::new(tuple.to_vec())?.canonical())
}

/// All non-decreasing tuples of length `p` over `1..=m`, lexicographically.
pub fn canonical_monomials(m: usize, p: usize) -> Vec<Monomial> {
    if m == 0 || p == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![1usize; p];
    loop {
        out.push(Monomial(cur.clone()));
        // advance to the next non-decreasing tuple
        let mut i = p;
        while i > 0 && cur[i - 1] == m {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        let v = cur[i - 1];
        for x in cur.iter_mut().skip(i) {
            *x = v;
        }
    }
    out
}
