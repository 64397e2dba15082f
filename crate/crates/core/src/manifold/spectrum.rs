use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ManifoldError;
use crate::kronalg::DenseMatrix;
use crate::polyode::PolySystem;

/// Eigenvector matrices with a larger condition number are treated as defective.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// Eigen-decomposition of `A₁` with biorthonormal left/right vectors and the
/// selected master modes.
///
/// Eigenvalues are ordered by increasing `|Im λ|`, then decreasing `Re λ`,
/// then decreasing `Im λ`, so a conjugate pair appears as `(+iω, −iω)`.
/// For real `A₁`, conjugate pairs are exact conjugates of each other and
/// eigenvectors of real eigenvalues are real.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as columns.
    pub right: DenseMatrix,
    /// Left eigenvectors as columns, with `leftᵢᴴ·rightⱼ = δᵢⱼ`.
    pub left: DenseMatrix,
    /// 0-based spectral indices; reduced coordinate `j` follows `masters[j]`.
    pub masters: Vec<usize>,
    pub condition: f64,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn m(&self) -> usize {
        self.masters.len()
    }

    pub fn right_vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.n()).map(|i| self.right[(i, k)]).collect()
    }

    pub fn left_vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.n()).map(|i| self.left[(i, k)]).collect()
    }

    /// Eigenvalue of reduced coordinate `j` (0-based).
    pub fn master_eigenvalue(&self, j: usize) -> Complex64 {
        self.eigenvalues[self.masters[j]]
    }

    /// Position of spectral index `k` among the masters.
    pub fn master_position(&self, k: usize) -> Option<usize> {
        self.masters.iter().position(|&x| x == k)
    }

    /// Modal coordinates `Lᴴ v`.
    pub fn project(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n).map(|k| (0..n).map(|i| self.left[(i, k)].conj() * v[i]).sum()).collect()
    }

    /// `R c`
    pub fn expand(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.right.matvec(c).expect("modal vector length equals n")
    }

    /// Spectral indices of modes whose right eigenvectors live on the given
    /// state components (e.g. forcing or parameter states).
    pub fn modes_on_states(&self, states: &[usize]) -> Vec<usize> {
        (0..self.n())
            .filter(|&k| {
                let on: f64 = states.iter().map(|&s| self.right[(s, k)].norm_sqr()).sum();
                on > 1e-12
            })
            .collect()
    }
}

/// Eigen-decomposition of `A₁` and validation of the master set.
pub fn compute_spectrum(sys: &PolySystem, masters: &[usize]) -> Result<Spectrum, ManifoldError> {
    let a = sys.linear_matrix();
    let mut spec = eigendecompose(&a)?;
    validate_masters(&spec, masters, is_real(&a))?;
    spec.masters = masters.to_vec();
    Ok(spec)
}

fn is_real(a: &DenseMatrix) -> bool {
    a.as_slice().iter().all(|x| x.im == 0.0)
}

fn validate_masters(spec: &Spectrum, masters: &[usize], real: bool) -> Result<(), ManifoldError> {
    let n = spec.n();
    if masters.is_empty() {
        return Err(ManifoldError::BadMasters("at least one master mode is required".into()));
    }
    for (i, &k) in masters.iter().enumerate() {
        if k >= n {
            return Err(ManifoldError::BadMasters(format!("master index {} exceeds dimension {n}", k + 1)));
        }
        if masters[..i].contains(&k) {
            return Err(ManifoldError::BadMasters(format!("master index {} repeated", k + 1)));
        }
    }
    if real {
        for &k in masters {
            let target = spec.eigenvalues[k].conj();
            let closed = masters.iter().any(|&j| spec.eigenvalues[j] == target);
            if !closed {
                return Err(ManifoldError::NotConjugateClosed { index: k, eigenvalue: spec.eigenvalues[k] });
            }
        }
    }
    Ok(())
}

/// Full eigen-decomposition of a dense complex matrix via the complex Schur
/// form. Masters are left empty.
pub fn eigendecompose(a: &DenseMatrix) -> Result<Spectrum, ManifoldError> {
    let n = a.rows();
    let scale = a.as_slice().iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let mat = DMatrix::from_row_slice(n, n, a.as_slice());
    let schur = nalgebra::linalg::Schur::try_new(mat, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| ManifoldError::Spectrum("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    let tiny = f64::EPSILON * scale;
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let lambda = t[(k, k)];
            // back substitution on the triangular factor
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            x[k] = Complex64::new(1.0, 0.0);
            for i in (0..k).rev() {
                let s: Complex64 = (i + 1..=k).map(|j| t[(i, j)] * x[j]).sum();
                let mut d = t[(i, i)] - lambda;
                if d.norm() < tiny {
                    if s.norm() < 1e3 * tiny {
                        continue;
                    }
                    d = Complex64::new(tiny, 0.0);
                }
                x[i] = -s / d;
            }
            let v = normalize((0..n).map(|r| (0..=k).map(|j| q[(r, j)] * x[j]).sum()).collect());
            (rayleigh_quotient(a, &v).unwrap_or(lambda), v)
        })
        .collect();

    if is_real(a) {
        enforce_conjugate_symmetry(&mut pairs, scale);
    }
    pairs.sort_by(|(a, _), (b, _)| {
        a.im.abs().total_cmp(&b.im.abs()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im))
    });
    if is_real(a) {
        pairs = adjacent_conjugates(pairs);
    }

    let eigenvalues: Vec<Complex64> = pairs.iter().map(|(l, _)| *l).collect();
    let mut right = DMatrix::<Complex64>::zeros(n, n);
    for (k, (_, v)) in pairs.iter().enumerate() {
        for i in 0..n {
            right[(i, k)] = v[i];
        }
    }
    let sv = right.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_EIGENVECTOR_CONDITION) {
        return Err(ManifoldError::Defective { condition });
    }
    let inv = right.clone().lu().try_inverse().ok_or(ManifoldError::Defective { condition })?;
    let left = inv.adjoint();
    Ok(Spectrum {
        eigenvalues,
        right: to_dense(&right),
        left: to_dense(&left),
        masters: Vec::new(),
        condition,
    })
}

fn to_dense(m: &DMatrix<Complex64>) -> DenseMatrix {
    let (r, c) = m.shape();
    let data = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    DenseMatrix::new(r, c, data).expect("shape is consistent")
}

/// `vᴴAv / vᴴv`, the eigenvalue estimate minimizing `‖Av − λv‖₂` for the
/// computed vector.
fn rayleigh_quotient(a: &DenseMatrix, v: &[Complex64]) -> Option<Complex64> {
    let av = a.matvec(v).ok()?;
    let num: Complex64 = v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum();
    let den: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    (den > 0.0).then(|| num / den)
}

/// Unit 2-norm, with the largest-magnitude component real and positive.
fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v.iter().copied().fold(Complex64::new(0.0, 0.0), |best, x| if x.norm() > best.norm() * (1.0 + 1e-12) { x } else { best });
    if norm == 0.0 || pivot.norm() == 0.0 {
        return v;
    }
    let phase = pivot.conj() / pivot.norm();
    for x in &mut v {
        *x = *x * phase / norm;
    }
    v
}

/// Places each `+iω` pair directly before its exact conjugate, which the
/// plain sort does not guarantee when eigenvalues repeat.
fn adjacent_conjugates(pairs: Vec<(Complex64, Vec<Complex64>)>) -> Vec<(Complex64, Vec<Complex64>)> {
    let mut used = vec![false; pairs.len()];
    let mut order = Vec::with_capacity(pairs.len());
    for i in 0..pairs.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        order.push(i);
        let (lambda, v) = &pairs[i];
        if lambda.im <= 0.0 {
            continue;
        }
        let partner = (0..pairs.len()).find(|&j| {
            !used[j] && pairs[j].0 == lambda.conj() && pairs[j].1.iter().zip(v).all(|(a, b)| *a == b.conj())
        });
        if let Some(j) = partner {
            used[j] = true;
            order.push(j);
        }
    }
    let mut slots: Vec<Option<_>> = pairs.into_iter().map(Some).collect();
    order.into_iter().map(|i| slots[i].take().expect("each index used once")).collect()
}

/// Makes eigenpairs of a real matrix exactly conjugate-symmetric.
fn enforce_conjugate_symmetry(pairs: &mut [(Complex64, Vec<Complex64>)], scale: f64) {
    let real_tol = 1e-10 * scale;
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (k, (lambda, v)) in pairs.iter_mut().enumerate() {
        if lambda.im.abs() <= real_tol {
            lambda.im = 0.0;
            let re: Vec<Complex64> = v.iter().map(|x| Complex64::new(x.re, 0.0)).collect();
            *v = normalize(re);
        } else if lambda.im > 0.0 {
            upper.push(k);
        } else {
            lower.push(k);
        }
    }
    if upper.len() != lower.len() {
        return;
    }
    let mut taken = vec![false; lower.len()];
    for &u in &upper {
        let target = pairs[u].0.conj();
        let best = lower
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .min_by(|(_, &a), (_, &b)| (pairs[a].0 - target).norm().total_cmp(&(pairs[b].0 - target).norm()));
        if let Some((i, &l)) = best {
            taken[i] = true;
            let (lambda, v) = (pairs[u].0, pairs[u].1.clone());
            pairs[l] = (lambda.conj(), v.iter().map(|x| x.conj()).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn oscillator(omega: f64) -> PolySystem {
        let mut s = PolySystem::new(2);
        s.add_real_term(0, &[2], 1.0).unwrap();
        s.add_real_term(1, &[1], -omega * omega).unwrap();
        s
    }

    #[test]
    fn undamped_oscillator_pair() {
        let spec = compute_spectrum(&oscillator(2.0), &[0, 1]).unwrap();
        assert!((spec.eigenvalues[0] - Complex64::new(0.0, 2.0)).norm() < 1e-14);
        assert_eq!(spec.eigenvalues[1], spec.eigenvalues[0].conj());
    }

    #[test]
    fn masters_must_be_conjugate_closed() {
        assert!(matches!(
            compute_spectrum(&oscillator(1.0), &[0]),
            Err(ManifoldError::NotConjugateClosed { index: 0, .. })
        ));
        assert!(matches!(compute_spectrum(&oscillator(1.0), &[0, 0]), Err(ManifoldError::BadMasters(_))));
        assert!(matches!(compute_spectrum(&oscillator(1.0), &[0, 5]), Err(ManifoldError::BadMasters(_))));
    }

    #[test]
    fn parameter_state_has_zero_mode_on_its_coordinate() {
        let mut s = PolySystem::new(3);
        s.add_real_term(0, &[2], 1.0).unwrap();
        s.add_real_term(1, &[1], -1.0).unwrap();
        s.add_real_term(1, &[1, 3], -0.3).unwrap();
        let spec = compute_spectrum(&s, &[0, 1, 2]).unwrap();
        assert_eq!(spec.eigenvalues[0], c(0.0));
        assert_eq!(spec.right_vector(0), vec![c(0.0), c(0.0), c(1.0)]);
        assert_eq!(spec.modes_on_states(&[2]), vec![0]);
    }

    #[test]
    fn defective_matrix_rejected() {
        let mut s = PolySystem::new(2);
        s.add_real_term(0, &[2], 1.0).unwrap();
        assert!(matches!(compute_spectrum(&s, &[0, 1]), Err(ManifoldError::Defective { .. })));
    }

    #[test]
    fn repeated_eigenvalue_of_diagonalizable_matrix() {
        let mut s = PolySystem::new(4);
        for k in 0..2 {
            s.add_real_term(2 * k, &[2 * k + 2], 1.0).unwrap();
            s.add_real_term(2 * k + 1, &[2 * k + 1], -1.0).unwrap();
        }
        let spec = compute_spectrum(&s, &[0, 1]).unwrap();
        assert!(spec.condition < 10.0);
        for k in 0..4 {
            assert!((spec.eigenvalues[k].im.abs() - 1.0).abs() < 1e-12);
        }
    }
}
