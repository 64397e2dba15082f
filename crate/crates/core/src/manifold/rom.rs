use num_complex::Complex64;

use super::{ManifoldError, ManifoldExpansion, ReducedDynamics};
use crate::kronalg::{DenseMatrix, Monomial};
use crate::polyode::PolySystem;

fn check_len(z: &[Complex64], m: usize) -> Result<(), ManifoldError> {
    if z.len() != m {
        return Err(ManifoldError::Dimension(format!("reduced state has length {}, expected {m}", z.len())));
    }
    Ok(())
}

/// `y = W(z) = Σ_ν W_ν z^ν`.
pub fn rom_map(w: &ManifoldExpansion, z: &[Complex64]) -> Result<Vec<Complex64>, ManifoldError> {
    check_len(z, w.m())?;
    let mut y = vec![Complex64::new(0.0, 0.0); w.n()];
    for (nu, col) in w.columns() {
        let zn = nu.eval(z);
        for (yi, c) in y.iter_mut().zip(col) {
            *yi += c * zn;
        }
    }
    Ok(y)
}

/// `ż = f(z) = Σ_ν f_ν z^ν`.
pub fn rom_evaluate(f: &ReducedDynamics, z: &[Complex64]) -> Result<Vec<Complex64>, ManifoldError> {
    check_len(z, f.m())?;
    let mut out = vec![Complex64::new(0.0, 0.0); f.m()];
    for (nu, col) in f.columns() {
        let zn = nu.eval(z);
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * zn;
        }
    }
    Ok(out)
}

/// `∂z^ν/∂z_j` for 0-based `j`.
fn monomial_derivative(nu: &Monomial, z: &[Complex64], j: usize) -> Complex64 {
    let idx = nu.indices();
    let mut total = Complex64::new(0.0, 0.0);
    for skip in 0..idx.len() {
        if idx[skip] != j + 1 {
            continue;
        }
        let prod: Complex64 = idx.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &k)| z[k - 1]).product();
        total += prod;
    }
    total
}

/// `∂W/∂z` as an `n × m` matrix.
pub fn manifold_jacobian(w: &ManifoldExpansion, z: &[Complex64]) -> Result<DenseMatrix, ManifoldError> {
    check_len(z, w.m())?;
    let mut jac = DenseMatrix::zeros(w.n(), w.m());
    for (nu, col) in w.columns() {
        for j in 0..w.m() {
            let d = monomial_derivative(nu, z, j);
            if d == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (i, c) in col.iter().enumerate() {
                jac[(i, j)] += c * d;
            }
        }
    }
    Ok(jac)
}

/// `‖DW(z) f(z) − A(W(z))‖₂`, which vanishes on an exact invariant manifold.
///
/// The part linear in `z`, `(W₁ f₁ − A₁ W₁) z`, is formed from coefficients
/// before `z` is applied; otherwise rounding in the O(‖z‖) terms would hide
/// residuals of high order at small amplitude.
pub fn invariance_residual(
    sys: &PolySystem,
    w: &ManifoldExpansion,
    f: &ReducedDynamics,
    z: &[Complex64],
) -> Result<f64, ManifoldError> {
    if sys.dim() != w.n() {
        return Err(ManifoldError::Dimension(format!("manifold has n = {}, system has {}", w.n(), sys.dim())));
    }
    check_len(z, w.m())?;
    let (n, m) = (w.n(), w.m());
    let zero = Complex64::new(0.0, 0.0);
    let w1: Vec<Vec<Complex64>> = (1..=m).map(|j| w.get(&Monomial::single(j)).map_or(vec![zero; n], <[_]>::to_vec)).collect();
    let f1: Vec<Vec<Complex64>> = (1..=m).map(|j| f.get(&Monomial::single(j)).map_or(vec![zero; m], <[_]>::to_vec)).collect();

    let mut out = vec![zero; n];
    // (W₁ f₁ − A₁ W₁) z
    for j in 0..m {
        let mut col: Vec<Complex64> = (0..n).map(|i| (0..m).map(|k| w1[k][i] * f1[j][k]).sum()).collect();
        for (mono, rows) in sys.terms_of_order(1) {
            let x = w1[j][mono.indices()[0] - 1];
            for (&row, &a) in rows {
                col[row] -= a * x;
            }
        }
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * z[j];
        }
    }

    let mut f_hi = ReducedDynamics::new(m);
    for (nu, col) in f.columns().filter(|(nu, _)| nu.order() > 1) {
        f_hi.insert(nu.clone(), col.clone());
    }
    let mut w_hi = ManifoldExpansion::new(m, n);
    for (nu, col) in w.columns().filter(|(nu, _)| nu.order() > 1) {
        w_hi.insert(nu.clone(), col.clone());
    }
    // W₁ f_{≥2}(z)
    let fz_hi = rom_evaluate(&f_hi, z)?;
    for (k, fk) in fz_hi.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(&w1[k]) {
            *o += x * fk;
        }
    }
    // DW_{≥2}(z) f(z)
    let jac = manifold_jacobian(&w_hi, z)?;
    for (o, v) in out.iter_mut().zip(jac.matvec(&rom_evaluate(f, z)?).expect("jacobian has m columns")) {
        *o += v;
    }
    // A₁ W_{≥2}(z) and A_{≥2}(W(z))
    let y_hi = rom_map(&w_hi, z)?;
    let y = rom_map(w, z)?;
    for (mono, rows) in sys.terms() {
        let v = if mono.order() == 1 { y_hi[mono.indices()[0] - 1] } else { mono.eval(&y) };
        for (&row, &a) in rows {
            out[row] -= a * v;
        }
    }
    Ok(out.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackbonePoint {
    /// First-harmonic amplitude of the chosen physical coordinate.
    pub amplitude: f64,
    /// Instantaneous frequency `Im(f_j / z_j)`.
    pub frequency: f64,
    /// Instantaneous decay rate `−Re(f_j / z_j)`.
    pub damping: f64,
    /// Polar radius with `z_j = ρ e^{iθ}`, `z_k = ρ e^{−iθ}`.
    pub rho: f64,
}

/// First-harmonic amplitude of `coord` on the circle of radius `rho`.
fn harmonic_amplitude(w: &ManifoldExpansion, pair: (usize, usize), coord: usize, rho: f64) -> Complex64 {
    let (j, k) = pair;
    let mut acc = Complex64::new(0.0, 0.0);
    for (nu, col) in w.columns() {
        let counts = nu.counts(w.m());
        let (cj, ck) = (counts[j], counts[k]);
        if cj + ck != nu.order() || cj != ck + 1 {
            continue;
        }
        acc += col[coord] * rho.powi(nu.order() as i32);
    }
    acc * 2.0
}

/// Backbone point of the conjugate master pair `pair` (0-based reduced
/// coordinates, `+iω` first) at a prescribed first-harmonic amplitude of
/// the 0-based state `coord`. Other reduced coordinates are held at zero.
pub fn backbone_point(
    w: &ManifoldExpansion,
    f: &ReducedDynamics,
    pair: (usize, usize),
    coord: usize,
    amplitude: f64,
) -> Result<BackbonePoint, ManifoldError> {
    let m = w.m();
    if pair.0 >= m || pair.1 >= m || pair.0 == pair.1 {
        return Err(ManifoldError::Dimension(format!("invalid master pair ({}, {})", pair.0 + 1, pair.1 + 1)));
    }
    if coord >= w.n() {
        return Err(ManifoldError::Dimension(format!("coordinate {} beyond n = {}", coord + 1, w.n())));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(ManifoldError::Dimension(format!("amplitude must be finite and non-negative, got {amplitude}")));
    }
    let amp = |rho: f64| harmonic_amplitude(w, pair, coord, rho).norm();
    let rho = if amplitude == 0.0 {
        0.0
    } else {
        let slope = amp(1.0e-8) / 1.0e-8;
        if slope == 0.0 {
            return Err(ManifoldError::Dimension(format!("coordinate {} does not respond to the pair", coord + 1)));
        }
        let mut hi = amplitude / slope;
        let mut guard = 0;
        while amp(hi) < amplitude {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(ManifoldError::Dimension("amplitude not reached on the backbone".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if amp(mid) < amplitude {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let rate = if rho == 0.0 {
        f.get(&Monomial::single(pair.0 + 1)).map(|c| c[pair.0]).unwrap_or_default()
    } else {
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        z[pair.0] = Complex64::new(rho, 0.0);
        z[pair.1] = Complex64::new(rho, 0.0);
        rom_evaluate(f, &z)?[pair.0] / rho
    };
    Ok(BackbonePoint { amplitude, frequency: rate.im, damping: -rate.re, rho })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mono(v: &[usize]) -> Monomial {
        Monomial::new(v.to_vec()).unwrap()
    }

    #[test]
    fn map_and_jacobian_agree_with_finite_differences() {
        let mut w = ManifoldExpansion::new(2, 2);
        w.insert(mono(&[1]), vec![c(1.0, 0.0), c(0.0, 1.0)]);
        w.insert(mono(&[2]), vec![c(1.0, 0.0), c(0.0, -1.0)]);
        w.insert(mono(&[1, 2]), vec![c(0.3, 0.1), c(-0.2, 0.0)]);
        w.insert(mono(&[1, 1, 2]), vec![c(0.0, 0.5), c(1.0, 0.0)]);
        let z = [c(0.2, 0.1), c(-0.3, 0.05)];
        let y = rom_map(&w, &z).unwrap();
        let z12 = z[0] * z[1];
        assert!((y[0] - (z[0] + z[1] + c(0.3, 0.1) * z12 + c(0.0, 0.5) * z[0] * z12)).norm() < 1e-15);
        let jac = manifold_jacobian(&w, &z).unwrap();
        let h = 1e-7;
        for j in 0..2 {
            let mut zp = z;
            zp[j] += h;
            let yp = rom_map(&w, &zp).unwrap();
            for i in 0..2 {
                assert!(((yp[i] - y[i]) / h - jac[(i, j)]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn residual_matches_direct_formula() {
        let mut sys = PolySystem::new(2);
        sys.add_real_term(0, &[2], 1.0).unwrap();
        sys.add_real_term(1, &[1], -1.0).unwrap();
        sys.add_real_term(1, &[1, 1], 0.3).unwrap();
        let mut w = ManifoldExpansion::new(2, 2);
        w.insert(mono(&[1]), vec![c(1.0, 0.0), c(0.0, 1.0)]);
        w.insert(mono(&[2]), vec![c(1.0, 0.0), c(0.0, -1.0)]);
        w.insert(mono(&[1, 2]), vec![c(0.2, 0.0), c(0.1, 0.1)]);
        let mut f = ReducedDynamics::new(2);
        f.insert(mono(&[1]), vec![c(0.0, 1.1), c(0.0, 0.0)]);
        f.insert(mono(&[2]), vec![c(0.0, 0.0), c(0.0, -1.0)]);
        f.insert(mono(&[1, 1]), vec![c(0.5, 0.0), c(0.0, 0.0)]);
        let z = [c(0.3, 0.1), c(0.2, -0.2)];
        let lhs = manifold_jacobian(&w, &z).unwrap().matvec(&rom_evaluate(&f, &z).unwrap()).unwrap();
        let rhs = sys.evaluate(&rom_map(&w, &z).unwrap());
        let direct = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let r = invariance_residual(&sys, &w, &f, &z).unwrap();
        assert!((r - direct).abs() < 1e-14 * direct.max(1.0), "{r} vs {direct}");
    }

    #[test]
    fn rom_map_rejects_wrong_length() {
        let w = ManifoldExpansion::new(2, 1);
        assert!(rom_map(&w, &[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn linear_backbone_is_flat() {
        let omega = 1.7;
        let mut w = ManifoldExpansion::new(2, 2);
        w.insert(mono(&[1]), vec![c(0.5, 0.0), c(0.0, 0.5 * omega)]);
        w.insert(mono(&[2]), vec![c(0.5, 0.0), c(0.0, -0.5 * omega)]);
        let mut f = ReducedDynamics::new(2);
        f.insert(mono(&[1]), vec![c(-0.01, omega), c(0.0, 0.0)]);
        f.insert(mono(&[2]), vec![c(0.0, 0.0), c(-0.01, -omega)]);
        let pt = backbone_point(&w, &f, (0, 1), 0, 0.3).unwrap();
        assert!((pt.rho - 0.3).abs() < 1e-12);
        assert!((pt.frequency - omega).abs() < 1e-14);
        assert!((pt.damping - 0.01).abs() < 1e-14);
        let zero = backbone_point(&w, &f, (0, 1), 0, 0.0).unwrap();
        assert_eq!(zero.frequency, omega);
    }
}
