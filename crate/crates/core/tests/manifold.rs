//! Spectral decomposition, homological equations and reduced models
//! against independent polynomial arithmetic.

mod common;

use std::collections::BTreeMap;

use common::{c, dense_block, harmonic_balance_frequency, max_diff, random_complex, rng, Dense};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use ssmparam::kronalg::{canonical_monomials, DenseMatrix, Monomial};
use ssmparam::manifold::{
    assemble_rhs, backbone_point, compute_spectrum, eigendecompose, reduce, rom_evaluate, rom_map, sigma, solve_monomial,
    ManifoldExpansion, ReduceOptions, ReducedDynamics, Reduction, ResonanceKind, ResonanceTolerance,
};
use ssmparam::polyode::{second_to_first_order, ForceTerm, MechSystem, PolySystem};

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Two coupled oscillators with quadratic and cubic springs.
fn two_dof(zeta: f64) -> PolySystem {
    let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 3.0]);
    let mut m = MechSystem::linear(DMatrix::identity(2, 2), k);
    m.damping_alpha = zeta;
    m.quadratic.push(ForceTerm { row: 0, indices: vec![1, 2], value: 0.4 });
    m.quadratic.push(ForceTerm { row: 1, indices: vec![1, 1], value: -0.3 });
    m.cubic.push(ForceTerm { row: 0, indices: vec![1, 1, 1], value: 0.5 });
    m.cubic.push(ForceTerm { row: 1, indices: vec![1, 2, 2], value: 0.2 });
    second_to_first_order(&m).unwrap()
}

fn real_matrix(n: usize, r: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::new(n, n, (0..n * n).map(|_| c(r.gen_range(-1.0..1.0), 0.0)).collect()).unwrap()
}

#[test]
fn spectrum_reconstructs_matrix_and_is_biorthogonal() {
    let mut r = rng(31);
    for n in 2..=6 {
        for _ in 0..5 {
            let a = real_matrix(n, &mut r);
            let spec = eigendecompose(&a).unwrap();
            let (rm, lm) = (&spec.right, &spec.left);
            let mut recon = DenseMatrix::zeros(n, n);
            let mut gram = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    recon[(i, j)] = (0..n).map(|k| rm[(i, k)] * spec.eigenvalues[k] * lm[(j, k)].conj()).sum();
                    gram[(i, j)] = (0..n).map(|k| lm[(k, i)].conj() * rm[(k, j)]).sum();
                }
            }
            let scale = spec.condition.max(1.0);
            assert!(recon.max_abs_diff(&a) < 1e-12 * scale, "n = {n}");
            assert!(gram.max_abs_diff(&DenseMatrix::identity(n)) < 1e-12 * scale, "n = {n}");
            for (k, lam) in spec.eigenvalues.iter().enumerate() {
                let v = spec.right_vector(k);
                let av = a.matvec(&v).unwrap();
                let lv: Vec<Complex64> = v.iter().map(|x| lam * x).collect();
                assert!(max_diff(&av, &lv) < 1e-12 * scale);
            }
        }
    }
}

#[test]
fn eigenvalues_are_ordered_slow_first_with_adjacent_conjugates() {
    let spec = compute_spectrum(&two_dof(0.02), &[0, 1]).unwrap();
    let ev = &spec.eigenvalues;
    for k in (0..4).step_by(2) {
        assert!(ev[k].im > 0.0);
        assert_eq!(ev[k + 1], ev[k].conj());
    }
    assert!(ev[0].im < ev[2].im);
}

/// Checks `(σI − A₁)W_ν + W₁f_ν = R_ν` for every monomial of order ≥ 2.
fn assert_homological(sys: &PolySystem, red: &Reduction) {
    let spec = &red.spectrum;
    let (n, m) = (sys.dim(), spec.m());
    let a1 = sys.linear_matrix();
    for p in 2..=red.expansion.max_order() {
        for nu in canonical_monomials(m, p) {
            let wv = red.expansion.get(&nu).unwrap();
            let fv = red.dynamics.get(&nu).unwrap();
            let rhs = assemble_rhs(&nu, sys, &red.expansion, &red.dynamics).unwrap();
            let s = sigma(&nu, spec);
            let aw = a1.matvec(wv).unwrap();
            let mut lhs: Vec<Complex64> = (0..n).map(|i| s * wv[i] - aw[i]).collect();
            for (j, fj) in fv.iter().enumerate() {
                let w1 = red.expansion.get(&Monomial::single(j + 1)).unwrap();
                for i in 0..n {
                    lhs[i] += w1[i] * fj;
                }
            }
            let gap = norm(&lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect::<Vec<_>>());
            assert!(gap <= 1e-10 * (norm(&rhs) + 1.0), "({nu}): gap {gap:e}");
        }
    }
}

#[test]
fn homological_equations_hold_for_all_masters_and_pair() {
    let sys = two_dof(0.02);
    for masters in [vec![0, 1], vec![0, 1, 2, 3]] {
        let red = reduce(&sys, &masters, &ReduceOptions { max_order: 4, ..Default::default() }).unwrap();
        assert_homological(&sys, &red);
    }
}

/// Sparse polynomial in `m` variables keyed by exponent counts.
type Poly = BTreeMap<Vec<usize>, Complex64>;

fn poly_mul(a: &Poly, b: &Poly, max_deg: usize) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<usize> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            if e.iter().sum::<usize>() <= max_deg {
                *out.entry(e).or_default() += ca * cb;
            }
        }
    }
    out
}

fn poly_add(acc: &mut Poly, b: &Poly, scale: Complex64) {
    for (e, v) in b {
        *acc.entry(e.clone()).or_default() += scale * v;
    }
}

fn poly_diff(a: &Poly, var: usize) -> Poly {
    let mut out = Poly::new();
    for (e, v) in a {
        if e[var] > 0 {
            let mut d = e.clone();
            d[var] -= 1;
            *out.entry(d).or_default() += v * e[var] as f64;
        }
    }
    out
}

/// Component polynomials of a column table, skipping orders ≥ `skip`.
fn component_polys(cols: &[(Monomial, Vec<Complex64>)], m: usize, rows: usize, skip: usize) -> Vec<Poly> {
    let mut out = vec![Poly::new(); rows];
    for (nu, col) in cols.iter().filter(|(nu, _)| nu.order() < skip) {
        let e = nu.counts(m);
        for (i, v) in col.iter().enumerate() {
            *out[i].entry(e.clone()).or_default() += v;
        }
    }
    out
}

/// Order-`p` coefficients of `DW·f − A(W)` computed by polynomial algebra
/// from the coefficients of order below `p`.
fn taylor_known_terms(sys: &PolySystem, w: &ManifoldExpansion, f: &ReducedDynamics, p: usize) -> Vec<Poly> {
    let m = w.m();
    let wc: Vec<_> = w.columns().map(|(k, v)| (k.clone(), v.clone())).collect();
    let fc: Vec<_> = f.columns().map(|(k, v)| (k.clone(), v.clone())).collect();
    let wp = component_polys(&wc, m, w.n(), p);
    let fp = component_polys(&fc, m, m, p);
    let mut res = vec![Poly::new(); w.n()];
    for (i, wi) in wp.iter().enumerate() {
        for (j, fj) in fp.iter().enumerate() {
            let d = poly_diff(wi, j);
            poly_add(&mut res[i], &poly_mul(&d, fj, p), c(1.0, 0.0));
        }
    }
    for (mono, rows) in sys.terms() {
        let mut prod: Poly = [(vec![0; m], c(1.0, 0.0))].into_iter().collect();
        for &k in mono.indices() {
            prod = poly_mul(&prod, &wp[k - 1], p);
        }
        for (&row, &a) in rows {
            poly_add(&mut res[row], &prod, -a);
        }
    }
    res
}

#[test]
fn rhs_matches_taylor_expansion_of_invariance() {
    let sys = two_dof(0.05);
    for masters in [vec![0, 1], vec![0, 1, 2, 3]] {
        let red = reduce(&sys, &masters, &ReduceOptions { max_order: 3, ..Default::default() }).unwrap();
        let m = masters.len();
        for p in 2..=3 {
            let known = taylor_known_terms(&sys, &red.expansion, &red.dynamics, p);
            for nu in canonical_monomials(m, p) {
                let e = nu.counts(m);
                let oracle: Vec<Complex64> = known.iter().map(|poly| -poly.get(&e).copied().unwrap_or_default()).collect();
                let rhs = assemble_rhs(&nu, &sys, &red.expansion, &red.dynamics).unwrap();
                assert!(max_diff(&rhs, &oracle) < 1e-12 * (1.0 + norm(&oracle)), "({nu})");
            }
        }
    }
}

#[test]
fn solve_order_within_an_order_is_irrelevant() {
    let sys = two_dof(0.02);
    let masters = [0, 1, 2, 3];
    let opts = ReduceOptions { max_order: 3, ..Default::default() };
    let full = reduce(&sys, &masters, &opts).unwrap();
    let spec = &full.spectrum;
    let mut w = ManifoldExpansion::new(4, sys.dim());
    let mut f = ReducedDynamics::new(4);
    for (nu, col) in full.expansion.columns().filter(|(nu, _)| nu.order() == 1) {
        w.insert(nu.clone(), col.clone());
    }
    for (nu, col) in full.dynamics.columns().filter(|(nu, _)| nu.order() == 1) {
        f.insert(nu.clone(), col.clone());
    }
    for p in 2..=3 {
        let mut order = canonical_monomials(4, p);
        order.reverse();
        let sols: Vec<_> = order
            .iter()
            .map(|nu| {
                let rhs = assemble_rhs(nu, &sys, &w, &f).unwrap();
                (nu.clone(), solve_monomial(nu, &rhs, spec, &opts.tolerance).unwrap())
            })
            .collect();
        for (nu, s) in sols {
            w.insert(nu.clone(), s.w);
            f.insert(nu, s.f);
        }
    }
    assert_eq!(w, full.expansion);
    assert_eq!(f, full.dynamics);
}

fn dense_power_sum(blocks: &[Dense], z: &[Complex64]) -> Vec<Complex64> {
    let zd = Dense { rows: z.len(), cols: 1, data: z.to_vec() };
    let mut pw = Dense::identity(1);
    let mut out = vec![c(0.0, 0.0); blocks[0].rows];
    for b in blocks {
        pw = pw.kron(&zd);
        for (o, v) in out.iter_mut().zip(b.matvec(&pw.data)) {
            *o += v;
        }
    }
    out
}

#[test]
fn rom_map_and_dynamics_match_dense_kronecker_sums() {
    let mut r = rng(41);
    let (m, n, p) = (3, 4, 3);
    let w = common::random_expansion(m, n, p, &mut r);
    let f = common::random_dynamics(m, p, &mut r);
    let wb: Vec<Dense> = (1..=p).map(|q| dense_block(m, q, n, |nu| w.get(nu).map(<[_]>::to_vec))).collect();
    let fb: Vec<Dense> = (1..=p).map(|q| dense_block(m, q, m, |nu| f.get(nu).map(<[_]>::to_vec))).collect();
    for _ in 0..5 {
        let z: Vec<Complex64> = (0..m).map(|_| random_complex(&mut r)).collect();
        assert!(max_diff(&rom_map(&w, &z).unwrap(), &dense_power_sum(&wb, &z)) < 1e-13);
        assert!(max_diff(&rom_evaluate(&f, &z).unwrap(), &dense_power_sum(&fb, &z)) < 1e-13);
    }
}

#[test]
fn damped_duffing_absorbs_near_resonance_with_loose_tolerance() {
    let zeta = 0.01;
    let mut m = MechSystem::duffing(1.0, 0.5);
    m.damping_alpha = 2.0 * zeta;
    let sys = second_to_first_order(&m).unwrap();
    // |σ(1,1,2) − λ₁| = 2ζω, so the relative tolerance must exceed 0.02
    let tolerance = ResonanceTolerance { rel: 0.03, abs: 1e-8 };
    let red = reduce(&sys, &[0, 1], &ReduceOptions { max_order: 3, tolerance, threads: 1 }).unwrap();
    let keys: Vec<String> = red.reports.iter().filter(|r| r.kind == ResonanceKind::Inner && r.monomial.order() == 3).map(|r| r.monomial.key()).collect();
    assert_eq!(keys, ["1,1,2", "1,2,2"]);
    let bb = backbone_point(&red.expansion, &red.dynamics, (0, 1), 0, 0.01).unwrap();
    let hb = harmonic_balance_frequency(1.0, 0.5, 0.01);
    assert!((bb.frequency - hb).abs() / hb < 1e-4, "{} vs {hb}", bb.frequency);
    assert!((bb.damping - zeta).abs() < 1e-4);

    let strict = reduce(&sys, &[0, 1], &ReduceOptions { max_order: 3, ..Default::default() }).unwrap();
    assert!(strict.reports.iter().all(|r| r.monomial.order() == 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn homological_equations_hold_for_random_chains(
        k12 in 0.1f64..1.0, k2 in 1.5f64..4.0, q in -1.0f64..1.0, g in -1.0f64..1.0, zeta in 0.0f64..0.05,
    ) {
        let k = DMatrix::from_row_slice(2, 2, &[1.0 + k12, -k12, -k12, k2 + k12]);
        let w = common::chain_frequencies(&k);
        let ratio = w[1] / w[0];
        prop_assume!((ratio - 2.0).abs() > 0.05 && (ratio - 3.0).abs() > 0.05);
        let mut m = MechSystem::linear(DMatrix::identity(2, 2), k);
        m.damping_alpha = zeta;
        m.quadratic.push(ForceTerm { row: 1, indices: vec![1, 2], value: q });
        m.cubic.push(ForceTerm { row: 0, indices: vec![1, 1, 2], value: g });
        let sys = second_to_first_order(&m).unwrap();
        match reduce(&sys, &[0, 1], &ReduceOptions { max_order: 3, ..Default::default() }) {
            Ok(red) => assert_homological(&sys, &red),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
