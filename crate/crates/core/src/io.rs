//! JSON ingestion of system files and (de)serialization of reduction results.
//!
//! Indices in files are 1-based; complex numbers are `[re, im]` pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geomorph::MorphGradient;
use crate::kronalg::Monomial;
use crate::manifold::{ManifoldExpansion, ReducedDynamics, Reduction, ResonanceKind};
use crate::polyode::{ForceTerm, Forcing, MechSystem, ParameterTerms, PolyError, PolySystem};
use crate::weakform::{Elasticity, PointState, WeakFormError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    System(#[from] PolyError),
    #[error(transparent)]
    WeakForm(#[from] WeakFormError),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema { path: path.into(), message: message.into() }
}

fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, IoError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })
}

pub fn read_json(path: &Path) -> Result<Value, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    Ok(serde_json::from_str(&text)?)
}

/// A complex number written either as a plain real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

pub fn complex_pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

/// Dense matrix as nested rows; a bare number is accepted for 1×1.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixValue {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    fn into_matrix(self, path: &str) -> Result<DMatrix<f64>, IoError> {
        match self {
            MatrixValue::Scalar(x) => Ok(DMatrix::from_element(1, 1, x)),
            MatrixValue::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
                    return Err(schema(format!("{path}[{i}]"), format!("row has {} entries, expected {c}", row.len())));
                }
                Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct TermRecord {
    row: usize,
    indices: Vec<usize>,
    value: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ForcingRecord {
    vector: Vec<f64>,
    #[serde(default)]
    omega: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterRecord {
    #[serde(default)]
    stiffness: Option<MatrixValue>,
    #[serde(default)]
    quadratic: Vec<TermRecord>,
    #[serde(default)]
    cubic: Vec<TermRecord>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MechanicalRecord {
    #[serde(default)]
    #[allow(dead_code)]
    kind: Option<String>,
    n2: usize,
    mass: MatrixValue,
    #[serde(default)]
    damping_alpha: f64,
    #[serde(default)]
    damping_beta: f64,
    stiffness: MatrixValue,
    #[serde(default)]
    quadratic: Vec<TermRecord>,
    #[serde(default)]
    cubic: Vec<TermRecord>,
    #[serde(default)]
    forcing: Option<ForcingRecord>,
    #[serde(default)]
    parameter: Option<ParameterRecord>,
}

#[derive(Debug, Clone, Deserialize)]
struct PolyTermRecord {
    row: usize,
    indices: Vec<usize>,
    value: ComplexValue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialRecord {
    #[serde(default)]
    #[allow(dead_code)]
    kind: Option<String>,
    n: usize,
    #[serde(default)]
    terms: Vec<PolyTermRecord>,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SystemFile {
    Mechanical(MechSystem),
    Polynomial(PolySystem),
}

/// Parsed system plus non-fatal notes (e.g. merged duplicate monomials).
#[derive(Debug, Clone)]
pub struct Parsed {
    pub system: SystemFile,
    pub warnings: Vec<String>,
}

pub fn parse_system_file(path: &Path) -> Result<Parsed, IoError> {
    parse_system_value(read_json(path)?)
}

pub fn parse_system_value(value: Value) -> Result<Parsed, IoError> {
    let kind = match value.get("kind") {
        Some(Value::String(k)) => k.clone(),
        Some(_) => return Err(schema("kind", "expected a string")),
        None if value.get("n2").is_some() => "mechanical".into(),
        None => "polynomial".into(),
    };
    let mut warnings = Vec::new();
    let system = match kind.as_str() {
        "mechanical" => SystemFile::Mechanical(mechanical(from_value(value)?, &mut warnings)?),
        "polynomial" => SystemFile::Polynomial(polynomial(from_value(value)?, &mut warnings)?),
        other => return Err(schema("kind", format!("unknown kind {other:?}, expected \"mechanical\" or \"polynomial\""))),
    };
    Ok(Parsed { system, warnings })
}

fn force_terms(records: Vec<TermRecord>, n2: usize, path: &str, warnings: &mut Vec<String>) -> Result<Vec<ForceTerm>, IoError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, t) in records.into_iter().enumerate() {
        let at = format!("{path}[{i}]");
        if t.row == 0 || t.row > n2 {
            return Err(schema(format!("{at}.row"), format!("row {} outside 1..={n2}", t.row)));
        }
        if let Some(&bad) = t.indices.iter().find(|&&k| k == 0 || k > n2) {
            return Err(schema(format!("{at}.indices"), format!("index {bad} outside 1..={n2}")));
        }
        let canon = Monomial::new(t.indices.clone()).map_err(|e| schema(format!("{at}.indices"), e.to_string()))?.canonical().0;
        if let Some(first) = seen.insert((t.row, canon.clone()), i) {
            warnings.push(format!("{at} duplicates {path}[{first}] (monomial {canon}); coefficients summed"));
        }
        out.push(ForceTerm { row: t.row - 1, indices: t.indices, value: t.value });
    }
    Ok(out)
}

fn mechanical(rec: MechanicalRecord, warnings: &mut Vec<String>) -> Result<MechSystem, IoError> {
    let n2 = rec.n2;
    let square = |m: DMatrix<f64>, path: &str| {
        if m.nrows() != n2 || m.ncols() != n2 {
            Err(schema(path, format!("shape {}x{}, expected {n2}x{n2}", m.nrows(), m.ncols())))
        } else {
            Ok(m)
        }
    };
    let mut sys = MechSystem::linear(square(rec.mass.into_matrix("mass")?, "mass")?, square(rec.stiffness.into_matrix("stiffness")?, "stiffness")?);
    sys.damping_alpha = rec.damping_alpha;
    sys.damping_beta = rec.damping_beta;
    sys.quadratic = force_terms(rec.quadratic, n2, "quadratic", warnings)?;
    sys.cubic = force_terms(rec.cubic, n2, "cubic", warnings)?;
    if let Some(f) = rec.forcing {
        if f.vector.len() != n2 {
            return Err(schema("forcing.vector", format!("length {}, expected {n2}", f.vector.len())));
        }
        sys.forcing = Some(Forcing { vector: f.vector, omega: f.omega });
    }
    if let Some(p) = rec.parameter {
        let stiffness = match p.stiffness {
            Some(k) => Some(square(k.into_matrix("parameter.stiffness")?, "parameter.stiffness")?),
            None => None,
        };
        sys.parameter = Some(ParameterTerms {
            stiffness,
            quadratic: force_terms(p.quadratic, n2, "parameter.quadratic", warnings)?,
            cubic: force_terms(p.cubic, n2, "parameter.cubic", warnings)?,
        });
    }
    sys.validate()?;
    Ok(sys)
}

fn polynomial(rec: PolynomialRecord, warnings: &mut Vec<String>) -> Result<PolySystem, IoError> {
    let n = rec.n;
    if n == 0 {
        return Err(schema("n", "dimension must be positive"));
    }
    let mut sys = PolySystem::new(n);
    let mut seen = BTreeMap::new();
    for (i, t) in rec.terms.into_iter().enumerate() {
        let at = format!("terms[{i}]");
        if t.row == 0 || t.row > n {
            return Err(schema(format!("{at}.row"), format!("row {} outside 1..={n}", t.row)));
        }
        if let Some(&bad) = t.indices.iter().find(|&&k| k == 0 || k > n) {
            return Err(schema(format!("{at}.indices"), format!("index {bad} outside 1..={n}")));
        }
        let canon = Monomial::new(t.indices.clone()).map_err(|e| schema(format!("{at}.indices"), e.to_string()))?.canonical().0;
        if let Some(first) = seen.insert((t.row, canon.clone()), i) {
            warnings.push(format!("{at} duplicates terms[{first}] (monomial {canon}); coefficients summed"));
        }
        sys.add_term(t.row - 1, &t.indices, t.value.into())?;
    }
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub monomial: String,
    pub sigma: [f64; 2],
    pub matched_eigenvalue: [f64; 2],
    /// 1-based spectral index.
    pub matched_index: usize,
    pub kind: String,
}

/// Reduction output document. Columns that are exactly zero are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomRecord {
    pub eigenvalues: Vec<[f64; 2]>,
    /// 1-based spectral indices, in reduced-coordinate order.
    pub masters: Vec<usize>,
    #[serde(rename = "W")]
    pub w: BTreeMap<String, Vec<[f64; 2]>>,
    pub f: BTreeMap<String, Vec<[f64; 2]>>,
    pub reports: Vec<ReportRecord>,
}

fn nonzero(col: &[Complex64]) -> bool {
    col.iter().any(|x| *x != Complex64::new(0.0, 0.0))
}

fn column_record(col: &[Complex64]) -> Vec<[f64; 2]> {
    col.iter().copied().map(complex_pair).collect()
}

impl RomRecord {
    pub fn from_reduction(r: &Reduction) -> Self {
        // keys sort as strings in the map; order-then-lexicographic is recovered on load
        Self {
            eigenvalues: r.spectrum.eigenvalues.iter().copied().map(complex_pair).collect(),
            masters: r.spectrum.masters.iter().map(|k| k + 1).collect(),
            w: r.expansion.columns().filter(|(_, c)| nonzero(c)).map(|(nu, c)| (nu.key(), column_record(c))).collect(),
            f: r.dynamics.columns().filter(|(_, c)| nonzero(c)).map(|(nu, c)| (nu.key(), column_record(c))).collect(),
            reports: r
                .reports
                .iter()
                .map(|rep| ReportRecord {
                    monomial: rep.monomial.key(),
                    sigma: complex_pair(rep.sigma),
                    matched_eigenvalue: complex_pair(rep.matched_eigenvalue),
                    matched_index: rep.matched_index + 1,
                    kind: rep.kind.as_str().to_string(),
                })
                .collect(),
        }
    }

    pub fn outer_resonance(&self) -> bool {
        self.reports.iter().any(|r| r.kind == ResonanceKind::Outer.as_str())
    }

    /// Rebuilds the manifold and reduced dynamics.
    pub fn to_rom(&self) -> Result<(ManifoldExpansion, ReducedDynamics), IoError> {
        let m = self.masters.len();
        let n = self.w.values().next().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(schema("masters", "reduction has no master modes or no manifold columns"));
        }
        let mut w = ManifoldExpansion::new(m, n);
        let mut f = ReducedDynamics::new(m);
        let parse_key = |key: &str, path: &str| -> Result<Monomial, IoError> {
            let nu: Monomial = key.parse().map_err(|e: crate::kronalg::KronError| schema(path, e.to_string()))?;
            if !nu.is_canonical() || nu.max_index() > m {
                return Err(schema(path, format!("({key}) is not a canonical monomial over {m} coordinates")));
            }
            Ok(nu)
        };
        let to_col = |c: &[[f64; 2]]| c.iter().map(|&[re, im]| Complex64::new(re, im)).collect::<Vec<_>>();
        for (key, col) in &self.w {
            let path = format!("W.{key}");
            let nu = parse_key(key, &path)?;
            if col.len() != n {
                return Err(schema(path, format!("length {}, expected {n}", col.len())));
            }
            w.insert(nu, to_col(col));
        }
        for (key, col) in &self.f {
            let path = format!("f.{key}");
            let nu = parse_key(key, &path)?;
            if col.len() != m {
                return Err(schema(path, format!("length {}, expected {m}", col.len())));
            }
            f.insert(nu, to_col(col));
        }
        Ok((w, f))
    }
}

/// `expand` input: a 3×3 morph gradient and the inverse-determinant order.
#[derive(Debug, Clone, Deserialize)]
pub struct ExpandInput {
    pub morph_gradient: [[f64; 3]; 3],
    pub order: usize,
    #[serde(default)]
    pub mu_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandOutput {
    pub h: [f64; 3],
    pub adj: [[[f64; 3]; 3]; 3],
    pub a: Vec<f64>,
    pub valid_range_check: bool,
}

pub fn parse_expand(value: Value) -> Result<ExpandInput, IoError> {
    let input: ExpandInput = from_value(value)?;
    if input.morph_gradient.iter().flatten().any(|x| !x.is_finite()) {
        return Err(schema("morph_gradient", "entries must be finite"));
    }
    if let Some([lo, hi]) = input.mu_range {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(schema("mu_range", "expected finite [lo, hi] with lo <= hi"));
        }
    }
    Ok(input)
}

pub fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
    }
    out
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElasticityRecord {
    lambda: f64,
    mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    grad_u: [[f64; 3]; 3],
    grad_w: [[f64; 3]; 3],
    morph_gradient: [[f64; 3]; 3],
    #[serde(default)]
    accel_dot_w: f64,
    #[serde(default = "unit_density")]
    density: f64,
}

fn unit_density() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegrandRecord {
    elasticity: ElasticityRecord,
    points: Vec<PointRecord>,
}

/// `integrand` input: `{"elasticity": {"lambda", "mu"}, "points": [...]}`.
pub fn parse_integrand(value: Value) -> Result<(Elasticity, Vec<PointState>), IoError> {
    let rec: IntegrandRecord = from_value(value)?;
    let e = Elasticity::new(rec.elasticity.lambda, rec.elasticity.mu)?;
    let mut points = Vec::with_capacity(rec.points.len());
    for (i, p) in rec.points.into_iter().enumerate() {
        let s = PointState {
            grad_u: Matrix3::from_fn(|r, c| p.grad_u[r][c]),
            grad_w: Matrix3::from_fn(|r, c| p.grad_w[r][c]),
            grad_morph: MorphGradient::from_rows(p.morph_gradient),
            accel_dot_w: p.accel_dot_w,
            density: p.density,
        };
        s.validate().map_err(|e| schema(format!("points[{i}]"), e.to_string()))?;
        points.push(s);
    }
    Ok((e, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minimal_duffing_file() {
        let v = json!({"n2": 1, "mass": 1.0, "stiffness": [[2.0]], "cubic": [{"row": 1, "indices": [1, 1, 1], "value": 0.5}]});
        let parsed = parse_system_value(v).unwrap();
        let SystemFile::Mechanical(m) = parsed.system else { panic!("expected mechanical") };
        assert_eq!(m.cubic.len(), 1);
        assert_eq!(m.cubic[0].row, 0);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn permuted_duplicates_are_summed_with_warning() {
        let v = json!({"kind": "polynomial", "n": 2, "terms": [
            {"row": 1, "indices": [1, 2], "value": 1.0},
            {"row": 1, "indices": [2, 1], "value": [0.5, 1.0]},
        ]});
        let parsed = parse_system_value(v).unwrap();
        let SystemFile::Polynomial(p) = parsed.system else { panic!("expected polynomial") };
        assert_eq!(p.coefficient(0, &Monomial::new(vec![1, 2]).unwrap()), Complex64::new(1.5, 1.0));
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let v = json!({"kind": "mechanical", "n2": 1, "mass": 1.0, "stiffness": 1.0, "cubic": [{"row": 1, "indices": [1], "value": "x"}]});
        let err = parse_system_value(v).unwrap_err().to_string();
        assert!(err.contains("cubic[0].value"), "{err}");
        let v = json!({"kind": "mechanical", "n2": 1, "mass": 1.0, "stiffness": 1.0, "cubic": [{"row": 2, "indices": [1], "value": 1.0}]});
        assert!(parse_system_value(v).unwrap_err().to_string().contains("cubic[0].row"));
        let v = json!({"kind": "membrane"});
        assert!(matches!(parse_system_value(v), Err(IoError::Schema { .. })));
    }

    #[test]
    fn empty_nonlinear_lists_accepted() {
        let v = json!({"kind": "mechanical", "n2": 2, "mass": [[1, 0], [0, 1]], "stiffness": [[2, -1], [-1, 2]], "quadratic": []});
        assert!(parse_system_value(v).is_ok());
    }

    #[test]
    fn non_spd_mass_rejected() {
        let v = json!({"n2": 1, "mass": -1.0, "stiffness": 1.0});
        assert!(matches!(parse_system_value(v), Err(IoError::System(_))));
    }
}
