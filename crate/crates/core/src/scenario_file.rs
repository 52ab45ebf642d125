//! JSON scenario files, model-fiber descriptions and complex-vector literals.
//!
//! ```json
//! {"schema_version": 1, "family": "ellipsoid", "n": 2, "level": 1,
//!  "parameters": {"axes": [2, 1]}, "conjugate_symmetric": true}
//! ```
//!
//! Family parameters may sit under `parameters` or at the top level. Complex
//! numbers are written as a number, a numeric string, or a `[re, im]` pair.
//!
//! | family              | parameters                                                  |
//! |---------------------|-------------------------------------------------------------|
//! | `ball`              | `center_poly`, `radius` (1), `exponent` (2)                 |
//! | `ellipsoid`         | `axes` (required), `center_poly`, `exponent` (2)            |
//! | `shifted-conjugate` | `shift` (1), `exponent` (1)                                 |
//! | `circled-radius`    | `alpha` (required), `exponent` (2)                          |
//! | `sum-of-squares`    | `terms` (required: `{coef, powers}`), `center_poly`         |
//!
//! `center_poly[j][k]` is the degree-`k` coefficient of component `j`; missing
//! components are zero.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fiber::{FamilyId, FiberScenario, ModulusPolynomial, MonomialTerm, WeightedDistance};
use crate::lempert::ModelFiber;
use crate::{AnalyticMap, C64};

pub const SCHEMA_VERSION: u64 = 1;
pub const MAX_DIMENSION: usize = 64;
pub const MAX_POLY_DEGREE: usize = 256;
pub const MAX_TERMS: usize = 256;
pub const MAX_POWER: u32 = 16;
const SYMMETRY_PROBES: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "default_version")]
    pub schema_version: u64,
    pub family: String,
    pub n: usize,
    pub level: f64,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugate_symmetric: Option<bool>,
}

fn default_version() -> u64 {
    SCHEMA_VERSION
}

const TOP_LEVEL: [&str; 6] = ["schema_version", "family", "n", "level", "parameters", "conjugate_symmetric"];

impl ScenarioFile {
    /// Parses and normalizes a scenario document (top-level parameters are
    /// moved under `parameters`).
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(Error::Schema("scenario must be a JSON object".into()));
        };
        let mut params = match obj.remove("parameters") {
            None => Map::new(),
            Some(Value::Object(m)) => m,
            Some(_) => return Err(Error::Schema("`parameters` must be an object".into())),
        };
        let extra: Vec<String> = obj.keys().filter(|k| !TOP_LEVEL.contains(&k.as_str())).cloned().collect();
        for k in extra {
            let v = obj.remove(&k).expect("present");
            if params.insert(k.clone(), v).is_some() {
                return Err(Error::Schema(format!("parameter `{k}` given twice")));
            }
        }
        obj.insert("parameters".into(), Value::Object(params));
        let file: ScenarioFile = serde_json::from_value(Value::Object(obj)).map_err(|e| Error::Schema(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema version {}", file.schema_version)));
        }
        if !file.level.is_finite() {
            return Err(Error::Schema("level must be finite".into()));
        }
        Ok(file)
    }

    pub fn family_id(&self) -> Result<FamilyId> {
        match self.family.as_str() {
            "ball" => Ok(FamilyId::Ball),
            "ellipsoid" => Ok(FamilyId::Ellipsoid),
            "shifted-conjugate" => Ok(FamilyId::ShiftedConjugate),
            "circled-radius" => Ok(FamilyId::CircledRadius),
            "sum-of-squares" | "custom-sum-of-squares" => Ok(FamilyId::CustomSumOfSquares),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    /// Builds the scenario and verifies any declared conjugate symmetry.
    pub fn build(&self) -> Result<FiberScenario> {
        let family = self.family_id()?;
        let n = self.n;
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        if n > MAX_DIMENSION {
            return Err(Error::Schema(format!("n = {n} exceeds the supported maximum {MAX_DIMENSION}")));
        }
        let p = Params::new(&self.parameters);
        let scenario = match family {
            FamilyId::Ball => {
                p.only(&["center_poly", "radius", "exponent"])?;
                let center = p.center(n)?;
                let radius = p.positive("radius", 1.0)?;
                FiberScenario::ball(center, radius, p.exponent(2)?, self.level)
            }
            FamilyId::Ellipsoid => {
                p.only(&["axes", "center_poly", "exponent"])?;
                let axes = p.real_list("axes")?;
                if axes.len() != n || axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return Err(Error::Schema(format!("`axes` must hold {n} positive numbers")));
                }
                let center = p.center(n)?;
                FiberScenario::ellipsoid(&axes, Some(center), p.exponent(2)?, self.level)
            }
            FamilyId::ShiftedConjugate => {
                p.only(&["shift", "exponent"])?;
                let shift = p.real("shift", 1.0)?;
                let rho = WeightedDistance::new(n, vec![1.0; n], p.exponent(1)?).with_conjugate_shift(shift);
                FiberScenario::new(FamilyId::ShiftedConjugate, self.level, Arc::new(rho))
            }
            FamilyId::CircledRadius => {
                p.only(&["alpha", "exponent"])?;
                let alpha = parse_complex(p.get("alpha").ok_or_else(|| Error::Schema("`alpha` is required".into()))?)?;
                FiberScenario::circled_radius(n, alpha, p.exponent(2)?, self.level)
            }
            FamilyId::CustomSumOfSquares => {
                p.only(&["terms", "center_poly"])?;
                let terms = p.terms(n)?;
                let center = p.center(n)?;
                FiberScenario::sum_of_squares(ModulusPolynomial::new(n, terms).with_center(center), self.level)
            }
            _ => unreachable!("not a builtin family"),
        };
        if self.conjugate_symmetric == Some(true) {
            let mismatch = scenario.conjugate_symmetry_mismatch(SYMMETRY_PROBES, 0);
            if !(mismatch <= SYMMETRY_TOL) {
                return Err(Error::SymmetryMismatch { mismatch });
            }
        }
        Ok(scenario)
    }
}

struct Params<'a> {
    map: &'a Map<String, Value>,
}

impl<'a> Params<'a> {
    fn new(map: &'a Map<String, Value>) -> Self {
        Self { map }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Schema(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_real(v).map_err(|_| Error::Schema(format!("`{key}` must be a number"))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Schema(format!("`{key}` must be positive")));
        }
        Ok(v)
    }

    fn exponent(&self, default: u8) -> Result<u8> {
        match self.real("exponent", default as f64)? {
            e if e == 1.0 => Ok(1),
            e if e == 2.0 => Ok(2),
            e => Err(Error::Schema(format!("`exponent` must be 1 or 2, got {e}"))),
        }
    }

    fn real_list(&self, key: &str) -> Result<Vec<f64>> {
        let Some(Value::Array(items)) = self.get(key) else {
            return Err(Error::Schema(format!("`{key}` must be an array")));
        };
        if items.len() > MAX_DIMENSION {
            return Err(Error::Schema(format!("`{key}` is too long")));
        }
        items.iter().map(parse_real).collect()
    }

    fn center(&self, n: usize) -> Result<AnalyticMap> {
        match self.get("center_poly") {
            None => Ok(AnalyticMap::zero(n, 0)),
            Some(v) => parse_center_poly(v, n),
        }
    }

    fn terms(&self, n: usize) -> Result<Vec<MonomialTerm>> {
        let Some(Value::Array(items)) = self.get("terms") else {
            return Err(Error::Schema("`terms` must be an array".into()));
        };
        if items.is_empty() || items.len() > MAX_TERMS {
            return Err(Error::Schema(format!("`terms` must hold 1..={MAX_TERMS} entries")));
        }
        items
            .iter()
            .map(|t| {
                let Value::Object(o) = t else {
                    return Err(Error::Schema("each term must be an object".into()));
                };
                if let Some(k) = o.keys().find(|k| *k != "coef" && *k != "powers") {
                    return Err(Error::Schema(format!("unknown term field `{k}`")));
                }
                let coef = parse_real(o.get("coef").ok_or_else(|| Error::Schema("term without `coef`".into()))?)?;
                let Some(Value::Array(pw)) = o.get("powers") else {
                    return Err(Error::Schema("term without `powers` array".into()));
                };
                if pw.len() != n {
                    return Err(Error::Schema(format!("`powers` must have {n} entries")));
                }
                let powers = pw
                    .iter()
                    .map(|v| match v.as_u64() {
                        Some(e) if e <= MAX_POWER as u64 => Ok(e as u32),
                        _ => Err(Error::Schema(format!("powers must be integers in 0..={MAX_POWER}"))),
                    })
                    .collect::<Result<_>>()?;
                Ok(MonomialTerm { coef, powers })
            })
            .collect()
    }
}

fn parse_real(v: &Value) -> Result<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match x {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Schema(format!("expected a finite number, got {v}"))),
    }
}

/// A number, numeric string, or `[re, im]` pair.
pub fn parse_complex(v: &Value) -> Result<C64> {
    match v {
        Value::Array(pair) if pair.len() == 2 => Ok(C64::new(parse_real(&pair[0])?, parse_real(&pair[1])?)),
        Value::Array(_) => Err(Error::Schema("complex pairs must have two entries".into())),
        other => Ok(C64::new(parse_real(other)?, 0.0)),
    }
}

fn parse_center_poly(v: &Value, n: usize) -> Result<AnalyticMap> {
    let Value::Array(components) = v else {
        return Err(Error::Schema("`center_poly` must be an array of components".into()));
    };
    if components.len() > n {
        return Err(Error::Schema(format!("`center_poly` has more than n = {n} components")));
    }
    let mut parsed: Vec<Vec<C64>> = components
        .iter()
        .map(|comp| match comp {
            Value::Array(coeffs) if coeffs.len() <= MAX_POLY_DEGREE + 1 => coeffs.iter().map(parse_complex).collect(),
            Value::Array(_) => Err(Error::Schema(format!("center polynomials are limited to degree {MAX_POLY_DEGREE}"))),
            _ => Err(Error::Schema("each `center_poly` component must be an array of coefficients".into())),
        })
        .collect::<Result<_>>()?;
    parsed.resize(n, Vec::new());
    AnalyticMap::from_components(&parsed)
}

/// A JSON array of complex entries, e.g. `[0, [1, -0.5], "2"]`.
pub fn parse_complex_vector(text: &str) -> Result<Vec<C64>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad vector `{text}`: {e}")))?;
    let Value::Array(items) = v else {
        return Err(Error::Schema(format!("vector must be a JSON array, got `{text}`")));
    };
    if items.len() > MAX_DIMENSION {
        return Err(Error::Schema("vector is too long".into()));
    }
    items.iter().map(parse_complex).collect()
}

/// A complex scalar: a number or `[re, im]`, as JSON text.
pub fn parse_complex_scalar(text: &str) -> Result<C64> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad complex number `{text}`: {e}")))?;
    parse_complex(&v)
}

/// `{"kind": "ball", "r": 2, "n": 2}` or `{"kind": "ellipsoid", "a": [2, 1]}`,
/// both with an optional `center`.
pub fn parse_model_fiber(text: &str) -> Result<ModelFiber> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let Value::Object(o) = v else {
        return Err(Error::Schema("fiber must be a JSON object".into()));
    };
    let p = Params::new(&o);
    let kind = o.get("kind").and_then(Value::as_str).ok_or_else(|| Error::Schema("fiber needs a `kind`".into()))?;
    let center = |n: usize| -> Result<Vec<C64>> {
        match o.get("center") {
            None => Ok(vec![C64::new(0.0, 0.0); n]),
            Some(Value::Array(items)) if items.len() == n => items.iter().map(parse_complex).collect(),
            Some(_) => Err(Error::Schema(format!("`center` must hold {n} entries"))),
        }
    };
    let dim = |default: usize| -> Result<usize> {
        match o.get("n") {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .filter(|n| *n as usize <= MAX_DIMENSION)
                .map(|n| n as usize)
                .ok_or_else(|| Error::Schema("`n` must be a small non-negative integer".into())),
        }
    };
    let fiber = match kind {
        "ball" => {
            p.only(&["kind", "r", "n", "center"])?;
            let default_n = match o.get("center") {
                Some(Value::Array(items)) => items.len(),
                _ => 2,
            };
            let n = dim(default_n)?;
            ModelFiber::ball(center(n)?, p.positive("r", 1.0)?)
        }
        "ellipsoid" => {
            p.only(&["kind", "a", "center"])?;
            let axes = p.real_list("a")?;
            ModelFiber::ellipsoid(center(axes.len())?, axes)
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    fiber.map_err(|e| match e {
        Error::Config(m) => Error::Schema(m),
        other => other,
    })
}

/// Parses a scenario document and builds it.
pub fn parse_scenario(text: &str) -> Result<(ScenarioFile, FiberScenario)> {
    let file = ScenarioFile::parse(text)?;
    let scenario = file.build()?;
    Ok((file, scenario))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<FiberScenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text).map(|(_, s)| s)
}
