//! Search-space definitions and the mapping between the algorithm-native
//! real coordinates and typed decision values.
//!
//! Every variable is carried internally as one `f64` coordinate:
//!
//! - `float` variables use their own bounds and pass through unchanged,
//! - `int` variables live on `[low, high]` and are rounded when decoded,
//! - `grid` variables live on the index axis `[0, L - 1]` and are rounded to
//!   the nearest level index when decoded.
//!
//! Rounding is to the nearest integer with ties away from zero (`f64::round`).
//! Out-of-bounds coordinates are clipped by [`SearchSpace::repair`].

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::error::SpaceError;

/// A decoded decision value, also used for the atoms of a `grid` variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    /// Numeric view of the value; `None` for strings.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(v) => Some(v as f64),
            Value::Float(v) => Some(v),
            Value::Str(_) => None,
        }
    }

    /// Bit-exact identity used for de-duplication.
    pub(crate) fn key(&self) -> ValueKey {
        match self {
            Value::Int(v) => ValueKey::Int(*v),
            Value::Float(v) => ValueKey::Float(v.to_bits()),
            Value::Str(s) => ValueKey::Str(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum ValueKey {
    Int(i64),
    Float(u64),
    Str(String),
}

/// Formats a decoded vector as `[a, b, c]` for logs and error messages.
pub fn format_values(values: &[Value]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Numeric view of a decoded vector. Strings map to `NaN`.
pub fn values_to_f64(values: &[Value]) -> Vec<f64> {
    values
        .iter()
        .map(|v| v.as_f64().unwrap_or(f64::NAN))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum VarKind {
    Int { low: i64, high: i64 },
    Float { low: f64, high: f64 },
    Grid { levels: Vec<Value> },
}

impl VarKind {
    pub fn label(&self) -> &'static str {
        match self {
            VarKind::Int { .. } => "int",
            VarKind::Float { .. } => "float",
            VarKind::Grid { .. } => "grid",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
}

impl VariableSpec {
    pub fn float(name: impl Into<String>, low: f64, high: f64) -> Result<Self, SpaceError> {
        let spec = VariableSpec {
            name: name.into(),
            kind: VarKind::Float { low, high },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn int(name: impl Into<String>, low: i64, high: i64) -> Result<Self, SpaceError> {
        let spec = VariableSpec {
            name: name.into(),
            kind: VarKind::Int { low, high },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid(name: impl Into<String>, levels: Vec<Value>) -> Result<Self, SpaceError> {
        let spec = VariableSpec {
            name: name.into(),
            kind: VarKind::Grid { levels },
        };
        spec.validate()?;
        Ok(spec)
    }

    fn malformed(&self, reason: impl Into<String>) -> SpaceError {
        SpaceError::Malformed {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        match &self.kind {
            VarKind::Int { low, high } => {
                if low >= high {
                    return Err(self.malformed(format!("degenerate bounds: low {low} >= high {high}")));
                }
            }
            VarKind::Float { low, high } => {
                if !low.is_finite() || !high.is_finite() {
                    return Err(self.malformed("bounds must be finite"));
                }
                if low >= high {
                    return Err(self.malformed(format!("degenerate bounds: low {low} >= high {high}")));
                }
            }
            VarKind::Grid { levels } => {
                if levels.is_empty() {
                    return Err(self.malformed("grid has no levels"));
                }
                for (i, a) in levels.iter().enumerate() {
                    if levels[..i].iter().any(|b| b.key() == a.key()) {
                        return Err(self.malformed(format!("duplicate grid level `{a}`")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Lower bound of the internal coordinate.
    pub fn lower(&self) -> f64 {
        match &self.kind {
            VarKind::Int { low, .. } => *low as f64,
            VarKind::Float { low, .. } => *low,
            VarKind::Grid { .. } => 0.0,
        }
    }

    /// Upper bound of the internal coordinate.
    pub fn upper(&self) -> f64 {
        match &self.kind {
            VarKind::Int { high, .. } => *high as f64,
            VarKind::Float { high, .. } => *high,
            VarKind::Grid { levels } => (levels.len() - 1) as f64,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, VarKind::Float { .. })
    }

    fn clip(&self, x: f64) -> f64 {
        if x.is_nan() {
            return self.lower();
        }
        x.clamp(self.lower(), self.upper())
    }

    fn decode(&self, x: f64) -> Value {
        match &self.kind {
            VarKind::Float { .. } => Value::Float(x),
            VarKind::Int { low, high } => {
                let r = self.clip(x).round() as i64;
                Value::Int(r.clamp(*low, *high))
            }
            VarKind::Grid { levels } => {
                let idx = self.clip(x).round() as usize;
                levels[idx.min(levels.len() - 1)].clone()
            }
        }
    }

    fn encode(&self, v: &Value) -> Result<f64, SpaceError> {
        let out_of_domain = || SpaceError::OutOfDomain {
            name: self.name.clone(),
            value: v.to_string(),
        };
        match &self.kind {
            VarKind::Float { low, high } => {
                let x = v.as_f64().ok_or_else(out_of_domain)?;
                if x < *low || x > *high {
                    return Err(out_of_domain());
                }
                Ok(x)
            }
            VarKind::Int { low, high } => {
                let x = v.as_f64().ok_or_else(out_of_domain)?;
                if x.fract() != 0.0 || x < *low as f64 || x > *high as f64 {
                    return Err(out_of_domain());
                }
                Ok(x)
            }
            VarKind::Grid { levels } => levels
                .iter()
                .position(|l| l == v || (l.as_f64().is_some() && l.as_f64() == v.as_f64()))
                .map(|i| i as f64)
                .ok_or_else(out_of_domain),
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            VarKind::Float { low, high } => rng.random_range(*low..=*high),
            VarKind::Int { low, high } => rng.random_range(*low..=*high) as f64,
            VarKind::Grid { levels } => rng.random_range(0..levels.len()) as f64,
        }
    }

    fn to_json(&self) -> Json {
        match &self.kind {
            VarKind::Float { low, high } => serde_json::json!(["float", low, high]),
            VarKind::Int { low, high } => serde_json::json!(["int", low, high]),
            VarKind::Grid { levels } => serde_json::json!(["grid", levels]),
        }
    }

    fn from_json(name: &str, entry: &Json) -> Result<Self, SpaceError> {
        let malformed = |reason: String| SpaceError::Malformed {
            name: name.to_string(),
            reason,
        };
        let items = entry
            .as_array()
            .ok_or_else(|| malformed(format!("expected [kind, args...], got {entry}")))?;
        let kind = items
            .first()
            .and_then(Json::as_str)
            .ok_or_else(|| malformed("missing kind label".into()))?;
        let args = &items[1..];
        let spec = match kind {
            "float" => {
                let [low, high] = args else {
                    return Err(malformed(format!("float expects 2 bounds, got {}", args.len())));
                };
                let num = |v: &Json| {
                    v.as_f64()
                        .ok_or_else(|| malformed(format!("bound `{v}` is not a number")))
                };
                VariableSpec {
                    name: name.to_string(),
                    kind: VarKind::Float {
                        low: num(low)?,
                        high: num(high)?,
                    },
                }
            }
            "int" => {
                let [low, high] = args else {
                    return Err(malformed(format!("int expects 2 bounds, got {}", args.len())));
                };
                let int = |v: &Json| {
                    v.as_i64()
                        .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
                        .ok_or_else(|| malformed(format!("bound `{v}` is not an integer")))
                };
                VariableSpec {
                    name: name.to_string(),
                    kind: VarKind::Int {
                        low: int(low)?,
                        high: int(high)?,
                    },
                }
            }
            "grid" => {
                // Accept both ["grid", [a, b, c]] and ["grid", a, b, c].
                let raw: Vec<Json> = match args {
                    [Json::Array(levels)] => levels.clone(),
                    _ => args.to_vec(),
                };
                let levels = raw
                    .into_iter()
                    .map(|v| {
                        serde_json::from_value::<Value>(v.clone())
                            .map_err(|_| malformed(format!("grid level `{v}` is not an atom")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                VariableSpec {
                    name: name.to_string(),
                    kind: VarKind::Grid { levels },
                }
            }
            other => return Err(malformed(format!("unknown kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Ordered list of decision variables. Iteration order is definition order.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    variables: Vec<VariableSpec>,
}

impl SearchSpace {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self, SpaceError> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(SpaceError::Duplicate(v.name.clone()));
            }
            v.validate()?;
        }
        Ok(SearchSpace { variables })
    }

    /// `d` continuous variables `x1..xd` on `[low, high]`.
    pub fn uniform_float(d: usize, low: f64, high: f64) -> Result<Self, SpaceError> {
        let vars = (1..=d)
            .map(|i| VariableSpec::float(format!("x{i}"), low, high))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vars)
    }

    /// Builds a space from a key-value document mapping names to
    /// `[kind, args...]` entries.
    pub fn from_json(doc: &Json) -> Result<Self, SpaceError> {
        let map = doc
            .as_object()
            .ok_or_else(|| SpaceError::NotATable(doc.to_string()))?;
        let vars = map
            .iter()
            .map(|(name, entry)| VariableSpec::from_json(name, entry))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vars)
    }

    pub fn from_json_str(text: &str) -> Result<Self, SpaceError> {
        let doc: Json = serde_json::from_str(text).map_err(|e| SpaceError::Syntax(e.to_string()))?;
        Self::from_json(&doc)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        let doc: Json = toml::from_str(text).map_err(|e| SpaceError::Syntax(e.to_string()))?;
        Self::from_json(&doc)
    }

    /// Canonical JSON export, in definition order.
    pub fn to_json(&self) -> Json {
        let mut map = Map::new();
        for v in &self.variables {
            map.insert(v.name.clone(), v.to_json());
        }
        Json::Object(map)
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    pub fn lower(&self) -> Vec<f64> {
        self.variables.iter().map(VariableSpec::lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.variables.iter().map(VariableSpec::upper).collect()
    }

    /// Width of each internal coordinate interval.
    pub fn ranges(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper() - v.lower()).collect()
    }

    fn check_len(&self, len: usize) -> Result<(), SpaceError> {
        if len != self.dim() {
            return Err(SpaceError::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Draws internal coordinates uniformly: floats on `[low, high]`, ints
    /// on the integers of `[low, high]`, grids over the level indices.
    pub fn sample_internal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.variables.iter().map(|v| v.sample(rng)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let internal = self.sample_internal(rng);
        let decoded = self.decode_unchecked(&internal);
        Candidate::new(internal, decoded)
    }

    pub fn decode(&self, internal: &[f64]) -> Result<Vec<Value>, SpaceError> {
        self.check_len(internal.len())?;
        Ok(self.decode_unchecked(internal))
    }

    pub(crate) fn decode_unchecked(&self, internal: &[f64]) -> Vec<Value> {
        self.variables
            .iter()
            .zip(internal)
            .map(|(v, &x)| v.decode(x))
            .collect()
    }

    /// Inverse of [`decode`](Self::decode) for in-domain values.
    pub fn encode(&self, decoded: &[Value]) -> Result<Vec<f64>, SpaceError> {
        self.check_len(decoded.len())?;
        self.variables
            .iter()
            .zip(decoded)
            .map(|(v, x)| v.encode(x))
            .collect()
    }

    /// Clips every coordinate onto its internal interval. Idempotent.
    pub fn repair(&self, internal: &[f64]) -> Vec<f64> {
        self.variables
            .iter()
            .zip(internal)
            .map(|(v, &x)| v.clip(x))
            .collect()
    }

    pub fn repair_in_place(&self, internal: &mut [f64]) {
        for (v, x) in self.variables.iter().zip(internal.iter_mut()) {
            *x = v.clip(*x);
        }
    }

    /// Snaps coordinates onto the decoded lattice (`encode(decode(x))`).
    pub fn snap(&self, internal: &[f64]) -> Vec<f64> {
        self.variables
            .iter()
            .zip(internal)
            .map(|(v, &x)| match v.kind {
                VarKind::Float { .. } => v.clip(x),
                _ => v.clip(x).round(),
            })
            .collect()
    }

    /// True when every decoded value satisfies its variable's bounds or levels.
    pub fn contains(&self, decoded: &[Value]) -> bool {
        decoded.len() == self.dim()
            && self.variables.iter().zip(decoded).all(|(v, x)| match (&v.kind, x) {
                (VarKind::Float { low, high }, Value::Float(f)) => f >= low && f <= high,
                (VarKind::Int { low, high }, Value::Int(i)) => i >= low && i <= high,
                (VarKind::Grid { levels }, a) => levels.contains(a),
                _ => false,
            })
    }
}

/// A point in the search space with its evaluation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub internal: Vec<f64>,
    pub decoded: Vec<Value>,
    pub fitness: Option<f64>,
    pub eval_index: Option<usize>,
}

impl Candidate {
    pub fn new(internal: Vec<f64>, decoded: Vec<Value>) -> Self {
        Candidate {
            internal,
            decoded,
            fitness: None,
            eval_index: None,
        }
    }
}
