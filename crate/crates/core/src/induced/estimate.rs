use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactFormula,
    CylinderSum,
    PlugIn,
    Lz,
    AbramovSim,
    MonteCarlo,
}

/// An entropy value in nats with an interval `lower ≤ value ≤ upper`.
///
/// `upper = ∞` with a finite `value` means only a lower bound is certified;
/// `value = ∞` means divergence was certified.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate<R = f64> {
    pub value: R,
    pub lower: R,
    pub upper: R,
    pub method: Method,
    pub meta: BTreeMap<String, Value>,
}

/// JSON numbers cannot be infinite; such values are written as strings.
pub fn json_number(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

impl<R: Real> EntropyEstimate<R> {
    pub fn new(value: R, lower: R, upper: R, method: Method) -> Self {
        debug_assert!(
            lower <= value && value <= upper || value.is_nan(),
            "{lower} ≤ {value} ≤ {upper}"
        );
        Self {
            value,
            lower,
            upper,
            method,
            meta: BTreeMap::new(),
        }
    }

    pub fn exact(value: R, method: Method) -> Self {
        Self::new(value, value, value, method)
    }

    pub fn infinite(method: Method) -> Self {
        let inf = R::infinity();
        Self::new(inf, inf, inf, method)
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn with_meta_number(self, key: &str, x: f64) -> Self {
        self.with_meta(key, json_number(x))
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    pub fn contains(&self, x: R) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Multiplies value and interval by `t > 0` (e.g. `μ(A)` in Abramov's formula).
    pub fn scaled(mut self, t: R) -> Self {
        self.value = self.value * t;
        self.lower = self.lower * t;
        self.upper = self.upper * t;
        self
    }

    pub fn to_f64(&self) -> EntropyEstimate<f64> {
        EntropyEstimate {
            value: self.value.as_f64(),
            lower: self.lower.as_f64(),
            upper: self.upper.as_f64(),
            method: self.method,
            meta: self.meta.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }
}

impl<R: Real> Serialize for EntropyEstimate<R> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("value", &json_number(self.value.as_f64()))?;
        m.serialize_entry("lower", &json_number(self.lower.as_f64()))?;
        m.serialize_entry("upper", &json_number(self.upper.as_f64()))?;
        m.serialize_entry("method", &self.method)?;
        m.serialize_entry("meta", &self.meta)?;
        m.end()
    }
}
