//! High-input specifications: a program plus one low and two high bindings.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::Inputs;
use crate::lang::ResolvedProgram;
use crate::lattice::{Level, TaggedValue};
use crate::value::{ObjectId, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("malformed spec: {0}")]
    Json(String),
    #[error("binding key `{0}` is not of the form `Class#n.var`")]
    BadKey(String),
    #[error("unsupported value for `{0}`")]
    BadValue(String),
    #[error("`high` must hold exactly two maps, found {0}")]
    HighArity(usize),
    #[error("the two high maps bind different variables")]
    DomainMismatch,
    #[error("`{0}` is bound both low and high")]
    Overlap(String),
    #[error("unknown class `{class}` in `{key}`")]
    UnknownClass { class: String, key: String },
    #[error("class `{class}` has no field `{var}`")]
    UnknownField { class: String, var: String },
    #[error("high input `{0}` is not a field declared H")]
    NotHigh(String),
}

pub type Bindings = BTreeMap<(ObjectId, String), Value>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HighInputSpec {
    /// Program path as written in the spec file.
    pub program: String,
    pub low: Bindings,
    pub high: [Bindings; 2],
}

fn key_of(k: &str) -> Result<(ObjectId, String), SpecError> {
    let (obj, var) = k.rsplit_once('.').ok_or_else(|| SpecError::BadKey(k.to_string()))?;
    let (class, n) = obj.split_once('#').ok_or_else(|| SpecError::BadKey(k.to_string()))?;
    if class.is_empty() || var.is_empty() || n.parse::<u64>().is_err() {
        return Err(SpecError::BadKey(k.to_string()));
    }
    Ok((ObjectId::new(obj), var.to_string()))
}

fn value_of(key: &str, v: &serde_json::Value) -> Result<Value, SpecError> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => Value::Null,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => Value::Int(n.as_i64().ok_or_else(|| SpecError::BadValue(key.to_string()))?),
        J::String(s) => Value::Str(s.clone()),
        J::Array(items) => Value::List(items.iter().map(|x| value_of(key, x)).collect::<Result<_, _>>()?),
        J::Object(_) => return Err(SpecError::BadValue(key.to_string())),
    })
}

fn bindings(v: Option<&serde_json::Value>) -> Result<Bindings, SpecError> {
    let mut out = Bindings::new();
    let Some(v) = v else { return Ok(out) };
    let map = v
        .as_object()
        .ok_or_else(|| SpecError::Json("bindings must be objects".to_string()))?;
    for (k, v) in map {
        out.insert(key_of(k)?, value_of(k, v)?);
    }
    Ok(out)
}

impl HighInputSpec {
    /// Parses `{"program": .., "low": {..}, "high": [{..}, {..}]}`.
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
        let program = v
            .get("program")
            .and_then(|p| p.as_str())
            .ok_or_else(|| SpecError::Json("missing string field `program`".to_string()))?
            .to_string();
        let low = bindings(v.get("low"))?;
        let high = match v.get("high") {
            None => [Bindings::new(), Bindings::new()],
            Some(serde_json::Value::Array(items)) if items.len() == 2 => {
                [bindings(Some(&items[0]))?, bindings(Some(&items[1]))?]
            }
            Some(serde_json::Value::Array(items)) => return Err(SpecError::HighArity(items.len())),
            Some(_) => return Err(SpecError::Json("`high` must be an array".to_string())),
        };
        Ok(HighInputSpec { program, low, high })
    }

    /// Checks the well-formedness conditions against the program.
    pub fn validate(&self, p: &ResolvedProgram) -> Result<(), SpecError> {
        let d0: BTreeSet<_> = self.high[0].keys().collect();
        let d1: BTreeSet<_> = self.high[1].keys().collect();
        if d0 != d1 {
            return Err(SpecError::DomainMismatch);
        }
        for k in self.low.keys() {
            if d0.contains(k) {
                return Err(SpecError::Overlap(format!("{}.{}", k.0, k.1)));
            }
        }
        let declared = |(o, var): &(ObjectId, String)| -> Result<Option<Level>, SpecError> {
            let class = o.class_name();
            let c = p.class(class).ok_or_else(|| SpecError::UnknownClass {
                class: class.to_string(),
                key: format!("{o}.{var}"),
            })?;
            if let Some(f) = c.fields.iter().find(|f| &f.name == var) {
                return Ok(Some(f.level));
            }
            if c.params.iter().any(|f| &f.name == var) {
                return Ok(None);
            }
            Err(SpecError::UnknownField {
                class: class.to_string(),
                var: var.clone(),
            })
        };
        for k in self.low.keys() {
            declared(k)?;
        }
        for k in d0 {
            if declared(k)? != Some(Level::H) {
                return Err(SpecError::NotHigh(format!("{}.{}", k.0, k.1)));
            }
        }
        Ok(())
    }

    /// Creation-time overrides for run `i` (0 or 1): low bindings at the
    /// variable's declared level, high bindings at `H`.
    pub fn inputs(&self, p: &ResolvedProgram, i: usize) -> Inputs {
        let mut out = Inputs::new();
        for ((o, var), v) in &self.low {
            let level = p
                .class(o.class_name())
                .and_then(|c| c.attr_template().find(|x| &x.name == var))
                .map_or(Level::L, |x| x.level);
            out.insert((o.clone(), var.clone()), TaggedValue::new(v.clone(), level));
        }
        for (k, v) in &self.high[i] {
            out.insert(k.clone(), TaggedValue::high(v.clone()));
        }
        out
    }

    pub fn has_high_inputs(&self) -> bool {
        !self.high[0].is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load_program;

    const SRC: &str =
        "interface I { Void go(); } class K(Int seed) implements I { Int_H s; Int l; Void go() { skip } }";

    fn spec(text: &str) -> Result<HighInputSpec, SpecError> {
        let s = HighInputSpec::from_json(text)?;
        s.validate(&load_program(SRC).unwrap())?;
        Ok(s)
    }

    #[test]
    fn well_formed() {
        let s =
            spec(r#"{"program": "k.sob", "low": {"K#1.l": 3, "K#1.seed": 1}, "high": [{"K#1.s": 1}, {"K#1.s": 2}]}"#)
                .unwrap();
        let p = load_program(SRC).unwrap();
        let i1 = s.inputs(&p, 1);
        assert_eq!(
            i1[&(ObjectId::new("K#1"), "s".to_string())],
            TaggedValue::high(Value::Int(2))
        );
        assert_eq!(
            i1[&(ObjectId::new("K#1"), "l".to_string())],
            TaggedValue::low(Value::Int(3))
        );
        assert!(spec(r#"{"program": "k.sob"}"#).is_ok());
    }

    #[test]
    fn rejections() {
        assert_eq!(
            spec(r#"{"program": "k", "high": [{"K#1.s": 1}, {}]}"#),
            Err(SpecError::DomainMismatch)
        );
        assert_eq!(
            spec(r#"{"program": "k", "high": [{"K#1.l": 1}, {"K#1.l": 2}]}"#),
            Err(SpecError::NotHigh("K#1.l".into()))
        );
        assert!(matches!(
            spec(r#"{"program": "k", "low": {"K#1.s": 0}, "high": [{"K#1.s": 1}, {"K#1.s": 2}]}"#),
            Err(SpecError::Overlap(_))
        ));
        assert!(matches!(
            spec(r#"{"program": "k", "low": {"K1.s": 0}}"#),
            Err(SpecError::BadKey(_))
        ));
        assert!(matches!(
            spec(r#"{"program": "k", "low": {"Q#1.s": 0}}"#),
            Err(SpecError::UnknownClass { .. })
        ));
        assert!(matches!(
            spec(r#"{"program": "k", "low": {"K#1.zz": 0}}"#),
            Err(SpecError::UnknownField { .. })
        ));
        assert_eq!(spec(r#"{"program": "k", "high": [{}]}"#), Err(SpecError::HighArity(1)));
    }
}
