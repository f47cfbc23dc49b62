//! Runtime values and component identities.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of an object, rendered `Class#f`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

/// Identity of a future, rendered `object!n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FutureId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        ObjectId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The class part of a `Class#f` identity.
    pub fn class_name(&self) -> &str {
        self.0.split_once('#').map_or(&self.0, |(c, _)| c)
    }
}

impl FutureId {
    pub fn new(s: impl Into<String>) -> Self {
        FutureId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for FutureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identity of the `f`-th instance of `class`.
pub fn fresh_object_id(class: &str, f: u64) -> ObjectId {
    debug_assert!(f >= 1);
    ObjectId(format!("{class}#{f}"))
}

/// Identity of the `n`-th invocation issued by `owner`.
pub fn fresh_future_id(owner: &ObjectId, n: u64) -> FutureId {
    debug_assert!(n >= 1);
    FutureId(format!("{owner}!{n}"))
}

/// A runtime value. `Error` is what a denied or failed future read yields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Null,
    Int(i64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
    Object(ObjectId),
    Future(FutureId),
    Error,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "Int",
            Value::Bool(_) => "Bool",
            Value::Str(_) => "String",
            Value::List(_) => "List",
            Value::Object(_) => "object",
            Value::Future(_) => "future",
            Value::Error => "error",
        }
    }

    /// Visits every identity occurring in the value.
    pub fn for_each_id(&self, f: &mut impl FnMut(IdRef<'_>)) {
        match self {
            Value::Object(o) => f(IdRef::Object(o)),
            Value::Future(q) => f(IdRef::Future(q)),
            Value::List(items) => items.iter().for_each(|v| v.for_each_id(f)),
            _ => {}
        }
    }

    /// Rewrites every identity occurring in the value.
    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        match self {
            Value::Object(o) => *o = map.object(o),
            Value::Future(q) => *q = map.future(q),
            Value::List(items) => items.iter_mut().for_each(|v| v.map_ids(map)),
            _ => {}
        }
    }
}

/// A borrowed identity of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdRef<'a> {
    Object(&'a ObjectId),
    Future(&'a FutureId),
}

/// Renaming of identities, used for canonicalization and run correspondence.
pub trait IdMapper {
    fn object(&mut self, id: &ObjectId) -> ObjectId;
    fn future(&mut self, id: &FutureId) -> FutureId;
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) if items.is_empty() => f.write_str("Nil"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Object(o) => write!(f, "{o}"),
            Value::Future(q) => write!(f, "{q}"),
            Value::Error => f.write_str("error"),
        }
    }
}
