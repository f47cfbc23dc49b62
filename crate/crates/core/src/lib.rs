//! Interpreter, static analyzer and non-interference harness for a core
//! active-object language with futures and security wrappers.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod lang;
pub mod lattice;
pub mod ni;
pub mod value;

pub use lattice::{Level, PcStack, TaggedValue};
pub use value::{FutureId, ObjectId, Value};
