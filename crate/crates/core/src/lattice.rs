//! The two-point security lattice and per-object context stacks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::value::Value;

/// A security level. `L ⊑ H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Level {
    #[default]
    L,
    H,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::L, Level::H];

    pub fn join(self, other: Level) -> Level {
        join(self, other)
    }

    pub fn leq(self, other: Level) -> bool {
        leq(self, other)
    }

    pub fn is_high(self) -> bool {
        self == Level::H
    }
}

/// Least upper bound.
pub fn join(a: Level, b: Level) -> Level {
    match (a, b) {
        (Level::L, Level::L) => Level::L,
        _ => Level::H,
    }
}

/// The lattice order `a ⊑ b`.
pub fn leq(a: Level, b: Level) -> bool {
    !matches!((a, b), (Level::H, Level::L))
}

/// Join over any number of levels; the empty join is `L`.
pub fn join_all<I: IntoIterator<Item = Level>>(levels: I) -> Level {
    levels.into_iter().fold(Level::L, join)
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L => "L",
            Level::H => "H",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" => Ok(Level::L),
            "H" => Ok(Level::H),
            other => Err(format!("unknown security level `{other}`")),
        }
    }
}

/// A runtime value paired with its security level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaggedValue {
    pub value: Value,
    pub level: Level,
}

impl TaggedValue {
    pub fn new(value: Value, level: Level) -> Self {
        TaggedValue { value, level }
    }

    pub fn low(value: Value) -> Self {
        TaggedValue::new(value, Level::L)
    }

    pub fn high(value: Value) -> Self {
        TaggedValue::new(value, Level::H)
    }

    /// The same value with its level joined with `level`.
    pub fn raised(mut self, level: Level) -> Self {
        self.level = self.level.join(level);
        self
    }
}

impl fmt::Display for TaggedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.value, self.level)
    }
}

/// Stack of context levels of a flow-sensitive object. Only `H` is pushed.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PcStack {
    entries: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pop on an empty context stack")]
pub struct PcUnderflow;

impl PcStack {
    pub fn new() -> Self {
        PcStack::default()
    }

    /// A stack holding `depth` high entries.
    pub fn high(depth: usize) -> Self {
        PcStack {
            entries: vec![Level::H; depth],
        }
    }

    pub fn push_high(&mut self) {
        self.entries.push(Level::H);
    }

    pub fn pop(&mut self) -> Result<Level, PcUnderflow> {
        self.entries.pop().ok_or(PcUnderflow)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.entries.len()
    }

    pub fn level(&self) -> Level {
        pc_level(self)
    }
}

/// `L` for the empty stack, `H` otherwise.
pub fn pc_level(stack: &PcStack) -> Level {
    if stack.entries.is_empty() {
        Level::L
    } else {
        Level::H
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_examples() {
        assert_eq!(join(Level::L, Level::H), Level::H);
        assert_eq!(join(Level::L, Level::L), Level::L);
        assert_eq!(join(Level::H, Level::H), Level::H);
    }

    #[test]
    fn leq_examples() {
        assert!(leq(Level::L, Level::H));
        assert!(!leq(Level::H, Level::L));
        assert!(leq(Level::H, Level::H));
    }

    #[test]
    fn pc_level_examples() {
        assert_eq!(pc_level(&PcStack::new()), Level::L);
        assert_eq!(pc_level(&PcStack::high(1)), Level::H);
        assert_eq!(pc_level(&PcStack::high(2)), Level::H);
    }

    #[test]
    fn semilattice_laws_exhaustive() {
        for a in Level::ALL {
            assert_eq!(join(a, a), a);
            assert!(leq(a, a));
            for b in Level::ALL {
                assert_eq!(join(a, b), join(b, a));
                // join is an upper bound, and the least one
                assert!(leq(a, join(a, b)) && leq(b, join(a, b)));
                assert_eq!(leq(a, b), join(a, b) == b);
                if leq(a, b) && leq(b, a) {
                    assert_eq!(a, b);
                }
                for c in Level::ALL {
                    assert_eq!(join(join(a, b), c), join(a, join(b, c)));
                    if leq(a, b) && leq(b, c) {
                        assert!(leq(a, c));
                    }
                    if leq(a, c) && leq(b, c) {
                        assert!(leq(join(a, b), c));
                    }
                }
            }
        }
    }

    #[test]
    fn push_pop_restores() {
        let mut s = PcStack::high(2);
        let before = s.clone();
        s.push_high();
        assert_eq!(s.pop(), Ok(Level::H));
        assert_eq!(s, before);
    }

    #[test]
    fn pop_empty_is_error() {
        assert_eq!(PcStack::new().pop(), Err(PcUnderflow));
    }

    #[test]
    fn render_and_parse() {
        assert_eq!(Level::H.to_string(), "H");
        assert_eq!("L".parse::<Level>(), Ok(Level::L));
        assert!("M".parse::<Level>().is_err());
    }
}
