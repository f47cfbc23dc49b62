//! Scheduling policies resolving the rules' nondeterminism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::StepChoice;
use crate::value::ObjectId;

#[derive(Debug, Clone)]
pub enum Scheduler {
    SeededRandom(Box<ChaCha8Rng>),
    /// Rotates over objects in identity order.
    RoundRobin {
        last: Option<ObjectId>,
    },
    /// Replays a recorded choice list; the run stops when it runs out.
    Scripted {
        choices: Vec<StepChoice>,
        pos: usize,
    },
}

impl Scheduler {
    pub fn seeded(seed: u64) -> Self {
        Scheduler::SeededRandom(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn round_robin() -> Self {
        Scheduler::RoundRobin { last: None }
    }

    pub fn scripted(choices: Vec<StepChoice>) -> Self {
        Scheduler::Scripted { choices, pos: 0 }
    }

    /// Picks among `enabled` (non-empty, in enumeration order). A scripted
    /// choice is returned as recorded even if it is not enabled; the caller
    /// rejects it.
    pub fn pick(&mut self, enabled: &[StepChoice]) -> Option<StepChoice> {
        match self {
            Scheduler::SeededRandom(rng) => {
                if enabled.is_empty() {
                    return None;
                }
                Some(enabled[rng.gen_range(0..enabled.len())].clone())
            }
            Scheduler::RoundRobin { last } => {
                let after = enabled
                    .iter()
                    .find(|c| match (&c.object, last.as_ref()) {
                        (Some(o), Some(l)) => o > l,
                        _ => false,
                    })
                    .or_else(|| enabled.first())?
                    .clone();
                *last = after.object.clone();
                Some(after)
            }
            Scheduler::Scripted { choices, pos } => {
                let c = choices.get(*pos)?.clone();
                *pos += 1;
                Some(c)
            }
        }
    }

    /// Picks a position in `0..n` for callers whose choices are not plain
    /// step choices. Scripted schedules have no positions to offer.
    pub fn pick_index(&mut self, n: usize) -> Option<usize> {
        if n == 0 {
            return None;
        }
        match self {
            Scheduler::SeededRandom(rng) => Some(rng.gen_range(0..n)),
            Scheduler::RoundRobin { .. } => Some(0),
            Scheduler::Scripted { .. } => None,
        }
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self, Scheduler::Scripted { .. })
    }
}
