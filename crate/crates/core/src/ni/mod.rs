//! Executable non-interference checks.

pub mod equiv;
pub mod explore;
pub mod lemma;
pub mod lockstep;
pub mod spec;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, Faults, StepChoice};
use crate::lang::ResolvedProgram;
use crate::value::ObjectId;

pub use equiv::{canonicalize_ids, low_equiv_state, low_outputs, Lineage, ObsMap, Observation};
pub use explore::{explore, ni_check_exhaustive, Explored};
pub use lemma::{check_high_context_lemma, LemmaReport};
pub use lockstep::{ni_check_lockstep, replay_witness};
pub use spec::{HighInputSpec, SpecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NiResult {
    Pass,
    Fail,
    Unknown,
}

/// Which run(s) a lockstep step advanced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum PairedStep {
    Both { first: StepChoice, second: StepChoice },
    First { choice: StepChoice },
    Second { choice: StepChoice },
}

impl PairedStep {
    pub fn choice(&self, run: usize) -> Option<&StepChoice> {
        match (self, run) {
            (PairedStep::Both { first, .. }, 0) | (PairedStep::First { choice: first }, 0) => Some(first),
            (PairedStep::Both { second, .. }, 1) | (PairedStep::Second { choice: second }, 1) => Some(second),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiWitness {
    pub reason: String,
    pub object: Option<ObjectId>,
    pub first: Option<String>,
    pub second: Option<String>,
    /// The interleaving of both runs, when they were driven together.
    pub schedule: Vec<PairedStep>,
    pub run1: Vec<StepChoice>,
    pub run2: Vec<StepChoice>,
}

impl NiWitness {
    pub fn from_schedule(reason: String, schedule: Vec<PairedStep>) -> Self {
        let run = |i| schedule.iter().filter_map(|s| s.choice(i).cloned()).collect();
        NiWitness {
            reason,
            object: None,
            first: None,
            second: None,
            run1: run(0),
            run2: run(1),
            schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiVerdict {
    pub result: NiResult,
    pub detail: String,
    pub witness: Option<NiWitness>,
    /// Per-object low observations of the two runs, when a single pair of
    /// runs was compared.
    pub observations: Option<[ObsMap; 2]>,
}

impl NiVerdict {
    pub fn pass(detail: impl Into<String>) -> Self {
        NiVerdict {
            result: NiResult::Pass,
            detail: detail.into(),
            witness: None,
            observations: None,
        }
    }

    pub fn unknown(detail: impl Into<String>) -> Self {
        NiVerdict {
            result: NiResult::Unknown,
            detail: detail.into(),
            witness: None,
            observations: None,
        }
    }

    pub fn fail(detail: impl Into<String>, witness: NiWitness) -> Self {
        NiVerdict {
            result: NiResult::Fail,
            detail: detail.into(),
            witness: Some(witness),
            observations: None,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.result == NiResult::Pass
    }
}

/// The two engines of a check: same program and faults, inputs from the
/// spec's low map and one of its high maps each.
pub fn engine_pair(p: &Arc<ResolvedProgram>, spec: &HighInputSpec, faults: Faults) -> [Engine; 2] {
    [0, 1].map(|i| {
        Engine::new(p.clone())
            .with_faults(faults)
            .with_inputs(spec.inputs(p, i))
    })
}
