//! Runtime checks of the no-leakage guarantees and configuration invariants.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Engine, Event, Payload};
use crate::config::{Configuration, WrapperId};
use crate::value::{FutureId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// A delivery whose tag exceeds the destination's level.
    HighToLowerDestination,
    /// A future read handing a value above the reader's level.
    WrappedFutureLeak,
    SafeObjectEmittedHigh,
    FutureRewritten,
    WrapperRemoved,
    RegistryIncomplete,
}

impl ViolationKind {
    /// The two no-leakage properties, as opposed to bookkeeping invariants.
    pub fn is_security(self) -> bool {
        matches!(
            self,
            ViolationKind::HighToLowerDestination | ViolationKind::WrappedFutureLeak
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    safe_classes: BTreeSet<String>,
    written: BTreeSet<FutureId>,
    wrappers: Vec<WrapperId>,
}

impl Monitor {
    pub fn new(engine: &Engine, initial: &Configuration) -> Self {
        Monitor {
            safe_classes: engine
                .report
                .values()
                .filter(|v| !v.is_unsafe())
                .map(|v| v.class.clone())
                .collect(),
            written: BTreeSet::new(),
            wrappers: initial.wrapper_ids(),
        }
    }

    /// Checks one step given its events and the configuration after it.
    pub fn observe(&mut self, step: usize, events: &[Event], after: &Configuration) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut flag = |kind, detail: String| out.push(Violation { step, kind, detail });
        for e in events {
            match &e.payload {
                Payload::Delivered { msg, .. } if msg.sender != msg.dest => match after.registry.get(&msg.dest) {
                    Some(l) if msg.tag.leq(*l) => {}
                    Some(l) => flag(
                        ViolationKind::HighToLowerDestination,
                        format!("{} delivered to {} at {l} with tag {}", msg.method, msg.dest, msg.tag),
                    ),
                    None => flag(ViolationKind::RegistryIncomplete, format!("{} has no level", msg.dest)),
                },
                Payload::FutureRead {
                    future,
                    value,
                    reader_level,
                    ..
                } => {
                    if value.value != Value::Error && !value.level.leq(*reader_level) {
                        flag(
                            ViolationKind::WrappedFutureLeak,
                            format!("{future} read at {} by a {reader_level} reader", value.level),
                        );
                    }
                }
                Payload::Invocation { .. } | Payload::Completion { .. } if e.tag.is_high() => {
                    let class = e
                        .object
                        .as_ref()
                        .map(|o| o.class_name().to_string())
                        .unwrap_or_default();
                    if self.safe_classes.contains(&class) {
                        flag(
                            ViolationKind::SafeObjectEmittedHigh,
                            format!("{} emitted a high message", e.object.as_ref().unwrap()),
                        );
                    }
                }
                Payload::Resolved { future, .. }
                | Payload::Denied {
                    msg: crate::config::InvocMsg { fid: future, .. },
                } if !self.written.insert(future.clone()) => {
                    flag(ViolationKind::FutureRewritten, format!("{future} written twice"));
                }
                _ => {}
            }
        }
        let now = after.wrapper_ids();
        for w in &self.wrappers {
            if now.binary_search(w).is_err() {
                flag(ViolationKind::WrapperRemoved, format!("{w:?} disappeared"));
            }
        }
        self.wrappers = now;
        for o in after.mentioned_objects() {
            if !after.registry.contains_key(&o) {
                flag(ViolationKind::RegistryIncomplete, format!("{o} has no level"));
            }
        }
        out
    }
}
