//! Low equivalence, low-output projection and identity renaming.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, Store};
use crate::engine::{Event, Payload, Trace};
use crate::lattice::Level;
use crate::value::{FutureId, IdMapper, ObjectId, Value};

/// The low-tagged bindings of `a#l`, locals shadowing attributes.
pub fn low_part(a: &Store, l: &Store) -> BTreeMap<String, Value> {
    let mut merged: BTreeMap<&String, _> = a.iter().collect();
    merged.extend(l.iter());
    merged
        .into_iter()
        .filter(|(_, v)| v.level == Level::L)
        .map(|(k, v)| (k.clone(), v.value.clone()))
        .collect()
}

/// True iff the two states agree on domain and value of their low bindings.
pub fn low_equiv_state(s1: (&Store, &Store), s2: (&Store, &Store)) -> bool {
    low_part(s1.0, s1.1) == low_part(s2.0, s2.1)
}

pub fn low_outputs(t: &Trace) -> Vec<Event> {
    t.low_outputs()
}

/// Low outputs grouped by emitting object, order preserved.
pub fn low_outputs_by_object(t: &Trace) -> BTreeMap<ObjectId, Vec<Event>> {
    let mut out: BTreeMap<ObjectId, Vec<Event>> = BTreeMap::new();
    for e in t.low_outputs() {
        if let Some(o) = &e.object {
            out.entry(o.clone()).or_default().push(e);
        }
    }
    out
}

/// Renames identities to `obj-k` / `fut-k` in order of first sight.
#[derive(Debug, Default, Clone)]
pub struct FirstSight {
    objects: BTreeMap<ObjectId, ObjectId>,
    futures: BTreeMap<FutureId, FutureId>,
}

impl IdMapper for FirstSight {
    fn object(&mut self, id: &ObjectId) -> ObjectId {
        let n = self.objects.len() + 1;
        self.objects
            .entry(id.clone())
            .or_insert_with(|| ObjectId::new(format!("obj-{n}")))
            .clone()
    }

    fn future(&mut self, id: &FutureId) -> FutureId {
        let n = self.futures.len() + 1;
        self.futures
            .entry(id.clone())
            .or_insert_with(|| FutureId::new(format!("fut-{n}")))
            .clone()
    }
}

/// Renames by first appearance: the step records in order, then the
/// initial and final configurations.
pub fn canonicalize_ids(t: &Trace) -> Trace {
    let mut map = FirstSight::default();
    let mut out = t.clone();
    for s in &mut out.steps {
        s.choice.map_ids(&mut map);
        for e in &mut s.events {
            e.map_ids(&mut map);
        }
    }
    out.initial.map_ids(&mut map);
    out.initial.canonicalize();
    out.final_config.map_ids(&mut map);
    out.final_config.canonicalize();
    out
}

/// Schedule-independent names for one run.
///
/// Boot identities keep their names. An identity created later is named
/// after its creator and the creator's running count of creations of the
/// same kind and context.
#[derive(Debug, Default, Clone)]
pub struct Lineage {
    objects: BTreeMap<ObjectId, ObjectId>,
    futures: BTreeMap<FutureId, FutureId>,
    counts: BTreeMap<(ObjectId, &'static str), u64>,
}

impl Lineage {
    pub fn new() -> Self {
        Lineage::default()
    }

    fn bump(&mut self, who: &ObjectId, kind: &'static str) -> u64 {
        let n = self.counts.entry((who.clone(), kind)).or_insert(0);
        *n += 1;
        *n
    }

    /// Records the identities created by `events`.
    pub fn learn(&mut self, events: &[Event]) {
        for e in events {
            let Some(by) = &e.object else { continue };
            let parent = self.object(by);
            let hi = if e.tag.is_high() { "h" } else { "" };
            match &e.payload {
                Payload::Creation { id, .. } => {
                    let n = self.bump(&parent, if hi.is_empty() { "new" } else { "new-h" });
                    self.objects
                        .insert(id.clone(), ObjectId::new(format!("{parent}/{hi}{n}")));
                }
                Payload::FutureCreated { id } => {
                    let n = self.bump(&parent, if hi.is_empty() { "fut" } else { "fut-h" });
                    self.futures
                        .insert(id.clone(), FutureId::new(format!("{parent}!{hi}{n}")));
                }
                _ => {}
            }
        }
    }

    pub fn name_object(&self, id: &ObjectId) -> ObjectId {
        self.objects.get(id).cloned().unwrap_or_else(|| id.clone())
    }

    pub fn name_future(&self, id: &FutureId) -> FutureId {
        self.futures.get(id).cloned().unwrap_or_else(|| id.clone())
    }

    pub fn name_value(&self, v: &Value) -> Value {
        struct By<'a>(&'a Lineage);
        impl IdMapper for By<'_> {
            fn object(&mut self, id: &ObjectId) -> ObjectId {
                self.0.name_object(id)
            }
            fn future(&mut self, id: &FutureId) -> FutureId {
                self.0.name_future(id)
            }
        }
        let mut v = v.clone();
        v.map_ids(&mut By(self));
        v
    }

    /// Low part of an object's state with identities renamed.
    pub fn low_state(&self, a: &Store, l: &Store) -> BTreeMap<String, Value> {
        low_part(a, l)
            .into_iter()
            .map(|(k, v)| (k, self.name_value(&v)))
            .collect()
    }
}

impl IdMapper for Lineage {
    fn object(&mut self, id: &ObjectId) -> ObjectId {
        self.name_object(id)
    }

    fn future(&mut self, id: &FutureId) -> FutureId {
        self.name_future(id)
    }
}

/// What a low observer sees at one object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "obs", rename_all = "snake_case")]
pub enum Observation {
    Sent {
        method: String,
        dest: ObjectId,
        actuals: Vec<Value>,
    },
    Returned {
        value: Value,
    },
    Created {
        id: ObjectId,
        class: String,
        level: Level,
    },
    Received {
        method: String,
        sender: ObjectId,
        actuals: Vec<Value>,
    },
    Read {
        value: Value,
    },
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |vs: &[Value]| vs.iter().map(Value::to_string).collect::<Vec<_>>().join(", ");
        match self {
            Observation::Sent { method, dest, actuals } => write!(f, "sent {dest}.{method}({})", list(actuals)),
            Observation::Returned { value } => write!(f, "returned {value}"),
            Observation::Created { id, class, level } => write!(f, "created {id}: {class} at {level}"),
            Observation::Received {
                method,
                sender,
                actuals,
            } => {
                write!(f, "received {method}({}) from {sender}", list(actuals))
            }
            Observation::Read { value } => write!(f, "read {value}"),
        }
    }
}

/// Per-object observation sequences, keyed by lineage name.
pub type ObsMap = BTreeMap<ObjectId, Vec<Observation>>;

/// The low-relevant content of one event: low outputs at their emitter,
/// and the inputs a low-level object consumes from others.
/// Values are kept raw, without their levels.
pub fn observe(e: &Event, after: &Configuration, names: &Lineage) -> Option<(ObjectId, Observation)> {
    let vals = |vs: &[crate::lattice::TaggedValue]| vs.iter().map(|v| names.name_value(&v.value)).collect();
    let low_dest = |o: &ObjectId| after.registry.get(o) == Some(&Level::L);
    let who = e.object.as_ref().map(|o| names.name_object(o));
    match &e.payload {
        Payload::Invocation { msg } if e.tag == Level::L => Some((
            who?,
            Observation::Sent {
                method: msg.method.clone(),
                dest: names.name_object(&msg.dest),
                actuals: vals(&msg.actuals),
            },
        )),
        Payload::Completion { msg } if e.tag == Level::L => Some((
            who?,
            Observation::Returned {
                value: names.name_value(&msg.value.value),
            },
        )),
        Payload::Creation { id, class, level, .. } if e.tag == Level::L => Some((
            who?,
            Observation::Created {
                id: names.name_object(id),
                class: class.clone(),
                level: *level,
            },
        )),
        Payload::Delivered { msg, .. } if msg.sender != msg.dest && low_dest(&msg.dest) => Some((
            names.name_object(&msg.dest),
            Observation::Received {
                method: msg.method.clone(),
                sender: names.name_object(&msg.sender),
                actuals: vals(&msg.actuals),
            },
        )),
        Payload::FutureRead {
            value, reader_level, ..
        } if *reader_level == Level::L => Some((
            who?,
            Observation::Read {
                value: names.name_value(&value.value),
            },
        )),
        _ => None,
    }
}

/// Records the observations of one step into `into`. `names` must
/// already know the identities the step created.
pub fn record(events: &[Event], after: &Configuration, names: &Lineage, into: &mut ObsMap) {
    for e in events {
        if let Some((o, obs)) = observe(e, after, names) {
            into.entry(o).or_default().push(obs);
        }
    }
}

/// First object whose sequences differ, with the position and both sides.
pub fn first_difference(a: &ObsMap, b: &ObsMap) -> Option<(ObjectId, usize, Option<Observation>, Option<Observation>)> {
    let empty = Vec::new();
    let mut keys: Vec<&ObjectId> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let (x, y) = (a.get(k).unwrap_or(&empty), b.get(k).unwrap_or(&empty));
        if x != y {
            let i = x.iter().zip(y).take_while(|(p, q)| p == q).count();
            return Some((k.clone(), i, x.get(i).cloned(), y.get(i).cloned()));
        }
    }
    None
}

/// True when, per object, one sequence is a prefix of the other.
pub fn prefix_compatible(a: &ObsMap, b: &ObsMap) -> bool {
    let empty = Vec::new();
    a.keys().chain(b.keys()).all(|k| {
        let (x, y) = (a.get(k).unwrap_or(&empty), b.get(k).unwrap_or(&empty));
        let n = x.len().min(y.len());
        x[..n] == y[..n]
    })
}
