//! Runtime configurations: a multiset of objects, classes, queues, messages,
//! futures and wrappers, plus the object level registry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lang::Stmt;
use crate::lattice::{Level, PcStack, TaggedValue};
use crate::value::{FutureId, IdMapper, ObjectId};

/// Variable bindings of an object (`a`) or of its active process (`l`).
pub type Store = BTreeMap<String, TaggedValue>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unbound variable `{0}`")]
pub struct UnboundVariable(pub String);

/// Lookup in the composition `a#l`: locals shadow attributes.
pub fn state_lookup<'s>(x: &str, a: &'s Store, l: &'s Store) -> Result<&'s TaggedValue, UnboundVariable> {
    l.get(x)
        .or_else(|| a.get(x))
        .ok_or_else(|| UnboundVariable(x.to_string()))
}

/// Update `x` in `l` if bound there, else in `a`.
pub fn state_insert(x: &str, v: TaggedValue, a: &mut Store, l: &mut Store) -> Result<(), UnboundVariable> {
    if let Some(slot) = l.get_mut(x) {
        *slot = v;
    } else if let Some(slot) = a.get_mut(x) {
        *slot = v;
    } else {
        return Err(UnboundVariable(x.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectCmp {
    pub id: ObjectId,
    pub class: String,
    pub attrs: Store,
    pub locals: Store,
    pub stmts: Vec<Stmt>,
    pub counter: u64,
    pub level: Level,
    /// Present iff the object is flow-sensitive.
    pub pcs: Option<PcStack>,
}

impl ObjectCmp {
    pub fn is_idle(&self) -> bool {
        self.locals.is_empty() && self.stmts.is_empty()
    }

    pub fn flow_sensitive(&self) -> bool {
        self.pcs.is_some()
    }

    pub fn pc(&self) -> Level {
        self.pcs.as_ref().map_or(Level::L, PcStack::level)
    }
}

/// Runtime part of a class; its template and methods live in the program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassCmp {
    pub name: String,
    pub counter: u64,
    pub flow_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueueCmp {
    pub owner: ObjectId,
    pub msgs: Vec<InvocMsg>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InvocMsg {
    pub fid: FutureId,
    pub method: String,
    pub actuals: Vec<TaggedValue>,
    pub sender: ObjectId,
    pub dest: ObjectId,
    pub tag: Level,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompMsg {
    pub value: TaggedValue,
    pub sender: ObjectId,
    pub fid: FutureId,
    pub tag: Level,
}

impl InvocMsg {
    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        self.fid = map.future(&self.fid);
        self.sender = map.object(&self.sender);
        self.dest = map.object(&self.dest);
        self.actuals.iter_mut().for_each(|v| v.value.map_ids(map));
    }
}

impl CompMsg {
    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        self.sender = map.object(&self.sender);
        self.fid = map.future(&self.fid);
        self.value.value.map_ids(map);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "value")]
pub enum FutureStatus {
    Unresolved,
    Resolved(TaggedValue),
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FutureCmp {
    pub id: FutureId,
    pub status: FutureStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WrapperId {
    Object(ObjectId),
    Future(FutureId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WrapperCmp {
    pub id: WrapperId,
    pub level: Level,
    pub inner: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Component {
    Class(ClassCmp),
    Object(ObjectCmp),
    Queue(QueueCmp),
    Invoc(InvocMsg),
    Comp(CompMsg),
    Future(FutureCmp),
    Wrapper(WrapperCmp),
}

impl Component {
    pub fn kind(&self) -> &'static str {
        match self {
            Component::Class(_) => "class",
            Component::Object(_) => "object",
            Component::Queue(_) => "queue",
            Component::Invoc(_) => "invoc",
            Component::Comp(_) => "comp",
            Component::Future(_) => "future",
            Component::Wrapper(_) => "wrapper",
        }
    }

    fn canonicalize(&mut self) {
        match self {
            Component::Queue(q) => q.msgs.sort(),
            Component::Wrapper(w) => {
                w.inner.iter_mut().for_each(Component::canonicalize);
                w.inner.sort();
            }
            _ => {}
        }
    }
}

/// A delivery performed by the `invc-q` equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub msg: InvocMsg,
    /// Whether the queue sits inside the owner's wrapper.
    pub wrapped: bool,
}

/// Equality is multiset equality: component order never matters.
#[derive(Debug, Clone, Default, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub components: Vec<Component>,
    pub registry: BTreeMap<ObjectId, Level>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.registry == other.registry && self.canonical().components == other.canonical().components
    }
}

impl Configuration {
    pub fn new() -> Self {
        Configuration::default()
    }

    /// Canonical representative: components sorted recursively, queue contents sorted.
    pub fn canonical(&self) -> Configuration {
        let mut c = self.clone();
        c.canonicalize();
        c
    }

    pub fn canonicalize(&mut self) {
        self.components.iter_mut().for_each(Component::canonicalize);
        self.components.sort();
    }

    /// Multiset union.
    pub fn compose(&self, other: &Configuration) -> Configuration {
        let mut c = self.clone();
        c.components.extend(other.components.iter().cloned());
        for (k, v) in &other.registry {
            c.registry.insert(k.clone(), *v);
        }
        c
    }

    /// Applies `invc-q` to a fixpoint: every invocation beside its
    /// destination queue, at top level or inside one wrapper, is enqueued.
    pub fn normalize(&mut self) -> Vec<Delivery> {
        let mut delivered = Vec::new();
        enqueue_in(&mut self.components, false, &mut delivered);
        for c in self.components.iter_mut() {
            if let Component::Wrapper(w) = c {
                enqueue_in(&mut w.inner, true, &mut delivered);
            }
        }
        delivered
    }

    pub fn is_normal(&self) -> bool {
        fn normal(cs: &[Component]) -> bool {
            !cs.iter().any(|c| match c {
                Component::Invoc(m) => cs.iter().any(|q| matches!(q, Component::Queue(q) if q.owner == m.dest)),
                _ => false,
            })
        }
        normal(&self.components)
            && self.components.iter().all(|c| match c {
                Component::Wrapper(w) => normal(&w.inner),
                _ => true,
            })
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectCmp> {
        self.objects().find(|o| &o.id == id)
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut ObjectCmp> {
        for c in self.components.iter_mut() {
            match c {
                Component::Object(o) if &o.id == id => return Some(o),
                Component::Wrapper(w) => {
                    for ic in w.inner.iter_mut() {
                        if let Component::Object(o) = ic {
                            if &o.id == id {
                                return Some(o);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Every object, at top level or in a wrapper.
    pub fn objects(&self) -> impl Iterator<Item = &ObjectCmp> {
        self.all().filter_map(|c| match c {
            Component::Object(o) => Some(o),
            _ => None,
        })
    }

    /// Every component, descending into wrappers (the wrapper itself included).
    pub fn all(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().flat_map(|c| {
            let inner: &[Component] = match c {
                Component::Wrapper(w) => &w.inner,
                _ => &[],
            };
            std::iter::once(c).chain(inner.iter())
        })
    }

    pub fn queue(&self, owner: &ObjectId) -> Option<&QueueCmp> {
        self.all().find_map(|c| match c {
            Component::Queue(q) if &q.owner == owner => Some(q),
            _ => None,
        })
    }

    pub fn queue_mut(&mut self, owner: &ObjectId) -> Option<&mut QueueCmp> {
        for c in self.components.iter_mut() {
            match c {
                Component::Queue(q) if &q.owner == owner => return Some(q),
                Component::Wrapper(w) => {
                    for ic in w.inner.iter_mut() {
                        if let Component::Queue(q) = ic {
                            if &q.owner == owner {
                                return Some(q);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        None
    }

    pub fn class(&self, name: &str) -> Option<&ClassCmp> {
        self.components.iter().find_map(|c| match c {
            Component::Class(k) if k.name == name => Some(k),
            _ => None,
        })
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassCmp> {
        self.components.iter_mut().find_map(|c| match c {
            Component::Class(k) if k.name == name => Some(k),
            _ => None,
        })
    }

    /// The future and whether it sits inside a wrapper (with that wrapper's level).
    pub fn future(&self, id: &FutureId) -> Option<(&FutureCmp, Option<Level>)> {
        self.components.iter().find_map(|c| match c {
            Component::Future(f) if &f.id == id => Some((f, None)),
            Component::Wrapper(w) => w.inner.iter().find_map(|ic| match ic {
                Component::Future(f) if &f.id == id => Some((f, Some(w.level))),
                _ => None,
            }),
            _ => None,
        })
    }

    pub fn future_mut(&mut self, id: &FutureId) -> Option<&mut FutureCmp> {
        for c in self.components.iter_mut() {
            match c {
                Component::Future(f) if &f.id == id => return Some(f),
                Component::Wrapper(w) => {
                    for ic in w.inner.iter_mut() {
                        if let Component::Future(f) = ic {
                            if &f.id == id {
                                return Some(f);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Level of the wrapper around object `id`, if any.
    pub fn object_wrapper(&self, id: &ObjectId) -> Option<&WrapperCmp> {
        self.components.iter().find_map(|c| match c {
            Component::Wrapper(w) if w.id == WrapperId::Object(id.clone()) => Some(w),
            _ => None,
        })
    }

    pub fn object_wrapper_mut(&mut self, id: &ObjectId) -> Option<&mut WrapperCmp> {
        self.components.iter_mut().find_map(|c| match c {
            Component::Wrapper(w) if w.id == WrapperId::Object(id.clone()) => Some(w),
            _ => None,
        })
    }

    pub fn wrapper_ids(&self) -> Vec<WrapperId> {
        let mut ids: Vec<WrapperId> = self
            .components
            .iter()
            .filter_map(|c| match c {
                Component::Wrapper(w) => Some(w.id.clone()),
                _ => None,
            })
            .collect();
        ids.sort();
        ids
    }

    /// One JSON record per component, in canonical order.
    pub fn dump_records(&self) -> Vec<serde_json::Value> {
        let c = self.canonical();
        let mut out: Vec<serde_json::Value> = c
            .components
            .iter()
            .map(|comp| serde_json::to_value(comp).expect("components serialize"))
            .collect();
        out.push(serde_json::json!({ "kind": "registry", "levels": c.registry }));
        out
    }

    pub fn dump(&self) -> String {
        self.dump_records()
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Every object identity mentioned anywhere, including inside values.
    pub fn mentioned_objects(&self) -> Vec<ObjectId> {
        let mut out = std::collections::BTreeSet::new();
        let see_tv = |tv: &TaggedValue, out: &mut std::collections::BTreeSet<ObjectId>| {
            tv.value.for_each_id(&mut |r| {
                if let crate::value::IdRef::Object(o) = r {
                    out.insert(o.clone());
                }
            })
        };
        for c in self.all() {
            match c {
                Component::Object(o) => {
                    out.insert(o.id.clone());
                    o.attrs
                        .values()
                        .chain(o.locals.values())
                        .for_each(|v| see_tv(v, &mut out));
                }
                Component::Queue(q) => {
                    out.insert(q.owner.clone());
                    for m in &q.msgs {
                        out.insert(m.sender.clone());
                        out.insert(m.dest.clone());
                        m.actuals.iter().for_each(|v| see_tv(v, &mut out));
                    }
                }
                Component::Invoc(m) => {
                    out.insert(m.sender.clone());
                    out.insert(m.dest.clone());
                    m.actuals.iter().for_each(|v| see_tv(v, &mut out));
                }
                Component::Comp(m) => {
                    out.insert(m.sender.clone());
                    see_tv(&m.value, &mut out);
                }
                Component::Future(f) => {
                    if let FutureStatus::Resolved(v) = &f.status {
                        see_tv(v, &mut out);
                    }
                }
                Component::Wrapper(w) => {
                    if let WrapperId::Object(o) = &w.id {
                        out.insert(o.clone());
                    }
                }
                Component::Class(_) => {}
            }
        }
        out.into_iter().collect()
    }

    /// Renames every identity in the configuration.
    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        fn tv(v: &mut TaggedValue, map: &mut impl IdMapper) {
            v.value.map_ids(map)
        }
        fn comp(c: &mut Component, map: &mut impl IdMapper) {
            match c {
                Component::Class(_) => {}
                Component::Object(o) => {
                    o.id = map.object(&o.id);
                    o.attrs
                        .values_mut()
                        .chain(o.locals.values_mut())
                        .for_each(|v| tv(v, map));
                    o.stmts.iter_mut().for_each(|s| s.map_ids(map));
                }
                Component::Queue(q) => {
                    q.owner = map.object(&q.owner);
                    q.msgs.iter_mut().for_each(|m| m.map_ids(map));
                }
                Component::Invoc(m) => m.map_ids(map),
                Component::Comp(m) => m.map_ids(map),
                Component::Future(f) => {
                    f.id = map.future(&f.id);
                    if let FutureStatus::Resolved(v) = &mut f.status {
                        tv(v, map);
                    }
                }
                Component::Wrapper(w) => {
                    w.id = match &w.id {
                        WrapperId::Object(o) => WrapperId::Object(map.object(o)),
                        WrapperId::Future(f) => WrapperId::Future(map.future(f)),
                    };
                    w.inner.iter_mut().for_each(|c| comp(c, map));
                }
            }
        }
        self.components.iter_mut().for_each(|c| comp(c, map));
        self.registry = std::mem::take(&mut self.registry)
            .into_iter()
            .map(|(k, v)| (map.object(&k), v))
            .collect();
    }
}

fn enqueue_in(cs: &mut Vec<Component>, wrapped: bool, delivered: &mut Vec<Delivery>) {
    let mut i = 0;
    while i < cs.len() {
        let dest = match &cs[i] {
            Component::Invoc(m) => m.dest.clone(),
            _ => {
                i += 1;
                continue;
            }
        };
        let has_queue = cs.iter().any(|c| matches!(c, Component::Queue(q) if q.owner == dest));
        if !has_queue {
            i += 1;
            continue;
        }
        let Component::Invoc(m) = cs.remove(i) else {
            unreachable!()
        };
        for c in cs.iter_mut() {
            if let Component::Queue(q) = c {
                if q.owner == dest {
                    q.msgs.push(m.clone());
                    q.msgs.sort();
                    break;
                }
            }
        }
        delivered.push(Delivery { msg: m, wrapped });
    }
}
