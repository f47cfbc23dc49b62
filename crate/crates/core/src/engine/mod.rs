//! Small-step rewrite engine for object, wrapper and future rules.

pub mod eval;
pub mod monitor;
mod rules;
pub mod sched;
pub mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{classify_program, Report};
use crate::config::{
    ClassCmp, Component, Configuration, FutureCmp, FutureStatus, InvocMsg, ObjectCmp, QueueCmp, Store, WrapperCmp,
    WrapperId,
};
use crate::lang::{ResolvedProgram, Stmt};
use crate::lattice::{Level, PcStack, PcUnderflow, TaggedValue};
use crate::value::{fresh_future_id, fresh_object_id, FutureId, IdMapper, ObjectId, Value};

pub use eval::{eval_expr, update_h, EvalError};
pub use monitor::{Monitor, Violation, ViolationKind};
pub use sched::Scheduler;
pub use trace::{read_trace_choices, Termination, Trace, TraceStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "new")]
    New,
    #[serde(rename = "assign")]
    Assign,
    #[serde(rename = "if-low")]
    IfLow,
    #[serde(rename = "if-high")]
    IfHigh,
    #[serde(rename = "endif")]
    EndIf,
    #[serde(rename = "start")]
    Start,
    #[serde(rename = "call")]
    Call,
    #[serde(rename = "call'")]
    CallPrime,
    #[serde(rename = "return")]
    Return,
    #[serde(rename = "w-invc")]
    WInvc,
    #[serde(rename = "fut-get'")]
    FutGetError,
    #[serde(rename = "invc-w'")]
    InvcW,
    #[serde(rename = "w-fut")]
    WFut,
    #[serde(rename = "w-get")]
    WGet,
    #[serde(rename = "fut-get")]
    FutGet,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::New => "new",
            Rule::Assign => "assign",
            Rule::IfLow => "if-low",
            Rule::IfHigh => "if-high",
            Rule::EndIf => "endif",
            Rule::Start => "start",
            Rule::Call => "call",
            Rule::CallPrime => "call'",
            Rule::Return => "return",
            Rule::WInvc => "w-invc",
            Rule::FutGetError => "fut-get'",
            Rule::InvcW => "invc-w'",
            Rule::WFut => "w-fut",
            Rule::WGet => "w-get",
            Rule::FutGet => "fut-get",
        }
    }

    /// Rules that rewrite a single object's process.
    pub fn is_object_rule(self) -> bool {
        matches!(
            self,
            Rule::New
                | Rule::Assign
                | Rule::IfLow
                | Rule::IfHigh
                | Rule::EndIf
                | Rule::Start
                | Rule::Call
                | Rule::CallPrime
                | Rule::Return
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rule together with the identities it binds.
///
/// `object` is the executing object for object rules and reads, the sender
/// for `w-invc` and the destination for `invc-w'`. `future` is the dequeued
/// or filtered message's future, or the future written or read.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepChoice {
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub future: Option<FutureId>,
}

impl StepChoice {
    pub fn new(rule: Rule, object: Option<ObjectId>, future: Option<FutureId>) -> Self {
        StepChoice { rule, object, future }
    }

    fn sort_key(&self) -> (Option<&ObjectId>, Option<&FutureId>, Rule) {
        (self.object.as_ref(), self.future.as_ref(), self.rule)
    }
}

impl fmt::Display for StepChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule)?;
        let ids: Vec<&str> = self
            .object
            .iter()
            .map(|o| o.as_str())
            .chain(self.future.iter().map(|q| q.as_str()))
            .collect();
        write!(f, "({})", ids.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Invocation {
        msg: InvocMsg,
    },
    Completion {
        msg: crate::config::CompMsg,
    },
    Creation {
        id: ObjectId,
        class: String,
        level: Level,
        wrapped: bool,
    },
    FutureCreated {
        id: FutureId,
    },
    /// Enqueued by `invc-q`.
    Delivered {
        msg: InvocMsg,
        wrapped: bool,
    },
    /// Let out of the sender's wrapper.
    Released {
        msg: InvocMsg,
    },
    /// Deleted by the sender's wrapper; its future became `error`.
    Denied {
        msg: InvocMsg,
    },
    /// Let into the destination's wrapper.
    Admitted {
        msg: InvocMsg,
    },
    /// Rejected by the destination's wrapper.
    Dropped {
        msg: InvocMsg,
    },
    Resolved {
        future: FutureId,
        value: TaggedValue,
        wrapped: bool,
    },
    FutureRead {
        future: FutureId,
        target: String,
        value: TaggedValue,
        reader_level: Level,
        wrapper_level: Option<Level>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub rule: Rule,
    pub object: Option<ObjectId>,
    pub payload: Payload,
    pub tag: Level,
}

impl Event {
    /// Emitted messages and object creations.
    pub fn is_output(&self) -> bool {
        matches!(
            self.payload,
            Payload::Invocation { .. } | Payload::Completion { .. } | Payload::Creation { .. }
        )
    }

    pub fn is_low_output(&self) -> bool {
        self.is_output() && self.tag == Level::L
    }

    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        self.object = self.object.as_ref().map(|o| map.object(o));
        match &mut self.payload {
            Payload::Invocation { msg }
            | Payload::Delivered { msg, .. }
            | Payload::Released { msg }
            | Payload::Denied { msg }
            | Payload::Admitted { msg }
            | Payload::Dropped { msg } => msg.map_ids(map),
            Payload::Completion { msg } => msg.map_ids(map),
            Payload::Creation { id, .. } => *id = map.object(id),
            Payload::FutureCreated { id } => *id = map.future(id),
            Payload::Resolved { future, value, .. } => {
                *future = map.future(future);
                value.value.map_ids(map);
            }
            Payload::FutureRead { future, value, .. } => {
                *future = map.future(future);
                value.value.map_ids(map);
            }
        }
    }
}

impl StepChoice {
    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        self.object = self.object.as_ref().map(|o| map.object(o));
        self.future = self.future.as_ref().map(|f| map.future(f));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid choice {0}")]
    InvalidChoice(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("future `{0}` resolved twice")]
    DoubleResolve(FutureId),
    #[error("no registry level for `{0}`")]
    MissingRegistryEntry(ObjectId),
    #[error("class `{class}` has no method `{method}`")]
    UnknownMethod { class: String, method: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("`{method}` expects {expected} argument(s), got {found}")]
    ArityMismatch {
        method: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    PcUnderflow(#[from] PcUnderflow),
}

/// Test doubles that switch off individual protections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faults {
    pub disable_update_h: bool,
    pub disable_w_invc: bool,
    pub disable_w_fut: bool,
}

impl Faults {
    pub fn any(&self) -> bool {
        self.disable_update_h || self.disable_w_invc || self.disable_w_fut
    }
}

/// Attribute overrides applied when the named object is created.
pub type Inputs = BTreeMap<(ObjectId, String), TaggedValue>;

#[derive(Debug, Clone)]
pub struct Engine {
    pub program: Arc<ResolvedProgram>,
    pub report: Report,
    pub faults: Faults,
    pub inputs: Inputs,
}

impl Engine {
    pub fn new(program: Arc<ResolvedProgram>) -> Self {
        let report = classify_program(&program);
        Engine {
            program,
            report,
            faults: Faults::default(),
            inputs: Inputs::new(),
        }
    }

    pub fn with_faults(mut self, faults: Faults) -> Self {
        self.faults = faults;
        self
    }

    pub fn with_inputs(mut self, inputs: Inputs) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn is_unsafe(&self, class: &str) -> bool {
        self.report.get(class).is_some_and(|v| v.is_unsafe())
    }

    /// Class components, plus the main object with its `init` already queued.
    pub fn boot(&self) -> Configuration {
        let mut c = Configuration::new();
        for name in self.program.classes.keys() {
            c.components.push(Component::Class(ClassCmp {
                name: name.clone(),
                counter: 1,
                flow_flag: self.is_unsafe(name),
            }));
        }
        if let Some(main) = &self.program.main_class {
            let id = self.create_object(&mut c, main, Level::L);
            let fid = fresh_future_id(&id, 1);
            c.components.push(Component::Future(FutureCmp {
                id: fid.clone(),
                status: FutureStatus::Unresolved,
            }));
            let o = c.object_mut(&id).expect("just created");
            o.counter = 2;
            let q = c.queue_mut(&id).expect("just created");
            q.msgs.push(InvocMsg {
                fid,
                method: "init".to_string(),
                actuals: Vec::new(),
                sender: id.clone(),
                dest: id,
                tag: Level::L,
            });
        }
        c.canonicalize();
        c
    }

    /// Instantiates `class`: an idle object and its queue, wrapped iff the
    /// class is unsafe, registered at `level`.
    pub(crate) fn create_object(&self, c: &mut Configuration, class: &str, level: Level) -> ObjectId {
        let flow = self.is_unsafe(class);
        let f = {
            let k = c.class_mut(class).expect("class component present");
            let f = k.counter;
            k.counter += 1;
            f
        };
        let id = fresh_object_id(class, f);
        let rc = &self.program.classes[class];
        let mut attrs = Store::new();
        for v in rc.attr_template() {
            attrs.insert(v.name.clone(), TaggedValue::new(v.initial.clone(), v.level));
        }
        for ((oid, var), val) in &self.inputs {
            if oid == &id && attrs.contains_key(var) {
                attrs.insert(var.clone(), val.clone());
            }
        }
        attrs.insert("this".to_string(), TaggedValue::low(Value::Object(id.clone())));
        let obj = Component::Object(ObjectCmp {
            id: id.clone(),
            class: class.to_string(),
            attrs,
            locals: Store::new(),
            stmts: Vec::new(),
            counter: 1,
            level,
            pcs: flow.then(PcStack::new),
        });
        let queue = Component::Queue(QueueCmp {
            owner: id.clone(),
            msgs: Vec::new(),
        });
        if flow {
            c.components.push(Component::Wrapper(WrapperCmp {
                id: WrapperId::Object(id.clone()),
                level,
                inner: vec![obj, queue],
            }));
        } else {
            c.components.push(obj);
            c.components.push(queue);
        }
        c.registry.insert(id.clone(), level);
        id
    }

    /// Every applicable (rule, redex), sorted by (object, future, rule).
    pub fn enabled_steps(&self, c: &Configuration) -> Vec<StepChoice> {
        let mut out = Vec::new();
        for o in c.objects() {
            if o.is_idle() {
                if let Some(q) = c.queue(&o.id) {
                    for m in &q.msgs {
                        out.push(StepChoice::new(Rule::Start, Some(o.id.clone()), Some(m.fid.clone())));
                    }
                }
                continue;
            }
            if let Some(ch) = self.object_choice(c, o) {
                out.push(ch);
            }
        }
        for comp in &c.components {
            match comp {
                Component::Wrapper(w) => {
                    if let WrapperId::Object(owner) = &w.id {
                        for ic in &w.inner {
                            if let Component::Invoc(m) = ic {
                                let pending = matches!(
                                    c.future(&m.fid),
                                    Some((
                                        FutureCmp {
                                            status: FutureStatus::Unresolved,
                                            ..
                                        },
                                        None
                                    ))
                                );
                                if &m.sender == owner && pending {
                                    out.push(StepChoice::new(Rule::WInvc, Some(owner.clone()), Some(m.fid.clone())));
                                }
                            }
                        }
                    }
                }
                Component::Invoc(m) => {
                    if c.object_wrapper(&m.dest).is_some() {
                        out.push(StepChoice::new(Rule::InvcW, Some(m.dest.clone()), Some(m.fid.clone())));
                    }
                }
                Component::Comp(m) => {
                    if matches!(
                        c.future(&m.fid),
                        Some((
                            FutureCmp {
                                status: FutureStatus::Unresolved,
                                ..
                            },
                            None
                        ))
                    ) {
                        out.push(StepChoice::new(Rule::WFut, Some(m.sender.clone()), Some(m.fid.clone())));
                    }
                }
                _ => {}
            }
        }
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }

    fn object_choice(&self, c: &Configuration, o: &ObjectCmp) -> Option<StepChoice> {
        let me = Some(o.id.clone());
        let rule = match o.stmts.first()? {
            Stmt::New { .. } => Rule::New,
            Stmt::Assign { .. } => Rule::Assign,
            Stmt::If { cond, .. } => {
                if !o.flow_sensitive() {
                    Rule::IfLow
                } else {
                    let high = eval_expr(cond, &o.attrs, &o.locals).is_ok_and(|t| t.level.is_high());
                    if high || o.pc().is_high() {
                        Rule::IfHigh
                    } else {
                        Rule::IfLow
                    }
                }
            }
            Stmt::EndIf(_) => Rule::EndIf,
            Stmt::FutCall { .. } => Rule::Call,
            Stmt::Call { .. } => Rule::CallPrime,
            Stmt::Return(_) => Rule::Return,
            Stmt::Get { future, .. } => {
                let fid = match eval_expr(&crate::lang::Expr::var(future.clone()), &o.attrs, &o.locals) {
                    Ok(TaggedValue {
                        value: Value::Future(f),
                        ..
                    }) => f,
                    _ => return None,
                };
                let rule = match c.future(&fid)? {
                    (f, _) if f.status == FutureStatus::Error => Rule::FutGetError,
                    (
                        FutureCmp {
                            status: FutureStatus::Resolved(_),
                            ..
                        },
                        None,
                    ) => Rule::FutGet,
                    (
                        FutureCmp {
                            status: FutureStatus::Resolved(_),
                            ..
                        },
                        Some(_),
                    ) => Rule::WGet,
                    _ => return None,
                };
                return Some(StepChoice::new(rule, me, Some(fid)));
            }
        };
        Some(StepChoice::new(rule, me, None))
    }

    /// Applies one rule, then the `invc-q` equation. Returns the events.
    pub fn apply(&self, c: &mut Configuration, choice: &StepChoice, step: usize) -> Result<Vec<Event>, EngineError> {
        let mut events = match choice.rule {
            r if r.is_object_rule() => self.exec_object_step(c, choice, step)?,
            Rule::WInvc => self.filter_outgoing_invocation(c, choice, step)?,
            Rule::InvcW => self.admit_incoming_invocation(c, choice, step)?,
            Rule::WFut => self.resolve_future(c, choice, step)?,
            Rule::WGet | Rule::FutGet | Rule::FutGetError => self.read_future(c, choice, step)?,
            _ => unreachable!(),
        };
        for d in c.normalize() {
            events.push(Event {
                step,
                rule: choice.rule,
                object: Some(d.msg.dest.clone()),
                tag: d.msg.tag,
                payload: Payload::Delivered {
                    msg: d.msg,
                    wrapped: d.wrapped,
                },
            });
        }
        Ok(events)
    }

    /// Applies a choice after checking it is currently enabled.
    pub fn apply_checked(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        if !self.enabled_steps(c).contains(choice) {
            return Err(EngineError::InvalidChoice(choice.to_string()));
        }
        self.apply(c, choice, step)
    }

    /// True when every object is idle and nothing is pending.
    pub fn is_quiescent(&self, c: &Configuration) -> bool {
        self.enabled_steps(c).is_empty() && c.objects().all(ObjectCmp::is_idle)
    }
}
