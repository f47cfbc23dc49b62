use super::eval::{eval_expr, level_of, update_h};
use super::{Engine, EngineError, Event, Payload, Rule, StepChoice};
use crate::config::{
    state_insert, CompMsg, Component, Configuration, FutureCmp, FutureStatus, InvocMsg, ObjectCmp, Store, WrapperCmp,
    WrapperId,
};
use crate::lang::{Expr, Stmt};
use crate::lattice::{Level, TaggedValue};
use crate::value::{fresh_future_id, ObjectId, Value};

fn invalid(choice: &StepChoice, why: &str) -> EngineError {
    EngineError::InvalidChoice(format!("{choice}: {why}"))
}

fn event(step: usize, rule: Rule, object: &ObjectId, tag: Level, payload: Payload) -> Event {
    Event {
        step,
        rule,
        object: Some(object.clone()),
        payload,
        tag,
    }
}

fn as_object(v: &Value, op: &str) -> Result<ObjectId, EngineError> {
    match v {
        Value::Object(o) => Ok(o.clone()),
        other => Err(EngineError::Eval(super::EvalError::TypeMismatch {
            op: op.to_string(),
            found: other.type_name().to_string(),
        })),
    }
}

impl Engine {
    /// Object rules: new, assign, if-low, if-high, endif, start, call, call', return.
    pub fn exec_object_step(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        let oid = choice.object.clone().ok_or_else(|| invalid(choice, "no object"))?;
        let o = c.object(&oid).ok_or_else(|| invalid(choice, "no such object"))?.clone();
        let pc = o.pc();
        let mut events = Vec::new();

        if choice.rule == Rule::Start {
            let fid = choice.future.clone().ok_or_else(|| invalid(choice, "no message"))?;
            if !o.is_idle() {
                return Err(invalid(choice, "object busy"));
            }
            let q = c.queue_mut(&oid).ok_or_else(|| invalid(choice, "no queue"))?;
            let pos = q
                .msgs
                .iter()
                .position(|m| m.fid == fid)
                .ok_or_else(|| invalid(choice, "message not queued"))?;
            let msg = q.msgs.remove(pos);
            let m = self
                .program
                .method(&o.class, &msg.method)
                .ok_or_else(|| EngineError::UnknownMethod {
                    class: o.class.clone(),
                    method: msg.method.clone(),
                })?;
            if m.formals.len() != msg.actuals.len() {
                return Err(EngineError::ArityMismatch {
                    method: msg.method.clone(),
                    expected: m.formals.len(),
                    found: msg.actuals.len(),
                });
            }
            let mut locals = Store::new();
            for l in &m.locals {
                locals.insert(l.name.clone(), TaggedValue::low(l.initial.clone()));
            }
            for (f, a) in m.formals.iter().zip(&msg.actuals) {
                locals.insert(f.name.clone(), a.clone());
            }
            locals.insert("label".to_string(), TaggedValue::low(Value::Future(msg.fid.clone())));
            let obj = c.object_mut(&oid).unwrap();
            obj.locals = locals;
            obj.stmts = m.body.clone();
            return Ok(events);
        }

        let Some(head) = o.stmts.first().cloned() else {
            return Err(invalid(choice, "object idle"));
        };
        let rest = o.stmts[1..].to_vec();
        let mut obj: ObjectCmp = o;

        match (choice.rule, head) {
            (
                Rule::New,
                Stmt::New {
                    target,
                    level,
                    class,
                    args,
                },
            ) => {
                if c.class(&class).is_none() {
                    return Err(EngineError::UnknownClass(class));
                }
                let level = level.unwrap_or(Level::L);
                let id = self.create_object(c, &class, level);
                let wrapped = self.is_unsafe(&class);
                events.push(event(
                    step,
                    Rule::New,
                    &oid,
                    pc,
                    Payload::Creation {
                        id: id.clone(),
                        class: class.clone(),
                        level,
                        wrapped,
                    },
                ));
                let mut stmts = vec![
                    Stmt::assign(target.clone(), Expr::Lit(Value::Object(id))),
                    Stmt::Call {
                        callee: Expr::Var(target),
                        method: "init".to_string(),
                        args,
                    },
                ];
                stmts.extend(rest);
                obj.stmts = stmts;
            }
            (Rule::Assign, Stmt::Assign { target, value }) => {
                let v = eval_expr(&value, &obj.attrs, &obj.locals)?.raised(pc);
                state_insert(&target, v, &mut obj.attrs, &mut obj.locals).map_err(super::EvalError::from)?;
                obj.stmts = rest;
            }
            (
                rule @ (Rule::IfLow | Rule::IfHigh),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                },
            ) => {
                let g = eval_expr(&cond, &obj.attrs, &obj.locals)?;
                let b = match g.value {
                    Value::Bool(b) => b,
                    Value::Int(i) => i != 0,
                    other => {
                        return Err(EngineError::Eval(super::EvalError::TypeMismatch {
                            op: "if".to_string(),
                            found: other.type_name().to_string(),
                        }))
                    }
                };
                let high = obj.flow_sensitive() && (g.level.is_high() || pc.is_high());
                if high != (rule == Rule::IfHigh) {
                    return Err(invalid(choice, "guard level does not match the rule"));
                }
                let els = else_branch.unwrap_or_default();
                let (taken, untaken) = if b { (then_branch, els) } else { (els, then_branch) };
                let mut stmts = taken;
                if high {
                    obj.pcs.as_mut().unwrap().push_high();
                    stmts.push(Stmt::EndIf(untaken));
                }
                stmts.extend(rest);
                obj.stmts = stmts;
            }
            (Rule::EndIf, Stmt::EndIf(untaken)) => {
                if !self.faults.disable_update_h {
                    update_h(&untaken, &mut obj.attrs, &mut obj.locals);
                }
                obj.pcs
                    .as_mut()
                    .ok_or_else(|| invalid(choice, "not flow-sensitive"))?
                    .pop()?;
                obj.stmts = rest;
            }
            (
                Rule::Call,
                Stmt::FutCall {
                    future,
                    callee,
                    method,
                    args,
                },
            ) => {
                let target = eval_expr(&callee, &obj.attrs, &obj.locals)?;
                as_object(&target.value, "future call")?;
                let nfid = fresh_future_id(&oid, obj.counter);
                if c.future(&nfid).is_some() {
                    return Err(invalid(choice, "future already exists"));
                }
                c.components.push(Component::Future(FutureCmp {
                    id: nfid.clone(),
                    status: FutureStatus::Unresolved,
                }));
                events.push(event(
                    step,
                    Rule::Call,
                    &oid,
                    pc,
                    Payload::FutureCreated { id: nfid.clone() },
                ));
                let mut stmts = vec![
                    Stmt::assign(future, Expr::Lit(Value::Future(nfid))),
                    Stmt::Call { callee, method, args },
                ];
                stmts.extend(rest);
                obj.stmts = stmts;
            }
            (Rule::CallPrime, Stmt::Call { callee, method, args }) => {
                let target = eval_expr(&callee, &obj.attrs, &obj.locals)?;
                let dests = match &target.value {
                    Value::List(items) => items
                        .iter()
                        .map(|v| as_object(v, "multicast"))
                        .collect::<Result<Vec<_>, _>>()?,
                    v => vec![as_object(v, "call")?],
                };
                let actuals = args
                    .iter()
                    .map(|a| eval_expr(a, &obj.attrs, &obj.locals))
                    .collect::<Result<Vec<_>, _>>()?;
                let tag = level_of(&actuals).join(pc);
                for dest in dests {
                    let fid = fresh_future_id(&oid, obj.counter);
                    obj.counter += 1;
                    if c.future(&fid).is_none() {
                        c.components.push(Component::Future(FutureCmp {
                            id: fid.clone(),
                            status: FutureStatus::Unresolved,
                        }));
                        events.push(event(
                            step,
                            Rule::CallPrime,
                            &oid,
                            pc,
                            Payload::FutureCreated { id: fid.clone() },
                        ));
                    }
                    let msg = InvocMsg {
                        fid,
                        method: method.clone(),
                        actuals: actuals.clone(),
                        sender: oid.clone(),
                        dest,
                        tag,
                    };
                    events.push(event(
                        step,
                        Rule::CallPrime,
                        &oid,
                        tag,
                        Payload::Invocation { msg: msg.clone() },
                    ));
                    match c.object_wrapper_mut(&oid) {
                        Some(w) => w.inner.push(Component::Invoc(msg)),
                        None => c.components.push(Component::Invoc(msg)),
                    }
                }
                obj.stmts = rest;
            }
            (Rule::Return, Stmt::Return(e)) => {
                if !rest.is_empty() {
                    return Err(invalid(choice, "return is not the last statement"));
                }
                let d = eval_expr(&e, &obj.attrs, &obj.locals)?;
                let tag = d.level.join(pc);
                let fid = match obj.locals.get("label").map(|v| &v.value) {
                    Some(Value::Future(f)) => f.clone(),
                    _ => return Err(invalid(choice, "no label bound")),
                };
                let msg = CompMsg {
                    value: TaggedValue::new(d.value, tag),
                    sender: oid.clone(),
                    fid,
                    tag,
                };
                events.push(event(
                    step,
                    Rule::Return,
                    &oid,
                    tag,
                    Payload::Completion { msg: msg.clone() },
                ));
                c.components.push(Component::Comp(msg));
                obj.locals.clear();
                obj.stmts.clear();
            }
            (_, head) => {
                return Err(invalid(
                    choice,
                    &format!("rule does not match `{}`", crate::lang::pretty_stmt(&head)),
                ))
            }
        }
        *c.object_mut(&oid).unwrap() = obj;
        Ok(events)
    }

    /// `w-invc`: let an invocation out of its sender's wrapper, or delete it
    /// and fail its future.
    pub fn filter_outgoing_invocation(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        let (Some(owner), Some(fid)) = (&choice.object, &choice.future) else {
            return Err(invalid(choice, "incomplete redex"));
        };
        if !matches!(
            c.future(fid),
            Some((
                FutureCmp {
                    status: FutureStatus::Unresolved,
                    ..
                },
                None
            ))
        ) {
            return Err(invalid(choice, "future not pending"));
        }
        let w = c
            .object_wrapper_mut(owner)
            .ok_or_else(|| invalid(choice, "sender not wrapped"))?;
        let pos = w
            .inner
            .iter()
            .position(|ic| matches!(ic, Component::Invoc(m) if &m.fid == fid && &m.sender == owner))
            .ok_or_else(|| invalid(choice, "no such message in the wrapper"))?;
        let Component::Invoc(msg) = w.inner[pos].clone() else {
            unreachable!()
        };
        let dest_level = *c
            .registry
            .get(&msg.dest)
            .ok_or_else(|| EngineError::MissingRegistryEntry(msg.dest.clone()))?;
        let w = c.object_wrapper_mut(owner).unwrap();
        w.inner.remove(pos);
        if msg.tag.leq(dest_level) || self.faults.disable_w_invc {
            c.components.push(Component::Invoc(msg.clone()));
            Ok(vec![event(
                step,
                Rule::WInvc,
                owner,
                msg.tag,
                Payload::Released { msg },
            )])
        } else {
            c.future_mut(fid).unwrap().status = FutureStatus::Error;
            Ok(vec![event(step, Rule::WInvc, owner, msg.tag, Payload::Denied { msg })])
        }
    }

    /// `invc-w'`: admit an invocation into its destination's wrapper iff every
    /// actual is within the declared formal level; otherwise drop it.
    pub fn admit_incoming_invocation(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        let (Some(dest), Some(fid)) = (&choice.object, &choice.future) else {
            return Err(invalid(choice, "incomplete redex"));
        };
        let pos = c
            .components
            .iter()
            .position(|x| matches!(x, Component::Invoc(m) if &m.fid == fid && &m.dest == dest))
            .ok_or_else(|| invalid(choice, "no such message"))?;
        let class = c
            .object(dest)
            .map(|o| o.class.clone())
            .ok_or_else(|| invalid(choice, "no destination object"))?;
        if c.object_wrapper(dest).is_none() {
            return Err(invalid(choice, "destination not wrapped"));
        }
        let Component::Invoc(msg) = c.components[pos].clone() else {
            unreachable!()
        };
        let m = self
            .program
            .method(&class, &msg.method)
            .ok_or_else(|| EngineError::UnknownMethod {
                class: class.clone(),
                method: msg.method.clone(),
            })?;
        let ok = msg.actuals.len() == m.formals.len()
            && msg
                .actuals
                .iter()
                .enumerate()
                .all(|(i, a)| a.level.leq(m.formals[i].level));
        c.components.remove(pos);
        if ok {
            c.object_wrapper_mut(dest)
                .unwrap()
                .inner
                .push(Component::Invoc(msg.clone()));
            Ok(vec![event(step, Rule::InvcW, dest, msg.tag, Payload::Admitted { msg })])
        } else {
            Ok(vec![event(step, Rule::InvcW, dest, msg.tag, Payload::Dropped { msg })])
        }
    }

    /// `w-fut`: write a completion into its future, wrapping it at `H` when
    /// the completion is high.
    pub fn resolve_future(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        let fid = choice.future.clone().ok_or_else(|| invalid(choice, "no future"))?;
        let pos = c
            .components
            .iter()
            .position(|x| matches!(x, Component::Comp(m) if m.fid == fid))
            .ok_or_else(|| invalid(choice, "no completion for the future"))?;
        match c.future(&fid) {
            Some((
                FutureCmp {
                    status: FutureStatus::Unresolved,
                    ..
                },
                None,
            )) => {}
            Some(_) => return Err(EngineError::DoubleResolve(fid)),
            None => return Err(invalid(choice, "no such future")),
        }
        let Component::Comp(msg) = c.components.remove(pos) else {
            unreachable!()
        };
        let fpos = c
            .components
            .iter()
            .position(|x| matches!(x, Component::Future(f) if f.id == fid))
            .unwrap();
        let resolved = FutureCmp {
            id: fid.clone(),
            status: FutureStatus::Resolved(msg.value.clone()),
        };
        let wrapped = msg.tag.is_high() && !self.faults.disable_w_fut;
        c.components[fpos] = if wrapped {
            Component::Wrapper(WrapperCmp {
                id: WrapperId::Future(fid.clone()),
                level: Level::H,
                inner: vec![Component::Future(resolved)],
            })
        } else {
            Component::Future(resolved)
        };
        Ok(vec![Event {
            step,
            rule: Rule::WFut,
            object: Some(msg.sender.clone()),
            tag: msg.tag,
            payload: Payload::Resolved {
                future: fid,
                value: msg.value,
                wrapped,
            },
        }])
    }

    /// `fut-get`, `w-get`, `fut-get'`: turn `q?(x)` into an assignment of the
    /// future's value, or of `error`.
    pub fn read_future(
        &self,
        c: &mut Configuration,
        choice: &StepChoice,
        step: usize,
    ) -> Result<Vec<Event>, EngineError> {
        let (Some(oid), Some(fid)) = (&choice.object, &choice.future) else {
            return Err(invalid(choice, "incomplete redex"));
        };
        let o = c.object(oid).ok_or_else(|| invalid(choice, "no such object"))?;
        let Some(Stmt::Get { future, target }) = o.stmts.first().cloned() else {
            return Err(invalid(choice, "object is not reading a future"));
        };
        match eval_expr(&Expr::var(future), &o.attrs, &o.locals)?.value {
            Value::Future(f) if &f == fid => {}
            _ => return Err(invalid(choice, "object reads a different future")),
        }
        let reader_level = o.level;
        let (f, wrapper) = c.future(fid).ok_or_else(|| invalid(choice, "no such future"))?;
        let error = TaggedValue::low(Value::Error);
        let delivered = match (choice.rule, &f.status, wrapper) {
            (Rule::FutGet, FutureStatus::Resolved(d), None) => d.clone(),
            (Rule::WGet, FutureStatus::Resolved(d), Some(lev)) => {
                if lev.leq(reader_level) {
                    d.clone()
                } else {
                    error
                }
            }
            (Rule::FutGetError, FutureStatus::Error, _) => error,
            _ => return Err(invalid(choice, "future state does not match the rule")),
        };
        let obj = c.object_mut(oid).unwrap();
        obj.stmts[0] = Stmt::assign(target.clone(), Expr::Tagged(delivered.clone()));
        Ok(vec![event(
            step,
            choice.rule,
            oid,
            delivered.level,
            Payload::FutureRead {
                future: fid.clone(),
                target,
                value: delivered,
                reader_level,
                wrapper_level: wrapper,
            },
        )])
    }
}
