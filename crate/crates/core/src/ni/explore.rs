//! Exhaustive interleaving exploration of both runs.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashSet};
use std::hash::{Hash, Hasher};

use super::equiv::{first_difference, prefix_compatible, record, Lineage, ObsMap};
use super::{NiVerdict, NiWitness};
use crate::config::{Component, Configuration};
use crate::engine::{Engine, EngineError, StepChoice};

/// Everything one run can show a low observer.
#[derive(Debug, Clone, Default)]
pub struct Explored {
    /// Observation maps of maximal executions, each with one schedule
    /// producing it.
    pub complete: BTreeMap<ObsMap, Vec<StepChoice>>,
    /// Observation maps at the depth bound.
    pub truncated: BTreeMap<ObsMap, Vec<StepChoice>>,
    pub states: usize,
}

struct Node {
    config: Configuration,
    names: Lineage,
    obs: ObsMap,
    depth: usize,
    at: usize,
}

fn hash_one(x: &impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

/// Hash of a component that ignores the order of queue and wrapper
/// contents, so no canonical copy is needed.
fn component_hash(c: &Component) -> u64 {
    let mut h = DefaultHasher::new();
    match c {
        Component::Queue(q) => {
            q.owner.hash(&mut h);
            let mut msgs: Vec<u64> = q.msgs.iter().map(hash_one).collect();
            msgs.sort_unstable();
            msgs.hash(&mut h);
        }
        Component::Wrapper(w) => {
            w.id.hash(&mut h);
            w.level.hash(&mut h);
            let mut inner: Vec<u64> = w.inner.iter().map(component_hash).collect();
            inner.sort_unstable();
            inner.hash(&mut h);
        }
        other => other.hash(&mut h),
    }
    h.finish()
}

fn fingerprint(c: &Configuration, obs: &ObsMap) -> u64 {
    let mut parts: Vec<u64> = c.components.iter().map(component_hash).collect();
    parts.sort_unstable();
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    c.registry.hash(&mut h);
    obs.hash(&mut h);
    h.finish()
}

fn path(trail: &[(usize, Option<StepChoice>)], mut at: usize) -> Vec<StepChoice> {
    let mut out = Vec::new();
    while let (parent, Some(ch)) = &trail[at] {
        out.push(ch.clone());
        at = *parent;
    }
    out.reverse();
    out
}

/// Depth-first search over all schedules. Returns `None` once more than
/// `state_bound` distinct states have been seen. A step that fails at
/// runtime counts as not enabled.
pub fn explore(engine: &Engine, state_bound: usize, max_depth: usize) -> Result<Option<Explored>, EngineError> {
    let mut boot = engine.boot();
    boot.normalize();
    let mut seen = HashSet::new();
    let mut trail: Vec<(usize, Option<StepChoice>)> = vec![(0, None)];
    let mut out = Explored::default();
    seen.insert(fingerprint(&boot, &ObsMap::new()));
    let mut stack = vec![Node {
        config: boot,
        names: Lineage::new(),
        obs: ObsMap::new(),
        depth: 0,
        at: 0,
    }];
    while let Some(n) = stack.pop() {
        let mut succ = Vec::new();
        for ch in engine.enabled_steps(&n.config) {
            let mut c = n.config.clone();
            if let Ok(events) = engine.apply(&mut c, &ch, n.depth) {
                succ.push((ch, c, events));
            }
        }
        if succ.is_empty() {
            out.complete.entry(n.obs).or_insert_with(|| path(&trail, n.at));
            continue;
        }
        if n.depth >= max_depth {
            out.truncated.entry(n.obs).or_insert_with(|| path(&trail, n.at));
            continue;
        }
        for (ch, c, events) in succ {
            let mut names = n.names.clone();
            names.learn(&events);
            let mut obs = n.obs.clone();
            record(&events, &c, &names, &mut obs);
            if !seen.insert(fingerprint(&c, &obs)) {
                continue;
            }
            if seen.len() > state_bound {
                return Ok(None);
            }
            trail.push((n.at, Some(ch)));
            stack.push(Node {
                config: c,
                names,
                obs,
                depth: n.depth + 1,
                at: trail.len() - 1,
            });
        }
    }
    out.states = seen.len();
    Ok(Some(out))
}

/// Looks for an observation map of `a` that `b` cannot match.
fn unmatched(a: &Explored, b: &Explored) -> Option<(ObsMap, Vec<StepChoice>)> {
    for (m, sched) in &a.complete {
        if !b.complete.contains_key(m) && !b.truncated.keys().any(|t| prefix_compatible(m, t)) {
            return Some((m.clone(), sched.clone()));
        }
    }
    for (m, sched) in &a.truncated {
        if !b
            .complete
            .keys()
            .chain(b.truncated.keys())
            .any(|t| prefix_compatible(m, t))
        {
            return Some((m.clone(), sched.clone()));
        }
    }
    None
}

/// Compares the sets of low observations reachable by any schedule of
/// either run. Runs that exceed `state_bound` give `Unknown`.
pub fn ni_check_exhaustive(
    engines: [&Engine; 2],
    state_bound: usize,
    max_depth: usize,
) -> Result<NiVerdict, EngineError> {
    let Some(x) = explore(engines[0], state_bound, max_depth)? else {
        return Ok(NiVerdict::unknown(format!("first run exceeds {state_bound} states")));
    };
    let Some(y) = explore(engines[1], state_bound, max_depth)? else {
        return Ok(NiVerdict::unknown(format!("second run exceeds {state_bound} states")));
    };
    let closest = |m: &ObsMap, other: &Explored| {
        other
            .complete
            .iter()
            .chain(other.truncated.iter())
            .max_by_key(|(t, _)| {
                m.iter()
                    .map(|(k, v)| {
                        t.get(k)
                            .map_or(0, |w| v.iter().zip(w).take_while(|(p, q)| p == q).count())
                    })
                    .sum::<usize>()
            })
            .map(|(t, s)| (t.clone(), s.clone()))
    };
    for (flip, (a, b)) in [(false, (&x, &y)), (true, (&y, &x))] {
        if let Some((m, sched)) = unmatched(a, b) {
            let (other, other_sched) = closest(&m, b).unwrap_or_default();
            let (o, i, l, r) =
                first_difference(&m, &other).unwrap_or((crate::value::ObjectId::new("?"), 0, None, None));
            let show = |x: Option<super::Observation>| x.map_or("nothing".to_string(), |x| x.to_string());
            let run = if flip { "second" } else { "first" };
            let reason = format!(
                "{run} run reaches observations the other cannot; #{} at {o} differs",
                i + 1
            );
            let (run1, run2) = if flip {
                (other_sched, sched)
            } else {
                (sched, other_sched)
            };
            let (first, second) = if flip { (show(r), show(l)) } else { (show(l), show(r)) };
            let w = NiWitness {
                reason: reason.clone(),
                object: Some(o),
                first: Some(first),
                second: Some(second),
                schedule: Vec::new(),
                run1,
                run2,
            };
            return Ok(NiVerdict::fail(reason, w));
        }
    }
    Ok(NiVerdict::pass(format!(
        "{} reachable observation sets agree ({} and {} states)",
        x.complete.len() + x.truncated.len(),
        x.states,
        y.states
    )))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::Faults;
    use crate::lang::load_program;
    use crate::ni::{engine_pair, HighInputSpec, NiResult};

    const SENDER: &str = "
        interface O { Void out(Int_H x); } interface S { Void go(); }
        class Obs implements O { Int_H last; Void out(Int_H x) { last := x } }
        class Snd(O obs) implements S { Int_H secret; !this.go(); Void go() { !obs.out(secret) } }
        main { O o = new Obs(); S s = new Snd(o); }";

    fn pair(faults: Faults) -> [Engine; 2] {
        let p = Arc::new(load_program(SENDER).unwrap());
        let s = HighInputSpec::from_json(r#"{"program": "-", "high": [{"Snd#1.secret": 1}, {"Snd#1.secret": 2}]}"#)
            .unwrap();
        s.validate(&p).unwrap();
        engine_pair(&p, &s, faults)
    }

    #[test]
    fn filtered_sender_passes() {
        let [a, b] = pair(Faults::default());
        let v = ni_check_exhaustive([&a, &b], 100_000, 1000).unwrap();
        assert_eq!(v.result, NiResult::Pass, "{v:?}");
    }

    #[test]
    fn unfiltered_sender_fails() {
        let [a, b] = pair(Faults {
            disable_w_invc: true,
            ..Faults::default()
        });
        let v = ni_check_exhaustive([&a, &b], 100_000, 1000).unwrap();
        assert_eq!(v.result, NiResult::Fail);
        let w = v.witness.unwrap();
        let t = a.replay(w.run1.clone(), 1000).unwrap();
        assert_eq!(t.choices(), w.run1);
    }

    #[test]
    fn tiny_bound_is_unknown() {
        let [a, b] = pair(Faults::default());
        assert_eq!(
            ni_check_exhaustive([&a, &b], 3, 1000).unwrap().result,
            NiResult::Unknown
        );
    }

    #[test]
    fn fingerprint_ignores_component_order() {
        let [a, _] = pair(Faults::default());
        let t = a.run_seeded(3, 12).unwrap();
        let mut c = t.final_config.clone();
        c.components.reverse();
        for comp in c.components.iter_mut() {
            if let Component::Queue(q) = comp {
                q.msgs.reverse();
            }
        }
        assert_eq!(
            fingerprint(&c, &ObsMap::new()),
            fingerprint(&t.final_config, &ObsMap::new())
        );
    }

    #[test]
    fn deterministic_program_has_one_outcome() {
        let e = Engine::new(Arc::new(load_program("main { Int x; x := 1 }").unwrap()));
        let x = explore(&e, 1000, 100).unwrap().unwrap();
        assert_eq!(x.complete.len(), 1);
        assert!(x.truncated.is_empty());
    }
}
