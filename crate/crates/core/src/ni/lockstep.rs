//! Paired runs driven by one schedule.

use super::equiv::{first_difference, prefix_compatible, record, Lineage, ObsMap};
use super::{NiVerdict, NiWitness, PairedStep};
use crate::config::Configuration;
use crate::engine::{Engine, EngineError, Scheduler, StepChoice};

type Key = (crate::engine::Rule, Option<String>, Option<String>);

fn key(names: &Lineage, ch: &StepChoice) -> Key {
    (
        ch.rule,
        ch.object.as_ref().map(|o| names.name_object(o).0),
        ch.future.as_ref().map(|f| names.name_future(f).0),
    )
}

struct Run<'a> {
    engine: &'a Engine,
    config: Configuration,
    names: Lineage,
    obs: ObsMap,
}

impl Run<'_> {
    fn step(&mut self, ch: &StepChoice, step: usize) -> Result<(), EngineError> {
        let events = self.engine.apply(&mut self.config, ch, step)?;
        self.names.learn(&events);
        record(&events, &self.config, &self.names, &mut self.obs);
        Ok(())
    }
}

/// The candidates at one point: unpaired choices of either run first,
/// then the pairs.
fn candidates(runs: &[Run; 2]) -> Vec<PairedStep> {
    let e0 = runs[0].engine.enabled_steps(&runs[0].config);
    let mut e1 = runs[1].engine.enabled_steps(&runs[1].config);
    let mut unpaired = Vec::new();
    let mut paired = Vec::new();
    for ch in e0 {
        let k = key(&runs[0].names, &ch);
        match e1.iter().position(|x| key(&runs[1].names, x) == k) {
            Some(i) => paired.push(PairedStep::Both {
                first: ch,
                second: e1.remove(i),
            }),
            None => unpaired.push(PairedStep::First { choice: ch }),
        }
    }
    unpaired.extend(e1.into_iter().map(|choice| PairedStep::Second { choice }));
    unpaired.extend(paired);
    unpaired
}

fn unpaired_count(cs: &[PairedStep]) -> usize {
    cs.iter().take_while(|c| !matches!(c, PairedStep::Both { .. })).count()
}

/// Low state of the stepped object in both runs, when both are in low
/// context. Stacks must agree whenever the pending statements do.
fn check_state(runs: &[Run; 2], first: &StepChoice, second: &StepChoice) -> Option<(String, String, String)> {
    let (Some(a), Some(b)) = (&first.object, &second.object) else {
        return None;
    };
    let (Some(o1), Some(o2)) = (runs[0].config.object(a), runs[1].config.object(b)) else {
        return None;
    };
    if o1.stmts == o2.stmts && o1.pcs.as_ref().map(|p| p.depth()) != o2.pcs.as_ref().map(|p| p.depth()) {
        return Some((
            "program-context stacks differ".to_string(),
            format!("{:?}", o1.pcs),
            format!("{:?}", o2.pcs),
        ));
    }
    if o1.pc().is_high() || o2.pc().is_high() {
        return None;
    }
    let s1 = runs[0].names.low_state(&o1.attrs, &o1.locals);
    let s2 = runs[1].names.low_state(&o2.attrs, &o2.locals);
    (s1 != s2).then(|| {
        (
            "low-inequivalent states".to_string(),
            format!("{s1:?}"),
            format!("{s2:?}"),
        )
    })
}

enum Driver<'s> {
    Sched(&'s mut Scheduler),
    Script(std::slice::Iter<'s, PairedStep>),
}

impl Driver<'_> {
    fn pick(&mut self, cs: &[PairedStep]) -> Result<Option<usize>, EngineError> {
        match self {
            Driver::Sched(s) => {
                let u = unpaired_count(cs);
                let pool = if u > 0 { u } else { cs.len() };
                Ok(s.pick_index(pool))
            }
            Driver::Script(it) => match it.next() {
                None => Ok(None),
                Some(want) => cs
                    .iter()
                    .position(|c| c == want)
                    .map(Some)
                    .ok_or_else(|| EngineError::InvalidChoice(format!("{want:?} is not enabled"))),
            },
        }
    }
}

fn drive(engines: [&Engine; 2], mut driver: Driver<'_>, max_steps: usize) -> Result<NiVerdict, EngineError> {
    let mut runs = engines.map(|e| {
        let mut config = e.boot();
        config.normalize();
        Run {
            engine: e,
            config,
            names: Lineage::new(),
            obs: ObsMap::new(),
        }
    });
    let mut schedule = Vec::new();
    let mut bounded = false;
    loop {
        let cs = candidates(&runs);
        if cs.is_empty() {
            break;
        }
        if schedule.len() >= max_steps {
            bounded = true;
            break;
        }
        let Some(i) = driver.pick(&cs)? else {
            bounded = true;
            break;
        };
        let step = schedule.len();
        let chosen = cs[i].clone();
        match &chosen {
            PairedStep::Both { first, second } => {
                runs[0].step(first, step)?;
                runs[1].step(second, step)?;
            }
            PairedStep::First { choice } => runs[0].step(choice, step)?,
            PairedStep::Second { choice } => runs[1].step(choice, step)?,
        }
        schedule.push(chosen.clone());
        if let PairedStep::Both { first, second } = &chosen {
            if let Some((why, l, r)) = check_state(&runs, first, second) {
                let mut w = NiWitness::from_schedule(format!("{why} after step {step}"), schedule);
                w.object = Some(runs[0].names.name_object(first.object.as_ref().unwrap()));
                w.first = Some(l);
                w.second = Some(r);
                let mut v = NiVerdict::fail(w.reason.clone(), w);
                v.observations = Some([runs[0].obs.clone(), runs[1].obs.clone()]);
                return Ok(v);
            }
        }
    }
    let [r0, r1] = runs;
    let obs = [r0.obs, r1.obs];
    let differ = if bounded {
        (!prefix_compatible(&obs[0], &obs[1]))
            .then(|| first_difference(&obs[0], &obs[1]))
            .flatten()
    } else {
        first_difference(&obs[0], &obs[1])
    };
    let mut v = match differ {
        None => NiVerdict::pass(if bounded {
            format!("low observations agree over {} bounded steps", schedule.len())
        } else {
            format!("low observations agree after {} steps", schedule.len())
        }),
        Some((o, i, a, b)) => {
            let show = |x: Option<super::Observation>| x.map_or("nothing".to_string(), |x| x.to_string());
            let reason = format!("observation #{} at {o} differs", i + 1);
            let mut w = NiWitness::from_schedule(reason.clone(), schedule);
            w.object = Some(o);
            w.first = Some(show(a));
            w.second = Some(show(b));
            NiVerdict::fail(reason, w)
        }
    };
    v.observations = Some(obs);
    Ok(v)
}

/// Runs both engines together under `sched`. Choices that pair up across
/// the runs step both; the rest step one run alone.
pub fn ni_check_lockstep(
    engines: [&Engine; 2],
    sched: &mut Scheduler,
    max_steps: usize,
) -> Result<NiVerdict, EngineError> {
    drive(engines, Driver::Sched(sched), max_steps)
}

/// Re-executes a witness's interleaving and recomputes the verdict.
pub fn replay_witness(engines: [&Engine; 2], w: &NiWitness) -> Result<NiVerdict, EngineError> {
    drive(engines, Driver::Script(w.schedule.iter()), w.schedule.len())
}
