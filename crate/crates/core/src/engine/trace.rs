//! Runs, traces and their line-per-record serialization.

use serde::{Deserialize, Serialize};

use super::{Engine, EngineError, Event, Monitor, Scheduler, StepChoice, Violation};
use crate::config::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Nothing enabled, every object idle.
    Quiescent,
    /// Nothing enabled, some object blocked.
    Deadlock,
    StepBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub choice: StepChoice,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: Configuration,
    pub steps: Vec<TraceStep>,
    pub final_config: Configuration,
    pub termination: Termination,
    pub violations: Vec<Violation>,
}

impl Trace {
    pub fn choices(&self) -> Vec<StepChoice> {
        self.steps.iter().map(|s| s.choice.clone()).collect()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.steps.iter().flat_map(|s| s.events.iter())
    }

    /// Events with tag `L` that are outputs, in order.
    pub fn low_outputs(&self) -> Vec<Event> {
        self.events().filter(|e| e.is_low_output()).cloned().collect()
    }

    /// JSON lines: one record per step, then the termination, then one
    /// record per final component.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let rec = serde_json::json!({
                "step": s.step,
                "rule": s.choice.rule,
                "redex": { "object": s.choice.object, "future": s.choice.future },
                "events": s.events,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "termination": self.termination, "steps": self.steps.len() }).to_string());
        out.push('\n');
        for r in self.final_config.dump_records() {
            out.push_str(&serde_json::json!({ "final": r }).to_string());
            out.push('\n');
        }
        for v in &self.violations {
            out.push_str(&serde_json::json!({ "violation": v }).to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceFormatError {
    pub line: usize,
    pub message: String,
}

/// Recovers the choice sequence from a trace written by [`Trace::to_json_lines`].
pub fn read_trace_choices(text: &str) -> Result<Vec<StepChoice>, TraceFormatError> {
    #[derive(Deserialize)]
    struct Redex {
        object: Option<crate::value::ObjectId>,
        future: Option<crate::value::FutureId>,
    }
    #[derive(Deserialize)]
    struct StepRec {
        rule: super::Rule,
        redex: Redex,
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| TraceFormatError {
            line: i + 1,
            message: e.to_string(),
        })?;
        if v.get("step").is_none() || v.get("rule").is_none() {
            continue;
        }
        let rec: StepRec = serde_json::from_value(v).map_err(|e| TraceFormatError {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(StepChoice::new(rec.rule, rec.redex.object, rec.redex.future));
    }
    Ok(out)
}

impl Engine {
    /// Drives `c0` with `sched` until nothing is enabled, the script ends, or
    /// `max_steps` steps have been taken.
    pub fn run(&self, c0: Configuration, sched: &mut Scheduler, max_steps: usize) -> Result<Trace, EngineError> {
        let mut c = c0.clone();
        c.normalize();
        let mut monitor = Monitor::new(self, &c);
        let mut steps = Vec::new();
        let mut violations = Vec::new();
        let termination = loop {
            let enabled = self.enabled_steps(&c);
            if enabled.is_empty() {
                break if c.objects().all(|o| o.is_idle()) {
                    Termination::Quiescent
                } else {
                    Termination::Deadlock
                };
            }
            if steps.len() >= max_steps {
                break Termination::StepBound;
            }
            let Some(choice) = sched.pick(&enabled) else {
                break Termination::StepBound;
            };
            if !enabled.contains(&choice) {
                return Err(EngineError::InvalidChoice(format!(
                    "{choice} is not enabled at step {}",
                    steps.len()
                )));
            }
            let step = steps.len();
            let events = self.apply(&mut c, &choice, step)?;
            violations.extend(monitor.observe(step, &events, &c));
            steps.push(TraceStep { step, choice, events });
        };
        c.canonicalize();
        Ok(Trace {
            initial: c0,
            steps,
            final_config: c,
            termination,
            violations,
        })
    }

    /// Boots and runs with a seeded random scheduler.
    pub fn run_seeded(&self, seed: u64, max_steps: usize) -> Result<Trace, EngineError> {
        self.run(self.boot(), &mut Scheduler::seeded(seed), max_steps)
    }

    /// Re-executes a recorded choice sequence from boot.
    pub fn replay(&self, choices: Vec<StepChoice>, max_steps: usize) -> Result<Trace, EngineError> {
        self.run(self.boot(), &mut Scheduler::scripted(choices), max_steps)
    }
}
