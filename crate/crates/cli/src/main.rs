use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wrapsec::analysis::render_report;
use wrapsec::engine::{read_trace_choices, Engine, Faults, Scheduler, Termination};
use wrapsec::lang::{load_program, parse_program, pretty_program, ResolvedProgram};
use wrapsec::ni::{
    engine_pair, explore, ni_check_exhaustive, ni_check_lockstep, HighInputSpec, NiResult, NiVerdict, NiWitness,
};

/// Stdout writes that ignore a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const OK: u8 = 0;
const RUNTIME_ERROR: u8 = 1;
const FRONTEND_ERROR: u8 = 2;
const DEADLOCK: u8 = 3;
const STEP_BOUND: u8 = 4;
const VIOLATION: u8 = 5;
const NI_FAIL: u8 = 6;
const NI_UNKNOWN: u8 = 7;

/// Interpreter, level analyzer and non-interference checker for `.sob`
/// programs.
///
/// Exit codes: 0 ok, 1 runtime error, 2 input error, 3 deadlock, 4 step
/// bound, 5 monitor violation, 6 non-interference failure, 7 unknown.
#[derive(Parser, Debug)]
#[command(name = "wrapsec", version)]
struct Cli {
    /// Allow the fault flags below.
    #[arg(long, global = true)]
    test_mode: bool,
    /// Skip raising the untaken branch at a high join point.
    #[arg(long, global = true)]
    disable_update_h: bool,
    /// Let wrapped objects send high messages to low destinations.
    #[arg(long, global = true)]
    disable_w_invc: bool,
    /// Store high results in futures without wrapping them.
    #[arg(long, global = true)]
    disable_w_fut: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse and print the program back in normal form.
    Parse { source: PathBuf },
    /// Classify every class as safe or unsafe.
    Analyze {
        source: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Execute the program under a seeded scheduler or a recorded trace.
    Run {
        source: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write the trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Re-execute the choices of a trace file instead of scheduling.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Enumerate every interleaving up to a bound.
    Explore {
        source: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        state_bound: usize,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Check non-interference for the inputs in a spec file.
    NiCheck(NiArgs),
}

#[derive(Args, Debug)]
struct NiArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 100_000)]
    state_bound: usize,
    /// Directory for the witness and the two single-run traces on failure.
    #[arg(long)]
    witness_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Lockstep,
    Exhaustive,
    Both,
}

struct Failure(u8, String);

type Outcome = Result<u8, Failure>;

fn frontend(msg: impl std::fmt::Display) -> Failure {
    Failure(FRONTEND_ERROR, msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> Failure {
    Failure(RUNTIME_ERROR, msg.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| frontend(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Arc<ResolvedProgram>, Failure> {
    let src = read(path)?;
    load_program(&src)
        .map(Arc::new)
        .map_err(|e| frontend(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn json_line(v: &impl serde::Serialize) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn cmd_parse(source: &Path) -> Outcome {
    let src = read(source)?;
    let p = parse_program(&src).map_err(|e| frontend(format!("{}: syntax error at {e}", source.display())))?;
    out_raw!("{}", pretty_program(&p));
    Ok(OK)
}

fn cmd_analyze(source: &Path, format: Format) -> Outcome {
    let e = Engine::new(load(source)?);
    match format {
        Format::Text => out_raw!("{}", render_report(&e.report)),
        Format::Json => {
            for v in e.report.values() {
                out!("{}", json_line(v));
            }
        }
    }
    Ok(OK)
}

fn cmd_run(
    source: &Path,
    faults: Faults,
    seed: u64,
    max_steps: usize,
    trace: Option<&Path>,
    replay: Option<&Path>,
) -> Outcome {
    let e = Engine::new(load(source)?).with_faults(faults);
    let mut sched = match replay {
        Some(path) => Scheduler::scripted(read_trace_choices(&read(path)?).map_err(frontend)?),
        None => Scheduler::seeded(seed),
    };
    let t = e.run(e.boot(), &mut sched, max_steps).map_err(runtime)?;
    if let Some(path) = trace {
        write(path, &t.to_json_lines())?;
    }
    let termination = json_line(&t.termination);
    out!(
        "termination: {} after {} steps",
        termination.trim_matches('"'),
        t.steps.len()
    );
    for v in &t.violations {
        out!("violation: {}", json_line(v));
    }
    Ok(if !t.violations.is_empty() {
        VIOLATION
    } else {
        match t.termination {
            Termination::Quiescent => OK,
            Termination::Deadlock => DEADLOCK,
            Termination::StepBound => STEP_BOUND,
        }
    })
}

fn cmd_explore(source: &Path, faults: Faults, state_bound: usize, max_steps: usize) -> Outcome {
    let e = Engine::new(load(source)?).with_faults(faults);
    match explore(&e, state_bound, max_steps).map_err(runtime)? {
        None => {
            out!("unknown: more than {state_bound} states");
            Ok(NI_UNKNOWN)
        }
        Some(x) => {
            out!(
                "states: {}, complete observation sets: {}, truncated: {}",
                x.states,
                x.complete.len(),
                x.truncated.len()
            );
            Ok(OK)
        }
    }
}

fn report(mode: &str, v: &NiVerdict) {
    let result = json_line(&v.result);
    out!(
        "{}",
        serde_json::json!({ "mode": mode, "result": result.trim_matches('"'), "detail": v.detail })
    );
}

fn save_witness(dir: Option<&Path>, w: &NiWitness, engines: &[Engine; 2], max_steps: usize) -> Result<(), Failure> {
    let Some(dir) = dir else {
        out!("{}", serde_json::json!({ "witness": w }));
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    write(
        &dir.join("witness.json"),
        &(serde_json::to_string_pretty(w).expect("serializable") + "\n"),
    )?;
    for (name, run, e) in [("run1", &w.run1, &engines[0]), ("run2", &w.run2, &engines[1])] {
        let t = e.replay(run.clone(), max_steps.max(run.len())).map_err(runtime)?;
        write(&dir.join(format!("{name}.trace.jsonl")), &t.to_json_lines())?;
    }
    out!("witness: {}", dir.join("witness.json").display());
    Ok(())
}

fn cmd_ni_check(a: &NiArgs, faults: Faults) -> Outcome {
    let spec = HighInputSpec::from_json(&read(&a.spec)?).map_err(|e| frontend(format!("{}: {e}", a.spec.display())))?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let p = load(&base.join(&spec.program))?;
    spec.validate(&p)
        .map_err(|e| frontend(format!("{}: {e}", a.spec.display())))?;
    let engines = engine_pair(&p, &spec, faults);
    let [e1, e2] = &engines;

    if a.mode != Mode::Exhaustive {
        let v = ni_check_lockstep([e1, e2], &mut Scheduler::seeded(a.seed), a.max_steps).map_err(runtime)?;
        report("lockstep", &v);
        if let Some(w) = &v.witness {
            save_witness(a.witness_dir.as_deref(), w, &engines, a.max_steps)?;
            return Ok(NI_FAIL);
        }
    }
    if a.mode != Mode::Lockstep {
        let v = ni_check_exhaustive([e1, e2], a.state_bound, a.max_steps).map_err(runtime)?;
        report("exhaustive", &v);
        match v.result {
            NiResult::Pass => {}
            NiResult::Fail => {
                save_witness(
                    a.witness_dir.as_deref(),
                    v.witness.as_ref().expect("failure has a witness"),
                    &engines,
                    a.max_steps,
                )?;
                return Ok(NI_FAIL);
            }
            NiResult::Unknown if a.mode == Mode::Exhaustive => return Ok(NI_UNKNOWN),
            NiResult::Unknown => out!("note: exhaustive search skipped, state bound exceeded"),
        }
    }
    Ok(OK)
}

fn dispatch(cli: &Cli) -> Outcome {
    let faults = Faults {
        disable_update_h: cli.disable_update_h,
        disable_w_invc: cli.disable_w_invc,
        disable_w_fut: cli.disable_w_fut,
    };
    if faults.any() && !cli.test_mode {
        return Err(frontend("fault flags require --test-mode"));
    }
    match &cli.cmd {
        Cmd::Parse { source } => cmd_parse(source),
        Cmd::Analyze { source, format } => cmd_analyze(source, *format),
        Cmd::Run {
            source,
            seed,
            max_steps,
            trace,
            replay,
        } => cmd_run(source, faults, *seed, *max_steps, trace.as_deref(), replay.as_deref()),
        Cmd::Explore {
            source,
            state_bound,
            max_steps,
        } => cmd_explore(source, faults, *state_bound, *max_steps),
        Cmd::NiCheck(a) => cmd_ni_check(a, faults),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
