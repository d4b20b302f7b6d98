//! `tpsynth`: validate service specifications, synthesize protocol entities,
//! and check the result by simulation and bounded exploration.
//!
//! Exit codes: 0 success, 1 violations or counterexample found, 2 usage,
//! I/O or parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tpsynth::io::{emit_dot, parse_entity_spec, parse_service_spec_with_map, AnyMachine, Diagnostic};
use tpsynth::model::{EntitySpec, ServiceSpec};
use tpsynth::pipeline::{synthesize, PipelineError};
use tpsynth::simulator::{
    check_conformance, explore, simulate, DelayMode, ExploreConfig, SimConfig, TimedTrace, WaitingMode,
};
use tpsynth::validator::{timing_checks, validate};

#[derive(Parser)]
#[command(
    name = "tpsynth",
    version,
    about = "Timed protocol synthesis from service specifications"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check structure and timing of a service specification.
    Validate {
        spec: PathBuf,
        /// Also print every evaluated timing inequality.
        #[arg(long)]
        checks: bool,
    },
    /// Write one `<sap>.pe` per SAP plus `pipeline.log`.
    Synthesize {
        spec: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Simulate the entities over delayed channels and check timing.
    Simulate {
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, env = "TPSYNTH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Random)]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Use the `*.pe` files in this directory instead of synthesizing.
        #[arg(long)]
        entities: Option<PathBuf>,
        /// Print every trace before the report.
        #[arg(long)]
        trace: bool,
    },
    /// Compare the composed entities with the service up to a depth.
    CheckEq {
        spec: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long)]
        entities: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        state_cap: usize,
    },
    /// Print a service or entity file as Graphviz.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Uniform delays and waiting times.
    Random,
    /// Minimum delays and minimum waiting times.
    Min,
    /// Maximum delays and maximum waiting times.
    Max,
    /// Each channel pinned to one extreme per run; uniform waiting times.
    Extremes,
    /// Cycle runs through every delay/waiting combination.
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn violation(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn render_diagnostics(path: &Path, diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("{}: {d}", path.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn load_spec(path: &Path) -> Result<ServiceSpec, Failure> {
    let text = read(path)?;
    parse_service_spec_with_map(&text)
        .map(|p| p.spec)
        .map_err(|d| usage(render_diagnostics(path, &d)))
}

fn load_entities(spec: &ServiceSpec, dir: Option<&Path>) -> Result<Vec<EntitySpec>, Failure> {
    let Some(dir) = dir else {
        return synthesize(spec).map(|s| s.entities).map_err(pipeline_failure);
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pe"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = read(&p)?;
        out.push(parse_entity_spec(&text).map_err(|d| usage(render_diagnostics(&p, &d)))?);
    }
    if out.is_empty() {
        return Err(usage(format!("{}: no .pe files", dir.display())));
    }
    Ok(out)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    violation(e.to_string())
}

fn cmd_validate(path: &Path, checks: bool) -> Result<(), Failure> {
    let spec = load_spec(path)?;
    let report = validate(&spec);
    if checks {
        for c in timing_checks(&spec) {
            let status = if c.holds() { "ok" } else { "fail" };
            println!(
                "{status} {} transition={} detail=\"{}\"",
                c.rule, c.transition, c.detail
            );
        }
    }
    for line in report.lines() {
        println!("{line}");
    }
    if report.has_errors() {
        return Err(violation(format!("{}: invalid", path.display())));
    }
    println!("{}: valid", path.display());
    Ok(())
}

fn cmd_synthesize(path: &Path, out: &Path) -> Result<(), Failure> {
    let spec = load_spec(path)?;
    let synthesis = synthesize(&spec).map_err(pipeline_failure)?;
    for w in &synthesis.warnings {
        eprintln!("{}: {w}", path.display());
    }
    fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    for (name, content) in synthesis.outputs() {
        let target = out.join(&name);
        fs::write(&target, content).map_err(|e| usage(format!("{}: {e}", target.display())))?;
        println!("wrote {}", target.display());
    }
    Ok(())
}

fn modes(mode: Mode) -> Vec<(DelayMode, WaitingMode)> {
    match mode {
        Mode::Random => vec![(DelayMode::UniformRandom, WaitingMode::UniformRandom)],
        Mode::Min => vec![(DelayMode::AllMin, WaitingMode::AlwaysMin)],
        Mode::Max => vec![(DelayMode::AllMax, WaitingMode::AlwaysMax)],
        Mode::Extremes => vec![(DelayMode::PerChannelExtremes, WaitingMode::UniformRandom)],
        Mode::All => DelayMode::ALL
            .iter()
            .flat_map(|&d| WaitingMode::ALL.iter().map(move |&w| (d, w)))
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    runs: usize,
    seed: u64,
    mode: Mode,
    max_steps: usize,
    entities: Option<&Path>,
    trace: bool,
) -> Result<(), Failure> {
    if runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if max_steps == 0 {
        return Err(usage("--max-steps must be at least 1"));
    }
    let spec = load_spec(path)?;
    let pes = load_entities(&spec, entities)?;
    let combos = modes(mode);
    let mut traces: Vec<TimedTrace> = Vec::new();
    // Runs are spread over the selected mode combinations; run numbers and
    // seeds stay global so every run is reproducible on its own.
    for (k, &(delay_mode, waiting_mode)) in combos.iter().enumerate() {
        let share = runs / combos.len() + usize::from(k < runs % combos.len());
        if share == 0 {
            continue;
        }
        let cfg = SimConfig {
            runs: share,
            seed: seed.wrapping_add(traces.len() as u64),
            max_steps,
            delay_mode,
            waiting_mode,
        };
        let first = traces.len();
        let batch = simulate(&pes, &spec.delays, &cfg).map_err(|e| usage(e.to_string()))?;
        traces.extend(batch.into_iter().enumerate().map(|(i, mut t)| {
            t.run = first + i;
            t
        }));
    }
    if trace {
        for t in &traces {
            print!("{}", t.dump());
        }
    }
    let report = check_conformance(&spec, &traces).map_err(|e| usage(e.to_string()))?;
    for line in report.lines() {
        println!("{line}");
    }
    if !report.is_empty() {
        return Err(violation(format!(
            "{} runs: conformance violations found",
            traces.len()
        )));
    }
    println!("{} runs: no violations", traces.len());
    Ok(())
}

fn cmd_check_eq(path: &Path, depth: usize, entities: Option<&Path>, state_cap: usize) -> Result<(), Failure> {
    if depth == 0 {
        return Err(usage("--depth must be at least 1"));
    }
    let spec = load_spec(path)?;
    let pes = load_entities(&spec, entities)?;
    let ex = explore(&spec, &pes, &ExploreConfig { depth, state_cap }).map_err(|e| violation(e.to_string()))?;
    let mut failed = false;
    if let Some(c) = &ex.counterexample {
        println!("counterexample: {c}");
        failed = true;
    }
    for d in &ex.deadlocks {
        println!("deadlock: {d}");
        failed = true;
    }
    if failed {
        return Err(violation(format!("not equivalent up to depth {depth}")));
    }
    println!("equivalent up to depth {depth} ({} global states)", ex.states_explored);
    Ok(())
}

fn cmd_render(path: &Path, _format: Format) -> Result<(), Failure> {
    let text = read(path)?;
    let first = text
        .lines()
        .map(|l| l.trim())
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let dot = if first.starts_with("entity") {
        let pe = parse_entity_spec(&text).map_err(|d| usage(render_diagnostics(path, &d)))?;
        emit_dot(AnyMachine::Entity(&pe))
    } else {
        let spec = parse_service_spec_with_map(&text)
            .map_err(|d| usage(render_diagnostics(path, &d)))?
            .spec;
        emit_dot(AnyMachine::Service(&spec))
    };
    print!("{dot}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { spec, checks } => cmd_validate(spec, *checks),
        Command::Synthesize { spec, out } => cmd_synthesize(spec, out),
        Command::Simulate {
            spec,
            runs,
            seed,
            mode,
            max_steps,
            entities,
            trace,
        } => cmd_simulate(spec, *runs, *seed, *mode, *max_steps, entities.as_deref(), *trace),
        Command::CheckEq {
            spec,
            depth,
            entities,
            state_cap,
        } => cmd_check_eq(spec, *depth, entities.as_deref(), *state_cap),
        Command::Render { file, format } => cmd_render(file, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
