//! Command-line entry point.
//!
//! Exit codes: 0 clean, 1 violations, model errors or FAILED obligations,
//! 2 usage or model-file errors, 3 a limit was hit (or an obligation is
//! UNKNOWN) with nothing failing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ogwb_core::echronos::SystemConfig;
use ogwb_core::explorer::{explore, export_dot, random_walk, replay, ExploreOptions, Invariant, Limits, Program};
use ogwb_core::kernel::render::render_system;
use ogwb_core::vcgen::{run_pipeline, PipelineOptions};

use crate::model::{parse_model_with, Model};
use crate::report::{format_check_report, format_vc_report};
use crate::trace_io::{parse_trace, serialize_trace};

/// Selects the exploration worker count; results do not depend on it.
pub const WORKERS_ENV: &str = "OGWB_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ogwb", version, about = "Model checker and VC generator for interruptible OS models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file (.og).
    model: PathBuf,
    #[arg(long, value_parser = ["arm", "generic"])]
    variant: Option<String>,
    #[arg(long, value_parser = ["add-one", "any-superset"])]
    events_mode: Option<String>,
    #[arg(long, value_parser = ["clear", "literal"])]
    syscall_wait: Option<String>,
    /// 0 terse, 1 changed variables per step, 2 full states.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    verbosity: u8,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LimitArgs {
    #[arg(long)]
    max_states: Option<u64>,
    #[arg(long)]
    max_depth: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Explore every reachable state and check invariants.
    Check {
        #[command(flatten)]
        m: ModelArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// Check only these invariants (repeatable); default all.
        #[arg(long = "invariant")]
        invariants: Vec<String>,
    },
    /// Generate, simplify and discharge verification conditions.
    Vcs {
        #[command(flatten)]
        m: ModelArgs,
    },
    /// Seeded random walk, written as a trace.
    Simulate {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Export the reachable state graph as DOT.
    Graph {
        #[command(flatten)]
        m: ModelArgs,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Check that a trace replays against a model.
    Replay {
        #[command(flatten)]
        m: ModelArgs,
        trace: PathBuf,
    },
    /// Print a model file for the built-in OS preset.
    Preset {
        #[arg(long, default_value_t = 2)]
        users: u32,
        #[arg(long, default_value_t = 1)]
        interrupts: u32,
        #[arg(long, default_value_t = 1)]
        events: u32,
        /// Spell out every task instead of referring to the preset.
        #[arg(long)]
        expand: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure(i32, String);

type CmdResult = Result<i32, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

/// Runs the CLI with `args` (program name first), writing normal output to
/// `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.cmd, stdout) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

fn load(m: &ModelArgs) -> Result<Model, Failure> {
    let text = fs::read_to_string(&m.model).map_err(|e| usage(format!("{}: {e}", m.model.display())))?;
    let mut overrides = Vec::new();
    for (key, v) in [("variant", &m.variant), ("events_mode", &m.events_mode), ("syscall_wait", &m.syscall_wait)] {
        if let Some(v) = v {
            overrides.push((key.to_string(), v.clone()));
        }
    }
    parse_model_with(&text, &overrides).map_err(|e| usage(format!("{}:{e}", m.model.display())))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout.write_all(text.as_bytes()).map_err(|e| usage(format!("stdout: {e}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn options(model: &Model, l: &LimitArgs, retain_graph: bool) -> Result<ExploreOptions, Failure> {
    let cfg = &model.system.config;
    let mut opts = ExploreOptions::new(Limits {
        max_states: l.max_states.unwrap_or(cfg.state_limit),
        max_depth: l.max_depth.unwrap_or(cfg.depth_limit),
    });
    opts.retain_graph = retain_graph;
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        let n: usize = w
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| usage(format!("{WORKERS_ENV} must be a positive integer, got `{w}`")))?;
        opts.workers = Some(n);
    }
    Ok(opts)
}

fn dispatch(cmd: Cmd, stdout: &mut dyn Write) -> CmdResult {
    match cmd {
        Cmd::Check { m, limits, invariants } => {
            let model = load(&m)?;
            let mut chosen = Vec::new();
            if invariants.is_empty() {
                chosen.extend(model.invariants.iter().map(|(n, e)| Invariant::new(n.clone(), e.clone())));
            } else {
                for name in &invariants {
                    let (n, e) = model
                        .invariants
                        .iter()
                        .find(|(n, _)| n == name)
                        .ok_or_else(|| usage(format!("no invariant named `{name}`")))?;
                    chosen.push(Invariant::new(n.clone(), e.clone()));
                }
            }
            let opts = options(&model, &limits, false)?;
            let p = Program::new(model.system);
            let r = explore(&p, &chosen, opts);
            emit(&m.out, &format_check_report(&p, &chosen, &r, m.verbosity), stdout)?;
            if let Some(out) = &m.out {
                for v in &r.violations {
                    let path = PathBuf::from(format!("{}.{}.ogt", out.display(), v.invariant));
                    write_file(&path, &serialize_trace(&p, &v.trace, m.verbosity))?;
                }
            }
            Ok(if !r.violations.is_empty() || !r.model_errors.is_empty() {
                EXIT_FINDINGS
            } else if !r.terminated {
                EXIT_LIMIT
            } else {
                EXIT_OK
            })
        }
        Cmd::Vcs { m } => {
            let model = load(&m)?;
            let r = run_pipeline(&model.system, PipelineOptions::default())
                .map_err(|e| usage(format!("task `{}` point `{}` has no assertion", e.task, e.label)))?;
            emit(&m.out, &format_vc_report(&r, m.verbosity), stdout)?;
            let all = r.stats.all();
            Ok(if all.failed > 0 {
                EXIT_FINDINGS
            } else if all.unknown > 0 {
                EXIT_LIMIT
            } else {
                EXIT_OK
            })
        }
        Cmd::Simulate { m, seed, steps } => {
            let model = load(&m)?;
            let p = Program::new(model.system);
            let t = random_walk(&p, seed, steps);
            emit(&m.out, &serialize_trace(&p, &t, m.verbosity), stdout)?;
            Ok(EXIT_OK)
        }
        Cmd::Graph { m, limits } => {
            let model = load(&m)?;
            let opts = options(&model, &limits, true)?;
            let p = Program::new(model.system);
            let r = explore(&p, &[], opts);
            let dot = export_dot(&r, &p, m.verbosity).map_err(|e| usage(e.to_string()))?;
            emit(&m.out, &dot, stdout)?;
            Ok(if r.terminated { EXIT_OK } else { EXIT_LIMIT })
        }
        Cmd::Replay { m, trace } => {
            let model = load(&m)?;
            let text = fs::read_to_string(&trace).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
            let t = parse_trace(&text).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
            let p = Program::new(model.system);
            let msg = match replay(&p, &t) {
                Ok(states) => format!("replays: {} steps, {} states\n", t.len(), states.len()),
                Err(e) => {
                    emit(&m.out, &format!("does not replay: {e}\n"), stdout)?;
                    return Ok(EXIT_FINDINGS);
                }
            };
            emit(&m.out, &msg, stdout)?;
            Ok(EXIT_OK)
        }
        Cmd::Preset {
            users,
            interrupts,
            events,
            expand,
            out,
        } => {
            let text = preset_text(users, interrupts, events, expand).map_err(usage)?;
            emit(&out, &text, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// The preset as a model file: a short reference to the built-in preset, or
/// with `expand` every task spelled out.
pub fn preset_text(users: u32, interrupts: u32, events: u32, expand: bool) -> Result<String, String> {
    let cfg = SystemConfig::new(users, interrupts, events);
    cfg.validate().map_err(|e| e.to_string())?;
    let short = format!(
        "system \"echronos\" preset echronos\nconfig {{\n{}}}\n",
        cfg.entries().iter().map(|(k, v)| format!("  {k} = {v}\n")).collect::<String>()
    );
    if !expand {
        return Ok(short);
    }
    let model = crate::model::parse_model(&short).map_err(|e| e.to_string())?;
    let mut text = render_system(&model.system);
    for (name, e) in &model.invariants {
        text.push_str(&format!(
            "invariant {name}: {}\n",
            ogwb_core::kernel::render::expr_to_string(e, &model.system.layout)
        ));
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("ogwb").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["check"]).0, EXIT_USAGE);
        let (code, _, err) = run_str(&["check", "/nonexistent/model.og"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error: /nonexistent/model.og"));
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn preset_expands_to_a_parseable_file() {
        let (code, short, _) = run_str(&["preset", "--users", "1", "--interrupts", "0", "--events", "0"]);
        assert_eq!(code, EXIT_OK);
        let a = crate::model::parse_model(&short).unwrap();
        let long = preset_text(1, 0, 0, true).unwrap();
        let b = crate::model::parse_model(&long).unwrap();
        assert_eq!(render_system(&a.system), render_system(&b.system));
        assert_eq!(a.invariants, b.invariants);
        assert_eq!(run_str(&["preset", "--users", "0"]).0, EXIT_USAGE);
    }
}
