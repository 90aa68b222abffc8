//! `swarmkit`: simulate, check, estimate, parse, count and step through the
//! coordination scenarios.
//!
//! Exit status: 0 success or Holds, 1 Fails (witness written), 2 usage or
//! configuration error, 3 resource limit.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use swarmkit::dispatch;
use swarmkit::engine::{self, CheckOptions, Model, Verdict, Witness};
use swarmkit::formula::{Formula, PropExpr};
use swarmkit::interp::{self, SystemSpec};
use swarmkit::scenarios::{self, ScenarioConfig, ScenarioKind};

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

const EXIT_FAILS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "swarmkit", version, about = "Coordination substrates for robot swarms: simulator and model checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation and write its trace as JSON lines.
    Sim(Common),
    /// Check temporal formulas exhaustively.
    Check(Common),
    /// Fraction of seeded runs that reach a proposition.
    Estimate(Common),
    /// Parse an interpreted-system description and dump its syntax tree.
    /// A bare argument (without `=`) names the file; otherwise the
    /// description of the configured scenario is used.
    Parse(Common),
    /// Count reachable states, transitions, depth and deadlocks.
    Stats(Common),
    /// Choose transitions by hand: list, read an index, apply, repeat.
    Step(Common),
}

#[derive(Args)]
struct Common {
    /// TOML scenario configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_ticks: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// State budget of the checker.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// `AG|AF|EF|EG <proposition>`; for `estimate`, a bare proposition.
    #[arg(long)]
    formula: Option<String>,
    /// Trace file (`sim`, `step`) or witness file (`check`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// `key=value` settings applied over the config file.
    overrides: Vec<String>,
}

/// Error that maps to an exit status.
struct Failure(u8, anyhow::Error);

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure(EXIT_USAGE, e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim(c) => sim(c),
        Command::Check(c) => check(c),
        Command::Estimate(c) => estimate(c),
        Command::Parse(c) => parse(c),
        Command::Stats(c) => stats(c),
        Command::Step(c) => step(c, &mut io::stdin().lock(), &mut io::stdout().lock()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {}", format!("{e:#}").trim_end());
            ExitCode::from(code)
        }
    }
}

/// Reads the config, applies overrides and flags. A relative `spec` from the
/// file is resolved against the file's directory.
fn load(c: &Common, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = ScenarioConfig::from_toml_with(&text, overrides)?;
    let spec_overridden = overrides.iter().any(|o| o.split_once('=').is_some_and(|(k, _)| k.trim() == "spec"));
    if let (Some(spec), Some(file), false) = (&cfg.spec, &c.config, spec_overridden) {
        if spec.is_relative() {
            cfg.spec = Some(file.parent().unwrap_or(Path::new("")).join(spec));
        }
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.max_ticks {
        cfg.max_ticks = v;
    }
    if let Some(v) = c.runs {
        cfg.runs = v;
    }
    if let Some(v) = c.budget {
        cfg.budget = v;
    }
    if let Some(v) = c.workers {
        cfg.workers = v;
    }
    if let Some(f) = &c.formula {
        cfg.formula = Some(f.clone());
    }
    Ok(cfg)
}

fn config(c: &Common) -> Result<ScenarioConfig> {
    if let Some(bad) = c.overrides.iter().find(|o| !o.contains('=')) {
        bail!("`{bad}` is not a key=value override");
    }
    load(c, &c.overrides)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn sim(c: &Common) -> Result<u8, Failure> {
    let cfg = config(c)?;
    let scenario = scenarios::build(&cfg).map_err(anyhow::Error::from)?;
    let trace = dispatch!(&scenario, m => engine::simulate(m, cfg.seed, cfg.max_ticks)).map_err(anyhow::Error::from)?;
    write_output(c.output.as_deref(), &trace.to_json_lines(cfg.scenario.name()))?;
    Ok(0)
}

/// Formulas to check: `--formula`, else `formula` in the config, else those
/// declared by an interpreted-system description.
fn formulas(cfg: &ScenarioConfig, scenario: &scenarios::Scenario) -> Result<Vec<Formula>> {
    if let Some(f) = &cfg.formula {
        return Ok(vec![f.parse().map_err(|e| anyhow!("formula `{f}`: {e}"))?]);
    }
    if let scenarios::Scenario::Interpreted(spec) = scenario {
        if !spec.formulas().is_empty() {
            return Ok(spec.formulas().to_vec());
        }
    }
    bail!("no formula: pass --formula or set `formula` in the config")
}

fn check(c: &Common) -> Result<u8, Failure> {
    let cfg = config(c)?;
    let scenario = scenarios::build(&cfg).map_err(anyhow::Error::from)?;
    let formulas = formulas(&cfg, &scenario)?;
    let opts = CheckOptions { budget: cfg.budget, workers: cfg.workers };
    let mut code = 0;
    let mut witnesses = String::new();
    let mut summaries = Vec::new();
    for f in &formulas {
        let (summary, text) = dispatch!(&scenario, m => check_one(m, f, &opts))?;
        let verdict = summary["verdict"].as_str().unwrap_or_default();
        code = code.max(match verdict {
            "fails" => EXIT_FAILS,
            "resource_limit" => EXIT_LIMIT,
            _ => 0,
        });
        let written = match text {
            Some(t) if verdict == "fails" || c.output.is_some() => {
                witnesses.push_str(&t);
                true
            }
            _ => false,
        };
        summaries.push((summary, written));
    }
    let witness_file =
        (!witnesses.is_empty()).then(|| c.output.clone().unwrap_or_else(|| PathBuf::from("witness.txt")));
    if let Some(p) = &witness_file {
        write_output(Some(p), &witnesses)?;
    }
    let mut out = String::new();
    for (mut s, written) in summaries {
        s["witness_file"] = json!(witness_file.as_ref().filter(|_| written).map(|p| p.display().to_string()));
        writeln!(out, "{s}").unwrap();
    }
    write_output(None, &out)?;
    Ok(code)
}

/// Machine-readable verdict plus the human-readable witness, if any.
fn check_one<M: Model>(m: &M, f: &Formula, opts: &CheckOptions) -> Result<(Value, Option<String>), Failure> {
    let r = engine::check(m, f, opts).map_err(|e| Failure(EXIT_USAGE, e.into()))?;
    let witness = r.verdict.witness();
    let summary = json!({
        "formula": f.to_string(),
        "verdict": r.verdict.name(),
        "states": r.states,
        "transitions": r.transitions,
        "witness": witness.map(|w| witness_json(m, w)),
    });
    let text = witness.map(|w| witness_text(m, f, &r.verdict, w));
    Ok((summary, text))
}

fn witness_json<M: Model>(m: &M, w: &Witness<M::State>) -> Value {
    json!({
        "states": w.states.iter().map(|s| json!({
            "digest": engine::digest(m, s),
            "description": m.describe(s),
        })).collect::<Vec<_>>(),
        "labels": w.labels,
        "lasso": w.lasso,
        "deadlock": w.deadlock,
    })
}

fn witness_text<M: Model>(m: &M, f: &Formula, v: &Verdict<M::State>, w: &Witness<M::State>) -> String {
    let mut t = String::new();
    writeln!(t, "{f}: {}", v.name()).unwrap();
    for (i, s) in w.states.iter().enumerate() {
        writeln!(t, "  [{i}] {}", m.describe(s)).unwrap();
        if let Some(l) = w.labels.get(i) {
            writeln!(t, "      {}: {}", l.actor, l.action).unwrap();
        }
    }
    if let Some(l) = &w.lasso {
        writeln!(t, "      {}: {}", l.label.actor, l.label.action).unwrap();
        writeln!(t, "  loops back to [{}]", l.to).unwrap();
    }
    if w.deadlock {
        writeln!(t, "  deadlock").unwrap();
    }
    t
}

fn estimate(c: &Common) -> Result<u8, Failure> {
    let cfg = config(c)?;
    let scenario = scenarios::build(&cfg).map_err(anyhow::Error::from)?;
    let Some(text) = cfg.formula.as_ref().or(cfg.proposition.as_ref()) else {
        return Err(anyhow!("no proposition: pass --formula or set `proposition` in the config").into());
    };
    let p: PropExpr = text.parse().map_err(|e| anyhow!("proposition `{text}`: {e}"))?;
    let est = dispatch!(&scenario, m => engine::estimate(m, &p, cfg.runs, cfg.max_ticks, cfg.seed))
        .map_err(anyhow::Error::from)?;
    let mut v = serde_json::to_value(&est).map_err(anyhow::Error::from)?;
    v["scenario"] = json!(cfg.scenario.name());
    write_output(None, &format!("{v}\n"))?;
    Ok(0)
}

fn parse(c: &Common) -> Result<u8, Failure> {
    let (files, overrides): (Vec<&String>, Vec<String>) = {
        let (f, o): (Vec<_>, Vec<_>) = c.overrides.iter().partition(|o| !o.contains('='));
        (f, o.into_iter().cloned().collect())
    };
    if files.len() > 1 {
        return Err(anyhow!("parse takes at most one file").into());
    }
    let (source, text) = match files.first() {
        Some(f) => ((*f).clone(), std::fs::read_to_string(f).with_context(|| format!("reading {f}"))?),
        None => {
            let cfg = load(c, &overrides)?;
            description(&cfg)?
        }
    };
    let report = match SystemSpec::parse(&text) {
        Ok(spec) => json!({
            "source": source,
            "ok": true,
            "diagnostics": spec.warnings(),
            "ast": spec.ast(),
        }),
        Err(e) => json!({
            "source": source,
            "ok": false,
            "diagnostics": [e.to_string()],
            "ast": Value::Null,
        }),
    };
    let ok = report["ok"] == json!(true);
    write_output(None, &format!("{report}\n"))?;
    if ok {
        Ok(0)
    } else {
        Err(Failure(EXIT_USAGE, anyhow!("{source}: {}", report["diagnostics"][0].as_str().unwrap_or_default())))
    }
}

/// Source name and text of the interpreted-system description a config
/// stands for.
fn description(cfg: &ScenarioConfig) -> Result<(String, String)> {
    match cfg.scenario {
        ScenarioKind::Ispl => {
            let path = cfg.spec.as_ref().ok_or_else(|| anyhow!("scenario `ispl` needs `spec`"))?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok((path.display().to_string(), text))
        }
        ScenarioKind::FlockingIspl | ScenarioKind::ForagingIspl => {
            let spec = match scenarios::build(cfg)? {
                scenarios::Scenario::Interpreted(s) => s,
                _ => unreachable!(),
            };
            Ok((cfg.scenario.name().to_string(), interp::pretty(spec.ast())))
        }
        other => bail!("scenario `{}` has no interpreted-system description", other.name()),
    }
}

fn stats(c: &Common) -> Result<u8, Failure> {
    let cfg = config(c)?;
    let scenario = scenarios::build(&cfg).map_err(anyhow::Error::from)?;
    let opts = CheckOptions { budget: cfg.budget, workers: cfg.workers };
    let st = dispatch!(&scenario, m => engine::state_space_stats(m, &opts)).map_err(anyhow::Error::from)?;
    let mut v = serde_json::to_value(&st).map_err(anyhow::Error::from)?;
    v["scenario"] = json!(cfg.scenario.name());
    write_output(None, &format!("{v}\n"))?;
    Ok(if st.partial { EXIT_LIMIT } else { 0 })
}

fn step(c: &Common, input: &mut impl BufRead, out: &mut impl Write) -> Result<u8, Failure> {
    let cfg = config(c)?;
    let scenario = scenarios::build(&cfg).map_err(anyhow::Error::from)?;
    dispatch!(&scenario, m => interactive(m, &cfg, c.output.as_deref(), input, out)).map_err(Failure::from)?;
    Ok(0)
}

/// Starts from an initial state drawn with the seed. Each round prints the
/// state and the enabled transitions and applies the one whose index is
/// read. `q` or end of input stops; the chosen path is written as a trace.
fn interactive<M: Model>(
    m: &M,
    cfg: &ScenarioConfig,
    output: Option<&Path>,
    input: &mut impl BufRead,
    out: &mut impl Write,
) -> Result<()> {
    let mut rng = engine::rng(cfg.seed);
    let mut s = m.sample_initial(&mut rng)?;
    let mut trace = engine::Trace {
        seed: cfg.seed,
        rng: engine::RNG_ALGORITHM,
        initial: engine::digest(m, &s),
        events: Vec::new(),
        end: engine::TraceEnd::MaxTicks,
    };
    loop {
        writeln!(out, "state: {}", m.describe(&s))?;
        let succ = m.successors(&s)?;
        if succ.is_empty() {
            writeln!(out, "deadlock")?;
            trace.end = engine::TraceEnd::Deadlock;
            break;
        }
        for (i, st) in succ.iter().enumerate() {
            writeln!(out, "  {i}: {}: {}", st.actor, st.action)?;
        }
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 || line.trim() == "q" {
            break;
        }
        let Some(st) = line.trim().parse::<usize>().ok().and_then(|k| succ.into_iter().nth(k)) else {
            writeln!(out, "expected an index below the number of transitions, or q")?;
            continue;
        };
        s = st.target;
        trace.events.push(engine::TraceEvent {
            tick: trace.events.len() as u64 + 1,
            actor: st.actor,
            action: st.action,
            state: engine::digest(m, &s),
        });
    }
    if let Some(p) = output {
        std::fs::write(p, trace.to_json_lines(cfg.scenario.name()))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
