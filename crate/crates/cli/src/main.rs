use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use ccss::bisim::bisimilar;
use ccss::justness::{is_complete, is_just, Lasso, Semantics};
use ccss::lts::{canonicalize, explore, export_dot, export_json, unfold_structure, Limits, Lts, DEFAULT_MAX_STATES};
use ccss::parser::{parse_bytes, SpecFile};
use ccss::print::{print_spec, print_term};
use ccss::protocols::{self, Flavor, Meta, ProtocolModel};
use ccss::sos::Sos;
use ccss::verifier::{self, Budget, Outcome, WitnessStep};
use ccss::{ModelError, Term};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

/// Like `print!`, but a closed pipe (`ccss lts --dot | head`) ends the
/// process quietly instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {
        write_out(format_args!($($t)*))
    };
}

macro_rules! outln {
    ($($t:tt)*) => {
        write_out(format_args!("{}\n", format_args!($($t)*)))
    };
}

fn write_out(args: std::fmt::Arguments) {
    if let Err(e) = io::stdout().lock().write_fmt(args) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing to stdout: {e}");
    }
}

#[derive(Parser)]
#[command(name = "ccss", version, about = "Toolkit for CCS with signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a specification and print it back
    Parse { file: PathBuf },
    /// Explore the transition system of a specification
    Lts {
        file: PathBuf,
        /// Print Graphviz DOT
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        /// Print JSON
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        limit: StateLimit,
    },
    /// Decide strong bisimilarity of two specifications
    Bisim {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        limit: StateLimit,
    },
    /// Classify a path as just or unjust
    Just {
        file: PathBuf,
        /// Transition indices `stem;cycle`, comma separated; an empty cycle
        /// is a path that ends after the stem
        #[arg(long)]
        lasso: String,
        /// Ignore signals when deciding justness
        #[arg(long)]
        ccs: bool,
        #[command(flatten)]
        limit: StateLimit,
    },
    /// Check mutual exclusion or starvation freedom
    #[command(group(ArgGroup::new("property").required(true).args(["safety", "liveness"])))]
    Verify {
        /// No two processes in the critical section at once
        #[arg(long)]
        safety: bool,
        /// Every attempt to enter succeeds on every just path
        #[arg(long)]
        liveness: bool,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        params: Params,
        /// Print the verdict as JSON
        #[arg(long)]
        json: bool,
        /// Justness evaluations allowed in the liveness search
        #[arg(long, default_value_t = Budget::default().max_checks)]
        max_checks: usize,
        #[command(flatten)]
        limit: StateLimit,
    },
    /// Write a generated model as a specification file
    Gen {
        #[command(flatten)]
        model: ModelArgs,
        /// Write here instead of to standard output
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Step through a specification interactively
    Step { file: PathBuf },
}

#[derive(Args)]
struct StateLimit {
    /// Stop exploring after this many states
    #[arg(long, env = "CCSS_MAX_STATES", default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    file: Option<PathBuf>,
    /// Use a built-in model instead of a file
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in model to generate
    #[arg(long, value_enum)]
    model: ModelKind,
    #[command(flatten)]
    params: Params,
}

#[derive(Args)]
struct Params {
    /// Read variables by handshake (ccs) or by signal (ccss)
    #[arg(long, value_enum, default_value = "ccss")]
    flavor: FlavorArg,
    /// Number of processes (filter, bakery)
    #[arg(long)]
    n: Option<usize>,
    /// Largest ticket number (bakery)
    #[arg(long)]
    ticket_bound: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Peterson2,
    Filter,
    Bakery,
    Example1,
    Example2,
    DekkerVariable,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Ccs,
    Ccss,
}

enum Failure {
    Usage(String),
    Unknown(String),
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::TruncatedInput => Failure::Unknown("state space exceeds --max-states".into()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

type Res = Result<ExitCode, Failure>;

const HOLDS: u8 = 0;
const VIOLATED: u8 = 1;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Unknown(m)) => {
            eprintln!("unknown: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Res {
    match cli.command {
        Command::Parse { file } => {
            let spec = load(&file)?;
            check(&spec)?;
            out!("{}", print_spec(&spec));
            Ok(ExitCode::SUCCESS)
        }
        Command::Lts { file, dot, json, limit } => {
            let spec = load(&file)?;
            check(&spec)?;
            let lts = explore(&spec.env, &spec.root, Limits::states(limit.max_states))?;
            if dot {
                out!("{}", export_dot(&lts));
            } else if json {
                out!("{}", export_json(&lts));
            } else {
                outln!("{} states, {} transitions", lts.states.len(), lts.transitions.len());
            }
            if lts.truncated {
                eprintln!("warning: exploration stopped at {} states", limit.max_states);
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bisim { left, right, limit } => {
            let (a, b) = (load(&left)?, load(&right)?);
            let la = complete_lts(&a, limit.max_states)?;
            let lb = complete_lts(&b, limit.max_states)?;
            let r = bisimilar(&la, la.initial, &lb, lb.initial)?;
            if r.bisimilar {
                outln!("bisimilar");
                return Ok(ExitCode::from(HOLDS));
            }
            outln!("not bisimilar");
            if let Some(e) = r.evidence {
                outln!("{e}");
            }
            Ok(ExitCode::from(VIOLATED))
        }
        Command::Just { file, lasso, ccs, limit } => {
            let spec = load(&file)?;
            let lts = complete_lts(&spec, limit.max_states)?;
            let lasso = lasso.parse::<Lasso>()?.resolve_terminal(&lts);
            let semantics = if ccs { Semantics::Ccs } else { Semantics::Signals };
            let verdict = is_just(&spec.env, &lts, &lasso, semantics)?;
            let complete = is_complete(&spec.env, &lts, &lasso)?;
            let out = serde_json::json!({ "lasso": lasso.to_string(), "complete": complete, "verdict": verdict });
            outln!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(ExitCode::from(if verdict.just { HOLDS } else { VIOLATED }))
        }
        Command::Verify { safety, liveness: _, source, params, json, max_checks, limit } => {
            let model = match (source.file, source.model) {
                (Some(f), _) => {
                    let spec = load(&f)?;
                    check(&spec)?;
                    if spec.mutex.is_empty() {
                        return Err(Failure::Usage(format!("{}: no mutex block", f.display())));
                    }
                    let family = f.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
                    ProtocolModel::from_spec(spec, Meta { family, ..Meta::default() })
                }
                (None, Some(kind)) => build(kind, &params)?,
                (None, None) => unreachable!("clap requires a source"),
            };
            if safety {
                verify_safety(&model, limit.max_states, json)
            } else {
                verify_liveness(&model, Budget { max_states: limit.max_states, max_checks }, json)
            }
        }
        Command::Gen { model, output } => {
            let m = build(model.model, &model.params)?;
            let text = m.to_ccss();
            match output {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
                }
                None => out!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Step { file } => {
            let spec = load(&file)?;
            check(&spec)?;
            repl(&spec, io::stdin().lock(), io::stdout().lock()).map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build(kind: ModelKind, p: &Params) -> Result<ProtocolModel, Failure> {
    let flavor = match p.flavor {
        FlavorArg::Ccs => Flavor::Ccs,
        FlavorArg::Ccss => Flavor::Ccss,
    };
    Ok(match kind {
        ModelKind::Peterson2 => protocols::peterson2(flavor),
        ModelKind::Filter => protocols::filter_lock(p.n.unwrap_or(3), flavor)?,
        ModelKind::Bakery => {
            let n = p.n.unwrap_or(2);
            protocols::bakery(n, p.ticket_bound.unwrap_or(2 * n))?
        }
        ModelKind::Example1 => protocols::example1(),
        ModelKind::Example2 => protocols::example2(),
        ModelKind::DekkerVariable => protocols::dekker_variable(),
    })
}

fn load(path: &Path) -> Result<SpecFile, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_bytes(&bytes).map_err(|e| Failure::Usage(format!("{}:{e}", path.display())))
}

fn check(spec: &SpecFile) -> Result<(), Failure> {
    let report = spec.env.validate(&spec.root);
    if report.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
    Err(Failure::Usage(lines.join("\n")))
}

fn complete_lts(spec: &SpecFile, max_states: usize) -> Result<Lts, Failure> {
    let lts = explore(&spec.env, &spec.root, Limits::states(max_states))?;
    if lts.truncated {
        return Err(ModelError::TruncatedInput.into());
    }
    Ok(lts)
}

fn print_steps(steps: &[WitnessStep]) {
    for s in steps {
        let who: Vec<String> = s.participants.iter().map(ToString::to_string).collect();
        outln!("  #{:<5} {:<24} [{}]", s.transition, s.label.to_string(), who.join(", "));
    }
}

fn verify_safety(model: &ProtocolModel, max_states: usize, json: bool) -> Res {
    let v = verifier::check_safety(model, max_states)?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else if v.holds {
        outln!(
            "safety holds: no reachable state has two processes in the critical section ({} states, exhaustive)",
            v.states
        );
    } else if let Some(w) = &v.witness {
        let who: Vec<String> = w.in_critical.iter().map(|&i| model.roles[i].crit.to_string()).collect();
        outln!("safety violated: {} are in the critical section together", who.join(" and "));
        print_steps(&w.path);
    }
    Ok(ExitCode::from(if v.holds { HOLDS } else { VIOLATED }))
}

fn verify_liveness(model: &ProtocolModel, budget: Budget, json: bool) -> Res {
    let v = verifier::check_liveness(model, budget)?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        let scope = if v.exhaustive { "exhaustive" } else { "bounded" };
        match v.outcome {
            Outcome::Holds => outln!(
                "liveness holds: every noncrit is followed by crit on all just paths ({} states, {} checks, {scope})",
                v.states,
                v.checks
            ),
            Outcome::Unknown => outln!("liveness unknown: budget of {} checks exhausted ({scope})", budget.max_checks),
            Outcome::Violated => {
                let cx = v.counterexample.as_ref().unwrap();
                let role = &model.roles[cx.starving];
                outln!("liveness violated: {} is not followed by {} on a just path ({scope})", role.noncrit, role.crit);
                outln!("lasso {}", cx.lasso);
                outln!("stem:");
                print_steps(&cx.stem);
                outln!("cycle:");
                print_steps(&cx.cycle);
                let y = cx.justness.minimal_y.as_ref().map(|y| y.iter().map(ToString::to_string).collect::<Vec<_>>());
                outln!("just for Y = {{{}}}", y.unwrap_or_default().join(", "));
            }
        }
    }
    Ok(ExitCode::from(match v.outcome {
        Outcome::Holds => HOLDS,
        Outcome::Violated => VIOLATED,
        Outcome::Unknown => 3,
    }))
}

fn repl(spec: &SpecFile, input: impl BufRead, mut out: impl Write) -> io::Result<()> {
    let env = &spec.env;
    let sos = Sos::new(env);
    let start = unfold_structure(env, &spec.root).and_then(|t| canonicalize(env, &t));
    let mut history: Vec<Arc<Term>> = vec![start.map_err(io::Error::other)?];
    let mut lines = input.lines();
    loop {
        let at = history.last().unwrap().clone();
        let (ts, signals) = sos.step(&at).map_err(io::Error::other)?;
        let sigs: Vec<String> = signals.iter().map(ToString::to_string).collect();
        writeln!(out, "state: {}", print_term(&at))?;
        writeln!(out, "signals: {{{}}}", sigs.join(", "))?;
        if ts.is_empty() {
            writeln!(out, "  no transitions")?;
        }
        for (i, d) in ts.iter().enumerate() {
            let who: Vec<String> = d.participants.iter().map(ToString::to_string).collect();
            let partner = d.signal_partner.as_ref().map(|p| format!(" reading from {p}")).unwrap_or_default();
            writeln!(out, "  [{i}] {} by {}{partner}", d.label, who.join(", "))?;
        }
        write!(out, "> ")?;
        out.flush()?;
        let Some(line) = lines.next() else { return Ok(()) };
        match line?.trim() {
            "quit" | "q" => return Ok(()),
            "undo" => {
                if history.len() > 1 {
                    history.pop();
                } else {
                    writeln!(out, "nothing to undo")?;
                }
            }
            "signals" => writeln!(out, "{{{}}}", sigs.join(", "))?,
            "" => {}
            other => match other.parse::<usize>().ok().and_then(|i| ts.get(i)) {
                Some(d) => history.push(canonicalize(env, &d.target).map_err(io::Error::other)?),
                None => writeln!(out, "pick a transition number, or quit, undo, signals")?,
            },
        }
    }
}
