//! `tm` — validate, simulate, query, and export occurrence-only models.
//!
//! Exit codes: 0 success, 1 validation/semantic errors, 2 usage errors,
//! 3 engine errors. Diagnostics go to stderr, results to stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tm_core::catalog;
use tm_core::dsl::{self, Compiled, Diagnostic, Document, DotLevel};
use tm_core::engine::{self, RecordKind, Stimulus};
use tm_core::timeline::{self, Timeline};

const EXIT_SEMANTIC: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ENGINE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tm",
    about = "Occurrence-only modeling: validate, simulate, query, export",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a .tm file and check every validation rule.
    Validate { file: PathBuf },
    /// Run a scenario through the execution engine.
    Simulate(SimulateArgs),
    /// Evaluate a temporal query against the file's timeline.
    Query { file: PathBuf, query: String },
    /// Export a model as DOT or JSON.
    Export(ExportArgs),
    /// Catalog of the built-in models.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Args)]
struct SimulateArgs {
    file: PathBuf,
    /// Scenario name declared in the file.
    #[arg(long)]
    scenario: String,
    /// Write the JSON-lines trace here instead of stdout.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stop after this many firings.
    #[arg(long, default_value_t = 10_000)]
    max_steps: u64,
}

#[derive(Args)]
struct ExportArgs {
    file: PathBuf,
    #[arg(long)]
    format: ExportFormat,
    /// Diagram level for DOT output.
    #[arg(long, default_value = "static")]
    level: Level,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Static,
    Behavior,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List the built-in catalog entries and their scenarios.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Query { file, query } => cmd_query(&file, &query),
        Command::Export(args) => cmd_export(&args),
        Command::Catalog(CatalogCommand::List) => cmd_catalog_list(),
    }
}

fn color_enabled() -> bool {
    matches!(std::env::var("TM_COLOR").as_deref(), Ok("1"))
}

fn report(diagnostic: &Diagnostic) {
    if color_enabled() {
        eprintln!(
            "{} \x1b[31m{}\x1b[0m {}",
            diagnostic.span, diagnostic.rule, diagnostic.message
        );
    } else {
        eprintln!("{diagnostic}");
    }
}

fn read_file(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_USAGE)
    })
}

fn parse_file(path: &Path) -> Result<Document, ExitCode> {
    let text = read_file(path)?;
    let name = path.to_string_lossy();
    dsl::parse(&name, &text).map_err(|diagnostics| {
        for d in &diagnostics {
            report(d);
        }
        ExitCode::from(EXIT_SEMANTIC)
    })
}

fn compile_file(path: &Path) -> Result<(Document, Compiled), ExitCode> {
    let doc = parse_file(path)?;
    match dsl::analyze(&doc) {
        Ok(compiled) => Ok((doc, compiled)),
        Err(diagnostics) => {
            for d in &diagnostics {
                report(d);
            }
            Err(ExitCode::from(EXIT_SEMANTIC))
        }
    }
}

fn cmd_validate(file: &Path) -> ExitCode {
    let (_, compiled) = match compile_file(file) {
        Ok(x) => x,
        Err(code) => return code,
    };
    for warning in &compiled.warnings {
        let tm_core::behavior::BehaviorWarning::UnguardedBranch { from, targets } = warning;
        eprintln!(
            "warning: UnguardedBranch from {from}: unguarded edges to {}",
            targets
                .iter()
                .map(|t| t.0.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!("ok: {} validates cleanly", file.display());
    ExitCode::SUCCESS
}

fn cmd_simulate(args: &SimulateArgs) -> ExitCode {
    let (_, compiled) = match compile_file(&args.file) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let Some(bg) = compiled.behavior.clone() else {
        eprintln!("error: {} declares no behavior graph", args.file.display());
        return ExitCode::from(EXIT_SEMANTIC);
    };
    let Some(scenario) = compiled.scenario(&args.scenario) else {
        eprintln!(
            "error: scenario `{}` is not declared in {}",
            args.scenario,
            args.file.display()
        );
        return ExitCode::from(EXIT_USAGE);
    };

    let stimuli: Vec<Stimulus> = scenario.stimuli.clone();
    let mut state = match engine::init_state(bg, &scenario.bindings, stimuli) {
        Ok(state) => state,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ENGINE);
        }
    };
    let trace = match engine::run(&mut state, args.max_steps) {
        Ok(trace) => trace,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ENGINE);
        }
    };

    let fired = trace
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::Fire)
        .count();
    let reverts = trace
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::Revert)
        .count();
    let quiescent = state.pending_stimuli() == 0
        && matches!(state.enabled(), Ok(enabled) if enabled.is_empty());
    let jsonl = trace.to_jsonl();

    if let Some(out) = &args.trace {
        if let Err(e) = fs::write(out, &jsonl) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return ExitCode::from(EXIT_ENGINE);
        }
    } else {
        print!("{jsonl}");
    }
    eprintln!(
        "fired {fired} events, {reverts} reverts, {}",
        if quiescent { "quiescent" } else { "budget" }
    );
    ExitCode::SUCCESS
}

fn load_timeline(path: &Path) -> Result<Timeline, ExitCode> {
    if path.extension().is_some_and(|ext| ext == "json") {
        let text = read_file(path)?;
        return timeline::import_jsonl(&path.to_string_lossy(), &text).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SEMANTIC)
        });
    }
    let (_, compiled) = compile_file(path)?;
    compiled.timelines.into_iter().next().ok_or_else(|| {
        eprintln!("error: {} declares no timeline", path.display());
        ExitCode::from(EXIT_SEMANTIC)
    })
}

fn cmd_query(file: &Path, query: &str) -> ExitCode {
    let parsed = match timeline::parse_query(query) {
        Ok(parsed) => parsed,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let timeline = match load_timeline(file) {
        Ok(timeline) => timeline,
        Err(code) => return code,
    };
    match timeline::answer_query(&timeline, &parsed) {
        Ok(answer) => {
            println!("{answer}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SEMANTIC)
        }
    }
}

fn cmd_export(args: &ExportArgs) -> ExitCode {
    let (doc, _) = match compile_file(&args.file) {
        Ok(x) => x,
        Err(code) => return code,
    };
    match args.format {
        ExportFormat::Dot => {
            let level = match args.level {
                Level::Static => DotLevel::Static,
                Level::Behavior => DotLevel::Behavior,
            };
            print!("{}", dsl::export_dot(&doc, level));
        }
        ExportFormat::Json => {
            print!("{}", dsl::export_json(&doc));
        }
    }
    ExitCode::SUCCESS
}

fn cmd_catalog_list() -> ExitCode {
    for name in catalog::EntryName::ALL {
        let fixtures = catalog::scenarios(name);
        let scenario_names: Vec<&str> = fixtures.iter().map(|f| f.scenario).collect();
        if scenario_names.is_empty() {
            println!("{name}");
        } else {
            println!("{name}: {}", scenario_names.join(", "));
        }
    }
    ExitCode::SUCCESS
}
