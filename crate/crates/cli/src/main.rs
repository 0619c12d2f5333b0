mod config;
mod files;
mod http;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use idiomizer_core::eval::{display, evaluate, load_benchmark, compute_metrics, EvalReport};
use idiomizer_core::knowledge::catalog_json;
use idiomizer_core::pipeline::{refactor_source, DEFAULT_MAX_PASSES};
use idiomizer_core::rewrite::display_path;
use idiomizer_core::{
    detect_source, DeterministicEngine, Engine, FileResult, FixtureStore, IdiomKind, LlmEngine, Options, SourceFile,
};
use serde::Serialize;

use config::{pick, resolve_idioms, EngineKind, FileConfig};

#[derive(Parser)]
#[command(name = "idiomizer", version, about = "Find non-idiomatic Python and rewrite it into Pythonic idioms")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    refactor: RefactorArgs,
    /// Config file (default: nearest idiomizer.json)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging; repeat for debug output
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// List refactorable sites without rewriting them
    Detect(SelectArgs),
    /// Rewrite sites (the default command)
    Refactor(RefactorArgs),
    /// Score the pipeline against a benchmark of gold code pairs
    Eval(EvalArgs),
    /// Print the idiom catalog
    Idioms {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone, Default)]
struct SelectArgs {
    /// Files or directories (default: current directory)
    paths: Vec<PathBuf>,
    /// Restrict to an idiom; repeatable
    #[arg(long = "idiom", value_name = "NAME")]
    idioms: Vec<String>,
    /// Glob of files to take from directories; repeatable
    #[arg(long)]
    include: Vec<String>,
    /// Glob of files or directories to skip; repeatable
    #[arg(long)]
    exclude: Vec<String>,
    /// Worker threads (default: CPU count)
    #[arg(long)]
    jobs: Option<usize>,
    /// One JSON object per line
    #[arg(long)]
    json: bool,
}

#[derive(Args, Clone, Default)]
struct EngineArgs {
    /// Who writes the rewrites (default: deterministic)
    #[arg(long, value_enum)]
    engine: Option<EngineKind>,
    /// Fixture store (JSON lines) for replay and recording
    #[arg(long, value_name = "PATH")]
    fixtures: Option<PathBuf>,
    /// Append live responses to the fixture store
    #[arg(long)]
    record: bool,
}

#[derive(Args, Clone, Default)]
struct RefactorArgs {
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Write rewrites back to the files
    #[arg(long)]
    fix: bool,
    /// Print nothing but locations; exit 1 when anything would change
    #[arg(long)]
    check: bool,
    /// Rewrite rounds per file, stopping early once nothing changes (default: 5)
    #[arg(long, value_name = "N")]
    max_passes: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Benchmark entries, one JSON object per line
    #[arg(long, value_name = "PATH")]
    benchmark: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Worker threads (default: CPU count)
    #[arg(long)]
    jobs: Option<usize>,
    /// Rewrite rounds per entry
    #[arg(long, value_name = "N", default_value_t = 1)]
    max_passes: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file_cfg = FileConfig::discover(cli.config.as_deref())?;
    match cli.command {
        Some(Command::Detect(args)) => detect(&args, &file_cfg),
        Some(Command::Refactor(args)) => refactor(&args, &file_cfg),
        None => refactor(&cli.refactor, &file_cfg),
        Some(Command::Eval(args)) => eval(&args, &file_cfg),
        Some(Command::Idioms { json }) => {
            print_idioms(json)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_idioms(json: bool) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", catalog_json())?;
        return Ok(());
    }
    for spec in idiomizer_core::knowledge::catalog() {
        let conditions: Vec<&str> = spec.conditions.iter().map(|c| c.description()).collect();
        writeln!(out, "{:<24} {}", spec.kind.name(), conditions.join("; "))?;
    }
    Ok(())
}

fn thread_pool(jobs: Option<usize>, cfg: &FileConfig) -> Result<rayon::ThreadPool> {
    let n = pick(jobs, cfg.jobs, 0);
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

fn select_files(args: &SelectArgs, cfg: &FileConfig) -> Result<files::Selection> {
    let roots = if args.paths.is_empty() { vec![PathBuf::from(".")] } else { args.paths.clone() };
    let include = if !args.include.is_empty() {
        args.include.clone()
    } else {
        cfg.include
            .clone()
            .unwrap_or_else(|| files::DEFAULT_INCLUDE.iter().map(|s| s.to_string()).collect())
    };
    let exclude = if !args.exclude.is_empty() { args.exclude.clone() } else { cfg.exclude.clone().unwrap_or_default() };
    files::collect(&roots, &include, &exclude)
}

fn build_engine(args: &EngineArgs, cfg: &FileConfig) -> Result<Box<dyn Engine>> {
    let kind = pick(args.engine, cfg.engine, EngineKind::Deterministic);
    let fixtures = args.fixtures.clone().or_else(|| cfg.fixtures.clone());
    if args.record && fixtures.is_none() {
        bail!("--record needs --fixtures");
    }
    Ok(match kind {
        EngineKind::Deterministic => Box::new(DeterministicEngine),
        EngineKind::Replay => {
            let path = fixtures.context("--engine replay needs --fixtures")?;
            if !path.is_file() {
                bail!("fixture store {} not found", path.display());
            }
            Box::new(LlmEngine::replay(Arc::new(FixtureStore::load(&path)?)))
        }
        EngineKind::Llm => {
            let store = match &fixtures {
                Some(p) => FixtureStore::load(p)?,
                None => FixtureStore::empty(),
            };
            let store = Arc::new(store);
            match http::HttpTransport::from_env()? {
                Some(t) => Box::new(LlmEngine::live(store, Box::new(t), args.record)),
                None => {
                    log::warn!("{} is not set; answering from fixtures only", http::ENDPOINT_VAR);
                    Box::new(LlmEngine::replay(store))
                }
            }
        }
    })
}

enum FileOutcome {
    Done(Box<FileResult>),
    Error(String),
}

#[derive(Serialize)]
struct CandidateLine<'a> {
    site_id: &'a str,
    idiom: IdiomKind,
    path: String,
    line: usize,
    non_idiomatic: &'a str,
    idiomatic: &'a str,
    diff: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

#[derive(Serialize)]
struct Summary {
    files: usize,
    changed_files: usize,
    candidates: usize,
    errors: Vec<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn refactor(args: &RefactorArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let options = Options {
        idioms: resolve_idioms(&args.select.idioms, &cfg.idioms)?,
        max_passes: config::check_max_passes(pick(args.max_passes, cfg.max_passes, DEFAULT_MAX_PASSES))?,
    };
    let engine = build_engine(&args.engine, cfg)?;
    let selection = select_files(&args.select, cfg)?;
    let pool = thread_pool(args.select.jobs, cfg)?;
    let outcomes: Vec<FileOutcome> = pool.install(|| {
        use rayon::prelude::*;
        selection
            .files
            .par_iter()
            .map(|path| process_file(path, engine.as_ref(), &options, args.fix && !args.check))
            .collect()
    });

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut errors: Vec<String> = selection.errors.iter().map(|(p, e)| format!("{}: {e}", p.display())).collect();
    let mut operational = false;
    let mut candidates = 0;
    let mut changed_files = 0;
    for outcome in &outcomes {
        let r = match outcome {
            FileOutcome::Error(e) => {
                errors.push(e.clone());
                continue;
            }
            FileOutcome::Done(r) => r,
        };
        if !r.engine_errors.is_empty() {
            operational = true;
            errors.extend(r.engine_errors.iter().cloned());
        }
        candidates += r.candidates.len();
        if r.changed() {
            changed_files += 1;
        }
        let path = display_path(&r.path);
        for c in &r.candidates {
            let first = c.edits.iter().map(|e| e.span.start).min().unwrap_or(0);
            let line = line_of(&c.new_source, first);
            if args.select.json {
                let rec = CandidateLine {
                    site_id: &c.site.site_id,
                    idiom: c.site.idiom,
                    path: path.clone(),
                    line,
                    non_idiomatic: &c.non_idiomatic,
                    idiomatic: &c.idiomatic,
                    diff: &c.diff,
                    note: c.note.as_deref(),
                };
                writeln!(out, "{}", serde_json::to_string(&rec)?)?;
            } else if args.check || args.fix {
                writeln!(out, "{path}:{line}: {}", c.site.idiom)?;
            }
            if let Some(note) = &c.note {
                if !args.select.json {
                    eprintln!("{path}:{line}: {note}");
                }
            }
        }
        if !args.select.json && !args.check && !args.fix {
            write!(out, "{}", r.diff())?;
        }
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    if args.select.json {
        let summary = Summary {
            files: selection.files.len(),
            changed_files,
            candidates,
            errors: errors.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&serde_json::json!({ "summary": summary }))?)?;
    } else {
        let verb = if args.fix && !args.check { "applied" } else { "found" };
        eprintln!("{candidates} rewrites {verb} in {changed_files} of {} files", selection.files.len());
    }
    out.flush()?;
    Ok(if operational {
        ExitCode::from(2)
    } else if candidates > 0 && (!args.fix || args.check) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn process_file(path: &Path, engine: &dyn Engine, options: &Options, write: bool) -> FileOutcome {
    let source = match SourceFile::read(path) {
        Ok(s) => s,
        Err(e) => return FileOutcome::Error(format!("{}: {e}", path.display())),
    };
    let result = match refactor_source(source, engine, options) {
        Ok(r) => r,
        Err(e) => return FileOutcome::Error(format!("{}: {e}", path.display())),
    };
    if write && result.changed() {
        if let Err(e) = write_atomic(path, &result.final_source) {
            return FileOutcome::Error(format!("{}: {e:#}", path.display()));
        }
    }
    FileOutcome::Done(Box::new(result))
}

/// Writes through a temporary file in the same directory, then renames it
/// over `path`, keeping the original permissions.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let perms = std::fs::metadata(path)?.permissions();
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.as_file().set_permissions(perms)?;
    tmp.persist(path)?;
    Ok(())
}

#[derive(Serialize)]
struct SiteLine {
    site_id: String,
    idiom: IdiomKind,
    path: String,
    line: usize,
    column: usize,
    code: String,
}

fn detect(args: &SelectArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let idioms = resolve_idioms(&args.idioms, &cfg.idioms)?;
    let selection = select_files(args, cfg)?;
    let pool = thread_pool(args.jobs, cfg)?;
    let results: Vec<Result<Vec<SiteLine>, String>> = pool.install(|| {
        use rayon::prelude::*;
        selection
            .files
            .par_iter()
            .map(|path| {
                let source = SourceFile::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let text = source.text.clone();
                let index = source.clone();
                let sites = detect_source(source, &idioms).map_err(|e| format!("{}: {e}", path.display()))?;
                Ok(sites
                    .into_iter()
                    .map(|s| {
                        let span = s.span();
                        let lc = index.line_col(span.start);
                        SiteLine {
                            site_id: s.site_id.clone(),
                            idiom: s.idiom,
                            path: display_path(path),
                            line: lc.line,
                            column: lc.col,
                            code: span.slice(&text).to_string(),
                        }
                    })
                    .collect())
            })
            .collect()
    });
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut found = 0;
    let mut errors: Vec<String> = selection.errors.iter().map(|(p, e)| format!("{}: {e}", p.display())).collect();
    for r in results {
        match r {
            Ok(sites) => {
                for s in sites {
                    found += 1;
                    if args.json {
                        writeln!(out, "{}", serde_json::to_string(&s)?)?;
                    } else {
                        writeln!(out, "{}:{}:{}: {} [{}]", s.path, s.line, s.column, s.idiom, s.site_id)?;
                    }
                }
            }
            Err(e) => errors.push(e),
        }
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    out.flush()?;
    Ok(if found > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn eval(args: &EvalArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let entries = load_benchmark(&args.benchmark).with_context(|| format!("loading {}", args.benchmark.display()))?;
    let engine = build_engine(&args.engine, cfg)?;
    let jobs = pick(args.jobs, cfg.jobs, std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = evaluate(&entries, engine.as_ref(), config::check_max_passes(args.max_passes)?, jobs);
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.report {
        Some(path) => std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(json.as_bytes())?,
    }
    print_table(&report);
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    Ok(if report.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn print_table(report: &EvalReport) {
    eprintln!("{:<24} {:>4} {:>4} {:>4} {:>8} {:>9} {:>8} {:>8}", "idiom", "tp", "fp", "fn", "accuracy", "precision", "recall", "f1");
    let rows = report.idioms.iter().map(|(k, r)| (k.name(), r)).chain(std::iter::once(("total", &report.total)));
    for (name, row) in rows {
        let m = compute_metrics(row.counts);
        eprintln!(
            "{:<24} {:>4} {:>4} {:>4} {:>8} {:>9} {:>8} {:>8}",
            name,
            row.counts.tp,
            row.counts.fp,
            row.counts.fn_,
            display(m.accuracy),
            display(m.precision),
            display(m.recall),
            display(m.f1)
        );
    }
    if !report.near_misses.is_empty() {
        eprintln!("{} near misses (right site, different rewrite)", report.near_misses.len());
    }
}
