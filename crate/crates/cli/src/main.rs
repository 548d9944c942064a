use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use switchlens_core::cues::{mine_sequences, mine_sequences_for_type, DEFAULT_MAX_LEN};
use switchlens_core::graph::communication_graph;
use switchlens_core::narrative::{render, render_disruptiveness, RuleSource};
use switchlens_core::pattern::{maximal_rules, mine, MiningError};
use switchlens_core::store::StoreError;
use switchlens_core::{
    AssociationRule, Discretization, Lexicon, MiningParams, RawRecord, Store, TaskType, Threshold, Timestamp,
};
use switchlens_service::advisor::Patterns;
use switchlens_service::config::{parse_timezone, Config};

#[derive(Parser)]
#[command(name = "switchlens", version, about = "Task-interruption log analytics")]
struct Cli {
    /// Store file (append-only JSONL).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// UTC offset used to bucket switch times, e.g. +02:00.
    #[arg(long, global = true, value_parser = parse_timezone)]
    timezone: Option<chrono::FixedOffset>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Append a JSONL task log (`-` for stdin) to the store.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Mine disruptiveness rules for one task type.
    Mine {
        #[arg(long)]
        task_type: TaskType,
        #[arg(long)]
        min_support: Threshold,
        #[arg(long)]
        min_confidence: Threshold,
        #[arg(long, value_enum, default_value = "text")]
        format: RuleFormat,
        /// `median` or `fixed:<d1>,<d2>,<d3>`.
        #[arg(long, default_value = "median")]
        discretization: Discretization,
        /// Mine a JSONL file of interruption records instead of the store.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Print only rules not contained in another rule.
        #[arg(long)]
        maximal: bool,
    },
    /// Mine resumption-cue sequence rules.
    Cues {
        #[arg(long)]
        min_support: Threshold,
        #[arg(long)]
        task_type: Option<TaskType>,
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: RuleFormat,
    },
    /// Export the stakeholder communication graph over [from, to).
    Graph {
        #[arg(long)]
        from: Option<Timestamp>,
        #[arg(long)]
        to: Option<Timestamp>,
        #[arg(long, value_enum, default_value = "json")]
        format: GraphFormat,
    },
    /// Write the store back out as JSONL.
    Export,
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Io(String),
    /// stdout was closed by the reader, e.g. `| head`.
    Closed,
}

fn write_err(e: io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Failure::Closed
    } else {
        Failure::Io(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => Failure::Io(e.to_string()),
            StoreError::Corrupt { .. } => Failure::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

struct Ctx {
    store: PathBuf,
    offset: chrono::FixedOffset,
}

impl Ctx {
    /// Opens the store for appending, creating it if needed.
    fn open(&self) -> Result<Store, Failure> {
        Ok(Store::open(&self.store)?.with_offset(self.offset))
    }

    /// Loads the store for reading; a missing file is an empty store.
    fn load(&self) -> Result<Store, Failure> {
        if self.store.exists() {
            self.open()
        } else {
            Ok(Store::in_memory().with_offset(self.offset))
        }
    }
}

fn ingest(ctx: &Ctx, input: &Path) -> Outcome {
    let reader: Box<dyn BufRead> = if input.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(File::open(input).map_err(io_err(input))?))
    };
    let report = ctx.open()?.ingest(reader)?;
    println!(
        "accepted {}, duplicates {}, rejected {}",
        report.accepted, report.duplicates, report.rejected
    );
    for r in &report.rejections {
        eprintln!("line {}: {}", r.line, r.reason);
    }
    if report.rejected > 0 {
        return Err(Failure::Validation(format!("{} record(s) rejected", report.rejected)));
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<RawRecord>, Failure> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| Failure::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn mine_cmd(
    ctx: &Ctx,
    task_type: TaskType,
    min_support: Threshold,
    min_confidence: Threshold,
    format: RuleFormat,
    discretization: Discretization,
    records: Option<&Path>,
    only_maximal: bool,
) -> Outcome {
    let (raw, watermark) = match records {
        Some(p) => (read_records(p)?, 0),
        None => {
            let store = ctx.load()?;
            (store.raw_records(), store.watermark())
        }
    };
    let params = MiningParams::new(task_type, min_support, min_confidence).with_discretization(discretization);
    let rules = match mine(&raw, &params) {
        Ok(r) => r,
        Err(e @ (MiningError::NoRecords(_) | MiningError::EmptyInput)) => {
            return Err(Failure::Validation(format!("no records for task type {task_type} ({e})")))
        }
        Err(e) => return Err(Failure::Validation(e.to_string())),
    };
    let selected: Vec<&AssociationRule> = if only_maximal {
        maximal_rules(&rules)
    } else {
        rules.iter().collect()
    };
    let lexicon = Lexicon::default();
    let narratives = selected
        .iter()
        .map(|r| render_disruptiveness(r, &lexicon))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let mut out = io::stdout().lock();
    match format {
        RuleFormat::Json => {
            let payload = Patterns {
                task_type,
                min_support,
                min_confidence,
                discretization,
                watermark,
                rules: narratives,
            };
            let text = serde_json::to_string_pretty(&payload).expect("serializable");
            writeln!(out, "{text}").map_err(write_err)?;
        }
        RuleFormat::Text => {
            for (n, r) in narratives.iter().zip(&selected) {
                writeln!(out, "{}\n  {r}", n.text).map_err(write_err)?;
            }
        }
    }
    Ok(())
}

fn cues_cmd(ctx: &Ctx, min_support: Threshold, task_type: Option<TaskType>, max_len: usize, format: RuleFormat) -> Outcome {
    let store = ctx.load()?;
    let sessions = store.sessions();
    let rules = match task_type {
        Some(t) => mine_sequences_for_type(t, &sessions, min_support, max_len),
        None => mine_sequences(&sessions, min_support, max_len),
    }
    .map_err(|e| Failure::Validation(e.to_string()))?;
    let lexicon = Lexicon::default();
    let narratives = rules
        .iter()
        .map(|r| render(&RuleSource::CueSequence(r.clone()), &lexicon))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let mut out = io::stdout().lock();
    let res = match format {
        RuleFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&narratives).expect("serializable")),
        RuleFormat::Text => narratives.iter().try_for_each(|n| writeln!(out, "{}", n.text)),
    };
    res.map_err(write_err)
}

fn graph_cmd(ctx: &Ctx, from: Option<Timestamp>, to: Option<Timestamp>, format: GraphFormat) -> Outcome {
    if let (Some(f), Some(t)) = (from, to) {
        if f >= t {
            return Err(Failure::Validation("--from must be before --to".into()));
        }
    }
    let g = communication_graph(&ctx.load()?, from, to);
    let text = match format {
        GraphFormat::Json => serde_json::to_string_pretty(&g).expect("serializable") + "\n",
        GraphFormat::Dot => g.to_dot(),
    };
    io::stdout().write_all(text.as_bytes()).map_err(write_err)
}

fn serve_cmd(cli_store: Option<PathBuf>, offset: Option<chrono::FixedOffset>, port: Option<u16>, config: Option<PathBuf>) -> Outcome {
    let mut c = Config::load(config.as_deref(), std::env::vars()).map_err(|e| match e {
        switchlens_service::config::ConfigError::Io { .. } => Failure::Io(e.to_string()),
        other => Failure::Validation(other.to_string()),
    })?;
    if let Some(p) = port {
        c.port = p;
    }
    if let Some(s) = cli_store {
        c.store = s;
    }
    if let Some(o) = offset {
        c.timezone = o;
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info,tower_http=debug".into()),
        )
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    rt.block_on(switchlens_service::serve(c)).map_err(|e| Failure::Io(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    let ctx = Ctx {
        store: cli.store.clone().unwrap_or_else(|| PathBuf::from("switchlens.db")),
        offset: cli.timezone.unwrap_or_else(|| chrono::FixedOffset::east_opt(0).expect("UTC")),
    };
    match cli.command {
        Command::Ingest { input } => ingest(&ctx, &input),
        Command::Mine {
            task_type,
            min_support,
            min_confidence,
            format,
            discretization,
            records,
            maximal,
        } => mine_cmd(
            &ctx,
            task_type,
            min_support,
            min_confidence,
            format,
            discretization,
            records.as_deref(),
            maximal,
        ),
        Command::Cues {
            min_support,
            task_type,
            max_len,
            format,
        } => cues_cmd(&ctx, min_support, task_type, max_len, format),
        Command::Graph { from, to, format } => graph_cmd(&ctx, from, to, format),
        Command::Export => ctx
            .load()?
            .export(io::stdout().lock())
            .map_err(write_err),
        Command::Serve { port, config } => serve_cmd(cli.store, cli.timezone, port, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
