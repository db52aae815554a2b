//! Command-line front end. Exit codes: 0 success, 1 input or usage error,
//! 2 backend failure.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use factforge_core::benchmark::{
    perturb_corpus, read_jsonl, read_reports, score, write_jsonl, AnnotatedInstance, LinkedSentence,
    MatchConfig,
};
use factforge_core::demo;
use factforge_core::model::{VerdictLabel, VerificationReport};
use factforge_core::pipeline::{Engine, PipelineError};
use factforge_core::retrieval::KgSnapshot;
use factforge_core::{ConfigOverrides, PipelineConfig};

use crate::server;

#[derive(Debug, Parser)]
#[command(name = "factforge", version, about = "Fact-level verification and revision")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatchArg {
    Exact,
    Jaccard,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify a passage and write the report JSON.
    Verify {
        /// A text file, or a JSON Lines file of `{"id", "text"}` records.
        #[arg(long, conflicts_with = "text")]
        input: Option<PathBuf>,
        #[arg(long)]
        text: Option<String>,
        /// Pipeline config; defaults to the bundled demo fixtures.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// A contradicting single KG answer makes a fact Questionable outright.
        #[arg(long)]
        strict_step1: bool,
    },
    /// Propose rewrites for the Questionable facts of a report.
    Revise {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build gold instances by same-type entity substitution.
    Perturb {
        #[arg(long)]
        links: PathBuf,
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        aliases: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score system reports against gold instances.
    Eval {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long = "match", value_enum, default_value = "exact")]
        match_mode: MatchArg,
        /// Print the full report as JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Allowed browser origin; repeatable. None allows any origin.
        #[arg(long)]
        cors_origin: Vec<String>,
    },
    /// Run the bundled examples end to end.
    Demo {
        /// Also write the reports and revisions here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Backend(_) => 2,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_backend() || matches!(e, PipelineError::BudgetExhausted(_)) {
            CliError::Backend(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, content: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, content).map_err(|e| input_err(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(content.as_bytes())
            .map_err(|e| input_err(e.to_string())),
    }
}

fn load_engine(config: &Option<PathBuf>) -> Result<Engine, CliError> {
    let cfg = match config {
        Some(p) => PipelineConfig::load(p).map_err(input_err)?,
        None => PipelineConfig::demo(),
    };
    Engine::from_config(cfg).map_err(input_err)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

#[derive(Deserialize)]
struct InputRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
}

fn cmd_verify(
    input: &Option<PathBuf>,
    text: &Option<String>,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
    overrides: ConfigOverrides,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let engine = load_engine(config)?.with_overrides(&overrides)?;
    let records: Vec<InputRecord> = match (input, text) {
        (Some(p), _) if p.extension().is_some_and(|e| e == "jsonl") => {
            let mut recs: Vec<InputRecord> = read_jsonl(&read(p)?).map_err(input_err)?;
            for (i, r) in recs.iter_mut().enumerate() {
                r.id.get_or_insert_with(|| i.to_string());
            }
            recs
        }
        (Some(p), _) => vec![InputRecord {
            id: None,
            text: read(p)?,
        }],
        (None, Some(t)) => vec![InputRecord {
            id: None,
            text: t.clone(),
        }],
        (None, None) => return Err(input_err("one of --input or --text is required")),
    };
    let is_batch = input.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "jsonl"));
    let mut reports = Vec::new();
    for r in records {
        let mut report = engine.verify(&r.text)?;
        report.id = r.id;
        reports.push(report);
    }
    let content = if is_batch {
        write_jsonl(&reports)
    } else {
        to_json(&reports[0])
    };
    emit(out, &content, stdout)
}

fn cmd_revise(
    report: &Path,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let report: VerificationReport = serde_json::from_str(&read(report)?).map_err(input_err)?;
    let outcome = engine.revise(&report)?;
    emit(out, &to_json(&outcome), stdout)
}

fn cmd_perturb(
    links: &Path,
    kg: &Path,
    aliases: &Option<PathBuf>,
    seed: u64,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let snapshot = KgSnapshot::load(kg, aliases.as_deref()).map_err(input_err)?;
    let sentences: Vec<LinkedSentence> = read_jsonl(&read(links)?).map_err(input_err)?;
    let (instances, skipped) = perturb_corpus(&sentences, &snapshot, seed).map_err(input_err)?;
    if skipped > 0 {
        let _ = writeln!(stderr, "skipped {skipped} sentence(s) without an eligible link");
    }
    emit(out, &write_jsonl(&instances), stdout)
}

fn cmd_eval(
    system: &Path,
    gold: &Path,
    mode: MatchArg,
    json: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let reports = read_reports(&read(system)?).map_err(input_err)?;
    let gold: Vec<AnnotatedInstance> = read_jsonl(&read(gold)?).map_err(input_err)?;
    let config = match mode {
        MatchArg::Exact => MatchConfig::default(),
        MatchArg::Jaccard => MatchConfig::jaccard(),
    };
    let report = score(&reports, &gold, &config).map_err(input_err)?;
    let content = if json { to_json(&report) } else { report.to_table() };
    emit(&None, &content, stdout)
}

fn cmd_serve(config: &Option<PathBuf>, addr: &str, cors: &[String]) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Backend(e.to_string()))?;
    rt.block_on(server::serve(engine, addr, cors))
        .map_err(|e| CliError::Backend(e.to_string()))
}

fn cmd_demo(out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let engine = Engine::demo();
    let w = |stdout: &mut dyn Write, line: String| {
        let _ = writeln!(stdout, "{line}");
    };
    let mut reports = Vec::new();
    let mut revisions = Vec::new();
    for (i, passage) in demo::PASSAGES.iter().enumerate() {
        let mut report = engine.verify(passage)?;
        report.id = Some(format!("demo-{i}"));
        w(stdout, format!("> {passage}"));
        for (span, v) in report.passage_verdicts() {
            let evidence: Vec<String> = v
                .evidence
                .iter()
                .map(|e| format!("{} ({:?}, {:?})", e.evidence.triple.object, e.evidence.origin, e.classification))
                .collect();
            w(
                stdout,
                format!(
                    "  [{}] \"{}\" {}  evidence: {}",
                    v.label,
                    span.slice(&report.passage),
                    v.triple,
                    if evidence.is_empty() { "none".to_string() } else { evidence.join("; ") }
                ),
            );
        }
        if report.passage_verdicts().any(|(_, v)| v.label == VerdictLabel::Questionable) {
            let outcome = engine.revise(&report)?;
            for p in outcome.sentences.iter().flat_map(|s| &s.proposals) {
                w(stdout, format!("  revision: {}", p.revised));
            }
            outcome.apply_to(&mut report);
            revisions.push(outcome);
        }
        reports.push(report);
    }
    let answer = engine.ask(demo::ASK_QUERY).map_err(|e| CliError::Backend(e.to_string()))?;
    w(stdout, format!("ask: {} -> {}", demo::ASK_QUERY, answer));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(input_err)?;
        std::fs::write(dir.join("reports.jsonl"), write_jsonl(&reports)).map_err(input_err)?;
        std::fs::write(dir.join("revisions.json"), to_json(&revisions)).map_err(input_err)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Verify {
            input,
            text,
            config,
            out,
            top_k,
            strict_step1,
        } => {
            let overrides = ConfigOverrides {
                top_k: *top_k,
                strict_step1: strict_step1.then_some(true),
                ..Default::default()
            };
            cmd_verify(input, text, config, out, overrides, stdout)
        }
        Command::Revise { report, config, out } => cmd_revise(report, config, out, stdout),
        Command::Perturb {
            links,
            kg,
            aliases,
            seed,
            out,
        } => cmd_perturb(links, kg, aliases, *seed, out, stdout, stderr),
        Command::Eval {
            system,
            gold,
            match_mode,
            json,
        } => cmd_eval(system, gold, *match_mode, *json, stdout),
        Command::Serve {
            config,
            addr,
            cors_origin,
        } => cmd_serve(config, addr, cors_origin),
        Command::Demo { out } => cmd_demo(out, stdout),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
