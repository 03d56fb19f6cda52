//! `coq`: run the Chain-of-Questions pipeline, evaluate backends over a
//! benchmark, and build or inspect benchmark files.

mod config;
mod error;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coq_core::dataset::{self, read_records, SourceKind};
use coq_core::evaluation::{evaluate_with, render_report, EvalOutcome};
use coq_core::pipeline::{run_input, RunInput};
use coq_core::{AttachmentSet, EvalConfig, EvalReport, MatchRule, Modality, ModalitySet, ReportFormat};

use config::Settings;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "coq", version, about = "Chain-of-Questions runtime and evaluation harness")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; COQ_* variables and flags override it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Evaluation worker threads
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Maximum questions executed per prompt
    #[arg(long, global = true, value_name = "N")]
    pub question_cap: Option<usize>,
    /// How activated modalities are compared with gold: exact or subset
    #[arg(long, global = true, value_name = "RULE")]
    pub match_rule: Option<MatchRule>,
    /// Decoding seed forwarded to the backend
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// scripted:gold-following | scripted:silent | scripted:fixed:<task> |
    /// scripted:echo:<file> | remote:<url>
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend: Option<String>,
    /// greedy, sampling or beam
    #[arg(long, global = true, value_name = "STRATEGY")]
    pub decoding: Option<String>,
    /// Sampling temperature
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Beam width for beam search
    #[arg(long, global = true, value_name = "N")]
    pub beam_width: Option<u32>,
    /// Generation length limit
    #[arg(long, global = true, value_name = "N")]
    pub max_tokens: Option<u32>,
    /// Few-shot prompt file (instruction + exemplars)
    #[arg(long, global = true, value_name = "PATH")]
    pub fewshot: Option<PathBuf>,
    /// Keyword table for question-to-task mapping
    #[arg(long, global = true, value_name = "PATH")]
    pub keywords: Option<PathBuf>,
    /// Keyword match acceptance threshold in (0, 1]
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Directory that attachment references resolve against
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline once and print its trace as JSON
    Run(RunArgs),
    /// Evaluate a backend over a benchmark file
    Eval(EvalArgs),
    /// Build or inspect benchmark files
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Render report tables from outcome files
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Prompt text
    #[arg(long, conflicts_with = "record_file", required_unless_present = "record_file")]
    prompt: Option<String>,
    /// Benchmark JSONL file to take the record from
    #[arg(long, value_name = "PATH")]
    record_file: Option<PathBuf>,
    /// Record to run from --record-file (default: first)
    #[arg(long, requires = "record_file", value_name = "ID")]
    record_id: Option<String>,
    /// Attachment for --prompt, e.g. vision=scenes/a.json
    #[arg(long, value_name = "MODALITY=REF", conflicts_with = "record_file")]
    attach: Vec<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Benchmark JSONL file
    dataset: PathBuf,
    /// Where outcomes.jsonl, report.md and report.csv are written
    #[arg(long, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
    /// Model name shown in the report (default: backend id)
    #[arg(long)]
    label: Option<String>,
    /// Also write every run trace to this JSONL file
    #[arg(long, value_name = "PATH")]
    traces: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Merge source files into one benchmark, rejecting duplicate ids
    Build {
        /// Inputs as <source>=<path>, or a bare path whose rows carry their source
        #[arg(required = true, value_name = "[SOURCE=]PATH")]
        inputs: Vec<String>,
        /// Output file (default: stdout)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Per-source and per-gold-class counts
    Stats {
        path: PathBuf,
        /// Compare against the full benchmark's published counts
        #[arg(long)]
        check_reference: bool,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// outcomes.jsonl files, one per model
    #[arg(required = true)]
    outcomes: Vec<PathBuf>,
    /// Model names, in the same order as the files
    #[arg(long)]
    label: Vec<String>,
    /// markdown or csv
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&cli.global, args),
        Command::Eval(args) => cmd_eval(&cli.global, args),
        Command::Dataset(cmd) => cmd_dataset(cmd),
        Command::Report(args) => cmd_report(args),
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn parse_attachments(specs: &[String]) -> Result<AttachmentSet, CliError> {
    let mut set = AttachmentSet::new();
    for spec in specs {
        let (m, reference) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--attach expects MODALITY=REF, got `{spec}`")))?;
        let modality: Modality = m.parse().map_err(|e| CliError::Config(format!("--attach: {e}")))?;
        set.insert(modality, reference)
            .map_err(|e| CliError::Config(format!("--attach: {e}")))?;
    }
    Ok(set)
}

fn cmd_run(global: &GlobalArgs, args: RunArgs) -> Result<(), CliError> {
    let settings = Settings::resolve(global)?;
    let pipeline = settings.pipeline()?;
    let backend = settings.backend()?;

    let trace = if let Some(path) = &args.record_file {
        let ingested = read_records(path)?;
        let record = match &args.record_id {
            Some(id) => ingested.records.iter().find(|r| &r.id == id).ok_or_else(|| {
                CliError::Config(format!("record `{id}` not found in {}", path.display()))
            })?,
            None => ingested
                .records
                .first()
                .ok_or_else(|| CliError::Config(format!("{} has no records", path.display())))?,
        };
        let registry = settings.registry(&parent_dir(path))?;
        run_input(RunInput::from(record), backend.as_ref(), &registry, &pipeline)?
    } else {
        let prompt = args.prompt.unwrap_or_default();
        let attachments = parse_attachments(&args.attach)?;
        let registry = settings.registry(Path::new("."))?;
        let gold = ModalitySet::new();
        let input = RunInput {
            record_id: "prompt",
            prompt: &prompt,
            gold: &gold,
            attachments: &attachments,
        };
        run_input(input, backend.as_ref(), &registry, &pipeline)?
    };

    let json = serde_json::to_string_pretty(&trace).expect("trace serializes");
    println!("{json}");
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display(), e))
}

fn cmd_eval(global: &GlobalArgs, args: EvalArgs) -> Result<(), CliError> {
    let settings = Settings::resolve(global)?;
    let ingested = read_records(&args.dataset)?;
    let records = dataset::merge(vec![ingested.records])?.into_records();
    let backend = settings.backend()?;
    let registry = settings.registry(&parent_dir(&args.dataset))?;
    let config = EvalConfig {
        pipeline: settings.pipeline()?,
        workers: settings.workers,
        match_rule: settings.match_rule,
        label: args.label.clone(),
    };

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(args.out_dir.display(), e))?;
    let outcomes_path = args.out_dir.join("outcomes.jsonl");
    let mut outcomes = create(&outcomes_path)?;
    let mut traces = args.traces.as_deref().map(create).transpose()?;
    let mut write_err: Option<CliError> = None;

    let report = evaluate_with(&records, backend.as_ref(), &registry, &config, |_, trace, outcome| {
        if write_err.is_some() {
            return;
        }
        let mut line = serde_json::to_string(outcome).expect("outcome serializes");
        line.push('\n');
        if let Err(e) = outcomes.write_all(line.as_bytes()) {
            write_err = Some(CliError::io(outcomes_path.display(), e));
        }
        if let (Some(w), Ok(trace)) = (traces.as_mut(), trace) {
            let mut line = serde_json::to_string(trace).expect("trace serializes");
            line.push('\n');
            if let Err(e) = w.write_all(line.as_bytes()) {
                write_err = Some(CliError::io("trace file", e));
            }
        }
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(err) = write_err {
        return Err(err);
    }
    outcomes.flush().map_err(|e| CliError::io(outcomes_path.display(), e))?;
    if let Some(mut w) = traces {
        w.flush().map_err(|e| CliError::io("trace file", e))?;
    }

    let reports = [report];
    let md = render_report(&reports, ReportFormat::Markdown);
    let csv = render_report(&reports, ReportFormat::Csv);
    for (name, body) in [("report.md", &md), ("report.csv", &csv)] {
        let path = args.out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(path.display(), e))?;
    }
    print!("{md}");
    if reports[0].failed_count > 0 {
        eprintln!(
            "warning: {} of {} records failed and were counted as mismatched/not asked",
            reports[0].failed_count,
            reports[0].total()
        );
    }
    Ok(())
}

fn cmd_dataset(cmd: DatasetCommand) -> Result<(), CliError> {
    match cmd {
        DatasetCommand::Build { inputs, out } => {
            let mut parts = Vec::with_capacity(inputs.len());
            for input in &inputs {
                let ingested = match input.split_once('=') {
                    Some((kind, path)) if kind.parse::<SourceKind>().is_ok() => {
                        dataset::ingest_source(Path::new(path), kind.parse().expect("checked"))?
                    }
                    _ => read_records(Path::new(input))?,
                };
                for w in &ingested.warnings {
                    eprintln!("warning: {w}");
                }
                parts.push(ingested.records);
            }
            let merged = dataset::merge(parts)?;
            match &out {
                Some(path) => {
                    let w = create(path)?;
                    merged.write_jsonl(w).map_err(|e| CliError::io(path.display(), e))?;
                }
                None => merged
                    .write_jsonl(std::io::stdout().lock())
                    .map_err(|e| CliError::io("stdout", e))?,
            }
            eprintln!("{} records from {} file(s)", merged.len(), inputs.len());
            Ok(())
        }
        DatasetCommand::Stats {
            path,
            check_reference,
            json,
        } => {
            let ingested = read_records(&path)?;
            let stats = dataset::merge(vec![ingested.records])?.stats();
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print!("{}", stats.render());
            }
            if check_reference {
                let mismatches = stats.reference_mismatches();
                if mismatches.is_empty() {
                    println!("reference counts: ok");
                } else {
                    for m in &mismatches {
                        println!("reference mismatch: {m}");
                    }
                    return Err(CliError::Config("dataset does not match the reference counts".into()));
                }
            }
            Ok(())
        }
    }
}

fn read_outcomes(path: &Path) -> Result<Vec<EvalOutcome>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path.display(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str(&line).map_err(|e| {
            CliError::Config(format!("{}: line {}: {e}", path.display(), n + 1))
        })?;
        out.push(outcome);
    }
    Ok(out)
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    if !args.label.is_empty() && args.label.len() != args.outcomes.len() {
        return Err(CliError::Config(format!(
            "{} label(s) for {} outcome file(s)",
            args.label.len(),
            args.outcomes.len()
        )));
    }
    let mut reports = Vec::with_capacity(args.outcomes.len());
    for (i, path) in args.outcomes.iter().enumerate() {
        let outcomes = read_outcomes(path)?;
        let label = args
            .label
            .get(i)
            .cloned()
            .unwrap_or_else(|| path.display().to_string());
        reports.push(EvalReport::from_outcomes(label, &outcomes));
    }
    print!("{}", render_report(&reports, args.format));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EXIT_USAGE;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn attachment_specs() {
        let set = parse_attachments(&["vision=a.json".into(), "audio=b.json".into()]).unwrap();
        assert_eq!(set.get(Modality::Vision), Some("a.json"));
        assert!(parse_attachments(&["text=a".into()]).is_err());
        assert!(parse_attachments(&["smell=a".into()]).is_err());
        assert!(parse_attachments(&["vision".into()]).is_err());
    }

    #[test]
    fn usage_exit_code() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_USAGE);
    }
}
