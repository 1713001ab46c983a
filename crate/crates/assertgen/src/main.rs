use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use assertgen::analyzer::{mine_project, MineOptions};
use assertgen::config::{LlmMode, RunConfig};
use assertgen::core::dialogue::ChatBackend;
use assertgen::core::model::GenerationRecord;
use assertgen::core::prompt::TemplateSet;
use assertgen::harness::{ProjectRoots, PytestExecutor};
use assertgen::llm::{LiveBackend, RecordingBackend, ReplayBackend};
use assertgen::pipeline::{run_pipeline, Filters, PipelineOptions};
use assertgen::report::{render_table, summary_rows, SummaryRow};
use assertgen::store::{read_dataset, read_jsonl, write_jsonl};
use assertgen::{evaluate, load_table, load_templates};

#[derive(Parser)]
#[command(name = "assertgen", version, about = "Generate and score assert statements for Python unit tests")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mine a project checkout into a dataset of test-assert entries.
    Mine {
        root: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Project name; defaults to the root directory name.
        #[arg(long)]
        project: Option<String>,
        #[arg(long)]
        revision: Option<String>,
        /// Also write rejected-entry diagnostics here.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long, default_value_t = assertgen::analyzer::DEFAULT_MAX_PROMPT_CHARS)]
        max_prompt_chars: usize,
    },
    /// Generate asserts for every dataset entry.
    Generate {
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Config override, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_parser = ["live", "record", "replay"])]
        mode: Option<String>,
        /// Replay or record file.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// `PATH` for every project or `NAME=PATH` for one; defaults to the current directory.
        #[arg(long = "project-root", value_name = "[NAME=]PATH")]
        project_roots: Vec<String>,
        /// `project=NAME`, `asserts=single|multi` or `flavor=keyword|library`; repeatable.
        #[arg(long = "filter", value_name = "KEY=VALUE")]
        filters: Vec<String>,
        /// Skip entries already in the output file.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a results file against its dataset.
    Evaluate {
        results: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Equivalence table file; the bundled one by default.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_parser = ["char", "token"])]
        lcs_unit: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print a summary file as a table.
    Report {
        summary: PathBuf,
        #[arg(long = "filter", value_name = "KEY=VALUE")]
        filters: Vec<String>,
    },
}

enum Failure {
    User(anyhow::Error),
    Pipeline(anyhow::Error),
}

trait Classify<T> {
    fn user(self) -> Result<T, Failure>;
    fn pipeline(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into()))
    }
    fn pipeline(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Pipeline(e.into()))
    }
}

fn parse_filters(specs: &[String]) -> Result<Filters, Failure> {
    let mut f = Filters::default();
    for s in specs {
        f.add(s).map_err(|e| Failure::User(anyhow!(e)))?;
    }
    Ok(f)
}

fn parse_roots(specs: &[String]) -> ProjectRoots {
    let mut roots = ProjectRoots::default();
    for s in specs {
        match s.split_once('=') {
            Some((name, path)) => {
                roots.named.insert(name.to_string(), PathBuf::from(path));
            }
            None => roots.default = Some(PathBuf::from(s)),
        }
    }
    if roots.default.is_none() {
        roots.default = Some(PathBuf::from("."));
    }
    roots
}

fn mine(
    root: &Path,
    out: &Path,
    project: Option<String>,
    revision: Option<String>,
    diagnostics: Option<&Path>,
    max_prompt_chars: usize,
) -> Result<(), Failure> {
    let project = project
        .or_else(|| {
            root.canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        })
        .unwrap_or_else(|| "project".into());
    let opts = MineOptions { project, revision, max_prompt_chars };
    let outcome = mine_project(root, &opts)
        .with_context(|| format!("cannot read {}", root.display()))
        .user()?;
    let mut log_lines = String::new();
    for d in &outcome.diagnostics {
        log::warn!("{d}");
        log_lines.push_str(&format!("{d}\n"));
    }
    if let Some(p) = diagnostics {
        std::fs::write(p, log_lines).with_context(|| p.display().to_string()).pipeline()?;
    }
    write_jsonl(out, &outcome.entries).pipeline()?;
    println!(
        "{}: single / multi / total = {} / {} / {}",
        opts.project,
        outcome.single_count(),
        outcome.multi_count(),
        outcome.entries.len()
    );
    if outcome.entries.is_empty() {
        return Err(Failure::Pipeline(anyhow!("no test-assert entries found under {}", root.display())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    dataset: &Path,
    out: &Path,
    config: Option<&Path>,
    overrides: &[String],
    mode: Option<&str>,
    replay: Option<PathBuf>,
    project_roots: &[String],
    filters: &[String],
    resume: bool,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p).user()?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(overrides.iter().map(String::as_str)).user()?;
    if let Some(m) = mode {
        cfg.set("llm.mode", m).user()?;
    }
    if let Some(r) = replay {
        cfg.replay_path = Some(r);
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    cfg.validate().user()?;
    let templates = match &cfg.template_dir {
        Some(dir) => load_templates(dir).user()?,
        None => TemplateSet::default(),
    };
    let entries = read_dataset(dataset).user()?;
    let opts = PipelineOptions {
        filters: parse_filters(filters)?,
        resume,
        workers: cfg.workers,
        templates,
        generation: cfg.generation(),
    };
    let roots = parse_roots(project_roots);
    let runner = cfg.runner();
    let make_executor = || PytestExecutor::new(roots.clone(), runner.clone());

    let live = || -> Result<LiveBackend, Failure> {
        let key = cfg.api_key().user()?;
        LiveBackend::new(&cfg.endpoint, key, std::time::Duration::from_secs(cfg.request_timeout_s)).user()
    };
    let stats = match cfg.mode {
        LlmMode::Replay => {
            let path = cfg.replay_path.as_deref().expect("validated");
            let backend = ReplayBackend::load(path).user()?;
            run(&entries, out, &backend, make_executor, &opts)?
        }
        LlmMode::Live => run(&entries, out, &live()?, make_executor, &opts)?,
        LlmMode::Record => {
            let path = cfg.replay_path.as_deref().expect("validated");
            let backend = RecordingBackend::create(live()?, path)
                .with_context(|| path.display().to_string())
                .user()?;
            run(&entries, out, &backend, make_executor, &opts)?
        }
    };
    let statuses: Vec<String> = stats.by_status.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!(
        "wrote {} records ({} already done, {} filtered out) {}",
        stats.written,
        stats.already_done,
        stats.filtered_out,
        statuses.join(" ")
    );
    Ok(())
}

fn run<B: ChatBackend + Sync>(
    entries: &[assertgen::core::model::TestAssertEntry],
    out: &Path,
    backend: &B,
    make_executor: impl Fn() -> PytestExecutor + Sync,
    opts: &PipelineOptions,
) -> Result<assertgen::pipeline::PipelineStats, Failure> {
    run_pipeline(entries, out, backend, make_executor, opts).pipeline()
}

fn evaluate_cmd(
    results: &Path,
    dataset: &Path,
    table: Option<&Path>,
    lcs_unit: Option<&str>,
    out: &Path,
) -> Result<(), Failure> {
    let records: Vec<GenerationRecord> = read_jsonl(results).user()?;
    let entries = read_dataset(dataset).user()?;
    let table = load_table(table).user()?;
    let unit = lcs_unit.map_or(Ok(Default::default()), str::parse).map_err(|e: String| Failure::User(anyhow!(e)))?;
    let summary = evaluate(&records, &entries, &table, unit);
    if summary.skipped > 0 {
        log::warn!("{} records had no dataset entry", summary.skipped);
    }
    let rows = summary_rows(&summary);
    write_jsonl(out, &rows).pipeline()?;
    print!("{}", render_table(&rows, &Filters::default()));
    Ok(())
}

fn report(summary: &Path, filters: &[String]) -> Result<(), Failure> {
    let rows: Vec<SummaryRow> = read_jsonl(summary).user()?;
    let filters = parse_filters(filters)?;
    print!("{}", render_table(&rows, &filters));
    std::io::stdout().flush().pipeline()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Mine { root, out, project, revision, diagnostics, max_prompt_chars } => {
            mine(&root, &out, project, revision, diagnostics.as_deref(), max_prompt_chars)
        }
        Cmd::Generate {
            dataset,
            out,
            config,
            overrides,
            mode,
            replay,
            project_roots,
            filters,
            resume,
            workers,
        } => generate(
            &dataset,
            &out,
            config.as_deref(),
            &overrides,
            mode.as_deref(),
            replay,
            &project_roots,
            &filters,
            resume,
            workers,
        ),
        Cmd::Evaluate { results, dataset, table, lcs_unit, out } => {
            evaluate_cmd(&results, &dataset, table.as_deref(), lcs_unit.as_deref(), &out)
        }
        Cmd::Report { summary, filters } => report(&summary, &filters),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
