use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geoscript_core::eval::EvalReport;
use geoscript_core::registry::{mock::serve_request, render_prompt_catalog, MockConfig};

use geoscript_service::app::{App, QueryRequest, QueryResponse};
use geoscript_service::config::{BackendKind, ServiceConfig};
use geoscript_service::evaluate::{self, ToolTask};
use geoscript_service::store::RunStore;
use geoscript_service::{api, fixtures};

#[derive(Parser)]
#[command(name = "geoscript", version, about = "Answer geospatial questions with generated tool scripts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "GEOSCRIPT_PORT")]
        port: Option<u16>,
    },
    /// Answer one query and print the run.
    Query {
        #[arg(long)]
        text: String,
        /// Image or scene files available to `get_uploaded_image_path`.
        #[arg(long = "attach")]
        attach: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Inspect the tool registry.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
    /// Inspect logged runs.
    Runs {
        #[command(subcommand)]
        command: RunsCommand,
    },
    /// Evaluation at the final-answer, tool and LLM levels.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Serve one mock model-tool request: JSON on stdin, JSON on stdout.
    MockTool {
        #[arg(long, env = "GEOSCRIPT_GPU_MEMORY_MIB")]
        gpu_memory_mib: Option<f64>,
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
    },
    /// Regenerate the fixture tree.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ToolsCommand {
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum RunsCommand {
    Show { id: String },
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Scripted,
    Remote,
}

#[derive(Args)]
struct FinalArgs {
    #[arg(long = "dataset", required = true)]
    dataset: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Backend::Scripted)]
    backend: Backend,
    /// Scripted completions; defaults to completions.json next to the first dataset's parent.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Scene catalog index; defaults to scenes/index.json next to the first dataset's parent.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Directory for the run records.
    #[arg(long)]
    runs_out: Option<PathBuf>,
    /// Write the report JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Run question sets end to end and score the final answers.
    Final(FinalArgs),
    /// Score one tool's predictions against ground truth.
    Tools {
        #[arg(long, value_enum)]
        task: ToolTask,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Dataset label for the report row.
        #[arg(long, default_value = "fixture")]
        set: String,
    },
    /// Execution-success and code-validity rates over logged runs.
    Llm {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve { port } => {
            let mut config = ServiceConfig::from_env()?;
            if let Some(p) = port {
                config.port = p;
            }
            let app = Arc::new(App::new(config)?);
            tokio::runtime::Runtime::new()?.block_on(api::serve(app))
        }
        Command::Query { text, attach, json } => {
            let app = App::new(ServiceConfig::from_env()?)?;
            let req = QueryRequest {
                query: text,
                ..Default::default()
            };
            let record = app.run_with_files(&req, attach)?;
            let resp = QueryResponse::of(&record);
            if json {
                println!("{}", serde_json::to_string_pretty(&resp)?);
            } else {
                println!("run {}", resp.run_id);
                println!("--- code ---\n{}", resp.code.trim_end());
                println!("--- output ---");
                for line in &resp.output {
                    println!("{line}");
                }
                println!("--- outcome ---\n{}", serde_json::to_string(&resp.outcome)?);
            }
            if !record.outcome.is_success() {
                std::process::exit(2);
            }
            Ok(())
        }
        Command::Tools {
            command: ToolsCommand::List { json },
        } => {
            let reg = ServiceConfig::from_env()?.registry()?;
            if json {
                let specs: Vec<_> = reg.specs().collect();
                println!("{}", serde_json::to_string_pretty(&specs)?);
            } else {
                print!("{}", render_prompt_catalog(&reg));
            }
            Ok(())
        }
        Command::Runs { command } => {
            let store = RunStore::new(ServiceConfig::from_env()?.runs_dir);
            match command {
                RunsCommand::Show { id } => {
                    let bytes = store.read_bytes(&id).with_context(|| format!("no run {id}"))?;
                    std::io::stdout().write_all(&bytes)?;
                }
                RunsCommand::List => {
                    for s in store.list() {
                        println!("{}\t{}\t{}\t{}", s.id, s.status, s.answer.unwrap_or_default(), s.query);
                    }
                }
            }
            Ok(())
        }
        Command::Eval { command } => eval(command),
        Command::MockTool {
            gpu_memory_mib,
            delay_ms,
        } => {
            let mut config = MockConfig {
                delay: Duration::from_millis(delay_ms),
                ..MockConfig::default()
            };
            if let Some(mib) = gpu_memory_mib {
                config.gpu_memory_mib = (mib > 0.0).then_some(mib);
            }
            let mut input = Vec::new();
            std::io::stdin().read_to_end(&mut input)?;
            let resp = serve_request(&input, &config);
            println!("{}", serde_json::to_string(&resp)?);
            Ok(())
        }
        Command::Fixtures { out } => {
            let g = fixtures::generate(&out)?;
            println!("wrote {} files, {} questions to {}", g.files.len(), g.questions, out.display());
            Ok(())
        }
    }
}

fn eval(command: EvalCommand) -> anyhow::Result<()> {
    match command {
        EvalCommand::Final(a) => {
            let root = a
                .dataset
                .first()
                .and_then(|d| d.parent())
                .and_then(|d| d.parent())
                .map(PathBuf::from)
                .unwrap_or_default();
            let mut config = ServiceConfig::from_env()?;
            config.backend = match a.backend {
                Backend::Scripted => BackendKind::Scripted(a.fixtures.unwrap_or_else(|| root.join("completions.json"))),
                Backend::Remote => BackendKind::Remote,
            };
            config.catalog = a.catalog.or_else(|| {
                let p = root.join("scenes/index.json");
                p.is_file().then_some(p)
            });
            let questions = evaluate::load_questions(&a.dataset)?;
            let reg = config.registry()?;
            let controller = config.controller()?;
            let store = a.runs_out.map(RunStore::new);
            let fa = evaluate::final_answers(
                &questions,
                &reg,
                &controller,
                config.scenes()?,
                store.as_ref(),
                a.parallelism,
            )?;
            for v in &fa.questions {
                println!(
                    "{}\t{}\t{}\texpected={}\tactual={}",
                    v.id,
                    if v.correct { "correct" } else { "wrong" },
                    v.scenario.name(),
                    v.expected,
                    v.actual.as_deref().unwrap_or("-")
                );
            }
            let report = EvalReport {
                llm_level: geoscript_core::eval::eval_llm_level(&fa.records).ok(),
                final_answers: Some(fa),
                ..Default::default()
            };
            print!("{}", report.render_table());
            if let Some(out) = a.out {
                std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            Ok(())
        }
        EvalCommand::Tools { task, pred, truth, set } => {
            let t = evaluate::tool_level(task, &pred, &truth, &set)?;
            let report = EvalReport {
                tool_level: Some(t),
                ..Default::default()
            };
            print!("{}", report.render_table());
            Ok(())
        }
        EvalCommand::Llm { runs } => {
            if !runs.is_dir() {
                bail!("{} is not a directory", runs.display());
            }
            let l = evaluate::llm_level(&runs)?;
            let report = EvalReport {
                llm_level: Some(l),
                ..Default::default()
            };
            print!("{}", report.render_table());
            Ok(())
        }
    }
}
