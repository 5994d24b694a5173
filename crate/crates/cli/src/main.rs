use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use geoprover_core::diagram::{build_graph, load_diagram};
use geoprover_core::disambiguation::{verify, PromptStyle};
use geoprover_core::formal::Literal;
use geoprover_core::harness::{
    ablate, build_predictor_store, http_config, load_manifest, run_batch, run_problem, PredictorBackend, ProblemRecord,
    RectifierBackend, RunConfig,
};
use geoprover_core::text::parse_text;

#[derive(Parser)]
#[command(name = "geoprover", version, about = "Solve geometry problems from text and a parsed diagram")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the propositions and target parsed from problem text.
    Parse { prose: String },
    /// Check a literal against a diagram with the three verifier heuristics.
    Verify { literal: String, diagram: PathBuf },
    /// Run one problem record and print its result with the full trace.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every problem of a manifest and write a report.
    Bench {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the ablation grid over a manifest and write one combined report.
    Ablate {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build a canned predictor store from the manifest's reference schedules.
    PredictorStore { manifest: PathBuf, out: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum RectifierArg {
    Http,
    Canned,
    Heuristic,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Http,
    Canned,
    Traversal,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "heuristic")]
    backend_rectifier: RectifierArg,
    #[arg(long, value_enum, default_value = "canned")]
    backend_predictor: PredictorArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    no_verifier: bool,
    #[arg(long)]
    no_disambiguation: bool,
    /// Solve by traversal only.
    #[arg(long)]
    no_prediction: bool,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    api_key_env: Option<String>,
    /// Reply store for the canned or replay rectifier.
    #[arg(long)]
    rectifier_store: Option<PathBuf>,
    /// Reply store for the canned predictor; defaults to predictor_store.json beside the input.
    #[arg(long)]
    predictor_store: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_rounds: usize,
    #[arg(long, default_value_t = geoprover_core::reasoner::DEFAULT_BUDGET)]
    budget: usize,
    /// Use the single kind-independent rectifier prompt.
    #[arg(long)]
    general_prompt: bool,
    #[arg(long, default_value = "geoprover-out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self, input: &Path) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::new(self.seed);
        cfg.rectifier = match self.backend_rectifier {
            RectifierArg::Http => RectifierBackend::Http,
            RectifierArg::Canned => RectifierBackend::Canned,
            RectifierArg::Heuristic => RectifierBackend::Heuristic,
            RectifierArg::Replay => RectifierBackend::Replay,
        };
        cfg.predictor = match self.backend_predictor {
            PredictorArg::Http => PredictorBackend::Http,
            PredictorArg::Canned => PredictorBackend::Canned,
            PredictorArg::Traversal => PredictorBackend::Traversal,
        };
        cfg.disambiguation_on = !self.no_disambiguation;
        cfg.verifier_on = !self.no_verifier;
        cfg.predictor_on = !self.no_prediction;
        cfg.max_rounds = self.max_rounds;
        cfg.budget = self.budget;
        cfg.prompt_style = if self.general_prompt { PromptStyle::General } else { PromptStyle::Specific };
        cfg.rectifier_store = self.rectifier_store.clone();
        cfg.predictor_store = self.predictor_store.clone().or_else(|| {
            let beside = input.parent().unwrap_or(Path::new(".")).join("predictor_store.json");
            beside.exists().then_some(beside)
        });
        cfg.out = Some(self.out.clone());
        let wants_http = matches!(cfg.rectifier, RectifierBackend::Http) || matches!(cfg.predictor, PredictorBackend::Http);
        if wants_http {
            match (&self.endpoint, &self.model) {
                (Some(e), Some(m)) => cfg.http = Some(http_config(e, m, self.api_key_env.as_deref())),
                _ => return Err("http backends need --endpoint and --model".into()),
            }
        }
        if self.budget == 0 || self.max_rounds == 0 {
            return Err("--budget and --max-rounds must be at least 1".into());
        }
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let usage = |e: String| Failure::Usage(e);
    let fail = |e: String| Failure::Run(e);
    match cli.command {
        Command::Parse { prose } => {
            let p = parse_text(&prose).map_err(|e| fail(e.to_string()))?;
            for lit in &p.propositions {
                println!("{lit}");
            }
            println!("{}", p.target);
            Ok(true)
        }
        Command::Verify { literal, diagram } => {
            let lit = Literal::parse(&literal).map_err(|e| usage(e.to_string()))?;
            let d = load_diagram(&diagram).map_err(|e| fail(e.to_string()))?;
            let report = verify(lit.term(), &d, &build_graph(&d));
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(true)
        }
        Command::Solve { problem, run } => {
            let cfg = run.config(&problem).map_err(usage)?;
            let text = std::fs::read_to_string(&problem).map_err(|e| fail(format!("{}: {e}", problem.display())))?;
            let mut rec: ProblemRecord = serde_json::from_str(&text).map_err(|e| fail(format!("{}: {e}", problem.display())))?;
            rec.validate().map_err(|e| fail(e.to_string()))?;
            if rec.diagram.is_relative() {
                rec.diagram = problem.parent().unwrap_or(Path::new(".")).join(&rec.diagram);
            }
            let clients = cfg.clients().map_err(|e| usage(e.to_string()))?;
            let result = run_problem(&rec, &cfg, &clients);
            println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
            Ok(result.status != "error")
        }
        Command::Bench { manifest, run } => {
            let cfg = run.config(&manifest).map_err(usage)?;
            let (report, results) = run_batch(&manifest, &cfg).map_err(|e| match e {
                geoprover_core::harness::HarnessError::Client(c) => usage(c.to_string()),
                other => fail(other.to_string()),
            })?;
            report.write(&results, &run.out).map_err(|e| fail(e.to_string()))?;
            print!("{}", report.summary());
            Ok(results.iter().all(|r| r.status != "error"))
        }
        Command::Ablate { manifest, run } => {
            let cfg = run.config(&manifest).map_err(usage)?;
            let records = load_manifest(&manifest).map_err(|e| fail(e.to_string()))?;
            let report = ablate(&records, &cfg).map_err(|e| match e {
                geoprover_core::harness::HarnessError::Client(c) => usage(c.to_string()),
                other => fail(other.to_string()),
            })?;
            report.write(&run.out).map_err(|e| fail(e.to_string()))?;
            print!("{}", report.summary());
            Ok(true)
        }
        Command::PredictorStore { manifest, out } => {
            let records = load_manifest(&manifest).map_err(|e| fail(e.to_string()))?;
            let store = build_predictor_store(&records, 3).map_err(|e| fail(e.to_string()))?;
            store.save(&out).map_err(|e| fail(e.to_string()))?;
            println!("{} entries written to {}", store.len(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
    }
}
