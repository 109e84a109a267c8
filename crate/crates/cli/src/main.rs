//! `gui-agent` command line: evaluation runs, demonstration capture and
//! augmentation, dataset builds, cassette replay, and prompt inspection.
//!
//! Exit codes: 0 success, 1 usage error, 2 infrastructure error, 3 invariant
//! violation (an episode aborted on an internal error).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gui_agent_core::action::validate;
use gui_agent_core::dataset::{
    augment_dataset, capture_screens, export_dataset, AugmentConfig, MaskOptions,
};
use gui_agent_core::demo::{augment_rationales, script_demo, DemoStore};
use gui_agent_core::env::SimEnv;
use gui_agent_core::eval::{run_eval, Backend, EvalConfig, EvalError};
use gui_agent_core::executor::{execute_command, EpisodeConfig};
use gui_agent_core::gateway::{ChatResponse, Gateway, HttpGateway, ScriptedGateway};
use gui_agent_core::prompt::{build_action_prompt, select_demos, GuidelineSet};
use gui_agent_core::rng::SplitMix64;
use gui_agent_core::splits;
use gui_agent_core::ActionRecord;

#[derive(Parser)]
#[command(name = "gui-agent", version, about = "GUI automation agent harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evaluation matrix and write report + transcripts.
    RunEval(EvalArgs),
    /// Re-run an evaluation from a recorded cassette (`--cassette`).
    Replay(EvalArgs),
    /// Record oracle demonstrations to a demos directory.
    RecordDemos(RecordDemosArgs),
    /// Attach model-generated rationales to recorded demonstrations.
    AugmentDemos(AugmentDemosArgs),
    /// Rasterize screens, annotations, masks, and augmented copies.
    BuildDataset(BuildDatasetArgs),
    /// Print the prompt the agent would send for a given episode round.
    ShowPrompt(ShowPromptArgs),
}

// ---------------------------------------------------------------------------
// run-eval / replay
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Default)]
struct EvalArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task families (comma separated). Default: all registered families.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Explicit seeds (comma separated); overrides --episodes-per-task.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Episodes per task, using seeds 0..N from the test split.
    #[arg(long)]
    episodes_per_task: Option<u64>,
    /// Gateway backend: http, scripted, replay, or record.
    #[arg(long)]
    backend: Option<String>,
    /// OpenAI-compatible endpoint URL (http/record backends).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent with each request.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key (the key itself is never a
    /// flag or file value).
    #[arg(long)]
    api_key_env: Option<String>,
    /// Cassette path (replay input / record output).
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Maximum proposal rounds per episode.
    #[arg(long)]
    max_rounds: Option<u32>,
    /// Demos directory produced by record-demos / augment-demos.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Ablation: omit demonstrations from prompts.
    #[arg(long)]
    no_demos: bool,
    /// Ablation: omit the step-by-step instruction block.
    #[arg(long)]
    no_cot: bool,
    /// Ablation: strip rationales from demonstrations.
    #[arg(long)]
    action_only_demos: bool,
    /// Worker parallelism.
    #[arg(long)]
    parallel: Option<usize>,
    /// Output directory for report and transcripts.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Values read from --config; every field optional, flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    tasks: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    episodes_per_task: Option<u64>,
    backend: Option<String>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    cassette: Option<PathBuf>,
    max_rounds: Option<u32>,
    demos: Option<PathBuf>,
    no_demos: Option<bool>,
    no_cot: Option<bool>,
    action_only_demos: Option<bool>,
    parallel: Option<usize>,
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Infrastructure(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Infrastructure(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infrastructure(m) | Failure::Invariant(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn infra(e: impl std::fmt::Display) -> Failure {
    Failure::Infrastructure(e.to_string())
}

fn build_eval_config(args: &EvalArgs, forced_backend: Option<&str>) -> Result<EvalConfig, Failure> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| infra(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&body).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let families = args
        .tasks
        .clone()
        .or(file.tasks)
        .unwrap_or_else(|| SimEnv::families().iter().map(|f| f.to_string()).collect());
    let seeds = match args.seeds.clone().or(file.seeds) {
        Some(seeds) => seeds,
        None => {
            let n = args.episodes_per_task.or(file.episodes_per_task).unwrap_or(50);
            (splits::TEST_SEEDS.start..splits::TEST_SEEDS.start + n).collect()
        }
    };

    let cassette = args.cassette.clone().or(file.cassette);
    let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out"));
    let name = forced_backend
        .map(str::to_string)
        .or_else(|| args.backend.clone())
        .or(file.backend)
        .unwrap_or_else(|| "scripted".to_string());
    let backend = match name.as_str() {
        "scripted" => Backend::Scripted,
        "http" => Backend::Http,
        "replay" => Backend::Replay {
            cassette: cassette
                .clone()
                .ok_or_else(|| usage("replay requires --cassette"))?,
        },
        "record" => Backend::Record {
            cassette: cassette.clone().unwrap_or_else(|| out.join("cassette.json")),
        },
        other => return Err(usage(format!("unknown backend `{other}`"))),
    };

    let mut episode = EpisodeConfig::default();
    if let Some(rounds) = args.max_rounds.or(file.max_rounds) {
        if rounds == 0 {
            return Err(usage("--max-rounds must be at least 1"));
        }
        episode.max_rounds = rounds;
    }
    if let Some(model) = args.model.clone().or(file.model) {
        episode.model = model;
    }
    episode.no_demos = args.no_demos || file.no_demos.unwrap_or(false);
    episode.no_cot = args.no_cot || file.no_cot.unwrap_or(false);
    episode.strip_rationales = args.action_only_demos || file.action_only_demos.unwrap_or(false);

    let parallelism = args.parallel.or(file.parallel).unwrap_or(1);
    if parallelism == 0 {
        return Err(usage("--parallel must be at least 1"));
    }

    Ok(EvalConfig {
        families,
        seeds,
        episode,
        backend,
        endpoint: args.endpoint.clone().or(file.endpoint),
        api_key_env: args.api_key_env.clone().or(file.api_key_env),
        demo_dir: args.demos.clone().or(file.demos),
        parallelism,
        out_dir: Some(out),
    })
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::EmptyReport => usage("nothing to evaluate: empty family or seed set"),
        EvalError::Infrastructure(m) => Failure::Infrastructure(m),
    }
}

fn cmd_run_eval(args: &EvalArgs, forced_backend: Option<&str>) -> Result<(), Failure> {
    let config = build_eval_config(args, forced_backend)?;
    let report = run_eval(&config).map_err(eval_failure)?;
    print!("{}", report.to_text());
    if let Some(out) = &config.out_dir {
        eprintln!("report written to {}", out.join("report.json").display());
    }
    if report.internal_errors > 0 {
        return Err(Failure::Invariant(format!(
            "{} episode(s) aborted on internal invariant violations; see transcripts",
            report.internal_errors
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// record-demos / augment-demos
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RecordDemosArgs {
    /// Task families (comma separated). Default: all registered families.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Demonstrations recorded per family.
    #[arg(long, default_value_t = 2)]
    per_family: u64,
    /// First seed to use (seeds count up from here).
    #[arg(long, default_value_t = splits::DEMO_SEEDS.start)]
    seed_start: u64,
    /// Allow seeds outside the demonstration split.
    #[arg(long)]
    allow_any_seed: bool,
    /// Output demos directory.
    #[arg(long, default_value = "demos")]
    out: PathBuf,
}

fn cmd_record_demos(args: &RecordDemosArgs) -> Result<(), Failure> {
    let families = args
        .tasks
        .clone()
        .unwrap_or_else(|| SimEnv::families().iter().map(|f| f.to_string()).collect());
    let mut store = DemoStore::empty();
    for family in &families {
        for i in 0..args.per_family {
            let seed = args.seed_start + i;
            let demo = script_demo(family, seed, !args.allow_any_seed).map_err(infra)?;
            store.push(demo);
        }
    }
    store.save(&args.out).map_err(infra)?;
    println!(
        "recorded {} demonstrations across {} families into {}",
        store.len(),
        families.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct AugmentDemosArgs {
    /// Demos directory to read (written by record-demos).
    #[arg(long, default_value = "demos")]
    demos: PathBuf,
    /// Where to write augmented demos (defaults to in-place).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gateway backend: http or scripted.
    #[arg(long, default_value = "http")]
    backend: String,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4-0125")]
    model: String,
    #[arg(long)]
    api_key_env: Option<String>,
    /// JSON array of canned rationale texts (scripted backend).
    #[arg(long)]
    script_file: Option<PathBuf>,
}

fn cmd_augment_demos(args: &AugmentDemosArgs) -> Result<(), Failure> {
    let store = DemoStore::load(&args.demos).map_err(infra)?;
    let gateway: Box<dyn Gateway> = match args.backend.as_str() {
        "http" => {
            let endpoint = args
                .endpoint
                .as_deref()
                .ok_or_else(|| usage("--backend http requires --endpoint"))?;
            let api_key = match &args.api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    infra(format!("api key environment variable `{var}` is not set"))
                })?),
                None => None,
            };
            Box::new(HttpGateway::new(endpoint, api_key))
        }
        "scripted" => {
            let path = args
                .script_file
                .as_ref()
                .ok_or_else(|| usage("--backend scripted requires --script-file"))?;
            let body = std::fs::read_to_string(path)
                .map_err(|e| infra(format!("{}: {e}", path.display())))?;
            let texts: Vec<String> = serde_json::from_str(&body)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Box::new(ScriptedGateway::sequence(
                texts.into_iter().map(ChatResponse::from_text).collect(),
            ))
        }
        other => return Err(usage(format!("unknown backend `{other}` (http or scripted)"))),
    };

    let mut demo_list = Vec::new();
    for family in SimEnv::families() {
        for demo in store.demos_for(family) {
            demo_list.push(demo.clone());
        }
    }
    let mut augmented = DemoStore::empty();
    let mut failures = 0usize;
    for demo in &demo_list {
        let report = augment_rationales(demo, gateway.as_ref(), &args.model);
        for (step, error) in &report.failures {
            eprintln!("{}-{} step {step}: {error}", demo.family, demo.seed);
        }
        failures += report.failures.len();
        augmented.push(report.demo);
    }
    let out = args.out.clone().unwrap_or_else(|| args.demos.clone());
    augmented.save(&out).map_err(infra)?;
    println!(
        "augmented {} demonstrations into {} ({failures} step(s) left without rationale)",
        augmented.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-dataset
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BuildDatasetArgs {
    /// Task families (comma separated). Default: all registered families.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Screens captured per family (seeds count up from --seed-start).
    #[arg(long, default_value_t = 5)]
    per_task: u64,
    /// First seed (annotation split by default).
    #[arg(long, default_value_t = splits::ANNOTATION_SEEDS.start)]
    seed_start: u64,
    /// Also capture every screen along the oracle trajectory.
    #[arg(long)]
    trajectory: bool,
    /// Skip the augmentation pass (original screens only).
    #[arg(long)]
    no_augment: bool,
    /// Darkening factor outside the target element, in (0, 1].
    #[arg(long, default_value_t = 0.4)]
    darken: f64,
    /// Outline thickness in pixels.
    #[arg(long, default_value_t = 2)]
    outline_px: u32,
    /// Gaussian pixel-noise sigma for augmented copies.
    #[arg(long, default_value_t = 8.0)]
    noise_sigma: f64,
    /// Augmentation seed.
    #[arg(long, default_value_t = 0)]
    augment_seed: u64,
    /// Output dataset directory.
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

fn cmd_build_dataset(args: &BuildDatasetArgs) -> Result<(), Failure> {
    if !(args.darken > 0.0 && args.darken <= 1.0) {
        return Err(usage("--darken must lie in (0, 1]"));
    }
    let families = args
        .tasks
        .clone()
        .unwrap_or_else(|| SimEnv::families().iter().map(|f| f.to_string()).collect());
    let mut samples = Vec::new();
    for family in &families {
        for i in 0..args.per_task {
            let shots =
                capture_screens(family, args.seed_start + i, args.trajectory).map_err(infra)?;
            samples.extend(shots);
        }
    }
    if !args.no_augment {
        let cfg = AugmentConfig { noise_sigma: args.noise_sigma, ..AugmentConfig::default() };
        samples = augment_dataset(&samples, &cfg, &mut SplitMix64::new(args.augment_seed));
    }
    let mask = MaskOptions {
        darken: args.darken,
        outline_px: args.outline_px,
        ..MaskOptions::default()
    };
    let summary = export_dataset(&args.out, &samples, &mask).map_err(infra)?;
    println!(
        "wrote {} screens, {} annotations, {} training pairs to {}",
        summary.samples,
        summary.annotations,
        summary.pairs,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// show-prompt
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ShowPromptArgs {
    /// Task family.
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round to render: oracle actions for earlier rounds are applied first.
    #[arg(long, default_value_t = 1)]
    round: u32,
    /// Demos directory to draw demonstrations from.
    #[arg(long)]
    demos: Option<PathBuf>,
    #[arg(long)]
    no_demos: bool,
    #[arg(long)]
    no_cot: bool,
    #[arg(long)]
    action_only_demos: bool,
    /// Enumerate action candidates in the prompt instead of tool schemas.
    #[arg(long)]
    plain_actions: bool,
}

fn cmd_show_prompt(args: &ShowPromptArgs) -> Result<(), Failure> {
    if args.round == 0 {
        return Err(usage("--round starts at 1"));
    }
    let mut env = SimEnv::reset(&args.task, args.seed).map_err(usage)?;
    let oracle = gui_agent_core::env::oracle_for(&args.task)
        .ok_or_else(|| usage(format!("unknown task family `{}`", args.task)))?;

    let mut history = vec![ActionRecord::start(None)];
    for _ in 1..args.round {
        let Some(cmd) = oracle.next_action(&env) else { break };
        let obs = env.try_snapshot().map_err(|e| Failure::Invariant(e.to_string()))?;
        let checked = validate(&cmd, &obs).map_err(infra)?;
        execute_command(&mut env, &checked).map_err(infra)?;
        history.push(ActionRecord::for_command(history.len() as u32 + 1, &cmd, checked.snapshot));
    }

    let store = match &args.demos {
        Some(dir) => DemoStore::load(dir).map_err(infra)?,
        None => DemoStore::empty(),
    };
    let selected = if args.no_demos { Vec::new() } else { select_demos(&store, &args.task, 5) };

    let episode = EpisodeConfig {
        use_tools: !args.plain_actions,
        no_cot: args.no_cot,
        strip_rationales: args.action_only_demos,
        ..EpisodeConfig::default()
    };
    let obs = env.try_snapshot().map_err(|e| Failure::Invariant(e.to_string()))?;
    let bundle = build_action_prompt(
        env.utterance(),
        &selected,
        &history,
        &obs,
        &GuidelineSet::default(),
        &episode.prompt_options(),
    );
    println!("{}", bundle.user_text);
    Ok(())
}

// ---------------------------------------------------------------------------
// entry
// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RunEval(args) => cmd_run_eval(&args, None),
        Command::Replay(args) => cmd_run_eval(&args, Some("replay")),
        Command::RecordDemos(args) => cmd_record_demos(&args),
        Command::AugmentDemos(args) => cmd_augment_demos(&args),
        Command::BuildDataset(args) => cmd_build_dataset(&args),
        Command::ShowPrompt(args) => cmd_show_prompt(&args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; --help/--version exit 0 here.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            std::process::exit(failure.code());
        }
    }
}
