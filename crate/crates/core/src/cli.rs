//! Command-line front end: `train`, `run`, `compare`, `agent-plan` and `evaluate`.
//!
//! Exit codes: 0 success, 2 bad arguments or unreadable/invalid input,
//! 1 internal failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{apply_commands, brief, emit_commands, plan_llm, HttpChatBackend, Plan};
use crate::neural::{
    evaluate_accuracy, load_weights, save_weights, train, Layered, MlpModel, MnistPaths, NeuralError, Objective,
    SavedModel, TrainConfig, VaeModel,
};
use crate::plot::{comparison_svg, cumulative_bits_svg, sweep_svg};
use crate::semcom::PayloadKind;
use crate::sim::{compare, round_trip_accuracy, run, sweep, sweep_csv, Models, SimError};
use crate::world::{Branch, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_DATA_DIR: &str = "data/mnist";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unusable input files.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::World(_) | SimError::AmbiguousBranch(_) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "semrobo", version, about = "Semantic-communication multi-robot anomaly detection simulator")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the VAE or the digit classifier on MNIST.
    Train(TrainArgs),
    /// Run one branch of a scenario.
    Run(RunArgs),
    /// Run both branches on the same world, plus an optional device-count sweep.
    Compare(CompareArgs),
    /// Ask the planning agent for a deployment.
    AgentPlan(AgentPlanArgs),
    /// Report test-set accuracy of a pair of weight files.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Vae,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: ModelKind,
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
    /// Defaults: 5 for the classifier, 10 for the VAE.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Defaults: 0.05 for the classifier, 0.001 for the VAE.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum, default_value = "sgd")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Train on the first N training images only.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Weight file to write; the loss history goes next to it as `<out>.loss.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    #[value(name = "semcom", alias = "SemCom")]
    SemCom,
    #[value(name = "raw", alias = "Raw")]
    Raw,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub weights_vae: PathBuf,
    #[arg(long)]
    pub weights_classifier: PathBuf,
    /// Directory with the MNIST test files that supply device images.
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Overrides the config's branch.
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Device counts for the sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    pub sweep: Vec<usize>,
    #[arg(long)]
    pub no_sweep: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Rule,
    Llm,
}

#[derive(Debug, Args)]
pub struct AgentPlanArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rule")]
    pub backend: BackendArg,
    /// Write the config with the recommended robot count, strategy and branch applied.
    #[arg(long)]
    pub apply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub weights_vae: PathBuf,
    #[arg(long)]
    pub weights_classifier: PathBuf,
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::AgentPlan(a) => cmd_agent_plan(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

fn input_err(context: &str) -> impl Fn(NeuralError) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = match a.kind {
        ModelKind::Classifier => TrainConfig::classifier_recipe(a.seed),
        ModelKind::Vae => TrainConfig::vae_recipe(a.seed),
    };
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    if a.optimizer == OptimizerArg::Adam {
        cfg.optimizer = crate::neural::Optimizer::adam();
    }
    cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;

    let paths = MnistPaths::in_dir(&a.data_dir);
    let mut data = paths.load_train().map_err(input_err("training data"))?;
    if let Some(n) = a.limit {
        data = data.head(n);
    }
    let test = paths.load_test().map_err(input_err("test data"))?;

    let (model, history) = match a.kind {
        ModelKind::Classifier => {
            let mut m = MlpModel::classifier(a.seed);
            let report = train(&mut m, &data, Objective::SoftmaxCrossEntropy, &cfg)
                .map_err(|e| CliError::Internal(format!("training failed: {e}")))?;
            m.round_to_f32();
            println!("test accuracy: {:.4}", evaluate_accuracy(&m, &test));
            (SavedModel::Mlp(m), report)
        }
        ModelKind::Vae => {
            let mut v = VaeModel::standard(a.seed);
            let objective = Objective::VaeElbo { beta: 1.0 };
            let report = train(&mut v, &data, objective, &cfg)
                .map_err(|e| CliError::Internal(format!("training failed: {e}")))?;
            v.round_to_f32();
            let test_loss = v.loss(test.images(), None, 1.0);
            println!(
                "test loss per image: {:.3} (reconstruction {:.3}, kl {:.3})",
                test_loss.total, test_loss.recon, test_loss.kl
            );
            (SavedModel::Vae(v), report)
        }
    };
    if let Some(last) = history.history.last() {
        println!("final training loss: {:.5}", last.total);
    }

    // Write to a sibling temp file first so a failure never leaves a partial weight file.
    let tmp = a.out.with_extension("partial");
    save_weights(&model, &tmp).map_err(|e| CliError::Internal(format!("cannot write weights: {e}")))?;
    fs::rename(&tmp, &a.out).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", a.out.display())))?;
    let mut loss_path = a.out.clone().into_os_string();
    loss_path.push(".loss.csv");
    write_file(Path::new(&loss_path), history.to_csv())?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Parse a scenario file; syntax errors carry line and column.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_json_str(&text)
        .map_err(|e| CliError::Input(format!("{}:{}:{}: invalid config: {e}", path.display(), e.line(), e.column())))?;
    cfg.validate().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HashedFile {
    pub path: String,
    pub sha256: String,
}

impl HashedFile {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

/// Everything needed to reproduce a run; written before any other output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub out_dir: String,
    pub config: Option<HashedFile>,
    /// The scenario actually simulated, after overrides.
    pub effective_config: ScenarioConfig,
    pub weights_vae: HashedFile,
    pub weights_classifier: HashedFile,
    pub data: Vec<HashedFile>,
}

struct Prepared {
    config: ScenarioConfig,
    models: Models,
    images: crate::neural::LabeledImageSet,
}

fn prepare(a: &ScenarioArgs, command: &str, branch: Option<Branch>) -> Result<Prepared, CliError> {
    let mut config = resolve_config(a.config.as_deref(), a.seed)?;
    if let Some(b) = branch {
        config.branch = b;
    }
    let paths = MnistPaths::in_dir(&a.data_dir);
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: config.seed,
        out_dir: a.out.display().to_string(),
        config: a.config.as_deref().map(HashedFile::of).transpose()?,
        effective_config: config.clone(),
        weights_vae: HashedFile::of(&a.weights_vae)?,
        weights_classifier: HashedFile::of(&a.weights_classifier)?,
        data: vec![HashedFile::of(&paths.test_images)?, HashedFile::of(&paths.test_labels)?],
    };
    let vae = load_weights(&a.weights_vae)
        .and_then(SavedModel::into_vae)
        .map_err(input_err(&a.weights_vae.display().to_string()))?;
    let classifier = load_weights(&a.weights_classifier)
        .and_then(SavedModel::into_mlp)
        .map_err(input_err(&a.weights_classifier.display().to_string()))?;
    let images = paths.load_test().map_err(input_err("device images"))?;

    fs::create_dir_all(&a.out).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", a.out.display())))?;
    write_file(&a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(Prepared { config, models: Models::new(vae, classifier), images })
}

pub fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let branch = a.branch.map(|b| match b {
        BranchArg::SemCom => Branch::SemCom,
        BranchArg::Raw => Branch::Raw,
    });
    let p = prepare(&a.scenario, "run", branch)?;
    let log = run(&p.config, &p.images, &p.models)?;
    let out = &a.scenario.out;
    write_file(&out.join(log.csv_file_name()), log.to_csv())?;
    write_file(&out.join(log.summary_file_name()), log.summary_json())?;
    write_file(&out.join(format!("cumulative_seed{}_{}.svg", log.seed, log.branch)), cumulative_bits_svg(&[&log]))?;
    println!("{}", log.summary_json());
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let p = prepare(&a.scenario, "compare", None)?;
    let c = compare(&p.config, &p.images, &p.models)?;
    let out = &a.scenario.out;
    let seed = p.config.seed;
    for log in [&c.semcom, &c.raw] {
        write_file(&out.join(log.csv_file_name()), log.to_csv())?;
        write_file(&out.join(log.summary_file_name()), log.summary_json())?;
    }
    write_file(&out.join(format!("compare_seed{seed}.json")), c.report_json())?;
    write_file(&out.join(format!("cumulative_seed{seed}.svg")), comparison_svg(&c))?;
    match c.ratio() {
        Some(r) => println!("SemCom {} bits, Raw {} bits, ratio {r:.4}", c.semcom.total_bits(), c.raw.total_bits()),
        None => println!("no payloads delivered; ratio undefined"),
    }

    if !a.no_sweep && !a.sweep.is_empty() {
        let points = sweep(&p.config, &p.images, &p.models, &a.sweep)?;
        write_file(&out.join(format!("sweep_seed{seed}.csv")), sweep_csv(&points))?;
        write_file(&out.join(format!("sweep_seed{seed}.svg")), sweep_svg(&points))?;
        for pt in &points {
            println!("{:>4} devices: SemCom {:>8} bits, Raw {:>9} bits", pt.n_devices, pt.semcom_bits, pt.raw_bits);
        }
    }
    info!("artifacts written to {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct AgentOutput<'a> {
    brief: &'a crate::agent::ScenarioBrief,
    plan: &'a Plan,
    commands: &'a crate::agent::CommandSet,
}

pub fn cmd_agent_plan(a: &AgentPlanArgs) -> Result<(), CliError> {
    let config = resolve_config(a.config.as_deref(), None)?;
    let b = brief(&config);
    let plan = match a.backend {
        BackendArg::Rule => Plan::rule_based(&b),
        BackendArg::Llm => match HttpChatBackend::from_env() {
            Some(backend) => plan_llm(&b, &backend),
            None => {
                warn!("AGENT_LLM_BASE_URL is not set; using the rule-based planner");
                Plan {
                    fallback_reason: Some("AGENT_LLM_BASE_URL is not set".into()),
                    source: crate::agent::PlanSource::RuleFallback,
                    ..Plan::rule_based(&b)
                }
            }
        },
    };
    if let Some(reason) = &plan.fallback_reason {
        eprintln!("warning: planner fell back to rules: {reason}");
    }
    let commands = emit_commands(&plan.recommendation, &b);
    println!(
        "{}",
        serde_json::to_string_pretty(&AgentOutput { brief: &b, plan: &plan, commands: &commands }).expect("serializes")
    );
    if let Some(path) = &a.apply {
        let updated = apply_commands(&config, &commands).map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(path, updated.to_json_pretty())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let vae = load_weights(&a.weights_vae)
        .and_then(SavedModel::into_vae)
        .map_err(input_err(&a.weights_vae.display().to_string()))?;
    let classifier = load_weights(&a.weights_classifier)
        .and_then(SavedModel::into_mlp)
        .map_err(input_err(&a.weights_classifier.display().to_string()))?;
    let models = Models::new(vae, classifier);
    let test = MnistPaths::in_dir(&a.data_dir).load_test().map_err(input_err("test data"))?;
    println!("classifier on clean images:   {:.4}", evaluate_accuracy(&models.classifier, &test));
    println!("after Raw payload round trip: {:.4}", round_trip_accuracy(&models, PayloadKind::Raw, &test));
    println!("after SemCom round trip:      {:.4}", round_trip_accuracy(&models, PayloadKind::SemCom, &test));
    Ok(())
}
