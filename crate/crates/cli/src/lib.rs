//! Command-line front end: argument parsing, config validation and dispatch.

pub mod classify_cmds;
pub mod config;
pub mod error;
pub mod graph_cmds;
pub mod recsys_cmds;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::config::{read_document, validate, Params, RunConfig, SEED_ENV};
use crate::error::CliError;
use crate::recsys_cmds::RecsysStep;
use crate::report::{digest_inputs, write_outputs, Outcome, RunMeta};

#[derive(Debug, Parser)]
#[command(name = "copygraph", version, about = "Node-copying random graphs and their downstream uses")]
pub struct Cli {
    /// JSON config document; flags take precedence over its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed [default: $COPYGRAPH_SEED, else 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: copygraph-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available cores]. Never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural statistics of one or more edge lists.
    Stats(StatsArgs),
    /// Draw graphs from a copying distribution.
    Sample(SampleArgs),
    /// Monte Carlo check that copies of ER/SBM graphs keep the edge law.
    Verify(VerifyArgs),
    /// Semi-supervised node classification (GCN or copying ensemble).
    Classify(InputArgs),
    /// DICE edits around target nodes.
    Attack(AttackArgs),
    /// Copying-based correction of target predictions.
    Defend(InputArgs),
    /// Graph-conditioned BPR and its copying ensembles.
    #[command(subcommand)]
    Recsys(RecsysCommand),
}

#[derive(Debug, Subcommand)]
pub enum RecsysCommand {
    Train(RecsysArgs),
    Ebpr(RecsysArgs),
    Sgbpr(RecsysArgs),
    Eval(RecsysArgs),
}

fn put(m: &mut Map<String, Value>, key: &str, v: Option<impl Into<Value>>) {
    if let Some(v) = v {
        m.insert(key.into(), v.into());
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<Value> {
    p.as_ref().map(|p| Value::String(p.display().to_string()))
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Edge lists.
    pub graphs: Vec<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Largest connected component only.
    #[arg(long)]
    pub lcc: bool,
    #[arg(long)]
    pub directed: bool,
}

impl StatsArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        if !self.graphs.is_empty() {
            let list = self.graphs.iter().map(|p| Value::String(p.display().to_string())).collect();
            m.insert("graphs".into(), Value::Array(list));
        }
        put(&mut m, "labels", path_value(&self.labels));
        put(&mut m, "lcc", self.lcc.then_some(true));
        put(&mut m, "directed", self.directed.then_some(true));
        m
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub n_samples: Option<usize>,
}

impl SampleArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "graph", path_value(&self.graph));
        put(&mut m, "labels", path_value(&self.labels));
        put(&mut m, "n_samples", self.n_samples);
        m
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `er` or `sbm`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n_nodes: Option<usize>,
    /// power-law, ring, uniform, within-class or self-copy.
    #[arg(long)]
    pub distribution: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
}

impl VerifyArgs {
    fn overrides(&self, doc: &Map<String, Value>) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "model", self.model.clone());
        put(&mut m, "theta", self.theta);
        put(&mut m, "n_nodes", self.n_nodes);
        put(&mut m, "distribution", self.distribution.clone());
        if let Some(t) = self.trials {
            let mut harness = doc.get("harness").and_then(Value::as_object).cloned().unwrap_or_default();
            harness.insert("n_trials".into(), t.into());
            m.insert("harness".into(), Value::Object(harness));
        }
        m
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
}

impl InputArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "graph", path_value(&self.graph));
        put(&mut m, "labels", path_value(&self.labels));
        put(&mut m, "features", path_value(&self.features));
        m
    }
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n_targets: Option<usize>,
}

impl AttackArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "graph", path_value(&self.graph));
        put(&mut m, "labels", path_value(&self.labels));
        put(&mut m, "beta", self.beta);
        put(&mut m, "n_targets", self.n_targets);
        m
    }
}

#[derive(Debug, Args)]
pub struct RecsysArgs {
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

impl RecsysArgs {
    fn overrides(&self, doc: &Map<String, Value>) -> Map<String, Value> {
        let mut m = Map::new();
        if let Some(p) = path_value(&self.interactions) {
            let mut data = doc.get("data").and_then(Value::as_object).cloned().unwrap_or_default();
            data.insert("interactions".into(), p);
            m.insert("data".into(), Value::Object(data));
        }
        put(&mut m, "model", path_value(&self.model));
        m
    }
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Stats(_) => "stats".into(),
            Command::Sample(_) => "sample".into(),
            Command::Verify(_) => "verify".into(),
            Command::Classify(_) => "classify".into(),
            Command::Attack(_) => "attack".into(),
            Command::Defend(_) => "defend".into(),
            Command::Recsys(r) => format!("recsys {}", r.step().name()),
        }
    }
}

impl RecsysCommand {
    fn step(&self) -> RecsysStep {
        match self {
            RecsysCommand::Train(_) => RecsysStep::Train,
            RecsysCommand::Ebpr(_) => RecsysStep::Ebpr,
            RecsysCommand::Sgbpr(_) => RecsysStep::Sgbpr,
            RecsysCommand::Eval(_) => RecsysStep::Eval,
        }
    }

    fn args(&self) -> &RecsysArgs {
        match self {
            RecsysCommand::Train(a) | RecsysCommand::Ebpr(a) | RecsysCommand::Sgbpr(a) | RecsysCommand::Eval(a) => a,
        }
    }
}

fn execute<T: Params>(
    cli: &Cli,
    doc: Map<String, Value>,
    overrides: Map<String, Value>,
    pipeline: impl FnOnce(&RunConfig<T>) -> Result<Outcome, CliError>,
) -> Result<PathBuf, CliError> {
    let env = std::env::var(SEED_ENV).ok();
    let config: RunConfig<T> = validate(doc, overrides, cli.seed, cli.out.clone(), env.as_deref())?;
    let inputs = digest_inputs(&config.params.inputs())?;
    let started = Instant::now();
    let outcome = pipeline(&config)?;
    let meta = RunMeta {
        command: &cli.command.name(),
        seed: config.seed,
        workers: rayon::current_num_threads(),
        params: serde_json::to_value(&config.params).expect("parameters serialize"),
        inputs,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_outputs(&config.out, meta, &outcome)?;
    Ok(config.out)
}

/// Runs the parsed command inside a pool of the requested size and returns the
/// output directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config(vec!["workers: must be at least 1".into()]));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(vec![format!("workers: {e}")]))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<PathBuf, CliError> {
    let doc = read_document(cli.config.as_deref())?;
    match &cli.command {
        Command::Stats(a) => execute(cli, doc, a.overrides(), graph_cmds::run_stats),
        Command::Sample(a) => execute(cli, doc, a.overrides(), graph_cmds::run_sample),
        Command::Verify(a) => {
            let o = a.overrides(&doc);
            execute(cli, doc, o, graph_cmds::run_verify)
        }
        Command::Classify(a) => execute(cli, doc, a.overrides(), classify_cmds::run_classify),
        Command::Attack(a) => execute(cli, doc, a.overrides(), classify_cmds::run_attack),
        Command::Defend(a) => execute(cli, doc, a.overrides(), classify_cmds::run_defend),
        Command::Recsys(r) => {
            let o = r.args().overrides(&doc);
            let step = r.step();
            execute(cli, doc, o, move |c| recsys_cmds::run_recsys(step, c))
        }
    }
}
