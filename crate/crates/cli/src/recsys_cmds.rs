//! `recsys train | ebpr | sgbpr | eval`.
//!
//! Every subcommand rebuilds the same data split from the seed, so a model
//! written by `train` can be scored by `ebpr` or `eval` run with the same seed.

use std::path::PathBuf;

use copygraph::io::{load_interactions, write_interactions};
use copygraph::recsys::{
    bpr_train, ebpr_scores, evaluate, filter_min_interactions, sgbpr_train_evaluate, split_interactions, BprConfig,
    BprModel, EnsembleConfig, InteractionSplit, MetricsReport,
};
use copygraph::rng;
use copygraph::synthetic::{planted_interactions, InteractionConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Params, RunConfig};
use crate::error::{io_err, CliError};
use crate::report::{to_pretty, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecsysStep {
    Train,
    Ebpr,
    Sgbpr,
    Eval,
}

impl RecsysStep {
    pub fn name(self) -> &'static str {
        match self {
            RecsysStep::Train => "train",
            RecsysStep::Ebpr => "ebpr",
            RecsysStep::Sgbpr => "sgbpr",
            RecsysStep::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataParams {
    /// `user,item` pairs.
    pub interactions: Option<PathBuf>,
    /// Synthetic interactions instead of a file.
    pub planted: Option<InteractionConfig>,
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub test_frac: f64,
    pub valid_frac: f64,
}

impl Default for DataParams {
    fn default() -> Self {
        DataParams {
            interactions: None,
            planted: None,
            min_user_interactions: 0,
            min_item_interactions: 0,
            test_frac: 0.2,
            valid_frac: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecsysParams {
    pub data: DataParams,
    pub bpr: BprConfig,
    pub ensemble: EnsembleConfig,
    /// Trained model (`model.json` from `train`); required by `eval`, optional for `ebpr`.
    pub model: Option<PathBuf>,
}

impl Params for RecsysParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        let d = &self.data;
        if d.interactions.is_some() == d.planted.is_some() {
            e.push("data: give exactly one of `interactions` and `planted`".into());
        }
        if !(d.test_frac >= 0.0 && d.valid_frac >= 0.0 && d.test_frac + d.valid_frac < 1.0) {
            e.push("data: split fractions must be nonnegative and sum below 1".into());
        }
        if let Err(err) = self.bpr.validate() {
            e.push(format!("bpr: {err}"));
        }
        if self.ensemble.n_graphs == 0 {
            e.push("ensemble: n_graphs must be at least 1".into());
        }
        e
    }

    fn inputs(&self) -> Vec<PathBuf> {
        [&self.data.interactions, &self.model].into_iter().flatten().cloned().collect()
    }
}

fn load_split(d: &DataParams, seed: u64) -> Result<InteractionSplit, CliError> {
    let raw = match (&d.interactions, &d.planted) {
        (Some(path), _) => load_interactions(path)?,
        (None, Some(c)) => planted_interactions(c, rng::derive_seed(seed, "cli-planted", 0))?,
        (None, None) => unreachable!("checked at validation"),
    };
    let (bg, _, _) = filter_min_interactions(&raw, d.min_user_interactions, d.min_item_interactions)?;
    Ok(split_interactions(&bg, d.test_frac, d.valid_frac, rng::derive_seed(seed, "cli-split", 0))?)
}

fn load_model(path: &PathBuf, split: &InteractionSplit) -> Result<BprModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let model: BprModel = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(vec![format!("model {}: {e}", path.display())]))?;
    if model.n_users() != split.train.n_users() || model.n_items() != split.train.n_items() {
        return Err(CliError::Config(vec![format!(
            "model {}: {} users x {} items, data has {} x {}",
            path.display(),
            model.n_users(),
            model.n_items(),
            split.train.n_users(),
            split.train.n_items()
        )]));
    }
    Ok(model)
}

fn train_model(p: &RecsysParams, split: &InteractionSplit, seed: u64) -> Result<BprModel, CliError> {
    Ok(bpr_train(&split.train, None, &p.bpr, rng::derive_seed(seed, "cli-bpr", 0))?.model)
}

fn metrics_outcome(result: serde_json::Value, metrics: &MetricsReport) -> Outcome {
    Outcome::new(result)
        .artifact("metrics.json", to_pretty(metrics))
        .artifact("per_user.csv", metrics.per_user_csv())
}

pub fn run_recsys(step: RecsysStep, cfg: &RunConfig<RecsysParams>) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    if p.model.is_some() && matches!(step, RecsysStep::Train | RecsysStep::Sgbpr) {
        return Err(CliError::Config(vec![format!("model: not used by `recsys {}`", step.name())]));
    }
    if p.model.is_none() && step == RecsysStep::Eval {
        return Err(CliError::Config(vec!["model: required by `recsys eval`".into()]));
    }
    let split = load_split(&p.data, cfg.seed)?;
    let sizes = json!({
        "n_users": split.train.n_users(),
        "n_items": split.train.n_items(),
        "n_train": split.train.n_interactions(),
        "n_valid": split.valid.n_interactions(),
        "n_test": split.test.n_interactions(),
    });
    let model = match (&p.model, step) {
        (Some(path), _) => Some(load_model(path, &split)?),
        (None, RecsysStep::Train | RecsysStep::Ebpr) => Some(train_model(p, &split, cfg.seed)?),
        _ => None,
    };
    match step {
        RecsysStep::Train | RecsysStep::Eval => {
            let model = model.expect("present for train and eval");
            let metrics = evaluate(&model.scores(&split.train)?, &split.train, &split.test)?;
            let mut out = metrics_outcome(json!({ "data": sizes, "metrics": metrics }), &metrics);
            if step == RecsysStep::Train {
                out = out
                    .artifact("model.json", to_pretty(&model))
                    .artifact("train.txt", write_interactions(&split.train))
                    .artifact("valid.txt", write_interactions(&split.valid))
                    .artifact("test.txt", write_interactions(&split.test));
            }
            Ok(out)
        }
        RecsysStep::Ebpr => {
            let model = model.expect("present for ebpr");
            let base = evaluate(&model.scores(&split.train)?, &split.train, &split.test)?;
            let scores = ebpr_scores(&model, &split.train, &p.ensemble, rng::derive_seed(cfg.seed, "cli-ebpr", 0))?;
            let metrics = evaluate(&scores, &split.train, &split.test)?;
            Ok(metrics_outcome(
                json!({ "data": sizes, "base": base, "metrics": metrics }),
                &metrics,
            ))
        }
        RecsysStep::Sgbpr => {
            let out = sgbpr_train_evaluate(&split.train, &p.bpr, &p.ensemble, rng::derive_seed(cfg.seed, "cli-sgbpr", 0))?;
            let metrics = evaluate(&out.scores, &split.train, &split.test)?;
            Ok(metrics_outcome(
                json!({
                    "data": sizes,
                    "excluded_pairs": out.exclusion.n_interactions(),
                    "metrics": metrics,
                }),
                &metrics,
            )
            .artifact("model.json", to_pretty(&out.trained.model)))
        }
    }
}
