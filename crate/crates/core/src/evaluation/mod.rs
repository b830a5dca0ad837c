//! Repeated trial-level holdout with class-balanced training folds.
//!
//! For every iteration a fresh holdout of whole trials is drawn; each fold
//! then trains a new model on a class-balanced subsample of the remaining
//! windows and scores it on all holdout windows.

mod scaler;
mod source;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use scaler::Standardizer;
pub use source::{ConcatSource, ElectrodeChoice, FeatureSource, FoldFeatures, MatrixSource, MscSource, WindowProvider};
pub use split::{balanced_subsample, rows_of_trials, split_trials, test_size, TrialSplit, MAX_SPLIT_ATTEMPTS};

use crate::classifiers::{ForestParams, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::labeling::{LabelStrategy, LabeledDataset, PainClass, StrategyId, Task};
use crate::rng::{derive_seed, TAG_FOLD, TAG_MODEL, TAG_SPLIT};
use crate::scalar::Scalar;
use crate::selection::{DEFAULT_MI_BINS, DEFAULT_TOP_K};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn chance_level(task: Task) -> f64 {
    1.0 / task.n_classes() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Pib,
    Msc,
    Both,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Pib => "pib",
            FeatureSet::Msc => "msc",
            FeatureSet::Both => "both",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pib" => Ok(FeatureSet::Pib),
            "msc" => Ok(FeatureSet::Msc),
            "both" | "pib+msc" => Ok(FeatureSet::Both),
            _ => Err(Error::invalid(format!("unknown feature set `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Fitted on each fold's training rows.
    InFold,
    /// Fitted once on every labeled row.
    WholeDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub k: usize,
    pub bins: usize,
    pub mode: SelectionMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: DEFAULT_TOP_K,
            bins: DEFAULT_MI_BINS,
            mode: SelectionMode::InFold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub test_fraction: f64,
    pub num_iterations: usize,
    pub num_folds: usize,
    pub seed: u64,
    pub strategy: LabelStrategy,
    pub feature_set: FeatureSet,
    pub model: ModelSpec,
    /// z-score columns with training-fold statistics.
    pub standardize: bool,
    /// Draw one holdout for all iterations instead of one per iteration.
    pub single_holdout: bool,
    pub selection: SelectionConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            test_fraction: 0.10,
            num_iterations: 15,
            num_folds: 20,
            seed: 0,
            strategy: LabelStrategy {
                id: StrategyId::S1,
                task: Task::Binary,
            },
            feature_set: FeatureSet::Pib,
            model: ModelSpec::Rf(ForestParams::default()),
            standardize: true,
            single_holdout: false,
            selection: SelectionConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        if self.num_iterations == 0 || self.num_folds == 0 {
            return Err(Error::Config("iterations and folds must be at least 1".into()));
        }
        if self.selection.k < 2 && self.feature_set != FeatureSet::Pib {
            return Err(Error::Config("coherence features need k >= 2".into()));
        }
        if self.selection.bins < 2 {
            return Err(Error::Config("mutual information needs at least 2 bins".into()));
        }
        LabelStrategy::new(self.strategy.id, self.strategy.task)?;
        Ok(())
    }
}

/// Predictions of one fitted fold model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldFit {
    pub predictions: Vec<usize>,
    pub importances: Option<Vec<f64>>,
}

pub trait Learner<T: Scalar>: Sync {
    fn fit_predict(
        &self,
        train: ArrayView2<'_, T>,
        y: &[usize],
        n_classes: usize,
        test: ArrayView2<'_, T>,
        seed: u64,
    ) -> Result<FoldFit>;
}

impl<T: Scalar> Learner<T> for ModelSpec {
    fn fit_predict(
        &self,
        train: ArrayView2<'_, T>,
        y: &[usize],
        n_classes: usize,
        test: ArrayView2<'_, T>,
        seed: u64,
    ) -> Result<FoldFit> {
        let model = self.fit(train, y, n_classes, seed)?;
        Ok(FoldFit {
            predictions: model.predict(test)?,
            importances: match self.kind() {
                ModelKind::Rf => Some(model.importances()?.to_vec()),
                _ => None,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub accuracy: f64,
    /// Majority vote over each holdout trial's windows.
    pub trial_accuracy: f64,
    /// Training windows per class after balancing.
    pub train_class_counts: Vec<usize>,
    pub n_features: usize,
    /// Training or fitting rows drawn from holdout trials (should be zero).
    pub leakage_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_channels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
    pub split_attempts: u64,
    pub mean_accuracy: f64,
    pub mean_trial_accuracy: f64,
    pub folds: Vec<FoldRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub config: ProtocolConfig,
    pub n_classes: usize,
    pub class_names: Vec<PainClass>,
    /// Labeled windows per class before any split.
    pub class_counts: Vec<usize>,
    pub excluded_trials: usize,
    /// `[iteration][fold]` window-level accuracies.
    pub fold_accuracies: Vec<Vec<f64>>,
    pub iteration_means: Vec<f64>,
    pub grand_mean: f64,
    /// Population standard deviation of the iteration means.
    pub std: f64,
    pub trial_grand_mean: f64,
    pub chance_level: f64,
    pub above_chance: bool,
    pub leakage_violations: usize,
    /// Largest count of convention-defined feature cells seen in one fold.
    pub degenerate_features: usize,
    /// Forest importances averaged over every fold, keyed by column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub importances: Option<BTreeMap<String, f64>>,
    pub iterations: Vec<IterationRecord>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let version = v.get("schema_version").and_then(|s| s.as_u64());
        if version != Some(REPORT_SCHEMA_VERSION as u64) {
            return Err(Error::Format(format!(
                "report schema version {version:?} (expected {REPORT_SCHEMA_VERSION})"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// `iteration,fold,accuracy,trial_accuracy` rows.
    pub fn write_fold_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["iteration", "fold", "accuracy", "trial_accuracy"])
            .map_err(|e| Error::csv(path, e))?;
        for it in &self.iterations {
            for f in &it.folds {
                w.write_record([
                    it.iteration.to_string(),
                    f.fold.to_string(),
                    f.accuracy.to_string(),
                    f.trial_accuracy.to_string(),
                ])
                .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn argmax_votes(votes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

pub fn run_protocol<T: Scalar>(
    config: &ProtocolConfig,
    dataset: &LabeledDataset,
    source: &dyn FeatureSource<T>,
) -> Result<EvalReport> {
    run_protocol_with(config, dataset, source, &config.model)
}

/// Runs the protocol with an arbitrary learner; `config.model` is only
/// echoed into the report.
pub fn run_protocol_with<T: Scalar>(
    config: &ProtocolConfig,
    dataset: &LabeledDataset,
    source: &dyn FeatureSource<T>,
    learner: &dyn Learner<T>,
) -> Result<EvalReport> {
    config.validate()?;
    if dataset.strategy != config.strategy {
        return Err(Error::Protocol(format!(
            "dataset labeled under {:?}/{:?} but protocol expects {:?}/{:?}",
            dataset.strategy.id, dataset.strategy.task, config.strategy.id, config.strategy.task
        )));
    }
    if source.n_rows() != dataset.rows.len() {
        return Err(Error::Protocol(format!(
            "feature source has {} rows, dataset has {}",
            source.n_rows(),
            dataset.rows.len()
        )));
    }
    let n_classes = dataset.n_classes();
    let labels = dataset.labels();
    let trial_class: BTreeMap<usize, usize> = dataset.trials.iter().map(|t| (t.trial_id, t.class_id)).collect();
    let mut importance_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut any_importance = false;
    let mut iterations = Vec::with_capacity(config.num_iterations);
    let mut degenerate = 0;

    for it in 0..config.num_iterations {
        let split_seed = if config.single_holdout {
            derive_seed(config.seed, &[TAG_SPLIT])
        } else {
            derive_seed(config.seed, &[TAG_SPLIT, it as u64])
        };
        let split = split_trials(dataset, config.test_fraction, split_seed)?;
        let train_pool = rows_of_trials(dataset, &split.train_trials);
        let test_rows = rows_of_trials(dataset, &split.test_trials);
        let test_set: BTreeSet<usize> = split.test_trials.iter().copied().collect();
        let y_test: Vec<usize> = test_rows.iter().map(|&r| labels[r]).collect();
        let mut folds = Vec::with_capacity(config.num_folds);

        for fold in 0..config.num_folds {
            let fold_seed = derive_seed(config.seed, &[TAG_FOLD, it as u64, fold as u64]);
            let train_rows = balanced_subsample(&train_pool, &labels, n_classes, fold_seed)?;
            let feats = source.fold_features(&train_rows, &train_rows, &test_rows, &labels)?;
            degenerate = degenerate.max(feats.degenerate);

            let leaks = |rows: &[usize]| {
                rows.iter()
                    .filter(|&&r| test_set.contains(&dataset.rows[r].trial_id))
                    .count()
            };
            let leakage = leaks(&train_rows) + feats.fitted_rows.as_deref().map_or(0, leaks);

            let (train_x, test_x) = if config.standardize {
                let s = Standardizer::fit(feats.train.view());
                (s.transform(feats.train.view()), s.transform(feats.test.view()))
            } else {
                (feats.train, feats.test)
            };
            let y_train: Vec<usize> = train_rows.iter().map(|&r| labels[r]).collect();
            let model_seed = derive_seed(config.seed, &[TAG_MODEL, it as u64, fold as u64]);
            let fit = learner.fit_predict(train_x.view(), &y_train, n_classes, test_x.view(), model_seed)?;
            if fit.predictions.len() != test_rows.len() {
                return Err(Error::Protocol(
                    "learner returned the wrong number of predictions".into(),
                ));
            }

            let correct = fit.predictions.iter().zip(&y_test).filter(|(p, y)| p == y).count();
            let accuracy = correct as f64 / y_test.len() as f64;
            let mut votes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (&r, &p) in test_rows.iter().zip(&fit.predictions) {
                votes
                    .entry(dataset.rows[r].trial_id)
                    .or_insert_with(|| vec![0; n_classes])[p] += 1;
            }
            let trial_correct = votes
                .iter()
                .filter(|(tid, v)| argmax_votes(v) == trial_class[tid])
                .count();
            let trial_accuracy = trial_correct as f64 / votes.len() as f64;

            if let Some(imp) = &fit.importances {
                any_importance = true;
                for (col, v) in feats.columns.iter().zip(imp) {
                    *importance_sum.entry(col.to_string()).or_insert(0.0) += v;
                }
            }
            let mut train_class_counts = vec![0; n_classes];
            y_train.iter().for_each(|&c| train_class_counts[c] += 1);
            folds.push(FoldRecord {
                fold,
                accuracy,
                trial_accuracy,
                train_class_counts,
                n_features: feats.columns.len(),
                leakage_violations: leakage,
                selected_channels: feats.selection.map(|s| s.channels),
            });
        }
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let taccs: Vec<f64> = folds.iter().map(|f| f.trial_accuracy).collect();
        log::info!("iteration {}: mean accuracy {:.4}", it, mean(&accs));
        iterations.push(IterationRecord {
            iteration: it,
            train_trials: split.train_trials,
            test_trials: split.test_trials,
            split_attempts: split.attempts,
            mean_accuracy: mean(&accs),
            mean_trial_accuracy: mean(&taccs),
            folds,
        });
    }

    let fold_accuracies: Vec<Vec<f64>> = iterations
        .iter()
        .map(|it| it.folds.iter().map(|f| f.accuracy).collect())
        .collect();
    let iteration_means: Vec<f64> = iterations.iter().map(|it| it.mean_accuracy).collect();
    let grand_mean = mean(&iteration_means);
    let std =
        (iteration_means.iter().map(|m| (m - grand_mean).powi(2)).sum::<f64>() / iteration_means.len() as f64).sqrt();
    let trial_grand_mean = mean(&iterations.iter().map(|it| it.mean_trial_accuracy).collect::<Vec<_>>());
    let total_folds = (config.num_iterations * config.num_folds) as f64;
    let chance = chance_level(config.strategy.task);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        n_classes,
        class_names: config.strategy.task.classes().to_vec(),
        class_counts: dataset.class_counts.clone(),
        excluded_trials: dataset.excluded_trials,
        fold_accuracies,
        iteration_means,
        grand_mean,
        std,
        trial_grand_mean,
        chance_level: chance,
        above_chance: grand_mean > chance,
        leakage_violations: iterations
            .iter()
            .flat_map(|it| it.folds.iter().map(|f| f.leakage_violations))
            .sum(),
        degenerate_features: degenerate,
        importances: any_importance.then(|| importance_sum.into_iter().map(|(k, v)| (k, v / total_folds)).collect()),
        iterations,
    })
}
