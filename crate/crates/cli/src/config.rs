use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use painnet::classifiers::{ModelKind, ModelSpec};
use painnet::datagen::SynthConfig;
use painnet::evaluation::{FeatureSet, ProtocolConfig};
use painnet::labeling::{LabelStrategy, StrategyId, Task};
use painnet::network::DEFAULT_DEGREE_QUANTILE;
use painnet::pipeline::{FeatureConfig, PreprocessConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub top_k: usize,
    pub degree_quantile: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            top_k: 10,
            degree_quantile: DEFAULT_DEGREE_QUANTILE,
        }
    }
}

/// Everything one pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub recording: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    /// One channel name per line.
    pub flagged_channels_file: Option<PathBuf>,
    /// Generate the input instead of reading it.
    pub synth: Option<SynthConfig>,
    pub precision: Precision,
    /// Drives the generator and the evaluation protocol.
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub protocol: ProtocolConfig,
    pub network: NetworkConfig,
    /// Where outputs go; not part of the config identity.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            recording: None,
            reports: None,
            flagged_channels_file: None,
            synth: None,
            precision: Precision::F32,
            seed: 0,
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            protocol: ProtocolConfig::default(),
            network: NetworkConfig::default(),
            output_dir: PathBuf::from("painnet-out"),
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.recording, &mut cfg.reports, &mut cfg.flagged_channels_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    /// Pushes the run seed into every seeded component and checks the
    /// protocol settings.
    pub fn finalize(mut self) -> Result<Self> {
        self.protocol.seed = self.seed;
        if let Some(s) = &mut self.synth {
            s.seed = self.seed;
            s.validate()?;
        }
        self.protocol.validate()?;
        if self.synth.is_none() && (self.recording.is_none() || self.reports.is_none()) {
            bail!("no input: set `recording` and `reports`, or a `synth` section");
        }
        if !(0.0..=1.0).contains(&self.network.degree_quantile) {
            bail!("degree quantile {} outside [0, 1]", self.network.degree_quantile);
        }
        Ok(self)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// Protocol knobs shared by `evaluate` and `run`; each also reads a
/// `PAINNET_*` environment variable.
#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolOverrides {
    #[arg(long, env = "PAINNET_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "PAINNET_STRATEGY", value_parser = ["s1", "s2", "s3"])]
    pub strategy: Option<String>,
    #[arg(long, env = "PAINNET_TASK", value_parser = ["binary", "ternary"])]
    pub task: Option<String>,
    #[arg(long, env = "PAINNET_FEATURES", value_parser = ["pib", "msc", "both"])]
    pub features: Option<String>,
    #[arg(long, env = "PAINNET_MODEL", value_parser = ["lr", "svm", "rf"])]
    pub model: Option<String>,
    #[arg(long, env = "PAINNET_ITERATIONS")]
    pub iterations: Option<usize>,
    #[arg(long, env = "PAINNET_FOLDS")]
    pub folds: Option<usize>,
    /// Electrodes kept for coherence features.
    #[arg(long, env = "PAINNET_K")]
    pub k: Option<usize>,
    #[arg(long, env = "PAINNET_TREES")]
    pub trees: Option<usize>,
}

impl ProtocolOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        let p = &mut cfg.protocol;
        let id: StrategyId = match &self.strategy {
            Some(s) => s.parse()?,
            None => p.strategy.id,
        };
        let task: Task = match &self.task {
            Some(t) => t.parse()?,
            None => p.strategy.task,
        };
        p.strategy = LabelStrategy::new(id, task)?;
        if let Some(f) = &self.features {
            p.feature_set = f.parse::<FeatureSet>()?;
        }
        if let Some(m) = &self.model {
            let kind: ModelKind = m.parse()?;
            if kind != p.model.kind() {
                p.model = ModelSpec::default_for(kind);
            }
        }
        if let Some(n) = self.iterations {
            p.num_iterations = n;
        }
        if let Some(n) = self.folds {
            p.num_folds = n;
        }
        if let Some(k) = self.k {
            p.selection.k = k;
        }
        if let Some(t) = self.trees {
            match &mut p.model {
                ModelSpec::Rf(f) => f.n_trees = t,
                _ => bail!("--trees only applies to the random forest"),
            }
        }
        Ok(())
    }
}
