//! Run configuration with three-layer precedence: built-in defaults, then
//! a TOML config file, then command-line flags. File keys mirror flag
//! names exactly (`L`, `eps-start`, `lr-sampling`, ...).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::env::MdpKind;
use crate::error::{Error, Result};
use crate::pipeline::TrainConfig;

/// Fully resolved run settings. Defaults mirror the evaluation protocol:
/// discount 0.9, smoothing 0.1, exploration 0.1 to 0.4, walk bound 16,
/// 3 samples per graph, 10 folds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub generate: Option<usize>,
    pub mdp: MdpKind,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub epochs: usize,
    pub batch: usize,
    pub folds: usize,
    pub seed: u64,
    pub gamma: f64,
    pub beta: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub lr_sampling: f64,
    pub lr_output: f64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            generate: None,
            mdp: MdpKind::WalkExploration,
            l: 16,
            n: 16,
            k: 3,
            epochs: 200,
            batch: 32,
            folds: 10,
            seed: 0,
            gamma: 0.9,
            beta: 0.1,
            eps_start: 0.1,
            eps_end: 0.4,
            lr_sampling: 1e-3,
            lr_output: 1e-3,
            out: None,
            jobs: None,
        }
    }
}

/// One precedence layer: only the values this layer actually sets.
/// Deserializable from the config file; the CLI builds one from the flags
/// the user passed.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub dataset: Option<PathBuf>,
    pub generate: Option<usize>,
    pub mdp: Option<String>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "eps-start")]
    pub eps_start: Option<f64>,
    #[serde(rename = "eps-end")]
    pub eps_end: Option<f64>,
    #[serde(rename = "lr-sampling")]
    pub lr_sampling: Option<f64>,
    #[serde(rename = "lr-output")]
    pub lr_output: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

pub fn parse_mdp(s: &str) -> Result<MdpKind> {
    match s {
        "walk" => Ok(MdpKind::WalkExploration),
        "subgraph" => Ok(MdpKind::SubgraphGeneration),
        other => Err(Error::input(format!(
            "unknown process kind {other:?}; expected walk or subgraph"
        ))),
    }
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::input(format!("bad config {}: {e}", path.display())))
    }
}

impl RunConfig {
    /// Overlays one layer onto this config; `None` fields keep the current
    /// value.
    pub fn apply(&mut self, layer: &ConfigLayer) -> Result<()> {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &layer.$field {
                    self.$field = v.clone();
                }
            };
        }
        if let Some(m) = &layer.mdp {
            self.mdp = parse_mdp(m)?;
        }
        if let Some(d) = &layer.dataset {
            self.dataset = Some(d.clone());
        }
        if let Some(g) = layer.generate {
            self.generate = Some(g);
        }
        if let Some(o) = &layer.out {
            self.out = Some(o.clone());
        }
        if let Some(j) = layer.jobs {
            self.jobs = Some(j);
        }
        take!(l);
        take!(n);
        take!(k);
        take!(epochs);
        take!(batch);
        take!(folds);
        take!(seed);
        take!(gamma);
        take!(beta);
        take!(eps_start);
        take!(eps_end);
        take!(lr_sampling);
        take!(lr_output);
        Ok(())
    }

    /// Defaults, then the optional config file, then the flag layer.
    pub fn resolve(file: Option<&Path>, flags: &ConfigLayer) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply(&ConfigLayer::from_file(path)?)?;
        }
        cfg.apply(flags)?;
        Ok(cfg)
    }

    /// The step bound for the configured process kind.
    pub fn max_steps(&self) -> usize {
        match self.mdp {
            MdpKind::WalkExploration => self.l,
            MdpKind::SubgraphGeneration => self.n,
        }
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            kind: self.mdp,
            max_steps: self.max_steps(),
            k_samples: self.k,
            epochs: self.epochs,
            batch_size: self.batch,
            gamma: self.gamma,
            beta: self.beta,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            lr_sampling: self.lr_sampling,
            lr_output: self.lr_output,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}
