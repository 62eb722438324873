use std::fs;
use std::path::{Path, PathBuf};

use profiling_core::gru::GruConfig;
use profiling_core::textprep::DEFAULT_VOCAB_CAP;
use profiling_core::Task;
use serde::{Deserialize, Serialize};

use crate::args::{GruOverrides, PipelineArgs};
use crate::CliError;

/// Settings for `pipeline`, as read from `--config` and then overridden by
/// flags. Serialized back into the output directory as `pipeline_config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub extensions: Vec<PathBuf>,
    pub target: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub tasks: Vec<Task>,
    pub train_fraction: f64,
    pub vocab_cap: usize,
    /// Sweep the threshold grid on DEV. When false, `threshold` is used as is.
    pub calibrate: bool,
    pub threshold: f64,
    pub seed: u64,
    pub gru: GruConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            extensions: Vec::new(),
            target: None,
            out_dir: None,
            tasks: Task::ALL.to_vec(),
            train_fraction: 0.9,
            vocab_cap: DEFAULT_VOCAB_CAP,
            calibrate: true,
            threshold: 0.0,
            seed: 0,
            gru: GruConfig::default(),
        }
    }
}

/// A validated configuration; paths are known to exist.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    pub inner: PipelineConfig,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("invalid config {}: {e}", path.display())))
}

pub fn apply_gru_overrides(gru: &mut GruConfig, o: &GruOverrides) {
    if let Some(v) = o.embed_dim {
        gru.embed_dim = v;
    }
    if let Some(v) = o.hidden {
        gru.hidden = v;
    }
    if let Some(v) = o.dropout {
        gru.dropout_rate = v;
    }
    if let Some(v) = o.batch_size {
        gru.batch_size = v;
    }
    if let Some(v) = o.epochs {
        gru.epochs = v;
    }
    if let Some(v) = o.max_len {
        gru.max_len = v;
    }
    if let Some(v) = o.lr {
        gru.adam.lr = v;
    }
}

impl PipelineConfig {
    pub fn from_args(args: &PipelineArgs) -> Result<Self, CliError> {
        let mut cfg: PipelineConfig = match &args.config {
            Some(path) => read_json(path)?,
            None => PipelineConfig::default(),
        };
        if args.corpus.is_some() {
            cfg.corpus = args.corpus.clone();
        }
        if !args.extension.is_empty() {
            cfg.extensions = args.extension.clone();
        }
        if args.target.is_some() {
            cfg.target = args.target.clone();
        }
        if args.out_dir.is_some() {
            cfg.out_dir = args.out_dir.clone();
        }
        if !args.tasks.is_empty() {
            cfg.tasks = args.tasks.clone();
        }
        if let Some(f) = args.train_fraction {
            cfg.train_fraction = f;
        }
        if let Some(cap) = args.vocab_cap {
            cfg.vocab_cap = cap;
        }
        if let Some(t) = args.threshold {
            cfg.calibrate = false;
            cfg.threshold = t;
        }
        if let Some(seed) = args.seed.seed {
            cfg.seed = seed;
        }
        apply_gru_overrides(&mut cfg.gru, &args.gru);
        cfg.gru.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn resolve(self) -> Result<ResolvedConfig, CliError> {
        let corpus = self.corpus.clone().ok_or_else(|| {
            CliError::Usage("pipeline needs --corpus or a config file naming one".into())
        })?;
        let out_dir = self.out_dir.clone().ok_or_else(|| {
            CliError::Usage("pipeline needs --out-dir or a config file naming one".into())
        })?;
        let inputs = std::iter::once(&corpus)
            .chain(&self.extensions)
            .chain(self.target.as_ref());
        for path in inputs {
            if !path.is_file() {
                return Err(CliError::Data(format!("{} does not exist", path.display())));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Data(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(CliError::Data(format!(
                "threshold must lie in [0, 1), got {}",
                self.threshold
            )));
        }
        if self.tasks.is_empty() {
            return Err(CliError::Data("no tasks selected".into()));
        }
        if self.vocab_cap == 0 {
            return Err(CliError::Data("vocab_cap must be >= 1".into()));
        }
        self.gru.validate()?;
        Ok(ResolvedConfig {
            corpus,
            out_dir,
            inner: self,
        })
    }
}
