use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::Encoding;
use crate::error::{Error, Result};
use crate::eventlog::{CsvSchema, LabelRule, RuleSpec};
use crate::leakage::Removal;
use crate::linmodels::TreeConfig;
use crate::synth::SynthConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Model identifiers accepted in `models`.
pub const MODEL_NAMES: [&str; 3] = ["lr", "dt", "attn"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
    Xes {
        path: PathBuf,
    },
    /// A log that already carries labels.
    Ndjson {
        path: PathBuf,
    },
    Synth {
        #[serde(default)]
        synth: SynthConfig,
    },
}

impl InputSpec {
    pub fn is_labelled(&self) -> bool {
        matches!(self, InputSpec::Ndjson { .. } | InputSpec::Synth { .. })
    }

    fn default_name(&self) -> String {
        match self {
            InputSpec::Csv { path, .. } | InputSpec::Xes { path } | InputSpec::Ndjson { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "log".into()),
            InputSpec::Synth { synth } => synth.name.clone(),
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            InputSpec::Csv { path, .. } | InputSpec::Xes { path } | InputSpec::Ndjson { path } => {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
            InputSpec::Synth { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Keep only traces containing at least one of these activities
    /// (e.g. terminal activities, to drop ongoing cases). Empty keeps all.
    pub keep_containing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSettings {
    /// Remove every leak the audit detects.
    pub remove_detected: bool,
    /// Additional removals applied regardless of the audit.
    pub removals: Vec<Removal>,
    pub near_leak_threshold: f64,
}

impl Default for BiasSettings {
    fn default() -> Self {
        BiasSettings {
            remove_detected: true,
            removals: Vec::new(),
            near_leak_threshold: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub test_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings { test_fraction: 0.30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NGramSettings {
    /// Presence instead of counts.
    pub binary: bool,
    /// Pad boundary-extended traces to the training sequence length before
    /// extracting grams, so that e.g. `(X, <end>, <pad>)` becomes a feature.
    pub pad: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSettings {
    pub c: f64,
    /// When set, C is chosen from this grid by cross-validated AUROC.
    pub c_grid: Option<Vec<f64>>,
    pub standardize: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LrSettings {
    fn default() -> Self {
        LrSettings {
            c: 1.0,
            c_grid: None,
            standardize: false,
            max_iter: 5000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttnSettings {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_hidden: usize,
    pub dropout: f64,
    pub residual_norm: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for AttnSettings {
    fn default() -> Self {
        AttnSettings {
            d_model: 36,
            n_heads: 6,
            d_hidden: 64,
            dropout: 0.1,
            residual_norm: true,
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub repeats: usize,
    pub folds: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            repeats: 50,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceSettings {
    pub permutation_repeats: usize,
    /// Bars shown in relevance charts.
    pub top_k: usize,
}

impl Default for RelevanceSettings {
    fn default() -> Self {
        RelevanceSettings {
            permutation_repeats: 10,
            top_k: 15,
        }
    }
}

fn default_encodings() -> Vec<Encoding> {
    Encoding::ALL.to_vec()
}

fn default_models() -> Vec<String> {
    MODEL_NAMES.iter().map(|s| (*s).to_owned()).collect()
}

/// A complete, replayable pipeline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub dataset: Option<String>,
    pub input: InputSpec,
    #[serde(default)]
    pub rule: Option<RuleSpec>,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub bias: BiasSettings,
    #[serde(default)]
    pub split: SplitSettings,
    #[serde(default = "default_encodings")]
    pub encodings: Vec<Encoding>,
    #[serde(default)]
    pub ngram: NGramSettings,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default)]
    pub lr: LrSettings,
    #[serde(default)]
    pub dt: TreeConfig,
    #[serde(default)]
    pub attn: AttnSettings,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default)]
    pub relevance: RelevanceSettings,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(input: InputSpec) -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            dataset: None,
            input,
            rule: None,
            filter: FilterSpec::default(),
            bias: BiasSettings::default(),
            split: SplitSettings::default(),
            encodings: default_encodings(),
            ngram: NGramSettings::default(),
            models: default_models(),
            lr: LrSettings::default(),
            dt: TreeConfig::default(),
            attn: AttnSettings::default(),
            cv: CvSettings::default(),
            relevance: RelevanceSettings::default(),
            seed: 0,
        }
    }

    /// Read a `.toml` or `.json` document. Relative input paths are
    /// resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text)?,
            Some("json") => Self::from_json(&text)?,
            other => {
                return Err(Error::Config(format!(
                    "config must be .toml or .json, got {:?}",
                    other.unwrap_or("")
                )))
            }
        };
        cfg.input.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| self.input.default_name())
    }

    /// Check everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        for m in &self.models {
            if !MODEL_NAMES.contains(&m.as_str()) {
                return bad(format!(
                    "unknown model '{m}' (expected one of {})",
                    MODEL_NAMES.join(", ")
                ));
            }
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        if self.encodings.is_empty() {
            return bad("no encodings configured".into());
        }
        let has_tokens = self.encodings.contains(&Encoding::Tokens);
        let has_ngrams = self.encodings.iter().any(|e| e.ngram_order().is_some());
        if self.models.iter().any(|m| m == "attn") && !has_tokens {
            return bad("model 'attn' needs the 'tokens' encoding".into());
        }
        if self.models.iter().any(|m| m == "lr" || m == "dt") && !has_ngrams {
            return bad("models 'lr' and 'dt' need at least one n-gram encoding".into());
        }
        match (&self.rule, self.input.is_labelled()) {
            (None, false) => return bad("a label rule is required for csv and xes input".into()),
            (Some(spec), _) => {
                LabelRule::from_spec(spec)?;
            }
            _ => {}
        }
        if let InputSpec::Synth { synth } = &self.input {
            synth.validate()?;
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad("split.test_fraction must be in (0, 1)".into());
        }
        if self.cv.folds < 2 || self.cv.repeats == 0 {
            return bad("cv needs folds >= 2 and repeats >= 1".into());
        }
        if !(self.lr.c > 0.0)
            || self
                .lr
                .c_grid
                .as_ref()
                .is_some_and(|g| g.is_empty() || g.iter().any(|c| !(*c > 0.0)))
        {
            return bad("lr.c and every c_grid entry must be positive".into());
        }
        if self.relevance.permutation_repeats == 0 || self.relevance.top_k == 0 {
            return bad("relevance.permutation_repeats and top_k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.bias.near_leak_threshold) {
            return bad("bias.near_leak_threshold must be in [0, 1]".into());
        }
        let a = &self.attn;
        if a.n_heads == 0 || !a.d_model.is_multiple_of(a.n_heads) || a.epochs == 0 || a.batch_size == 0 {
            return bad("attn: d_model must be divisible by n_heads; epochs and batch_size positive".into());
        }
        Ok(())
    }
}
