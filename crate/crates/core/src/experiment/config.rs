use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeatureSchema, Party, SlotSpec, SplitRule, SyntheticConfig};
use crate::federation::GuestUpdate;
use crate::trainer::{Method, OptimizerKind, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    Time,
}

/// Column layout of one party's CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvParty {
    pub path: PathBuf,
    pub slots: Vec<String>,
    /// Hashed vocabulary size shared by every slot of this party.
    pub vocab_size: usize,
}

impl Default for CsvParty {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            slots: Vec::new(),
            vocab_size: 100_003,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub split: SplitKind,
    /// Random split: validation and test sizes, and the shuffle seed.
    pub n_val: usize,
    pub n_test: usize,
    pub split_seed: u64,
    /// Time split: rows with time `< val_from` train, `< test_from` validate, the rest test.
    pub time_column: Option<String>,
    pub val_from: Option<String>,
    pub test_from: Option<String>,
    pub key_column: String,
    pub label_column: String,
    pub host: CsvParty,
    pub guest: CsvParty,
    pub synthetic: SyntheticConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            split: SplitKind::Random,
            n_val: 10_000,
            n_test: 10_000,
            split_seed: 0,
            time_column: None,
            val_from: None,
            test_from: None,
            key_column: "key".into(),
            label_column: "click".into(),
            host: CsvParty::default(),
            guest: CsvParty::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub embedding_dim: usize,
    pub bottom_dims: Vec<usize>,
    pub guest_bottom_dims: Option<Vec<usize>>,
    pub top_dims: Vec<usize>,
    pub rep_dims: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            embedding_dim: t.embedding_dim,
            bottom_dims: t.bottom_dims,
            guest_bottom_dims: t.guest_bottom_dims,
            top_dims: t.top_dims,
            rep_dims: t.rep_dims,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Default for both `init_seed` and `shuffle_seed`.
    pub seed: u64,
    pub init_seed: Option<u64>,
    pub shuffle_seed: Option<u64>,
    pub distill_update_guest: bool,
    pub step2_reinit: bool,
    pub guest_update: GuestUpdate,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            method: t.method,
            alpha: t.alpha,
            beta: t.beta,
            optimizer: t.optimizer,
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: 0,
            init_seed: None,
            shuffle_seed: None,
            distill_update_guest: t.distill_update_guest,
            step2_reinit: t.step2_reinit,
            guest_update: t.guest_update,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Training seeds for multi-seed evaluation and sweeps.
    pub seeds: Vec<u64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { seeds: vec![0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GuestSlots,
    UnalignedSamples,
    Alpha,
    Beta,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "guest_slots" => Ok(Self::GuestSlots),
            "unaligned_samples" => Ok(Self::UnalignedSamples),
            "alpha" => Ok(Self::Alpha),
            "beta" => Ok(Self::Beta),
            _ => Err(Error::Config(format!(
                "unknown sweep axis `{s}` (expected guest_slots, unaligned_samples, alpha or beta)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GuestSlots => "guest_slots",
            Self::UnalignedSamples => "unaligned_samples",
            Self::Alpha => "alpha",
            Self::Beta => "beta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<SweepAxis>,
    /// Axis values as written, e.g. `"25%"` or `"5000"` for unaligned samples.
    pub values: Vec<String>,
    pub methods: Vec<Method>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: None,
            values: Vec::new(),
            methods: Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Contents of an experiment config file. Every key has a default; unknown
/// keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub eval: EvalSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative CSV paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.host.path, &mut cfg.data.guest.path] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.synthetic.validate()?;
        if self.data.source == DataSource::Csv {
            for (name, p) in [("data.host", &self.data.host), ("data.guest", &self.data.guest)] {
                if p.path.as_os_str().is_empty() {
                    return Err(Error::Config(format!("{name}.path is required for csv data")));
                }
                if p.slots.is_empty() {
                    return Err(Error::Config(format!("{name}.slots must list at least one slot")));
                }
            }
        }
        if self.data.split == SplitKind::Time
            && (self.data.time_column.is_none() || self.data.val_from.is_none() || self.data.test_from.is_none())
        {
            return Err(Error::Config(
                "data.split = \"time\" needs data.time_column, data.val_from and data.test_from".into(),
            ));
        }
        if self.eval.seeds.is_empty() {
            return Err(Error::Config("eval.seeds must not be empty".into()));
        }
        self.train_config().validate()
    }

    /// Override every training seed and the evaluation seed list.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.training.seed = seed;
        self.training.init_seed = None;
        self.training.shuffle_seed = None;
        self.eval.seeds = vec![seed];
        self
    }

    pub fn train_config(&self) -> TrainConfig {
        let (m, t) = (&self.model, &self.training);
        TrainConfig {
            method: t.method,
            alpha: t.alpha,
            beta: t.beta,
            optimizer: t.optimizer,
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            init_seed: t.init_seed.unwrap_or(t.seed),
            shuffle_seed: t.shuffle_seed.unwrap_or(t.seed),
            embedding_dim: m.embedding_dim,
            bottom_dims: m.bottom_dims.clone(),
            guest_bottom_dims: m.guest_bottom_dims.clone(),
            top_dims: m.top_dims.clone(),
            rep_dims: m.rep_dims.clone(),
            distill_update_guest: t.distill_update_guest,
            step2_reinit: t.step2_reinit,
            guest_update: t.guest_update,
        }
    }

    pub fn schemas(&self) -> Result<(FeatureSchema, FeatureSchema)> {
        let d = &self.data;
        let (mut host, guest) = match d.source {
            DataSource::Synthetic => (d.synthetic.host_schema()?, d.synthetic.guest_schema()?),
            DataSource::Csv => {
                let slots = |p: &CsvParty| -> Vec<SlotSpec> {
                    p.slots
                        .iter()
                        .map(|s| SlotSpec {
                            name: s.clone(),
                            vocab_size: p.vocab_size,
                        })
                        .collect()
                };
                (
                    FeatureSchema::new(Party::Host, slots(&d.host), &d.key_column, Some(d.label_column.clone()))?,
                    FeatureSchema::new(Party::Guest, slots(&d.guest), &d.key_column, None)?,
                )
            }
        };
        if let Some(t) = &d.time_column {
            host = host.with_time_column(Some(t.clone()));
        }
        Ok((host, guest))
    }

    pub fn split_rule(&self) -> SplitRule {
        let d = &self.data;
        match d.split {
            SplitKind::Random => SplitRule::Random {
                n_val: d.n_val,
                n_test: d.n_test,
                seed: d.split_seed,
            },
            SplitKind::Time => SplitRule::ByTime {
                val_from: d.val_from.clone().unwrap_or_default(),
                test_from: d.test_from.clone().unwrap_or_default(),
            },
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding (output directory excluded).
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        hex::encode(Sha256::digest(serde_json::to_vec(&c).unwrap_or_default()))
    }
}
