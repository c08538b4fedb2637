use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::federation::GuestUpdate;
use crate::nn::Algorithm;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Two-step training with a representation transfer network.
    Fedud,
    /// Classical split network on aligned data only.
    Fedsplitnn,
    /// Host-only embedding + MLP model.
    LocalDnn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fedud, Method::Fedsplitnn, Method::LocalDnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fedud => "fedud",
            Method::Fedsplitnn => "fedsplitnn",
            Method::LocalDnn => "local_dnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fedud" => Ok(Method::Fedud),
            "fedsplitnn" => Ok(Method::Fedsplitnn),
            "local_dnn" => Ok(Method::LocalDnn),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Every knob of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Weight of the distillation loss in step 1.
    pub alpha: f64,
    /// Weight of the unaligned prediction loss in step 2.
    pub beta: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub embedding_dim: usize,
    /// Host bottom MLP widths; also the local DNN body.
    pub bottom_dims: Vec<usize>,
    /// Guest bottom MLP widths; defaults to `bottom_dims`.
    pub guest_bottom_dims: Option<Vec<usize>>,
    /// Hidden widths of the top model; a width-1 linear output layer is appended.
    pub top_dims: Vec<usize>,
    /// Transfer network widths; the last must equal the guest representation width.
    pub rep_dims: Vec<usize>,
    /// Also send the distillation gradient to the guest in step 1.
    pub distill_update_guest: bool,
    /// Re-initialize everything except the transfer network before step 2.
    pub step2_reinit: bool,
    pub guest_update: GuestUpdate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Fedud,
            alpha: 1.0,
            beta: 1.0,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 20,
            patience: 1,
            init_seed: 0,
            shuffle_seed: 0,
            embedding_dim: 10,
            bottom_dims: vec![512, 256, 128],
            guest_bottom_dims: None,
            top_dims: vec![256, 128],
            rep_dims: vec![128, 128],
            distill_update_guest: false,
            step2_reinit: false,
            guest_update: GuestUpdate::PerBatch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be ≥ 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be ≥ 0, got {}", self.beta));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1".into());
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be ≥ 1".into());
        }
        for (name, dims) in [
            ("bottom_dims", &self.bottom_dims),
            ("top_dims", &self.top_dims),
            ("rep_dims", &self.rep_dims),
        ] {
            if dims.is_empty() || dims.contains(&0) {
                return bad(format!("{name} must be non-empty with positive widths"));
            }
        }
        if let Some(g) = &self.guest_bottom_dims {
            if g.is_empty() || g.contains(&0) {
                return bad("guest_bottom_dims must be non-empty with positive widths".into());
            }
        }
        if self.rep_dims.last() != Some(&self.guest_rep_dim()) {
            return bad(format!(
                "rep_dims must end at the guest representation width {}",
                self.guest_rep_dim()
            ));
        }
        Ok(())
    }

    pub fn guest_dims(&self) -> &[usize] {
        self.guest_bottom_dims.as_deref().unwrap_or(&self.bottom_dims)
    }

    pub fn guest_rep_dim(&self) -> usize {
        *self.guest_dims().last().unwrap_or(&0)
    }

    pub fn host_rep_dim(&self) -> usize {
        *self.bottom_dims.last().unwrap_or(&0)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.optimizer {
            OptimizerKind::Adam => Algorithm::adam(),
            OptimizerKind::Sgd => Algorithm::Sgd,
        }
    }

    /// Sets both the initialization and the shuffling seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self.shuffle_seed = seed;
        self
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).unwrap_or_default()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_negative_weights_and_bad_rep_width() {
        assert!(TrainConfig { alpha: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta: -0.1, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { rep_dims: vec![128, 64], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = TrainConfig::default();
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), a.with_seed(9).digest());
    }
}
