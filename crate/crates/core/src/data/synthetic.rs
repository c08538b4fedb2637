//! Seeded generator for two-party CTR-like data with a shared latent cause.
//!
//! Every sample draws a latent vector `u ∈ ℝ⁴`. Each host slot is a quantized
//! noisy projection of `u`; each guest slot is a quantized projection through
//! an independent direction with (by default) less noise. The label is
//! `Bernoulli(sigmoid(w·u + label_noise·ε))`, so the guest's view of `u`
//! carries label signal the host cannot fully recover on its own.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, Party, Sample};
use super::table::RawTable;
use crate::{Error, Result};

pub const LATENT_DIM: usize = 4;

// independent RNG streams, so changing one party's slot count leaves the other party's data unchanged
const STREAM_HOST_PROJ: u64 = 1;
const STREAM_GUEST_PROJ: u64 = 2;
const STREAM_LATENT: u64 = 3;
const STREAM_LABEL_W: u64 = 4;
const STREAM_HOST_NOISE: u64 = 5;
const STREAM_GUEST_NOISE: u64 = 6;
const STREAM_LABEL: u64 = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub aligned_fraction: f64,
    pub host_slots: usize,
    pub guest_slots: usize,
    pub vocab_size: usize,
    /// Std-dev of Gaussian noise added to the label logit.
    pub label_noise: f64,
    pub seed: u64,
    /// Quantization levels per slot before hashing.
    pub n_bins: usize,
    /// Std-dev of per-slot observation noise on the host side.
    pub host_noise: f64,
    /// Std-dev of per-slot observation noise on the guest side.
    pub guest_noise: f64,
    /// Norm of the label weight vector `w`.
    pub signal_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 70_000,
            aligned_fraction: 0.6,
            host_slots: 10,
            guest_slots: 12,
            vocab_size: 1000,
            label_noise: 1.0,
            seed: 0,
            n_bins: 32,
            host_noise: 1.0,
            guest_noise: 0.3,
            signal_scale: 1.5,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.aligned_fraction) {
            return Err(Error::Config(format!(
                "aligned_fraction {} is outside [0, 1]",
                self.aligned_fraction
            )));
        }
        if self.host_slots == 0 || self.guest_slots == 0 {
            return Err(Error::Config("slot counts must be at least 1".into()));
        }
        if self.vocab_size < 2 || self.n_bins < 1 {
            return Err(Error::Config("vocab_size must be ≥ 2 and n_bins ≥ 1".into()));
        }
        for (name, v) in [
            ("label_noise", self.label_noise),
            ("host_noise", self.host_noise),
            ("guest_noise", self.guest_noise),
            ("signal_scale", self.signal_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }

    pub fn n_aligned(&self) -> usize {
        (self.aligned_fraction * self.n_samples as f64).ceil() as usize
    }

    pub fn host_schema(&self) -> Result<FeatureSchema> {
        let names: Vec<String> = (0..self.host_slots).map(|i| format!("h{i}")).collect();
        FeatureSchema::uniform(Party::Host, &names, self.vocab_size, "key", Some("click"))
    }

    pub fn guest_schema(&self) -> Result<FeatureSchema> {
        let names: Vec<String> = (0..self.guest_slots).map(|i| format!("g{i}")).collect();
        FeatureSchema::uniform(Party::Guest, &names, self.vocab_size, "key", None)
    }
}

/// Generated raw tables for both parties plus the matching schemas.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub host_schema: FeatureSchema,
    pub guest_schema: FeatureSchema,
    pub host: RawTable,
    pub guest: RawTable,
}

impl SyntheticData {
    pub fn host_samples(&self) -> Result<Vec<Sample>> {
        self.host.to_samples(&self.host_schema, Path::new("<synthetic host>"))
    }

    pub fn guest_samples(&self) -> Result<Vec<Sample>> {
        self.guest.to_samples(&self.guest_schema, Path::new("<synthetic guest>"))
    }
}

fn unit_vectors(count: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; LATENT_DIM]> {
    (0..count)
        .map(|_| {
            let mut v = [0.0; LATENT_DIM];
            for x in &mut v {
                *x = rng.sample(StandardNormal);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.map(|x| x / norm)
        })
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn quantize(value: f64, spread: f64, n_bins: usize) -> usize {
    // standardized value mapped from [-3, 3] onto the bins, clamped at the edges
    let z = value / spread;
    let pos = ((z + 3.0) / 6.0 * n_bins as f64).floor();
    pos.clamp(0.0, (n_bins - 1) as f64) as usize
}

fn project(p: &[f64; LATENT_DIM], u: &[f64; LATENT_DIM]) -> f64 {
    p.iter().zip(u).map(|(a, b)| a * b).sum()
}

pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let host_proj = unit_vectors(cfg.host_slots, &mut stream(cfg.seed, STREAM_HOST_PROJ));
    let guest_proj = unit_vectors(cfg.guest_slots, &mut stream(cfg.seed, STREAM_GUEST_PROJ));
    let w = unit_vectors(1, &mut stream(cfg.seed, STREAM_LABEL_W))[0].map(|x| x * cfg.signal_scale);
    let mut latent_rng = stream(cfg.seed, STREAM_LATENT);
    let mut host_rng = stream(cfg.seed, STREAM_HOST_NOISE);
    let mut guest_rng = stream(cfg.seed, STREAM_GUEST_NOISE);
    let mut label_rng = stream(cfg.seed, STREAM_LABEL);
    let host_spread = (1.0 + cfg.host_noise * cfg.host_noise).sqrt();
    let guest_spread = (1.0 + cfg.guest_noise * cfg.guest_noise).sqrt();

    let host_schema = cfg.host_schema()?;
    let guest_schema = cfg.guest_schema()?;
    let mut host_header = vec!["key".to_string(), "click".to_string()];
    host_header.extend(host_schema.slot_names());
    let mut guest_header = vec!["key".to_string()];
    guest_header.extend(guest_schema.slot_names());
    let mut host = RawTable::new(host_header);
    let mut guest = RawTable::new(guest_header);

    let n_aligned = cfg.n_aligned();
    for i in 0..cfg.n_samples {
        let mut u = [0.0; LATENT_DIM];
        for x in &mut u {
            *x = latent_rng.sample(StandardNormal);
        }
        let eps: f64 = label_rng.sample(StandardNormal);
        let logit = project(&w, &u) + cfg.label_noise * eps;
        let click = label_rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp());

        let key = if i < n_aligned {
            format!("d{i:08}")
        } else {
            format!("h{i:08}")
        };
        let mut row = vec![key.clone(), if click { "1" } else { "0" }.to_string()];
        for p in &host_proj {
            let noise: f64 = host_rng.sample(StandardNormal);
            let v = project(p, &u) + cfg.host_noise * noise;
            row.push(format!("v{}", quantize(v, host_spread, cfg.n_bins)));
        }
        host.push(row);

        // guest noise is drawn for every sample so aligned_fraction does not shift the stream
        let mut grow = vec![key];
        for p in &guest_proj {
            let noise: f64 = guest_rng.sample(StandardNormal);
            let v = project(p, &u) + cfg.guest_noise * noise;
            grow.push(format!("v{}", quantize(v, guest_spread, cfg.n_bins)));
        }
        if i < n_aligned {
            guest.push(grow);
        }
    }
    Ok(SyntheticData {
        host_schema,
        guest_schema,
        host,
        guest,
    })
}
