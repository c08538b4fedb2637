use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::message::{BatchId, ControlTag, Payload, PartyMessage};
use crate::data::FeatureSchema;
use crate::nn::{Algorithm, Embeddings, GradientSet, IndexMatrix, Mlp, Activation, OptimizerState, Tower, TowerCache};
use crate::{Error, Result};

/// When the guest applies its accumulated gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuestUpdate {
    /// One optimizer step per backward message.
    #[default]
    PerBatch,
    /// Sum gradients over the epoch and step once on `EndEpoch`.
    PerEpoch,
}

/// The feature-only party: an embedding front-end and bottom MLP. It never
/// sees labels, host features or keys.
#[derive(Clone, Debug)]
pub struct GuestParty {
    schema: FeatureSchema,
    tower: Tower,
    optimizer: OptimizerState,
    update: GuestUpdate,
    caches: HashMap<BatchId, TowerCache>,
    pending: Option<GradientSet>,
}

impl GuestParty {
    pub fn new(schema: FeatureSchema, tower: Tower, optimizer: OptimizerState, update: GuestUpdate) -> Result<Self> {
        if tower.embeddings.num_slots() != schema.num_slots() {
            return Err(Error::Schema(format!(
                "guest model has {} slots, schema has {}",
                tower.embeddings.num_slots(),
                schema.num_slots()
            )));
        }
        Ok(Self {
            schema,
            tower,
            optimizer,
            update,
            caches: HashMap::new(),
            pending: None,
        })
    }

    /// Fresh bottom model: ReLU MLP of widths `dims` over `embedding_dim`-wide slot embeddings.
    pub fn init<R: Rng + ?Sized>(
        schema: FeatureSchema,
        embedding_dim: usize,
        dims: &[usize],
        algorithm: Algorithm,
        lr: f64,
        update: GuestUpdate,
        rng: &mut R,
    ) -> Result<Self> {
        let embeddings = Embeddings::init(&schema.vocab(), embedding_dim, rng);
        let mlp = Mlp::init(embeddings.out_dim(), dims, Activation::Relu, rng)?;
        let tower = Tower::new(embeddings, mlp)?;
        let optimizer = OptimizerState::new(algorithm, lr, &tower);
        Self::new(schema, tower, optimizer, update)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn rep_dim(&self) -> usize {
        self.tower.out_dim()
    }

    pub fn update_rule(&self) -> GuestUpdate {
        self.update
    }

    /// Pending caches and accumulated gradients are dropped.
    pub fn into_parts(self) -> (FeatureSchema, Tower, OptimizerState, GuestUpdate) {
        (self.schema, self.tower, self.optimizer, self.update)
    }

    pub fn open_batches(&self) -> usize {
        self.caches.len()
    }

    /// Compute representations for a training batch and keep the forward
    /// cache under `batch_id` for the matching backward message.
    pub fn forward(&mut self, x_guest: &IndexMatrix, batch_id: BatchId) -> Result<PartyMessage> {
        if self.caches.contains_key(&batch_id) {
            return Err(Error::Protocol(format!("batch {} is already open", batch_id.0)));
        }
        let (reps, cache) = self.tower.forward(x_guest)?;
        self.caches.insert(batch_id, cache);
        Ok(PartyMessage::forward_reps(batch_id, reps))
    }

    /// Representations for inference; nothing is retained.
    pub fn forward_inference(&self, x_guest: &IndexMatrix, batch_id: BatchId) -> Result<PartyMessage> {
        Ok(PartyMessage::forward_reps(batch_id, self.tower.infer(x_guest)?))
    }

    /// Consume a `BackwardGrads` message: backpropagate into the embeddings
    /// and MLP, then step (or accumulate, under [`GuestUpdate::PerEpoch`]).
    pub fn backward(&mut self, msg: PartyMessage) -> Result<()> {
        let Payload::BackwardGrads { batch_id, grads } = msg.into_payload() else {
            return Err(Error::Protocol("guest expected a BackwardGrads message".into()));
        };
        let cache = self
            .caches
            .remove(&batch_id)
            .ok_or_else(|| Error::Protocol(format!("no open forward pass for batch {}", batch_id.0)))?;
        let param_grads = self.tower.backward(&cache, &grads)?;
        match self.update {
            GuestUpdate::PerBatch => self.optimizer.apply(&mut self.tower, &param_grads),
            GuestUpdate::PerEpoch => {
                match &mut self.pending {
                    Some(acc) => acc.add_assign(&param_grads)?,
                    None => self.pending = Some(param_grads),
                }
                Ok(())
            }
        }
    }

    /// React to a control message from the host.
    pub fn control(&mut self, msg: PartyMessage) -> Result<()> {
        match msg.payload() {
            Payload::Control(ControlTag::EndEpoch) => {
                if let Some(acc) = self.pending.take() {
                    self.optimizer.apply(&mut self.tower, &acc)?;
                }
                Ok(())
            }
            Payload::Control(_) => Ok(()),
            _ => Err(Error::Protocol(format!("guest expected a control message, got {msg}"))),
        }
    }
}
