use std::fmt;

use crate::data::Party;
use crate::nn::Tensor;

/// Opaque identifier pairing a forward message with its backward reply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BatchId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlTag {
    BeginEpoch,
    EndEpoch,
    BeginInference,
    EndInference,
}

impl ControlTag {
    pub fn name(self) -> &'static str {
        match self {
            ControlTag::BeginEpoch => "BeginEpoch",
            ControlTag::EndEpoch => "EndEpoch",
            ControlTag::BeginInference => "BeginInference",
            ControlTag::EndInference => "EndInference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "BeginEpoch" => ControlTag::BeginEpoch,
            "EndEpoch" => ControlTag::EndEpoch,
            "BeginInference" => ControlTag::BeginInference,
            "EndInference" => ControlTag::EndInference,
            _ => return None,
        })
    }
}

/// What a message carries. Only real-valued tensors and an opaque batch id
/// can be expressed: no keys, labels or feature indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    ForwardReps { batch_id: BatchId, reps: Tensor },
    BackwardGrads { batch_id: BatchId, grads: Tensor },
    Control(ControlTag),
}

/// The only value that crosses the host/guest boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct PartyMessage {
    sender: Party,
    recipient: Party,
    payload: Payload,
}

impl PartyMessage {
    /// Guest → host representations for one batch.
    pub fn forward_reps(batch_id: BatchId, reps: Tensor) -> Self {
        Self {
            sender: Party::Guest,
            recipient: Party::Host,
            payload: Payload::ForwardReps { batch_id, reps },
        }
    }

    /// Host → guest gradients with respect to the guest representations.
    pub fn backward_grads(batch_id: BatchId, grads: Tensor) -> Self {
        Self {
            sender: Party::Host,
            recipient: Party::Guest,
            payload: Payload::BackwardGrads { batch_id, grads },
        }
    }

    pub fn control(sender: Party, tag: ControlTag) -> Self {
        let recipient = match sender {
            Party::Host => Party::Guest,
            Party::Guest => Party::Host,
        };
        Self {
            sender,
            recipient,
            payload: Payload::Control(tag),
        }
    }

    pub fn sender(&self) -> Party {
        self.sender
    }

    pub fn recipient(&self) -> Party {
        self.recipient
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn into_payload(self) -> Payload {
        self.payload
    }

    pub fn tensor(&self) -> Option<&Tensor> {
        match &self.payload {
            Payload::ForwardReps { reps, .. } => Some(reps),
            Payload::BackwardGrads { grads, .. } => Some(grads),
            Payload::Control(_) => None,
        }
    }

    /// Wire size: one tag byte, then batch id, shape words and `f64` values for tensor payloads.
    pub fn byte_size(&self) -> u64 {
        match self.tensor() {
            Some(t) => 1 + 8 + 8 * t.shape().len() as u64 + 8 * t.len() as u64,
            None => 2,
        }
    }
}

impl fmt::Display for PartyMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Payload::ForwardReps { batch_id, reps } => {
                write!(f, "ForwardReps(batch {}, {:?})", batch_id.0, reps.shape())
            }
            Payload::BackwardGrads { batch_id, grads } => {
                write!(f, "BackwardGrads(batch {}, {:?})", batch_id.0, grads.shape())
            }
            Payload::Control(tag) => write!(f, "Control({})", tag.name()),
        }
    }
}
