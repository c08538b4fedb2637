use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use crate::data::FeatureSchema;
use crate::federation::{
    BatchId, ControlTag, GuestParty, HostParty, InProcessTransport, PartyMessage, Transport,
};
use crate::data::Party;
use crate::nn::{
    bce_loss, sigmoid, Activation, Embeddings, GradientSet, IndexMatrix, Mlp, OptimizerState, Parameterized,
    Tensor, Tower,
};
use crate::Result;

// one RNG stream per component, so adding or dropping the transfer network
// leaves every other component's initial weights untouched
const STREAM_GUEST: u64 = 11;
const STREAM_HOST_BOTTOM: u64 = 12;
const STREAM_TOP: u64 = 13;
const STREAM_REP: u64 = 14;
const STREAM_LOCAL_HEAD: u64 = 15;

fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn host_tower(schema: &FeatureSchema, cfg: &TrainConfig) -> Result<Tower> {
    let mut rng = component_rng(cfg.init_seed, STREAM_HOST_BOTTOM);
    let embeddings = Embeddings::init(&schema.vocab(), cfg.embedding_dim, &mut rng);
    let mlp = Mlp::init(embeddings.out_dim(), &cfg.bottom_dims, Activation::Relu, &mut rng)?;
    Tower::new(embeddings, mlp)
}

pub fn build_guest(schema: &FeatureSchema, cfg: &TrainConfig) -> Result<GuestParty> {
    GuestParty::init(
        schema.clone(),
        cfg.embedding_dim,
        cfg.guest_dims(),
        cfg.algorithm(),
        cfg.lr,
        cfg.guest_update,
        &mut component_rng(cfg.init_seed, STREAM_GUEST),
    )
}

pub fn build_top(cfg: &TrainConfig) -> Result<Mlp> {
    let mut dims = cfg.top_dims.clone();
    dims.push(1);
    Mlp::init(
        cfg.host_rep_dim() + cfg.guest_rep_dim(),
        &dims,
        Activation::Linear,
        &mut component_rng(cfg.init_seed, STREAM_TOP),
    )
}

pub fn build_rep(cfg: &TrainConfig) -> Result<Mlp> {
    Mlp::init(
        cfg.host_rep_dim(),
        &cfg.rep_dims,
        Activation::Linear,
        &mut component_rng(cfg.init_seed, STREAM_REP),
    )
}

pub fn build_host(schema: &FeatureSchema, cfg: &TrainConfig, with_rep: bool) -> Result<HostParty> {
    let rep = if with_rep { Some(build_rep(cfg)?) } else { None };
    HostParty::new(
        schema.clone(),
        host_tower(schema, cfg)?,
        build_top(cfg)?,
        rep,
        cfg.guest_rep_dim(),
        cfg.algorithm(),
        cfg.lr,
    )
}

/// Host-only baseline: the host bottom tower followed by a linear scalar head.
#[derive(Clone, Debug)]
pub struct LocalDnn {
    pub schema: FeatureSchema,
    pub body: Tower,
    pub head: Mlp,
    pub body_optimizer: OptimizerState,
    pub head_optimizer: OptimizerState,
}

impl LocalDnn {
    pub fn init(schema: &FeatureSchema, cfg: &TrainConfig) -> Result<Self> {
        let body = host_tower(schema, cfg)?;
        let head = Mlp::init(
            body.out_dim(),
            &[1],
            Activation::Linear,
            &mut component_rng(cfg.init_seed, STREAM_LOCAL_HEAD),
        )?;
        Ok(Self {
            schema: schema.clone(),
            body_optimizer: OptimizerState::new(cfg.algorithm(), cfg.lr, &body),
            head_optimizer: OptimizerState::new(cfg.algorithm(), cfg.lr, &head),
            body,
            head,
        })
    }

    pub fn predict(&self, x: &IndexMatrix) -> Result<Tensor> {
        Ok(sigmoid(&self.head.infer(&self.body.infer(x)?)?))
    }

    /// One optimizer step on a mini-batch; returns the batch BCE.
    pub fn update(&mut self, x: &IndexMatrix, labels: &[f64]) -> Result<f64> {
        let (h, body_cache) = self.body.forward(x)?;
        let (logits, head_cache) = self.head.forward(&h)?;
        let (loss, d_logits) = bce_loss(&sigmoid(&logits), labels)?;
        let (head_grads, d_h) = self.head.backward(&head_cache, &d_logits)?;
        let body_grads = self.body.backward(&body_cache, &d_h)?;
        self.head_optimizer.apply(&mut self.head, &head_grads)?;
        self.body_optimizer.apply(&mut self.body, &body_grads)?;
        Ok(loss)
    }
}

/// Hex SHA-256 over the little-endian bytes of every parameter.
pub fn parameter_digest<P: Parameterized + ?Sized>(p: &P) -> String {
    let mut h = Sha256::new();
    for t in p.parameters() {
        h.update(t.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Both parties wired through an in-process transport. The host drives the
/// protocol; every exchange below is one send followed by the matching receive.
#[derive(Debug)]
pub struct Session {
    pub guest: GuestParty,
    pub host: HostParty,
    pub transport: InProcessTransport,
    next_batch: u64,
}

impl Session {
    pub fn new(guest: GuestParty, host: HostParty) -> Self {
        Self {
            guest,
            host,
            transport: InProcessTransport::new(),
            next_batch: 0,
        }
    }

    fn fresh_id(&mut self) -> BatchId {
        let id = BatchId(self.next_batch);
        self.next_batch += 1;
        id
    }

    /// Guest forward pass for training (cache retained), delivered to the host.
    pub fn exchange_train_reps(&mut self, x_guest: &IndexMatrix) -> Result<(BatchId, Tensor)> {
        let id = self.fresh_id();
        let msg = self.guest.forward(x_guest, id)?;
        self.transport.send(msg)?;
        let msg = self.transport.recv(Party::Host)?;
        Ok((id, self.host.receive_reps(msg, id)?))
    }

    /// Guest forward pass for scoring; nothing is retained by the guest.
    pub fn exchange_inference_reps(&mut self, x_guest: &IndexMatrix) -> Result<Tensor> {
        let id = self.fresh_id();
        let msg = self.guest.forward_inference(x_guest, id)?;
        self.transport.send(msg)?;
        let msg = self.transport.recv(Party::Host)?;
        self.host.receive_reps(msg, id)
    }

    pub fn send_guest_grads(&mut self, id: BatchId, grads: Tensor) -> Result<()> {
        self.transport.send(PartyMessage::backward_grads(id, grads))?;
        let msg = self.transport.recv(Party::Guest)?;
        self.guest.backward(msg)
    }

    pub fn control(&mut self, tag: ControlTag) -> Result<()> {
        self.transport.send(PartyMessage::control(Party::Host, tag))?;
        let msg = self.transport.recv(Party::Guest)?;
        self.guest.control(msg)
    }

    /// Host-side probabilities for aligned rows, guest representations
    /// fetched inside an inference bracket.
    pub fn score_aligned(&mut self, x_host: &IndexMatrix, x_guest: &IndexMatrix) -> Result<Tensor> {
        let h_guest = self.exchange_inference_reps(x_guest)?;
        let h_host = self.host.bottom().infer(x_host)?;
        let logits = self.host.top().infer(&Tensor::concat_cols(&[&h_host, &h_guest])?)?;
        Ok(sigmoid(&logits))
    }

    /// Probabilities for host-only rows: through the transfer network when
    /// present, otherwise with a zero guest representation.
    pub fn score_unaligned(&self, x_host: &IndexMatrix) -> Result<Tensor> {
        match self.host.rep() {
            Some(rep) => {
                let h_host = self.host.bottom().infer(x_host)?;
                let h_guest = rep.infer(&h_host)?;
                let logits = self.host.top().infer(&Tensor::concat_cols(&[&h_host, &h_guest])?)?;
                Ok(sigmoid(&logits))
            }
            None => self.host.predict_imputed(x_host),
        }
    }
}

pub(crate) fn zero_grads<P: Parameterized + ?Sized>(p: &P) -> GradientSet {
    GradientSet::zeros_like(p)
}
