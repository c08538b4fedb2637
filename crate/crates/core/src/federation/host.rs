use super::message::{Payload, PartyMessage, BatchId};
use crate::data::FeatureSchema;
use crate::nn::{sigmoid, Algorithm, GradientSet, IndexMatrix, Mlp, MlpCache, OptimizerState, Tensor, Tower, TowerCache};
use crate::{Error, Result};

/// Forward state of the aligned path `ŷ = σ(f_top([h_host, h_guest]))`.
#[derive(Clone, Debug)]
pub struct AlignedCache {
    pub bottom: TowerCache,
    pub top: MlpCache,
    pub h_host: Tensor,
}

/// Forward state of the unaligned path, where the guest representation is
/// inferred by the transfer network: `ŷ = σ(f_top([h_host, rep(h_host)]))`.
#[derive(Clone, Debug)]
pub struct UnalignedCache {
    pub bottom: TowerCache,
    pub rep: MlpCache,
    pub top: MlpCache,
    pub h_host: Tensor,
    pub h_guest: Tensor,
}

/// Parameter gradients for every host component.
#[derive(Clone, Debug)]
pub struct HostGrads {
    pub bottom: GradientSet,
    pub top: GradientSet,
    pub rep: Option<GradientSet>,
}

#[derive(Clone, Debug)]
pub struct HostOptimizers {
    pub bottom: OptimizerState,
    pub top: OptimizerState,
    pub rep: Option<OptimizerState>,
}

/// The labelled party: bottom tower, top model and (optionally) the
/// representation transfer network.
#[derive(Clone, Debug)]
pub struct HostParty {
    schema: FeatureSchema,
    bottom: Tower,
    top: Mlp,
    rep: Option<Mlp>,
    rep_frozen: bool,
    optimizers: HostOptimizers,
    guest_rep_dim: usize,
}

impl HostParty {
    pub fn new(
        schema: FeatureSchema,
        bottom: Tower,
        top: Mlp,
        rep: Option<Mlp>,
        guest_rep_dim: usize,
        algorithm: Algorithm,
        lr: f64,
    ) -> Result<Self> {
        let optimizers = HostOptimizers {
            bottom: OptimizerState::new(algorithm, lr, &bottom),
            top: OptimizerState::new(algorithm, lr, &top),
            rep: rep.as_ref().map(|r| OptimizerState::new(algorithm, lr, r)),
        };
        Self::from_parts(schema, bottom, top, rep, guest_rep_dim, optimizers)
    }

    pub fn from_parts(
        schema: FeatureSchema,
        bottom: Tower,
        top: Mlp,
        rep: Option<Mlp>,
        guest_rep_dim: usize,
        optimizers: HostOptimizers,
    ) -> Result<Self> {
        let dim = |component: &str, expected: usize, found: usize| -> Result<()> {
            if expected != found {
                return Err(Error::DimMismatch {
                    component: component.into(),
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
            Ok(())
        };
        dim("host.bottom slots", schema.num_slots(), bottom.embeddings.num_slots())?;
        dim("host.top input", bottom.out_dim() + guest_rep_dim, top.in_dim())?;
        dim("host.top output", 1, top.out_dim())?;
        if let Some(r) = &rep {
            dim("host.rep input", bottom.out_dim(), r.in_dim())?;
            dim("host.rep output", guest_rep_dim, r.out_dim())?;
        }
        if rep.is_some() != optimizers.rep.is_some() {
            return Err(Error::Config("rep network and rep optimizer must both be present".into()));
        }
        Ok(Self {
            schema,
            bottom,
            top,
            rep,
            rep_frozen: false,
            optimizers,
            guest_rep_dim,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn bottom(&self) -> &Tower {
        &self.bottom
    }

    pub fn top(&self) -> &Mlp {
        &self.top
    }

    pub fn rep(&self) -> Option<&Mlp> {
        self.rep.as_ref()
    }

    pub fn optimizers(&self) -> &HostOptimizers {
        &self.optimizers
    }

    pub fn guest_rep_dim(&self) -> usize {
        self.guest_rep_dim
    }

    pub fn rep_frozen(&self) -> bool {
        self.rep_frozen
    }

    /// Once frozen, [`apply`](Self::apply) never touches the transfer network.
    pub fn freeze_rep(&mut self) {
        self.rep_frozen = true;
    }

    pub fn into_parts(self) -> (Tower, Mlp, Option<Mlp>, HostOptimizers) {
        (self.bottom, self.top, self.rep, self.optimizers)
    }

    /// Extract the guest representations from a `ForwardReps` message.
    pub fn receive_reps(&self, msg: PartyMessage, expected: BatchId) -> Result<Tensor> {
        match msg.into_payload() {
            Payload::ForwardReps { batch_id, reps } if batch_id == expected => {
                self.check_guest_width(&reps)?;
                Ok(reps)
            }
            Payload::ForwardReps { batch_id, .. } => Err(Error::Protocol(format!(
                "expected representations for batch {}, got batch {}",
                expected.0, batch_id.0
            ))),
            other => Err(Error::Protocol(format!("host expected ForwardReps, got {other:?}"))),
        }
    }

    fn check_guest_width(&self, h_guest: &Tensor) -> Result<()> {
        if h_guest.shape().len() != 2 || h_guest.cols() != self.guest_rep_dim {
            return Err(Error::Protocol(format!(
                "guest representation shape {:?}, expected width {}",
                h_guest.shape(),
                self.guest_rep_dim
            )));
        }
        Ok(())
    }

    pub fn forward_aligned(&self, x_host: &IndexMatrix, h_guest: &Tensor) -> Result<(Tensor, AlignedCache)> {
        self.check_guest_width(h_guest)?;
        if h_guest.rows() != x_host.rows() {
            return Err(Error::Protocol(format!(
                "{} guest representations for {} host rows",
                h_guest.rows(),
                x_host.rows()
            )));
        }
        let (h_host, bottom) = self.bottom.forward(x_host)?;
        let joined = Tensor::concat_cols(&[&h_host, h_guest])?;
        let (logits, top) = self.top.forward(&joined)?;
        Ok((sigmoid(&logits), AlignedCache { bottom, top, h_host }))
    }

    pub fn forward_unaligned(&self, x_host: &IndexMatrix) -> Result<(Tensor, UnalignedCache)> {
        let rep = self
            .rep
            .as_ref()
            .ok_or_else(|| Error::Config("this host has no representation transfer network".into()))?;
        let (h_host, bottom) = self.bottom.forward(x_host)?;
        let (h_guest, rep_cache) = rep.forward(&h_host)?;
        let joined = Tensor::concat_cols(&[&h_host, &h_guest])?;
        let (logits, top) = self.top.forward(&joined)?;
        Ok((
            sigmoid(&logits),
            UnalignedCache {
                bottom,
                rep: rep_cache,
                top,
                h_host,
                h_guest,
            },
        ))
    }

    /// Inference for rows without guest features when there is no transfer
    /// network: the guest representation is imputed as zeros.
    pub fn predict_imputed(&self, x_host: &IndexMatrix) -> Result<Tensor> {
        let h_host = self.bottom.infer(x_host)?;
        let zeros = Tensor::zeros(&[x_host.rows(), self.guest_rep_dim]);
        let logits = self.top.infer(&Tensor::concat_cols(&[&h_host, &zeros])?)?;
        Ok(sigmoid(&logits))
    }

    /// Top-model gradients plus the input gradient split into its host and guest halves.
    pub fn backward_top(&self, cache: &MlpCache, d_logits: &Tensor) -> Result<(GradientSet, Tensor, Tensor)> {
        let (grads, d_joined) = self.top.backward(cache, d_logits)?;
        let (d_host, d_guest) = d_joined.split_cols(self.bottom.out_dim())?;
        Ok((grads, d_host, d_guest))
    }

    pub fn backward_rep(&self, cache: &MlpCache, d_out: &Tensor) -> Result<(GradientSet, Tensor)> {
        let rep = self
            .rep
            .as_ref()
            .ok_or_else(|| Error::Config("this host has no representation transfer network".into()))?;
        rep.backward(cache, d_out)
    }

    pub fn backward_bottom(&self, cache: &TowerCache, d_h_host: &Tensor) -> Result<GradientSet> {
        self.bottom.backward(cache, d_h_host)
    }

    /// One optimizer step on every host component; the transfer network is
    /// skipped while frozen.
    pub fn apply(&mut self, grads: &HostGrads) -> Result<()> {
        self.optimizers.bottom.apply(&mut self.bottom, &grads.bottom)?;
        self.optimizers.top.apply(&mut self.top, &grads.top)?;
        if self.rep_frozen {
            return Ok(());
        }
        if let (Some(rep), Some(opt), Some(g)) = (self.rep.as_mut(), self.optimizers.rep.as_mut(), grads.rep.as_ref()) {
            opt.apply(rep, g)?;
        }
        Ok(())
    }
}
