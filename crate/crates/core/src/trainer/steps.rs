//! Single-batch parameter updates. Each function runs one complete
//! forward / backward / optimizer round over both parties.

use serde::{Deserialize, Serialize};

use super::model::{zero_grads, Session};
use crate::data::{AlignedBatch, UnalignedBatch};
use crate::federation::HostGrads;
use crate::nn::{bce_loss, mse_loss};
use crate::{Error, Result};

/// Losses observed on one aligned batch of step 1 (or the split-network baseline).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedLosses {
    pub loss1: f64,
    /// Distillation loss; absent without a transfer network.
    pub loss2: Option<f64>,
    /// `loss1 + α·loss2`
    pub total: f64,
}

/// Losses observed on one paired step of step 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedLosses {
    pub aligned: f64,
    /// Absent when the step carried no unaligned rows.
    pub unaligned: Option<f64>,
    /// `aligned + β·unaligned`
    pub loss3: f64,
}

/// One aligned update. With a transfer network on the host, the distillation
/// loss `‖rep(h_host) − h_guest‖²` is added with weight `alpha`; `h_guest` is
/// a constant there unless `distill_to_guest` is set.
pub fn aligned_step(
    s: &mut Session,
    batch: &AlignedBatch,
    alpha: f64,
    distill_to_guest: bool,
) -> Result<AlignedLosses> {
    if batch.is_empty() {
        return Err(Error::Shape("empty aligned batch".into()));
    }
    let (id, h_guest) = s.exchange_train_reps(&batch.x_guest)?;
    let (y_hat, cache) = s.host.forward_aligned(&batch.x_host, &h_guest)?;
    let (loss1, d_logits) = bce_loss(&y_hat, &batch.labels)?;
    let (top, mut d_host, mut d_guest) = s.host.backward_top(&cache.top, &d_logits)?;

    let mut loss2 = None;
    let mut rep_grads = None;
    if let Some(rep) = s.host.rep() {
        let (h_tilde, rep_cache) = rep.forward(&cache.h_host)?;
        let (l2, d_tilde) = mse_loss(&h_tilde, &h_guest)?;
        loss2 = Some(l2);
        if alpha > 0.0 {
            let scaled = d_tilde.scale(alpha);
            let (g, d_from_rep) = s.host.backward_rep(&rep_cache, &scaled)?;
            d_host.add_assign(&d_from_rep)?;
            if distill_to_guest {
                d_guest.add_assign(&scaled.scale(-1.0))?;
            }
            rep_grads = Some(g);
        } else {
            rep_grads = Some(zero_grads(rep));
        }
    }
    let bottom = s.host.backward_bottom(&cache.bottom, &d_host)?;
    s.host.apply(&HostGrads {
        bottom,
        top,
        rep: rep_grads,
    })?;
    d_guest.ensure_finite("guest gradient")?;
    s.send_guest_grads(id, d_guest)?;
    let total = loss1 + alpha * loss2.unwrap_or(0.0);
    if !total.is_finite() {
        return Err(Error::NonFinite("aligned loss"));
    }
    Ok(AlignedLosses { loss1, loss2, total })
}

/// One paired update: an aligned batch through both parties, plus an optional
/// host-only batch through the frozen transfer network. Gradients from both
/// halves are summed before a single host step; the transfer network itself
/// never moves.
pub fn paired_step(
    s: &mut Session,
    aligned: &AlignedBatch,
    unaligned: Option<&UnalignedBatch>,
    beta: f64,
) -> Result<PairedLosses> {
    if aligned.is_empty() {
        return Err(Error::Shape("empty aligned batch".into()));
    }
    let (id, h_guest) = s.exchange_train_reps(&aligned.x_guest)?;
    let (y_a, cache_a) = s.host.forward_aligned(&aligned.x_host, &h_guest)?;
    let (loss_a, d_a) = bce_loss(&y_a, &aligned.labels)?;
    let (mut top, d_host_a, d_guest) = s.host.backward_top(&cache_a.top, &d_a)?;
    let mut bottom = s.host.backward_bottom(&cache_a.bottom, &d_host_a)?;

    let mut loss_u = None;
    if let Some(u) = unaligned.filter(|u| !u.is_empty()) {
        let (y_u, cache_u) = s.host.forward_unaligned(&u.x_host)?;
        let (l, d_u) = bce_loss(&y_u, &u.labels)?;
        loss_u = Some(l);
        let (top_u, mut d_host_u, d_rep_out) = s.host.backward_top(&cache_u.top, &d_u.scale(beta))?;
        let (_, d_from_rep) = s.host.backward_rep(&cache_u.rep, &d_rep_out)?;
        d_host_u.add_assign(&d_from_rep)?;
        top.add_assign(&top_u)?;
        bottom.add_assign(&s.host.backward_bottom(&cache_u.bottom, &d_host_u)?)?;
    }
    s.host.apply(&HostGrads { bottom, top, rep: None })?;
    d_guest.ensure_finite("guest gradient")?;
    s.send_guest_grads(id, d_guest)?;
    let loss3 = loss_a + beta * loss_u.unwrap_or(0.0);
    if !loss3.is_finite() {
        return Err(Error::NonFinite("paired loss"));
    }
    Ok(PairedLosses {
        aligned: loss_a,
        unaligned: loss_u,
        loss3,
    })
}
