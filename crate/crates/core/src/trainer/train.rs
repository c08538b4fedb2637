use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::checkpoint::{template, transplant, Checkpoint, Model, Phase};
use super::config::{Method, TrainConfig};
use super::model::{build_guest, build_host, parameter_digest, LocalDnn, Session};
use super::steps::{aligned_step, paired_step};
use crate::data::{batch_iter, AlignedSet, DatasetSplit, SplitPart, UnalignedSet};
use crate::federation::{ControlTag, GuestParty, HostParty, MessageCounts, Transcript, Transport};
use crate::metrics::auc;
use crate::nn::IndexMatrix;
use crate::{Error, Result};

// step 2 shuffles the unaligned stream with its own permutation
const UNALIGNED_SHUFFLE_SALT: u64 = 0x5eed_0000_0000_0002;

/// Summary of one training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Mean prediction loss on aligned rows (step 1 / split network).
    pub loss1: Option<f64>,
    /// Mean distillation loss.
    pub loss2: Option<f64>,
    /// Mean paired loss (step 2) or local BCE.
    pub loss3: Option<f64>,
    pub val_auc: Option<f64>,
    pub forward_msgs: u64,
    pub backward_msgs: u64,
    pub bytes: u64,
    /// Per-component parameter digests after the epoch.
    pub digests: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochRecord>,
    pub transcript: Transcript,
}

struct EarlyStop {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    misses: usize,
    history: Vec<Option<f64>>,
}

impl EarlyStop {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            misses: 0,
            history: Vec::new(),
        }
    }

    /// Returns (keep these parameters, stop now). Without a usable validation
    /// AUC the latest parameters are kept and training runs to the epoch cap.
    fn observe(&mut self, epoch: usize, val: Option<f64>) -> (bool, bool) {
        self.history.push(val);
        let Some(v) = val else {
            self.best_epoch = epoch;
            return (true, false);
        };
        if self.best.is_none_or(|b| v > b) {
            self.best = Some(v);
            self.best_epoch = epoch;
            self.misses = 0;
            (true, false)
        } else {
            self.misses += 1;
            (false, self.misses >= self.patience.max(1))
        }
    }
}

fn diverged(e: Error, phase: Phase, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Divergence {
            phase: phase.to_string(),
            epoch,
            batch,
        },
        other => other,
    }
}

fn counts_delta(before: MessageCounts, after: MessageCounts) -> MessageCounts {
    MessageCounts {
        forward: after.forward - before.forward,
        backward: after.backward - before.backward,
        control: after.control - before.control,
        bytes: after.bytes - before.bytes,
    }
}

fn federated_digests(s: &Session) -> BTreeMap<String, String> {
    let mut d = BTreeMap::new();
    d.insert("guest".into(), parameter_digest(s.guest.tower()));
    d.insert("host.bottom".into(), parameter_digest(s.host.bottom()));
    d.insert("host.top".into(), parameter_digest(s.host.top()));
    if let Some(r) = s.host.rep() {
        d.insert("host.rep".into(), parameter_digest(r));
    }
    d
}

fn chunks(n: usize, size: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).step_by(size.max(1)).map(move |s| (s..(s + size).min(n)).collect())
}

/// Scores for every aligned row, fetched inside an inference bracket so they
/// never count as training traffic.
pub(crate) fn score_aligned_set(s: &mut Session, set: &AlignedSet, batch_size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut scores = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    if set.is_empty() {
        return Ok((scores, labels));
    }
    s.control(ControlTag::BeginInference)?;
    for idx in chunks(set.len(), batch_size) {
        let b = set.batch(&idx);
        scores.extend_from_slice(s.score_aligned(&b.x_host, &b.x_guest)?.data());
        labels.extend_from_slice(&b.labels);
    }
    s.control(ControlTag::EndInference)?;
    Ok((scores, labels))
}

pub(crate) fn score_unaligned_set(
    score: impl Fn(&IndexMatrix) -> Result<crate::nn::Tensor>,
    set: &UnalignedSet,
    batch_size: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut scores = Vec::with_capacity(set.len());
    let mut labels = Vec::with_capacity(set.len());
    for idx in chunks(set.len(), batch_size) {
        let b = set.batch(&idx);
        scores.extend_from_slice(score(&b.x_host)?.data());
        labels.extend_from_slice(&b.labels);
    }
    Ok((scores, labels))
}

fn require_aligned(split: &DatasetSplit) -> Result<()> {
    if split.train.aligned.is_empty() {
        return Err(Error::Config("no aligned training samples; the key intersection is empty".into()));
    }
    Ok(())
}

/// Step 1 (`with_rep`) or the split-network baseline: aligned rows only.
fn train_aligned(split: &DatasetSplit, cfg: &TrainConfig, with_rep: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    require_aligned(split)?;
    let (method, phase) = if with_rep {
        (Method::Fedud, Phase::Step1)
    } else {
        (Method::Fedsplitnn, Phase::Single)
    };
    let mut s = Session::new(
        build_guest(&split.guest_schema, cfg)?,
        build_host(&split.host_schema, cfg, with_rep)?,
    );
    let train = &split.train.aligned;
    let mut stop = EarlyStop::new(cfg.patience);
    let mut best: Option<(GuestParty, HostParty)> = None;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let before = s.transport.transcript().training_counts();
        s.control(ControlTag::BeginEpoch)?;
        let (mut l1, mut l2, mut seen) = (0.0, 0.0, 0usize);
        for (b, idx) in batch_iter(train.len(), cfg.batch_size, cfg.shuffle_seed, epoch as u64).iter().enumerate() {
            let batch = train.batch(idx);
            let l = aligned_step(&mut s, &batch, cfg.alpha, cfg.distill_update_guest)
                .map_err(|e| diverged(e, phase, epoch, b))?;
            l1 += l.loss1 * idx.len() as f64;
            l2 += l.loss2.unwrap_or(0.0) * idx.len() as f64;
            seen += idx.len();
        }
        s.control(ControlTag::EndEpoch)?;
        let msgs = counts_delta(before, s.transport.transcript().training_counts());
        let (scores, labels) = score_aligned_set(&mut s, &split.val.aligned, cfg.batch_size)?;
        let val = auc(&scores, &labels).ok();
        log::info!("{phase} epoch {epoch}: loss1 {:.5} val_auc {val:?}", l1 / seen as f64);
        epochs.push(EpochRecord {
            phase,
            epoch,
            loss1: Some(l1 / seen as f64),
            loss2: with_rep.then(|| l2 / seen as f64),
            loss3: None,
            val_auc: val,
            forward_msgs: msgs.forward,
            backward_msgs: msgs.backward,
            bytes: msgs.bytes,
            digests: federated_digests(&s),
        });
        let (keep, halt) = stop.observe(epoch, val);
        if keep {
            best = Some((s.guest.clone(), s.host.clone()));
        }
        if halt {
            break;
        }
    }
    let (guest, host) = best.unwrap_or((s.guest, s.host));
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            method,
            phase,
            config: cfg.clone(),
            epoch: stop.best_epoch,
            val_history: stop.history,
            model: Model::Federated { guest, host },
        },
        epochs,
        transcript: s.transport.into_transcript(),
    })
}

pub fn train_step1(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_aligned(split, cfg, true)
}

pub fn train_fedsplitnn(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_aligned(split, cfg, false)
}

/// Warm start from a step-1 checkpoint (only the transfer network when
/// `step2_reinit` is set), freeze the transfer network and train on paired
/// aligned / unaligned batches.
pub fn step2_session(split: &DatasetSplit, cfg: &TrainConfig, step1: &Checkpoint) -> Result<Session> {
    if step1.method != Method::Fedud || step1.phase != Phase::Step1 {
        return Err(Error::Checkpoint(format!(
            "step 2 needs a fedud step-1 checkpoint, got {} {}",
            step1.method, step1.phase
        )));
    }
    let mut comps = template(Method::Fedud, cfg, &split.host_schema, Some(&split.guest_schema), true)?;
    let src = step1.model.clone().into_components();
    let only: Option<&[&str]> = if cfg.step2_reinit { Some(&["host.rep"]) } else { None };
    transplant(&mut comps, &src, only, false)?;
    match Model::from_components(comps, &split.host_schema, Some(&split.guest_schema), cfg, true)? {
        Model::Federated { guest, host } => Ok(Session::new(guest, host)),
        Model::Local(_) => unreachable!("federated template"),
    }
}

pub fn train_step2(split: &DatasetSplit, cfg: &TrainConfig, step1: &Checkpoint) -> Result<TrainOutcome> {
    cfg.validate()?;
    require_aligned(split)?;
    let phase = Phase::Step2;
    let mut s = step2_session(split, cfg, step1)?;
    let (train_a, train_u) = (&split.train.aligned, &split.train.unaligned);
    let use_unaligned = cfg.beta > 0.0 && !train_u.is_empty();
    let mut stop = EarlyStop::new(cfg.patience);
    let mut best: Option<(GuestParty, HostParty)> = None;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let before = s.transport.transcript().training_counts();
        s.control(ControlTag::BeginEpoch)?;
        let a_batches = batch_iter(train_a.len(), cfg.batch_size, cfg.shuffle_seed, epoch as u64);
        let u_batches = if use_unaligned {
            batch_iter(
                train_u.len(),
                cfg.batch_size,
                cfg.shuffle_seed ^ UNALIGNED_SHUFFLE_SALT,
                epoch as u64,
            )
        } else {
            Vec::new()
        };
        let steps = a_batches.len().max(u_batches.len());
        let (mut l3, mut la) = (0.0, 0.0);
        for i in 0..steps {
            let a = train_a.batch(&a_batches[i % a_batches.len()]);
            let u = (!u_batches.is_empty()).then(|| train_u.batch(&u_batches[i % u_batches.len()]));
            let l = paired_step(&mut s, &a, u.as_ref(), cfg.beta).map_err(|e| diverged(e, phase, epoch, i))?;
            l3 += l.loss3;
            la += l.aligned;
        }
        s.control(ControlTag::EndEpoch)?;
        let msgs = counts_delta(before, s.transport.transcript().training_counts());
        let (mut scores, mut labels) = score_aligned_set(&mut s, &split.val.aligned, cfg.batch_size)?;
        let (su, lu) = score_unaligned_set(|x| s.score_unaligned(x), &split.val.unaligned, cfg.batch_size)?;
        scores.extend(su);
        labels.extend(lu);
        let val = auc(&scores, &labels).ok();
        log::info!("{phase} epoch {epoch}: loss3 {:.5} val_auc {val:?}", l3 / steps as f64);
        epochs.push(EpochRecord {
            phase,
            epoch,
            loss1: Some(la / steps as f64),
            loss2: None,
            loss3: Some(l3 / steps as f64),
            val_auc: val,
            forward_msgs: msgs.forward,
            backward_msgs: msgs.backward,
            bytes: msgs.bytes,
            digests: federated_digests(&s),
        });
        let (keep, halt) = stop.observe(epoch, val);
        if keep {
            best = Some((s.guest.clone(), s.host.clone()));
        }
        if halt {
            break;
        }
    }
    let (guest, host) = best.unwrap_or((s.guest, s.host));
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            method: Method::Fedud,
            phase,
            config: cfg.clone(),
            epoch: stop.best_epoch,
            val_history: stop.history,
            model: Model::Federated { guest, host },
        },
        epochs,
        transcript: s.transport.into_transcript(),
    })
}

/// All host rows of a partition (aligned first), as one feature matrix.
fn host_rows(part: &SplitPart) -> Result<(IndexMatrix, Vec<f64>)> {
    let a = part.aligned.batch(&(0..part.aligned.len()).collect::<Vec<_>>());
    let u = part.unaligned.batch(&(0..part.unaligned.len()).collect::<Vec<_>>());
    let cols = a.x_host.cols().max(u.x_host.cols());
    let rows = (0..a.len()).map(|i| a.x_host.row(i)).chain((0..u.len()).map(|i| u.x_host.row(i)));
    let x = IndexMatrix::from_rows(cols, rows)?;
    let mut labels = a.labels;
    labels.extend(u.labels);
    Ok((x, labels))
}

/// Host-only baseline on every host training row; no messages are exchanged.
pub fn train_local_dnn(split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let phase = Phase::Single;
    let (x, y) = host_rows(&split.train)?;
    if y.is_empty() {
        return Err(Error::Config("no host training samples".into()));
    }
    let (vx, vy) = host_rows(&split.val)?;
    let mut model = LocalDnn::init(&split.host_schema, cfg)?;
    let mut stop = EarlyStop::new(cfg.patience);
    let mut best: Option<LocalDnn> = None;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let (mut total, mut seen) = (0.0, 0usize);
        for (b, idx) in batch_iter(y.len(), cfg.batch_size, cfg.shuffle_seed, epoch as u64).iter().enumerate() {
            let labels: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let l = model
                .update(&x.select_rows(idx), &labels)
                .map_err(|e| diverged(e, phase, epoch, b))?;
            total += l * idx.len() as f64;
            seen += idx.len();
        }
        let val = if vy.is_empty() {
            None
        } else {
            let mut scores = Vec::with_capacity(vy.len());
            for idx in chunks(vy.len(), cfg.batch_size) {
                scores.extend_from_slice(model.predict(&vx.select_rows(&idx))?.data());
            }
            auc(&scores, &vy).ok()
        };
        log::info!("local epoch {epoch}: loss {:.5} val_auc {val:?}", total / seen as f64);
        let mut digests = BTreeMap::new();
        digests.insert("local.body".into(), parameter_digest(&model.body));
        digests.insert("local.head".into(), parameter_digest(&model.head));
        epochs.push(EpochRecord {
            phase,
            epoch,
            loss1: None,
            loss2: None,
            loss3: Some(total / seen as f64),
            val_auc: val,
            forward_msgs: 0,
            backward_msgs: 0,
            bytes: 0,
            digests,
        });
        let (keep, halt) = stop.observe(epoch, val);
        if keep {
            best = Some(model.clone());
        }
        if halt {
            break;
        }
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            method: Method::LocalDnn,
            phase,
            config: cfg.clone(),
            epoch: stop.best_epoch,
            val_history: stop.history,
            model: Model::Local(best.unwrap_or(model)),
        },
        epochs,
        transcript: Transcript::new(),
    })
}

/// Every training stage for `cfg.method`, in order; the last one holds the
/// model used for scoring.
pub fn train(split: &DatasetSplit, cfg: &TrainConfig) -> Result<Vec<TrainOutcome>> {
    match cfg.method {
        Method::Fedud => {
            let s1 = train_step1(split, cfg)?;
            let s2 = train_step2(split, cfg, &s1.checkpoint)?;
            Ok(vec![s1, s2])
        }
        Method::Fedsplitnn => Ok(vec![train_fedsplitnn(split, cfg)?]),
        Method::LocalDnn => Ok(vec![train_local_dnn(split, cfg)?]),
    }
}
