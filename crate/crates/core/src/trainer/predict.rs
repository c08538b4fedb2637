use super::checkpoint::{Checkpoint, Model};
use super::config::Method;
use super::model::Session;
use super::train::{score_aligned_set, score_unaligned_set};
use crate::data::SplitPart;
use crate::federation::{Transcript, Transport};
use crate::metrics::{Prediction, PredictionSet, Slice};
use crate::{Error, Result};

/// Score every row of `part`: aligned rows first (in set order), then
/// unaligned rows. Returns the predictions and the messages exchanged.
pub fn predict(ckpt: &Checkpoint, part: &SplitPart, method: Method) -> Result<(PredictionSet, Transcript)> {
    if ckpt.method != method {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a {} model, asked to score with {method}",
            ckpt.method
        )));
    }
    let bs = ckpt.config.batch_size;
    let ((sa, la), (su, lu), transcript) = match &ckpt.model {
        Model::Federated { guest, host } => {
            let mut s = Session::new(guest.clone(), host.clone());
            let a = score_aligned_set(&mut s, &part.aligned, bs)?;
            let u = score_unaligned_set(|x| s.score_unaligned(x), &part.unaligned, bs)?;
            (a, u, s.transport.transcript().clone())
        }
        Model::Local(m) => {
            let a = score_unaligned_set(|x| m.predict(x), &as_host_only(part)?, bs)?;
            let u = score_unaligned_set(|x| m.predict(x), &part.unaligned, bs)?;
            (a, u, Transcript::new())
        }
    };
    let mut rows = Vec::with_capacity(part.len());
    for ((key, score), label) in part.aligned.keys().iter().zip(sa).zip(la) {
        rows.push(Prediction { key: key.clone(), label, score, slice: Slice::Aligned });
    }
    for ((key, score), label) in part.unaligned.keys().iter().zip(su).zip(lu) {
        rows.push(Prediction { key: key.clone(), label, score, slice: Slice::Unaligned });
    }
    Ok((PredictionSet { rows }, transcript))
}

// the local model only reads host columns, so aligned rows are scored like unaligned ones
fn as_host_only(part: &SplitPart) -> Result<crate::data::UnalignedSet> {
    let b = part.aligned.batch(&(0..part.aligned.len()).collect::<Vec<_>>());
    crate::data::UnalignedSet::new(b.keys, b.x_host, b.labels)
}
