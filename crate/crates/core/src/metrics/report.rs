use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classification::{auc, logloss};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    Aligned,
    Unaligned,
}

impl Slice {
    pub fn as_str(self) -> &'static str {
        match self {
            Slice::Aligned => "aligned",
            Slice::Unaligned => "unaligned",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub key: String,
    pub label: f64,
    pub score: f64,
    pub slice: Slice,
}

/// One score per test sample, tagged with the alignment slice it belongs to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictionSet {
    pub rows: Vec<Prediction>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn slice(&self, slice: Slice) -> impl Iterator<Item = &Prediction> {
        self.rows.iter().filter(move |p| p.slice == slice)
    }

    /// `key,label,score,slice` with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["key", "label", "score", "slice"])?;
        for p in &self.rows {
            w.write_record([
                p.key.clone(),
                format!("{}", p.label),
                format!("{}", p.score),
                p.slice.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |m: &str| Error::Row {
                path: path.to_path_buf(),
                line,
                message: m.to_string(),
            };
            let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("bad number"));
            rows.push(Prediction {
                key: rec.get(0).unwrap_or_default().to_string(),
                label: num(1)?,
                score: num(2)?,
                slice: match rec.get(3) {
                    Some("aligned") => Slice::Aligned,
                    Some("unaligned") => Slice::Unaligned,
                    _ => return Err(bad("bad slice tag")),
                },
            });
        }
        Ok(Self { rows })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    /// Absent when the slice holds a single class (or nothing).
    pub auc: Option<f64>,
    /// Absent when the slice is empty.
    pub logloss: Option<f64>,
    pub n: usize,
    pub n_pos: usize,
}

impl SliceMetrics {
    pub fn compute<'a>(rows: impl Iterator<Item = &'a Prediction>) -> Self {
        let (scores, labels): (Vec<f64>, Vec<f64>) = rows.map(|p| (p.score, p.label)).unzip();
        Self {
            auc: auc(&scores, &labels).ok(),
            logloss: logloss(&scores, &labels).ok(),
            n: labels.len(),
            n_pos: labels.iter().filter(|&&y| y > 0.5).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slices {
    pub overall: SliceMetrics,
    pub aligned: SliceMetrics,
    pub unaligned: SliceMetrics,
}

/// AUC / LogLoss on all rows and on each alignment slice, plus run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    pub config_digest: String,
    pub slices: Slices,
}

impl MetricsReport {
    pub fn with_run(mut self, method: impl Into<String>, seed: u64, config_digest: impl Into<String>) -> Self {
        self.method = method.into();
        self.seed = seed;
        self.config_digest = config_digest.into();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn slice_report(preds: &PredictionSet) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::UndefinedMetric("empty prediction set".into()));
    }
    Ok(MetricsReport {
        method: String::new(),
        seed: 0,
        config_digest: String::new(),
        slices: Slices {
            overall: SliceMetrics::compute(preds.rows.iter()),
            aligned: SliceMetrics::compute(preds.slice(Slice::Aligned)),
            unaligned: SliceMetrics::compute(preds.slice(Slice::Unaligned)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(score: f64, label: f64, slice: Slice) -> Prediction {
        Prediction {
            key: String::new(),
            label,
            score,
            slice,
        }
    }

    #[test]
    fn all_aligned_matches_overall() {
        let set = PredictionSet {
            rows: vec![
                p(0.9, 1.0, Slice::Aligned),
                p(0.2, 0.0, Slice::Aligned),
                p(0.6, 0.0, Slice::Aligned),
            ],
        };
        let r = slice_report(&set).unwrap();
        assert_eq!(r.slices.aligned, r.slices.overall);
        assert_eq!(r.slices.unaligned.n, 0);
        assert!(r.slices.unaligned.auc.is_none() && r.slices.unaligned.logloss.is_none());
    }

    #[test]
    fn single_class_slice_reports_absent_auc() {
        let set = PredictionSet {
            rows: vec![
                p(0.9, 1.0, Slice::Aligned),
                p(0.2, 0.0, Slice::Aligned),
                p(0.6, 1.0, Slice::Unaligned),
            ],
        };
        let r = slice_report(&set).unwrap();
        assert!(r.slices.unaligned.auc.is_none());
        assert!(r.slices.unaligned.logloss.is_some());
        assert_eq!(r.slices.overall.n, r.slices.aligned.n + r.slices.unaligned.n);
    }

    #[test]
    fn json_has_stable_keys() {
        let set = PredictionSet {
            rows: vec![p(0.9, 1.0, Slice::Aligned), p(0.1, 0.0, Slice::Unaligned)],
        };
        let r = slice_report(&set).unwrap().with_run("fedud", 3, "abc");
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for k in ["method", "seed", "config_digest", "slices"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        for s in ["overall", "aligned", "unaligned"] {
            for k in ["auc", "logloss", "n", "n_pos"] {
                assert!(v["slices"][s].get(k).is_some(), "{s}.{k}");
            }
        }
        assert_eq!(MetricsReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}
