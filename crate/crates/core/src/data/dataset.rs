use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::alignment::{intersect_keys, split_by_alignment};
use super::schema::{FeatureSchema, Sample};
use crate::nn::IndexMatrix;
use crate::{Error, Result};

/// Counts rows materialized from a data set, so tests can prove which
/// partitions a procedure touched.
#[derive(Debug, Default)]
pub struct AccessCounter(AtomicU64);

impl AccessCounter {
    pub fn add(&self, n: usize) {
        self.0.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

impl Clone for AccessCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}

/// Aligned mini-batch: row `i` of `x_host` and `x_guest` share `keys[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedBatch {
    pub keys: Vec<String>,
    pub x_host: IndexMatrix,
    pub labels: Vec<f64>,
    pub x_guest: IndexMatrix,
}

impl AlignedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Host-only mini-batch of samples the guest does not hold.
#[derive(Clone, Debug, PartialEq)]
pub struct UnalignedBatch {
    pub keys: Vec<String>,
    pub x_host: IndexMatrix,
    pub labels: Vec<f64>,
}

impl UnalignedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct AlignedSet {
    keys: Vec<String>,
    x_host: IndexMatrix,
    labels: Vec<f64>,
    x_guest: IndexMatrix,
    reads: AccessCounter,
}

impl AlignedSet {
    pub fn new(keys: Vec<String>, x_host: IndexMatrix, labels: Vec<f64>, x_guest: IndexMatrix) -> Result<Self> {
        if x_host.rows() != keys.len() || x_guest.rows() != keys.len() || labels.len() != keys.len() {
            return Err(Error::Shape("aligned set components have different row counts".into()));
        }
        Ok(Self {
            keys,
            x_host,
            labels,
            x_guest,
            reads: AccessCounter::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn batch(&self, idx: &[usize]) -> AlignedBatch {
        self.reads.add(idx.len());
        AlignedBatch {
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            x_host: self.x_host.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            x_guest: self.x_guest.select_rows(idx),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }

    pub fn reset_reads(&self) {
        self.reads.reset();
    }
}

#[derive(Clone, Debug)]
pub struct UnalignedSet {
    keys: Vec<String>,
    x_host: IndexMatrix,
    labels: Vec<f64>,
    reads: AccessCounter,
}

impl UnalignedSet {
    pub fn new(keys: Vec<String>, x_host: IndexMatrix, labels: Vec<f64>) -> Result<Self> {
        if x_host.rows() != keys.len() || labels.len() != keys.len() {
            return Err(Error::Shape("unaligned set components have different row counts".into()));
        }
        Ok(Self {
            keys,
            x_host,
            labels,
            reads: AccessCounter::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn batch(&self, idx: &[usize]) -> UnalignedBatch {
        self.reads.add(idx.len());
        UnalignedBatch {
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            x_host: self.x_host.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// A seeded random subset of `count` rows (all rows if `count ≥ len`),
    /// kept in original order.
    pub fn subset(&self, count: usize, seed: u64) -> UnalignedSet {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(count);
        idx.sort_unstable();
        UnalignedSet {
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            x_host: self.x_host.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            reads: AccessCounter::default(),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }

    pub fn reset_reads(&self) {
        self.reads.reset();
    }
}

/// Aligned and unaligned portions of one of train / validation / test.
#[derive(Clone, Debug)]
pub struct SplitPart {
    pub aligned: AlignedSet,
    pub unaligned: UnalignedSet,
}

impl SplitPart {
    pub fn len(&self) -> usize {
        self.aligned.len() + self.unaligned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reads(&self) -> u64 {
        self.aligned.reads() + self.unaligned.reads()
    }

    pub fn reset_reads(&self) {
        self.aligned.reset_reads();
        self.unaligned.reset_reads();
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub host_schema: FeatureSchema,
    pub guest_schema: FeatureSchema,
    pub train: SplitPart,
    pub val: SplitPart,
    pub test: SplitPart,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitRule {
    /// Seeded shuffle of host rows; the first `n_test` go to test, the next `n_val` to validation.
    Random { n_val: usize, n_test: usize, seed: u64 },
    /// Lexicographic comparison of the schema's time column:
    /// `< val_from` train, `< test_from` validation, rest test.
    ByTime { val_from: String, test_from: String },
}

impl DatasetSplit {
    /// Intersect keys, assign host rows to partitions, then split each
    /// partition into aligned rows (joined with the guest row for the same
    /// key) and unaligned rows.
    pub fn build(
        host_schema: &FeatureSchema,
        guest_schema: &FeatureSchema,
        host: Vec<Sample>,
        guest: &[Sample],
        rule: &SplitRule,
    ) -> Result<Self> {
        let aligned: HashSet<String> =
            intersect_keys(host.iter().map(Sample::key), guest.iter().map(Sample::key))
                .into_iter()
                .collect();
        let mut guest_by_key: HashMap<&str, &Sample> = HashMap::new();
        for g in guest {
            guest_by_key.entry(g.key()).or_insert(g);
        }

        let (train, val, test) = partition(host, rule)?;
        let make = |rows: Vec<Sample>| -> Result<SplitPart> {
            let (a, u) = split_by_alignment(rows, &aligned);
            let a_keys: Vec<String> = a.iter().map(|s| s.key().to_owned()).collect();
            let aligned = AlignedSet::new(
                a_keys,
                IndexMatrix::from_rows(host_schema.num_slots(), a.iter().map(Sample::slot_indices))?,
                labels_of(&a),
                IndexMatrix::from_rows(
                    guest_schema.num_slots(),
                    a.iter().map(|s| guest_by_key[s.key()].slot_indices()),
                )?,
            )?;
            let unaligned = UnalignedSet::new(
                u.iter().map(|s| s.key().to_owned()).collect(),
                IndexMatrix::from_rows(host_schema.num_slots(), u.iter().map(Sample::slot_indices))?,
                labels_of(&u),
            )?;
            Ok(SplitPart { aligned, unaligned })
        };
        Ok(Self {
            host_schema: host_schema.clone(),
            guest_schema: guest_schema.clone(),
            train: make(train)?,
            val: make(val)?,
            test: make(test)?,
        })
    }
}

fn labels_of(samples: &[Sample]) -> Vec<f64> {
    samples.iter().map(|s| f64::from(s.label().unwrap_or(0))).collect()
}

type Partitioned = (Vec<Sample>, Vec<Sample>, Vec<Sample>);

fn partition(host: Vec<Sample>, rule: &SplitRule) -> Result<Partitioned> {
    match rule {
        SplitRule::Random { n_val, n_test, seed } => {
            if n_val + n_test > host.len() {
                return Err(Error::Config(format!(
                    "n_val + n_test = {} exceeds {} host samples",
                    n_val + n_test,
                    host.len()
                )));
            }
            let mut order: Vec<usize> = (0..host.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let mut bucket = vec![0u8; host.len()];
            for (rank, &i) in order.iter().enumerate() {
                bucket[i] = if rank < *n_test {
                    2
                } else if rank < n_test + n_val {
                    1
                } else {
                    0
                };
            }
            let mut parts: Partitioned = Default::default();
            for (s, b) in host.into_iter().zip(bucket) {
                match b {
                    0 => parts.0.push(s),
                    1 => parts.1.push(s),
                    _ => parts.2.push(s),
                }
            }
            Ok(parts)
        }
        SplitRule::ByTime { val_from, test_from } => {
            let mut parts: Partitioned = Default::default();
            for s in host {
                let t = s
                    .time()
                    .ok_or_else(|| Error::Config("time split needs a time column in the host schema".into()))?
                    .to_owned();
                if t.as_str() < val_from.as_str() {
                    parts.0.push(s);
                } else if t.as_str() < test_from.as_str() {
                    parts.1.push(s);
                } else {
                    parts.2.push(s);
                }
            }
            Ok(parts)
        }
    }
}
