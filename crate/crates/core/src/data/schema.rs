use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Host,
    Guest,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Party::Host => "host",
            Party::Guest => "guest",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub vocab_size: usize,
}

/// Column layout of one party's data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub party: Party,
    pub slots: Vec<SlotSpec>,
    pub key_column: String,
    /// Host only.
    pub label_column: Option<String>,
    /// Optional ordering column used for time-based splits.
    pub time_column: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        party: Party,
        slots: Vec<SlotSpec>,
        key_column: impl Into<String>,
        label_column: Option<String>,
    ) -> Result<Self> {
        let schema = Self {
            party,
            slots,
            key_column: key_column.into(),
            label_column,
            time_column: None,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Same vocabulary size for every slot.
    pub fn uniform(party: Party, names: &[String], vocab_size: usize, key_column: &str, label_column: Option<&str>) -> Result<Self> {
        let slots = names
            .iter()
            .map(|n| SlotSpec {
                name: n.clone(),
                vocab_size,
            })
            .collect();
        Self::new(party, slots, key_column, label_column.map(str::to_owned))
    }

    pub fn with_time_column(mut self, column: Option<String>) -> Self {
        self.time_column = column;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.slots {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Schema(format!("duplicate slot name `{}`", s.name)));
            }
            if s.vocab_size < 2 {
                return Err(Error::Schema(format!("slot `{}` has vocab_size < 2", s.name)));
            }
        }
        if self.slots.is_empty() {
            return Err(Error::Schema(format!("{} schema has no slots", self.party)));
        }
        match (self.party, &self.label_column) {
            (Party::Host, None) => Err(Error::Schema("host schema needs a label column".into())),
            (Party::Guest, Some(_)) => Err(Error::Schema("guest schema cannot declare a label column".into())),
            _ => Ok(()),
        }
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.name.clone()).collect()
    }

    /// `(slot name, vocab size)` pairs, as consumed by embedding init.
    pub fn vocab(&self) -> Vec<(String, usize)> {
        self.slots.iter().map(|s| (s.name.clone(), s.vocab_size)).collect()
    }
}

/// Host and guest feature namespaces must not overlap.
pub fn check_disjoint(host: &FeatureSchema, guest: &FeatureSchema) -> Result<()> {
    let names: HashSet<&str> = host.slots.iter().map(|s| s.name.as_str()).collect();
    if let Some(s) = guest.slots.iter().find(|s| names.contains(s.name.as_str())) {
        return Err(Error::Schema(format!("slot `{}` appears in both parties", s.name)));
    }
    Ok(())
}

/// One row of one party's data after hashing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    key: String,
    slot_indices: Vec<usize>,
    label: Option<u8>,
    time: Option<String>,
}

impl Sample {
    /// Validates indices against `schema`; a label is required for host
    /// samples and rejected for guest samples.
    pub fn new(schema: &FeatureSchema, key: impl Into<String>, slot_indices: Vec<usize>, label: Option<u8>) -> Result<Self> {
        if slot_indices.len() != schema.num_slots() {
            return Err(Error::Schema(format!(
                "sample has {} slot indices, schema has {} slots",
                slot_indices.len(),
                schema.num_slots()
            )));
        }
        for (s, &ix) in schema.slots.iter().zip(&slot_indices) {
            if ix >= s.vocab_size {
                return Err(Error::VocabBounds {
                    slot: s.name.clone(),
                    index: ix,
                    vocab_size: s.vocab_size,
                });
            }
        }
        match (schema.party, label) {
            (Party::Guest, Some(_)) => return Err(Error::Schema("guest samples never carry a label".into())),
            (Party::Host, None) => return Err(Error::Schema("host samples need a label".into())),
            (_, Some(l)) if l > 1 => return Err(Error::Schema(format!("label {l} is not binary"))),
            _ => {}
        }
        Ok(Self {
            key: key.into(),
            slot_indices,
            label,
            time: None,
        })
    }

    pub fn with_time(mut self, time: Option<String>) -> Self {
        self.time = time;
        self
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn slot_indices(&self) -> &[usize] {
        &self.slot_indices
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn time(&self) -> Option<&str> {
        self.time.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn guest_samples_cannot_be_labelled() {
        let g = FeatureSchema::uniform(Party::Guest, &names("g", 2), 10, "key", None).unwrap();
        assert!(Sample::new(&g, "k", vec![1, 2], Some(1)).is_err());
        assert!(Sample::new(&g, "k", vec![1, 2], None).is_ok());
    }

    #[test]
    fn schema_invariants() {
        assert!(FeatureSchema::uniform(Party::Host, &names("h", 2), 1, "key", Some("y")).is_err());
        assert!(FeatureSchema::uniform(Party::Guest, &names("g", 2), 5, "key", Some("y")).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(FeatureSchema::uniform(Party::Host, &dup, 5, "key", Some("y")).is_err());
        let h = FeatureSchema::uniform(Party::Host, &names("x", 2), 5, "key", Some("y")).unwrap();
        let g = FeatureSchema::uniform(Party::Guest, &names("x", 1), 5, "key", None).unwrap();
        assert!(check_disjoint(&h, &g).is_err());
    }

    #[test]
    fn sample_bounds_are_checked() {
        let h = FeatureSchema::uniform(Party::Host, &names("h", 2), 5, "key", Some("y")).unwrap();
        assert!(matches!(Sample::new(&h, "k", vec![0, 5], Some(0)), Err(Error::VocabBounds { .. })));
        assert!(matches!(Sample::new(&h, "k", vec![0], Some(0)), Err(Error::Schema(_))));
        assert!(Sample::new(&h, "k", vec![0, 1], Some(2)).is_err());
    }
}
