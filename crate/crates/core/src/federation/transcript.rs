use std::fmt::Write as _;

use super::message::{ControlTag, Payload, PartyMessage};
use crate::data::Party;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    HostToGuest,
    GuestToHost,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::HostToGuest => "host->guest",
            Direction::GuestToHost => "guest->host",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variant {
    ForwardReps,
    BackwardGrads,
    Control(ControlTag),
    /// Anything else found in an imported transcript; always fails the audit.
    Unknown(String),
}

impl Variant {
    fn label(&self) -> String {
        match self {
            Variant::ForwardReps => "ForwardReps".into(),
            Variant::BackwardGrads => "BackwardGrads".into(),
            Variant::Control(t) => format!("Control:{}", t.name()),
            Variant::Unknown(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Variant {
        match s {
            "ForwardReps" => Variant::ForwardReps,
            "BackwardGrads" => Variant::BackwardGrads,
            _ => s
                .strip_prefix("Control:")
                .and_then(ControlTag::parse)
                .map_or_else(|| Variant::Unknown(s.to_owned()), Variant::Control),
        }
    }
}

/// Metadata of one message; payload values are never recorded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub direction: Direction,
    pub variant: Variant,
    pub shape: Vec<usize>,
    pub bytes: u64,
}

impl TranscriptRecord {
    pub fn of(msg: &PartyMessage) -> Self {
        let direction = match msg.sender() {
            Party::Host => Direction::HostToGuest,
            Party::Guest => Direction::GuestToHost,
        };
        let variant = match msg.payload() {
            Payload::ForwardReps { .. } => Variant::ForwardReps,
            Payload::BackwardGrads { .. } => Variant::BackwardGrads,
            Payload::Control(t) => Variant::Control(*t),
        };
        Self {
            direction,
            variant,
            shape: msg.tensor().map(|t| t.shape().to_vec()).unwrap_or_default(),
            bytes: msg.byte_size(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MessageCounts {
    pub forward: u64,
    pub backward: u64,
    pub control: u64,
    pub bytes: u64,
}

impl MessageCounts {
    pub fn total(&self) -> u64 {
        self.forward + self.backward + self.control
    }
}

/// Append-only log of every message that crossed the boundary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, msg: &PartyMessage) {
        self.records.push(TranscriptRecord::of(msg));
    }

    /// Append a raw record; used when importing transcripts for audit.
    pub fn push_record(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append every record of `other`.
    pub fn extend(&mut self, other: &Transcript) {
        self.records.extend(other.records.iter().cloned());
    }

    pub fn counts(&self) -> MessageCounts {
        count(self.records.iter())
    }

    /// Counts excluding anything bracketed by `BeginInference` / `EndInference`
    /// (and the bracketing control messages themselves).
    pub fn training_counts(&self) -> MessageCounts {
        let mut inside = false;
        let mut kept = Vec::new();
        for r in &self.records {
            match r.variant {
                Variant::Control(ControlTag::BeginInference) => inside = true,
                Variant::Control(ControlTag::EndInference) => inside = false,
                _ if !inside => kept.push(r),
                _ => {}
            }
        }
        count(kept.into_iter())
    }

    /// One line per record: `direction variant shape bytes`, with `-` for no shape.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let shape = if r.shape.is_empty() {
                "-".to_string()
            } else {
                r.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
            };
            let _ = writeln!(out, "{} {} {} {}", r.direction.as_str(), r.variant.label(), shape, r.bytes);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Transcript::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Protocol(format!("transcript line {}: {what}", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [dir, variant, shape, bytes] = fields[..] else {
                return Err(bad("expected 4 fields"));
            };
            let direction = match dir {
                "host->guest" => Direction::HostToGuest,
                "guest->host" => Direction::GuestToHost,
                _ => return Err(bad("unknown direction")),
            };
            let shape = if shape == "-" {
                Vec::new()
            } else {
                shape
                    .split('x')
                    .map(|d| d.parse::<usize>().map_err(|_| bad("bad shape")))
                    .collect::<Result<_>>()?
            };
            t.records.push(TranscriptRecord {
                direction,
                variant: Variant::parse(variant),
                shape,
                bytes: bytes.parse().map_err(|_| bad("bad byte count"))?,
            });
        }
        Ok(t)
    }
}

fn count<'a>(records: impl Iterator<Item = &'a TranscriptRecord>) -> MessageCounts {
    let mut c = MessageCounts::default();
    for r in records {
        match r.variant {
            Variant::ForwardReps => c.forward += 1,
            Variant::BackwardGrads => c.backward += 1,
            _ => c.control += 1,
        }
        c.bytes += r.bytes;
    }
    c
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditFinding {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditVerdict {
    pub checked: usize,
    pub findings: Vec<AuditFinding>,
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

impl std::fmt::Display for AuditVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "PASS ({} records)", self.checked);
        }
        write!(f, "FAIL ({} of {} records)", self.findings.len(), self.checked)?;
        for x in &self.findings {
            write!(f, "\n  #{}: {}", x.index, x.reason)?;
        }
        Ok(())
    }
}

/// Checks that every record is a representation, a representation gradient,
/// or a control message, travelling in the right direction, and that every
/// tensor is `batch × rep_dim`.
pub fn audit_transcript(t: &Transcript, rep_dim: usize) -> AuditVerdict {
    let mut findings = Vec::new();
    for (index, r) in t.records().iter().enumerate() {
        let mut fail = |reason: String| findings.push(AuditFinding { index, reason });
        let expected_dir = match &r.variant {
            Variant::ForwardReps => Some(Direction::GuestToHost),
            Variant::BackwardGrads => Some(Direction::HostToGuest),
            Variant::Control(_) => None,
            Variant::Unknown(v) => {
                fail(format!("unrecognised message variant `{v}`"));
                continue;
            }
        };
        match expected_dir {
            Some(dir) => {
                if r.direction != dir {
                    fail(format!("{} sent {}", r.variant.label(), r.direction.as_str()));
                }
                if r.shape.len() != 2 || r.shape[1] != rep_dim {
                    fail(format!(
                        "{} tensor shape {:?} is not batch×{rep_dim}",
                        r.variant.label(),
                        r.shape
                    ));
                }
            }
            None => {
                if !r.shape.is_empty() {
                    fail(format!("control message carries a tensor of shape {:?}", r.shape));
                }
            }
        }
    }
    AuditVerdict {
        checked: t.len(),
        findings,
    }
}
