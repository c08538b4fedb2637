//! The two parties and the message boundary between them.
//!
//! Parties never hold references to each other: every training signal flows
//! as a [`PartyMessage`] through a [`Transport`], which logs metadata of each
//! message into a [`Transcript`] for auditing.

mod guest;
mod host;
mod message;
mod transcript;
mod transport;

pub use guest::{GuestParty, GuestUpdate};
pub use host::{AlignedCache, HostGrads, HostOptimizers, HostParty, UnalignedCache};
pub use message::{BatchId, ControlTag, PartyMessage, Payload};
pub use transcript::{
    audit_transcript, AuditFinding, AuditVerdict, Direction, MessageCounts, Transcript, TranscriptRecord, Variant,
};
pub use transport::{InProcessTransport, Transport};
