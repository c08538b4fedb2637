use std::collections::VecDeque;

use super::message::PartyMessage;
use super::transcript::Transcript;
use crate::data::Party;
use crate::{Error, Result};

/// Ordered, lossless message channel between the two parties. Every message
/// sent is logged to the transport's transcript.
pub trait Transport {
    fn send(&mut self, msg: PartyMessage) -> Result<()>;

    /// Next message addressed to `recipient`. In the synchronous reference
    /// transport an empty queue means the protocol is out of step.
    fn recv(&mut self, recipient: Party) -> Result<PartyMessage>;

    fn transcript(&self) -> &Transcript;
}

/// Single-threaded in-process transport with synchronous hand-off.
#[derive(Debug, Default)]
pub struct InProcessTransport {
    to_host: VecDeque<PartyMessage>,
    to_guest: VecDeque<PartyMessage>,
    transcript: Transcript,
}

impl InProcessTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn pending(&self) -> usize {
        self.to_host.len() + self.to_guest.len()
    }
}

impl Transport for InProcessTransport {
    fn send(&mut self, msg: PartyMessage) -> Result<()> {
        self.transcript.record(&msg);
        match msg.recipient() {
            Party::Host => self.to_host.push_back(msg),
            Party::Guest => self.to_guest.push_back(msg),
        }
        Ok(())
    }

    fn recv(&mut self, recipient: Party) -> Result<PartyMessage> {
        let queue = match recipient {
            Party::Host => &mut self.to_host,
            Party::Guest => &mut self.to_guest,
        };
        queue
            .pop_front()
            .ok_or_else(|| Error::Protocol(format!("no message pending for the {recipient}")))
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}
