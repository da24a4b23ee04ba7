//! Per-node verification machinery.
//!
//! A node owns a [`VerificationQueue`], a [`VerifiedCache`] and a single
//! verification thread. Verification of the head job takes a fixed delay;
//! when it completes with a valid signature, the digests the message claims
//! are matched against the queue and either spot-checked or accepted
//! cooperatively.

mod cache;
mod node;
mod queue;

pub use cache::VerifiedCache;
pub use node::{EngineParams, InService, NodeCounters, NodeState};
pub use queue::{ClaimRef, DuplicateJob, QueuedJob, VerificationQueue};

use std::fmt;
use std::str::FromStr;

use crate::message::{Digest80, NodeId};
use crate::time::SimTime;

/// Verification discipline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// FCFS, every signature verified.
    Baseline,
    /// Random insertion, claims and spot checks.
    Cooperative,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Cooperative => "cooperative",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Scheme::Baseline),
            "cooperative" => Ok(Scheme::Cooperative),
            other => Err(format!(
                "unknown scheme `{other}` (expected baseline or cooperative)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    SignatureAccepted,
    CooperativelyAccepted,
    RejectedInvalid,
    /// Sender revoked while the job was pending.
    DroppedRevoked,
    UnprocessedAtEnd,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::SignatureAccepted => "signature_accepted",
            Outcome::CooperativelyAccepted => "cooperatively_accepted",
            Outcome::RejectedInvalid => "rejected_invalid",
            Outcome::DroppedRevoked => "dropped_revoked",
            Outcome::UnprocessedAtEnd => "unprocessed_at_end",
        }
    }

    pub fn is_accepted(self) -> bool {
        matches!(
            self,
            Outcome::SignatureAccepted | Outcome::CooperativelyAccepted
        )
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Final fate of one received message at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct Disposition {
    pub receiver: NodeId,
    pub digest: Digest80,
    pub sender: NodeId,
    pub seq: u64,
    /// The message carried an invalid signature.
    pub bogus: bool,
    pub enqueue_time: SimTime,
    pub leave_queue_time: SimTime,
    pub outcome: Outcome,
    pub spot_checked: bool,
}

impl Disposition {
    pub fn waiting_time(&self) -> SimTime {
        self.leave_queue_time - self.enqueue_time
    }
}
