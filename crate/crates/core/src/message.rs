//! Beacon message types, their canonical byte encoding and the 80-bit digest.
//!
//! Canonical encoding (all integers big-endian):
//!
//! | offset | size  | field                                   |
//! |-------:|------:|-----------------------------------------|
//! | 0      | 1     | format version (`0x01`)                 |
//! | 1      | 1     | number of claimed digests `k`           |
//! | 2      | 4     | sender id (`u32`)                       |
//! | 6      | 8     | generation timestamp, ns (`u64`)        |
//! | 14     | 8     | sequence number (`u64`)                 |
//! | 22     | 8     | x position, m (IEEE-754 `f64` bits)     |
//! | 30     | 8     | y position, m (IEEE-754 `f64` bits)     |
//! | 38     | 4     | signer id (`u32`)                       |
//! | 42     | 1     | signature validity flag (`0` / `1`)     |
//! | 43     | 257   | zero fill (opaque CAM fields, signature, certificate) |
//! | 300    | 10·k  | claimed digests, in list order          |

use std::fmt;

use sha2::{Digest, Sha256};

use crate::time::SimTime;

/// Bytes of a beacon carrying no claimed digests, signature and certificate included.
pub const BASE_FRAME_BYTES: usize = 300;
/// Width of one claimed digest on the wire.
pub const DIGEST_BYTES: usize = 10;
pub const ENCODING_VERSION: u8 = 1;

const HEADER_BYTES: usize = 43;

/// Truncated (80-bit) SHA-256 message identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest80(pub [u8; DIGEST_BYTES]);

impl Digest80 {
    pub fn as_bytes(&self) -> &[u8; DIGEST_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Digest80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest80({})", self.to_hex())
    }
}

impl fmt::Display for Digest80 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Pseudonymous sender identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Behavior of a node, fixed for a run. Not visible on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Benign,
    Adversary,
}

/// Cooperative awareness message body.
#[derive(Clone, Debug, PartialEq)]
pub struct Cam {
    pub sender: NodeId,
    pub gen_timestamp: SimTime,
    pub position: (f64, f64),
    pub seq: u64,
    /// Digests of messages the sender claims to have signature-verified.
    pub claimed_digests: Vec<Digest80>,
}

/// Abstract signature: who signed, and whether it would verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub signer: NodeId,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignedCam {
    pub cam: Cam,
    pub signature: Signature,
}

impl SignedCam {
    /// A properly signed message from `cam.sender`.
    pub fn signed(cam: Cam) -> Self {
        let signature = Signature {
            signer: cam.sender,
            valid: true,
        };
        SignedCam { cam, signature }
    }

    /// A message whose signature will fail verification.
    pub fn bogus(cam: Cam) -> Self {
        let signature = Signature {
            signer: cam.sender,
            valid: false,
        };
        SignedCam { cam, signature }
    }

    pub fn encoded_len(&self) -> usize {
        frame_len(self.cam.claimed_digests.len())
    }
}

/// Encoded size of a beacon with `claimed` appended digests.
pub const fn frame_len(claimed: usize) -> usize {
    BASE_FRAME_BYTES + DIGEST_BYTES * claimed
}

/// Canonical, injective byte encoding. See the module docs for the layout.
///
/// Panics if more than 255 digests are claimed; the count is a single byte.
pub fn encode_signed_cam(message: &SignedCam) -> Vec<u8> {
    let cam = &message.cam;
    let k = cam.claimed_digests.len();
    assert!(
        k <= u8::MAX as usize,
        "at most 255 claimed digests fit the encoding"
    );

    let mut out = Vec::with_capacity(frame_len(k));
    out.push(ENCODING_VERSION);
    out.push(k as u8);
    out.extend_from_slice(&cam.sender.0.to_be_bytes());
    out.extend_from_slice(&cam.gen_timestamp.as_nanos().to_be_bytes());
    out.extend_from_slice(&cam.seq.to_be_bytes());
    out.extend_from_slice(&cam.position.0.to_bits().to_be_bytes());
    out.extend_from_slice(&cam.position.1.to_bits().to_be_bytes());
    out.extend_from_slice(&message.signature.signer.0.to_be_bytes());
    out.push(u8::from(message.signature.valid));
    debug_assert_eq!(out.len(), HEADER_BYTES);
    out.resize(BASE_FRAME_BYTES, 0);
    for d in &cam.claimed_digests {
        out.extend_from_slice(&d.0);
    }
    out
}

/// First 80 bits of SHA-256 over the canonical encoding.
pub fn compute_digest(message: &SignedCam) -> Digest80 {
    digest_bytes(&encode_signed_cam(message))
}

pub fn digest_bytes(bytes: &[u8]) -> Digest80 {
    let full = Sha256::digest(bytes);
    let mut out = [0u8; DIGEST_BYTES];
    out.copy_from_slice(&full[..DIGEST_BYTES]);
    Digest80(out)
}

/// A queued unit of verification work.
#[derive(Clone, Debug)]
pub struct VerificationJob {
    pub message: std::sync::Arc<SignedCam>,
    pub digest: Digest80,
    /// Spot-check flag: set once a peer claim selected this job for checking.
    pub b: bool,
    pub enqueue_time: SimTime,
}

impl VerificationJob {
    pub fn new(message: std::sync::Arc<SignedCam>, enqueue_time: SimTime) -> Self {
        let digest = compute_digest(&message);
        VerificationJob {
            message,
            digest,
            b: false,
            enqueue_time,
        }
    }

    /// Builds a job when the digest is already known (computed once by the channel).
    pub fn with_digest(
        message: std::sync::Arc<SignedCam>,
        digest: Digest80,
        enqueue_time: SimTime,
    ) -> Self {
        debug_assert_eq!(digest, compute_digest(&message));
        VerificationJob {
            message,
            digest,
            b: false,
            enqueue_time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(claims: usize) -> SignedCam {
        SignedCam::signed(Cam {
            sender: NodeId(7),
            gen_timestamp: SimTime::from_millis(1234),
            position: (12.5, 180.25),
            seq: 42,
            claimed_digests: (0..claims).map(|i| Digest80([i as u8; 10])).collect(),
        })
    }

    #[test]
    fn frame_sizes() {
        assert_eq!(encode_signed_cam(&sample(0)).len(), 300);
        assert_eq!(encode_signed_cam(&sample(5)).len(), 350);
        for k in 0..=8 {
            assert_eq!(encode_signed_cam(&sample(k)).len(), 300 + 10 * k);
            assert_eq!(sample(k).encoded_len(), frame_len(k));
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let m = sample(3);
        assert_eq!(encode_signed_cam(&m), encode_signed_cam(&m));
        assert_eq!(compute_digest(&m), compute_digest(&m.clone()));
    }

    #[test]
    fn validity_flag_changes_digest() {
        let good = sample(2);
        let mut bad = good.clone();
        bad.signature.valid = false;
        assert_ne!(compute_digest(&good), compute_digest(&bad));
    }

    #[test]
    fn new_job_has_clear_flag() {
        let job = VerificationJob::new(std::sync::Arc::new(sample(1)), SimTime::from_millis(3));
        assert!(!job.b);
        assert_eq!(job.digest, compute_digest(&job.message));
    }
}
