//! Cooperative verification of signed vehicular beacons.
//!
//! Vehicles append the digests of messages they have signature-verified to
//! their own beacons. A receiver that verifies such a beacon can accept the
//! listed messages still waiting in its queue without verifying them, except
//! that each listed digest is spot-checked with probability `pr_check`.
//! False claims are reported and the claimant revoked once enough distinct
//! receivers report it.
//!
//! * [`message`]: beacon types, canonical encoding, 80-bit digests
//! * [`engine`]: per-node queue, verified cache and cooperative verification
//! * [`analytic`]: closed-form detection probabilities and saturation
//! * [`sim`]: discrete-event scenario runner and baseline scheme
//! * [`threat`]: adversary schedule and revocation registry
//! * [`cli`]: configuration, experiment orchestration and CSV export

pub mod analytic;
pub mod cli;
pub mod engine;
pub mod message;
pub mod metrics;
pub mod scalar;
pub mod sim;
pub mod threat;
pub mod time;

pub use message::{
    compute_digest, encode_signed_cam, Cam, Digest80, NodeId, Role, SignedCam, VerificationJob,
};
pub use scalar::Scalar;
pub use sim::{run_replications, run_scenario, ScenarioConfig};
pub use time::SimTime;

/// Random stream used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Detection-model inputs in double precision.
pub type DetectionParams = analytic::DetectionParams<f64>;
/// Detection-model inputs in single precision.
pub type DetectionParamsF32 = analytic::DetectionParams<f32>;
/// Monte Carlo estimate in double precision.
pub type Estimate = analytic::Estimate<f64>;
