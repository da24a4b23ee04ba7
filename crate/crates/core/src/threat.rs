//! Adversary behavior and the misbehavior-report / revocation registry.
//!
//! The adversary runs a fixed cycle of `alpha + 1` transmissions: `alpha`
//! bogus (badly signed) messages, then one validly signed beacon whose
//! claimed digests vouch for `k` of those bogus messages. Receivers that
//! spot-check a vouched-for job and find its signature invalid file a report
//! against the claimant. Once `v` distinct receivers have reported it, the
//! claimant is revoked.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::engine::{EngineParams, NodeState, Scheme};
use crate::message::{compute_digest, Cam, Digest80, NodeId, Role, SignedCam, VerificationJob};
use crate::time::SimTime;
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    /// Total transmission rate, Hz.
    pub gamma_adv: f64,
    /// Bogus digests vouched for in each claim (`k <= alpha`).
    pub bogus_per_claim: usize,
    /// Seconds.
    #[serde(default)]
    pub start_time: f64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            gamma_adv: 10.0,
            bogus_per_claim: 5,
            start_time: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MisbehaviorReport {
    pub reporter: NodeId,
    pub accused: NodeId,
    /// The validly signed message that vouched for the bogus one.
    pub claim_digest: Digest80,
    pub bogus_digest: Digest80,
    pub time: SimTime,
}

/// Transmission state of one adversary.
#[derive(Clone, Debug)]
pub struct Adversary {
    pub config: AdversaryConfig,
    alpha: usize,
    emitted: u64,
    cycle_bogus: Vec<Digest80>,
    claim_times: Vec<SimTime>,
    bogus_sent: u64,
}

impl Adversary {
    pub fn new(config: AdversaryConfig, alpha: usize) -> Self {
        Adversary {
            config,
            alpha,
            emitted: 0,
            cycle_bogus: Vec::with_capacity(alpha),
            claim_times: Vec::new(),
            bogus_sent: 0,
        }
    }

    /// Emission period, 1/γ_adv.
    pub fn period(&self) -> SimTime {
        SimTime::from_secs_f64(1.0 / self.config.gamma_adv)
    }

    pub fn cycle_len(&self) -> usize {
        self.alpha + 1
    }

    /// Times at which validating (claim) messages were sent.
    pub fn claim_times(&self) -> &[SimTime] {
        &self.claim_times
    }

    pub fn bogus_sent(&self) -> u64 {
        self.bogus_sent
    }

    /// Produces the next transmission of the cycle. `node` is the adversary's
    /// own engine state: its sequence counter, RNG and (for padding when
    /// `k < alpha`) its genuinely verified cache.
    pub fn emit(&mut self, node: &mut NodeState, now: SimTime, area_side: f64) -> SignedCam {
        let pos = (self.emitted % self.cycle_len() as u64) as usize;
        self.emitted += 1;
        let seq = node.next_seq();
        if pos < self.alpha {
            let rng = node.rng();
            let position = (
                rng.random_range(0.0..=area_side),
                rng.random_range(0.0..=area_side),
            );
            let msg = SignedCam::bogus(Cam {
                sender: node.id,
                gen_timestamp: now,
                position,
                seq,
                claimed_digests: Vec::new(),
            });
            self.cycle_bogus.push(compute_digest(&msg));
            self.bogus_sent += 1;
            msg
        } else {
            let k = self.config.bogus_per_claim.min(self.cycle_bogus.len());
            let mut claimed: Vec<Digest80> =
                self.cycle_bogus[self.cycle_bogus.len() - k..].to_vec();
            let padding = self.alpha.saturating_sub(k);
            claimed.extend(node.cache().digests().take(padding));
            self.cycle_bogus.clear();
            self.claim_times.push(now);
            SignedCam::signed(Cam {
                sender: node.id,
                gen_timestamp: now,
                position: node.position,
                seq,
                claimed_digests: claimed,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Revocation {
    pub accused: NodeId,
    pub time: SimTime,
    pub reporters: usize,
}

/// Omniscient report sink: counts distinct reporters per accused node.
#[derive(Clone, Debug)]
pub struct RevocationRegistry {
    reports: BTreeMap<NodeId, BTreeSet<NodeId>>,
    votes_needed: usize,
    revoked: BTreeMap<NodeId, SimTime>,
    log: Vec<MisbehaviorReport>,
}

impl RevocationRegistry {
    pub fn new(votes_needed: usize) -> Self {
        RevocationRegistry {
            reports: BTreeMap::new(),
            votes_needed,
            revoked: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn votes_needed(&self) -> usize {
        self.votes_needed
    }

    /// Records a report; returns the revocation it triggers, if any.
    pub fn apply_revocation(&mut self, report: MisbehaviorReport) -> Option<Revocation> {
        if report.reporter == report.accused {
            return None;
        }
        self.log.push(report);
        let reporters = self.reports.entry(report.accused).or_default();
        reporters.insert(report.reporter);
        let count = reporters.len();
        if count >= self.votes_needed && !self.revoked.contains_key(&report.accused) {
            self.revoked.insert(report.accused, report.time);
            return Some(Revocation {
                accused: report.accused,
                time: report.time,
                reporters: count,
            });
        }
        None
    }

    pub fn is_revoked(&self, node: NodeId) -> bool {
        self.revoked.contains_key(&node)
    }

    pub fn revocation_time(&self, node: NodeId) -> Option<SimTime> {
        self.revoked.get(&node).copied()
    }

    pub fn distinct_reporters(&self, node: NodeId) -> usize {
        self.reports.get(&node).map_or(0, BTreeSet::len)
    }

    pub fn reports(&self) -> &[MisbehaviorReport] {
        &self.log
    }

    pub fn revoked(&self) -> impl Iterator<Item = (NodeId, SimTime)> + '_ {
        self.revoked.iter().map(|(n, t)| (*n, *t))
    }
}

/// Parameters of an isolated single-claim trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClaimTrial {
    pub alpha: usize,
    pub bogus_per_claim: usize,
    pub pr_check: f64,
    pub receivers: usize,
    pub votes_needed: usize,
}

/// One validating message received by every benign receiver while all the
/// bogus messages it vouches for are still queued there. Each receiver
/// verifies the claim, applies it, then drains its queue; the reports go to
/// a fresh registry. Returns true if the adversary ends up revoked.
pub fn forced_reception_trial<R: Rng + ?Sized>(trial: &ClaimTrial, rng: &mut R) -> bool {
    let adversary = NodeId(trial.receivers as u32);
    let params = EngineParams {
        alpha: trial.alpha,
        pr_check: trial.pr_check,
        tau: SimTime::from_millis(5),
        scheme: Scheme::Cooperative,
        rejected_blacklist: false,
    };
    let bogus: Vec<Arc<SignedCam>> = (0..trial.alpha as u64)
        .map(|seq| {
            Arc::new(SignedCam::bogus(Cam {
                sender: adversary,
                gen_timestamp: SimTime::from_millis(100 * seq),
                position: (0.0, 0.0),
                seq,
                claimed_digests: Vec::new(),
            }))
        })
        .collect();
    let digests: Vec<Digest80> = bogus.iter().map(|m| compute_digest(m)).collect();
    let k = trial.bogus_per_claim.min(trial.alpha);
    let claim = SignedCam::signed(Cam {
        sender: adversary,
        gen_timestamp: SimTime::from_millis(100 * trial.alpha as u64),
        position: (0.0, 0.0),
        seq: trial.alpha as u64,
        claimed_digests: digests[trial.alpha - k..].to_vec(),
    });
    let claim_digest = compute_digest(&claim);

    let mut registry = RevocationRegistry::new(trial.votes_needed);
    let now = SimTime::from_millis(100 * trial.alpha as u64 + 1);
    for r in 0..trial.receivers {
        let mut node = NodeState::new(
            NodeId(r as u32),
            Role::Benign,
            (0.0, 0.0),
            params,
            SimRng::seed_from_u64(rng.random()),
        );
        for (m, d) in bogus.iter().zip(&digests) {
            node.receive(VerificationJob::with_digest(
                Arc::clone(m),
                *d,
                SimTime::ZERO,
            ));
        }
        node.apply_claims(&claim, claim_digest, now);
        let mut t = now;
        while let Some(done) = node.pop_and_verify(t) {
            for report in node.finish_verification(done) {
                registry.apply_revocation(report);
            }
            t = done;
        }
    }
    registry.is_revoked(adversary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(reporter: u32, accused: u32) -> MisbehaviorReport {
        MisbehaviorReport {
            reporter: NodeId(reporter),
            accused: NodeId(accused),
            claim_digest: Digest80([1; 10]),
            bogus_digest: Digest80([2; 10]),
            time: SimTime::from_millis(reporter as u64),
        }
    }

    #[test]
    fn five_distinct_reporters_revoke() {
        let mut reg = RevocationRegistry::new(5);
        for r in 0..4 {
            assert!(reg.apply_revocation(report(r, 99)).is_none());
        }
        let rev = reg.apply_revocation(report(4, 99)).unwrap();
        assert_eq!(rev.accused, NodeId(99));
        assert_eq!(rev.time, SimTime::from_millis(4));
        assert!(reg.is_revoked(NodeId(99)));
        assert!(
            reg.apply_revocation(report(5, 99)).is_none(),
            "revocation fires once"
        );
        assert_eq!(
            reg.revocation_time(NodeId(99)),
            Some(SimTime::from_millis(4))
        );
    }

    #[test]
    fn repeated_reporter_counts_once() {
        let mut reg = RevocationRegistry::new(5);
        for _ in 0..5 {
            reg.apply_revocation(report(1, 99));
        }
        assert!(!reg.is_revoked(NodeId(99)));
        assert_eq!(reg.distinct_reporters(NodeId(99)), 1);
    }

    #[test]
    fn self_report_ignored() {
        let mut reg = RevocationRegistry::new(1);
        assert!(reg.apply_revocation(report(3, 3)).is_none());
        assert!(reg.reports().is_empty());
    }

    fn adversary_node(alpha: usize) -> NodeState {
        let params = EngineParams {
            alpha,
            pr_check: 0.2,
            tau: SimTime::from_millis(5),
            scheme: Scheme::Cooperative,
            rejected_blacklist: false,
        };
        NodeState::new(
            NodeId(50),
            Role::Adversary,
            (10.0, 10.0),
            params,
            SimRng::seed_from_u64(1),
        )
    }

    #[test]
    fn worst_case_cycle_vouches_for_all_bogus() {
        let mut node = adversary_node(5);
        let mut adv = Adversary::new(AdversaryConfig::default(), 5);
        let msgs: Vec<_> = (0..12)
            .map(|i| adv.emit(&mut node, SimTime::from_millis(100 * i), 200.0))
            .collect();
        let bogus: Vec<_> = msgs.iter().filter(|m| !m.signature.valid).collect();
        assert_eq!(bogus.len(), 10);
        assert!(msgs[5].signature.valid && msgs[11].signature.valid);
        let first_cycle: Vec<_> = msgs[..5].iter().map(compute_digest).collect();
        assert_eq!(msgs[5].cam.claimed_digests, first_cycle);
        assert_eq!(
            adv.claim_times(),
            &[SimTime::from_millis(500), SimTime::from_millis(1100)]
        );
        // α/(α+1)·γ bogus and 1/(α+1)·γ claims per second
        let per_sec = |n: usize| n as f64 / 1.2;
        assert!((per_sec(bogus.len()) - 50.0 / 6.0).abs() < 1e-9);
        assert!((per_sec(2) - 10.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_claim_pads_with_genuine_digests() {
        let mut node = adversary_node(5);
        for s in 0..4 {
            let m = Arc::new(SignedCam::signed(Cam {
                sender: NodeId(1),
                gen_timestamp: SimTime::from_millis(s),
                position: (0.0, 0.0),
                seq: s,
                claimed_digests: vec![],
            }));
            node.receive(VerificationJob::new(m, SimTime::ZERO));
            let t = node.pop_and_verify(SimTime::ZERO).unwrap();
            node.finish_verification(t);
        }
        let cfg = AdversaryConfig {
            bogus_per_claim: 2,
            ..AdversaryConfig::default()
        };
        let mut adv = Adversary::new(cfg, 5);
        let msgs: Vec<_> = (0..6)
            .map(|i| adv.emit(&mut node, SimTime::from_millis(i), 200.0))
            .collect();
        let claim = &msgs[5].cam.claimed_digests;
        let bogus: Vec<_> = msgs[3..5].iter().map(compute_digest).collect();
        assert_eq!(&claim[..2], &bogus[..]);
        // only 4 genuine digests are cached, but 3 are needed for padding
        assert_eq!(claim.len(), 5);
        assert!(claim[2..].iter().all(|d| node.cache().contains(d)));
    }

    #[test]
    fn zero_k_claims_nothing_bogus() {
        let mut node = adversary_node(5);
        let cfg = AdversaryConfig {
            bogus_per_claim: 0,
            ..AdversaryConfig::default()
        };
        let mut adv = Adversary::new(cfg, 5);
        let msgs: Vec<_> = (0..6)
            .map(|i| adv.emit(&mut node, SimTime::from_millis(i), 200.0))
            .collect();
        assert!(
            msgs[5].cam.claimed_digests.is_empty(),
            "empty cache, nothing to pad with"
        );
    }

    #[test]
    fn forced_trial_extremes() {
        let mut rng = SimRng::seed_from_u64(4);
        let all = ClaimTrial {
            alpha: 5,
            bogus_per_claim: 5,
            pr_check: 1.0,
            receivers: 15,
            votes_needed: 5,
        };
        assert!(forced_reception_trial(&all, &mut rng));
        let none = ClaimTrial {
            pr_check: 0.0,
            ..all
        };
        assert!(!forced_reception_trial(&none, &mut rng));
        let too_many = ClaimTrial {
            votes_needed: 16,
            ..all
        };
        assert!(!forced_reception_trial(&too_many, &mut rng));
    }
}
