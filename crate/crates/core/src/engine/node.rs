use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;

use super::{ClaimRef, Disposition, Outcome, QueuedJob, Scheme, VerificationQueue, VerifiedCache};
use crate::message::{Cam, Digest80, NodeId, Role, SignedCam, VerificationJob};
use crate::threat::MisbehaviorReport;
use crate::time::SimTime;
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineParams {
    pub alpha: usize,
    pub pr_check: f64,
    pub tau: SimTime,
    pub scheme: Scheme,
    /// Report claims that reference a digest this node already rejected.
    pub rejected_blacklist: bool,
}

/// Job currently occupying the verification thread.
#[derive(Clone, Debug)]
pub struct InService {
    pub entry: QueuedJob,
    pub started: SimTime,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeCounters {
    pub received: u64,
    pub duplicates: u64,
    pub dropped_at_reception: u64,
    pub signature_verifications: u64,
    pub signature_accepted: u64,
    pub cooperatively_accepted: u64,
    pub rejected_invalid: u64,
    pub dropped_revoked: u64,
    pub unprocessed_at_end: u64,
    /// Of `unprocessed_at_end`: jobs whose verification was still running.
    pub verifying_at_end: u64,
    /// Claimed digests that matched a queued, unchecked job.
    pub claims_matched: u64,
    /// Matched claims that set the spot-check flag.
    pub spot_checks: u64,
    pub bogus_cooperatively_accepted: u64,
}

impl NodeCounters {
    pub fn dispositions(&self) -> u64 {
        self.signature_accepted
            + self.cooperatively_accepted
            + self.rejected_invalid
            + self.dropped_revoked
            + self.unprocessed_at_end
    }

    pub fn add(&mut self, o: &NodeCounters) {
        self.received += o.received;
        self.duplicates += o.duplicates;
        self.dropped_at_reception += o.dropped_at_reception;
        self.signature_verifications += o.signature_verifications;
        self.signature_accepted += o.signature_accepted;
        self.cooperatively_accepted += o.cooperatively_accepted;
        self.rejected_invalid += o.rejected_invalid;
        self.dropped_revoked += o.dropped_revoked;
        self.unprocessed_at_end += o.unprocessed_at_end;
        self.verifying_at_end += o.verifying_at_end;
        self.claims_matched += o.claims_matched;
        self.spot_checks += o.spot_checks;
        self.bogus_cooperatively_accepted += o.bogus_cooperatively_accepted;
    }
}

/// Bookkeeping for invariant audits.
#[derive(Debug, Default)]
struct Audit {
    cooperatively_accepted: HashSet<Digest80>,
    ever_checked: HashSet<Digest80>,
    violations: Vec<String>,
}

/// One vehicle: queue, verified-digest cache, RNG stream, verifier clock.
#[derive(Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub role: Role,
    pub position: (f64, f64),
    params: EngineParams,
    queue: VerificationQueue,
    cache: VerifiedCache,
    rng: SimRng,
    in_service: Option<InService>,
    busy_time: SimTime,
    next_seq: u64,
    counters: NodeCounters,
    log: Option<Vec<Disposition>>,
    rejected: HashSet<Digest80>,
    audit: Option<Audit>,
}

impl NodeState {
    pub fn new(
        id: NodeId,
        role: Role,
        position: (f64, f64),
        params: EngineParams,
        rng: SimRng,
    ) -> Self {
        NodeState {
            id,
            role,
            position,
            params,
            queue: VerificationQueue::new(),
            cache: VerifiedCache::new(params.alpha),
            rng,
            in_service: None,
            busy_time: SimTime::ZERO,
            next_seq: 0,
            counters: NodeCounters::default(),
            log: None,
            rejected: HashSet::new(),
            audit: None,
        }
    }

    /// Keep a [`Disposition`] for every message this node finalizes.
    pub fn record_dispositions(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    /// Track provenance for [`NodeState::audit`].
    pub fn enable_audit(&mut self) {
        self.audit.get_or_insert_with(Audit::default);
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn queue(&self) -> &VerificationQueue {
        &self.queue
    }

    pub fn cache(&self) -> &VerifiedCache {
        &self.cache
    }

    pub fn counters(&self) -> &NodeCounters {
        &self.counters
    }

    pub fn dispositions(&self) -> &[Disposition] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_dispositions(&mut self) -> Vec<Disposition> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn in_service(&self) -> Option<&InService> {
        self.in_service.as_ref()
    }

    pub fn busy_time(&self) -> SimTime {
        self.busy_time
    }

    pub fn violations(&self) -> &[String] {
        self.audit
            .as_ref()
            .map(|a| a.violations.as_slice())
            .unwrap_or(&[])
    }

    pub fn next_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Queues a received message. Random slot for the cooperative scheme, tail for baseline.
    /// Returns false if the digest was already queued.
    pub fn receive(&mut self, job: VerificationJob) -> bool {
        self.counters.received += 1;
        let res = match self.params.scheme {
            Scheme::Cooperative => self.queue.enqueue_random(job, &mut self.rng),
            Scheme::Baseline => self.queue.enqueue_tail(job),
        };
        if res.is_err() {
            self.counters.duplicates += 1;
            self.counters.received -= 1;
            return false;
        }
        true
    }

    /// Counts a frame discarded before queueing (revoked sender).
    pub fn drop_at_reception(&mut self) {
        self.counters.dropped_at_reception += 1;
    }

    /// Pops the head job into the verifier. Returns the completion time, or
    /// `None` if the verifier is busy or the queue is empty.
    pub fn pop_and_verify(&mut self, now: SimTime) -> Option<SimTime> {
        if self.in_service.is_some() {
            return None;
        }
        let entry = self.queue.pop_front()?;
        self.counters.signature_verifications += 1;
        self.in_service = Some(InService {
            entry,
            started: now,
        });
        Some(now + self.params.tau)
    }

    /// Completes the in-flight verification at `now`. On a valid signature the
    /// message is accepted, cached and (cooperative scheme) its claims are applied.
    /// Returns any misbehavior reports this produced.
    pub fn finish_verification(&mut self, now: SimTime) -> Vec<MisbehaviorReport> {
        let InService { entry, started } = self
            .in_service
            .take()
            .expect("finish_verification without job in service");
        self.busy_time = self.busy_time + (now - started);
        let message = Arc::clone(&entry.job.message);
        let mut reports = Vec::new();

        if message.signature.valid {
            self.finalize(&entry, started, Outcome::SignatureAccepted);
            self.cache
                .record_verified(entry.job.digest, message.cam.gen_timestamp);
            if self.params.scheme == Scheme::Cooperative {
                reports = self.apply_claims(&message, entry.job.digest, now);
            }
        } else {
            self.finalize(&entry, started, Outcome::RejectedInvalid);
            if let Some(claim) = entry.checked_by {
                reports.push(MisbehaviorReport {
                    reporter: self.id,
                    accused: claim.claimant,
                    claim_digest: claim.claim_digest,
                    bogus_digest: entry.job.digest,
                    time: now,
                });
            }
            if self.params.rejected_blacklist {
                self.rejected.insert(entry.job.digest);
            }
        }
        self.audit_state();
        reports
    }

    /// Ends the in-flight verification without acting on it (sender revoked meanwhile).
    pub fn discard_in_service(&mut self, now: SimTime) {
        let InService { entry, started } = self
            .in_service
            .take()
            .expect("discard_in_service without job in service");
        self.busy_time = self.busy_time + (now - started);
        self.finalize(&entry, started, Outcome::DroppedRevoked);
    }

    /// Processes the claimed digests of a message this node just verified itself.
    pub fn apply_claims(
        &mut self,
        accepted: &SignedCam,
        accepted_digest: Digest80,
        now: SimTime,
    ) -> Vec<MisbehaviorReport> {
        let mut reports = Vec::new();
        let claimant = accepted.signature.signer;
        for h in &accepted.cam.claimed_digests {
            match self.queue.get(h) {
                Some(entry) if !entry.job.b => {
                    self.counters.claims_matched += 1;
                    if self.rng.random_bool(self.params.pr_check) {
                        self.counters.spot_checks += 1;
                        if let Some(a) = self.audit.as_mut() {
                            if !a.ever_checked.insert(*h) {
                                a.violations
                                    .push(format!("node {}: b set twice on {h}", self.id));
                            }
                        }
                        self.queue.mark_checked(
                            h,
                            ClaimRef {
                                claimant,
                                claim_digest: accepted_digest,
                            },
                        );
                    } else {
                        let entry = self.queue.remove(h).expect("present");
                        self.finalize(&entry, now, Outcome::CooperativelyAccepted);
                    }
                }
                Some(_) => {}
                None if claimant != self.id && self.rejected.contains(h) => {
                    reports.push(MisbehaviorReport {
                        reporter: self.id,
                        accused: claimant,
                        claim_digest: accepted_digest,
                        bogus_digest: *h,
                        time: now,
                    });
                }
                None => {}
            }
        }
        reports
    }

    /// Drops all pending jobs from `sender`.
    pub fn purge_sender(&mut self, sender: NodeId, now: SimTime) -> usize {
        let purged = self.queue.purge_sender(sender);
        for entry in &purged {
            self.finalize(entry, now, Outcome::DroppedRevoked);
        }
        purged.len()
    }

    /// Builds this node's own beacon, claiming every cached digest.
    pub fn build_own_cam(&mut self, now: SimTime) -> SignedCam {
        let claimed_digests = match self.params.scheme {
            Scheme::Cooperative => self.cache.digests().collect(),
            Scheme::Baseline => Vec::new(),
        };
        let seq = self.next_seq();
        SignedCam::signed(Cam {
            sender: self.id,
            gen_timestamp: now,
            position: self.position,
            seq,
            claimed_digests,
        })
    }

    /// Finalizes everything still pending at the end of the run.
    pub fn finish_run(&mut self, end: SimTime) {
        if let Some(InService { entry, started }) = self.in_service.take() {
            self.busy_time = self.busy_time + (end.saturating_sub(started));
            self.counters.verifying_at_end += 1;
            self.finalize(&entry, started, Outcome::UnprocessedAtEnd);
        }
        for entry in self.queue.drain() {
            self.finalize(&entry, end, Outcome::UnprocessedAtEnd);
        }
        if let Some(a) = self.audit.as_mut() {
            let done = self.counters.dispositions();
            if done != self.counters.received {
                a.violations.push(format!(
                    "node {}: {} messages received but {} dispositions",
                    self.id, self.counters.received, done
                ));
            }
        }
    }

    fn finalize(&mut self, entry: &QueuedJob, leave: SimTime, outcome: Outcome) {
        let msg = &entry.job.message;
        let c = &mut self.counters;
        match outcome {
            Outcome::SignatureAccepted => c.signature_accepted += 1,
            Outcome::CooperativelyAccepted => {
                c.cooperatively_accepted += 1;
                if !msg.signature.valid {
                    c.bogus_cooperatively_accepted += 1;
                }
                if let Some(a) = self.audit.as_mut() {
                    a.cooperatively_accepted.insert(entry.job.digest);
                }
            }
            Outcome::RejectedInvalid => c.rejected_invalid += 1,
            Outcome::DroppedRevoked => c.dropped_revoked += 1,
            Outcome::UnprocessedAtEnd => c.unprocessed_at_end += 1,
        }
        if let Some(log) = self.log.as_mut() {
            log.push(Disposition {
                receiver: self.id,
                digest: entry.job.digest,
                sender: msg.cam.sender,
                seq: msg.cam.seq,
                bogus: !msg.signature.valid,
                enqueue_time: entry.job.enqueue_time,
                leave_queue_time: leave,
                outcome,
                spot_checked: entry.job.b,
            });
        }
    }

    /// Re-checks queue partition, cache purity and flag monotonicity.
    pub fn audit_state(&mut self) {
        let Some(a) = self.audit.as_mut() else { return };
        if let Err(e) = self.queue.audit() {
            a.violations.push(format!("node {}: {e}", self.id));
        }
        for d in self.cache.digests() {
            if a.cooperatively_accepted.contains(&d) {
                a.violations.push(format!(
                    "node {}: cooperatively accepted {d} is cached",
                    self.id
                ));
            }
        }
        for entry in self.queue.iter() {
            if a.ever_checked.contains(&entry.job.digest) && !entry.job.b {
                a.violations.push(format!(
                    "node {}: b cleared on {}",
                    self.id, entry.job.digest
                ));
            }
        }
        if self.cache.len() > self.params.alpha {
            a.violations
                .push(format!("node {}: cache over capacity", self.id));
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn params(pr_check: f64) -> EngineParams {
        EngineParams {
            alpha: 5,
            pr_check,
            tau: SimTime::from_millis(5),
            scheme: Scheme::Cooperative,
            rejected_blacklist: false,
        }
    }

    fn node(pr_check: f64) -> NodeState {
        let mut n = NodeState::new(
            NodeId(0),
            Role::Benign,
            (100.0, 100.0),
            params(pr_check),
            SimRng::seed_from_u64(11),
        );
        n.record_dispositions();
        n.enable_audit();
        n
    }

    fn msg(sender: u32, seq: u64, claims: Vec<Digest80>, valid: bool) -> Arc<SignedCam> {
        let cam = Cam {
            sender: NodeId(sender),
            gen_timestamp: SimTime::from_millis(seq),
            position: (1.0, 2.0),
            seq,
            claimed_digests: claims,
        };
        Arc::new(if valid {
            SignedCam::signed(cam)
        } else {
            SignedCam::bogus(cam)
        })
    }

    fn job(m: &Arc<SignedCam>, at: SimTime) -> VerificationJob {
        VerificationJob::new(Arc::clone(m), at)
    }

    #[test]
    fn valid_head_is_signature_accepted_and_cached() {
        let mut n = node(0.2);
        let m = msg(1, 1, vec![], true);
        let j = job(&m, SimTime::from_millis(1000));
        let d = j.digest;
        n.receive(j);
        let done = n.pop_and_verify(SimTime::from_millis(1250)).unwrap();
        assert_eq!(done, SimTime::from_millis(1255));
        assert!(
            n.pop_and_verify(SimTime::from_millis(1251)).is_none(),
            "verifier busy"
        );
        n.finish_verification(done);
        let disp = &n.dispositions()[0];
        assert_eq!(disp.outcome, Outcome::SignatureAccepted);
        assert_eq!(disp.waiting_time(), SimTime::from_millis(250));
        assert!(n.cache().contains(&d));
        assert!(n.violations().is_empty());
    }

    #[test]
    fn invalid_head_rejected_without_claim_scan() {
        let mut n = node(0.0);
        let target = msg(2, 1, vec![], true);
        let tj = job(&target, SimTime::ZERO);
        let td = tj.digest;
        let claimer = msg(3, 1, vec![td], false);
        n.receive(job(&claimer, SimTime::ZERO));
        n.receive(tj);
        // force the bogus claimer to the head
        while n.queue().iter().next().unwrap().job.message.cam.sender != NodeId(3) {
            let e = n.queue.pop_front().unwrap();
            n.queue.enqueue_tail(e.job).unwrap();
        }
        let done = n.pop_and_verify(SimTime::ZERO).unwrap();
        n.finish_verification(done);
        assert_eq!(n.dispositions()[0].outcome, Outcome::RejectedInvalid);
        assert!(n.cache().is_empty());
        assert!(
            n.queue().contains(&td),
            "claims of invalid messages are ignored"
        );
    }

    #[test]
    fn claim_with_zero_check_accepts_cooperatively() {
        let mut n = node(0.0);
        let target = msg(2, 1, vec![], true);
        let tj = job(&target, SimTime::from_millis(10));
        let td = tj.digest;
        n.receive(tj);
        let claimer = msg(3, 1, vec![td], true);
        n.apply_claims(
            &claimer,
            crate::message::compute_digest(&claimer),
            SimTime::from_millis(30),
        );
        assert!(n.queue().is_empty());
        let d = &n.dispositions()[0];
        assert_eq!(d.outcome, Outcome::CooperativelyAccepted);
        assert_eq!(d.waiting_time(), SimTime::from_millis(20));
        assert!(
            !n.cache().contains(&td),
            "cooperative acceptance is never cached"
        );
        assert_eq!(n.counters().claims_matched, 1);
    }

    #[test]
    fn claim_with_full_check_moves_to_prefix() {
        let mut n = node(1.0);
        let msgs: Vec<_> = (0..4).map(|s| msg(2, s, vec![], true)).collect();
        let digests: Vec<_> = msgs
            .iter()
            .map(|m| crate::message::compute_digest(m))
            .collect();
        for m in &msgs {
            n.receive(job(m, SimTime::ZERO));
        }
        let claimer = msg(3, 1, vec![digests[2], digests[0]], true);
        let cd = crate::message::compute_digest(&claimer);
        n.apply_claims(&claimer, cd, SimTime::from_millis(1));
        let order: Vec<_> = n.queue().iter().take(2).map(|e| e.job.digest).collect();
        assert_eq!(order, vec![digests[2], digests[0]]);
        assert!(n.queue().iter().take(2).all(|e| e.job.b));
        assert_eq!(
            n.queue()
                .get(&digests[2])
                .unwrap()
                .checked_by
                .unwrap()
                .claim_digest,
            cd
        );
        // a second claim on an already checked job is ignored
        n.apply_claims(&claimer, cd, SimTime::from_millis(2));
        assert_eq!(n.counters().spot_checks, 2);
        n.audit_state();
        assert!(n.violations().is_empty());
    }

    #[test]
    fn unknown_claim_is_noop() {
        let mut n = node(0.5);
        n.receive(job(&msg(2, 1, vec![], true), SimTime::ZERO));
        let claimer = msg(3, 1, vec![Digest80([7; 10])], true);
        let before = n.queue().len();
        n.apply_claims(&claimer, Digest80([1; 10]), SimTime::ZERO);
        assert_eq!(n.queue().len(), before);
        assert_eq!(n.counters().claims_matched, 0);
    }

    #[test]
    fn spot_checked_bogus_produces_report() {
        let mut n = node(1.0);
        let bogus = msg(9, 1, vec![], false);
        let bj = job(&bogus, SimTime::ZERO);
        let bd = bj.digest;
        n.receive(bj);
        let claimer = msg(9, 2, vec![bd], true);
        let cd = crate::message::compute_digest(&claimer);
        n.apply_claims(&claimer, cd, SimTime::ZERO);
        let done = n.pop_and_verify(SimTime::ZERO).unwrap();
        let reports = n.finish_verification(done);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].accused, NodeId(9));
        assert_eq!(reports[0].bogus_digest, bd);
        assert_eq!(reports[0].claim_digest, cd);
    }

    #[test]
    fn own_cam_claims_cache() {
        let mut n = node(0.2);
        let c = n.build_own_cam(SimTime::ZERO);
        assert!(c.cam.claimed_digests.is_empty());
        assert_eq!(c.encoded_len(), 300);
        for s in 0..3 {
            n.receive(job(&msg(2, s, vec![], true), SimTime::ZERO));
            let t = n.pop_and_verify(SimTime::ZERO).unwrap();
            n.finish_verification(t);
        }
        assert_eq!(n.build_own_cam(SimTime::ZERO).cam.claimed_digests.len(), 3);
        for s in 3..10 {
            n.receive(job(&msg(2, s, vec![], true), SimTime::ZERO));
            let t = n.pop_and_verify(SimTime::ZERO).unwrap();
            n.finish_verification(t);
        }
        let c = n.build_own_cam(SimTime::ZERO);
        assert_eq!(c.cam.claimed_digests.len(), 5);
        assert_eq!(c.encoded_len(), 350);
        assert!(c.signature.valid);
    }

    #[test]
    fn finish_run_conserves_messages() {
        let mut n = node(0.2);
        for s in 0..6 {
            n.receive(job(&msg(2, s, vec![], true), SimTime::ZERO));
        }
        n.pop_and_verify(SimTime::ZERO);
        n.finish_run(SimTime::from_millis(3));
        assert_eq!(n.counters().dispositions(), 6);
        assert_eq!(n.counters().unprocessed_at_end, 6);
        assert!(n.violations().is_empty());
    }
}
