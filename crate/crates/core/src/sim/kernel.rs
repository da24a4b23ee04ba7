use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::channel::{airtime_nanos, place_nodes, uniform_point, BeaconSchedule};
use super::config::{ConfigError, MetricsScope, ScenarioConfig};
use crate::engine::{EngineParams, NodeCounters, NodeState};
use crate::message::{compute_digest, Digest80, NodeId, Role, SignedCam, VerificationJob};
use crate::metrics::{AdversaryOutcome, QueueSample, RunMetrics};
use crate::threat::{Adversary, Revocation, RevocationRegistry};
use crate::time::SimTime;
use crate::SimRng;

const STREAM_KERNEL: u64 = 0;
const STREAM_LOSS: u64 = 1;
const STREAM_NODES: u64 = 16;

/// A frame on the air: the message and its digest, computed once by the channel.
#[derive(Debug)]
pub struct Frame {
    pub message: Arc<SignedCam>,
    pub digest: Digest80,
}

#[derive(Debug)]
pub enum EventKind {
    CamGeneration { node: usize },
    FrameDelivery { receiver: usize, frame: Arc<Frame> },
    VerificationComplete { node: usize },
    RunEnd,
}

impl EventKind {
    /// Tie-break order for simultaneous events.
    fn rank(&self) -> u8 {
        match self {
            EventKind::VerificationComplete { .. } => 0,
            EventKind::FrameDelivery { .. } => 1,
            EventKind::CamGeneration { .. } => 2,
            EventKind::RunEnd => 3,
        }
    }
}

#[derive(Debug)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// A single scenario run: all nodes, the channel and the event queue.
pub struct Simulation {
    config: ScenarioConfig,
    run_index: usize,
    seed: u64,
    nodes: Vec<NodeState>,
    schedules: Vec<BeaconSchedule>,
    adversary: Option<(usize, Adversary)>,
    registry: RevocationRegistry,
    events: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now: SimTime,
    end: SimTime,
    loss_rng: SimRng,
    queue_series: Vec<QueueSample>,
    next_sample: u64,
    max_queue_len: usize,
    revocations: Vec<Revocation>,
    causality_violations: u64,
}

impl Simulation {
    /// Builds the scenario with seed `config.seed + run_index`.
    pub fn new(config: &ScenarioConfig, run_index: usize) -> Result<Self, ConfigError> {
        config.validate()?;
        let seed = config.seed.wrapping_add(run_index as u64);
        let stream = |s: u64| {
            let mut r = SimRng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        let mut kernel_rng = stream(STREAM_KERNEL);
        let params = EngineParams {
            alpha: config.alpha,
            pr_check: config.pr_check,
            tau: SimTime::from_secs_f64(config.tau),
            scheme: config.scheme,
            rejected_blacklist: config.detection.rejected_blacklist,
        };

        let positions = place_nodes(config.n_nodes, config.area_side, &mut kernel_rng);
        let mut nodes: Vec<NodeState> = positions
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                NodeState::new(
                    NodeId(i as u32),
                    Role::Benign,
                    p,
                    params,
                    stream(STREAM_NODES + i as u64),
                )
            })
            .collect();
        let mut schedules: Vec<BeaconSchedule> = (0..config.n_nodes)
            .map(|_| BeaconSchedule::random(config.gamma, &mut kernel_rng))
            .collect();

        let adversary = config.adversary.map(|adv| {
            let idx = nodes.len();
            let pos = uniform_point(config.area_side, &mut kernel_rng);
            nodes.push(NodeState::new(
                NodeId(idx as u32),
                Role::Adversary,
                pos,
                params,
                stream(STREAM_NODES + idx as u64),
            ));
            let a = Adversary::new(adv, config.alpha);
            schedules.push(BeaconSchedule {
                phase: SimTime::from_secs_f64(adv.start_time),
                period: a.period(),
            });
            (idx, a)
        });

        for (i, n) in nodes.iter_mut().enumerate() {
            let record = match config.metrics_scope {
                MetricsScope::Evaluated => i == 0,
                MetricsScope::AllBenign => n.role == Role::Benign,
            };
            if record {
                n.record_dispositions();
            }
            if config.audit {
                n.enable_audit();
            }
        }

        let end = SimTime::from_secs_f64(config.duration);
        let mut sim = Simulation {
            config: config.clone(),
            run_index,
            seed,
            nodes,
            schedules,
            adversary,
            registry: RevocationRegistry::new(config.detection.votes_needed),
            events: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            end,
            loss_rng: stream(STREAM_LOSS),
            queue_series: Vec::new(),
            next_sample: 1,
            max_queue_len: 0,
            revocations: Vec::new(),
            causality_violations: 0,
        };
        for i in 0..sim.nodes.len() {
            let first = sim.schedules[i].phase;
            if first < end {
                sim.schedule(first, EventKind::CamGeneration { node: i });
            }
        }
        sim.schedule(end, EventKind::RunEnd);
        Ok(sim)
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) {
        if time < self.now {
            self.causality_violations += 1;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.push(Reverse(Event { time, seq, kind }));
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn registry(&self) -> &RevocationRegistry {
        &self.registry
    }

    /// Runs to completion and collects the metrics.
    pub fn run(mut self) -> RunMetrics {
        while let Some(Reverse(ev)) = self.events.pop() {
            self.sample_until(ev.time);
            self.now = ev.time;
            match ev.kind {
                EventKind::CamGeneration { node } => self.on_generation(node),
                EventKind::FrameDelivery { receiver, frame } => self.on_delivery(receiver, &frame),
                EventKind::VerificationComplete { node } => self.on_complete(node),
                EventKind::RunEnd => break,
            }
        }
        self.finish()
    }

    fn sample_until(&mut self, t: SimTime) {
        while self.next_sample * 1_000_000_000 <= t.as_nanos()
            && SimTime(self.next_sample * 1_000_000_000) <= self.end
        {
            self.queue_series.push(QueueSample {
                second: self.next_sample,
                queue_len: self.nodes[0].queue().len(),
            });
            self.next_sample += 1;
        }
    }

    fn on_generation(&mut self, i: usize) {
        let now = self.now;
        let message = match self.adversary.as_mut() {
            Some((idx, adv)) if *idx == i => {
                adv.emit(&mut self.nodes[i], now, self.config.area_side)
            }
            _ => self.nodes[i].build_own_cam(now),
        };
        self.broadcast(i, message);
        let next = now + self.schedules[i].period;
        if next < self.end {
            self.schedule(next, EventKind::CamGeneration { node: i });
        }
    }

    fn broadcast(&mut self, sender: usize, message: SignedCam) {
        let arrival = self.now + airtime_nanos(message.encoded_len(), self.config.bitrate);
        let digest = compute_digest(&message);
        let frame = Arc::new(Frame {
            message: Arc::new(message),
            digest,
        });
        for r in 0..self.nodes.len() {
            if r == sender {
                continue;
            }
            if self.config.loss_prob > 0.0 && self.loss_rng.random_bool(self.config.loss_prob) {
                continue;
            }
            self.schedule(
                arrival,
                EventKind::FrameDelivery {
                    receiver: r,
                    frame: Arc::clone(&frame),
                },
            );
        }
    }

    fn on_delivery(&mut self, r: usize, frame: &Frame) {
        let now = self.now;
        let node = &mut self.nodes[r];
        if self.registry.is_revoked(frame.message.cam.sender) {
            node.drop_at_reception();
            return;
        }
        node.receive(VerificationJob::with_digest(
            Arc::clone(&frame.message),
            frame.digest,
            now,
        ));
        if r == 0 {
            self.max_queue_len = self.max_queue_len.max(self.nodes[0].queue().len());
        }
        self.try_start(r);
        if self.config.audit {
            self.nodes[r].audit_state();
        }
    }

    fn try_start(&mut self, r: usize) {
        if let Some(done) = self.nodes[r].pop_and_verify(self.now) {
            self.schedule(done, EventKind::VerificationComplete { node: r });
        }
    }

    fn on_complete(&mut self, r: usize) {
        let now = self.now;
        let sender = self.nodes[r]
            .in_service()
            .expect("completion without job")
            .entry
            .job
            .message
            .cam
            .sender;
        if self.registry.is_revoked(sender) {
            self.nodes[r].discard_in_service(now);
        } else {
            let reports = self.nodes[r].finish_verification(now);
            for report in reports {
                if let Some(rev) = self.registry.apply_revocation(report) {
                    self.revocations.push(rev);
                    for n in self.nodes.iter_mut() {
                        n.purge_sender(rev.accused, now);
                    }
                }
            }
        }
        self.try_start(r);
        if self.config.audit {
            self.nodes[r].audit_state();
        }
    }

    fn finish(mut self) -> RunMetrics {
        let end = self.end;
        self.sample_until(end);
        let final_queue_len = self.nodes[0].queue().len();
        let mut violations = Vec::new();
        if self.causality_violations > 0 {
            violations.push(format!(
                "{} events scheduled in the past",
                self.causality_violations
            ));
        }

        let revoked_at: Vec<(NodeId, SimTime)> = self.registry.revoked().collect();
        let mut scope = NodeCounters::default();
        let mut global = NodeCounters::default();
        let mut scope_nodes = 0;
        let mut busy_time = SimTime::ZERO;
        let mut dispositions = Vec::new();
        for n in self.nodes.iter_mut() {
            n.finish_run(end);
            violations.extend(n.violations().iter().cloned());
            if n.role != Role::Benign {
                continue;
            }
            global.add(n.counters());
            let recorded = match self.config.metrics_scope {
                MetricsScope::Evaluated => n.id == NodeId(0),
                MetricsScope::AllBenign => true,
            };
            if recorded {
                scope.add(n.counters());
                scope_nodes += 1;
                busy_time = busy_time + n.busy_time();
                let taken = n.take_dispositions();
                if self.config.audit {
                    for d in &taken {
                        let late = revoked_at.iter().any(|(id, t)| {
                            *id == d.sender && d.outcome.is_accepted() && d.leave_queue_time > *t
                        });
                        if late {
                            violations.push(format!(
                                "node {} accepted {} from revoked {} after revocation",
                                d.receiver, d.digest, d.sender
                            ));
                        }
                    }
                }
                dispositions.extend(taken);
            }
        }

        let adversary = self.adversary.as_ref().map(|(idx, a)| {
            let id = NodeId(*idx as u32);
            AdversaryOutcome {
                id,
                bogus_sent: a.bogus_sent(),
                claim_times: a.claim_times().to_vec(),
                revocation_time: self.registry.revocation_time(id),
            }
        });

        RunMetrics {
            run_index: self.run_index,
            seed: self.seed,
            duration: end,
            scope_nodes,
            dispositions,
            scope,
            global,
            queue_series: self.queue_series,
            final_queue_len,
            max_queue_len: self.max_queue_len,
            busy_time,
            reports: self.registry.reports().to_vec(),
            revocations: self.revocations,
            adversary,
            violations,
        }
    }
}
