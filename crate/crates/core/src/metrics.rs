//! Per-run records and the aggregates derived from them.

use crate::engine::{Disposition, NodeCounters, Outcome};
use crate::message::NodeId;
use crate::threat::{MisbehaviorReport, Revocation};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueueSample {
    /// End of the one-second interval, whole seconds.
    pub second: u64,
    pub queue_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryOutcome {
    pub id: NodeId,
    pub bogus_sent: u64,
    pub claim_times: Vec<SimTime>,
    pub revocation_time: Option<SimTime>,
}

impl AdversaryOutcome {
    /// Claims the adversary had sent when it was revoked.
    pub fn claims_before_revocation(&self) -> Option<usize> {
        self.revocation_time
            .map(|t| self.claim_times.iter().filter(|c| **c <= t).count())
    }
}

/// Everything one run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub run_index: usize,
    pub seed: u64,
    pub duration: SimTime,
    /// Nodes whose dispositions are recorded.
    pub scope_nodes: usize,
    pub dispositions: Vec<Disposition>,
    /// Counters summed over the recorded scope.
    pub scope: NodeCounters,
    /// Counters summed over all benign nodes.
    pub global: NodeCounters,
    /// Node 0 queue length at each whole second.
    pub queue_series: Vec<QueueSample>,
    pub final_queue_len: usize,
    pub max_queue_len: usize,
    /// Verifier busy time summed over the recorded scope.
    pub busy_time: SimTime,
    pub reports: Vec<MisbehaviorReport>,
    pub revocations: Vec<Revocation>,
    pub adversary: Option<AdversaryOutcome>,
    pub violations: Vec<String>,
}

impl RunMetrics {
    /// Waiting times of accepted messages, unsorted.
    pub fn accepted_waiting(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.dispositions
            .iter()
            .filter(|d| d.outcome.is_accepted())
            .map(Disposition::waiting_time)
    }

    pub fn summary(&self) -> RunSummary {
        let mut w: Vec<SimTime> = self.accepted_waiting().collect();
        w.sort_unstable();
        let c = &self.scope;
        let accepted = c.signature_accepted + c.cooperatively_accepted;
        let util_den = self.duration.as_secs_f64() * self.scope_nodes as f64;
        RunSummary {
            received: c.received,
            duplicates: c.duplicates,
            signature_verifications: c.signature_verifications,
            signature_accepted: c.signature_accepted,
            cooperatively_accepted: c.cooperatively_accepted,
            rejected_invalid: c.rejected_invalid,
            dropped_revoked: c.dropped_revoked + c.dropped_at_reception,
            unprocessed_at_end: c.unprocessed_at_end,
            cooperative_ratio: ratio(c.cooperatively_accepted, accepted),
            mean_waiting: mean_secs(&w),
            median_waiting: quantile(&w, 0.5).map_or(f64::NAN, SimTime::as_secs_f64),
            p90_waiting: quantile(&w, 0.9).map_or(f64::NAN, SimTime::as_secs_f64),
            p99_waiting: quantile(&w, 0.99).map_or(f64::NAN, SimTime::as_secs_f64),
            final_queue_len: self.final_queue_len as f64,
            max_queue_len: self.max_queue_len as f64,
            verifier_utilization: self.busy_time.as_secs_f64() / util_den,
            bogus_accepted: self.global.bogus_cooperatively_accepted,
            reports: self.reports.len() as u64,
            revocation_time: self
                .adversary
                .as_ref()
                .and_then(|a| a.revocation_time)
                .map_or(f64::NAN, SimTime::as_secs_f64),
            claims_before_revocation: self
                .adversary
                .as_ref()
                .and_then(AdversaryOutcome::claims_before_revocation)
                .map_or(f64::NAN, |c| c as f64),
        }
    }

    /// Per-second departures and mean waiting of accepted messages at node 0
    /// (or the scope), paired with the queue-length samples.
    pub fn timeseries(&self) -> Vec<TimeseriesRow> {
        let secs = self.queue_series.len();
        let mut sum = vec![0u64; secs];
        let mut count = vec![0u64; secs];
        for d in self.dispositions.iter().filter(|d| d.outcome.is_accepted()) {
            let bucket = (d.leave_queue_time.as_nanos() / 1_000_000_000) as usize;
            if bucket < secs {
                sum[bucket] += d.waiting_time().as_nanos();
                count[bucket] += 1;
            }
        }
        self.queue_series
            .iter()
            .enumerate()
            .map(|(i, q)| TimeseriesRow {
                second: q.second,
                departures: count[i],
                mean_waiting: if count[i] == 0 {
                    f64::NAN
                } else {
                    sum[i] as f64 / count[i] as f64 / 1e9
                },
                queue_len: q.queue_len,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeseriesRow {
    pub second: u64,
    pub departures: u64,
    pub mean_waiting: f64,
    pub queue_len: usize,
}

/// Scalar results of one run. Counts are of the recorded scope except
/// `bogus_accepted`, which is over all benign nodes. Times in seconds;
/// NaN marks an undefined value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub received: u64,
    pub duplicates: u64,
    pub signature_verifications: u64,
    pub signature_accepted: u64,
    pub cooperatively_accepted: u64,
    pub rejected_invalid: u64,
    pub dropped_revoked: u64,
    pub unprocessed_at_end: u64,
    pub cooperative_ratio: f64,
    pub mean_waiting: f64,
    pub median_waiting: f64,
    pub p90_waiting: f64,
    pub p99_waiting: f64,
    pub final_queue_len: f64,
    pub max_queue_len: f64,
    pub verifier_utilization: f64,
    pub bogus_accepted: u64,
    pub reports: u64,
    pub revocation_time: f64,
    pub claims_before_revocation: f64,
}

impl RunSummary {
    pub const COLUMNS: [&'static str; 20] = [
        "received",
        "duplicates",
        "signature_verifications",
        "signature_accepted",
        "cooperatively_accepted",
        "rejected_invalid",
        "dropped_revoked",
        "unprocessed_at_end",
        "cooperative_ratio",
        "mean_waiting",
        "median_waiting",
        "p90_waiting",
        "p99_waiting",
        "final_queue_len",
        "max_queue_len",
        "verifier_utilization",
        "bogus_accepted",
        "reports",
        "revocation_time",
        "claims_before_revocation",
    ];

    /// Values in [`RunSummary::COLUMNS`] order.
    pub fn values(&self) -> [f64; 20] {
        [
            self.received as f64,
            self.duplicates as f64,
            self.signature_verifications as f64,
            self.signature_accepted as f64,
            self.cooperatively_accepted as f64,
            self.rejected_invalid as f64,
            self.dropped_revoked as f64,
            self.unprocessed_at_end as f64,
            self.cooperative_ratio,
            self.mean_waiting,
            self.median_waiting,
            self.p90_waiting,
            self.p99_waiting,
            self.final_queue_len,
            self.max_queue_len,
            self.verifier_utilization,
            self.bogus_accepted as f64,
            self.reports as f64,
            self.revocation_time,
            self.claims_before_revocation,
        ]
    }
}

/// Column-wise mean over runs, ignoring NaN entries (NaN if all are NaN).
pub fn mean_summary(summaries: &[RunSummary]) -> [f64; 20] {
    let mut out = [f64::NAN; 20];
    for (col, slot) in out.iter_mut().enumerate() {
        let vals: Vec<f64> = summaries
            .iter()
            .map(|s| s.values()[col])
            .filter(|v| !v.is_nan())
            .collect();
        if !vals.is_empty() {
            *slot = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    out
}

pub fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

fn mean_secs(sorted: &[SimTime]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted.iter().map(|t| t.as_nanos() as f64).sum::<f64>() / sorted.len() as f64 / 1e9
}

/// Nearest-rank empirical quantile of sorted data: the smallest sample with
/// at least a fraction `q` of the data at or below it.
pub fn quantile<T: Copy>(sorted: &[T], q: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, n) - 1])
}

/// Empirical CDF as (sample, fraction of samples ≤ it) over sorted data.
pub fn empirical_cdf(sorted: &[SimTime]) -> impl Iterator<Item = (SimTime, f64)> + '_ {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(move |(i, t)| (*t, (i + 1) as f64 / n))
}

/// Fraction of sorted samples strictly below `threshold`.
pub fn fraction_below(sorted: &[SimTime], threshold: SimTime) -> f64 {
    ratio(
        sorted.partition_point(|t| *t < threshold) as u64,
        sorted.len() as u64,
    )
}

pub fn count_outcome(dispositions: &[Disposition], outcome: Outcome) -> usize {
    dispositions.iter().filter(|d| d.outcome == outcome).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u32> = (1..=10).collect();
        assert_eq!(quantile(&v, 0.5), Some(5));
        assert_eq!(quantile(&v, 0.9), Some(9));
        assert_eq!(quantile(&v, 0.99), Some(10));
        assert_eq!(quantile(&v, 0.0), Some(1));
        assert_eq!(quantile::<u32>(&[], 0.5), None);
    }

    #[test]
    fn cdf_ends_at_one() {
        let v: Vec<SimTime> = (0..4).map(SimTime::from_millis).collect();
        let cdf: Vec<_> = empirical_cdf(&v).collect();
        assert_eq!(cdf.last().unwrap().1, 1.0);
        assert_eq!(cdf[0], (SimTime::ZERO, 0.25));
        assert_eq!(fraction_below(&v, SimTime::from_millis(2)), 0.5);
    }

    #[test]
    fn mean_skips_nan() {
        let mut a = empty_summary();
        a.revocation_time = 2.0;
        let mut b = a;
        b.revocation_time = f64::NAN;
        let m = mean_summary(&[a, b]);
        assert_eq!(m[18], 2.0);
    }

    fn empty_summary() -> RunSummary {
        RunSummary {
            received: 0,
            duplicates: 0,
            signature_verifications: 0,
            signature_accepted: 0,
            cooperatively_accepted: 0,
            rejected_invalid: 0,
            dropped_revoked: 0,
            unprocessed_at_end: 0,
            cooperative_ratio: f64::NAN,
            mean_waiting: f64::NAN,
            median_waiting: f64::NAN,
            p90_waiting: f64::NAN,
            p99_waiting: f64::NAN,
            final_queue_len: 0.0,
            max_queue_len: 0.0,
            verifier_utilization: 0.0,
            bogus_accepted: 0,
            reports: 0,
            revocation_time: f64::NAN,
            claims_before_revocation: f64::NAN,
        }
    }
}
