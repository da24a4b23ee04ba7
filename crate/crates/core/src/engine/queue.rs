use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::message::{Digest80, NodeId, VerificationJob};

/// The claim that selected a job for spot-checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClaimRef {
    pub claimant: NodeId,
    pub claim_digest: Digest80,
}

#[derive(Clone, Debug)]
pub struct QueuedJob {
    pub job: VerificationJob,
    pub checked_by: Option<ClaimRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("digest {0} is already queued")]
pub struct DuplicateJob(pub Digest80);

/// Verification queue with a spot-check prefix.
///
/// Jobs with `b = true` always form a contiguous prefix of the queue. New
/// arrivals go into the `b = false` suffix, and a job selected for checking
/// moves to the end of the prefix.
#[derive(Clone, Debug, Default)]
pub struct VerificationQueue {
    order: VecDeque<Digest80>,
    jobs: HashMap<Digest80, QueuedJob>,
    checked: usize,
}

impl VerificationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Length of the `b = true` prefix.
    pub fn checked_len(&self) -> usize {
        self.checked
    }

    pub fn contains(&self, digest: &Digest80) -> bool {
        self.jobs.contains_key(digest)
    }

    pub fn get(&self, digest: &Digest80) -> Option<&QueuedJob> {
        self.jobs.get(digest)
    }

    /// Jobs in queue order, head first.
    pub fn iter(&self) -> impl Iterator<Item = &QueuedJob> + '_ {
        self.order.iter().map(move |d| &self.jobs[d])
    }

    /// Inserts at a uniformly drawn slot of the `b = false` suffix, ends included.
    /// Returns the chosen position.
    pub fn enqueue_random<R: Rng + ?Sized>(
        &mut self,
        job: VerificationJob,
        rng: &mut R,
    ) -> Result<usize, DuplicateJob> {
        debug_assert!(!job.b, "new jobs enter unchecked");
        if self.jobs.contains_key(&job.digest) {
            return Err(DuplicateJob(job.digest));
        }
        let pos = rng.random_range(self.checked..=self.order.len());
        self.order.insert(pos, job.digest);
        self.jobs.insert(
            job.digest,
            QueuedJob {
                job,
                checked_by: None,
            },
        );
        Ok(pos)
    }

    /// FCFS insertion used by the baseline scheme.
    pub fn enqueue_tail(&mut self, job: VerificationJob) -> Result<usize, DuplicateJob> {
        if self.jobs.contains_key(&job.digest) {
            return Err(DuplicateJob(job.digest));
        }
        self.order.push_back(job.digest);
        self.jobs.insert(
            job.digest,
            QueuedJob {
                job,
                checked_by: None,
            },
        );
        Ok(self.order.len() - 1)
    }

    pub fn pop_front(&mut self) -> Option<QueuedJob> {
        let digest = self.order.pop_front()?;
        let entry = self
            .jobs
            .remove(&digest)
            .expect("index out of sync with order");
        if entry.job.b {
            self.checked -= 1;
        }
        Some(entry)
    }

    fn position(&self, digest: &Digest80, from: usize) -> Option<usize> {
        self.order
            .range(from..)
            .position(|d| d == digest)
            .map(|p| p + from)
    }

    /// Sets `b` on an unchecked job and moves it right after the last checked job.
    /// Returns false when the digest is absent or already checked.
    pub fn mark_checked(&mut self, digest: &Digest80, claim: ClaimRef) -> bool {
        match self.jobs.get(digest) {
            Some(entry) if !entry.job.b => {}
            _ => return false,
        }
        let pos = self
            .position(digest, self.checked)
            .expect("index out of sync with order");
        self.order.remove(pos);
        self.order.insert(self.checked, *digest);
        self.checked += 1;
        let entry = self.jobs.get_mut(digest).expect("checked above");
        entry.job.b = true;
        entry.checked_by = Some(claim);
        true
    }

    pub fn remove(&mut self, digest: &Digest80) -> Option<QueuedJob> {
        let entry = self.jobs.remove(digest)?;
        let from = if entry.job.b { 0 } else { self.checked };
        let pos = self
            .position(digest, from)
            .expect("index out of sync with order");
        self.order.remove(pos);
        if entry.job.b {
            self.checked -= 1;
        }
        Some(entry)
    }

    /// Removes every job whose message was sent by `sender`, in queue order.
    pub fn purge_sender(&mut self, sender: NodeId) -> Vec<QueuedJob> {
        let mut purged = Vec::new();
        let jobs = &mut self.jobs;
        let mut checked = self.checked;
        self.order.retain(|d| {
            if jobs[d].job.message.cam.sender == sender {
                let entry = jobs.remove(d).expect("present");
                if entry.job.b {
                    checked -= 1;
                }
                purged.push(entry);
                false
            } else {
                true
            }
        });
        self.checked = checked;
        purged
    }

    /// Removes everything, head first.
    pub fn drain(&mut self) -> Vec<QueuedJob> {
        let mut out = Vec::with_capacity(self.order.len());
        while let Some(j) = self.pop_front() {
            out.push(j);
        }
        out
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn audit(&self) -> Result<(), String> {
        if self.order.len() != self.jobs.len() {
            return Err(format!(
                "order holds {} jobs but index holds {}",
                self.order.len(),
                self.jobs.len()
            ));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.order.len());
        for (i, d) in self.order.iter().enumerate() {
            if !seen.insert(*d) {
                return Err(format!("digest {d} queued twice"));
            }
            let Some(entry) = self.jobs.get(d) else {
                return Err(format!("digest {d} missing from index"));
            };
            if entry.job.digest != *d {
                return Err(format!(
                    "index entry for {d} holds job {}",
                    entry.job.digest
                ));
            }
            let in_prefix = i < self.checked;
            if entry.job.b != in_prefix {
                return Err(format!(
                    "partition broken at position {i}: b={} but checked prefix length {}",
                    entry.job.b, self.checked
                ));
            }
            if entry.job.b != entry.checked_by.is_some() {
                return Err(format!(
                    "job {d} has b={} without matching claim",
                    entry.job.b
                ));
            }
        }
        Ok(())
    }
}
