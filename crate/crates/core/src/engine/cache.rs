use crate::message::Digest80;
use crate::time::SimTime;

/// Digests of the latest messages this node signature-verified itself,
/// ordered by the messages' generation timestamps (newest first).
#[derive(Clone, Debug)]
pub struct VerifiedCache {
    entries: Vec<(Digest80, SimTime)>,
    capacity: usize,
}

impl VerifiedCache {
    pub fn new(capacity: usize) -> Self {
        VerifiedCache {
            entries: Vec::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Digest80, SimTime)] {
        &self.entries
    }

    pub fn digests(&self) -> impl Iterator<Item = Digest80> + '_ {
        self.entries.iter().map(|(d, _)| *d)
    }

    pub fn contains(&self, digest: &Digest80) -> bool {
        self.entries.iter().any(|(d, _)| d == digest)
    }

    /// Inserts by timestamp (after any entries with an equal timestamp) and
    /// evicts the oldest entry beyond capacity.
    pub fn record_verified(&mut self, digest: Digest80, cam_ts: SimTime) {
        if self.capacity == 0 {
            return;
        }
        let pos = self.entries.partition_point(|(_, ts)| *ts >= cam_ts);
        if pos >= self.capacity {
            return;
        }
        self.entries.insert(pos, (digest, cam_ts));
        self.entries.truncate(self.capacity);
    }
}
