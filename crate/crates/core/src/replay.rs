//! Fixed-capacity ring buffer of transitions with seeded uniform sampling.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{CoreError, CoreResult};
use crate::mdp::{ActionVec, EnvState};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub s: EnvState,
    pub a: ActionVec,
    /// `None` marks an absorbing transition (a rejected shield proposal).
    pub s_next: Option<EnvState>,
    pub r: f64,
    pub done: bool,
}

impl TransitionRecord {
    pub fn step(s: EnvState, a: ActionVec, s_next: EnvState, r: f64, done: bool) -> Self {
        Self { s, a, s_next: Some(s_next), r, done }
    }

    /// The penalty record stored when the shield rejects `a` at `s`.
    pub fn absorbing(s: EnvState, a: ActionVec, r: f64) -> Self {
        Self { s, a, s_next: None, r, done: true }
    }

    pub fn is_absorbing(&self) -> bool {
        self.s_next.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    records: Vec<TransitionRecord>,
    /// Slot overwritten by the next push once the buffer is full.
    head: usize,
    rng: Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rng: Rng) -> CoreResult<Self> {
        if capacity == 0 {
            return Err(CoreError::config("learner.buffer_capacity must be positive"));
        }
        Ok(Self { capacity, records: Vec::new(), head: 0, rng })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, rec: TransitionRecord) {
        debug_assert!(!rec.is_absorbing() || rec.done);
        if self.records.len() < self.capacity {
            self.records.push(rec);
        } else {
            self.records[self.head] = rec;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Records from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        let (newer, older) = self.records.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Indices of `batch` records drawn uniformly with replacement.
    pub fn sample_indices(&mut self, batch: usize, out: &mut Vec<usize>) -> CoreResult<()> {
        if self.records.len() < batch || self.records.is_empty() {
            return Err(CoreError::BufferUndersized { have: self.records.len(), need: batch.max(1) });
        }
        out.clear();
        let n = self.records.len();
        out.extend((0..batch).map(|_| self.rng.gen_range(0..n)));
        Ok(())
    }

    pub fn get(&self, index: usize) -> &TransitionRecord {
        &self.records[index]
    }

    pub fn sample(&mut self, batch: usize) -> CoreResult<Vec<TransitionRecord>> {
        let mut idx = Vec::with_capacity(batch);
        self.sample_indices(batch, &mut idx)?;
        Ok(idx.into_iter().map(|i| self.records[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn rec(i: usize) -> TransitionRecord {
        let s = EnvState::new(&[i as f64, 0.0, 0.0, 0.0]).unwrap();
        TransitionRecord::step(s, ActionVec::zeros(2), s, i as f64, false)
    }

    #[test]
    fn oldest_record_is_evicted() {
        let mut b = ReplayBuffer::new(3, stream(0, Stream::Replay)).unwrap();
        for i in 0..4 {
            b.push(rec(i));
        }
        assert_eq!(b.len(), 3);
        let rs: Vec<f64> = b.iter().map(|r| r.r).collect();
        assert_eq!(rs, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn undersized_sampling_is_an_error() {
        let mut b = ReplayBuffer::new(10, stream(0, Stream::Replay)).unwrap();
        b.push(rec(0));
        assert!(matches!(b.sample(2), Err(CoreError::BufferUndersized { have: 1, need: 2 })));
        assert!(ReplayBuffer::new(0, stream(0, Stream::Replay)).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut a = ReplayBuffer::new(50, stream(3, Stream::Replay)).unwrap();
        for i in 0..50 {
            a.push(rec(i));
        }
        let mut b = a.clone();
        assert_eq!(a.sample(32).unwrap(), b.sample(32).unwrap());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10, stream(4, Stream::Replay)).unwrap();
        for i in 0..10 {
            b.push(rec(i));
        }
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            for r in b.sample(10).unwrap() {
                counts[r.r as usize] += 1;
            }
        }
        for c in counts {
            let frac = c as f64 / 100_000.0;
            assert!((frac - 0.1).abs() <= 0.01, "{frac}");
        }
    }

    #[test]
    fn absorbing_records_are_done() {
        let s = EnvState::new(&[0.0; 4]).unwrap();
        let r = TransitionRecord::absorbing(s, ActionVec::zeros(2), -10.0);
        assert!(r.is_absorbing() && r.done);
    }
}
