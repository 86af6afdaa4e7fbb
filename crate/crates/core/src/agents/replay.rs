use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::OperativeMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: OperativeMode,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO experience memory with uniform sampling without
/// replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot overwritten by the next push once full.
    head: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), head: 0, rng }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `k` distinct transitions, or `None` when fewer than `k` are stored.
    pub fn sample(&mut self, k: usize) -> Option<Vec<&Transition>> {
        if k == 0 || self.items.len() < k {
            return None;
        }
        let picks = index::sample(&mut self.rng, self.items.len(), k);
        Some(picks.iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(tag: f64) -> Transition {
        Transition { obs: vec![tag], action: OperativeMode::Off, reward: 0.0, next_obs: vec![tag], terminal: false }
    }

    fn buffer(capacity: usize) -> ReplayBuffer {
        ReplayBuffer::new(capacity, ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn fifo_eviction() {
        let mut b = buffer(4);
        for i in 0..5 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 4);
        let tags: Vec<f64> = b.iter().map(|x| x.obs[0]).collect();
        assert_eq!(tags, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn full_sample_covers_everything_once() {
        let mut b = buffer(32);
        for i in 0..32 {
            b.push(t(i as f64));
        }
        let mut tags: Vec<f64> = b.sample(32).unwrap().iter().map(|x| x.obs[0]).collect();
        tags.sort_by(f64::total_cmp);
        assert_eq!(tags, (0..32).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn undersized_sample_is_none() {
        let mut b = buffer(8);
        b.push(t(0.0));
        assert!(b.sample(2).is_none());
        assert!(b.sample(1).is_some());
    }
}
