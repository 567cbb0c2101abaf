use rand::seq::index;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

/// Fixed-capacity FIFO replay memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, entries: Vec::with_capacity(capacity), cursor: 0 }
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

    /// Stores `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.entries.len() < self.capacity {
            self.entries.push(t);
        } else {
            self.entries[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.entries.len() < self.capacity { 0 } else { self.cursor };
        self.entries[split..].iter().chain(&self.entries[..split])
    }

    /// `batch` distinct entries drawn uniformly, or `None` if too few are stored.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch > self.entries.len() {
            return None;
        }
        Some(index::sample(rng, self.entries.len(), batch).into_iter().map(|i| &self.entries[i]).collect())
    }
}

/// Gaussian exploration variance `max(floor, initial * decay^t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationSchedule {
    pub initial_variance: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self { initial_variance: 1.0, decay: 0.9996, floor: 1e-3 }
    }
}

impl ExplorationSchedule {
    pub fn variance(&self, t: u64) -> f64 {
        let exp = i32::try_from(t).unwrap_or(i32::MAX);
        (self.initial_variance * self.decay.powi(exp)).max(self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition { state: vec![1.0], action: vec![r], reward: r }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(5000);
        for i in 0..5003 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 5000);
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards[0], 3.0);
        assert_eq!(rewards[4999], 5002.0);
    }

    #[test]
    fn samples_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(tr(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut got: Vec<f64> = b.sample(100, &mut rng).unwrap().iter().map(|t| t.reward).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        assert!(b.sample(101, &mut rng).is_none());
    }

    #[test]
    fn schedule_endpoints() {
        let s = ExplorationSchedule::default();
        assert_eq!(s.variance(0), 1.0);
        assert!((s.variance(1000) - 0.9996f64.powi(1000)).abs() < 1e-15);
        assert_eq!(s.variance(100_000), 1e-3);
    }

    proptest! {
        #[test]
        fn schedule_is_non_increasing(t in 0u64..200_000) {
            let s = ExplorationSchedule::default();
            prop_assert!(s.variance(t + 1) <= s.variance(t));
            prop_assert!(s.variance(t) >= s.floor);
        }

        #[test]
        fn buffer_never_exceeds_capacity(cap in 1usize..50, n in 0usize..200) {
            let mut b = ReplayBuffer::new(cap);
            for i in 0..n {
                b.push(tr(i as f64));
            }
            prop_assert_eq!(b.len(), n.min(cap));
            let newest: Vec<f64> = b.iter().map(|t| t.reward).collect();
            let expected: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
            prop_assert_eq!(newest, expected);
        }
    }
}
