use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use super::ddpg::Transition;

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), items: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)) }
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
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Draws `n` distinct transitions, or `None` if fewer are stored.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Option<Vec<Transition>> {
        if n == 0 || n > self.items.len() {
            return None;
        }
        Some(index::sample(rng, self.items.len(), n).into_iter().map(|i| self.items[i]).collect())
    }
}
