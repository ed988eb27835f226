use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Transition;
use crate::error::{Error, Result};

/// Fixed-capacity experience buffer with FIFO eviction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
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

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// `batch` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::invalid(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect())
    }
}
