use ndarray::Array2;
use rand::Rng;

use crate::{Error, Result};

/// One interaction `(s, a, r, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
}

/// A minibatch laid out row-wise: row `i` of `states` and `next_states`
/// belongs to `actions[i]` and `rewards[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Result<Self> {
        let width = ts.first().map_or(0, |t| t.s.len());
        if ts.iter().any(|t| t.s.len() != width || t.s_next.len() != width) {
            return Err(Error::Structural("transitions of differing widths".into()));
        }
        let flat = |f: fn(&Transition) -> &[f64]| ts.iter().flat_map(|t| f(t).iter().copied()).collect::<Vec<_>>();
        Ok(Self {
            states: Array2::from_shape_vec((ts.len(), width), flat(|t| &t.s)).expect("checked widths"),
            actions: ts.iter().map(|t| t.a).collect(),
            rewards: ts.iter().map(|t| t.r).collect(),
            next_states: Array2::from_shape_vec((ts.len(), width), flat(|t| &t.s_next)).expect("checked widths"),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Fixed-capacity ring of transitions with uniform sampling. Observations
/// are stored in flat preallocated arrays.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    width: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    next: usize,
}

impl ReplayBuffer {
    /// Buffer for `capacity` transitions of observations of length `width`.
    pub fn new(capacity: usize, width: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            width,
            states: Vec::with_capacity(capacity * width),
            next_states: Vec::with_capacity(capacity * width),
            actions: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Stores a transition, overwriting the oldest once full.
    pub fn push(&mut self, s: &[f64], a: usize, r: f64, s_next: &[f64]) -> Result<()> {
        if s.len() != self.width || s_next.len() != self.width {
            return Err(Error::Structural(format!(
                "observation widths {} and {}, buffer expects {}",
                s.len(),
                s_next.len(),
                self.width
            )));
        }
        if self.len() < self.capacity {
            self.states.extend_from_slice(s);
            self.next_states.extend_from_slice(s_next);
            self.actions.push(a);
            self.rewards.push(r);
        } else {
            let row = self.next * self.width..(self.next + 1) * self.width;
            self.states[row.clone()].copy_from_slice(s);
            self.next_states[row].copy_from_slice(s_next);
            self.actions[self.next] = a;
            self.rewards[self.next] = r;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len()).then(|| {
            let row = i * self.width..(i + 1) * self.width;
            Transition {
                s: self.states[row.clone()].to_vec(),
                a: self.actions[i],
                r: self.rewards[i],
                s_next: self.next_states[row].to_vec(),
            }
        })
    }

    /// `n` indices drawn uniformly with replacement over the current contents.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        let idx = self.sample_indices(n, rng);
        let w = self.width;
        let gather = |src: &[f64]| {
            Array2::from_shape_fn((n, w), |(i, j)| src[idx[i] * w + j])
        };
        Batch {
            states: gather(&self.states),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states: gather(&self.next_states),
        }
    }
}
