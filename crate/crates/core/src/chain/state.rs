use serde::{Deserialize, Serialize};

/// Backlog state `(due_now, total)` at a given age of the operating cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    /// Unprocessed orders due at the next deadline, including late ones.
    pub due_now: usize,
    /// All unprocessed orders.
    pub total: usize,
    pub age: usize,
}

/// Enumeration of the pairs `0 <= due_now <= total <= bound`.
///
/// Pairs are laid out by `total`, so index `total (total + 1) / 2 + due_now`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    bound: usize,
}

impl StateSpace {
    pub fn new(bound: usize) -> Self {
        StateSpace { bound }
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn len(&self) -> usize {
        (self.bound + 1) * (self.bound + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, due_now: usize, total: usize) -> usize {
        debug_assert!(due_now <= total && total <= self.bound);
        total * (total + 1) / 2 + due_now
    }

    /// Inverse of [`StateSpace::index`].
    pub fn pair(&self, index: usize) -> (usize, usize) {
        let mut total = (((8 * index + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
        while (total + 1) * (total + 2) / 2 <= index {
            total += 1;
        }
        while total * (total + 1) / 2 > index {
            total -= 1;
        }
        (index - total * (total + 1) / 2, total)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.bound).flat_map(|total| (0..=total).map(move |due| (due, total)))
    }

    /// Vector with all mass on `(x, x)`, taking `weights[x]` for each total `x`.
    pub fn diagonal(&self, weights: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for (x, w) in weights.iter().enumerate().take(self.bound + 1) {
            v[self.index(x, x)] = *w;
        }
        v
    }

    /// Marginal distribution of `total`.
    pub fn total_marginal(&self, dist: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.bound + 1];
        for (i, p) in dist.iter().enumerate() {
            m[self.pair(i).1] += p;
        }
        m
    }

    /// Marginal distribution of `due_now`.
    pub fn due_marginal(&self, dist: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.bound + 1];
        for (i, p) in dist.iter().enumerate() {
            m[self.pair(i).0] += p;
        }
        m
    }
}
