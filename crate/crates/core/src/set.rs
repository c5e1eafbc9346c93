//! Compact model subsets represented as 64-bit masks.
//!
//! Every subset operation in the selection and oracle paths works over
//! indices into a [`ClassProfile`](crate::catalog::ClassProfile)'s entry
//! list, so a bitmask is both the fastest and the most convenient canonical
//! form (it doubles as the cache key for common-random-number reuse).

use std::fmt;

/// Hard cap on pool size imposed by the mask representation.
pub const MAX_MODELS: usize = 64;

/// A set of model indices drawn from one profile.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ModelSet(u64);

impl ModelSet {
    pub const EMPTY: ModelSet = ModelSet(0);

    pub fn empty() -> Self {
        ModelSet(0)
    }

    pub fn singleton(index: usize) -> Self {
        debug_assert!(index < MAX_MODELS);
        ModelSet(1u64 << index)
    }

    /// The full set `{0, 1, ..., len-1}`.
    pub fn full(len: usize) -> Self {
        debug_assert!(len <= MAX_MODELS);
        if len == MAX_MODELS {
            ModelSet(u64::MAX)
        } else {
            ModelSet((1u64 << len) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut set = ModelSet::empty();
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Raw mask; also the canonical subset identity used for seed derivation.
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, index: usize) {
        debug_assert!(index < MAX_MODELS);
        self.0 |= 1u64 << index;
    }

    pub fn remove(&mut self, index: usize) {
        self.0 &= !(1u64 << index);
    }

    pub fn contains(self, index: usize) -> bool {
        index < MAX_MODELS && self.0 & (1u64 << index) != 0
    }

    pub fn with(self, index: usize) -> Self {
        let mut s = self;
        s.insert(index);
        s
    }

    pub fn without(self, index: usize) -> Self {
        let mut s = self;
        s.remove(index);
        s
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: ModelSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending model indices.
    pub fn iter(self) -> SetIter {
        SetIter(self.0)
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for ModelSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        ModelSet::from_indices(iter)
    }
}

impl fmt::Debug for ModelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct SetIter(u64);

impl Iterator for SetIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let idx = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(idx)
    }
}
