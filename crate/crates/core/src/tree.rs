//! Split rules shared by BART and the random forest.

use serde::{Deserialize, Serialize};

/// Set of categorical level codes, stored as a bitset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategorySet {
    bits: Vec<u64>,
}

impl CategorySet {
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn from_codes(codes: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::new();
        for c in codes {
            set.insert(c);
        }
        set
    }

    pub fn insert(&mut self, code: usize) {
        let (w, b) = (code / 64, code % 64);
        if self.bits.len() <= w {
            self.bits.resize(w + 1, 0);
        }
        self.bits[w] |= 1 << b;
    }

    #[inline]
    pub fn contains(&self, code: usize) -> bool {
        let (w, b) = (code / 64, code % 64);
        self.bits.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn codes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, word) in self.bits.iter().enumerate() {
            for b in 0..64 {
                if word & (1 << b) != 0 {
                    out.push(w * 64 + b);
                }
            }
        }
        out
    }
}

impl Default for CategorySet {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitKind {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// `x ∈ set` goes left.
    Subset(CategorySet),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub var: usize,
    pub kind: SplitKind,
    pub missing_left: bool,
}

impl SplitRule {
    pub fn threshold(var: usize, threshold: f64, missing_left: bool) -> Self {
        Self {
            var,
            kind: SplitKind::Threshold(threshold),
            missing_left,
        }
    }

    pub fn subset(var: usize, set: CategorySet, missing_left: bool) -> Self {
        Self {
            var,
            kind: SplitKind::Subset(set),
            missing_left,
        }
    }

    #[inline]
    pub fn goes_left(&self, x: f64) -> bool {
        if x.is_nan() {
            return self.missing_left;
        }
        match &self.kind {
            SplitKind::Threshold(c) => x <= *c,
            SplitKind::Subset(set) => set.contains(x as usize),
        }
    }
}
