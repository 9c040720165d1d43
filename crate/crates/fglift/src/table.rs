//! Dense potential tables over mixed argument spaces.
//!
//! A [`Table`] stores one strictly positive weight for every joint value of
//! its axes, row-major with the last axis varying fastest, which makes the
//! canonical "lexicographic over declared label order" row order the natural
//! iteration order. An axis either ranges over the labels of a [`Range`]
//! (an ordinary argument) or over all [`Histogram`]s of a fixed number of
//! draws from a range (the collapsed form of a block of interchangeable
//! arguments).

use thiserror::Error;

use crate::model::Range;
use crate::potential::Potential;

/// Errors from constructing or reshaping tables.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("table has {got} values but its axes require {want}")]
    WrongValueCount { got: usize, want: usize },
    #[error("axis permutation {perm:?} is not a bijection over {arity} axes")]
    BadPermutation { perm: Vec<usize>, arity: usize },
}

/// Counts per range label for a block of interchangeable positions.
///
/// Entry `i` counts how many positions take label `i` of the range the
/// histogram was built against; entries sum to the block size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Histogram(Vec<usize>);

impl Histogram {
    pub fn new(counts: Vec<usize>) -> Self {
        Histogram(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Total number of positions the histogram describes.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// The `"[n1,...,nm]"` form used in parametric model files.
    pub fn bracket_string(&self) -> String {
        let inner: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        format!("[{}]", inner.join(","))
    }

    /// Parses the `"[n1,...,nm]"` form.
    pub fn parse(s: &str) -> Option<Self> {
        let inner = s.strip_prefix('[')?.strip_suffix(']')?;
        let mut counts = Vec::new();
        for part in inner.split(',') {
            counts.push(part.trim().parse().ok()?);
        }
        if counts.is_empty() {
            return None;
        }
        Some(Histogram(counts))
    }

    /// Increments the count of `label`, consuming self.
    pub fn bumped(mut self, label: usize) -> Self {
        self.0[label] += 1;
        self
    }
}

/// Number of histograms of `positions` draws over `labels` labels:
/// C(positions + labels - 1, labels - 1).
pub fn histogram_count(positions: usize, labels: usize) -> usize {
    if labels == 0 {
        return usize::from(positions == 0);
    }
    // C(positions + labels - 1, labels - 1) computed incrementally.
    let n = positions + labels - 1;
    let k = (labels - 1).min(positions);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("histogram space too large to index")
}

/// All histograms of `positions` draws over `labels` labels, in descending
/// lexicographic order of the count vector ([2,0], [1,1], [0,2], ...).
pub fn enumerate_histograms(positions: usize, labels: usize) -> Vec<Histogram> {
    let mut out = Vec::with_capacity(histogram_count(positions, labels));
    let mut counts = vec![0usize; labels];
    fill_histograms(positions, 0, &mut counts, &mut out);
    out
}

fn fill_histograms(left: usize, slot: usize, counts: &mut Vec<usize>, out: &mut Vec<Histogram>) {
    if slot + 1 == counts.len() {
        counts[slot] = left;
        out.push(Histogram(counts.clone()));
        return;
    }
    for c in (0..=left).rev() {
        counts[slot] = c;
        fill_histograms(left - c, slot + 1, counts, out);
    }
    counts[slot] = 0;
}

/// Index of `hist` within [`enumerate_histograms`]'s order.
pub fn histogram_rank(hist: &Histogram) -> usize {
    let counts = hist.counts();
    let mut rank = 0usize;
    let mut left = hist.total();
    for (slot, &c) in counts.iter().enumerate() {
        let remaining_labels = counts.len() - slot - 1;
        // Histograms placing more than `c` in this slot come first.
        for bigger in (c + 1)..=left {
            rank += histogram_count(left - bigger, remaining_labels);
        }
        left -= c;
    }
    rank
}

/// The value space of one table axis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArgSpace {
    /// Plain argument ranging over the labels of a range.
    Labels(Range),
    /// Collapsed block of `positions` interchangeable arguments over `range`.
    Histograms { positions: usize, range: Range },
}

impl ArgSpace {
    /// Number of distinct values along this axis.
    pub fn size(&self) -> usize {
        match self {
            ArgSpace::Labels(range) => range.len(),
            ArgSpace::Histograms { positions, range } => histogram_count(*positions, range.len()),
        }
    }

    /// Canonical string for value index `idx` (a label, or `"[n1,...]"`).
    pub fn value_string(&self, idx: usize) -> String {
        match self {
            ArgSpace::Labels(range) => range.label(idx).to_string(),
            ArgSpace::Histograms { positions, range } => {
                enumerate_histograms(*positions, range.len())[idx].bracket_string()
            }
        }
    }

    /// Index of the given value string along this axis, if valid.
    pub fn value_index(&self, value: &str) -> Option<usize> {
        match self {
            ArgSpace::Labels(range) => range.index_of(value),
            ArgSpace::Histograms { positions, range } => {
                let hist = Histogram::parse(value)?;
                if hist.counts().len() != range.len() || hist.total() != *positions {
                    return None;
                }
                Some(histogram_rank(&hist))
            }
        }
    }
}

/// Dense table of positive weights, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Table {
    spaces: Vec<ArgSpace>,
    values: Vec<Potential>,
}

impl Table {
    /// Builds a table, checking the value count against the axis sizes.
    pub fn new(spaces: Vec<ArgSpace>, values: Vec<Potential>) -> Result<Self, TableError> {
        let want: usize = spaces.iter().map(ArgSpace::size).product();
        if values.len() != want {
            return Err(TableError::WrongValueCount {
                got: values.len(),
                want,
            });
        }
        Ok(Table { spaces, values })
    }

    pub fn spaces(&self) -> &[ArgSpace] {
        &self.spaces
    }

    pub fn arity(&self) -> usize {
        self.spaces.len()
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Potential] {
        &self.values
    }

    /// Row index of a joint value given as one value index per axis.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.spaces.len());
        let mut idx = 0;
        for (space, &d) in self.spaces.iter().zip(digits) {
            debug_assert!(d < space.size());
            idx = idx * space.size() + d;
        }
        idx
    }

    /// Inverse of [`Table::index_of`].
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.spaces.len()];
        for (slot, space) in self.spaces.iter().enumerate().rev() {
            let size = space.size();
            digits[slot] = idx % size;
            idx /= size;
        }
        digits
    }

    pub fn value_at(&self, digits: &[usize]) -> &Potential {
        &self.values[self.index_of(digits)]
    }

    /// Rows in canonical order as (value indices per axis, weight).
    pub fn rows(&self) -> impl Iterator<Item = (Vec<usize>, &Potential)> + '_ {
        (0..self.values.len()).map(|i| (self.decode(i), &self.values[i]))
    }

    /// Reorders axes: axis `i` of the result is axis `perm[i]` of `self`.
    ///
    /// The result represents the same function with its arguments presented
    /// in a different order.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Table, TableError> {
        let arity = self.arity();
        let mut seen = vec![false; arity];
        if perm.len() != arity || perm.iter().any(|&p| p >= arity || std::mem::replace(&mut seen[p], true)) {
            return Err(TableError::BadPermutation {
                perm: perm.to_vec(),
                arity,
            });
        }
        let spaces: Vec<ArgSpace> = perm.iter().map(|&p| self.spaces[p].clone()).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let out_shell = Table {
            spaces: spaces.clone(),
            values: Vec::new(),
        };
        let mut old_digits = vec![0usize; arity];
        for idx in 0..self.values.len() {
            let new_digits = out_shell.decode_into_len(idx);
            for (slot, &p) in perm.iter().enumerate() {
                old_digits[p] = new_digits[slot];
            }
            values.push(self.value_at(&old_digits).clone());
        }
        Ok(Table { spaces, values })
    }

    fn decode_into_len(&self, idx: usize) -> Vec<usize> {
        // decode() against `spaces` only; usable while values are still empty.
        let mut digits = vec![0usize; self.spaces.len()];
        let mut idx = idx;
        for (slot, space) in self.spaces.iter().enumerate().rev() {
            let size = space.size();
            digits[slot] = idx % size;
            idx /= size;
        }
        digits
    }

    /// Restricts one axis to a single value, dropping that axis.
    pub fn slice_axis(&self, axis: usize, value_idx: usize) -> Table {
        let mut spaces = self.spaces.clone();
        spaces.remove(axis);
        let mut values = Vec::with_capacity(self.values.len() / self.spaces[axis].size());
        for (digits, v) in self.rows() {
            if digits[axis] == value_idx {
                values.push(v.clone());
            }
        }
        Table { spaces, values }
    }

    /// Exact sum of all weights.
    pub fn total_weight(&self) -> num::BigRational {
        let mut acc = num::BigRational::from_integer(0.into());
        for v in &self.values {
            acc += v.value();
        }
        acc
    }
}
