//! Symmetry detection inside and between factor tables.
//!
//! Two questions are answered here. First, is a factor invariant under
//! reordering the values of some subset of its arguments (commutativity) —
//! if so, that subset can be counted instead of enumerated. Second, do two
//! factors denote the same function up to an argument permutation — if so,
//! they can be grouped even though their tables differ row by row.
//!
//! Both questions reduce potentials to histograms first: a factor's output
//! for an order-independent input can only match another's if the multisets
//! of potentials per histogram match. That filter is cheap, conclusive on
//! rejection, and avoids enumerating permutations in the common case.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::potential::Potential;
use crate::table::{ArgSpace, Histogram, Table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymmetryError {
    #[error("argument-permutation search needs arity {arity}, above the cap {cap}")]
    ArityCapExceeded { arity: usize, cap: usize },
}

/// A witness that two tables denote the same function: axis `i` of the
/// first table corresponds to axis `perm()[i]` of the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgPermutation(Vec<usize>);

impl ArgPermutation {
    pub fn identity(arity: usize) -> Self {
        ArgPermutation((0..arity).collect())
    }

    pub fn perm(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Labels of every `Labels` axis across `tables`, deduplicated in
/// first-appearance order. The shared indexing makes histograms comparable
/// across factors whose arguments have different (even disjoint) ranges.
pub fn union_labels(tables: &[&Table]) -> Vec<String> {
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for table in tables {
        for space in table.spaces() {
            if let ArgSpace::Labels(range) = space {
                for l in range.labels() {
                    if seen.insert(l.clone()) {
                        labels.push(l.clone());
                    }
                }
            }
        }
    }
    labels
}

/// The order-independent view of a table: for each histogram of argument
/// values (counted over `union_labels`), the sorted multiset of potentials
/// the table assigns to assignments inducing that histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramProjection {
    map: BTreeMap<Histogram, Vec<Potential>>,
}

impl HistogramProjection {
    pub fn buckets(&self) -> &BTreeMap<Histogram, Vec<Potential>> {
        &self.map
    }
}

/// Projects a table of labelled arguments onto histograms over
/// `union_labels`. Returns `None` if some argument label is missing from
/// `union_labels` or some axis is already histogram-valued.
pub fn histogram_projection(table: &Table, union_labels: &[String]) -> Option<HistogramProjection> {
    // Per axis, map digit -> index into union_labels.
    let mut digit_maps = Vec::with_capacity(table.arity());
    for space in table.spaces() {
        let ArgSpace::Labels(range) = space else {
            return None;
        };
        let map: Option<Vec<usize>> = range
            .labels()
            .iter()
            .map(|l| union_labels.iter().position(|u| u == l))
            .collect();
        digit_maps.push(map?);
    }
    let mut buckets: BTreeMap<Histogram, Vec<Potential>> = BTreeMap::new();
    for (digits, value) in table.rows() {
        let mut counts = vec![0usize; union_labels.len()];
        for (axis, &d) in digits.iter().enumerate() {
            counts[digit_maps[axis][d]] += 1;
        }
        buckets
            .entry(Histogram::new(counts))
            .or_default()
            .push(value.clone());
    }
    for bucket in buckets.values_mut() {
        bucket.sort();
    }
    Some(HistogramProjection { map: buckets })
}

/// The necessary conditions for two tables to denote the same function
/// under some argument permutation: equal argument-range multisets, and
/// equal potential multisets per full-argument histogram. A `false` here is
/// conclusive — no permutation can align the tables.
pub fn necessary_conditions_hold(a: &Table, b: &Table) -> bool {
    if a.arity() != b.arity() || a.len() != b.len() {
        return false;
    }
    let mut ranges_a: Vec<&ArgSpace> = a.spaces().iter().collect();
    let mut ranges_b: Vec<&ArgSpace> = b.spaces().iter().collect();
    ranges_a.sort();
    ranges_b.sort();
    if ranges_a != ranges_b {
        return false;
    }
    let labels = union_labels(&[a, b]);
    match (histogram_projection(a, &labels), histogram_projection(b, &labels)) {
        (Some(pa), Some(pb)) => pa == pb,
        _ => false,
    }
}

/// Is the table invariant under every permutation of the values at
/// `subset`'s positions (all other positions held fixed)?
///
/// Equivalently: does the potential depend only on the histogram of the
/// subset's values? That reformulation is what gets checked, by bucketing
/// rows on (outside assignment, subset histogram).
pub fn is_commutative(table: &Table, subset: &[usize]) -> bool {
    if subset.iter().any(|&p| p >= table.arity()) {
        return false;
    }
    if subset.len() <= 1 {
        return true;
    }
    // All subset positions must share one label range.
    let first = &table.spaces()[subset[0]];
    let ArgSpace::Labels(range) = first else {
        return false;
    };
    if subset.iter().any(|&p| &table.spaces()[p] != first) {
        return false;
    }
    let in_subset: Vec<bool> = (0..table.arity()).map(|p| subset.contains(&p)).collect();
    let mut buckets: BTreeMap<(Vec<usize>, Histogram), &Potential> = BTreeMap::new();
    for (digits, value) in table.rows() {
        let mut outside = Vec::with_capacity(table.arity() - subset.len());
        let mut counts = vec![0usize; range.len()];
        for (axis, &d) in digits.iter().enumerate() {
            if in_subset[axis] {
                counts[d] += 1;
            } else {
                outside.push(d);
            }
        }
        match buckets.entry((outside, Histogram::new(counts))) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(value);
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if *e.get() != value {
                    return false;
                }
            }
        }
    }
    true
}

/// Finds pairwise-disjoint commutative argument subsets (each of size ≥ 2),
/// largest first within each candidate class.
///
/// Candidates are pruned up front: two positions can only be exchangeable
/// if their arguments share a range and have the same degree in the graph
/// (`degrees[i]` = degree of the randvar at argument position `i`). Within
/// a candidate class, subsets are tried largest-first; because maximal
/// commutative subsets are pairwise disjoint (two overlapping ones would
/// generate their union), each find shrinks the class and the search
/// restarts on the remainder. The search spends at most `2^cap`
/// commutativity checks per table; if exhausted, the (still sound, possibly
/// non-maximal) subsets found so far are returned.
pub fn maximal_commutative_subsets(table: &Table, degrees: &[usize], cap: usize) -> Vec<Vec<usize>> {
    debug_assert_eq!(degrees.len(), table.arity());
    // Group positions by (range, degree).
    let mut classes: BTreeMap<(&ArgSpace, usize), Vec<usize>> = BTreeMap::new();
    for p in 0..table.arity() {
        classes.entry((&table.spaces()[p], degrees[p])).or_default().push(p);
    }
    let mut budget: usize = 1usize.checked_shl(cap as u32).unwrap_or(usize::MAX);
    let mut found = Vec::new();
    let mut classes: Vec<Vec<usize>> = classes.into_values().filter(|c| c.len() >= 2).collect();
    classes.sort();
    for mut class in classes {
        'class: while class.len() >= 2 && budget > 0 {
            for size in (2..=class.len()).rev() {
                for subset in combinations(&class, size) {
                    if budget == 0 {
                        break 'class;
                    }
                    budget -= 1;
                    if is_commutative(table, &subset) {
                        class.retain(|p| !subset.contains(p));
                        found.push(subset);
                        continue 'class;
                    }
                }
            }
            break;
        }
    }
    found.sort();
    found
}

/// All `size`-element subsets of `items`, in lexicographic order — except
/// that the full set comes first via the caller starting at the top size.
/// Largest-first matters: a full-class success costs one check.
fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(items: &[usize], size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        let needed = size - current.len();
        for i in start..=items.len().saturating_sub(needed) {
            current.push(items[i]);
            rec(items, size, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, size, 0, &mut current, &mut out);
    out
}

/// `b`'s table with its axes rearranged by `perm`: axis `i` of the result
/// is axis `perm[i]` of `b`. When `perm` witnesses equality, the result is
/// row-for-row identical to the table it was matched against.
pub fn rearrange_arguments(b: &Table, perm: &ArgPermutation) -> Table {
    b.permute_axes(perm.perm()).expect("witness permutations are valid")
}

/// Do two tables denote the same function up to an argument permutation?
/// On success the witness maps axis `i` of `a` to axis `perm[i]` of `b`.
///
/// Identity is tried before anything else, so comparing a table with itself
/// (or with a row-identical copy) always yields the identity witness. The
/// histogram filter then rejects conclusively without any search; only
/// candidates that pass it reach the backtracking search, which prunes with
/// per-position value fingerprints. The search is refused above `cap`
/// arguments — but only when it would actually run.
pub fn potentials_equal_order_independent(
    a: &Table,
    b: &Table,
    cap: usize,
) -> Result<Option<ArgPermutation>, SymmetryError> {
    if a.arity() != b.arity() || a.len() != b.len() {
        return Ok(None);
    }
    if a == b {
        return Ok(Some(ArgPermutation::identity(a.arity())));
    }
    if !necessary_conditions_hold(a, b) {
        return Ok(None);
    }
    if a.arity() > cap {
        return Err(SymmetryError::ArityCapExceeded {
            arity: a.arity(),
            cap,
        });
    }
    // Per-position fingerprint: for each value of the axis, the sorted
    // multiset of potentials among rows taking that value there. Positions
    // can only correspond if their fingerprints match.
    let fingerprint = |t: &Table, axis: usize| -> Vec<Vec<Potential>> {
        let size = t.spaces()[axis].size();
        let mut slices: Vec<Vec<Potential>> = vec![Vec::new(); size];
        for (digits, value) in t.rows() {
            slices[digits[axis]].push(value.clone());
        }
        for s in &mut slices {
            s.sort();
        }
        slices
    };
    let fp_a: Vec<_> = (0..a.arity()).map(|p| fingerprint(a, p)).collect();
    let fp_b: Vec<_> = (0..b.arity()).map(|p| fingerprint(b, p)).collect();

    let arity = a.arity();
    let mut perm: Vec<usize> = Vec::with_capacity(arity);
    let mut used = vec![false; arity];
    fn search(
        a: &Table,
        b: &Table,
        fp_a: &[Vec<Vec<Potential>>],
        fp_b: &[Vec<Vec<Potential>>],
        perm: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let i = perm.len();
        if i == a.arity() {
            return match b.permute_axes(perm) {
                Ok(aligned) => &aligned == a,
                Err(_) => false,
            };
        }
        // Identity-position first, then the rest in ascending order.
        let candidates = std::iter::once(i).chain((0..a.arity()).filter(move |&j| j != i));
        for j in candidates {
            if used[j] || b.spaces()[j] != a.spaces()[i] || fp_b[j] != fp_a[i] {
                continue;
            }
            used[j] = true;
            perm.push(j);
            if search(a, b, fp_a, fp_b, perm, used) {
                return true;
            }
            perm.pop();
            used[j] = false;
        }
        false
    }
    if search(a, b, &fp_a, &fp_b, &mut perm, &mut used) {
        Ok(Some(ArgPermutation(perm)))
    } else {
        Ok(None)
    }
}
