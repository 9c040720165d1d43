//! Query answering on propositional factor graphs by variable elimination.
//!
//! This is the ground-truth engine: it works directly on the flat graph,
//! conditions on evidence, eliminates all other randvars greedily, and
//! normalises. Everything the lifted engine computes is checked against it.

use std::collections::BTreeMap;

use num::bigint::BigUint;
use num::One;
use thiserror::Error;

use crate::model::FactorGraph;
use crate::numeric::{NumTable, VePool};
use crate::table::Histogram;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("unknown query target {0:?}")]
    UnknownTarget(String),
    #[error("unknown evidence randvar {0:?}")]
    UnknownEvidenceVar(String),
    #[error("randvar {randvar:?} has no value {value:?}")]
    BadEvidenceValue { randvar: String, value: String },
    #[error("conflicting evidence for {randvar:?}: {a:?} vs {b:?}")]
    ConflictingEvidence {
        randvar: String,
        a: String,
        b: String,
    },
    #[error("query target {0:?} is fixed by evidence")]
    TargetEvidenced(String),
    #[error("degenerate model: all weights for {0:?} vanish")]
    ZeroMass(String),
}

/// A marginal query: one target randvar plus query-time evidence, merged
/// with (and checked against) the model's own evidence.
#[derive(Debug, Clone)]
pub struct Query {
    pub target: String,
    pub evidence: BTreeMap<String, String>,
}

impl Query {
    pub fn marginal(target: impl Into<String>) -> Self {
        Query {
            target: target.into(),
            evidence: BTreeMap::new(),
        }
    }
}

/// Model evidence and query evidence merged, duplicates allowed only when
/// they agree.
pub fn merged_evidence(
    model: &BTreeMap<String, String>,
    query: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>, InferenceError> {
    let mut out = model.clone();
    for (rv, value) in query {
        if let Some(prev) = out.get(rv) {
            if prev != value {
                return Err(InferenceError::ConflictingEvidence {
                    randvar: rv.clone(),
                    a: prev.clone(),
                    b: value.clone(),
                });
            }
        }
        out.insert(rv.clone(), value.clone());
    }
    Ok(out)
}

/// `P(target | evidence)` over the target's range labels, in range order.
pub fn ve_marginal(fg: &FactorGraph, query: &Query) -> Result<Vec<f64>, InferenceError> {
    let target = fg
        .randvars()
        .iter()
        .position(|rv| rv.name == query.target)
        .ok_or_else(|| InferenceError::UnknownTarget(query.target.clone()))?;

    let evidence = merged_evidence(fg.evidence(), &query.evidence)?;
    if evidence.contains_key(&query.target) {
        return Err(InferenceError::TargetEvidenced(query.target.clone()));
    }
    // Evidence as (rv index, value index).
    let mut pinned: BTreeMap<usize, usize> = BTreeMap::new();
    for (name, value) in &evidence {
        let r = fg
            .randvars()
            .iter()
            .position(|rv| &rv.name == name)
            .ok_or_else(|| InferenceError::UnknownEvidenceVar(name.clone()))?;
        let v = fg.randvars()[r]
            .range
            .index_of(value)
            .ok_or_else(|| InferenceError::BadEvidenceValue {
                randvar: name.clone(),
                value: value.clone(),
            })?;
        pinned.insert(r, v);
    }

    let rv_index: BTreeMap<&str, usize> = fg
        .randvars()
        .iter()
        .enumerate()
        .map(|(i, rv)| (rv.name.as_str(), i))
        .collect();

    let mut pool = VePool::default();
    for f in fg.factors() {
        let vars: Vec<usize> = f.args().iter().map(|a| rv_index[a.as_str()]).collect();
        let card: Vec<usize> = vars
            .iter()
            .map(|&r| fg.randvars()[r].range.len())
            .collect();
        let values: Vec<f64> = f.table().values().iter().map(|p| p.to_f64()).collect();
        let mut t = NumTable::new(vars.clone(), card, values);
        t.renormalize();
        for &r in &vars {
            if let Some(&v) = pinned.get(&r) {
                if t.vars().contains(&r) {
                    t = t.condition(r, v);
                }
            }
        }
        pool.push(t);
    }

    let eliminate: Vec<usize> = (0..fg.randvars().len())
        .filter(|&r| r != target && !pinned.contains_key(&r))
        .collect();
    pool.eliminate_all(&eliminate, |_| None);
    let folded = pool.fold();

    let n = fg.randvars()[target].range.len();
    let mut weights = vec![0.0f64; n];
    if folded.vars().is_empty() {
        // Target appeared in no factor: uniform over its range.
        weights.fill(1.0);
    } else {
        debug_assert_eq!(folded.vars(), &[target]);
        weights.copy_from_slice(folded.values());
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(InferenceError::ZeroMass(query.target.clone()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Number of argument orderings inducing the histogram: `(Σnᵢ)! / ∏ nᵢ!`.
pub fn multinomial(h: &Histogram) -> BigUint {
    fn factorial(n: usize) -> BigUint {
        (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
    }
    let mut out = factorial(h.total());
    for &c in h.counts() {
        out /= factorial(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_table, Factor, RandVar, Range};
    use num::ToPrimitive;

    fn boolean_rv(name: &str) -> RandVar {
        RandVar {
            name: name.into(),
            range: Range::boolean(),
        }
    }

    fn factor(name: &str, args: &[&str], vals: &[&str]) -> Factor {
        let ranges: Vec<Range> = args.iter().map(|_| Range::boolean()).collect();
        let labels = ["true", "false"];
        let mut rows = Vec::new();
        let mut digits = vec![0usize; args.len()];
        for v in vals {
            let assignment: Vec<String> = digits.iter().map(|&d| labels[d].to_string()).collect();
            rows.push((assignment, v.to_string()));
            for slot in (0..digits.len()).rev() {
                digits[slot] += 1;
                if digits[slot] < 2 {
                    break;
                }
                digits[slot] = 0;
            }
        }
        let table = build_table(name, &ranges, &rows).unwrap();
        Factor::new(
            name.into(),
            args.iter().map(|s| s.to_string()).collect(),
            &ranges,
            table,
        )
        .unwrap()
    }

    /// Exact marginal by brute-force enumeration over the joint.
    fn enumerated_marginal(fg: &FactorGraph, target: &str, value: &str) -> f64 {
        let t = fg.randvar(target).unwrap();
        let mut fixed = fg.evidence().clone();
        fixed.insert(target.to_string(), value.to_string());
        let num = marginal_weight(fg, &fixed);
        let mut den = num::BigRational::from_integer(0.into());
        for v in t.range.labels() {
            let mut fixed = fg.evidence().clone();
            fixed.insert(target.to_string(), v.clone());
            den += marginal_weight(fg, &fixed);
        }
        num.to_f64().unwrap() / den.to_f64().unwrap()
    }

    /// Total unnormalised weight of all completions of a partial assignment.
    fn marginal_weight(
        fg: &FactorGraph,
        fixed: &std::collections::BTreeMap<String, String>,
    ) -> num::BigRational {
        let free: Vec<&RandVar> = fg
            .randvars()
            .iter()
            .filter(|rv| !fixed.contains_key(&rv.name))
            .collect();
        let mut total = num::BigRational::from_integer(0.into());
        let mut digits = vec![0usize; free.len()];
        loop {
            let mut assignment = fixed.clone();
            for (rv, &d) in free.iter().zip(&digits) {
                assignment.insert(rv.name.clone(), rv.range.label(d).to_string());
            }
            total += fg.unnormalized_weight(&assignment).unwrap();
            let mut slot = free.len();
            let mut done = free.is_empty();
            while slot > 0 {
                slot -= 1;
                digits[slot] += 1;
                if digits[slot] < free[slot].range.len() {
                    break;
                }
                digits[slot] = 0;
                if slot == 0 {
                    done = true;
                }
            }
            if done {
                return total;
            }
        }
    }

    #[test]
    fn chain_marginal_matches_enumeration() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C")],
            vec![
                factor("f", &["A", "B"], &["1", "2", "3", "4"]),
                factor("g", &["B", "C"], &["5", "6", "7", "8"]),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        for target in ["A", "B", "C"] {
            let got = ve_marginal(&fg, &Query::marginal(target)).unwrap();
            let want_true = enumerated_marginal(&fg, target, "true");
            assert!((got[0] - want_true).abs() < 1e-12, "{target}: {got:?}");
            assert!((got[0] + got[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evidence_conditions_the_marginal() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B")],
            vec![factor("f", &["A", "B"], &["9", "1", "1", "9"])],
            BTreeMap::new(),
        )
        .unwrap();
        let mut q = Query::marginal("A");
        q.evidence.insert("B".into(), "true".into());
        let got = ve_marginal(&fg, &q).unwrap();
        // P(A=true | B=true) = 9 / (9 + 1).
        assert!((got[0] - 0.9).abs() < 1e-12, "{got:?}");
    }

    #[test]
    fn conflicting_evidence_is_rejected() {
        let mut model_ev = BTreeMap::new();
        model_ev.insert("B".to_string(), "false".to_string());
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B")],
            vec![factor("f", &["A", "B"], &["9", "1", "1", "9"])],
            model_ev,
        )
        .unwrap();
        let mut q = Query::marginal("A");
        q.evidence.insert("B".into(), "true".into());
        assert!(matches!(
            ve_marginal(&fg, &q),
            Err(InferenceError::ConflictingEvidence { .. })
        ));
        let q2 = Query::marginal("B");
        assert!(matches!(
            ve_marginal(&fg, &q2),
            Err(InferenceError::TargetEvidenced(_))
        ));
    }

    #[test]
    fn multinomial_counts_orderings() {
        assert_eq!(multinomial(&Histogram::new(vec![2, 0])).to_u64(), Some(1));
        assert_eq!(multinomial(&Histogram::new(vec![1, 1])).to_u64(), Some(2));
        assert_eq!(multinomial(&Histogram::new(vec![2, 2])).to_u64(), Some(6));
        assert_eq!(
            multinomial(&Histogram::new(vec![3, 1, 2])).to_u64(),
            Some(60)
        );
    }
}
