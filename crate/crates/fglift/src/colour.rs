//! Colour passing: grouping symmetric randvars and factors.
//!
//! Both algorithms iteratively refine a colouring. Randvars start coloured
//! by (range, evidence); factors start coloured by their potentials. Each
//! sweep, factors collect their arguments' colours in order, then randvars
//! collect (factor colour, position) pairs as an order-insensitive multiset;
//! identical signatures merge into one new colour. The partition can only
//! refine, so a fixpoint is reached in at most |randvars| + |factors| sweeps.
//!
//! The two entry points differ in what "same potentials" means and in what
//! a position is worth:
//!
//! * [`run_cp`] groups factors only when their tables are row-identical and
//!   always passes true argument positions.
//! * [`run_acp`] groups factors whose tables match under some argument
//!   permutation (rearranging each factor's arguments at most once, up
//!   front), and passes no position to arguments inside a factor's chosen
//!   commutative subset — exchangeable arguments must not be split by
//!   position. Those two relaxations are exactly what let the construction
//!   introduce counting arguments later.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::model::{Factor, FactorGraph};
use crate::symmetry::{maximal_commutative_subsets, potentials_equal_order_independent, SymmetryError};
use crate::table::Table;

/// Knobs for [`run_acp`].
#[derive(Debug, Clone)]
pub struct AcpOptions {
    /// Largest factor arity for which the argument-permutation search may
    /// run; beyond it, grouping fails loudly instead of degrading silently.
    pub arity_cap: usize,
}

impl Default for AcpOptions {
    fn default() -> Self {
        AcpOptions { arity_cap: 10 }
    }
}

/// The converged partition, plus everything construction needs to interpret
/// it: per-factor argument rearrangements (how each factor was aligned to
/// its class representative) and per-factor commutative annotations
/// (positions, post-rearrangement, that are exchangeable).
#[derive(Debug, Clone, Serialize)]
pub struct Grouping {
    /// Classes of randvar names; classes and members in declaration order.
    pub rv_classes: Vec<Vec<String>>,
    /// Classes of factor names; classes and members in declaration order.
    pub factor_classes: Vec<Vec<String>>,
    /// Argument permutation applied to each factor whose arguments had to
    /// be rearranged to match its class representative (identity omitted):
    /// rearranged argument `i` is original argument `perm[i]`.
    pub rearrangements: BTreeMap<String, Vec<usize>>,
    /// The chosen maximal commutative subset per factor (0-based positions
    /// after rearrangement), for factors that have one.
    pub annotations: BTreeMap<String, Vec<usize>>,
    /// Refinement sweeps executed, the final (no-change) sweep included.
    pub iterations: usize,
}

impl Grouping {
    /// All factors with their stored rearrangements applied, in declaration
    /// order — the argument order every downstream step works with.
    pub fn rearranged_factors(&self, fg: &FactorGraph) -> Vec<Factor> {
        fg.factors()
            .iter()
            .map(|f| match self.rearrangements.get(f.name()) {
                Some(perm) => f.permuted(perm).expect("stored rearrangement is valid"),
                None => f.clone(),
            })
            .collect()
    }

    /// Total number of groups — the compression measure reported by the
    /// benchmark harness.
    pub fn group_count(&self) -> usize {
        self.rv_classes.len() + self.factor_classes.len()
    }
}

/// Relabels arbitrary signature values as dense colour ids in order of
/// first occurrence, which makes colour vectors canonical and comparable
/// across sweeps.
fn relabel<S: std::hash::Hash + Eq>(signatures: Vec<S>) -> Vec<usize> {
    let mut ids: HashMap<S, usize> = HashMap::with_capacity(signatures.len());
    let mut out = Vec::with_capacity(signatures.len());
    for sig in signatures {
        let next = ids.len();
        out.push(*ids.entry(sig).or_insert(next));
    }
    out
}

/// Shared refinement loop. `factor_args[i]` holds randvar indices of factor
/// `i`'s arguments (post-rearrangement order for ACP); `commutative[i]`
/// holds the positions whose identity is withheld from messages.
fn refine(
    fg: &FactorGraph,
    mut rv_colours: Vec<usize>,
    mut factor_colours: Vec<usize>,
    factor_args: &[Vec<usize>],
    commutative: &[Vec<usize>],
) -> (Vec<usize>, Vec<usize>, usize) {
    let n_rvs = fg.randvars().len();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let factor_sigs: Vec<(usize, Vec<usize>)> = factor_args
            .iter()
            .zip(&factor_colours)
            .map(|(args, &own)| (own, args.iter().map(|&r| rv_colours[r]).collect()))
            .collect();
        let new_factor_colours = relabel(factor_sigs);

        // (factor colour, position) per occurrence; None marks membership
        // in the factor's commutative subset. Sorted → order-insensitive.
        let mut received: Vec<Vec<(usize, Option<usize>)>> = vec![Vec::new(); n_rvs];
        for (i, args) in factor_args.iter().enumerate() {
            for (pos, &r) in args.iter().enumerate() {
                let marker = if commutative[i].contains(&pos) {
                    None
                } else {
                    Some(pos)
                };
                received[r].push((new_factor_colours[i], marker));
            }
        }
        let rv_sigs: Vec<(usize, Vec<(usize, Option<usize>)>)> = received
            .into_iter()
            .zip(&rv_colours)
            .map(|(mut msgs, &own)| {
                msgs.sort();
                (own, msgs)
            })
            .collect();
        let new_rv_colours = relabel(rv_sigs);

        let stable = new_rv_colours == rv_colours && new_factor_colours == factor_colours;
        rv_colours = new_rv_colours;
        factor_colours = new_factor_colours;
        if stable {
            return (rv_colours, factor_colours, iterations);
        }
    }
}

fn initial_rv_colours(fg: &FactorGraph) -> Vec<usize> {
    let sigs: Vec<(&[String], Option<&String>)> = fg
        .randvars()
        .iter()
        .map(|rv| (rv.range.labels(), fg.evidence().get(&rv.name)))
        .collect();
    relabel(sigs)
}

fn classes(names: Vec<String>, colours: &[usize]) -> Vec<Vec<String>> {
    let count = colours.iter().copied().max().map_or(0, |m| m + 1);
    let mut out: Vec<Vec<String>> = vec![Vec::new(); count];
    for (name, &c) in names.into_iter().zip(colours) {
        out[c].push(name);
    }
    out
}

fn grouping_from(
    fg: &FactorGraph,
    rv_colours: &[usize],
    factor_colours: &[usize],
    rearrangements: BTreeMap<String, Vec<usize>>,
    annotations: BTreeMap<String, Vec<usize>>,
    iterations: usize,
) -> Grouping {
    Grouping {
        rv_classes: classes(
            fg.randvars().iter().map(|rv| rv.name.clone()).collect(),
            rv_colours,
        ),
        factor_classes: classes(
            fg.factors().iter().map(|f| f.name().to_string()).collect(),
            factor_colours,
        ),
        rearrangements,
        annotations,
        iterations,
    }
}

/// The baseline grouping: factors are initially equal only when their
/// tables are row-identical, and every message carries the true position.
pub fn run_cp(fg: &FactorGraph) -> Grouping {
    let rv_index: HashMap<&str, usize> = fg
        .randvars()
        .iter()
        .enumerate()
        .map(|(i, rv)| (rv.name.as_str(), i))
        .collect();
    let factor_args: Vec<Vec<usize>> = fg
        .factors()
        .iter()
        .map(|f| f.args().iter().map(|a| rv_index[a.as_str()]).collect())
        .collect();
    let tables: Vec<&Table> = fg.factors().iter().map(Factor::table).collect();
    let factor_colours = relabel(tables);
    let commutative = vec![Vec::new(); fg.factors().len()];
    let (rv_colours, factor_colours, iterations) = refine(
        fg,
        initial_rv_colours(fg),
        factor_colours,
        &factor_args,
        &commutative,
    );
    grouping_from(
        fg,
        &rv_colours,
        &factor_colours,
        BTreeMap::new(),
        BTreeMap::new(),
        iterations,
    )
}

/// The order-aware grouping. Factors are initially equal when their tables
/// match under some argument permutation (each factor is rearranged at most
/// once, to align with the first factor of its class), and arguments inside
/// a factor's chosen commutative subset receive no position in messages.
pub fn run_acp(fg: &FactorGraph, options: &AcpOptions) -> Result<Grouping, SymmetryError> {
    let rv_index: HashMap<&str, usize> = fg
        .randvars()
        .iter()
        .enumerate()
        .map(|(i, rv)| (rv.name.as_str(), i))
        .collect();
    let degrees = fg.degrees();

    // Initial factor colours by order-independent table equality. Each new
    // factor is matched against one representative table per known colour,
    // first match wins; its witness permutation becomes the rearrangement.
    let mut reps: Vec<Table> = Vec::new();
    let mut factor_colours = Vec::with_capacity(fg.factors().len());
    let mut rearrangements = BTreeMap::new();
    let mut rearranged: Vec<Factor> = Vec::with_capacity(fg.factors().len());
    for f in fg.factors() {
        let mut assigned = None;
        for (colour, rep) in reps.iter().enumerate() {
            if let Some(witness) = potentials_equal_order_independent(rep, f.table(), options.arity_cap)? {
                let aligned = f.permuted(witness.perm()).expect("witness is valid");
                if !witness.is_identity() {
                    rearrangements.insert(f.name().to_string(), witness.perm().to_vec());
                }
                assigned = Some((colour, aligned));
                break;
            }
        }
        let (colour, aligned) = assigned.unwrap_or_else(|| {
            reps.push(f.table().clone());
            (reps.len() - 1, f.clone())
        });
        factor_colours.push(colour);
        rearranged.push(aligned);
    }

    // Commutative annotation per factor, on the rearranged table, pruned by
    // the argument randvars' degrees. Where several maximal subsets exist,
    // the lexicographically smallest is chosen (deterministically).
    let mut annotations = BTreeMap::new();
    let mut commutative: Vec<Vec<usize>> = Vec::with_capacity(rearranged.len());
    for f in &rearranged {
        let arg_degrees: Vec<usize> = f.args().iter().map(|a| degrees[rv_index[a.as_str()]]).collect();
        let subsets = maximal_commutative_subsets(f.table(), &arg_degrees, options.arity_cap);
        let chosen = subsets.into_iter().next().unwrap_or_default();
        if !chosen.is_empty() {
            annotations.insert(f.name().to_string(), chosen.clone());
        }
        commutative.push(chosen);
    }

    let factor_args: Vec<Vec<usize>> = rearranged
        .iter()
        .map(|f| f.args().iter().map(|a| rv_index[a.as_str()]).collect())
        .collect();
    let (rv_colours, factor_colours, iterations) = refine(
        fg,
        initial_rv_colours(fg),
        factor_colours,
        &factor_args,
        &commutative,
    );
    Ok(grouping_from(
        fg,
        &rv_colours,
        &factor_colours,
        rearrangements,
        annotations,
        iterations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_table, RandVar, Range};

    fn boolean_rv(name: &str) -> RandVar {
        RandVar {
            name: name.into(),
            range: Range::boolean(),
        }
    }

    fn factor2(name: &str, a: &str, b: &str, vals: [&str; 4]) -> Factor {
        let ranges = [Range::boolean(), Range::boolean()];
        let labels = ["true", "false"];
        let mut rows = Vec::new();
        let mut i = 0;
        for x in labels {
            for y in labels {
                rows.push((vec![x.to_string(), y.to_string()], vals[i].to_string()));
                i += 1;
            }
        }
        let table = build_table(name, &ranges, &rows).unwrap();
        Factor::new(name.into(), vec![a.into(), b.into()], &ranges, table).unwrap()
    }

    /// Two factors with row-identical tables and matching positions: the
    /// baseline groups the outer randvars and both factors.
    #[test]
    fn cp_groups_matching_positions() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C")],
            vec![
                factor2("phi1", "A", "B", ["2", "3", "5", "7"]),
                factor2("phi2", "C", "B", ["2", "3", "5", "7"]),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let g = run_cp(&fg);
        assert_eq!(g.rv_classes, vec![vec!["A".to_string(), "C".to_string()], vec!["B".to_string()]]);
        assert_eq!(g.factor_classes, vec![vec!["phi1".to_string(), "phi2".to_string()]]);
        assert!(g.iterations <= fg.randvars().len() + fg.factors().len());
    }

    /// The four-randvar chain with a commutative middle factor and an
    /// argument-swapped end factor: the baseline splits everything, the
    /// order-aware pass recovers both symmetries.
    #[test]
    fn acp_recovers_swapped_and_commutative_factors() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C"), boolean_rv("D")],
            vec![
                factor2("phi1", "A", "B", ["1", "2", "3", "4"]),
                factor2("phi2", "B", "C", ["5", "6", "6", "7"]),
                // phi3(C,D) = phi1(D,C): the transposed table.
                factor2("phi3", "C", "D", ["1", "3", "2", "4"]),
            ],
            BTreeMap::new(),
        )
        .unwrap();

        let cp = run_cp(&fg);
        assert_eq!(cp.rv_classes.len(), 4, "baseline groups nothing");
        assert_eq!(cp.factor_classes.len(), 3);

        let acp = run_acp(&fg, &AcpOptions::default()).unwrap();
        assert_eq!(
            acp.rv_classes,
            vec![
                vec!["A".to_string(), "D".to_string()],
                vec!["B".to_string(), "C".to_string()]
            ]
        );
        assert_eq!(
            acp.factor_classes,
            vec![
                vec!["phi1".to_string(), "phi3".to_string()],
                vec!["phi2".to_string()]
            ]
        );
        assert_eq!(acp.rearrangements.get("phi3"), Some(&vec![1, 0]));
        assert_eq!(acp.annotations.get("phi2"), Some(&vec![0, 1]));
        assert!(!acp.annotations.contains_key("phi1"));
    }

    #[test]
    fn evidence_splits_initial_colours() {
        let mut evidence = BTreeMap::new();
        evidence.insert("A".to_string(), "true".to_string());
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C")],
            vec![
                factor2("phi1", "A", "B", ["2", "3", "5", "7"]),
                factor2("phi2", "C", "B", ["2", "3", "5", "7"]),
            ],
            evidence,
        )
        .unwrap();
        let g = run_cp(&fg);
        assert_eq!(g.rv_classes.len(), 3, "evidence on A must split A from C");
    }

    /// Grouping is idempotent in the sense that re-running on the same
    /// input reproduces the same classes (first-occurrence colour ids).
    #[test]
    fn deterministic_across_runs() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C"), boolean_rv("D")],
            vec![
                factor2("phi1", "A", "B", ["1", "2", "3", "4"]),
                factor2("phi2", "B", "C", ["5", "6", "6", "7"]),
                factor2("phi3", "C", "D", ["1", "3", "2", "4"]),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let a = run_acp(&fg, &AcpOptions::default()).unwrap();
        let b = run_acp(&fg, &AcpOptions::default()).unwrap();
        assert_eq!(a.rv_classes, b.rv_classes);
        assert_eq!(a.factor_classes, b.factor_classes);
        assert_eq!(a.rearrangements, b.rearrangements);
        assert_eq!(a.annotations, b.annotations);
    }
}
