//! Propositional factor graphs.
//!
//! A factor graph is a bipartite graph of named random variables and named
//! factors; edges are implied by each factor's ordered argument list. The
//! graph denotes the distribution P = (1/Z) ∏_f f, optionally conditioned on
//! evidence fixing some variables to a label.

use std::collections::{BTreeMap, HashMap};

use num::BigRational;
use thiserror::Error;

use crate::potential::{Potential, PotentialError};
use crate::table::{ArgSpace, Table, TableError};

/// Errors from building or querying a factor graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("range must have at least one label and no duplicates, got {labels:?}")]
    BadRange { labels: Vec<String> },
    #[error("duplicate name {name:?}")]
    NameCollision { name: String },
    #[error("factor {factor:?} references undeclared randvar {randvar:?}")]
    UnknownArg { factor: String, randvar: String },
    #[error("factor {factor:?} lists randvar {randvar:?} more than once")]
    RepeatedArg { factor: String, randvar: String },
    #[error("factor {factor:?}: row {assignment:?} appears more than once")]
    DuplicateRow { factor: String, assignment: Vec<String> },
    #[error("factor {factor:?}: no row for assignment {assignment:?}")]
    MissingRow { factor: String, assignment: Vec<String> },
    #[error("factor {factor:?}: assignment {assignment:?} does not match the argument ranges")]
    BadAssignment { factor: String, assignment: Vec<String> },
    #[error("factor {factor:?}: row {assignment:?}: {source}")]
    NonPositivePotential {
        factor: String,
        assignment: Vec<String>,
        source: PotentialError,
    },
    #[error("factor {factor:?}: {source}")]
    BadTable { factor: String, source: TableError },
    #[error("unknown randvar {name:?}")]
    UnknownRandVar { name: String },
    #[error("evidence value {value:?} is not in the range of {randvar:?}")]
    BadEvidenceValue { randvar: String, value: String },
    #[error("conflicting evidence for {randvar:?}: {first:?} vs {second:?}")]
    ConflictingEvidence {
        randvar: String,
        first: String,
        second: String,
    },
    #[error("assignment is missing randvar {name:?}")]
    IncompleteAssignment { name: String },
}

/// An ordered, duplicate-free list of value labels.
///
/// Label order is the declaration order from the input and defines the
/// canonical row order of every table over this range.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Range(Vec<String>);

impl Range {
    pub fn new(labels: Vec<String>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        if labels.is_empty() || !labels.iter().all(|l| seen.insert(l.clone())) {
            return Err(ModelError::BadRange { labels });
        }
        Ok(Range(labels))
    }

    /// The Boolean range `true, false` used throughout examples and benchmarks.
    pub fn boolean() -> Self {
        Range(vec!["true".into(), "false".into()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.0[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

/// A named random variable with its value range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandVar {
    pub name: String,
    pub range: Range,
}

/// A named factor: an ordered argument list plus a total table of weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    name: String,
    args: Vec<String>,
    table: Table,
}

impl Factor {
    /// Builds a factor, checking the table shape against the argument ranges.
    pub fn new(name: String, args: Vec<String>, arg_ranges: &[Range], table: Table) -> Result<Self, ModelError> {
        let want: Vec<ArgSpace> = arg_ranges.iter().cloned().map(ArgSpace::Labels).collect();
        if table.spaces() != want.as_slice() {
            return Err(ModelError::BadTable {
                factor: name,
                source: TableError::WrongValueCount {
                    got: table.len(),
                    want: want.iter().map(ArgSpace::size).product(),
                },
            });
        }
        Ok(Factor { name, args, table })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    /// Position of `randvar` in the argument list.
    pub fn position_of(&self, randvar: &str) -> Option<usize> {
        self.args.iter().position(|a| a == randvar)
    }

    /// The same factor with its arguments presented in a different order:
    /// argument `i` of the result is argument `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Factor, TableError> {
        let table = self.table.permute_axes(perm)?;
        let args = perm.iter().map(|&p| self.args[p].clone()).collect();
        Ok(Factor {
            name: self.name.clone(),
            args,
            table,
        })
    }

    /// True when both factors denote the same function of the same named
    /// arguments, regardless of argument order.
    pub fn same_function(&self, other: &Factor) -> bool {
        if self.args.len() != other.args.len() {
            return false;
        }
        let mut perm = Vec::with_capacity(self.args.len());
        for arg in &self.args {
            match other.position_of(arg) {
                Some(p) => perm.push(p),
                None => return false,
            }
        }
        match other.permuted(&perm) {
            Ok(aligned) => aligned.table == self.table,
            Err(_) => false,
        }
    }
}

/// Builds a factor's table from unordered rows, validating totality.
///
/// `rows` pairs an assignment (one label per argument, in argument order)
/// with a decimal weight literal. Every joint assignment must appear exactly
/// once and every weight must be strictly positive.
pub fn build_table(
    factor: &str,
    arg_ranges: &[Range],
    rows: &[(Vec<String>, String)],
) -> Result<Table, ModelError> {
    let spaces: Vec<ArgSpace> = arg_ranges.iter().cloned().map(ArgSpace::Labels).collect();
    let total: usize = spaces.iter().map(ArgSpace::size).product();
    let mut values: Vec<Option<Potential>> = vec![None; total];
    for (assignment, literal) in rows {
        if assignment.len() != arg_ranges.len() {
            return Err(ModelError::BadAssignment {
                factor: factor.to_string(),
                assignment: assignment.clone(),
            });
        }
        let mut digits = Vec::with_capacity(assignment.len());
        for (label, range) in assignment.iter().zip(arg_ranges) {
            match range.index_of(label) {
                Some(d) => digits.push(d),
                None => {
                    return Err(ModelError::BadAssignment {
                        factor: factor.to_string(),
                        assignment: assignment.clone(),
                    })
                }
            }
        }
        let mut idx = 0;
        for (space, &d) in spaces.iter().zip(&digits) {
            idx = idx * space.size() + d;
        }
        if values[idx].is_some() {
            return Err(ModelError::DuplicateRow {
                factor: factor.to_string(),
                assignment: assignment.clone(),
            });
        }
        let weight = Potential::parse(literal).map_err(|source| ModelError::NonPositivePotential {
            factor: factor.to_string(),
            assignment: assignment.clone(),
            source,
        })?;
        values[idx] = Some(weight);
    }
    let mut out = Vec::with_capacity(total);
    for (idx, slot) in values.into_iter().enumerate() {
        match slot {
            Some(v) => out.push(v),
            None => {
                // Reconstruct the canonical assignment for the error message.
                let mut digits = vec![0usize; spaces.len()];
                let mut i = idx;
                for (slot, space) in spaces.iter().enumerate().rev() {
                    digits[slot] = i % space.size();
                    i /= space.size();
                }
                let assignment = digits
                    .iter()
                    .zip(arg_ranges)
                    .map(|(&d, r)| r.label(d).to_string())
                    .collect();
                return Err(ModelError::MissingRow {
                    factor: factor.to_string(),
                    assignment,
                });
            }
        }
    }
    Table::new(spaces, out).map_err(|source| ModelError::BadTable {
        factor: factor.to_string(),
        source,
    })
}

/// A validated propositional factor graph with optional evidence.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    randvars: Vec<RandVar>,
    factors: Vec<Factor>,
    evidence: BTreeMap<String, String>,
    rv_index: HashMap<String, usize>,
}

impl FactorGraph {
    pub fn new(
        randvars: Vec<RandVar>,
        factors: Vec<Factor>,
        evidence: BTreeMap<String, String>,
    ) -> Result<Self, ModelError> {
        let mut rv_index = HashMap::new();
        for (i, rv) in randvars.iter().enumerate() {
            if rv_index.insert(rv.name.clone(), i).is_some() {
                return Err(ModelError::NameCollision { name: rv.name.clone() });
            }
        }
        let mut factor_names = std::collections::HashSet::new();
        for f in &factors {
            if !factor_names.insert(f.name.clone()) {
                return Err(ModelError::NameCollision { name: f.name.clone() });
            }
            let mut seen = std::collections::HashSet::new();
            for arg in f.args() {
                let idx = *rv_index.get(arg).ok_or_else(|| ModelError::UnknownArg {
                    factor: f.name.clone(),
                    randvar: arg.clone(),
                })?;
                if !seen.insert(arg.clone()) {
                    return Err(ModelError::RepeatedArg {
                        factor: f.name.clone(),
                        randvar: arg.clone(),
                    });
                }
                let want = ArgSpace::Labels(randvars[idx].range.clone());
                let pos = f.position_of(arg).unwrap();
                if f.table().spaces()[pos] != want {
                    return Err(ModelError::BadTable {
                        factor: f.name.clone(),
                        source: TableError::WrongValueCount {
                            got: f.table().len(),
                            want: 0,
                        },
                    });
                }
            }
        }
        for (rv, value) in &evidence {
            let idx = *rv_index
                .get(rv)
                .ok_or_else(|| ModelError::UnknownRandVar { name: rv.clone() })?;
            if randvars[idx].range.index_of(value).is_none() {
                return Err(ModelError::BadEvidenceValue {
                    randvar: rv.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(FactorGraph {
            randvars,
            factors,
            evidence,
            rv_index,
        })
    }

    pub fn randvars(&self) -> &[RandVar] {
        &self.randvars
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn evidence(&self) -> &BTreeMap<String, String> {
        &self.evidence
    }

    pub fn randvar(&self, name: &str) -> Option<&RandVar> {
        self.rv_index.get(name).map(|&i| &self.randvars[i])
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name() == name)
    }

    /// Number of factors each randvar appears in, in declaration order.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.randvars.len()];
        for f in &self.factors {
            for arg in f.args() {
                deg[self.rv_index[arg]] += 1;
            }
        }
        deg
    }

    /// Unnormalized weight ∏_f f(assignment) of one full assignment.
    ///
    /// The assignment maps every randvar name to a label of its range.
    pub fn unnormalized_weight(
        &self,
        assignment: &BTreeMap<String, String>,
    ) -> Result<BigRational, ModelError> {
        let digits = self.assignment_digits(assignment)?;
        // Evidence-inconsistent assignments carry zero weight.
        for (rv, value) in &self.evidence {
            let idx = self.rv_index[rv];
            if self.randvars[idx].range.label(digits[idx]) != value {
                return Ok(BigRational::from_integer(0.into()));
            }
        }
        let mut acc = BigRational::from_integer(1.into());
        let mut row = Vec::new();
        for f in &self.factors {
            row.clear();
            row.extend(f.args().iter().map(|a| digits[self.rv_index[a]]));
            acc *= f.table().value_at(&row).value();
        }
        Ok(acc)
    }

    /// The normalization constant Z: total weight over all assignments
    /// consistent with the evidence.
    pub fn partition_function(&self) -> BigRational {
        let mut z = BigRational::from_integer(0.into());
        let sizes: Vec<usize> = self.randvars.iter().map(|rv| rv.range.len()).collect();
        let fixed: Vec<Option<usize>> = self
            .randvars
            .iter()
            .map(|rv| {
                self.evidence
                    .get(&rv.name)
                    .map(|v| rv.range.index_of(v).expect("validated evidence"))
            })
            .collect();
        let mut digits = vec![0usize; sizes.len()];
        for (slot, f) in fixed.iter().enumerate() {
            if let Some(d) = f {
                digits[slot] = *d;
            }
        }
        let mut row = Vec::new();
        'outer: loop {
            let mut acc = BigRational::from_integer(1.into());
            for f in &self.factors {
                row.clear();
                row.extend(f.args().iter().map(|a| digits[self.rv_index[a]]));
                acc *= f.table().value_at(&row).value();
            }
            z += acc;
            // Odometer over unevidenced positions, last fastest.
            for slot in (0..sizes.len()).rev() {
                if fixed[slot].is_some() {
                    continue;
                }
                digits[slot] += 1;
                if digits[slot] < sizes[slot] {
                    continue 'outer;
                }
                digits[slot] = 0;
            }
            break;
        }
        z
    }

    /// Exact probability of one full assignment under the conditioned model.
    pub fn joint_probability(
        &self,
        assignment: &BTreeMap<String, String>,
    ) -> Result<BigRational, ModelError> {
        let w = self.unnormalized_weight(assignment)?;
        Ok(w / self.partition_function())
    }

    fn assignment_digits(&self, assignment: &BTreeMap<String, String>) -> Result<Vec<usize>, ModelError> {
        let mut digits = Vec::with_capacity(self.randvars.len());
        for rv in &self.randvars {
            let value = assignment
                .get(&rv.name)
                .ok_or_else(|| ModelError::IncompleteAssignment { name: rv.name.clone() })?;
            let d = rv
                .range
                .index_of(value)
                .ok_or_else(|| ModelError::BadEvidenceValue {
                    randvar: rv.name.clone(),
                    value: value.clone(),
                })?;
            digits.push(d);
        }
        Ok(digits)
    }

    /// All full assignments consistent with the evidence, as digit vectors
    /// aligned with the randvar declaration order.
    pub fn enumerate_assignments(&self) -> Vec<Vec<usize>> {
        let sizes: Vec<usize> = self.randvars.iter().map(|rv| rv.range.len()).collect();
        let fixed: Vec<Option<usize>> = self
            .randvars
            .iter()
            .map(|rv| {
                self.evidence
                    .get(&rv.name)
                    .map(|v| rv.range.index_of(v).expect("validated evidence"))
            })
            .collect();
        let mut out = Vec::new();
        let mut digits: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
        'outer: loop {
            out.push(digits.clone());
            for slot in (0..sizes.len()).rev() {
                if fixed[slot].is_some() {
                    continue;
                }
                digits[slot] += 1;
                if digits[slot] < sizes[slot] {
                    continue 'outer;
                }
                digits[slot] = 0;
            }
            break;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boolean_rv(name: &str) -> RandVar {
        RandVar {
            name: name.into(),
            range: Range::boolean(),
        }
    }

    fn rows2(vals: [&str; 4]) -> Vec<(Vec<String>, String)> {
        let labels = ["true", "false"];
        let mut rows = Vec::new();
        let mut i = 0;
        for a in labels {
            for b in labels {
                rows.push((vec![a.to_string(), b.to_string()], vals[i].to_string()));
                i += 1;
            }
        }
        rows
    }

    #[test]
    fn build_table_validates_totality() {
        let ranges = [Range::boolean(), Range::boolean()];
        let table = build_table("f", &ranges, &rows2(["1", "2", "2", "3"])).unwrap();
        assert_eq!(table.len(), 4);
        assert_eq!(table.value_at(&[0, 1]), &Potential::parse("2").unwrap());

        let mut missing = rows2(["1", "2", "2", "3"]);
        missing.pop();
        assert!(matches!(
            build_table("f", &ranges, &missing),
            Err(ModelError::MissingRow { .. })
        ));

        let mut dup = rows2(["1", "2", "2", "3"]);
        dup.push((vec!["true".into(), "true".into()], "9".into()));
        assert!(matches!(
            build_table("f", &ranges, &dup),
            Err(ModelError::DuplicateRow { .. })
        ));

        assert!(matches!(
            build_table("f", &ranges, &rows2(["1", "0", "2", "3"])),
            Err(ModelError::NonPositivePotential { .. })
        ));
    }

    #[test]
    fn graph_validation_catches_bad_structure() {
        let rvs = vec![boolean_rv("A"), boolean_rv("B")];
        let table = build_table("f", &[Range::boolean(), Range::boolean()], &rows2(["1", "2", "2", "3"])).unwrap();
        let f = Factor::new("f".into(), vec!["A".into(), "B".into()], &[Range::boolean(), Range::boolean()], table.clone()).unwrap();
        assert!(FactorGraph::new(rvs.clone(), vec![f.clone()], BTreeMap::new()).is_ok());

        let rep = Factor::new("g".into(), vec!["A".into(), "A".into()], &[Range::boolean(), Range::boolean()], table).unwrap();
        assert!(matches!(
            FactorGraph::new(rvs.clone(), vec![rep], BTreeMap::new()),
            Err(ModelError::RepeatedArg { .. })
        ));

        let mut ev = BTreeMap::new();
        ev.insert("A".to_string(), "maybe".to_string());
        assert!(matches!(
            FactorGraph::new(rvs, vec![f], ev),
            Err(ModelError::BadEvidenceValue { .. })
        ));
    }

    #[test]
    fn joint_probabilities_sum_to_one_exactly() {
        let rvs = vec![boolean_rv("A"), boolean_rv("B")];
        let table = build_table("f", &[Range::boolean(), Range::boolean()], &rows2(["1", "2", "2", "3"])).unwrap();
        let f = Factor::new("f".into(), vec!["A".into(), "B".into()], &[Range::boolean(), Range::boolean()], table).unwrap();
        let fg = FactorGraph::new(rvs, vec![f], BTreeMap::new()).unwrap();
        let mut total = BigRational::from_integer(0.into());
        for digits in fg.enumerate_assignments() {
            let assignment: BTreeMap<String, String> = fg
                .randvars()
                .iter()
                .zip(&digits)
                .map(|(rv, &d)| (rv.name.clone(), rv.range.label(d).to_string()))
                .collect();
            total += fg.joint_probability(&assignment).unwrap();
        }
        assert_eq!(total, BigRational::from_integer(1.into()));
        // Spot value: P(true, true) = 1/8.
        let mut a = BTreeMap::new();
        a.insert("A".to_string(), "true".to_string());
        a.insert("B".to_string(), "true".to_string());
        assert_eq!(
            fg.joint_probability(&a).unwrap(),
            BigRational::new(1.into(), 8.into())
        );
    }

    #[test]
    fn same_function_sees_through_argument_order() {
        let ranges = [Range::boolean(), Range::boolean()];
        let table = build_table("f", &ranges, &rows2(["1", "2", "3", "4"])).unwrap();
        let f = Factor::new("f".into(), vec!["A".into(), "B".into()], &ranges, table).unwrap();
        let g = f.permuted(&[1, 0]).unwrap();
        assert!(f.same_function(&g));
        assert_ne!(f.table(), g.table());
    }
}
