//! Parametric factor graphs.
//!
//! A parametric factor graph compresses a propositional one: each
//! parameterized randvar (PRV) stands for a list of ground randvars indexed
//! by logvar domain tuples, and each parfactor stands for one ground factor
//! per assignment of its free logvars. One parfactor argument may be a
//! counting argument `#_X[R(X)]` whose value space is the histograms over
//! the counted PRV's instances; grounding expands it back to the instances.
//!
//! Member names are stored explicitly so grounding reproduces the original
//! propositional graph name-for-name, which is what makes compress→ground
//! round-trips exactly comparable.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::model::{Factor, FactorGraph, ModelError, RandVar, Range};
use crate::table::{ArgSpace, Histogram, Table};

/// Errors from building or grounding a parametric factor graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PfgError {
    #[error("logvar {name:?} needs a non-empty duplicate-free domain")]
    BadLogvar { name: String },
    #[error("duplicate name {name:?}")]
    NameCollision { name: String },
    #[error("{owner:?} references undeclared logvar {logvar:?}")]
    UnknownLogvar { owner: String, logvar: String },
    #[error("prv {prv:?} lists logvar {logvar:?} more than once")]
    RepeatedLogvar { prv: String, logvar: String },
    #[error("prv {prv:?} has {got} logvars; at most 2 are supported")]
    TooManyLogvars { prv: String, got: usize },
    #[error("{owner:?} has {got} members but its logvar domains require {want}")]
    InconsistentMembers { owner: String, got: usize, want: usize },
    #[error("ground name {name:?} is claimed by more than one prv or parfactor")]
    MemberCollision { name: String },
    #[error("parfactor {parfactor:?} references undeclared prv {prv:?}")]
    UnknownPrv { parfactor: String, prv: String },
    #[error("parfactor {parfactor:?} lists prv {prv:?} more than once")]
    RepeatedArg { parfactor: String, prv: String },
    #[error("parfactor {parfactor:?}: bad counting argument: {reason}")]
    BadCrv { parfactor: String, reason: String },
    #[error("parfactor {parfactor:?}: table spaces do not match the argument value spaces")]
    BadTable { parfactor: String },
    #[error("outside the liftable fragment: {detail}")]
    FragmentViolation { detail: String },
    #[error("unknown ground randvar {name:?} in evidence")]
    UnknownGroundRandVar { name: String },
    #[error("evidence value {value:?} is not in the range of {randvar:?}")]
    BadEvidenceValue { randvar: String, value: String },
}

/// A logical variable: a name plus its finite domain of constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Logvar {
    pub name: String,
    pub domain: Vec<String>,
}

/// A parameterized randvar: `name(L1, …)` standing for `members`, indexed
/// row-major by the logvar domains (first logvar slowest). A parameterless
/// PRV (no logvars) stands for exactly one ground randvar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prv {
    pub name: String,
    pub range: Range,
    pub logvars: Vec<String>,
    pub members: Vec<String>,
}

impl Prv {
    /// Ground member for one domain-index per logvar, row-major.
    pub fn member_index(&self, digits: &[usize], domain_sizes: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), domain_sizes.len());
        let mut idx = 0;
        for (&d, &n) in digits.iter().zip(domain_sizes) {
            idx = idx * n + d;
        }
        idx
    }
}

/// Marks one parfactor argument as a counting argument `#_X[args[arg_index]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrvSpec {
    pub arg_index: usize,
    pub counted_logvar: String,
}

/// A parfactor: an ordered list of PRV arguments (at most one of them
/// counted), a table over the joint value space, and the names of the ground
/// factors it stands for, indexed row-major by its free logvars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parfactor {
    pub name: String,
    pub args: Vec<String>,
    pub crv: Option<CrvSpec>,
    pub table: Table,
    pub members: Vec<String>,
}

/// A validated parametric factor graph with optional ground evidence.
#[derive(Debug, Clone)]
pub struct ParfactorGraph {
    logvars: Vec<Logvar>,
    prvs: Vec<Prv>,
    parfactors: Vec<Parfactor>,
    evidence: BTreeMap<String, String>,
    lv_index: HashMap<String, usize>,
    prv_index: HashMap<String, usize>,
}

impl ParfactorGraph {
    pub fn new(
        logvars: Vec<Logvar>,
        prvs: Vec<Prv>,
        parfactors: Vec<Parfactor>,
        evidence: BTreeMap<String, String>,
    ) -> Result<Self, PfgError> {
        let mut lv_index = HashMap::new();
        for (i, lv) in logvars.iter().enumerate() {
            let mut seen = HashSet::new();
            if lv.domain.is_empty() || !lv.domain.iter().all(|c| seen.insert(c)) {
                return Err(PfgError::BadLogvar { name: lv.name.clone() });
            }
            if lv_index.insert(lv.name.clone(), i).is_some() {
                return Err(PfgError::NameCollision { name: lv.name.clone() });
            }
        }
        let mut prv_index = HashMap::new();
        let mut ground_names = HashSet::new();
        for (i, prv) in prvs.iter().enumerate() {
            if prv_index.insert(prv.name.clone(), i).is_some() {
                return Err(PfgError::NameCollision { name: prv.name.clone() });
            }
            if prv.logvars.len() > 2 {
                return Err(PfgError::TooManyLogvars {
                    prv: prv.name.clone(),
                    got: prv.logvars.len(),
                });
            }
            let mut seen = HashSet::new();
            let mut want = 1usize;
            for lv in &prv.logvars {
                let idx = *lv_index.get(lv).ok_or_else(|| PfgError::UnknownLogvar {
                    owner: prv.name.clone(),
                    logvar: lv.clone(),
                })?;
                if !seen.insert(lv.clone()) {
                    return Err(PfgError::RepeatedLogvar {
                        prv: prv.name.clone(),
                        logvar: lv.clone(),
                    });
                }
                want *= logvars[idx].domain.len();
            }
            if prv.members.len() != want {
                return Err(PfgError::InconsistentMembers {
                    owner: prv.name.clone(),
                    got: prv.members.len(),
                    want,
                });
            }
            for m in &prv.members {
                if !ground_names.insert(m.clone()) {
                    return Err(PfgError::MemberCollision { name: m.clone() });
                }
            }
        }
        let mut pf_names = HashSet::new();
        let mut ground_factor_names = HashSet::new();
        for pf in &parfactors {
            if !pf_names.insert(pf.name.clone()) {
                return Err(PfgError::NameCollision { name: pf.name.clone() });
            }
            let mut seen = HashSet::new();
            for arg in &pf.args {
                if !prv_index.contains_key(arg) {
                    return Err(PfgError::UnknownPrv {
                        parfactor: pf.name.clone(),
                        prv: arg.clone(),
                    });
                }
                if !seen.insert(arg.clone()) {
                    return Err(PfgError::RepeatedArg {
                        parfactor: pf.name.clone(),
                        prv: arg.clone(),
                    });
                }
            }
            if let Some(crv) = &pf.crv {
                if crv.arg_index >= pf.args.len() {
                    return Err(PfgError::BadCrv {
                        parfactor: pf.name.clone(),
                        reason: format!("arg_index {} out of bounds", crv.arg_index),
                    });
                }
                let counted = &prvs[prv_index[&pf.args[crv.arg_index]]];
                if counted.logvars != [crv.counted_logvar.clone()] {
                    return Err(PfgError::BadCrv {
                        parfactor: pf.name.clone(),
                        reason: format!(
                            "counted prv {:?} must have exactly the counted logvar {:?}",
                            counted.name, crv.counted_logvar
                        ),
                    });
                }
            }
            // Free logvars must not include the counted one (it is bound).
            let free = free_logvars_of(pf, &prvs, &prv_index);
            if let Some(crv) = &pf.crv {
                if free.contains(&crv.counted_logvar) {
                    return Err(PfgError::BadCrv {
                        parfactor: pf.name.clone(),
                        reason: format!("counted logvar {:?} also occurs free", crv.counted_logvar),
                    });
                }
            }
            let mut want = 1usize;
            for lv in &free {
                want *= logvars[lv_index[lv]].domain.len();
            }
            if pf.members.len() != want {
                return Err(PfgError::InconsistentMembers {
                    owner: pf.name.clone(),
                    got: pf.members.len(),
                    want,
                });
            }
            for m in &pf.members {
                if !ground_factor_names.insert(m.clone()) {
                    return Err(PfgError::MemberCollision { name: m.clone() });
                }
            }
            // Table spaces must match the argument value spaces.
            let want_spaces: Vec<ArgSpace> = pf
                .args
                .iter()
                .enumerate()
                .map(|(pos, arg)| {
                    let prv = &prvs[prv_index[arg]];
                    match &pf.crv {
                        Some(crv) if crv.arg_index == pos => ArgSpace::Histograms {
                            positions: logvars[lv_index[&crv.counted_logvar]].domain.len(),
                            range: prv.range.clone(),
                        },
                        _ => ArgSpace::Labels(prv.range.clone()),
                    }
                })
                .collect();
            if pf.table.spaces() != want_spaces.as_slice() {
                return Err(PfgError::BadTable {
                    parfactor: pf.name.clone(),
                });
            }
        }
        // Domain-liftable fragment: every PRV has at most one logvar, or
        // every parfactor has at most two logvars (counted one included).
        let prv1 = prvs.iter().all(|p| p.logvars.len() <= 1);
        let pf2 = parfactors.iter().all(|pf| {
            let mut lvs: Vec<String> = free_logvars_of(pf, &prvs, &prv_index);
            if let Some(crv) = &pf.crv {
                lvs.push(crv.counted_logvar.clone());
            }
            lvs.len() <= 2
        });
        if !prv1 && !pf2 {
            return Err(PfgError::FragmentViolation {
                detail: "a prv has 2 logvars and a parfactor has more than 2".into(),
            });
        }
        let member_ranges: HashMap<&str, &Range> = prvs
            .iter()
            .flat_map(|p| p.members.iter().map(move |m| (m.as_str(), &p.range)))
            .collect();
        for (rv, value) in &evidence {
            let range = member_ranges
                .get(rv.as_str())
                .ok_or_else(|| PfgError::UnknownGroundRandVar { name: rv.clone() })?;
            if range.index_of(value).is_none() {
                return Err(PfgError::BadEvidenceValue {
                    randvar: rv.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(ParfactorGraph {
            logvars,
            prvs,
            parfactors,
            evidence,
            lv_index,
            prv_index,
        })
    }

    pub fn logvars(&self) -> &[Logvar] {
        &self.logvars
    }

    pub fn prvs(&self) -> &[Prv] {
        &self.prvs
    }

    pub fn parfactors(&self) -> &[Parfactor] {
        &self.parfactors
    }

    pub fn evidence(&self) -> &BTreeMap<String, String> {
        &self.evidence
    }

    pub fn logvar(&self, name: &str) -> Option<&Logvar> {
        self.lv_index.get(name).map(|&i| &self.logvars[i])
    }

    pub fn prv(&self, name: &str) -> Option<&Prv> {
        self.prv_index.get(name).map(|&i| &self.prvs[i])
    }

    pub fn parfactor(&self, name: &str) -> Option<&Parfactor> {
        self.parfactors.iter().find(|pf| pf.name == name)
    }

    /// Free logvars of a parfactor in first-appearance order over its plain
    /// arguments. The counted logvar, if any, is bound and excluded.
    pub fn free_logvars(&self, pf: &Parfactor) -> Vec<String> {
        free_logvars_of(pf, &self.prvs, &self.prv_index)
    }

    /// Expands one PRV back into its ground randvars.
    pub fn ground_prv(&self, prv: &Prv) -> Vec<RandVar> {
        prv.members
            .iter()
            .map(|m| RandVar {
                name: m.clone(),
                range: prv.range.clone(),
            })
            .collect()
    }

    /// Expands one parfactor into its ground factors, one per assignment of
    /// its free logvars, in member order. A counting argument expands into
    /// the counted PRV's instances (contiguous, in member order), reading
    /// each potential from the histogram row its assignment induces.
    pub fn ground_parfactor(&self, pf: &Parfactor) -> Result<Vec<Factor>, ModelError> {
        let free = self.free_logvars(pf);
        let sizes: Vec<usize> = free
            .iter()
            .map(|lv| self.logvars[self.lv_index[lv]].domain.len())
            .collect();
        let total: usize = sizes.iter().product();
        debug_assert_eq!(total, pf.members.len());

        let ground_table = expand_crv_table(&pf.table);

        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0usize; free.len()];
        for member in &pf.members {
            // Substitution for this grounding: free[i] -> digits[i].
            let mut args: Vec<String> = Vec::new();
            let mut ranges: Vec<Range> = Vec::new();
            for (pos, arg) in pf.args.iter().enumerate() {
                let prv = &self.prvs[self.prv_index[arg]];
                let counted = matches!(&pf.crv, Some(c) if c.arg_index == pos);
                if counted {
                    for m in &prv.members {
                        args.push(m.clone());
                        ranges.push(prv.range.clone());
                    }
                } else {
                    let mut prv_digits = Vec::with_capacity(prv.logvars.len());
                    let mut prv_sizes = Vec::with_capacity(prv.logvars.len());
                    for lv in &prv.logvars {
                        let slot = free.iter().position(|f| f == lv).expect("validated free lv");
                        prv_digits.push(digits[slot]);
                        prv_sizes.push(sizes[slot]);
                    }
                    args.push(prv.members[prv.member_index(&prv_digits, &prv_sizes)].clone());
                    ranges.push(prv.range.clone());
                }
            }
            out.push(Factor::new(member.clone(), args, &ranges, ground_table.clone())?);
            // Row-major odometer over the free logvars, last fastest.
            for slot in (0..digits.len()).rev() {
                digits[slot] += 1;
                if digits[slot] < sizes[slot] {
                    break;
                }
                digits[slot] = 0;
            }
        }
        Ok(out)
    }

    /// Expands the whole graph back into a propositional factor graph.
    /// Randvars appear in PRV-declaration-then-member order; factors in
    /// parfactor-declaration-then-member order; evidence passes through.
    pub fn ground(&self) -> Result<FactorGraph, ModelError> {
        let mut randvars = Vec::new();
        for prv in &self.prvs {
            randvars.extend(self.ground_prv(prv));
        }
        let mut factors = Vec::new();
        for pf in &self.parfactors {
            factors.extend(self.ground_parfactor(pf)?);
        }
        FactorGraph::new(randvars, factors, self.evidence.clone())
    }
}

fn free_logvars_of(pf: &Parfactor, prvs: &[Prv], prv_index: &HashMap<String, usize>) -> Vec<String> {
    let mut free = Vec::new();
    for (pos, arg) in pf.args.iter().enumerate() {
        if matches!(&pf.crv, Some(c) if c.arg_index == pos) {
            continue;
        }
        if let Some(&i) = prv_index.get(arg) {
            for lv in &prvs[i].logvars {
                if !free.contains(lv) {
                    free.push(lv.clone());
                }
            }
        }
    }
    free
}

/// Rewrites every histogram-valued axis of a table into the label axes it
/// counts: an axis over histograms of `n` instances with range size `r`
/// becomes `n` contiguous axes of size `r`, each row reading the potential
/// of the histogram its assignment induces.
pub fn expand_crv_table(table: &Table) -> Table {
    if table
        .spaces()
        .iter()
        .all(|s| matches!(s, ArgSpace::Labels(_)))
    {
        return table.clone();
    }
    let mut spaces = Vec::new();
    // For each new axis: which old axis it came from; label axes map 1:1,
    // histogram axes map n:1.
    let mut origin: Vec<usize> = Vec::new();
    for (old, space) in table.spaces().iter().enumerate() {
        match space {
            ArgSpace::Labels(r) => {
                spaces.push(ArgSpace::Labels(r.clone()));
                origin.push(old);
            }
            ArgSpace::Histograms { positions, range } => {
                for _ in 0..*positions {
                    spaces.push(ArgSpace::Labels(range.clone()));
                    origin.push(old);
                }
            }
        }
    }
    let total: usize = spaces.iter().map(ArgSpace::size).product();
    let mut values = Vec::with_capacity(total);
    let sizes: Vec<usize> = spaces.iter().map(ArgSpace::size).collect();
    let mut digits = vec![0usize; spaces.len()];
    for _ in 0..total {
        // Project the expanded assignment back onto the original axes.
        let mut old_digits = Vec::with_capacity(table.spaces().len());
        let mut cursor = 0usize;
        for (old, space) in table.spaces().iter().enumerate() {
            match space {
                ArgSpace::Labels(_) => {
                    old_digits.push(digits[cursor]);
                    cursor += 1;
                }
                ArgSpace::Histograms { positions, range } => {
                    let mut counts = vec![0usize; range.len()];
                    for _ in 0..*positions {
                        counts[digits[cursor]] += 1;
                        cursor += 1;
                    }
                    old_digits.push(crate::table::histogram_rank(&Histogram::new(counts)));
                    let _ = old;
                }
            }
        }
        values.push(table.value_at(&old_digits).clone());
        for slot in (0..digits.len()).rev() {
            digits[slot] += 1;
            if digits[slot] < sizes[slot] {
                break;
            }
            digits[slot] = 0;
        }
    }
    Table::new(spaces, values).expect("expanded table is total by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn pot(s: &str) -> Potential {
        Potential::parse(s).unwrap()
    }

    fn boolean() -> Range {
        Range::boolean()
    }

    /// φ′(#_X[R(X)]) over |𝒟(X)| = 2: histogram table [2,0]→1, [1,1]→2,
    /// [0,2]→3 must ground to one factor over (R1, R2) with potentials
    /// (t,t)→1, (t,f)→2, (f,t)→2, (f,f)→3.
    #[test]
    fn crv_grounding_reads_histogram_rows() {
        let lv = Logvar {
            name: "X".into(),
            domain: vec!["x1".into(), "x2".into()],
        };
        let prv = Prv {
            name: "R".into(),
            range: boolean(),
            logvars: vec!["X".into()],
            members: vec!["R1".into(), "R2".into()],
        };
        let table = Table::new(
            vec![ArgSpace::Histograms {
                positions: 2,
                range: boolean(),
            }],
            vec![pot("1"), pot("2"), pot("3")],
        )
        .unwrap();
        let pf = Parfactor {
            name: "g".into(),
            args: vec!["R".into()],
            crv: Some(CrvSpec {
                arg_index: 0,
                counted_logvar: "X".into(),
            }),
            table,
            members: vec!["f".into()],
        };
        let pfg = ParfactorGraph::new(vec![lv], vec![prv], vec![pf], BTreeMap::new()).unwrap();
        let fg = pfg.ground().unwrap();
        assert_eq!(fg.randvars().len(), 2);
        let f = fg.factor("f").unwrap();
        assert_eq!(f.args(), ["R1".to_string(), "R2".to_string()]);
        assert_eq!(f.table().value_at(&[0, 0]), &pot("1"));
        assert_eq!(f.table().value_at(&[0, 1]), &pot("2"));
        assert_eq!(f.table().value_at(&[1, 0]), &pot("2"));
        assert_eq!(f.table().value_at(&[1, 1]), &pot("3"));
    }

    #[test]
    fn shared_logvar_grounds_elementwise() {
        let lv = Logvar {
            name: "X".into(),
            domain: vec!["x1".into(), "x2".into(), "x3".into()],
        };
        let r = Prv {
            name: "R".into(),
            range: boolean(),
            logvars: vec!["X".into()],
            members: vec!["A1".into(), "A2".into(), "A3".into()],
        };
        let s = Prv {
            name: "S".into(),
            range: boolean(),
            logvars: vec!["X".into()],
            members: vec!["B1".into(), "B2".into(), "B3".into()],
        };
        let table = Table::new(
            vec![ArgSpace::Labels(boolean()), ArgSpace::Labels(boolean())],
            vec![pot("1"), pot("2"), pot("3"), pot("4")],
        )
        .unwrap();
        let pf = Parfactor {
            name: "g".into(),
            args: vec!["R".into(), "S".into()],
            crv: None,
            table,
            members: vec!["f1".into(), "f2".into(), "f3".into()],
        };
        let pfg = ParfactorGraph::new(vec![lv], vec![r, s], vec![pf], BTreeMap::new()).unwrap();
        let fg = pfg.ground().unwrap();
        assert_eq!(fg.factors().len(), 3);
        assert_eq!(
            fg.factor("f2").unwrap().args(),
            ["A2".to_string(), "B2".to_string()]
        );
    }

    #[test]
    fn member_count_mismatch_is_rejected() {
        let lv = Logvar {
            name: "X".into(),
            domain: vec!["x1".into(), "x2".into()],
        };
        let r = Prv {
            name: "R".into(),
            range: boolean(),
            logvars: vec!["X".into()],
            members: vec!["A1".into()],
        };
        let err = ParfactorGraph::new(vec![lv], vec![r], vec![], BTreeMap::new()).unwrap_err();
        assert!(matches!(err, PfgError::InconsistentMembers { .. }));
    }

    #[test]
    fn two_logvar_prvs_ground_row_major() {
        let x = Logvar {
            name: "X".into(),
            domain: vec!["x1".into(), "x2".into()],
        };
        let y = Logvar {
            name: "Y".into(),
            domain: vec!["y1".into(), "y2".into()],
        };
        let s = Prv {
            name: "S".into(),
            range: boolean(),
            logvars: vec!["X".into(), "Y".into()],
            members: vec!["S11".into(), "S12".into(), "S21".into(), "S22".into()],
        };
        let r = Prv {
            name: "R".into(),
            range: boolean(),
            logvars: vec!["X".into()],
            members: vec!["R1".into(), "R2".into()],
        };
        let table = Table::new(
            vec![ArgSpace::Labels(boolean()), ArgSpace::Labels(boolean())],
            vec![pot("1"), pot("2"), pot("3"), pot("4")],
        )
        .unwrap();
        let pf = Parfactor {
            name: "g".into(),
            args: vec!["R".into(), "S".into()],
            crv: None,
            table,
            members: vec!["f11".into(), "f12".into(), "f21".into(), "f22".into()],
        };
        let pfg = ParfactorGraph::new(vec![x, y], vec![s, r], vec![pf], BTreeMap::new()).unwrap();
        let fg = pfg.ground().unwrap();
        // Free logvars of g are (X, Y) via R then S; grounding f21 binds
        // X=x2, Y=y1 → args (R2, S21).
        assert_eq!(
            fg.factor("f21").unwrap().args(),
            ["R2".to_string(), "S21".to_string()]
        );
    }

    #[test]
    fn fragment_violations_are_rejected() {
        let mk_lv = |n: &str| Logvar {
            name: n.into(),
            domain: vec![format!("{n}1"), format!("{n}2")],
        };
        let two_lv_prv = |n: &str, a: &str, b: &str| Prv {
            name: n.into(),
            range: boolean(),
            logvars: vec![a.into(), b.into()],
            members: (0..4).map(|i| format!("{n}{i}")).collect(),
        };
        // One PRV with two logvars is fine on its own…
        let ok = ParfactorGraph::new(
            vec![mk_lv("X"), mk_lv("Y")],
            vec![two_lv_prv("S", "X", "Y")],
            vec![],
            BTreeMap::new(),
        );
        assert!(ok.is_ok());
        // …but combined with a 3-logvar parfactor the graph leaves the fragment.
        let u = two_lv_prv("U", "X", "Y");
        let w = Prv {
            name: "W".into(),
            range: boolean(),
            logvars: vec!["Z".into()],
            members: vec!["W1".into(), "W2".into()],
        };
        let table = Table::new(
            vec![ArgSpace::Labels(boolean()), ArgSpace::Labels(boolean())],
            vec![pot("1"), pot("2"), pot("3"), pot("4")],
        )
        .unwrap();
        let pf = Parfactor {
            name: "g".into(),
            args: vec!["U".into(), "W".into()],
            crv: None,
            table,
            members: (0..8).map(|i| format!("f{i}")).collect(),
        };
        let err = ParfactorGraph::new(
            vec![mk_lv("X"), mk_lv("Y"), mk_lv("Z")],
            vec![u, w],
            vec![pf],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, PfgError::FragmentViolation { .. }));
    }
}
