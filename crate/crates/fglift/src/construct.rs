//! Assembling a parametric graph from a converged grouping.
//!
//! Each randvar class becomes a parameterized randvar and each factor class
//! becomes a parfactor, such that grounding the result reproduces exactly
//! the members of every class. Three pieces have to be worked out:
//!
//! 1. **Counting arguments.** A factor class whose members repeat one
//!    randvar class across several argument positions (necessarily their
//!    commutative positions) collapses those positions into one counting
//!    argument over histograms.
//! 2. **Logvar structure.** Per parfactor, arguments whose class size
//!    equals the member count share a single logvar; arguments whose class
//!    size differs get their own logvar, shared between two arguments
//!    exactly when their classes admit a bijection preserving factor
//!    incidence; when both kinds meet in one parfactor, the full-size
//!    arguments carry two logvars and the rest carry one of the two.
//! 3. **Member alignment.** Logvar identity only fixes groundings together
//!    with a member order per class, so orders are chosen constructively
//!    (anchored on already-ordered classes, first-appearance otherwise) and
//!    every choice is verified against every factor class it touches.
//!
//! The grouping is trusted to be a genuine symmetry only as far as it can
//! be verified: inputs whose classes cannot be realised by any parametric
//! structure (parallel factors, incidence cycles that merely look regular)
//! fail loudly with a dedicated error instead of producing a wrong model.
//! As a final guard, the assembled graph is grounded and checked
//! semantically against the input, factor by factor.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::colour::Grouping;
use crate::model::{Factor, FactorGraph, ModelError};
use crate::pfg::{CrvSpec, Logvar, Parfactor, ParfactorGraph, PfgError, Prv};
use crate::symmetry::is_commutative;
use crate::table::{enumerate_histograms, ArgSpace, Table};

#[derive(Debug, Error)]
pub enum ConstructError {
    /// The grouping breaks a structural premise of the construction, e.g.
    /// factor classes that no assignment of logvars can index.
    #[error("construction premise violated: {detail}")]
    PremiseViolation { detail: String },
    /// Member orders cannot be made globally consistent.
    #[error("member alignment conflict: {detail}")]
    AlignmentConflict { detail: String },
    /// Repeated argument positions lack the commutativity that a counting
    /// argument requires.
    #[error("repeated arguments are not commutative: {detail}")]
    NotCommutative { detail: String },
    /// The result would leave the supported model fragment.
    #[error("outside the supported fragment: {detail}")]
    FragmentViolation { detail: String },
    /// The assembled graph failed the final semantic check against the
    /// input. Reaching this indicates a bug, not a property of the input.
    #[error("assembled graph does not reproduce the input: {detail}")]
    Unsound { detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pfg(#[from] PfgError),
}

/// Size figures for one construction run.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructStats {
    pub rv_classes: usize,
    pub factor_classes: usize,
    pub crv_count: usize,
    pub logvar_count: usize,
    /// Total table rows across the input factors.
    pub rows_before: usize,
    /// Total table rows across the assembled parfactors.
    pub rows_after: usize,
}

/// Union-find over prospective logvars, each carrying its domain size.
struct LvForest {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl LvForest {
    fn new() -> Self {
        LvForest {
            parent: Vec::new(),
            size: Vec::new(),
        }
    }

    fn fresh(&mut self, domain_size: usize) -> usize {
        self.parent.push(self.parent.len());
        self.size.push(domain_size);
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> Result<(), ConstructError> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Ok(());
        }
        if self.size[ra] != self.size[rb] {
            return Err(ConstructError::PremiseViolation {
                detail: format!(
                    "cannot identify logvars with domain sizes {} and {}",
                    self.size[ra], self.size[rb]
                ),
            });
        }
        self.parent[rb] = ra;
        Ok(())
    }

    fn domain_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Logvar slots of one randvar class.
#[derive(Clone, Copy)]
enum ClassLvs {
    One(usize),
    Two(usize, usize),
}

/// One factor class after counting-argument collapse.
struct ClassPlan {
    /// Factor indices, declaration order.
    members: Vec<usize>,
    /// Randvar class per collapsed argument slot.
    collapsed_classes: Vec<usize>,
    /// Original (post-rearrangement) argument position per collapsed slot;
    /// for the counted slot, the leading repeated position.
    collapsed_positions: Vec<usize>,
    /// Collapsed slot holding the counting argument, if any.
    crv_slot: Option<usize>,
    table: Table,
    /// Member factor names indexed row-major by the parfactor's free
    /// logvars (filled during alignment; singletons keep their one name).
    member_order: Vec<String>,
}

/// Collapses the given argument positions of a commutative table into one
/// histogram-valued axis placed at the leading position.
fn collapse_counted(
    owner: &str,
    table: &Table,
    positions: &[usize],
) -> Result<Table, ConstructError> {
    let lead = positions[0];
    let range = match &table.spaces()[lead] {
        ArgSpace::Labels(r) => r.clone(),
        ArgSpace::Histograms { .. } => {
            return Err(ConstructError::NotCommutative {
                detail: "cannot count an axis that is already histogram-valued".into(),
            })
        }
    };
    for &p in positions {
        if table.spaces()[p] != ArgSpace::Labels(range.clone()) {
            return Err(ConstructError::NotCommutative {
                detail: "counted positions have differing ranges".into(),
            });
        }
    }

    let mut spaces = Vec::new();
    let mut origin: Vec<usize> = Vec::new();
    for (i, s) in table.spaces().iter().enumerate() {
        if i == lead {
            spaces.push(ArgSpace::Histograms {
                positions: positions.len(),
                range: range.clone(),
            });
            origin.push(i);
        } else if !positions.contains(&i) {
            spaces.push(s.clone());
            origin.push(i);
        }
    }

    let hists = enumerate_histograms(positions.len(), range.len());
    let sizes: Vec<usize> = spaces.iter().map(ArgSpace::size).collect();
    let total: usize = sizes.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut digits = vec![0usize; spaces.len()];
    for _ in 0..total {
        let mut full = vec![0usize; table.arity()];
        for (axis, &d) in digits.iter().enumerate() {
            if axis == 0 && origin[0] == lead || origin[axis] == lead {
                // Expand the histogram into concrete labels over the
                // counted positions; commutativity makes the order moot.
                let mut fill = positions.iter();
                for (label, &count) in hists[d].counts().iter().enumerate() {
                    for _ in 0..count {
                        full[*fill.next().expect("histogram total matches")] = label;
                    }
                }
            } else {
                full[origin[axis]] = d;
            }
        }
        values.push(table.value_at(&full).clone());
        for slot in (0..digits.len()).rev() {
            digits[slot] += 1;
            if digits[slot] < sizes[slot] {
                break;
            }
            digits[slot] = 0;
        }
    }
    Table::new(spaces, values).map_err(|source| {
        ConstructError::Model(ModelError::BadTable {
            factor: owner.to_string(),
            source,
        })
    })
}

/// Next free name of the form `prefix{1,2,…}` not present in `used`.
fn fresh_name(prefix: &str, counter: &mut usize, used: &BTreeSet<String>) -> String {
    loop {
        *counter += 1;
        let candidate = format!("{prefix}{counter}");
        if !used.contains(&candidate) {
            return candidate;
        }
    }
}

/// Builds a parametric graph realising the grouping, or explains why none
/// exists. Works off any grouping — with counting annotations (from the
/// order-aware pass) or without (baseline) — and ends by grounding the
/// result and checking it semantically against `fg`.
pub fn build_pfg(
    fg: &FactorGraph,
    grouping: &Grouping,
) -> Result<(ParfactorGraph, ConstructStats), ConstructError> {
    let rearranged = grouping.rearranged_factors(fg);
    let rv_index: HashMap<&str, usize> = fg
        .randvars()
        .iter()
        .enumerate()
        .map(|(i, rv)| (rv.name.as_str(), i))
        .collect();
    let factor_index: HashMap<&str, usize> = fg
        .factors()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name(), i))
        .collect();

    let rv_class_members: Vec<Vec<usize>> = grouping
        .rv_classes
        .iter()
        .map(|class| class.iter().map(|n| rv_index[n.as_str()]).collect())
        .collect();
    let mut rv_class_of = vec![0usize; fg.randvars().len()];
    for (c, members) in rv_class_members.iter().enumerate() {
        for &r in members {
            rv_class_of[r] = c;
        }
    }

    // ---- Phase 1: collapse each factor class, detecting counting args. --
    let mut plans: Vec<ClassPlan> = Vec::with_capacity(grouping.factor_classes.len());
    for class in &grouping.factor_classes {
        let members: Vec<usize> = class.iter().map(|n| factor_index[n.as_str()]).collect();
        let rep = &rearranged[members[0]];
        let arg_classes: Vec<usize> = rep
            .args()
            .iter()
            .map(|a| rv_class_of[rv_index[a.as_str()]])
            .collect();
        for &m in &members[1..] {
            let f = &rearranged[m];
            let classes: Vec<usize> = f
                .args()
                .iter()
                .map(|a| rv_class_of[rv_index[a.as_str()]])
                .collect();
            if classes != arg_classes {
                return Err(ConstructError::PremiseViolation {
                    detail: format!(
                        "factors {} and {} share a class but their argument classes differ",
                        rep.name(),
                        f.name()
                    ),
                });
            }
            if f.table() != rep.table() {
                return Err(ConstructError::PremiseViolation {
                    detail: format!(
                        "factors {} and {} share a class but their aligned tables differ",
                        rep.name(),
                        f.name()
                    ),
                });
            }
        }

        let mut positions_by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (p, &c) in arg_classes.iter().enumerate() {
            positions_by_class.entry(c).or_default().push(p);
        }
        let repeated: Vec<(usize, Vec<usize>)> = positions_by_class
            .into_iter()
            .filter(|(_, ps)| ps.len() > 1)
            .collect();

        let (collapsed_classes, collapsed_positions, crv_slot, table) = match repeated.len() {
            0 => {
                let positions: Vec<usize> = (0..arg_classes.len()).collect();
                (arg_classes.clone(), positions, None, rep.table().clone())
            }
            1 => {
                let (counted_class, ref p) = repeated[0];
                for &m in &members {
                    let name = rearranged[m].name();
                    let covered = grouping
                        .annotations
                        .get(name)
                        .is_some_and(|s| p.iter().all(|pos| s.contains(pos)));
                    if !covered {
                        return Err(ConstructError::NotCommutative {
                            detail: format!(
                                "factor {name} repeats one argument group at positions {p:?} \
                                 without a covering commutative annotation"
                            ),
                        });
                    }
                }
                if !is_commutative(rep.table(), p) {
                    return Err(ConstructError::NotCommutative {
                        detail: format!(
                            "factor {} is annotated commutative at {p:?} but its table is not",
                            rep.name()
                        ),
                    });
                }
                // A counting argument stands for the whole class in every
                // member, so each member must touch the class in full.
                let class_set: BTreeSet<usize> =
                    rv_class_members[counted_class].iter().copied().collect();
                for &m in &members {
                    let f = &rearranged[m];
                    let at_p: BTreeSet<usize> = p
                        .iter()
                        .map(|&pos| rv_index[f.args()[pos].as_str()])
                        .collect();
                    if at_p != class_set {
                        return Err(ConstructError::PremiseViolation {
                            detail: format!(
                                "factor {} repeats a {}-member group but only touches {} of them",
                                f.name(),
                                class_set.len(),
                                at_p.len()
                            ),
                        });
                    }
                }
                let mut classes = Vec::new();
                let mut positions = Vec::new();
                let mut crv_slot = None;
                for (pos, &c) in arg_classes.iter().enumerate() {
                    if pos == p[0] {
                        crv_slot = Some(classes.len());
                    } else if p.contains(&pos) {
                        continue;
                    }
                    classes.push(c);
                    positions.push(pos);
                }
                (
                    classes,
                    positions,
                    crv_slot,
                    collapse_counted(rep.name(), rep.table(), p)?,
                )
            }
            _ => {
                return Err(ConstructError::FragmentViolation {
                    detail: format!(
                        "factor {} repeats {} distinct argument groups; nested counting \
                         is not supported",
                        rep.name(),
                        repeated.len()
                    ),
                });
            }
        };

        plans.push(ClassPlan {
            member_order: vec![rearranged[members[0]].name().to_string()],
            members,
            collapsed_classes,
            collapsed_positions,
            crv_slot,
            table,
        });
    }

    // ---- Phase 2: logvar structure and member alignment. ----------------
    let mut forest = LvForest::new();
    let mut class_lvs: Vec<Option<ClassLvs>> = vec![None; grouping.rv_classes.len()];
    // Member order per randvar class: position in the list = domain index.
    let mut class_ord: Vec<Option<Vec<usize>>> = vec![None; grouping.rv_classes.len()];
    // Free-lv roots used by each plan, to re-check distinctness at the end.
    let mut plan_roots: Vec<Vec<usize>> = Vec::with_capacity(plans.len());

    for plan in &mut plans {
        let l = plan.members.len();
        let rep_name = rearranged[plan.members[0]].name().to_string();

        // The counted class carries one logvar of its own; it is bound by
        // the counting argument and never parameterises the members.
        if let Some(slot) = plan.crv_slot {
            let c = plan.collapsed_classes[slot];
            let n = rv_class_members[c].len();
            match class_lvs[c] {
                None => class_lvs[c] = Some(ClassLvs::One(forest.fresh(n))),
                Some(ClassLvs::One(_)) => {}
                Some(ClassLvs::Two(..)) => {
                    return Err(ConstructError::FragmentViolation {
                        detail: format!(
                            "counted argument of {rep_name} needs a single logvar but its \
                             class carries two elsewhere"
                        ),
                    });
                }
            }
        }

        // Plain parameterised slots: (collapsed slot, class, per-member rv).
        struct Slot {
            idx: usize,
            class: usize,
            args: Vec<usize>,
        }
        let mut slots: Vec<Slot> = Vec::new();
        for (k, &c) in plan.collapsed_classes.iter().enumerate() {
            if plan.crv_slot == Some(k) || rv_class_members[c].len() == 1 {
                continue;
            }
            let pos = plan.collapsed_positions[k];
            let args: Vec<usize> = plan
                .members
                .iter()
                .map(|&m| rv_index[rearranged[m].args()[pos].as_str()])
                .collect();
            slots.push(Slot { idx: k, class: c, args });
        }

        if slots.is_empty() {
            if l > 1 {
                return Err(ConstructError::PremiseViolation {
                    detail: format!(
                        "{l} factors ({rep_name}, …) share a class but no argument \
                         parameterises them — parallel factors cannot be indexed"
                    ),
                });
            }
            plan_roots.push(Vec::new());
            continue;
        }

        // Incidence signature per randvar: the set of member factors (by
        // index within this class) whose argument list contains it.
        let incidence = |class: usize| -> BTreeMap<usize, BTreeSet<usize>> {
            let mut map: BTreeMap<usize, BTreeSet<usize>> = rv_class_members[class]
                .iter()
                .map(|&r| (r, BTreeSet::new()))
                .collect();
            for (t, &m) in plan.members.iter().enumerate() {
                for a in rearranged[m].args() {
                    let r = rv_index[a.as_str()];
                    if let Some(set) = map.get_mut(&r) {
                        set.insert(t);
                    }
                }
            }
            map
        };
        // Two equal-size classes admit an incidence-preserving bijection
        // exactly when their signature multisets coincide.
        let signature_counts = |class: usize| -> BTreeMap<BTreeSet<usize>, usize> {
            let mut counts = BTreeMap::new();
            for sig in incidence(class).into_values() {
                *counts.entry(sig).or_insert(0) += 1;
            }
            counts
        };

        let case_a: Vec<usize> = (0..slots.len())
            .filter(|&i| rv_class_members[slots[i].class].len() == l)
            .collect();
        let case_b: Vec<usize> = (0..slots.len())
            .filter(|&i| rv_class_members[slots[i].class].len() != l)
            .collect();

        // Materialise single-logvar nodes for the case-b classes and unify
        // the ones with an incidence bijection; case-a classes follow below.
        for &i in &case_b {
            let c = slots[i].class;
            match class_lvs[c] {
                None => {
                    let node = forest.fresh(rv_class_members[c].len());
                    class_lvs[c] = Some(ClassLvs::One(node));
                }
                Some(ClassLvs::One(_)) => {}
                Some(ClassLvs::Two(..)) => {
                    return Err(ConstructError::PremiseViolation {
                        detail: format!(
                            "argument of {rep_name} needs one logvar but its class \
                             carries two elsewhere"
                        ),
                    });
                }
            }
        }
        for ai in 0..case_b.len() {
            for bi in ai + 1..case_b.len() {
                let (ca, cb) = (slots[case_b[ai]].class, slots[case_b[bi]].class);
                if rv_class_members[ca].len() != rv_class_members[cb].len() {
                    continue;
                }
                if signature_counts(ca) == signature_counts(cb) {
                    let (Some(ClassLvs::One(na)), Some(ClassLvs::One(nb))) =
                        (class_lvs[ca], class_lvs[cb])
                    else {
                        unreachable!("case-b classes were just materialised as single-logvar");
                    };
                    forest.union(na, nb)?;
                }
            }
        }

        if case_a.is_empty() {
            // All arguments have their own (possibly shared) logvar; the
            // distinct domains must jointly index the members.
            let mut roots = Vec::new();
            for &i in &case_b {
                let Some(ClassLvs::One(n)) = class_lvs[slots[i].class] else {
                    unreachable!()
                };
                let r = forest.find(n);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
            let product: usize = roots.iter().map(|&r| forest.size[r]).product();
            if product != l {
                return Err(ConstructError::PremiseViolation {
                    detail: format!(
                        "free logvar domains of {rep_name} index {product} groundings \
                         but the class has {l} members"
                    ),
                });
            }
        } else if case_b.is_empty() {
            // Every argument class is member-sized: one logvar shared by all.
            let mut shared: Option<usize> = None;
            for &i in &case_a {
                let c = slots[i].class;
                let node = match class_lvs[c] {
                    None => {
                        let node = forest.fresh(l);
                        class_lvs[c] = Some(ClassLvs::One(node));
                        node
                    }
                    Some(ClassLvs::One(n)) => n,
                    Some(ClassLvs::Two(..)) => {
                        return Err(ConstructError::PremiseViolation {
                            detail: format!(
                                "argument of {rep_name} needs one logvar but its class \
                                 carries two elsewhere"
                            ),
                        });
                    }
                };
                if let Some(s) = shared {
                    forest.union(s, node)?;
                } else {
                    shared = Some(node);
                }
            }
        } else {
            // Mixed: member-sized classes carry two logvars; the smaller
            // ones carry one of the two each.
            let mut group_roots: Vec<usize> = Vec::new();
            for &i in &case_b {
                let Some(ClassLvs::One(n)) = class_lvs[slots[i].class] else {
                    unreachable!()
                };
                let r = forest.find(n);
                if !group_roots.contains(&r) {
                    group_roots.push(r);
                }
            }
            let (first, second) = match group_roots.len() {
                1 => {
                    let n1 = forest.size[group_roots[0]];
                    if l % n1 != 0 {
                        return Err(ConstructError::PremiseViolation {
                            detail: format!(
                                "{rep_name}: {l} members cannot factor over a domain of {n1}"
                            ),
                        });
                    }
                    (group_roots[0], forest.fresh(l / n1))
                }
                2 => {
                    let (n1, n2) = (forest.size[group_roots[0]], forest.size[group_roots[1]]);
                    if n1 * n2 != l {
                        return Err(ConstructError::PremiseViolation {
                            detail: format!(
                                "{rep_name}: logvar domains {n1}·{n2} do not index {l} members"
                            ),
                        });
                    }
                    (group_roots[0], group_roots[1])
                }
                n => {
                    return Err(ConstructError::FragmentViolation {
                        detail: format!(
                            "{rep_name} would need {} logvars alongside a two-logvar \
                             argument; at most two fit",
                            n
                        ),
                    });
                }
            };
            for &i in &case_a {
                let c = slots[i].class;
                match class_lvs[c] {
                    None => class_lvs[c] = Some(ClassLvs::Two(first, second)),
                    Some(ClassLvs::Two(a, b)) => {
                        let (sa, sb) = (forest.domain_size(a), forest.domain_size(b));
                        let (s1, s2) = (forest.domain_size(first), forest.domain_size(second));
                        if sa == s1 && sb == s2 {
                            forest.union(a, first)?;
                            forest.union(b, second)?;
                        } else if sa == s2 && sb == s1 {
                            forest.union(a, second)?;
                            forest.union(b, first)?;
                        } else {
                            return Err(ConstructError::PremiseViolation {
                                detail: format!(
                                    "two-logvar argument of {rep_name} has domain sizes \
                                     {sa}·{sb} where {s1}·{s2} is required"
                                ),
                            });
                        }
                    }
                    Some(ClassLvs::One(_)) => {
                        return Err(ConstructError::PremiseViolation {
                            detail: format!(
                                "argument of {rep_name} needs two logvars but its class \
                                 carries one elsewhere"
                            ),
                        });
                    }
                }
            }
        }

        // Free-lv roots in first-appearance order over the plain slots —
        // the same order the grounding odometer will use.
        let mut roots: Vec<usize> = Vec::new();
        for slot in &slots {
            let nodes = match class_lvs[slot.class].expect("slot class has logvars by now") {
                ClassLvs::One(n) => vec![n],
                ClassLvs::Two(a, b) => vec![a, b],
            };
            for n in nodes {
                let r = forest.find(n);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        let sizes: Vec<usize> = roots.iter().map(|&r| forest.size[r]).collect();
        let total: usize = sizes.iter().product();
        if total != l {
            return Err(ConstructError::PremiseViolation {
                detail: format!(
                    "free logvar domains of {rep_name} index {total} groundings but the \
                     class has {l} members"
                ),
            });
        }

        // Member digits per free-lv root, derived from ordered classes and
        // extended by first-appearance / fiber-rank where orders are free.
        let mut digits: BTreeMap<usize, Vec<Option<usize>>> =
            roots.iter().map(|&r| (r, vec![None; l])).collect();
        let set_digit = |digits: &mut BTreeMap<usize, Vec<Option<usize>>>,
                             root: usize,
                             t: usize,
                             d: usize|
         -> Result<(), ConstructError> {
            let cell = &mut digits.get_mut(&root).expect("known root")[t];
            match cell {
                None => {
                    *cell = Some(d);
                    Ok(())
                }
                Some(prev) if *prev == d => Ok(()),
                Some(prev) => Err(ConstructError::AlignmentConflict {
                    detail: format!(
                        "member {} of class {rep_name} is indexed both {prev} and {d} \
                         along one logvar",
                        t
                    ),
                }),
            }
        };

        // Pass 1: classes whose member order is already fixed anchor the
        // digits of their logvar(s).
        for slot in &slots {
            let Some(ord) = &class_ord[slot.class] else {
                continue;
            };
            let pos_of: HashMap<usize, usize> =
                ord.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            match class_lvs[slot.class].expect("materialised") {
                ClassLvs::One(n) => {
                    let root = forest.find(n);
                    for (t, &rv) in slot.args.iter().enumerate() {
                        set_digit(&mut digits, root, t, pos_of[&rv])?;
                    }
                }
                ClassLvs::Two(a, b) => {
                    let (ra, rb) = (forest.find(a), forest.find(b));
                    let d2 = forest.size[rb];
                    for (t, &rv) in slot.args.iter().enumerate() {
                        set_digit(&mut digits, ra, t, pos_of[&rv] / d2)?;
                        set_digit(&mut digits, rb, t, pos_of[&rv] % d2)?;
                    }
                }
            }
        }

        // Pass 2: single-logvar slots anchor any root still without digits,
        // ordering their class by first appearance over the member list.
        for slot in &slots {
            if class_ord[slot.class].is_some() {
                continue;
            }
            if let ClassLvs::One(n) = class_lvs[slot.class].expect("materialised") {
                let root = forest.find(n);
                if digits[&root].iter().all(Option::is_none) {
                    let mut ord: Vec<usize> = Vec::new();
                    for (t, &rv) in slot.args.iter().enumerate() {
                        let d = ord.iter().position(|&x| x == rv).unwrap_or_else(|| {
                            ord.push(rv);
                            ord.len() - 1
                        });
                        set_digit(&mut digits, root, t, d)?;
                    }
                    if ord.len() != rv_class_members[slot.class].len() {
                        return Err(ConstructError::AlignmentConflict {
                            detail: format!(
                                "class at an argument of {rep_name} has {} members but only \
                                 {} appear there",
                                rv_class_members[slot.class].len(),
                                ord.len()
                            ),
                        });
                    }
                    class_ord[slot.class] = Some(ord);
                }
            }
        }

        // Pass 3: roots still undetermined have no single-logvar slot of
        // their own (the residual logvar of a two-logvar class); rank the
        // members within each fiber of the remaining digits.
        for &root in &roots {
            if digits[&root].iter().all(Option::is_some) {
                continue;
            }
            if digits[&root].iter().any(Option::is_some) {
                return Err(ConstructError::AlignmentConflict {
                    detail: format!("partially indexed logvar in class {rep_name}"),
                });
            }
            let mut fibers: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let expected = forest.size[root];
            for t in 0..l {
                let key: Vec<usize> = roots
                    .iter()
                    .filter(|&&r| r != root)
                    .map(|&r| digits[&r][t].map_or(usize::MAX, |d| d))
                    .collect();
                if key.contains(&usize::MAX) {
                    return Err(ConstructError::AlignmentConflict {
                        detail: format!("members of {rep_name} cannot be indexed consistently"),
                    });
                }
                let rank = fibers.entry(key).or_insert(0);
                if *rank >= expected {
                    return Err(ConstructError::AlignmentConflict {
                        detail: format!(
                            "more than {expected} members of {rep_name} share one logvar fiber"
                        ),
                    });
                }
                set_digit(&mut digits, root, t, *rank)?;
                *rank += 1;
            }
        }

        // Derive member orders for classes still without one, now that all
        // digits are known.
        for slot in &slots {
            if class_ord[slot.class].is_some() {
                continue;
            }
            let n = rv_class_members[slot.class].len();
            let mut ord: Vec<Option<usize>> = vec![None; n];
            match class_lvs[slot.class].expect("materialised") {
                ClassLvs::One(node) => {
                    let root = forest.find(node);
                    for (t, &rv) in slot.args.iter().enumerate() {
                        let d = digits[&root][t].expect("all digits set");
                        if ord[d].is_some_and(|prev| prev != rv) {
                            return Err(ConstructError::AlignmentConflict {
                                detail: format!("inconsistent member order in {rep_name}"),
                            });
                        }
                        ord[d] = Some(rv);
                    }
                }
                ClassLvs::Two(a, b) => {
                    let (ra, rb) = (forest.find(a), forest.find(b));
                    let d2 = forest.size[rb];
                    for (t, &rv) in slot.args.iter().enumerate() {
                        let idx = digits[&ra][t].expect("set") * d2 + digits[&rb][t].expect("set");
                        if ord[idx].is_some_and(|prev| prev != rv) {
                            return Err(ConstructError::AlignmentConflict {
                                detail: format!("inconsistent member order in {rep_name}"),
                            });
                        }
                        ord[idx] = Some(rv);
                    }
                }
            }
            let ord: Option<Vec<usize>> = ord.into_iter().collect();
            match ord {
                Some(ord) => class_ord[slot.class] = Some(ord),
                None => {
                    return Err(ConstructError::AlignmentConflict {
                        detail: format!(
                            "an argument class of {rep_name} is not fully indexed by its logvar"
                        ),
                    });
                }
            }
        }

        // Uniform re-check of every slot against the final orders, then the
        // member ↔ grounding bijection.
        for slot in &slots {
            let ord = class_ord[slot.class].as_ref().expect("fixed above");
            for (t, &rv) in slot.args.iter().enumerate() {
                let expected = match class_lvs[slot.class].expect("materialised") {
                    ClassLvs::One(n) => ord[digits[&forest.find(n)][t].expect("set")],
                    ClassLvs::Two(a, b) => {
                        let (ra, rb) = (forest.find(a), forest.find(b));
                        let d2 = forest.size[rb];
                        ord[digits[&ra][t].expect("set") * d2 + digits[&rb][t].expect("set")]
                    }
                };
                if expected != rv {
                    return Err(ConstructError::AlignmentConflict {
                        detail: format!(
                            "slot {} of class {rep_name} disagrees with the member order \
                             fixed elsewhere",
                            slot.idx
                        ),
                    });
                }
            }
        }
        let mut member_order: Vec<Option<String>> = vec![None; l];
        for (t, &m) in plan.members.iter().enumerate() {
            let mut flat = 0usize;
            for (&r, &s) in roots.iter().zip(&sizes) {
                flat = flat * s + digits[&r][t].expect("set");
            }
            if member_order[flat].is_some() {
                return Err(ConstructError::AlignmentConflict {
                    detail: format!(
                        "two members of class {rep_name} map to the same logvar assignment"
                    ),
                });
            }
            member_order[flat] = Some(rearranged[m].name().to_string());
        }
        plan.member_order = member_order
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .expect("bijection: l members into l cells without collision");
        plan_roots.push(roots);
    }

    // Logvar sharing discovered by a later class must not contradict the
    // structure an earlier class was built on.
    for (plan, roots) in plans.iter().zip(&plan_roots) {
        let finals: BTreeSet<usize> = roots.iter().map(|&r| forest.find(r)).collect();
        if finals.len() != roots.len() {
            return Err(ConstructError::AlignmentConflict {
                detail: format!(
                    "logvars of {} were identified after its members were aligned",
                    rearranged[plan.members[0]].name()
                ),
            });
        }
    }

    // ---- Phase 3: naming and assembly. ----------------------------------
    let mut root_names: BTreeMap<usize, String> = BTreeMap::new();
    let mut logvars: Vec<Logvar> = Vec::new();
    let name_root = |forest: &mut LvForest,
                         node: usize,
                         root_names: &mut BTreeMap<usize, String>,
                         logvars: &mut Vec<Logvar>|
     -> String {
        let root = forest.find(node);
        if let Some(name) = root_names.get(&root) {
            return name.clone();
        }
        let name = match root_names.len() {
            0 => "X".to_string(),
            1 => "Y".to_string(),
            2 => "Z".to_string(),
            n => format!("L{}", n + 1),
        };
        let stem = name.to_lowercase();
        let domain: Vec<String> = (1..=forest.size[root]).map(|i| format!("{stem}{i}")).collect();
        logvars.push(Logvar {
            name: name.clone(),
            domain,
        });
        root_names.insert(root, name.clone());
        name
    };

    let used_rv_names: BTreeSet<String> =
        fg.randvars().iter().map(|rv| rv.name.clone()).collect();
    let mut prv_names: Vec<String> = Vec::with_capacity(grouping.rv_classes.len());
    let mut prvs: Vec<Prv> = Vec::new();
    let mut rv_name_counter = 0usize;
    let mut taken = used_rv_names.clone();
    for (c, members) in rv_class_members.iter().enumerate() {
        let range = fg.randvars()[members[0]].range.clone();
        if members.len() == 1 {
            let name = fg.randvars()[members[0]].name.clone();
            prv_names.push(name.clone());
            prvs.push(Prv {
                name: name.clone(),
                range,
                logvars: vec![],
                members: vec![name],
            });
            continue;
        }
        let lv_names = match class_lvs[c] {
            Some(ClassLvs::One(n)) => vec![name_root(&mut forest, n, &mut root_names, &mut logvars)],
            Some(ClassLvs::Two(a, b)) => vec![
                name_root(&mut forest, a, &mut root_names, &mut logvars),
                name_root(&mut forest, b, &mut root_names, &mut logvars),
            ],
            // A multi-member class no factor touches: representable only
            // member by member, as parameterless graph nodes.
            None => {
                for &r in members {
                    let name = fg.randvars()[r].name.clone();
                    prvs.push(Prv {
                        name: name.clone(),
                        range: range.clone(),
                        logvars: vec![],
                        members: vec![name],
                    });
                }
                prv_names.push(String::new());
                continue;
            }
        };
        let ord = class_ord[c]
            .clone()
            .unwrap_or_else(|| members.clone());
        let name = fresh_name("R", &mut rv_name_counter, &taken);
        taken.insert(name.clone());
        prv_names.push(name.clone());
        prvs.push(Prv {
            name,
            range,
            logvars: lv_names,
            members: ord.iter().map(|&r| fg.randvars()[r].name.clone()).collect(),
        });
    }

    let used_factor_names: BTreeSet<String> =
        fg.factors().iter().map(|f| f.name().to_string()).collect();
    let mut parfactors: Vec<Parfactor> = Vec::new();
    let mut pf_name_counter = 0usize;
    let mut taken_pf = used_factor_names.clone();
    for plan in &plans {
        let name = if plan.members.len() == 1 {
            rearranged[plan.members[0]].name().to_string()
        } else {
            let n = fresh_name("g", &mut pf_name_counter, &taken_pf);
            taken_pf.insert(n.clone());
            n
        };
        let args: Vec<String> = plan
            .collapsed_classes
            .iter()
            .map(|&c| prv_names[c].clone())
            .collect();
        let crv = plan.crv_slot.map(|slot| {
            let c = plan.collapsed_classes[slot];
            let Some(ClassLvs::One(node)) = class_lvs[c] else {
                unreachable!("counted class was pinned to one logvar");
            };
            CrvSpec {
                arg_index: slot,
                counted_logvar: name_root(&mut forest, node, &mut root_names, &mut logvars),
            }
        });
        parfactors.push(Parfactor {
            name,
            args,
            crv,
            table: plan.table.clone(),
            members: plan.member_order.clone(),
        });
    }

    let stats = ConstructStats {
        rv_classes: grouping.rv_classes.len(),
        factor_classes: grouping.factor_classes.len(),
        crv_count: plans.iter().filter(|p| p.crv_slot.is_some()).count(),
        logvar_count: logvars.len(),
        rows_before: fg.factors().iter().map(|f| f.table().len()).sum(),
        rows_after: plans.iter().map(|p| p.table.len()).sum(),
    };

    let pfg = ParfactorGraph::new(logvars, prvs, parfactors, fg.evidence().clone()).map_err(
        |e| match e {
            PfgError::FragmentViolation { detail } => ConstructError::FragmentViolation { detail },
            other => ConstructError::Pfg(other),
        },
    )?;

    verify_reground(fg, &pfg)?;
    Ok((pfg, stats))
}

/// Canonical semantic key of a factor: arguments sorted by name with the
/// table axes permuted to match.
fn canonical_key(f: &Factor) -> (Vec<String>, Table) {
    let mut order: Vec<usize> = (0..f.args().len()).collect();
    order.sort_by(|&a, &b| f.args()[a].cmp(&f.args()[b]));
    let sorted = f.permuted(&order).expect("sorting permutation is valid");
    (sorted.args().to_vec(), sorted.table().clone())
}

/// Grounds the assembled graph and checks it against the input: same
/// randvars, same evidence, and the same multiset of factors as functions
/// of their (sorted) scopes.
fn verify_reground(fg: &FactorGraph, pfg: &ParfactorGraph) -> Result<(), ConstructError> {
    let ground = pfg.ground()?;

    let want: BTreeMap<&str, &crate::model::Range> = fg
        .randvars()
        .iter()
        .map(|rv| (rv.name.as_str(), &rv.range))
        .collect();
    let got: BTreeMap<&str, &crate::model::Range> = ground
        .randvars()
        .iter()
        .map(|rv| (rv.name.as_str(), &rv.range))
        .collect();
    if want != got {
        return Err(ConstructError::Unsound {
            detail: "grounding yields a different randvar set".into(),
        });
    }
    if fg.evidence() != ground.evidence() {
        return Err(ConstructError::Unsound {
            detail: "grounding yields different evidence".into(),
        });
    }

    let mut want_factors: BTreeMap<(Vec<String>, Table), usize> = BTreeMap::new();
    for f in fg.factors() {
        *want_factors.entry(canonical_key(f)).or_insert(0) += 1;
    }
    for f in ground.factors() {
        let key = canonical_key(f);
        match want_factors.get_mut(&key) {
            Some(n) if *n > 0 => *n -= 1,
            _ => {
                return Err(ConstructError::Unsound {
                    detail: format!("grounding yields an extra factor over {:?}", key.0),
                });
            }
        }
    }
    if want_factors.values().any(|&n| n > 0) {
        return Err(ConstructError::Unsound {
            detail: "grounding misses factors of the input".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colour::{run_acp, run_cp, AcpOptions};
    use crate::model::{build_table, RandVar, Range};
    use std::collections::BTreeMap as Map;

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

    /// Chain with a swapped end factor and a commutative middle factor:
    /// two PRVs sharing one logvar plus a counting argument.
    #[test]
    fn chain_collapses_to_counted_parfactor() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B"), boolean_rv("C"), boolean_rv("D")],
            vec![
                factor("phi1", &["A", "B"], &["1", "2", "3", "4"]),
                factor("phi2", &["B", "C"], &["5", "6", "6", "7"]),
                factor("phi3", &["C", "D"], &["1", "3", "2", "4"]),
            ],
            Map::new(),
        )
        .unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let (pfg, stats) = build_pfg(&fg, &grouping).unwrap();

        assert_eq!(stats.crv_count, 1);
        assert_eq!(stats.logvar_count, 1);
        assert_eq!(stats.rows_before, 12);
        // phi1/phi3 share one 4-row table; phi2 collapses to 3 histograms.
        assert_eq!(stats.rows_after, 7);

        let lv = &pfg.logvars()[0];
        assert_eq!(lv.name, "X");
        assert_eq!(lv.domain.len(), 2);

        // One two-member parfactor over (R1(X), R2(X)), one counted
        // singleton parfactor over #X[R2(X)] — matching the grouping
        // {A,D}, {B,C}, {phi1,phi3}, {phi2}.
        let g1 = pfg.parfactor("g1").expect("merged parfactor exists");
        assert_eq!(g1.members, vec!["phi1".to_string(), "phi3".to_string()]);
        assert!(g1.crv.is_none());
        let counted = pfg.parfactor("phi2").expect("singleton keeps its name");
        let crv = counted.crv.as_ref().expect("middle factor is counted");
        assert_eq!(crv.arg_index, 0);
        assert_eq!(crv.counted_logvar, "X");
        assert_eq!(counted.table.len(), 3);

        // R1 covers {A,D} (phi3 was rearranged to (D,C)); R2 covers {B,C}.
        let r1 = pfg.prv("R1").unwrap();
        assert_eq!(r1.members, vec!["A".to_string(), "D".to_string()]);
        let r2 = pfg.prv("R2").unwrap();
        assert_eq!(r2.members, vec!["B".to_string(), "C".to_string()]);
    }

    /// The two-entity employee graph: unary factors merge with a shared
    /// logvar, the ternary commutative factor becomes a counted singleton,
    /// and the salary factors share the same logvar as the unary ones.
    #[test]
    fn employee_graph_builds_three_parfactors() {
        let fg = employee_fg();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let (pfg, stats) = build_pfg(&fg, &grouping).unwrap();

        assert_eq!(stats.rv_classes, 3);
        assert_eq!(stats.factor_classes, 3);
        assert_eq!(stats.crv_count, 1);
        assert_eq!(stats.logvar_count, 1);

        let com = pfg.prv("R1").unwrap();
        assert_eq!(com.members, vec!["ComA".to_string(), "ComB".to_string()]);
        let sal = pfg.prv("R2").unwrap();
        assert_eq!(sal.members, vec!["SalA".to_string(), "SalB".to_string()]);
        assert_eq!(com.logvars, sal.logvars, "one shared logvar throughout");

        let counted = pfg.parfactor("f3").unwrap();
        assert_eq!(counted.crv.as_ref().unwrap().arg_index, 0);
        // Histograms over 2 Boolean instances × Rev: 3 · 2 rows.
        assert_eq!(counted.table.len(), 6);
    }

    fn employee_fg() -> FactorGraph {
        FactorGraph::new(
            vec![
                boolean_rv("ComA"),
                boolean_rv("ComB"),
                boolean_rv("Rev"),
                boolean_rv("SalA"),
                boolean_rv("SalB"),
            ],
            vec![
                factor("f1", &["ComA"], &["3", "5"]),
                factor("f2", &["ComB"], &["3", "5"]),
                // Commutative in (ComA, ComB): value depends on their count.
                factor(
                    "f3",
                    &["ComA", "ComB", "Rev"],
                    &["9", "2", "4", "5", "4", "5", "6", "7"],
                ),
                factor(
                    "f4",
                    &["ComA", "Rev", "SalA"],
                    &["1", "2", "3", "4", "5", "6", "7", "8"],
                ),
                factor(
                    "f5",
                    &["ComB", "Rev", "SalB"],
                    &["1", "2", "3", "4", "5", "6", "7", "8"],
                ),
            ],
            Map::new(),
        )
        .unwrap()
    }

    /// Four factors over a 2×2 grid of entities: the grid class takes two
    /// logvars, the row class one of them.
    #[test]
    fn grid_class_gets_two_logvars() {
        let vals: Vec<String> = (1..=8).map(|v| v.to_string()).collect();
        let vals: Vec<&str> = vals.iter().map(String::as_str).collect();
        let fg = FactorGraph::new(
            vec![
                boolean_rv("R"),
                boolean_rv("A1"),
                boolean_rv("A2"),
                boolean_rv("B11"),
                boolean_rv("B12"),
                boolean_rv("B21"),
                boolean_rv("B22"),
            ],
            vec![
                factor("f11", &["R", "A1", "B11"], &vals),
                factor("f12", &["R", "A1", "B12"], &vals),
                factor("f21", &["R", "A2", "B21"], &vals),
                factor("f22", &["R", "A2", "B22"], &vals),
            ],
            Map::new(),
        )
        .unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let (pfg, stats) = build_pfg(&fg, &grouping).unwrap();

        assert_eq!(stats.logvar_count, 2);
        let a = pfg.prv("R1").unwrap();
        assert_eq!(a.logvars.len(), 1);
        assert_eq!(a.members, vec!["A1".to_string(), "A2".to_string()]);
        let b = pfg.prv("R2").unwrap();
        assert_eq!(b.logvars.len(), 2);
        assert_eq!(
            b.members,
            vec![
                "B11".to_string(),
                "B12".to_string(),
                "B21".to_string(),
                "B22".to_string()
            ]
        );
        let g = pfg.parfactor("g1").unwrap();
        assert_eq!(
            g.members,
            vec![
                "f11".to_string(),
                "f12".to_string(),
                "f21".to_string(),
                "f22".to_string()
            ]
        );
    }

    /// Two factors over the same pair in swapped order with an asymmetric
    /// table: the pair is grouped by colour but no counting argument can
    /// realise it, and the failure is loud.
    #[test]
    fn swapped_asymmetric_pair_fails_loudly() {
        let fg = FactorGraph::new(
            vec![boolean_rv("V"), boolean_rv("W")],
            vec![
                factor("f", &["V", "W"], &["1", "2", "3", "4"]),
                factor("g", &["W", "V"], &["1", "2", "3", "4"]),
            ],
            Map::new(),
        )
        .unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let err = build_pfg(&fg, &grouping).unwrap_err();
        assert!(matches!(err, ConstructError::NotCommutative { .. }), "got {err:?}");
    }

    /// An eight-cycle looks locally like a product structure to colour
    /// refinement, but no logvar assignment realises it.
    #[test]
    fn eight_cycle_fails_loudly() {
        let asym = ["1", "2", "3", "4"];
        let mut factors = Vec::new();
        for i in 0..4 {
            factors.push(factor(
                &format!("f{i}"),
                &[&format!("A{i}"), &format!("B{i}")],
                &asym,
            ));
            factors.push(factor(
                &format!("h{i}"),
                &[&format!("A{}", (i + 1) % 4), &format!("B{i}")],
                &asym,
            ));
        }
        let rvs: Vec<RandVar> = (0..4)
            .flat_map(|i| vec![boolean_rv(&format!("A{i}")), boolean_rv(&format!("B{i}"))])
            .collect();
        let fg = FactorGraph::new(rvs, factors, Map::new()).unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        // One randvar class per side, one factor class of eight members:
        // structurally a cycle, not a product.
        let err = build_pfg(&fg, &grouping).unwrap_err();
        assert!(
            matches!(
                err,
                ConstructError::PremiseViolation { .. } | ConstructError::AlignmentConflict { .. }
            ),
            "got {err:?}"
        );
    }

    /// A 2×2 biclique, by contrast, is exactly a two-logvar product and
    /// must build (and reground) cleanly.
    #[test]
    fn biclique_builds_with_distinct_logvars() {
        let asym = ["1", "2", "3", "4"];
        let fg = FactorGraph::new(
            vec![
                boolean_rv("A0"),
                boolean_rv("A1"),
                boolean_rv("B0"),
                boolean_rv("B1"),
            ],
            vec![
                factor("f00", &["A0", "B0"], &asym),
                factor("f01", &["A0", "B1"], &asym),
                factor("f10", &["A1", "B0"], &asym),
                factor("f11", &["A1", "B1"], &asym),
            ],
            Map::new(),
        )
        .unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let (pfg, stats) = build_pfg(&fg, &grouping).unwrap();
        assert_eq!(stats.logvar_count, 2);
        assert_eq!(pfg.prv("R1").unwrap().logvars, vec!["X".to_string()]);
        assert_eq!(pfg.prv("R2").unwrap().logvars, vec!["Y".to_string()]);
    }

    /// Ungrouped (baseline) output on an asymmetric graph round-trips into
    /// a logvar-free graph mirroring the input.
    #[test]
    fn singleton_grouping_mirrors_input() {
        let fg = FactorGraph::new(
            vec![boolean_rv("A"), boolean_rv("B")],
            vec![factor("f", &["A", "B"], &["1", "2", "3", "4"])],
            Map::new(),
        )
        .unwrap();
        let grouping = run_cp(&fg);
        let (pfg, stats) = build_pfg(&fg, &grouping).unwrap();
        assert_eq!(stats.logvar_count, 0);
        assert_eq!(pfg.parfactors().len(), 1);
        assert_eq!(pfg.prvs().len(), 2);
        let ground = pfg.ground().unwrap();
        assert_eq!(ground.factors().len(), 1);
    }

    /// Evidence travels through construction and grounding unchanged.
    #[test]
    fn evidence_passes_through() {
        let mut evidence = Map::new();
        evidence.insert("Rev".to_string(), "true".to_string());
        let mut fg = employee_fg();
        fg = FactorGraph::new(
            fg.randvars().to_vec(),
            fg.factors().to_vec(),
            evidence.clone(),
        )
        .unwrap();
        let grouping = run_acp(&fg, &AcpOptions::default()).unwrap();
        let (pfg, _) = build_pfg(&fg, &grouping).unwrap();
        assert_eq!(pfg.evidence(), &evidence);
    }
}
