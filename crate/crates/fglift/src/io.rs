//! JSON file format for propositional and parametric factor graphs.
//!
//! A propositional file has top-level keys `randvars`, `factors`, and
//! `evidence`. A parametric file additionally has `logvars`; its randvar
//! entries carry `logvars` and `members`, and its factor entries may carry
//! `crv` and `members`. Counted argument positions serialize their value as
//! the histogram string `"[n1,...,nm]"`.
//!
//! Emission is canonical: pretty-printed, rows in range-lexicographic order
//! (last argument fastest), potentials as exact decimal strings (or `p/q`
//! when no finite decimal exists), evidence sorted by randvar name. Parsing
//! accepts rows in any order but requires totality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_table, Factor, FactorGraph, ModelError, RandVar, Range};
use crate::pfg::{CrvSpec, Logvar, Parfactor, ParfactorGraph, PfgError, Prv};
use crate::potential::{Potential, PotentialError};
use crate::table::{ArgSpace, Table};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pfg(#[from] PfgError),
    #[error("{0}")]
    Format(String),
    #[error("factor {factor:?}, row {row}: {source}")]
    BadPotential {
        factor: String,
        row: usize,
        source: PotentialError,
    },
}

#[derive(Serialize, Deserialize)]
struct LogvarDto {
    name: String,
    domain: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RandVarDto {
    name: String,
    range: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logvars: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RowDto {
    assignment: Vec<String>,
    potential: String,
}

#[derive(Serialize, Deserialize)]
struct CrvDto {
    arg_index: usize,
    counted_logvar: String,
}

#[derive(Serialize, Deserialize)]
struct FactorDto {
    name: String,
    args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crv: Option<CrvDto>,
    rows: Vec<RowDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct EvidenceDto {
    randvar: String,
    value: String,
}

#[derive(Serialize, Deserialize)]
struct GraphDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logvars: Option<Vec<LogvarDto>>,
    randvars: Vec<RandVarDto>,
    factors: Vec<FactorDto>,
    #[serde(default)]
    evidence: Vec<EvidenceDto>,
}

/// Either kind of model file, told apart by the top-level `logvars` key.
#[derive(Debug)]
pub enum Model {
    Fg(FactorGraph),
    Pfg(ParfactorGraph),
}

pub fn parse_model(text: &str) -> Result<Model, IoError> {
    let dto: GraphDto = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    if dto.logvars.is_some() {
        pfg_from_dto(dto).map(Model::Pfg)
    } else {
        fg_from_dto(dto).map(Model::Fg)
    }
}

pub fn parse_fg(text: &str) -> Result<FactorGraph, IoError> {
    match parse_model(text)? {
        Model::Fg(fg) => Ok(fg),
        Model::Pfg(_) => Err(IoError::Format(
            "expected a propositional factor graph, found a parametric one (has logvars)".into(),
        )),
    }
}

pub fn parse_pfg(text: &str) -> Result<ParfactorGraph, IoError> {
    match parse_model(text)? {
        Model::Pfg(pfg) => Ok(pfg),
        Model::Fg(_) => Err(IoError::Format(
            "expected a parametric factor graph, found a propositional one (no logvars)".into(),
        )),
    }
}

fn evidence_map(dto: Vec<EvidenceDto>) -> Result<BTreeMap<String, String>, IoError> {
    let mut map = BTreeMap::new();
    for e in dto {
        if let Some(first) = map.insert(e.randvar.clone(), e.value.clone()) {
            if first != e.value {
                return Err(IoError::Model(ModelError::ConflictingEvidence {
                    randvar: e.randvar,
                    first,
                    second: e.value,
                }));
            }
        }
    }
    Ok(map)
}

fn fg_from_dto(dto: GraphDto) -> Result<FactorGraph, IoError> {
    let mut randvars = Vec::with_capacity(dto.randvars.len());
    for rv in dto.randvars {
        if rv.logvars.is_some() || rv.members.is_some() {
            return Err(IoError::Format(format!(
                "randvar {:?} carries parametric fields but the file has no logvars",
                rv.name
            )));
        }
        randvars.push(RandVar {
            name: rv.name,
            range: Range::new(rv.range)?,
        });
    }
    let ranges: BTreeMap<&str, &Range> = randvars
        .iter()
        .map(|rv| (rv.name.as_str(), &rv.range))
        .collect();
    let mut factors = Vec::with_capacity(dto.factors.len());
    for f in dto.factors {
        if f.crv.is_some() || f.members.is_some() {
            return Err(IoError::Format(format!(
                "factor {:?} carries parametric fields but the file has no logvars",
                f.name
            )));
        }
        let arg_ranges: Vec<Range> = f
            .args
            .iter()
            .map(|a| {
                ranges
                    .get(a.as_str())
                    .map(|&r| r.clone())
                    .ok_or_else(|| ModelError::UnknownArg {
                        factor: f.name.clone(),
                        randvar: a.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        let rows: Vec<(Vec<String>, String)> = f
            .rows
            .into_iter()
            .map(|r| (r.assignment, r.potential))
            .collect();
        let table = build_table(&f.name, &arg_ranges, &rows)?;
        factors.push(Factor::new(f.name, f.args, &arg_ranges, table)?);
    }
    Ok(FactorGraph::new(randvars, factors, evidence_map(dto.evidence)?)?)
}

fn pfg_from_dto(dto: GraphDto) -> Result<ParfactorGraph, IoError> {
    let logvars: Vec<Logvar> = dto
        .logvars
        .expect("caller checked")
        .into_iter()
        .map(|lv| Logvar {
            name: lv.name,
            domain: lv.domain,
        })
        .collect();
    let lv_sizes: BTreeMap<&str, usize> = logvars
        .iter()
        .map(|lv| (lv.name.as_str(), lv.domain.len()))
        .collect();
    let mut prvs = Vec::with_capacity(dto.randvars.len());
    for rv in dto.randvars {
        let logvars = rv.logvars.unwrap_or_default();
        let members = rv.members.unwrap_or_else(|| vec![rv.name.clone()]);
        prvs.push(Prv {
            name: rv.name,
            range: Range::new(rv.range)?,
            logvars,
            members,
        });
    }
    let prv_by_name: BTreeMap<&str, &Prv> = prvs.iter().map(|p| (p.name.as_str(), p)).collect();
    let mut parfactors = Vec::with_capacity(dto.factors.len());
    for f in dto.factors {
        let crv = f.crv.map(|c| CrvSpec {
            arg_index: c.arg_index,
            counted_logvar: c.counted_logvar,
        });
        let spaces: Vec<ArgSpace> = f
            .args
            .iter()
            .enumerate()
            .map(|(pos, a)| {
                let prv = prv_by_name.get(a.as_str()).ok_or_else(|| PfgError::UnknownPrv {
                    parfactor: f.name.clone(),
                    prv: a.clone(),
                })?;
                match &crv {
                    Some(c) if c.arg_index == pos => {
                        let positions = *lv_sizes.get(c.counted_logvar.as_str()).ok_or_else(|| {
                            PfgError::UnknownLogvar {
                                owner: f.name.clone(),
                                logvar: c.counted_logvar.clone(),
                            }
                        })?;
                        Ok(ArgSpace::Histograms {
                            positions,
                            range: prv.range.clone(),
                        })
                    }
                    _ => Ok(ArgSpace::Labels(prv.range.clone())),
                }
            })
            .collect::<Result<_, PfgError>>()?;
        let table = table_from_rows(&f.name, &spaces, &f.rows)?;
        let members = f.members.unwrap_or_else(|| vec![f.name.clone()]);
        parfactors.push(Parfactor {
            name: f.name,
            args: f.args,
            crv,
            table,
            members,
        });
    }
    Ok(ParfactorGraph::new(
        logvars,
        prvs,
        parfactors,
        evidence_map(dto.evidence)?,
    )?)
}

/// Builds a table over arbitrary value spaces from unordered rows,
/// validating totality (every joint value exactly once).
fn table_from_rows(factor: &str, spaces: &[ArgSpace], rows: &[RowDto]) -> Result<Table, IoError> {
    let total: usize = spaces.iter().map(ArgSpace::size).product();
    let mut values: Vec<Option<Potential>> = vec![None; total];
    for (row_no, row) in rows.iter().enumerate() {
        if row.assignment.len() != spaces.len() {
            return Err(IoError::Format(format!(
                "factor {:?}: row {:?} has {} entries, expected {}",
                factor,
                row.assignment,
                row.assignment.len(),
                spaces.len()
            )));
        }
        let mut idx = 0usize;
        for (space, value) in spaces.iter().zip(&row.assignment) {
            let d = space.value_index(value).ok_or_else(|| {
                IoError::Format(format!(
                    "factor {:?}: value {:?} is not in the argument's value space",
                    factor, value
                ))
            })?;
            idx = idx * space.size() + d;
        }
        if values[idx].is_some() {
            return Err(IoError::Format(format!(
                "factor {:?}: row {:?} appears more than once",
                factor, row.assignment
            )));
        }
        let weight = Potential::parse(&row.potential).map_err(|source| IoError::BadPotential {
            factor: factor.to_string(),
            row: row_no,
            source,
        })?;
        values[idx] = Some(weight);
    }
    let mut out = Vec::with_capacity(total);
    for (idx, slot) in values.into_iter().enumerate() {
        match slot {
            Some(v) => out.push(v),
            None => {
                return Err(IoError::Format(format!(
                    "factor {factor:?}: missing row for joint value #{idx}"
                )))
            }
        }
    }
    Table::new(spaces.to_vec(), out).map_err(|e| IoError::Format(format!("factor {factor:?}: {e}")))
}

fn rows_to_dto(table: &Table) -> Vec<RowDto> {
    table
        .rows()
        .map(|(digits, value)| RowDto {
            assignment: digits
                .iter()
                .zip(table.spaces())
                .map(|(&d, space)| space.value_string(d))
                .collect(),
            potential: value.decimal_string(),
        })
        .collect()
}

fn evidence_to_dto(evidence: &BTreeMap<String, String>) -> Vec<EvidenceDto> {
    evidence
        .iter()
        .map(|(randvar, value)| EvidenceDto {
            randvar: randvar.clone(),
            value: value.clone(),
        })
        .collect()
}

/// Canonical emission of a propositional graph.
pub fn fg_to_string(fg: &FactorGraph) -> String {
    let dto = GraphDto {
        logvars: None,
        randvars: fg
            .randvars()
            .iter()
            .map(|rv| RandVarDto {
                name: rv.name.clone(),
                range: rv.range.labels().to_vec(),
                logvars: None,
                members: None,
            })
            .collect(),
        factors: fg
            .factors()
            .iter()
            .map(|f| FactorDto {
                name: f.name().to_string(),
                args: f.args().to_vec(),
                crv: None,
                rows: rows_to_dto(f.table()),
                members: None,
            })
            .collect(),
        evidence: evidence_to_dto(fg.evidence()),
    };
    let mut text = serde_json::to_string_pretty(&dto).expect("serializable");
    text.push('\n');
    text
}

/// Canonical emission of a parametric graph. Every randvar entry carries
/// explicit `logvars` and `members` so the grounding correspondence is
/// complete in the file.
pub fn pfg_to_string(pfg: &ParfactorGraph) -> String {
    let dto = GraphDto {
        logvars: Some(
            pfg.logvars()
                .iter()
                .map(|lv| LogvarDto {
                    name: lv.name.clone(),
                    domain: lv.domain.clone(),
                })
                .collect(),
        ),
        randvars: pfg
            .prvs()
            .iter()
            .map(|prv| RandVarDto {
                name: prv.name.clone(),
                range: prv.range.labels().to_vec(),
                logvars: Some(prv.logvars.clone()),
                members: Some(prv.members.clone()),
            })
            .collect(),
        factors: pfg
            .parfactors()
            .iter()
            .map(|pf| FactorDto {
                name: pf.name.clone(),
                args: pf.args.clone(),
                crv: pf.crv.as_ref().map(|c| CrvDto {
                    arg_index: c.arg_index,
                    counted_logvar: c.counted_logvar.clone(),
                }),
                rows: rows_to_dto(&pf.table),
                members: Some(pf.members.clone()),
            })
            .collect(),
        evidence: evidence_to_dto(pfg.evidence()),
    };
    let mut text = serde_json::to_string_pretty(&dto).expect("serializable");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL_FG: &str = r#"{
  "randvars": [
    { "name": "A", "range": ["true", "false"] },
    { "name": "B", "range": ["true", "false"] }
  ],
  "factors": [
    {
      "name": "f",
      "args": ["A", "B"],
      "rows": [
        { "assignment": ["false", "false"], "potential": "3" },
        { "assignment": ["true", "true"], "potential": "1" },
        { "assignment": ["true", "false"], "potential": "2" },
        { "assignment": ["false", "true"], "potential": "2" }
      ]
    }
  ],
  "evidence": [ { "randvar": "B", "value": "true" } ]
}"#;

    #[test]
    fn fg_roundtrip_is_canonical_and_stable() {
        let fg = parse_fg(SMALL_FG).unwrap();
        assert_eq!(fg.evidence().get("B").map(String::as_str), Some("true"));
        let emitted = fg_to_string(&fg);
        // Canonical emission is a fixpoint: parse(emit(g)) emits identically.
        let again = fg_to_string(&parse_fg(&emitted).unwrap());
        assert_eq!(emitted, again);
        // Rows come out in range-lexicographic order regardless of input
        // order: the true,true row (potential 1) precedes false,false (3).
        let tt = emitted.find("\"potential\": \"1\"").unwrap();
        let ff = emitted.find("\"potential\": \"3\"").unwrap();
        assert!(tt < ff, "true,true row must precede false,false row");
    }

    #[test]
    fn pfg_roundtrip_preserves_crv_rows() {
        let text = r#"{
  "logvars": [ { "name": "X", "domain": ["x1", "x2"] } ],
  "randvars": [
    { "name": "R", "range": ["true", "false"], "logvars": ["X"], "members": ["R1", "R2"] }
  ],
  "factors": [
    {
      "name": "g",
      "args": ["R"],
      "crv": { "arg_index": 0, "counted_logvar": "X" },
      "rows": [
        { "assignment": ["[2,0]"], "potential": "1" },
        { "assignment": ["[1,1]"], "potential": "2" },
        { "assignment": ["[0,2]"], "potential": "3" }
      ],
      "members": ["f"]
    }
  ],
  "evidence": []
}"#;
        let pfg = parse_pfg(text).unwrap();
        let emitted = pfg_to_string(&pfg);
        assert!(emitted.contains("[2,0]"));
        let again = pfg_to_string(&parse_pfg(&emitted).unwrap());
        assert_eq!(emitted, again);
        // Grounding the parsed graph works end to end.
        let fg = pfg.ground().unwrap();
        assert_eq!(fg.randvars().len(), 2);
    }

    #[test]
    fn mixed_fields_are_rejected() {
        let text = r#"{
  "randvars": [ { "name": "A", "range": ["true", "false"], "logvars": [] } ],
  "factors": [],
  "evidence": []
}"#;
        assert!(parse_model(text).is_err());
    }

    #[test]
    fn missing_rows_are_rejected() {
        let text = r#"{
  "randvars": [ { "name": "A", "range": ["true", "false"] } ],
  "factors": [
    { "name": "f", "args": ["A"], "rows": [ { "assignment": ["true"], "potential": "1" } ] }
  ],
  "evidence": []
}"#;
        let err = parse_model(text).unwrap_err();
        assert!(matches!(err, IoError::Model(ModelError::MissingRow { .. })));
    }
}
