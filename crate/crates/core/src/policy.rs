//! Department records and grade-based disclosure.
//!
//! A department keeps, per subject, the full list of obtainable information
//! and a policy entry per personnel: the personnel's grade and the contiguous
//! span of the list that may be shared with them. The span is configuration;
//! the grade is kept alongside it for audit.
//!
//! Department DB file (JSON, one record or an array of records):
//!
//! ```json
//! [{"department": "IB", "subject": "IB-S1", "obtainable": [23, 37, 39],
//!   "personnel": {"SP1": {"grade": 1, "span": [1, 2], "mapping": ["+", "*", "-", "/"]}}}]
//! ```
//!
//! `span` is `[start, len]` with a 0-based start. `subject` defaults to the
//! empty string.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::codec::IntList;
use crate::mapping::{MappingRegistry, MappingSpec, Op};
use crate::party::PartyId;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("personnel {personnel} has no policy at department {department}")]
    UnknownPersonnel { personnel: PartyId, department: PartyId },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> PolicyError {
    PolicyError::Schema { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub grade: u32,
    pub span_start: usize,
    pub span_len: usize,
    pub mapping: MappingSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepartmentRecord {
    pub department: PartyId,
    pub subject: String,
    pub obtainable: IntList,
    pub personnel_policies: BTreeMap<PartyId, PolicyEntry>,
}

impl DepartmentRecord {
    pub fn policy(&self, personnel: &PartyId) -> Result<&PolicyEntry, PolicyError> {
        self.personnel_policies.get(personnel).ok_or_else(|| PolicyError::UnknownPersonnel {
            personnel: personnel.clone(),
            department: self.department.clone(),
        })
    }

    pub fn lookup_grade(&self, personnel: &PartyId) -> Result<u32, PolicyError> {
        self.policy(personnel).map(|p| p.grade)
    }

    /// The slice of obtainable information this personnel may see.
    pub fn filter_shared(&self, personnel: &PartyId) -> Result<IntList, PolicyError> {
        let p = self.policy(personnel)?;
        Ok(IntList(self.obtainable.0[p.span_start..p.span_start + p.span_len].to_vec()))
    }
}

/// All department records known to one deployment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DepartmentDb {
    records: Vec<DepartmentRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    department: PartyId,
    #[serde(default)]
    subject: String,
    obtainable: Vec<i64>,
    personnel: BTreeMap<PartyId, RawPolicy>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    grade: u32,
    span: [usize; 2],
    mapping: Vec<Op>,
}

impl DepartmentDb {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| schema(path.display().to_string(), e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, PolicyError> {
        if text.trim().is_empty() {
            return Err(schema("$", "file is empty"));
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        let raws = match value {
            serde_json::Value::Array(items) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| parse_record(v, &format!("$[{i}]")))
                .collect::<Result<Vec<_>, _>>()?,
            v @ serde_json::Value::Object(_) => vec![parse_record(v, "$")?],
            _ => return Err(schema("$", "expected a record object or an array of records")),
        };
        if raws.is_empty() {
            return Err(schema("$", "no department records"));
        }
        Self::validate(raws)
    }

    fn validate(raws: Vec<(String, RawRecord)>) -> Result<Self, PolicyError> {
        let mut seen = BTreeSet::new();
        let mut pair_mapping: BTreeMap<(PartyId, PartyId), (Vec<Op>, String)> = BTreeMap::new();
        let mut records = Vec::with_capacity(raws.len());
        for (base, raw) in raws {
            if !seen.insert((raw.department.clone(), raw.subject.clone())) {
                return Err(schema(
                    format!("{base}.subject"),
                    format!("duplicate record for ({}, {:?})", raw.department, raw.subject),
                ));
            }
            let mut policies = BTreeMap::new();
            for (personnel, p) in raw.personnel {
                let at = format!("{base}.personnel.{personnel}");
                if p.grade < 1 {
                    return Err(schema(format!("{at}.grade"), "grade must be at least 1"));
                }
                let [start, len] = p.span;
                if start.checked_add(len).is_none_or(|end| end > raw.obtainable.len()) {
                    return Err(schema(
                        format!("{at}.span"),
                        format!(
                            "span [{start}, {len}] exceeds {} obtainable items",
                            raw.obtainable.len()
                        ),
                    ));
                }
                let key = (personnel.clone(), raw.department.clone());
                match pair_mapping.get(&key) {
                    Some((ops, first)) if *ops != p.mapping => {
                        return Err(schema(
                            format!("{at}.mapping"),
                            format!("differs from the mapping for the same pair at {first}"),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        pair_mapping.insert(key, (p.mapping.clone(), format!("{at}.mapping")));
                    }
                }
                let mapping = MappingSpec::new(personnel.clone(), raw.department.clone(), p.mapping);
                policies.insert(
                    personnel,
                    PolicyEntry { grade: p.grade, span_start: start, span_len: len, mapping },
                );
            }
            records.push(DepartmentRecord {
                department: raw.department,
                subject: raw.subject,
                obtainable: IntList(raw.obtainable),
                personnel_policies: policies,
            });
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[DepartmentRecord] {
        &self.records
    }

    pub fn departments(&self) -> BTreeSet<PartyId> {
        self.records.iter().map(|r| r.department.clone()).collect()
    }

    pub fn personnel(&self) -> BTreeSet<PartyId> {
        self.records.iter().flat_map(|r| r.personnel_policies.keys().cloned()).collect()
    }

    pub fn policy_count(&self) -> usize {
        self.records.iter().map(|r| r.personnel_policies.len()).sum()
    }

    pub fn record(&self, department: &PartyId, subject: &str) -> Option<&DepartmentRecord> {
        self.records.iter().find(|r| r.department == *department && r.subject == subject)
    }

    /// First subject at `department` that has a policy for `personnel`.
    pub fn subject_for(&self, personnel: &PartyId, department: &PartyId) -> Option<&str> {
        self.records
            .iter()
            .find(|r| r.department == *department && r.personnel_policies.contains_key(personnel))
            .map(|r| r.subject.as_str())
    }

    /// Every (personnel, department) mapping spec in the DB.
    pub fn mapping_registry(&self) -> MappingRegistry {
        let reg = MappingRegistry::new();
        for p in self.records.iter().flat_map(|r| r.personnel_policies.values()) {
            reg.insert(p.mapping.clone());
        }
        reg
    }

    /// Records belonging to one department.
    pub fn for_department(&self, department: &PartyId) -> DepartmentDb {
        DepartmentDb {
            records: self.records.iter().filter(|r| r.department == *department).cloned().collect(),
        }
    }
}

fn parse_record(value: serde_json::Value, base: &str) -> Result<(String, RawRecord), PolicyError> {
    let raw: RawRecord = serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { base.to_string() } else { format!("{base}.{inner}") };
        schema(path, e.into_inner().to_string())
    })?;
    Ok((base.to_string(), raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> PartyId {
        PartyId::new(s).unwrap()
    }

    const ONE: &str = r#"{"department":"IB","obtainable":[23,37,39,43,38,37,24,38,35,29,40,31,33],
        "personnel":{"SP1":{"grade":1,"span":[5,7],"mapping":["+","*","-","/"]},
                     "SP2":{"grade":2,"span":[0,0],"mapping":["-"]}}}"#;

    #[test]
    fn single_record_file() {
        let db = DepartmentDb::from_json_str(ONE).unwrap();
        let rec = db.record(&id("IB"), "").unwrap();
        assert_eq!(rec.lookup_grade(&id("SP1")).unwrap(), 1);
        assert_eq!(rec.filter_shared(&id("SP1")).unwrap(), IntList::from([37, 24, 38, 35, 29, 40, 31]));
        assert!(rec.filter_shared(&id("SP2")).unwrap().is_empty());
        assert!(matches!(rec.lookup_grade(&id("SP9")), Err(PolicyError::UnknownPersonnel { .. })));
        assert_eq!(db.subject_for(&id("SP1"), &id("IB")), Some(""));
        assert_eq!(db.mapping_registry().len(), 2);
    }

    #[test]
    fn span_past_end_is_rejected_with_path() {
        let text = ONE.replace("[5,7]", "[10,7]");
        match DepartmentDb::from_json_str(&text) {
            Err(PolicyError::Schema { path, .. }) => assert_eq!(path, "$.personnel.SP1.span"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_malformed_files() {
        assert!(matches!(DepartmentDb::from_json_str(""), Err(PolicyError::Schema { .. })));
        assert!(matches!(DepartmentDb::from_json_str("[]"), Err(PolicyError::Schema { .. })));
        assert!(matches!(DepartmentDb::from_json_str("7"), Err(PolicyError::Schema { .. })));
        let bad_op = ONE.replace(r#""/"]"#, r#""^"]"#);
        match DepartmentDb::from_json_str(&format!("[{bad_op}]")) {
            Err(PolicyError::Schema { path, .. }) => assert!(path.starts_with("$[0].personnel.SP1.mapping"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
        let zero_grade = ONE.replace(r#""grade":2"#, r#""grade":0"#);
        assert!(DepartmentDb::from_json_str(&zero_grade).is_err());
    }

    #[test]
    fn duplicate_and_conflicting_records() {
        assert!(DepartmentDb::from_json_str(&format!("[{ONE},{ONE}]")).is_err());
        let other_subject = ONE.replacen(r#""department":"IB""#, r#""department":"IB","subject":"b""#, 1);
        assert!(DepartmentDb::from_json_str(&format!("[{ONE},{other_subject}]")).is_ok());
        let conflicting = other_subject.replace(r#"["-"]"#, r#"["+"]"#);
        assert!(DepartmentDb::from_json_str(&format!("[{ONE},{conflicting}]")).is_err());
    }

    #[test]
    fn reads_are_pure() {
        let db = DepartmentDb::from_json_str(ONE).unwrap();
        let rec = &db.records()[0];
        let a = rec.filter_shared(&id("SP1")).unwrap();
        for _ in 0..5 {
            assert_eq!(rec.filter_shared(&id("SP1")).unwrap(), a);
            assert_eq!(rec.lookup_grade(&id("SP1")).unwrap(), 1);
        }
    }
}
