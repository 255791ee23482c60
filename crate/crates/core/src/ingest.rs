//! Tabular lab data to RDF: CSV loading, mean imputation, label encoding
//! and one `MedicalRecord` subject per patient row.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::store::{rdf_type, Graph, Iri, Literal, StoreError, Triple};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: column {column}: {reason} ({value:?})")]
    BadCell {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },
    #[error("column {0} has no observed values to impute from")]
    AllMissing(String),
    #[error("unknown {field} label {value:?}")]
    UnknownLabel { field: &'static str, value: String },
    #[error("record {row_id}: {lab} is missing (impute before encoding)")]
    MissingLab { row_id: u32, lab: Lab },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// The ten laboratory measurements of the HCV panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Lab {
    Alb,
    Alp,
    Alt,
    Ast,
    Bil,
    Che,
    Chol,
    Crea,
    Ggt,
    Prot,
}

impl Lab {
    pub const ALL: [Lab; 10] = [
        Lab::Alb,
        Lab::Alp,
        Lab::Alt,
        Lab::Ast,
        Lab::Bil,
        Lab::Che,
        Lab::Chol,
        Lab::Crea,
        Lab::Ggt,
        Lab::Prot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lab::Alb => "ALB",
            Lab::Alp => "ALP",
            Lab::Alt => "ALT",
            Lab::Ast => "AST",
            Lab::Bil => "BIL",
            Lab::Che => "CHE",
            Lab::Chol => "CHOL",
            Lab::Crea => "CREA",
            Lab::Ggt => "GGT",
            Lab::Prot => "PROT",
        }
    }

    pub fn from_name(name: &str) -> Option<Lab> {
        Lab::ALL
            .into_iter()
            .find(|lab| lab.name().eq_ignore_ascii_case(name.trim()))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Lab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complete lab panel. Serializes as `{"ALB": 38.5, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LabValues([f64; 10]);

impl LabValues {
    pub fn new(values: [f64; 10]) -> Self {
        LabValues(values)
    }

    pub fn get(&self, lab: Lab) -> f64 {
        self.0[lab.index()]
    }

    pub fn set(&mut self, lab: Lab, value: f64) {
        self.0[lab.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Lab, f64)> + '_ {
        Lab::ALL.into_iter().map(|lab| (lab, self.get(lab)))
    }
}

impl Serialize for LabValues {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, f64> = self.iter().map(|(lab, v)| (lab.name(), v)).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabValues {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut values = [f64::NAN; 10];
        for (key, value) in map {
            let lab = Lab::from_name(&key)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown lab {key:?}")))?;
            values[lab.index()] = value;
        }
        if let Some(lab) = Lab::ALL.into_iter().find(|l| values[l.index()].is_nan()) {
            return Err(serde::de::Error::custom(format!("missing lab {lab}")));
        }
        Ok(LabValues(values))
    }
}

/// Diagnostic category after encoding (0 = healthy blood donor ... 4 = cirrhosis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    BloodDonor = 0,
    SuspectDonor = 1,
    Hepatitis = 2,
    Fibrosis = 3,
    Cirrhosis = 4,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::BloodDonor,
        Category::SuspectDonor,
        Category::Hepatitis,
        Category::Fibrosis,
        Category::Cirrhosis,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Category> {
        Category::ALL.get(code).copied()
    }

    /// Maps the source labels ("0=Blood Donor", "0s=suspect Blood Donor",
    /// "1=Hepatitis", ...) by their leading code, case-insensitively.
    pub fn from_label(raw: &str) -> Option<Category> {
        let token = raw
            .trim()
            .split(|c: char| c == '=' || c.is_whitespace())
            .next()
            .unwrap_or_default()
            .to_ascii_lowercase();
        match token.as_str() {
            "0" => Some(Category::BloodDonor),
            "0s" => Some(Category::SuspectDonor),
            "1" => Some(Category::Hepatitis),
            "2" => Some(Category::Fibrosis),
            "3" => Some(Category::Cirrhosis),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female = 0,
    Male = 1,
}

impl Sex {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_label(raw: &str) -> Option<Sex> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "f" => Some(Sex::Female),
            "m" => Some(Sex::Male),
            _ => None,
        }
    }

    pub fn from_code(code: u8) -> Option<Sex> {
        match code {
            0 => Some(Sex::Female),
            1 => Some(Sex::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub row_id: u32,
    pub category_raw: String,
    pub age: u32,
    pub sex_raw: String,
    pub labs: [Option<f64>; 10],
}

impl RawRecord {
    pub fn lab(&self, lab: Lab) -> Option<f64> {
        self.labs[lab.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord {
    pub uid: Iri,
    pub row_id: u32,
    pub category: Category,
    pub sex: Sex,
    pub age: u32,
    pub labs: LabValues,
}

const ID_HEADERS: [&str; 5] = ["", "x", "id", "sno", "x/id"];

fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

/// Header-keyed CSV parsing. Empty (or `NA`) lab cells become missing.
pub fn load_csv(text: &str) -> Result<Vec<RawRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let id_col = headers
        .iter()
        .position(|h| ID_HEADERS.contains(&h.trim().to_ascii_lowercase().as_str()))
        .ok_or_else(|| IngestError::MissingColumn("ID".to_string()))?;
    let category_col = find("Category")?;
    let age_col = find("Age")?;
    let sex_col = find("Sex")?;
    let mut lab_cols = [0usize; 10];
    for lab in Lab::ALL {
        lab_cols[lab.index()] = find(lab.name())?;
    }

    let mut out = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| IngestError::Csv(e.to_string()))?;
        let row = record
            .position()
            .map_or(out.len() + 2, |p| p.line() as usize);
        let cell = |col: usize| record.get(col).unwrap_or("");
        let bad = |column: &str, value: &str, reason: &str| IngestError::BadCell {
            row,
            column: column.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };

        let id_raw = cell(id_col).trim();
        let row_id = id_raw
            .parse::<u32>()
            .map_err(|_| bad("ID", id_raw, "not a non-negative integer"))?;
        let age_raw = cell(age_col).trim();
        let age = age_raw
            .parse::<u32>()
            .ok()
            .or_else(|| {
                age_raw
                    .parse::<f64>()
                    .ok()
                    .filter(|a| a.fract() == 0.0 && *a >= 0.0 && *a <= u32::MAX as f64)
                    .map(|a| a as u32)
            })
            .ok_or_else(|| bad("Age", age_raw, "not a whole number of years"))?;
        let category_raw = cell(category_col).trim().to_string();
        if category_raw.is_empty() {
            return Err(bad("Category", "", "required"));
        }
        let sex_raw = cell(sex_col).trim().to_string();
        if sex_raw.is_empty() {
            return Err(bad("Sex", "", "required"));
        }
        let mut labs = [None; 10];
        for lab in Lab::ALL {
            let raw = cell(lab_cols[lab.index()]);
            if is_missing(raw) {
                continue;
            }
            let value = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(lab.name(), raw, "not a number"))?;
            labs[lab.index()] = Some(value);
        }
        out.push(RawRecord {
            row_id,
            category_raw,
            age,
            sex_raw,
            labs,
        });
    }
    Ok(out)
}

/// Replaces each missing lab value with the mean of the observed values in
/// its column.
pub fn impute_means(records: &[RawRecord]) -> Result<Vec<RawRecord>, IngestError> {
    let mut out = records.to_vec();
    for lab in Lab::ALL {
        let observed: Vec<f64> = records.iter().filter_map(|r| r.lab(lab)).collect();
        if observed.len() == records.len() {
            continue;
        }
        if observed.is_empty() {
            return Err(IngestError::AllMissing(lab.name().to_string()));
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        for record in &mut out {
            record.labs[lab.index()].get_or_insert(mean);
        }
    }
    Ok(out)
}

/// `<base>uid/<row_id>`
pub fn record_uid(base: &str, row_id: u32) -> Result<Iri, IngestError> {
    Ok(Iri::new(format!("{base}uid/{row_id}"))?)
}

pub fn encode(record: &RawRecord, base: &str) -> Result<EncodedRecord, IngestError> {
    let category =
        Category::from_label(&record.category_raw).ok_or_else(|| IngestError::UnknownLabel {
            field: "category",
            value: record.category_raw.clone(),
        })?;
    let sex = Sex::from_label(&record.sex_raw).ok_or_else(|| IngestError::UnknownLabel {
        field: "sex",
        value: record.sex_raw.clone(),
    })?;
    let mut labs = LabValues::default();
    for lab in Lab::ALL {
        let value = record.lab(lab).ok_or(IngestError::MissingLab {
            row_id: record.row_id,
            lab,
        })?;
        labs.set(lab, value);
    }
    Ok(EncodedRecord {
        uid: record_uid(base, record.row_id)?,
        row_id: record.row_id,
        category,
        sex,
        age: record.age,
        labs,
    })
}

/// Predicate IRIs of the record vocabulary under namespace `ns`.
pub struct RecordVocab {
    pub medical_record: Iri,
    pub sno: Iri,
    pub age: Iri,
    pub sex: Iri,
    pub category: Iri,
    pub labs: [Iri; 10],
}

impl RecordVocab {
    pub fn new(ns: &str) -> Result<Self, IngestError> {
        let term = |local: &str| Iri::new(format!("{ns}{local}"));
        let mut labs = Vec::with_capacity(10);
        for lab in Lab::ALL {
            labs.push(term(lab.name())?);
        }
        Ok(RecordVocab {
            medical_record: term("MedicalRecord")?,
            sno: term("SNo")?,
            age: term("Age")?,
            sex: term("Sex")?,
            category: term("Category")?,
            labs: labs.try_into().expect("ten labs"),
        })
    }
}

/// Fifteen triples per record: the `MedicalRecord` type, four integer
/// attributes and ten float lab values.
pub fn records_to_graph(records: &[EncodedRecord], ns: &str) -> Result<Graph, IngestError> {
    let vocab = RecordVocab::new(ns)?;
    let rdf_type = rdf_type();
    let mut graph = Graph::new();
    for r in records {
        let s = &r.uid;
        graph.insert(Triple::new(
            s.clone(),
            rdf_type.clone(),
            vocab.medical_record.clone(),
        ));
        graph.insert(Triple::new(
            s.clone(),
            vocab.sno.clone(),
            Literal::integer(r.row_id.into()),
        ));
        graph.insert(Triple::new(
            s.clone(),
            vocab.age.clone(),
            Literal::integer(r.age.into()),
        ));
        graph.insert(Triple::new(
            s.clone(),
            vocab.sex.clone(),
            Literal::integer(r.sex.code().into()),
        ));
        graph.insert(Triple::new(
            s.clone(),
            vocab.category.clone(),
            Literal::integer(r.category.code() as i64),
        ));
        for (lab, value) in r.labs.iter() {
            graph.insert(Triple::new(
                s.clone(),
                vocab.labs[lab.index()].clone(),
                Literal::float(value),
            ));
        }
    }
    Ok(graph)
}

/// The whole pipeline: load, impute, encode.
pub fn encode_csv(text: &str, base: &str) -> Result<Vec<EncodedRecord>, IngestError> {
    let raw = impute_means(&load_csv(text)?)?;
    raw.iter().map(|r| encode(r, base)).collect()
}
