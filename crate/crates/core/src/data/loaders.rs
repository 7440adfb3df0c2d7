//! Loaders for the UCI Adult Income and Drug Consumption files.
//!
//! The column subsets and encodings below are this crate's own choices, made
//! so that the example causal graphs can reference short, numeric columns.
//! They are not a canonical preprocessing of either dataset.

use std::path::Path;

use super::{load_csv, CsvOptions, DataError, Dataset, EncodingTable};

/// Raw column order of `adult.data` / `adult.test` (no header row).
pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education_num",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
    "native_country",
    "income",
];

/// Columns kept by [`load_adult`].
pub const ADULT_KEPT: [&str; 7] = [
    "age",
    "education_num",
    "married",
    "sex",
    "hours_per_week",
    "capital_gain",
    "income",
];

/// Example encoding table for the kept categorical Adult columns.
pub fn adult_encodings() -> EncodingTable {
    let mut t = EncodingTable::default();
    t.insert("sex", "Male", 1.0);
    t.insert("sex", "Female", 0.0);
    for status in [
        "Married-civ-spouse",
        "Married-AF-spouse",
        "Married-spouse-absent",
    ] {
        t.insert("married", status, 1.0);
    }
    for status in ["Never-married", "Divorced", "Separated", "Widowed"] {
        t.insert("married", status, 0.0);
    }
    // adult.test writes labels with a trailing period
    for (raw, v) in [(">50K", 1.0), (">50K.", 1.0), ("<=50K", 0.0), ("<=50K.", 0.0)] {
        t.insert("income", raw, v);
    }
    t
}

pub fn adult_options() -> CsvOptions {
    let mut names: Vec<String> = ADULT_COLUMNS.iter().map(|s| s.to_string()).collect();
    names[5] = "married".to_string();
    CsvOptions {
        has_header: false,
        column_names: Some(names),
        select: Some(ADULT_KEPT.iter().map(|s| s.to_string()).collect()),
        encodings: adult_encodings(),
        // the test split starts with a "|1x3 Cross validator" line
        comment: Some(b'|'),
        ..CsvOptions::default()
    }
}

pub fn load_adult(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_csv(path, &adult_options())
}

/// Raw column order of `drug_consumption.data` (no header row).
pub const DRUG_COLUMNS: [&str; 32] = [
    "id", "age", "gender", "education", "country", "ethnicity", "nscore", "escore", "oscore",
    "ascore", "cscore", "impulsive", "ss", "alcohol", "amphet", "amyl", "benzos", "caff",
    "cannabis", "choc", "coke", "crack", "ecstasy", "heroin", "ketamine", "legalh", "lsd",
    "meth", "mushrooms", "nicotine", "semer", "vsa",
];

/// Columns kept by [`load_drug`]; `cannabis` is the binarized outcome.
pub const DRUG_KEPT: [&str; 9] = [
    "age",
    "gender",
    "education",
    "nscore",
    "escore",
    "oscore",
    "cscore",
    "impulsive",
    "cannabis",
];

/// Usage classes CL0 (never) and CL1 (over a decade ago) count as non-use.
pub fn drug_encodings(outcome: &str) -> EncodingTable {
    let mut t = EncodingTable::default();
    for (i, class) in ["CL0", "CL1", "CL2", "CL3", "CL4", "CL5", "CL6"].iter().enumerate() {
        t.insert(outcome, class, if i >= 2 { 1.0 } else { 0.0 });
    }
    t
}

pub fn drug_options(outcome: &str) -> CsvOptions {
    let mut select: Vec<String> = DRUG_KEPT[..DRUG_KEPT.len() - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    select.push(outcome.to_string());
    CsvOptions {
        has_header: false,
        column_names: Some(DRUG_COLUMNS.iter().map(|s| s.to_string()).collect()),
        select: Some(select),
        encodings: drug_encodings(outcome),
        ..CsvOptions::default()
    }
}

pub fn load_drug(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_csv(path, &drug_options("cannabis"))
}
