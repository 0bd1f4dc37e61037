//! Design-matrix construction for the linear probability models.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use crate::domain::{BirthRecord, Education, Marital};
use crate::error::{Error, Result};
use crate::ingest::{BirthTable, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controls {
    #[default]
    None,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop rows missing any control.
    #[default]
    ListwiseDrop,
    /// Zero-fill missing values and add a `missing:<var>` indicator column.
    MissingIndicator,
}

/// Which regressors enter an LPM.
///
/// The full control set uses these reference categories: mother and father
/// education `none`, marital status `married`, and the first country code
/// (in sort order) present in the estimation rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    pub controls: Controls,
    pub missing: MissingPolicy,
}

impl ModelSpec {
    pub fn none() -> Self {
        ModelSpec::default()
    }

    pub fn full() -> Self {
        ModelSpec {
            controls: Controls::Full,
            missing: MissingPolicy::ListwiseDrop,
        }
    }
}

/// Encoded regression inputs.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub clusters: Vec<u32>,
    pub names: Vec<String>,
    /// Sample row positions retained after the missingness policy.
    pub kept_rows: Vec<usize>,
    pub dropped_constant: Vec<String>,
    pub dropped_missing: usize,
}

type Extract = fn(&BirthRecord) -> Option<f64>;

/// A control variable: its name and how it expands into columns.
enum Control {
    Numeric(&'static str, Extract),
    Flag(&'static str, fn(&BirthRecord) -> Option<bool>),
    Edu(&'static str, fn(&BirthRecord) -> Option<Education>),
    Marital,
    Country,
}

impl Control {
    fn name(&self) -> &'static str {
        match self {
            Control::Numeric(n, _) | Control::Flag(n, _) | Control::Edu(n, _) => n,
            Control::Marital => "marital",
            Control::Country => "country",
        }
    }

    fn is_missing(&self, r: &BirthRecord) -> bool {
        match self {
            Control::Numeric(_, f) => f(r).is_none(),
            Control::Flag(_, f) => f(r).is_none(),
            Control::Edu(_, f) => f(r).is_none(),
            Control::Marital => r.covariates.mother_marital.is_none(),
            Control::Country => false,
        }
    }
}

fn controls() -> Vec<Control> {
    vec![
        Control::Numeric("birth_year", |r| Some(r.birth_year as f64)),
        Control::Numeric("mother_age", |r| r.covariates.mother_age.map(f64::from)),
        Control::Edu("mother_edu", |r| r.covariates.mother_edu),
        Control::Marital,
        Control::Edu("father_edu", |r| r.covariates.father_edu),
        Control::Numeric("household_size", |r| r.covariates.household_size.map(f64::from)),
        Control::Flag("electricity", |r| r.covariates.electricity),
        Control::Flag("radio", |r| r.covariates.radio),
        Control::Flag("tv", |r| r.covariates.tv),
        Control::Flag("car", |r| r.covariates.car),
        Control::Numeric("survey_year", |r| Some(r.survey_year as f64)),
        Control::Country,
    ]
}

fn one_hot<T: PartialEq + Copy>(value: Option<T>, level: T) -> f64 {
    if value == Some(level) {
        1.0
    } else {
        0.0
    }
}

/// Encodes a sample as `[intercept, male, controls...]`.
///
/// Columns other than the intercept that are constant over the retained rows
/// are dropped (and logged). A constant `male` column is an error because the
/// sex gap would not be identified.
pub fn build_design(table: &BirthTable, sample: &Sample, spec: &ModelSpec) -> Result<Design> {
    if sample.is_empty() {
        return Err(Error::Estimation(format!(
            "empty {} sample for window {}",
            sample.mode.code(),
            sample.window
        )));
    }
    let recs = table.records();
    let ctrl = match spec.controls {
        Controls::None => Vec::new(),
        Controls::Full => controls(),
    };

    let mut kept_rows = Vec::with_capacity(sample.len());
    let mut missing_vars = vec![false; ctrl.len()];
    for (pos, row) in sample.rows.iter().enumerate() {
        let r = &recs[row.record];
        let mut complete = true;
        for (c, flag) in ctrl.iter().zip(missing_vars.iter_mut()) {
            if c.is_missing(r) {
                complete = false;
                *flag = true;
            }
        }
        if complete || spec.missing == MissingPolicy::MissingIndicator {
            kept_rows.push(pos);
        }
    }
    let dropped_missing = sample.len() - kept_rows.len();
    if kept_rows.is_empty() {
        return Err(Error::Estimation(format!(
            "all {} rows dropped for missing covariates",
            sample.len()
        )));
    }
    if dropped_missing > 0 {
        log::info!("dropped {dropped_missing} rows with missing covariates");
    }

    let n = kept_rows.len();
    let row_rec = |pos: usize| &recs[sample.rows[pos].record];
    let mut names: Vec<String> = vec!["intercept".into(), "male".into()];
    let mut columns: Vec<Vec<f64>> = vec![
        vec![1.0; n],
        kept_rows.iter().map(|&p| if sample.rows[p].male { 1.0 } else { 0.0 }).collect(),
    ];
    let mut push = |name: String, col: Vec<f64>| {
        names.push(name);
        columns.push(col);
    };

    for c in &ctrl {
        match c {
            Control::Numeric(name, f) => {
                push(name.to_string(), kept_rows.iter().map(|&p| f(row_rec(p)).unwrap_or(0.0)).collect());
            }
            Control::Flag(name, f) => {
                push(
                    name.to_string(),
                    kept_rows.iter().map(|&p| one_hot(f(row_rec(p)), true)).collect(),
                );
            }
            Control::Edu(name, f) => {
                for level in [Education::Primary, Education::Secondary] {
                    push(
                        format!("{name}:{}", level.label()),
                        kept_rows.iter().map(|&p| one_hot(f(row_rec(p)), level)).collect(),
                    );
                }
            }
            Control::Marital => {
                for level in Marital::ALL.into_iter().filter(|m| *m != Marital::Married) {
                    push(
                        format!("marital:{}", level.label()),
                        kept_rows
                            .iter()
                            .map(|&p| one_hot(row_rec(p).covariates.mother_marital, level))
                            .collect(),
                    );
                }
            }
            Control::Country => {
                let countries: BTreeSet<&str> = kept_rows.iter().map(|&p| row_rec(p).country.as_str()).collect();
                for country in countries.into_iter().skip(1) {
                    push(
                        format!("country:{country}"),
                        kept_rows
                            .iter()
                            .map(|&p| if row_rec(p).country == country { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    if spec.missing == MissingPolicy::MissingIndicator {
        for (c, _) in ctrl.iter().zip(&missing_vars).filter(|(_, m)| **m) {
            push(
                format!("missing:{}", c.name()),
                kept_rows.iter().map(|&p| if c.is_missing(row_rec(p)) { 1.0 } else { 0.0 }).collect(),
            );
        }
    }

    let mut dropped_constant = Vec::new();
    let mut keep_names = Vec::with_capacity(names.len());
    let mut keep_cols = Vec::with_capacity(columns.len());
    for (j, (name, col)) in names.into_iter().zip(columns).enumerate() {
        let constant = col.iter().all(|v| *v == col[0]);
        if j > 0 && constant {
            if name == "male" {
                return Err(Error::Estimation(format!(
                    "no sex variation in {} sample for window {}",
                    sample.mode.code(),
                    sample.window
                )));
            }
            log::warn!("dropping constant column `{name}`");
            dropped_constant.push(name);
        } else {
            keep_names.push(name);
            keep_cols.push(col);
        }
    }

    Ok(Design {
        x: Matrix::from_columns(n, keep_cols),
        y: kept_rows.iter().map(|&p| sample.rows[p].outcome as f64).collect(),
        clusters: kept_rows.iter().map(|&p| sample.rows[p].cluster).collect(),
        names: keep_names,
        kept_rows,
        dropped_constant,
        dropped_missing,
    })
}
