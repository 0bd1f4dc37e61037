//! Descriptive and results tables, rendered as CSV, JSON or markdown.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decompose::DecompositionTable;
use crate::domain::{classify_window, BirthRecord, Education, Marital, PairType, Sex, Society, WindowKind};
use crate::error::{Error, Result};
use crate::estimate::FitRecord;
use crate::ingest::{match_twins, BirthTable, TwinPairSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(Error::Usage(format!("unknown format `{other}` (expected csv, json or markdown)"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Show rates per thousand in markdown.
    pub per_thousand: bool,
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(usize),
    Num(f64),
    /// A probability; eligible for per-thousand display.
    Rate(f64),
    Missing,
}

impl Cell {
    fn full(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) | Cell::Rate(v) => v.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn short(&self, opts: RenderOptions) -> String {
        match self {
            Cell::Num(v) => format!("{v:.3}"),
            Cell::Rate(v) if opts.per_thousand => format!("{:.1}", v * 1000.0),
            Cell::Rate(v) => format!("{v:.3}"),
            Cell::Missing => "–".into(),
            other => other.full(),
        }
    }
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

/// A table that can be rendered in every output format.
pub trait Tabular: Serialize {
    fn columns(&self) -> Vec<String>;
    fn cells(&self) -> Vec<Vec<Cell>>;
    /// Plain-language lines appended to markdown output.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Renders with a stable column order: full precision in CSV and JSON,
/// three decimals in markdown.
pub fn render<T: Tabular>(report: &T, format: Format, opts: RenderOptions) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(report.columns())?;
            for row in report.cells() {
                w.write_record(row.iter().map(Cell::full))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
        }
        Format::Markdown => {
            let mut out = String::new();
            let cols = report.columns();
            let _ = writeln!(out, "| {} |", cols.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
            for row in report.cells() {
                let cells: Vec<String> = row.iter().map(|c| c.short(opts)).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            let notes = report.notes();
            if !notes.is_empty() {
                out.push('\n');
                for n in notes {
                    let _ = writeln!(out, "- {n}");
                }
            }
            Ok(out)
        }
    }
}

fn share(k: usize, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        k as f64 / n as f64
    }
}

fn bernoulli_sd(p: f64) -> f64 {
    (p * (1.0 - p)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SexRatioRow {
    pub society: Society,
    pub group: String,
    pub n: usize,
    pub prop_male: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSexRatio {
    pub society: Society,
    pub males: usize,
    pub females: usize,
    /// Males per female over all births.
    pub ratio: f64,
}

/// Share of boys by twin type and society.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SexRatioSummary {
    pub rows: Vec<SexRatioRow>,
    pub pooled: Vec<PooledSexRatio>,
    pub notes: Vec<String>,
}

impl SexRatioSummary {
    pub fn get(&self, society: Society, group: &str) -> Option<&SexRatioRow> {
        self.rows.iter().find(|r| r.society == society && r.group == group)
    }

    pub fn extend(&mut self, other: SexRatioSummary) {
        self.rows.extend(other.rows);
        self.pooled.extend(other.pooled);
        self.notes.extend(other.notes);
    }
}

pub fn sex_ratio_table(table: &BirthTable, pairs: &TwinPairSet) -> SexRatioSummary {
    let recs = table.records();
    let mut out = SexRatioSummary::default();
    for society in table.societies() {
        let in_soc = |i: &usize| recs[*i].society == society;
        let members = |kinds: &[PairType]| -> Vec<usize> {
            pairs
                .iter()
                .filter(|p| kinds.contains(&p.pair_type))
                .flat_map(|p| [p.a, p.b])
                .filter(in_soc)
                .collect()
        };
        let singletons: Vec<usize> = (0..recs.len()).filter(|i| recs[*i].multiplicity == 1 && in_soc(i)).collect();
        let groups = [
            ("singletons", singletons),
            ("all_twins", members(&[PairType::MF, PairType::MM, PairType::FF])),
            ("male_female", members(&[PairType::MF])),
            ("male_male", members(&[PairType::MM])),
            ("female_female", members(&[PairType::FF])),
            ("same_sex", members(&[PairType::MM, PairType::FF])),
        ];
        for (name, idx) in groups {
            if idx.is_empty() {
                out.notes.push(format!("{society}: no {name} births"));
                continue;
            }
            let males = idx.iter().filter(|&&i| recs[i].sex.is_male()).count();
            let p = share(males, idx.len());
            out.rows.push(SexRatioRow {
                society,
                group: name.into(),
                n: idx.len(),
                prop_male: p,
                sd: bernoulli_sd(p),
            });
        }
        let males = recs.iter().filter(|r| r.society == society && r.sex.is_male()).count();
        let females = recs.iter().filter(|r| r.society == society && !r.sex.is_male()).count();
        out.pooled.push(PooledSexRatio {
            society,
            males,
            females,
            ratio: if females == 0 { f64::NAN } else { males as f64 / females as f64 },
        });
    }
    out
}

impl Tabular for SexRatioSummary {
    fn columns(&self) -> Vec<String> {
        ["society", "group", "n", "prop_male", "sd"].map(String::from).to_vec()
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    text(r.society.code()),
                    text(r.group.clone()),
                    Cell::Int(r.n),
                    Cell::Num(r.prop_male),
                    Cell::Num(r.sd),
                ]
            })
            .collect()
    }

    fn notes(&self) -> Vec<String> {
        let mut notes: Vec<String> = self
            .pooled
            .iter()
            .map(|p| format!("{}: {} boys per girl over all births", p.society, fmt3(p.ratio)))
            .collect();
        notes.extend(self.notes.iter().cloned());
        notes
    }
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub society: Society,
    pub window: WindowKind,
    pub group: String,
    pub sex: Sex,
    pub n: usize,
    pub deaths: usize,
    pub rate: f64,
    pub sd: f64,
}

/// Window mortality rates of boys and girls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn get(&self, society: Society, window: WindowKind, group: &str, sex: Sex) -> Option<&RateRow> {
        self.rows
            .iter()
            .find(|r| r.society == society && r.window == window && r.group == group && r.sex == sex)
    }

    /// Singleton infant and child rates by sex and society.
    pub fn figure_data(&self) -> FigureData {
        FigureData {
            rows: self
                .rows
                .iter()
                .filter(|r| r.group == "singletons" && matches!(r.window, WindowKind::I | WindowKind::CH))
                .cloned()
                .collect(),
        }
    }
}

/// Rates over window-eligible children. The MF group counts every eligible
/// member of a male-female pair, whether or not the co-twin is eligible.
pub fn mortality_rate_table(table: &BirthTable, pairs: &TwinPairSet, windows: &[WindowKind]) -> Result<RateTable> {
    let recs = table.records();
    let mut twin_of = vec![None; recs.len()];
    for p in pairs.iter() {
        twin_of[p.a] = Some(p.pair_type);
        twin_of[p.b] = Some(p.pair_type);
    }
    let mut rows = Vec::new();
    for society in table.societies() {
        for &window in windows {
            let win = window.window();
            // [group][sex] -> (n, deaths)
            let mut counts = [[(0usize, 0usize); 2]; 3];
            for (i, r) in recs.iter().enumerate() {
                if r.society != society {
                    continue;
                }
                let Some(outcome) = classify_window(r, &win)? else { continue };
                let s = if r.sex.is_male() { 0 } else { 1 };
                let mut bump = |g: usize| {
                    counts[g][s].0 += 1;
                    counts[g][s].1 += outcome as usize;
                };
                match twin_of[i] {
                    Some(kind) => {
                        bump(0);
                        if kind == PairType::MF {
                            bump(1);
                        }
                    }
                    None if r.multiplicity == 1 => bump(2),
                    None => {}
                }
            }
            for (g, name) in ["all_twins", "mf_twins", "singletons"].iter().enumerate() {
                for (s, sex) in [Sex::Male, Sex::Female].into_iter().enumerate() {
                    let (n, deaths) = counts[g][s];
                    if n == 0 {
                        continue;
                    }
                    let rate = share(deaths, n);
                    rows.push(RateRow {
                        society,
                        window,
                        group: name.to_string(),
                        sex,
                        n,
                        deaths,
                        rate,
                        sd: bernoulli_sd(rate),
                    });
                }
            }
        }
    }
    Ok(RateTable { rows })
}

impl Tabular for RateTable {
    fn columns(&self) -> Vec<String> {
        ["society", "window", "group", "sex", "n", "deaths", "rate", "sd"]
            .map(String::from)
            .to_vec()
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    text(r.society.code()),
                    text(r.window.code()),
                    text(r.group.clone()),
                    text(r.sex.code()),
                    Cell::Int(r.n),
                    Cell::Int(r.deaths),
                    Cell::Rate(r.rate),
                    Cell::Num(r.sd),
                ]
            })
            .collect()
    }
}

/// Data behind the infant/child mortality figure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub rows: Vec<RateRow>,
}

impl Tabular for FigureData {
    fn columns(&self) -> Vec<String> {
        ["society", "group", "sex", "window", "rate", "n"].map(String::from).to_vec()
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    text(r.society.code()),
                    text(r.group.clone()),
                    text(r.sex.code()),
                    text(r.window.code()),
                    Cell::Rate(r.rate),
                    Cell::Int(r.n),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub society: Society,
    pub group: String,
    pub variable: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Means and SDs of child, parental and household variables for twins and
/// singletons. Missing values are excluded from `n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateSummary {
    pub rows: Vec<CovariateRow>,
}

impl CovariateSummary {
    pub fn get(&self, society: Society, group: &str, variable: &str) -> Option<&CovariateRow> {
        self.rows
            .iter()
            .find(|r| r.society == society && r.group == group && r.variable == variable)
    }
}

type Var = (String, Box<dyn Fn(&BirthRecord) -> Result<Option<f64>>>);

fn indicator(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

fn variables() -> Vec<Var> {
    let mut vars: Vec<Var> = vec![
        ("child_is_male".into(), Box::new(|r| Ok(Some(indicator(r.sex.is_male()))))),
        ("mother_age".into(), Box::new(|r| Ok(r.covariates.mother_age.map(f64::from)))),
    ];
    for m in Marital::ALL {
        vars.push((
            format!("marital:{}", m.label()),
            Box::new(move |r| Ok(r.covariates.mother_marital.map(|v| indicator(v == m)))),
        ));
    }
    for e in Education::ALL {
        vars.push((
            format!("mother_edu:{}", e.label()),
            Box::new(move |r| Ok(r.covariates.mother_edu.map(|v| indicator(v == e)))),
        ));
    }
    for e in Education::ALL {
        vars.push((
            format!("father_edu:{}", e.label()),
            Box::new(move |r| Ok(r.covariates.father_edu.map(|v| indicator(v == e)))),
        ));
    }
    vars.push(("household_size".into(), Box::new(|r| Ok(r.covariates.household_size.map(f64::from)))));
    vars.push(("electricity".into(), Box::new(|r| Ok(r.covariates.electricity.map(indicator)))));
    vars.push(("radio".into(), Box::new(|r| Ok(r.covariates.radio.map(indicator)))));
    vars.push(("tv".into(), Box::new(|r| Ok(r.covariates.tv.map(indicator)))));
    vars.push(("car".into(), Box::new(|r| Ok(r.covariates.car.map(indicator)))));
    for (name, w) in [
        ("infant_mortality", WindowKind::I),
        ("neonatal_mortality", WindowKind::NN),
        ("postneonatal_mortality", WindowKind::PNN),
        ("child_mortality", WindowKind::CH),
    ] {
        vars.push((
            name.into(),
            Box::new(move |r| Ok(classify_window(r, &w.window())?.map(f64::from))),
        ));
    }
    vars
}

pub fn covariate_summary(table: &BirthTable) -> Result<CovariateSummary> {
    let (pairs, _) = match_twins(table);
    let recs = table.records();
    let mut is_twin = vec![false; recs.len()];
    for p in pairs.iter() {
        is_twin[p.a] = true;
        is_twin[p.b] = true;
    }
    let vars = variables();
    let mut rows = Vec::new();
    for society in table.societies() {
        for (group, want_twin) in [("singletons", false), ("twins", true)] {
            let members: Vec<&BirthRecord> = recs
                .iter()
                .enumerate()
                .filter(|(i, r)| {
                    r.society == society && is_twin[*i] == want_twin && (want_twin || r.multiplicity == 1)
                })
                .map(|(_, r)| r)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (name, f) in &vars {
                let mut vals = Vec::with_capacity(members.len());
                for r in &members {
                    if let Some(v) = f(r)? {
                        vals.push(v);
                    }
                }
                let n = vals.len();
                let mean = if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 };
                let sd = if n < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                };
                rows.push(CovariateRow {
                    society,
                    group: group.into(),
                    variable: name.clone(),
                    n,
                    mean,
                    sd,
                });
            }
        }
    }
    Ok(CovariateSummary { rows })
}

impl Tabular for CovariateSummary {
    fn columns(&self) -> Vec<String> {
        ["society", "group", "variable", "n", "mean", "sd"].map(String::from).to_vec()
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    text(r.society.code()),
                    text(r.group.clone()),
                    text(r.variable.clone()),
                    Cell::Int(r.n),
                    Cell::Num(r.mean),
                    Cell::Num(r.sd),
                ]
            })
            .collect()
    }
}

impl Tabular for DecompositionTable {
    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = [
            "period",
            "ND prenatal environment",
            "ND child biology",
            "ND parental preferences",
            "D prenatal environment",
            "D child biology",
            "D parental preferences",
        ]
        .map(String::from)
        .to_vec();
        if self.periods.iter().any(|p| p.se.is_some()) {
            cols.extend(
                [
                    "se ND prenatal environment",
                    "se ND child biology",
                    "se D prenatal environment",
                    "se D child biology",
                    "se D parental preferences",
                ]
                .map(String::from),
            );
        }
        cols
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        let with_se = self.periods.iter().any(|p| p.se.is_some());
        self.periods
            .iter()
            .map(|p| {
                let mut row = vec![text(p.window.label())];
                row.extend(p.effects().map(Cell::Rate));
                if with_se {
                    match p.se {
                        Some(se) => row.extend(
                            [se.theta1_nd, se.theta2_nd, se.theta1_d, se.theta2_d, se.theta3_d].map(Cell::Rate),
                        ),
                        None => row.extend(std::iter::repeat_n(Cell::Missing, 5)),
                    }
                }
                row
            })
            .collect()
    }

    fn notes(&self) -> Vec<String> {
        self.periods
            .iter()
            .map(|p| {
                let per_k = p.theta3_d.abs() * 1000.0;
                let who = if p.theta3_d <= 0.0 { "female" } else { "male" };
                format!(
                    "{}: parental preferences in D raise {who} mortality relative to the other sex by {per_k:.1} per thousand points (signed θ3_D = {:.3})",
                    p.window.label(),
                    p.theta3_d
                )
            })
            .collect()
    }
}

/// Summary of fitted male coefficients read back from fit files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub fits: Vec<FitRecord>,
}

impl Tabular for FitSummary {
    fn columns(&self) -> Vec<String> {
        ["society", "window", "estimator", "mode", "theta", "se", "n_obs", "n_clusters"]
            .map(String::from)
            .to_vec()
    }

    fn cells(&self) -> Vec<Vec<Cell>> {
        self.fits
            .iter()
            .map(|f| {
                let theta = f.coefficients.get(crate::estimate::MALE).copied();
                let se = f.se.get(crate::estimate::MALE).copied().flatten();
                vec![
                    text(f.society.map(|s| s.code()).unwrap_or("")),
                    text(f.window.map(|w| w.code()).unwrap_or("")),
                    text(f.estimator.code()),
                    text(f.mode.map(|m| m.code()).unwrap_or("")),
                    theta.map_or(Cell::Missing, Cell::Num),
                    se.map_or(Cell::Missing, Cell::Num),
                    Cell::Int(f.n_obs),
                    Cell::Int(f.n_clusters),
                ]
            })
            .collect()
    }
}
