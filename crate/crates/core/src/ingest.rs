//! Birth-history tables: CSV parsing, twin matching and estimation samples.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    classify_window, BirthRecord, Covariates, Education, Marital, MortalityWindow, PairType, Sex,
    Society, TwinPair, WindowKind,
};
use crate::error::{Error, Result};

/// Column order of the canonical birth CSV.
pub const CSV_COLUMNS: [&str; 20] = [
    "child_id",
    "mother_id",
    "country",
    "society",
    "sex",
    "birth_year",
    "birth_month",
    "multiplicity",
    "death_age_months",
    "age_at_survey_months",
    "survey_year",
    "mother_age",
    "mother_edu",
    "mother_marital",
    "father_edu",
    "household_size",
    "electricity",
    "radio",
    "tv",
    "car",
];

/// All live births of one or more surveys, indexed by mother.
#[derive(Debug, Clone, Default)]
pub struct BirthTable {
    records: Vec<BirthRecord>,
    mother_ids: Vec<String>,
    mother_of: Vec<u32>,
    members: Vec<Vec<usize>>,
    by_mother: HashMap<String, u32>,
}

impl PartialEq for BirthTable {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl BirthTable {
    /// Builds a table, validating every record and the uniqueness of child ids.
    pub fn new(records: Vec<BirthRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for rec in &records {
            rec.validate()?;
            if !seen.insert(rec.child_id.as_str()) {
                return Err(Error::Data(format!("duplicate child_id `{}`", rec.child_id)));
            }
        }
        drop(seen);

        let mut mother_ids = Vec::new();
        let mut by_mother: HashMap<String, u32> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut mother_of = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let idx = match by_mother.get(&rec.mother_id) {
                Some(&idx) => idx,
                None => {
                    let idx = mother_ids.len() as u32;
                    by_mother.insert(rec.mother_id.clone(), idx);
                    mother_ids.push(rec.mother_id.clone());
                    members.push(Vec::new());
                    idx
                }
            };
            members[idx as usize].push(i);
            mother_of.push(idx);
        }
        Ok(BirthTable {
            records,
            mother_ids,
            mother_of,
            members,
            by_mother,
        })
    }

    pub fn records(&self) -> &[BirthRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BirthRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_mothers(&self) -> usize {
        self.mother_ids.len()
    }

    /// Dense index of the mother of record `i`, in order of first appearance.
    pub fn mother_index(&self, i: usize) -> u32 {
        self.mother_of[i]
    }

    pub fn mother_id(&self, idx: u32) -> &str {
        &self.mother_ids[idx as usize]
    }

    /// Record indices of the children of mother `idx`.
    pub fn mother_members(&self, idx: u32) -> &[usize] {
        &self.members[idx as usize]
    }

    pub fn records_of(&self, mother_id: &str) -> &[usize] {
        self.by_mother
            .get(mother_id)
            .map(|&idx| self.members[idx as usize].as_slice())
            .unwrap_or(&[])
    }

    /// Societies present, in canonical order.
    pub fn societies(&self) -> Vec<Society> {
        Society::ALL
            .into_iter()
            .filter(|s| self.records.iter().any(|r| r.society == *s))
            .collect()
    }

    /// Splits into one table per society present.
    pub fn split_by_society(&self) -> Result<BTreeMap<Society, BirthTable>> {
        let mut parts: BTreeMap<Society, Vec<BirthRecord>> = BTreeMap::new();
        for rec in &self.records {
            parts.entry(rec.society).or_default().push(rec.clone());
        }
        parts
            .into_iter()
            .map(|(s, recs)| Ok((s, BirthTable::new(recs)?)))
            .collect()
    }

    /// Concatenates tables (e.g. one file per society).
    pub fn concat(tables: impl IntoIterator<Item = BirthTable>) -> Result<BirthTable> {
        let records = tables.into_iter().flat_map(|t| t.records).collect();
        BirthTable::new(records)
    }
}

fn parse_opt<T: std::str::FromStr>(raw: &str) -> std::result::Result<Option<T>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<T>()
        .map(Some)
        .map_err(|_| format!("cannot parse `{raw}`"))
}

fn parse_req<T: std::str::FromStr>(raw: &str) -> std::result::Result<T, String> {
    parse_opt(raw)?.ok_or_else(|| "value is required".to_string())
}

fn parse_flag(raw: &str) -> std::result::Result<Option<bool>, String> {
    match raw.trim() {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(format!("expected 0 or 1, got `{other}`")),
    }
}

fn parse_edu(raw: &str) -> std::result::Result<Option<Education>, String> {
    parse_opt::<u8>(raw)?
        .map(|c| Education::from_code(c).ok_or_else(|| format!("education code {c} outside 0-2")))
        .transpose()
}

fn parse_row(fields: &csv::StringRecord, cols: &[usize; 20]) -> std::result::Result<BirthRecord, String> {
    let get = |i: usize| fields.get(cols[i]).unwrap_or("");
    let ctx = |name: &str, e: String| format!("column `{name}`: {e}");
    macro_rules! req {
        ($i:expr) => {
            parse_req(get($i)).map_err(|e| ctx(CSV_COLUMNS[$i], e))?
        };
    }
    macro_rules! opt {
        ($i:expr) => {
            parse_opt(get($i)).map_err(|e| ctx(CSV_COLUMNS[$i], e))?
        };
    }
    let text = |i: usize| -> std::result::Result<String, String> {
        let v = get(i).trim();
        if v.is_empty() {
            Err(ctx(CSV_COLUMNS[i], "value is required".into()))
        } else {
            Ok(v.to_string())
        }
    };
    let marital = match parse_opt::<u8>(get(13)).map_err(|e| ctx("mother_marital", e))? {
        None => None,
        Some(c) => Some(
            Marital::from_code(c).ok_or_else(|| ctx("mother_marital", format!("code {c} outside 0-5")))?,
        ),
    };
    Ok(BirthRecord {
        child_id: text(0)?,
        mother_id: text(1)?,
        country: text(2)?,
        society: get(3).trim().parse::<Society>().map_err(|e| ctx("society", e.to_string()))?,
        sex: get(4).trim().parse::<Sex>().map_err(|e| ctx("sex", e.to_string()))?,
        birth_year: req!(5),
        birth_month: req!(6),
        multiplicity: req!(7),
        death_age_months: opt!(8),
        age_at_survey_months: opt!(9),
        survey_year: req!(10),
        covariates: Covariates {
            mother_age: opt!(11),
            mother_edu: parse_edu(get(12)).map_err(|e| ctx("mother_edu", e))?,
            mother_marital: marital,
            father_edu: parse_edu(get(14)).map_err(|e| ctx("father_edu", e))?,
            household_size: opt!(15),
            electricity: parse_flag(get(16)).map_err(|e| ctx("electricity", e))?,
            radio: parse_flag(get(17)).map_err(|e| ctx("radio", e))?,
            tv: parse_flag(get(18)).map_err(|e| ctx("tv", e))?,
            car: parse_flag(get(19)).map_err(|e| ctx("car", e))?,
        },
    })
}

/// Reads the canonical birth CSV from any reader. Columns are located by
/// header name, so extra columns and reordering are tolerated.
pub fn read_births<R: Read>(reader: R) -> Result<BirthTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 20];
    for (slot, name) in cols.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing header column `{name}`")))?;
    }

    let mut records = Vec::new();
    let mut fields = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut fields)? {
        row += 1;
        let rec = parse_row(&fields, &cols).map_err(|message| Error::Row { row, message })?;
        rec.validate().map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    BirthTable::new(records)
}

pub fn parse_births(path: impl AsRef<Path>) -> Result<BirthTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_births(std::io::BufReader::new(file))
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag_str(v: Option<bool>) -> String {
    v.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
}

/// Writes a table in the canonical CSV layout.
pub fn write_births<W: Write>(table: &BirthTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in table.records() {
        let c = &r.covariates;
        w.write_record([
            r.child_id.clone(),
            r.mother_id.clone(),
            r.country.clone(),
            r.society.code().to_string(),
            r.sex.code().to_string(),
            r.birth_year.to_string(),
            r.birth_month.to_string(),
            r.multiplicity.to_string(),
            opt_str(r.death_age_months),
            opt_str(r.age_at_survey_months),
            r.survey_year.to_string(),
            opt_str(c.mother_age),
            opt_str(c.mother_edu.map(Education::code)),
            opt_str(c.mother_marital.map(Marital::code)),
            opt_str(c.father_edu.map(Education::code)),
            opt_str(c.household_size),
            flag_str(c.electricity),
            flag_str(c.radio),
            flag_str(c.tv),
            flag_str(c.car),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn write_births_file(table: &BirthTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_births(table, std::io::BufWriter::new(file))
}

/// Matched twin pairs, in deterministic (mother, birth date) order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinPairSet {
    pub pairs: Vec<TwinPair>,
}

impl TwinPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn count(&self, kind: PairType) -> usize {
        self.pairs.iter().filter(|p| p.pair_type == kind).count()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TwinPair> {
        self.pairs.iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchDiagnostics {
    pub pairs_mm: usize,
    pub pairs_ff: usize,
    pub pairs_mf: usize,
    /// Individuals in matched pairs (twice the pair count).
    pub matched_individuals: usize,
    /// Declared twins with no co-twin in the same mother and birth month.
    pub unmatched: usize,
    /// Records dropped as higher-order births (declared or by group size).
    pub dropped: usize,
    pub dropped_groups: usize,
    /// Records with declared multiplicity of 2 or more.
    pub declared_multiples: usize,
}

/// Matches declared twins on mother id and birth month/year.
///
/// Groups of exactly two become pairs, lone declared twins are left unmatched,
/// and groups of three or more (as well as every record declared as a triplet
/// or higher) are dropped.
pub fn match_twins(table: &BirthTable) -> (TwinPairSet, MatchDiagnostics) {
    let mut diag = MatchDiagnostics::default();
    let mut groups: BTreeMap<(&str, i32, u8), Vec<usize>> = BTreeMap::new();
    for (i, r) in table.records().iter().enumerate() {
        match r.multiplicity {
            1 => {}
            2 => {
                diag.declared_multiples += 1;
                groups
                    .entry((r.mother_id.as_str(), r.birth_year, r.birth_month))
                    .or_default()
                    .push(i);
            }
            _ => {
                diag.declared_multiples += 1;
                diag.dropped += 1;
            }
        }
    }

    let recs = table.records();
    let mut pairs = Vec::new();
    for ((mother, _, _), mut members) in groups {
        match members.len() {
            1 => diag.unmatched += 1,
            2 => {
                members.sort_by(|&x, &y| recs[x].child_id.cmp(&recs[y].child_id));
                let (a, b) = (members[0], members[1]);
                let pair_type = PairType::from_sexes(recs[a].sex, recs[b].sex);
                match pair_type {
                    PairType::MM => diag.pairs_mm += 1,
                    PairType::FF => diag.pairs_ff += 1,
                    PairType::MF => diag.pairs_mf += 1,
                }
                pairs.push(TwinPair {
                    pair_id: pairs.len(),
                    mother_id: mother.to_string(),
                    member_a: recs[a].child_id.clone(),
                    member_b: recs[b].child_id.clone(),
                    pair_type,
                    a,
                    b,
                });
            }
            n => {
                diag.dropped += n;
                diag.dropped_groups += 1;
            }
        }
    }
    diag.matched_individuals = 2 * pairs.len();
    (TwinPairSet { pairs }, diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Every member of a matched pair who is at risk in the window.
    AllTwins,
    /// Complete male-female pairs: both members at risk.
    MfPairs,
    Singletons,
    All,
}

impl SampleMode {
    pub fn code(self) -> &'static str {
        match self {
            SampleMode::AllTwins => "all_twins",
            SampleMode::MfPairs => "mf_pairs",
            SampleMode::Singletons => "singletons",
            SampleMode::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRow {
    /// Index into the source table.
    pub record: usize,
    pub outcome: u8,
    pub male: bool,
    /// Dense mother index, the clustering unit.
    pub cluster: u32,
    pub pair: Option<u32>,
}

/// Window-eligible observations drawn from a table.
#[derive(Debug, Clone)]
pub struct Sample {
    pub window: WindowKind,
    pub mode: SampleMode,
    /// Society shared by every row, if any.
    pub society: Option<Society>,
    pub rows: Vec<SampleRow>,
    /// Set when no observation qualified.
    pub empty: bool,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.outcome as f64).collect()
    }
}

/// Builds the estimation sample for one window and mode.
///
/// In `MfPairs` mode a pair enters only if both members are individually
/// eligible, so a co-twin who died in an earlier period (or is censored)
/// removes the pair. Rows are emitted male first, then female.
pub fn build_sample(
    table: &BirthTable,
    pairs: &TwinPairSet,
    window: WindowKind,
    mode: SampleMode,
) -> Result<Sample> {
    let win = MortalityWindow::new(window);
    let recs = table.records();
    let row_for = |i: usize, pair: Option<u32>| -> Result<Option<SampleRow>> {
        Ok(classify_window(&recs[i], &win)?.map(|outcome| SampleRow {
            record: i,
            outcome,
            male: recs[i].sex.is_male(),
            cluster: table.mother_index(i),
            pair,
        }))
    };

    let mut rows = Vec::new();
    match mode {
        SampleMode::AllTwins => {
            for p in pairs.iter() {
                for i in [p.a, p.b] {
                    if let Some(r) = row_for(i, Some(p.pair_id as u32))? {
                        rows.push(r);
                    }
                }
            }
        }
        SampleMode::MfPairs => {
            for p in pairs.iter().filter(|p| p.pair_type == PairType::MF) {
                let (m, f) = if recs[p.a].sex.is_male() { (p.a, p.b) } else { (p.b, p.a) };
                let id = Some(p.pair_id as u32);
                if let (Some(rm), Some(rf)) = (row_for(m, id)?, row_for(f, id)?) {
                    rows.push(rm);
                    rows.push(rf);
                }
            }
        }
        SampleMode::Singletons => {
            for (i, r) in recs.iter().enumerate() {
                if r.multiplicity == 1 {
                    if let Some(row) = row_for(i, None)? {
                        rows.push(row);
                    }
                }
            }
        }
        SampleMode::All => {
            let mut pair_of = vec![None; recs.len()];
            for p in pairs.iter() {
                pair_of[p.a] = Some(p.pair_id as u32);
                pair_of[p.b] = Some(p.pair_id as u32);
            }
            for (i, pair) in pair_of.into_iter().enumerate() {
                if let Some(row) = row_for(i, pair)? {
                    rows.push(row);
                }
            }
        }
    }

    let mut society = None;
    let mut mixed = false;
    for r in &rows {
        let s = recs[r.record].society;
        match society {
            None => society = Some(s),
            Some(prev) if prev != s => mixed = true,
            _ => {}
        }
    }
    if rows.is_empty() {
        log::warn!("empty {} sample for window {}", mode.code(), window);
    }
    Ok(Sample {
        window,
        mode,
        society: if mixed { None } else { society },
        empty: rows.is_empty(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(id: &str, mother: &str, sex: Sex, mult: u8, month: u8, death: Option<u32>) -> BirthRecord {
        BirthRecord {
            child_id: id.into(),
            mother_id: mother.into(),
            country: "AA".into(),
            society: Society::NonDiscriminatory,
            sex,
            birth_year: 2000,
            birth_month: month,
            multiplicity: mult,
            death_age_months: death,
            age_at_survey_months: if death.is_some() { None } else { Some(72) },
            survey_year: 2006,
            covariates: Covariates::default(),
        }
    }

    const HEADER: &str = "child_id,mother_id,country,society,sex,birth_year,birth_month,multiplicity,death_age_months,age_at_survey_months,survey_year,mother_age,mother_edu,mother_marital,father_edu,household_size,electricity,radio,tv,car";

    #[test]
    fn parses_three_rows() {
        let csv = format!(
            "{HEADER}\n\
             c1,m1,NG,ND,M,2001,3,1,,70,2007,30,1,1,2,6,1,0,0,0\n\
             c2,m1,NG,ND,F,2003,5,2,0,,2007,30,1,1,2,6,1,0,0,0\n\
             c3,m1,NG,ND,M,2003,5,2,,48,2007,,,,,,,,,\n"
        );
        let t = read_births(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.n_mothers(), 1);
        let r = &t.records()[0];
        assert_eq!(r.covariates.mother_edu, Some(Education::Primary));
        assert_eq!(r.covariates.mother_marital, Some(Marital::Married));
        assert_eq!(r.covariates.electricity, Some(true));
        assert_eq!(t.records()[1].death_age_months, Some(0));
        assert_eq!(t.records()[2].covariates, Covariates::default());
    }

    #[test]
    fn duplicate_child_id_names_the_id() {
        let csv = format!(
            "{HEADER}\nc1,m1,NG,ND,M,2001,3,1,,70,2007,,,,,,,,,\nc1,m2,NG,ND,F,2001,3,1,,70,2007,,,,,,,,,\n"
        );
        let err = read_births(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("`c1`"), "{err}");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "child_id,mother_id\nc1,m1\n";
        let err = read_births(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn death_after_survey_is_rejected_with_row_number() {
        let csv = format!(
            "{HEADER}\nc1,m1,NG,ND,M,2001,3,1,,70,2007,,,,,,,,,\nc2,m1,NG,ND,M,2001,3,1,30,20,2007,,,,,,,,,\n"
        );
        match read_births(csv.as_bytes()).unwrap_err() {
            Error::Row { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("exceeds"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_field_reports_column() {
        let csv = format!("{HEADER}\nc1,m1,NG,ND,X,2001,3,1,,70,2007,,,,,,,,,\n");
        let err = read_births(csv.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("sex"), "{err}");
    }

    #[test]
    fn matches_a_pair() {
        let t = BirthTable::new(vec![
            rec("a", "m", Sex::Male, 2, 4, None),
            rec("b", "m", Sex::Female, 2, 4, None),
            rec("c", "m", Sex::Female, 1, 9, None),
        ])
        .unwrap();
        let (pairs, diag) = match_twins(&t);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs.pairs[0].pair_type, PairType::MF);
        assert_eq!(diag.pairs_mf, 1);
        assert_eq!(diag.matched_individuals, 2);
    }

    #[test]
    fn three_in_a_group_are_dropped() {
        let t = BirthTable::new(vec![
            rec("a", "m", Sex::Male, 2, 4, None),
            rec("b", "m", Sex::Female, 2, 4, None),
            rec("c", "m", Sex::Female, 2, 4, None),
            rec("d", "m", Sex::Female, 3, 8, None),
            rec("e", "n", Sex::Female, 2, 8, None),
        ])
        .unwrap();
        let (pairs, diag) = match_twins(&t);
        assert!(pairs.is_empty());
        assert_eq!(diag.dropped, 4);
        assert_eq!(diag.dropped_groups, 1);
        assert_eq!(diag.unmatched, 1);
        assert_eq!(
            diag.matched_individuals + diag.unmatched + diag.dropped,
            diag.declared_multiples
        );
    }

    #[test]
    fn different_months_do_not_match() {
        let t = BirthTable::new(vec![
            rec("a", "m", Sex::Male, 2, 4, None),
            rec("b", "m", Sex::Female, 2, 5, None),
        ])
        .unwrap();
        let (pairs, diag) = match_twins(&t);
        assert!(pairs.is_empty());
        assert_eq!(diag.unmatched, 2);
    }

    fn mf_table(male_death: Option<u32>, female_death: Option<u32>) -> BirthTable {
        BirthTable::new(vec![
            rec("a", "m", Sex::Male, 2, 4, male_death),
            rec("b", "m", Sex::Female, 2, 4, female_death),
        ])
        .unwrap()
    }

    #[test]
    fn pnn_drops_pair_with_neonatal_death() {
        let t = mf_table(Some(0), None);
        let (pairs, _) = match_twins(&t);
        let s = build_sample(&t, &pairs, WindowKind::PNN, SampleMode::MfPairs).unwrap();
        assert!(s.is_empty() && s.empty);
        let all = build_sample(&t, &pairs, WindowKind::PNN, SampleMode::AllTwins).unwrap();
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn ch_keeps_surviving_pair() {
        let t = mf_table(None, None);
        let (pairs, _) = match_twins(&t);
        let s = build_sample(&t, &pairs, WindowKind::CH, SampleMode::MfPairs).unwrap();
        assert_eq!(s.outcomes(), vec![0.0, 0.0]);
        assert!(s.rows[0].male && !s.rows[1].male);
    }

    #[test]
    fn ch_drops_pair_with_infant_death() {
        let t = mf_table(Some(14), Some(3));
        let (pairs, _) = match_twins(&t);
        let s = build_sample(&t, &pairs, WindowKind::CH, SampleMode::MfPairs).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn censored_co_twin_drops_pair() {
        let mut t = mf_table(None, None).into_records();
        t[0].age_at_survey_months = Some(30);
        t[1].age_at_survey_months = Some(30);
        t[1].death_age_months = Some(20);
        let t = BirthTable::new(t).unwrap();
        let (pairs, _) = match_twins(&t);
        let s = build_sample(&t, &pairs, WindowKind::CH, SampleMode::MfPairs).unwrap();
        assert!(s.is_empty());
        let all = build_sample(&t, &pairs, WindowKind::CH, SampleMode::AllTwins).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all.rows[0].outcome, 1);
    }

    #[test]
    fn singleton_and_all_modes() {
        let t = BirthTable::new(vec![
            rec("a", "m", Sex::Male, 2, 4, None),
            rec("b", "m", Sex::Female, 2, 4, None),
            rec("c", "m", Sex::Female, 1, 9, Some(2)),
            rec("d", "n", Sex::Male, 2, 9, None),
        ])
        .unwrap();
        let (pairs, _) = match_twins(&t);
        let s = build_sample(&t, &pairs, WindowKind::NN, SampleMode::Singletons).unwrap();
        assert_eq!(s.len(), 1);
        let a = build_sample(&t, &pairs, WindowKind::NN, SampleMode::All).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.rows[0].pair, Some(0));
        assert_eq!(a.rows[3].pair, None);
        assert_eq!(a.society, Some(Society::NonDiscriminatory));
    }

    #[test]
    fn split_and_concat() {
        let mut recs = vec![
            rec("a", "m", Sex::Male, 1, 4, None),
            rec("b", "n", Sex::Female, 1, 4, None),
        ];
        recs[1].society = Society::Discriminatory;
        let t = BirthTable::new(recs).unwrap();
        let parts = t.split_by_society().unwrap();
        assert_eq!(parts.len(), 2);
        let back = BirthTable::concat(parts.into_values()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.records_of("n"), &[1]);
    }
}
