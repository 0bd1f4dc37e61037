//! Core record types, mortality windows and outcome labeling.
//!
//! Ages are measured in completed months: a death at age 0 happened before
//! the child completed its first month. Window membership uses half-open
//! intervals `[start, end)` on completed months, so NN, PNN and CH partition
//! the first five years without overlap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Sex {
    pub fn is_male(self) -> bool {
        self == Sex::Male
    }

    pub fn code(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
        }
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Sex::Male),
            "F" => Ok(Sex::Female),
            other => Err(Error::Data(format!("invalid sex `{other}` (expected M or F)"))),
        }
    }
}

/// Region label: non-discriminatory (`ND`) or discriminatory (`D`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Society {
    #[serde(rename = "ND")]
    NonDiscriminatory,
    #[serde(rename = "D")]
    Discriminatory,
}

impl Society {
    pub const ALL: [Society; 2] = [Society::NonDiscriminatory, Society::Discriminatory];

    pub fn code(self) -> &'static str {
        match self {
            Society::NonDiscriminatory => "ND",
            Society::Discriminatory => "D",
        }
    }
}

impl fmt::Display for Society {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Society {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ND" => Ok(Society::NonDiscriminatory),
            "D" => Ok(Society::Discriminatory),
            other => Err(Error::Data(format!("invalid society `{other}` (expected ND or D)"))),
        }
    }
}

/// Education level shared by the mother and father covariates.
/// CSV codes: 0 = none, 1 = primary, 2 = secondary or higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Education {
    None,
    Primary,
    Secondary,
}

impl Education {
    pub const ALL: [Education; 3] = [Education::None, Education::Primary, Education::Secondary];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Education::None => "none",
            Education::Primary => "primary",
            Education::Secondary => "secondary",
        }
    }
}

/// Mother's marital status. CSV codes follow declaration order (0 = single).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Marital {
    Single,
    Married,
    Widowed,
    LivingWithPartner,
    NotLivingWithPartner,
    Divorced,
}

impl Marital {
    pub const ALL: [Marital; 6] = [
        Marital::Single,
        Marital::Married,
        Marital::Widowed,
        Marital::LivingWithPartner,
        Marital::NotLivingWithPartner,
        Marital::Divorced,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Marital::Single => "single",
            Marital::Married => "married",
            Marital::Widowed => "widowed",
            Marital::LivingWithPartner => "partner",
            Marital::NotLivingWithPartner => "not_partner",
            Marital::Divorced => "divorced",
        }
    }
}

/// Parental and household controls. Every field may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub mother_age: Option<u32>,
    pub mother_edu: Option<Education>,
    pub mother_marital: Option<Marital>,
    pub father_edu: Option<Education>,
    pub household_size: Option<u32>,
    pub electricity: Option<bool>,
    pub radio: Option<bool>,
    pub tv: Option<bool>,
    pub car: Option<bool>,
}

/// One live birth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthRecord {
    pub child_id: String,
    pub mother_id: String,
    pub country: String,
    pub society: Society,
    pub sex: Sex,
    pub birth_year: i32,
    pub birth_month: u8,
    /// Declared multiplicity of the delivery: 1 singleton, 2 twin, 3+ higher order.
    pub multiplicity: u8,
    /// Completed months at death; `None` means alive at the survey.
    pub death_age_months: Option<u32>,
    pub age_at_survey_months: Option<u32>,
    pub survey_year: i32,
    pub covariates: Covariates,
}

impl BirthRecord {
    pub fn is_alive(&self) -> bool {
        self.death_age_months.is_none()
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<()> {
        if self.death_age_months.is_none() && self.age_at_survey_months.is_none() {
            return Err(Error::Data(format!(
                "child `{}`: death age and age at survey are both missing",
                self.child_id
            )));
        }
        if let (Some(death), Some(age)) = (self.death_age_months, self.age_at_survey_months) {
            if death > age {
                return Err(Error::Data(format!(
                    "child `{}`: death age {death} exceeds age at survey {age}",
                    self.child_id
                )));
            }
        }
        if !(1..=12).contains(&self.birth_month) {
            return Err(Error::Data(format!(
                "child `{}`: birth month {} outside 1-12",
                self.child_id, self.birth_month
            )));
        }
        if self.multiplicity == 0 {
            return Err(Error::Data(format!("child `{}`: multiplicity must be >= 1", self.child_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowKind {
    /// Infant: birth to the first birthday.
    I,
    /// Neonatal: the first month.
    NN,
    /// Postneonatal: months 1-11, conditional on surviving the first month.
    PNN,
    /// Child: first to fifth birthday, conditional on surviving infancy.
    CH,
}

impl WindowKind {
    /// Reporting order (infant, neonatal, postneonatal, child).
    pub const ALL: [WindowKind; 4] = [WindowKind::I, WindowKind::NN, WindowKind::PNN, WindowKind::CH];

    pub fn window(self) -> MortalityWindow {
        MortalityWindow::new(self)
    }

    pub fn code(self) -> &'static str {
        match self {
            WindowKind::I => "I",
            WindowKind::NN => "NN",
            WindowKind::PNN => "PNN",
            WindowKind::CH => "CH",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WindowKind::I => "Infant mortality",
            WindowKind::NN => "Neonatal mortality",
            WindowKind::PNN => "Postneonatal mortality",
            WindowKind::CH => "Child mortality",
        }
    }

    /// Whether the window conditions on surviving an earlier period.
    pub fn is_conditional(self) -> bool {
        self.window().requires_survival_to > 0
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(WindowKind::I),
            "NN" => Ok(WindowKind::NN),
            "PNN" => Ok(WindowKind::PNN),
            "CH" => Ok(WindowKind::CH),
            other => Err(Error::Config(format!(
                "unknown mortality window `{other}` (expected I, NN, PNN or CH)"
            ))),
        }
    }
}

/// A mortality window `[start_month, end_month)` in completed months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MortalityWindow {
    pub kind: WindowKind,
    pub start_month: u32,
    pub end_month: u32,
    /// Age in completed months a child must reach to be at risk.
    pub requires_survival_to: u32,
}

impl MortalityWindow {
    pub const fn new(kind: WindowKind) -> Self {
        let (start, end) = match kind {
            WindowKind::NN => (0, 1),
            WindowKind::PNN => (1, 12),
            WindowKind::I => (0, 12),
            WindowKind::CH => (12, 60),
        };
        MortalityWindow {
            kind,
            start_month: start,
            end_month: end,
            requires_survival_to: start,
        }
    }

    pub fn contains(&self, death_age: u32) -> bool {
        self.start_month <= death_age && death_age < self.end_month
    }
}

/// Labels a birth for one mortality window.
///
/// Returns `Some(1)` for a death inside the window, `Some(0)` for a child who
/// survived past its end, and `None` when the child is not at risk: it died
/// before the window opened, or it is alive but too young to have completed
/// the window.
pub fn classify_window(record: &BirthRecord, window: &MortalityWindow) -> Result<Option<u8>> {
    match (record.death_age_months, record.age_at_survey_months) {
        (None, None) => Err(Error::Data(format!(
            "child `{}`: death age and age at survey are both missing",
            record.child_id
        ))),
        (Some(death), _) => Ok(if death < window.requires_survival_to {
            None
        } else if death < window.end_month {
            Some(1)
        } else {
            Some(0)
        }),
        (None, Some(age)) => Ok((age >= window.end_month).then_some(0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairType {
    MM,
    FF,
    MF,
}

impl PairType {
    pub fn from_sexes(a: Sex, b: Sex) -> Self {
        match (a, b) {
            (Sex::Male, Sex::Male) => PairType::MM,
            (Sex::Female, Sex::Female) => PairType::FF,
            _ => PairType::MF,
        }
    }
}

/// A matched twin pair. Members are ordered by `child_id`; `a` and `b` index
/// the owning [`BirthTable`](crate::ingest::BirthTable).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwinPair {
    pub pair_id: usize,
    pub mother_id: String,
    pub member_a: String,
    pub member_b: String,
    pub pair_type: PairType,
    pub a: usize,
    pub b: usize,
}

impl TwinPair {
    pub fn pair_type(&self) -> PairType {
        self.pair_type
    }
}

/// The type of a pair, recomputed from its members' sexes.
pub fn pair_type(a: &BirthRecord, b: &BirthRecord) -> PairType {
    PairType::from_sexes(a.sex, b.sex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn child(death: Option<u32>, age: Option<u32>) -> BirthRecord {
        BirthRecord {
            child_id: "c".into(),
            mother_id: "m".into(),
            country: "XX".into(),
            society: Society::NonDiscriminatory,
            sex: Sex::Male,
            birth_year: 2000,
            birth_month: 1,
            multiplicity: 1,
            death_age_months: death,
            age_at_survey_months: age,
            survey_year: 2005,
            covariates: Covariates::default(),
        }
    }

    fn label(death: Option<u32>, age: Option<u32>, kind: WindowKind) -> Option<u8> {
        classify_window(&child(death, age), &kind.window()).unwrap()
    }

    #[test]
    fn neonatal_death_labels() {
        assert_eq!(label(Some(0), Some(70), WindowKind::NN), Some(1));
        assert_eq!(label(Some(0), None, WindowKind::PNN), None);
        assert_eq!(label(Some(0), None, WindowKind::I), Some(1));
        assert_eq!(label(Some(0), None, WindowKind::CH), None);
    }

    #[test]
    fn censored_child_is_ineligible() {
        assert_eq!(label(None, Some(6), WindowKind::I), None);
        assert_eq!(label(None, Some(6), WindowKind::NN), Some(0));
        assert_eq!(label(None, Some(12), WindowKind::I), Some(0));
        assert_eq!(label(None, Some(59), WindowKind::CH), None);
        assert_eq!(label(None, Some(60), WindowKind::CH), Some(0));
    }

    #[test]
    fn child_window_death() {
        assert_eq!(label(Some(14), None, WindowKind::CH), Some(1));
        assert_eq!(label(Some(14), None, WindowKind::I), Some(0));
        assert_eq!(label(Some(11), None, WindowKind::CH), None);
        assert_eq!(label(Some(11), None, WindowKind::PNN), Some(1));
        assert_eq!(label(Some(60), None, WindowKind::CH), Some(0));
    }

    #[test]
    fn missing_ages_is_a_data_error() {
        let err = classify_window(&child(None, None), &WindowKind::NN.window()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn unknown_window_is_config_error() {
        assert!(matches!("XX".parse::<WindowKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn pair_types() {
        assert_eq!(PairType::from_sexes(Sex::Male, Sex::Female), PairType::MF);
        assert_eq!(PairType::from_sexes(Sex::Female, Sex::Male), PairType::MF);
        assert_eq!(PairType::from_sexes(Sex::Male, Sex::Male), PairType::MM);
        assert_eq!(PairType::from_sexes(Sex::Female, Sex::Female), PairType::FF);
    }

    #[test]
    fn record_validation() {
        assert!(child(Some(5), Some(4)).validate().is_err());
        assert!(child(Some(4), Some(4)).validate().is_ok());
        assert!(child(None, None).validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_state() -> impl Strategy<Value = (Option<u32>, Option<u32>)> {
            prop_oneof![
                (0u32..80).prop_map(|d| (Some(d), None)),
                (0u32..80).prop_map(|a| (None, Some(a))),
            ]
        }

        proptest! {
            #[test]
            fn infant_partition((death, age) in any_state()) {
                let i = label(death, age, WindowKind::I);
                if let Some(outcome) = i {
                    let nn = label(death, age, WindowKind::NN) == Some(1);
                    let pnn = label(death, age, WindowKind::PNN) == Some(1);
                    prop_assert_eq!(outcome == 1, nn ^ pnn);
                }
            }

            #[test]
            fn conditional_windows_exclude_earlier_deaths((death, age) in any_state()) {
                if label(death, age, WindowKind::PNN).is_some() {
                    prop_assert!(death.map_or(true, |d| d >= 1));
                }
                if label(death, age, WindowKind::CH).is_some() {
                    prop_assert!(death.map_or(true, |d| d >= 12));
                }
            }
        }
    }
}
