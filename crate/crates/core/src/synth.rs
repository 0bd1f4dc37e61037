//! Synthetic birth histories with planted prenatal, biology and
//! discrimination effects, plus the exact estimands those effects imply.
//!
//! Each delivery carries a binary prenatal factor `p`. It shifts the sex
//! ratio (`P(male | p=1) = 0.5 + δ`, `P(male | p=0) = 0.5 - δ`) and the death
//! hazard of both children. Twins share `p`; their sexes are independent
//! draws. Survival is a sequence of Bernoulli trials over the neonatal,
//! postneonatal and child windows with hazard
//!
//! ```text
//! base_w + biology_w·[male] + prenatal_w·p + discrimination_w·[female]·[society = D]
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{BirthRecord, Covariates, Education, Marital, Sex, Society, WindowKind};
use crate::error::{Error, Result};
use crate::ingest::BirthTable;

/// A value per society, serialized as `{"ND": .., "D": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerSociety<T> {
    #[serde(rename = "ND")]
    pub nd: T,
    #[serde(rename = "D")]
    pub d: T,
}

impl<T> PerSociety<T> {
    pub fn get(&self, s: Society) -> &T {
        match s {
            Society::NonDiscriminatory => &self.nd,
            Society::Discriminatory => &self.d,
        }
    }
}

/// Per-window death probabilities (or shifts) for the three sequential windows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hazards {
    #[serde(rename = "NN")]
    pub nn: f64,
    #[serde(rename = "PNN")]
    pub pnn: f64,
    #[serde(rename = "CH")]
    pub ch: f64,
}

impl Hazards {
    pub const fn new(nn: f64, pnn: f64, ch: f64) -> Self {
        Hazards { nn, pnn, ch }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.nn, self.pnn, self.ch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Deliveries {
    Fixed(u32),
    Range { min: u32, max: u32 },
}

impl Default for Deliveries {
    fn default() -> Self {
        Deliveries::Range { min: 1, max: 4 }
    }
}

/// Covariate generators. Defaults follow the twin column of the
/// sub-Saharan summary statistics; all covariates are mortality-neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateConfig {
    pub mother_age_mean: f64,
    pub mother_age_sd: f64,
    /// Probabilities of none / primary / secondary+.
    pub mother_edu: [f64; 3],
    pub father_edu: [f64; 3],
    /// Probabilities in [`Marital::ALL`] order.
    pub marital: [f64; 6],
    pub household_size_mean: f64,
    pub electricity: f64,
    pub radio: f64,
    pub tv: f64,
    pub car: f64,
    pub countries: PerSociety<Vec<String>>,
    /// Inclusive survey-year range.
    pub survey_years: (i32, i32),
    /// Probability that each optional covariate of a mother is missing.
    pub missing_rate: f64,
    /// Added to the electricity and TV probabilities of mothers whose first
    /// delivery has `p = 1`; zero keeps covariates independent of `p`.
    pub prenatal_asset_shift: f64,
}

impl Default for CovariateConfig {
    fn default() -> Self {
        CovariateConfig {
            mother_age_mean: 36.343,
            mother_age_sd: 7.521,
            mother_edu: [0.558, 0.335, 0.107],
            father_edu: [0.580, 0.351, 0.069],
            marital: [0.015, 0.771, 0.050, 0.096, 0.037, 0.031],
            household_size_mean: 8.447,
            electricity: 0.167,
            radio: 0.556,
            tv: 0.122,
            car: 0.039,
            countries: PerSociety {
                nd: vec!["BF".into(), "GH".into(), "NG".into()],
                d: vec!["IA".into()],
            },
            survey_years: (1990, 2008),
            missing_rate: 0.0,
            prenatal_asset_shift: 0.0,
        }
    }
}

/// Parameters of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_mothers: PerSociety<usize>,
    /// Probability that a delivery is a twin pair.
    pub twin_rate: f64,
    #[serde(default)]
    pub deliveries_per_mother: Deliveries,
    /// Probability that the prenatal factor is present.
    pub prenatal_prevalence: f64,
    /// Sex-ratio shift δ.
    pub sex_shift: f64,
    /// Draw `p` once per mother instead of once per delivery.
    #[serde(default)]
    pub prenatal_per_mother: bool,
    pub base_hazard: Hazards,
    pub biology_effect: Hazards,
    pub prenatal_mortality_effect: Hazards,
    /// Extra female hazard, applied only in the discriminatory society.
    pub discrimination_effect: Hazards,
    #[serde(default)]
    pub covariates: CovariateConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_mothers: PerSociety { nd: 1000, d: 1000 },
            twin_rate: 0.0155,
            deliveries_per_mother: Deliveries::default(),
            prenatal_prevalence: 0.5,
            sex_shift: 0.1,
            prenatal_per_mother: false,
            base_hazard: Hazards::new(0.05, 0.03, 0.02),
            biology_effect: Hazards::new(0.025, 0.01, -0.005),
            prenatal_mortality_effect: Hazards::new(0.05, 0.02, 0.01),
            discrimination_effect: Hazards::new(0.035, 0.02, 0.015),
            covariates: CovariateConfig::default(),
            seed: 20100501,
        }
    }
}

const WINDOW_MONTHS: [(u32, u32); 3] = [(0, 1), (1, 12), (12, 60)];

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Config(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn check_dist(name: &str, ps: &[f64]) -> Result<()> {
    for p in ps {
        check_prob(name, *p)?;
    }
    let total: f64 = ps.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("{name} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SynthConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Death probability in sequential window `w` (0 = NN, 1 = PNN, 2 = CH).
    pub fn hazard(&self, w: usize, sex: Sex, prenatal: bool, society: Society) -> f64 {
        let base = self.base_hazard.as_array()[w];
        let bio = self.biology_effect.as_array()[w];
        let pre = self.prenatal_mortality_effect.as_array()[w];
        let disc = self.discrimination_effect.as_array()[w];
        base + if sex.is_male() { bio } else { 0.0 }
            + if prenatal { pre } else { 0.0 }
            + if !sex.is_male() && society == Society::Discriminatory { disc } else { 0.0 }
    }

    pub fn p_male(&self, prenatal: bool) -> f64 {
        if prenatal {
            0.5 + self.sex_shift
        } else {
            0.5 - self.sex_shift
        }
    }

    /// Fails on any probability outside `[0, 1]`; nothing is clamped.
    pub fn validate(&self) -> Result<()> {
        check_prob("twin_rate", self.twin_rate)?;
        check_prob("prenatal_prevalence", self.prenatal_prevalence)?;
        if !(0.0..=0.5).contains(&self.sex_shift) {
            return Err(Error::Config(format!("sex_shift = {} outside [0, 0.5]", self.sex_shift)));
        }
        for (w, name) in ["NN", "PNN", "CH"].iter().enumerate() {
            for society in Society::ALL {
                for sex in [Sex::Male, Sex::Female] {
                    for prenatal in [false, true] {
                        let h = self.hazard(w, sex, prenatal, society);
                        if !(0.0..=1.0).contains(&h) || h.is_nan() {
                            return Err(Error::Config(format!(
                                "{name} death probability {h} outside [0, 1] for {:?}, p = {}, society {society}",
                                sex, prenatal as u8
                            )));
                        }
                    }
                }
            }
        }
        match self.deliveries_per_mother {
            Deliveries::Fixed(0) => return Err(Error::Config("deliveries_per_mother must be >= 1".into())),
            Deliveries::Range { min, max } if min == 0 || min > max => {
                return Err(Error::Config(format!("invalid delivery range {min}..={max}")))
            }
            _ => {}
        }
        let c = &self.covariates;
        check_dist("mother_edu", &c.mother_edu)?;
        check_dist("father_edu", &c.father_edu)?;
        check_dist("marital", &c.marital)?;
        for (name, p) in [
            ("electricity", c.electricity),
            ("radio", c.radio),
            ("tv", c.tv),
            ("car", c.car),
            ("missing_rate", c.missing_rate),
            ("electricity + prenatal_asset_shift", c.electricity + c.prenatal_asset_shift),
            ("tv + prenatal_asset_shift", c.tv + c.prenatal_asset_shift),
        ] {
            check_prob(name, p)?;
        }
        if !(c.mother_age_sd >= 0.0) || !(c.household_size_mean >= 1.0) {
            return Err(Error::Config("mother_age_sd must be >= 0 and household_size_mean >= 1".into()));
        }
        if c.survey_years.0 > c.survey_years.1 {
            return Err(Error::Config("survey_years range is empty".into()));
        }
        for s in Society::ALL {
            if *self.n_mothers.get(s) > 0 && c.countries.get(s).is_empty() {
                return Err(Error::Config(format!("no countries configured for society {s}")));
            }
        }
        Ok(())
    }

    /// Expected births per mother.
    pub fn expected_births_per_mother(&self) -> f64 {
        let deliveries = match self.deliveries_per_mother {
            Deliveries::Fixed(k) => k as f64,
            Deliveries::Range { min, max } => (min + max) as f64 / 2.0,
        };
        deliveries * (1.0 + self.twin_rate)
    }

    /// Mothers per society needed for roughly `births` births in each society.
    pub fn with_births_per_society(mut self, births: usize) -> Self {
        let m = (births as f64 / self.expected_births_per_mother()).round() as usize;
        self.n_mothers = PerSociety { nd: m, d: m };
        self
    }
}

/// Generator-internal facts about one child, for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub child_id: String,
    pub prenatal: bool,
    /// Delivery index within the mother.
    pub delivery: u32,
}

fn stream_id(society: Society, mother: usize) -> u64 {
    let tag: u64 = match society {
        Society::NonDiscriminatory => 1,
        Society::Discriminatory => 2,
    };
    (tag << 48) | mother as u64
}

fn categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn maybe<T, R: Rng>(rng: &mut R, missing_rate: f64, value: T) -> Option<T> {
    if missing_rate > 0.0 && rng.random_bool(missing_rate) {
        None
    } else {
        Some(value)
    }
}

fn gen_mother(cfg: &SynthConfig, society: Society, idx: usize) -> Vec<(BirthRecord, AuditRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream_id(society, idx));
    let c = &cfg.covariates;
    let mother_id = format!("{}{idx:07}", society.code());

    let countries = c.countries.get(society);
    let country = countries[rng.random_range(0..countries.len())].clone();
    let survey_year = rng.random_range(c.survey_years.0..=c.survey_years.1);
    let survey_month = rng.random_range(0..12i32);
    let n_deliveries = match cfg.deliveries_per_mother {
        Deliveries::Fixed(k) => k,
        Deliveries::Range { min, max } => rng.random_range(min..=max),
    };
    let mother_prenatal = rng.random_bool(cfg.prenatal_prevalence);

    let age = if c.mother_age_sd > 0.0 {
        Normal::new(c.mother_age_mean, c.mother_age_sd)
            .expect("validated sd")
            .sample(&mut rng)
    } else {
        c.mother_age_mean
    };
    let household = if c.household_size_mean > 1.0 {
        1 + Poisson::new(c.household_size_mean - 1.0)
            .expect("validated mean")
            .sample(&mut rng) as u32
    } else {
        1
    };
    let shift = if mother_prenatal { c.prenatal_asset_shift } else { 0.0 };
    let miss = c.missing_rate;
    let covariates = Covariates {
        mother_age: maybe(&mut rng, miss, age.round().clamp(12.0, 99.0) as u32),
        mother_edu: {
            let v = Education::ALL[categorical(&mut rng, &c.mother_edu)];
            maybe(&mut rng, miss, v)
        },
        mother_marital: {
            let v = Marital::ALL[categorical(&mut rng, &c.marital)];
            maybe(&mut rng, miss, v)
        },
        father_edu: {
            let v = Education::ALL[categorical(&mut rng, &c.father_edu)];
            maybe(&mut rng, miss, v)
        },
        household_size: maybe(&mut rng, miss, household),
        electricity: {
            let v = rng.random_bool(c.electricity + shift);
            maybe(&mut rng, miss, v)
        },
        radio: {
            let v = rng.random_bool(c.radio);
            maybe(&mut rng, miss, v)
        },
        tv: {
            let v = rng.random_bool(c.tv + shift);
            maybe(&mut rng, miss, v)
        },
        car: {
            let v = rng.random_bool(c.car);
            maybe(&mut rng, miss, v)
        },
    };

    let mut out = Vec::new();
    for k in 0..n_deliveries {
        // deliveries are at least 30 months apart, all older than 60 months
        let age_months = 60 + 30 * k + rng.random_range(0..30u32);
        let months = survey_year * 12 + survey_month - age_months as i32;
        let birth_year = months.div_euclid(12);
        let birth_month = (months.rem_euclid(12) + 1) as u8;
        let prenatal = if cfg.prenatal_per_mother || k == 0 {
            mother_prenatal
        } else {
            rng.random_bool(cfg.prenatal_prevalence)
        };
        let multiplicity: u8 = if rng.random_bool(cfg.twin_rate) { 2 } else { 1 };
        let p_male = cfg.p_male(prenatal);
        for j in 0..multiplicity {
            let sex = if rng.random_bool(p_male) { Sex::Male } else { Sex::Female };
            let mut death = None;
            for (w, &(lo, hi)) in WINDOW_MONTHS.iter().enumerate() {
                if rng.random_bool(cfg.hazard(w, sex, prenatal, society)) {
                    death = Some(rng.random_range(lo..hi));
                    break;
                }
            }
            let child_id = format!("{mother_id}-{k}-{j}");
            out.push((
                BirthRecord {
                    child_id: child_id.clone(),
                    mother_id: mother_id.clone(),
                    country: country.clone(),
                    society,
                    sex,
                    birth_year,
                    birth_month,
                    multiplicity,
                    death_age_months: death,
                    age_at_survey_months: Some(age_months),
                    survey_year,
                    covariates: covariates.clone(),
                },
                AuditRecord {
                    child_id,
                    prenatal,
                    delivery: k,
                },
            ));
        }
    }
    out
}

fn all_mothers(cfg: &SynthConfig) -> Vec<(Society, usize)> {
    Society::ALL
        .into_iter()
        .flat_map(|s| (0..*cfg.n_mothers.get(s)).map(move |i| (s, i)))
        .collect()
}

/// Generates a table together with the per-child audit trail.
///
/// Every mother draws from her own ChaCha stream keyed by (seed, society,
/// mother index), so output does not depend on the number of workers.
pub fn generate_with_audit(cfg: &SynthConfig) -> Result<(BirthTable, Vec<AuditRecord>)> {
    cfg.validate()?;
    let mothers = all_mothers(cfg);
    #[cfg(feature = "parallel")]
    let per_mother: Vec<_> = {
        use rayon::prelude::*;
        mothers.par_iter().map(|&(s, i)| gen_mother(cfg, s, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_mother: Vec<_> = mothers.iter().map(|&(s, i)| gen_mother(cfg, s, i)).collect();

    let total = per_mother.iter().map(Vec::len).sum();
    let mut records = Vec::with_capacity(total);
    let mut audit = Vec::with_capacity(total);
    for (r, a) in per_mother.into_iter().flatten() {
        records.push(r);
        audit.push(a);
    }
    Ok((BirthTable::new(records)?, audit))
}

pub fn generate(cfg: &SynthConfig) -> Result<BirthTable> {
    generate_with_audit(cfg).map(|(t, _)| t)
}

/// Exact estimands implied by a configuration for one (society, window).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedCell {
    pub society: Society,
    pub window: WindowKind,
    /// Population male-female gap among eligible children.
    pub theta: f64,
    /// Population mean within-pair gap over complete MF pairs.
    pub theta_tfe: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffects {
    pub cells: Vec<PlantedCell>,
}

impl PlantedEffects {
    pub fn get(&self, society: Society, window: WindowKind) -> &PlantedCell {
        self.cells
            .iter()
            .find(|c| c.society == society && c.window == window)
            .expect("planted effects cover every society and window")
    }
}

/// (probability of being at risk, death probability given at risk).
fn window_risk(h: [f64; 3], window: WindowKind) -> (f64, f64) {
    match window {
        WindowKind::NN => (1.0, h[0]),
        WindowKind::PNN => (1.0 - h[0], h[1]),
        WindowKind::I => (1.0, 1.0 - (1.0 - h[0]) * (1.0 - h[1])),
        WindowKind::CH => ((1.0 - h[0]) * (1.0 - h[1]), h[2]),
    }
}

/// Population gap and twin-FE estimand for one society and window, by
/// enumeration over the prenatal factor and sex.
fn population_estimands(cfg: &SynthConfig, society: Society, window: WindowKind) -> (f64, f64) {
    let hz = |sex: Sex, p: bool| -> [f64; 3] { std::array::from_fn(|w| cfg.hazard(w, sex, p, society)) };
    let prior = |p: bool| if p { cfg.prenatal_prevalence } else { 1.0 - cfg.prenatal_prevalence };

    let mut num = BTreeMap::new();
    let mut den = BTreeMap::new();
    let (mut tfe_num, mut tfe_den) = (0.0, 0.0);
    for p in [false, true] {
        let pm = cfg.p_male(p);
        let (em, qm) = window_risk(hz(Sex::Male, p), window);
        let (ef, qf) = window_risk(hz(Sex::Female, p), window);
        for (sex, w, e, q) in [(Sex::Male, pm, em, qm), (Sex::Female, 1.0 - pm, ef, qf)] {
            *num.entry(sex).or_insert(0.0) += prior(p) * w * e * q;
            *den.entry(sex).or_insert(0.0) += prior(p) * w * e;
        }
        // complete MF pair: both members at risk, sexes independent given p
        let weight = prior(p) * 2.0 * pm * (1.0 - pm) * em * ef;
        tfe_num += weight * (qm - qf);
        tfe_den += weight;
    }
    let rate = |s: Sex| num[&s] / den[&s];
    let gap = rate(Sex::Male) - rate(Sex::Female);
    let tfe = if tfe_den > 0.0 { tfe_num / tfe_den } else { f64::NAN };
    (gap, tfe)
}

/// Estimands the pipeline should recover for every society and window.
///
/// `theta` and `theta_tfe` are the probability limits of the all-twins LPM
/// and the twin fixed-effect estimator; the three effects follow from them
/// exactly as the decomposition combines fitted values.
pub fn planted_thetas(cfg: &SynthConfig) -> PlantedEffects {
    let mut cells = Vec::new();
    for window in WindowKind::ALL {
        let (gap_nd, tfe_nd) = population_estimands(cfg, Society::NonDiscriminatory, window);
        for society in Society::ALL {
            let (gap, tfe) = match society {
                Society::NonDiscriminatory => (gap_nd, tfe_nd),
                Society::Discriminatory => population_estimands(cfg, society, window),
            };
            cells.push(PlantedCell {
                society,
                window,
                theta: gap,
                theta_tfe: tfe,
                theta1: gap - tfe,
                theta2: tfe_nd,
                theta3: match society {
                    Society::NonDiscriminatory => 0.0,
                    Society::Discriminatory => tfe - tfe_nd,
                },
            });
        }
    }
    PlantedEffects { cells }
}

/// Closed-form neonatal effects `(θ1, θ2, θ3)` for one society:
/// `θ1 = e·(E[p | male] - E[p | female])`, `θ2 = b`, `θ3 = -d` in D.
pub fn neonatal_closed_form(cfg: &SynthConfig, society: Society) -> (f64, f64, f64) {
    let pi = cfg.prenatal_prevalence;
    let (m1, m0) = (cfg.p_male(true), cfg.p_male(false));
    let e_p_male = pi * m1 / (pi * m1 + (1.0 - pi) * m0);
    let e_p_female = pi * (1.0 - m1) / (pi * (1.0 - m1) + (1.0 - pi) * (1.0 - m0));
    let theta1 = cfg.prenatal_mortality_effect.nn * (e_p_male - e_p_female);
    let theta3 = match society {
        Society::NonDiscriminatory => 0.0,
        Society::Discriminatory => -cfg.discrimination_effect.nn,
    };
    (theta1, cfg.biology_effect.nn, theta3)
}
