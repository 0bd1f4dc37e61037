//! Descriptive tables on fixtures built from published sample counts.

use twingap::domain::{BirthRecord, Covariates, Sex, Society};
use twingap::ingest::{match_twins, BirthTable};
use twingap::report::{covariate_summary, render, sex_ratio_table, Format, RenderOptions};
use twingap::synth::{generate, PerSociety, SynthConfig};

struct Counts {
    society: Society,
    mf: usize,
    mm: usize,
    ff: usize,
    singletons: usize,
    singleton_male_share: f64,
}

// Twin pairs at full size; singletons at one tenth.
const PUBLISHED: [Counts; 2] = [
    Counts {
        society: Society::NonDiscriminatory,
        mf: 10_077,
        mm: 7_805,
        ff: 7_615,
        singletons: 161_948,
        singleton_male_share: 0.508,
    },
    Counts {
        society: Society::Discriminatory,
        mf: 1_116,
        mm: 1_221,
        ff: 1_123,
        singletons: 53_706,
        singleton_male_share: 0.520,
    },
];

fn birth(society: Society, id: String, mother: String, sex: Sex, multiplicity: u8) -> BirthRecord {
    BirthRecord {
        child_id: id,
        mother_id: mother,
        country: "XX".into(),
        society,
        sex,
        birth_year: 1999,
        birth_month: 6,
        multiplicity,
        death_age_months: None,
        age_at_survey_months: Some(70),
        survey_year: 2005,
        covariates: Covariates::default(),
    }
}

fn fixture(c: &Counts) -> BirthTable {
    let s = c.society;
    let mut recs = Vec::new();
    let mut k = 0usize;
    for (n, a, b) in [(c.mf, Sex::Male, Sex::Female), (c.mm, Sex::Male, Sex::Male), (c.ff, Sex::Female, Sex::Female)] {
        for _ in 0..n {
            let m = format!("{s}t{k}");
            recs.push(birth(s, format!("{m}a"), m.clone(), a, 2));
            recs.push(birth(s, format!("{m}b"), m, b, 2));
            k += 1;
        }
    }
    let males = (c.singletons as f64 * c.singleton_male_share).round() as usize;
    for i in 0..c.singletons {
        let sex = if i < males { Sex::Male } else { Sex::Female };
        recs.push(birth(s, format!("{s}s{i}"), format!("{s}s{i}"), sex, 1));
    }
    BirthTable::new(recs).unwrap()
}

#[test]
fn published_sex_ratios() {
    // (all twins, same-sex, singletons, pooled boys per girl)
    let expected = [(0.504, 0.506, 0.508, 1.032), (0.514, 0.521, 0.520, 1.08)];
    for (c, (all, same, single, pooled)) in PUBLISHED.iter().zip(expected) {
        let t = fixture(c);
        let (pairs, diag) = match_twins(&t);
        assert_eq!((diag.pairs_mf, diag.pairs_mm, diag.pairs_ff), (c.mf, c.mm, c.ff));
        let s = sex_ratio_table(&t, &pairs);
        let get = |g: &str| s.get(c.society, g).unwrap();
        assert_eq!(get("all_twins").n, 2 * (c.mf + c.mm + c.ff));
        assert!((get("all_twins").prop_male - all).abs() < 0.0005);
        assert!((get("same_sex").prop_male - same).abs() < 0.0005);
        assert!((get("singletons").prop_male - single).abs() < 0.0005);
        assert_eq!(get("male_female").prop_male, 0.5);
        assert_eq!(get("male_male").prop_male, 1.0);
        assert_eq!(get("female_female").sd, 0.0);
        assert!((get("singletons").sd - 0.500).abs() < 0.0005);
        // singletons are scaled down, which moves the pooled ratio by < 0.005
        assert!((s.pooled[0].ratio - pooled).abs() < 0.005, "{}", s.pooled[0].ratio);

        let md = render(&s, Format::Markdown, RenderOptions::default()).unwrap();
        assert!(md.contains(&format!("| {} | same_sex |", c.society)));
    }
}

#[test]
fn synthetic_twin_mothers_match_calibration() {
    let cfg = SynthConfig {
        n_mothers: PerSociety { nd: 6000, d: 10 },
        twin_rate: 0.5,
        ..SynthConfig::default()
    };
    let s = covariate_summary(&generate(&cfg).unwrap()).unwrap();
    let age = s.get(Society::NonDiscriminatory, "twins", "mother_age").unwrap();
    assert!((age.mean - 36.343).abs() < 0.3, "{}", age.mean);
    assert!((age.sd - 7.521).abs() < 0.3, "{}", age.sd);
    let male = s.get(Society::NonDiscriminatory, "singletons", "child_is_male").unwrap();
    assert!((male.mean - 0.5).abs() < 0.02);
}
