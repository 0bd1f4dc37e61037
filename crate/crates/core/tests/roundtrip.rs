use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twingap::ingest::{match_twins, parse_births, write_births_file, BirthTable};
use twingap::synth::{generate, PerSociety, SynthConfig};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_mothers: PerSociety { nd: 200, d: 150 },
        twin_rate: 0.3,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn generate_write_parse() {
    let mut cfg = small(4);
    cfg.covariates.missing_rate = 0.1;
    let table = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("births.csv");
    write_births_file(&table, &path).unwrap();
    let back = parse_births(&path).unwrap();
    assert_eq!(back, table);

    let again = dir.path().join("again.csv");
    write_births_file(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

fn pair_summary(table: &BirthTable) -> (Vec<(String, String, String)>, String) {
    let (pairs, diag) = match_twins(table);
    let recs = table.records();
    let mut v: Vec<(String, String, String)> = pairs
        .iter()
        .map(|p| {
            let (a, b) = (&recs[p.a].child_id, &recs[p.b].child_id);
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            (a.clone(), b.clone(), format!("{:?}", p.pair_type))
        })
        .collect();
    v.sort();
    (v, serde_json::to_string(&diag).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matching_ignores_row_order(seed in 0u64..1000, shuffle in any::<u64>()) {
        let table = generate(&small(seed)).unwrap();
        let mut recs = table.records().to_vec();
        recs.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let shuffled = BirthTable::new(recs).unwrap();
        prop_assert_eq!(pair_summary(&table), pair_summary(&shuffled));
    }
}
