//! Cluster-bootstrap standard errors against the spread of estimates over
//! fresh simulated samples.

use twingap::decompose::{bootstrap_decomposition, decompose_all_with};
use twingap::domain::{Society, WindowKind};
use twingap::estimate::{FitKind, ModelSpec};
use twingap::pipeline::decomposition_fits;
use twingap::synth::{generate, PerSociety, SynthConfig};
use twingap::BirthTable;

const WINDOWS: [WindowKind; 1] = [WindowKind::I];

fn config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_mothers: PerSociety { nd: 800, d: 800 },
        twin_rate: 0.5,
        seed,
        ..SynthConfig::default()
    }
}

fn split(cfg: &SynthConfig) -> (BirthTable, BirthTable) {
    let mut t = generate(cfg).unwrap().split_by_society().unwrap();
    (
        t.remove(&Society::NonDiscriminatory).unwrap(),
        t.remove(&Society::Discriminatory).unwrap(),
    )
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn bootstrap_se_tracks_sampling_spread() {
    let (nd, d) = split(&config(1));
    let boot = bootstrap_decomposition(&nd, &d, &WINDOWS, 200, 17, &ModelSpec::none()).unwrap();
    let se = boot.periods[0].se.unwrap();
    let info = boot.bootstrap.unwrap();
    assert_eq!(info.replicates, 200);

    let mut draws: Vec<[f64; 6]> = Vec::new();
    for seed in 100..150 {
        let (nd, d) = split(&config(seed));
        let mut fits = decomposition_fits(&nd, Society::NonDiscriminatory, &WINDOWS, &ModelSpec::none()).unwrap();
        fits.extend(decomposition_fits(&d, Society::Discriminatory, &WINDOWS, &ModelSpec::none()).unwrap());
        draws.push(decompose_all_with(&fits, &WINDOWS, FitKind::Lpm).unwrap().periods[0].effects());
    }
    let col = |k: usize| draws.iter().map(|e| e[k]).collect::<Vec<_>>();
    for (name, boot_se, k) in [
        ("theta1_nd", se.theta1_nd, 0),
        ("theta2_nd", se.theta2_nd, 1),
        ("theta1_d", se.theta1_d, 3),
        ("theta3_d", se.theta3_d, 5),
    ] {
        let mc = sd(&col(k));
        let ratio = boot_se / mc;
        assert!((0.7..=1.3).contains(&ratio), "{name}: bootstrap {boot_se:.4} vs MC {mc:.4}");
    }
}

#[test]
fn same_seed_same_bootstrap() {
    let (nd, d) = split(&config(2));
    let a = bootstrap_decomposition(&nd, &d, &WINDOWS, 20, 5, &ModelSpec::none()).unwrap();
    let b = bootstrap_decomposition(&nd, &d, &WINDOWS, 20, 5, &ModelSpec::none()).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_decomposition(&nd, &d, &WINDOWS, 20, 6, &ModelSpec::none()).unwrap();
    assert_ne!(a.periods[0].se, c.periods[0].se);
}
