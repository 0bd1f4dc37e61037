//! Splits the male-female mortality gap into prenatal-environment,
//! child-biology and parental-preference effects.
//!
//! For each window, with cross-sectional gaps `θ` and twin fixed-effect gaps
//! `θ_TFE` in the non-discriminatory (ND) and discriminatory (D) society:
//!
//! ```text
//! θ1_ND = θ_ND − θ_TFE_ND    θ2_ND = θ_TFE_ND    θ3_ND = 0
//! θ1_D  = θ_D  − θ_TFE_D     θ2_D  = θ_TFE_ND    θ3_D  = θ_TFE_D − θ_TFE_ND
//! ```
//!
//! A negative `θ3_D` means parental preferences raise female mortality
//! relative to male mortality.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BirthRecord, Society, WindowKind};
use crate::error::{Error, Result};
use crate::estimate::{FitKind, ModelSpec, Theta};
use crate::ingest::BirthTable;
use crate::pipeline;

/// The four fitted gaps one window needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodInputs {
    pub theta_nd: f64,
    pub theta_tfe_nd: f64,
    pub theta_d: f64,
    pub theta_tfe_d: f64,
}

/// Bootstrap standard errors of the decomposed effects. `θ3_ND` is zero by
/// construction and has none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSes {
    pub theta1_nd: f64,
    pub theta2_nd: f64,
    pub theta1_d: f64,
    pub theta2_d: f64,
    pub theta3_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodDecomposition {
    pub window: WindowKind,
    #[serde(flatten)]
    pub inputs: PeriodInputs,
    pub theta1_nd: f64,
    pub theta2_nd: f64,
    pub theta3_nd: f64,
    pub theta1_d: f64,
    pub theta2_d: f64,
    pub theta3_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<EffectSes>,
}

impl PeriodDecomposition {
    /// `[θ1_ND, θ2_ND, θ3_ND, θ1_D, θ2_D, θ3_D]`.
    pub fn effects(&self) -> [f64; 6] {
        [
            self.theta1_nd,
            self.theta2_nd,
            self.theta3_nd,
            self.theta1_d,
            self.theta2_d,
            self.theta3_d,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Gaps typed in directly.
    Direct,
    /// Gaps taken from fitted models, identified as `society/window/estimator`.
    Fits { cells: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInfo {
    pub replicates: usize,
    pub discarded: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTable {
    pub periods: Vec<PeriodDecomposition>,
    pub source: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapInfo>,
}

impl DecompositionTable {
    pub fn get(&self, window: WindowKind) -> Option<&PeriodDecomposition> {
        self.periods.iter().find(|p| p.window == window)
    }
}

/// Decomposes one window.
pub fn decompose_period(
    theta_nd: f64,
    theta_tfe_nd: f64,
    theta_d: f64,
    theta_tfe_d: f64,
    window: WindowKind,
) -> Result<PeriodDecomposition> {
    for (name, v) in [
        ("theta_nd", theta_nd),
        ("theta_tfe_nd", theta_tfe_nd),
        ("theta_d", theta_d),
        ("theta_tfe_d", theta_tfe_d),
    ] {
        if !v.is_finite() {
            return Err(Error::Data(format!("{name} for window {window} is not finite ({v})")));
        }
    }
    Ok(PeriodDecomposition {
        window,
        inputs: PeriodInputs {
            theta_nd,
            theta_tfe_nd,
            theta_d,
            theta_tfe_d,
        },
        theta1_nd: theta_nd - theta_tfe_nd,
        theta2_nd: theta_tfe_nd,
        theta3_nd: 0.0,
        theta1_d: theta_d - theta_tfe_d,
        theta2_d: theta_tfe_nd,
        theta3_d: theta_tfe_d - theta_tfe_nd,
        se: None,
    })
}

/// Key of a fitted cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FitKey {
    pub society: Society,
    pub window: WindowKind,
    pub kind: FitKind,
}

impl FitKey {
    pub fn new(society: Society, window: WindowKind, kind: FitKind) -> Self {
        FitKey { society, window, kind }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.society, self.window, self.kind.code())
    }
}

/// Decomposes every requested window from fitted models. The cross-sectional
/// input is the controls-included LPM; the within-pair input is the twin FE.
pub fn decompose_all<T: Theta>(
    fits: &BTreeMap<FitKey, T>,
    windows: &[WindowKind],
) -> Result<DecompositionTable> {
    decompose_all_with(fits, windows, FitKind::LpmControls)
}

/// As [`decompose_all`], taking the cross-sectional gap from `cross_kind`.
pub fn decompose_all_with<T: Theta>(
    fits: &BTreeMap<FitKey, T>,
    windows: &[WindowKind],
    cross_kind: FitKind,
) -> Result<DecompositionTable> {
    let mut periods = Vec::new();
    let mut cells = Vec::new();
    for &window in canonical(windows).iter() {
        let mut get = |society, kind| -> Result<f64> {
            let key = FitKey::new(society, window, kind);
            let fit = fits
                .get(&key)
                .ok_or_else(|| Error::Data(format!("missing fit for cell {}", key.label())))?;
            cells.push(key.label());
            Ok(fit.theta())
        };
        let theta_nd = get(Society::NonDiscriminatory, cross_kind)?;
        let tfe_nd = get(Society::NonDiscriminatory, FitKind::TwinFe)?;
        let theta_d = get(Society::Discriminatory, cross_kind)?;
        let tfe_d = get(Society::Discriminatory, FitKind::TwinFe)?;
        periods.push(decompose_period(theta_nd, tfe_nd, theta_d, tfe_d, window)?);
    }
    Ok(DecompositionTable {
        periods,
        source: Provenance::Fits { cells },
        bootstrap: None,
    })
}

fn canonical(windows: &[WindowKind]) -> Vec<WindowKind> {
    WindowKind::ALL.into_iter().filter(|w| windows.contains(w)).collect()
}

/// Direct-entry input: `{"I": {"theta_nd": .., "theta_tfe_nd": .., "theta_d": .., "theta_tfe_d": ..}, ...}`.
pub fn parse_direct(text: &str) -> Result<BTreeMap<WindowKind, PeriodInputs>> {
    let raw: BTreeMap<String, PeriodInputs> = serde_json::from_str(text)?;
    if raw.is_empty() {
        return Err(Error::Data("coefficient file lists no windows".into()));
    }
    raw.into_iter().map(|(k, v)| Ok((k.parse::<WindowKind>()?, v))).collect()
}

/// Decomposes directly entered gaps, in canonical window order.
pub fn decompose_direct(inputs: &BTreeMap<WindowKind, PeriodInputs>) -> Result<DecompositionTable> {
    let windows: Vec<WindowKind> = inputs.keys().copied().collect();
    let periods = canonical(&windows)
        .into_iter()
        .map(|w| {
            let i = inputs[&w];
            decompose_period(i.theta_nd, i.theta_tfe_nd, i.theta_d, i.theta_tfe_d, w)
        })
        .collect::<Result<_>>()?;
    Ok(DecompositionTable {
        periods,
        source: Provenance::Direct,
        bootstrap: None,
    })
}

/// Largest tolerated share of discarded bootstrap replicates.
pub const MAX_DISCARD_SHARE: f64 = 0.2;

/// Resamples whole mothers with replacement. Resampled copies get distinct
/// mother and child ids (`#<draw>` suffix) so each draw is its own cluster.
pub fn resample_mothers<R: Rng>(table: &BirthTable, rng: &mut R) -> Result<BirthTable> {
    let m = table.n_mothers();
    let mut records: Vec<BirthRecord> = Vec::with_capacity(table.len());
    for draw in 0..m {
        let mother = rng.random_range(0..m) as u32;
        for &i in table.mother_members(mother) {
            let mut r = table.records()[i].clone();
            r.mother_id = format!("{}#{draw}", r.mother_id);
            r.child_id = format!("{}#{draw}", r.child_id);
            records.push(r);
        }
    }
    BirthTable::new(records)
}

fn replicate_rng(seed: u64, replicate: usize, society: Society) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = match society {
        Society::NonDiscriminatory => 0u64,
        Society::Discriminatory => 1u64,
    };
    rng.set_stream(((replicate as u64) << 1) | tag);
    rng
}

fn run_replicate(
    tables: [&BirthTable; 2],
    windows: &[WindowKind],
    spec: &ModelSpec,
    seed: u64,
    b: usize,
) -> Option<DecompositionTable> {
    let nd = resample_mothers(tables[0], &mut replicate_rng(seed, b, Society::NonDiscriminatory)).ok()?;
    let d = resample_mothers(tables[1], &mut replicate_rng(seed, b, Society::Discriminatory)).ok()?;
    let mut fits = BTreeMap::new();
    for (society, t) in [(Society::NonDiscriminatory, &nd), (Society::Discriminatory, &d)] {
        fits.extend(pipeline::decomposition_fits(t, society, windows, spec).ok()?);
    }
    decompose_all_with(&fits, windows, pipeline::cross_kind(spec)).ok()
}

fn sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Point decomposition with mother-level cluster-bootstrap standard errors.
///
/// Mothers are resampled independently within each society and the whole
/// pipeline (matching, samples, fits, decomposition) reruns per replicate.
/// Replicate streams derive from `(seed, replicate)`, so results do not
/// depend on scheduling. With `replicates == 0` no SEs are attached.
pub fn bootstrap_decomposition(
    table_nd: &BirthTable,
    table_d: &BirthTable,
    windows: &[WindowKind],
    replicates: usize,
    seed: u64,
    spec: &ModelSpec,
) -> Result<DecompositionTable> {
    let mut fits = BTreeMap::new();
    fits.extend(pipeline::decomposition_fits(table_nd, Society::NonDiscriminatory, windows, spec)?);
    fits.extend(pipeline::decomposition_fits(table_d, Society::Discriminatory, windows, spec)?);
    let mut table = decompose_all_with(&fits, windows, pipeline::cross_kind(spec))?;
    if replicates == 0 {
        return Ok(table);
    }

    let tables = [table_nd, table_d];
    #[cfg(feature = "parallel")]
    let results: Vec<Option<DecompositionTable>> = {
        use rayon::prelude::*;
        (0..replicates)
            .into_par_iter()
            .map(|b| run_replicate(tables, windows, spec, seed, b))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Option<DecompositionTable>> = (0..replicates)
        .map(|b| run_replicate(tables, windows, spec, seed, b))
        .collect();

    let ok: Vec<DecompositionTable> = results.into_iter().flatten().collect();
    let discarded = replicates - ok.len();
    if discarded as f64 > MAX_DISCARD_SHARE * replicates as f64 {
        return Err(Error::Estimation(format!(
            "{discarded} of {replicates} bootstrap replicates had an empty required cell"
        )));
    }
    if ok.len() < 2 {
        return Err(Error::Estimation("fewer than two usable bootstrap replicates".into()));
    }
    if discarded > 0 {
        log::warn!("discarded {discarded} of {replicates} bootstrap replicates");
    }
    for period in table.periods.iter_mut() {
        let column = |f: fn(&PeriodDecomposition) -> f64| -> f64 {
            let vals: Vec<f64> = ok.iter().filter_map(|t| t.get(period.window)).map(f).collect();
            sd(&vals)
        };
        period.se = Some(EffectSes {
            theta1_nd: column(|p| p.theta1_nd),
            theta2_nd: column(|p| p.theta2_nd),
            theta1_d: column(|p| p.theta1_d),
            theta2_d: column(|p| p.theta2_d),
            theta3_d: column(|p| p.theta3_d),
        });
    }
    table.bootstrap = Some(BootstrapInfo {
        replicates,
        discarded,
        seed,
    });
    Ok(table)
}
