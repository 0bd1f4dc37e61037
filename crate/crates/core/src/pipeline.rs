//! End-to-end analysis: matching, samples, every fit, the decomposition and
//! the descriptive tables, plus a deterministic writer for the results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::decompose::{bootstrap_decomposition, decompose_all_with, DecompositionTable, FitKey};
use crate::domain::{Society, WindowKind};
use crate::error::{Error, Result};
use crate::estimate::{fit_family_fe, fit_lpm, fit_pair_fe, fit_twin_fe, Controls, FitKind, ModelSpec, RegressionFit};
use crate::ingest::{build_sample, match_twins, BirthTable, MatchDiagnostics, SampleMode, TwinPairSet};
use crate::report::{
    covariate_summary, mortality_rate_table, render, sex_ratio_table, CovariateSummary, Format, RateTable,
    RenderOptions, SexRatioSummary,
};

/// The LPM variant whose male coefficient is the cross-sectional gap.
pub fn cross_kind(spec: &ModelSpec) -> FitKind {
    match spec.controls {
        Controls::None => FitKind::Lpm,
        Controls::Full => FitKind::LpmControls,
    }
}

/// The two fits per window that feed the decomposition: the cross-sectional
/// LPM over all twins and the twin FE over complete MF pairs.
pub fn decomposition_fits(
    table: &BirthTable,
    society: Society,
    windows: &[WindowKind],
    spec: &ModelSpec,
) -> Result<BTreeMap<FitKey, RegressionFit>> {
    let (pairs, _) = match_twins(table);
    let mut out = BTreeMap::new();
    for &w in windows {
        let all = build_sample(table, &pairs, w, SampleMode::AllTwins)?;
        let fit = fit_lpm(table, &all, spec).map_err(|e| cell_error(society, w, cross_kind(spec), e))?;
        out.insert(FitKey::new(society, w, cross_kind(spec)), fit);
        let mf = build_sample(table, &pairs, w, SampleMode::MfPairs)?;
        let fit = fit_twin_fe(&mf).map_err(|e| cell_error(society, w, FitKind::TwinFe, e))?;
        out.insert(FitKey::new(society, w, FitKind::TwinFe), fit);
    }
    Ok(out)
}

fn cell_error(society: Society, window: WindowKind, kind: FitKind, e: Error) -> Error {
    match e {
        Error::Estimation(m) => Error::Estimation(format!("{}: {m}", FitKey::new(society, window, kind).label())),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub windows: Vec<WindowKind>,
    /// Control set of the cross-sectional gap used in the decomposition.
    pub spec: ModelSpec,
    /// Cluster-bootstrap replicates; 0 skips standard errors.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            windows: WindowKind::ALL.to_vec(),
            spec: ModelSpec::none(),
            bootstrap: 0,
            seed: 0,
        }
    }
}

/// Everything computed by [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub diagnostics: BTreeMap<Society, MatchDiagnostics>,
    pub fits: BTreeMap<FitKey, RegressionFit>,
    /// Present when both societies are in the data.
    pub decomposition: Option<DecompositionTable>,
    pub sex_ratios: SexRatioSummary,
    pub rates: RateTable,
    pub covariates: CovariateSummary,
}

struct Task<'a> {
    society: Society,
    table: &'a BirthTable,
    pairs: &'a TwinPairSet,
    window: WindowKind,
    kind: FitKind,
    required: bool,
}

fn run_task(t: &Task<'_>, spec: &ModelSpec) -> Result<RegressionFit> {
    let sample = |mode| build_sample(t.table, t.pairs, t.window, mode);
    let fit = match t.kind {
        FitKind::Lpm => fit_lpm(t.table, &sample(SampleMode::AllTwins)?, &ModelSpec { controls: Controls::None, ..*spec }),
        FitKind::LpmControls => fit_lpm(t.table, &sample(SampleMode::AllTwins)?, &ModelSpec { controls: Controls::Full, ..*spec }),
        FitKind::TwinFe => fit_twin_fe(&sample(SampleMode::MfPairs)?),
        FitKind::PairFe => fit_pair_fe(&sample(SampleMode::AllTwins)?),
        FitKind::FamilyFe => fit_family_fe(&sample(SampleMode::All)?),
    };
    fit.map_err(|e| cell_error(t.society, t.window, t.kind, e))
}

#[cfg(feature = "parallel")]
fn run_all(tasks: &[Task<'_>], spec: &ModelSpec) -> Vec<Result<RegressionFit>> {
    use rayon::prelude::*;
    tasks.par_iter().map(|t| run_task(t, spec)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(tasks: &[Task<'_>], spec: &ModelSpec) -> Vec<Result<RegressionFit>> {
    tasks.iter().map(|t| run_task(t, spec)).collect()
}

/// Runs the full analysis on per-society tables.
///
/// The cross-sectional LPM in `opts.spec` and the twin FE are required; a
/// failure there is an error. The other estimators (the alternative LPM, pair
/// FE and family FE) are skipped with a warning when they cannot be fit.
pub fn analyze(tables: &BTreeMap<Society, BirthTable>, opts: &AnalyzeOptions) -> Result<Analysis> {
    if tables.is_empty() || tables.values().all(BirthTable::is_empty) {
        return Err(Error::Data("no births to analyze".into()));
    }
    if opts.windows.is_empty() {
        return Err(Error::Config("no windows requested".into()));
    }
    let matched: BTreeMap<Society, (TwinPairSet, MatchDiagnostics)> =
        tables.iter().map(|(s, t)| (*s, match_twins(t))).collect();

    let required = cross_kind(&opts.spec);
    let mut tasks = Vec::new();
    for (&society, table) in tables {
        let pairs = &matched[&society].0;
        for &window in &opts.windows {
            for kind in [FitKind::Lpm, FitKind::LpmControls, FitKind::TwinFe, FitKind::PairFe, FitKind::FamilyFe] {
                tasks.push(Task {
                    society,
                    table,
                    pairs,
                    window,
                    kind,
                    required: kind == required || kind == FitKind::TwinFe,
                });
            }
        }
    }
    let mut fits = BTreeMap::new();
    for (task, result) in tasks.iter().zip(run_all(&tasks, &opts.spec)) {
        match result {
            Ok(fit) => {
                fits.insert(FitKey::new(task.society, task.window, task.kind), fit);
            }
            Err(e) if task.required => return Err(e),
            Err(e) => log::warn!("skipping fit: {e}"),
        }
    }

    let decomposition = match (tables.get(&Society::NonDiscriminatory), tables.get(&Society::Discriminatory)) {
        (Some(nd), Some(d)) if opts.bootstrap > 0 => Some(bootstrap_decomposition(
            nd,
            d,
            &opts.windows,
            opts.bootstrap,
            opts.seed,
            &opts.spec,
        )?),
        (Some(_), Some(_)) => Some(decompose_all_with(&fits, &opts.windows, required)?),
        _ => {
            log::warn!("decomposition needs both societies; skipped");
            None
        }
    };

    let mut sex_ratios = SexRatioSummary::default();
    let mut rates = RateTable::default();
    let mut covariates = CovariateSummary::default();
    for (society, table) in tables {
        let pairs = &matched[society].0;
        sex_ratios.extend(sex_ratio_table(table, pairs));
        rates.rows.extend(mortality_rate_table(table, pairs, &opts.windows)?.rows);
        covariates.rows.extend(covariate_summary(table)?.rows);
    }

    Ok(Analysis {
        diagnostics: matched.into_iter().map(|(s, (_, d))| (s, d)).collect(),
        fits,
        decomposition,
        sex_ratios,
        rates,
        covariates,
    })
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes every artifact of an analysis under `dir` and returns the paths in
/// write order. Output depends only on the analysis, never on timing.
pub fn write_analysis(analysis: &Analysis, dir: &Path) -> Result<Vec<PathBuf>> {
    let fit_dir = dir.join("fits");
    fs::create_dir_all(&fit_dir).map_err(|e| Error::io(&fit_dir, e))?;
    let mut written = Vec::new();
    for (key, fit) in &analysis.fits {
        let name = format!("{}_{}_{}.json", key.society.code(), key.window.code(), key.kind.code());
        written.push(write(fit_dir.join(name), &json(&fit.to_record())?)?);
    }
    let opts = RenderOptions::default();
    if let Some(table) = &analysis.decomposition {
        for format in [Format::Json, Format::Csv, Format::Markdown] {
            let path = dir.join(format!("decomposition.{}", format.extension()));
            written.push(write(path, &render(table, format, opts)?)?);
        }
    }
    written.push(write(dir.join("match_diagnostics.json"), &json(&analysis.diagnostics)?)?);
    written.push(write(dir.join("sex_ratios.csv"), &render(&analysis.sex_ratios, Format::Csv, opts)?)?);
    written.push(write(dir.join("rates.csv"), &render(&analysis.rates, Format::Csv, opts)?)?);
    written.push(write(dir.join("figure1.csv"), &render(&analysis.rates.figure_data(), Format::Csv, opts)?)?);
    written.push(write(dir.join("covariates.csv"), &render(&analysis.covariates, Format::Csv, opts)?)?);
    Ok(written)
}

/// Reads every `*.json` fit record under `dir`, sorted by file name.
pub fn read_fit_dir(dir: &Path) -> Result<Vec<crate::estimate::FitRecord>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

