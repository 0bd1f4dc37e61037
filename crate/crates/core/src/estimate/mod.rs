//! Least-squares engine: OLS by Householder QR, mother-clustered sandwich
//! covariance, and the cross-sectional, twin and family fixed-effect
//! estimators of the male-female mortality gap.

pub mod design;
pub mod linalg;

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use design::{build_design, Controls, Design, MissingPolicy, ModelSpec};
pub use linalg::{Matrix, Qr};

use crate::domain::{Society, WindowKind};
use crate::error::{Error, Result};
use crate::ingest::{BirthTable, Sample, SampleMode};

/// Relative tolerance below which a column counts as collinear.
pub const RANK_TOL: f64 = 1e-9;

/// Name of the sex-gap coefficient in every fit.
pub const MALE: &str = "male";

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub qr: Qr,
}

fn generic_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

/// Ordinary least squares via Householder QR.
///
/// Rank deficiency is an error naming the offending column and the earlier
/// columns it is a combination of.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    fit_ols_named(x, y, &generic_names(x.cols()))
}

pub(crate) fn fit_ols_named(x: &Matrix, y: &[f64], names: &[String]) -> Result<OlsFit> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Estimation(format!("outcome has {} rows, design {n}", y.len())));
    }
    if n < k {
        return Err(Error::Estimation(format!("{n} observations for {k} columns")));
    }
    let qr = Qr::new(x);
    if let Some(&j) = qr.deficient_columns(RANK_TOL).first() {
        // express column j in terms of the earlier ones to name the culprits
        let mut rhs: Vec<f64> = (0..j).map(|i| qr.r(i, j)).collect();
        for i in (0..j).rev() {
            let mut s = rhs[i];
            for l in (i + 1)..j {
                s -= qr.r(i, l) * rhs[l];
            }
            let d = qr.r(i, i);
            rhs[i] = if d.abs() > 0.0 { s / d } else { 0.0 };
        }
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let others = rhs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > 1e-8 * scale.max(1e-300))
            .map(|(i, _)| names[i].clone())
            .collect();
        return Err(Error::RankDeficient {
            column: names[j].clone(),
            others,
        });
    }
    let coefficients = qr.solve(y);
    let fitted = x.mul_vec(&coefficients);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(OlsFit {
        coefficients,
        residuals,
        qr,
    })
}

/// Mother-clustered sandwich covariance
/// `c · (XᵀX)⁻¹ (Σ_g X_gᵀ u_g u_gᵀ X_g) (XᵀX)⁻¹`
/// with finite-sample factor `c = G/(G-1) · (N-1)/(N-K)`.
pub fn cluster_vcov(x: &Matrix, residuals: &[f64], clusters: &[u32]) -> Result<Matrix> {
    let qr = Qr::new(x);
    if !qr.deficient_columns(RANK_TOL).is_empty() {
        return Err(Error::Estimation("cluster covariance of a rank-deficient design".into()));
    }
    sandwich(x, residuals, clusters, &qr.xtx_inverse())
}

/// Number of distinct cluster labels.
pub fn count_clusters(clusters: &[u32]) -> usize {
    let mut seen = std::collections::HashSet::new();
    clusters.iter().filter(|c| seen.insert(**c)).count()
}

pub(crate) fn sandwich(x: &Matrix, residuals: &[f64], clusters: &[u32], bread: &Matrix) -> Result<Matrix> {
    let (n, k) = (x.rows(), x.cols());
    if residuals.len() != n || clusters.len() != n {
        return Err(Error::Estimation("residual/cluster length mismatch".into()));
    }
    // dense slot per cluster, in order of first appearance
    let mut slot_of: HashMap<u32, usize> = HashMap::new();
    let slots: Vec<usize> = clusters
        .iter()
        .map(|c| {
            let next = slot_of.len();
            *slot_of.entry(*c).or_insert(next)
        })
        .collect();
    let g = slot_of.len();
    if g < 2 {
        return Err(Error::Estimation(format!("cluster covariance needs >= 2 clusters, got {g}")));
    }
    if n <= k {
        return Err(Error::Estimation(format!("{n} observations leave no residual degrees of freedom")));
    }

    let mut scores = vec![0.0; g * k];
    for j in 0..k {
        for ((xv, u), &s) in x.col(j).iter().zip(residuals).zip(&slots) {
            scores[s * k + j] += xv * u;
        }
    }
    let mut meat = Matrix::zeros(k, k);
    for s in scores.chunks_exact(k) {
        for a in 0..k {
            if s[a] == 0.0 {
                continue;
            }
            for b in 0..k {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }
    let mut v = bread.matmul(&meat).matmul(bread);
    let (gf, nf, kf) = (g as f64, n as f64, k as f64);
    v.scale(gf / (gf - 1.0) * (nf - 1.0) / (nf - kf));
    // exact symmetry
    for a in 0..k {
        for b in (a + 1)..k {
            let m = 0.5 * (v[(a, b)] + v[(b, a)]);
            v[(a, b)] = m;
            v[(b, a)] = m;
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Cross-sectional LPM, male dummy only.
    Lpm,
    /// Cross-sectional LPM with the full control set.
    LpmControls,
    /// Mean within-pair male-female difference over complete MF pairs.
    TwinFe,
    /// LPM with a twin-pair fixed effect over all twins.
    PairFe,
    /// LPM with a mother fixed effect.
    FamilyFe,
}

impl FitKind {
    pub fn code(self) -> &'static str {
        match self {
            FitKind::Lpm => "lpm",
            FitKind::LpmControls => "lpm_controls",
            FitKind::TwinFe => "twin_fe",
            FitKind::PairFe => "pair_fe",
            FitKind::FamilyFe => "family_fe",
        }
    }
}

/// A fitted regression with its mother-clustered covariance.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub kind: FitKind,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Absent when fewer than two clusters are available.
    pub vcov: Option<Matrix>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub residuals: Vec<f64>,
    pub window: Option<WindowKind>,
    pub mode: Option<SampleMode>,
    pub society: Option<Society>,
    pub dropped_columns: Vec<String>,
    pub dropped_missing: usize,
}

impl RegressionFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        let j = self.names.iter().position(|n| n == name)?;
        self.vcov.as_ref().map(|v| v[(j, j)].max(0.0).sqrt())
    }

    /// The male coefficient.
    pub fn theta(&self) -> f64 {
        self.coef(MALE).expect("every fit carries a male coefficient")
    }

    pub fn theta_se(&self) -> Option<f64> {
        self.se(MALE)
    }

    pub fn to_record(&self) -> FitRecord {
        FitRecord {
            estimator: self.kind,
            coefficients: self.names.iter().cloned().zip(self.coefficients.iter().copied()).collect(),
            se: self.names.iter().map(|n| (n.clone(), self.se(n))).collect(),
            n_obs: self.n_obs,
            n_clusters: self.n_clusters,
            window: self.window,
            mode: self.mode,
            society: self.society,
        }
    }
}

impl Serialize for RegressionFit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(serializer)
    }
}

/// Serialized form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub estimator: FitKind,
    pub coefficients: IndexMap<String, f64>,
    pub se: IndexMap<String, Option<f64>>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub window: Option<WindowKind>,
    pub mode: Option<SampleMode>,
    pub society: Option<Society>,
}

/// Anything that carries a male coefficient.
pub trait Theta {
    fn theta(&self) -> f64;
}

impl Theta for RegressionFit {
    fn theta(&self) -> f64 {
        RegressionFit::theta(self)
    }
}

impl Theta for FitRecord {
    fn theta(&self) -> f64 {
        self.coefficients.get(MALE).copied().unwrap_or(f64::NAN)
    }
}

impl Theta for f64 {
    fn theta(&self) -> f64 {
        *self
    }
}

fn vcov_or_warn(x: &Matrix, residuals: &[f64], clusters: &[u32], bread: &Matrix) -> Result<Option<Matrix>> {
    if count_clusters(clusters) < 2 || x.rows() <= x.cols() {
        log::warn!("fewer than two clusters or no residual degrees of freedom; standard errors omitted");
        return Ok(None);
    }
    sandwich(x, residuals, clusters, bread).map(Some)
}

/// Cross-sectional linear probability model of the window outcome on the
/// male dummy (and controls, per `spec`).
pub fn fit_lpm(table: &BirthTable, sample: &Sample, spec: &ModelSpec) -> Result<RegressionFit> {
    let d = build_design(table, sample, spec)?;
    let ols = fit_ols_named(&d.x, &d.y, &d.names)?;
    let vcov = vcov_or_warn(&d.x, &ols.residuals, &d.clusters, &ols.qr.xtx_inverse())?;
    Ok(RegressionFit {
        kind: match spec.controls {
            Controls::None => FitKind::Lpm,
            Controls::Full => FitKind::LpmControls,
        },
        names: d.names,
        coefficients: ols.coefficients,
        vcov,
        n_obs: d.y.len(),
        n_clusters: count_clusters(&d.clusters),
        residuals: ols.residuals,
        window: Some(sample.window),
        mode: Some(sample.mode),
        society: sample.society,
        dropped_columns: d.dropped_constant,
        dropped_missing: d.dropped_missing,
    })
}

/// Twin fixed-effect estimate over complete male-female pairs: the mean of
/// `outcome_male - outcome_female`, with the variance of that mean clustered
/// by mother.
pub fn fit_twin_fe(sample: &Sample) -> Result<RegressionFit> {
    if sample.mode != SampleMode::MfPairs {
        return Err(Error::Estimation(format!(
            "twin fixed effects need an mf_pairs sample, got {}",
            sample.mode.code()
        )));
    }
    if sample.rows.len() % 2 != 0 {
        return Err(Error::Estimation("mf_pairs sample has an incomplete pair".into()));
    }
    let mut diffs = Vec::with_capacity(sample.len() / 2);
    let mut clusters = Vec::with_capacity(sample.len() / 2);
    for pair in sample.rows.chunks_exact(2) {
        let (m, f) = (&pair[0], &pair[1]);
        if !(m.male && !f.male && m.pair.is_some() && m.pair == f.pair) {
            return Err(Error::Estimation("mf_pairs rows must alternate male, female within a pair".into()));
        }
        diffs.push(m.outcome as f64 - f.outcome as f64);
        clusters.push(m.cluster);
    }
    if diffs.is_empty() {
        return Err(Error::Estimation(format!(
            "no complete male-female pairs for window {}",
            sample.window
        )));
    }
    let ones = Matrix::from_columns(diffs.len(), vec![vec![1.0; diffs.len()]]);
    let ols = fit_ols_named(&ones, &diffs, &[MALE.to_string()])?;
    let vcov = vcov_or_warn(&ones, &ols.residuals, &clusters, &ols.qr.xtx_inverse())?;
    Ok(RegressionFit {
        kind: FitKind::TwinFe,
        names: vec![MALE.into()],
        coefficients: ols.coefficients,
        vcov,
        n_obs: sample.len(),
        n_clusters: count_clusters(&clusters),
        residuals: ols.residuals,
        window: Some(sample.window),
        mode: Some(sample.mode),
        society: sample.society,
        dropped_columns: Vec::new(),
        dropped_missing: 0,
    })
}

/// Within-group ("fixed effect") LPM: outcome and regressors are demeaned by
/// `groups`, then fit by OLS without intercept; covariance is clustered by
/// mother. `extra` regressors that are constant within every group demean to
/// zero and are dropped.
pub fn fit_within(
    sample: &Sample,
    groups: &[u32],
    extra: &[(String, Vec<f64>)],
    kind: FitKind,
) -> Result<RegressionFit> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Estimation(format!("empty sample for window {}", sample.window)));
    }
    if groups.len() != n || extra.iter().any(|(_, v)| v.len() != n) {
        return Err(Error::Estimation("group/regressor length mismatch".into()));
    }
    let mut slot_of: HashMap<u32, usize> = HashMap::new();
    let slots: Vec<usize> = groups
        .iter()
        .map(|g| {
            let next = slot_of.len();
            *slot_of.entry(*g).or_insert(next)
        })
        .collect();
    let demean = |v: &[f64]| -> Vec<f64> {
        let mut sum = vec![0.0; slot_of.len()];
        let mut cnt = vec![0usize; slot_of.len()];
        for (x, &s) in v.iter().zip(&slots) {
            sum[s] += x;
            cnt[s] += 1;
        }
        v.iter()
            .zip(&slots)
            .map(|(x, &s)| x - sum[s] / cnt[s] as f64)
            .collect()
    };

    let y = demean(&sample.outcomes());
    let male: Vec<f64> = sample.rows.iter().map(|r| if r.male { 1.0 } else { 0.0 }).collect();
    let mut names = vec![MALE.to_string()];
    let mut cols = vec![demean(&male)];
    let mut dropped = Vec::new();
    let within_var = |c: &[f64], raw: &[f64]| {
        let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        c.iter().any(|v| v.abs() > 1e-12 * scale)
    };
    if !within_var(&cols[0], &male) {
        return Err(Error::Estimation(format!(
            "no within-group sex variation in {} sample for window {}",
            sample.mode.code(),
            sample.window
        )));
    }
    for (name, raw) in extra {
        let c = demean(raw);
        if within_var(&c, raw) {
            names.push(name.clone());
            cols.push(c);
        } else {
            log::warn!("`{name}` is constant within groups and differences out");
            dropped.push(name.clone());
        }
    }
    let x = Matrix::from_columns(n, cols);
    let ols = fit_ols_named(&x, &y, &names)?;
    let clusters: Vec<u32> = sample.rows.iter().map(|r| r.cluster).collect();
    let vcov = vcov_or_warn(&x, &ols.residuals, &clusters, &ols.qr.xtx_inverse())?;
    Ok(RegressionFit {
        kind,
        names,
        coefficients: ols.coefficients,
        vcov,
        n_obs: n,
        n_clusters: count_clusters(&clusters),
        residuals: ols.residuals,
        window: Some(sample.window),
        mode: Some(sample.mode),
        society: sample.society,
        dropped_columns: dropped,
        dropped_missing: 0,
    })
}

/// LPM with a twin-pair fixed effect over every eligible twin. Same-sex pairs
/// and pairs with a single eligible member carry no within-pair sex
/// variation, so the male coefficient equals [`fit_twin_fe`] on the complete
/// MF pairs.
pub fn fit_pair_fe(sample: &Sample) -> Result<RegressionFit> {
    let groups = sample
        .rows
        .iter()
        .map(|r| {
            r.pair
                .ok_or_else(|| Error::Estimation("pair fixed effects need rows from matched pairs".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_within(sample, &groups, &[], FitKind::PairFe)
}

/// Sibling (mother) fixed-effect LPM. It absorbs mother-constant
/// unobservables but not delivery-specific prenatal circumstances.
pub fn fit_family_fe(sample: &Sample) -> Result<RegressionFit> {
    let groups: Vec<u32> = sample.rows.iter().map(|r| r.cluster).collect();
    fit_within(sample, &groups, &[], FitKind::FamilyFe)
}
