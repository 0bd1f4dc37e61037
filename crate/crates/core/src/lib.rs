//! Twin-based decomposition of sex differences in early-age mortality.
//!
//! Opposite-sex twins share the prenatal environment, so the within-pair
//! male-female gap in mortality nets out prenatal factors that also shift the
//! sex ratio at birth. Comparing that gap between a society without and one
//! with son preference separates child biology from parental preferences.
//!
//! The crate covers the whole path: birth records and mortality windows
//! ([`domain`]), CSV input and twin matching ([`ingest`]), a simulator with
//! known effects ([`synth`]), least-squares estimators ([`estimate`]), the
//! decomposition and its bootstrap ([`decompose`]), descriptive tables
//! ([`report`]) and an end-to-end driver ([`pipeline`]).

pub mod decompose;
pub mod domain;
pub mod error;
pub mod estimate;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use decompose::{DecompositionTable, FitKey, PeriodDecomposition};
pub use domain::{BirthRecord, Sex, Society, WindowKind};
pub use error::{Error, Result};
pub use estimate::{FitKind, ModelSpec, RegressionFit};
pub use ingest::{BirthTable, SampleMode};
pub use synth::SynthConfig;
