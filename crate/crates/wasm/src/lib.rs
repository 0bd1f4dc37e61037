//! Browser bindings for the decomposition, the planted-effect calculator and a
//! small simulate-and-fit run. Every export takes and returns JSON strings so
//! the page needs no generated type glue beyond the functions themselves.

use std::collections::BTreeMap;

use serde::Serialize;
use twingap::decompose::{decompose_direct, parse_direct};
use twingap::pipeline::{analyze, AnalyzeOptions};
use twingap::report::{render, Format, RenderOptions};
use twingap::synth::{generate, planted_thetas, PlantedEffects};
use twingap::{DecompositionTable, SynthConfig};
use wasm_bindgen::prelude::*;

/// Largest synthetic run the page will attempt, in mothers per society.
pub const MAX_MOTHERS: usize = 20_000;

/// Decomposes directly entered gaps. `format` is `json`, `csv` or `md`.
pub fn decompose_text(coeffs: &str, format: &str, per_thousand: bool) -> twingap::Result<String> {
    let table = decompose_direct(&parse_direct(coeffs)?)?;
    render(&table, format.parse::<Format>()?, RenderOptions { per_thousand })
}

/// Exact estimands implied by a simulation config, as JSON.
pub fn planted_text(config: &str) -> twingap::Result<String> {
    let cfg = SynthConfig::from_json(config)?;
    Ok(serde_json::to_string(&planted_thetas(&cfg))?)
}

#[derive(Serialize)]
struct SimulationResult {
    births: usize,
    planted: PlantedEffects,
    estimated: DecompositionTable,
    markdown: String,
}

/// Generates data from `config`, runs the analysis and returns the estimated
/// decomposition next to the planted one.
pub fn simulate_text(config: &str, bootstrap: usize) -> twingap::Result<String> {
    let cfg = SynthConfig::from_json(config)?;
    if cfg.n_mothers.nd.max(cfg.n_mothers.d) > MAX_MOTHERS {
        return Err(twingap::Error::Config(format!(
            "at most {MAX_MOTHERS} mothers per society in the browser"
        )));
    }
    let table = generate(&cfg)?;
    let births = table.len();
    let tables: BTreeMap<_, _> = table.split_by_society()?;
    let opts = AnalyzeOptions {
        bootstrap,
        seed: cfg.seed,
        ..AnalyzeOptions::default()
    };
    let analysis = analyze(&tables, &opts)?;
    let estimated = analysis
        .decomposition
        .ok_or_else(|| twingap::Error::Config("both societies need mothers".into()))?;
    let markdown = render(&estimated, Format::Markdown, RenderOptions::default())?;
    Ok(serde_json::to_string(&SimulationResult {
        births,
        planted: planted_thetas(&cfg),
        estimated,
        markdown,
    })?)
}

/// Default simulation config, pretty-printed.
pub fn default_config_text() -> String {
    let cfg = SynthConfig {
        twin_rate: 0.2,
        n_mothers: twingap::synth::PerSociety { nd: 3000, d: 3000 },
        ..SynthConfig::default()
    };
    serde_json::to_string_pretty(&cfg).expect("config serializes")
}

fn js(r: twingap::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn decompose(coeffs: &str, format: &str, per_thousand: bool) -> Result<String, JsError> {
    js(decompose_text(coeffs, format, per_thousand))
}

#[wasm_bindgen]
pub fn planted(config: &str) -> Result<String, JsError> {
    js(planted_text(config))
}

#[wasm_bindgen]
pub fn simulate(config: &str, bootstrap: usize) -> Result<String, JsError> {
    js(simulate_text(config, bootstrap))
}

#[wasm_bindgen]
pub fn default_config() -> String {
    default_config_text()
}
