//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse`. The `*_json` functions hold the logic
//! and are what the native tests exercise.

use serde::Serialize;
use toric_outliers::detect::global_max_residual_test;
use toric_outliers::exact::{mc_pvalue_lrt_traced, SamplerConfig};
use toric_outliers::fit::{adjusted_residuals_independence, mle_fit, pearson_residuals, DEFAULT_MAX_ITER, DEFAULT_TOL};
use toric_outliers::models::{augment_set, build_hierarchical_design};
use toric_outliers::toric::{markov_basis, preset_basis};
use toric_outliers::{DesignMatrix, Table, TableShape};
use wasm_bindgen::prelude::*;

/// Upper bound on replicates so a click cannot hang the tab.
pub const MAX_REPLICATES: usize = 100_000;
pub const HISTOGRAM_BINS: usize = 24;

#[derive(Serialize)]
struct FitView {
    rows: usize,
    cols: usize,
    fitted: Vec<f64>,
    pearson: Vec<f64>,
    adjusted: Vec<f64>,
    max_abs_adjusted: f64,
    max_cell: usize,
    critical: f64,
    reject: bool,
}

#[derive(Serialize)]
struct BasisView {
    moves: usize,
    preset: bool,
    /// At most the first 50 moves, dense.
    sample: Vec<Vec<i64>>,
}

#[derive(Serialize)]
struct McView {
    statistic: f64,
    p_asymptotic: f64,
    p_monte_carlo: f64,
    acceptance_rate: f64,
    bin_width: f64,
    histogram: Vec<usize>,
    /// Replicates whose fit failed; counted as extreme.
    infinite: usize,
}

fn two_way(rows: usize, cols: usize, counts: &[u32]) -> Result<(Table, DesignMatrix), String> {
    if rows * cols != counts.len() {
        return Err(format!("expected {} counts for a {rows}x{cols} table, got {}", rows * cols, counts.len()));
    }
    let counts: Vec<u64> = counts.iter().map(|&c| u64::from(c)).collect();
    let table = Table::from_counts(&[rows, cols], &counts).map_err(|e| e.to_string())?;
    let shape = TableShape::new(vec![rows, cols]).map_err(|e| e.to_string())?;
    let a = build_hierarchical_design(&shape, &[vec![0], vec![1]]).map_err(|e| e.to_string())?;
    Ok((table, a))
}

pub fn fit_independence_json(rows: usize, cols: usize, counts: &[u32], alpha: f64) -> Result<String, String> {
    let (table, a) = two_way(rows, cols, counts)?;
    let fit = mle_fit(&a, &table, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    let pearson = pearson_residuals(&table, &fit).map_err(|e| e.to_string())?;
    let adjusted = adjusted_residuals_independence(&table).map_err(|e| e.to_string())?;
    let max = global_max_residual_test(&table, alpha).map_err(|e| e.to_string())?;
    let view = FitView {
        rows,
        cols,
        fitted: fit.fitted,
        pearson,
        adjusted: adjusted.into_iter().flatten().collect(),
        max_abs_adjusted: max.z,
        max_cell: max.cell,
        critical: max.critical,
        reject: max.reject,
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

/// Basis of the hierarchical model with the given terms, axes 0-based.
pub fn markov_basis_json(dims: &[usize], terms: &[Vec<usize>]) -> Result<String, String> {
    let shape = TableShape::new(dims.to_vec()).map_err(|e| e.to_string())?;
    let a = build_hierarchical_design(&shape, terms).map_err(|e| e.to_string())?;
    let (basis, preset) = match preset_basis(&a) {
        Some(b) => (b, true),
        None => (markov_basis(&a).map_err(|e| e.to_string())?, false),
    };
    let view = BasisView {
        moves: basis.len(),
        preset,
        sample: basis.moves().iter().take(50).map(|m| m.as_slice().to_vec()).collect(),
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

pub fn single_outlier_mc_json(
    rows: usize,
    cols: usize,
    counts: &[u32],
    cell: usize,
    replicates: usize,
    seed: u64,
) -> Result<String, String> {
    if replicates == 0 || replicates > MAX_REPLICATES {
        return Err(format!("replicates must lie in 1..={MAX_REPLICATES}"));
    }
    let (table, a) = two_way(rows, cols, counts)?;
    let aug = augment_set(&a, &[cell]).map_err(|e| e.to_string())?;
    let basis = preset_basis(&a).ok_or("no preset basis for this shape")?;
    let cfg = SamplerConfig {
        replicates,
        seed,
        ..SamplerConfig::default()
    };
    let out = mc_pvalue_lrt_traced(&table, &a, &aug, &basis, &cfg, true).map_err(|e| e.to_string())?;
    let stats: Vec<f64> = out.trace.iter().map(|t| t.statistic).collect();
    let finite_max = stats.iter().copied().filter(|s| s.is_finite()).fold(0.0, f64::max);
    let top = finite_max.max(out.result.statistic).max(1e-9) * 1.0001;
    let bin_width = top / HISTOGRAM_BINS as f64;
    let mut histogram = vec![0; HISTOGRAM_BINS];
    let mut infinite = 0;
    for s in stats {
        if s.is_finite() {
            histogram[((s / bin_width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        } else {
            infinite += 1;
        }
    }
    let view = McView {
        statistic: out.result.statistic,
        p_asymptotic: out.result.p_asymptotic,
        p_monte_carlo: out.result.p_monte_carlo.unwrap_or(f64::NAN),
        acceptance_rate: out.acceptance_rate,
        bin_width,
        histogram,
        infinite,
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fitIndependence)]
pub fn fit_independence(rows: usize, cols: usize, counts: Vec<u32>, alpha: f64) -> Result<String, JsError> {
    js(fit_independence_json(rows, cols, &counts, alpha))
}

/// `terms` is a JSON array of 0-based axis lists, e.g. `[[0],[1],[2]]`.
#[wasm_bindgen(js_name = markovBasis)]
pub fn markov_basis_js(dims: Vec<usize>, terms: &str) -> Result<String, JsError> {
    let terms: Vec<Vec<usize>> = serde_json::from_str(terms).map_err(|e| JsError::new(&e.to_string()))?;
    js(markov_basis_json(&dims, &terms))
}

#[wasm_bindgen(js_name = singleOutlierTest)]
pub fn single_outlier_test(
    rows: usize,
    cols: usize,
    counts: Vec<u32>,
    cell: usize,
    replicates: usize,
    seed: u64,
) -> Result<String, JsError> {
    js(single_outlier_mc_json(rows, cols, &counts, cell, replicates, seed))
}
