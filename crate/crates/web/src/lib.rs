//! Browser bindings: regime lookup, phase diagram and a renewal-chain sample.

use mixrate::empirical::{gn_stat, Statistic};
use mixrate::mixing::gen_renewal_chain;
use mixrate::rates::{phase_diagram, rate_exponent, rational, to_f64, RateNorm, SigmaMode};
use mixrate::report::phase_svg;
use serde_json::json;
use wasm_bindgen::prelude::*;

const PATH_POINTS: usize = 400;
const L_MAX: u64 = 1 << 20;

/// Regime and growth exponent of `E sup |G_n|` at `(α, β, r)` as JSON.
pub fn classify_json(alpha: f64, beta: f64, r: f64) -> Result<String, String> {
    let norm = RateNorm::from_f64(r).map_err(|e| e.to_string())?;
    let a = rational(alpha).map_err(|e| e.to_string())?;
    let b = rational(beta).map_err(|e| e.to_string())?;
    let rep = rate_exponent(a, b, norm, SigmaMode::Unit).map_err(|e| e.to_string())?;
    Ok(json!({
        "regime": rep.regime.as_str(),
        "exponent": rep.exponent.map(|q| q.to_string()),
        "exponent_value": rep.exponent.map(to_f64),
        "source": rep.source,
        "norm": norm.label(),
    })
    .to_string())
}

/// Phase diagram over `β, α ∈ [0.1, max]` with `cells` points per axis.
pub fn phase_svg_string(r: f64, cells: u32, max: f64) -> Result<String, String> {
    if cells < 2 || cells > 200 {
        return Err("cells must be in 2..=200".into());
    }
    if !(max > 0.1 && max <= 50.0) {
        return Err("max must be in (0.1, 50]".into());
    }
    let norm = RateNorm::from_f64(r).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..cells)
        .map(|i| {
            let x = 0.1 + (max - 0.1) * i as f64 / (cells - 1) as f64;
            (x * 1e4).round() / 1e4
        })
        .collect();
    let diag = phase_diagram(&grid, &grid, norm).map_err(|e| e.to_string())?;
    phase_svg(&diag).map_err(|e| e.to_string())
}

/// A renewal path prefix and its scaled Kolmogorov-Smirnov statistic as JSON.
pub fn renewal_json(tail_exponent: f64, n: u32, seed: u64) -> Result<String, String> {
    if n < 2 || n > 1 << 20 {
        return Err("n must be in 2..=2^20".into());
    }
    let s = gen_renewal_chain(tail_exponent, L_MAX, None, n as usize, seed).map_err(|e| e.to_string())?;
    let ks = gn_stat(&s, Statistic::Ks, None).map_err(|e| e.to_string())?;
    let path: Vec<f64> = s.values.iter().take(PATH_POINTS).copied().collect();
    Ok(json!({ "n": n, "ks": ks, "path": path }).to_string())
}

#[wasm_bindgen]
pub fn classify(alpha: f64, beta: f64, r: f64) -> Result<String, JsValue> {
    classify_json(alpha, beta, r).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phase(r: f64, cells: u32, max: f64) -> Result<String, JsValue> {
    phase_svg_string(r, cells, max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn renewal(tail_exponent: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    renewal_json(tail_exponent, n, seed as u64).map_err(|e| JsValue::from_str(&e))
}
