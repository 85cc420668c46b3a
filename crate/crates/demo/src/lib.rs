//! WebAssembly entry points for the browser demo.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The same logic is available natively through the
//! `*_json` functions, which the unit tests exercise.

use hcoal_core::{
    correction_stats, evaluate_labels, gap_closure, generate_gold, parse_corpus_auto, rank,
    run_grid, select_budget, ExperimentConfig, NoiseConfig, Strategy, SyntheticSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Input of [`simulate`]. Missing fields fall back to a small default run.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SweepRequest {
    pub n_examples: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// Largest budget on the curve.
    pub max_budget: f64,
    /// Number of budget points after zero.
    pub steps: usize,
}

impl Default for SweepRequest {
    fn default() -> Self {
        Self {
            n_examples: 500,
            seed: 0,
            noise: NoiseConfig::default(),
            max_budget: 0.5,
            steps: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub strategy: Strategy,
    pub macro_f1: Vec<f64>,
    pub micro_f1: Vec<f64>,
    pub entities_corrected: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub budgets: Vec<f64>,
    pub ai_only_macro_f1: f64,
    pub gold_macro_f1: f64,
    pub curves: Vec<Curve>,
}

/// Runs every ranking strategy over an evenly spaced budget grid.
pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SweepRequest = if request.trim().is_empty() {
        SweepRequest::default()
    } else {
        serde_json::from_str(request).map_err(|e| format!("invalid request: {e}"))?
    };
    if req.steps == 0 || req.steps > 100 {
        return Err(format!("steps must be in 1..=100, got {}", req.steps));
    }
    if !(0.0..=1.0).contains(&req.max_budget) {
        return Err(format!("max_budget {} is outside [0, 1]", req.max_budget));
    }
    let spec = SyntheticSpec {
        n_examples: req.n_examples,
        ..SyntheticSpec::default()
    };
    let gold = generate_gold(&spec, req.seed).map_err(|e| e.to_string())?;
    let budgets: Vec<f64> = (0..=req.steps)
        .map(|i| req.max_budget * i as f64 / req.steps as f64)
        .collect();
    let cfg = ExperimentConfig {
        noise: req.noise,
        budgets: budgets.clone(),
        seeds: vec![req.seed],
        ..ExperimentConfig::default()
    };
    let bundle = run_grid(&gold, &cfg).map_err(|e| e.to_string())?;
    let curves = cfg
        .strategies
        .iter()
        .map(|&strategy| {
            let cells: Vec<_> = budgets
                .iter()
                .map(|&b| bundle.cell(strategy, b, req.seed).expect("grid covers every budget"))
                .collect();
            let pick = |f: &dyn Fn(&hcoal_core::experiment::Cell) -> Option<f64>| {
                cells.iter().map(|c| f(c).unwrap_or(f64::NAN)).collect()
            };
            Curve {
                strategy,
                macro_f1: pick(&|c| c.eval.as_ref().map(|e| e.macro_f1)),
                micro_f1: pick(&|c| c.eval.as_ref().map(|e| e.micro_f1)),
                entities_corrected: pick(&|c| c.stats.map(|s| s.entities_corrected as f64)),
            }
        })
        .collect();
    let result = SweepResult {
        budgets,
        ai_only_macro_f1: bundle.anchors.ai_only.macro_f1,
        gold_macro_f1: bundle.anchors.gold.macro_f1,
        curves,
    };
    Ok(serde_json::to_string(&result).expect("sweep result is serializable"))
}

/// Ranks a pasted corpus and marks the examples inside the budget. When the
/// text carries a gold column, the selection's correction workload and the
/// uncorrected scores are included too.
pub fn rank_preview_json(conll: &str, strategy: &str, budget: f64, seed: u64) -> Result<String, String> {
    let strategy: Strategy = strategy.parse().map_err(|e: hcoal_core::RankError| e.to_string())?;
    let corpus = parse_corpus_auto(conll).map_err(|e| e.to_string())?;
    let ranked = rank(&corpus, strategy, seed);
    let selection = select_budget(&ranked, budget).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = ranked
        .entries
        .iter()
        .enumerate()
        .map(|(pos, entry)| {
            let ex = corpus.example(entry.example_id).expect("ranked ids come from the corpus");
            let text: Vec<&str> = ex.tokens.iter().map(|t| t.text.as_str()).collect();
            let tags: Vec<String> = ex.ai_tags().map(|t| t.to_string()).collect();
            json!({
                "example_id": entry.example_id,
                "score": entry.score,
                "selected": pos < selection.len(),
                "text": text.join(" "),
                "tags": tags,
            })
        })
        .collect();
    let mut out = json!({
        "strategy": strategy,
        "budget": budget,
        "selected": selection.len(),
        "total": corpus.examples.len(),
        "ranking": rows,
    });
    if corpus.has_gold {
        let stats = correction_stats(&corpus, &selection).map_err(|e| e.to_string())?;
        let eval = evaluate_labels(&corpus).map_err(|e| e.to_string())?;
        out["stats"] = serde_json::to_value(stats).expect("stats are serializable");
        out["ai_only"] = json!({"micro_f1": eval.micro_f1, "macro_f1": eval.macro_f1});
    }
    Ok(out.to_string())
}

/// Gap closure with an explanatory error for a zero gap.
pub fn gap_closure_json(f1_ai: f64, f1_mixed: f64, f1_gold: f64) -> Result<String, String> {
    let g = gap_closure(f1_ai, f1_mixed, f1_gold).map_err(|e| e.to_string())?;
    Ok(json!({ "gap_closure": g }).to_string())
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsValue> {
    simulate_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = rankPreview)]
pub fn rank_preview(conll: &str, strategy: &str, budget: f64, seed: u64) -> Result<String, JsValue> {
    rank_preview_json(conll, strategy, budget, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = gapClosure)]
pub fn gap_closure_js(f1_ai: f64, f1_mixed: f64, f1_gold: f64) -> Result<String, JsValue> {
    gap_closure_json(f1_ai, f1_mixed, f1_gold).map_err(|e| JsValue::from_str(&e))
}
