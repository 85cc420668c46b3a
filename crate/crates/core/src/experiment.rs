//! Strategy x budget x seed experiment grid and its reports.
//!
//! Each seed corrupts the gold corpus once. Every (strategy, budget) cell of
//! that seed ranks the shared noisy corpus, oracle-corrects a fresh copy of
//! the selected prefix, and scores it against gold.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_corpus, Corpus, CorpusError};
use crate::evaluation::{correction_stats, evaluate_labels, gap_closure, CorrectionStats, EvalReport};
use crate::ranking::{rank, select_budget, RankedList, Strategy};
use crate::simulator::{corrupt, generate_gold, oracle_correct, oracle_correct_ids, NoiseConfig, SimError, SyntheticSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ExperimentError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSource {
    /// A gold corpus file in the four-column layout.
    Path(PathBuf),
    Synthetic { spec: SyntheticSpec, seed: u64 },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic {
            spec: SyntheticSpec::default(),
            seed: 0,
        }
    }
}

pub const DEFAULT_BUDGETS: [f64; 3] = [0.05, 0.10, 0.20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub noise: NoiseConfig,
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSource::default(),
            noise: NoiseConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            seeds: vec![0],
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.budgets.is_empty() {
            return bad("at least one budget is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if let Some(b) = self.budgets.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(ExperimentError::Config(format!("budget {b} is outside [0, 1]")));
        }
        self.noise.validate()?;
        if let InputSource::Synthetic { spec, .. } = &self.input {
            spec.validate()?;
        }
        Ok(())
    }

    /// Loads or generates the gold corpus named by `input`.
    pub fn load_gold(&self) -> Result<Corpus, ExperimentError> {
        match &self.input {
            InputSource::Path(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
                Ok(parse_corpus(&text, true)?)
            }
            InputSource::Synthetic { spec, seed } => Ok(generate_gold(spec, *seed)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAnchor {
    pub seed: u64,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    /// Uncorrected labels of the first seed.
    pub ai_only: EvalReport,
    /// Fully corrected labels.
    pub gold: EvalReport,
    pub ai_only_by_seed: Vec<SeedAnchor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub strategy: Strategy,
    pub budget: f64,
    pub seed: u64,
    pub eval: Option<EvalReport>,
    pub stats: Option<CorrectionStats>,
    pub gap_closure_micro: Option<f64>,
    pub gap_closure_macro: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single observation.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, sd, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: Strategy,
    pub budget: f64,
    pub failed: usize,
    pub micro_f1: Option<MeanSd>,
    pub macro_f1: Option<MeanSd>,
    pub weighted_f1: Option<MeanSd>,
    pub per_type_f1: BTreeMap<String, MeanSd>,
    pub gap_closure_micro: Option<MeanSd>,
    pub gap_closure_macro: Option<MeanSd>,
    pub entities_identified: Option<MeanSd>,
    pub entities_corrected: Option<MeanSd>,
    pub pct_entities_corrected: Option<MeanSd>,
    pub examples_requiring_correction: Option<MeanSd>,
    pub pct_examples_requiring_correction: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub anchors: Anchors,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub meta: Meta,
}

impl ReportBundle {
    pub fn cell(&self, strategy: Strategy, budget: f64, seed: u64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.budget == budget && c.seed == seed)
    }

    pub fn aggregate(&self, strategy: Strategy, budget: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.strategy == strategy && a.budget == budget)
    }

    /// Report JSON with `meta` removed, for reproducibility comparisons.
    pub fn to_json_without_meta(&self) -> String {
        let mut value = serde_json::to_value(self).expect("bundle is always serializable");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("meta");
        }
        serde_json::to_string_pretty(&value).expect("value is always serializable")
    }
}

/// Loads the configured input and runs the grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle, ExperimentError> {
    cfg.validate()?;
    let gold = cfg.load_gold()?;
    run_grid(&gold, cfg)
}

/// Runs the grid on an already loaded gold corpus.
pub fn run_grid(gold: &Corpus, cfg: &ExperimentConfig) -> Result<ReportBundle, ExperimentError> {
    cfg.validate()?;
    if !gold.has_gold {
        return Err(SimError::MissingGold.into());
    }
    let all_ids: Vec<usize> = gold.examples.iter().map(|e| e.id).collect();
    let gold_eval = evaluate_labels(&oracle_correct_ids(gold, &all_ids)?)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;

    struct SeedRun {
        seed: u64,
        ai: Corpus,
        ai_eval: EvalReport,
        ranks: Vec<RankedList>,
    }
    let runs = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let ai = corrupt(gold, &cfg.noise.with_seed(seed))?;
            let ai_eval = evaluate_labels(&ai).map_err(|e| ExperimentError::Config(e.to_string()))?;
            let ranks = cfg.strategies.iter().map(|&s| rank(&ai, s, seed)).collect();
            Ok(SeedRun {
                seed,
                ai,
                ai_eval,
                ranks,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let mut cells = Vec::new();
    for (si, &strategy) in cfg.strategies.iter().enumerate() {
        for &budget in &cfg.budgets {
            for run in &runs {
                let cell = run_cell(&run.ai, &run.ranks[si], budget, &run.ai_eval, &gold_eval)
                    .unwrap_or_else(|e| Cell {
                        strategy,
                        budget,
                        seed: run.seed,
                        eval: None,
                        stats: None,
                        gap_closure_micro: None,
                        gap_closure_macro: None,
                        error: Some(e),
                    });
                cells.push(Cell {
                    seed: run.seed,
                    ..cell
                });
            }
        }
    }

    let aggregates = cfg
        .strategies
        .iter()
        .flat_map(|&s| cfg.budgets.iter().map(move |&b| (s, b)))
        .map(|(s, b)| aggregate(&cells, s, b))
        .collect();

    let ai_only_by_seed: Vec<SeedAnchor> = runs
        .iter()
        .map(|r| SeedAnchor {
            seed: r.seed,
            eval: r.ai_eval.clone(),
        })
        .collect();
    Ok(ReportBundle {
        config: cfg.clone(),
        anchors: Anchors {
            ai_only: ai_only_by_seed[0].eval.clone(),
            gold: gold_eval,
            ai_only_by_seed,
        },
        cells,
        aggregates,
        meta: Meta::default(),
    })
}

fn run_cell(
    ai: &Corpus,
    ranked: &RankedList,
    budget: f64,
    ai_eval: &EvalReport,
    gold_eval: &EvalReport,
) -> Result<Cell, String> {
    let selection = select_budget(ranked, budget).map_err(|e| e.to_string())?;
    let mixed = oracle_correct(ai, &selection).map_err(|e| e.to_string())?;
    let eval = evaluate_labels(&mixed).map_err(|e| e.to_string())?;
    let stats = correction_stats(ai, &selection).map_err(|e| e.to_string())?;
    Ok(Cell {
        strategy: ranked.strategy,
        budget,
        seed: 0,
        gap_closure_micro: gap_closure(ai_eval.micro_f1, eval.micro_f1, gold_eval.micro_f1).ok(),
        gap_closure_macro: gap_closure(ai_eval.macro_f1, eval.macro_f1, gold_eval.macro_f1).ok(),
        eval: Some(eval),
        stats: Some(stats),
        error: None,
    })
}

fn aggregate(cells: &[Cell], strategy: Strategy, budget: f64) -> Aggregate {
    let group: Vec<&Cell> = cells
        .iter()
        .filter(|c| c.strategy == strategy && c.budget == budget)
        .collect();
    let ok: Vec<(&EvalReport, &CorrectionStats)> = group
        .iter()
        .filter_map(|c| Some((c.eval.as_ref()?, c.stats.as_ref()?)))
        .collect();
    let over = |f: &dyn Fn(&EvalReport, &CorrectionStats) -> f64| {
        MeanSd::of(&ok.iter().map(|(e, s)| f(e, s)).collect::<Vec<_>>())
    };
    let mut per_type: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (e, _) in &ok {
        for t in &e.per_type {
            per_type.entry(t.entity_type.clone()).or_default().push(t.f1);
        }
    }
    let gaps = |f: fn(&Cell) -> Option<f64>| {
        MeanSd::of(&group.iter().filter_map(|c| f(c)).collect::<Vec<_>>())
    };
    Aggregate {
        strategy,
        budget,
        failed: group.len() - ok.len(),
        micro_f1: over(&|e, _| e.micro_f1),
        macro_f1: over(&|e, _| e.macro_f1),
        weighted_f1: over(&|e, _| e.weighted_f1),
        per_type_f1: per_type
            .into_iter()
            .filter_map(|(t, v)| Some((t, MeanSd::of(&v)?)))
            .collect(),
        gap_closure_micro: gaps(|c| c.gap_closure_micro),
        gap_closure_macro: gaps(|c| c.gap_closure_macro),
        entities_identified: over(&|_, s| s.entities_identified as f64),
        entities_corrected: over(&|_, s| s.entities_corrected as f64),
        pct_entities_corrected: over(&|_, s| s.pct_entities_corrected),
        examples_requiring_correction: over(&|_, s| s.examples_requiring_correction as f64),
        pct_examples_requiring_correction: over(&|_, s| s.pct_examples_requiring_correction),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        }
    }
}

pub fn render_report(bundle: &ReportBundle, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(bundle).expect("bundle is always serializable");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(bundle),
        ReportFormat::Markdown => render_markdown(bundle),
    }
}

/// Writes one file per format into `dir`, creating it if needed.
pub fn emit_report(
    bundle: &ReportBundle,
    formats: &[ReportFormat],
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    formats
        .iter()
        .map(|&f| {
            let path = dir.join(f.file_name());
            std::fs::write(&path, render_report(bundle, f)).map_err(|e| ExperimentError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

fn entity_types(bundle: &ReportBundle) -> Vec<String> {
    bundle
        .anchors
        .gold
        .per_type
        .iter()
        .map(|t| t.entity_type.clone())
        .collect()
}

fn render_csv(bundle: &ReportBundle) -> String {
    let types = entity_types(bundle);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["row", "strategy", "budget", "seed"].map(String::from).to_vec();
    header.extend(types.iter().map(|t| format!("f1_{t}")));
    header.extend(
        [
            "micro_f1",
            "macro_f1",
            "weighted_f1",
            "entities_identified",
            "entities_corrected",
            "pct_entities_corrected",
            "examples_selected",
            "examples_requiring_correction",
            "pct_examples_requiring_correction",
            "gap_closure_micro",
            "gap_closure_macro",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).expect("in-memory csv");

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let eval_cols = |e: Option<&EvalReport>| -> Vec<String> {
        let mut cols: Vec<String> = types
            .iter()
            .map(|t| opt(e.and_then(|e| e.type_score(t)).map(|s| s.f1)))
            .collect();
        cols.push(opt(e.map(|e| e.micro_f1)));
        cols.push(opt(e.map(|e| e.macro_f1)));
        cols.push(opt(e.map(|e| e.weighted_f1)));
        cols
    };
    let mut anchor_row = |label: &str, budget: &str, seed: String, e: &EvalReport| {
        let mut row = vec![label.to_string(), String::new(), budget.to_string(), seed];
        row.extend(eval_cols(Some(e)));
        row.extend(std::iter::repeat_n(String::new(), 9));
        w.write_record(&row).expect("in-memory csv");
    };
    for a in &bundle.anchors.ai_only_by_seed {
        anchor_row("ai_only", "0", a.seed.to_string(), &a.eval);
    }
    anchor_row("gold", "1", String::new(), &bundle.anchors.gold);

    for c in &bundle.cells {
        let mut row = vec![
            "cell".to_string(),
            c.strategy.to_string(),
            c.budget.to_string(),
            c.seed.to_string(),
        ];
        row.extend(eval_cols(c.eval.as_ref()));
        let s = c.stats.as_ref();
        let count = |f: fn(&CorrectionStats) -> usize| s.map(|s| f(s).to_string()).unwrap_or_default();
        row.push(count(|s| s.entities_identified));
        row.push(count(|s| s.entities_corrected));
        row.push(opt(s.map(|s| s.pct_entities_corrected)));
        row.push(count(|s| s.examples_selected));
        row.push(count(|s| s.examples_requiring_correction));
        row.push(opt(s.map(|s| s.pct_examples_requiring_correction)));
        row.push(opt(c.gap_closure_micro));
        row.push(opt(c.gap_closure_macro));
        row.push(c.error.clone().unwrap_or_default());
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn budget_label(b: f64) -> String {
    let p = 100.0 * b;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round())
    } else {
        format!("{p}%")
    }
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Two tables: mean F1 per strategy and budget with the best mixed strategy
/// per budget in bold, then mean correction workload.
fn render_markdown(bundle: &ReportBundle) -> String {
    let types = entity_types(bundle);
    let seeds = bundle.anchors.ai_only_by_seed.len();
    let mut out = String::new();
    let _ = writeln!(out, "# Label quality by ranking strategy and budget\n");
    let _ = writeln!(out, "Mean over {seeds} seed(s). F1 in percent.\n");

    let mut header = String::from("| Budget | Ranking |");
    for t in &types {
        let _ = write!(header, " {t} |");
    }
    header.push_str(" Micro Avg. | Macro Avg. | Weighted Avg. |");
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "|{}", "---|".repeat(types.len() + 5));

    let anchors = &bundle.anchors.ai_only_by_seed;
    let mut ai_row: Vec<f64> = types
        .iter()
        .map(|t| {
            let v: Vec<f64> = anchors
                .iter()
                .filter_map(|a| a.eval.type_score(t).map(|s| s.f1))
                .collect();
            mean_of(&v)
        })
        .collect();
    for f in [
        |e: &EvalReport| e.micro_f1,
        |e: &EvalReport| e.macro_f1,
        |e: &EvalReport| e.weighted_f1,
    ] {
        ai_row.push(mean_of(&anchors.iter().map(|a| f(&a.eval)).collect::<Vec<_>>()));
    }
    let row_text = |budget: &str, name: &str, vals: &[Option<f64>], best: &[Option<f64>]| {
        let mut s = format!("| {budget} | {name} |");
        for (v, b) in vals.iter().zip(best) {
            match v {
                Some(x) if Some(*x) == *b => {
                    let _ = write!(s, " **{}** |", pct(*x));
                }
                Some(x) => {
                    let _ = write!(s, " {} |", pct(*x));
                }
                None => s.push_str(" n/a |"),
            }
        }
        s
    };
    let none = vec![None; types.len() + 3];
    let ai_vals: Vec<Option<f64>> = ai_row.into_iter().map(Some).collect();
    let _ = writeln!(out, "{}", row_text("0%", "AI only", &ai_vals, &none));

    let strategies = &bundle.config.strategies;
    for &budget in &bundle.config.budgets {
        let rows: Vec<(Strategy, Vec<Option<f64>>)> = strategies
            .iter()
            .map(|&s| {
                let agg = bundle.aggregate(s, budget);
                let mut vals: Vec<Option<f64>> = types
                    .iter()
                    .map(|t| agg.and_then(|a| a.per_type_f1.get(t)).map(|m| m.mean))
                    .collect();
                vals.push(agg.and_then(|a| a.micro_f1).map(|m| m.mean));
                vals.push(agg.and_then(|a| a.macro_f1).map(|m| m.mean));
                vals.push(agg.and_then(|a| a.weighted_f1).map(|m| m.mean));
                (s, vals)
            })
            .collect();
        let best: Vec<Option<f64>> = (0..types.len() + 3)
            .map(|i| {
                rows.iter()
                    .filter_map(|(_, v)| v[i])
                    .max_by(f64::total_cmp)
            })
            .collect();
        for (s, vals) in &rows {
            let _ = writeln!(out, "{}", row_text(&budget_label(budget), s.name(), vals, &best));
        }
    }
    let gold = &bundle.anchors.gold;
    let mut gold_vals: Vec<Option<f64>> = types
        .iter()
        .map(|t| gold.type_score(t).map(|s| s.f1))
        .collect();
    gold_vals.extend([Some(gold.micro_f1), Some(gold.macro_f1), Some(gold.weighted_f1)]);
    let _ = writeln!(out, "{}", row_text("100%", "Gold", &gold_vals, &none));

    let _ = writeln!(out, "\n## Correction workload\n");
    let _ = writeln!(
        out,
        "| Budget | Ranking | Entities Corrected | Entities Identified | Percentage Corrected | Examples Requiring Correction | Percentage of Examples | Gap Closure (macro) |"
    );
    let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
    let fmt = |m: Option<MeanSd>, digits: usize| {
        m.map(|m| format!("{:.*}", digits, m.mean))
            .unwrap_or_else(|| "n/a".into())
    };
    for &budget in &bundle.config.budgets {
        for &s in strategies {
            let Some(a) = bundle.aggregate(s, budget) else {
                continue;
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                budget_label(budget),
                s.name(),
                fmt(a.entities_corrected, 1),
                fmt(a.entities_identified, 1),
                fmt(a.pct_entities_corrected, 1),
                fmt(a.examples_requiring_correction, 1),
                fmt(a.pct_examples_requiring_correction, 1),
                fmt(a.gap_closure_macro, 3),
            );
        }
    }
    out
}
