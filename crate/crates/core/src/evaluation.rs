//! Entity-level scoring of AI labels against gold labels.
//!
//! A predicted span counts as a true positive only if a gold span in the
//! same example has the same start, end and type.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, EntitySpan};
use crate::ranking::SelectionSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("corpus has no gold labels")]
    MissingGold,
    #[error("gold and AI scores are equal ({0}); the gap is empty")]
    DegenerateGap(f64),
    #[error("unknown example id {0}")]
    UnknownId(usize),
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub entity_type: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold span count, `tp + fn`.
    pub support: usize,
}

impl TypeScore {
    fn from_counts(entity_type: String, c: Counts) -> Self {
        Self {
            entity_type,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.tp + c.fn_,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: Vec<TypeScore>,
    pub micro: Counts,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl EvalReport {
    pub fn from_type_counts(by_type: BTreeMap<String, Counts>) -> Self {
        let mut micro = Counts::default();
        let per_type: Vec<TypeScore> = by_type
            .into_iter()
            .map(|(ty, c)| {
                micro.add(c);
                TypeScore::from_counts(ty, c)
            })
            .collect();
        let macro_f1 = if per_type.is_empty() {
            0.0
        } else {
            per_type.iter().map(|t| t.f1).sum::<f64>() / per_type.len() as f64
        };
        let total_support: usize = per_type.iter().map(|t| t.support).sum();
        let weighted_f1 = if total_support == 0 {
            0.0
        } else {
            per_type
                .iter()
                .map(|t| t.f1 * t.support as f64)
                .sum::<f64>()
                / total_support as f64
        };
        Self {
            per_type,
            micro,
            micro_precision: micro.precision(),
            micro_recall: micro.recall(),
            micro_f1: micro.f1(),
            macro_f1,
            weighted_f1,
        }
    }

    pub fn type_score(&self, entity_type: &str) -> Option<&TypeScore> {
        self.per_type.iter().find(|t| t.entity_type == entity_type)
    }
}

/// Exact-match confusion counts for one example, keyed by type.
pub fn match_spans(
    predicted: &[EntitySpan],
    gold: &[EntitySpan],
    into: &mut BTreeMap<String, Counts>,
) {
    let gold_set: HashSet<&EntitySpan> = gold.iter().collect();
    let pred_set: HashSet<&EntitySpan> = predicted.iter().collect();
    for p in &pred_set {
        let c = into.entry(p.entity_type.clone()).or_default();
        if gold_set.contains(p) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for g in gold_set.difference(&pred_set) {
        into.entry(g.entity_type.clone()).or_default().fn_ += 1;
    }
}

/// Scores the AI column against the gold column. Every declared entity type
/// gets a row, including types with no gold or predicted spans.
pub fn evaluate_labels(corpus: &Corpus) -> Result<EvalReport, EvalError> {
    if !corpus.has_gold {
        return Err(EvalError::MissingGold);
    }
    let mut by_type: BTreeMap<String, Counts> = corpus
        .entity_types
        .iter()
        .map(|t| (t.clone(), Counts::default()))
        .collect();
    for ex in &corpus.examples {
        let gold = ex.gold_spans().ok_or(EvalError::MissingGold)?;
        match_spans(&ex.ai_spans(), &gold, &mut by_type);
    }
    Ok(EvalReport::from_type_counts(by_type))
}

/// Fraction of the AI-to-gold gap recovered by the mixed labels.
pub fn gap_closure(f1_ai: f64, f1_mixed: f64, f1_gold: f64) -> Result<f64, EvalError> {
    let gap = f1_gold - f1_ai;
    if gap == 0.0 {
        return Err(EvalError::DegenerateGap(f1_ai));
    }
    Ok((f1_mixed - f1_ai) / gap)
}

/// Review workload over a selection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrectionStats {
    /// AI spans in the selected examples.
    pub entities_identified: usize,
    /// AI spans in the selected examples with no exact gold match.
    pub entities_corrected: usize,
    pub pct_entities_corrected: f64,
    pub examples_selected: usize,
    /// Selected examples where at least one AI tag differs from gold.
    pub examples_requiring_correction: usize,
    pub pct_examples_requiring_correction: f64,
    /// Gold spans in the selected examples with no exact AI match.
    pub gold_entities_missed: usize,
}

pub fn correction_stats(
    ai_corpus: &Corpus,
    selection: &SelectionSet,
) -> Result<CorrectionStats, EvalError> {
    correction_stats_ids(ai_corpus, &selection.ids)
}

pub fn correction_stats_ids(ai_corpus: &Corpus, ids: &[usize]) -> Result<CorrectionStats, EvalError> {
    if !ai_corpus.has_gold {
        return Err(EvalError::MissingGold);
    }
    let mut stats = CorrectionStats::default();
    for &id in ids {
        let ex = ai_corpus.example(id).ok_or(EvalError::UnknownId(id))?;
        let predicted = ex.ai_spans();
        let gold = ex.gold_spans().ok_or(EvalError::MissingGold)?;
        let gold_set: HashSet<&EntitySpan> = gold.iter().collect();
        let pred_set: HashSet<&EntitySpan> = predicted.iter().collect();
        stats.entities_identified += predicted.len();
        stats.entities_corrected += predicted.iter().filter(|p| !gold_set.contains(p)).count();
        stats.gold_entities_missed += gold.iter().filter(|g| !pred_set.contains(g)).count();
        stats.examples_selected += 1;
        if !ex.ai_matches_gold() {
            stats.examples_requiring_correction += 1;
        }
    }
    stats.pct_entities_corrected = 100.0 * ratio(stats.entities_corrected, stats.entities_identified);
    stats.pct_examples_requiring_correction =
        100.0 * ratio(stats.examples_requiring_correction, stats.examples_selected);
    Ok(stats)
}
