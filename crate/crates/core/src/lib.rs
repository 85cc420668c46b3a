//! Active cleaning of machine-generated sequence labels.
//!
//! Labels produced by an external tagging service are ranked by how likely
//! they are to be wrong, a budgeted prefix of the ranking is sent for review,
//! corrections are merged back, and the result is scored against gold labels
//! with entity-level F1.

pub mod corpus;
pub mod evaluation;
pub mod experiment;
pub mod ranking;
pub mod review;
pub mod simulator;

pub use corpus::{
    decode_tags, encode_spans, parse_corpus, parse_corpus_auto, write_corpus, BioTag, Corpus,
    CorpusError, EntitySpan, Example, LabelSource, TagSource, Token,
};
pub use evaluation::{
    correction_stats, evaluate_labels, gap_closure, CorrectionStats, Counts, EvalError,
    EvalReport, TypeScore,
};
pub use ranking::{
    confidence_rank, entity_rank, length_rank, random_rank, rank, select_budget, RankEntry,
    RankError, RankedList, SelectionSet, Strategy,
};
pub use simulator::{
    corrupt, generate_gold, oracle_correct, BetaParams, NoiseConfig, SimError, SyntheticSpec,
};
pub use experiment::{
    emit_report, render_report, run_experiment, run_grid, ExperimentConfig, ExperimentError,
    InputSource, ReportBundle, ReportFormat,
};
pub use review::{apply_corrections, read_journal, CorrectionRecord, ReviewError, ReviewSession};
