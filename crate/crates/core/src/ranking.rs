//! Review-priority orderings over the examples of a corpus.
//!
//! Every strategy produces a total order: scores decide first and ties fall
//! back to ascending example id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Example};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("budget fraction {0} is outside [0, 1]")]
    BudgetRange(f64),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    #[serde(alias = "random")]
    Random,
    #[serde(alias = "length")]
    Length,
    #[serde(alias = "entity")]
    Entity,
    #[serde(alias = "confidence")]
    Confidence,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Random,
        Strategy::Length,
        Strategy::Entity,
        Strategy::Confidence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "RANDOM",
            Strategy::Length => "LENGTH",
            Strategy::Entity => "ENTITY",
            Strategy::Confidence => "CONFIDENCE",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| RankError::UnknownStrategy(s.into()))
    }
}

/// How EntityRank counts entities in an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityCounting {
    /// Decoded AI spans.
    #[default]
    Spans,
    /// Tokens whose AI tag is `B` or `I`.
    Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub example_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub strategy: Strategy,
    pub entries: Vec<RankEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.example_id)
    }
}

/// Score assigned by ConfidenceRank to examples with no entity tokens.
pub const NO_ENTITY_SENTINEL: f64 = 1.0;

pub fn example_length(ex: &Example) -> usize {
    ex.len()
}

pub fn entity_count(ex: &Example, counting: EntityCounting) -> usize {
    match counting {
        EntityCounting::Spans => ex.ai_spans().len(),
        EntityCounting::Tokens => ex.ai_tags().filter(|t| t.is_entity()).count(),
    }
}

/// Lowest confidence among tokens with an entity AI tag.
pub fn min_entity_confidence(ex: &Example) -> Option<f64> {
    ex.tokens
        .iter()
        .filter(|t| t.ai_label.is_entity())
        .map(|t| t.confidence)
        .min_by(f64::total_cmp)
}

fn descending(scores: Vec<(usize, f64)>, strategy: Strategy) -> RankedList {
    let mut scored = scores;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    into_list(scored, strategy)
}

fn into_list(scored: Vec<(usize, f64)>, strategy: Strategy) -> RankedList {
    RankedList {
        strategy,
        entries: scored
            .into_iter()
            .map(|(example_id, score)| RankEntry { example_id, score })
            .collect(),
    }
}

/// Longest examples first.
pub fn length_rank(corpus: &Corpus) -> RankedList {
    let scores = corpus
        .examples
        .iter()
        .map(|ex| (ex.id, example_length(ex) as f64))
        .collect();
    descending(scores, Strategy::Length)
}

/// Examples with the most predicted entities first.
pub fn entity_rank(corpus: &Corpus) -> RankedList {
    entity_rank_with(corpus, EntityCounting::Spans)
}

pub fn entity_rank_with(corpus: &Corpus, counting: EntityCounting) -> RankedList {
    let scores = corpus
        .examples
        .iter()
        .map(|ex| (ex.id, entity_count(ex, counting) as f64))
        .collect();
    descending(scores, Strategy::Entity)
}

/// Least confident predicted entity first. Examples without any predicted
/// entity score [`NO_ENTITY_SENTINEL`] and always come after the others.
pub fn confidence_rank(corpus: &Corpus) -> RankedList {
    let mut keyed: Vec<(usize, Option<f64>)> = corpus
        .examples
        .iter()
        .map(|ex| (ex.id, min_entity_confidence(ex)))
        .collect();
    keyed.sort_by(|a, b| {
        let by_score = match (a.1, b.1) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_score.then(a.0.cmp(&b.0))
    });
    let scored = keyed
        .into_iter()
        .map(|(id, c)| (id, c.unwrap_or(NO_ENTITY_SENTINEL)))
        .collect();
    into_list(scored, Strategy::Confidence)
}

/// Uniform random order. Each example draws a `U[0, 1)` value from a
/// ChaCha8 stream seeded with `seed`; examples are sorted by draw.
pub fn random_rank(corpus: &Corpus, seed: u64) -> RankedList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scored: Vec<(usize, f64)> = corpus
        .examples
        .iter()
        .map(|ex| (ex.id, rng.random::<f64>()))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    into_list(scored, Strategy::Random)
}

/// Dispatches on `strategy`. `seed` is only read by [`Strategy::Random`].
pub fn rank(corpus: &Corpus, strategy: Strategy, seed: u64) -> RankedList {
    match strategy {
        Strategy::Random => random_rank(corpus, seed),
        Strategy::Length => length_rank(corpus),
        Strategy::Entity => entity_rank(corpus),
        Strategy::Confidence => confidence_rank(corpus),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub strategy: Strategy,
    pub budget_fraction: f64,
    /// Selected ids in rank order.
    pub ids: Vec<usize>,
}

impl SelectionSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// `ceil(fraction * n)`, treating products within rounding noise of an
/// integer as that integer so that e.g. `0.07 * 100` selects 7.
pub fn budget_count(fraction: f64, n: usize) -> Result<usize, RankError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(RankError::BudgetRange(fraction));
    }
    let exact = fraction * n as f64;
    let nearest = exact.round();
    let count = if (exact - nearest).abs() <= 1e-9 * (n.max(1) as f64) {
        nearest
    } else {
        exact.ceil()
    };
    Ok((count as usize).min(n))
}

pub fn select_budget(ranked: &RankedList, budget_fraction: f64) -> Result<SelectionSet, RankError> {
    let k = budget_count(budget_fraction, ranked.len())?;
    Ok(SelectionSet {
        strategy: ranked.strategy,
        budget_fraction,
        ids: ranked.ids().take(k).collect(),
    })
}
