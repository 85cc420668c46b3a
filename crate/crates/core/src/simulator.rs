//! Synthetic gold corpora, a seeded stand-in for a black-box labeling
//! service, and oracle correction from gold labels.
//!
//! Randomness is drawn from ChaCha8 streams keyed by `(seed, example id)`,
//! so the output for one example does not depend on any other example.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{decode_tags, encode_spans, BioTag, Corpus, EntitySpan, Example, Token};
use crate::ranking::SelectionSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus has no gold labels")]
    MissingGold,
    #[error("unknown example id {0}")]
    UnknownId(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    fn distribution(&self) -> Result<Beta<f64>, SimError> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite())
        {
            return Err(SimError::Config(format!(
                "beta parameters must be positive, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Beta::new(self.alpha, self.beta).map_err(|e| SimError::Config(e.to_string()))
    }
}

/// Error process of the simulated labeler. Applied per example in the order
/// miss, type, boundary, spurious.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Probability a gold span is dropped.
    pub p_miss: f64,
    /// Probability a surviving span gets a different, uniformly drawn type.
    pub p_type: f64,
    /// Probability one edge of a surviving span moves by one token.
    pub p_boundary: f64,
    /// Expected number of spurious spans per example.
    pub p_spurious: f64,
    pub conf_correct: BetaParams,
    pub conf_wrong: BetaParams,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_miss: 0.04,
            p_type: 0.06,
            p_boundary: 0.06,
            p_spurious: 0.12,
            conf_correct: BetaParams::new(8.0, 2.0),
            conf_wrong: BetaParams::new(2.0, 4.0),
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// All error rates zero.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            p_miss: 0.0,
            p_type: 0.0,
            p_boundary: 0.0,
            p_spurious: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("p_miss", self.p_miss),
            ("p_type", self.p_type),
            ("p_boundary", self.p_boundary),
            ("p_spurious", self.p_spurious),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        self.conf_correct.distribution()?;
        self.conf_wrong.distribution()?;
        Ok(())
    }
}

/// Shape of a generated gold corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_examples: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub entity_types: Vec<String>,
    /// Mean of the Poisson entity count per example.
    pub entities_per_example: f64,
    pub vocab_size: usize,
    #[serde(default = "default_max_entity_len")]
    pub max_entity_len: usize,
}

fn default_max_entity_len() -> usize {
    3
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_examples: 2000,
            min_len: 8,
            max_len: 30,
            entity_types: vec!["PROBLEM".into(), "TEST".into(), "TREATMENT".into()],
            entities_per_example: 2.0,
            vocab_size: 5000,
            max_entity_len: default_max_entity_len(),
        }
    }
}

/// Most entities that fit in `len` tokens with an `O` between neighbours.
fn capacity(len: usize) -> usize {
    len.div_ceil(2)
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.n_examples == 0 {
            return bad("n_examples must be positive".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!(
                "length range {}..={} is empty or starts at zero",
                self.min_len, self.max_len
            ));
        }
        if self.entity_types.is_empty() {
            return bad("at least one entity type is required".into());
        }
        if let Some(t) = self.entity_types.iter().find(|t| {
            t.is_empty() || !t.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
        }) {
            return bad(format!("entity type `{t}` is not a valid tag name"));
        }
        if self.vocab_size == 0 || self.max_entity_len == 0 {
            return bad("vocab_size and max_entity_len must be positive".into());
        }
        if !(self.entities_per_example >= 0.0 && self.entities_per_example.is_finite()) {
            return bad("entities_per_example must be a non-negative number".into());
        }
        if self.entities_per_example > capacity(self.max_len) as f64 {
            return bad(format!(
                "{} entities per example cannot fit in {} tokens",
                self.entities_per_example, self.max_len
            ));
        }
        Ok(())
    }
}

fn example_rng(seed: u64, id: usize, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((id as u64).wrapping_mul(2).wrapping_add(salt));
    rng
}

const GEN_SALT: u64 = 0;
const CORRUPT_SALT: u64 = 1;

/// Generates a corpus whose gold and AI columns are identical valid BIO with
/// confidence 1.0 everywhere.
pub fn generate_gold(spec: &SyntheticSpec, seed: u64) -> Result<Corpus, SimError> {
    spec.validate()?;
    let poisson = (spec.entities_per_example > 0.0)
        .then(|| Poisson::new(spec.entities_per_example).expect("rate checked positive"));
    let examples = (0..spec.n_examples)
        .map(|id| {
            let mut rng = example_rng(seed, id, GEN_SALT);
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let drawn = poisson.map_or(0, |p| p.sample(&mut rng) as usize);
            let spans = place_spans(spec, len, drawn.min(capacity(len)), &mut rng);
            let tags = encode_spans(&spans, len);
            let tokens = tags
                .into_iter()
                .map(|tag| Token {
                    text: format!("w{}", rng.random_range(0..spec.vocab_size)),
                    ai_label: tag.clone(),
                    confidence: 1.0,
                    gold_label: Some(tag),
                })
                .collect();
            Example { id, tokens }
        })
        .collect();
    Ok(Corpus {
        examples,
        entity_types: spec.entity_types.iter().cloned().collect(),
        has_gold: true,
    })
}

/// Lays out `k` spans separated by at least one `O` token.
fn place_spans(spec: &SyntheticSpec, len: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<EntitySpan> {
    if k == 0 {
        return Vec::new();
    }
    let mut lengths: Vec<usize> = (0..k)
        .map(|_| rng.random_range(1..=spec.max_entity_len))
        .collect();
    while lengths.iter().sum::<usize>() + (k - 1) > len {
        let longest = lengths
            .iter_mut()
            .max()
            .expect("k > 0 so lengths is non-empty");
        *longest -= 1;
    }
    let free = len - lengths.iter().sum::<usize>() - (k - 1);
    let mut cuts: Vec<usize> = (0..k).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();

    let mut spans = Vec::with_capacity(k);
    let mut pos = 0;
    let mut prev_cut = 0;
    for (i, (&span_len, &cut)) in lengths.iter().zip(&cuts).enumerate() {
        pos += cut - prev_cut + usize::from(i > 0);
        prev_cut = cut;
        let ty = spec
            .entity_types
            .choose(rng)
            .expect("validated non-empty")
            .clone();
        spans.push(EntitySpan::new(pos, pos + span_len, ty));
        pos += span_len;
    }
    spans
}

/// Rewrites the AI column of a gold corpus through the configured error
/// process and draws confidences conditioned on per-token correctness.
pub fn corrupt(gold: &Corpus, cfg: &NoiseConfig) -> Result<Corpus, SimError> {
    cfg.validate()?;
    if !gold.has_gold {
        return Err(SimError::MissingGold);
    }
    let types: Vec<&str> = gold.entity_types.iter().map(String::as_str).collect();
    let conf_correct = cfg.conf_correct.distribution()?;
    let conf_wrong = cfg.conf_wrong.distribution()?;
    let spurious = (cfg.p_spurious > 0.0)
        .then(|| Poisson::new(cfg.p_spurious).expect("rate checked positive"));

    let mut out = gold.clone();
    for ex in &mut out.examples {
        let mut rng = example_rng(cfg.seed, ex.id, CORRUPT_SALT);
        let gold_tags: Vec<BioTag> = ex
            .tokens
            .iter()
            .map(|t| t.gold_label.clone().ok_or(SimError::MissingGold))
            .collect::<Result<_, _>>()?;
        let len = gold_tags.len();
        let mut spans = decode_tags(&gold_tags);

        spans.retain(|_| !rng.random_bool(cfg.p_miss));

        for span in &mut spans {
            if rng.random_bool(cfg.p_type) {
                let others: Vec<&str> = types
                    .iter()
                    .copied()
                    .filter(|t| *t != span.entity_type)
                    .collect();
                if let Some(t) = others.choose(&mut rng) {
                    span.entity_type = (*t).to_owned();
                }
            }
        }

        for i in 0..spans.len() {
            if !rng.random_bool(cfg.p_boundary) {
                continue;
            }
            let move_start = rng.random_bool(0.5);
            let outward = rng.random_bool(0.5);
            if let Some(shifted) = shift_edge(&spans[i], move_start, outward, len) {
                let collides = spans
                    .iter()
                    .enumerate()
                    .any(|(j, other)| j != i && other.overlaps(&shifted));
                if !collides {
                    spans[i] = shifted;
                }
            }
        }

        let n_spurious = spurious.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_spurious {
            let span_len = rng.random_range(1..=2);
            let slots = free_slots(&spans, len, span_len);
            let Some(&start) = slots.choose(&mut rng) else {
                continue;
            };
            let ty = types.choose(&mut rng).copied().unwrap_or("ENTITY");
            spans.push(EntitySpan::new(start, start + span_len, ty));
        }

        spans.sort();
        let ai_tags = encode_spans(&spans, len);
        for ((tok, ai), gold_tag) in ex.tokens.iter_mut().zip(ai_tags).zip(&gold_tags) {
            tok.confidence = if &ai == gold_tag {
                conf_correct.sample(&mut rng)
            } else {
                conf_wrong.sample(&mut rng)
            };
            tok.ai_label = ai;
        }
    }
    out.collect_entity_types();
    Ok(out)
}

fn shift_edge(span: &EntitySpan, move_start: bool, outward: bool, len: usize) -> Option<EntitySpan> {
    let (mut start, mut end) = (span.start as isize, span.end as isize);
    match (move_start, outward) {
        (true, true) => start -= 1,
        (true, false) => start += 1,
        (false, true) => end += 1,
        (false, false) => end -= 1,
    }
    (start >= 0 && end as usize <= len && start < end)
        .then(|| EntitySpan::new(start as usize, end as usize, span.entity_type.clone()))
}

/// Start positions where a span of `span_len` tokens touches no existing span.
fn free_slots(spans: &[EntitySpan], len: usize, span_len: usize) -> Vec<usize> {
    let mut covered = vec![false; len];
    for s in spans {
        covered[s.start..s.end].iter_mut().for_each(|c| *c = true);
    }
    (0..len.saturating_sub(span_len - 1))
        .filter(|&p| covered[p..p + span_len].iter().all(|c| !c))
        .collect()
}

/// Replaces the AI tags of every selected example with its gold tags and
/// sets their confidences to 1.0.
pub fn oracle_correct(corpus: &Corpus, selection: &SelectionSet) -> Result<Corpus, SimError> {
    oracle_correct_ids(corpus, &selection.ids)
}

pub fn oracle_correct_ids(corpus: &Corpus, ids: &[usize]) -> Result<Corpus, SimError> {
    if !corpus.has_gold {
        return Err(SimError::MissingGold);
    }
    let positions: BTreeSet<usize> = ids
        .iter()
        .map(|&id| corpus.position(id).ok_or(SimError::UnknownId(id)))
        .collect::<Result<_, _>>()?;
    let mut out = corpus.clone();
    for pos in positions {
        for tok in &mut out.examples[pos].tokens {
            tok.ai_label = tok.gold_label.clone().ok_or(SimError::MissingGold)?;
            tok.confidence = 1.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::repair_count;
    use crate::ranking::Strategy;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_examples: 10,
            min_len: 5,
            max_len: 12,
            entity_types: vec!["A".into(), "B".into(), "C".into()],
            entities_per_example: 2.0,
            vocab_size: 50,
            max_entity_len: 3,
        }
    }

    fn selection(ids: &[usize]) -> SelectionSet {
        SelectionSet {
            strategy: Strategy::Random,
            budget_fraction: 0.0,
            ids: ids.to_vec(),
        }
    }

    #[test]
    fn generated_gold_is_clean_bio() {
        let c = generate_gold(&small_spec(), 3).unwrap();
        assert_eq!(c.len(), 10);
        assert!(c.has_gold);
        for ex in &c.examples {
            assert!((5..=12).contains(&ex.len()));
            assert_eq!(repair_count(ex.gold_tags().unwrap()), 0);
            assert!(ex.ai_matches_gold());
            assert!(ex.tokens.iter().all(|t| t.confidence == 1.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        assert_eq!(generate_gold(&spec, 9).unwrap(), generate_gold(&spec, 9).unwrap());
        assert_ne!(generate_gold(&spec, 9).unwrap(), generate_gold(&spec, 10).unwrap());
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let spec = SyntheticSpec {
            max_len: 3,
            min_len: 1,
            entities_per_example: 2.5,
            ..small_spec()
        };
        assert!(matches!(generate_gold(&spec, 0), Err(SimError::Config(_))));
        let spec = SyntheticSpec {
            min_len: 6,
            max_len: 5,
            ..small_spec()
        };
        assert!(generate_gold(&spec, 0).is_err());
    }

    #[test]
    fn zero_noise_is_identity_on_tags() {
        let gold = generate_gold(&small_spec(), 1).unwrap();
        let ai = corrupt(&gold, &NoiseConfig::noiseless(5)).unwrap();
        for (g, a) in gold.examples.iter().zip(&ai.examples) {
            assert!(a.ai_matches_gold());
            assert_eq!(g.gold_tags(), a.gold_tags());
        }
    }

    #[test]
    fn full_miss_clears_ai_column() {
        let gold = generate_gold(&small_spec(), 1).unwrap();
        let cfg = NoiseConfig {
            p_miss: 1.0,
            ..NoiseConfig::noiseless(2)
        };
        let ai = corrupt(&gold, &cfg).unwrap();
        assert!(ai
            .examples
            .iter()
            .all(|ex| ex.ai_tags().all(|t| *t == BioTag::O)));
    }

    #[test]
    fn corrupt_requires_gold_and_valid_config() {
        let mut gold = generate_gold(&small_spec(), 1).unwrap();
        let bad = NoiseConfig {
            p_type: 1.5,
            ..NoiseConfig::default()
        };
        assert!(matches!(corrupt(&gold, &bad), Err(SimError::Config(_))));
        let bad = NoiseConfig {
            conf_wrong: BetaParams::new(0.0, 1.0),
            ..NoiseConfig::default()
        };
        assert!(corrupt(&gold, &bad).is_err());
        gold.has_gold = false;
        assert_eq!(corrupt(&gold, &NoiseConfig::default()), Err(SimError::MissingGold));
    }

    #[test]
    fn shift_edge_respects_bounds() {
        let s = EntitySpan::new(0, 1, "A");
        assert_eq!(shift_edge(&s, true, true, 5), None);
        assert_eq!(shift_edge(&s, false, false, 5), None);
        assert_eq!(shift_edge(&s, false, true, 5), Some(EntitySpan::new(0, 2, "A")));
        let s = EntitySpan::new(3, 5, "A");
        assert_eq!(shift_edge(&s, false, true, 5), None);
        assert_eq!(shift_edge(&s, true, false, 5), Some(EntitySpan::new(4, 5, "A")));
    }

    #[test]
    fn free_slots_avoid_existing_spans() {
        let spans = [EntitySpan::new(1, 3, "A")];
        assert_eq!(free_slots(&spans, 6, 1), [0, 3, 4, 5]);
        assert_eq!(free_slots(&spans, 6, 2), [3, 4]);
        assert!(free_slots(&[EntitySpan::new(0, 2, "A")], 2, 1).is_empty());
        assert!(free_slots(&[], 1, 2).is_empty());
    }

    #[test]
    fn oracle_correction_of_one_example() {
        let text = "a 0.5 B-A B-A\nb 0.5 O O\n\nc 0.5 O B-B\nd 0.5 O O\n";
        let mut c = crate::corpus::parse_corpus(text, true).unwrap();
        // corrupt example 0 as well
        c.examples[0].tokens[1].ai_label = BioTag::B("B".into());
        let fixed = oracle_correct(&c, &selection(&[0])).unwrap();
        assert!(fixed.examples[0].ai_matches_gold());
        assert!(!fixed.examples[1].ai_matches_gold());
        assert_eq!(fixed.examples[0].tokens[0].confidence, 1.0);
        assert_eq!(fixed.examples[1], c.examples[1]);
        assert!(!c.examples[0].ai_matches_gold());
    }

    #[test]
    fn oracle_correction_edge_cases() {
        let gold = generate_gold(&small_spec(), 4).unwrap();
        let ai = corrupt(&gold, &NoiseConfig::default().with_seed(4)).unwrap();
        assert_eq!(oracle_correct(&ai, &selection(&[])).unwrap(), ai);
        let all: Vec<usize> = (0..ai.len()).collect();
        let once = oracle_correct(&ai, &selection(&all)).unwrap();
        assert!(once.examples.iter().all(Example::ai_matches_gold));
        assert_eq!(oracle_correct(&ai, &selection(&[99])), Err(SimError::UnknownId(99)));
        let twice = oracle_correct(&once, &selection(&all)).unwrap();
        assert_eq!(once, twice);
    }
}
