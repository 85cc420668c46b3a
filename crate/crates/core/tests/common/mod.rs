#![allow(dead_code)]

use hcoal_core::{BioTag, Corpus, Example, Token};
use proptest::prelude::*;

pub const TYPES: [&str; 3] = ["A", "B", "C"];

/// Arbitrary tag sequences, including ill-formed `I-` runs.
pub fn tag_strategy() -> impl Strategy<Value = BioTag> {
    (0u8..3, 0usize..TYPES.len()).prop_map(|(kind, ty)| match kind {
        0 => BioTag::O,
        1 => BioTag::B(TYPES[ty].into()),
        _ => BioTag::I(TYPES[ty].into()),
    })
}

pub fn token_strategy(with_gold: bool) -> impl Strategy<Value = Token> {
    (tag_strategy(), tag_strategy(), 0.0f64..=1.0, "[a-z]{1,6}").prop_map(
        move |(ai, gold, confidence, text)| Token {
            text,
            ai_label: ai,
            confidence,
            gold_label: with_gold.then_some(gold),
        },
    )
}

pub fn corpus_strategy(max_examples: usize, max_len: usize, with_gold: bool) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::vec(token_strategy(with_gold), 1..=max_len), 0..=max_examples)
        .prop_map(move |blocks| build_corpus(blocks, with_gold))
}

pub fn build_corpus(blocks: Vec<Vec<Token>>, has_gold: bool) -> Corpus {
    let mut corpus = Corpus {
        examples: blocks
            .into_iter()
            .enumerate()
            .map(|(id, tokens)| Example { id, tokens })
            .collect(),
        has_gold,
        ..Corpus::default()
    };
    corpus.collect_entity_types();
    corpus
}

/// Span `[start, end)` of `ty` is present iff it starts a run at `start`,
/// continues with `I-ty` through `end - 1`, and is not continued at `end`.
fn brute_force_spans(tags: &[&BioTag]) -> Vec<(usize, usize, String)> {
    let n = tags.len();
    let continues = |j: usize, ty: &str| matches!(tags[j], BioTag::I(t) if t == ty);
    let starts = |s: usize, ty: &str| match tags[s] {
        BioTag::B(t) => t == ty,
        BioTag::I(t) => t == ty && (s == 0 || !matches!(tags[s - 1], BioTag::B(p) | BioTag::I(p) if p == ty)),
        BioTag::O => false,
    };
    let mut out = Vec::new();
    for ty in TYPES.iter().copied().chain(extra_types(tags).iter().map(String::as_str)) {
        for s in 0..n {
            for e in s + 1..=n {
                if starts(s, ty)
                    && (s + 1..e).all(|j| continues(j, ty))
                    && (e == n || !continues(e, ty))
                {
                    out.push((s, e, ty.to_string()));
                }
            }
        }
    }
    out
}

fn extra_types(tags: &[&BioTag]) -> Vec<String> {
    let mut v: Vec<String> = tags
        .iter()
        .filter_map(|t| t.entity_type())
        .filter(|t| !TYPES.contains(t))
        .map(String::from)
        .collect();
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RefCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Reference scorer: enumerates every candidate span and matches by
/// exhaustive pairwise comparison.
pub fn reference_counts(corpus: &Corpus) -> std::collections::BTreeMap<String, RefCounts> {
    let mut by_type: std::collections::BTreeMap<String, RefCounts> = corpus
        .entity_types
        .iter()
        .map(|t| (t.clone(), RefCounts::default()))
        .collect();
    for ex in &corpus.examples {
        let ai: Vec<&BioTag> = ex.tokens.iter().map(|t| &t.ai_label).collect();
        let gold: Vec<&BioTag> = ex.tokens.iter().map(|t| t.gold_label.as_ref().unwrap()).collect();
        let pred = brute_force_spans(&ai);
        let truth = brute_force_spans(&gold);
        let mut used = vec![false; truth.len()];
        for p in &pred {
            let hit = truth
                .iter()
                .enumerate()
                .find(|(i, g)| !used[*i] && *g == p)
                .map(|(i, _)| i);
            let c = by_type.entry(p.2.clone()).or_default();
            match hit {
                Some(i) => {
                    used[i] = true;
                    c.tp += 1;
                }
                None => c.fp += 1,
            }
        }
        for (g, u) in truth.iter().zip(&used) {
            if !u {
                by_type.entry(g.2.clone()).or_default().fn_ += 1;
            }
        }
    }
    by_type
}
