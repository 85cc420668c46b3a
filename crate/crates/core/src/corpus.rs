//! Token-labeled corpora with per-token confidences.
//!
//! The on-disk form is a CoNLL-style columnar file, one token per line:
//!
//! ```text
//! <text> <confidence> <ai_tag> [<gold_tag>]
//! ```
//!
//! Columns are separated by spaces or tabs and examples by a blank line.
//! Tags are `O`, `B-<TYPE>` or `I-<TYPE>` with `<TYPE>` in `[A-Za-z0-9_]+`.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: confidence `{value}` is not a number in [0, 1]")]
    ConfidenceRange { line: usize, value: String },
    #[error("line {line}: invalid tag `{tag}`")]
    Tag { line: usize, tag: String },
    #[error("corpus has no gold labels")]
    MissingGold,
}

/// A tag string that is not `O`, `B-<TYPE>` or `I-<TYPE>`.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid tag `{0}`")]
pub struct InvalidTag(pub String);

/// A token-level BIO tag. `B` and `I` always carry an entity type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    O,
    B(String),
    I(String),
}

impl BioTag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            BioTag::O => None,
            BioTag::B(t) | BioTag::I(t) => Some(t),
        }
    }

    pub fn is_entity(&self) -> bool {
        !matches!(self, BioTag::O)
    }
}

fn valid_type_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl FromStr for BioTag {
    type Err = InvalidTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(BioTag::O);
        }
        let (prefix, name) = s.split_at_checked(2).ok_or_else(|| InvalidTag(s.into()))?;
        if !valid_type_name(name) {
            return Err(InvalidTag(s.into()));
        }
        match prefix {
            "B-" => Ok(BioTag::B(name.into())),
            "I-" => Ok(BioTag::I(name.into())),
            _ => Err(InvalidTag(s.into())),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(t) => write!(f, "B-{t}"),
            BioTag::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub ai_label: BioTag,
    pub confidence: f64,
    pub gold_label: Option<BioTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: usize,
    pub tokens: Vec<Token>,
}

/// Which tag column to read from an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagSource {
    Ai,
    Gold,
}

impl Example {
    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ai_tags(&self) -> impl Iterator<Item = &BioTag> + '_ {
        self.tokens.iter().map(|t| &t.ai_label)
    }

    /// Gold tags, or `None` if any token lacks one.
    pub fn gold_tags(&self) -> Option<Vec<&BioTag>> {
        self.tokens.iter().map(|t| t.gold_label.as_ref()).collect()
    }

    pub fn ai_spans(&self) -> Vec<EntitySpan> {
        decode_tags(self.ai_tags())
    }

    pub fn gold_spans(&self) -> Option<Vec<EntitySpan>> {
        self.gold_tags().map(decode_tags)
    }

    pub fn spans(&self, source: TagSource) -> Result<Vec<EntitySpan>, CorpusError> {
        match source {
            TagSource::Ai => Ok(self.ai_spans()),
            TagSource::Gold => self.gold_spans().ok_or(CorpusError::MissingGold),
        }
    }

    /// True when every token's AI tag equals its gold tag.
    pub fn ai_matches_gold(&self) -> bool {
        self.tokens
            .iter()
            .all(|t| t.gold_label.as_ref() == Some(&t.ai_label))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub entity_types: BTreeSet<String>,
    pub has_gold: bool,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Looks up an example by id. Ids are dense `0..N` for parsed and
    /// generated corpora, so this is a direct index with a fallback scan.
    pub fn example(&self, id: usize) -> Option<&Example> {
        match self.examples.get(id) {
            Some(ex) if ex.id == id => Some(ex),
            _ => self.examples.iter().find(|ex| ex.id == id),
        }
    }

    pub(crate) fn position(&self, id: usize) -> Option<usize> {
        match self.examples.get(id) {
            Some(ex) if ex.id == id => Some(id),
            _ => self.examples.iter().position(|ex| ex.id == id),
        }
    }

    /// Rebuilds `entity_types` from the types used in any tag, keeping
    /// types already declared.
    pub fn collect_entity_types(&mut self) {
        for ex in &self.examples {
            for tok in &ex.tokens {
                let tags = std::iter::once(&tok.ai_label).chain(tok.gold_label.as_ref());
                for t in tags.filter_map(BioTag::entity_type) {
                    if !self.entity_types.contains(t) {
                        self.entity_types.insert(t.to_owned());
                    }
                }
            }
        }
    }
}

/// A decoded entity: tokens `start..end` of one example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, entity_type: impl Into<String>) -> Self {
        Self {
            start,
            end,
            entity_type: entity_type.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Decodes a BIO sequence into maximal spans, left to right.
///
/// Repair policy: an `I-X` that does not continue a `B-X`/`I-X` run opens a
/// new span, and a type change closes the running span. Decoding never fails.
pub fn decode_tags<'a, I>(tags: I) -> Vec<EntitySpan>
where
    I: IntoIterator<Item = &'a BioTag>,
{
    decode_counting_repairs(tags).0
}

/// Number of `I-` tags that had to be treated as span starts.
pub fn repair_count<'a, I>(tags: I) -> usize
where
    I: IntoIterator<Item = &'a BioTag>,
{
    decode_counting_repairs(tags).1
}

fn decode_counting_repairs<'a, I>(tags: I) -> (Vec<EntitySpan>, usize)
where
    I: IntoIterator<Item = &'a BioTag>,
{
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    let mut repairs = 0;
    let mut n = 0;
    for (i, tag) in tags.into_iter().enumerate() {
        n = i + 1;
        match tag {
            BioTag::O => {
                if let Some((start, ty)) = open.take() {
                    spans.push(EntitySpan::new(start, i, ty));
                }
            }
            BioTag::B(ty) => {
                if let Some((start, prev)) = open.take() {
                    spans.push(EntitySpan::new(start, i, prev));
                }
                open = Some((i, ty));
            }
            BioTag::I(ty) => match open {
                Some((_, prev)) if prev == ty => {}
                _ => {
                    if let Some((start, prev)) = open.take() {
                        spans.push(EntitySpan::new(start, i, prev));
                    }
                    repairs += 1;
                    open = Some((i, ty));
                }
            },
        }
    }
    if let Some((start, ty)) = open {
        spans.push(EntitySpan::new(start, n, ty));
    }
    (spans, repairs)
}

/// Encodes non-overlapping spans as a BIO sequence of length `len`.
pub fn encode_spans(spans: &[EntitySpan], len: usize) -> Vec<BioTag> {
    let mut tags = vec![BioTag::O; len];
    for span in spans {
        debug_assert!(span.start < span.end && span.end <= len);
        tags[span.start] = BioTag::B(span.entity_type.clone());
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = BioTag::I(span.entity_type.clone());
        }
    }
    tags
}

/// Parses a corpus file. `has_gold` selects the four-column layout.
pub fn parse_corpus(input: &str, has_gold: bool) -> Result<Corpus, CorpusError> {
    let expected = if has_gold { 4 } else { 3 };
    let mut corpus = Corpus {
        has_gold,
        ..Corpus::default()
    };
    let mut current: Vec<Token> = Vec::new();

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let cols: Vec<&str> = line
            .split([' ', '\t'])
            .filter(|c| !c.is_empty())
            .collect();
        if cols.is_empty() {
            if !current.is_empty() {
                let id = corpus.examples.len();
                corpus.examples.push(Example {
                    id,
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        if cols.len() != expected {
            return Err(CorpusError::ColumnCount {
                line: line_no,
                expected,
                found: cols.len(),
            });
        }
        let confidence = cols[1]
            .parse::<f64>()
            .ok()
            .filter(|c| (0.0..=1.0).contains(c))
            .ok_or_else(|| CorpusError::ConfidenceRange {
                line: line_no,
                value: cols[1].into(),
            })?;
        let tag = |s: &str| {
            s.parse::<BioTag>().map_err(|_| CorpusError::Tag {
                line: line_no,
                tag: s.into(),
            })
        };
        let ai_label = tag(cols[2])?;
        let gold_label = if has_gold { Some(tag(cols[3])?) } else { None };
        current.push(Token {
            text: cols[0].into(),
            ai_label,
            confidence,
            gold_label,
        });
    }
    if !current.is_empty() {
        let id = corpus.examples.len();
        corpus.examples.push(Example { id, tokens: current });
    }
    corpus.collect_entity_types();
    Ok(corpus)
}

/// Parses a corpus, inferring `has_gold` from the column count of the
/// first token line (four columns means gold labels are present).
pub fn parse_corpus_auto(input: &str) -> Result<Corpus, CorpusError> {
    let has_gold = input
        .lines()
        .map(|l| l.split([' ', '\t']).filter(|c| !c.is_empty()).count())
        .find(|&n| n > 0)
        .is_some_and(|n| n == 4);
    parse_corpus(input, has_gold)
}

/// Which columns [`write_corpus`] emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// `text confidence ai_tag`
    Ai,
    /// `text 1 gold_tag`, a gold-only training file.
    Gold,
    /// Every column the corpus has. After corrections the corrected tags
    /// sit in the AI column.
    MixedExport,
}

pub fn write_corpus(corpus: &Corpus, source: LabelSource) -> Result<String, CorpusError> {
    if source == LabelSource::Gold && !corpus.has_gold {
        return Err(CorpusError::MissingGold);
    }
    let mut out = String::new();
    for (i, ex) in corpus.examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for tok in &ex.tokens {
            // `{}` on f64 prints the shortest string that parses back exactly.
            match source {
                LabelSource::Ai => {
                    writeln!(out, "{} {} {}", tok.text, tok.confidence, tok.ai_label)
                }
                LabelSource::Gold => {
                    let gold = tok.gold_label.as_ref().ok_or(CorpusError::MissingGold)?;
                    writeln!(out, "{} 1 {}", tok.text, gold)
                }
                LabelSource::MixedExport => match (&tok.gold_label, corpus.has_gold) {
                    (Some(gold), true) => writeln!(
                        out,
                        "{} {} {} {}",
                        tok.text, tok.confidence, tok.ai_label, gold
                    ),
                    (None, true) => return Err(CorpusError::MissingGold),
                    _ => writeln!(out, "{} {} {}", tok.text, tok.confidence, tok.ai_label),
                },
            }
            .expect("writing to a String cannot fail");
        }
    }
    Ok(out)
}
