//! Review session state for human correction of a ranked queue.
//!
//! Every accepted submission is appended to a JSON-lines journal and flushed
//! before it is acknowledged. Replaying the journal rebuilds the session; the
//! latest record per example wins.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_corpus, BioTag, Corpus, CorpusError, LabelSource};
use crate::ranking::{select_budget, RankEntry, RankError, RankedList};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("example {0} is not in the review queue")]
    NotFound(usize),
    #[error("{message}")]
    Validation {
        message: String,
        /// Index of the offending tag, when one is to blame.
        token: Option<usize>,
    },
    #[error("journal {path}, line {line}: {message}")]
    Journal {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl ReviewError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn invalid(message: impl Into<String>, token: Option<usize>) -> Self {
        Self::Validation {
            message: message.into(),
            token,
        }
    }
}

/// One journal line: a full replacement tag sequence for an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub revision: u64,
    pub example_id: usize,
    pub tags: Vec<BioTag>,
    pub annotator: String,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReviewStatus {
    Pending,
    Reviewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub example_id: usize,
    pub score: f64,
    pub status: ReviewStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenView {
    pub text: String,
    pub ai_tag: BioTag,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleView {
    pub tokens: Vec<TokenView>,
    pub current_tags: Vec<BioTag>,
    pub status: ReviewStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub reviewed: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub path: PathBuf,
    pub reviewed: usize,
    pub pending: usize,
}

struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    fn append(&mut self, record: &CorrectionRecord) -> Result<(), ReviewError> {
        let mut line = serde_json::to_string(record).expect("records always serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| ReviewError::io(&self.path, e))
    }
}

pub struct ReviewSession {
    corpus: Corpus,
    queue: Vec<RankEntry>,
    latest: HashMap<usize, CorrectionRecord>,
    revision: u64,
    journal: Option<Journal>,
}

impl ReviewSession {
    /// A session whose journal lives only in memory.
    pub fn in_memory(corpus: Corpus, ranked: &RankedList, budget: f64) -> Result<Self, ReviewError> {
        let selection = select_budget(ranked, budget)?;
        let queue = ranked.entries[..selection.len()].to_vec();
        for entry in &queue {
            if corpus.example(entry.example_id).is_none() {
                return Err(ReviewError::NotFound(entry.example_id));
            }
        }
        Ok(Self {
            corpus,
            queue,
            latest: HashMap::new(),
            revision: 0,
            journal: None,
        })
    }

    /// Opens a session backed by `journal_path`, replaying any records it
    /// already holds. A torn final line from an interrupted write is ignored.
    pub fn open(
        corpus: Corpus,
        ranked: &RankedList,
        budget: f64,
        journal_path: &Path,
    ) -> Result<Self, ReviewError> {
        let mut session = Self::in_memory(corpus, ranked, budget)?;
        if journal_path.exists() {
            session.replay(journal_path)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(journal_path)
            .map_err(|e| ReviewError::io(journal_path, e))?;
        session.journal = Some(Journal {
            path: journal_path.to_owned(),
            file,
        });
        Ok(session)
    }

    fn replay(&mut self, path: &Path) -> Result<(), ReviewError> {
        let file = File::open(path).map_err(|e| ReviewError::io(path, e))?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| ReviewError::io(path, e))?;
        let raw = std::fs::read(path).map_err(|e| ReviewError::io(path, e))?;
        let torn_tail = !raw.is_empty() && !raw.ends_with(b"\n");
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let journal_err = |message: String| ReviewError::Journal {
                path: path.to_owned(),
                line: i + 1,
                message,
            };
            let record: CorrectionRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(_) if torn_tail && i + 1 == lines.len() => break,
                Err(e) => return Err(journal_err(e.to_string())),
            };
            self.check_tags(record.example_id, &record.tags)
                .map_err(|e| journal_err(e.to_string()))?;
            self.revision = self.revision.max(record.revision);
            self.latest.insert(record.example_id, record);
        }
        if torn_tail {
            // drop the partial line so later appends start on a fresh line
            let keep = raw.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| ReviewError::io(path, e))?;
            f.set_len(keep as u64).map_err(|e| ReviewError::io(path, e))?;
        }
        Ok(())
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|j| j.path.as_path())
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    fn in_queue(&self, id: usize) -> bool {
        self.queue.iter().any(|e| e.example_id == id)
    }

    fn status(&self, id: usize) -> ReviewStatus {
        if self.latest.contains_key(&id) {
            ReviewStatus::Reviewed
        } else {
            ReviewStatus::Pending
        }
    }

    pub fn queue(&self) -> Vec<QueueItem> {
        self.queue
            .iter()
            .map(|e| QueueItem {
                example_id: e.example_id,
                score: e.score,
                status: self.status(e.example_id),
            })
            .collect()
    }

    pub fn example(&self, id: usize) -> Result<ExampleView, ReviewError> {
        if !self.in_queue(id) {
            return Err(ReviewError::NotFound(id));
        }
        let ex = self.corpus.example(id).ok_or(ReviewError::NotFound(id))?;
        let current_tags = match self.latest.get(&id) {
            Some(rec) => rec.tags.clone(),
            None => ex.ai_tags().cloned().collect(),
        };
        Ok(ExampleView {
            tokens: ex
                .tokens
                .iter()
                .map(|t| TokenView {
                    text: t.text.clone(),
                    ai_tag: t.ai_label.clone(),
                    confidence: t.confidence,
                })
                .collect(),
            current_tags,
            status: self.status(id),
        })
    }

    pub fn entity_types(&self) -> Vec<String> {
        self.corpus.entity_types.iter().cloned().collect()
    }

    fn check_tags(&self, id: usize, tags: &[BioTag]) -> Result<(), ReviewError> {
        if !self.in_queue(id) {
            return Err(ReviewError::NotFound(id));
        }
        let ex = self.corpus.example(id).ok_or(ReviewError::NotFound(id))?;
        if tags.len() != ex.len() {
            return Err(ReviewError::invalid(
                format!("expected {} tags, got {}", ex.len(), tags.len()),
                None,
            ));
        }
        for (i, tag) in tags.iter().enumerate() {
            if let Some(t) = tag.entity_type() {
                if !self.corpus.entity_types.contains(t) {
                    return Err(ReviewError::invalid(
                        format!("tag {i}: unknown entity type `{t}`"),
                        Some(i),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses, validates and journals a submission. Returns the new revision.
    pub fn submit(
        &mut self,
        id: usize,
        tags: &[String],
        annotator: &str,
        now: DateTime<Utc>,
    ) -> Result<u64, ReviewError> {
        if !self.in_queue(id) {
            return Err(ReviewError::NotFound(id));
        }
        let parsed = tags
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<BioTag>()
                    .map_err(|e| ReviewError::invalid(format!("tag {i}: {e}"), Some(i)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.check_tags(id, &parsed)?;
        let record = CorrectionRecord {
            revision: self.revision + 1,
            example_id: id,
            tags: parsed,
            annotator: annotator.to_owned(),
            submitted_at: now,
        };
        if let Some(journal) = &mut self.journal {
            journal.append(&record)?;
        }
        self.revision = record.revision;
        self.latest.insert(id, record);
        Ok(self.revision)
    }

    pub fn progress(&self) -> Progress {
        let reviewed = self
            .queue
            .iter()
            .filter(|e| self.latest.contains_key(&e.example_id))
            .count();
        Progress {
            reviewed,
            pending: self.queue.len() - reviewed,
        }
    }

    /// The source corpus with the latest correction of each reviewed example
    /// in the AI column (confidence 1.0).
    pub fn mixed_corpus(&self) -> Corpus {
        let mut out = self.corpus.clone();
        for ex in &mut out.examples {
            if let Some(rec) = self.latest.get(&ex.id) {
                for (tok, tag) in ex.tokens.iter_mut().zip(&rec.tags) {
                    tok.ai_label = tag.clone();
                    tok.confidence = 1.0;
                }
            }
        }
        out
    }

    pub fn export_text(&self) -> Result<String, ReviewError> {
        Ok(write_corpus(&self.mixed_corpus(), LabelSource::MixedExport)?)
    }

    /// Writes the mixed corpus to `path` through a temporary sibling file.
    pub fn export_to(&self, path: &Path) -> Result<ExportSummary, ReviewError> {
        let text = self.export_text()?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| ReviewError::io(path, e))?;
        let p = self.progress();
        Ok(ExportSummary {
            path: path.to_owned(),
            reviewed: p.reviewed,
            pending: p.pending,
        })
    }
}

/// Reads every complete record of a correction journal. A torn final line is
/// skipped.
pub fn read_journal(path: &Path) -> Result<Vec<CorrectionRecord>, ReviewError> {
    let raw = std::fs::read_to_string(path).map_err(|e| ReviewError::io(path, e))?;
    let torn_tail = !raw.is_empty() && !raw.ends_with('\n');
    let lines: Vec<&str> = raw.lines().collect();
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if torn_tail && i + 1 == lines.len() => break,
            Err(e) => {
                return Err(ReviewError::Journal {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

/// Applies journaled corrections for the examples in `ids`, latest revision
/// per example winning. Corrected tokens get confidence 1.0.
pub fn apply_corrections(
    corpus: &Corpus,
    records: &[CorrectionRecord],
    ids: &[usize],
) -> Result<Corpus, ReviewError> {
    let wanted: std::collections::HashSet<usize> = ids.iter().copied().collect();
    let mut latest: HashMap<usize, &CorrectionRecord> = HashMap::new();
    for rec in records.iter().filter(|r| wanted.contains(&r.example_id)) {
        let keep = latest
            .get(&rec.example_id)
            .is_none_or(|prev| prev.revision <= rec.revision);
        if keep {
            latest.insert(rec.example_id, rec);
        }
    }
    let mut out = corpus.clone();
    for (id, rec) in latest {
        let pos = out.position(id).ok_or(ReviewError::NotFound(id))?;
        let ex = &mut out.examples[pos];
        if rec.tags.len() != ex.len() {
            return Err(ReviewError::invalid(
                format!(
                    "correction for example {id} has {} tags, example has {}",
                    rec.tags.len(),
                    ex.len()
                ),
                None,
            ));
        }
        for (tok, tag) in ex.tokens.iter_mut().zip(&rec.tags) {
            tok.ai_label = tag.clone();
            tok.confidence = 1.0;
        }
    }
    out.collect_entity_types();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use crate::ranking::confidence_rank;

    const TEXT: &str = "a 0.9 B-X B-X\nb 0.3 O I-X\n\nc 0.2 B-Y O\n\nd 0.5 O O\ne 0.6 B-X B-Y\n";

    fn session(budget: f64) -> ReviewSession {
        let c = parse_corpus(TEXT, true).unwrap();
        let r = confidence_rank(&c);
        ReviewSession::in_memory(c, &r, budget).unwrap()
    }

    fn tags(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn fresh_queue_is_pending_prefix() {
        let s = session(1.0);
        let q = s.queue();
        assert_eq!(q.iter().map(|i| i.example_id).collect::<Vec<_>>(), [1, 2, 0]);
        assert!(q.iter().all(|i| i.status == ReviewStatus::Pending));
        assert!(session(0.0).queue().is_empty());
        assert_eq!(session(0.5).queue().len(), 2);
    }

    #[test]
    fn submission_updates_status_and_view() {
        let mut s = session(1.0);
        assert_eq!(s.example(2).unwrap().current_tags, [BioTag::O, BioTag::B("X".into())]);
        assert_eq!(s.submit(2, &tags("O B-Y"), "ann", Utc::now()).unwrap(), 1);
        let q = s.queue();
        assert_eq!(q.iter().map(|i| i.example_id).collect::<Vec<_>>(), [1, 2, 0]);
        assert_eq!(q[1].status, ReviewStatus::Reviewed);
        assert_eq!(s.example(2).unwrap().current_tags[1], BioTag::B("Y".into()));
        assert_eq!(s.submit(2, &tags("O B-X"), "ann", Utc::now()).unwrap(), 2);
        assert_eq!(s.example(2).unwrap().current_tags[1], BioTag::B("X".into()));
        assert_eq!(s.progress(), Progress { reviewed: 1, pending: 2 });
    }

    #[test]
    fn invalid_submissions_are_rejected() {
        let mut s = session(0.5);
        assert!(matches!(
            s.submit(2, &tags("O"), "ann", Utc::now()),
            Err(ReviewError::Validation { token: None, .. })
        ));
        assert!(matches!(
            s.submit(2, &tags("O B-"), "ann", Utc::now()),
            Err(ReviewError::Validation { token: Some(1), .. })
        ));
        assert!(matches!(
            s.submit(2, &tags("B-Z O"), "ann", Utc::now()),
            Err(ReviewError::Validation { token: Some(0), .. })
        ));
        assert!(matches!(s.submit(0, &tags("O O"), "ann", Utc::now()), Err(ReviewError::NotFound(0))));
        assert!(matches!(s.example(0), Err(ReviewError::NotFound(0))));
        assert_eq!(s.revision(), 0);
        assert_eq!(s.progress().reviewed, 0);
    }

    #[test]
    fn export_without_corrections_is_input() {
        assert_eq!(session(1.0).export_text().unwrap(), TEXT);
    }

    #[test]
    fn journal_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let jpath = dir.path().join("journal.jsonl");
        let c = parse_corpus(TEXT, true).unwrap();
        let r = confidence_rank(&c);
        {
            let mut s = ReviewSession::open(c.clone(), &r, 1.0, &jpath).unwrap();
            s.submit(1, &tags("B-Y"), "ann", Utc::now()).unwrap();
            s.submit(2, &tags("O O"), "ann", Utc::now()).unwrap();
            s.submit(1, &tags("O"), "ann", Utc::now()).unwrap();
        }
        let mut restored = ReviewSession::open(c.clone(), &r, 1.0, &jpath).unwrap();
        assert_eq!(restored.revision(), 3);
        assert_eq!(restored.example(1).unwrap().current_tags, [BioTag::O]);
        assert_eq!(restored.progress(), Progress { reviewed: 2, pending: 1 });
        assert_eq!(restored.submit(0, &tags("B-X O"), "ann", Utc::now()).unwrap(), 4);

        // an interrupted append leaves a partial last line
        let mut f = OpenOptions::new().append(true).open(&jpath).unwrap();
        f.write_all(b"{\"revision\":5,\"exa").unwrap();
        drop(f);
        let mut again = ReviewSession::open(c, &r, 1.0, &jpath).unwrap();
        assert_eq!(again.revision(), 4);
        assert_eq!(again.submit(2, &tags("B-X O"), "ann", Utc::now()).unwrap(), 5);
        let lines = std::fs::read_to_string(&jpath).unwrap();
        assert_eq!(lines.lines().count(), 5);

        let records = read_journal(&jpath).unwrap();
        assert_eq!(records.len(), 5);
        let c = parse_corpus(TEXT, true).unwrap();
        let applied = apply_corrections(&c, &records, &[0, 1, 2]).unwrap();
        assert_eq!(applied, again.mixed_corpus());
        let partial = apply_corrections(&c, &records, &[1, 2]).unwrap();
        assert_eq!(partial.examples[0], c.examples[0]);
        assert_eq!(partial.examples[1], applied.examples[1]);
    }

    #[test]
    fn corrupt_journal_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let jpath = dir.path().join("journal.jsonl");
        std::fs::write(&jpath, "not json\n").unwrap();
        let c = parse_corpus(TEXT, true).unwrap();
        let r = confidence_rank(&c);
        assert!(matches!(
            ReviewSession::open(c, &r, 1.0, &jpath),
            Err(ReviewError::Journal { line: 1, .. })
        ));
    }
}
