//! Text-free token labels that can be re-evaluated after the source notes
//! are deleted.
//!
//! A detached corpus keeps, per document, the token offsets and one label
//! list per annotator, plus a fingerprint of the tokenizer, scenario and
//! label map that produced them. On disk it is JSONL, one object per
//! document.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::evaluate::{count_labels, EvalResult, Evaluator};
use crate::harmonize::{Category, ScenarioConfig};
use crate::tokenize::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetachedDocument {
    pub doc_id: String,
    pub offsets: Vec<(usize, usize)>,
    pub labels: BTreeMap<String, Vec<Option<Category>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetachedCorpus {
    pub tokenizer: Tokenizer,
    pub scenario: ScenarioConfig,
    pub fingerprint: String,
    pub documents: Vec<DetachedDocument>,
}

/// One JSONL line.
#[derive(Serialize, Deserialize)]
struct Record {
    doc_id: String,
    offsets: Vec<(usize, usize)>,
    labels: BTreeMap<String, Vec<Option<Category>>>,
    fingerprint: String,
    tokenizer: Tokenizer,
    scenario: ScenarioConfig,
}

impl Evaluator {
    pub fn detach(&self, corpus: &Corpus, annotators: &[&str]) -> Result<DetachedCorpus> {
        let labeled = self.label_corpus(corpus, annotators)?;
        let documents = labeled
            .into_iter()
            .zip(corpus.documents.keys())
            .map(|((tokens, labelings), doc_id)| DetachedDocument {
                doc_id: doc_id.clone(),
                offsets: tokens.iter().map(|t| (t.start, t.stop)).collect(),
                labels: annotators
                    .iter()
                    .zip(labelings)
                    .map(|(a, l)| (a.to_string(), l.labels))
                    .collect(),
            })
            .collect();
        Ok(DetachedCorpus {
            tokenizer: self.tokenizer,
            scenario: self.scenario,
            fingerprint: self.fingerprint(),
            documents,
        })
    }
}

/// Detaches with the builtin label map.
pub fn detach_corpus(
    corpus: &Corpus,
    annotators: &[&str],
    cfg: &ScenarioConfig,
    tokenizer: Tokenizer,
) -> Result<DetachedCorpus> {
    Evaluator::new(*cfg, tokenizer).detach(corpus, annotators)
}

impl DetachedCorpus {
    pub fn annotators(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .documents
            .iter()
            .flat_map(|d| d.labels.keys().map(String::as_str))
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    /// Fails unless this corpus was produced under `evaluator`'s
    /// configuration.
    pub fn check_fingerprint(&self, evaluator: &Evaluator) -> Result<()> {
        let expected = evaluator.fingerprint();
        if self.fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected,
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for doc in &self.documents {
            let record = Record {
                doc_id: doc.doc_id.clone(),
                offsets: doc.offsets.clone(),
                labels: doc.labels.clone(),
                fingerprint: self.fingerprint.clone(),
                tokenizer: self.tokenizer,
                scenario: self.scenario,
            };
            serde_json::to_writer(&mut w, &record)
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a detached corpus; every line must carry the same
    /// fingerprint and configuration.
    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out: Option<DetachedCorpus> = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ctx = format!("{}:{}", path.display(), n + 1);
            let record: Record = serde_json::from_str(&line).map_err(|e| Error::parse(&ctx, e))?;
            let corpus = out.get_or_insert_with(|| DetachedCorpus {
                tokenizer: record.tokenizer,
                scenario: record.scenario,
                fingerprint: record.fingerprint.clone(),
                documents: Vec::new(),
            });
            if record.fingerprint != corpus.fingerprint
                || record.tokenizer != corpus.tokenizer
                || record.scenario != corpus.scenario
            {
                return Err(Error::FingerprintMismatch {
                    expected: corpus.fingerprint.clone(),
                    found: record.fingerprint,
                });
            }
            corpus.documents.push(DetachedDocument {
                doc_id: record.doc_id,
                offsets: record.offsets,
                labels: record.labels,
            });
        }
        let mut corpus = out.unwrap_or(DetachedCorpus {
            tokenizer: Tokenizer::default(),
            scenario: ScenarioConfig::binary(),
            fingerprint: String::new(),
            documents: Vec::new(),
        });
        corpus.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if corpus
            .documents
            .windows(2)
            .any(|w| w[0].doc_id == w[1].doc_id)
        {
            return Err(Error::Invalid(format!(
                "{}: duplicate doc_id",
                path.display()
            )));
        }
        Ok(corpus)
    }
}

/// Scores two label sets of a detached corpus; equal to evaluating the
/// originating corpus under the same configuration.
pub fn evaluate_detached(d: &DetachedCorpus, gold: &str, pred: &str) -> Result<EvalResult> {
    if d.documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mode = d.scenario.mode;
    let mut documents = BTreeMap::new();
    for doc in &d.documents {
        let get = |who: &str| {
            doc.labels
                .get(who)
                .ok_or_else(|| Error::MissingAnnotator(who.to_string()))
        };
        let (g, p) = (get(gold)?, get(pred)?);
        if g.len() != doc.offsets.len() || p.len() != doc.offsets.len() {
            return Err(Error::TokenMismatch(doc.doc_id.clone()));
        }
        documents.insert(doc.doc_id.clone(), count_labels(g, p, mode));
    }
    Ok(EvalResult::from_documents(mode, documents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Annotation, Document, GOLD};
    use crate::harmonize::ScenarioConfig;

    fn corpus() -> Corpus {
        let mut c = Corpus::new();
        c.add_document(Document::new("d1", "Seen by Kowalczyk on 2067-05-03 today"))
            .unwrap();
        let ann = |start, stop, lit: &str, label: &str| Annotation {
            doc_id: "d1".into(),
            start,
            stop,
            literal: lit.into(),
            raw_label: label.into(),
            category: None,
            annotator: String::new(),
        };
        c.set_annotations(
            GOLD,
            vec![
                ann(8, 17, "Kowalczyk", "doctor"),
                ann(21, 31, "2067-05-03", "date"),
            ],
        );
        c.set_annotations("pred", vec![ann(21, 25, "2067", "date")]);
        c
    }

    #[test]
    fn structure_and_equivalence() {
        let c = corpus();
        let ev = Evaluator::new(ScenarioConfig::multiclass(), Tokenizer::Whitespace);
        let d = ev.detach(&c, &[GOLD, "pred"]).unwrap();
        assert_eq!(d.documents.len(), 1);
        assert_eq!(d.documents[0].offsets.len(), 6);
        assert!(d.documents[0].labels.values().all(|l| l.len() == 6));
        assert_eq!(
            evaluate_detached(&d, GOLD, "pred").unwrap(),
            ev.evaluate_corpus(&c, GOLD, "pred").unwrap()
        );
        let perfect = evaluate_detached(&d, GOLD, GOLD).unwrap();
        assert_eq!(perfect.micro.f1, 1.0);
    }

    #[test]
    fn jsonl_round_trip_has_no_text() {
        let c = corpus();
        let ev = Evaluator::new(ScenarioConfig::binary(), Tokenizer::WordPunct);
        let d = ev.detach(&c, &[GOLD, "pred"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detached.jsonl");
        d.write_jsonl(&path).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(!raw.contains("Kowalczyk") && !raw.contains("Seen") && !raw.contains("today"));
        assert_eq!(DetachedCorpus::read_jsonl(&path).unwrap(), d);
        d.check_fingerprint(&ev).unwrap();
        let other = Evaluator::new(ScenarioConfig::binary(), Tokenizer::Whitespace);
        assert!(matches!(
            d.check_fingerprint(&other),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn mixed_fingerprints_are_rejected() {
        let c = corpus();
        let a = Evaluator::new(ScenarioConfig::binary(), Tokenizer::WordPunct)
            .detach(&c, &[GOLD])
            .unwrap();
        let b = Evaluator::new(ScenarioConfig::binary(), Tokenizer::Whitespace)
            .detach(&c, &[GOLD])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a"), dir.path().join("b"));
        a.write_jsonl(&pa).unwrap();
        b.write_jsonl(&pb).unwrap();
        let mut joined = std::fs::read_to_string(&pa).unwrap();
        joined.push_str(&std::fs::read_to_string(&pb).unwrap().replace("d1", "d2"));
        std::fs::write(&pa, joined).unwrap();
        assert!(matches!(
            DetachedCorpus::read_jsonl(&pa),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn empty_corpus_detaches_to_nothing() {
        let mut c = Corpus::new();
        c.set_annotations(GOLD, vec![]);
        let d =
            detach_corpus(&c, &[GOLD], &ScenarioConfig::binary(), Tokenizer::WordPunct).unwrap();
        assert!(d.documents.is_empty());
        assert!(detach_corpus(
            &c,
            &["nope"],
            &ScenarioConfig::binary(),
            Tokenizer::WordPunct
        )
        .is_err());
    }
}
