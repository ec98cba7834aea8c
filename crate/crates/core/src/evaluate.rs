//! Token-level comparison of predicted annotations against gold.
//!
//! Evaluation runs in three steps: tokenize each document, label every
//! token from the (harmonized, scenario-filtered) annotations, then count
//! per-class true positives, false positives and false negatives. Counts
//! are pooled over documents before any metric is computed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::corpus::{Annotation, Corpus, Document};
use crate::error::{Error, Result};
use crate::harmonize::{
    apply_scenario_derived, builtin_label_map, Category, EvalMode, LabelMap, ScenarioConfig,
};
use crate::tokenize::{Token, Tokenizer};

/// A scored class: the collapsed PHI class or one canonical category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalClass {
    Phi,
    Category(Category),
}

impl EvalClass {
    pub fn classes(mode: EvalMode) -> Vec<EvalClass> {
        match mode {
            EvalMode::Binary | EvalMode::PerEntity(_) => vec![EvalClass::Phi],
            EvalMode::Multiclass => Category::ALL.into_iter().map(EvalClass::Category).collect(),
        }
    }
}

impl fmt::Display for EvalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalClass::Phi => f.write_str("phi"),
            EvalClass::Category(c) => f.write_str(c.as_str()),
        }
    }
}

impl FromStr for EvalClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "phi" {
            Ok(EvalClass::Phi)
        } else {
            s.parse().map(EvalClass::Category)
        }
    }
}

impl Serialize for EvalClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EvalClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-token category labels for one document. Labels keep the winning
/// category; `mode` decides how they are scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLabeling {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub labels: Vec<Option<Category>>,
    pub mode: EvalMode,
}

/// How a token takes part in scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scored {
    Outside,
    Class(EvalClass),
    Excluded,
}

fn score_gold(label: Option<Category>, mode: EvalMode) -> Scored {
    match (label, mode) {
        (None, _) => Scored::Outside,
        (Some(_), EvalMode::Binary) => Scored::Class(EvalClass::Phi),
        (Some(c), EvalMode::Multiclass) => Scored::Class(EvalClass::Category(c)),
        (Some(c), EvalMode::PerEntity(target)) if c == target => Scored::Class(EvalClass::Phi),
        (Some(_), EvalMode::PerEntity(_)) => Scored::Excluded,
    }
}

fn score_pred(label: Option<Category>, mode: EvalMode) -> Scored {
    match (label, mode) {
        (None, _) => Scored::Outside,
        (Some(c), EvalMode::Multiclass) => Scored::Class(EvalClass::Category(c)),
        (Some(_), _) => Scored::Class(EvalClass::Phi),
    }
}

/// Labels tokens from annotations. A token takes the category of any
/// annotation overlapping it by at least one code point; competing
/// categories are resolved by largest overlap, then earliest annotation
/// start, then category order.
pub fn label_tokens(
    doc_id: &str,
    tokens: &[Token],
    annotations: &[Annotation],
    mode: EvalMode,
) -> Result<TokenLabeling> {
    // (overlap, annotation start, category) of the current winner
    let mut best: Vec<Option<(usize, usize, Category)>> = vec![None; tokens.len()];
    for ann in annotations {
        let category = ann.category.ok_or_else(|| Error::MissingCategory {
            doc_id: ann.doc_id.clone(),
            start: ann.start,
            stop: ann.stop,
            raw_label: ann.raw_label.clone(),
        })?;
        let first = tokens.partition_point(|t| t.stop <= ann.start);
        for (i, token) in tokens.iter().enumerate().skip(first) {
            if token.start >= ann.stop {
                break;
            }
            let overlap = token.stop.min(ann.stop) - token.start.max(ann.start);
            let better = match best[i] {
                None => true,
                Some((o, s, c)) => {
                    overlap > o
                        || (overlap == o && (ann.start < s || (ann.start == s && category < c)))
                }
            };
            if better {
                best[i] = Some((overlap, ann.start, category));
            }
        }
    }
    Ok(TokenLabeling {
        doc_id: doc_id.to_string(),
        tokens: tokens.to_vec(),
        labels: best.into_iter().map(|b| b.map(|(_, _, c)| c)).collect(),
        mode,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    fn add(&mut self, other: &ClassCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: BTreeMap<EvalClass, ClassCounts>,
    pub total_tokens: u64,
    pub total_documents: u64,
}

impl ConfusionCounts {
    pub fn empty(mode: EvalMode) -> Self {
        Self {
            per_class: EvalClass::classes(mode)
                .into_iter()
                .map(|c| (c, ClassCounts::default()))
                .collect(),
            total_tokens: 0,
            total_documents: 0,
        }
    }

    /// Adds `other` into `self`. Associative and commutative.
    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (class, counts) in &other.per_class {
            self.per_class.entry(*class).or_default().add(counts);
        }
        self.total_tokens += other.total_tokens;
        self.total_documents += other.total_documents;
    }

    pub fn pooled(&self) -> ClassCounts {
        let mut total = ClassCounts::default();
        for counts in self.per_class.values() {
            total.add(counts);
        }
        total
    }

    pub fn total_fn(&self) -> u64 {
        self.per_class.values().map(|c| c.fn_).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fn_per_1000: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Zero denominators give 0.
    pub fn from_counts(counts: &ClassCounts, total_tokens: u64) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let fn_per_1000 = if total_tokens == 0 {
            0.0
        } else {
            1000.0 * counts.fn_ as f64 / total_tokens as f64
        };
        Self {
            precision,
            recall,
            f1,
            fn_per_1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub counts: ConfusionCounts,
    pub per_class: BTreeMap<EvalClass, Metrics>,
    /// Metrics over counts pooled across classes.
    pub micro: Metrics,
    pub documents: BTreeMap<String, ConfusionCounts>,
}

impl EvalResult {
    pub fn from_documents(mode: EvalMode, documents: BTreeMap<String, ConfusionCounts>) -> Self {
        let mut counts = ConfusionCounts::empty(mode);
        for doc in documents.values() {
            counts.merge(doc);
        }
        let per_class = counts
            .per_class
            .iter()
            .map(|(class, c)| (*class, Metrics::from_counts(c, counts.total_tokens)))
            .collect();
        let micro = Metrics::from_counts(&counts.pooled(), counts.total_tokens);
        Self {
            counts,
            per_class,
            micro,
            documents,
        }
    }

    pub fn micro_f1(&self) -> f64 {
        self.micro.f1
    }
}

/// Counts for one document's pair of labelings.
pub fn count_pair(gold: &TokenLabeling, pred: &TokenLabeling) -> Result<ConfusionCounts> {
    if gold.doc_id != pred.doc_id || gold.tokens != pred.tokens {
        return Err(Error::TokenMismatch(gold.doc_id.clone()));
    }
    if gold.mode != pred.mode
        || gold.labels.len() != gold.tokens.len()
        || pred.labels.len() != pred.tokens.len()
    {
        return Err(Error::TokenMismatch(gold.doc_id.clone()));
    }
    Ok(count_labels(&gold.labels, &pred.labels, gold.mode))
}

pub(crate) fn count_labels(
    gold: &[Option<Category>],
    pred: &[Option<Category>],
    mode: EvalMode,
) -> ConfusionCounts {
    let mut counts = ConfusionCounts::empty(mode);
    counts.total_tokens = gold.len() as u64;
    counts.total_documents = 1;
    for (g, p) in gold.iter().zip(pred) {
        let g = score_gold(*g, mode);
        if g == Scored::Excluded {
            continue;
        }
        let p = score_pred(*p, mode);
        if g == p {
            if let Scored::Class(class) = g {
                counts.per_class.entry(class).or_default().tp += 1;
            }
            continue;
        }
        if let Scored::Class(class) = g {
            counts.per_class.entry(class).or_default().fn_ += 1;
        }
        if let Scored::Class(class) = p {
            counts.per_class.entry(class).or_default().fp += 1;
        }
    }
    counts
}

/// Scores one document.
pub fn evaluate_pair(gold: &TokenLabeling, pred: &TokenLabeling) -> Result<EvalResult> {
    let counts = count_pair(gold, pred)?;
    let mut docs = BTreeMap::new();
    docs.insert(gold.doc_id.clone(), counts);
    Ok(EvalResult::from_documents(gold.mode, docs))
}

/// Tokenizer, scenario and label map used for an evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub scenario: ScenarioConfig,
    pub tokenizer: Tokenizer,
    pub label_map: LabelMap,
    /// Worker threads for per-document work; results do not depend on it.
    pub jobs: usize,
}

impl Evaluator {
    pub fn new(scenario: ScenarioConfig, tokenizer: Tokenizer) -> Self {
        Self {
            scenario,
            tokenizer,
            label_map: builtin_label_map(),
            jobs: 1,
        }
    }

    pub fn with_label_map(mut self, label_map: LabelMap) -> Self {
        self.label_map = label_map;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    /// Content hash of the tokenizer, the scenario and the label map.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "tokenizer": self.tokenizer.name(),
            "scenario": self.scenario,
            "label_map": self.label_map,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(digest)
    }

    /// Harmonizes labels and applies the scenario filter.
    pub fn prepare(&self, annotations: &[Annotation]) -> Result<Vec<Annotation>> {
        let harmonized = self.label_map.harmonize(annotations)?;
        apply_scenario_derived(&harmonized, &self.scenario)
    }

    pub fn label_document(
        &self,
        doc: &Document,
        tokens: &[Token],
        annotations: &[Annotation],
    ) -> Result<TokenLabeling> {
        let prepared = self.prepare(annotations)?;
        label_tokens(&doc.doc_id, tokens, &prepared, self.scenario.mode)
    }

    pub(crate) fn run<T, F>(&self, work: F) -> T
    where
        T: Send,
        F: FnOnce() -> T + Send,
    {
        if self.jobs <= 1 {
            return work();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
        {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        }
    }

    /// Tokens plus one labeling per requested annotator, for every
    /// document in doc_id order.
    pub fn label_corpus(
        &self,
        corpus: &Corpus,
        annotators: &[&str],
    ) -> Result<Vec<(Vec<Token>, Vec<TokenLabeling>)>> {
        let grouped: Vec<BTreeMap<&str, &[Annotation]>> = annotators
            .iter()
            .map(|a| corpus.annotations_by_document(a))
            .collect::<Result<_>>()?;
        let docs: Vec<&Document> = corpus.documents.values().collect();
        let parallel = self.jobs > 1;
        let label_one = |doc: &&Document| -> Result<(Vec<Token>, Vec<TokenLabeling>)> {
            let tokens = self.tokenizer.tokenize(&doc.text);
            let labelings = grouped
                .iter()
                .map(|by_doc| {
                    let anns = by_doc.get(doc.doc_id.as_str()).copied().unwrap_or(&[]);
                    self.label_document(doc, &tokens, anns)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((tokens, labelings))
        };
        self.run(|| {
            if parallel {
                docs.par_iter().map(label_one).collect()
            } else {
                docs.iter().map(label_one).collect()
            }
        })
    }

    pub fn evaluate_corpus(&self, corpus: &Corpus, gold: &str, pred: &str) -> Result<EvalResult> {
        corpus.annotations(gold)?;
        corpus.annotations(pred)?;
        if corpus.documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let labeled = self.label_corpus(corpus, &[gold, pred])?;
        let mut documents = BTreeMap::new();
        for (_, labelings) in &labeled {
            let counts = count_pair(&labelings[0], &labelings[1])?;
            documents.insert(labelings[0].doc_id.clone(), counts);
        }
        Ok(EvalResult::from_documents(self.scenario.mode, documents))
    }

    /// Entity-level scores pooled over documents.
    pub fn evaluate_entities_corpus(
        &self,
        corpus: &Corpus,
        gold: &str,
        pred: &str,
    ) -> Result<EntityScores> {
        let gold_by_doc = corpus.annotations_by_document(gold)?;
        let pred_by_doc = corpus.annotations_by_document(pred)?;
        let mut total = EntityScores::default();
        for doc_id in corpus.documents.keys() {
            let g = self.prepare(gold_by_doc.get(doc_id.as_str()).copied().unwrap_or(&[]))?;
            let p = self.prepare(pred_by_doc.get(doc_id.as_str()).copied().unwrap_or(&[]))?;
            total.add(&evaluate_entities(&g, &p));
        }
        total.finish();
        Ok(total)
    }
}

/// Evaluates with the builtin label map.
pub fn evaluate_corpus(
    corpus: &Corpus,
    gold: &str,
    pred: &str,
    cfg: &ScenarioConfig,
    tokenizer: Tokenizer,
) -> Result<EvalResult> {
    Evaluator::new(*cfg, tokenizer).evaluate_corpus(corpus, gold, pred)
}

/// Exact-cover entity scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityScores {
    pub gold_total: u64,
    pub gold_covered: u64,
    pub pred_total: u64,
    pub pred_correct: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EntityScores {
    fn add(&mut self, other: &EntityScores) {
        self.gold_total += other.gold_total;
        self.gold_covered += other.gold_covered;
        self.pred_total += other.pred_total;
        self.pred_correct += other.pred_correct;
    }

    fn finish(&mut self) {
        self.precision = ratio(self.pred_correct, self.pred_total);
        self.recall = ratio(self.gold_covered, self.gold_total);
        self.f1 = if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        };
    }
}

/// Entity-level scores for one document. A gold entity is found when one
/// prediction covers its whole span; a prediction is correct when it lies
/// entirely inside a gold entity it overlaps.
pub fn evaluate_entities(gold: &[Annotation], pred: &[Annotation]) -> EntityScores {
    let gold_covered = gold
        .iter()
        .filter(|g| pred.iter().any(|p| p.start <= g.start && p.stop >= g.stop))
        .count();
    let pred_correct = pred
        .iter()
        .filter(|p| {
            gold.iter().any(|g| {
                g.start < p.stop && p.start < g.stop && g.start <= p.start && p.stop <= g.stop
            })
        })
        .count();
    let mut scores = EntityScores {
        gold_total: gold.len() as u64,
        gold_covered: gold_covered as u64,
        pred_total: pred.len() as u64,
        pred_correct: pred_correct as u64,
        ..EntityScores::default()
    };
    scores.finish();
    scores
}
