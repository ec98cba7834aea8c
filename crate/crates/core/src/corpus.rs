//! In-memory data model: documents, annotations partitioned by annotator,
//! and gazetteers.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonize::Category;
use crate::text::CharIndex;

/// Annotator name used for reference annotations.
pub const GOLD: &str = "gold";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unsplit,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unsplit" => Ok(Split::Unsplit),
            other => Err(Error::parse("split", format!("unknown split {other:?}"))),
        }
    }
}

/// One clinical note. Text is stored verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source: String,
    pub split: Split,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            source: String::new(),
            split: Split::Unsplit,
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}

/// A PHI span over a document, offsets in code points, `stop` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub doc_id: String,
    pub start: usize,
    pub stop: usize,
    pub literal: String,
    pub raw_label: String,
    pub category: Option<Category>,
    pub annotator: String,
}

impl Annotation {
    pub fn len(&self) -> usize {
        self.stop - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.stop <= self.start
    }

    pub(crate) fn sort_key(&self) -> (&str, usize, usize, &str, Option<Category>) {
        (
            &self.doc_id,
            self.start,
            self.stop,
            &self.raw_label,
            self.category,
        )
    }

    /// Checks offsets and literal against the document text.
    pub fn check_against(&self, text: &CharIndex<'_>) -> Result<()> {
        if self.start >= self.stop || self.stop > text.len() {
            return Err(Error::OutOfRange {
                doc_id: self.doc_id.clone(),
                start: self.start,
                stop: self.stop,
                len: text.len(),
            });
        }
        let found = text.slice(self.start, self.stop).unwrap_or_default();
        if found != self.literal {
            return Err(Error::LiteralMismatch {
                doc_id: self.doc_id.clone(),
                start: self.start,
                stop: self.stop,
                literal: self.literal.clone(),
                found: found.to_string(),
            });
        }
        Ok(())
    }
}

pub(crate) fn sort_annotations(annotations: &mut [Annotation]) {
    annotations.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// A named dictionary of known entity strings for one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gazetteer {
    pub name: String,
    pub category: Category,
    pub entries: BTreeSet<String>,
}

impl Gazetteer {
    /// Builds a gazetteer, trimming entries and dropping blanks and
    /// case-folded duplicates (first spelling kept).
    pub fn from_entries<I, S>(name: impl Into<String>, category: Category, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut set = BTreeSet::new();
        for entry in entries {
            let entry = entry.as_ref().trim();
            if entry.is_empty() {
                continue;
            }
            if seen.insert(entry.to_lowercase()) {
                set.insert(entry.to_string());
            }
        }
        Self {
            name: name.into(),
            category,
            entries: set,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Invalid("gazetteer with empty name".into()));
        }
        if self.entries.is_empty() {
            return Err(Error::Invalid(format!(
                "gazetteer {:?} has no entries",
                self.name
            )));
        }
        let mut folded = HashSet::new();
        for entry in &self.entries {
            if entry.is_empty() || entry.trim() != entry {
                return Err(Error::Invalid(format!(
                    "gazetteer {:?}: entry {entry:?} is blank or has surrounding whitespace",
                    self.name
                )));
            }
            if !folded.insert(entry.to_lowercase()) {
                return Err(Error::Invalid(format!(
                    "gazetteer {:?}: duplicate entry {entry:?} under case-folding",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Documents, annotation sets keyed by annotator, and gazetteers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: BTreeMap<String, Document>,
    pub annotation_sets: BTreeMap<String, Vec<Annotation>>,
    pub gazetteers: Vec<Gazetteer>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a corpus from parts, sorting annotations canonically and
    /// validating every invariant.
    pub fn from_parts(
        documents: impl IntoIterator<Item = Document>,
        annotations: impl IntoIterator<Item = Annotation>,
        gazetteers: Vec<Gazetteer>,
    ) -> Result<Self> {
        let mut corpus = Corpus {
            gazetteers,
            ..Corpus::default()
        };
        for doc in documents {
            corpus.add_document(doc)?;
        }
        for ann in annotations {
            corpus
                .annotation_sets
                .entry(ann.annotator.clone())
                .or_default()
                .push(ann);
        }
        corpus.canonicalize();
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn add_document(&mut self, doc: Document) -> Result<()> {
        if doc.doc_id.is_empty() {
            return Err(Error::Invalid("document with empty doc_id".into()));
        }
        if self.documents.contains_key(&doc.doc_id) {
            return Err(Error::Invalid(format!("duplicate doc_id {:?}", doc.doc_id)));
        }
        self.documents.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.annotation_sets.keys().map(String::as_str)
    }

    pub fn annotations(&self, annotator: &str) -> Result<&[Annotation]> {
        self.annotation_sets
            .get(annotator)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingAnnotator(annotator.to_string()))
    }

    /// Annotations of one annotator grouped by document. Every document
    /// appears, possibly with an empty slice.
    pub fn annotations_by_document(
        &self,
        annotator: &str,
    ) -> Result<BTreeMap<&str, &[Annotation]>> {
        let all = self.annotations(annotator)?;
        let mut out: BTreeMap<&str, &[Annotation]> = self
            .documents
            .keys()
            .map(|k| (k.as_str(), &all[..0]))
            .collect();
        let mut i = 0;
        while i < all.len() {
            let doc_id = all[i].doc_id.as_str();
            let mut j = i;
            while j < all.len() && all[j].doc_id == doc_id {
                j += 1;
            }
            out.insert(doc_id, &all[i..j]);
            i = j;
        }
        Ok(out)
    }

    /// Replaces or adds an annotation set, sorted canonically.
    pub fn set_annotations(&mut self, annotator: &str, mut annotations: Vec<Annotation>) {
        for ann in &mut annotations {
            ann.annotator = annotator.to_string();
        }
        sort_annotations(&mut annotations);
        self.annotation_sets
            .insert(annotator.to_string(), annotations);
    }

    pub fn canonicalize(&mut self) {
        for anns in self.annotation_sets.values_mut() {
            sort_annotations(anns);
        }
    }

    /// Checks every corpus invariant without repairing anything.
    pub fn validate(&self) -> Result<()> {
        for (key, doc) in &self.documents {
            if doc.doc_id.is_empty() {
                return Err(Error::Invalid("document with empty doc_id".into()));
            }
            if key != &doc.doc_id {
                return Err(Error::Invalid(format!(
                    "document keyed {key:?} has doc_id {:?}",
                    doc.doc_id
                )));
            }
        }
        let indexes: BTreeMap<&str, CharIndex<'_>> = self
            .documents
            .iter()
            .map(|(k, d)| (k.as_str(), CharIndex::new(&d.text)))
            .collect();
        for (annotator, anns) in &self.annotation_sets {
            if annotator.is_empty() {
                return Err(Error::Invalid("annotation set with empty annotator".into()));
            }
            for pair in anns.windows(2) {
                if pair[0].sort_key() > pair[1].sort_key() {
                    return Err(Error::Invalid(format!(
                        "annotations of {annotator:?} are not sorted by (doc_id, start, stop)"
                    )));
                }
            }
            for ann in anns {
                if &ann.annotator != annotator {
                    return Err(Error::Invalid(format!(
                        "annotation in set {annotator:?} carries annotator {:?}",
                        ann.annotator
                    )));
                }
                let index = indexes
                    .get(ann.doc_id.as_str())
                    .ok_or_else(|| Error::UnknownDocument(ann.doc_id.clone()))?;
                ann.check_against(index)?;
            }
        }
        let mut names = HashSet::new();
        for gaz in &self.gazetteers {
            gaz.validate()?;
            if !names.insert(gaz.name.as_str()) {
                return Err(Error::Invalid(format!(
                    "duplicate gazetteer {:?}",
                    gaz.name
                )));
            }
        }
        Ok(())
    }
}
