//! Combining annotation sets from several annotators.
//!
//! Merging works on character coverage rather than tokens, since
//! annotators rarely agree on tokenization. Each strategy is a coverage
//! threshold: a character is kept when at least `t` annotators cover it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Annotation, Corpus};
use crate::error::{Error, Result};
use crate::harmonize::Category;
use crate::text::CharIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeStrategy {
    /// Characters covered by any annotator.
    UnionRecallMax,
    /// Characters covered by every annotator.
    Intersection,
    /// Characters covered by at least `k` annotators.
    Majority(usize),
}

impl MergeStrategy {
    /// Minimum number of covering annotators out of `n`.
    pub fn threshold(self, n: usize) -> Result<usize> {
        match self {
            MergeStrategy::UnionRecallMax => Ok(1),
            MergeStrategy::Intersection => Ok(n),
            MergeStrategy::Majority(0) => Err(Error::Usage("majority k must be at least 1".into())),
            MergeStrategy::Majority(k) if k > n => Err(Error::Usage(format!(
                "majority k={k} exceeds the {n} annotators being merged"
            ))),
            MergeStrategy::Majority(k) => Ok(k),
        }
    }
}

impl fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeStrategy::UnionRecallMax => f.write_str("union"),
            MergeStrategy::Intersection => f.write_str("intersection"),
            MergeStrategy::Majority(k) => write!(f, "majority:{k}"),
        }
    }
}

impl FromStr for MergeStrategy {
    type Err = Error;

    /// Accepts `union`, `intersection` and `majority:K`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "union" | "union_recall_max" => return Ok(MergeStrategy::UnionRecallMax),
            "intersection" => return Ok(MergeStrategy::Intersection),
            _ => {}
        }
        let k = lower
            .strip_prefix("majority:")
            .or_else(|| lower.strip_prefix("majority="))
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown merge strategy {s:?} (expected union, intersection or majority:K)"
                ))
            })?;
        if k == 0 {
            return Err(Error::Usage("majority k must be at least 1".into()));
        }
        Ok(MergeStrategy::Majority(k))
    }
}

/// Sorted, disjoint union of half-open intervals. Touching intervals are
/// joined.
pub(crate) fn union_intervals(mut spans: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    spans.retain(|(s, e)| s < e);
    spans.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn intersection_len(a: &[(usize, usize)], lo: usize, hi: usize) -> usize {
    a.iter()
        .map(|&(s, e)| e.min(hi).saturating_sub(s.max(lo)))
        .sum()
}

/// Category covering the most characters of `[lo, hi)`, ties broken by
/// category order. `None` when no categorized annotation touches it.
pub(crate) fn plurality_category(
    by_category: &[(Category, Vec<(usize, usize)>)],
    lo: usize,
    hi: usize,
) -> Option<Category> {
    let mut best: Option<(usize, Category)> = None;
    for (category, spans) in by_category {
        let n = intersection_len(spans, lo, hi);
        if n == 0 {
            continue;
        }
        if best.is_none_or(|(m, c)| n > m || (n == m && *category < c)) {
            best = Some((n, *category));
        }
    }
    best.map(|(_, c)| c)
}

/// Per-category coverage of a set of annotations.
pub(crate) fn category_coverage<'a, I>(annotations: I) -> Vec<(Category, Vec<(usize, usize)>)>
where
    I: IntoIterator<Item = &'a Annotation>,
{
    let mut spans: Vec<Vec<(usize, usize)>> = vec![Vec::new(); Category::ALL.len()];
    for ann in annotations {
        if let Some(c) = ann.category {
            spans[c.index()].push((ann.start, ann.stop));
        }
    }
    Category::ALL
        .into_iter()
        .zip(spans)
        .filter(|(_, s)| !s.is_empty())
        .map(|(c, s)| (c, union_intervals(s)))
        .collect()
}

/// Maximal intervals covered by at least `threshold` of the given
/// coverage sets. Each set must already be disjoint.
fn covered_at_least(sets: &[Vec<(usize, usize)>], threshold: usize) -> Vec<(usize, usize)> {
    let mut events: Vec<(usize, i64)> = Vec::new();
    for set in sets {
        for &(s, e) in set {
            events.push((s, 1));
            events.push((e, -1));
        }
    }
    events.sort_unstable();
    let mut out = Vec::new();
    let mut depth = 0i64;
    let mut open: Option<usize> = None;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        while i < events.len() && events[i].0 == pos {
            depth += events[i].1;
            i += 1;
        }
        let inside = depth >= threshold as i64;
        match (open, inside) {
            (None, true) => open = Some(pos),
            (Some(s), false) => {
                out.push((s, pos));
                open = None;
            }
            _ => {}
        }
    }
    union_intervals(out)
}

/// Merges one document's annotation sets.
pub fn merge_document(
    text: &str,
    doc_id: &str,
    sets: &[&[Annotation]],
    threshold: usize,
    out_annotator: &str,
) -> Result<Vec<Annotation>> {
    for ann in sets.iter().flat_map(|s| s.iter()) {
        if ann.category.is_none() {
            return Err(Error::MissingCategory {
                doc_id: ann.doc_id.clone(),
                start: ann.start,
                stop: ann.stop,
                raw_label: ann.raw_label.clone(),
            });
        }
    }
    let index = CharIndex::new(text);
    let coverage: Vec<Vec<(usize, usize)>> = sets
        .iter()
        .map(|s| union_intervals(s.iter().map(|a| (a.start, a.stop)).collect()))
        .collect();
    let by_category = category_coverage(sets.iter().flat_map(|s| s.iter()));
    covered_at_least(&coverage, threshold)
        .into_iter()
        .map(|(start, stop)| {
            let literal = index.slice(start, stop).ok_or_else(|| Error::OutOfRange {
                doc_id: doc_id.to_string(),
                start,
                stop,
                len: index.len(),
            })?;
            let category = plurality_category(&by_category, start, stop)
                .expect("merged interval lies inside categorized annotations");
            Ok(Annotation {
                doc_id: doc_id.to_string(),
                start,
                stop,
                literal: literal.to_string(),
                raw_label: category.as_str().to_string(),
                category: Some(category),
                annotator: out_annotator.to_string(),
            })
        })
        .collect()
}

/// Returns a copy of `corpus` with the merged set added as
/// `out_annotator`.
pub fn merge_annotations(
    corpus: &Corpus,
    annotators: &[&str],
    strategy: MergeStrategy,
    out_annotator: &str,
) -> Result<Corpus> {
    if annotators.len() < 2 {
        return Err(Error::Usage(format!(
            "merging needs at least 2 annotators, got {}",
            annotators.len()
        )));
    }
    if out_annotator.is_empty() {
        return Err(Error::Usage("output annotator name is empty".into()));
    }
    let threshold = strategy.threshold(annotators.len())?;
    let grouped = annotators
        .iter()
        .map(|a| corpus.annotations_by_document(a))
        .collect::<Result<Vec<_>>>()?;
    if corpus.annotation_sets.contains_key(out_annotator) {
        return Err(Error::DuplicateAnnotator(out_annotator.to_string()));
    }
    let merged: Vec<Vec<Annotation>> = corpus
        .documents
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|doc| {
            let sets: Vec<&[Annotation]> = grouped
                .iter()
                .map(|g| g.get(doc.doc_id.as_str()).copied().unwrap_or(&[]))
                .collect();
            merge_document(&doc.text, &doc.doc_id, &sets, threshold, out_annotator)
        })
        .collect::<Result<_>>()?;
    let mut out = corpus.clone();
    out.set_annotations(out_annotator, merged.into_iter().flatten().collect());
    Ok(out)
}
