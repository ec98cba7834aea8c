//! Replacing annotated spans with placeholders or masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, Document};
use crate::error::{Error, Result};
use crate::merge::{category_coverage, plurality_category, union_intervals};
use crate::text::CharIndex;

pub const MASK_CHAR: char = '█';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrubStyle {
    /// `[**CATEGORY**]` in place of each span.
    #[default]
    CategoryPlaceholder,
    /// One mask character per replaced character.
    MaskPreservingLength,
}

impl fmt::Display for ScrubStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrubStyle::CategoryPlaceholder => "placeholder",
            ScrubStyle::MaskPreservingLength => "mask",
        })
    }
}

impl FromStr for ScrubStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "placeholder" | "category_placeholder" => Ok(ScrubStyle::CategoryPlaceholder),
            "mask" | "mask_preserving_length" => Ok(ScrubStyle::MaskPreservingLength),
            other => Err(Error::Usage(format!(
                "unknown scrub style {other:?} (expected placeholder or mask)"
            ))),
        }
    }
}

/// One replacement, in code points of the original and scrubbed text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetMapping {
    pub original_start: usize,
    pub original_stop: usize,
    pub new_start: usize,
    pub new_stop: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scrubbed {
    pub text: String,
    pub offset_map: Vec<OffsetMapping>,
}

/// Scrubs one document. Overlapping or touching annotations are merged
/// first; each merged interval takes the category covering most of it.
pub fn scrub_document(
    doc: &Document,
    annotations: &[Annotation],
    style: ScrubStyle,
) -> Result<Scrubbed> {
    let index = CharIndex::new(&doc.text);
    for ann in annotations {
        if ann.doc_id != doc.doc_id {
            return Err(Error::UnknownDocument(ann.doc_id.clone()));
        }
        if ann.start >= ann.stop || ann.stop > index.len() {
            return Err(Error::OutOfRange {
                doc_id: doc.doc_id.clone(),
                start: ann.start,
                stop: ann.stop,
                len: index.len(),
            });
        }
    }
    let intervals = union_intervals(annotations.iter().map(|a| (a.start, a.stop)).collect());
    let by_category = category_coverage(annotations);

    let mut text = String::with_capacity(doc.text.len());
    let mut offset_map = Vec::with_capacity(intervals.len());
    let mut cursor = 0;
    let mut new_len = 0;
    for (start, stop) in intervals {
        let kept = index.slice(cursor, start).unwrap_or_default();
        text.push_str(kept);
        new_len += start - cursor;
        let replacement = match style {
            ScrubStyle::CategoryPlaceholder => {
                let label = plurality_category(&by_category, start, stop)
                    .map_or("PHI".to_string(), |c| c.as_str().to_uppercase());
                format!("[**{label}**]")
            }
            ScrubStyle::MaskPreservingLength => MASK_CHAR.to_string().repeat(stop - start),
        };
        let width = replacement.chars().count();
        text.push_str(&replacement);
        offset_map.push(OffsetMapping {
            original_start: start,
            original_stop: stop,
            new_start: new_len,
            new_stop: new_len + width,
        });
        new_len += width;
        cursor = stop;
    }
    text.push_str(index.slice(cursor, index.len()).unwrap_or_default());
    Ok(Scrubbed { text, offset_map })
}
