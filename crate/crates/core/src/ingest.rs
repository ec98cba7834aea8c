//! Conversion of external corpus formats and tool predictions into the
//! canonical corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{sort_annotations, Annotation, Corpus, Document};
use crate::error::{Error, Result};
use crate::text::CharIndex;

/// One row of a standoff table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffRow {
    pub doc_id: String,
    pub start: usize,
    pub stop: usize,
    pub raw_label: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub literal: Option<String>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<String>, D::Error> {
    let value = Option::<String>::deserialize(d)?;
    Ok(value.filter(|s| !s.is_empty()))
}

impl StandoffRow {
    fn validate(&self) -> Result<()> {
        if self.start >= self.stop {
            return Err(Error::Invalid(format!(
                "standoff row {}[{}, {}) has start >= stop",
                self.doc_id, self.start, self.stop
            )));
        }
        if self.raw_label.trim().is_empty() {
            return Err(Error::Invalid(format!(
                "standoff row {}[{}, {}) has an empty label",
                self.doc_id, self.start, self.stop
            )));
        }
        Ok(())
    }
}

/// Places a span on the text. When a literal is given and does not match
/// the slice, the span is retried shifted by -1 and +1.
fn resolve_span(
    index: &CharIndex<'_>,
    doc_id: &str,
    start: usize,
    stop: usize,
    literal: Option<&str>,
    what: &str,
) -> Result<(usize, usize, String)> {
    let out_of_range = || Error::OutOfRange {
        doc_id: doc_id.to_string(),
        start,
        stop,
        len: index.len(),
    };
    if start >= stop {
        return Err(out_of_range());
    }
    let Some(literal) = literal else {
        let slice = index.slice(start, stop).ok_or_else(out_of_range)?;
        return Ok((start, stop, slice.to_string()));
    };
    for shift in [0isize, -1, 1] {
        let (Some(s), Some(e)) = (
            start.checked_add_signed(shift),
            stop.checked_add_signed(shift),
        ) else {
            continue;
        };
        if index.slice(s, e) == Some(literal) {
            return Ok((s, e, literal.to_string()));
        }
    }
    if stop > index.len() {
        return Err(out_of_range());
    }
    Err(Error::LiteralMismatch {
        doc_id: doc_id.to_string(),
        start,
        stop,
        literal: format!("{literal} ({what})"),
        found: index.slice(start, stop).unwrap_or_default().to_string(),
    })
}

/// Parses one i2b2-style note: a `TEXT` element holding the note body and
/// a `TAGS` element of empty tags with `id`, `start`, `end`, `text` and
/// `TYPE` attributes. The element name stands in for a missing `TYPE`.
pub fn parse_i2b2_xml(
    xml_text: &str,
    doc_id: &str,
    annotator: &str,
) -> Result<(Document, Vec<Annotation>)> {
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let xml = roxmltree::Document::parse_with_options(xml_text, options)
        .map_err(|e| Error::Xml(format!("{doc_id}: {e}")))?;
    let root = xml.root_element();
    let text_node = root
        .descendants()
        .find(|n| n.has_tag_name("TEXT"))
        .ok_or_else(|| Error::Xml(format!("{doc_id}: missing TEXT element")))?;
    let text: String = text_node
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();

    let index = CharIndex::new(&text);
    let mut annotations = Vec::new();
    if let Some(tags) = root.descendants().find(|n| n.has_tag_name("TAGS")) {
        for tag in tags.children().filter(|n| n.is_element()) {
            let name = tag.tag_name().name();
            let id = tag.attribute("id").unwrap_or(name);
            let offset = |attr: &str| -> Result<usize> {
                tag.attribute(attr)
                    .ok_or_else(|| Error::Xml(format!("{doc_id}: tag {id} missing {attr}")))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Xml(format!("{doc_id}: tag {id} has a bad {attr}")))
            };
            let (start, stop) = (offset("start")?, offset("end")?);
            let raw_label = tag
                .attribute("TYPE")
                .filter(|t| !t.trim().is_empty())
                .unwrap_or(name)
                .to_string();
            let what = format!("tag {id}");
            let (start, stop, literal) =
                resolve_span(&index, doc_id, start, stop, tag.attribute("text"), &what)?;
            annotations.push(Annotation {
                doc_id: doc_id.to_string(),
                start,
                stop,
                literal,
                raw_label,
                category: None,
                annotator: annotator.to_string(),
            });
        }
    }
    sort_annotations(&mut annotations);
    Ok((Document::new(doc_id, text), annotations))
}

/// Builds a document and its annotations from raw text and standoff rows.
pub fn parse_standoff(
    text: &str,
    rows: &[StandoffRow],
    doc_id: &str,
    annotator: &str,
) -> Result<(Document, Vec<Annotation>)> {
    let index = CharIndex::new(text);
    let mut annotations = Vec::with_capacity(rows.len());
    for row in rows {
        if row.doc_id != doc_id {
            return Err(Error::Invalid(format!(
                "standoff row for {:?} passed with document {doc_id:?}",
                row.doc_id
            )));
        }
        annotations.push(annotation_from_row(&index, row, annotator)?);
    }
    sort_annotations(&mut annotations);
    Ok((Document::new(doc_id, text), annotations))
}

fn annotation_from_row(
    index: &CharIndex<'_>,
    row: &StandoffRow,
    annotator: &str,
) -> Result<Annotation> {
    row.validate()?;
    let what = format!("row {}", row.raw_label);
    let (start, stop, literal) = resolve_span(
        index,
        &row.doc_id,
        row.start,
        row.stop,
        row.literal.as_deref(),
        &what,
    )?;
    Ok(Annotation {
        doc_id: row.doc_id.clone(),
        start,
        stop,
        literal,
        raw_label: row.raw_label.clone(),
        category: None,
        annotator: annotator.to_string(),
    })
}

/// Adds an annotation set built from standoff rows to a copy of `corpus`.
pub fn ingest_predictions(
    corpus: &Corpus,
    rows: &[StandoffRow],
    annotator: &str,
    overwrite: bool,
) -> Result<Corpus> {
    if annotator.is_empty() {
        return Err(Error::Invalid("empty annotator name".into()));
    }
    if corpus.annotation_sets.contains_key(annotator) && !overwrite {
        return Err(Error::DuplicateAnnotator(annotator.to_string()));
    }
    let mut by_doc: BTreeMap<&str, Vec<&StandoffRow>> = BTreeMap::new();
    for row in rows {
        by_doc.entry(row.doc_id.as_str()).or_default().push(row);
    }
    let mut annotations = Vec::with_capacity(rows.len());
    for (doc_id, doc_rows) in by_doc {
        let doc = corpus
            .document(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let index = CharIndex::new(&doc.text);
        for row in doc_rows {
            annotations.push(annotation_from_row(&index, row, annotator)?);
        }
    }
    let mut out = corpus.clone();
    out.set_annotations(annotator, annotations);
    out.validate()?;
    Ok(out)
}

const STANDOFF_COLUMNS: [&str; 5] = ["doc_id", "start", "stop", "raw_label", "literal"];

/// Parses a standoff TSV. The header row is required; the `literal`
/// column may be absent or empty.
pub fn read_standoff_tsv(content: &str) -> Result<Vec<StandoffRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("standoff tsv header", e))?
        .clone();
    for required in &STANDOFF_COLUMNS[..4] {
        if !headers.iter().any(|h| h == *required) {
            return Err(Error::parse(
                "standoff tsv header",
                format!(
                    "missing column {required:?} (expected {})",
                    STANDOFF_COLUMNS.join(", ")
                ),
            ));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<StandoffRow>().enumerate() {
        let row = record.map_err(|e| Error::parse(format!("standoff tsv row {}", i + 2), e))?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parses line-delimited JSON standoff rows.
pub fn read_standoff_jsonl(content: &str) -> Result<Vec<StandoffRow>> {
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: StandoffRow = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("standoff jsonl line {}", i + 1), e))?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes rows as a standoff TSV with header.
pub fn write_standoff_tsv(rows: &[StandoffRow]) -> String {
    let mut out = STANDOFF_COLUMNS.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            row.doc_id,
            row.start,
            row.stop,
            row.raw_label,
            row.literal.as_deref().unwrap_or("")
        ));
    }
    out
}
