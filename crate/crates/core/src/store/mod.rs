//! On-disk corpus layout.
//!
//! A corpus directory holds three datasets:
//!
//! ```text
//! <dir>/documents.parquet
//! <dir>/annotations/annotator=<name>/part-0.parquet
//! <dir>/gazetteers.parquet
//! ```
//!
//! The same layout with `.jsonl` files (one JSON object per row, same
//! field names) is accepted as an interchange fallback. Annotator names
//! are percent-encoded in partition directory names.

mod parquet;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use self::parquet::{read_table, write_table, ColumnKind, TableSchema, Value};
use crate::corpus::{Annotation, Corpus, Document, Gazetteer};
use crate::error::{Error, Result};
use crate::harmonize::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoreFormat {
    #[default]
    Parquet,
    Jsonl,
}

impl StoreFormat {
    fn extension(self) -> &'static str {
        match self {
            StoreFormat::Parquet => "parquet",
            StoreFormat::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for StoreFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parquet" => Ok(StoreFormat::Parquet),
            "jsonl" => Ok(StoreFormat::Jsonl),
            other => Err(Error::Usage(format!("unknown store format {other:?}"))),
        }
    }
}

const DOCUMENTS: TableSchema = TableSchema {
    name: "documents",
    columns: &[
        ("doc_id", ColumnKind::Utf8),
        ("text", ColumnKind::Utf8),
        ("source", ColumnKind::Utf8),
        ("split", ColumnKind::Utf8),
    ],
};

const ANNOTATIONS: TableSchema = TableSchema {
    name: "annotations",
    columns: &[
        ("doc_id", ColumnKind::Utf8),
        ("start", ColumnKind::Int64),
        ("stop", ColumnKind::Int64),
        ("literal", ColumnKind::Utf8),
        ("raw_label", ColumnKind::Utf8),
        ("category", ColumnKind::NullableUtf8),
        ("annotator", ColumnKind::Utf8),
    ],
};

const GAZETTEERS: TableSchema = TableSchema {
    name: "gazetteers",
    columns: &[
        ("name", ColumnKind::Utf8),
        ("category", ColumnKind::Utf8),
        ("entry", ColumnKind::Utf8),
    ],
};

#[derive(Debug, Serialize, Deserialize)]
struct DocumentRow {
    doc_id: String,
    text: String,
    source: String,
    split: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    doc_id: String,
    start: i64,
    stop: i64,
    literal: String,
    raw_label: String,
    category: Option<String>,
    annotator: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct GazetteerRow {
    name: String,
    category: String,
    entry: String,
}

trait Row: Sized + Serialize + DeserializeOwned {
    const SCHEMA: &'static TableSchema;
    fn to_values(&self) -> Vec<Value>;
    fn from_values(values: Vec<Value>) -> Option<Self>;
}

impl Row for DocumentRow {
    const SCHEMA: &'static TableSchema = &DOCUMENTS;

    fn to_values(&self) -> Vec<Value> {
        vec![
            Value::Str(self.doc_id.clone()),
            Value::Str(self.text.clone()),
            Value::Str(self.source.clone()),
            Value::Str(self.split.clone()),
        ]
    }

    fn from_values(values: Vec<Value>) -> Option<Self> {
        let mut it = values.into_iter();
        Some(Self {
            doc_id: it.next()?.into_string()?,
            text: it.next()?.into_string()?,
            source: it.next()?.into_string()?,
            split: it.next()?.into_string()?,
        })
    }
}

impl Row for AnnotationRow {
    const SCHEMA: &'static TableSchema = &ANNOTATIONS;

    fn to_values(&self) -> Vec<Value> {
        vec![
            Value::Str(self.doc_id.clone()),
            Value::Int(self.start),
            Value::Int(self.stop),
            Value::Str(self.literal.clone()),
            Value::Str(self.raw_label.clone()),
            self.category.clone().map_or(Value::Null, Value::Str),
            Value::Str(self.annotator.clone()),
        ]
    }

    fn from_values(values: Vec<Value>) -> Option<Self> {
        let mut it = values.into_iter();
        let doc_id = it.next()?.into_string()?;
        let Value::Int(start) = it.next()? else {
            return None;
        };
        let Value::Int(stop) = it.next()? else {
            return None;
        };
        Some(Self {
            doc_id,
            start,
            stop,
            literal: it.next()?.into_string()?,
            raw_label: it.next()?.into_string()?,
            category: it.next()?.into_string(),
            annotator: it.next()?.into_string()?,
        })
    }
}

impl Row for GazetteerRow {
    const SCHEMA: &'static TableSchema = &GAZETTEERS;

    fn to_values(&self) -> Vec<Value> {
        vec![
            Value::Str(self.name.clone()),
            Value::Str(self.category.clone()),
            Value::Str(self.entry.clone()),
        ]
    }

    fn from_values(values: Vec<Value>) -> Option<Self> {
        let mut it = values.into_iter();
        Some(Self {
            name: it.next()?.into_string()?,
            category: it.next()?.into_string()?,
            entry: it.next()?.into_string()?,
        })
    }
}

fn write_rows<R: Row>(path: &Path, format: StoreFormat, rows: &[R]) -> Result<()> {
    match format {
        StoreFormat::Parquet => {
            let values: Vec<Vec<Value>> = rows.iter().map(Row::to_values).collect();
            write_table(path, R::SCHEMA, &values)
        }
        StoreFormat::Jsonl => {
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut out = BufWriter::new(file);
            for row in rows {
                serde_json::to_writer(&mut out, row)
                    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            out.flush().map_err(|e| Error::io(path, e))
        }
    }
}

fn read_rows<R: Row>(path: &Path, format: StoreFormat) -> Result<Vec<R>> {
    match format {
        StoreFormat::Parquet => read_table(path, R::SCHEMA)?
            .into_iter()
            .map(|values| {
                R::from_values(values).ok_or_else(|| Error::Schema {
                    path: path.to_path_buf(),
                    detail: "row does not match schema".into(),
                })
            })
            .collect(),
        StoreFormat::Jsonl => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let mut rows = Vec::new();
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row = serde_json::from_str(&line).map_err(|e| Error::Schema {
                    path: path.to_path_buf(),
                    detail: format!("line {}: {e}", lineno + 1),
                })?;
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

/// Percent-encodes everything outside `[A-Za-z0-9._-]`, for use in file
/// and partition names.
pub fn encode_component(annotator: &str) -> String {
    let mut out = String::new();
    for b in annotator.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn decode_partition(encoded: &str) -> Option<String> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = encoded.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Writes `corpus` in parquet format.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write_corpus_as(corpus, path, StoreFormat::Parquet)
}

/// Writes `corpus` under `path`, which must not exist or be empty.
/// Invariant violations are rejected, never repaired.
pub fn write_corpus_as(corpus: &Corpus, path: &Path, format: StoreFormat) -> Result<()> {
    corpus.validate()?;
    if path.exists() {
        let mut entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        if entries.next().is_some() {
            return Err(Error::Usage(format!(
                "refusing to write corpus into non-empty directory {}",
                path.display()
            )));
        }
    }
    let ext = format.extension();
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;

    let docs: Vec<DocumentRow> = corpus
        .documents
        .values()
        .map(|d| DocumentRow {
            doc_id: d.doc_id.clone(),
            text: d.text.clone(),
            source: d.source.clone(),
            split: d.split.to_string(),
        })
        .collect();
    write_rows(&path.join(format!("documents.{ext}")), format, &docs)?;

    let ann_root = path.join("annotations");
    fs::create_dir_all(&ann_root).map_err(|e| Error::io(&ann_root, e))?;
    for (annotator, anns) in &corpus.annotation_sets {
        let mut sorted = anns.clone();
        crate::corpus::sort_annotations(&mut sorted);
        let rows: Vec<AnnotationRow> = sorted
            .into_iter()
            .map(|a| AnnotationRow {
                doc_id: a.doc_id,
                start: a.start as i64,
                stop: a.stop as i64,
                literal: a.literal,
                raw_label: a.raw_label,
                category: a.category.map(|c| c.to_string()),
                annotator: a.annotator,
            })
            .collect();
        let dir = ann_root.join(format!("annotator={}", encode_component(annotator)));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_rows(&dir.join(format!("part-0.{ext}")), format, &rows)?;
    }

    let gaz: Vec<GazetteerRow> = corpus
        .gazetteers
        .iter()
        .flat_map(|g| {
            g.entries.iter().map(move |e| GazetteerRow {
                name: g.name.clone(),
                category: g.category.to_string(),
                entry: e.clone(),
            })
        })
        .collect();
    write_rows(&path.join(format!("gazetteers.{ext}")), format, &gaz)?;
    Ok(())
}

fn detect_format(path: &Path) -> Result<StoreFormat> {
    for format in [StoreFormat::Parquet, StoreFormat::Jsonl] {
        if path
            .join(format!("documents.{}", format.extension()))
            .is_file()
        {
            return Ok(format);
        }
    }
    Err(Error::MissingDataset(path.join("documents.parquet")))
}

fn schema_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Reads a corpus directory in either format and validates it.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let format = detect_format(path)?;
    let ext = format.extension();

    let doc_path = path.join(format!("documents.{ext}"));
    let mut corpus = Corpus::new();
    for row in read_rows::<DocumentRow>(&doc_path, format)? {
        let split = row
            .split
            .parse()
            .map_err(|_| schema_err(&doc_path, format!("unknown split {:?}", row.split)))?;
        corpus.add_document(Document {
            doc_id: row.doc_id,
            text: row.text,
            source: row.source,
            split,
        })?;
    }

    let ann_root = path.join("annotations");
    if !ann_root.is_dir() {
        return Err(Error::MissingDataset(ann_root));
    }
    let mut partitions: Vec<PathBuf> = fs::read_dir(&ann_root)
        .map_err(|e| Error::io(&ann_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    partitions.sort();
    for dir in partitions {
        let dirname = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let annotator = dirname
            .strip_prefix("annotator=")
            .and_then(decode_partition)
            .ok_or_else(|| schema_err(&dir, "partition directory is not annotator=<name>"))?;
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
            .collect();
        files.sort();
        let mut anns = Vec::new();
        for file in files {
            for row in read_rows::<AnnotationRow>(&file, format)? {
                if row.annotator != annotator {
                    return Err(schema_err(
                        &file,
                        format!(
                            "row annotator {:?} does not match partition {annotator:?}",
                            row.annotator
                        ),
                    ));
                }
                if row.start < 0 || row.stop < 0 {
                    return Err(schema_err(&file, "negative offset"));
                }
                let category = row
                    .category
                    .as_deref()
                    .map(str::parse::<Category>)
                    .transpose()
                    .map_err(|e| schema_err(&file, e.to_string()))?;
                anns.push(Annotation {
                    doc_id: row.doc_id,
                    start: row.start as usize,
                    stop: row.stop as usize,
                    literal: row.literal,
                    raw_label: row.raw_label,
                    category,
                    annotator: row.annotator,
                });
            }
        }
        corpus.annotation_sets.insert(annotator, anns);
    }

    let gaz_path = path.join(format!("gazetteers.{ext}"));
    if gaz_path.is_file() {
        let mut grouped: Vec<(String, Category, Vec<String>)> = Vec::new();
        let mut positions: BTreeMap<String, usize> = BTreeMap::new();
        for row in read_rows::<GazetteerRow>(&gaz_path, format)? {
            let category: Category = row
                .category
                .parse()
                .map_err(|e: Error| schema_err(&gaz_path, e.to_string()))?;
            let idx = *positions.entry(row.name.clone()).or_insert_with(|| {
                grouped.push((row.name.clone(), category, Vec::new()));
                grouped.len() - 1
            });
            if grouped[idx].1 != category {
                return Err(schema_err(
                    &gaz_path,
                    format!("gazetteer {:?} has mixed categories", row.name),
                ));
            }
            grouped[idx].2.push(row.entry);
        }
        corpus.gazetteers = grouped
            .into_iter()
            .map(|(name, category, entries)| Gazetteer {
                name,
                category,
                entries: entries.into_iter().collect(),
            })
            .collect();
    }

    corpus.canonicalize();
    corpus.validate()?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Split, GOLD};

    fn sample() -> Corpus {
        let docs = [
            Document::new("a", "Dr Smith saw Zoë on 2067-05-03.")
                .with_source("unit")
                .with_split(Split::Train),
            Document::new("b", "No PHI here.").with_split(Split::Test),
        ];
        let anns = [
            Annotation {
                doc_id: "a".into(),
                start: 3,
                stop: 8,
                literal: "Smith".into(),
                raw_label: "DOCTOR".into(),
                category: Some(Category::Name),
                annotator: GOLD.into(),
            },
            Annotation {
                doc_id: "a".into(),
                start: 13,
                stop: 16,
                literal: "Zoë".into(),
                raw_label: "PATIENT".into(),
                category: None,
                annotator: "tool/v1".into(),
            },
        ];
        let gaz = vec![Gazetteer::from_entries(
            "surnames",
            Category::Name,
            ["Smith", "Jones"],
        )];
        Corpus::from_parts(docs, anns, gaz).unwrap()
    }

    #[test]
    fn round_trips_both_formats() {
        for format in [StoreFormat::Parquet, StoreFormat::Jsonl] {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().join("c");
            let corpus = sample();
            write_corpus_as(&corpus, &out, format).unwrap();
            assert!(out.join("annotations/annotator=gold").is_dir());
            assert!(out.join("annotations/annotator=tool%2Fv1").is_dir());
            assert_eq!(read_corpus(&out).unwrap(), corpus);
        }
    }

    #[test]
    fn minimal_corpus_has_empty_annotations_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_parts([Document::new("only", "text")], [], vec![]).unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        assert_eq!(
            fs::read_dir(dir.path().join("annotations"))
                .unwrap()
                .count(),
            0
        );
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back.documents.len(), 1);
        assert!(back.annotation_sets.is_empty());
    }

    #[test]
    fn refuses_non_empty_target() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("stray"), "x").unwrap();
        assert!(write_corpus(&sample(), dir.path()).is_err());
    }

    #[test]
    fn rejects_invalid_corpus_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let mut corpus = sample();
        corpus.annotation_sets.get_mut(GOLD).unwrap()[0].stop = 99;
        assert!(matches!(
            write_corpus(&corpus, &dir.path().join("c")),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn read_rejects_literal_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c");
        write_corpus_as(&sample(), &out, StoreFormat::Jsonl).unwrap();
        let part = out.join("annotations/annotator=gold/part-0.jsonl");
        let edited = fs::read_to_string(&part)
            .unwrap()
            .replace("\"Smith\"", "\"Smyth\"");
        fs::write(&part, edited).unwrap();
        let err = read_corpus(&out).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::LiteralMismatch { .. }));
        assert!(
            msg.contains("document a") && msg.contains("[3, 8)"),
            "{msg}"
        );
    }

    #[test]
    fn read_rejects_stop_beyond_text() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c");
        write_corpus_as(&sample(), &out, StoreFormat::Jsonl).unwrap();
        let part = out.join("annotations/annotator=gold/part-0.jsonl");
        let edited = fs::read_to_string(&part)
            .unwrap()
            .replace("\"stop\":8", "\"stop\":80");
        fs::write(&part, edited).unwrap();
        assert!(matches!(
            read_corpus(&out),
            Err(Error::OutOfRange { stop: 80, .. })
        ));
    }

    #[test]
    fn missing_datasets() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_corpus(dir.path()),
            Err(Error::MissingDataset(_))
        ));
        let out = dir.path().join("c");
        write_corpus(&sample(), &out).unwrap();
        fs::remove_dir_all(out.join("annotations")).unwrap();
        assert!(matches!(read_corpus(&out), Err(Error::MissingDataset(_))));
    }

    #[test]
    fn partition_names_round_trip() {
        for name in ["gold", "tool/v1", "a b%c", "ünï"] {
            assert_eq!(decode_partition(&encode_component(name)).unwrap(), name);
        }
    }
}
