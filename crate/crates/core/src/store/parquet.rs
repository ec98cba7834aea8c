//! Minimal typed table I/O over the low-level parquet column API.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use parquet::basic::Compression;
use parquet::data_type::{ByteArray, ByteArrayType, Int64Type};
use parquet::file::properties::WriterProperties;
use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::file::writer::SerializedFileWriter;
use parquet::record::Field;
use parquet::schema::parser::parse_message_type;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ColumnKind {
    Utf8,
    NullableUtf8,
    Int64,
}

pub(crate) struct TableSchema {
    pub name: &'static str,
    pub columns: &'static [(&'static str, ColumnKind)],
}

impl TableSchema {
    fn message(&self) -> String {
        let mut msg = format!("message {} {{\n", self.name);
        for (col, kind) in self.columns {
            let decl = match kind {
                ColumnKind::Utf8 => format!("  REQUIRED BYTE_ARRAY {col} (UTF8);\n"),
                ColumnKind::NullableUtf8 => format!("  OPTIONAL BYTE_ARRAY {col} (UTF8);\n"),
                ColumnKind::Int64 => format!("  REQUIRED INT64 {col};\n"),
            };
            msg.push_str(&decl);
        }
        msg.push('}');
        msg
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Value {
    Str(String),
    Null,
    Int(i64),
}

impl Value {
    pub fn into_string(self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

fn pq_err(path: &Path) -> impl Fn(parquet::errors::ParquetError) -> Error + '_ {
    move |source| Error::Parquet {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows (each a vector in schema column order) as a single row group.
pub(crate) fn write_table(path: &Path, schema: &TableSchema, rows: &[Vec<Value>]) -> Result<()> {
    let err = pq_err(path);
    let message = parse_message_type(&schema.message()).map_err(&err)?;
    let props = WriterProperties::builder()
        .set_compression(Compression::SNAPPY)
        .set_created_by("clipse".to_string())
        .build();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer =
        SerializedFileWriter::new(file, Arc::new(message), Arc::new(props)).map_err(&err)?;
    let mut group = writer.next_row_group().map_err(&err)?;
    let mut index = 0;
    while let Some(mut column) = group.next_column().map_err(&err)? {
        let (_, kind) = schema.columns[index];
        match kind {
            ColumnKind::Utf8 => {
                let values: Vec<ByteArray> = rows
                    .iter()
                    .map(|r| match &r[index] {
                        Value::Str(s) => ByteArray::from(s.as_str()),
                        other => panic!("column {index} expects a string, got {other:?}"),
                    })
                    .collect();
                column
                    .typed::<ByteArrayType>()
                    .write_batch(&values, None, None)
                    .map_err(&err)?;
            }
            ColumnKind::NullableUtf8 => {
                let mut values = Vec::new();
                let mut levels = Vec::with_capacity(rows.len());
                for r in rows {
                    match &r[index] {
                        Value::Str(s) => {
                            values.push(ByteArray::from(s.as_str()));
                            levels.push(1);
                        }
                        Value::Null => levels.push(0),
                        other => panic!("column {index} expects a string, got {other:?}"),
                    }
                }
                column
                    .typed::<ByteArrayType>()
                    .write_batch(&values, Some(&levels), None)
                    .map_err(&err)?;
            }
            ColumnKind::Int64 => {
                let values: Vec<i64> = rows
                    .iter()
                    .map(|r| match r[index] {
                        Value::Int(v) => v,
                        ref other => panic!("column {index} expects an integer, got {other:?}"),
                    })
                    .collect();
                column
                    .typed::<Int64Type>()
                    .write_batch(&values, None, None)
                    .map_err(&err)?;
            }
        }
        column.close().map_err(&err)?;
        index += 1;
    }
    group.close().map_err(&err)?;
    writer.close().map_err(&err)?;
    Ok(())
}

/// Reads every row, returning values in schema column order. Extra
/// columns in the file are ignored; missing ones are a schema error.
pub(crate) fn read_table(path: &Path, schema: &TableSchema) -> Result<Vec<Vec<Value>>> {
    let err = pq_err(path);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = SerializedFileReader::new(file).map_err(&err)?;
    let descr = reader.metadata().file_metadata().schema_descr_ptr();
    for (col, kind) in schema.columns {
        let found = descr.columns().iter().find(|c| c.name() == *col);
        let Some(found) = found else {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                detail: format!("missing column {col:?}"),
            });
        };
        let physical_ok = match kind {
            ColumnKind::Utf8 | ColumnKind::NullableUtf8 => {
                found.physical_type() == parquet::basic::Type::BYTE_ARRAY
            }
            ColumnKind::Int64 => found.physical_type() == parquet::basic::Type::INT64,
        };
        if !physical_ok {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                detail: format!("column {col:?} has physical type {}", found.physical_type()),
            });
        }
    }

    let mut rows = Vec::new();
    for row in reader.get_row_iter(None).map_err(&err)? {
        let row = row.map_err(&err)?;
        let mut values = Vec::with_capacity(schema.columns.len());
        for (col, kind) in schema.columns {
            let field = row
                .get_column_iter()
                .find(|(name, _)| name.as_str() == *col)
                .map(|(_, f)| f);
            let value = match (kind, field) {
                (ColumnKind::Utf8 | ColumnKind::NullableUtf8, Some(Field::Str(s))) => {
                    Value::Str(s.clone())
                }
                (ColumnKind::NullableUtf8, Some(Field::Null) | None) => Value::Null,
                (ColumnKind::Int64, Some(Field::Long(v))) => Value::Int(*v),
                (ColumnKind::Int64, Some(Field::Int(v))) => Value::Int(i64::from(*v)),
                (_, other) => {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        detail: format!("column {col:?}: unexpected value {other:?}"),
                    })
                }
            };
            values.push(value);
        }
        rows.push(values);
    }
    Ok(rows)
}
