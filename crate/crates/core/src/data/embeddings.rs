//! Embedding-file parsing: fixed-length feature vectors produced by an
//! external pretrained extractor, keyed by image id.
//!
//! Text format (normative): header line `count dim`, then one row per
//! image: `image_id v1 ... v_dim` in decimal text. LF or CRLF.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    records: Vec<(String, Vec<f64>)>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, records: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (row, (id, vector)) in records.iter().enumerate() {
            if vector.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "embedding '{id}' has {} values, expected {dim}",
                    vector.len()
                )));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "embedding '{id}' contains a non-finite value"
                )));
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate image id '{id}'")));
            }
        }
        Ok(EmbeddingTable {
            dim,
            records,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(String, Vec<f64>)] {
        &self.records
    }

    pub fn vector(&self, image_id: &str) -> Option<&[f64]> {
        self.index.get(image_id).map(|&row| &self.records[row].1[..])
    }
}

pub fn parse_embeddings(reader: impl BufRead) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file; expected 'count dim' header"))?;
    let header = header.map_err(|e| Error::parse(1, e.to_string()))?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(1, format!("bad count in header '{header}'")))?;
    let dim: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(1, format!("bad dim in header '{header}'")))?;
    if parts.next().is_some() {
        return Err(Error::parse(1, "header must be exactly 'count dim'"));
    }

    // Capacity hints only; the header is untrusted.
    let mut records = Vec::with_capacity(count.min(1 << 20));
    let mut index = HashMap::with_capacity(count.min(1 << 20));
    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let mut vector = Vec::with_capacity(dim.min(1 << 20));
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad number '{field}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(
                    lineno,
                    format!("non-finite value '{field}' in embedding '{id}'"),
                ));
            }
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                lineno,
                format!(
                    "embedding '{id}' has {} values, expected {dim}",
                    vector.len()
                ),
            ));
        }
        if index.insert(id.to_string(), records.len()).is_some() {
            return Err(Error::parse(lineno, format!("duplicate image id '{id}'")));
        }
        records.push((id.to_string(), vector));
    }
    if records.len() != count {
        return Err(Error::parse(
            1,
            format!(
                "file declares {count} embeddings but contains {}",
                records.len()
            ),
        ));
    }
    Ok(EmbeddingTable {
        dim,
        records,
        index,
    })
}

pub fn write_embeddings(table: &EmbeddingTable, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for (id, vector) in table.records() {
        write!(out, "{id}")?;
        for v in vector {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
