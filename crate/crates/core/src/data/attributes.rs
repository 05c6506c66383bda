//! Attribute-list parsing.
//!
//! List format: line 1 is the record count, line 2 the attribute names,
//! and each following line an image id plus one `1`/`-1` label per
//! attribute, whitespace separated.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Per-image binary labels for a fixed set of named attributes.
/// Labels are stored as `+1` / `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeTable {
    names: Vec<String>,
    records: Vec<AttributeRecord>,
    index: HashMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeRecord {
    pub image_id: String,
    pub labels: Vec<i8>,
}

impl AttributeTable {
    pub fn new(names: Vec<String>, records: Vec<AttributeRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (row, rec) in records.iter().enumerate() {
            if rec.labels.len() != names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "record '{}' has {} labels but table has {} attributes",
                    rec.image_id,
                    rec.labels.len(),
                    names.len()
                )));
            }
            if rec.labels.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::InvalidArgument(format!(
                    "record '{}' contains a label other than +1/-1",
                    rec.image_id
                )));
            }
            if index.insert(rec.image_id.clone(), row).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate image id '{}'",
                    rec.image_id
                )));
            }
        }
        Ok(AttributeTable {
            names,
            records,
            index,
        })
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_attributes(&self) -> usize {
        self.names.len()
    }

    pub fn records(&self) -> &[AttributeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown attribute '{}'; available: {}",
                    name,
                    self.names.join(", ")
                ))
            })
    }

    pub fn record_index(&self, image_id: &str) -> Option<usize> {
        self.index.get(image_id).copied()
    }

    /// Label of `image_id` for attribute `attr`, as +1/-1.
    pub fn label(&self, image_id: &str, attr: usize) -> Result<i8> {
        let row = self
            .record_index(image_id)
            .ok_or_else(|| Error::MissingRecord(format!("image id '{image_id}'")))?;
        Ok(self.records[row].labels[attr])
    }
}

pub fn parse_attribute_file(reader: impl BufRead) -> Result<AttributeTable> {
    let mut lines = reader.lines().enumerate();

    let (_, count_line) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file; expected record count"))?;
    let count_line = count_line.map_err(|e| Error::parse(1, e.to_string()))?;
    let declared: usize = count_line
        .trim()
        .parse()
        .map_err(|_| Error::parse(1, format!("expected record count, got '{count_line}'")))?;

    let (_, names_line) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing attribute-name line"))?;
    let names_line = names_line.map_err(|e| Error::parse(2, e.to_string()))?;
    let names: Vec<String> = names_line.split_whitespace().map(String::from).collect();
    if names.is_empty() {
        return Err(Error::parse(2, "attribute-name line is empty"));
    }

    // Capacity hints only; the header is untrusted.
    let hint = declared.min(1 << 20);
    let mut records = Vec::with_capacity(hint);
    let mut index: HashMap<String, usize> = HashMap::with_capacity(hint);
    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(image_id) = fields.next() else {
            continue; // blank line
        };
        let mut labels = Vec::with_capacity(names.len());
        for field in fields {
            match field {
                "1" => labels.push(1i8),
                "-1" => labels.push(-1i8),
                other => {
                    return Err(Error::parse(
                        lineno,
                        format!("label must be 1 or -1, got '{other}'"),
                    ))
                }
            }
        }
        if labels.len() != names.len() {
            return Err(Error::parse(
                lineno,
                format!(
                    "record '{}' has {} labels, expected {}",
                    image_id,
                    labels.len(),
                    names.len()
                ),
            ));
        }
        if index.insert(image_id.to_string(), records.len()).is_some() {
            return Err(Error::parse(
                lineno,
                format!("duplicate image id '{image_id}'"),
            ));
        }
        records.push(AttributeRecord {
            image_id: image_id.to_string(),
            labels,
        });
    }

    if records.len() != declared {
        return Err(Error::parse(
            1,
            format!(
                "file declares {} records but contains {}",
                declared,
                records.len()
            ),
        ));
    }
    Ok(AttributeTable {
        names,
        records,
        index,
    })
}

/// Inverse of [`parse_attribute_file`] (single-space separated).
pub fn write_attribute_file(table: &AttributeTable, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{}", table.len())?;
    writeln!(out, "{}", table.attribute_names().join(" "))?;
    for rec in table.records() {
        write!(out, "{}", rec.image_id)?;
        for &label in &rec.labels {
            write!(out, " {label}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_record() {
        let table = parse_attribute_file("1\nSmiling Young\nimg1.jpg 1 -1\n".as_bytes()).unwrap();
        assert_eq!(table.attribute_names(), &["Smiling", "Young"]);
        assert_eq!(table.len(), 1);
        assert_eq!(table.records()[0].image_id, "img1.jpg");
        assert_eq!(table.records()[0].labels, vec![1, -1]);
    }

    #[test]
    fn parses_empty_table() {
        let table = parse_attribute_file("0\nSmiling\n".as_bytes()).unwrap();
        assert_eq!(table.len(), 0);
        assert_eq!(table.n_attributes(), 1);
    }

    #[test]
    fn count_mismatch_is_named() {
        let err = parse_attribute_file("2\nSmiling\nimg1.jpg 1\n".as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("declares 2"), "{msg}");
        assert!(msg.contains("contains 1"), "{msg}");
    }

    #[test]
    fn huge_declared_count_is_an_error_not_an_allocation() {
        let err = parse_attribute_file("10000000000\nSmiling\nimg1.jpg 1\n".as_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("declares 10000000000"), "{err}");
    }

    #[test]
    fn malformed_row_length_reports_line() {
        let err = parse_attribute_file("1\nSmiling Young\nimg1.jpg 1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn non_binary_value_rejected() {
        let err = parse_attribute_file("1\nSmiling\nimg1.jpg 0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("got '0'"), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let err =
            parse_attribute_file("2\nSmiling\nimg1.jpg 1\nimg1.jpg -1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn round_trips_through_serialization() {
        let input = "3\nSmiling Young Bald\na.jpg 1 -1 1\nb.jpg -1 -1 -1\nc.jpg 1 1 1\n";
        let table = parse_attribute_file(input.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_attribute_file(&table, &mut buf).unwrap();
        let again = parse_attribute_file(&buf[..]).unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn crlf_accepted() {
        let table =
            parse_attribute_file("1\r\nSmiling Young\r\nimg1.jpg 1 -1\r\n".as_bytes()).unwrap();
        assert_eq!(table.records()[0].labels, vec![1, -1]);
    }

    #[test]
    fn unknown_attribute_lookup_fails_with_listing() {
        let table = parse_attribute_file("0\nSmiling\n".as_bytes()).unwrap();
        let err = table.attribute_index("Eyeglasses").unwrap_err();
        assert!(err.to_string().contains("Smiling"), "{err}");
    }
}
