//! Pairwise co-occurrence of binary attributes over positive labels.

use crate::data::AttributeTable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CooccurrenceMetric {
    /// `|i ∧ j| / |i ∨ j|`; symmetric, diagonal 1.
    Jaccard,
    /// `P(j = +1 | i = +1)`; rows condition on `i`, generally asymmetric.
    Conditional,
}

impl CooccurrenceMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            CooccurrenceMetric::Jaccard => "jaccard",
            CooccurrenceMetric::Conditional => "conditional",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jaccard" => Ok(CooccurrenceMetric::Jaccard),
            "conditional" => Ok(CooccurrenceMetric::Conditional),
            other => Err(Error::InvalidArgument(format!(
                "metric must be jaccard|conditional, got '{other}'"
            ))),
        }
    }
}

/// F×F co-occurrence values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    pub names: Vec<String>,
    /// Row-major F×F.
    pub values: Vec<f64>,
    pub metric: CooccurrenceMetric,
    /// Attributes with no positive labels: their diagonal is defined as 1
    /// (and conditional rows as 0) by convention rather than by data.
    pub empty_attributes: Vec<usize>,
}

impl CooccurrenceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.names.len() + j]
    }

    /// 8-bit grayscale samples for a heatmap (white = high co-occurrence),
    /// one pixel per cell scaled by `cell` in each direction.
    pub fn heatmap_samples(&self, cell: usize) -> (usize, usize, Vec<u8>) {
        let f = self.names.len();
        let side = f * cell;
        let mut samples = vec![0u8; side * side];
        for i in 0..f {
            for j in 0..f {
                let v = (self.get(i, j).clamp(0.0, 1.0) * 255.0).round() as u8;
                for dy in 0..cell {
                    for dx in 0..cell {
                        samples[(i * cell + dy) * side + j * cell + dx] = v;
                    }
                }
            }
        }
        (side, side, samples)
    }
}

pub fn cooccurrence(table: &AttributeTable, metric: CooccurrenceMetric) -> Result<CooccurrenceMatrix> {
    if table.is_empty() {
        return Err(Error::InvalidArgument(
            "co-occurrence needs a non-empty table".into(),
        ));
    }
    let f = table.n_attributes();
    // Positive-count and pairwise-intersection tallies.
    let mut pos = vec![0usize; f];
    let mut both = vec![0usize; f * f];
    for rec in table.records() {
        let positives: Vec<usize> = (0..f).filter(|&a| rec.labels[a] == 1).collect();
        for &a in &positives {
            pos[a] += 1;
            for &b in &positives {
                both[a * f + b] += 1;
            }
        }
    }

    let empty_attributes: Vec<usize> = (0..f).filter(|&a| pos[a] == 0).collect();
    let mut values = vec![0.0; f * f];
    for i in 0..f {
        for j in 0..f {
            let inter = both[i * f + j];
            values[i * f + j] = match metric {
                CooccurrenceMetric::Jaccard => {
                    if i == j {
                        1.0 // defined 1 even for empty attributes; flagged above
                    } else {
                        let union = pos[i] + pos[j] - inter;
                        if union == 0 {
                            0.0
                        } else {
                            inter as f64 / union as f64
                        }
                    }
                }
                CooccurrenceMetric::Conditional => {
                    if pos[i] == 0 {
                        0.0
                    } else {
                        inter as f64 / pos[i] as f64
                    }
                }
            };
        }
    }
    Ok(CooccurrenceMatrix {
        names: table.attribute_names().to_vec(),
        values,
        metric,
        empty_attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_attribute_file;

    fn table(text: &str) -> AttributeTable {
        parse_attribute_file(text.as_bytes()).unwrap()
    }

    #[test]
    fn attribute_with_itself_is_one() {
        let t = table("2\nA B\nx.jpg 1 -1\ny.jpg 1 1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert!(m.empty_attributes.is_empty());
    }

    #[test]
    fn disjoint_attributes_are_zero() {
        let t = table("2\nA B\nx.jpg 1 -1\ny.jpg -1 1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn jaccard_matches_enumeration_oracle() {
        // A = [+,+,-,-], B = [+,-,+,-]: intersection 1, union 3.
        let t = table("4\nA B\na.jpg 1 1\nb.jpg 1 -1\nc.jpg -1 1\nd.jpg -1 -1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();

        // Oracle: enumerate the records directly.
        let records = t.records();
        let inter = records
            .iter()
            .filter(|r| r.labels[0] == 1 && r.labels[1] == 1)
            .count();
        let union = records
            .iter()
            .filter(|r| r.labels[0] == 1 || r.labels[1] == 1)
            .count();
        assert_eq!(m.get(0, 1), inter as f64 / union as f64);
        assert_eq!(m.get(0, 1), 1.0 / 3.0);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded() {
        let t = table(
            "5\nA B C\na.jpg 1 1 -1\nb.jpg 1 -1 -1\nc.jpg -1 1 1\nd.jpg -1 -1 1\ne.jpg 1 1 1\n",
        );
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn conditional_is_asymmetric_on_crafted_fixture() {
        // B ⊂ A strictly: P(A|B) = 1 but P(B|A) < 1.
        let t = table("3\nA B\na.jpg 1 1\nb.jpg 1 -1\nc.jpg -1 -1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Conditional).unwrap();
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.5);
        assert_ne!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn empty_attribute_is_flagged() {
        let t = table("2\nA B\na.jpg 1 -1\nb.jpg 1 -1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();
        assert_eq!(m.empty_attributes, vec![1]);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn heatmap_is_white_on_the_diagonal() {
        let t = table("2\nA B\na.jpg 1 -1\nb.jpg -1 1\n");
        let m = cooccurrence(&t, CooccurrenceMetric::Jaccard).unwrap();
        let (w, h, samples) = m.heatmap_samples(2);
        assert_eq!((w, h), (4, 4));
        assert_eq!(samples[0], 255); // (0,0) cell
        assert_eq!(samples[2], 0); // (0,1) cell
    }
}
