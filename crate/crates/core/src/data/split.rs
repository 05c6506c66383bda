//! Deterministic train/test splits over an attribute table.


use crate::data::attributes::AttributeTable;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Which partitions are class-balanced with respect to the target
/// attribute. Accuracy against a balanced test set reads directly as
/// distance from the 50% base rate, so reports record this choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalanceMode {
    /// Both partitions drawn at random regardless of class.
    None,
    /// Balanced training partition, random test partition.
    TrainOnly,
    /// Both partitions balanced.
    Both,
}

impl BalanceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BalanceMode::None => "none",
            BalanceMode::TrainOnly => "train",
            BalanceMode::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BalanceMode::None),
            "train" => Ok(BalanceMode::TrainOnly),
            "both" => Ok(BalanceMode::Both),
            other => Err(Error::InvalidArgument(format!(
                "balance mode must be none|train|both, got '{other}'"
            ))),
        }
    }
}

/// Disjoint train/test id lists for one target attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
    pub target_attribute: String,
    pub balance: BalanceMode,
}

fn take_balanced(
    order: &[usize],
    positive: &[bool],
    used: &mut [bool],
    n: usize,
    partition: &str,
) -> Result<Vec<usize>> {
    let want_pos = n / 2;
    let want_neg = n - want_pos;
    let mut picked = Vec::with_capacity(n);
    let (mut got_pos, mut got_neg) = (0usize, 0usize);
    for &idx in order {
        if picked.len() == n {
            break;
        }
        if used[idx] {
            continue;
        }
        if positive[idx] && got_pos < want_pos {
            got_pos += 1;
        } else if !positive[idx] && got_neg < want_neg {
            got_neg += 1;
        } else {
            continue;
        }
        used[idx] = true;
        picked.push(idx);
    }
    if picked.len() < n {
        return Err(Error::InvalidArgument(format!(
            "not enough records for a balanced {partition} partition: \
             wanted {want_pos} positive and {want_neg} negative, \
             found {got_pos} and {got_neg} available"
        )));
    }
    Ok(picked)
}

fn take_any(order: &[usize], used: &mut [bool], n: usize, partition: &str) -> Result<Vec<usize>> {
    let mut picked = Vec::with_capacity(n);
    for &idx in order {
        if picked.len() == n {
            break;
        }
        if used[idx] {
            continue;
        }
        used[idx] = true;
        picked.push(idx);
    }
    if picked.len() < n {
        return Err(Error::InvalidArgument(format!(
            "not enough records for the {partition} partition: wanted {n}, {} available",
            picked.len()
        )));
    }
    Ok(picked)
}

/// Draw a deterministic split under `seed`. Balanced partitions take
/// `n/2` positive and `n - n/2` negative records (off by at most one for
/// odd `n`); ids keep their order in the seeded shuffle.
pub fn make_split(
    table: &AttributeTable,
    target_attribute: &str,
    n_train: usize,
    n_test: usize,
    seed: u64,
    balance: BalanceMode,
) -> Result<Split> {
    let attr = table.attribute_index(target_attribute)?;
    let n = table.len();
    if n_train + n_test > n {
        let positives = table
            .records()
            .iter()
            .filter(|r| r.labels[attr] == 1)
            .count();
        return Err(Error::InvalidArgument(format!(
            "split needs {} records but the table has {n} \
             ({positives} positive, {} negative)",
            n_train + n_test,
            n - positives
        )));
    }

    let positive: Vec<bool> = table
        .records()
        .iter()
        .map(|r| r.labels[attr] == 1)
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    crate::rng::shuffle(&mut order, &mut substream(seed, "split"));

    let mut used = vec![false; n];
    let train = match balance {
        BalanceMode::TrainOnly | BalanceMode::Both => {
            take_balanced(&order, &positive, &mut used, n_train, "train")?
        }
        BalanceMode::None => take_any(&order, &mut used, n_train, "train")?,
    };
    let test = match balance {
        BalanceMode::Both => take_balanced(&order, &positive, &mut used, n_test, "test")?,
        _ => take_any(&order, &mut used, n_test, "test")?,
    };

    let id_of = |idx: &usize| table.records()[*idx].image_id.clone();
    Ok(Split {
        train_ids: train.iter().map(id_of).collect(),
        test_ids: test.iter().map(id_of).collect(),
        seed,
        target_attribute: target_attribute.to_string(),
        balance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::attributes::parse_attribute_file;

    /// 100 positive and 100 negative synthetic records.
    fn synthetic_table() -> AttributeTable {
        let mut text = String::from("200\nTarget Other\n");
        for i in 0..200 {
            let label = if i % 2 == 0 { 1 } else { -1 };
            let other = if i % 3 == 0 { 1 } else { -1 };
            text.push_str(&format!("img{i:03}.jpg {label} {other}\n"));
        }
        parse_attribute_file(text.as_bytes()).unwrap()
    }

    fn count_positives(table: &AttributeTable, ids: &[String]) -> usize {
        let attr = table.attribute_index("Target").unwrap();
        ids.iter()
            .filter(|id| table.label(id, attr).unwrap() == 1)
            .count()
    }

    #[test]
    fn same_seed_gives_identical_split() {
        let table = synthetic_table();
        let a = make_split(&table, "Target", 50, 50, 7, BalanceMode::TrainOnly).unwrap();
        let b = make_split(&table, "Target", 50, 50, 7, BalanceMode::TrainOnly).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let table = synthetic_table();
        let a = make_split(&table, "Target", 50, 50, 7, BalanceMode::TrainOnly).unwrap();
        let b = make_split(&table, "Target", 50, 50, 8, BalanceMode::TrainOnly).unwrap();
        assert_ne!(a.train_ids, b.train_ids);
    }

    #[test]
    fn balanced_both_gives_exact_counts() {
        let table = synthetic_table();
        let split = make_split(&table, "Target", 50, 50, 42, BalanceMode::Both).unwrap();
        assert_eq!(count_positives(&table, &split.train_ids), 25);
        assert_eq!(count_positives(&table, &split.test_ids), 25);
    }

    #[test]
    fn odd_n_balanced_is_off_by_at_most_one() {
        let table = synthetic_table();
        let split = make_split(&table, "Target", 51, 49, 42, BalanceMode::Both).unwrap();
        let train_pos = count_positives(&table, &split.train_ids) as isize;
        assert!((train_pos - 25).abs() <= 1, "train positives {train_pos}");
        let test_pos = count_positives(&table, &split.test_ids) as isize;
        assert!((test_pos - 24).abs() <= 1, "test positives {test_pos}");
    }

    #[test]
    fn partitions_are_disjoint() {
        let table = synthetic_table();
        let split = make_split(&table, "Target", 80, 80, 3, BalanceMode::TrainOnly).unwrap();
        for id in &split.train_ids {
            assert!(!split.test_ids.contains(id));
        }
        assert_eq!(split.train_ids.len(), 80);
        assert_eq!(split.test_ids.len(), 80);
    }

    #[test]
    fn oversized_request_reports_class_counts() {
        let table = synthetic_table();
        let err = make_split(&table, "Target", 200, 1, 3, BalanceMode::None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("100 positive"), "{msg}");
    }

    #[test]
    fn zero_sized_partition_stays_empty() {
        // A zero test partition must not swallow the leftover records.
        let table = synthetic_table();
        let split = make_split(&table, "Target", 50, 0, 5, BalanceMode::None).unwrap();
        assert_eq!(split.train_ids.len(), 50);
        assert!(split.test_ids.is_empty());
    }

    #[test]
    fn insufficient_class_members_reported() {
        // 10 positives only; a balanced 40-train needs 20.
        let mut text = String::from("50\nTarget\n");
        for i in 0..50 {
            let label = if i < 10 { 1 } else { -1 };
            text.push_str(&format!("img{i:02}.jpg {label}\n"));
        }
        let table = parse_attribute_file(text.as_bytes()).unwrap();
        let err = make_split(&table, "Target", 40, 5, 1, BalanceMode::TrainOnly).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wanted 20 positive"), "{msg}");
    }
}
