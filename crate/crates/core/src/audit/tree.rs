//! Decision-tree explanation of one attribute from its co-features.
//!
//! Greedy top-down induction: each node splits on the co-feature with
//! the highest information gain (Shannon entropy), recursing until the
//! node is pure, the depth limit is hit, or no split keeps both children
//! at `min_leaf` records. Ties on gain go to the lowest feature index,
//! and a best gain of zero still splits (XOR-style targets need two
//! levels before any gain appears). Leaf ties predict the negative class.

use crate::data::AttributeTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        class: u8,
        /// Training records that reached this leaf: [negative, positive].
        counts: [usize; 2],
    },
    Split {
        /// Index into the table's attribute list (never the target).
        feature: usize,
        /// Branch taken when the feature is -1.
        absent: Box<TreeNode>,
        /// Branch taken when the feature is +1.
        present: Box<TreeNode>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub target: String,
    pub target_index: usize,
    pub feature_names: Vec<String>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub root: TreeNode,
}

/// Shannon entropy (bits) of a two-class count pair.
pub fn entropy(neg: usize, pos: usize) -> f64 {
    let n = neg + pos;
    if n == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for k in [neg, pos] {
        if k > 0 {
            let p = k as f64 / n as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// Information gain of splitting `rows` on `feature`.
fn split_gain(
    table: &AttributeTable,
    rows: &[usize],
    target: usize,
    feature: usize,
) -> (f64, usize, usize) {
    let records = table.records();
    let mut counts = [[0usize; 2]; 2]; // [branch][class]
    for &r in rows {
        let branch = usize::from(records[r].labels[feature] == 1);
        let class = usize::from(records[r].labels[target] == 1);
        counts[branch][class] += 1;
    }
    let n_absent = counts[0][0] + counts[0][1];
    let n_present = counts[1][0] + counts[1][1];
    let n = rows.len() as f64;
    let parent = {
        let neg = counts[0][0] + counts[1][0];
        let pos = counts[0][1] + counts[1][1];
        entropy(neg, pos)
    };
    let child = (n_absent as f64 / n) * entropy(counts[0][0], counts[0][1])
        + (n_present as f64 / n) * entropy(counts[1][0], counts[1][1]);
    (parent - child, n_absent, n_present)
}

fn class_counts(table: &AttributeTable, rows: &[usize], target: usize) -> [usize; 2] {
    let records = table.records();
    let mut counts = [0usize; 2];
    for &r in rows {
        counts[usize::from(records[r].labels[target] == 1)] += 1;
    }
    counts
}

fn leaf(counts: [usize; 2]) -> TreeNode {
    // Majority class; tie → the lower (negative) class.
    let class = u8::from(counts[1] > counts[0]);
    TreeNode::Leaf { class, counts }
}

fn grow(
    table: &AttributeTable,
    rows: &[usize],
    target: usize,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode {
    let counts = class_counts(table, rows, target);
    if depth == max_depth || counts[0] == 0 || counts[1] == 0 {
        return leaf(counts);
    }

    let mut best: Option<(f64, usize)> = None;
    for feature in 0..table.n_attributes() {
        if feature == target {
            continue;
        }
        let (gain, n_absent, n_present) = split_gain(table, rows, target, feature);
        if n_absent < min_leaf || n_present < min_leaf {
            continue;
        }
        // Strict > keeps the lowest feature index on ties.
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, feature));
        }
    }
    let Some((_, feature)) = best else {
        return leaf(counts);
    };

    let records = table.records();
    let (absent_rows, present_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| records[r].labels[feature] != 1);
    TreeNode::Split {
        feature,
        absent: Box::new(grow(table, &absent_rows, target, depth + 1, max_depth, min_leaf)),
        present: Box::new(grow(
            table,
            &present_rows,
            target,
            depth + 1,
            max_depth,
            min_leaf,
        )),
    }
}

/// Fit a tree predicting `target` from the remaining attributes.
pub fn fit_tree(
    table: &AttributeTable,
    target: &str,
    max_depth: usize,
    min_leaf: usize,
) -> Result<DecisionTree> {
    if table.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit a tree on an empty table".into(),
        ));
    }
    if min_leaf == 0 {
        return Err(Error::InvalidArgument("min_leaf must be at least 1".into()));
    }
    let target_index = table.attribute_index(target)?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let root = grow(table, &rows, target_index, 0, max_depth, min_leaf);
    Ok(DecisionTree {
        target: target.to_string(),
        target_index,
        feature_names: table.attribute_names().to_vec(),
        max_depth,
        min_leaf,
        root,
    })
}

/// Follow the tree for one record's labels; returns the predicted class
/// and the (feature, branch-present) decisions taken.
pub fn tree_predict(tree: &DecisionTree, labels: &[i8]) -> Result<(u8, Vec<(usize, bool)>)> {
    if labels.len() != tree.feature_names.len() {
        return Err(Error::ShapeMismatch(format!(
            "record has {} labels, tree expects {}",
            labels.len(),
            tree.feature_names.len()
        )));
    }
    let mut node = &tree.root;
    let mut path = Vec::new();
    loop {
        match node {
            TreeNode::Leaf { class, .. } => return Ok((*class, path)),
            TreeNode::Split {
                feature,
                absent,
                present,
            } => {
                let taken = labels[*feature] == 1;
                path.push((*feature, taken));
                node = if taken { present } else { absent };
            }
        }
    }
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn node_depth(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { absent, present, .. } => {
                    1 + node_depth(absent).max(node_depth(present))
                }
            }
        }
        node_depth(&self.root)
    }

    /// Fraction of `table` records whose label the tree reproduces.
    pub fn train_accuracy(&self, table: &AttributeTable) -> Result<f64> {
        let mut correct = 0usize;
        for rec in table.records() {
            let (class, _) = tree_predict(self, &rec.labels)?;
            if class == u8::from(rec.labels[self.target_index] == 1) {
                correct += 1;
            }
        }
        Ok(correct as f64 / table.len() as f64)
    }

    /// Indented rule rendering for `tree.txt`.
    pub fn render(&self) -> String {
        fn walk(node: &TreeNode, names: &[String], indent: usize, out: &mut String) {
            let pad = "  ".repeat(indent);
            match node {
                TreeNode::Leaf { class, counts } => {
                    let label = if *class == 1 { "+1" } else { "-1" };
                    out.push_str(&format!(
                        "{pad}predict {label}  [negative {} / positive {}]\n",
                        counts[0], counts[1]
                    ));
                }
                TreeNode::Split {
                    feature,
                    absent,
                    present,
                } => {
                    out.push_str(&format!("{pad}if {} = -1:\n", names[*feature]));
                    walk(absent, names, indent + 1, out);
                    out.push_str(&format!("{pad}if {} = +1:\n", names[*feature]));
                    walk(present, names, indent + 1, out);
                }
            }
        }
        let mut out = format!(
            "decision tree for '{}' (max depth {}, min leaf {})\n",
            self.target, self.max_depth, self.min_leaf
        );
        walk(&self.root, &self.feature_names, 0, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_attribute_file;

    fn table(text: &str) -> AttributeTable {
        parse_attribute_file(text.as_bytes()).unwrap()
    }

    #[test]
    fn pure_target_yields_single_leaf() {
        let t = table("3\nT A\nx.jpg 1 1\ny.jpg 1 -1\nz.jpg 1 1\n");
        let tree = fit_tree(&t, "T", 5, 1).unwrap();
        assert_eq!(
            tree.root,
            TreeNode::Leaf {
                class: 1,
                counts: [0, 3]
            }
        );
        let (class, path) = tree_predict(&tree, &[1, -1]).unwrap();
        assert_eq!(class, 1);
        assert!(path.is_empty());
    }

    #[test]
    fn copied_feature_gives_depth_one_perfect_tree() {
        let mut text = String::from("8\nT A B\n");
        for i in 0..8 {
            let a = if i % 2 == 0 { 1 } else { -1 };
            let b = if i % 4 < 2 { 1 } else { -1 };
            text.push_str(&format!("img{i}.jpg {a} {a} {b}\n"));
        }
        let t = table(&text);
        let tree = fit_tree(&t, "T", 5, 1).unwrap();
        assert_eq!(tree.depth(), 1);
        match &tree.root {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 1),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.train_accuracy(&t).unwrap(), 1.0);
    }

    #[test]
    fn xor_target_needs_depth_two_and_achieves_it() {
        // T = A xor B over the four label combinations.
        let t = table(
            "4\nT A B\na.jpg -1 -1 -1\nb.jpg 1 -1 1\nc.jpg 1 1 -1\nd.jpg -1 1 1\n",
        );
        // Root gain is zero for both features; the tree must still split.
        let rows: Vec<usize> = (0..4).collect();
        for feature in [1usize, 2] {
            let (gain, _, _) = split_gain(&t, &rows, 0, feature);
            assert!(gain.abs() < 1e-12, "feature {feature} gain {gain}");
        }

        let depth1 = fit_tree(&t, "T", 1, 1).unwrap();
        assert!(depth1.train_accuracy(&t).unwrap() < 1.0);

        let depth2 = fit_tree(&t, "T", 2, 1).unwrap();
        assert_eq!(depth2.depth(), 2);
        assert_eq!(depth2.train_accuracy(&t).unwrap(), 1.0);
        // Tie on zero gain: the root splits on the lowest feature index.
        match &depth2.root {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 1),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn accuracy_is_nondecreasing_in_max_depth() {
        let mut text = String::from("64\nT A B C\n");
        for i in 0..64 {
            let a = if (i * 7) % 3 == 0 { 1 } else { -1 };
            let b = if (i * 5) % 4 < 2 { 1 } else { -1 };
            let c = if (i * 11) % 5 < 2 { 1 } else { -1 };
            let t = if (a == 1) ^ (b == 1 && c == -1) { 1 } else { -1 };
            text.push_str(&format!("img{i}.jpg {t} {a} {b} {c}\n"));
        }
        let t = table(&text);
        let mut prev = 0.0;
        for depth in 0..=4 {
            let tree = fit_tree(&t, "T", depth, 1).unwrap();
            let acc = tree.train_accuracy(&t).unwrap();
            assert!(acc >= prev, "depth {depth}: {acc} < {prev}");
            prev = acc;
        }
    }

    #[test]
    fn child_counts_sum_to_parent_counts() {
        let t = table(
            "6\nT A\na.jpg 1 1\nb.jpg 1 1\nc.jpg -1 1\nd.jpg -1 -1\ne.jpg 1 -1\nf.jpg -1 -1\n",
        );
        let tree = fit_tree(&t, "T", 3, 1).unwrap();
        fn total(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { counts, .. } => counts[0] + counts[1],
                TreeNode::Split { absent, present, .. } => total(absent) + total(present),
            }
        }
        assert_eq!(total(&tree.root), 6);
    }

    #[test]
    fn min_leaf_blocks_thin_splits() {
        // Only one record has A = +1: with min_leaf 2 no split is valid.
        let t = table("4\nT A\na.jpg 1 1\nb.jpg -1 -1\nc.jpg 1 -1\nd.jpg -1 -1\n");
        let tree = fit_tree(&t, "T", 5, 2).unwrap();
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn leaf_tie_predicts_negative_class() {
        let t = table("2\nT A\na.jpg 1 1\nb.jpg -1 1\n");
        let tree = fit_tree(&t, "T", 0, 1).unwrap();
        match &tree.root {
            TreeNode::Leaf { class, counts } => {
                assert_eq!(*counts, [1, 1]);
                assert_eq!(*class, 0);
            }
            other => panic!("expected leaf, got {other:?}"),
        }
    }

    #[test]
    fn predict_on_thousand_records_matches_rule_interpreter() {
        // Oracle: re-interpret the rendered rule set per record by walking
        // labels independently of tree_predict's traversal.
        let mut text = String::from("1000\nT A B C D\n");
        for i in 0..1000 {
            let h = |k: usize| if (i * k + k) % 7 < 3 { 1 } else { -1 };
            let (a, b, c, d) = (h(3), h(5), h(11), h(13));
            let t = if a == 1 || (b == 1 && c == 1) { 1 } else { -1 };
            text.push_str(&format!("img{i}.jpg {t} {a} {b} {c} {d}\n"));
        }
        let t = table(&text);
        let tree = fit_tree(&t, "T", 4, 1).unwrap();

        fn interpret(node: &TreeNode, labels: &[i8]) -> u8 {
            match node {
                TreeNode::Leaf { class, .. } => *class,
                TreeNode::Split {
                    feature,
                    absent,
                    present,
                } => {
                    if labels[*feature] == 1 {
                        interpret(present, labels)
                    } else {
                        interpret(absent, labels)
                    }
                }
            }
        }
        let mut tree_correct = 0usize;
        let mut oracle_correct = 0usize;
        for rec in t.records() {
            let truth = u8::from(rec.labels[0] == 1);
            let (fast, _) = tree_predict(&tree, &rec.labels).unwrap();
            if fast == truth {
                tree_correct += 1;
            }
            if interpret(&tree.root, &rec.labels) == truth {
                oracle_correct += 1;
            }
        }
        assert_eq!(tree_correct, oracle_correct);
        assert_eq!(
            tree.train_accuracy(&t).unwrap(),
            tree_correct as f64 / 1000.0
        );
    }

    #[test]
    fn empty_table_rejected() {
        let t = table("0\nT A\n");
        assert!(fit_tree(&t, "T", 3, 1).is_err());
    }

    #[test]
    fn render_is_indented_rules() {
        let t = table("4\nT A\na.jpg 1 1\nb.jpg 1 1\nc.jpg -1 -1\nd.jpg -1 -1\n");
        let tree = fit_tree(&t, "T", 2, 1).unwrap();
        let text = tree.render();
        assert!(text.contains("if A = +1:"), "{text}");
        assert!(text.contains("predict +1"), "{text}");
    }
}
