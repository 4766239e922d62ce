//! Binary discourse trees, their bracketed text form, validation and
//! sentence-level subtree extraction.
//!
//! Text grammar (canonical form uses single spaces):
//!
//! ```text
//! tree := "[" int "]" | "(" NUC REL tree tree ")"
//! ```

use std::fmt;

use thiserror::Error;

use crate::relations::{Nuclearity, RelationInventory, RelationLabel};

/// Contiguous 1-based inclusive range of EDU indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EduSpan {
    pub start: usize,
    pub end: usize,
}

impl EduSpan {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(
            1 <= start && start <= end,
            "invalid EDU span ({start}, {end})"
        );
        EduSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &EduSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for EduSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DiscourseTree {
    Leaf(usize),
    Node {
        label: RelationLabel,
        left: Box<DiscourseTree>,
        right: Box<DiscourseTree>,
    },
}

/// An internal node seen during traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InternalNode<'a> {
    pub span: EduSpan,
    /// Last EDU of the left child.
    pub split: usize,
    pub label: &'a RelationLabel,
}

impl DiscourseTree {
    pub fn leaf(index: usize) -> Self {
        DiscourseTree::Leaf(index)
    }

    pub fn node(
        nuclearity: Nuclearity,
        relation: &str,
        left: DiscourseTree,
        right: DiscourseTree,
    ) -> Self {
        DiscourseTree::Node {
            label: RelationLabel::new(relation, nuclearity),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            DiscourseTree::Leaf(_) => 1,
            DiscourseTree::Node { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Leaf indices in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            DiscourseTree::Leaf(i) => out.push(*i),
            DiscourseTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    pub fn first_leaf(&self) -> usize {
        match self {
            DiscourseTree::Leaf(i) => *i,
            DiscourseTree::Node { left, .. } => left.first_leaf(),
        }
    }

    pub fn last_leaf(&self) -> usize {
        match self {
            DiscourseTree::Leaf(i) => *i,
            DiscourseTree::Node { right, .. } => right.last_leaf(),
        }
    }

    /// Span covered by this subtree, assuming contiguous leaves.
    pub fn span(&self) -> EduSpan {
        EduSpan {
            start: self.first_leaf(),
            end: self.last_leaf(),
        }
    }

    /// Internal nodes in preorder (parent, then left subtree, then right).
    pub fn internal_nodes(&self) -> Vec<InternalNode<'_>> {
        let mut out = Vec::new();
        self.collect_internal(&mut out);
        out
    }

    fn collect_internal<'a>(&'a self, out: &mut Vec<InternalNode<'a>>) {
        if let DiscourseTree::Node { label, left, right } = self {
            out.push(InternalNode {
                span: self.span(),
                split: left.last_leaf(),
                label,
            });
            left.collect_internal(out);
            right.collect_internal(out);
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            DiscourseTree::Leaf(_) => 0,
            DiscourseTree::Node { left, right, .. } => {
                1 + left.internal_count() + right.internal_count()
            }
        }
    }

    /// Copy with every leaf index shifted down by `offset`.
    pub fn rebased(&self, offset: usize) -> DiscourseTree {
        match self {
            DiscourseTree::Leaf(i) => DiscourseTree::Leaf(i - offset),
            DiscourseTree::Node { label, left, right } => DiscourseTree::Node {
                label: label.clone(),
                left: Box::new(left.rebased(offset)),
                right: Box::new(right.rebased(offset)),
            },
        }
    }

    /// Right-branching tree over `1..=m` carrying one label everywhere.
    pub fn right_branching(m: usize, label: &RelationLabel) -> DiscourseTree {
        fn build(i: usize, m: usize, label: &RelationLabel) -> DiscourseTree {
            if i == m {
                DiscourseTree::Leaf(i)
            } else {
                DiscourseTree::Node {
                    label: label.clone(),
                    left: Box::new(DiscourseTree::Leaf(i)),
                    right: Box::new(build(i + 1, m, label)),
                }
            }
        }
        build(1, m, label)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DiscourseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscourseTree::Leaf(i) => write!(f, "[{i}]"),
            DiscourseTree::Node { label, left, right } => {
                write!(
                    f,
                    "({} {} {} {})",
                    label.nuclearity, label.relation, left, right
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown relation `{name}` at offset {offset}")]
    UnknownRelation { offset: usize, name: String },
    #[error(
        "leaf indices not contiguous at offset {offset}: expected [{expected}], found [{found}]"
    )]
    NonContiguous {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-binary node at offset {offset}: {children} children")]
    NonBinary { offset: usize, children: usize },
    #[error("EDU ranges do not partition 1..{edus}: {message}")]
    NotAPartition { edus: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Right-branch nodes with more than two children instead of rejecting them.
    pub binarize: bool,
}

struct TreeParser<'a> {
    text: &'a str,
    pos: usize,
    next_leaf: usize,
    inventory: &'a RelationInventory,
    options: ParseOptions,
}

impl<'a> TreeParser<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn syntax(&self, message: impl Into<String>) -> TreeError {
        TreeError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), TreeError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{c}`")))
        }
    }

    fn word(&mut self) -> (usize, &'a str) {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest
            .find(|c: char| c.is_whitespace() || "()[]".contains(c))
            .unwrap_or(rest.len());
        self.pos += len;
        (start, &rest[..len])
    }

    fn tree(&mut self) -> Result<DiscourseTree, TreeError> {
        self.skip_ws();
        let start = self.pos;
        match self.text[self.pos..].chars().next() {
            Some('[') => {
                self.pos += 1;
                let (at, digits) = self.word();
                let index: usize = digits.parse().map_err(|_| TreeError::Syntax {
                    offset: at,
                    message: format!("expected a leaf index, found `{digits}`"),
                })?;
                self.expect(']')?;
                if index != self.next_leaf {
                    return Err(TreeError::NonContiguous {
                        offset: start,
                        expected: self.next_leaf,
                        found: index,
                    });
                }
                self.next_leaf += 1;
                Ok(DiscourseTree::Leaf(index))
            }
            Some('(') => {
                self.pos += 1;
                let (at, nuc) = self.word();
                let nuclearity: Nuclearity = nuc.parse().map_err(|_| TreeError::Syntax {
                    offset: at,
                    message: format!("expected NS, SN or NN, found `{nuc}`"),
                })?;
                let (at, rel) = self.word();
                if rel.is_empty() {
                    return Err(TreeError::Syntax {
                        offset: at,
                        message: "expected a relation name".into(),
                    });
                }
                if !self.inventory.contains(rel) {
                    return Err(TreeError::UnknownRelation {
                        offset: at,
                        name: rel.to_string(),
                    });
                }
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    match self.text[self.pos..].chars().next() {
                        Some(')') => {
                            self.pos += 1;
                            break;
                        }
                        None => return Err(self.syntax("unexpected end of input")),
                        _ => children.push(self.tree()?),
                    }
                }
                let label = RelationLabel::new(rel, nuclearity);
                if children.len() == 2 || (self.options.binarize && children.len() > 2) {
                    Ok(right_branch(label, children))
                } else {
                    Err(TreeError::NonBinary {
                        offset: start,
                        children: children.len(),
                    })
                }
            }
            Some(c) => Err(self.syntax(format!("unexpected `{c}`"))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }
}

fn right_branch(label: RelationLabel, mut children: Vec<DiscourseTree>) -> DiscourseTree {
    let mut acc = children.pop().expect("at least two children");
    while let Some(left) = children.pop() {
        acc = DiscourseTree::Node {
            label: label.clone(),
            left: Box::new(left),
            right: Box::new(acc),
        };
    }
    acc
}

pub fn parse_tree(text: &str, inventory: &RelationInventory) -> Result<DiscourseTree, TreeError> {
    parse_tree_with(text, inventory, ParseOptions::default())
}

pub fn parse_tree_with(
    text: &str,
    inventory: &RelationInventory,
    options: ParseOptions,
) -> Result<DiscourseTree, TreeError> {
    let mut p = TreeParser {
        text,
        pos: 0,
        next_leaf: 1,
        inventory,
        options,
    };
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LeafCountMismatch {
        expected: usize,
        found: usize,
    },
    LeavesOutOfOrder {
        position: usize,
        expected: usize,
        found: usize,
    },
    UnknownLabel {
        label: RelationLabel,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LeafCountMismatch { expected, found } => {
                write!(f, "leaf count mismatch: expected {expected}, found {found}")
            }
            Violation::LeavesOutOfOrder {
                position,
                expected,
                found,
            } => write!(
                f,
                "leaves out of order at position {position}: expected {expected}, found {found}"
            ),
            Violation::UnknownLabel { label } => write!(f, "label {label} not in inventory"),
        }
    }
}

/// Structural check against `m` EDUs: leaves must read `1..=m` left to right.
pub fn validate_tree(tree: &DiscourseTree, m: usize) -> Vec<Violation> {
    let leaves = tree.leaves();
    let mut out = Vec::new();
    if leaves.len() != m {
        out.push(Violation::LeafCountMismatch {
            expected: m,
            found: leaves.len(),
        });
    }
    for (pos, &leaf) in leaves.iter().enumerate() {
        if leaf != pos + 1 {
            out.push(Violation::LeavesOutOfOrder {
                position: pos + 1,
                expected: pos + 1,
                found: leaf,
            });
            break;
        }
    }
    out
}

/// [`validate_tree`] plus inventory membership of every label.
pub fn validate_tree_labels(
    tree: &DiscourseTree,
    m: usize,
    inventory: &RelationInventory,
) -> Vec<Violation> {
    let mut out = validate_tree(tree, m);
    for node in tree.internal_nodes() {
        if !inventory.allows(node.label) {
            out.push(Violation::UnknownLabel {
                label: node.label.clone(),
            });
        }
    }
    out
}

fn find_span(tree: &DiscourseTree, span: EduSpan) -> Option<&DiscourseTree> {
    let here = tree.span();
    if here == span {
        return Some(tree);
    }
    match tree {
        DiscourseTree::Leaf(_) => None,
        DiscourseTree::Node { left, right, .. } => {
            if left.span().contains(&span) {
                find_span(left, span)
            } else if right.span().contains(&span) {
                find_span(right, span)
            } else {
                None
            }
        }
    }
}

/// For each sentence range, the subtree spanning exactly that range with
/// leaves re-based to start at 1, or `None` when no node covers it exactly.
pub fn extract_sentence_trees(
    document: &DiscourseTree,
    ranges: &[EduSpan],
) -> Result<Vec<Option<DiscourseTree>>, TreeError> {
    let m = document.leaf_count();
    let mut expected = 1;
    for r in ranges {
        if r.start != expected {
            return Err(TreeError::NotAPartition {
                edus: m,
                message: format!("range {r} should start at {expected}"),
            });
        }
        expected = r.end + 1;
    }
    if expected != m + 1 {
        return Err(TreeError::NotAPartition {
            edus: m,
            message: format!("ranges end at {}", expected - 1),
        });
    }
    Ok(ranges
        .iter()
        .map(|&r| find_span(document, r).map(|t| t.rebased(r.start - 1)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Nuclearity::*;

    pub(crate) fn condition_tree() -> DiscourseTree {
        DiscourseTree::node(
            NS,
            "Condition",
            DiscourseTree::node(
                SN,
                "Attribution",
                DiscourseTree::leaf(1),
                DiscourseTree::leaf(2),
            ),
            DiscourseTree::node(
                NN,
                "Temporal",
                DiscourseTree::leaf(3),
                DiscourseTree::leaf(4),
            ),
        )
    }

    const CONDITION_TREE: &str = "(NS Condition (SN Attribution [1] [2]) (NN Temporal [3] [4]))";

    #[test]
    fn serialize_examples() {
        assert_eq!(DiscourseTree::leaf(1).to_text(), "[1]");
        assert_eq!(condition_tree().to_text(), CONDITION_TREE);
    }

    #[test]
    fn parse_examples() {
        let inv = RelationInventory::default();
        assert_eq!(parse_tree("[1]", &inv).unwrap(), DiscourseTree::leaf(1));
        assert_eq!(parse_tree(CONDITION_TREE, &inv).unwrap(), condition_tree());
        assert_eq!(
            parse_tree(
                "  (NS  Condition\t(SN Attribution [1] [2])(NN Temporal [3] [4]) ) ",
                &inv
            )
            .unwrap(),
            condition_tree()
        );
    }

    #[test]
    fn parse_errors_are_distinct() {
        let inv = RelationInventory::default();
        assert_eq!(
            parse_tree("(NS Condition [1] [3])", &inv).unwrap_err(),
            TreeError::NonContiguous {
                offset: 18,
                expected: 2,
                found: 3
            }
        );
        assert!(matches!(
            parse_tree("(NS Frobnicate [1] [2])", &inv),
            Err(TreeError::UnknownRelation { offset: 4, .. })
        ));
        assert!(matches!(
            parse_tree("(NN Joint [1] [2] [3])", &inv),
            Err(TreeError::NonBinary {
                offset: 0,
                children: 3
            })
        ));
        assert!(matches!(
            parse_tree("(NN Joint [1])", &inv),
            Err(TreeError::NonBinary { children: 1, .. })
        ));
        for bad in [
            "",
            "[x]",
            "(XX Joint [1] [2])",
            "(NN Joint [1] [2]",
            "[1] [2]",
            "[1",
            "(NN",
        ] {
            assert!(
                matches!(parse_tree(bad, &inv), Err(TreeError::Syntax { .. })),
                "{bad:?}"
            );
        }
        assert!(matches!(
            parse_tree("[2]", &inv),
            Err(TreeError::NonContiguous { offset: 0, .. })
        ));
    }

    #[test]
    fn binarization_is_opt_in_and_right_branching() {
        let inv = RelationInventory::default();
        let t = parse_tree_with(
            "(NN Joint [1] [2] [3])",
            &inv,
            ParseOptions { binarize: true },
        )
        .unwrap();
        assert_eq!(t.to_text(), "(NN Joint [1] (NN Joint [2] [3]))");
    }

    #[test]
    fn validation() {
        assert!(validate_tree(&condition_tree(), 4).is_empty());
        assert_eq!(
            validate_tree(&condition_tree(), 5),
            vec![Violation::LeafCountMismatch {
                expected: 5,
                found: 4
            }]
        );
        let swapped = DiscourseTree::node(
            NS,
            "Condition",
            DiscourseTree::node(
                NN,
                "Temporal",
                DiscourseTree::leaf(3),
                DiscourseTree::leaf(4),
            ),
            DiscourseTree::node(
                SN,
                "Attribution",
                DiscourseTree::leaf(1),
                DiscourseTree::leaf(2),
            ),
        );
        let v = validate_tree(&swapped, 4);
        assert!(matches!(
            v[..],
            [Violation::LeavesOutOfOrder { position: 1, .. }]
        ));
        let odd = DiscourseTree::node(NS, "Nope", DiscourseTree::leaf(1), DiscourseTree::leaf(2));
        assert_eq!(
            validate_tree_labels(&odd, 2, &RelationInventory::default()).len(),
            1
        );
    }

    #[test]
    fn internal_nodes_preorder() {
        let t = condition_tree();
        let spans: Vec<_> = t
            .internal_nodes()
            .iter()
            .map(|n| (n.span.start, n.span.end, n.split))
            .collect();
        assert_eq!(spans, vec![(1, 4, 2), (1, 2, 1), (3, 4, 3)]);
        assert_eq!(t.internal_count(), 3);
    }

    #[test]
    fn extraction_identity_and_split() {
        let t = condition_tree();
        assert_eq!(
            extract_sentence_trees(&t, &[EduSpan::new(1, 4)]).unwrap(),
            vec![Some(t.clone())]
        );
        let parts = extract_sentence_trees(&t, &[EduSpan::new(1, 2), EduSpan::new(3, 4)]).unwrap();
        assert_eq!(
            parts[0].as_ref().unwrap().to_text(),
            "(SN Attribution [1] [2])"
        );
        assert_eq!(
            parts[1].as_ref().unwrap().to_text(),
            "(NN Temporal [1] [2])"
        );
        // no node spans (2, 3)
        let parts = extract_sentence_trees(
            &t,
            &[EduSpan::new(1, 1), EduSpan::new(2, 3), EduSpan::new(4, 4)],
        )
        .unwrap();
        assert_eq!(parts[1], None);
        assert_eq!(parts[0], Some(DiscourseTree::leaf(1)));
    }

    #[test]
    fn extraction_rejects_non_partitions() {
        let t = condition_tree();
        assert!(extract_sentence_trees(&t, &[EduSpan::new(1, 3)]).is_err());
        assert!(extract_sentence_trees(&t, &[EduSpan::new(2, 4)]).is_err());
        assert!(extract_sentence_trees(&t, &[EduSpan::new(1, 2), EduSpan::new(2, 4)]).is_err());
    }
}
