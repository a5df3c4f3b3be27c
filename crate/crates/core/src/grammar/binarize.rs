//! Grammar form of a tree: unary chains collapsed into composite labels
//! (`A+B`), then right-binarized with intermediate labels that carry the
//! parent and the remaining siblings (`@X|B|C`).

use super::GrammarError;
use crate::treebank::Tree;

pub const UNARY_JOIN: char = '+';
pub const INTERMEDIATE_PREFIX: char = '@';
pub const SIBLING_SEP: char = '|';

pub fn is_intermediate(label: &str) -> bool {
    label.starts_with(INTERMEDIATE_PREFIX)
}

/// Labels the grammar form would misread.
pub fn check_label(label: &str) -> Result<(), GrammarError> {
    if is_intermediate(label) || label.contains(UNARY_JOIN) || label.contains(SIBLING_SEP) {
        Err(GrammarError::ReservedLabel(label.to_string()))
    } else {
        Ok(())
    }
}

pub fn check_tree_labels(tree: &Tree) -> Result<(), GrammarError> {
    match tree {
        Tree::Leaf(_) => Ok(()),
        Tree::Node { label, children } => {
            check_label(label)?;
            children.iter().try_for_each(check_tree_labels)
        }
    }
}

/// Merges every chain of single-child internal nodes into one node.
pub fn collapse_unaries(tree: &Tree) -> Tree {
    match tree {
        Tree::Leaf(_) => tree.clone(),
        Tree::Node { label, children } => {
            let mut label = label.clone();
            let mut children = children;
            while children.len() == 1 && !children[0].is_leaf() {
                let Tree::Node { label: inner, children: grand } = &children[0] else {
                    unreachable!()
                };
                label.push(UNARY_JOIN);
                label.push_str(inner);
                children = grand;
            }
            Tree::Node {
                label,
                children: children.iter().map(collapse_unaries).collect(),
            }
        }
    }
}

/// Splits composite labels back into unary chains.
pub fn expand_unaries(tree: &Tree) -> Tree {
    match tree {
        Tree::Leaf(_) => tree.clone(),
        Tree::Node { label, children } => {
            let children: Vec<Tree> = children.iter().map(expand_unaries).collect();
            let mut parts: Vec<&str> = label.split(UNARY_JOIN).collect();
            let innermost = parts.pop().unwrap();
            let mut node = Tree::node(innermost, children);
            while let Some(outer) = parts.pop() {
                node = Tree::node(outer, vec![node]);
            }
            node
        }
    }
}

/// Right binarization of nodes with more than two children.
pub fn right_binarize(tree: &Tree) -> Tree {
    match tree {
        Tree::Leaf(_) => tree.clone(),
        Tree::Node { label, children } => {
            let children: Vec<Tree> = children.iter().map(right_binarize).collect();
            Tree::node(label.clone(), binarize_children(label, children))
        }
    }
}

fn binarize_children(parent: &str, mut children: Vec<Tree>) -> Vec<Tree> {
    if children.len() <= 2 {
        return children;
    }
    let rest = children.split_off(1);
    let mut label = String::new();
    label.push(INTERMEDIATE_PREFIX);
    label.push_str(parent);
    for c in &rest {
        label.push(SIBLING_SEP);
        label.push_str(c.label());
    }
    let inner = Tree::node(label, binarize_children(parent, rest));
    children.push(inner);
    children
}

/// Undoes [`right_binarize`]. Intermediate nodes at the root, or under a
/// parent other than the one their label names, are rejected.
pub fn unbinarize(tree: &Tree) -> Result<Tree, GrammarError> {
    if is_intermediate(tree.label()) && !tree.is_leaf() {
        return Err(GrammarError::DanglingIntermediate(tree.label().to_string()));
    }
    unbinarize_node(tree)
}

fn unbinarize_node(tree: &Tree) -> Result<Tree, GrammarError> {
    match tree {
        Tree::Leaf(_) => Ok(tree.clone()),
        Tree::Node { label, children } => {
            let mut out = Vec::with_capacity(children.len());
            splice_children(label, children, &mut out)?;
            Ok(Tree::node(label.clone(), out))
        }
    }
}

fn splice_children(parent: &str, children: &[Tree], out: &mut Vec<Tree>) -> Result<(), GrammarError> {
    for child in children {
        match child {
            Tree::Node { label, children: grand } if is_intermediate(label) => {
                if intermediate_parent(label) != parent {
                    return Err(GrammarError::DanglingIntermediate(label.clone()));
                }
                splice_children(parent, grand, out)?;
            }
            _ => out.push(unbinarize_node(child)?),
        }
    }
    Ok(())
}

fn intermediate_parent(label: &str) -> &str {
    let body = &label[INTERMEDIATE_PREFIX.len_utf8()..];
    body.split(SIBLING_SEP).next().unwrap_or("")
}

/// Tree in grammar form: unaries collapsed, then right-binarized.
pub fn binarize(tree: &Tree) -> Tree {
    right_binarize(&collapse_unaries(tree))
}

/// Inverse of [`binarize`].
pub fn debinarize(tree: &Tree) -> Result<Tree, GrammarError> {
    Ok(expand_unaries(&unbinarize(tree)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn t(s: &str) -> Tree {
        parse_bracketed(s).unwrap().remove(0)
    }

    #[test]
    fn ternary_node_gets_one_intermediate() {
        let tree = t("(NP (D a) (A b) (N c))");
        let bin = binarize(&tree);
        assert_eq!(bin.to_bracketed(), "(NP (D a) (@NP|A|N (A b) (N c)))");
        assert_eq!(debinarize(&bin).unwrap(), tree);
    }

    #[test]
    fn binary_tree_is_unchanged() {
        let tree = t("(S (NP (D a) (N b)) (VP (V c) (N d)))");
        assert_eq!(binarize(&tree), tree);
    }

    #[test]
    fn unary_chains_collapse_and_expand() {
        let tree = t("(TOP (S (NP (NNS Fees)) (VP (V go))))");
        let bin = binarize(&tree);
        assert_eq!(bin.to_bracketed(), "(TOP+S (NP+NNS Fees) (VP+V go))");
        assert_eq!(debinarize(&bin).unwrap(), tree);
    }

    #[test]
    fn wide_node_round_trips() {
        let tree = t("(X (A a) (B b) (C c) (D d) (E e))");
        let bin = binarize(&tree);
        assert!(bin.to_bracketed().contains("@X|C|D|E"));
        assert_eq!(debinarize(&bin).unwrap(), tree);
    }

    #[test]
    fn dangling_intermediates_are_errors() {
        assert!(matches!(
            debinarize(&t("(@X|B (A a) (B b))")),
            Err(GrammarError::DanglingIntermediate(_))
        ));
        assert!(matches!(
            debinarize(&t("(Y (A a) (@X|B (B b) (C c)))")),
            Err(GrammarError::DanglingIntermediate(_))
        ));
    }

    #[test]
    fn reserved_labels() {
        assert!(check_label("NP").is_ok());
        assert!(check_label("PRP$").is_ok());
        assert!(check_label("A+B").is_err());
        assert!(check_label("@X").is_err());
        assert!(check_label("X|Y").is_err());
    }
}
