//! Bracketed parse trees, corpora, and constituent extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("unbalanced brackets: input ended at offset {offset} with {open} open node(s)")]
    UnexpectedEnd { offset: usize, open: usize },
    #[error("unbalanced brackets: unmatched ')' at offset {offset}")]
    UnmatchedClose { offset: usize },
    #[error("empty node at offset {offset}")]
    EmptyNode { offset: usize },
    #[error("node without a label at offset {offset}")]
    MissingLabel { offset: usize },
    #[error("token outside of any node at offset {offset}")]
    StrayToken { offset: usize },
    #[error("word token must be the only child of its node (offset {offset})")]
    MixedChildren { offset: usize },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<TreebankError>,
    },
    #[error("line {line}: expected exactly one tree, found {found}")]
    TreeCount { line: usize, found: usize },
    #[error("invalid symbol {0:?}: labels and words must be non-empty and free of whitespace and brackets")]
    BadSymbol(String),
    #[error("invalid tree: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// A labeled ordered tree. Words live in `Leaf` nodes, which only ever
/// occur as the single child of a preterminal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf(String),
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn preterminal(tag: impl Into<String>, word: impl Into<String>) -> Tree {
        Tree::Node {
            label: tag.into(),
            children: vec![Tree::Leaf(word.into())],
        }
    }

    /// Node label, or the token for a leaf.
    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf(word) => word,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            Tree::Leaf(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self, Tree::Node { children, .. } if children.len() == 1 && children[0].is_leaf())
    }

    /// Left-to-right leaf tokens.
    pub fn words(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words(&self, out: &mut Vec<String>) {
        match self {
            Tree::Leaf(w) => out.push(w.clone()),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_words(out)),
        }
    }

    /// Preterminal labels in yield order.
    pub fn tags(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_tags(&mut out);
        out
    }

    fn collect_tags(&self, out: &mut Vec<String>) {
        if self.is_preterminal() {
            out.push(self.label().to_string());
        } else {
            self.children().iter().for_each(|c| c.collect_tags(out));
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of labeled (non-leaf) nodes.
    pub fn node_count(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(Tree::node_count).sum::<usize>(),
        }
    }

    /// Checks the structural invariants: the root is a node, every node
    /// has children, leaves are only children, and symbols are well formed.
    pub fn validate(&self) -> Result<(), TreebankError> {
        match self {
            Tree::Leaf(_) => Err(TreebankError::Invalid("root must be a labeled node".into())),
            Tree::Node { .. } => self.validate_inner(),
        }
    }

    fn validate_inner(&self) -> Result<(), TreebankError> {
        match self {
            Tree::Leaf(w) => check_symbol(w),
            Tree::Node { label, children } => {
                check_symbol(label)?;
                if children.is_empty() {
                    return Err(TreebankError::Invalid(format!("node {label} has no children")));
                }
                if children.len() > 1 && children.iter().any(Tree::is_leaf) {
                    return Err(TreebankError::Invalid(format!(
                        "node {label} mixes a word with other children"
                    )));
                }
                children.iter().try_for_each(Tree::validate_inner)
            }
        }
    }

    /// Single-line bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out);
        out
    }

    fn write_bracketed(&self, out: &mut String) {
        match self {
            Tree::Leaf(w) => out.push_str(w),
            Tree::Node { label, children } => {
                out.push('(');
                out.push_str(label);
                for c in children {
                    out.push(' ');
                    c.write_bracketed(out);
                }
                out.push(')');
            }
        }
    }

    /// Constituents counted under `policy`.
    pub fn constituents(&self, policy: &ScoringPolicy) -> BTreeSet<Constituent> {
        self.constituent_list(policy).into_iter().collect()
    }

    /// Counted constituents in pre-order (outer nodes first), duplicates kept.
    pub fn constituent_list(&self, policy: &ScoringPolicy) -> Vec<Constituent> {
        let mut slots = Vec::new();
        let mut cursor = 0;
        self.collect_constituents(policy, true, &mut cursor, &mut slots);
        slots.into_iter().flatten().collect()
    }

    // Returns the number of retained (non-punctuation) words under this node.
    fn collect_constituents(
        &self,
        policy: &ScoringPolicy,
        is_root: bool,
        cursor: &mut usize,
        out: &mut Vec<Option<Constituent>>,
    ) -> usize {
        match self {
            Tree::Leaf(_) => {
                *cursor += 1;
                1
            }
            Tree::Node { label, children } => {
                if self.is_preterminal() && policy.punctuation.contains(label) {
                    return 0;
                }
                let start = *cursor;
                let slot = out.len();
                out.push(None);
                let covered: usize = children
                    .iter()
                    .map(|c| c.collect_constituents(policy, false, cursor, out))
                    .sum();
                if covered == 0 {
                    return 0;
                }
                let excluded_root = is_root && policy.root_label.as_deref() == Some(label.as_str());
                let excluded_pt = self.is_preterminal() && !policy.count_preterminals;
                if !excluded_root && !excluded_pt {
                    out[slot] = Some(Constituent::new(label.clone(), start, start + covered));
                }
                covered
            }
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

fn check_symbol(s: &str) -> Result<(), TreebankError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        Err(TreebankError::BadSymbol(s.to_string()))
    } else {
        Ok(())
    }
}

/// A labeled half-open word span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Constituent {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Constituent {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    /// Overlapping without nesting.
    pub fn crosses(&self, other: &Constituent) -> bool {
        spans_cross(self.span(), other.span())
    }
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},[{},{}))", self.label, self.start, self.end)
    }
}

pub fn spans_cross(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 < b.0 && b.0 < a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 < b.1 && b.1 < a.1)
}

/// Which nodes count as constituents.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScoringPolicy {
    /// The tree root is excluded when it carries this label.
    pub root_label: Option<String>,
    pub count_preterminals: bool,
    /// Preterminal labels whose words are deleted before span computation.
    pub punctuation: BTreeSet<String>,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        ScoringPolicy {
            root_label: Some("TOP".to_string()),
            count_preterminals: false,
            punctuation: BTreeSet::new(),
        }
    }
}

impl ScoringPolicy {
    pub fn count_everything() -> Self {
        ScoringPolicy {
            root_label: None,
            count_preterminals: true,
            punctuation: BTreeSet::new(),
        }
    }

    /// Every node except a root carrying the default root label.
    pub fn everything_but_root() -> Self {
        ScoringPolicy {
            count_preterminals: true,
            ..ScoringPolicy::default()
        }
    }

    pub fn root_label_or_default(&self) -> &str {
        self.root_label.as_deref().unwrap_or("TOP")
    }
}

/// Parses zero or more bracketed trees.
pub fn parse_bracketed(text: &str) -> Result<Vec<Tree>, TreebankError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let mut trees = Vec::new();
    while pos < tokens.len() {
        match &tokens[pos] {
            Token::Open(_) => trees.push(parse_node(&tokens, &mut pos, text_end(text))?),
            Token::Close(off) => return Err(TreebankError::UnmatchedClose { offset: *off }),
            Token::Symbol(_, off) => return Err(TreebankError::StrayToken { offset: *off }),
        }
    }
    Ok(trees)
}

/// Serializes a tree to its single-line bracketed form.
pub fn serialize(tree: &Tree) -> String {
    tree.to_bracketed()
}

// Offsets are 1-based character positions; the end of input sits one past
// the last character.
#[derive(Debug)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Symbol(&'a str, usize),
}

fn text_end(text: &str) -> usize {
    text.chars().count() + 1
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut sym_start: Option<(usize, usize)> = None;
    let mut chars = text.char_indices().enumerate().peekable();
    while let Some((ci, (bi, ch))) = chars.next() {
        let offset = ci + 1;
        let is_delim = ch.is_whitespace() || ch == '(' || ch == ')';
        if is_delim {
            if let Some((sb, so)) = sym_start.take() {
                tokens.push(Token::Symbol(&text[sb..bi], so));
            }
            if ch == '(' {
                tokens.push(Token::Open(offset));
            } else if ch == ')' {
                tokens.push(Token::Close(offset));
            }
        } else if sym_start.is_none() {
            sym_start = Some((bi, offset));
        }
        if chars.peek().is_none() {
            if let Some((sb, so)) = sym_start.take() {
                tokens.push(Token::Symbol(&text[sb..], so));
            }
        }
    }
    tokens
}

fn parse_node(tokens: &[Token<'_>], pos: &mut usize, end: usize) -> Result<Tree, TreebankError> {
    // Iterative to survive deeply nested input.
    struct Frame {
        label: String,
        children: Vec<Tree>,
        offset: usize,
        has_leaf: bool,
    }
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        let Some(tok) = tokens.get(*pos) else {
            return Err(TreebankError::UnexpectedEnd {
                offset: end,
                open: stack.len(),
            });
        };
        *pos += 1;
        match tok {
            Token::Open(off) => {
                let label = match tokens.get(*pos) {
                    Some(Token::Symbol(s, _)) => {
                        *pos += 1;
                        s.to_string()
                    }
                    Some(Token::Close(_)) => return Err(TreebankError::EmptyNode { offset: *off }),
                    Some(Token::Open(_)) => return Err(TreebankError::MissingLabel { offset: *off }),
                    None => {
                        return Err(TreebankError::UnexpectedEnd {
                            offset: end,
                            open: stack.len() + 1,
                        })
                    }
                };
                if let Some(parent) = stack.last() {
                    if parent.has_leaf {
                        return Err(TreebankError::MixedChildren { offset: *off });
                    }
                }
                stack.push(Frame {
                    label,
                    children: Vec::new(),
                    offset: *off,
                    has_leaf: false,
                });
            }
            Token::Symbol(word, off) => {
                let frame = stack.last_mut().ok_or(TreebankError::StrayToken { offset: *off })?;
                if !frame.children.is_empty() {
                    return Err(TreebankError::MixedChildren { offset: *off });
                }
                frame.children.push(Tree::Leaf(word.to_string()));
                frame.has_leaf = true;
            }
            Token::Close(off) => {
                let frame = stack.pop().ok_or(TreebankError::UnmatchedClose { offset: *off })?;
                if frame.children.is_empty() {
                    return Err(TreebankError::EmptyNode {
                        offset: frame.offset,
                    });
                }
                let node = Tree::Node {
                    label: frame.label,
                    children: frame.children,
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => return Ok(node),
                }
            }
        }
    }
}

/// One corpus entry; `sentence` is always the gold tree's yield.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sentence: Vec<String>,
    pub gold: Tree,
}

impl Entry {
    pub fn new(gold: Tree) -> Result<Self, TreebankError> {
        gold.validate()?;
        Ok(Entry {
            sentence: gold.words(),
            gold,
        })
    }
}

/// An ordered multiset of (sentence, gold tree) pairs. Multiplicity is
/// represented by repeated entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub entries: Vec<Entry>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    pub fn from_trees(trees: impl IntoIterator<Item = Tree>) -> Result<Self, TreebankError> {
        let entries = trees.into_iter().map(Entry::new).collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.entries.iter().map(|e| &e.gold)
    }

    pub fn push(&mut self, entry: Entry) {
        self.entries.push(entry);
    }

    /// Parses one tree per non-blank line.
    pub fn parse_lines(text: &str) -> Result<Self, TreebankError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let wrap = |e: TreebankError| TreebankError::Line {
                line: line_no,
                source: Box::new(e),
            };
            let mut trees = parse_bracketed(line).map_err(wrap)?;
            if trees.len() != 1 {
                return Err(TreebankError::TreeCount {
                    line: line_no,
                    found: trees.len(),
                });
            }
            entries.push(Entry::new(trees.pop().unwrap()).map_err(wrap)?);
        }
        Ok(Corpus { entries })
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.gold.to_bracketed());
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TreebankError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TreebankError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Corpus::parse_lines(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TreebankError> {
        let path = path.as_ref();
        fs::write(path, self.to_lines()).map_err(|e| TreebankError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// SHA-256 over the serialized corpus, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_lines().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl FromIterator<Entry> for Corpus {
    fn from_iter<I: IntoIterator<Item = Entry>>(iter: I) -> Self {
        Corpus {
            entries: iter.into_iter().collect(),
        }
    }
}
