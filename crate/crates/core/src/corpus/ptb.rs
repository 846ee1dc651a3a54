//! Penn-Treebank style bracketed constituency trees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("unbalanced brackets at byte {0}")]
    UnbalancedBrackets(usize),
    #[error("empty tree")]
    EmptyTree,
    #[error("tree has {leaves} leaves but the sentence has {tokens} tokens")]
    LeafCountMismatch { leaves: usize, tokens: usize },
    #[error("leaf {index} is `{leaf}` but token is `{token}`")]
    LeafTextMismatch { index: usize, leaf: String, token: String },
    #[error("word `{0}` has no preterminal tag")]
    MissingPreterminal(String),
    #[error("phrase `{0}` has no children")]
    EmptyPhrase(String),
    #[error("unexpected input after the tree at byte {0}")]
    TrailingInput(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Internal constituent with ordered child node ids.
    Phrase(Vec<usize>),
    /// Preterminal (POS) node over one token.
    Word(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstNode {
    pub id: usize,
    pub tag: String,
    pub kind: NodeKind,
}

/// Constituency tree stored as a node arena.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstituencyTree {
    nodes: Vec<ConstNode>,
    root: usize,
    leaves: Vec<String>,
}

const WRAPPER_TAGS: [&str; 3] = ["", "ROOT", "TOP"];

impl ConstituencyTree {
    pub fn nodes(&self) -> &[ConstNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ConstNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_tag(&self) -> &str {
        &self.nodes[self.root].tag
    }

    /// Leaf words in sentence order.
    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn children(&self, id: usize) -> &[usize] {
        match &self.nodes[id].kind {
            NodeKind::Phrase(c) => c,
            NodeKind::Word(_) => &[],
        }
    }

    pub fn is_phrase(&self, id: usize) -> bool {
        matches!(self.nodes[id].kind, NodeKind::Phrase(_))
    }

    /// Inclusive token range covered by a node.
    pub fn span(&self, id: usize) -> (usize, usize) {
        match &self.nodes[id].kind {
            NodeKind::Word(t) => (*t, *t),
            NodeKind::Phrase(children) => {
                let first = self.span(children[0]).0;
                let last = self.span(*children.last().expect("phrase has children")).1;
                (first, last)
            }
        }
    }

    /// Verifies the leaves line up with a token list.
    pub fn check_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(), TreeError> {
        if self.leaves.len() != tokens.len() {
            return Err(TreeError::LeafCountMismatch {
                leaves: self.leaves.len(),
                tokens: tokens.len(),
            });
        }
        for (index, (leaf, token)) in self.leaves.iter().zip(tokens).enumerate() {
            let token = token.as_ref();
            if leaf != token && unescape(leaf) != token {
                return Err(TreeError::LeafTextMismatch {
                    index,
                    leaf: leaf.clone(),
                    token: token.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Renders the tree back to single-line bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root, &mut out);
        out
    }

    fn write_node(&self, id: usize, out: &mut String) {
        let node = &self.nodes[id];
        out.push('(');
        out.push_str(&node.tag);
        match &node.kind {
            NodeKind::Word(t) => {
                out.push(' ');
                out.push_str(&self.leaves[*t]);
            }
            NodeKind::Phrase(children) => {
                for c in children {
                    out.push(' ');
                    self.write_node(*c, out);
                }
            }
        }
        out.push(')');
    }
}

fn unescape(leaf: &str) -> &str {
    match leaf {
        "-LRB-" => "(",
        "-RRB-" => ")",
        "-LSB-" => "[",
        "-RSB-" => "]",
        "-LCB-" => "{",
        "-RCB-" => "}",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Lexeme::Atom(&text[s..i]));
            }
            match ch {
                '(' => out.push(Lexeme::Open(i)),
                ')' => out.push(Lexeme::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Lexeme::Atom(&text[s..]));
    }
    out
}

/// Intermediate parse before wrapper stripping and id assignment.
enum Raw {
    Phrase(String, Vec<Raw>),
    Word(String, String),
}

struct Parser<'a> {
    lexemes: Vec<Lexeme<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Lexeme<'a>> {
        self.lexemes.get(self.pos)
    }

    fn parse_node(&mut self) -> Result<Raw, TreeError> {
        let open_at = match self.peek() {
            Some(Lexeme::Open(at)) => *at,
            Some(Lexeme::Close(at)) => return Err(TreeError::UnbalancedBrackets(*at)),
            Some(Lexeme::Atom(word)) => return Err(TreeError::MissingPreterminal(word.to_string())),
            None => return Err(TreeError::EmptyTree),
        };
        self.pos += 1;
        let tag = match self.peek() {
            Some(Lexeme::Atom(t)) => {
                let t = t.to_string();
                self.pos += 1;
                t
            }
            _ => String::new(),
        };
        let mut children = Vec::new();
        let mut word: Option<String> = None;
        loop {
            match self.peek() {
                None => return Err(TreeError::UnbalancedBrackets(open_at)),
                Some(Lexeme::Close(_)) => {
                    self.pos += 1;
                    break;
                }
                Some(Lexeme::Open(_)) => {
                    if let Some(w) = word {
                        return Err(TreeError::MissingPreterminal(w));
                    }
                    children.push(self.parse_node()?);
                }
                Some(Lexeme::Atom(w)) => {
                    if word.is_some() || !children.is_empty() {
                        return Err(TreeError::MissingPreterminal(w.to_string()));
                    }
                    word = Some(w.to_string());
                    self.pos += 1;
                }
            }
        }
        match word {
            Some(w) => Ok(Raw::Word(tag, w)),
            None if children.is_empty() => {
                if tag.is_empty() {
                    Err(TreeError::EmptyTree)
                } else {
                    Err(TreeError::EmptyPhrase(tag))
                }
            }
            None => Ok(Raw::Phrase(tag, children)),
        }
    }
}

fn strip_wrappers(mut raw: Raw) -> Raw {
    loop {
        match raw {
            Raw::Phrase(tag, mut children)
                if WRAPPER_TAGS.contains(&tag.as_str())
                    && children.len() == 1
                    && matches!(children[0], Raw::Phrase(..)) =>
            {
                raw = children.pop().expect("one child");
            }
            other => return other,
        }
    }
}

fn build(raw: Raw) -> ConstituencyTree {
    fn go(raw: Raw, nodes: &mut Vec<ConstNode>, leaves: &mut Vec<String>) -> usize {
        let id = nodes.len();
        match raw {
            Raw::Word(tag, word) => {
                let token = leaves.len();
                leaves.push(word);
                nodes.push(ConstNode {
                    id,
                    tag,
                    kind: NodeKind::Word(token),
                });
            }
            Raw::Phrase(tag, children) => {
                nodes.push(ConstNode {
                    id,
                    tag,
                    kind: NodeKind::Phrase(Vec::new()),
                });
                let ids: Vec<usize> = children.into_iter().map(|c| go(c, nodes, leaves)).collect();
                nodes[id].kind = NodeKind::Phrase(ids);
            }
        }
        id
    }
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();
    let root = go(raw, &mut nodes, &mut leaves);
    ConstituencyTree { nodes, root, leaves }
}

/// Parses exactly one bracketed tree.
///
/// Unlabelled, `ROOT` and `TOP` wrappers around a single phrase are removed,
/// so the returned root is the first real constituent.
pub fn read_bracketed_tree(text: &str) -> Result<ConstituencyTree, TreeError> {
    let mut parser = Parser { lexemes: lex(text), pos: 0 };
    let raw = parser.parse_node()?;
    match parser.peek() {
        None => Ok(build(strip_wrappers(raw))),
        Some(Lexeme::Close(at)) => Err(TreeError::UnbalancedBrackets(*at)),
        Some(Lexeme::Open(at)) => Err(TreeError::TrailingInput(*at)),
        Some(Lexeme::Atom(w)) => Err(TreeError::MissingPreterminal(w.to_string())),
    }
}

/// Parses a whitespace-separated sequence of bracketed trees.
pub fn read_bracketed_trees(text: &str) -> Result<Vec<ConstituencyTree>, TreeError> {
    let mut parser = Parser { lexemes: lex(text), pos: 0 };
    let mut trees = Vec::new();
    while let Some(lx) = parser.peek() {
        match lx {
            Lexeme::Close(at) => return Err(TreeError::UnbalancedBrackets(*at)),
            Lexeme::Atom(w) => return Err(TreeError::MissingPreterminal(w.to_string())),
            Lexeme::Open(_) => {
                let raw = parser.parse_node()?;
                trees.push(build(strip_wrappers(raw)));
            }
        }
    }
    Ok(trees)
}
