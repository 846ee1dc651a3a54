//! Word-level syntactic graphs built from the two parses.
//!
//! Both graphs have one node per token. The dependency graph labels each
//! node with its inbound relation and links every head to its dependent.
//! The constituency graph labels each node with its root-to-word path of
//! constituent tags and flattens phrase structure into word-word edges:
//!
//! 1. the first and last word of every `NP` are linked (`NP`);
//! 2. a word child of a phrase is linked to the first word of every phrasal
//!    sibling, typed by the parent's tag;
//! 3. the first and last word of every clause are linked;
//! 4. edges spanning more than `max_distance` positions are dropped.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConstituencyTree, NodeKind, ParsedSentence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown graph format `{0}` (expected json or dot)")]
    UnknownFormat(String),
    #[error("unknown const-graph variant `{0}` (expected paper, v1, v2 or v3)")]
    UnknownVariant(String),
    #[error("unknown view `{0}` (expected const, dep or both)")]
    UnknownView(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Const,
    Dep,
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            View::Const => "const",
            View::Dep => "dep",
        })
    }
}

impl FromStr for View {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "const" => Ok(View::Const),
            "dep" => Ok(View::Dep),
            other => Err(GraphError::UnknownView(other.to_string())),
        }
    }
}

/// Alternative const-graph constructions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstVariant {
    #[default]
    Paper,
    /// Node label is the last tag of the path only.
    V1,
    /// Word-sibling edges target the sibling phrase's last word.
    V2,
    /// Distance pruning is skipped.
    V3,
}

impl fmt::Display for ConstVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ConstVariant::Paper => "paper",
            ConstVariant::V1 => "v1",
            ConstVariant::V2 => "v2",
            ConstVariant::V3 => "v3",
        })
    }
}

impl FromStr for ConstVariant {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(ConstVariant::Paper),
            "v1" => Ok(ConstVariant::V1),
            "v2" => Ok(ConstVariant::V2),
            "v3" => Ok(ConstVariant::V3),
            other => Err(GraphError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlattenConfig {
    pub max_distance: usize,
    pub variant: ConstVariant,
    /// Constituent tags treated as clauses by rule 3.
    pub clause_tags: Vec<String>,
    /// Preterminal tags whose words never take part in rule 2.
    pub punctuation_tags: Vec<String>,
}

impl Default for FlattenConfig {
    fn default() -> Self {
        FlattenConfig {
            max_distance: 8,
            variant: ConstVariant::Paper,
            clause_tags: ["S", "SBAR", "SINV", "SQ"].map(String::from).to_vec(),
            punctuation_tags: [".", ",", ":", "``", "''", "-LRB-", "-RRB-", "HYPH", "NFP"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl FlattenConfig {
    pub fn with_variant(variant: ConstVariant) -> Self {
        FlattenConfig {
            variant,
            ..FlattenConfig::default()
        }
    }
}

/// Undirected typed edge with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

impl Edge {
    pub fn new(a: usize, b: usize, kind: impl Into<String>) -> Self {
        Edge {
            i: a.min(b),
            j: a.max(b),
            kind: kind.into(),
        }
    }

    pub fn distance(&self) -> usize {
        self.j - self.i
    }
}

/// One view of a sentence: shared word nodes, view-specific labels and edges.
///
/// Dependency nodes carry a single relation label; constituency nodes carry
/// their tag path. The adjacency matrix is symmetric and includes self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntacticGraph {
    view: View,
    labels: Vec<Vec<String>>,
    edges: Vec<Edge>,
    adjacency: Vec<bool>,
}

impl SyntacticGraph {
    fn new(view: View, labels: Vec<Vec<String>>, edges: BTreeSet<Edge>) -> Self {
        let n = labels.len();
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for e in &edges {
            adjacency[e.i * n + e.j] = true;
            adjacency[e.j * n + e.i] = true;
        }
        SyntacticGraph {
            view,
            labels,
            edges: edges.into_iter().collect(),
            adjacency,
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, node: usize) -> &[String] {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    /// Edges sorted by `(i, j, type)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n() + j]
    }

    /// Row-major `n×n` adjacency, self-loops included.
    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }
}

/// Dependency graph: node label = inbound relation (`ROOT` for the root).
pub fn build_dep_graph(s: &ParsedSentence) -> SyntacticGraph {
    let rows = s.dep_rows().rows();
    let mut labels = Vec::with_capacity(rows.len());
    let mut edges = BTreeSet::new();
    for (dep, row) in rows.iter().enumerate() {
        match row.head {
            None => labels.push(vec!["ROOT".to_string()]),
            Some(head) => {
                labels.push(vec![row.deprel.clone()]);
                edges.insert(Edge::new(head, dep, row.deprel.clone()));
            }
        }
    }
    SyntacticGraph::new(View::Dep, labels, edges)
}

/// Constituent tags from the root down to each word, preterminals excluded.
pub fn build_const_paths(tree: &ConstituencyTree) -> Vec<Vec<String>> {
    fn walk(tree: &ConstituencyTree, id: usize, stack: &mut Vec<String>, out: &mut [Vec<String>]) {
        let node = tree.node(id);
        match &node.kind {
            NodeKind::Word(t) => out[*t] = stack.clone(),
            NodeKind::Phrase(children) => {
                stack.push(node.tag.clone());
                for c in children {
                    walk(tree, *c, stack, out);
                }
                stack.pop();
            }
        }
    }
    let mut out = vec![Vec::new(); tree.leaf_count()];
    walk(tree, tree.root(), &mut Vec::new(), &mut out);
    out
}

/// Strips function tags and indices (`NP-SBJ-1` → `NP`).
fn base_tag(tag: &str) -> &str {
    if tag.starts_with('-') {
        return tag;
    }
    tag.split(['-', '=']).next().unwrap_or(tag)
}

/// Flattens phrase structure into word-level typed edges.
pub fn flatten_const_relations(tree: &ConstituencyTree, cfg: &FlattenConfig) -> BTreeSet<Edge> {
    let mut edges = BTreeSet::new();
    for node in tree.nodes() {
        let NodeKind::Phrase(children) = &node.kind else { continue };
        let (first, last) = tree.span(node.id);
        let tag = base_tag(&node.tag);

        if tag == "NP" && last > first {
            edges.insert(Edge::new(first, last, "NP"));
        }

        for &word_child in children {
            let child = tree.node(word_child);
            let NodeKind::Word(word) = child.kind else { continue };
            if cfg.punctuation_tags.iter().any(|p| p == &child.tag) {
                continue;
            }
            for &sibling in children {
                if !tree.is_phrase(sibling) {
                    continue;
                }
                let (s_first, s_last) = tree.span(sibling);
                let target = if cfg.variant == ConstVariant::V2 { s_last } else { s_first };
                if target != word {
                    edges.insert(Edge::new(word, target, node.tag.clone()));
                }
            }
        }

        if last > first && cfg.clause_tags.iter().any(|c| c == tag) {
            edges.insert(Edge::new(first, last, node.tag.clone()));
        }
    }
    if cfg.variant != ConstVariant::V3 {
        edges.retain(|e| e.distance() <= cfg.max_distance);
    }
    edges
}

/// Constituency graph: path labels (or last tags under `v1`) plus flattened edges.
pub fn build_const_graph(s: &ParsedSentence, cfg: &FlattenConfig) -> SyntacticGraph {
    let tree = s.const_tree();
    let mut labels = build_const_paths(tree);
    if cfg.variant == ConstVariant::V1 {
        for path in &mut labels {
            if let Some(last) = path.pop() {
                *path = vec![last];
            }
        }
    }
    SyntacticGraph::new(View::Const, labels, flatten_const_relations(tree, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Json => "json",
            GraphFormat::Dot => "dot",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(GraphError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum LabelOut<'a> {
    One(&'a str),
    Path(&'a [String]),
}

#[derive(Serialize)]
struct NodeOut<'a> {
    i: usize,
    label: LabelOut<'a>,
}

#[derive(Serialize)]
struct GraphOut<'a> {
    view: View,
    nodes: Vec<NodeOut<'a>>,
    edges: &'a [Edge],
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Serializes a graph. `words`, when given, are shown in DOT node labels.
pub fn export_graph(g: &SyntacticGraph, format: &str, words: Option<&[&str]>) -> Result<String, GraphError> {
    let format: GraphFormat = format.parse()?;
    Ok(render_graph(g, format, words))
}

pub fn render_graph(g: &SyntacticGraph, format: GraphFormat, words: Option<&[&str]>) -> String {
    match format {
        GraphFormat::Json => {
            let nodes = g
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| NodeOut {
                    i,
                    label: match g.view {
                        View::Dep => LabelOut::One(l.first().map_or("", String::as_str)),
                        View::Const => LabelOut::Path(l),
                    },
                })
                .collect();
            let out = GraphOut {
                view: g.view,
                nodes,
                edges: &g.edges,
            };
            serde_json::to_string(&out).expect("graph serializes")
        }
        GraphFormat::Dot => {
            let mut out = String::new();
            let _ = writeln!(out, "graph {} {{", g.view);
            for (i, label) in g.labels.iter().enumerate() {
                let label = label.join("-");
                let text = match words.and_then(|w| w.get(i)) {
                    Some(w) => format!("{i}: {}\\n{}", dot_escape(w), dot_escape(&label)),
                    None => format!("{i}\\n{}", dot_escape(&label)),
                };
                let _ = writeln!(out, "  n{i} [label=\"{text}\"];");
            }
            for e in &g.edges {
                let _ = writeln!(out, "  n{} -- n{} [label=\"{}\"];", e.i, e.j, dot_escape(&e.kind));
            }
            out.push_str("}\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_sentence_json, read_bracketed_tree};

    fn s(tokens: &[&str], ptb: &str, deps: &[(i64, &str)]) -> ParsedSentence {
        let rec = serde_json::json!({
            "tokens": tokens,
            "const_ptb": ptb,
            "dep_conllu": deps.iter().map(|(h, r)| serde_json::json!([h, r])).collect::<Vec<_>>(),
            "verbs": [],
        });
        parse_sentence_json(&rec.to_string(), "t").unwrap()
    }

    #[test]
    fn single_token_dep_graph() {
        let g = build_dep_graph(&s(&["x"], "(S (NN x))", &[(-1, "root")]));
        assert_eq!(g.n(), 1);
        assert_eq!(g.label(0), &["ROOT".to_string()]);
        assert!(g.edges().is_empty());
        assert!(g.adjacent(0, 0));
        assert_eq!(
            export_graph(&g, "json", None).unwrap(),
            r#"{"view":"dep","nodes":[{"i":0,"label":"ROOT"}],"edges":[]}"#
        );
    }

    #[test]
    fn toy_dep_graph() {
        let g = build_dep_graph(&s(
            &["cat", "likes", "toys"],
            "(S (NP (NN cat)) (VP (VBZ likes) (NP (NNS toys))))",
            &[(1, "nsubj"), (-1, "ROOT"), (1, "dobj")],
        ));
        let labels: Vec<&str> = g.labels().iter().map(|l| l[0].as_str()).collect();
        assert_eq!(labels, vec!["nsubj", "ROOT", "dobj"]);
        assert_eq!(g.edges(), &[Edge::new(0, 1, "nsubj"), Edge::new(1, 2, "dobj")]);
        assert!(g.adjacent(2, 1) && !g.adjacent(0, 2));
    }

    #[test]
    fn single_leaf_path() {
        let t = read_bracketed_tree("(S (NN x))").unwrap();
        assert_eq!(build_const_paths(&t), vec![vec!["S".to_string()]]);
    }

    #[test]
    fn single_token_np_has_no_edge() {
        let t = read_bracketed_tree("(S (NP (NN it)) (VP (VBZ works)))").unwrap();
        let edges = flatten_const_relations(&t, &FlattenConfig::default());
        assert!(edges.iter().all(|e| e.kind != "NP"));
    }

    #[test]
    fn function_tags_are_ignored_for_rules() {
        let t = read_bracketed_tree("(S-TPC (NP-SBJ (DT the) (NN cat)) (VP (VBZ sits)))").unwrap();
        let edges = flatten_const_relations(&t, &FlattenConfig::default());
        assert!(edges.contains(&Edge::new(0, 1, "NP")));
        assert!(edges.contains(&Edge::new(0, 2, "S-TPC")));
    }

    #[test]
    fn format_errors() {
        let g = build_dep_graph(&s(&["x"], "(S (NN x))", &[(-1, "ROOT")]));
        assert_eq!(export_graph(&g, "xml", None), Err(GraphError::UnknownFormat("xml".into())));
        assert!("v4".parse::<ConstVariant>().is_err());
    }

    #[test]
    fn dot_escapes_quotes() {
        let g = build_dep_graph(&s(&["\"x\""], "(S (NN \"x\"))", &[(-1, "ROOT")]));
        let dot = export_graph(&g, "dot", Some(&["\"x\""])).unwrap();
        assert!(dot.contains("n0 [label=\"0: \\\"x\\\"\\nROOT\"];"), "{dot}");
    }
}
