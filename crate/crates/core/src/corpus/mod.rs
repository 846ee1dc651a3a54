//! Parsed-sentence corpora: readers, validation and per-verb instances.
//!
//! A corpus line carries the tokens, a bracketed constituency parse, the
//! dependency rows, the candidate relation verbs and the gold tuples:
//!
//! ```json
//! {"tokens": ["cat", "likes", "toys"],
//!  "const_ptb": "(S (NP (NN cat)) (VP (VBZ likes) (NP (NNS toys))))",
//!  "dep_conllu": [[1, "nsubj"], [-1, "ROOT"], [1, "dobj"]],
//!  "verbs": [1],
//!  "tuples": [{"verb": 1, "spans": {"ARG0": [0, 0], "REL": [1, 1], "ARG1": [2, 2]}}]}
//! ```

mod conllu;
mod ptb;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tuple::{encode_bio, Role, Span, Tag, TagSet, Tuple};

pub use conllu::{
    read_conllu, read_conllu_document, read_conllu_sentence, ConlluError, ConlluSentence, DepRow, DependencyRows,
};
pub use ptb::{read_bracketed_tree, read_bracketed_trees, ConstNode, ConstituencyTree, NodeKind, TreeError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}schema violation: {message}", line_prefix(*.line))]
    SchemaViolation { line: Option<usize>, message: String },
    #[error("{}alignment error: {message}", line_prefix(*.line))]
    AlignmentError { line: Option<usize>, message: String },
    #[error("sentence {sentence}: gold spans {first} and {second} of verb {verb} overlap")]
    OverlappingGoldSpans {
        sentence: String,
        verb: usize,
        first: Role,
        second: Role,
    },
    #[error("sentence {sentence}: role {role} exceeds the tag set")]
    RoleOutOfRange { sentence: String, role: Role },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl CorpusError {
    fn schema(message: impl Into<String>) -> Self {
        CorpusError::SchemaViolation {
            line: None,
            message: message.into(),
        }
    }

    fn alignment(message: impl Into<String>) -> Self {
        CorpusError::AlignmentError {
            line: None,
            message: message.into(),
        }
    }

    /// Attaches a 1-based line number to schema and alignment errors.
    pub fn at_line(self, at: usize) -> Self {
        match self {
            CorpusError::SchemaViolation { message, .. } => CorpusError::SchemaViolation {
                line: Some(at),
                message,
            },
            CorpusError::AlignmentError { message, .. } => CorpusError::AlignmentError {
                line: Some(at),
                message,
            },
            other => other,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::SchemaViolation { line, .. } | CorpusError::AlignmentError { line, .. } => *line,
            _ => None,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub lowercased: String,
}

impl Token {
    pub fn new(index: usize, surface: &str) -> Self {
        Token {
            index,
            surface: surface.to_string(),
            lowercased: surface.to_lowercase(),
        }
    }
}

/// A tokenized sentence with both parses, candidate verbs and gold tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSentence {
    pub id: String,
    tokens: Vec<Token>,
    const_tree: ConstituencyTree,
    dep_rows: DependencyRows,
    verbs: Vec<usize>,
    gold_tuples: Vec<Tuple>,
}

impl ParsedSentence {
    /// Validates alignment between tokens, both parses, verbs and tuples.
    pub fn new(
        id: impl Into<String>,
        tokens: &[String],
        const_tree: ConstituencyTree,
        dep_rows: DependencyRows,
        verbs: Vec<usize>,
        gold_tuples: Vec<Tuple>,
    ) -> Result<Self, CorpusError> {
        let n = tokens.len();
        if n == 0 {
            return Err(CorpusError::schema("sentence has no tokens"));
        }
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(CorpusError::schema(format!("token {i} is empty")));
        }
        const_tree
            .check_tokens(tokens)
            .map_err(|e| CorpusError::alignment(format!("constituency tree: {e}")))?;
        if dep_rows.len() != n {
            return Err(CorpusError::alignment(format!(
                "{} dependency rows for {n} tokens",
                dep_rows.len()
            )));
        }
        for (k, &v) in verbs.iter().enumerate() {
            if v >= n {
                return Err(CorpusError::schema(format!("verb index {v} out of range")));
            }
            if verbs[..k].contains(&v) {
                return Err(CorpusError::schema(format!("verb index {v} listed twice")));
            }
        }
        let mut seen = Vec::new();
        for t in &gold_tuples {
            let v = t.indicator_verb;
            if !verbs.contains(&v) {
                return Err(CorpusError::alignment(format!("tuple verb {v} is not a listed verb")));
            }
            if seen.contains(&v) {
                return Err(CorpusError::schema(format!("verb {v} has more than one tuple")));
            }
            seen.push(v);
            let rel = t
                .rel()
                .ok_or_else(|| CorpusError::schema(format!("tuple of verb {v} has no REL span")))?;
            if !rel.contains(v) {
                return Err(CorpusError::alignment(format!(
                    "REL span [{}, {}] does not contain verb {v}",
                    rel.start, rel.end
                )));
            }
            for (role, span) in &t.spans {
                if span.start > span.end || span.end >= n {
                    return Err(CorpusError::schema(format!(
                        "{role} span [{}, {}] is invalid for {n} tokens",
                        span.start, span.end
                    )));
                }
            }
        }
        Ok(ParsedSentence {
            id: id.into(),
            tokens: tokens.iter().enumerate().map(|(i, s)| Token::new(i, s)).collect(),
            const_tree,
            dep_rows,
            verbs,
            gold_tuples,
        })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn const_tree(&self) -> &ConstituencyTree {
        &self.const_tree
    }

    pub fn dep_rows(&self) -> &DependencyRows {
        &self.dep_rows
    }

    pub fn verbs(&self) -> &[usize] {
        &self.verbs
    }

    pub fn gold_tuples(&self) -> &[Tuple] {
        &self.gold_tuples
    }

    pub fn gold_for(&self, verb: usize) -> Option<&Tuple> {
        self.gold_tuples.iter().find(|t| t.indicator_verb == verb)
    }
}

/// One (sentence, indicator verb) pair with its gold BIO sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedInstance<'a> {
    pub sentence: &'a ParsedSentence,
    pub indicator_verb: usize,
    pub labels: Vec<Tag>,
}

impl TaggedInstance<'_> {
    /// 0/1 relation-indicator value per token.
    pub fn indicator(&self) -> Vec<usize> {
        (0..self.sentence.len())
            .map(|i| usize::from(i == self.indicator_verb))
            .collect()
    }

    pub fn label_ids(&self, tags: &TagSet) -> Vec<usize> {
        self.labels
            .iter()
            .map(|t| tags.id(*t).expect("labels were checked against the tag set"))
            .collect()
    }
}

/// One instance per candidate verb; verbs without a gold tuple get all-`O`.
pub fn expand_instances<'a>(s: &'a ParsedSentence, tags: &TagSet) -> Result<Vec<TaggedInstance<'a>>, CorpusError> {
    s.verbs
        .iter()
        .map(|&verb| {
            let labels = match s.gold_for(verb) {
                None => vec![Tag::O; s.len()],
                Some(t) => {
                    if let Some((first, second)) = t.overlapping_roles() {
                        return Err(CorpusError::OverlappingGoldSpans {
                            sentence: s.id.clone(),
                            verb,
                            first,
                            second,
                        });
                    }
                    if let Some(role) = t.spans.keys().find(|r| !tags.supports(**r)) {
                        return Err(CorpusError::RoleOutOfRange {
                            sentence: s.id.clone(),
                            role: *role,
                        });
                    }
                    encode_bio(&t.spans, s.len())
                }
            };
            Ok(TaggedInstance {
                sentence: s,
                indicator_verb: verb,
                labels,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TupleRecord {
    verb: usize,
    spans: BTreeMap<String, [usize; 2]>,
}

/// On-disk JSONL record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SentenceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    tokens: Vec<String>,
    const_ptb: String,
    dep_conllu: Vec<(i64, String)>,
    verbs: Vec<usize>,
    #[serde(default)]
    tuples: Vec<TupleRecord>,
}

fn sentence_from_record(rec: SentenceRecord, default_id: String) -> Result<ParsedSentence, CorpusError> {
    let tree = read_bracketed_tree(&rec.const_ptb).map_err(|e| CorpusError::schema(format!("const_ptb: {e}")))?;
    let rows = DependencyRows::from_pairs(&rec.dep_conllu).map_err(|e| CorpusError::schema(format!("dep_conllu: {e}")))?;
    let mut tuples = Vec::with_capacity(rec.tuples.len());
    for t in rec.tuples {
        let mut spans = BTreeMap::new();
        for (name, [start, end]) in t.spans {
            let role: Role = name.parse().map_err(|e| CorpusError::schema(format!("{e}")))?;
            spans.insert(role, Span::new(start, end));
        }
        tuples.push(Tuple::new(t.verb, spans, 1.0));
    }
    ParsedSentence::new(rec.id.unwrap_or(default_id), &rec.tokens, tree, rows, rec.verbs, tuples)
}

fn record_from_sentence(s: &ParsedSentence) -> SentenceRecord {
    SentenceRecord {
        id: Some(s.id.clone()),
        tokens: s.tokens.iter().map(|t| t.surface.clone()).collect(),
        const_ptb: s.const_tree.to_bracketed(),
        dep_conllu: s.dep_rows.to_pairs(),
        verbs: s.verbs.clone(),
        tuples: s
            .gold_tuples
            .iter()
            .map(|t| TupleRecord {
                verb: t.indicator_verb,
                spans: t.spans.iter().map(|(r, s)| (r.to_string(), [s.start, s.end])).collect(),
            })
            .collect(),
    }
}

/// Parses one JSONL record. `default_id` is used when the record has no `id`.
pub fn parse_sentence_json(line: &str, default_id: impl Into<String>) -> Result<ParsedSentence, CorpusError> {
    let rec: SentenceRecord = serde_json::from_str(line).map_err(|e| CorpusError::schema(e.to_string()))?;
    sentence_from_record(rec, default_id.into())
}

pub fn sentence_to_json(s: &ParsedSentence) -> String {
    serde_json::to_string(&record_from_sentence(s)).expect("records serialize")
}

/// Reads a JSONL corpus from any reader. Blank lines are skipped; sentence
/// ids default to the 0-based record index.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<ParsedSentence>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::schema(e.to_string()).at_line(idx + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = parse_sentence_json(&line, out.len().to_string()).map_err(|e| e.at_line(idx + 1))?;
        out.push(s);
    }
    Ok(out)
}

/// Loads a JSONL corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ParsedSentence>, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, sentences: &[ParsedSentence]) -> std::io::Result<()> {
    for s in sentences {
        writeln!(writer, "{}", sentence_to_json(s))?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, sentences: &[ParsedSentence]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus(&mut w, sentences).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Zips separate `.ptb`, `.conllu` and `.verbs` files by sentence order.
///
/// Tokens come from the CoNLL-U forms and must match the tree leaves. The
/// verbs file has one line of 0-based indices per sentence. Such corpora
/// carry no gold tuples. Error line numbers refer to the sentence ordinal.
pub fn load_zipped(ptb: impl AsRef<Path>, conllu: impl AsRef<Path>, verbs: impl AsRef<Path>) -> Result<Vec<ParsedSentence>, CorpusError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| io_err(p, e));
    let trees = read_bracketed_trees(&read(ptb.as_ref())?).map_err(|e| CorpusError::schema(format!("ptb: {e}")))?;
    let deps = read_conllu_document(&read(conllu.as_ref())?).map_err(|e| CorpusError::schema(format!("conllu: {e}")))?;
    let verb_text = read(verbs.as_ref())?;
    let verb_lines: Vec<&str> = verb_text.lines().collect();
    if trees.len() != deps.len() || trees.len() != verb_lines.len() {
        return Err(CorpusError::alignment(format!(
            "{} trees, {} dependency blocks and {} verb lines",
            trees.len(),
            deps.len(),
            verb_lines.len()
        )));
    }
    let mut out = Vec::with_capacity(trees.len());
    for (idx, ((tree, dep), vline)) in trees.into_iter().zip(deps).zip(verb_lines).enumerate() {
        let verbs = vline
            .split_whitespace()
            .map(|v| v.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CorpusError::schema(format!("verbs: {e}")).at_line(idx + 1))?;
        let s = ParsedSentence::new(idx.to_string(), &dep.forms, tree, dep.rows, verbs, Vec::new())
            .map_err(|e| e.at_line(idx + 1))?;
        out.push(s);
    }
    Ok(out)
}
