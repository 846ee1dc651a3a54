//! Contextual token representations from word and relation-indicator
//! embeddings.
//!
//! The default encoder mixes a window of three summed embeddings through one
//! ReLU layer. Precomputed per-token vectors can be replayed instead.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ParsedSentence;
use crate::numerics::{NumericsError, Tape, Tensor, Var};

pub const UNK: &str = "<unk>";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("no precomputed vectors for sentence `{sentence}` (verb {verb})")]
    MissingVectors { sentence: String, verb: usize },
    #[error("precomputed vectors for sentence `{sentence}` have shape {rows}×{cols}, expected {n}×{width}")]
    BadVectors {
        sentence: String,
        rows: usize,
        cols: usize,
        n: usize,
        width: usize,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Lowercased token → dense id. Id 0 is always [`UNK`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        Vocabulary::from_words(words)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    /// Builds from a word list, inserting [`UNK`] at id 0 when absent and
    /// dropping duplicates.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            words: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
        };
        for w in words {
            v.insert(w.into());
        }
        v
    }

    /// Every lowercased token in corpus order of first occurrence.
    pub fn from_corpus(corpus: &[ParsedSentence]) -> Self {
        Vocabulary::from_words(
            corpus
                .iter()
                .flat_map(|s| s.tokens().iter().map(|t| t.lowercased.clone())),
        )
    }

    fn insert(&mut self, word: String) {
        if !self.index.contains_key(&word) {
            self.index.insert(word.clone(), self.words.len());
            self.words.push(word);
        }
    }

    pub fn id(&self, lowercased: &str) -> usize {
        self.index.get(lowercased).copied().unwrap_or(0)
    }

    pub fn ids(&self, s: &ParsedSentence) -> Vec<usize> {
        s.tokens().iter().map(|t| self.id(&t.lowercased)).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Reads a token-per-line file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Vocabulary::from_words(text.lines().filter(|l| !l.is_empty())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EncoderError> {
        let path = path.as_ref();
        let mut text = self.words.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Trainable parameters of the window encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    /// `V × d_h` word embeddings.
    pub word: Tensor,
    /// `2 × d_h` indicator embeddings; row 1 marks the relation verb.
    pub verb: Tensor,
    /// `3·d_h × d_h` mixing weights applied to `[w_{i-1}; w_i; w_{i+1}]`.
    pub mix_w: Tensor,
    pub mix_b: Tensor,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(vocab_size: usize, d_h: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (4 * d_h) as f64).sqrt();
        EncoderParams {
            word: Tensor::uniform(&[vocab_size, d_h], -0.1, 0.1, rng),
            verb: Tensor::uniform(&[2, d_h], -0.1, 0.1, rng),
            mix_w: Tensor::uniform(&[3 * d_h, d_h], -limit, limit, rng),
            mix_b: Tensor::zeros(&[d_h]),
        }
    }
}

/// Encoder parameters recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub word: Var,
    pub verb: Var,
    pub mix_w: Var,
    pub mix_b: Var,
}

/// `w_i = W_word[t_i] + W_verb[indicator_i]`, one row per token.
pub fn embed(tape: &mut Tape, vars: &EncoderVars, token_ids: &[usize], indicator_verb: usize) -> Result<Var, NumericsError> {
    if indicator_verb >= token_ids.len() {
        return Err(NumericsError::IndexOutOfRange {
            op: "embed",
            index: indicator_verb,
            len: token_ids.len(),
        });
    }
    let indicator: Vec<usize> = (0..token_ids.len()).map(|i| usize::from(i == indicator_verb)).collect();
    let words = tape.embedding_lookup(vars.word, token_ids)?;
    let verbs = tape.embedding_lookup(vars.verb, &indicator)?;
    tape.add(words, verbs)
}

/// `n×n` matrix whose product with `X` moves every row by `offset`
/// positions, filling vacated rows with zeros.
fn shift_matrix(n: usize, offset: isize) -> Tensor {
    let mut t = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let src = i as isize + offset;
        if (0..n as isize).contains(&src) {
            t.set(i, src as usize, 1.0);
        }
    }
    t
}

/// `h_i = ReLU(W_m · [w_{i-1}; w_i; w_{i+1}] + b_m)` with zero padding.
pub fn encode(tape: &mut Tape, vars: &EncoderVars, embedded: Var) -> Result<Var, NumericsError> {
    let n = tape.value(embedded).rows();
    if n == 0 {
        return Err(NumericsError::EmptyInput { op: "encode" });
    }
    let prev_m = tape.constant(shift_matrix(n, -1));
    let next_m = tape.constant(shift_matrix(n, 1));
    let prev = tape.matmul(prev_m, embedded)?;
    let next = tape.matmul(next_m, embedded)?;
    let window = tape.concat_cols(&[prev, embedded, next])?;
    let mixed = tape.matmul(window, vars.mix_w)?;
    let biased = tape.add_row(mixed, vars.mix_b)?;
    tape.relu(biased)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    #[default]
    Toy,
    ExternalPrecomputed,
}

#[derive(Deserialize)]
struct VectorRecord {
    sentence_id: String,
    #[serde(default)]
    verb: Option<usize>,
    vectors: Vec<Vec<f64>>,
}

/// Replayed contextual vectors keyed by sentence id and, optionally, by
/// indicator verb.
///
/// File format: JSONL lines `{"sentence_id": "..", "verb": 3, "vectors": [[..], ..]}`.
/// A record without `verb` applies to every verb of the sentence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrecomputedVectors {
    entries: HashMap<(String, Option<usize>), Tensor>,
}

impl PrecomputedVectors {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, EncoderError> {
        let mut out = PrecomputedVectors::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EncoderError::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: VectorRecord = serde_json::from_str(&line).map_err(|e| EncoderError::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let t = Tensor::from_rows(&rec.vectors).map_err(|e| EncoderError::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            out.entries.insert((rec.sentence_id, rec.verb), t);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncoderError> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PrecomputedVectors::read(BufReader::new(file))
    }

    pub fn insert(&mut self, sentence_id: impl Into<String>, verb: Option<usize>, vectors: Tensor) {
        self.entries.insert((sentence_id.into(), verb), vectors);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Vectors for one instance, checked against the sentence length and width.
    pub fn lookup(&self, sentence_id: &str, verb: usize, n: usize, width: usize) -> Result<&Tensor, EncoderError> {
        let t = self
            .entries
            .get(&(sentence_id.to_string(), Some(verb)))
            .or_else(|| self.entries.get(&(sentence_id.to_string(), None)))
            .ok_or_else(|| EncoderError::MissingVectors {
                sentence: sentence_id.to_string(),
                verb,
            })?;
        if t.rows() != n || t.cols() != width {
            return Err(EncoderError::BadVectors {
                sentence: sentence_id.to_string(),
                rows: t.rows(),
                cols: t.cols(),
                n,
                width,
            });
        }
        Ok(t)
    }
}
