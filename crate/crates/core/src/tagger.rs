//! Tagging head, BIO decoding and extraction records.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::numerics::{NumericsError, Tape, Tensor, Var};
use crate::tuple::{Role, Span, Tag, TagSet, Tuple};

/// `logits_i = h_i · W + b` for every token.
pub fn tag_logits(tape: &mut Tape, h_final: Var, w: Var, b: Var) -> Result<Var, NumericsError> {
    let projected = tape.matmul(h_final, w)?;
    tape.add_row(projected, b)
}

/// Argmax tag id and its softmax probability for every row of `logits`.
pub fn argmax_probs(logits: &Tensor) -> Vec<(usize, f64)> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let (best, max) = row
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
            (best, 1.0 / denom)
        })
        .collect()
}

/// Turns a tag sequence into a tuple.
///
/// A stray `I-X` is read as `B-X`; when a role has several spans the leftmost
/// wins. Returns `None` without a `REL` span. Confidence is the geometric mean
/// of `probs` over non-`O` positions.
pub fn decode_bio(tags: &[Tag], probs: &[f64], indicator_verb: usize) -> Option<Tuple> {
    let mut spans: BTreeMap<Role, Span> = BTreeMap::new();
    let mut open: Option<(Role, usize)> = None;
    let mut close = |open: &mut Option<(Role, usize)>, end: usize| {
        if let Some((role, start)) = open.take() {
            spans.entry(role).or_insert(Span::new(start, end));
        }
    };
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            Tag::O => close(&mut open, i.wrapping_sub(1)),
            Tag::I(r) if open.map(|(o, _)| o) == Some(r) => {}
            Tag::B(r) | Tag::I(r) => {
                close(&mut open, i.wrapping_sub(1));
                open = Some((r, i));
            }
        }
    }
    close(&mut open, tags.len().wrapping_sub(1));

    if !spans.contains_key(&Role::Rel) {
        return None;
    }
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for (tag, p) in tags.iter().zip(probs) {
        if *tag != Tag::O {
            log_sum += p.ln();
            count += 1;
        }
    }
    let confidence = if count == 0 { 1.0 } else { (log_sum / count as f64).exp() };
    Some(Tuple::new(indicator_verb, spans, confidence))
}

/// Decodes a logits matrix with the given tag inventory.
pub fn decode_logits(logits: &Tensor, tags: &TagSet, indicator_verb: usize) -> Option<Tuple> {
    let best = argmax_probs(logits);
    let seq: Vec<Tag> = best.iter().map(|(id, _)| tags.tag(*id).unwrap_or(Tag::O)).collect();
    let probs: Vec<f64> = best.iter().map(|(_, p)| *p).collect();
    decode_bio(&seq, &probs, indicator_verb)
}

/// One tuple in extraction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTuple {
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<usize>,
    #[serde(default)]
    pub spans: BTreeMap<Role, Span>,
    pub texts: BTreeMap<Role, String>,
}

impl ExtractedTuple {
    pub fn from_tuple<S: AsRef<str>>(t: &Tuple, tokens: &[S]) -> Self {
        ExtractedTuple {
            confidence: t.confidence,
            verb: Some(t.indicator_verb),
            spans: t.spans.clone(),
            texts: t.texts(tokens),
        }
    }
}

/// One line of extraction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub sentence_id: String,
    pub tuples: Vec<ExtractedTuple>,
}

pub fn write_extractions<W: Write>(mut w: W, records: &[ExtractionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads extraction JSONL; errors carry 1-based line numbers.
pub fn read_extractions<R: BufRead>(reader: R) -> Result<Vec<ExtractionRecord>, (usize, String)> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| (idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| (idx + 1, e.to_string()))?);
    }
    Ok(out)
}
