//! Tuple scoring: exact and lexical matching, precision-recall curve and AUC.
//!
//! Both modes first fix a one-to-one assignment between predicted and gold
//! tuples of each sentence, giving every prediction a precision and recall
//! credit. The curve sweeps every distinct confidence from high to low and
//! reports the credits of predictions at or above it, so thresholding at the
//! lowest confidence reproduces the headline scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_sentence_json, ParsedSentence};
use crate::tagger::ExtractionRecord;
use crate::tuple::{Role, Tuple};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sentence ids differ between predictions and gold: {0}")]
    UnalignedIds(String),
    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),
    #[error("unknown scoring mode `{0}` (expected exact or lexical)")]
    UnknownMode(String),
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Exact,
    Lexical,
}

impl FromStr for MatchMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "lexical" => Ok(MatchMode::Lexical),
            other => Err(EvalError::UnknownMode(other.to_string())),
        }
    }
}

/// A tuple reduced to role texts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTuple {
    pub roles: BTreeMap<Role, String>,
    pub confidence: f64,
}

impl EvalTuple {
    pub fn new(roles: BTreeMap<Role, String>, confidence: f64) -> Self {
        EvalTuple { roles, confidence }
    }

    pub fn from_tuple<S: AsRef<str>>(t: &Tuple, tokens: &[S]) -> Self {
        EvalTuple::new(t.texts(tokens), t.confidence)
    }

    /// `⟨ARG0, REL, ARG1 … ARGn joined⟩`.
    pub fn binarized(&self) -> Self {
        let mut roles = BTreeMap::new();
        let mut tail = Vec::new();
        for (role, text) in &self.roles {
            match role {
                Role::Rel | Role::Arg(0) => {
                    roles.insert(*role, text.clone());
                }
                Role::Arg(_) => tail.push(text.as_str()),
            }
        }
        if !tail.is_empty() {
            roles.insert(Role::Arg(1), tail.join(" "));
        }
        EvalTuple::new(roles, self.confidence)
    }
}

/// Tuples of one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSentence {
    pub id: String,
    pub tuples: Vec<EvalTuple>,
}

impl EvalSentence {
    pub fn from_gold(s: &ParsedSentence) -> Self {
        let tokens = s.surfaces();
        EvalSentence {
            id: s.id.clone(),
            tuples: s.gold_tuples().iter().map(|t| EvalTuple::from_tuple(t, &tokens)).collect(),
        }
    }

    pub fn from_record(r: &ExtractionRecord) -> Self {
        EvalSentence {
            id: r.sentence_id.clone(),
            tuples: r
                .tuples
                .iter()
                .map(|t| EvalTuple::new(t.texts.clone(), t.confidence))
                .collect(),
        }
    }
}

/// Headline scores plus the `(recall, precision)` curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub curve: Vec<(f64, f64)>,
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn exact_equal(a: &EvalTuple, b: &EvalTuple) -> bool {
    a.roles.len() == b.roles.len()
        && a.roles
            .iter()
            .all(|(role, text)| b.roles.get(role).is_some_and(|t| normalize(t) == normalize(text)))
}

/// Role pairs compared lexically: REL with REL, arguments in order.
fn paired_roles(pred: &EvalTuple, gold: &EvalTuple) -> Vec<(Option<String>, Option<String>)> {
    let args = |t: &EvalTuple| -> Vec<String> {
        t.roles
            .iter()
            .filter(|(r, _)| **r != Role::Rel)
            .map(|(_, s)| s.clone())
            .collect()
    };
    let mut pairs = vec![(pred.roles.get(&Role::Rel).cloned(), gold.roles.get(&Role::Rel).cloned())];
    let (pa, ga) = (args(pred), args(gold));
    for k in 0..pa.len().max(ga.len()) {
        pairs.push((pa.get(k).cloned(), ga.get(k).cloned()));
    }
    pairs
}

fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in b {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    a.iter()
        .filter(|w| match counts.get_mut(w.as_str()) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        })
        .count()
}

/// Token-level `(precision, recall)` of one prediction against one gold tuple.
pub fn lexical_pair(pred: &EvalTuple, gold: &EvalTuple) -> (f64, f64) {
    let (mut overlap, mut n_pred, mut n_gold) = (0, 0, 0);
    for (p, g) in paired_roles(pred, gold) {
        let p = p.as_deref().map(normalize).unwrap_or_default();
        let g = g.as_deref().map(normalize).unwrap_or_default();
        overlap += multiset_overlap(&p, &g);
        n_pred += p.len();
        n_gold += g.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(overlap, n_pred), ratio(overlap, n_gold))
}

/// Precision/recall credit and confidence of one prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Credit {
    confidence: f64,
    precision: f64,
    recall: f64,
}

fn assign_exact(pred: &[EvalTuple], gold: &[EvalTuple]) -> Vec<Credit> {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|a, b| pred[*b].confidence.total_cmp(&pred[*a].confidence));
    let mut used = vec![false; gold.len()];
    let mut credits = vec![None; pred.len()];
    for p in order {
        let hit = (0..gold.len()).find(|g| !used[*g] && exact_equal(&pred[p], &gold[*g]));
        if let Some(g) = hit {
            used[g] = true;
        }
        let v = if hit.is_some() { 1.0 } else { 0.0 };
        credits[p] = Some(Credit {
            confidence: pred[p].confidence,
            precision: v,
            recall: v,
        });
    }
    credits.into_iter().map(Option::unwrap).collect()
}

fn assign_lexical(pred: &[EvalTuple], gold: &[EvalTuple]) -> Vec<Credit> {
    let mut pairs = Vec::new();
    for (p, pt) in pred.iter().enumerate() {
        for (g, gt) in gold.iter().enumerate() {
            let (pp, pr) = lexical_pair(pt, gt);
            let score = f1(pp, pr);
            if score > 0.0 {
                pairs.push((score, p, g, pp, pr));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(pred[b.1].confidence.total_cmp(&pred[a.1].confidence))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut credits: Vec<Credit> = pred
        .iter()
        .map(|t| Credit {
            confidence: t.confidence,
            precision: 0.0,
            recall: 0.0,
        })
        .collect();
    let (mut pred_used, mut gold_used) = (vec![false; pred.len()], vec![false; gold.len()]);
    for (_, p, g, pp, pr) in pairs {
        if !pred_used[p] && !gold_used[g] {
            pred_used[p] = true;
            gold_used[g] = true;
            credits[p].precision = pp;
            credits[p].recall = pr;
        }
    }
    credits
}

fn index_by_id(sentences: &[EvalSentence]) -> Result<BTreeMap<&str, &EvalSentence>, EvalError> {
    let mut map = BTreeMap::new();
    for s in sentences {
        if map.insert(s.id.as_str(), s).is_some() {
            return Err(EvalError::DuplicateId(s.id.clone()));
        }
    }
    Ok(map)
}

fn describe_difference(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> String {
    let only = |x: &BTreeSet<&str>, y: &BTreeSet<&str>| x.difference(y).take(3).cloned().collect::<Vec<_>>().join(", ");
    format!("only in predictions [{}], only in gold [{}]", only(a, b), only(b, a))
}

/// Scores predictions against gold under `mode`, optionally on binarized tuples.
pub fn score(pred: &[EvalSentence], gold: &[EvalSentence], mode: MatchMode, binary: bool) -> Result<ScoreReport, EvalError> {
    let (pm, gm) = (index_by_id(pred)?, index_by_id(gold)?);
    let (pk, gk): (BTreeSet<&str>, BTreeSet<&str>) = (pm.keys().cloned().collect(), gm.keys().cloned().collect());
    if pk != gk {
        return Err(EvalError::UnalignedIds(describe_difference(&pk, &gk)));
    }

    let prep = |ts: &[EvalTuple]| -> Vec<EvalTuple> {
        if binary {
            ts.iter().map(EvalTuple::binarized).collect()
        } else {
            ts.to_vec()
        }
    };
    let mut credits = Vec::new();
    let mut n_gold = 0;
    for (id, g) in &gm {
        let (p, g) = (prep(&pm[id].tuples), prep(&g.tuples));
        n_gold += g.len();
        credits.extend(match mode {
            MatchMode::Exact => assign_exact(&p, &g),
            MatchMode::Lexical => assign_lexical(&p, &g),
        });
    }
    Ok(report_from_credits(credits, n_gold))
}

pub fn exact_match_score(pred: &[EvalSentence], gold: &[EvalSentence]) -> Result<ScoreReport, EvalError> {
    score(pred, gold, MatchMode::Exact, false)
}

pub fn lexical_match_score(pred: &[EvalSentence], gold: &[EvalSentence]) -> Result<ScoreReport, EvalError> {
    score(pred, gold, MatchMode::Lexical, false)
}

fn report_from_credits(mut credits: Vec<Credit>, n_gold: usize) -> ScoreReport {
    credits.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };

    let mut points = Vec::new();
    let (mut sum_p, mut sum_r) = (0.0, 0.0);
    for (k, c) in credits.iter().enumerate() {
        sum_p += c.precision;
        sum_r += c.recall;
        let last_at_threshold = credits.get(k + 1).is_none_or(|next| next.confidence != c.confidence);
        if last_at_threshold {
            points.push((c.confidence, ratio(sum_r, n_gold), ratio(sum_p, k + 1)));
        }
    }
    let (curve, auc) = pr_curve_auc(&points);
    let precision = ratio(sum_p, credits.len());
    let recall = ratio(sum_r, n_gold);
    ScoreReport {
        precision,
        recall,
        f1: f1(precision, recall),
        auc,
        curve,
    }
}

/// Builds the curve from `(threshold, recall, precision)` points and
/// integrates it with the trapezoidal rule.
///
/// Points are ordered by descending threshold. The curve is anchored at
/// recall 0 with the highest precision reached anywhere on it.
pub fn pr_curve_auc(points: &[(f64, f64, f64)]) -> (Vec<(f64, f64)>, f64) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let curve: Vec<(f64, f64)> = sorted.iter().map(|(_, r, p)| (*r, *p)).collect();
    let Some(max_p) = curve.iter().map(|(_, p)| *p).reduce(f64::max) else {
        return (curve, 0.0);
    };
    let mut auc = 0.0;
    let mut prev = (0.0, max_p);
    for &(r, p) in &curve {
        auc += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    (curve, auc)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if !line.trim().is_empty() {
            out.push((idx + 1, line));
        }
    }
    Ok(out)
}

/// Reads a file of either extraction records or corpus records (gold tuples).
pub fn load_eval_file(path: impl AsRef<Path>) -> Result<Vec<EvalSentence>, EvalError> {
    let path = path.as_ref();
    let fmt_err = |line: usize, message: String| EvalError::Format {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (record_idx, (line, text)) in read_lines(path)?.into_iter().enumerate() {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| fmt_err(line, e.to_string()))?;
        if value.get("tokens").is_some() {
            let s = parse_sentence_json(&text, record_idx.to_string()).map_err(|e| fmt_err(line, e.to_string()))?;
            out.push(EvalSentence::from_gold(&s));
        } else {
            let r: ExtractionRecord = serde_json::from_value(value).map_err(|e| fmt_err(line, e.to_string()))?;
            out.push(EvalSentence::from_record(&r));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(pairs: &[(&str, &str)], conf: f64) -> EvalTuple {
        EvalTuple::new(pairs.iter().map(|(r, s)| (r.parse().unwrap(), s.to_string())).collect(), conf)
    }

    fn sent(id: &str, tuples: Vec<EvalTuple>) -> EvalSentence {
        EvalSentence { id: id.into(), tuples }
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn identical_prediction_scores_one() {
        let g = vec![sent("a", vec![t(&[("ARG0", "cat"), ("REL", "likes"), ("ARG1", "toys")], 1.0)])];
        let r = exact_match_score(&g, &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.auc), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn one_token_difference_fails_exact() {
        let g = vec![sent("a", vec![t(&[("ARG0", "the cat"), ("REL", "likes")], 1.0)])];
        let p = vec![sent("a", vec![t(&[("ARG0", "cat"), ("REL", "likes")], 1.0)])];
        assert_eq!(exact_match_score(&p, &g).unwrap().f1, 0.0);
        let p = vec![sent("a", vec![t(&[("ARG0", "The  Cat"), ("REL", "likes")], 1.0)])];
        assert_eq!(exact_match_score(&p, &g).unwrap().f1, 1.0);
    }

    #[test]
    fn half_recall() {
        let a = t(&[("ARG0", "x"), ("REL", "r")], 0.9);
        let b = t(&[("ARG0", "y"), ("REL", "r")], 0.8);
        let g = vec![sent("s", vec![a.clone(), b])];
        let p = vec![sent("s", vec![a])];
        let r = exact_match_score(&p, &g).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        close(r.f1, 2.0 / 3.0);
        let swapped = exact_match_score(&g, &p).unwrap();
        assert_eq!((swapped.precision, swapped.recall), (0.5, 1.0));
    }

    #[test]
    fn lexical_rel_overlap() {
        let p = t(&[("REL", "likes playing")], 1.0);
        let g = t(&[("REL", "likes")], 1.0);
        assert_eq!(lexical_pair(&p, &g), (0.5, 1.0));
        let g = t(&[("ARG0", "Mary 's cat"), ("REL", "likes"), ("ARG1", "toys")], 1.0);
        assert_eq!(lexical_pair(&g, &g), (1.0, 1.0));
    }

    #[test]
    fn empty_predictions() {
        let g = vec![sent("s", vec![t(&[("REL", "r")], 1.0)])];
        let p = vec![sent("s", vec![])];
        for mode in [MatchMode::Exact, MatchMode::Lexical] {
            let r = score(&p, &g, mode, false).unwrap();
            assert_eq!((r.precision, r.recall, r.f1, r.auc), (0.0, 0.0, 0.0, 0.0));
            assert!(r.curve.is_empty());
        }
    }

    #[test]
    fn unaligned_ids() {
        let g = vec![sent("a", vec![])];
        let p = vec![sent("b", vec![])];
        assert!(matches!(exact_match_score(&p, &g), Err(EvalError::UnalignedIds(_))));
    }

    #[test]
    fn three_prediction_curve() {
        // Confidences 0.9 (hit), 0.6 (miss), 0.3 (hit); 4 gold tuples.
        // Curve: (0.25, 1), (0.25, 0.5), (0.5, 2/3); anchored at (0, 1).
        // AUC = 0.25·1 + 0 + 0.25·(0.5 + 2/3)/2 = 0.25 + 0.145833…
        let gold = vec![sent(
            "s",
            vec![
                t(&[("REL", "a")], 1.0),
                t(&[("REL", "b")], 1.0),
                t(&[("REL", "c")], 1.0),
                t(&[("REL", "d")], 1.0),
            ],
        )];
        let pred = vec![sent(
            "s",
            vec![t(&[("REL", "a")], 0.9), t(&[("REL", "x")], 0.6), t(&[("REL", "b")], 0.3)],
        )];
        let r = exact_match_score(&pred, &gold).unwrap();
        assert_eq!(r.curve.len(), 3);
        close(r.curve[1].1, 0.5);
        close(r.auc, 0.25 + 0.25 * (0.5 + 2.0 / 3.0) / 2.0);
        close(r.precision, 2.0 / 3.0);
        close(r.recall, 0.5);
    }

    #[test]
    fn all_correct_auc_is_rectangle() {
        let gold = vec![sent("s", (0..4).map(|i| t(&[("REL", &i.to_string())], 1.0)).collect())];
        let pred = vec![sent("s", (0..3).map(|i| t(&[("REL", &i.to_string())], 0.2 + i as f64 / 10.0)).collect())];
        let r = exact_match_score(&pred, &gold).unwrap();
        close(r.auc, 0.75);
    }

    #[test]
    fn binarization_joins_tail_arguments() {
        let x = t(&[("ARG0", "cat"), ("REL", "likes"), ("ARG1", "toys"), ("ARG2", "in the room")], 1.0);
        let b = x.binarized();
        assert_eq!(b.roles[&Role::Arg(1)], "toys in the room");
        assert_eq!(b.roles.len(), 3);
    }
}
