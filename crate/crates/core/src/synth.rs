//! Synthetic corpora with consistent parses and gold tuples.
//!
//! [`template_corpus`] draws SVO, n-ary and catenative sentences with one
//! indicator verb each from small word lists. [`reporting_sentence`] wraps such
//! a clause under a reporting verb (`says`, `thinks`) that is a verb without a
//! tuple. [`random_sentence`] produces arbitrary well-formed trees and
//! dependency rows for property tests and gradient checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{read_bracketed_tree, DepRow, DependencyRows, ParsedSentence};
use crate::tuple::{Role, Span, Tuple};

/// A parsed fragment: tokens, bracketing and local dependency heads.
#[derive(Clone, Debug)]
struct Chunk {
    words: Vec<String>,
    ptb: String,
    heads: Vec<Option<usize>>,
    rels: Vec<String>,
    head: usize,
}

impl Chunk {
    fn len(&self) -> usize {
        self.words.len()
    }
}

fn word(w: &str, pos: &str) -> Chunk {
    Chunk {
        words: vec![w.to_string()],
        ptb: format!("({pos} {w})"),
        heads: vec![None],
        rels: vec![String::new()],
        head: 0,
    }
}

/// Joins children under `tag`; every non-head child attaches to the head
/// child's head token with the matching relation in `rels`.
fn phrase(tag: &str, children: Vec<Chunk>, head_child: usize, rels: &[&str]) -> Chunk {
    let mut offsets = Vec::with_capacity(children.len());
    let mut total = 0;
    for c in &children {
        offsets.push(total);
        total += c.len();
    }
    let head = offsets[head_child] + children[head_child].head;
    let mut out = Chunk {
        words: Vec::with_capacity(total),
        ptb: format!("({tag}"),
        heads: Vec::with_capacity(total),
        rels: Vec::with_capacity(total),
        head,
    };
    let mut rel_iter = rels.iter();
    for (k, c) in children.into_iter().enumerate() {
        let off = offsets[k];
        let attach = if k == head_child {
            None
        } else {
            Some(rel_iter.next().expect("one relation per dependent child"))
        };
        for (i, (h, r)) in c.heads.iter().zip(&c.rels).enumerate() {
            match h {
                Some(h) => {
                    out.heads.push(Some(h + off));
                    out.rels.push(r.clone());
                }
                None if i == c.head => match attach {
                    Some(rel) => {
                        out.heads.push(Some(head));
                        out.rels.push(rel.to_string());
                    }
                    None => {
                        out.heads.push(None);
                        out.rels.push(String::new());
                    }
                },
                None => unreachable!("only a chunk's head lacks a head"),
            }
        }
        out.words.extend(c.words);
        out.ptb.push(' ');
        out.ptb.push_str(&c.ptb);
    }
    out.ptb.push(')');
    out
}

const NAMES: &[&str] = &["Mary", "John", "Anna", "Peter", "Lucy", "Tom", "Emma", "Paul"];
const NOUNS: &[&str] = &["cat", "dog", "bird", "teacher", "student", "farmer", "child", "doctor"];
const ADJS: &[&str] = &["old", "small", "red", "happy", "plush", "new"];
const THINGS: &[&str] = &["toys", "ball", "book", "apple", "letter", "song", "car", "cake"];
const PLACES: &[&str] = &["room", "park", "garden", "kitchen", "city", "school"];
const PREPS: &[&str] = &["in", "at", "near"];
const TRANSITIVE: &[&str] = &["likes", "sees", "chases", "buys", "reads", "finds", "paints", "wants"];
const DITRANSITIVE: &[&str] = &["gives", "sends", "shows", "offers"];
const CATENATIVE: &[(&str, &str)] = &[("likes", "playing"), ("enjoys", "reading"), ("starts", "painting"), ("keeps", "eating")];
const REPORTING: &[&str] = &["says", "thinks", "believes"];

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty list")
}

fn agent<R: Rng + ?Sized>(rng: &mut R) -> Chunk {
    match rng.gen_range(0..4) {
        0 => phrase("NP", vec![word(pick(rng, NAMES), "NNP")], 0, &[]),
        1 => phrase("NP", vec![word("the", "DT"), word(pick(rng, NOUNS), "NN")], 1, &["det"]),
        2 => phrase(
            "NP",
            vec![word("the", "DT"), word(pick(rng, ADJS), "JJ"), word(pick(rng, NOUNS), "NN")],
            2,
            &["det", "amod"],
        ),
        _ => {
            let owner = phrase("NP", vec![word(pick(rng, NAMES), "NNP"), word("'s", "POS")], 0, &["case"]);
            phrase("NP", vec![owner, word(pick(rng, NOUNS), "NN")], 1, &["poss"])
        }
    }
}

fn thing<R: Rng + ?Sized>(rng: &mut R) -> Chunk {
    match rng.gen_range(0..3) {
        0 => phrase("NP", vec![word("the", "DT"), word(pick(rng, THINGS), "NN")], 1, &["det"]),
        1 => phrase("NP", vec![word(pick(rng, ADJS), "JJ"), word(pick(rng, THINGS), "NNS")], 1, &["amod"]),
        _ => phrase("NP", vec![word("a", "DT"), word(pick(rng, THINGS), "NN")], 1, &["det"]),
    }
}

fn place<R: Rng + ?Sized>(rng: &mut R) -> Chunk {
    let np = phrase("NP", vec![word("the", "DT"), word(pick(rng, PLACES), "NN")], 1, &["det"]);
    phrase("PP", vec![word(pick(rng, PREPS), "IN"), np], 0, &["pobj"])
}

/// Subject and predicate of a clause plus its verbs and `(verb, spans)`
/// tuples, all local to the clause.
struct Clause {
    subj: Chunk,
    vp: Chunk,
    verbs: Vec<usize>,
    tuples: Vec<(usize, Vec<(Role, Span)>)>,
}

type Frames = Vec<(usize, Vec<(Role, Span)>)>;

impl Clause {
    fn into_s(self, tail: Option<Chunk>) -> (Chunk, Vec<usize>, Frames) {
        let mut children = vec![self.subj, self.vp];
        let mut rels = vec!["nsubj"];
        if let Some(t) = tail {
            children.push(t);
            rels.push("punct");
        }
        (phrase("S", children, 1, &rels), self.verbs, self.tuples)
    }
}

fn span_of(offset: usize, c: &Chunk) -> Span {
    Span::new(offset, offset + c.len() - 1)
}

fn clause<R: Rng + ?Sized>(rng: &mut R, reporting: bool) -> Clause {
    let kind = if reporting { 4 } else { rng.gen_range(0..4) };
    let subj = agent(rng);
    let s0 = span_of(0, &subj);
    let v = subj.len();
    match kind {
        0 | 1 => {
            let obj = thing(rng);
            let verb = word(pick(rng, TRANSITIVE), "VBZ");
            let o = span_of(v + 1, &obj);
            let mut spans = vec![(Role::Arg(0), s0), (Role::Rel, Span::new(v, v)), (Role::Arg(1), o)];
            let mut vp_children = vec![verb, obj];
            let mut rels = vec!["dobj"];
            if kind == 1 {
                let pp = place(rng);
                spans.push((Role::Arg(2), span_of(o.end + 1, &pp)));
                vp_children.push(pp);
                rels.push("prep");
            }
            let vp = phrase("VP", vp_children, 0, &rels);
            Clause {
                subj,
                vp,
                verbs: vec![v],
                tuples: vec![(v, spans)],
            }
        }
        2 => {
            let verb = word(pick(rng, DITRANSITIVE), "VBZ");
            let recipient = agent(rng);
            let obj = thing(rng);
            let r = span_of(v + 1, &recipient);
            let o = span_of(r.end + 1, &obj);
            let vp = phrase("VP", vec![verb, recipient, obj], 0, &["iobj", "dobj"]);
            Clause {
                subj,
                vp,
                verbs: vec![v],
                tuples: vec![(v, vec![(Role::Arg(0), s0), (Role::Rel, Span::new(v, v)), (Role::Arg(2), r), (Role::Arg(1), o)])],
            }
        }
        3 => {
            let (finite, gerund) = *CATENATIVE.choose(rng).expect("non-empty list");
            let obj = thing(rng);
            let pp = place(rng);
            let o = span_of(v + 2, &obj);
            let p = span_of(o.end + 1, &pp);
            let inner_vp = phrase("VP", vec![word(gerund, "VBG"), obj, pp], 0, &["dobj", "prep"]);
            let inner_s = phrase("S", vec![inner_vp], 0, &[]);
            let vp = phrase("VP", vec![word(finite, "VBZ"), inner_s], 0, &["xcomp"]);
            Clause {
                subj,
                vp,
                verbs: vec![v],
                tuples: vec![(
                    v,
                    vec![(Role::Arg(0), s0), (Role::Rel, Span::new(v, v + 1)), (Role::Arg(1), o), (Role::Arg(2), p)],
                )],
            }
        }
        _ => {
            let inner = clause(rng, false);
            let shift = v + 2;
            let (inner_s, inner_verbs, inner_tuples) = inner.into_s(None);
            let sbar = phrase("SBAR", vec![word("that", "IN"), inner_s], 1, &["mark"]);
            let vp = phrase("VP", vec![word(pick(rng, REPORTING), "VBZ"), sbar], 0, &["ccomp"]);
            let mut verbs = vec![v];
            verbs.extend(inner_verbs.iter().map(|x| x + shift));
            let tuples = inner_tuples
                .into_iter()
                .map(|(verb, spans)| {
                    (
                        verb + shift,
                        spans
                            .into_iter()
                            .map(|(r, s)| (r, Span::new(s.start + shift, s.end + shift)))
                            .collect(),
                    )
                })
                .collect();
            Clause {
                subj,
                vp,
                verbs,
                tuples,
            }
        }
    }
}

fn finish(id: String, chunk: Chunk, verbs: Vec<usize>, tuples: Vec<(usize, Vec<(Role, Span)>)>) -> ParsedSentence {
    let tree = read_bracketed_tree(&format!("(ROOT {})", chunk.ptb)).expect("generated tree is well formed");
    let rows = chunk
        .heads
        .iter()
        .zip(&chunk.rels)
        .map(|(h, r)| DepRow {
            head: *h,
            deprel: if h.is_none() { "ROOT".to_string() } else { r.clone() },
        })
        .collect();
    let rows = DependencyRows::new(rows).expect("generated heads form a tree");
    let tuples = tuples
        .into_iter()
        .map(|(verb, spans)| Tuple::new(verb, spans.into_iter().collect::<BTreeMap<_, _>>(), 1.0))
        .collect::<Vec<_>>();
    ParsedSentence::new(id, &chunk.words, tree, rows, verbs, tuples).expect("generated sentence is consistent")
}

/// One template sentence with a single indicator verb, ending in a full stop.
pub fn template_sentence<R: Rng + ?Sized>(rng: &mut R, id: impl Into<String>) -> ParsedSentence {
    let (root, verbs, tuples) = clause(rng, false).into_s(Some(word(".", ".")));
    finish(id.into(), root, verbs, tuples)
}

/// `X says that <clause> .` with two verbs and a tuple for the inner one only.
pub fn reporting_sentence<R: Rng + ?Sized>(rng: &mut R, id: impl Into<String>) -> ParsedSentence {
    let (root, verbs, tuples) = clause(rng, true).into_s(Some(word(".", ".")));
    finish(id.into(), root, verbs, tuples)
}

/// `n` template sentences with ids `syn-0`, `syn-1`, …
pub fn template_corpus<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<ParsedSentence> {
    (0..n).map(|i| template_sentence(rng, format!("syn-{i}"))).collect()
}

const RANDOM_PHRASES: &[&str] = &["S", "NP", "VP", "PP", "SBAR", "ADJP"];
const RANDOM_POS: &[&str] = &["NN", "VB", "DT", "JJ", "IN", "."];
const RANDOM_RELS: &[&str] = &["nsubj", "dobj", "det", "amod", "prep", "pobj"];

fn random_subtree<R: Rng + ?Sized>(rng: &mut R, first: usize, len: usize, depth: usize, out: &mut String) {
    if len == 1 && depth > 0 && (depth > 3 || rng.gen_bool(0.6)) {
        out.push_str(&format!("({} w{first})", pick(rng, RANDOM_POS)));
        return;
    }
    out.push('(');
    out.push_str(if depth == 0 { "S" } else { pick(rng, RANDOM_PHRASES) });
    let mut start = first;
    let mut remaining = len;
    let max_children = remaining.min(4);
    let min_children = if depth > 3 { max_children.min(2) } else { 1 };
    let children = rng.gen_range(min_children..=max_children);
    for k in 0..children {
        let left = children - k - 1;
        let size = if left == 0 { remaining } else { rng.gen_range(1..=remaining - left) };
        out.push(' ');
        if size == 1 && rng.gen_bool(0.5) {
            out.push_str(&format!("({} w{start})", pick(rng, RANDOM_POS)));
        } else {
            random_subtree(rng, start, size, depth + 1, out);
        }
        start += size;
        remaining -= size;
    }
    out.push(')');
}

/// Bracketed tree over tokens `w0 … w{n-1}` rooted at `S`.
pub fn random_ptb<R: Rng + ?Sized>(rng: &mut R, n: usize) -> String {
    let mut out = String::new();
    random_subtree(rng, 0, n.max(1), 0, &mut out);
    out
}

/// Random sentence of `n` tokens with a random dependency tree, every token
/// a verb candidate with probability one half, and one gold tuple whose
/// relation is a single verb.
pub fn random_sentence<R: Rng + ?Sized>(rng: &mut R, id: impl Into<String>, n: usize) -> ParsedSentence {
    let n = n.max(1);
    let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let tree = read_bracketed_tree(&random_ptb(rng, n)).expect("random tree is well formed");

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut rows = vec![
        DepRow {
            head: None,
            deprel: "ROOT".to_string()
        };
        n
    ];
    for k in 1..n {
        let head = order[rng.gen_range(0..k)];
        rows[order[k]] = DepRow {
            head: Some(head),
            deprel: pick(rng, RANDOM_RELS).to_string(),
        };
    }
    let rows = DependencyRows::new(rows).expect("attachment to earlier nodes is acyclic");

    let mut verbs: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    if verbs.is_empty() {
        verbs.push(rng.gen_range(0..n));
    }
    let verb = *verbs.choose(rng).expect("non-empty");
    let mut spans = BTreeMap::from([(Role::Rel, Span::new(verb, verb))]);
    if verb > 0 {
        spans.insert(Role::Arg(0), Span::new(rng.gen_range(0..verb), verb - 1));
    }
    if verb + 1 < n {
        spans.insert(Role::Arg(1), Span::new(verb + 1, rng.gen_range(verb + 1..n)));
    }
    let tuples = vec![Tuple::new(verb, spans, 1.0)];
    ParsedSentence::new(id.into(), &words, tree, rows, verbs, tuples).expect("random sentence is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::expand_instances;
    use crate::tuple::TagSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn template_sentences_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let corpus = template_corpus(&mut rng, 200);
        let ts = TagSet::default();
        for s in &corpus {
            assert_eq!(s.surfaces().last(), Some(&"."));
            assert_eq!(s.const_tree().root_tag(), "S");
            assert_eq!(s.verbs().len(), 1);
            assert_eq!(expand_instances(s, &ts).unwrap().len(), 1);
        }
    }

    #[test]
    fn reporting_clause_shifts_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = reporting_sentence(&mut rng, "r");
        let ts = TagSet::default();
        let all_o = expand_instances(&s, &ts)
            .unwrap()
            .iter()
            .filter(|i| i.labels.iter().all(|t| *t == crate::tuple::Tag::O))
            .count();
        assert_eq!(all_o, 1, "the reporting verb carries no tuple");
        let t = &s.gold_tuples()[0];
        let that = s.surfaces().iter().position(|w| *w == "that").unwrap();
        assert!(t.spans.values().all(|sp| sp.start > that));
        assert_eq!(s.verbs().len(), 2);
    }

    #[test]
    fn template_generation_is_seeded() {
        let a = template_corpus(&mut ChaCha8Rng::seed_from_u64(3), 5);
        let b = template_corpus(&mut ChaCha8Rng::seed_from_u64(3), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn random_sentences_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..12 {
            for k in 0..20 {
                let s = random_sentence(&mut rng, format!("{n}-{k}"), n);
                assert_eq!(s.len(), n);
                assert_eq!(s.const_tree().leaf_count(), n);
            }
        }
    }
}
