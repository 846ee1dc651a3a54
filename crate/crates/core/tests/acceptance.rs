//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use synoie::corpus::{load_corpus, ParsedSentence};
use synoie::eval::{load_eval_file, score, MatchMode};
use synoie::graphs::{build_const_graph, build_dep_graph, ConstVariant, Edge, FlattenConfig};
use synoie::model::{gradient_check, GradCheckSpec, LossOptions, Model, ModelConfig};
use synoie::multiview::{loss_r1, loss_r2, loss_r3, pairwise_softmax_prob, LossWeights, ViewRep};
use synoie::numerics::{Tape, Tensor};
use synoie::synth::random_sentence;
use synoie::trainer::{
    evaluate_model, format_ablation_table, run_ablation, split_corpus, train, AblationGrid, TrainConfig,
};

type Outcome = Result<String, String>;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Deserialize)]
struct Golden {
    paths: Vec<Vec<String>>,
    edges: Vec<(usize, usize, String)>,
}

fn golden(name: &str) -> Result<Golden, String> {
    let text = std::fs::read_to_string(data(&format!("golden/figure1_{name}.json"))).map_err(err)?;
    serde_json::from_str(&text).map_err(err)
}

fn edge_set(edges: &[Edge]) -> BTreeSet<(usize, usize, String)> {
    edges.iter().map(|e| (e.i, e.j, e.kind.clone())).collect()
}

fn figure() -> Result<ParsedSentence, String> {
    Ok(load_corpus(data("figure1.jsonl")).map_err(err)?.remove(0))
}

fn worked_example() -> Outcome {
    let start = Instant::now();
    let s = figure()?;
    let g = build_const_graph(&s, &FlattenConfig::default());
    let elapsed = start.elapsed();

    let p = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let table = [
        p(&["S", "NP", "NP"]),
        p(&["S", "NP", "NP"]),
        p(&["S", "NP"]),
        p(&["S", "VP"]),
        p(&["S", "VP", "S", "VP"]),
        p(&["S", "VP", "S", "VP", "NP"]),
        p(&["S", "VP", "S", "VP", "NP"]),
        p(&["S", "VP", "S", "VP", "PP"]),
        p(&["S", "VP", "S", "VP", "PP", "NP"]),
        p(&["S", "VP", "S", "VP", "PP", "NP"]),
    ];
    ensure(g.labels()[..10] == table, format!("paths differ: {:?}", g.labels()))?;

    let words = s.surfaces();
    let named: BTreeSet<(&str, &str, &str)> = g
        .edges()
        .iter()
        .map(|e| (words[e.i], words[e.j], e.kind.as_str()))
        .collect();
    let want: BTreeSet<(&str, &str, &str)> = [
        ("Mary", "'s", "NP"),
        ("Mary", "cat", "NP"),
        ("plush", "toys", "NP"),
        ("the", "room", "NP"),
        ("likes", "playing", "VP"),
        ("playing", "plush", "VP"),
        ("playing", "in", "VP"),
        ("in", "the", "PP"),
        ("playing", "room", "S"),
    ]
    .into();
    ensure(named == want, format!("edges differ: {named:?}"))?;
    ensure(!g.edges().iter().any(|e| e.i == 0 && e.j == 10), "root-S edge present")?;
    ensure(elapsed.as_secs_f64() < 1.0, format!("took {elapsed:?}"))?;
    Ok(format!("10 paths, 9 edges, {elapsed:.2?}"))
}

fn variants() -> Outcome {
    let s = figure()?;
    for (variant, name) in [
        (ConstVariant::Paper, "paper"),
        (ConstVariant::V1, "v1"),
        (ConstVariant::V2, "v2"),
        (ConstVariant::V3, "v3"),
    ] {
        let g = build_const_graph(&s, &FlattenConfig::with_variant(variant));
        let gold = golden(name)?;
        ensure(g.labels() == gold.paths.as_slice(), format!("{name}: labels differ"))?;
        ensure(
            edge_set(g.edges()) == gold.edges.iter().cloned().collect(),
            format!("{name}: edges differ"),
        )?;
    }
    let v1 = build_const_graph(&s, &FlattenConfig::with_variant(ConstVariant::V1));
    ensure(v1.labels().iter().all(|l| l.len() == 1), "v1 labels are not single tags")?;
    let v3 = build_const_graph(&s, &FlattenConfig::with_variant(ConstVariant::V3));
    ensure(v3.edges().iter().any(|e| e.i == 0 && e.j == 10), "v3 lacks the long root edge")?;
    Ok("paper, v1, v2, v3 match their golden files".into())
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let spec = GradCheckSpec {
            n: rng.gen_range(2..=8),
            d_h: rng.gen_range(4..=16),
            d_l: rng.gen_range(2..=8),
            weights: if k % 2 == 0 {
                LossWeights::default()
            } else {
                GradCheckSpec::default().weights
            },
            ..GradCheckSpec::default()
        };
        let r = gradient_check(&mut rng, &spec).map_err(err)?;
        worst = worst.max(r.max_rel_error);
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-4, format!("max relative error {worst:.3e}"))?;
    ensure(elapsed.as_secs() < 120, format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.2e} over 20 instances, {elapsed:.1?}"))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−log [exp(t·a) / Σ_k exp(c_k·a)]` written out directly.
fn neg_log_p(target: &[f64], anchor: &[f64], candidates: &[Vec<f64>]) -> f64 {
    let denom: f64 = candidates.iter().map(|c| dot(c, anchor).exp()).sum();
    -(dot(target, anchor).exp() / denom).ln()
}

fn edge(adj: &[bool], n: usize, i: usize, j: usize) -> bool {
    adj[i * n + j] && i != j
}

fn oracle_r1(views: &[(&Vec<Vec<f64>>, &[bool])]) -> f64 {
    let mut total = 0.0;
    for (h, adj) in views {
        let n = h.len();
        for i in 0..n {
            for j in 0..n {
                if edge(adj, n, i, j) {
                    total += neg_log_p(&h[j], &h[i], h);
                }
            }
        }
    }
    total
}

fn oracle_r2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (z, other) in [(a, b), (b, a)] {
        for i in 0..z.len() {
            total += neg_log_p(&other[i], &z[i], other);
        }
    }
    total
}

#[allow(clippy::needless_range_loop)]
fn oracle_r3(a: (&Vec<Vec<f64>>, &[bool]), b: (&Vec<Vec<f64>>, &[bool])) -> f64 {
    let mut total = 0.0;
    for ((hz, adj), (hother, _)) in [(a, b), (b, a)] {
        let n = hz.len();
        for i in 0..n {
            for j in 0..n {
                if edge(adj, n, i, j) {
                    total += neg_log_p(&hother[i], &hz[j], hother);
                }
            }
        }
    }
    total
}

fn loss_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=6 {
        for _ in 0..25 {
            let s = random_sentence(&mut rng, "oracle", n);
            let con_adj = build_const_graph(&s, &FlattenConfig::default()).adjacency().to_vec();
            let dep_adj = build_dep_graph(&s).adjacency().to_vec();
            let d = rng.gen_range(2..=6);
            let (hc, hd) = (random_matrix(&mut rng, n, d), random_matrix(&mut rng, n, d));

            let mut tape = Tape::new();
            let vc = tape.constant(Tensor::from_rows(&hc).map_err(err)?);
            let vd = tape.constant(Tensor::from_rows(&hd).map_err(err)?);
            let con = ViewRep {
                hidden: vc,
                adjacency: &con_adj,
            };
            let dep = ViewRep {
                hidden: vd,
                adjacency: &dep_adj,
            };
            let r1 = loss_r1(&mut tape, &[con, dep], true).map_err(err)?;
            let r2 = loss_r2(&mut tape, vc, vd).map_err(err)?;
            let r3 = loss_r3(&mut tape, con, dep, true).map_err(err)?;
            let pairs = [
                (tape.value(r1).item(), oracle_r1(&[(&hc, &con_adj), (&hd, &dep_adj)])),
                (tape.value(r2).item(), oracle_r2(&hc, &hd)),
                (tape.value(r3).item(), oracle_r3((&hc, &con_adj), (&hd, &dep_adj))),
            ];
            for (got, want) in pairs {
                worst = worst.max((got - want).abs());
            }
            cases += 1;
        }
    }
    ensure(worst < 1e-10, format!("max deviation {worst:.3e}"))?;

    let mut bit_exact = 0;
    for k in 0..20 {
        let s = random_sentence(&mut rng, "zero", 2 + k % 7);
        let m = Model::init(
            ModelConfig {
                d_h: 6,
                d_l: 3,
                ..ModelConfig::default()
            },
            std::slice::from_ref(&s),
            &mut rng,
        );
        let f = m.features(&s);
        let inst = &m.instances(std::slice::from_ref(&s)).map_err(err)?[0];
        let mut tape = Tape::new();
        let vars = m.bind(&mut tape);
        let opts = LossOptions {
            weights: LossWeights::ZERO,
            exclude_self_loops: true,
        };
        let l = m.instance_loss(&mut tape, &vars, &f, inst.verb, &inst.gold, &opts).map_err(err)?;
        ensure(
            tape.value(l.total).item().to_bits() == tape.value(l.parts.ce).item().to_bits(),
            "zero weights differ from L_CE",
        )?;
        bit_exact += 1;
    }
    Ok(format!(
        "R1/R2/R3 within {worst:.1e} of loop oracles on {cases} cases; zero weights bit-equal L_CE on {bit_exact}"
    ))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut worst_att, mut worst_soft) = (0.0f64, 0.0f64);
    let cfg = ModelConfig {
        d_h: 5,
        d_l: 3,
        ..ModelConfig::default()
    };
    for g in 0..1000 {
        let n = 1 + g % 12;
        let s = random_sentence(&mut rng, "norm", n);
        let mut m = Model::init(cfg.clone(), std::slice::from_ref(&s), &mut rng);
        for p in &mut m.params {
            *p = Tensor::uniform(p.shape(), -2.0, 2.0, &mut rng);
        }
        let f = m.features(&s);
        let mut tape = Tape::new();
        let vars = m.bind(&mut tape);
        let fwd = m.forward(&mut tape, &vars, &f, s.verbs()[0]).map_err(err)?;
        for (att, adj) in [(fwd.att_con, &f.const_adjacency), (fwd.att_dep, &f.dep_adjacency)] {
            let a = tape.value(att.ok_or("attention missing")?);
            for i in 0..n {
                let row = a.row(i);
                worst_att = worst_att.max((row.iter().sum::<f64>() - 1.0).abs());
                for j in 0..n {
                    ensure(adj[i * n + j] || row[j] == 0.0, format!("graph {g}: mass at masked ({i},{j})"))?;
                }
            }
        }
        let h: Vec<Vec<f64>> = {
            let t = tape.value(fwd.h_con.ok_or("const view missing")?);
            (0..n).map(|i| t.row(i).to_vec()).collect()
        };
        for anchor in &h {
            let mut sum = 0.0;
            for t in 0..n {
                sum += pairwise_softmax_prob(t, anchor, &h).map_err(err)?;
            }
            worst_soft = worst_soft.max((sum - 1.0).abs());
        }
    }
    ensure(worst_att < 1e-9, format!("attention row deviation {worst_att:.3e}"))?;
    ensure(worst_soft < 1e-9, format!("retrieval softmax deviation {worst_soft:.3e}"))?;
    Ok(format!(
        "1000 graphs: attention rows within {worst_att:.1e}, retrieval softmax within {worst_soft:.1e}, masked entries exactly 0"
    ))
}

fn learnability() -> Outcome {
    let start = Instant::now();
    let corpus = load_corpus(data("synthetic.jsonl")).map_err(err)?;
    ensure(corpus.len() == 50, format!("{} sentences", corpus.len()))?;
    let full_cfg = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    let ce_cfg = TrainConfig {
        use_r1: false,
        use_r2: false,
        use_r3: false,
        ..full_cfg.clone()
    };
    let (train_idx, _) = split_corpus(corpus.len(), &full_cfg);
    let train_set: Vec<ParsedSentence> = train_idx.iter().map(|i| corpus[*i].clone()).collect();

    let full = train(&corpus, &full_cfg).map_err(err)?.to_model().map_err(err)?;
    let acc = synoie::model::token_accuracy(&full, &train_set).map_err(err)?;
    let f1_full = evaluate_model(&full, &corpus, MatchMode::Exact).map_err(err)?.f1;
    let ce = train(&corpus, &ce_cfg).map_err(err)?.to_model().map_err(err)?;
    let f1_ce = evaluate_model(&ce, &corpus, MatchMode::Exact).map_err(err)?.f1;
    let elapsed = start.elapsed();

    let detail = format!(
        "token accuracy {acc:.4}, exact F1 {f1_full:.4} (CE-only {f1_ce:.4}), {:.1?}",
        elapsed
    );
    ensure(acc >= 0.99, format!("token accuracy below 0.99: {detail}"))?;
    ensure(f1_full >= 0.95, format!("F1 below 0.95: {detail}"))?;
    ensure(f1_full >= f1_ce - 0.02, format!("full model trails CE-only: {detail}"))?;
    ensure(elapsed.as_secs() < 600, format!("too slow: {detail}"))?;
    Ok(detail)
}

fn scorer() -> Outcome {
    let pred = load_eval_file(data("scorer/pred.jsonl")).map_err(err)?;
    let gold = load_eval_file(data("scorer/gold.jsonl")).map_err(err)?;
    let r = score(&pred, &gold, MatchMode::Exact, false).map_err(err)?;

    // 7 matches, 12 predictions, 13 gold tuples. Recall rises at ranks
    // 1, 2, 4, 7, 8, 9, 10 with precision 1, 1, 3/4, 4/7, 5/8, 6/9, 7/10;
    // the curve starts at (0, 1).
    let (p, rc) = (7.0 / 12.0, 7.0 / 13.0);
    let f = 2.0 * p * rc / (p + rc);
    let auc = (1.0
        + 1.0
        + (2.0 / 3.0 + 3.0 / 4.0) / 2.0
        + (1.0 / 2.0 + 4.0 / 7.0) / 2.0
        + (4.0 / 7.0 + 5.0 / 8.0) / 2.0
        + (5.0 / 8.0 + 6.0 / 9.0) / 2.0
        + (6.0 / 9.0 + 7.0 / 10.0) / 2.0)
        / 13.0;
    for (name, got, want) in [
        ("precision", r.precision, p),
        ("recall", r.recall, rc),
        ("f1", r.f1, f),
        ("auc", r.auc, auc),
    ] {
        ensure((got - want).abs() < 1e-9, format!("{name} {got} != {want}"))?;
    }
    let swapped = score(&gold, &pred, MatchMode::Exact, false).map_err(err)?;
    ensure(
        swapped.precision == r.recall && swapped.recall == r.precision,
        format!("swap gives P {} R {}", swapped.precision, swapped.recall),
    )?;
    Ok(format!(
        "P {:.6} R {:.6} F1 {:.6} AUC {:.6}; swap exchanges P and R",
        r.precision, r.recall, r.f1, r.auc
    ))
}

fn ablation_grid() -> Outcome {
    let start = Instant::now();
    let corpus = load_corpus(data("synthetic.jsonl")).map_err(err)?;
    let base = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let rows = run_ablation(&corpus, &corpus, &base, AblationGrid::Table, |_, _| {}).map_err(err)?;
    ensure(rows.len() == 8, format!("{} rows", rows.len()))?;
    let table = format_ablation_table(&rows);
    ensure(table.lines().count() == 9, "table is missing rows")?;
    println!("{table}");
    println!(
        "note: absolute benchmark scores such as 51.73 F1 / 50.88 AUC on LSOIE-wiki need a pretrained BERT \
         encoder and the full LSOIE data; they are not reproducible at desk scale. The grid above only \
         exercises the ablation switches on the synthetic corpus."
    );
    Ok(format!("8 settings trained and scored, {:.1?}", start.elapsed()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 worked-example fidelity", worked_example),
        ("2 variant behavior", variants),
        ("3 gradient correctness", gradients),
        ("4 loss oracles", loss_oracles),
        ("5 normalization invariants", normalization),
        ("6 learnability", learnability),
        ("7 scorer correctness", scorer),
        ("8 ablation grid", ablation_grid),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
