//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion.
//!
//! Environment:
//! - `XNLU_ACCEPTANCE_ONLY=1,5` runs a subset.
//! - `XNLU_ACCEPTANCE_STRICT=1` exits nonzero when any criterion fails.
//! - `XNLU_MULTIATIS_DIR` points at a directory holding `train_EN.tsv`,
//!   `dev_EN.tsv` and `test_EN.tsv`; criterion 4 is skipped without it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xnlu_autodiff::{finite_diff_check, GradCheckOptions, GradCheckReport, Tape, Tensor, TensorError, Var};
use xnlu_core::align::{total_training_loss, PairBatch};
use xnlu_core::bitext::{make_parallel_corpus, transduce, AlignedPair, PseudoLangSpec};
use xnlu_core::config::{DataSource, ExperimentConfig, Hyper, Mode, Selection, TargetSource};
use xnlu_core::corpus::{load_tsv_auto, Batch, LabelMaps, LabeledUtterance, Vocabulary};
use xnlu_core::hardalign::{corpus_projection_accuracy, em_train, project_labels, viterbi_align, DiagonalPrior};
use xnlu_core::harness::{prepare, run_prepared, Prepared, RunReport};
use xnlu_core::heads::supervised_loss;
use xnlu_core::metrics::{slot_f1, write_conll};
use xnlu_core::model::{Bound, Model, ModelDims};
use xnlu_core::grammar;

// Criterion 1
const FD_STEP: f64 = 1e-4;
const FD_REL_TOL: f64 = 1e-3;
const GRAD_SECONDS: f64 = 60.0;
// Criterion 2
const ORACLE_SEQUENCES: usize = 1000;
const ORACLE_TYPES: usize = 5;
const ORACLE_MAX_LEN: usize = 20;
const CONLL_FIXTURES: usize = 20;
// Criterion 3
const SUP_INTENT_MIN: f64 = 0.95;
const SUP_SLOT_F1_MIN: f64 = 0.90;
const SUP_EPOCHS: usize = 20;
const SUP_SECONDS: f64 = 600.0;
// Criterion 4
const ATIS_INTENT_REF: f64 = 0.9608;
const ATIS_SLOT_F1_REF: f64 = 0.9471;
const ATIS_TOL: f64 = 0.03;
// Criterion 5
const ALIGN_ACC_MIN: f64 = 0.90;
const ALIGN_PAIRS: usize = 200;
const ALIGN_SECONDS: f64 = 900.0;
// Criteria 6 and 7
const ZS_SEEDS: [u64; 3] = [1, 2, 3];
const HARDALIGN_MARGIN: f64 = 0.02;
const ABLATION_INTENT_SPREAD: f64 = 0.02;
// Criterion 8
const EM_ITERATIONS: usize = 5;
const EM_SLACK: f64 = 1e-9;
const DIAGONAL_MIN: f64 = 0.99;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    id: &'static str,
    title: &'static str,
    status: Status,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, status: if pass { Status::Pass } else { Status::Fail }, detail }
}

fn report(o: &Outcome) {
    let tag = match o.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    println!("{tag} [{}] {}: {}", o.id, o.title, o.detail);
}

/// Experiment configuration shared by the synthetic criteria.
fn desk_config(mode: Mode, target: TargetSource, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        data: DataSource::Synthetic { train: 2000, dev: 500, test: 500, seed: 1 },
        target,
        hyper: Hyper { epochs: SUP_EPOCHS, d_e: 64, d_h: 32, learning_rate: 0.01, ..Hyper::default() },
        seeds,
        selection: mode.default_selection(),
        align_eval_pairs: ALIGN_PAIRS,
        ..ExperimentConfig::default()
    }
}

fn pseudo(window: usize, fertility: f64) -> TargetSource {
    TargetSource::Pseudo(PseudoLangSpec { reversal_window: window, fertility_rate: fertility, ..PseudoLangSpec::default() })
}

fn metric(r: &RunReport, group: &str, key: &str) -> f64 {
    r.mean_metric(group, key).unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------- 1

fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn fd_opts() -> GradCheckOptions {
    GradCheckOptions { step: FD_STEP, max_coords_per_param: 12, ..GradCheckOptions::default() }
}

fn to_tensor_err(e: xnlu_core::Error) -> TensorError {
    match e {
        xnlu_core::Error::Tensor(t) => t,
        other => TensorError::Checkpoint(other.to_string()),
    }
}

type Program = Box<dyn Fn(&mut Tape, &[Var]) -> xnlu_autodiff::Result<Var>>;

fn primitive_programs() -> Vec<(&'static str, Vec<Tensor>, Program)> {
    let a = random(3, 4, 1);
    let b = random(4, 2, 2);
    let c = random(3, 4, 3);
    let row = random(1, 4, 4);
    let d = random(5, 4, 5);
    let away = Tensor::matrix(3, 4, a.data().iter().map(|x| if x.abs() < 0.05 { x + 0.1 } else { *x }).collect()).unwrap();
    vec![
        ("matmul", vec![a.clone(), b], Box::new(|t, v| t.matmul(v[0], v[1]))),
        ("matmul_nt", vec![a.clone(), d.clone()], Box::new(|t, v| t.matmul_nt(v[0], v[1]))),
        ("add", vec![a.clone(), c.clone()], Box::new(|t, v| t.add(v[0], v[1]))),
        ("add_row", vec![a.clone(), row], Box::new(|t, v| t.add_row(v[0], v[1]))),
        ("mul", vec![a.clone(), c], Box::new(|t, v| t.mul(v[0], v[1]))),
        ("scale", vec![a.clone()], Box::new(|t, v| t.scale(v[0], 0.37))),
        ("tanh", vec![a.clone()], Box::new(|t, v| t.tanh(v[0]))),
        ("sigmoid", vec![a.clone()], Box::new(|t, v| t.sigmoid(v[0]))),
        ("relu", vec![away], Box::new(|t, v| t.relu(v[0]))),
        ("concat_cols", vec![a.clone(), random(3, 2, 6)], Box::new(|t, v| t.concat_cols(&[v[0], v[1]]))),
        ("concat_rows", vec![a.clone(), d.clone()], Box::new(|t, v| t.concat_rows(&[v[0], v[1]]))),
        ("slice_cols", vec![a.clone()], Box::new(|t, v| t.slice_cols(v[0], 1, 3))),
        ("slice_rows", vec![d.clone()], Box::new(|t, v| t.slice_rows(v[0], 1, 4))),
        ("gather_rows", vec![d], Box::new(|t, v| t.gather_rows(v[0], &[4, 0, 4]))),
        ("softmax", vec![a.clone()], Box::new(|t, v| t.softmax_rows(v[0], Some(&[true, true, false, true])))),
        ("cross_entropy", vec![a.clone()], Box::new(|t, v| t.cross_entropy(v[0], &[1, 3, 0], &[1.0, 0.5, 2.0]))),
        ("sum", vec![a.clone()], Box::new(|t, v| t.sum(v[0]))),
        ("dropout", vec![a], Box::new(|t, v| t.dropout(v[0], 0.8, 5, true))),
    ]
}

fn projected(f: &Program, seed: u64) -> impl Fn(&mut Tape, &[Var]) -> xnlu_autodiff::Result<Var> + '_ {
    move |t, v| {
        let out = f(t, v)?;
        let shape = t.value(out).shape().to_vec();
        let w = t.constant(random(shape[0], shape[1], seed));
        let prod = t.mul(out, w)?;
        t.sum(prod)
    }
}

fn three_token_fixture() -> (LabeledUtterance, AlignedPair, Vocabulary, LabelMaps, ModelDims) {
    let utt = LabeledUtterance::parse("g", "from boston today", "O B-fromloc.city_name O", "flight").unwrap();
    let spec = PseudoLangSpec { reversal_window: 3, ..PseudoLangSpec::default() };
    let pair = transduce(&utt, &spec).unwrap();
    let vocab = Vocabulary::build([utt.tokens.as_slice(), pair.target_tokens.as_slice()], 1).unwrap();
    let extra = LabeledUtterance::parse("h", "x", "B-toloc.city_name", "airfare").unwrap();
    let labels = LabelMaps::from_utterances([std::slice::from_ref(&utt), std::slice::from_ref(&extra)]);
    let dims = ModelDims {
        vocab: vocab.len(),
        intents: labels.num_intents(),
        tags: labels.num_tags(),
        d_e: 4,
        d_h: 3,
        d_att: 5,
        d_ff: 6,
        tau: 0.5,
        keep_prob: 0.9,
    };
    (utt, pair, vocab, labels, dims)
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, &str) = (0.0, "");
    let mut coords = 0;
    let mut kinks = Vec::new();
    let mut record = |name: &'static str, r: GradCheckReport| {
        coords += r.checked.len();
        if !r.kinks.is_empty() {
            kinks.push(name);
        }
        if r.max_rel_error >= worst.0 {
            worst = (r.max_rel_error, name);
        }
    };
    for (i, (name, params, f)) in primitive_programs().iter().enumerate() {
        record(name, finite_diff_check(projected(f, 100 + i as u64), params, fd_opts()).unwrap());
    }

    let (utt, pair, vocab, labels, dims) = three_token_fixture();
    let model = Model::new(dims, 17).unwrap();
    let batch = Batch::from_utterances(&[(0, &utt)], &vocab, &labels).unwrap();
    record(
        "supervised_loss",
        finite_diff_check(
            |t, v| supervised_loss(t, &Bound::from_vars(v), &model, &batch, true, 3).map_err(to_tensor_err),
            &model.values(),
            fd_opts(),
        )
        .unwrap(),
    );
    let pb = PairBatch::from_pairs(&[&pair.unannotated()], &vocab, &labels).unwrap();
    record(
        "total_training_loss",
        finite_diff_check(
            |t, v| Ok(total_training_loss(t, &Bound::from_vars(v), &model, &pb, true, true, 4).map_err(to_tensor_err)?.terms.total),
            &model.values(),
            fd_opts(),
        )
        .unwrap(),
    );
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.0 < FD_REL_TOL && kinks.is_empty() && secs < GRAD_SECONDS;
    outcome(
        "1",
        "gradient correctness",
        pass,
        format!(
            "max rel error {:.2e} ({}) < {FD_REL_TOL:e} over {coords} coords, step {FD_STEP:e}, kinks {kinks:?}; {secs:.1}s < {GRAD_SECONDS}s",
            worst.0, worst.1
        ),
    )
}

// ---------------------------------------------------------------- 2

fn oracle_tags(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| match rng.random_range(0..=2 * ORACLE_TYPES) {
            0 => "O".to_string(),
            k => format!("{}-t{}", if k % 2 == 0 { "B" } else { "I" }, (k - 1) / 2),
        })
        .collect()
}

/// Chunks by the conlleval start/end-of-chunk tables, written out longhand.
fn oracle_chunks(tags: &[String]) -> Vec<(usize, usize, String)> {
    let parts: Vec<(&str, &str)> = tags.iter().map(|t| t.split_once('-').unwrap_or(("O", ""))).collect();
    let mut chunks = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=parts.len() {
        let (prev_p, prev_t) = if i == 0 { ("O", "") } else { parts[i - 1] };
        let (p, t) = if i == parts.len() { ("O", "") } else { parts[i] };
        let ends = prev_p != "O" && (p != "I" || t != prev_t);
        let starts = p == "B" || (p == "I" && (prev_p == "O" || prev_t != t));
        if ends {
            chunks.push((start.take().unwrap() + 1, i, prev_t.to_string()));
        }
        if starts {
            start = Some(i);
        }
    }
    chunks.sort();
    chunks
}

fn criterion_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    let (mut g_all, mut p_all) = (Vec::new(), Vec::new());
    let (mut gn, mut pn, mut cn) = (0usize, 0usize, 0usize);
    for k in 0..ORACLE_SEQUENCES {
        let len = rng.random_range(1..=ORACLE_MAX_LEN);
        let gold = oracle_tags(&mut rng, len);
        let pred = if k % 2 == 0 { gold.iter().map(|t| if rng.random_bool(0.2) { "O".into() } else { t.clone() }).collect() } else { oracle_tags(&mut rng, len) };
        let (gc, pc) = (oracle_chunks(&gold), oracle_chunks(&pred));
        gn += gc.len();
        pn += pc.len();
        cn += gc.iter().filter(|c| pc.contains(c)).count();
        let ids = vec![k.to_string()];
        let one = slot_f1(&ids, std::slice::from_ref(&gold), std::slice::from_ref(&pred)).unwrap();
        if (one.counts.gold, one.counts.predicted) != (gc.len(), pc.len()) || one.counts.correct != gc.iter().filter(|c| pc.contains(c)).count() {
            mismatches += 1;
        }
        g_all.push(gold);
        p_all.push(pred);
    }
    let ids: Vec<String> = (0..ORACLE_SEQUENCES).map(|i| i.to_string()).collect();
    let total = slot_f1(&ids, &g_all, &p_all).unwrap();
    let (prec, rec) = (cn as f64 / pn as f64, cn as f64 / gn as f64);
    let oracle_f1 = 2.0 * prec * rec / (prec + rec);

    let data = grammar::generate(CONLL_FIXTURES, 5, "conll");
    let toks: Vec<Vec<String>> = data.iter().map(|u| u.tokens.clone()).collect();
    let gold: Vec<Vec<String>> = data.iter().map(|u| u.tags.clone()).collect();
    let mut buf = Vec::new();
    write_conll(&mut buf, &toks, &gold, &gold).unwrap();
    let expected: String = data
        .iter()
        .map(|u| u.tokens.iter().zip(&u.tags).map(|(w, t)| format!("{w} {t} {t}\n")).collect::<String>() + "\n")
        .collect();
    let conll_ok = buf == expected.as_bytes();
    let pass = mismatches == 0 && total.f1 == oracle_f1 && conll_ok;
    outcome(
        "2",
        "metric oracle equivalence",
        pass,
        format!(
            "{ORACLE_SEQUENCES} sequences, {mismatches} count mismatches, f1 {} vs oracle {oracle_f1} (exact); conll dump of {CONLL_FIXTURES} fixtures byte-identical: {conll_ok}",
            total.f1
        ),
    )
}

// ---------------------------------------------------------------- 3, 4

fn criterion_supervised() -> (Outcome, Option<RunReport>) {
    let start = Instant::now();
    let config = ExperimentConfig {
        hyper: Hyper { learning_rate: 1e-3, ..desk_config(Mode::TargetOnly, TargetSource::None, vec![1]).hyper },
        ..desk_config(Mode::TargetOnly, TargetSource::None, vec![1])
    };
    let r = run_prepared(&config, &prepare(&config).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (intent, f1) = (metric(&r, "target", "intent_accuracy"), metric(&r, "target", "slot_f1"));
    let pass = intent >= SUP_INTENT_MIN && f1 >= SUP_SLOT_F1_MIN && secs < SUP_SECONDS;
    let o = outcome(
        "3",
        "supervised sanity (synthetic)",
        pass,
        format!(
            "intent {intent:.4} >= {SUP_INTENT_MIN}, slot f1 {f1:.4} >= {SUP_SLOT_F1_MIN}, {} intents / {} slot types, {SUP_EPOCHS} epochs; {secs:.0}s < {SUP_SECONDS}s",
            grammar::NUM_INTENTS,
            grammar::NUM_SLOT_TYPES
        ),
    );
    (o, Some(r))
}

fn criterion_real_atis() -> Outcome {
    let Some(dir) = std::env::var_os("XNLU_MULTIATIS_DIR").map(PathBuf::from) else {
        return Outcome { id: "4", title: "with-data check", status: Status::Skip, detail: "XNLU_MULTIATIS_DIR not set".into() };
    };
    let files = ["train_EN.tsv", "dev_EN.tsv", "test_EN.tsv"].map(|f| dir.join(f));
    if let Some(missing) = files.iter().find(|f| !f.exists()) {
        return Outcome { id: "4", title: "with-data check", status: Status::Skip, detail: format!("{} not found", missing.display()) };
    }
    let train = load_tsv_auto(&files[0]).unwrap();
    let intents: std::collections::BTreeSet<&str> = train.iter().map(|u| u.intent.as_str()).collect();
    let [train_f, dev_f, test_f] = files;
    let config = ExperimentConfig {
        mode: Mode::TargetOnly,
        data: DataSource::Files { train: train_f, dev: dev_f, test: test_f },
        seeds: vec![1],
        selection: Selection::DevBest,
        ..ExperimentConfig::default()
    };
    let r = run_prepared(&config, &prepare(&config).unwrap()).unwrap();
    let (intent, f1) = (metric(&r, "target", "intent_accuracy"), metric(&r, "target", "slot_f1"));
    let pass = (intent - ATIS_INTENT_REF).abs() <= ATIS_TOL && (f1 - ATIS_SLOT_F1_REF).abs() <= ATIS_TOL;
    outcome(
        "4",
        "with-data check",
        pass,
        format!(
            "intent {intent:.4} within {ATIS_TOL} of {ATIS_INTENT_REF}, slot f1 {f1:.4} within {ATIS_TOL} of {ATIS_SLOT_F1_REF}; train {} utterances, {} intents",
            train.len(),
            intents.len()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_alignment() -> (Outcome, RunReport) {
    let start = Instant::now();
    let config = desk_config(Mode::ZeroshotSoftalign, pseudo(3, 0.0), vec![1]);
    let r = run_prepared(&config, &prepare(&config).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let acc = metric(&r, "diagnostics", "alignment_accuracy");
    let o = outcome(
        "5",
        "alignment recovery",
        acc >= ALIGN_ACC_MIN && secs < ALIGN_SECONDS,
        format!("hard_alignment matches gold on {acc:.4} >= {ALIGN_ACC_MIN} of source tokens in {ALIGN_PAIRS} held-out pairs (k=3, fertility 0); {secs:.0}s < {ALIGN_SECONDS}s"),
    );
    (o, r)
}

// ---------------------------------------------------------------- 6, 7

struct ZeroShot {
    data: Prepared,
    runs: BTreeMap<&'static str, RunReport>,
}

fn zero_shot_runs() -> ZeroShot {
    let base = desk_config(Mode::ZeroshotSoftalign, pseudo(3, 0.3), ZS_SEEDS.to_vec());
    let data = prepare(&base).unwrap();
    let mut runs = BTreeMap::new();
    for (name, mode) in
        [("nomt", Mode::ZeroshotNomt), ("hardalign", Mode::ZeroshotHardalign), ("softalign", Mode::ZeroshotSoftalign)]
    {
        let c = ExperimentConfig { mode, selection: mode.default_selection(), ..base.clone() };
        runs.insert(name, run_prepared(&c, &data).unwrap());
    }
    ZeroShot { data, runs }
}

fn criterion_zero_shot(z: &ZeroShot) -> Outcome {
    let f1 = |n: &str| metric(&z.runs[n], "target", "slot_f1");
    let (soft, nomt, hard) = (f1("softalign"), f1("nomt"), f1("hardalign"));
    let proj = metric(&z.runs["hardalign"], "diagnostics", "projection_accuracy");
    let gold = metric(&z.runs["hardalign"], "diagnostics", "gold_projection_accuracy");
    let pass = soft > nomt && soft >= hard - HARDALIGN_MARGIN && proj < 1.0 && gold == 1.0;
    outcome(
        "6",
        "zero-shot ordering",
        pass,
        format!(
            "mean target slot f1 over seeds {ZS_SEEDS:?}: softalign {soft:.4} > nomt {nomt:.4}: {}; softalign >= hardalign {hard:.4} - {HARDALIGN_MARGIN}: {}; projection accuracy {proj:.4} < 1: {}; gold projection {gold:.4} == 1: {}",
            soft > nomt,
            soft >= hard - HARDALIGN_MARGIN,
            proj < 1.0,
            gold == 1.0
        ),
    )
}

fn criterion_ablation(z: &ZeroShot) -> Outcome {
    let full = &z.runs["softalign"];
    let no_rec = run_prepared(&ExperimentConfig { no_reconstruction: true, ..full.config.clone() }, &z.data).unwrap();
    let no_src = run_prepared(&ExperimentConfig { no_joint_src: true, ..full.config.clone() }, &z.data).unwrap();
    let f1 = [full, &no_rec, &no_src].map(|r| metric(r, "target", "slot_f1"));
    let intent = [full, &no_rec, &no_src].map(|r| metric(r, "target", "intent_accuracy"));
    let spread = intent.iter().cloned().fold(f64::MIN, f64::max) - intent.iter().cloned().fold(f64::MAX, f64::min);
    let pass = f1[0] > f1[1] && f1[1] > f1[2] && spread < ABLATION_INTENT_SPREAD;
    outcome(
        "7",
        "ablation trend",
        pass,
        format!(
            "mean slot f1 full {:.4} > no_reconstruction {:.4}: {}; no_reconstruction > no_joint_src {:.4}: {}; intent spread {spread:.4} < {ABLATION_INTENT_SPREAD} ({:.4}/{:.4}/{:.4})",
            f1[0],
            f1[1],
            f1[0] > f1[1],
            f1[2],
            f1[1] > f1[2],
            intent[0],
            intent[1],
            intent[2]
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_em() -> Outcome {
    let prior = DiagonalPrior::default();
    let corpora = [(1, 0.0, 11), (3, 0.0, 12), (3, 0.3, 13), (2, 0.5, 14), (4, 0.1, 15)];
    let mut monotone = 0;
    for &(k, fert, seed) in &corpora {
        let data = grammar::generate(300, seed, "em");
        let spec = PseudoLangSpec { reversal_window: k, fertility_rate: fert, seed, ..PseudoLangSpec::default() };
        let (_, trace) = em_train(&make_parallel_corpus(&data, &spec).unwrap(), EM_ITERATIONS, &prior).unwrap();
        if trace.log_likelihood.windows(2).all(|w| w[1] >= w[0] - EM_SLACK) {
            monotone += 1;
        }
    }
    let data = grammar::generate(300, 21, "id");
    let pairs = make_parallel_corpus(&data, &PseudoLangSpec::default()).unwrap();
    let (table, _) = em_train(&pairs, EM_ITERATIONS, &prior).unwrap();
    let (mut diag, mut total) = (0, 0);
    let mut projected = Vec::new();
    for p in &pairs {
        let a = viterbi_align(p, &table, &prior);
        diag += a.links.iter().enumerate().filter(|(j, l)| **l == Some(j + 1)).count();
        total += a.len();
        projected.push(project_labels(&p.source.tags, &a).unwrap());
    }
    let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.gold_target_tags.clone().unwrap()).collect();
    let proj_acc = corpus_projection_accuracy(&projected, &gold).unwrap();
    let rate = diag as f64 / total as f64;
    let pass = monotone == corpora.len() && rate >= DIAGONAL_MIN && projected == gold;
    outcome(
        "8",
        "EM aligner",
        pass,
        format!(
            "log-likelihood non-decreasing (slack {EM_SLACK:e}) on {monotone}/{} corpora over {EM_ITERATIONS} iterations; identity language diagonal {rate:.4} >= {DIAGONAL_MIN}; projected == gold tags: {} (accuracy {proj_acc:.4})",
            corpora.len(),
            projected == gold
        ),
    )
}

// ---------------------------------------------------------------- 9

fn seeds_json(r: &RunReport) -> String {
    serde_json::to_string(&r.without_timing()).unwrap()
}

fn criterion_determinism(earlier: &[RunReport]) -> Outcome {
    let mut same = 0;
    for r in earlier {
        let again = run_prepared(&r.config, &prepare(&r.config).unwrap()).unwrap();
        if seeds_json(&again) == seeds_json(r) {
            same += 1;
        }
    }
    let modes: Vec<String> = earlier.iter().map(|r| r.config.mode.to_string()).collect();
    outcome(
        "9",
        "determinism",
        same == earlier.len() && !earlier.is_empty(),
        format!("{same}/{} repeated runs bit-identical ({})", earlier.len(), modes.join(", ")),
    )
}

fn main() {
    let only: Option<Vec<String>> =
        std::env::var("XNLU_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let wanted = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    let mut outcomes = Vec::new();
    let mut repeatable = Vec::new();
    let mut run = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };

    if wanted("1") {
        run(criterion_gradients());
    }
    if wanted("2") {
        run(criterion_metric_oracle());
    }
    if wanted("3") {
        let (o, r) = criterion_supervised();
        repeatable.extend(r);
        run(o);
    }
    if wanted("4") {
        run(criterion_real_atis());
    }
    if wanted("5") {
        let (o, r) = criterion_alignment();
        repeatable.push(r);
        run(o);
    }
    if wanted("6") || wanted("7") {
        let z = zero_shot_runs();
        if wanted("6") {
            run(criterion_zero_shot(&z));
        }
        if wanted("7") {
            run(criterion_ablation(&z));
        }
    }
    if wanted("8") {
        run(criterion_em());
    }
    if wanted("9") {
        if repeatable.is_empty() {
            let (_, r) = criterion_supervised();
            repeatable.extend(r);
        }
        run(criterion_determinism(&repeatable));
    }

    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    );
    for o in outcomes.iter().filter(|o| o.status == Status::Fail) {
        println!("failed: [{}] {}", o.id, o.title);
    }
    if std::env::var_os("XNLU_ACCEPTANCE_STRICT").is_some() && count(Status::Fail) > 0 {
        std::process::exit(1);
    }
}
