//! Experiment driver: data assembly per mode, training, evaluation and
//! reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xnlu_autodiff::{Adam, AdamConfig};

use crate::align::{alignment_accuracy, joint_train_step, JointOptions, PairBatch};
use crate::bitext::{import_translations, make_parallel_corpus, AlignedPair};
use crate::config::{DataSource, ExperimentConfig, Hyper, Mode, Selection, TargetSource};
use crate::corpus::{epoch_order, load_tsv_auto, to_batches, Batch, LabelMaps, LabeledUtterance, Vocabulary};
use crate::error::{Error, Result};
use crate::grammar;
use crate::hardalign::{corpus_projection_accuracy, em_train, project_labels, viterbi_align};
use crate::heads::predict_many;
use crate::metrics::{evaluate, EvalReport};
use crate::model::{derive_seed, Model, ModelDims};

const EVAL_CHUNK: usize = 64;

/// All data a run may touch. Training code only sees what
/// [`training_inputs`] extracts from it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub source_train: Vec<LabeledUtterance>,
    pub source_dev: Vec<LabeledUtterance>,
    pub source_test: Vec<LabeledUtterance>,
    /// Translations of `source_train`, possibly with gold annotations.
    pub train_pairs: Option<Vec<AlignedPair>>,
    pub test_pairs: Option<Vec<AlignedPair>>,
    pub target_train: Option<Vec<LabeledUtterance>>,
    pub target_dev: Option<Vec<LabeledUtterance>>,
    pub target_test: Vec<LabeledUtterance>,
    pub labels: LabelMaps,
}

fn labeled_targets(pairs: &[AlignedPair]) -> Result<Vec<LabeledUtterance>> {
    pairs
        .iter()
        .map(|p| p.labeled_target().ok_or_else(|| Error::Invalid(format!("pair `{}` has no gold tags", p.source.id))))
        .collect()
}

/// Loads or generates every split the config names. Fails before any
/// training when something required is missing.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (source_train, source_dev, source_test) = match &config.data {
        DataSource::Synthetic { train, dev, test, seed } => {
            let s = grammar::splits(*train, *dev, *test, *seed);
            (s.train, s.dev, s.test)
        }
        DataSource::Files { train, dev, test } => (load_tsv_auto(train)?, load_tsv_auto(dev)?, load_tsv_auto(test)?),
    };
    if source_train.is_empty() || source_test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut p = Prepared {
        train_pairs: None,
        test_pairs: None,
        target_train: Some(source_train.clone()),
        target_dev: Some(source_dev.clone()),
        target_test: source_test.clone(),
        labels: LabelMaps { intents: vec![], tags: vec![] },
        source_train,
        source_dev,
        source_test,
    };
    match &config.target {
        TargetSource::None => {}
        TargetSource::Pseudo(spec) => {
            let train = make_parallel_corpus(&p.source_train, spec)?;
            let dev = make_parallel_corpus(&p.source_dev, spec)?;
            let test = make_parallel_corpus(&p.source_test, spec)?;
            p.target_train = Some(labeled_targets(&train)?);
            p.target_dev = Some(labeled_targets(&dev)?);
            p.target_test = labeled_targets(&test)?;
            p.train_pairs = Some(train);
            p.test_pairs = Some(test);
        }
        TargetSource::Files { train, dev, test, translations } => {
            p.target_train = train.as_ref().map(load_tsv_auto).transpose()?;
            p.target_dev = dev.as_ref().map(load_tsv_auto).transpose()?;
            p.target_test = load_tsv_auto(test)?;
            p.train_pairs = translations.as_ref().map(|t| import_translations(&p.source_train, t)).transpose()?;
        }
    }
    if matches!(config.mode, Mode::TargetOnly | Mode::Multilingual) && p.target_train.is_none() {
        return Err(Error::Config(format!("mode {} needs labeled target training data", config.mode)));
    }
    if config.mode.uses_translations() && p.train_pairs.is_none() {
        return Err(Error::Config(format!("mode {} needs translations", config.mode)));
    }
    if config.few_shot > 0 && p.target_train.as_ref().is_none_or(|t| t.len() < config.few_shot) {
        return Err(Error::Config(format!("few-shot size {} exceeds the labeled target data", config.few_shot)));
    }
    let mut sets: Vec<&[LabeledUtterance]> = vec![&p.source_train, &p.source_dev, &p.source_test, &p.target_test];
    sets.extend(p.target_train.as_deref());
    sets.extend(p.target_dev.as_deref());
    p.labels = LabelMaps::from_utterances(sets);
    Ok(p)
}

/// Seeded subsample of the labeled target training data, in data order.
pub fn few_shot_sample(target_train: &[LabeledUtterance], size: usize, seed: u64) -> Result<Vec<LabeledUtterance>> {
    if size > target_train.len() {
        return Err(Error::Config(format!("few-shot size {size} exceeds {} utterances", target_train.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 77));
    let mut idx = rand::seq::index::sample(&mut rng, target_train.len(), size).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| target_train[i].clone()).collect())
}

pub fn ids_hash(data: &[LabeledUtterance]) -> String {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for u in data {
        for b in u.id.bytes().chain(std::iter::once(0)) {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// What the optimizer sees besides the primary supervised stream.
#[derive(Clone, Debug)]
pub enum SecondStream {
    Supervised(Vec<LabeledUtterance>),
    Pairs(Vec<AlignedPair>),
}

#[derive(Clone, Debug)]
pub struct TrainingInputs {
    pub supervised: Vec<LabeledUtterance>,
    pub second: Option<SecondStream>,
}

/// Projects source tags onto unannotated pairs with the EM aligner.
pub fn project_pairs(pairs: &[AlignedPair], hyper: &Hyper) -> Result<Vec<LabeledUtterance>> {
    let prior = hyper.prior();
    let (table, trace) = em_train(pairs, hyper.em_iterations, &prior)?;
    info!("em log-likelihood {:?}", trace.log_likelihood);
    pairs
        .iter()
        .map(|p| {
            let alignment = viterbi_align(p, &table, &prior);
            let tags = project_labels(&p.source.tags, &alignment)?;
            LabeledUtterance::new(p.source.id.clone(), p.target_tokens.clone(), tags, p.source.intent.clone())
        })
        .collect()
}

/// Zero-shot training data. Target pairs arrive stripped of every target
/// annotation, so no target label can reach training from here.
fn zero_shot_inputs(
    mode: Mode,
    source_train: &[LabeledUtterance],
    unannotated: Option<Vec<AlignedPair>>,
    few_shot: Vec<LabeledUtterance>,
    config: &ExperimentConfig,
) -> Result<TrainingInputs> {
    let mut supervised = if config.no_joint_src { Vec::new() } else { source_train.to_vec() };
    supervised.extend(few_shot);
    let second = match mode {
        Mode::ZeroshotNomt => None,
        Mode::ZeroshotHardalign => Some(SecondStream::Supervised(project_pairs(&unannotated.expect("checked"), &config.hyper)?)),
        Mode::ZeroshotSoftalign => Some(SecondStream::Pairs(unannotated.expect("checked"))),
        _ => unreachable!("not a zero-shot mode"),
    };
    Ok(TrainingInputs { supervised, second })
}

pub fn training_inputs(config: &ExperimentConfig, data: &Prepared, seed: u64) -> Result<TrainingInputs> {
    let few_shot = if config.few_shot > 0 {
        few_shot_sample(data.target_train.as_deref().unwrap_or(&[]), config.few_shot, seed)?
    } else {
        Vec::new()
    };
    let target_train = || data.target_train.clone().ok_or_else(|| Error::Config("no labeled target data".into()));
    match config.mode {
        Mode::TargetOnly => Ok(TrainingInputs { supervised: target_train()?, second: None }),
        Mode::Multilingual => {
            let mut all = data.source_train.clone();
            if config.target != TargetSource::None {
                all.extend(target_train()?);
            }
            Ok(TrainingInputs { supervised: all, second: None })
        }
        mode => {
            let unannotated = data.train_pairs.as_ref().map(|ps| ps.iter().map(AlignedPair::unannotated).collect());
            zero_shot_inputs(mode, &data.source_train, unannotated, few_shot, config)
        }
    }
}

fn build_vocab(inputs: &TrainingInputs, min_count: usize) -> Result<Vocabulary> {
    let mut seqs: Vec<&[String]> = inputs.supervised.iter().map(|u| u.tokens.as_slice()).collect();
    match &inputs.second {
        Some(SecondStream::Supervised(d)) => seqs.extend(d.iter().map(|u| u.tokens.as_slice())),
        Some(SecondStream::Pairs(ps)) => {
            for p in ps {
                seqs.push(&p.source.tokens);
                seqs.push(&p.target_tokens);
            }
        }
        None => {}
    }
    Vocabulary::build(seqs, min_count)
}

fn dims_for(hyper: &Hyper, vocab: &Vocabulary, labels: &LabelMaps) -> ModelDims {
    let d_m = 2 * hyper.d_h;
    ModelDims {
        vocab: vocab.len(),
        intents: labels.num_intents(),
        tags: labels.num_tags(),
        d_e: hyper.d_e,
        d_h: hyper.d_h,
        d_att: hyper.d_att.unwrap_or(d_m),
        d_ff: hyper.d_ff.unwrap_or(2 * d_m),
        tau: hyper.tau,
        keep_prob: 1.0 - hyper.dropout,
    }
}

/// A trained model with the vocabulary it was trained with.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub vocab: Vocabulary,
    pub labels: LabelMaps,
    pub loss_trace: Vec<f64>,
    pub selected_epoch: usize,
}

pub fn evaluate_on(trained: &Trained, data: &[LabeledUtterance]) -> Result<EvalReport> {
    let tokens: Vec<Vec<String>> = data.iter().map(|u| u.tokens.clone()).collect();
    let preds = predict_many(&trained.model, &trained.vocab, &trained.labels, &tokens, true, EVAL_CHUNK)?;
    evaluate(data, &preds)
}

/// Trains one model. `dev` is scored after every epoch when `selection` is
/// dev-best.
pub fn train(
    inputs: &TrainingInputs,
    labels: &LabelMaps,
    config: &ExperimentConfig,
    dev: Option<&[LabeledUtterance]>,
    seed: u64,
) -> Result<Trained> {
    let h = &config.hyper;
    let vocab = build_vocab(inputs, h.min_count)?;
    let model = Model::new(dims_for(h, &vocab, labels), derive_seed(seed, 100))?;
    let mut adam = Adam::new(AdamConfig { learning_rate: h.learning_rate, clip_norm: h.clip_norm, ..AdamConfig::default() });
    let opts = JointOptions { reconstruction: !config.no_reconstruction };
    let mut t = Trained { model, vocab, labels: labels.clone(), loss_trace: Vec::new(), selected_epoch: h.epochs };
    let mut best: Option<(f64, xnlu_autodiff::ParamStore, usize)> = None;

    for epoch in 0..h.epochs {
        let eseed = derive_seed(seed, 1000 + epoch as u64);
        let primary = if inputs.supervised.is_empty() {
            Vec::new()
        } else {
            to_batches(&inputs.supervised, &t.vocab, labels, h.batch_size, derive_seed(eseed, 1), true)?
        };
        let mut extra_sup: Vec<Batch> = Vec::new();
        let mut extra_pairs: Vec<PairBatch> = Vec::new();
        match &inputs.second {
            Some(SecondStream::Supervised(d)) => {
                extra_sup = to_batches(d, &t.vocab, labels, h.batch_size, derive_seed(eseed, 2), true)?;
            }
            Some(SecondStream::Pairs(ps)) => {
                for chunk in epoch_order(ps.len(), derive_seed(eseed, 3), true).chunks(h.batch_size) {
                    let refs: Vec<&AlignedPair> = chunk.iter().map(|&i| &ps[i]).collect();
                    extra_pairs.push(PairBatch::from_pairs(&refs, &t.vocab, labels)?);
                }
            }
            None => {}
        }
        let steps = primary.len().max(extra_sup.len()).max(extra_pairs.len());
        let mut total = 0.0;
        for k in 0..steps {
            let sup: Vec<&Batch> = primary.get(k).into_iter().chain(extra_sup.get(k)).collect();
            total += joint_train_step(&mut t.model, &mut adam, &sup, extra_pairs.get(k), opts, derive_seed(eseed, 10 + k as u64))?;
        }
        let mean = total / steps.max(1) as f64;
        t.loss_trace.push(mean);
        if config.selection == Selection::DevBest {
            let dev = dev.ok_or_else(|| Error::Config("dev_best selection needs a development set".into()))?;
            let r = evaluate_on(&t, dev)?;
            let score = r.intent_accuracy + r.slot_f1;
            info!("epoch {} loss {mean:.4} dev intent {:.4} slot f1 {:.4}", epoch + 1, r.intent_accuracy, r.slot_f1);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, t.model.store.clone(), epoch + 1));
            }
        } else {
            info!("epoch {} loss {mean:.4}", epoch + 1);
        }
    }
    if let Some((_, store, epoch)) = best {
        t.model.store = store;
        t.selected_epoch = epoch;
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub languages: BTreeMap<String, EvalReport>,
    pub loss_trace: Vec<f64>,
    pub selected_epoch: usize,
    /// `projection_accuracy`, `gold_projection_accuracy`, `alignment_accuracy`
    /// when the mode produces them.
    pub diagnostics: BTreeMap<String, f64>,
    pub few_shot_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seed_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    /// Per-language means of the metrics, plus a `diagnostics` entry.
    pub mean: BTreeMap<String, BTreeMap<String, f64>>,
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn mean_metric(&self, group: &str, key: &str) -> Option<f64> {
        self.mean.get(group)?.get(key).copied()
    }

    /// The report with wall-clock fields removed.
    pub fn without_timing(&self) -> RunReport {
        RunReport { timing: None, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn metric_map(r: &EvalReport) -> BTreeMap<String, f64> {
    [
        ("intent_accuracy", r.intent_accuracy),
        ("slot_f1", r.slot_f1),
        ("slot_precision", r.slot_precision),
        ("slot_recall", r.slot_recall),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn means(seeds: &[SeedReport]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for s in seeds {
        let groups = s.languages.iter().map(|(l, r)| (l.clone(), metric_map(r)));
        for (group, metrics) in groups.chain(std::iter::once(("diagnostics".to_string(), s.diagnostics.clone()))) {
            for (k, v) in metrics {
                let e = sums.entry(group.clone()).or_default().entry(k).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    sums.into_iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(g, m)| (g, m.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()))
        .collect()
}

fn run_seed(config: &ExperimentConfig, data: &Prepared, seed: u64) -> Result<SeedReport> {
    let inputs = training_inputs(config, data, seed)?;
    let dev = match config.mode {
        Mode::TargetOnly => data.target_dev.as_deref(),
        _ => Some(data.source_dev.as_slice()),
    };
    let trained = train(&inputs, &data.labels, config, dev.filter(|d| !d.is_empty()), seed)?;

    let mut languages = BTreeMap::new();
    languages.insert("target".to_string(), evaluate_on(&trained, &data.target_test)?);
    if config.mode != Mode::TargetOnly && config.target != TargetSource::None {
        languages.insert("source".to_string(), evaluate_on(&trained, &data.source_test)?);
    }

    let mut diagnostics = BTreeMap::new();
    if let (Some(SecondStream::Supervised(projected)), Some(pairs)) = (&inputs.second, &data.train_pairs) {
        if let Some(gold) = pairs.iter().map(|p| p.gold_target_tags.clone()).collect::<Option<Vec<_>>>() {
            let proj: Vec<Vec<String>> = projected.iter().map(|u| u.tags.clone()).collect();
            diagnostics.insert("projection_accuracy".into(), corpus_projection_accuracy(&proj, &gold)?);
            let through_gold = pairs
                .iter()
                .map(|p| project_labels(&p.source.tags, &p.gold_links().expect("gold pair")))
                .collect::<Result<Vec<_>>>()?;
            diagnostics.insert("gold_projection_accuracy".into(), corpus_projection_accuracy(&through_gold, &gold)?);
        }
    }
    if config.mode == Mode::ZeroshotSoftalign {
        if let Some(test_pairs) = &data.test_pairs {
            let n = config.align_eval_pairs.min(test_pairs.len());
            if n > 0 {
                let acc = alignment_accuracy(&trained.model, &trained.vocab, &trained.labels, &test_pairs[..n])?;
                diagnostics.insert("alignment_accuracy".into(), acc);
            }
        }
    }
    let few_shot_hash = (config.few_shot > 0)
        .then(|| few_shot_sample(data.target_train.as_deref().unwrap_or(&[]), config.few_shot, seed).map(|s| ids_hash(&s)))
        .transpose()?;
    Ok(SeedReport {
        seed,
        languages,
        loss_trace: trained.loss_trace,
        selected_epoch: trained.selected_epoch,
        diagnostics,
        few_shot_hash,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let data = prepare(config)?;
    run_prepared(config, &data)
}

pub fn run_prepared(config: &ExperimentConfig, data: &Prepared) -> Result<RunReport> {
    let start = Instant::now();
    let mut seeds = Vec::new();
    let mut seed_seconds = Vec::new();
    for &seed in &config.seeds {
        let t = Instant::now();
        info!("{} seed {seed}", config.mode);
        seeds.push(run_seed(config, data, seed)?);
        seed_seconds.push(t.elapsed().as_secs_f64());
    }
    Ok(RunReport {
        config: config.clone(),
        mean: means(&seeds),
        seeds,
        timing: Some(Timing { seed_seconds, total_seconds: start.elapsed().as_secs_f64() }),
    })
}

/// One report per few-shot size. Sizes are checked against the labeled
/// target data before anything is trained.
pub fn run_learning_curve(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<RunReport>> {
    config.validate()?;
    let data = prepare(&ExperimentConfig { few_shot: 0, ..config.clone() })?;
    let available = data.target_train.as_ref().map_or(0, Vec::len);
    if let Some(&bad) = sizes.iter().find(|&&s| s > available) {
        return Err(Error::Config(format!("few-shot size {bad} exceeds {available} labeled target utterances")));
    }
    sizes
        .iter()
        .map(|&size| run_prepared(&ExperimentConfig { few_shot: size, ..config.clone() }, &data))
        .collect()
}

/// Whether target slot F1 never drops as the few-shot size grows.
pub fn curve_is_monotone(reports: &[RunReport]) -> bool {
    let f1: Vec<f64> = reports.iter().filter_map(|r| r.mean_metric("target", "slot_f1")).collect();
    f1.windows(2).all(|w| w[1] >= w[0])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: RunReport,
    pub no_reconstruction: RunReport,
    pub no_joint_src: RunReport,
}

impl AblationReport {
    /// `(name, mean target slot F1, mean target intent accuracy)`.
    pub fn summary(&self) -> Vec<(&'static str, f64, f64)> {
        [("full", &self.full), ("no_reconstruction", &self.no_reconstruction), ("no_joint_src", &self.no_joint_src)]
            .into_iter()
            .map(|(n, r)| {
                (n, r.mean_metric("target", "slot_f1").unwrap_or(f64::NAN), r.mean_metric("target", "intent_accuracy").unwrap_or(f64::NAN))
            })
            .collect()
    }
}

pub fn run_ablation(config: &ExperimentConfig) -> Result<AblationReport> {
    if config.mode != Mode::ZeroshotSoftalign {
        return Err(Error::Config("ablations need mode zeroshot_softalign".into()));
    }
    config.validate()?;
    let base = ExperimentConfig { no_reconstruction: false, no_joint_src: false, ..config.clone() };
    let data = prepare(&base)?;
    Ok(AblationReport {
        full: run_prepared(&base, &data)?,
        no_reconstruction: run_prepared(&ExperimentConfig { no_reconstruction: true, ..base.clone() }, &data)?,
        no_joint_src: run_prepared(&ExperimentConfig { no_joint_src: true, ..base.clone() }, &data)?,
    })
}
