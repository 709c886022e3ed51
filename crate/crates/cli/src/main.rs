use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use xnlu_core::bitext::{import_translations, make_parallel_corpus, PseudoLangSpec};
use xnlu_core::config::{parse_list, ExperimentConfig, Mode};
use xnlu_core::corpus::{load_tsv_auto, save_tsv, LabeledUtterance};
use xnlu_core::grammar;
use xnlu_core::hardalign::{em_train, format_alignment, project_labels, viterbi_align, DiagonalPrior};
use xnlu_core::harness::{curve_is_monotone, run_ablation, run_experiment, run_learning_curve};
use xnlu_core::metrics::{intent_accuracy, slot_f1, write_conll};

#[derive(Parser)]
#[command(name = "xnlu", about = "Cross-lingual intent detection and slot filling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    no_reconstruction: bool,
    #[arg(long)]
    no_joint_src: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seed {
            c.seeds = parse_list("seed", s)?;
        }
        if let Some(m) = self.mode {
            c.mode = m;
            c.selection = m.default_selection();
        }
        c.no_reconstruction |= self.no_reconstruction;
        c.no_joint_src |= self.no_joint_src;
        c.validate()?;
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration over its seeds.
    Train(RunArgs),
    /// Few-shot learning curve over target training sizes.
    Curve {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated sizes; defaults to `few_shot_sizes` from the config.
        #[arg(long)]
        sizes: Option<String>,
    },
    /// Full model against the two ablations.
    Ablate(RunArgs),
    /// Write a pseudo-language parallel corpus with gold alignments.
    GenBitext {
        /// Source TSV; a synthetic corpus is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        grammar_seed: u64,
        #[arg(long, default_value_t = 1)]
        lexicon_seed: u64,
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[arg(long, default_value_t = 0.0)]
        fertility: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ps")]
        tag: String,
        #[arg(long, default_value = "bitext")]
        out: PathBuf,
    },
    /// Align translations with EM and project the source labels.
    Align {
        #[arg(long)]
        source: PathBuf,
        /// `id <TAB> target utterance` rows.
        #[arg(long)]
        translations: PathBuf,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value_t = 4.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.08)]
        p0: f64,
        #[arg(long, default_value = "aligned")]
        out: PathBuf,
    },
    /// Score predictions against gold data.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write a conlleval input file here.
        #[arg(long)]
        conll: Option<PathBuf>,
    },
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train(args: RunArgs) -> Result<()> {
    let config = args.config()?;
    let report = run_experiment(&config)?;
    let path = args.out.join(format!("{}.json", config.mode));
    report.write(&path)?;
    println!("{}", serde_json::to_string_pretty(&report.mean)?);
    info!("report written to {}", path.display());
    Ok(())
}

fn curve(args: RunArgs, sizes: Option<String>) -> Result<()> {
    let config = args.config()?;
    let sizes = match sizes {
        Some(s) => parse_list("sizes", &s)?,
        None => config.few_shot_sizes.clone(),
    };
    if sizes.is_empty() {
        bail!("no few-shot sizes given");
    }
    let reports = run_learning_curve(&config, &sizes)?;
    for (size, r) in sizes.iter().zip(&reports) {
        r.write(args.out.join(format!("curve-{size}.json")))?;
        println!(
            "size {size}: intent {:.4} slot f1 {:.4}",
            r.mean_metric("target", "intent_accuracy").unwrap_or(f64::NAN),
            r.mean_metric("target", "slot_f1").unwrap_or(f64::NAN)
        );
    }
    println!("monotone: {}", curve_is_monotone(&reports));
    Ok(())
}

fn ablate(args: RunArgs) -> Result<()> {
    let config = args.config()?;
    let report = run_ablation(&config)?;
    write(&args.out.join("ablation.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    for (name, f1, intent) in report.summary() {
        println!("{name}: slot f1 {f1:.4} intent {intent:.4}");
    }
    Ok(())
}

fn gen_bitext(
    input: Option<PathBuf>,
    size: usize,
    grammar_seed: u64,
    spec: PseudoLangSpec,
    out: PathBuf,
) -> Result<()> {
    let source: Vec<LabeledUtterance> = match input {
        Some(p) => load_tsv_auto(&p)?,
        None => grammar::generate(size, grammar_seed, "syn"),
    };
    let pairs = make_parallel_corpus(&source, &spec)?;
    fs::create_dir_all(&out)?;
    save_tsv(out.join("source.tsv"), &source, true)?;
    let target: Vec<LabeledUtterance> = pairs.iter().filter_map(|p| p.labeled_target()).collect();
    save_tsv(out.join("target.tsv"), &target, true)?;
    let translations: String =
        pairs.iter().map(|p| format!("{}\t{}\n", p.source.id, p.target_tokens.join(" "))).collect();
    write(&out.join("translations.tsv"), translations)?;
    let links: String =
        pairs.iter().map(|p| format_alignment(p.gold_alignment.as_deref().unwrap_or(&[])) + "\n").collect();
    write(&out.join("gold.align"), links)?;
    println!("{} pairs written to {}", pairs.len(), out.display());
    Ok(())
}

fn align(source: PathBuf, translations: PathBuf, iterations: usize, prior: DiagonalPrior, out: PathBuf) -> Result<()> {
    prior.validate()?;
    let src = load_tsv_auto(&source)?;
    let pairs = import_translations(&src, &translations)?;
    let (table, trace) = em_train(&pairs, iterations, &prior)?;
    fs::create_dir_all(&out)?;
    let mut links = String::new();
    let mut projected = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let a = viterbi_align(p, &table, &prior);
        links.push_str(&a.to_line());
        links.push('\n');
        let tags = project_labels(&p.source.tags, &a)?;
        projected.push(LabeledUtterance::new(p.source.id.clone(), p.target_tokens.clone(), tags, p.source.intent.clone())?);
    }
    write(&out.join("viterbi.align"), links)?;
    save_tsv(out.join("projected.tsv"), &projected, true)?;
    println!("log-likelihood by iteration: {:?}", trace.log_likelihood);
    Ok(())
}

fn score(gold: PathBuf, pred: PathBuf, conll: Option<PathBuf>) -> Result<()> {
    let g = load_tsv_auto(&gold)?;
    let p = load_tsv_auto(&pred)?;
    if g.len() != p.len() {
        bail!("{} gold rows but {} predicted rows", g.len(), p.len());
    }
    for (a, b) in g.iter().zip(&p) {
        if a.id != b.id {
            bail!("row order differs: gold `{}` vs predicted `{}`", a.id, b.id);
        }
    }
    let ids: Vec<String> = g.iter().map(|u| u.id.clone()).collect();
    let gt: Vec<Vec<String>> = g.iter().map(|u| u.tags.clone()).collect();
    let pt: Vec<Vec<String>> = p.iter().map(|u| u.tags.clone()).collect();
    let s = slot_f1(&ids, &gt, &pt)?;
    let gi: Vec<&str> = g.iter().map(|u| u.intent.as_str()).collect();
    let pi: Vec<&str> = p.iter().map(|u| u.intent.as_str()).collect();
    let report = serde_json::json!({
        "intent_accuracy": intent_accuracy(&gi, &pi)?,
        "slot_f1": s.f1,
        "slot_precision": s.precision,
        "slot_recall": s.recall,
        "gold_spans": s.counts.gold,
        "predicted_spans": s.counts.predicted,
        "correct_spans": s.counts.correct,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(path) = conll {
        let tokens: Vec<Vec<String>> = g.iter().map(|u| u.tokens.clone()).collect();
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_conll(std::io::BufWriter::new(f), &tokens, &gt, &pt)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Curve { run, sizes } => curve(run, sizes),
        Command::Ablate(a) => ablate(a),
        Command::GenBitext { input, size, grammar_seed, lexicon_seed, window, fertility, seed, tag, out } => {
            let spec = PseudoLangSpec { lexicon_seed, reversal_window: window, fertility_rate: fertility, seed, lang_tag: tag };
            gen_bitext(input, size, grammar_seed, spec, out)
        }
        Command::Align { source, translations, iterations, lambda, p0, out } => {
            align(source, translations, iterations, DiagonalPrior { tension: lambda, null_prob: p0 }, out)
        }
        Command::Score { gold, pred, conll } => score(gold, pred, conll),
    }
}
