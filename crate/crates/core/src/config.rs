//! Experiment configuration, read from a flat `key = value` file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitext::PseudoLangSpec;
use crate::error::{Error, Result};
use crate::hardalign::DiagonalPrior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TargetOnly,
    Multilingual,
    ZeroshotNomt,
    ZeroshotHardalign,
    ZeroshotSoftalign,
}

impl Mode {
    pub const ALL: [Mode; 5] =
        [Mode::TargetOnly, Mode::Multilingual, Mode::ZeroshotNomt, Mode::ZeroshotHardalign, Mode::ZeroshotSoftalign];

    pub fn name(self) -> &'static str {
        match self {
            Mode::TargetOnly => "target_only",
            Mode::Multilingual => "multilingual",
            Mode::ZeroshotNomt => "zeroshot_nomt",
            Mode::ZeroshotHardalign => "zeroshot_hardalign",
            Mode::ZeroshotSoftalign => "zeroshot_softalign",
        }
    }

    pub fn is_zero_shot(self) -> bool {
        matches!(self, Mode::ZeroshotNomt | Mode::ZeroshotHardalign | Mode::ZeroshotSoftalign)
    }

    pub fn uses_translations(self) -> bool {
        matches!(self, Mode::ZeroshotHardalign | Mode::ZeroshotSoftalign)
    }

    pub fn default_selection(self) -> Selection {
        if self.is_zero_shot() {
            Selection::LastEpoch
        } else {
            Selection::DevBest
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    DevBest,
    LastEpoch,
}

impl FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dev_best" => Ok(Selection::DevBest),
            "last_epoch" => Ok(Selection::LastEpoch),
            _ => Err(Error::Config(format!("unknown selection rule `{s}`"))),
        }
    }
}

/// Where utterances come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Synthetic { train: usize, dev: usize, test: usize, seed: u64 },
    Files { train: PathBuf, dev: PathBuf, test: PathBuf },
}

/// The language evaluated as "target".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetSource {
    /// Monolingual: the source language is the target.
    None,
    /// Generated from the source splits.
    Pseudo(PseudoLangSpec),
    /// Labeled target TSVs, plus translations of the source training file
    /// for the translation-based modes.
    Files { train: Option<PathBuf>, dev: Option<PathBuf>, test: PathBuf, translations: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub d_e: usize,
    pub d_h: usize,
    /// Attention width; `None` means the model width.
    pub d_att: Option<usize>,
    /// Feed-forward width; `None` means twice the model width.
    pub d_ff: Option<usize>,
    pub tau: f64,
    pub dropout: f64,
    pub tension: f64,
    pub null_prob: f64,
    pub em_iterations: usize,
    pub min_count: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: None,
            d_e: 256,
            d_h: 128,
            d_att: None,
            d_ff: None,
            tau: 0.1,
            dropout: 0.1,
            tension: 4.0,
            null_prob: 0.08,
            em_iterations: 5,
            min_count: 1,
        }
    }
}

impl Hyper {
    pub fn prior(&self) -> DiagonalPrior {
        DiagonalPrior { tension: self.tension, null_prob: self.null_prob }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub data: DataSource,
    pub target: TargetSource,
    pub hyper: Hyper,
    pub seeds: Vec<u64>,
    pub selection: Selection,
    pub no_reconstruction: bool,
    pub no_joint_src: bool,
    /// Labeled target utterances added to training; 0 is zero-shot.
    pub few_shot: usize,
    pub few_shot_sizes: Vec<usize>,
    /// Held-out pairs scored for alignment recovery.
    pub align_eval_pairs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::TargetOnly,
            data: DataSource::Synthetic { train: 2000, dev: 500, test: 500, seed: 1 },
            target: TargetSource::None,
            hyper: Hyper::default(),
            seeds: vec![1, 2, 3, 4, 5],
            selection: Selection::DevBest,
            no_reconstruction: false,
            no_joint_src: false,
            few_shot: 0,
            few_shot_sizes: Vec::new(),
            align_eval_pairs: 200,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

#[derive(Default)]
struct Raw {
    data: Option<String>,
    train_size: Option<usize>,
    dev_size: Option<usize>,
    test_size: Option<usize>,
    grammar_seed: Option<u64>,
    source_train: Option<PathBuf>,
    source_dev: Option<PathBuf>,
    source_test: Option<PathBuf>,
    target: Option<String>,
    target_train: Option<PathBuf>,
    target_dev: Option<PathBuf>,
    target_test: Option<PathBuf>,
    translations: Option<PathBuf>,
    pseudo: PseudoLangSpec,
    selection: Option<Selection>,
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut raw = Raw { pseudo: PseudoLangSpec { reversal_window: 3, ..Default::default() }, ..Raw::default() };
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let h = &mut c.hyper;
            match key {
                "mode" => c.mode = value.parse()?,
                "data" => raw.data = Some(value.to_string()),
                "train_size" => raw.train_size = Some(parse(key, value)?),
                "dev_size" => raw.dev_size = Some(parse(key, value)?),
                "test_size" => raw.test_size = Some(parse(key, value)?),
                "grammar_seed" => raw.grammar_seed = Some(parse(key, value)?),
                "source_train" => raw.source_train = Some(path(value)),
                "source_dev" => raw.source_dev = Some(path(value)),
                "source_test" => raw.source_test = Some(path(value)),
                "target" => raw.target = Some(value.to_string()),
                "target_train" => raw.target_train = Some(path(value)),
                "target_dev" => raw.target_dev = Some(path(value)),
                "target_test" => raw.target_test = Some(path(value)),
                "translations" => raw.translations = Some(path(value)),
                "pseudo_lexicon_seed" => raw.pseudo.lexicon_seed = parse(key, value)?,
                "pseudo_window" => raw.pseudo.reversal_window = parse(key, value)?,
                "pseudo_fertility" => raw.pseudo.fertility_rate = parse(key, value)?,
                "pseudo_seed" => raw.pseudo.seed = parse(key, value)?,
                "pseudo_tag" => raw.pseudo.lang_tag = value.to_string(),
                "epochs" => h.epochs = parse(key, value)?,
                "batch_size" => h.batch_size = parse(key, value)?,
                "learning_rate" => h.learning_rate = parse(key, value)?,
                "clip_norm" => h.clip_norm = Some(parse(key, value)?),
                "d_e" => h.d_e = parse(key, value)?,
                "d_h" => h.d_h = parse(key, value)?,
                "d_att" => h.d_att = Some(parse(key, value)?),
                "d_ff" => h.d_ff = Some(parse(key, value)?),
                "tau" => h.tau = parse(key, value)?,
                "dropout" => h.dropout = parse(key, value)?,
                "lambda" => h.tension = parse(key, value)?,
                "p0" => h.null_prob = parse(key, value)?,
                "em_iterations" => h.em_iterations = parse(key, value)?,
                "min_count" => h.min_count = parse(key, value)?,
                "seeds" => c.seeds = parse_list(key, value)?,
                "selection" => raw.selection = Some(value.parse()?),
                "no_reconstruction" => c.no_reconstruction = parse_bool(key, value)?,
                "no_joint_src" => c.no_joint_src = parse_bool(key, value)?,
                "few_shot" => c.few_shot = parse(key, value)?,
                "few_shot_sizes" => c.few_shot_sizes = parse_list(key, value)?,
                "align_eval_pairs" => c.align_eval_pairs = parse(key, value)?,
                _ => return Err(Error::Config(format!("line {}: unknown key `{key}`", n + 1))),
            }
        }
        c.selection = raw.selection.unwrap_or(c.mode.default_selection());
        let synthetic_default = ExperimentConfig::default().data;
        c.data = match raw.data.as_deref().unwrap_or("synthetic") {
            "synthetic" => {
                let DataSource::Synthetic { train, dev, test, seed } = synthetic_default else { unreachable!() };
                DataSource::Synthetic {
                    train: raw.train_size.unwrap_or(train),
                    dev: raw.dev_size.unwrap_or(dev),
                    test: raw.test_size.unwrap_or(test),
                    seed: raw.grammar_seed.unwrap_or(seed),
                }
            }
            "files" => {
                let need = |p: Option<PathBuf>, k: &str| p.ok_or_else(|| Error::Config(format!("data = files needs `{k}`")));
                DataSource::Files {
                    train: need(raw.source_train, "source_train")?,
                    dev: need(raw.source_dev, "source_dev")?,
                    test: need(raw.source_test, "source_test")?,
                }
            }
            other => return Err(Error::Config(format!("unknown data source `{other}`"))),
        };
        c.target = match raw.target.as_deref().unwrap_or("none") {
            "none" => TargetSource::None,
            "pseudo" => TargetSource::Pseudo(raw.pseudo),
            "files" => TargetSource::Files {
                train: raw.target_train,
                dev: raw.target_dev,
                test: raw.target_test.ok_or_else(|| Error::Config("target = files needs `target_test`".into()))?,
                translations: raw.translations,
            },
            other => return Err(Error::Config(format!("unknown target `{other}`"))),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let h = &self.hyper;
        if h.epochs == 0 || h.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&h.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", h.dropout)));
        }
        h.prior().validate()?;
        if let TargetSource::Pseudo(spec) = &self.target {
            spec.validate()?;
        }
        if self.mode.is_zero_shot() && self.target == TargetSource::None {
            return Err(Error::Config(format!("mode {} needs a target language", self.mode)));
        }
        if self.mode == Mode::ZeroshotNomt && self.no_joint_src && self.few_shot == 0 {
            return Err(Error::Config("zeroshot_nomt without source training data has nothing to train on".into()));
        }
        if self.mode.uses_translations() {
            if let TargetSource::Files { translations: None, .. } = &self.target {
                return Err(Error::Config(format!("mode {} needs `translations`", self.mode)));
            }
        }
        Ok(())
    }
}
