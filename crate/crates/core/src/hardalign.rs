//! Projection baseline: a word aligner with a diagonal position prior
//! (target-given-source, one parent per target token) trained by EM, label
//! projection through its Viterbi links, and projection scoring.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bio;
use crate::bitext::AlignedPair;
use crate::error::{Error, Result};

const FLOOR: f64 = 1e-12;
const NULL: u32 = 0;

/// Position prior favoring links near the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPrior {
    /// Tension λ: how sharply mass concentrates on the diagonal.
    pub tension: f64,
    /// Probability p0 that a target token links to NULL.
    pub null_prob: f64,
}

impl Default for DiagonalPrior {
    fn default() -> Self {
        DiagonalPrior { tension: 4.0, null_prob: 0.08 }
    }
}

impl DiagonalPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.tension > 0.0 && self.null_prob > 0.0 && self.null_prob < 1.0) {
            return Err(Error::Invalid(format!("invalid diagonal prior {self:?}")));
        }
        Ok(())
    }

    /// Link probabilities from target position `j` (1-based) to source
    /// positions 1..=S. They sum to `1 − p0`; NULL takes the remaining `p0`.
    pub fn weights(&self, j: usize, s_len: usize, t_len: usize) -> Vec<f64> {
        let jt = j as f64 / t_len as f64;
        let raw: Vec<f64> =
            (1..=s_len).map(|i| (-self.tension * (i as f64 / s_len as f64 - jt).abs()).exp()).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|w| (1.0 - self.null_prob) * w / z).collect()
    }
}

/// Sparse lexical table t(target | source), with a NULL source.
#[derive(Clone, Debug)]
pub struct TranslationTable {
    src_ids: HashMap<String, u32>,
    tgt_ids: HashMap<String, u32>,
    probs: HashMap<(u32, u32), f64>,
    uniform: Option<f64>,
}

impl TranslationTable {
    fn id_of(ids: &mut HashMap<String, u32>, tok: &str, offset: u32) -> u32 {
        let next = ids.len() as u32 + offset;
        *ids.entry(tok.to_string()).or_insert(next)
    }

    fn lookup(&self, src: u32, tgt: Option<u32>) -> f64 {
        if let Some(u) = self.uniform {
            return u;
        }
        tgt.and_then(|t| self.probs.get(&(src, t)).copied()).unwrap_or(FLOOR).max(FLOOR)
    }

    /// t(target | source); `None` as source means NULL.
    pub fn prob(&self, source: Option<&str>, target: &str) -> f64 {
        let src = match source {
            None => NULL,
            Some(s) => match self.src_ids.get(s) {
                Some(&id) => id,
                None => return FLOOR,
            },
        };
        self.lookup(src, self.tgt_ids.get(target).copied())
    }

    /// Total probability mass conditioned on each source token (NULL under
    /// the key `None`), for checking normalization.
    pub fn row_sums(&self) -> Vec<(Option<String>, f64)> {
        let mut sums: HashMap<u32, f64> = HashMap::new();
        for (&(s, _), &p) in &self.probs {
            *sums.entry(s).or_default() += p;
        }
        let names: HashMap<u32, &str> = self.src_ids.iter().map(|(k, &v)| (v, k.as_str())).collect();
        let mut out: Vec<(Option<String>, f64)> =
            sums.into_iter().map(|(s, p)| (names.get(&s).map(|n| n.to_string()), p)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn encode_pair(&self, src: &[String], tgt: &[String]) -> (Vec<u32>, Vec<Option<u32>>) {
        (
            src.iter().map(|s| self.src_ids.get(s).copied().unwrap_or(u32::MAX)).collect(),
            tgt.iter().map(|t| self.tgt_ids.get(t).copied()).collect(),
        )
    }

    /// Posterior link distribution for each target token: entry 0 is NULL,
    /// entry i is source position i.
    pub fn link_posteriors(&self, src: &[String], tgt: &[String], prior: &DiagonalPrior) -> Vec<Vec<f64>> {
        let (s, t) = self.encode_pair(src, tgt);
        (0..t.len())
            .map(|j| {
                let mut scores = self.link_scores(&s, &t, j, prior);
                let z: f64 = scores.iter().sum();
                scores.iter_mut().for_each(|x| *x /= z);
                scores
            })
            .collect()
    }

    fn link_scores(&self, s: &[u32], t: &[Option<u32>], j: usize, prior: &DiagonalPrior) -> Vec<f64> {
        let w = prior.weights(j + 1, s.len(), t.len());
        std::iter::once(prior.null_prob * self.lookup(NULL, t[j]))
            .chain(s.iter().zip(&w).map(|(&si, &wi)| {
                if si == u32::MAX { wi * FLOOR } else { wi * self.lookup(si, t[j]) }
            }))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    /// Corpus log-likelihood at the start of each iteration, followed by the
    /// value after the final update.
    pub log_likelihood: Vec<f64>,
    /// Pairs skipped because one side was empty.
    pub skipped: usize,
}

/// Fits t(target | source) by EM under the diagonal prior on translated
/// pairs. Only tokens are read; gold annotations are ignored.
pub fn em_train(pairs: &[AlignedPair], iterations: usize, prior: &DiagonalPrior) -> Result<(TranslationTable, EmTrace)> {
    let tokens: Vec<(&[String], &[String])> =
        pairs.iter().map(|p| (p.source.tokens.as_slice(), p.target_tokens.as_slice())).collect();
    em_train_tokens(&tokens, iterations, prior)
}

/// [`em_train`] over raw `(source tokens, target tokens)` pairs.
pub fn em_train_tokens<S: AsRef<[String]>, T: AsRef<[String]>>(
    pairs: &[(S, T)],
    iterations: usize,
    prior: &DiagonalPrior,
) -> Result<(TranslationTable, EmTrace)> {
    prior.validate()?;
    if iterations == 0 {
        return Err(Error::Invalid("EM needs at least one iteration".into()));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut table =
        TranslationTable { src_ids: HashMap::new(), tgt_ids: HashMap::new(), probs: HashMap::new(), uniform: None };
    let mut trace = EmTrace::default();
    let mut encoded = Vec::with_capacity(pairs.len());
    for (src, tgt) in pairs {
        let (src, tgt) = (src.as_ref(), tgt.as_ref());
        if src.is_empty() || tgt.is_empty() {
            trace.skipped += 1;
            continue;
        }
        let s: Vec<u32> = src.iter().map(|w| TranslationTable::id_of(&mut table.src_ids, w, 1)).collect();
        let t: Vec<Option<u32>> =
            tgt.iter().map(|w| Some(TranslationTable::id_of(&mut table.tgt_ids, w, 0))).collect();
        encoded.push((s, t));
    }
    if trace.skipped > 0 {
        log::warn!("em_train: skipped {} pairs with an empty side", trace.skipped);
    }
    if encoded.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    table.uniform = Some(1.0 / table.tgt_ids.len() as f64);

    for _ in 0..iterations {
        let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
        let mut totals: HashMap<u32, f64> = HashMap::new();
        let mut ll = 0.0;
        for (s, t) in &encoded {
            for j in 0..t.len() {
                let scores = table.link_scores(s, t, j, prior);
                let z: f64 = scores.iter().sum();
                ll += z.ln();
                let f = t[j].expect("training targets are known");
                for (k, score) in scores.iter().enumerate() {
                    let e = if k == 0 { NULL } else { s[k - 1] };
                    let post = score / z;
                    *counts.entry((e, f)).or_default() += post;
                    *totals.entry(e).or_default() += post;
                }
            }
        }
        trace.log_likelihood.push(ll);
        table.probs = counts.into_iter().map(|((e, f), c)| ((e, f), c / totals[&e])).collect();
        table.uniform = None;
    }
    trace.log_likelihood.push(corpus_log_likelihood(&table, &encoded, prior));
    Ok((table, trace))
}

fn corpus_log_likelihood(table: &TranslationTable, encoded: &[(Vec<u32>, Vec<Option<u32>>)], prior: &DiagonalPrior) -> f64 {
    encoded
        .iter()
        .map(|(s, t)| (0..t.len()).map(|j| table.link_scores(s, t, j, prior).iter().sum::<f64>().ln()).sum::<f64>())
        .sum()
}

/// Per-target-token link: 1-based source index, or `None` for NULL.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub links: Vec<Option<usize>>,
}

impl AlignmentResult {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// From 1-based `(source, target)` pairs. Each target gets at most one
    /// parent; unmentioned targets link to NULL.
    pub fn from_pairs(pairs: &[(usize, usize)], target_len: usize) -> Result<Self> {
        let mut links = vec![None; target_len];
        for &(i, j) in pairs {
            if i == 0 || j == 0 || j > target_len {
                return Err(Error::Invalid(format!("alignment link {i}-{j} out of range")));
            }
            if links[j - 1].replace(i).is_some() {
                return Err(Error::Invalid(format!("target {j} has more than one parent")));
            }
        }
        Ok(AlignmentResult { links })
    }

    /// 1-based `(source, target)` pairs ordered by target; NULL links omitted.
    pub fn to_pairs(&self) -> Vec<(usize, usize)> {
        self.links.iter().enumerate().filter_map(|(j, l)| l.map(|i| (i, j + 1))).collect()
    }

    /// Conventional alignment text: space-separated `i-j`, 1-based.
    pub fn to_line(&self) -> String {
        format_alignment(&self.to_pairs())
    }
}

pub fn format_alignment(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(i, j)| format!("{i}-{j}")).collect::<Vec<_>>().join(" ")
}

pub fn parse_alignment(line: &str) -> Result<Vec<(usize, usize)>> {
    line.split_whitespace()
        .map(|item| {
            let (i, j) = item.split_once('-').ok_or_else(|| Error::Invalid(format!("bad link `{item}`")))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Invalid(format!("bad link `{item}`")));
            Ok((parse(i)?, parse(j)?))
        })
        .collect()
}

/// Most probable parent per target token. Ties go to the lowest source
/// index; NULL wins only when strictly better than every source position.
pub fn viterbi_align(pair: &AlignedPair, table: &TranslationTable, prior: &DiagonalPrior) -> AlignmentResult {
    viterbi_align_tokens(&pair.source.tokens, &pair.target_tokens, table, prior)
}

pub fn viterbi_align_tokens(
    src: &[String],
    tgt: &[String],
    table: &TranslationTable,
    prior: &DiagonalPrior,
) -> AlignmentResult {
    let (s, t) = table.encode_pair(src, tgt);
    let links = (0..t.len())
        .map(|j| {
            let scores = table.link_scores(&s, &t, j, prior);
            let (best_i, best) = scores[1..]
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            if scores[0] > best { None } else { Some(best_i + 1) }
        })
        .collect();
    AlignmentResult { links }
}

/// Copies the slot type of each target token's parent (NULL → `O`) and
/// recomputes B/I prefixes over maximal same-type runs.
pub fn project_labels<S: AsRef<str>>(src_tags: &[S], alignment: &AlignmentResult) -> Result<Vec<String>> {
    let types = alignment
        .links
        .iter()
        .map(|link| match link {
            None => Ok(None),
            Some(i) => src_tags
                .get(i - 1)
                .map(|t| bio::slot_type(t.as_ref()))
                .ok_or_else(|| Error::Invalid(format!("link to source {i} beyond {} tags", src_tags.len()))),
        })
        .collect::<Result<Vec<Option<&str>>>>()?;
    Ok(bio::tags_from_types(&types))
}

/// Token-level exact-match rate over full BIO tags.
pub fn projection_accuracy<S: AsRef<str>, T: AsRef<str>>(projected: &[S], gold: &[T]) -> Result<f64> {
    if projected.len() != gold.len() {
        return Err(Error::SequenceLength { id: "projection".into(), left: projected.len(), right: gold.len() });
    }
    if gold.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let hits = projected.iter().zip(gold).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Micro-averaged projection accuracy over many utterances.
pub fn corpus_projection_accuracy(projected: &[Vec<String>], gold: &[Vec<String>]) -> Result<f64> {
    if projected.len() != gold.len() {
        return Err(Error::SequenceLength { id: "corpus".into(), left: projected.len(), right: gold.len() });
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, g) in projected.iter().zip(gold) {
        if p.len() != g.len() {
            return Err(Error::SequenceLength { id: "projection".into(), left: p.len(), right: g.len() });
        }
        hits += p.iter().zip(g).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn prior_is_proper() {
        let p = DiagonalPrior::default();
        for (j, s, t) in [(1, 1, 1), (3, 5, 7), (7, 7, 7)] {
            let w = p.weights(j, s, t);
            assert!((w.iter().sum::<f64>() + p.null_prob - 1.0).abs() < 1e-12);
        }
        let w = p.weights(2, 3, 3);
        assert!(w[1] > w[0] && w[1] > w[2]);
    }

    #[test]
    fn single_pair_fixed_point() {
        let prior = DiagonalPrior::default();
        let pairs = vec![(toks("a"), toks("a'"))];
        let (table, trace) = em_train_tokens(&pairs, 5, &prior).unwrap();
        // One target type: every conditional collapses onto it.
        assert!((table.prob(Some("a"), "a'") - 1.0).abs() < 1e-12);
        let post = table.link_posteriors(&toks("a"), &toks("a'"), &prior);
        assert!((post[0][1] - (1.0 - prior.null_prob)).abs() < 1e-12);
        assert!((post[0][0] - prior.null_prob).abs() < 1e-12);
        assert_eq!(trace.log_likelihood.len(), 6);
    }

    #[test]
    fn rows_normalized_and_likelihood_monotone() {
        let pairs = vec![
            (toks("a b c"), toks("x y z")),
            (toks("a c"), toks("x z")),
            (toks("b c d"), toks("y z w")),
            (toks("d a"), toks("w x")),
        ];
        let (table, trace) = em_train_tokens(&pairs, 5, &DiagonalPrior::default()).unwrap();
        for (_, s) in table.row_sums() {
            assert!((s - 1.0).abs() < 1e-6);
        }
        for w in trace.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", trace.log_likelihood);
        }
    }

    #[test]
    fn empty_pairs_are_counted_not_fatal() {
        let pairs = vec![(toks("a"), toks("x")), (vec![], toks("y"))];
        let (_, trace) = em_train_tokens(&pairs, 1, &DiagonalPrior::default()).unwrap();
        assert_eq!(trace.skipped, 1);
        let none: Vec<(Vec<String>, Vec<String>)> = vec![];
        assert!(em_train_tokens(&none, 1, &DiagonalPrior::default()).is_err());
        assert!(em_train_tokens(&pairs, 0, &DiagonalPrior::default()).is_err());
    }

    #[test]
    fn viterbi_is_total_on_unseen_tokens() {
        let pairs = vec![(toks("a b"), toks("x y"))];
        let prior = DiagonalPrior::default();
        let (table, _) = em_train_tokens(&pairs, 3, &prior).unwrap();
        let al = viterbi_align_tokens(&toks("a b c"), &toks("q r s t"), &table, &prior);
        assert_eq!(al.len(), 4);
        // Nothing lexical to go on: the prior picks the closest diagonal slot.
        assert_eq!(al.links[0], Some(1));
        assert_eq!(al.links[3], Some(3));
    }

    #[test]
    fn projection_rules() {
        let src = ["B-x", "I-x", "O"];
        let diag = AlignmentResult { links: vec![Some(1), Some(2), Some(3)] };
        assert_eq!(project_labels(&src, &diag).unwrap(), src);
        let split = AlignmentResult { links: vec![Some(1), Some(1)] };
        assert_eq!(project_labels(&["B-x"], &split).unwrap(), ["B-x", "I-x"]);
        let gap = AlignmentResult { links: vec![Some(1), None, Some(2)] };
        assert_eq!(project_labels(&["B-x", "I-x"], &gap).unwrap(), ["B-x", "O", "B-x"]);
        let bad = AlignmentResult { links: vec![Some(4)] };
        assert!(project_labels(&src, &bad).is_err());
    }

    #[test]
    fn projection_accuracy_counts() {
        let gold = ["O", "B-a", "I-a", "O", "O", "B-b", "O", "O", "O", "O"];
        let all_o = ["O"; 10];
        assert_eq!(projection_accuracy(&gold, &gold).unwrap(), 1.0);
        assert!((projection_accuracy(&all_o, &gold).unwrap() - 0.7).abs() < 1e-12);
        assert!(projection_accuracy(&all_o[..3], &gold).is_err());
    }

    #[test]
    fn alignment_text_format() {
        let al = AlignmentResult { links: vec![Some(2), None, Some(1)] };
        assert_eq!(al.to_line(), "2-1 1-3");
        assert_eq!(parse_alignment("2-1 1-3").unwrap(), vec![(2, 1), (1, 3)]);
        assert_eq!(AlignmentResult::from_pairs(&[(2, 1), (1, 3)], 3).unwrap(), al);
        assert!(parse_alignment("2_1").is_err());
        assert!(AlignmentResult::from_pairs(&[(1, 1), (2, 1)], 1).is_err());
    }
}
