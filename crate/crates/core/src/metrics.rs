//! Automatic evaluation: diversity, overlap, comparativeness and aspect coverage.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::Aspect;
use crate::corpus::{tokenize, ComparativeRecord, Sentence, SplitDataset};
use crate::decoding::GenerationRecord;
use crate::extraction::{classify, Classifier, Label};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no {0}-grams in the generations")]
    NoNgrams(usize),
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no generations to evaluate")]
    EmptyInput,
    #[error("n must be 1 or 2, got {0}")]
    UnsupportedOrder(usize),
    #[error("{0} generations but {1} aspect lists")]
    LengthMismatch(usize, usize),
    #[error("no generated item has a reference sentence")]
    NoReferences,
}

fn check_order(n: usize) -> Result<(), MetricsError> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(MetricsError::UnsupportedOrder(n))
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Unique n-grams over total n-grams, pooled across all generations.
pub fn distinct_n<S: AsRef<str>>(generations: &[Vec<S>], n: usize) -> Result<f64, MetricsError> {
    check_order(n)?;
    let mut unique: HashSet<Vec<&str>> = HashSet::new();
    let mut total = 0usize;
    for g in generations {
        for w in g.windows(n) {
            unique.insert(w.iter().map(AsRef::as_ref).collect());
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricsError::NoNgrams(n));
    }
    Ok(unique.len() as f64 / total as f64)
}

/// Longest common subsequence length, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_length<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_precision<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], source: &[T]) -> Result<f64, MetricsError> {
    if candidate.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    Ok(lcs_length(candidate, source) as f64 / candidate.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuOptions {
    /// Add-one smoothing of the order-2 precision.
    pub smoothing: bool,
}

fn clipped_precision<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T], n: usize, smooth: bool) -> f64 {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let total: usize = cand.values().sum();
    let matched: usize = cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
    if smooth && n > 1 {
        (matched as f64 + 1.0) / (total as f64 + 1.0)
    } else if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

/// Sentence BLEU against one reference: geometric mean of clipped
/// precisions of orders 1..=n times `min(1, exp(1 - |ref|/|cand|))`.
pub fn bleu_n<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], reference: &[T], n: usize) -> Result<f64, MetricsError> {
    bleu_n_with(candidate, reference, n, BleuOptions::default())
}

pub fn bleu_n_with<S: AsRef<str>, T: AsRef<str>>(
    candidate: &[S],
    reference: &[T],
    n: usize,
    options: BleuOptions,
) -> Result<f64, MetricsError> {
    check_order(n)?;
    if candidate.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let p = clipped_precision(candidate, reference, order, options.smoothing);
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let bp = (1.0 - reference.len() as f64 / candidate.len() as f64).exp().min(1.0);
    Ok(bp * (log_sum / n as f64).exp())
}

/// Share of generations the classifier labels comparative.
pub fn percent_comparative(generations: &[Sentence], c: &Classifier) -> Result<f64, MetricsError> {
    if generations.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let hits = generations.iter().filter(|s| classify(c, s).label == Label::Comparative).count();
    Ok(hits as f64 / generations.len() as f64)
}

fn contains_term<S: AsRef<str>>(tokens: &[S], term: &[String]) -> bool {
    !term.is_empty() && tokens.windows(term.len()).any(|w| w.iter().zip(term).all(|(a, b)| a.as_ref() == b))
}

/// Share of generations containing at least one of their aspect terms;
/// a multi-word term must appear as a contiguous token run.
pub fn percent_aspect<S: AsRef<str>, A: AsRef<str>>(generations: &[Vec<S>], aspects: &[Vec<A>]) -> Result<f64, MetricsError> {
    if generations.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if generations.len() != aspects.len() {
        return Err(MetricsError::LengthMismatch(generations.len(), aspects.len()));
    }
    let hits = generations
        .iter()
        .zip(aspects)
        .filter(|(g, terms)| terms.iter().any(|t| contains_term(g, &tokenize(t.as_ref()))))
        .count();
    Ok(hits as f64 / generations.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub d1: f64,
    pub d2: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub rouge_l_p: f64,
    pub pct_comparative: f64,
    pub pct_aspect: f64,
    pub n_samples: usize,
}

impl EvalReport {
    pub const COLUMNS: [&'static str; 7] = ["D-1", "D-2", "B-1", "B-2", "RL-P", "% Comp.", "% Asp."];

    /// Scores in column order.
    pub fn values(&self) -> [f64; 7] {
        [self.d1, self.d2, self.bleu1, self.bleu2, self.rouge_l_p, self.pct_comparative, self.pct_aspect]
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.values().iter().map(|v| format!("{v:.3}")).collect();
        let widths: Vec<usize> = Self::COLUMNS.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
        let header: Vec<String> = Self::COLUMNS.iter().zip(&widths).map(|(h, w)| format!("{h:>w$}")).collect();
        let row: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(f, "{}", header.join("  "))?;
        writeln!(f, "{}", row.join("  "))
    }
}

/// Reference sentence per item: its first test record, else first val, else first train.
pub fn references_by_item(dataset: &SplitDataset) -> BTreeMap<&str, &ComparativeRecord> {
    let mut refs = BTreeMap::new();
    for split in [&dataset.train, &dataset.val, &dataset.test] {
        let mut seen = std::collections::BTreeSet::new();
        for r in split {
            if seen.insert(r.item_id.as_str()) {
                refs.insert(r.item_id.as_str(), r);
            }
        }
    }
    refs
}

/// All seven metrics for a run.
///
/// BLEU is per sentence against the item's reference (see
/// [`references_by_item`]) and macro-averaged over generations whose item
/// has one. ROUGE-L precision is against the prompt tokens followed by the
/// aspect terms. An empty generation scores 0 on BLEU and ROUGE-L.
/// `aspects` overrides the per-record aspect lists when given.
pub fn evaluate_all(
    run: &[GenerationRecord],
    dataset: &SplitDataset,
    classifier: &Classifier,
    aspects: Option<&BTreeMap<String, Vec<Aspect>>>,
    bleu: BleuOptions,
) -> Result<EvalReport, MetricsError> {
    if run.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let gens: Vec<&[String]> = run.iter().map(|r| r.tokens.as_slice()).collect();
    let owned: Vec<Vec<&str>> = gens.iter().map(|g| g.iter().map(String::as_str).collect()).collect();
    let d1 = distinct_n(&owned, 1)?;
    let d2 = distinct_n(&owned, 2)?;

    let terms: Vec<Vec<String>> = run
        .iter()
        .map(|r| match aspects {
            Some(map) => map.get(&r.item_id).map(|v| v.iter().map(|a| a.term.clone()).collect()).unwrap_or_default(),
            None => r.aspects.clone(),
        })
        .collect();

    let refs = references_by_item(dataset);
    let (mut b1, mut b2, mut n_ref) = (0.0, 0.0, 0usize);
    let mut rouge = 0.0;
    for (record, item_terms) in run.iter().zip(&terms) {
        let mut source = tokenize(&record.prompt);
        for t in item_terms {
            source.extend(tokenize(t));
        }
        if !record.tokens.is_empty() {
            rouge += rouge_l_precision(&record.tokens, &source)?;
        }
        if let Some(reference) = refs.get(record.item_id.as_str()) {
            n_ref += 1;
            if !record.tokens.is_empty() {
                b1 += bleu_n_with(&record.tokens, &reference.tokens, 1, bleu)?;
                b2 += bleu_n_with(&record.tokens, &reference.tokens, 2, bleu)?;
            }
        }
    }
    if n_ref == 0 {
        return Err(MetricsError::NoReferences);
    }

    let sentences: Vec<Sentence> = run.iter().map(|r| Sentence::from_tokens(r.tokens.clone())).collect();
    Ok(EvalReport {
        d1,
        d2,
        bleu1: b1 / n_ref as f64,
        bleu2: b2 / n_ref as f64,
        rouge_l_p: rouge / run.len() as f64,
        pct_comparative: percent_comparative(&sentences, classifier)?,
        pct_aspect: percent_aspect(&gens.iter().map(|g| g.to_vec()).collect::<Vec<_>>(), &terms)?,
        n_samples: run.len(),
    })
}
