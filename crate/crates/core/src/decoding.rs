//! Generation strategies over a [`LanguageModel`].
//!
//! Aspect-guided generation scores each candidate `v` as
//!
//! ```text
//! (1 - α - β)·p(v | x<t)  -  α·max_j s(h_v, h_xj)  +  β·max_i s(h_v, h_ai)
//! ```
//!
//! where `s` is cosine similarity, `x<t` the prefix and `a_i` the item's
//! aspect tokens. The candidate set is the top-k of `p` extended with the
//! in-vocabulary aspect tokens. Contrastive search is the same score with
//! β = 0 and no aspect extension; α = β = 0 reduces to greedy search.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;
use crate::lm::{cosine_similarity, Distribution, LanguageModel, TokenId, Vocabulary};

pub const DEFAULT_MAX_LEN: usize = 350;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("alpha {0} is outside [0, 1]")]
    Alpha(f64),
    #[error("beta {0} is outside [0, 1]")]
    Beta(f64),
    #[error("alpha + beta = {0} exceeds 1")]
    WeightSum(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
    #[error("bow_weight {0} must be finite and nonnegative")]
    BowWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Stochastic,
    Contrastive,
    Agg,
    BowRescore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub bow_weight: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            mode: DecodeMode::Agg,
            alpha: 0.2,
            beta: 0.2,
            k: 5,
            bow_weight: 1.0,
            max_len: DEFAULT_MAX_LEN,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(DecodeError::Alpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(DecodeError::Beta(self.beta));
        }
        if self.alpha + self.beta > 1.0 + 1e-12 {
            return Err(DecodeError::WeightSum(self.alpha + self.beta));
        }
        if self.k == 0 {
            return Err(DecodeError::ZeroK);
        }
        if self.max_len == 0 {
            return Err(DecodeError::ZeroMaxLen);
        }
        if !(self.bow_weight.is_finite() && self.bow_weight >= 0.0) {
            return Err(DecodeError::BowWeight(self.bow_weight));
        }
        Ok(())
    }

    /// Weight on model confidence, `1 - α - β`.
    pub fn confidence_weight(&self) -> f64 {
        1.0 - self.alpha - self.beta
    }
}

/// One scored candidate. For the agg and contrastive modes
/// `total = (1-α-β)·confidence - α·degeneration + β·aspect`; greedy and
/// stochastic rows carry `total = confidence`; BoW rows carry
/// `aspect ∈ {0, 1}` and `total = ln(confidence) + bow_weight·aspect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub candidate: String,
    pub confidence: f64,
    pub degeneration: f64,
    pub aspect: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub selected: String,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Eos,
    MaxLen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    /// Generated tokens, excluding the prompt and the final EOS.
    pub tokens: Vec<String>,
    /// One entry per generated token.
    pub steps: Vec<StepTrace>,
    pub stop: StopReason,
    /// Aspect terms skipped because their head token is out of vocabulary.
    pub skipped_aspects: Vec<String>,
}

/// Aspect terms resolved to vocabulary ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AspectTokens {
    pub ids: Vec<TokenId>,
    pub skipped: Vec<String>,
}

/// Maps each aspect term to its head (last) token; out-of-vocabulary heads
/// are skipped, never forced in. Ids come back sorted and deduplicated.
pub fn resolve_aspects<S: AsRef<str>>(aspects: &[S], vocab: &Vocabulary) -> AspectTokens {
    let mut ids = BTreeSet::new();
    let mut skipped = Vec::new();
    for term in aspects {
        let term = term.as_ref();
        let head = tokenize(term).pop();
        match head.as_deref().and_then(|h| vocab.get(h)) {
            Some(id) if !Vocabulary::is_reserved(id) => {
                ids.insert(id);
            }
            _ => skipped.push(term.to_string()),
        }
    }
    AspectTokens {
        ids: ids.into_iter().collect(),
        skipped,
    }
}

/// Top-k tokens of `dist` unioned with the aspect ids, in ascending id order.
pub fn candidate_set(dist: &Distribution, k: usize, aspects: &[TokenId]) -> Vec<TokenId> {
    let mut set: BTreeSet<TokenId> = dist.top_k(k).into_iter().collect();
    set.extend(aspects.iter().copied().filter(|&a| a < dist.len()));
    set.into_iter().collect()
}

fn max_similarity<M: LanguageModel + ?Sized>(lm: &M, candidate: TokenId, others: &[TokenId]) -> f64 {
    let h = lm.representation(candidate);
    others
        .iter()
        .map(|&o| cosine_similarity(h, lm.representation(o)).expect("representations share one dimension"))
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
        .unwrap_or(0.0)
}

/// max over the prefix of s(h_v, h_xj); 0.0 for an empty prefix.
pub fn degeneration_penalty<M: LanguageModel + ?Sized>(lm: &M, candidate: TokenId, prefix: &[TokenId]) -> f64 {
    max_similarity(lm, candidate, prefix)
}

/// max over aspects of s(h_v, h_ai); 0.0 when there are no aspects.
pub fn aspect_encouragement<M: LanguageModel + ?Sized>(lm: &M, candidate: TokenId, aspects: &[TokenId]) -> f64 {
    max_similarity(lm, candidate, aspects)
}

/// Index of the largest score, first (lowest id) on ties.
fn argmax_by_score(rows: &[(TokenId, TraceRow)]) -> usize {
    let mut best = 0;
    for (i, (_, row)) in rows.iter().enumerate() {
        if row.total > rows[best].1.total {
            best = i;
        }
    }
    best
}

fn scored_step<M: LanguageModel + ?Sized>(
    lm: &M,
    prefix: &[TokenId],
    candidates: &[TokenId],
    dist: &Distribution,
    aspects: &[TokenId],
    alpha: f64,
    beta: f64,
) -> (TokenId, StepTrace) {
    let vocab = lm.vocab();
    let w = 1.0 - alpha - beta;
    let seen: Vec<TokenId> = prefix.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let rows: Vec<(TokenId, TraceRow)> = candidates
        .iter()
        .map(|&v| {
            let confidence = dist.prob(v);
            let degeneration = degeneration_penalty(lm, v, &seen);
            let aspect = aspect_encouragement(lm, v, aspects);
            let total = w * confidence - alpha * degeneration + beta * aspect;
            let row = TraceRow {
                candidate: vocab.token(v).to_string(),
                confidence,
                degeneration,
                aspect,
                total,
            };
            (v, row)
        })
        .collect();
    finish_step(vocab, rows)
}

fn finish_step(vocab: &Vocabulary, rows: Vec<(TokenId, TraceRow)>) -> (TokenId, StepTrace) {
    let best = rows[argmax_by_score(&rows)].0;
    let trace = StepTrace {
        selected: vocab.token(best).to_string(),
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    };
    (best, trace)
}

/// One aspect-guided step: argmax of the combined score over the
/// aspect-extended top-k candidate set.
pub fn agg_step<M: LanguageModel + ?Sized>(lm: &M, prefix: &[TokenId], aspects: &[TokenId], cfg: &DecodeConfig) -> (TokenId, StepTrace) {
    let dist = lm.next_token_distribution(prefix);
    let candidates = candidate_set(&dist, cfg.k, aspects);
    scored_step(lm, prefix, &candidates, &dist, aspects, cfg.alpha, cfg.beta)
}

/// Contrastive search step: `(1-α)·p - α·degeneration` over the plain top-k.
pub fn contrastive_step<M: LanguageModel + ?Sized>(lm: &M, prefix: &[TokenId], cfg: &DecodeConfig) -> (TokenId, StepTrace) {
    let dist = lm.next_token_distribution(prefix);
    let candidates = candidate_set(&dist, cfg.k, &[]);
    scored_step(lm, prefix, &candidates, &dist, &[], cfg.alpha, 0.0)
}

/// Global argmax of the next-token distribution.
pub fn greedy_step<M: LanguageModel + ?Sized>(lm: &M, prefix: &[TokenId]) -> (TokenId, StepTrace) {
    let dist = lm.next_token_distribution(prefix);
    let best = dist.argmax();
    let p = dist.prob(best);
    let row = TraceRow {
        candidate: lm.vocab().token(best).to_string(),
        confidence: p,
        degeneration: 0.0,
        aspect: 0.0,
        total: p,
    };
    finish_step(lm.vocab(), vec![(best, row)])
}

/// log of the probability mass on aspect tokens; `-inf` when no aspect is in
/// the vocabulary or the mass is zero.
pub fn bow_attribute_score(dist: &Distribution, aspects: &[TokenId]) -> f64 {
    let unique: BTreeSet<TokenId> = aspects.iter().copied().filter(|&a| a < dist.len()).collect();
    if unique.is_empty() {
        return f64::NEG_INFINITY;
    }
    unique.iter().map(|&a| dist.prob(a)).sum::<f64>().ln()
}

/// Gradient-free bag-of-words steering: argmax over the top-k of
/// `ln p(v) + bow_weight·[v is an aspect]`.
pub fn bow_rescore_step<M: LanguageModel + ?Sized>(lm: &M, prefix: &[TokenId], aspects: &[TokenId], cfg: &DecodeConfig) -> (TokenId, StepTrace) {
    let dist = lm.next_token_distribution(prefix);
    let candidates = candidate_set(&dist, cfg.k, &[]);
    let rows = candidates
        .iter()
        .map(|&v| {
            let confidence = dist.prob(v);
            let aspect = if aspects.contains(&v) { 1.0 } else { 0.0 };
            let row = TraceRow {
                candidate: lm.vocab().token(v).to_string(),
                confidence,
                degeneration: 0.0,
                aspect,
                total: confidence.ln() + cfg.bow_weight * aspect,
            };
            (v, row)
        })
        .collect();
    finish_step(lm.vocab(), rows)
}

/// Draws from the renormalized top-k distribution.
pub fn stochastic_step<M: LanguageModel + ?Sized>(lm: &M, prefix: &[TokenId], k: usize, rng: &mut ChaCha8Rng) -> (TokenId, StepTrace) {
    let dist = lm.next_token_distribution(prefix);
    let top = dist.top_k(k);
    let weights: Vec<f64> = top.iter().map(|&v| dist.prob(v)).collect();
    let chosen = match WeightedIndex::new(&weights) {
        Ok(w) => top[w.sample(rng)],
        Err(_) => top[0],
    };
    let mass: f64 = weights.iter().sum();
    let mut ids = top.clone();
    ids.sort_unstable();
    let rows = ids
        .iter()
        .map(|&v| TraceRow {
            candidate: lm.vocab().token(v).to_string(),
            confidence: dist.prob(v),
            degeneration: 0.0,
            aspect: 0.0,
            total: if mass > 0.0 { dist.prob(v) / mass } else { 0.0 },
        })
        .collect();
    let trace = StepTrace {
        selected: lm.vocab().token(chosen).to_string(),
        rows,
    };
    (chosen, trace)
}

/// Runs the configured step function from `prompt` until EOS or `max_len`
/// generated tokens. Only the stochastic mode uses the seed.
pub fn generate<M: LanguageModel + ?Sized, S: AsRef<str>, A: AsRef<str>>(
    lm: &M,
    prompt: &[S],
    aspects: &[A],
    cfg: &DecodeConfig,
) -> Result<GenerationResult, DecodeError> {
    cfg.validate()?;
    let vocab = lm.vocab();
    let resolved = resolve_aspects(aspects, vocab);
    if !resolved.skipped.is_empty() {
        log::warn!("skipping out-of-vocabulary aspects: {}", resolved.skipped.join(", "));
    }
    let mut prefix = vocab.encode(prompt);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tokens = Vec::new();
    let mut steps = Vec::new();
    let mut stop = StopReason::MaxLen;
    while tokens.len() < cfg.max_len {
        let (next, trace) = match cfg.mode {
            DecodeMode::Greedy => greedy_step(lm, &prefix),
            DecodeMode::Stochastic => stochastic_step(lm, &prefix, cfg.k, &mut rng),
            DecodeMode::Contrastive => contrastive_step(lm, &prefix, cfg),
            DecodeMode::Agg => agg_step(lm, &prefix, &resolved.ids, cfg),
            DecodeMode::BowRescore => bow_rescore_step(lm, &prefix, &resolved.ids, cfg),
        };
        if next == Vocabulary::EOS_ID {
            stop = StopReason::Eos;
            break;
        }
        prefix.push(next);
        tokens.push(vocab.token(next).to_string());
        steps.push(trace);
    }
    Ok(GenerationResult {
        tokens,
        steps,
        stop,
        skipped_aspects: resolved.skipped,
    })
}

/// One line of a generation run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub item_id: String,
    /// Source text the generation is about (a review of the item).
    pub prompt: String,
    pub aspects: Vec<String>,
    pub config: DecodeConfig,
    pub tokens: Vec<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<StepTrace>>,
}

pub fn write_run(path: impl AsRef<std::path::Path>, run: &[GenerationRecord]) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in run {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_run(path: impl AsRef<std::path::Path>) -> std::io::Result<Vec<GenerationRecord>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
