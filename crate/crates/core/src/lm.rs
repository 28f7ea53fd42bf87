//! Language-model contract and the reference n-gram + static embedding backend.
//!
//! Decoding consumes exactly two signals from a model: the next-token
//! distribution given a prefix, and a vector representation per token.
//! [`LanguageModel`] captures that contract; [`ReferenceModel`] pairs an
//! absolute-discounting backoff [`NGramLM`] with a PPMI/SVD
//! [`EmbeddingTable`] trained on the same vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

pub const NGRAM_FORMAT: &str = "compgen-ngram-v1";
pub const EMBEDDING_FORMAT: &str = "compgen-embeddings-v1";

pub type TokenId = usize;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    BadOrder,
    #[error("discount {0} is outside (0, 1)")]
    BadDiscount(f64),
    #[error("embedding dimension {dim} exceeds vocabulary size {vocab}")]
    DimensionTooLarge { dim: usize, vocab: usize },
    #[error("embedding dimension and window must be positive")]
    BadEmbeddingParams,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("bad model file: {0}")]
    Format(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// Token inventory. Indices 0, 1, 2 are always BOS, EOS and UNK; the rest
/// follow in the order given at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const BOS_ID: TokenId = 0;
    pub const EOS_ID: TokenId = 1;
    pub const UNK_ID: TokenId = 2;

    pub fn new<I, S>(words: I) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
        tokens.extend(words.into_iter().map(Into::into));
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(LmError::DuplicateToken(t.clone()));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Vocabulary of every distinct token in the corpus, sorted.
    pub fn from_corpus(corpus: &[Vec<String>]) -> Self {
        let words: BTreeSet<&str> = corpus
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|t| ![BOS, EOS, UNK].contains(t))
            .collect();
        Vocabulary::new(words).expect("sorted set has no duplicates")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or UNK.
    pub fn id(&self, token: &str) -> TokenId {
        self.get(token).unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn is_reserved(id: TokenId) -> bool {
        id <= Self::UNK_ID
    }
}

/// Probability vector over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self, LmError> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(LmError::InvalidDistribution(format!("entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(LmError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Distribution(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.0[id]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest-probability token, lowest index on ties.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// The `k` most probable tokens, ties broken by lower index, in rank order.
    pub fn top_k(&self, k: usize) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.0.len()).collect();
        ids.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        ids.truncate(k);
        ids
    }
}

/// What decoding needs from a model.
pub trait LanguageModel {
    fn vocab(&self) -> &Vocabulary;

    /// p(· | prefix). Implementations must return a valid [`Distribution`].
    fn next_token_distribution(&self, prefix: &[TokenId]) -> Distribution;

    /// Vector representation h_v of a token.
    fn representation(&self, token: TokenId) -> &[f64];
}

/// Absolute-discounting backoff n-gram model.
///
/// For a context `h` seen `c(h)` times with successor set `S(h)`:
/// `p(w|h) = (c(h,w) - D) / c(h)` for `w` in `S(h)`, and the reserved mass
/// `D·|S(h)| / c(h)` is spread over unseen successors in proportion to the
/// next-lower-order model, renormalized over those unseen tokens. Unseen
/// contexts fall through to the lower order; order 0 is uniform over every
/// token except BOS. When `S(h)` already covers all predictable tokens the
/// relative frequencies are used undiscounted.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    discount: f64,
    vocab: Vocabulary,
    /// `tables[m]` maps a length-`m` context to successor counts.
    tables: Vec<BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>>,
}

pub fn train_ngram_lm(corpus: &[Vec<String>], order: usize, discount: f64) -> Result<NGramLM, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let vocab = Vocabulary::from_corpus(corpus);
    NGramLM::train_with_vocab(corpus, vocab, order, discount)
}

impl NGramLM {
    pub fn train_with_vocab(corpus: &[Vec<String>], vocab: Vocabulary, order: usize, discount: f64) -> Result<Self, LmError> {
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        if order == 0 {
            return Err(LmError::BadOrder);
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(LmError::BadDiscount(discount));
        }
        let mut tables = vec![BTreeMap::new(); order];
        for sentence in corpus {
            let mut seq = vec![Vocabulary::BOS_ID; order - 1];
            seq.extend(vocab.encode(sentence));
            seq.push(Vocabulary::EOS_ID);
            for pos in (order - 1)..seq.len() {
                let next = seq[pos];
                for (m, table) in tables.iter_mut().enumerate() {
                    let ctx = seq[pos - m..pos].to_vec();
                    *table.entry(ctx).or_insert_with(BTreeMap::new).entry(next).or_insert(0u64) += 1;
                }
            }
        }
        Ok(NGramLM {
            order,
            discount,
            vocab,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.tables
            .get(context.len())
            .and_then(|t| t.get(context))
            .and_then(|succ| succ.get(&next))
            .copied()
            .unwrap_or(0)
    }

    /// The last `order - 1` tokens of the prefix, left-padded with BOS.
    fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let m = self.order - 1;
        let take = prefix.len().min(m);
        let mut ctx = vec![Vocabulary::BOS_ID; m - take];
        ctx.extend_from_slice(&prefix[prefix.len() - take..]);
        ctx
    }

    pub fn distribution(&self, prefix: &[TokenId]) -> Distribution {
        let ctx = self.context_of(prefix);
        let v = self.vocab.len();
        let uniform = 1.0 / (v - 1) as f64;
        let mut probs: Vec<f64> = (0..v).map(|i| if i == Vocabulary::BOS_ID { 0.0 } else { uniform }).collect();
        for m in 0..self.order {
            let h = &ctx[ctx.len() - m..];
            if let Some(succ) = self.tables[m].get(h) {
                probs = self.discounted(succ, &probs);
            }
        }
        Distribution(probs)
    }

    fn discounted(&self, succ: &BTreeMap<TokenId, u64>, lower: &[f64]) -> Vec<f64> {
        let total: u64 = succ.values().sum();
        let total = total as f64;
        let predictable = self.vocab.len() - 1;
        if succ.len() >= predictable {
            let mut out = vec![0.0; lower.len()];
            for (&w, &c) in succ {
                out[w] = c as f64 / total;
            }
            return out;
        }
        let reserved = self.discount * succ.len() as f64 / total;
        let seen_lower: f64 = succ.keys().map(|&w| lower[w]).sum();
        let scale = reserved / (1.0 - seen_lower);
        let mut out: Vec<f64> = lower.iter().map(|&p| p * scale).collect();
        for (&w, &c) in succ {
            out[w] = (c as f64 - self.discount) / total;
        }
        out
    }

    pub fn to_json(&self) -> Result<String, LmError> {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                t.iter()
                    .map(|(ctx, succ)| NGramEntry {
                        context: ctx.clone(),
                        next: succ.iter().map(|(&w, &c)| (w, c)).collect(),
                    })
                    .collect()
            })
            .collect();
        let file = NGramFile {
            format: NGRAM_FORMAT.into(),
            order: self.order,
            discount: self.discount,
            vocab: self.vocab.tokens[3..].to_vec(),
            tables,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LmError> {
        let file: NGramFile = serde_json::from_str(s)?;
        if file.format != NGRAM_FORMAT {
            return Err(LmError::Format(format!("unexpected header {:?}", file.format)));
        }
        if file.order == 0 || file.tables.len() != file.order {
            return Err(LmError::Format("order does not match table count".into()));
        }
        if !(file.discount > 0.0 && file.discount < 1.0) {
            return Err(LmError::BadDiscount(file.discount));
        }
        let vocab = Vocabulary::new(file.vocab)?;
        let mut tables = Vec::with_capacity(file.order);
        for (m, entries) in file.tables.into_iter().enumerate() {
            let mut table = BTreeMap::new();
            for e in entries {
                let in_range = e.context.iter().chain(e.next.iter().map(|(w, _)| w)).all(|&t| t < vocab.len());
                if e.context.len() != m || !in_range || e.next.iter().any(|&(_, c)| c == 0) {
                    return Err(LmError::Format(format!("bad order-{m} entry")));
                }
                table.insert(e.context, e.next.into_iter().collect());
            }
            tables.push(table);
        }
        Ok(NGramLM {
            order: file.order,
            discount: file.discount,
            vocab,
            tables,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct NGramEntry {
    context: Vec<TokenId>,
    next: Vec<(TokenId, u64)>,
}

#[derive(Serialize, Deserialize)]
struct NGramFile {
    format: String,
    order: usize,
    discount: f64,
    /// Non-reserved tokens in index order, starting at index 3.
    vocab: Vec<String>,
    tables: Vec<Vec<NGramEntry>>,
}

/// Static token vectors, one row per vocabulary index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    rows: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, rows: Vec<Vec<f64>>) -> Result<Self, LmError> {
        if dimension == 0 {
            return Err(LmError::BadEmbeddingParams);
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dimension) {
            return Err(LmError::DimensionMismatch(r.len(), dimension));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(LmError::Format("non-finite embedding entry".into()));
        }
        Ok(EmbeddingTable { dimension, rows })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vector(&self, id: TokenId) -> &[f64] {
        &self.rows[id]
    }

    /// Text table: a `#compgen-embeddings-v1<TAB>dim<TAB>rows` header, then
    /// `token<TAB>x1 x2 ...` per row in vocabulary order.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = format!("#{EMBEDDING_FORMAT}\t{}\t{}\n", self.dimension, self.rows.len());
        for (id, row) in self.rows.iter().enumerate() {
            out.push_str(vocab.token(id));
            out.push('\t');
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{x}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`EmbeddingTable::to_text`] output, checking row tokens against `vocab`.
    pub fn from_text(s: &str, vocab: &Vocabulary) -> Result<Self, LmError> {
        let mut lines = s.lines();
        let header = lines.next().ok_or_else(|| LmError::Format("empty embedding file".into()))?;
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 3 || fields[0] != format!("#{EMBEDDING_FORMAT}") {
            return Err(LmError::Format(format!("unexpected header {header:?}")));
        }
        let parse_usize = |f: &str| f.parse::<usize>().map_err(|e| LmError::Format(e.to_string()));
        let dimension = parse_usize(fields[1])?;
        let n = parse_usize(fields[2])?;
        if n != vocab.len() {
            return Err(LmError::Format(format!("{n} rows for a vocabulary of {}", vocab.len())));
        }
        let mut rows = Vec::with_capacity(n);
        for (id, line) in lines.enumerate() {
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| LmError::Format(format!("row {id} has no tab")))?;
            if id >= n || token != vocab.token(id) {
                return Err(LmError::Format(format!("row {id} token {token:?} does not match vocabulary")));
            }
            let row = values
                .split(' ')
                .map(|x| x.parse::<f64>().map_err(|e| LmError::Format(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(LmError::Format("truncated embedding file".into()));
        }
        EmbeddingTable::new(dimension, rows)
    }
}

/// Positive PMI co-occurrence matrix over `vocab` with a symmetric window.
/// Tokens outside the vocabulary are dropped before windowing.
pub fn ppmi_matrix(corpus: &[Vec<String>], vocab: &Vocabulary, window: usize) -> DMatrix<f64> {
    let v = vocab.len();
    let mut counts = DMatrix::<f64>::zeros(v, v);
    for sentence in corpus {
        let ids: Vec<TokenId> = sentence.iter().filter_map(|t| vocab.get(t)).collect();
        for (i, &a) in ids.iter().enumerate() {
            let hi = (i + window).min(ids.len() - 1);
            for &b in &ids[i + 1..=hi] {
                counts[(a, b)] += 1.0;
                counts[(b, a)] += 1.0;
            }
        }
    }
    let total: f64 = counts.sum();
    let row_sums: Vec<f64> = (0..v).map(|i| counts.row(i).sum()).collect();
    DMatrix::from_fn(v, v, |i, j| {
        let c = counts[(i, j)];
        if c == 0.0 {
            return 0.0;
        }
        (c * total / (row_sums[i] * row_sums[j])).ln().max(0.0)
    })
}

/// PPMI + truncated SVD embeddings: row `i` is `U[i, :d] * sqrt(S[:d])`.
///
/// Each left singular vector is sign-flipped so its largest-magnitude entry
/// (lowest index on ties) is positive. Tokens with an all-zero PPMI row get
/// the zero vector.
pub fn train_embeddings(corpus: &[Vec<String>], vocab: &Vocabulary, dimension: usize, window: usize) -> Result<EmbeddingTable, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    if dimension == 0 || window == 0 {
        return Err(LmError::BadEmbeddingParams);
    }
    if dimension > vocab.len() {
        return Err(LmError::DimensionTooLarge {
            dim: dimension,
            vocab: vocab.len(),
        });
    }
    let ppmi = ppmi_matrix(corpus, vocab, window);
    let zero_rows: Vec<bool> = (0..vocab.len()).map(|i| ppmi.row(i).iter().all(|&x| x == 0.0)).collect();
    let svd = ppmi.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut rows = vec![vec![0.0; dimension]; vocab.len()];
    for k in 0..dimension {
        let col = u.column(k);
        let mut pivot = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let weight = svd.singular_values[k].max(0.0).sqrt();
        for (i, row) in rows.iter_mut().enumerate() {
            if !zero_rows[i] {
                row[k] = sign * col[i] * weight;
            }
        }
    }
    EmbeddingTable::new(dimension, rows)
}

/// Cosine similarity, defined as 0.0 when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, LmError> {
    if u.len() != v.len() {
        return Err(LmError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for i in 0..u.len() {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu == 0.0 || vv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// The n-gram model and embedding table as one [`LanguageModel`].
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub lm: NGramLM,
    pub embeddings: EmbeddingTable,
}

impl ReferenceModel {
    pub fn new(lm: NGramLM, embeddings: EmbeddingTable) -> Result<Self, LmError> {
        if embeddings.len() != lm.vocabulary().len() {
            return Err(LmError::Format(format!(
                "{} embedding rows for a vocabulary of {}",
                embeddings.len(),
                lm.vocabulary().len()
            )));
        }
        Ok(ReferenceModel { lm, embeddings })
    }
}

impl LanguageModel for ReferenceModel {
    fn vocab(&self) -> &Vocabulary {
        self.lm.vocabulary()
    }

    fn next_token_distribution(&self, prefix: &[TokenId]) -> Distribution {
        self.lm.distribution(prefix)
    }

    fn representation(&self, token: TokenId) -> &[f64] {
        self.embeddings.vector(token)
    }
}

/// Convenience wrapper mapping string tokens (unknowns to UNK) before querying.
pub fn next_token_distribution<M: LanguageModel + ?Sized, S: AsRef<str>>(lm: &M, prefix: &[S]) -> Distribution {
    lm.next_token_distribution(&lm.vocab().encode(prefix))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn sums_to_one(d: &Distribution) -> bool {
        (d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9 && d.probs().iter().all(|&p| p >= 0.0)
    }

    #[test]
    fn vocabulary_layout() {
        let v = Vocabulary::from_corpus(&[toks("b a b"), toks("c")]);
        assert_eq!(v.tokens(), [BOS, EOS, UNK, "a", "b", "c"]);
        assert_eq!(v.id("zzz"), Vocabulary::UNK_ID);
        assert!(Vocabulary::new(["a", "a"]).is_err());
        assert!(Vocabulary::new([EOS]).is_err());
    }

    #[test]
    fn bigram_on_repeated_pair() {
        let corpus = vec![toks("a b"); 10];
        let lm = train_ngram_lm(&corpus, 2, 0.5).unwrap();
        let v = lm.vocabulary();
        let d = lm.distribution(&[v.id("a")]);
        assert!(sums_to_one(&d));
        // c(a b) = 10, one successor type: p(b|a) = (10 - 0.5) / 10.
        assert!((d.prob(v.id("b")) - 0.95).abs() < 1e-12);
        assert!(d.prob(v.id("b")) > d.prob(Vocabulary::EOS_ID));
        assert_eq!(d.argmax(), v.id("b"));
        assert_eq!(d.prob(Vocabulary::BOS_ID), 0.0);
    }

    #[test]
    fn backoff_mass_follows_lower_order() {
        // Unigram counts over predicted positions: a=10, b=10, EOS=10.
        let corpus = vec![toks("a b"); 10];
        let lm = train_ngram_lm(&corpus, 2, 0.5).unwrap();
        let v = lm.vocabulary();
        let d = lm.distribution(&[v.id("a")]);
        // Unigram level over {EOS, UNK, a, b}: seen a, b, EOS at (10-0.5)/30; UNK gets
        // 3*0.5/30 reserved. Bigram level reserves 0.05 for tokens other than b,
        // shared in proportion to the unigram over EOS, UNK, a.
        let uni_seen = 9.5 / 30.0;
        let uni_unk = 1.5 / 30.0;
        let rest = 2.0 * uni_seen + uni_unk;
        assert!((d.prob(Vocabulary::EOS_ID) - 0.05 * uni_seen / rest).abs() < 1e-12);
        assert!((d.prob(Vocabulary::UNK_ID) - 0.05 * uni_unk / rest).abs() < 1e-12);
    }

    #[test]
    fn unigram_ignores_prefix() {
        let corpus = vec![toks("a b c"), toks("b c"), toks("c")];
        let lm = train_ngram_lm(&corpus, 1, 0.3).unwrap();
        let v = lm.vocabulary();
        assert_eq!(lm.distribution(&[v.id("a")]), lm.distribution(&[v.id("c"), v.id("b")]));
        assert_eq!(lm.distribution(&[]), lm.distribution(&[Vocabulary::UNK_ID]));
    }

    #[test]
    fn training_is_deterministic_and_validated() {
        let corpus = vec![toks("x y z"), toks("y z")];
        assert_eq!(train_ngram_lm(&corpus, 3, 0.7).unwrap(), train_ngram_lm(&corpus, 3, 0.7).unwrap());
        assert!(matches!(train_ngram_lm(&[], 2, 0.5), Err(LmError::EmptyCorpus)));
        assert!(matches!(train_ngram_lm(&corpus, 0, 0.5), Err(LmError::BadOrder)));
        assert!(train_ngram_lm(&corpus, 2, 0.0).is_err());
        assert!(train_ngram_lm(&corpus, 2, 1.0).is_err());
    }

    #[test]
    fn tiny_discount_recovers_relative_frequencies() {
        // Every context below is observed, so with D -> 0 the model is the MLE.
        let corpus = vec![toks("a b"), toks("a c"), toks("a b")];
        let lm = train_ngram_lm(&corpus, 2, 1e-12).unwrap();
        let v = lm.vocabulary();
        let d = lm.distribution(&[v.id("a")]);
        assert!((d.prob(v.id("b")) - 2.0 / 3.0).abs() < 1e-9);
        assert!((d.prob(v.id("c")) - 1.0 / 3.0).abs() < 1e-9);
        let start = lm.distribution(&[]);
        assert!((start.prob(v.id("a")) - 1.0).abs() < 1e-9);
        let after_b = lm.distribution(&[v.id("b")]);
        assert!((after_b.prob(Vocabulary::EOS_ID) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ngram_json_round_trip() {
        let corpus = vec![toks("the sound is better than my old one"), toks("the tone is warmer")];
        let lm = train_ngram_lm(&corpus, 3, 0.75).unwrap();
        let text = lm.to_json().unwrap();
        assert!(text.contains(NGRAM_FORMAT));
        assert_eq!(NGramLM::from_json(&text).unwrap(), lm);
        assert!(NGramLM::from_json(&text.replace(NGRAM_FORMAT, "other")).is_err());
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        let d = Distribution::new(vec![0.0, 0.25, 0.25, 0.5]).unwrap();
        assert_eq!(d.top_k(3), [3, 1, 2]);
        assert_eq!(d.top_k(10).len(), 4);
        assert_eq!(d.argmax(), 3);
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn cosine_cases() {
        let h = [0.3, -1.2, 2.0];
        assert_eq!(cosine_similarity(&h, &h).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    /// Cosine between PPMI rows, computed without any factorization.
    fn ppmi_row_cosine(m: &DMatrix<f64>, a: usize, b: usize) -> f64 {
        let ra: Vec<f64> = m.row(a).iter().copied().collect();
        let rb: Vec<f64> = m.row(b).iter().copied().collect();
        cosine_similarity(&ra, &rb).unwrap()
    }

    #[test]
    fn co_occurring_tokens_are_closer() {
        let mut corpus = vec![toks("a b a b"); 6];
        corpus.extend(vec![toks("c d c d"); 6]);
        let vocab = Vocabulary::from_corpus(&corpus);
        let (a, b, c) = (vocab.id("a"), vocab.id("b"), vocab.id("c"));
        let ppmi = ppmi_matrix(&corpus, &vocab, 2);
        assert!(ppmi_row_cosine(&ppmi, a, b) > ppmi_row_cosine(&ppmi, a, c));

        let emb = train_embeddings(&corpus, &vocab, 2, 2).unwrap();
        let ab = cosine_similarity(emb.vector(a), emb.vector(b)).unwrap();
        let ac = cosine_similarity(emb.vector(a), emb.vector(c)).unwrap();
        assert!(ab > ac, "ab={ab} ac={ac}");
        assert_eq!(emb, train_embeddings(&corpus, &vocab, 2, 2).unwrap());
        assert!(emb.vector(Vocabulary::BOS_ID).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_token_corpus_gives_zero_vector() {
        let corpus = vec![toks("hum hum hum"); 4];
        let vocab = Vocabulary::from_corpus(&corpus);
        let emb = train_embeddings(&corpus, &vocab, 2, 2).unwrap();
        assert!(emb.vector(vocab.id("hum")).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embedding_errors_and_round_trip() {
        let corpus = vec![toks("a b c a b")];
        let vocab = Vocabulary::from_corpus(&corpus);
        assert!(matches!(
            train_embeddings(&corpus, &vocab, vocab.len() + 1, 2),
            Err(LmError::DimensionTooLarge { .. })
        ));
        assert!(train_embeddings(&[], &vocab, 2, 2).is_err());
        let emb = train_embeddings(&corpus, &vocab, 3, 2).unwrap();
        let text = emb.to_text(&vocab);
        assert!(text.starts_with("#compgen-embeddings-v1\t3\t6\n"));
        assert_eq!(EmbeddingTable::from_text(&text, &vocab).unwrap(), emb);
        let other = Vocabulary::from_corpus(&[toks("x y z")]);
        assert!(EmbeddingTable::from_text(&text, &other).is_err());
    }

    #[test]
    fn sign_convention_is_fixed() {
        let corpus = vec![toks("p q r p q s t"), toks("r s t p")];
        let vocab = Vocabulary::from_corpus(&corpus);
        let emb = train_embeddings(&corpus, &vocab, 3, 2).unwrap();
        for k in 0..3 {
            let col: Vec<f64> = (0..vocab.len()).map(|i| emb.vector(i)[k]).collect();
            let mut pivot = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] >= 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-5.0f64..5.0, 4),
            v in proptest::collection::vec(-5.0f64..5.0, 4),
            c in 0.01f64..100.0,
        ) {
            let s = cosine_similarity(&u, &v).unwrap();
            proptest::prop_assert!((-1.0..=1.0).contains(&s));
            proptest::prop_assert!((s - cosine_similarity(&v, &u).unwrap()).abs() < 1e-12);
            let cu: Vec<f64> = u.iter().map(|x| x * c).collect();
            proptest::prop_assert!((s - cosine_similarity(&cu, &v).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn distributions_normalize(
            sents in proptest::collection::vec(proptest::collection::vec(0usize..6, 1..6), 1..8),
            order in 1usize..4,
            prefix in proptest::collection::vec(0usize..9, 0..5),
        ) {
            let words = ["a", "b", "c", "d", "e", "f"];
            let corpus: Vec<Vec<String>> = sents.iter().map(|s| s.iter().map(|&i| words[i].to_string()).collect()).collect();
            let lm = train_ngram_lm(&corpus, order, 0.6).unwrap();
            let prefix: Vec<TokenId> = prefix.into_iter().map(|i| i % lm.vocabulary().len()).collect();
            let d = lm.distribution(&prefix);
            proptest::prop_assert!(sums_to_one(&d));
        }
    }
}
