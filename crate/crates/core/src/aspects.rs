//! Item aspect mining with lexicon-based sentiment.
//!
//! Candidate aspects are frequent content terms of an item's reviews. Each
//! candidate is scored by the mean lexicon polarity of the words around its
//! occurrences; decoding is steered only by the positive ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Review, Sentence};
use crate::extraction::DEFAULT_MARKERS;

#[derive(Debug, Error)]
pub enum AspectError {
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

const SEED_POSITIVE: &[(&str, f64)] = &[
    ("good", 0.6), ("great", 0.8), ("like", 0.5), ("love", 0.9), ("best", 0.9), ("warm", 0.5), ("warmer", 0.5),
    ("smooth", 0.6), ("smoother", 0.6), ("rich", 0.6), ("richer", 0.6), ("clear", 0.5), ("clearer", 0.5),
    ("nice", 0.6), ("excellent", 0.9), ("amazing", 0.9), ("solid", 0.5), ("perfect", 1.0), ("beautiful", 0.8),
    ("comfortable", 0.6), ("awesome", 0.9), ("sturdy", 0.6), ("crisp", 0.6), ("bright", 0.4), ("better", 0.5),
    ("happy", 0.7), ("fantastic", 0.9), ("responsive", 0.6), ("quiet", 0.4), ("easy", 0.5),
];

const SEED_NEGATIVE: &[(&str, f64)] = &[
    ("bad", -0.7), ("poor", -0.7), ("hate", -0.9), ("worst", -1.0), ("harsh", -0.6), ("annoying", -0.7),
    ("cheap", -0.4), ("noisy", -0.6), ("weak", -0.5), ("flimsy", -0.7), ("broken", -0.8), ("terrible", -0.9),
    ("awful", -0.9), ("buzzy", -0.6), ("thin", -0.4), ("muddy", -0.6), ("dull", -0.5), ("worse", -0.5),
    ("disappointing", -0.8), ("stiff", -0.4),
];

const NEGATORS: &[&str] = &["not", "never", "n't"];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "i", "me", "my", "mine", "we", "us", "our", "you", "your",
    "he", "him", "his", "she", "her", "it", "its", "they", "them", "their", "is", "are", "was", "were", "be",
    "been", "being", "am", "do", "does", "did", "have", "has", "had", "and", "or", "but", "if", "of", "to", "in",
    "on", "at", "for", "with", "from", "by", "as", "about", "into", "over", "after", "before", "so", "very",
    "really", "just", "too", "also", "not", "no", "never", "n't", "can", "could", "would", "should", "will",
    "one", "ones", "all", "some", "any", "much", "more", "most", "less", "how", "what", "which", "who", "when",
    "where", "there", "here", "up", "out", "because", "get", "got", "'s", "'re", "'m", "'ve", "'ll", "'d",
    "than", "then", "now", "well", "still", "even", "only", "other", "again", "every", "each", "while", "though",
    "yet", "own", "same", "such", "both", "few", "many", "like", "make", "made", "use", "used", "it's", "im",
];

/// Word polarities in [-1, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    scores: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    /// Builds a lexicon, rejecting non-finite or out-of-range scores.
    pub fn new<I, S>(entries: I) -> Result<Self, AspectError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut scores = BTreeMap::new();
        for (i, (w, s)) in entries.into_iter().enumerate() {
            if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
                return Err(AspectError::Lexicon {
                    line: i + 1,
                    reason: format!("score {s} outside [-1, 1]"),
                });
            }
            scores.insert(w.into().to_lowercase(), s);
        }
        Ok(SentimentLexicon { scores })
    }

    /// Built-in seed word list.
    pub fn seed() -> Self {
        SentimentLexicon::new(SEED_POSITIVE.iter().chain(SEED_NEGATIVE).map(|&(w, s)| (w, s))).expect("seed lexicon is valid")
    }

    pub fn score(&self, word: &str) -> Option<f64> {
        self.scores.get(word).copied()
    }

    /// Entries in word order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(w, &s)| (w.as_str(), s))
    }

    /// `word<TAB>score` lines readable by [`SentimentLexicon::from_reader`].
    pub fn to_tsv(&self) -> String {
        self.entries().map(|(w, s)| format!("{w}\t{s}\n")).collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.scores.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn min_score(&self) -> Option<f64> {
        self.scores.values().copied().reduce(f64::min)
    }

    pub fn max_score(&self) -> Option<f64> {
        self.scores.values().copied().reduce(f64::max)
    }

    /// Reads `word<TAB>score` lines; blank lines and `#` comments are ignored.
    pub fn from_reader(reader: impl BufRead) -> Result<Self, AspectError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| AspectError::Lexicon {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (word, score) = line.split_once('\t').ok_or_else(|| bad("expected word<TAB>score"))?;
            let score: f64 = score.trim().parse().map_err(|_| bad("score is not a number"))?;
            if !score.is_finite() || !(-1.0..=1.0).contains(&score) {
                return Err(bad("score outside [-1, 1]"));
            }
            entries.push((word.trim().to_string(), score));
        }
        SentimentLexicon::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AspectError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}

/// Which terms may be aspects: alphabetic, not a closed-class word, not a
/// comparative marker, and not an opinion word from the lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct TermFilter {
    pub stopwords: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
    pub min_len: usize,
    pub bigrams: bool,
}

impl Default for TermFilter {
    fn default() -> Self {
        TermFilter {
            stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
            excluded: DEFAULT_MARKERS.iter().map(|s| s.to_string()).collect(),
            min_len: 2,
            bigrams: false,
        }
    }
}

impl TermFilter {
    pub fn excluding_lexicon(mut self, lexicon: &SentimentLexicon) -> Self {
        self.excluded.extend(lexicon.scores.keys().cloned());
        self
    }

    pub fn accepts(&self, token: &str) -> bool {
        token.chars().count() >= self.min_len
            && token.chars().all(|c| c.is_alphabetic() || c == '-')
            && token.chars().next().is_some_and(char::is_alphabetic)
            && !self.stopwords.contains(token)
            && !self.excluded.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aspect {
    pub item_id: String,
    pub term: String,
    pub sentiment: f64,
    pub frequency: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AspectParams {
    pub min_freq: usize,
    pub window: usize,
}

impl Default for AspectParams {
    fn default() -> Self {
        AspectParams { min_freq: 3, window: 4 }
    }
}

fn terms_of<'a>(tokens: &'a [String], filter: &'a TermFilter) -> impl Iterator<Item = String> + 'a {
    let unigrams = tokens.iter().filter(|t| filter.accepts(t)).cloned();
    let bigrams = tokens
        .windows(2)
        .filter(move |w| filter.bigrams && filter.accepts(&w[0]) && filter.accepts(&w[1]))
        .map(|w| format!("{} {}", w[0], w[1]));
    unigrams.chain(bigrams)
}

/// Frequent candidate terms with their occurrence counts, most frequent
/// first and lexicographic among equals.
pub fn extract_candidate_aspects(reviews: &[Review], min_freq: usize, filter: &TermFilter) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for review in reviews {
        for sentence in review.sentences() {
            for term in terms_of(&sentence.tokens, filter) {
                *counts.entry(term).or_default() += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Start indices of `term` (one or more space-separated tokens) in `tokens`.
fn occurrences(tokens: &[String], term: &[&str]) -> Vec<usize> {
    if term.is_empty() || tokens.len() < term.len() {
        return Vec::new();
    }
    tokens
        .windows(term.len())
        .enumerate()
        .filter(|(_, w)| w.iter().zip(term).all(|(a, b)| a == b))
        .map(|(i, _)| i)
        .collect()
}

/// Mean lexicon polarity around the term's occurrences.
///
/// For each occurrence, the window is the `window` tokens on either side of
/// the term. A negator (`not`, `never`, `n't`) flips the sign of the next
/// lexicon hit after it in the window. An occurrence with lexicon hits
/// contributes the mean of its hits; the result is the mean over those
/// occurrences, or 0.0 when there are none.
pub fn assign_sentiment(term: &str, sentences: &[Sentence], lexicon: &SentimentLexicon, window: usize) -> f64 {
    let term: Vec<&str> = term.split_whitespace().collect();
    let mut per_occurrence = Vec::new();
    for sentence in sentences {
        let toks = &sentence.tokens;
        for start in occurrences(toks, &term) {
            let end = start + term.len();
            let lo = start.saturating_sub(window);
            let hi = (end + window).min(toks.len());
            let mut hits = Vec::new();
            let mut negate = false;
            for (i, tok) in toks.iter().enumerate().take(hi).skip(lo) {
                if (start..end).contains(&i) {
                    continue;
                }
                if NEGATORS.contains(&tok.as_str()) {
                    negate = true;
                } else if let Some(s) = lexicon.score(tok) {
                    hits.push(if negate { -s } else { s });
                    negate = false;
                }
            }
            if !hits.is_empty() {
                per_occurrence.push(hits.iter().sum::<f64>() / hits.len() as f64);
            }
        }
    }
    if per_occurrence.is_empty() {
        0.0
    } else {
        per_occurrence.iter().sum::<f64>() / per_occurrence.len() as f64
    }
}

/// Candidate aspects of one item's reviews, with their sentiment.
pub fn scored_aspects(item_id: &str, reviews: &[Review], lexicon: &SentimentLexicon, params: &AspectParams) -> Vec<Aspect> {
    let filter = TermFilter::default().excluding_lexicon(lexicon);
    let sentences: Vec<Sentence> = reviews.iter().flat_map(Review::sentences).collect();
    extract_candidate_aspects(reviews, params.min_freq, &filter)
        .into_iter()
        .map(|(term, frequency)| Aspect {
            item_id: item_id.to_string(),
            sentiment: assign_sentiment(&term, &sentences, lexicon, params.window),
            term,
            frequency,
        })
        .collect()
}

/// Candidate aspects whose sentiment is strictly positive.
pub fn positive_aspects(item_id: &str, reviews: &[Review], lexicon: &SentimentLexicon, params: &AspectParams) -> Vec<Aspect> {
    scored_aspects(item_id, reviews, lexicon, params)
        .into_iter()
        .filter(|a| a.sentiment > 0.0)
        .collect()
}

/// Positive aspects for every item, keyed by item id.
pub fn positive_aspects_by_item(reviews: &[Review], lexicon: &SentimentLexicon, params: &AspectParams) -> BTreeMap<String, Vec<Aspect>> {
    let mut by_item: BTreeMap<&str, Vec<Review>> = BTreeMap::new();
    for r in reviews {
        by_item.entry(r.item_id.as_str()).or_default().push(r.clone());
    }
    by_item
        .into_iter()
        .map(|(item, rs)| (item.to_string(), positive_aspects(item, &rs, lexicon, params)))
        .collect()
}

/// Writes aspects as JSONL: `{item_id, term, sentiment, frequency}` per line.
pub fn write_aspects<'a>(path: impl AsRef<Path>, aspects: impl IntoIterator<Item = &'a Aspect>) -> Result<(), AspectError> {
    let mut w = BufWriter::new(File::create(path)?);
    for a in aspects {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aspects(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Aspect>>, AspectError> {
    let mut out: BTreeMap<String, Vec<Aspect>> = BTreeMap::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: Aspect = serde_json::from_str(&line)?;
        out.entry(a.item_id.clone()).or_default().push(a);
    }
    Ok(out)
}
