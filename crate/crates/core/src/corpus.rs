//! Review ingestion, sentence segmentation, tokenization and dataset statistics.
//!
//! Input files are JSON Lines in the Amazon review layout (`reviewerID`,
//! `asin`, `overall`, `reviewText`). Lines that cannot be turned into a
//! [`Review`] are skipped and counted rather than aborting the load.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One product review record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub item_id: String,
    pub user_id: String,
    pub rating: f64,
    pub text: String,
}

impl Review {
    /// Segments the review text, tagging every sentence with this review's id.
    pub fn sentences(&self) -> Vec<Sentence> {
        let mut out = split_sentences(&self.text);
        for s in &mut out {
            s.source_review_id = self.review_id.clone();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
    pub source_review_id: String,
    pub index_in_review: usize,
}

impl Sentence {
    /// Builds a free-standing sentence (no source review) from raw text.
    pub fn from_text(text: &str) -> Self {
        Sentence {
            text: text.trim().to_string(),
            tokens: tokenize(text),
            source_review_id: String::new(),
            index_in_review: 0,
        }
    }

    /// Builds a sentence from already tokenized text.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Sentence {
            text: tokens.join(" "),
            tokens,
            source_review_id: String::new(),
            index_in_review: 0,
        }
    }
}

/// Outcome of [`load_reviews`].
#[derive(Debug, Clone, Default)]
pub struct LoadedReviews {
    pub reviews: Vec<Review>,
    /// Lines that were not valid review records.
    pub skipped: usize,
    /// Records whose rating fell outside [1, 5] and was clamped.
    pub clamped: usize,
}

/// Reads a JSONL review file, one [`Review`] per well-formed line in file order.
///
/// A line is skipped when it is not a JSON object, lacks a nonempty
/// `reviewText`, lacks `asin`/`reviewerID`/`overall`, or repeats an earlier
/// review id. Blank lines are ignored without counting. The review id comes
/// from `reviewID`/`review_id` when present, else from the 1-based line number.
pub fn load_reviews(path: impl AsRef<Path>) -> Result<LoadedReviews, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = LoadedReviews::default();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_review_line(&line, idx + 1) {
            Some((review, clamped)) => {
                if !seen.insert(review.review_id.clone()) {
                    log::warn!("{}:{}: duplicate review id {}", path.display(), idx + 1, review.review_id);
                    out.skipped += 1;
                    continue;
                }
                if clamped {
                    log::warn!("{}:{}: rating clamped into [1, 5]", path.display(), idx + 1);
                    out.clamped += 1;
                }
                out.reviews.push(review);
            }
            None => {
                log::warn!("{}:{}: skipping malformed review line", path.display(), idx + 1);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn parse_review_line(line: &str, line_no: usize) -> Option<(Review, bool)> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    let text = obj.get("reviewText")?.as_str()?;
    let text = html_escape::decode_html_entities(text).trim().to_string();
    if text.is_empty() {
        return None;
    }
    let item_id = id_field(obj.get("asin")?)?;
    let user_id = id_field(obj.get("reviewerID")?)?;
    let raw_rating = obj.get("overall")?.as_f64()?;
    if !raw_rating.is_finite() {
        return None;
    }
    let rating = raw_rating.clamp(1.0, 5.0);
    let review_id = match obj.get("reviewID").or_else(|| obj.get("review_id")) {
        Some(v) => id_field(v)?,
        None => format!("L{line_no:08}"),
    };
    Some((
        Review {
            review_id,
            item_id,
            user_id,
            rating,
            text,
        },
        rating != raw_rating,
    ))
}

fn id_field(v: &Value) -> Option<String> {
    let s = match v {
        Value::String(s) => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    (!s.is_empty()).then_some(s)
}

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "mr.", "mrs.", "ms.", "dr.", "vs.", "approx.", "no.", "st.", "jr.", "sr.",
];

fn is_delimiter(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Splits text into sentences at `.`, `?` or `!` runs followed by whitespace
/// or end of input, unless the period closes a known abbreviation.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !is_delimiter(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_delimiter(chars[j].1) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        let end = if j == chars.len() { text.len() } else { chars[j].0 };
        if at_boundary && !ends_with_abbreviation(&text[start..end]) {
            pieces.push(&text[start..end]);
            start = end;
        }
        i = j;
    }
    pieces.push(&text[start..]);

    pieces
        .into_iter()
        .map(str::trim)
        .filter(|p| p.chars().any(|c| !is_delimiter(c) && !c.is_whitespace()))
        .filter_map(|p| {
            let tokens = tokenize(p);
            (!tokens.is_empty()).then(|| (p.to_string(), tokens))
        })
        .enumerate()
        .map(|(index_in_review, (text, tokens))| Sentence {
            text,
            tokens,
            source_review_id: String::new(),
            index_in_review,
        })
        .collect()
}

fn ends_with_abbreviation(piece: &str) -> bool {
    let last = piece.split_whitespace().last().unwrap_or("").to_lowercase();
    ABBREVIATIONS.contains(&last.as_str())
}

/// Lowercases and splits text into word and punctuation tokens.
///
/// Words are alphanumeric runs that may contain inner `-` or `'` joins
/// (`fx-3200`, `don't`). Contractions are split PTB style: `don't` gives
/// `do` + `n't`, `it's` gives `it` + `'s`. Every other non-space character
/// becomes a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() || (c == '\'' && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())) {
            let start = i;
            i += 1;
            loop {
                while i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                }
                let joins = i + 1 < chars.len()
                    && matches!(chars[i], '-' | '\'')
                    && chars[i + 1].is_alphanumeric();
                if !joins {
                    break;
                }
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            split_clitic(word, &mut tokens);
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
    tokens
}

fn split_clitic(word: String, out: &mut Vec<String>) {
    if word.starts_with('\'') || !word.contains('\'') {
        out.push(word);
        return;
    }
    if let Some(stem) = word.strip_suffix("n't").filter(|s| !s.contains('\'')) {
        if !stem.is_empty() {
            out.push(stem.to_string());
        }
        out.push("n't".to_string());
        return;
    }
    let at = word.find('\'').unwrap_or(0);
    let (head, tail) = word.split_at(at);
    out.push(head.to_string());
    out.push(tail.to_string());
}

/// One sentence of the confidence-filtered comparative dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeRecord {
    pub text: String,
    pub tokens: Vec<String>,
    pub label: crate::extraction::Label,
    pub confidence: f64,
    pub review_id: String,
    pub item_id: String,
    pub user_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Train/validation/test partition of comparative records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitDataset {
    pub name: String,
    pub train: Vec<ComparativeRecord>,
    pub val: Vec<ComparativeRecord>,
    pub test: Vec<ComparativeRecord>,
}

impl SplitDataset {
    pub fn split(&self, split: Split) -> &[ComparativeRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &ComparativeRecord)> {
        self.train
            .iter()
            .map(|r| (Split::Train, r))
            .chain(self.val.iter().map(|r| (Split::Val, r)))
            .chain(self.test.iter().map(|r| (Split::Test, r)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub split_name: String,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_items: usize,
}

pub fn dataset_stats(dataset: &SplitDataset) -> CorpusStats {
    let items: BTreeSet<&str> = dataset.iter().map(|(_, r)| r.item_id.as_str()).collect();
    CorpusStats {
        split_name: dataset.name.clone(),
        n_train: dataset.train.len(),
        n_val: dataset.val.len(),
        n_test: dataset.test.len(),
        n_items: items.len(),
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for CorpusStats {
    /// Aligned text table: `Dataset | Train | Val | Test | #Items`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = [
            thousands(self.n_train),
            thousands(self.n_val),
            thousands(self.n_test),
            thousands(self.n_items),
        ];
        let headers = ["Train", "Val", "Test", "#Items"];
        let name_w = self.split_name.len().max("Dataset".len());
        write!(f, "{:<name_w$}", "Dataset")?;
        for (h, c) in headers.iter().zip(&cells) {
            write!(f, "  {:>w$}", h, w = h.len().max(c.len()))?;
        }
        writeln!(f)?;
        write!(f, "{:<name_w$}", self.split_name)?;
        for (h, c) in headers.iter().zip(&cells) {
            write!(f, "  {:>w$}", c, w = h.len().max(c.len()))?;
        }
        writeln!(f)
    }
}
