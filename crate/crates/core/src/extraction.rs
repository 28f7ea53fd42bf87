//! Comparative sentence mining.
//!
//! Candidates are found with a marker-word list and a product-code regex,
//! then scored by a logistic-regression classifier over hashed n-gram
//! features. Only sentences the classifier labels comparative with
//! confidence strictly above a threshold enter the dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ComparativeRecord, Review, Sentence, Split, SplitDataset};

pub const CLASSIFIER_FORMAT: &str = "compgen-classifier-v1";

pub const DEFAULT_MARKERS: &[&str] = &[
    "than", "better", "worse", "instead", "superior", "inferior", "compared", "prefer", "beats", "versus",
];

pub const DEFAULT_MODEL_CODE_PATTERN: &str = r"\b[a-z]+-?[0-9]+\b";

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("evaluation set is empty")]
    EmptyTestSet,
    #[error("marker word list is empty")]
    NoMarkers,
    #[error("invalid model-code pattern: {0}")]
    BadPattern(String),
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("split fractions must be nonnegative and sum to 1")]
    BadSplit,
    #[error("unsupported classifier format {0:?}")]
    Format(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct PatternSet {
    marker_words: BTreeSet<String>,
    model_number_pattern: Regex,
}

impl PatternSet {
    pub fn new<I, S>(markers: I, model_number_pattern: &str) -> Result<Self, ExtractionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let marker_words: BTreeSet<String> = markers.into_iter().map(|m| m.into().to_lowercase()).collect();
        if marker_words.is_empty() {
            return Err(ExtractionError::NoMarkers);
        }
        let model_number_pattern = regex::RegexBuilder::new(model_number_pattern)
            .case_insensitive(true)
            .build()
            .map_err(|e| ExtractionError::BadPattern(e.to_string()))?;
        if !model_number_pattern.is_match("FX-3200") {
            return Err(ExtractionError::BadPattern(format!(
                "{} does not match a letter-dash-digit code",
                model_number_pattern.as_str()
            )));
        }
        Ok(PatternSet {
            marker_words,
            model_number_pattern,
        })
    }

    pub fn marker_words(&self) -> &BTreeSet<String> {
        &self.marker_words
    }

    pub fn model_number_pattern(&self) -> &str {
        self.model_number_pattern.as_str()
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        PatternSet::new(DEFAULT_MARKERS.iter().copied(), DEFAULT_MODEL_CODE_PATTERN).expect("default patterns are valid")
    }
}

/// True iff a marker word is one of the sentence tokens or the raw text
/// contains a product code.
pub fn match_comparative_candidates(sentence: &Sentence, patterns: &PatternSet) -> bool {
    sentence.tokens.iter().any(|t| patterns.marker_words.contains(t)) || patterns.model_number_pattern.is_match(&sentence.text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Comparative,
    NonComparative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    pub label: Label,
    pub confidence: f64,
}

impl LabeledSentence {
    pub fn gold(sentence: Sentence, label: Label) -> Self {
        LabeledSentence {
            sentence,
            label,
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub ngram_orders: Vec<usize>,
    pub hash_dim: usize,
    pub marker_words: Vec<String>,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            ngram_orders: vec![1, 2],
            hash_dim: 1 << 18,
            marker_words: DEFAULT_MARKERS.iter().map(|m| m.to_string()).collect(),
        }
    }
}

/// Sparse feature vector: strictly increasing indices with nonzero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Bucket of a named feature (`"n1:better"`, `"n2:better than"`, `"m:than"`).
pub fn feature_index(name: &str, hash_dim: usize) -> usize {
    (fnv1a(name.as_bytes()) % hash_dim as u64) as usize
}

pub fn featurize(sentence: &Sentence, config: &FeaturizerConfig) -> SparseVector {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for &n in &config.ngram_orders {
        if n == 0 {
            continue;
        }
        for gram in sentence.tokens.windows(n) {
            let name = format!("n{n}:{}", gram.join(" "));
            *acc.entry(feature_index(&name, config.hash_dim)).or_default() += 1.0;
        }
    }
    for marker in &config.marker_words {
        if sentence.tokens.iter().any(|t| t == marker) {
            *acc.entry(feature_index(&format!("m:{marker}"), config.hash_dim)).or_default() += 1.0;
        }
    }
    SparseVector {
        entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    weights: Vec<f64>,
    bias: f64,
    featurizer: FeaturizerConfig,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Classifier {
    /// A classifier with all weights and the bias at zero.
    pub fn zero(featurizer: FeaturizerConfig) -> Self {
        Classifier {
            weights: vec![0.0; featurizer.hash_dim],
            bias: 0.0,
            featurizer,
        }
    }

    pub fn featurizer(&self) -> &FeaturizerConfig {
        &self.featurizer
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn set_bias(&mut self, bias: f64) {
        self.bias = bias;
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn set_weight(&mut self, index: usize, w: f64) {
        self.weights[index] = w;
    }

    fn score(&self, x: &SparseVector) -> f64 {
        self.bias + x.entries.iter().map(|&(i, v)| self.weights[i] * v).sum::<f64>()
    }

    /// Probability that the sentence is comparative.
    pub fn positive_probability(&self, sentence: &Sentence) -> f64 {
        sigmoid(self.score(&featurize(sentence, &self.featurizer)))
    }

    pub fn to_json(&self) -> Result<String, ExtractionError> {
        let weights: BTreeMap<usize, f64> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        let file = ClassifierFile {
            format: CLASSIFIER_FORMAT.to_string(),
            featurizer: self.featurizer.clone(),
            bias: self.bias,
            weights,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ExtractionError> {
        let file: ClassifierFile = serde_json::from_str(s)?;
        if file.format != CLASSIFIER_FORMAT {
            return Err(ExtractionError::Format(file.format));
        }
        let mut c = Classifier::zero(file.featurizer);
        c.bias = file.bias;
        for (i, w) in file.weights {
            if i >= c.weights.len() || !w.is_finite() {
                return Err(ExtractionError::Format(format!("bad weight entry {i}")));
            }
            c.weights[i] = w;
        }
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    format: String,
    featurizer: FeaturizerConfig,
    bias: f64,
    weights: BTreeMap<usize, f64>,
}

/// Logistic regression by seeded SGD on L2-regularized log loss.
///
/// L2 decay is applied through a shared scale factor so each update only
/// touches the active features of one example.
pub fn train_classifier(
    data: &[LabeledSentence],
    featurizer: FeaturizerConfig,
    params: &TrainParams,
) -> Result<Classifier, ExtractionError> {
    if data.is_empty() {
        return Err(ExtractionError::EmptyTrainingData);
    }
    let has_pos = data.iter().any(|d| d.label == Label::Comparative);
    let has_neg = data.iter().any(|d| d.label == Label::NonComparative);
    if !(has_pos && has_neg) {
        return Err(ExtractionError::SingleClass);
    }
    let examples: Vec<(SparseVector, f64)> = data
        .iter()
        .map(|d| {
            let y = if d.label == Label::Comparative { 1.0 } else { 0.0 };
            (featurize(&d.sentence, &featurizer), y)
        })
        .collect();

    let mut raw = vec![0.0; featurizer.hash_dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0;
    let decay = 1.0 - params.learning_rate * params.l2;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (x, y) = &examples[idx];
            let z = bias + scale * x.entries.iter().map(|&(i, v)| raw[i] * v).sum::<f64>();
            let grad = sigmoid(z) - y;
            scale *= decay;
            let step = params.learning_rate * grad / scale;
            for &(i, v) in &x.entries {
                raw[i] -= step * v;
            }
            bias -= params.learning_rate * grad;
            if scale < 1e-9 {
                raw.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    let weights = raw.into_iter().map(|w| w * scale).collect();
    Ok(Classifier {
        weights,
        bias,
        featurizer,
    })
}

/// Labels a sentence; confidence is reported for the predicted class.
pub fn classify(c: &Classifier, sentence: &Sentence) -> LabeledSentence {
    let p = c.positive_probability(sentence);
    let (label, confidence) = if p > 0.5 {
        (Label::Comparative, p)
    } else {
        (Label::NonComparative, 1.0 - p)
    };
    LabeledSentence {
        sentence: sentence.clone(),
        label,
        confidence,
    }
}

/// Split sentences, keep pattern matches, and retain those classified
/// comparative with confidence strictly above `threshold`.
pub fn build_comparative_dataset(
    reviews: &[Review],
    c: &Classifier,
    patterns: &PatternSet,
    threshold: f64,
) -> Result<Vec<ComparativeRecord>, ExtractionError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ExtractionError::BadThreshold(threshold));
    }
    let mut out = Vec::new();
    for review in reviews {
        for sentence in review.sentences() {
            if !match_comparative_candidates(&sentence, patterns) {
                continue;
            }
            let labeled = classify(c, &sentence);
            if labeled.label == Label::Comparative && labeled.confidence > threshold {
                out.push(ComparativeRecord {
                    text: sentence.text,
                    tokens: sentence.tokens,
                    label: labeled.label,
                    confidence: labeled.confidence,
                    review_id: review.review_id.clone(),
                    item_id: review.item_id.clone(),
                    user_id: review.user_id.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Seeded random partition into train/val/test; each split keeps input order.
pub fn split_dataset(
    name: &str,
    records: Vec<ComparativeRecord>,
    fractions: [f64; 3],
    seed: u64,
) -> Result<SplitDataset, ExtractionError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ExtractionError::BadSplit);
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (fractions[1] * n as f64).round() as usize;
    let n_test = ((fractions[2] * n as f64).round() as usize).min(n - n_val);
    let mut assignment = vec![Split::Train; n];
    for &i in &order[..n_val] {
        assignment[i] = Split::Val;
    }
    for &i in &order[n_val..n_val + n_test] {
        assignment[i] = Split::Test;
    }
    let mut ds = SplitDataset {
        name: name.to_string(),
        ..Default::default()
    };
    for (record, split) in records.into_iter().zip(assignment) {
        match split {
            Split::Train => ds.train.push(record),
            Split::Val => ds.val.push(record),
            Split::Test => ds.test.push(record),
        }
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf1 {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf1 { precision, recall, f1 }
    }
}

/// Precision, recall and F1 of the comparative class.
pub fn evaluate_classifier(c: &Classifier, test: &[LabeledSentence]) -> Result<Prf1, ExtractionError> {
    if test.is_empty() {
        return Err(ExtractionError::EmptyTestSet);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for gold in test {
        let predicted = classify(c, &gold.sentence).label;
        match (predicted, gold.label) {
            (Label::Comparative, Label::Comparative) => tp += 1,
            (Label::Comparative, Label::NonComparative) => fp += 1,
            (Label::NonComparative, Label::Comparative) => fn_ += 1,
            _ => {}
        }
    }
    Ok(Prf1::from_counts(tp, fp, fn_))
}

#[derive(Serialize, Deserialize)]
struct DatasetRow {
    #[serde(flatten)]
    record: ComparativeRecord,
    split: Split,
}

/// Writes the dataset as JSONL, one record per line with its `split`.
pub fn write_dataset(path: impl AsRef<Path>, dataset: &SplitDataset) -> Result<(), ExtractionError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (split, record) in dataset.iter() {
        let row = DatasetRow {
            record: record.clone(),
            split,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>, name: &str) -> Result<SplitDataset, ExtractionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut ds = SplitDataset {
        name: name.to_string(),
        ..Default::default()
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(&line)?;
        match row.split {
            Split::Train => ds.train.push(row.record),
            Split::Val => ds.val.push(row.record),
            Split::Test => ds.test.push(row.record),
        }
    }
    Ok(ds)
}

#[derive(Deserialize)]
struct GoldRow {
    text: String,
    label: Label,
}

/// Reads gold classifier data: JSONL of `{"text": ..., "label": "comparative" | "non_comparative"}`.
pub fn read_labeled_sentences(path: impl AsRef<Path>) -> Result<Vec<LabeledSentence>, ExtractionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: GoldRow = serde_json::from_str(&line)?;
        out.push(LabeledSentence::gold(Sentence::from_text(&row.text), row.label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(text: &str) -> Sentence {
        Sentence::from_text(text)
    }

    fn marker_fixture() -> Vec<LabeledSentence> {
        let pos = [
            "this one is better than that",
            "sounds better than my old one",
            "much worse than the yamaha",
            "i prefer it to the casio",
            "it beats the roland easily",
            "the tone is warmer than before",
            "i bought this instead of the fender",
            "far superior to my last piano",
            "compared to the korg it is quiet",
            "clearer than my sony headphones",
        ];
        let neg = [
            "i love this piano",
            "the keys feel nice",
            "shipping was fast",
            "my son plays it daily",
            "the sound is warm",
            "it arrived on time",
            "great value for the money",
            "the case is sturdy",
            "i use it every day",
            "the strings came tuned",
        ];
        pos.iter()
            .map(|t| LabeledSentence::gold(sent(t), Label::Comparative))
            .chain(neg.iter().map(|t| LabeledSentence::gold(sent(t), Label::NonComparative)))
            .collect()
    }

    #[test]
    fn pattern_matching() {
        let p = PatternSet::default();
        assert!(match_comparative_candidates(&sent("this one is better than that"), &p));
        assert!(match_comparative_candidates(&sent("works with my FX-3200"), &p));
        assert!(match_comparative_candidates(&sent("nicer than the NWZ-A855"), &p));
        assert!(!match_comparative_candidates(&sent("i love this piano"), &p));
    }

    #[test]
    fn pattern_set_validation() {
        assert!(matches!(PatternSet::new(Vec::<String>::new(), DEFAULT_MODEL_CODE_PATTERN), Err(ExtractionError::NoMarkers)));
        assert!(PatternSet::new(["than"], "[0-9]+x").is_err());
        assert!(PatternSet::new(["than"], "(").is_err());
    }

    #[test]
    fn featurize_counts() {
        let cfg = FeaturizerConfig::default();
        let a = featurize(&sent("better better"), &cfg);
        assert_eq!(a.get(feature_index("n1:better", cfg.hash_dim)), 2.0);
        assert_eq!(a.get(feature_index("n2:better better", cfg.hash_dim)), 1.0);
        assert_eq!(a.get(feature_index("m:better", cfg.hash_dim)), 1.0);
        assert_eq!(a, featurize(&sent("better better"), &cfg));
        assert!(featurize(&sent(""), &cfg).is_zero());
    }

    #[test]
    fn separable_fixture_trains_to_full_accuracy() {
        let data = marker_fixture();
        let c = train_classifier(&data, FeaturizerConfig::default(), &TrainParams::default()).unwrap();
        for d in &data {
            assert_eq!(classify(&c, &d.sentence).label, d.label, "{}", d.sentence.text);
        }
        let c2 = train_classifier(&data, FeaturizerConfig::default(), &TrainParams::default()).unwrap();
        assert_eq!(c.bias.to_bits(), c2.bias.to_bits());
        assert!(c.weights.iter().zip(&c2.weights).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn training_errors() {
        let cfg = FeaturizerConfig::default();
        assert!(matches!(train_classifier(&[], cfg.clone(), &TrainParams::default()), Err(ExtractionError::EmptyTrainingData)));
        let one = vec![LabeledSentence::gold(sent("better"), Label::Comparative)];
        assert!(matches!(train_classifier(&one, cfg, &TrainParams::default()), Err(ExtractionError::SingleClass)));
    }

    #[test]
    fn motivating_example_sentences() {
        let c = train_classifier(&marker_fixture(), FeaturizerConfig::default(), &TrainParams::default()).unwrap();
        let yes = classify(&c, &sent("This piano sounds more natural than my Sony NWZ-A855."));
        assert_eq!(yes.label, Label::Comparative);
        let no = classify(&c, &sent("This piano sounds natural."));
        assert_eq!(no.label, Label::NonComparative);
    }

    #[test]
    fn zero_classifier_is_undecided() {
        let c = Classifier::zero(FeaturizerConfig::default());
        let l = classify(&c, &sent("better than anything"));
        assert_eq!(l.confidence, 0.5);
        assert_eq!(l.label, Label::NonComparative);
    }

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    /// Zero classifier except for hand-set weights on two marker 1-grams.
    fn hand_classifier() -> Classifier {
        let cfg = FeaturizerConfig {
            marker_words: vec![],
            ngram_orders: vec![1],
            ..Default::default()
        };
        let mut c = Classifier::zero(cfg.clone());
        c.set_weight(feature_index("n1:better", cfg.hash_dim), logit(0.95));
        c.set_weight(feature_index("n1:than", cfg.hash_dim), logit(0.7));
        c.set_weight(feature_index("n1:instead", cfg.hash_dim), -3.0);
        c
    }

    fn review(id: &str, text: &str) -> Review {
        Review {
            review_id: id.into(),
            item_id: "item".into(),
            user_id: "user".into(),
            rating: 5.0,
            text: text.into(),
        }
    }

    #[test]
    fn threshold_trace() {
        // 6 sentences, 3 pattern matches, 2 positives at 0.95 and 0.7.
        let reviews = vec![
            review("r1", "Nice keys. It is better. Love it."),
            review("r2", "Bigger than a bread box. Use it instead. Fine."),
        ];
        let c = hand_classifier();
        let p = PatternSet::default();
        let kept = build_comparative_dataset(&reviews, &c, &p, 0.9).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].text, "It is better.");
        assert!((kept[0].confidence - 0.95).abs() < 1e-12);
        assert_eq!(kept[0].review_id, "r1");
        assert_eq!(build_comparative_dataset(&reviews, &c, &p, 0.0).unwrap().len(), 2);
        assert!(build_comparative_dataset(&reviews, &c, &p, 1.0).unwrap().is_empty());
        assert!(build_comparative_dataset(&reviews, &c, &p, 1.5).is_err());
    }

    #[test]
    fn prf1_counts() {
        let m = Prf1::from_counts(3, 1, 1);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.75).abs() < 1e-12);
        assert!((m.f1 - 0.75).abs() < 1e-12);
        assert_eq!(Prf1::from_counts(0, 0, 4).f1, 0.0);
    }

    #[test]
    fn evaluation_edge_cases() {
        let data = marker_fixture();
        let c = train_classifier(&data, FeaturizerConfig::default(), &TrainParams::default()).unwrap();
        let perfect = evaluate_classifier(&c, &data).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        let mut never = Classifier::zero(FeaturizerConfig::default());
        never.set_bias(-5.0);
        let m = evaluate_classifier(&never, &data).unwrap();
        assert_eq!((m.recall, m.f1), (0.0, 0.0));
        assert!(matches!(evaluate_classifier(&c, &[]), Err(ExtractionError::EmptyTestSet)));
    }

    #[test]
    fn classifier_json_round_trip() {
        let c = train_classifier(&marker_fixture(), FeaturizerConfig::default(), &TrainParams::default()).unwrap();
        let back = Classifier::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(Classifier::from_json(r#"{"format":"other","featurizer":{"ngram_orders":[1],"hash_dim":4,"marker_words":[]},"bias":0,"weights":{}}"#).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let rec = |i: usize| ComparativeRecord {
            text: format!("s{i}"),
            tokens: vec![format!("s{i}")],
            label: Label::Comparative,
            confidence: 0.99,
            review_id: format!("r{i}"),
            item_id: "x".into(),
            user_id: "u".into(),
        };
        let records: Vec<_> = (0..50).map(rec).collect();
        let ds = split_dataset("toy", records.clone(), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (40, 5, 5));
        let mut all: Vec<_> = ds.iter().map(|(_, r)| r.clone()).collect();
        all.sort_by_key(|r| r.review_id[1..].parse::<usize>().unwrap());
        assert_eq!(all, records);
        assert_eq!(ds, split_dataset("toy", records, [0.8, 0.1, 0.1], 7).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn f1_is_harmonic_mean(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let m = Prf1::from_counts(tp, fp, fn_);
            for v in [m.precision, m.recall, m.f1] {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision + m.recall > 0.0 {
                let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                proptest::prop_assert!((h - m.f1).abs() < 1e-12);
            } else {
                proptest::prop_assert_eq!(m.f1, 0.0);
            }
        }

        #[test]
        fn label_flips_at_one_half(bias in -6.0f64..6.0) {
            let mut c = Classifier::zero(FeaturizerConfig { hash_dim: 16, ..Default::default() });
            c.set_bias(bias);
            let l = classify(&c, &sent("anything at all"));
            let p = sigmoid(bias);
            proptest::prop_assert!((0.0..=1.0).contains(&l.confidence));
            proptest::prop_assert_eq!(l.label == Label::Comparative, p > 0.5);
        }
    }
}
