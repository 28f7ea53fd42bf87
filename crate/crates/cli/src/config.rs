use std::path::{Path, PathBuf};

use compgen::aspects::AspectParams;
use compgen::decoding::DecodeConfig;
use compgen::extraction::{PatternSet, TrainParams, DEFAULT_MARKERS, DEFAULT_MODEL_CODE_PATTERN};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "COMPGEN_OUTPUT_DIR";

/// Everything a pipeline run depends on. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dataset_name: String,
    pub paths: Paths,
    pub extraction: ExtractionSection,
    pub aspects: AspectParams,
    pub lm: LmSection,
    pub decode: DecodeConfig,
    pub metrics: MetricsSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub reviews: PathBuf,
    pub lexicon: Option<PathBuf>,
    /// Gold `{text, label}` sentences for training the classifier.
    pub labeled: Option<PathBuf>,
    /// A pretrained classifier; when set, `labeled` is not needed.
    pub classifier: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub markers: Vec<String>,
    pub model_code_pattern: String,
    pub threshold: f64,
    pub split: [f64; 3],
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSection {
    pub order: usize,
    pub discount: f64,
    pub embedding_dim: usize,
    pub window: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub bleu_smoothing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 13,
            dataset_name: "reviews".into(),
            paths: Paths::default(),
            extraction: ExtractionSection::default(),
            aspects: AspectParams::default(),
            lm: LmSection::default(),
            decode: DecodeConfig::default(),
            metrics: MetricsSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            reviews: "reviews.jsonl".into(),
            lexicon: None,
            labeled: None,
            classifier: None,
            output_dir: "out".into(),
        }
    }
}

impl Default for ExtractionSection {
    fn default() -> Self {
        let t = TrainParams::default();
        ExtractionSection {
            markers: DEFAULT_MARKERS.iter().map(|s| s.to_string()).collect(),
            model_code_pattern: DEFAULT_MODEL_CODE_PATTERN.into(),
            threshold: 0.9,
            split: [0.8, 0.1, 0.1],
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            l2: t.l2,
        }
    }
}

impl Default for LmSection {
    fn default() -> Self {
        LmSection {
            order: 3,
            discount: 0.75,
            embedding_dim: 32,
            window: 2,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            alpha: vec![0.0, 0.2, 0.4],
            beta: vec![0.0, 0.2, 0.4],
            k: vec![5],
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML config and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::Config(format!("cannot read config file {}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.reviews);
        join(&mut self.paths.output_dir);
        for p in [&mut self.paths.lexicon, &mut self.paths.labeled, &mut self.paths.classifier].into_iter().flatten() {
            join(p);
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            epochs: self.extraction.epochs,
            learning_rate: self.extraction.learning_rate,
            l2: self.extraction.l2,
            seed: self.seed,
        }
    }

    pub fn patterns(&self) -> Result<PatternSet, CliError> {
        PatternSet::new(self.extraction.markers.iter().cloned(), &self.extraction.model_code_pattern).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Input files must exist and every parameter must be in range.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut inputs = vec![("paths.reviews", &self.paths.reviews)];
        for (key, p) in [("paths.lexicon", &self.paths.lexicon), ("paths.labeled", &self.paths.labeled), ("paths.classifier", &self.paths.classifier)] {
            if let Some(p) = p {
                inputs.push((key, p));
            }
        }
        for (key, p) in inputs {
            if !p.is_file() {
                return Err(CliError::Config(format!("{key}: input file {} does not exist", p.display())));
            }
        }
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = self.extraction.threshold;
        if !(0.0..1.0).contains(&t) {
            return bad(format!("extraction.threshold {t} must lie in [0, 1)"));
        }
        let s = self.extraction.split;
        if s.iter().any(|f| !(0.0..=1.0).contains(f)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("extraction.split {s:?} must be three fractions summing to 1"));
        }
        if self.aspects.min_freq == 0 || self.aspects.window == 0 {
            return bad("aspects.min_freq and aspects.window must be positive".into());
        }
        if self.lm.order == 0 || self.lm.embedding_dim == 0 || self.lm.window == 0 {
            return bad("lm.order, lm.embedding_dim and lm.window must be positive".into());
        }
        if !(self.lm.discount > 0.0 && self.lm.discount < 1.0) {
            return bad(format!("lm.discount {} must lie in (0, 1)", self.lm.discount));
        }
        self.decode.validate().map_err(|e| CliError::Config(format!("decode: {e}")))?;
        self.patterns()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[decode]\ngamma = 1.0").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg: PipelineConfig = toml::from_str(
            "seed = 7\n[decode]\nmode = \"contrastive\"\nalpha = 0.5\nbeta = 0.0\n[lm]\norder = 2\n[sweep]\nk = [3, 5]",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.decode.alpha, 0.5);
        assert_eq!(cfg.decode.k, 5);
        assert_eq!(cfg.lm.order, 2);
        assert_eq!(cfg.sweep.k, [3, 5]);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.lexicon = Some("lex.tsv".into());
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.paths.reviews, Path::new("/data/reviews.jsonl"));
        assert_eq!(cfg.paths.lexicon.as_deref(), Some(Path::new("/data/lex.tsv")));
    }

    #[test]
    fn validation_names_the_missing_path() {
        let cfg = PipelineConfig::default();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("reviews.jsonl"), "{err}");
    }
}
