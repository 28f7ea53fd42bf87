//! Comparative sentence mining and aspect-guided generation for product reviews.
//!
//! The pipeline runs in stages, one module each:
//!
//! - [`corpus`]: review loading, sentence splitting, tokenization, dataset statistics
//! - [`extraction`]: comparative candidate patterns, the sentence classifier, dataset building
//! - [`aspects`]: item aspects with lexicon sentiment
//! - [`lm`]: the language-model contract and the n-gram + embedding reference model
//! - [`decoding`]: greedy, top-k sampling, contrastive, aspect-guided and BoW-rescored decoding
//! - [`metrics`]: Distinct-n, BLEU, ROUGE-L precision, % comparative and % aspect

pub mod aspects;
pub mod corpus;
pub mod decoding;
pub mod extraction;
pub mod lm;
pub mod metrics;
