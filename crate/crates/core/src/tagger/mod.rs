//! Local query parsing: tokenization, BIO tagging with a linear-chain model,
//! dictionary matching of qualifiers and attributes, and fragment tokens.

mod extract;
mod lexicon;
mod model;
mod tags;

pub use extract::{
    build_extraction_tokens, join_words, ExtractionSet, FragmentForm, FragmentToken, QueryParser,
};
pub use lexicon::{
    detect_local_intent, match_qualifiers, parse_gazetteer, parse_lexicon, write_gazetteer, write_lexicon, Gazetteer, Lexicon,
    QualifierMatch, QualifierType,
};
pub use model::{
    best_path, entity_spans, parse_conll, token_accuracy, token_features, train_tagger,
    viterbi_decode, write_conll, AnnotatedQuery, EntityScore, Scores, TagReport, TaggerModel,
    TrainReport,
};
pub use tags::{EntityType, Tag, ALL_TAGS, NUM_TAGS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("cannot decode an empty token sequence")]
    EmptyInput,
    #[error("invalid tag sequence at line {0}")]
    InvalidTagSequence(usize),
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Lowercases, splits on whitespace and trims punctuation from token edges.
pub fn tokenize_query(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Canonical surface form of a query: its tokens joined by single spaces.
pub fn normalize_query(text: &str) -> String {
    tokenize_query(text).join(" ")
}
