//! Skip-gram with negative sampling over compositional token sets, for the
//! five location-aware model variants.

mod annotate;
mod examples;
mod model;
mod sampler;
mod train;
mod vocab;

pub use annotate::{AnnotatedEvent, AnnotatedSession, Annotator};
pub use examples::{generate_examples, EncodedSession, Label, TrainingExample};
pub use model::{
    pair_gradient, pair_loss, score, sgd_step, sigmoid, softmax_prob, EmbeddingModel, PairGradient,
};
pub use sampler::{build_negative_table, NegativeSampler};
pub use train::{train, TrainConfig};
pub use vocab::{build_vocabulary, Vocabulary};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus has no trainable tokens")]
    EmptyCorpus,
    #[error("malformed model file at line {line}: {reason}")]
    MalformedModel { line: usize, reason: String },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    S2v,
    Gw2v,
    Lw2v,
    Lw2vPlus,
    Lw2vCrfPlus,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::S2v,
        Variant::Gw2v,
        Variant::Lw2v,
        Variant::Lw2vPlus,
        Variant::Lw2vCrfPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::S2v => "s2v",
            Variant::Gw2v => "gw2v",
            Variant::Lw2v => "lw2v",
            Variant::Lw2vPlus => "lw2v_plus",
            Variant::Lw2vCrfPlus => "lw2v_crf_plus",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

/// Token namespaces of the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Query,
    Slc,
    Ad,
    Loc,
    Fragment,
    Subject,
}

impl TokenKind {
    pub const ALL: [TokenKind; 6] = [
        TokenKind::Query,
        TokenKind::Slc,
        TokenKind::Ad,
        TokenKind::Loc,
        TokenKind::Fragment,
        TokenKind::Subject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Query => "QUERY",
            TokenKind::Slc => "SLC",
            TokenKind::Ad => "AD",
            TokenKind::Loc => "LOC",
            TokenKind::Fragment => "FRAGMENT",
            TokenKind::Subject => "SUBJECT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TokenKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown token kind {s:?}"))
    }
}
