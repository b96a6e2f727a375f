//! Location-aware skip-gram embeddings of queries, locations, query
//! fragments, link clicks and ads, with cosine ad retrieval and evaluation.

pub mod geo;
pub mod session;
pub mod tagger;
pub mod embed;
pub mod eval;
pub mod retrieval;
pub mod synth;
