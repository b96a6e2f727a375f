use std::collections::{BTreeMap, HashMap};

use super::annotate::AnnotatedSession;
use super::{EmbedError, TokenKind, Variant};
use crate::tagger::FragmentToken;

/// Token universe keyed by `(kind, token)`. Ids are dense and ordered by
/// descending count, then by kind and token.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    entries: Vec<(TokenKind, String)>,
    counts: Vec<u64>,
    index: HashMap<(TokenKind, String), u32>,
    min_count: u64,
}

impl Vocabulary {
    pub fn from_counts(counts: BTreeMap<(TokenKind, String), u64>, min_count: u64) -> Self {
        let mut kept: Vec<((TokenKind, String), u64)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(kept, min_count)
    }

    /// Builds a vocabulary in the given id order.
    pub fn from_entries(entries: Vec<((TokenKind, String), u64)>, min_count: u64) -> Self {
        let mut vocab = Vocabulary {
            min_count,
            ..Default::default()
        };
        for ((kind, token), count) in entries {
            let id = vocab.entries.len() as u32;
            vocab.index.insert((kind, token.clone()), id);
            vocab.entries.push((kind, token));
            vocab.counts.push(count);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn get(&self, kind: TokenKind, token: &str) -> Option<u32> {
        self.index.get(&(kind, token.to_owned())).copied()
    }

    pub fn kind(&self, id: u32) -> TokenKind {
        self.entries[id as usize].0
    }

    pub fn token(&self, id: u32) -> &str {
        &self.entries[id as usize].1
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn ids_of_kind(&self, kind: TokenKind) -> impl Iterator<Item = u32> + '_ {
        (0..self.entries.len() as u32).filter(move |&i| self.entries[i as usize].0 == kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, TokenKind, &str, u64)> {
        self.entries
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, ((k, t), c))| (i as u32, *k, t.as_str(), *c))
    }
}

/// Counts every session token plus the location, fragment and subject tokens
/// the variant trains, then prunes below `min_count`.
pub fn build_vocabulary(
    sessions: &[AnnotatedSession],
    variant: Variant,
    min_count: u64,
) -> Result<Vocabulary, EmbedError> {
    let mut counts: BTreeMap<(TokenKind, String), u64> = BTreeMap::new();
    let mut bump = |kind: TokenKind, token: &str| {
        *counts.entry((kind, token.to_owned())).or_default() += 1;
    };
    for s in sessions {
        for e in &s.events {
            bump(e.kind, &e.token);
            match variant {
                Variant::S2v => {}
                Variant::Gw2v => {
                    if let Some(g) = &s.global {
                        bump(TokenKind::Loc, &g.id);
                    }
                }
                Variant::Lw2v | Variant::Lw2vPlus => {
                    if let Some(l) = &e.location {
                        bump(TokenKind::Loc, &l.id);
                    }
                }
                Variant::Lw2vCrfPlus => {
                    for f in &e.fragments {
                        match f {
                            FragmentToken::Fragment { token, .. } => bump(TokenKind::Fragment, token),
                            FragmentToken::Composition { subject, location } => {
                                bump(TokenKind::Subject, subject);
                                if let Some(l) = location {
                                    bump(TokenKind::Loc, l);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let vocab = Vocabulary::from_counts(counts, min_count);
    if vocab.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    Ok(vocab)
}
