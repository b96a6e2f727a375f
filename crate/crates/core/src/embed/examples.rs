use super::annotate::AnnotatedSession;
use super::{TokenKind, Variant, Vocabulary};
use crate::session::EventKind;
use crate::tagger::FragmentToken;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrainingExample {
    pub center: Vec<u32>,
    pub context: Vec<u32>,
    pub label: Label,
}

/// Token-id sets an event contributes on the center and on the context
/// side. Most events have exactly one set per side; local queries under the
/// fragment variant have one per extraction token.
#[derive(Clone, Debug, Default, PartialEq)]
struct EncodedEvent {
    /// Id of the event's own token, used for frequency subsampling.
    anchor: u32,
    center: Vec<Vec<u32>>,
    context: Vec<Vec<u32>>,
}

/// A session mapped to vocabulary ids for one variant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncodedSession {
    events: Vec<EncodedEvent>,
    /// `(event index, viewed ad id)` pairs for implicit negatives.
    implicit: Vec<(usize, u32)>,
}

fn fragment_sets(fragments: &[FragmentToken], vocab: &Vocabulary) -> Vec<Vec<u32>> {
    fragments
        .iter()
        .filter_map(|f| match f {
            FragmentToken::Fragment { token, .. } => vocab.get(TokenKind::Fragment, token).map(|i| vec![i]),
            FragmentToken::Composition { subject, location } => {
                let s = vocab.get(TokenKind::Subject, subject)?;
                let mut set = vec![s];
                if let Some(l) = location.as_deref().and_then(|l| vocab.get(TokenKind::Loc, l)) {
                    set.push(l);
                }
                Some(set)
            }
        })
        .collect()
}

impl EncodedSession {
    pub fn encode(session: &AnnotatedSession, vocab: &Vocabulary, variant: Variant, implicit_negatives: bool) -> Self {
        let global = session
            .global
            .as_ref()
            .and_then(|g| vocab.get(TokenKind::Loc, &g.id));
        let mut out = EncodedSession::default();
        // Event index of the query opening the current block, if retained.
        let mut block_query: Option<usize> = None;
        let mut views: Vec<(u32, &str)> = Vec::new();
        let mut clicks: Vec<(u32, &str)> = Vec::new();
        let flush = |query: Option<usize>, views: &mut Vec<(u32, &str)>, clicks: &mut Vec<(u32, &str)>, out: &mut EncodedSession| {
            if let (Some(q), true) = (query, implicit_negatives) {
                for &(p, _) in clicks.iter() {
                    for &(vp, ad) in views.iter() {
                        if vp < p && !clicks.iter().any(|&(_, c)| c == ad) {
                            if let Some(id) = vocab.get(TokenKind::Ad, ad) {
                                out.implicit.push((q, id));
                            }
                        }
                    }
                }
            }
            views.clear();
            clicks.clear();
        };

        for e in &session.events {
            if e.event_kind == EventKind::Query {
                flush(block_query, &mut views, &mut clicks, &mut out);
                block_query = None;
            }
            if e.event_kind == EventKind::AdView {
                views.push((e.position.unwrap_or(u32::MAX), &e.token));
                continue;
            }
            if e.event_kind == EventKind::AdClick {
                clicks.push((e.position.unwrap_or(u32::MAX), &e.token));
            }

            let base = vocab.get(e.kind, &e.token);
            let local_query = e.kind == TokenKind::Query && e.intent.is_local();
            let loc = if local_query {
                e.location.as_ref().and_then(|l| vocab.get(TokenKind::Loc, &l.id))
            } else {
                None
            };
            let with = |extra: Option<u32>| -> Option<Vec<Vec<u32>>> {
                let b = base?;
                Some(vec![match extra {
                    Some(x) if x != b => vec![b, x],
                    _ => vec![b],
                }])
            };
            let encoded = match variant {
                Variant::S2v => with(None).map(|s| (s.clone(), s)),
                Variant::Gw2v => with(global).zip(with(None)),
                Variant::Lw2v => with(loc).zip(with(None)),
                Variant::Lw2vPlus => with(loc).map(|s| (s.clone(), s)),
                Variant::Lw2vCrfPlus => {
                    let sets = if local_query {
                        fragment_sets(&e.fragments, vocab)
                    } else {
                        Vec::new()
                    };
                    if sets.is_empty() {
                        with(None).map(|s| (s.clone(), s))
                    } else {
                        Some((sets.clone(), sets))
                    }
                }
            };
            if let Some((center, context)) = encoded {
                if e.event_kind == EventKind::Query {
                    block_query = Some(out.events.len());
                }
                let anchor = base.unwrap_or(center[0][0]);
                out.events.push(EncodedEvent { anchor, center, context });
            }
        }
        flush(block_query, &mut views, &mut clicks, &mut out);
        out
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Visits every example in a fixed order: window pairs first, then
    /// implicit negatives. Positive pairs whose center and context sets
    /// overlap are skipped.
    pub fn for_each_example(&self, window: usize, mut f: impl FnMut(&[u32], &[u32], Label)) {
        let n = self.events.len();
        for m in 0..n {
            let lo = m.saturating_sub(window);
            let hi = (m + window).min(n.saturating_sub(1));
            for j in lo..=hi {
                if j == m {
                    continue;
                }
                for center in &self.events[m].center {
                    for context in &self.events[j].context {
                        if !context.iter().any(|c| center.contains(c)) {
                            f(center, context, Label::Positive);
                        }
                    }
                }
            }
        }
        for &(q, ad) in &self.implicit {
            for center in &self.events[q].center {
                if !center.contains(&ad) {
                    f(center, &[ad], Label::Negative);
                }
            }
        }
    }

    /// Copy keeping only the events for which `keep(anchor id)` holds.
    pub fn retain_events(&self, mut keep: impl FnMut(u32) -> bool) -> EncodedSession {
        let mut remap = vec![usize::MAX; self.events.len()];
        let mut out = EncodedSession::default();
        for (i, e) in self.events.iter().enumerate() {
            if keep(e.anchor) {
                remap[i] = out.events.len();
                out.events.push(e.clone());
            }
        }
        out.implicit = self
            .implicit
            .iter()
            .filter(|(q, _)| remap[*q] != usize::MAX)
            .map(|&(q, ad)| (remap[q], ad))
            .collect();
        out
    }

    pub fn count_examples(&self, window: usize) -> u64 {
        let mut n = 0;
        self.for_each_example(window, |_, _, _| n += 1);
        n
    }
}

/// All training examples of one session, in training order.
pub fn generate_examples(
    session: &AnnotatedSession,
    variant: Variant,
    vocab: &Vocabulary,
    window: usize,
    implicit_negatives: bool,
) -> Vec<TrainingExample> {
    let mut out = Vec::new();
    EncodedSession::encode(session, vocab, variant, implicit_negatives).for_each_example(window, |c, x, label| {
        out.push(TrainingExample {
            center: c.to_vec(),
            context: x.to_vec(),
            label,
        })
    });
    out
}
