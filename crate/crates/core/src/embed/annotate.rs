use super::TokenKind;
use crate::geo::{LocationResolver, LocationToken};
use crate::session::{EventKind, LocalIntent, Session};
use crate::tagger::{build_extraction_tokens, normalize_query, FragmentToken, QueryParser};

/// A session event with its resolved location and fragment tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedEvent {
    pub kind: TokenKind,
    pub event_kind: EventKind,
    pub token: String,
    pub position: Option<u32>,
    pub intent: LocalIntent,
    pub location: Option<LocationToken>,
    pub fragments: Vec<FragmentToken>,
}

/// A session ready for vocabulary building and example generation.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedSession {
    pub session_id: String,
    pub events: Vec<AnnotatedEvent>,
    /// The user location of the session, if any event carries one.
    pub global: Option<LocationToken>,
}

/// Attaches locations and extraction tokens to raw sessions.
#[derive(Clone, Debug, Default)]
pub struct Annotator {
    pub resolver: LocationResolver,
    pub parser: Option<QueryParser>,
}

fn token_kind(kind: EventKind) -> TokenKind {
    match kind {
        EventKind::Query => TokenKind::Query,
        EventKind::SearchLinkClick => TokenKind::Slc,
        EventKind::AdClick | EventKind::AdView => TokenKind::Ad,
    }
}

impl Annotator {
    pub fn new(resolver: LocationResolver, parser: Option<QueryParser>) -> Self {
        Annotator { resolver, parser }
    }

    /// Fragment tokens of a local query. A resolved location overrides the
    /// one found in the text.
    pub fn fragments(&self, query: &str, location: Option<&LocationToken>) -> Vec<FragmentToken> {
        let Some(parser) = &self.parser else {
            return Vec::new();
        };
        let mut ext = parser.parse(query);
        if let Some(loc) = location {
            ext.location_woeid = Some(loc.id.clone());
        }
        build_extraction_tokens(&ext)
    }

    pub fn annotate(&self, session: &Session) -> AnnotatedSession {
        let global = session
            .events
            .iter()
            .find_map(|e| self.resolver.user_location(e));
        let events = session
            .events
            .iter()
            .map(|e| {
                let kind = token_kind(e.kind);
                let token = if kind == TokenKind::Query {
                    let t = normalize_query(&e.token);
                    if t.is_empty() {
                        e.token.clone()
                    } else {
                        t
                    }
                } else {
                    e.token.clone()
                };
                let location = self.resolver.resolve(e);
                let fragments = if kind == TokenKind::Query && e.local_intent.is_local() {
                    self.fragments(&token, location.as_ref())
                } else {
                    Vec::new()
                };
                AnnotatedEvent {
                    kind,
                    event_kind: e.kind,
                    token,
                    position: e.position,
                    intent: e.local_intent,
                    location,
                    fragments,
                }
            })
            .collect();
        AnnotatedSession {
            session_id: session.session_id.clone(),
            events,
            global,
        }
    }

    pub fn annotate_all(&self, sessions: &[Session]) -> Vec<AnnotatedSession> {
        sessions.iter().map(|s| self.annotate(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::SessionEvent;

    #[test]
    fn resolves_locations() {
        let s = Session::new(
            "s",
            vec![
                SessionEvent::new(EventKind::SearchLinkClick, "slc", 0),
                SessionEvent::query("Coffee Near Me", 1, LocalIntent::Implicit).with_user_woeid("woeid_1"),
                SessionEvent::query("hotels in boston", 2, LocalIntent::Explicit)
                    .with_user_woeid("woeid_1")
                    .with_query_woeid("woeid_2"),
            ],
        );
        let a = Annotator::default().annotate(&s);
        assert_eq!(a.global, Some(LocationToken::woeid("woeid_1")));
        assert_eq!(a.events[0].location, None);
        assert_eq!(a.events[1].token, "coffee near me");
        assert_eq!(a.events[1].location, Some(LocationToken::woeid("woeid_1")));
        assert_eq!(a.events[2].location, Some(LocationToken::woeid("woeid_2")));
        assert!(a.events.iter().all(|e| e.fragments.is_empty()));
    }
}
