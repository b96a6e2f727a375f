//! Session log data types, the TSV log format and session hygiene filters.
//!
//! A log holds one event per line:
//!
//! ```text
//! session_id  timestamp_ms  kind  token  lat  lon  user_woeid  query_woeid  local_intent  position
//! ```
//!
//! Columns are tab separated, missing optional fields are `-`, and the token
//! is double quoted with backslash escapes. Session flags are carried on
//! separate `#FLAGS<TAB>session_id<TAB>bot,short_lived_cookie` lines.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

/// Default cap on query events per session.
pub const DEFAULT_MAX_QUERIES: usize = 30;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("invalid coordinate on line {line}: ({lat}, {lon})")]
    InvalidCoordinate { line: usize, lat: f64, lon: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Query,
    SearchLinkClick,
    AdClick,
    AdView,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Query => "QUERY",
            EventKind::SearchLinkClick => "SLC",
            EventKind::AdClick => "ADCLICK",
            EventKind::AdView => "ADVIEW",
        }
    }

    pub fn is_ad(self) -> bool {
        matches!(self, EventKind::AdClick | EventKind::AdView)
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "QUERY" => Ok(EventKind::Query),
            "SLC" => Ok(EventKind::SearchLinkClick),
            "ADCLICK" => Ok(EventKind::AdClick),
            "ADVIEW" => Ok(EventKind::AdView),
            other => Err(format!("unknown event kind {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalIntent {
    #[default]
    None,
    Implicit,
    Explicit,
}

impl LocalIntent {
    pub fn as_str(self) -> &'static str {
        match self {
            LocalIntent::None => "NONE",
            LocalIntent::Implicit => "IMPLICIT",
            LocalIntent::Explicit => "EXPLICIT",
        }
    }

    pub fn is_local(self) -> bool {
        self != LocalIntent::None
    }
}

impl FromStr for LocalIntent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NONE" | "-" => Ok(LocalIntent::None),
            "IMPLICIT" => Ok(LocalIntent::Implicit),
            "EXPLICIT" => Ok(LocalIntent::Explicit),
            other => Err(format!("unknown local intent {other:?}")),
        }
    }
}

/// A latitude/longitude pair in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One user activity in a search session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionEvent {
    pub kind: EventKind,
    pub token: String,
    pub timestamp: i64,
    /// Ad slot rank, present only for ad clicks and views.
    pub position: Option<u32>,
    pub latlon: Option<LatLon>,
    pub user_woeid: Option<String>,
    pub query_woeid: Option<String>,
    pub local_intent: LocalIntent,
}

impl SessionEvent {
    pub fn new(kind: EventKind, token: impl Into<String>, timestamp: i64) -> Self {
        SessionEvent {
            kind,
            token: token.into(),
            timestamp,
            position: None,
            latlon: None,
            user_woeid: None,
            query_woeid: None,
            local_intent: LocalIntent::None,
        }
    }

    pub fn query(token: impl Into<String>, timestamp: i64, intent: LocalIntent) -> Self {
        let mut ev = Self::new(EventKind::Query, token, timestamp);
        ev.local_intent = intent;
        ev
    }

    pub fn ad(kind: EventKind, token: impl Into<String>, timestamp: i64, position: u32) -> Self {
        debug_assert!(kind.is_ad());
        let mut ev = Self::new(kind, token, timestamp);
        ev.position = Some(position);
        ev
    }

    pub fn with_user_woeid(mut self, woeid: impl Into<String>) -> Self {
        self.user_woeid = Some(woeid.into());
        self
    }

    pub fn with_query_woeid(mut self, woeid: impl Into<String>) -> Self {
        self.query_woeid = Some(woeid.into());
        self
    }

    pub fn with_latlon(mut self, lat: f64, lon: f64) -> Self {
        self.latlon = Some(LatLon::new(lat, lon));
        self
    }

    /// Checks the per-event invariants of the log format.
    pub fn validate(&self) -> Result<(), String> {
        if self.kind.is_ad() != self.position.is_some() {
            return Err("position must be present exactly for ad events".into());
        }
        if self.position == Some(0) {
            return Err("ad position must be >= 1".into());
        }
        if self.local_intent.is_local() && self.kind != EventKind::Query {
            return Err("local intent is only allowed on queries".into());
        }
        if self.token.is_empty() {
            return Err("empty token".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionFlags {
    pub bot: bool,
    pub short_lived_cookie: bool,
}

impl SessionFlags {
    pub fn any(&self) -> bool {
        self.bot || self.short_lived_cookie
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub events: Vec<SessionEvent>,
    pub flags: SessionFlags,
}

impl Session {
    pub fn new(session_id: impl Into<String>, mut events: Vec<SessionEvent>) -> Self {
        events.sort_by_key(|e| e.timestamp);
        Session {
            session_id: session_id.into(),
            events,
            flags: SessionFlags::default(),
        }
    }

    pub fn query_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Query)
            .count()
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> SessionError {
    SessionError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn unquote_token(field: &str, line: usize) -> Result<String, SessionError> {
    let inner = field
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|_| field.len() >= 2)
        .ok_or_else(|| malformed(line, "token must be double quoted"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                other => return Err(malformed(line, format!("bad escape \\{other:?}"))),
            },
            '"' => return Err(malformed(line, "unescaped quote inside token")),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn quote_token(token: &str) -> String {
    let mut out = String::with_capacity(token.len() + 2);
    out.push('"');
    for c in token.chars() {
        match c {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn optional(field: &str) -> Option<&str> {
    (field != "-").then_some(field)
}

fn parse_num<T: FromStr>(field: &str, what: &str, line: usize) -> Result<T, SessionError> {
    field
        .parse()
        .map_err(|_| malformed(line, format!("unparsable {what} {field:?}")))
}

fn parse_event_line(line: &str, lineno: usize) -> Result<(String, SessionEvent), SessionError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(malformed(
            lineno,
            format!("expected 10 columns, found {}", cols.len()),
        ));
    }
    let session_id = cols[0];
    if session_id.is_empty() || session_id == "-" {
        return Err(malformed(lineno, "empty session id"));
    }
    let timestamp: i64 = parse_num(cols[1], "timestamp", lineno)?;
    let kind: EventKind = cols[2].parse().map_err(|e: String| malformed(lineno, e))?;
    let token = unquote_token(cols[3], lineno)?;
    let latlon = match (optional(cols[4]), optional(cols[5])) {
        (None, None) => None,
        (Some(lat), Some(lon)) => {
            let lat: f64 = parse_num(lat, "latitude", lineno)?;
            let lon: f64 = parse_num(lon, "longitude", lineno)?;
            let p = LatLon::new(lat, lon);
            if !p.is_valid() {
                return Err(SessionError::InvalidCoordinate {
                    line: lineno,
                    lat,
                    lon,
                });
            }
            Some(p)
        }
        _ => return Err(malformed(lineno, "latitude and longitude must both be present")),
    };
    let user_woeid = optional(cols[6]).map(str::to_owned);
    let query_woeid = optional(cols[7]).map(str::to_owned);
    let local_intent: LocalIntent = cols[8].parse().map_err(|e: String| malformed(lineno, e))?;
    let position = optional(cols[9])
        .map(|p| parse_num::<u32>(p, "position", lineno))
        .transpose()?;
    let event = SessionEvent {
        kind,
        token,
        timestamp,
        position,
        latlon,
        user_woeid,
        query_woeid,
        local_intent,
    };
    event.validate().map_err(|e| malformed(lineno, e))?;
    Ok((session_id.to_owned(), event))
}

fn parse_flags(field: &str, lineno: usize) -> Result<SessionFlags, SessionError> {
    let mut flags = SessionFlags::default();
    if field == "-" || field.is_empty() {
        return Ok(flags);
    }
    for flag in field.split(',') {
        match flag.trim() {
            "bot" => flags.bot = true,
            "short_lived_cookie" => flags.short_lived_cookie = true,
            other => return Err(malformed(lineno, format!("unknown flag {other:?}"))),
        }
    }
    Ok(flags)
}

/// Parses a session log. Sessions come back in order of first appearance,
/// each with its events stably sorted by timestamp.
pub fn parse_session_log<R: BufRead>(reader: R) -> Result<Vec<Session>, SessionError> {
    let mut order: Vec<String> = Vec::new();
    let mut events: HashMap<String, Vec<SessionEvent>> = HashMap::new();
    let mut flags: HashMap<String, SessionFlags> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#FLAGS\t") {
            let cols: Vec<&str> = rest.split('\t').collect();
            if cols.len() != 2 || cols[0].is_empty() {
                return Err(malformed(lineno, "flags line needs session id and flag list"));
            }
            let parsed = parse_flags(cols[1], lineno)?;
            let entry = flags.entry(cols[0].to_owned()).or_default();
            entry.bot |= parsed.bot;
            entry.short_lived_cookie |= parsed.short_lived_cookie;
            if !events.contains_key(cols[0]) {
                order.push(cols[0].to_owned());
                events.insert(cols[0].to_owned(), Vec::new());
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (sid, event) = parse_event_line(line, lineno)?;
        match events.get_mut(&sid) {
            Some(list) => list.push(event),
            None => {
                order.push(sid.clone());
                events.insert(sid, vec![event]);
            }
        }
    }

    Ok(order
        .into_iter()
        .map(|sid| {
            let evs = events.remove(&sid).unwrap_or_default();
            let mut session = Session::new(sid.clone(), evs);
            session.flags = flags.get(&sid).copied().unwrap_or_default();
            session
        })
        .collect())
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_owned(), |x| x.to_string())
}

/// Writes sessions in the log format accepted by [`parse_session_log`].
pub fn write_session_log<W: Write>(mut out: W, sessions: &[Session]) -> std::io::Result<()> {
    for s in sessions {
        if s.flags.any() {
            let mut names = Vec::new();
            if s.flags.bot {
                names.push("bot");
            }
            if s.flags.short_lived_cookie {
                names.push("short_lived_cookie");
            }
            writeln!(out, "#FLAGS\t{}\t{}", s.session_id, names.join(","))?;
        }
        for e in &s.events {
            let (lat, lon) = match e.latlon {
                Some(p) => (p.lat.to_string(), p.lon.to_string()),
                None => ("-".to_owned(), "-".to_owned()),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.session_id,
                e.timestamp,
                e.kind.as_str(),
                quote_token(&e.token),
                lat,
                lon,
                fmt_opt(&e.user_woeid),
                fmt_opt(&e.query_woeid),
                e.local_intent.as_str(),
                fmt_opt(&e.position),
            )?;
        }
    }
    Ok(())
}

/// Optional "US only" style predicate on the user woeid.
pub type UserWoeidPredicate<'a> = &'a dyn Fn(&str) -> bool;

/// Drops flagged sessions and sessions with more than `max_queries` queries.
pub fn filter_sessions(sessions: Vec<Session>, max_queries: usize) -> Vec<Session> {
    filter_sessions_with(sessions, max_queries, None)
}

/// Like [`filter_sessions`], additionally keeping only sessions where some
/// event carries a user woeid accepted by `keep_user_woeid`.
pub fn filter_sessions_with(
    sessions: Vec<Session>,
    max_queries: usize,
    keep_user_woeid: Option<UserWoeidPredicate<'_>>,
) -> Vec<Session> {
    sessions
        .into_iter()
        .filter(|s| !s.flags.any())
        .filter(|s| s.query_count() <= max_queries)
        .filter(|s| match keep_user_woeid {
            None => true,
            Some(pred) => s
                .events
                .iter()
                .filter_map(|e| e.user_woeid.as_deref())
                .any(pred),
        })
        .collect()
}

/// Exact counts of query tokens across sessions.
pub fn count_query_frequencies(sessions: &[Session]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for e in sessions.iter().flat_map(|s| &s.events) {
        if e.kind == EventKind::Query {
            *counts.entry(e.token.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// One row of the query-volume tail histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct TailBucket {
    pub label: &'static str,
    /// Inclusive lower bound on per-query occurrence count.
    pub min_count: u64,
    /// Inclusive upper bound, `None` for the open bucket.
    pub max_count: Option<u64>,
    pub distinct_queries: usize,
    pub volume: u64,
    pub volume_share: f64,
}

const TAIL_BUCKETS: [(&str, u64, Option<u64>); 5] = [
    ("1", 1, Some(1)),
    ("2-4", 2, Some(4)),
    ("5-9", 5, Some(9)),
    ("10-99", 10, Some(99)),
    ("100+", 100, None),
];

/// Volume share of queries grouped by how often they occur.
pub fn tail_histogram(counts: &BTreeMap<String, u64>) -> Vec<TailBucket> {
    let total: u64 = counts.values().sum();
    TAIL_BUCKETS
        .iter()
        .map(|&(label, lo, hi)| {
            let in_bucket = |c: u64| c >= lo && hi.is_none_or(|h| c <= h);
            let (distinct, volume) = counts
                .values()
                .filter(|&&c| in_bucket(c))
                .fold((0usize, 0u64), |(n, v), &c| (n + 1, v + c));
            TailBucket {
                label,
                min_count: lo,
                max_count: hi,
                distinct_queries: distinct,
                volume,
                volume_share: if total == 0 {
                    0.0
                } else {
                    volume as f64 / total as f64
                },
            }
        })
        .collect()
}
