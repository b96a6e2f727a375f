//! Deterministic synthetic corpora with planted location structure: session
//! logs, a BIO tagging corpus, graded judgments and the ground-truth ads.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{Grade, Judgment};
use crate::geo::{Woeid, WoeidLevel, WoeidTable};
use crate::session::{EventKind, LocalIntent, Session, SessionEvent, SessionFlags};
use crate::tagger::{join_words, tokenize_query, AnnotatedQuery, Gazetteer, Lexicon, QualifierType, Tag};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown (subject, location) pair ({0}, {1})")]
    UnknownPair(String, String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_locations: usize,
    pub n_subjects: usize,
    pub n_ads_per_pair: usize,
    pub n_sessions: usize,
    /// Test sessions, generated from an independent stream.
    pub n_test_sessions: usize,
    pub p_implicit: f64,
    pub p_explicit: f64,
    pub click_noise: f64,
    /// Share of test local queries written with qualifiers never used in
    /// training sessions.
    pub p_fresh: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_locations: 20,
            n_subjects: 20,
            n_ads_per_pair: 1,
            n_sessions: 50_000,
            n_test_sessions: 5_000,
            p_implicit: 0.4,
            p_explicit: 0.4,
            click_noise: 0.2,
            p_fresh: 0.3,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_locations == 0 || self.n_locations > CITIES.len() {
            return bad(format!("n_locations must be in 1..={}", CITIES.len()));
        }
        if self.n_subjects == 0 || self.n_subjects > SUBJECTS.len() {
            return bad(format!("n_subjects must be in 1..={}", SUBJECTS.len()));
        }
        if self.n_ads_per_pair == 0 {
            return bad("n_ads_per_pair must be positive".into());
        }
        for (name, p) in [
            ("p_implicit", self.p_implicit),
            ("p_explicit", self.p_explicit),
            ("p_fresh", self.p_fresh),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if self.p_implicit + self.p_explicit > 1.0 + 1e-12 {
            return bad("p_implicit + p_explicit must not exceed 1".into());
        }
        if !(0.0..1.0).contains(&self.click_noise) {
            return bad("click_noise must be in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SubjectKind {
    Category,
    Organization,
}

/// Subjects with their cluster; every fifth is an organization.
const SUBJECTS: [(&str, SubjectKind, usize); 24] = [
    ("hotels", SubjectKind::Category, 0),
    ("motels", SubjectKind::Category, 0),
    ("bed and breakfast", SubjectKind::Category, 0),
    ("hostels", SubjectKind::Category, 0),
    ("marriott", SubjectKind::Organization, 0),
    ("coffee shops", SubjectKind::Category, 1),
    ("pizza", SubjectKind::Category, 1),
    ("sushi", SubjectKind::Category, 1),
    ("bakeries", SubjectKind::Category, 1),
    ("starbucks", SubjectKind::Organization, 1),
    ("dentists", SubjectKind::Category, 2),
    ("pharmacies", SubjectKind::Category, 2),
    ("urgent care", SubjectKind::Category, 2),
    ("optometrists", SubjectKind::Category, 2),
    ("walgreens", SubjectKind::Organization, 2),
    ("car rental", SubjectKind::Category, 3),
    ("auto repair", SubjectKind::Category, 3),
    ("gas stations", SubjectKind::Category, 3),
    ("car wash", SubjectKind::Category, 3),
    ("jiffy lube", SubjectKind::Organization, 3),
    ("florists", SubjectKind::Category, 4),
    ("bookstores", SubjectKind::Category, 4),
    ("hardware stores", SubjectKind::Category, 4),
    ("macys", SubjectKind::Organization, 4),
];

/// Cities with their state index and a zip code.
const CITIES: [(&str, usize, &str); 24] = [
    ("springfield", 0, "60601"),
    ("riverton", 0, "60602"),
    ("oak harbor", 0, "60603"),
    ("fairview", 0, "60604"),
    ("lakewood", 1, "70101"),
    ("georgetown", 1, "70102"),
    ("san marco", 1, "70103"),
    ("kingston", 1, "70104"),
    ("ashford", 2, "80201"),
    ("millbrook", 2, "80202"),
    ("port ellis", 2, "80203"),
    ("clearwater", 2, "80204"),
    ("brookside", 3, "90301"),
    ("westfield", 3, "90302"),
    ("el dorado", 3, "90303"),
    ("hampton", 3, "90304"),
    ("granville", 4, "30401"),
    ("newport", 4, "30402"),
    ("cedar falls", 4, "30403"),
    ("salem", 4, "30404"),
    ("avondale", 5, "40501"),
    ("bristol", 5, "40502"),
    ("dover", 5, "40503"),
    ("marion", 5, "40504"),
];

const STATES: [&str; 6] = ["arcadia", "belmont", "columbia", "delmar", "eldora", "franconia"];

/// Qualifiers used in training sessions.
const QUALIFIERS: [(&str, QualifierType); 6] = [
    ("best", QualifierType::Superlative),
    ("cheap", QualifierType::Price),
    ("affordable", QualifierType::Price),
    ("top rated", QualifierType::Rating),
    ("open now", QualifierType::Recency),
    ("nearest", QualifierType::Proximity),
];

/// Qualifiers that only appear in test sessions.
const FRESH_QUALIFIERS: [(&str, QualifierType); 4] = [
    ("finest", QualifierType::Superlative),
    ("budget", QualifierType::Price),
    ("highly rated", QualifierType::Rating),
    ("open late", QualifierType::Recency),
];

/// Implicit location phrases. Each city prefers one of them.
const NEAR_PHRASES: [&str; 8] = [
    "near me",
    "nearby",
    "close to me",
    "around me",
    "in my area",
    "near my location",
    "close by",
    "around here",
];

const ATTRIBUTES: [&str; 3] = ["opening hours", "phone number", "reviews"];

const P_PREFERRED_PHRASE: f64 = 0.7;
const P_SAME_STATE_EXPLICIT: f64 = 0.35;
const P_HOME_EXPLICIT: f64 = 0.25;
const P_QUALIFIED: f64 = 0.5;
const P_SECOND_BLOCK: f64 = 0.3;
const P_BOT: f64 = 0.01;

fn woeid_of_city(l: usize) -> String {
    format!("woeid_{}", 2_400_001 + l)
}

fn woeid_of_state(s: usize) -> String {
    format!("woeid_{}", 2_300_001 + s)
}

/// Ad token of a (subject, location) pair; `k > 0` for extra inventory.
pub fn ad_token(subject: &str, city: &str, k: usize) -> String {
    if k == 0 {
        format!("ad_{}_{}", join_words(subject), join_words(city))
    } else {
        format!("ad_{}_{}_{k}", join_words(subject), join_words(city))
    }
}

/// The planted ad of each (subject, location woeid) pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub pairs: BTreeMap<(String, String), String>,
}

impl GroundTruth {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for ((s, l), a) in &self.pairs {
            writeln!(w, "{s}\t{l}\t{a}")?;
        }
        Ok(())
    }
}

pub fn oracle_best_ad<'a>(truth: &'a GroundTruth, subject: &str, location: &str) -> Result<&'a str, SynthError> {
    truth
        .pairs
        .get(&(subject.to_owned(), location.to_owned()))
        .map(String::as_str)
        .ok_or_else(|| SynthError::UnknownPair(subject.to_owned(), location.to_owned()))
}

/// Everything the generator emits.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub train: Vec<Session>,
    pub test: Vec<Session>,
    pub truth: GroundTruth,
    pub tagging: Vec<AnnotatedQuery>,
    pub tagging_heldout: Vec<AnnotatedQuery>,
    pub judgments: Vec<Judgment>,
    pub woeids: WoeidTable,
    pub lexicon: Lexicon,
    pub gazetteer: Gazetteer,
    /// `(subject, location woeid)` of every planted pair, subject words
    /// joined by underscores as in fragment tokens.
    pub planted: Vec<(String, String)>,
}

struct World<'c> {
    config: &'c SynthConfig,
    subjects: Vec<(&'static str, SubjectKind, usize)>,
    cities: Vec<(&'static str, usize, &'static str)>,
    n_ads: usize,
}

struct Draw {
    subject: usize,
    query_city: usize,
    intent: LocalIntent,
    text: String,
}

impl World<'_> {
    fn ad(&self, s: usize, l: usize) -> String {
        ad_token(self.subjects[s].0, self.cities[l].0, 0)
    }

    fn random_ad<R: Rng>(&self, rng: &mut R) -> String {
        let s = rng.random_range(0..self.subjects.len());
        let l = rng.random_range(0..self.cities.len());
        ad_token(self.subjects[s].0, self.cities[l].0, rng.random_range(0..self.n_ads))
    }

    fn same_state_city<R: Rng>(&self, l: usize, rng: &mut R) -> usize {
        let state = self.cities[l].1;
        let peers: Vec<usize> = (0..self.cities.len())
            .filter(|&c| c != l && self.cities[c].1 == state)
            .collect();
        peers.choose(rng).copied().unwrap_or(l)
    }

    fn other_city<R: Rng>(&self, l: usize, rng: &mut R) -> usize {
        if self.cities.len() == 1 {
            return l;
        }
        loop {
            let c = rng.random_range(0..self.cities.len());
            if c != l {
                return c;
            }
        }
    }

    fn qualifier<R: Rng>(&self, fresh: bool, rng: &mut R) -> Option<&'static str> {
        if fresh {
            return Some(FRESH_QUALIFIERS.choose(rng).unwrap().0);
        }
        rng.random_bool(P_QUALIFIED)
            .then(|| QUALIFIERS.choose(rng).unwrap().0)
    }

    fn near_phrase<R: Rng>(&self, home: usize, rng: &mut R) -> &'static str {
        if rng.random_bool(P_PREFERRED_PHRASE) {
            NEAR_PHRASES[home % NEAR_PHRASES.len()]
        } else {
            NEAR_PHRASES.choose(rng).unwrap()
        }
    }

    /// Draws the intent, subject, query location and surface text of one
    /// query for a user living in `home`.
    fn draw_query<R: Rng>(&self, home: usize, subject: usize, fresh: bool, rng: &mut R) -> Draw {
        let subj = self.subjects[subject].0;
        let u: f64 = rng.random();
        if u < self.config.p_implicit {
            let q = self.qualifier(fresh, rng);
            let near = self.near_phrase(home, rng);
            let text = match q {
                Some(q) => format!("{q} {subj} {near}"),
                None => format!("{subj} {near}"),
            };
            Draw {
                subject,
                query_city: home,
                intent: LocalIntent::Implicit,
                text,
            }
        } else if u < self.config.p_implicit + self.config.p_explicit {
            let v: f64 = rng.random();
            let city = if v < P_HOME_EXPLICIT {
                home
            } else if v < P_HOME_EXPLICIT + P_SAME_STATE_EXPLICIT {
                self.same_state_city(home, rng)
            } else {
                self.other_city(home, rng)
            };
            let cname = self.cities[city].0;
            let q = self.qualifier(fresh, rng);
            let text = match (q, rng.random_range(0..3)) {
                (Some(q), _) => format!("{q} {subj} in {cname}"),
                (None, 0) => format!("{subj} in {cname}"),
                (None, 1) => format!("{subj} {cname}"),
                (None, _) => format!("{cname} {subj}"),
            };
            Draw {
                subject,
                query_city: city,
                intent: LocalIntent::Explicit,
                text,
            }
        } else {
            let text = match rng.random_range(0..3) {
                0 => subj.to_owned(),
                1 => format!("{subj} {}", ATTRIBUTES.choose(rng).unwrap()),
                _ => format!("{subj} online"),
            };
            Draw {
                subject,
                query_city: home,
                intent: LocalIntent::None,
                text,
            }
        }
    }

    fn session<R: Rng>(&self, id: String, index: usize, fresh_rate: f64, rng: &mut R) -> Session {
        let home = rng.random_range(0..self.cities.len());
        let user_woeid = woeid_of_city(home);
        let mut t = 1_500_000_000_000i64 + index as i64 * 3_600_000;
        let mut events = Vec::new();
        let mut next_t = || {
            t += 1_000 + (index as i64 % 7);
            t
        };

        if rng.random_bool(P_BOT) {
            for _ in 0..rng.random_range(2..6) {
                events.push(
                    SessionEvent::query(format!("bot{}", rng.random_range(0..1000)), next_t(), LocalIntent::None)
                        .with_user_woeid(user_woeid.clone()),
                );
                events.push(SessionEvent::ad(EventKind::AdClick, self.random_ad(rng), next_t(), 1));
            }
            let mut s = Session::new(id, events);
            s.flags = SessionFlags {
                bot: true,
                short_lived_cookie: false,
            };
            return s;
        }

        let first_subject = rng.random_range(0..self.subjects.len());
        let blocks = if rng.random_bool(P_SECOND_BLOCK) { 2 } else { 1 };
        for b in 0..blocks {
            let subject = if b == 0 {
                first_subject
            } else {
                let cluster = self.subjects[first_subject].2;
                let related: Vec<usize> = (0..self.subjects.len())
                    .filter(|&s| s != first_subject && self.subjects[s].2 == cluster)
                    .collect();
                related.choose(rng).copied().unwrap_or(first_subject)
            };
            let subj_slug = join_words(self.subjects[subject].0);
            if rng.random_bool(0.5) {
                events.push(
                    SessionEvent::new(EventKind::SearchLinkClick, format!("slc_{subj_slug}_guide"), next_t())
                        .with_user_woeid(user_woeid.clone()),
                );
            }
            let fresh = rng.random_bool(fresh_rate);
            let draw = self.draw_query(home, subject, fresh, rng);
            let mut q = SessionEvent::query(draw.text.clone(), next_t(), draw.intent).with_user_woeid(user_woeid.clone());
            if draw.intent == LocalIntent::Explicit {
                q = q.with_query_woeid(woeid_of_city(draw.query_city));
            }
            events.push(q);

            let clicked = if rng.random_bool(self.config.click_noise) {
                self.random_ad(rng)
            } else {
                self.ad(draw.subject, draw.query_city)
            };
            let n_views = rng.random_range(0..3u32);
            for p in 1..=n_views {
                let view = if rng.random_bool(0.5) {
                    ad_token(
                        self.subjects[draw.subject].0,
                        self.cities[self.other_city(draw.query_city, rng)].0,
                        rng.random_range(0..self.n_ads),
                    )
                } else {
                    self.random_ad(rng)
                };
                if view != clicked {
                    events.push(SessionEvent::ad(EventKind::AdView, view, next_t(), p));
                }
            }
            events.push(SessionEvent::ad(EventKind::AdClick, clicked, next_t(), n_views + 1));
            if rng.random_bool(0.3) {
                events.push(
                    SessionEvent::new(EventKind::SearchLinkClick, format!("slc_{subj_slug}_reviews"), next_t())
                        .with_user_woeid(user_woeid.clone()),
                );
            }
        }
        Session::new(id, events)
    }

    fn tagged_query<R: Rng>(&self, rng: &mut R) -> AnnotatedQuery {
        let mut tokens: Vec<String> = Vec::new();
        let mut tags: Vec<Tag> = Vec::new();
        let push_span = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>, text: &str, b: Tag, i: Tag| {
            for (k, w) in tokenize_query(text).into_iter().enumerate() {
                tokens.push(w);
                tags.push(if k == 0 { b } else { i });
            }
        };
        let push_o = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>, text: &str| {
            for w in tokenize_query(text) {
                tokens.push(w);
                tags.push(Tag::O);
            }
        };
        let (subj, kind, _) = self.subjects[rng.random_range(0..self.subjects.len())];
        let (stag, itag) = match kind {
            SubjectKind::Category => (Tag::BCat, Tag::ICat),
            SubjectKind::Organization => (Tag::BOrg, Tag::IOrg),
        };
        let all_quals: Vec<&str> = QUALIFIERS
            .iter()
            .chain(FRESH_QUALIFIERS.iter())
            .map(|q| q.0)
            .collect();
        if rng.random_bool(0.4) {
            push_o(&mut tokens, &mut tags, all_quals.choose(rng).unwrap());
        }
        let city = rng.random_range(0..self.cities.len());
        let (cname, state, zip) = self.cities[city];
        match rng.random_range(0..6) {
            0 => {
                push_span(&mut tokens, &mut tags, subj, stag, itag);
                push_o(&mut tokens, &mut tags, NEAR_PHRASES.choose(rng).unwrap());
            }
            1 => {
                push_span(&mut tokens, &mut tags, subj, stag, itag);
                push_o(&mut tokens, &mut tags, "in");
                push_span(&mut tokens, &mut tags, cname, Tag::BLocCity, Tag::ILocCity);
            }
            2 => {
                push_span(&mut tokens, &mut tags, cname, Tag::BLocCity, Tag::ILocCity);
                push_span(&mut tokens, &mut tags, subj, stag, itag);
            }
            3 => {
                push_span(&mut tokens, &mut tags, subj, stag, itag);
                push_o(&mut tokens, &mut tags, "in");
                push_span(&mut tokens, &mut tags, cname, Tag::BLocCity, Tag::ILocCity);
                push_span(&mut tokens, &mut tags, STATES[state], Tag::BLocState, Tag::ILocState);
            }
            4 => {
                push_span(&mut tokens, &mut tags, subj, stag, itag);
                push_o(&mut tokens, &mut tags, "in");
                push_span(&mut tokens, &mut tags, zip, Tag::BLocZip, Tag::ILocZip);
            }
            _ => {
                push_span(&mut tokens, &mut tags, subj, stag, itag);
                push_o(&mut tokens, &mut tags, ATTRIBUTES.choose(rng).unwrap());
            }
        }
        AnnotatedQuery { tokens, tags }
    }

    fn judgments<R: Rng>(&self, train: &[Session], rng: &mut R) -> Vec<Judgment> {
        let mut seen: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for s in train.iter().filter(|s| !s.flags.any()) {
            for e in &s.events {
                if e.kind == EventKind::Query && e.local_intent == LocalIntent::Explicit {
                    let text = crate::tagger::normalize_query(&e.token);
                    if seen.contains_key(&text) {
                        continue;
                    }
                    let Some(l) = e
                        .query_woeid
                        .as_deref()
                        .and_then(|w| (0..self.cities.len()).find(|&c| woeid_of_city(c) == w))
                    else {
                        continue;
                    };
                    let Some(sub) = (0..self.subjects.len()).find(|&k| {
                        let words = tokenize_query(self.subjects[k].0);
                        let toks = tokenize_query(&text);
                        toks.windows(words.len()).any(|w| w == words.as_slice())
                    }) else {
                        continue;
                    };
                    seen.insert(text, (sub, l));
                }
            }
        }
        let mut out = Vec::new();
        let queries: Vec<(&String, &(usize, usize))> = seen.iter().collect();
        let n = queries.len().min(300);
        let picked: Vec<&(&String, &(usize, usize))> = queries.choose_multiple(rng, n).collect();
        for (q, &(s, l)) in picked {
            let cluster = self.subjects[s].2;
            let related: Vec<usize> = (0..self.subjects.len())
                .filter(|&k| k != s && self.subjects[k].2 == cluster)
                .collect();
            let unrelated: Vec<usize> = (0..self.subjects.len())
                .filter(|&k| self.subjects[k].2 != cluster)
                .collect();
            let other_state: Vec<usize> = (0..self.cities.len())
                .filter(|&c| self.cities[c].1 != self.cities[l].1)
                .collect();
            let same_state = self.same_state_city(l, rng);
            let mut add = |ad: String, grade: Grade| {
                if !out.iter().any(|j: &Judgment| &j.query == *q && j.ad == ad) {
                    out.push(Judgment {
                        query: (*q).clone(),
                        ad,
                        grade,
                    });
                }
            };
            add(self.ad(s, l), Grade::Perfect);
            if same_state != l {
                add(self.ad(s, same_state), Grade::Highly);
            }
            if let Some(&c) = other_state.choose(rng) {
                add(self.ad(s, c), Grade::Relevant);
            }
            if let Some(&r) = related.choose(rng) {
                add(self.ad(r, l), Grade::Somewhat);
                if let Some(&c) = other_state.choose(rng) {
                    add(self.ad(r, c), Grade::Barely);
                }
            }
            if let (Some(&u), Some(&c)) = (unrelated.choose(rng), other_state.choose(rng)) {
                add(self.ad(u, c), Grade::Irrelevant);
            }
        }
        out
    }
}

/// Generates the full synthetic corpus. Identical configurations produce
/// identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let world = World {
        config,
        subjects: SUBJECTS[..config.n_subjects].to_vec(),
        cities: CITIES[..config.n_locations].to_vec(),
        n_ads: config.n_ads_per_pair,
    };
    let rng_for = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(config.seed);
        r.set_stream(stream);
        r
    };

    let mut rng = rng_for(1);
    let train: Vec<Session> = (0..config.n_sessions)
        .map(|i| world.session(format!("s{i}"), i, 0.0, &mut rng))
        .collect();
    let mut rng = rng_for(2);
    let test: Vec<Session> = (0..config.n_test_sessions)
        .map(|i| world.session(format!("t{i}"), i, config.p_fresh, &mut rng))
        .collect();

    let mut truth = GroundTruth::default();
    let mut planted = Vec::new();
    for (s, &(subj, _, _)) in world.subjects.iter().enumerate() {
        for l in 0..world.cities.len() {
            truth
                .pairs
                .insert((subj.to_owned(), woeid_of_city(l)), world.ad(s, l));
            planted.push((join_words(subj), woeid_of_city(l)));
        }
    }

    let mut rng = rng_for(3);
    let tagging: Vec<AnnotatedQuery> = (0..2_000).map(|_| world.tagged_query(&mut rng)).collect();
    let tagging_heldout: Vec<AnnotatedQuery> = (0..500).map(|_| world.tagged_query(&mut rng)).collect();

    let mut rng = rng_for(4);
    let judgments = world.judgments(&train, &mut rng);

    let mut woeids = vec![Woeid {
        id: "woeid_1".into(),
        level: WoeidLevel::Earth,
        parent: None,
    }];
    let n_states = world.cities.iter().map(|c| c.1).max().map_or(0, |m| m + 1);
    for s in 0..n_states {
        woeids.push(Woeid {
            id: woeid_of_state(s),
            level: WoeidLevel::State,
            parent: Some("woeid_1".into()),
        });
    }
    for (l, c) in world.cities.iter().enumerate() {
        woeids.push(Woeid {
            id: woeid_of_city(l),
            level: WoeidLevel::City,
            parent: Some(woeid_of_state(c.1)),
        });
    }
    let woeids = WoeidTable::new(woeids).expect("synthetic woeid hierarchy is valid");

    let mut lexicon = Lexicon::default();
    for (q, t) in QUALIFIERS.iter().chain(FRESH_QUALIFIERS.iter()) {
        lexicon.add_qualifier(q, *t);
    }
    for a in ATTRIBUTES {
        lexicon.add_attribute(a);
    }
    for p in NEAR_PHRASES {
        lexicon.add_exclusion(p);
    }
    let mut gazetteer = Gazetteer::default();
    for (l, c) in world.cities.iter().enumerate() {
        gazetteer.insert(c.0, &woeid_of_city(l));
        gazetteer.insert(c.2, &woeid_of_city(l));
    }
    for s in 0..n_states {
        gazetteer.insert(STATES[s], &woeid_of_state(s));
    }

    Ok(SynthCorpus {
        train,
        test,
        truth,
        tagging,
        tagging_heldout,
        judgments,
        woeids,
        lexicon,
        gazetteer,
        planted,
    })
}
