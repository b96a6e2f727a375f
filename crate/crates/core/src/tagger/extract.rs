use std::fmt;

use super::lexicon::{detect_local_intent, match_qualifiers, Gazetteer, Lexicon, QualifierType};
use super::model::{entity_spans, TaggerModel};
use super::tags::EntityType;
use super::tokenize_query;
use crate::geo::{WoeidLevel, WoeidTable};
use crate::session::LocalIntent;

/// Semantic fragments of a local query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionSet {
    pub subject: Option<String>,
    pub location_woeid: Option<String>,
    pub qualifier: Option<String>,
    pub qualifier_type: Option<QualifierType>,
    pub attributes: Vec<String>,
}

/// The four fragment forms in matching priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FragmentForm {
    QualifierSubjectLocation,
    SubjectLocation,
    SubjectPlusLocation,
    QualifierTypeSubjectLocation,
}

impl FragmentForm {
    pub const ALL: [FragmentForm; 4] = [
        FragmentForm::QualifierSubjectLocation,
        FragmentForm::SubjectLocation,
        FragmentForm::SubjectPlusLocation,
        FragmentForm::QualifierTypeSubjectLocation,
    ];
}

/// A fragment token: either a single concatenated token or the
/// sum-composition of a subject and an optional location.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum FragmentToken {
    Fragment { form: FragmentForm, token: String },
    Composition { subject: String, location: Option<String> },
}

impl FragmentToken {
    pub fn form(&self) -> FragmentForm {
        match self {
            FragmentToken::Fragment { form, .. } => *form,
            FragmentToken::Composition { .. } => FragmentForm::SubjectPlusLocation,
        }
    }
}

impl fmt::Display for FragmentToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FragmentToken::Fragment { token, .. } => f.write_str(token),
            FragmentToken::Composition {
                subject,
                location: Some(loc),
            } => write!(f, "{{{subject} + {loc}}}"),
            FragmentToken::Composition { subject, location: None } => write!(f, "{{{subject}}}"),
        }
    }
}

/// Joins the words of a phrase with underscores.
pub fn join_words(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Fragment tokens of an extraction in priority order, eliding forms whose
/// components are missing. Empty without a subject.
pub fn build_extraction_tokens(ext: &ExtractionSet) -> Vec<FragmentToken> {
    let Some(subject) = ext.subject.as_deref().map(join_words) else {
        return Vec::new();
    };
    let location = ext.location_woeid.as_deref().map(join_words);
    let mut out = Vec::with_capacity(4);
    if let Some(loc) = &location {
        if let Some(q) = &ext.qualifier {
            out.push(FragmentToken::Fragment {
                form: FragmentForm::QualifierSubjectLocation,
                token: format!("{}_{subject}_{loc}", join_words(q)),
            });
        }
        out.push(FragmentToken::Fragment {
            form: FragmentForm::SubjectLocation,
            token: format!("{subject}_{loc}"),
        });
    }
    out.push(FragmentToken::Composition {
        subject: subject.clone(),
        location: location.clone(),
    });
    if let (Some(loc), Some(t)) = (&location, ext.qualifier_type) {
        out.push(FragmentToken::Fragment {
            form: FragmentForm::QualifierTypeSubjectLocation,
            token: format!("{t}_{subject}_{loc}"),
        });
    }
    out
}

/// Tagger plus dictionaries: turns query text into an extraction set.
#[derive(Clone, Debug, Default)]
pub struct QueryParser {
    pub tagger: TaggerModel,
    pub lexicon: Lexicon,
    pub gazetteer: Gazetteer,
    pub woeids: Option<WoeidTable>,
}

impl QueryParser {
    pub fn new(tagger: TaggerModel, lexicon: Lexicon, gazetteer: Gazetteer) -> Self {
        QueryParser {
            tagger,
            lexicon,
            gazetteer,
            woeids: None,
        }
    }

    pub fn with_woeids(mut self, woeids: WoeidTable) -> Self {
        self.woeids = Some(woeids);
        self
    }

    pub fn intent(&self, text: &str) -> LocalIntent {
        detect_local_intent(&tokenize_query(text), &self.gazetteer, &self.lexicon)
    }

    fn below_state(&self, woeid: &str) -> bool {
        match self.woeids.as_ref().and_then(|t| t.get(woeid)) {
            Some(w) => w.level > WoeidLevel::State,
            None => true,
        }
    }

    pub fn parse(&self, text: &str) -> ExtractionSet {
        let tokens = tokenize_query(text);
        let mut ext = ExtractionSet::default();
        if tokens.is_empty() {
            return ext;
        }
        let tags = self
            .tagger
            .decode(&tokens)
            .expect("non-empty token sequence");
        for (start, end, entity) in entity_spans(&tags) {
            let phrase = tokens[start..end].join(" ");
            match entity {
                EntityType::Org | EntityType::Cat => {
                    if ext.subject.is_none() {
                        ext.subject = Some(phrase);
                    }
                }
                EntityType::LocCity | EntityType::LocZip => {
                    if ext.location_woeid.is_none() {
                        ext.location_woeid = self
                            .gazetteer
                            .get(&phrase)
                            .filter(|w| self.below_state(w))
                            .map(str::to_owned);
                    }
                }
                EntityType::LocState => {}
            }
        }
        let m = match_qualifiers(&tokens, &self.lexicon);
        ext.qualifier = m.qualifier;
        ext.qualifier_type = m.qualifier_type;
        ext.attributes = m.attributes;
        ext
    }
}
