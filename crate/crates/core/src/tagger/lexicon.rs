//! Hand-curated phrase dictionaries: qualifiers, attributes, location
//! qualifier exclusions and the location gazetteer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::TaggerError;
use crate::session::LocalIntent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QualifierType {
    Superlative,
    Proximity,
    Price,
    Rating,
    Recency,
}

impl QualifierType {
    pub fn as_str(self) -> &'static str {
        match self {
            QualifierType::Superlative => "superlative",
            QualifierType::Proximity => "proximity",
            QualifierType::Price => "price",
            QualifierType::Rating => "rating",
            QualifierType::Recency => "recency",
        }
    }
}

impl fmt::Display for QualifierType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualifierType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "superlative" => QualifierType::Superlative,
            "proximity" => QualifierType::Proximity,
            "price" => QualifierType::Price,
            "rating" => QualifierType::Rating,
            "recency" => QualifierType::Recency,
            other => return Err(format!("unknown qualifier type {other:?}")),
        })
    }
}

/// Phrase dictionaries. All phrases are lowercase, space-joined tokens.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    pub qualifiers: BTreeMap<String, QualifierType>,
    pub attributes: BTreeSet<String>,
    /// Location qualifiers such as "near me"; never reported as qualifiers.
    pub exclusions: BTreeSet<String>,
}

impl Lexicon {
    pub fn add_qualifier(&mut self, phrase: &str, kind: QualifierType) -> &mut Self {
        self.qualifiers.insert(phrase.to_lowercase(), kind);
        self
    }

    pub fn add_attribute(&mut self, phrase: &str) -> &mut Self {
        self.attributes.insert(phrase.to_lowercase());
        self
    }

    pub fn add_exclusion(&mut self, phrase: &str) -> &mut Self {
        self.exclusions.insert(phrase.to_lowercase());
        self
    }

    fn max_phrase_len(&self) -> usize {
        self.qualifiers
            .keys()
            .chain(&self.attributes)
            .chain(&self.exclusions)
            .map(|p| p.split(' ').count())
            .max()
            .unwrap_or(0)
    }
}

/// Result of dictionary matching over a query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QualifierMatch {
    pub qualifier: Option<String>,
    pub qualifier_type: Option<QualifierType>,
    pub attributes: Vec<String>,
}

/// Longest-match scan, left to right. Excluded phrases are consumed without
/// being reported, the first qualifier wins and every attribute is kept.
pub fn match_qualifiers(tokens: &[String], lexicon: &Lexicon) -> QualifierMatch {
    let mut out = QualifierMatch::default();
    let max_len = lexicon.max_phrase_len();
    let mut i = 0;
    while i < tokens.len() {
        let mut consumed = 0;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let phrase = tokens[i..i + len].join(" ");
            if lexicon.exclusions.contains(&phrase) {
                consumed = len;
                break;
            }
            if let Some(&kind) = lexicon.qualifiers.get(&phrase) {
                if out.qualifier.is_none() {
                    out.qualifier = Some(phrase);
                    out.qualifier_type = Some(kind);
                }
                consumed = len;
                break;
            }
            if lexicon.attributes.contains(&phrase) {
                out.attributes.push(phrase);
                consumed = len;
                break;
            }
        }
        i += consumed.max(1);
    }
    out
}

/// Location surface forms mapped to woeid ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gazetteer {
    entries: BTreeMap<String, String>,
    max_len: usize,
}

impl Gazetteer {
    pub fn insert(&mut self, phrase: &str, woeid: &str) {
        let phrase = phrase.to_lowercase();
        self.max_len = self.max_len.max(phrase.split(' ').count());
        self.entries.insert(phrase, woeid.to_owned());
    }

    pub fn get(&self, phrase: &str) -> Option<&str> {
        self.entries.get(phrase).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// First (leftmost, longest) gazetteer phrase in the token list.
    pub fn find(&self, tokens: &[String]) -> Option<(&str, &str)> {
        for i in 0..tokens.len() {
            for len in (1..=self.max_len.min(tokens.len() - i)).rev() {
                let phrase = tokens[i..i + len].join(" ");
                if let Some((k, v)) = self.entries.get_key_value(&phrase) {
                    return Some((k, v));
                }
            }
        }
        None
    }
}

fn contains_phrase(tokens: &[String], phrases: &BTreeSet<String>) -> bool {
    let max_len = phrases.iter().map(|p| p.split(' ').count()).max().unwrap_or(0);
    (0..tokens.len()).any(|i| {
        (1..=max_len.min(tokens.len() - i)).any(|len| phrases.contains(&tokens[i..i + len].join(" ")))
    })
}

/// Rule-based local intent fallback for queries without an intent label.
pub fn detect_local_intent(tokens: &[String], gazetteer: &Gazetteer, lexicon: &Lexicon) -> LocalIntent {
    if contains_phrase(tokens, &lexicon.exclusions) {
        LocalIntent::Implicit
    } else if gazetteer.find(tokens).is_some() {
        LocalIntent::Explicit
    } else {
        LocalIntent::None
    }
}

/// Reads `phrase<TAB>kind<TAB>qualifier_type?` with kind in
/// {QUALIFIER, ATTRIBUTE, EXCLUDE}.
pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<Lexicon, TaggerError> {
    let mut lex = Lexicon::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| TaggerError::MalformedLine {
            line: idx + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols[0].trim().is_empty() {
            return Err(bad("expected phrase<TAB>kind".into()));
        }
        let phrase = crate::tagger::normalize_query(cols[0]);
        if phrase.is_empty() {
            return Err(bad("empty phrase".into()));
        }
        match cols[1] {
            "QUALIFIER" => {
                let kind = cols
                    .get(2)
                    .ok_or_else(|| bad("qualifier without type".into()))?
                    .parse()
                    .map_err(bad)?;
                lex.add_qualifier(&phrase, kind);
            }
            "ATTRIBUTE" => {
                lex.add_attribute(&phrase);
            }
            "EXCLUDE" => {
                lex.add_exclusion(&phrase);
            }
            other => return Err(bad(format!("unknown lexicon kind {other:?}"))),
        }
    }
    Ok(lex)
}

/// Reads `phrase<TAB>woeid_id` lines.
pub fn parse_gazetteer<R: BufRead>(reader: R) -> Result<Gazetteer, TaggerError> {
    let mut gaz = Gazetteer::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (phrase, woeid) = line.split_once('\t').ok_or_else(|| TaggerError::MalformedLine {
            line: idx + 1,
            reason: "expected phrase<TAB>woeid".into(),
        })?;
        gaz.insert(&crate::tagger::normalize_query(phrase), woeid.trim());
    }
    Ok(gaz)
}

pub fn write_lexicon<W: Write>(mut out: W, lexicon: &Lexicon) -> std::io::Result<()> {
    for (p, t) in &lexicon.qualifiers {
        writeln!(out, "{p}\tQUALIFIER\t{t}")?;
    }
    for p in &lexicon.attributes {
        writeln!(out, "{p}\tATTRIBUTE")?;
    }
    for p in &lexicon.exclusions {
        writeln!(out, "{p}\tEXCLUDE")?;
    }
    Ok(())
}

pub fn write_gazetteer<W: Write>(mut out: W, gazetteer: &Gazetteer) -> std::io::Result<()> {
    for (p, w) in gazetteer.iter() {
        writeln!(out, "{p}\t{w}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::tokenize_query;
    use proptest::prelude::*;

    fn lexicon() -> Lexicon {
        let mut lex = Lexicon::default();
        lex.add_qualifier("best", QualifierType::Superlative)
            .add_qualifier("near", QualifierType::Proximity)
            .add_qualifier("cheap", QualifierType::Price)
            .add_attribute("opening hours")
            .add_attribute("hours")
            .add_exclusion("near me");
        lex
    }

    #[test]
    fn qualifier_examples() {
        let lex = lexicon();
        let m = match_qualifiers(&tokenize_query("best hotels"), &lex);
        assert_eq!(m.qualifier.as_deref(), Some("best"));
        assert_eq!(m.qualifier_type, Some(QualifierType::Superlative));

        let m = match_qualifiers(&tokenize_query("coffee shops near me"), &lex);
        assert_eq!(m.qualifier, None);
        assert_eq!(m.qualifier_type, None);

        let m = match_qualifiers(&tokenize_query("macys opening hours"), &lex);
        assert_eq!(m.attributes, vec!["opening hours"]);

        let m = match_qualifiers(&tokenize_query("cheap best hotels"), &lex);
        assert_eq!(m.qualifier.as_deref(), Some("cheap"));
    }

    #[test]
    fn intent_fallback() {
        let lex = lexicon();
        let mut gaz = Gazetteer::default();
        gaz.insert("new york city", "woeid_2459115");
        gaz.insert("new york", "woeid_2459115");
        assert_eq!(
            detect_local_intent(&tokenize_query("coffee shops near me"), &gaz, &lex),
            LocalIntent::Implicit
        );
        assert_eq!(
            detect_local_intent(&tokenize_query("best hotels in new york city"), &gaz, &lex),
            LocalIntent::Explicit
        );
        assert_eq!(
            detect_local_intent(&tokenize_query("cheap flights"), &Gazetteer::default(), &lex),
            LocalIntent::None
        );
        assert_eq!(
            gaz.find(&tokenize_query("hotels in new york city")),
            Some(("new york city", "woeid_2459115"))
        );
    }

    #[test]
    fn file_formats() {
        let lex = parse_lexicon(
            "best\tQUALIFIER\tsuperlative\nopening hours\tATTRIBUTE\nnear me\tEXCLUDE\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(lex, {
            let mut l = Lexicon::default();
            l.add_qualifier("best", QualifierType::Superlative)
                .add_attribute("opening hours")
                .add_exclusion("near me");
            l
        });
        assert!(parse_lexicon("best\tQUALIFIER\n".as_bytes()).is_err());
        assert!(parse_lexicon("best\tNOPE\n".as_bytes()).is_err());
        let gaz = parse_gazetteer("Boston\twoeid_1\n".as_bytes()).unwrap();
        assert_eq!(gaz.get("boston"), Some("woeid_1"));
    }

    proptest! {
        #[test]
        fn never_reports_excluded_phrase(words in proptest::collection::vec(
            prop_oneof![Just("near"), Just("me"), Just("best"), Just("hotels"), Just("nearby")],
            0..8,
        )) {
            let mut lex = lexicon();
            lex.add_exclusion("nearby").add_qualifier("me", QualifierType::Rating);
            let tokens: Vec<String> = words.iter().map(|s| s.to_string()).collect();
            let m = match_qualifiers(&tokens, &lex);
            if let Some(q) = &m.qualifier {
                prop_assert!(!lex.exclusions.contains(q));
            }
            prop_assert_eq!(m.qualifier.is_some(), m.qualifier_type.is_some());
        }
    }
}
