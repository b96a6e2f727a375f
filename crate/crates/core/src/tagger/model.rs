//! Linear-chain sequence labeler: fixed feature template, Viterbi decoding
//! under BIO constraints and an averaged structured perceptron learner.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::tags::{EntityType, Tag, ALL_TAGS, NUM_TAGS};
use super::TaggerError;

/// Row index of the sequence-start pseudo tag in the transition matrix.
const START: usize = NUM_TAGS;

pub type Scores = [f64; NUM_TAGS];

/// Feature and transition weights. Unseen features score zero.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct TaggerModel {
    features: HashMap<String, Scores>,
    /// `transitions[prev][next]`; row `NUM_TAGS` is the sequence start.
    transitions: Vec<Scores>,
}

/// One annotated query of the tagging corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedQuery {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

fn shape(token: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in token.chars() {
        let s = if c.is_alphabetic() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if last != Some(s) {
            out.push(s);
            last = Some(s);
        }
    }
    out
}

fn prefix(token: &str, n: usize) -> &str {
    match token.char_indices().nth(n) {
        Some((i, _)) => &token[..i],
        None => token,
    }
}

fn suffix(token: &str, n: usize) -> &str {
    let count = token.chars().count();
    if count <= n {
        return token;
    }
    let (i, _) = token.char_indices().nth(count - n).unwrap();
    &token[i..]
}

/// Feature strings of token `i`: the word, its shape, both neighbours, a
/// digit flag and 3-character prefix and suffix.
pub fn token_features(tokens: &[String], i: usize) -> Vec<String> {
    let w = tokens[i].to_lowercase();
    let prev = if i == 0 { "<s>" } else { tokens[i - 1].as_str() };
    let next = tokens.get(i + 1).map_or("</s>", String::as_str);
    let digit = !w.is_empty() && w.chars().all(|c| c.is_ascii_digit());
    vec![
        format!("w={w}"),
        format!("shape={}", shape(&w)),
        format!("prev={}", prev.to_lowercase()),
        format!("next={}", next.to_lowercase()),
        format!("digit={}", digit as u8),
        format!("pre3={}", prefix(&w, 3)),
        format!("suf3={}", suffix(&w, 3)),
    ]
}

/// Highest-scoring BIO-valid path. Among equal scores the lexicographically
/// smallest sequence in tag order wins.
pub fn best_path(emissions: &[Scores], transitions: &[Scores]) -> Vec<Tag> {
    let n = emissions.len();
    if n == 0 {
        return Vec::new();
    }
    // suffix[i][t]: best score of positions i.. given tag t at i
    let mut suffix = vec![[0.0f64; NUM_TAGS]; n];
    suffix[n - 1] = emissions[n - 1];
    for i in (0..n - 1).rev() {
        for t in ALL_TAGS {
            let (_, best) = best_next(Some(t), &transitions[t.index()], &suffix[i + 1]);
            suffix[i][t.index()] = emissions[i][t.index()] + best;
        }
    }
    let mut path = Vec::with_capacity(n);
    let (first, _) = best_next(None, &transitions[START], &suffix[0]);
    path.push(first);
    for i in 1..n {
        let prev = path[i - 1];
        let (t, _) = best_next(Some(prev), &transitions[prev.index()], &suffix[i]);
        path.push(t);
    }
    path
}

fn best_next(prev: Option<Tag>, trans_row: &Scores, suffix: &Scores) -> (Tag, f64) {
    let mut best = (Tag::O, f64::NEG_INFINITY);
    for t in ALL_TAGS {
        if !t.can_follow(prev) {
            continue;
        }
        let s = trans_row[t.index()] + suffix[t.index()];
        if s > best.1 {
            best = (t, s);
        }
    }
    best
}

impl TaggerModel {
    pub fn new() -> Self {
        TaggerModel {
            features: HashMap::new(),
            transitions: vec![[0.0; NUM_TAGS]; NUM_TAGS + 1],
        }
    }

    /// Builds a model from explicit weights; `transitions` has one row per
    /// tag plus a final start row.
    pub fn from_weights(features: HashMap<String, Scores>, transitions: Vec<Scores>) -> Self {
        assert_eq!(transitions.len(), NUM_TAGS + 1, "transition rows");
        TaggerModel {
            features,
            transitions,
        }
    }

    pub fn feature_weight(&self, feature: &str, tag: Tag) -> f64 {
        self.features.get(feature).map_or(0.0, |w| w[tag.index()])
    }

    pub fn transition_weight(&self, prev: Option<Tag>, next: Tag) -> f64 {
        let row = prev.map_or(START, Tag::index);
        self.transitions[row][next.index()]
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    fn emissions(&self, tokens: &[String]) -> Vec<Scores> {
        (0..tokens.len())
            .map(|i| {
                let mut scores = [0.0; NUM_TAGS];
                for f in token_features(tokens, i) {
                    if let Some(w) = self.features.get(&f) {
                        for (s, x) in scores.iter_mut().zip(w) {
                            *s += x;
                        }
                    }
                }
                scores
            })
            .collect()
    }

    /// Total path score of `tags` for `tokens`.
    pub fn path_score(&self, tokens: &[String], tags: &[Tag]) -> f64 {
        let em = self.emissions(tokens);
        let mut prev = None;
        let mut total = 0.0;
        for (i, &t) in tags.iter().enumerate() {
            total += self.transition_weight(prev, t) + em[i][t.index()];
            prev = Some(t);
        }
        total
    }

    pub fn decode(&self, tokens: &[String]) -> Result<Vec<Tag>, TaggerError> {
        if tokens.is_empty() {
            return Err(TaggerError::EmptyInput);
        }
        Ok(best_path(&self.emissions(tokens), &self.transitions))
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), TaggerError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self, TaggerError> {
        let model: TaggerModel = serde_json::from_reader(r)?;
        if model.transitions.len() != NUM_TAGS + 1 {
            return Err(TaggerError::MalformedLine {
                line: 0,
                reason: "transition matrix has wrong shape".into(),
            });
        }
        Ok(model)
    }
}

pub fn viterbi_decode(tokens: &[String], model: &TaggerModel) -> Result<Vec<Tag>, TaggerError> {
    model.decode(tokens)
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mis-decoded training queries per epoch, under the running weights.
    pub epoch_mistakes: Vec<usize>,
    /// Token accuracy of the averaged weights after each epoch.
    pub epoch_accuracy: Vec<f64>,
    pub training_accuracy: f64,
}

/// Running and accumulated weights for averaging: average = w - acc / c.
struct Averaged {
    weights: Vec<Scores>,
    acc: Vec<Scores>,
    trans: Vec<Scores>,
    trans_acc: Vec<Scores>,
    step: f64,
}

impl Averaged {
    fn bump_feature(&mut self, f: usize, tag: Tag, delta: f64) {
        self.weights[f][tag.index()] += delta;
        self.acc[f][tag.index()] += self.step * delta;
    }

    fn bump_transition(&mut self, prev: Option<Tag>, next: Tag, delta: f64) {
        let row = prev.map_or(START, Tag::index);
        self.trans[row][next.index()] += delta;
        self.trans_acc[row][next.index()] += self.step * delta;
    }

    fn averaged(&self, names: &[String]) -> TaggerModel {
        let avg = |w: &Scores, a: &Scores| {
            let mut out = [0.0; NUM_TAGS];
            for k in 0..NUM_TAGS {
                out[k] = w[k] - a[k] / self.step;
            }
            out
        };
        let features = names
            .iter()
            .zip(self.weights.iter().zip(&self.acc))
            .map(|(n, (w, a))| (n.clone(), avg(w, a)))
            .collect();
        let transitions = self
            .trans
            .iter()
            .zip(&self.trans_acc)
            .map(|(w, a)| avg(w, a))
            .collect();
        TaggerModel {
            features,
            transitions,
        }
    }
}

/// Trains an averaged structured perceptron. Examples are visited in corpus
/// order, so training is deterministic.
pub fn train_tagger(
    corpus: &[AnnotatedQuery],
    epochs: usize,
) -> Result<(TaggerModel, TrainReport), TaggerError> {
    assert!(epochs >= 1, "epochs must be >= 1");
    for (i, q) in corpus.iter().enumerate() {
        if q.tokens.len() != q.tags.len() || !Tag::is_valid_sequence(&q.tags) {
            return Err(TaggerError::InvalidTagSequence(i + 1));
        }
    }

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let feats: Vec<Vec<Vec<usize>>> = corpus
        .iter()
        .map(|q| {
            (0..q.tokens.len())
                .map(|i| {
                    token_features(&q.tokens, i)
                        .into_iter()
                        .map(|f| {
                            *ids.entry(f.clone()).or_insert_with(|| {
                                names.push(f);
                                names.len() - 1
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut state = Averaged {
        weights: vec![[0.0; NUM_TAGS]; names.len()],
        acc: vec![[0.0; NUM_TAGS]; names.len()],
        trans: vec![[0.0; NUM_TAGS]; NUM_TAGS + 1],
        trans_acc: vec![[0.0; NUM_TAGS]; NUM_TAGS + 1],
        step: 1.0,
    };
    let mut report = TrainReport::default();

    for _ in 0..epochs {
        let mut mistakes = 0;
        for (q, qf) in corpus.iter().zip(&feats) {
            if q.tokens.is_empty() {
                continue;
            }
            let emissions: Vec<Scores> = qf
                .iter()
                .map(|fs| {
                    let mut s = [0.0; NUM_TAGS];
                    for &f in fs {
                        for k in 0..NUM_TAGS {
                            s[k] += state.weights[f][k];
                        }
                    }
                    s
                })
                .collect();
            let predicted = best_path(&emissions, &state.trans);
            if predicted != q.tags {
                mistakes += 1;
                let mut prev_gold = None;
                let mut prev_pred = None;
                for (i, (&g, &p)) in q.tags.iter().zip(&predicted).enumerate() {
                    if g != p {
                        for &f in &qf[i] {
                            state.bump_feature(f, g, 1.0);
                            state.bump_feature(f, p, -1.0);
                        }
                    }
                    if (prev_gold, g) != (prev_pred, p) {
                        state.bump_transition(prev_gold, g, 1.0);
                        state.bump_transition(prev_pred, p, -1.0);
                    }
                    prev_gold = Some(g);
                    prev_pred = Some(p);
                }
            }
            state.step += 1.0;
        }
        report.epoch_mistakes.push(mistakes);
        let model = state.averaged(&names);
        report.epoch_accuracy.push(token_accuracy(&model, corpus));
    }

    let model = state.averaged(&names);
    report.training_accuracy = *report.epoch_accuracy.last().unwrap_or(&0.0);
    Ok((model, report))
}

/// Fraction of tokens whose decoded tag matches the gold tag.
pub fn token_accuracy(model: &TaggerModel, corpus: &[AnnotatedQuery]) -> f64 {
    let (mut right, mut total) = (0usize, 0usize);
    for q in corpus.iter().filter(|q| !q.tokens.is_empty()) {
        let pred = best_path(&model.emissions(&q.tokens), &model.transitions);
        right += pred.iter().zip(&q.tags).filter(|(a, b)| a == b).count();
        total += q.tags.len();
    }
    if total == 0 {
        1.0
    } else {
        right as f64 / total as f64
    }
}

/// Entity spans `(start, end_exclusive, type)` of a BIO sequence.
pub fn entity_spans(tags: &[Tag]) -> Vec<(usize, usize, EntityType)> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    for (i, t) in tags.iter().enumerate() {
        if t.is_inside() && open.map(|(_, e)| Some(e)) == Some(t.entity()) {
            continue;
        }
        if let Some((s, e)) = open.take() {
            spans.push((s, i, e));
        }
        if let Some(e) = t.entity() {
            open = Some((i, e));
        }
    }
    if let Some((s, e)) = open {
        spans.push((s, tags.len(), e));
    }
    spans
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntityScore {
    pub entity: EntityType,
    pub precision: f64,
    pub recall: f64,
    pub gold: usize,
    pub predicted: usize,
}

/// Span-level precision and recall per entity type.
#[derive(Clone, Debug, PartialEq)]
pub struct TagReport {
    pub rows: Vec<EntityScore>,
    pub token_accuracy: f64,
}

impl TagReport {
    pub fn evaluate(model: &TaggerModel, corpus: &[AnnotatedQuery]) -> Self {
        let mut tp: HashMap<EntityType, usize> = HashMap::new();
        let mut gold_n: HashMap<EntityType, usize> = HashMap::new();
        let mut pred_n: HashMap<EntityType, usize> = HashMap::new();
        for q in corpus.iter().filter(|q| !q.tokens.is_empty()) {
            let pred = best_path(&model.emissions(&q.tokens), &model.transitions);
            let gold: BTreeSet<_> = entity_spans(&q.tags).into_iter().collect();
            for span in entity_spans(&pred) {
                *pred_n.entry(span.2).or_default() += 1;
                if gold.contains(&span) {
                    *tp.entry(span.2).or_default() += 1;
                }
            }
            for span in &gold {
                *gold_n.entry(span.2).or_default() += 1;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let rows = EntityType::ALL
            .into_iter()
            .map(|e| {
                let t = tp.get(&e).copied().unwrap_or(0);
                let g = gold_n.get(&e).copied().unwrap_or(0);
                let p = pred_n.get(&e).copied().unwrap_or(0);
                EntityScore {
                    entity: e,
                    precision: ratio(t, p),
                    recall: ratio(t, g),
                    gold: g,
                    predicted: p,
                }
            })
            .collect();
        TagReport {
            rows,
            token_accuracy: token_accuracy(model, corpus),
        }
    }

    /// Renders the report as a `Tag | Precision | Recall` table.
    pub fn to_table(&self) -> String {
        let mut out = String::from("Tag\tPrecision\tRecall\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.3}\t{:.3}\n",
                r.entity.label(),
                r.precision,
                r.recall
            ));
        }
        out
    }
}

/// Parses `token<TAB>tag` lines with blank lines between queries.
pub fn parse_conll<R: BufRead>(reader: R) -> Result<Vec<AnnotatedQuery>, TaggerError> {
    let mut out = Vec::new();
    let mut cur = AnnotatedQuery {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    let mut prev: Option<Tag> = None;
    let flush = |cur: &mut AnnotatedQuery, out: &mut Vec<AnnotatedQuery>| {
        if !cur.tokens.is_empty() {
            out.push(std::mem::replace(
                cur,
                AnnotatedQuery {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                },
            ));
        }
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut cur, &mut out);
            prev = None;
            continue;
        }
        let (token, tag) = line.split_once('\t').ok_or_else(|| TaggerError::MalformedLine {
            line: idx + 1,
            reason: "expected token<TAB>tag".into(),
        })?;
        let tag: Tag = tag.trim().parse().map_err(|reason| TaggerError::MalformedLine {
            line: idx + 1,
            reason,
        })?;
        if !tag.can_follow(prev) {
            return Err(TaggerError::InvalidTagSequence(idx + 1));
        }
        cur.tokens.push(token.to_owned());
        cur.tags.push(tag);
        prev = Some(tag);
    }
    flush(&mut cur, &mut out);
    Ok(out)
}

pub fn write_conll<W: Write>(mut w: W, corpus: &[AnnotatedQuery]) -> std::io::Result<()> {
    for q in corpus {
        for (tok, tag) in q.tokens.iter().zip(&q.tags) {
            writeln!(w, "{tok}\t{tag}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
