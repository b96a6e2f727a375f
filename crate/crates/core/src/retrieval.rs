//! Query vector composition, exact cosine k-nearest-neighbour search over ad
//! vectors, cold-start fragment fallback and neighbour keyword reports.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::embed::{EmbeddingModel, TokenKind};
use crate::tagger::{normalize_query, FragmentForm, FragmentToken};

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("zero vector")]
    ZeroVector,
    #[error("ad index is empty")]
    EmptyIndex,
    #[error("token {token:?} not found for task {task}")]
    TokenNotFound { token: String, task: RetrievalTask },
    #[error("no fragment token is in the vocabulary")]
    NoMatchableFragment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RetrievalTask {
    Q2ad,
    QPlusL2ad,
    FragQsl,
    FragSl,
    FragSPlusL,
    FragQtsl,
}

impl RetrievalTask {
    pub const ALL: [RetrievalTask; 6] = [
        RetrievalTask::Q2ad,
        RetrievalTask::QPlusL2ad,
        RetrievalTask::FragQsl,
        RetrievalTask::FragSl,
        RetrievalTask::FragSPlusL,
        RetrievalTask::FragQtsl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalTask::Q2ad => "q2ad",
            RetrievalTask::QPlusL2ad => "q+l",
            RetrievalTask::FragQsl => "frag_qsl",
            RetrievalTask::FragSl => "frag_sl",
            RetrievalTask::FragSPlusL => "frag_s+l",
            RetrievalTask::FragQtsl => "frag_qtsl",
        }
    }

    /// Fragment form used by the fragment tasks.
    pub fn fragment_form(self) -> Option<FragmentForm> {
        match self {
            RetrievalTask::Q2ad | RetrievalTask::QPlusL2ad => None,
            RetrievalTask::FragQsl => Some(FragmentForm::QualifierSubjectLocation),
            RetrievalTask::FragSl => Some(FragmentForm::SubjectLocation),
            RetrievalTask::FragSPlusL => Some(FragmentForm::SubjectPlusLocation),
            RetrievalTask::FragQtsl => Some(FragmentForm::QualifierTypeSubjectLocation),
        }
    }
}

impl fmt::Display for RetrievalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "q2ad" | "q" => RetrievalTask::Q2ad,
            "q+l" | "q_plus_l_2ad" | "ql2ad" => RetrievalTask::QPlusL2ad,
            "frag_qsl" | "qsl" => RetrievalTask::FragQsl,
            "frag_sl" | "sl" => RetrievalTask::FragSl,
            "frag_s+l" | "frag_s_plus_l" | "s+l" => RetrievalTask::FragSPlusL,
            "frag_qtsl" | "qtsl" => RetrievalTask::FragQtsl,
            other => return Err(format!("unknown task {other:?}")),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, RetrievalError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn lookup<'m>(
    model: &'m EmbeddingModel,
    kind: TokenKind,
    token: &str,
    task: RetrievalTask,
) -> Result<&'m [f64], RetrievalError> {
    model.vector(kind, token).ok_or_else(|| RetrievalError::TokenNotFound {
        token: token.to_owned(),
        task,
    })
}

/// Vector of a fragment token: the fragment's own vector, or the sum of
/// subject and location vectors for the composition form.
fn fragment_vector(model: &EmbeddingModel, f: &FragmentToken, task: RetrievalTask) -> Result<Vec<f64>, RetrievalError> {
    match f {
        FragmentToken::Fragment { token, .. } => Ok(lookup(model, TokenKind::Fragment, token, task)?.to_vec()),
        FragmentToken::Composition { subject, location } => {
            let mut v = lookup(model, TokenKind::Subject, subject, task)?.to_vec();
            if let Some(l) = location {
                add_into(&mut v, lookup(model, TokenKind::Loc, l, task)?);
            }
            Ok(v)
        }
    }
}

/// Builds the retrieval vector of a task.
pub fn compose_query_vector(
    model: &EmbeddingModel,
    query: &str,
    location: Option<&str>,
    extraction: Option<&[FragmentToken]>,
    task: RetrievalTask,
) -> Result<Vec<f64>, RetrievalError> {
    let missing = |token: &str| RetrievalError::TokenNotFound {
        token: token.to_owned(),
        task,
    };
    match task {
        RetrievalTask::Q2ad => Ok(lookup(model, TokenKind::Query, &normalize_query(query), task)?.to_vec()),
        RetrievalTask::QPlusL2ad => {
            let mut v = lookup(model, TokenKind::Query, &normalize_query(query), task)?.to_vec();
            let loc = location.ok_or_else(|| missing("<location>"))?;
            add_into(&mut v, lookup(model, TokenKind::Loc, loc, task)?);
            Ok(v)
        }
        _ => {
            let form = task.fragment_form().expect("fragment task");
            let f = extraction
                .unwrap_or_default()
                .iter()
                .find(|f| f.form() == form)
                .ok_or_else(|| missing(&format!("<{}>", task.as_str())))?;
            fragment_vector(model, f, task)
        }
    }
}

/// First fragment token, in priority order, whose parts are all in the
/// vocabulary, with its vector.
pub fn cold_start_lookup(
    model: &EmbeddingModel,
    fragments: &[FragmentToken],
) -> Result<(FragmentForm, Vec<f64>), RetrievalError> {
    let mut ordered: Vec<&FragmentToken> = fragments.iter().collect();
    ordered.sort_by_key(|f| f.form());
    ordered
        .into_iter()
        .find_map(|f| {
            fragment_vector(model, f, RetrievalTask::FragSPlusL)
                .ok()
                .map(|v| (f.form(), v))
        })
        .ok_or(RetrievalError::NoMatchableFragment)
}

/// Unit-normalized ad input vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdIndex {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    /// Ads left out because their vector is zero.
    pub skipped_zero: usize,
}

impl AdIndex {
    pub fn build(model: &EmbeddingModel) -> Self {
        let ads: Vec<(String, Vec<f64>)> = model
            .vocab
            .ids_of_kind(TokenKind::Ad)
            .map(|id| (model.vocab.token(id).to_owned(), model.input_vector(id).to_vec()))
            .collect();
        Self::from_vectors(model.dim(), ads)
    }

    pub fn from_vectors(dim: usize, ads: Vec<(String, Vec<f64>)>) -> Self {
        let mut index = AdIndex {
            dim,
            tokens: Vec::new(),
            vectors: Vec::new(),
            skipped_zero: 0,
        };
        for (token, v) in ads {
            assert_eq!(v.len(), dim, "ad vector dimension");
            let n = norm(&v);
            if n == 0.0 || !n.is_finite() {
                index.skipped_zero += 1;
                continue;
            }
            index.tokens.push(token);
            index.vectors.extend(v.iter().map(|x| x / n));
        }
        if index.skipped_zero > 0 {
            log::warn!("{} zero-norm ads left out of the index", index.skipped_zero);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Writes `ad_token<TAB>v1 ... vd` lines of the normalized vectors.
    pub fn save<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ADINDEX {} {}", self.dim, self.len())?;
        for (i, t) in self.tokens.iter().enumerate() {
            let vals: Vec<String> = self.vector(i).iter().map(|x| format!("{x:.8e}")).collect();
            writeln!(w, "{t}\t{}", vals.join(" "))?;
        }
        w.flush()
    }

    pub fn load<R: std::io::BufRead>(reader: R) -> Result<Self, String> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or("empty index file")?.map_err(|e| e.to_string())?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 3 || parts[0] != "ADINDEX" {
            return Err("bad index header".into());
        }
        let dim: usize = parts[1].parse().map_err(|_| "bad dimension")?;
        let mut ads = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let (t, vals) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: missing tab", i + 2))?;
            let v: Vec<f64> = vals
                .split(' ')
                .map(|x| x.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("line {}: bad float", i + 2))?;
            if v.len() != dim {
                return Err(format!("line {}: expected {dim} values", i + 2));
            }
            ads.push((t.to_owned(), v));
        }
        Ok(Self::from_vectors(dim, ads))
    }
}

fn rank_order(a: &(usize, f64), b: &(usize, f64), tokens: &[String]) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| tokens[a.0].cmp(&tokens[b.0]))
}

/// Exact top-K ads by descending cosine; ties go to the smaller token.
pub fn knn(index: &AdIndex, vector: &[f64], k: usize) -> Result<Vec<(String, f64)>, RetrievalError> {
    assert!(k >= 1, "k must be >= 1");
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let n = norm(vector);
    if n == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    let unit: Vec<f64> = vector.iter().map(|x| x / n).collect();
    let mut scored: Vec<(usize, f64)> = (0..index.len())
        .map(|i| (i, dot(index.vector(i), &unit).clamp(-1.0, 1.0)))
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| rank_order(a, b, &index.tokens));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| rank_order(a, b, &index.tokens));
    Ok(scored
        .into_iter()
        .map(|(i, c)| (index.tokens[i].clone(), c))
        .collect())
}

/// Anchor of a neighbour report: a vocabulary token or a raw vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Anchor<'a> {
    Token(TokenKind, &'a str),
    Vector(&'a [f64]),
}

/// Word frequencies over the `n` query tokens nearest to the anchor, most
/// frequent first (ties by word).
pub fn neighbor_keyword_report(
    model: &EmbeddingModel,
    anchor: Anchor<'_>,
    n: usize,
    top_words: usize,
) -> Result<Vec<(String, usize)>, RetrievalError> {
    let (vector, exclude) = match anchor {
        Anchor::Token(kind, token) => {
            let id = model.id(kind, token).ok_or_else(|| RetrievalError::TokenNotFound {
                token: token.to_owned(),
                task: RetrievalTask::Q2ad,
            })?;
            (model.input_vector(id).to_vec(), Some(id))
        }
        Anchor::Vector(v) => (v.to_vec(), None),
    };
    let queries: Vec<(String, Vec<f64>)> = model
        .vocab
        .ids_of_kind(TokenKind::Query)
        .filter(|id| Some(*id) != exclude)
        .map(|id| (model.vocab.token(id).to_owned(), model.input_vector(id).to_vec()))
        .collect();
    let index = AdIndex::from_vectors(model.dim(), queries);
    if index.is_empty() || n == 0 {
        return Ok(Vec::new());
    }
    let nearest = knn(&index, &vector, n)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (q, _) in &nearest {
        for w in q.split_whitespace() {
            *counts.entry(w.to_owned()).or_default() += 1;
        }
    }
    let mut words: Vec<(String, usize)> = counts.into_iter().collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    words.truncate(top_words);
    Ok(words)
}
