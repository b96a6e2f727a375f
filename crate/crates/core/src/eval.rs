//! precision@K over clicked ads, NDCG over graded judgments and cosine
//! statistics per editorial grade.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

use crate::embed::{AnnotatedSession, EmbeddingModel, TokenKind};
use crate::retrieval::{cold_start_lookup, compose_query_vector, cosine, knn, AdIndex, RetrievalError, RetrievalTask};
use crate::session::{EventKind, LocalIntent};
use crate::tagger::normalize_query;

pub const DEFAULT_KS: [usize; 5] = [1, 2, 3, 5, 10];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("malformed judgment at line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate judgment for ({query:?}, {ad:?}) at line {line}")]
    DuplicateJudgment { line: usize, query: String, ad: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Editorial grade, from Irrelevant (0) to Perfect (5).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Grade {
    Irrelevant = 0,
    Barely = 1,
    Somewhat = 2,
    Relevant = 3,
    Highly = 4,
    Perfect = 5,
}

impl Grade {
    pub const ALL: [Grade; 6] = [
        Grade::Irrelevant,
        Grade::Barely,
        Grade::Somewhat,
        Grade::Relevant,
        Grade::Highly,
        Grade::Perfect,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Grade::Irrelevant => "Irrelevant",
            Grade::Barely => "Barely",
            Grade::Somewhat => "Somewhat",
            Grade::Relevant => "Relevant",
            Grade::Highly => "Highly",
            Grade::Perfect => "Perfect",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Grade::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s) || s == g.value().to_string())
            .ok_or_else(|| format!("unknown grade {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Judgment {
    pub query: String,
    pub ad: String,
    pub grade: Grade,
}

/// Reads `query<TAB>ad<TAB>grade_name` lines; one grade per pair.
pub fn parse_judgments<R: BufRead>(reader: R) -> Result<Vec<Judgment>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| EvalError::MalformedLine { line: i + 1, reason };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", cols.len())));
        }
        let grade: Grade = cols[2].parse().map_err(bad)?;
        let query = normalize_query(cols[0]);
        let ad = cols[1].to_owned();
        if !seen.insert((query.clone(), ad.clone())) {
            return Err(EvalError::DuplicateJudgment { line: i + 1, query, ad });
        }
        out.push(Judgment { query, ad, grade });
    }
    Ok(out)
}

pub fn write_judgments<W: std::io::Write>(mut w: W, judgments: &[Judgment]) -> std::io::Result<()> {
    for j in judgments {
        writeln!(w, "{}\t{}\t{}", j.query, j.ad, j.grade)?;
    }
    Ok(())
}

/// `|top-min(K, n) ∩ clicked| / K`.
pub fn precision_at_k<S: AsRef<str>>(retrieved: &[S], clicked: &BTreeSet<String>, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    let hits = retrieved
        .iter()
        .take(k)
        .filter(|a| clicked.contains(a.as_ref()))
        .count();
    hits as f64 / k as f64
}

pub fn default_gain(grade: f64) -> f64 {
    2f64.powf(grade) - 1.0
}

fn dcg(grades: &[f64], k: usize, gain: &dyn Fn(f64) -> f64) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@K of grades in ranked order with a custom gain; 1 when the ideal
/// DCG is zero.
pub fn ndcg_with_gain(ranked: &[f64], k: usize, gain: &dyn Fn(f64) -> f64) -> f64 {
    let mut ideal = ranked.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal, k, gain);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg(ranked, k, gain) / idcg
}

/// NDCG@K with gain `2^g - 1` and discount `1 / log2(rank + 1)`.
pub fn ndcg(ranked: &[f64], k: usize) -> f64 {
    ndcg_with_gain(ranked, k, &default_gain)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradeStat {
    pub grade: Grade,
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradeScores {
    /// One row per grade present, in ascending grade order.
    pub rows: Vec<GradeStat>,
    /// Judgments whose query or ad is missing from the vocabulary.
    pub skipped: usize,
}

impl GradeScores {
    pub fn get(&self, grade: Grade) -> Option<&GradeStat> {
        self.rows.iter().find(|r| r.grade == grade)
    }

    /// True when mean cosine strictly increases with grade over the rows.
    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].mean < w[1].mean)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Mean and median `cosine(v_query, v_ad)` per grade.
pub fn score_by_grade(model: &EmbeddingModel, judgments: &[Judgment]) -> GradeScores {
    let mut by_grade: BTreeMap<Grade, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for j in judgments {
        let q = model.vector(TokenKind::Query, &j.query);
        let a = model.vector(TokenKind::Ad, &j.ad);
        match (q, a) {
            (Some(q), Some(a)) => match cosine(q, a) {
                Ok(c) => by_grade.entry(j.grade).or_default().push(c),
                Err(_) => skipped += 1,
            },
            _ => skipped += 1,
        }
    }
    let rows = by_grade
        .into_iter()
        .map(|(grade, mut v)| GradeStat {
            grade,
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len(),
            median: median(&mut v),
        })
        .collect();
    GradeScores { rows, skipped }
}

/// Mean NDCG@K of the model's cosine ordering of each query's judged ads.
/// Returns `(mean, queries scored)`.
pub fn judged_ndcg(model: &EmbeddingModel, judgments: &[Judgment], k: usize) -> (f64, usize) {
    let mut per_query: BTreeMap<&str, Vec<(&str, Grade)>> = BTreeMap::new();
    for j in judgments {
        per_query.entry(&j.query).or_default().push((&j.ad, j.grade));
    }
    let mut total = 0.0;
    let mut n = 0;
    for (q, ads) in per_query {
        let Some(qv) = model.vector(TokenKind::Query, q) else {
            continue;
        };
        let mut scored: Vec<(f64, &str, Grade)> = ads
            .iter()
            .filter_map(|&(a, g)| {
                let av = model.vector(TokenKind::Ad, a)?;
                cosine(qv, av).ok().map(|c| (c, a, g))
            })
            .collect();
        if scored.is_empty() {
            continue;
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
        let grades: Vec<f64> = scored.iter().map(|s| s.2.value() as f64).collect();
        total += ndcg(&grades, k);
        n += 1;
    }
    (if n == 0 { 0.0 } else { total / n as f64 }, n)
}

/// precision@K for one group of queries.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionRow {
    pub precision: Vec<f64>,
    pub queries: usize,
    /// Queries served through fragment fallback.
    pub fallback: usize,
    /// Queries with no usable vector, scored zero.
    pub unresolved: usize,
}

impl PrecisionRow {
    fn new(ks: usize) -> Self {
        PrecisionRow {
            precision: vec![0.0; ks],
            queries: 0,
            fallback: 0,
            unresolved: 0,
        }
    }

    fn finish(&mut self) {
        if self.queries > 0 {
            for p in &mut self.precision {
                *p /= self.queries as f64;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub task: RetrievalTask,
    pub ks: Vec<usize>,
    pub implicit: PrecisionRow,
    pub explicit: PrecisionRow,
    pub all: PrecisionRow,
    /// Mean judged NDCG and the number of judged queries, when available.
    pub ndcg: Option<(f64, usize)>,
    pub grades: Option<GradeScores>,
}

impl EvalReport {
    pub fn precision(&self, intent: LocalIntent, k: usize) -> Option<f64> {
        let row = match intent {
            LocalIntent::Implicit => &self.implicit,
            LocalIntent::Explicit => &self.explicit,
            LocalIntent::None => &self.all,
        };
        self.ks.iter().position(|&x| x == k).map(|i| row.precision[i])
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("task\tintent\tqueries\tfallback\tunresolved");
        for k in &self.ks {
            write!(s, "\tp@{k}").unwrap();
        }
        s.push('\n');
        for (name, row) in [("implicit", &self.implicit), ("explicit", &self.explicit), ("all", &self.all)] {
            write!(s, "{}\t{name}\t{}\t{}\t{}", self.task, row.queries, row.fallback, row.unresolved).unwrap();
            for p in &row.precision {
                write!(s, "\t{p:.4}").unwrap();
            }
            s.push('\n');
        }
        if let Some((m, n)) = self.ndcg {
            writeln!(s, "{}\tndcg\t{n}\t-\t-\t{m:.4}", self.task).unwrap();
        }
        if let Some(g) = &self.grades {
            for r in &g.rows {
                writeln!(s, "{}\tgrade:{}\t{}\t-\t-\t{:.4}\t{:.4}", self.task, r.grade, r.count, r.mean, r.median).unwrap();
            }
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<10} {:<9}", "task", "intent");
        for k in &self.ks {
            write!(s, " {:>7}", format!("P@{k}")).unwrap();
        }
        s.push_str("  queries\n");
        for (name, row) in [("implicit", &self.implicit), ("explicit", &self.explicit)] {
            write!(s, "{:<10} {:<9}", self.task.as_str(), name).unwrap();
            for p in &row.precision {
                write!(s, " {p:>7.3}").unwrap();
            }
            writeln!(s, "  {}", row.queries).unwrap();
        }
        if let Some((m, n)) = self.ndcg {
            writeln!(s, "NDCG@{} over {n} judged queries: {m:.3}", self.ks.iter().max().unwrap_or(&10)).unwrap();
        }
        if let Some(g) = &self.grades {
            s.push_str("grade       mean   median  count\n");
            for r in &g.rows {
                writeln!(s, "{:<10} {:>6.3} {:>7.3} {:>6}", r.grade.name(), r.mean, r.median, r.count).unwrap();
            }
            if g.skipped > 0 {
                writeln!(s, "skipped judgments: {}", g.skipped).unwrap();
            }
        }
        s
    }
}

/// One evaluable query: a local query with the ads clicked in its block.
struct EvalQuery<'a> {
    session: &'a AnnotatedSession,
    event: usize,
    clicked: BTreeSet<String>,
}

fn eval_queries(sessions: &[AnnotatedSession]) -> Vec<EvalQuery<'_>> {
    let mut out = Vec::new();
    for s in sessions {
        let mut current: Option<EvalQuery> = None;
        for (i, e) in s.events.iter().enumerate() {
            match e.event_kind {
                EventKind::Query => {
                    out.extend(current.take().filter(|q| !q.clicked.is_empty()));
                    if e.intent.is_local() {
                        current = Some(EvalQuery {
                            session: s,
                            event: i,
                            clicked: BTreeSet::new(),
                        });
                    }
                }
                EventKind::AdClick => {
                    if let Some(q) = current.as_mut() {
                        q.clicked.insert(e.token.clone());
                    }
                }
                _ => {}
            }
        }
        out.extend(current.take().filter(|q| !q.clicked.is_empty()));
    }
    out
}

/// Retrieval vector for a test query under a task, falling back to
/// fragment tokens. The flag is true when the fallback was used.
pub fn task_vector(
    model: &EmbeddingModel,
    session: &AnnotatedSession,
    event: usize,
    task: RetrievalTask,
) -> Result<(Vec<f64>, bool), RetrievalError> {
    let e = &session.events[event];
    let loc = e.location.as_ref().map(|l| l.id.as_str());
    match compose_query_vector(model, &e.token, loc, Some(&e.fragments), task) {
        Ok(v) => Ok((v, false)),
        Err(RetrievalError::TokenNotFound { .. }) => cold_start_lookup(model, &e.fragments).map(|(_, v)| (v, true)),
        Err(other) => Err(other),
    }
}

/// precision@K of a task over every local query with at least one ad click
/// in the test sessions, split by intent.
pub fn evaluate_task(
    model: &EmbeddingModel,
    index: &AdIndex,
    sessions: &[AnnotatedSession],
    task: RetrievalTask,
    ks: &[usize],
) -> EvalReport {
    let max_k = ks.iter().copied().max().unwrap_or(1);
    let mut implicit = PrecisionRow::new(ks.len());
    let mut explicit = PrecisionRow::new(ks.len());
    let mut all = PrecisionRow::new(ks.len());
    for q in eval_queries(sessions) {
        let intent = q.session.events[q.event].intent;
        let row = if intent == LocalIntent::Implicit {
            &mut implicit
        } else {
            &mut explicit
        };
        let mut scores = vec![0.0; ks.len()];
        let mut fallback = false;
        let mut unresolved = false;
        match task_vector(model, q.session, q.event, task) {
            Ok((v, fb)) => {
                fallback = fb;
                match knn(index, &v, max_k) {
                    Ok(hits) => {
                        let tokens: Vec<&str> = hits.iter().map(|h| h.0.as_str()).collect();
                        for (s, &k) in scores.iter_mut().zip(ks) {
                            *s = precision_at_k(&tokens, &q.clicked, k);
                        }
                    }
                    Err(_) => unresolved = true,
                }
            }
            Err(_) => unresolved = true,
        }
        for r in [&mut *row, &mut all] {
            r.queries += 1;
            r.fallback += fallback as usize;
            r.unresolved += unresolved as usize;
            for (p, s) in r.precision.iter_mut().zip(&scores) {
                *p += s;
            }
        }
    }
    implicit.finish();
    explicit.finish();
    all.finish();
    EvalReport {
        task,
        ks: ks.to_vec(),
        implicit,
        explicit,
        all,
        ndcg: None,
        grades: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&["a", "b"], &set(&["a"]), 2), 0.5);
        for k in 1..5 {
            assert_eq!(precision_at_k(&["a", "b"], &set(&[]), k), 0.0);
        }
        assert_eq!(precision_at_k(&["a"], &set(&["a"]), 3), 1.0 / 3.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg(&[3.0], 1), 1.0);
        assert_eq!(ndcg(&[2.0, 2.0, 2.0], 3), 1.0);
        assert_eq!(ndcg(&[0.0, 0.0], 2), 1.0);
        let expected = (1.0 + 7.0 / 3f64.log2()) / (7.0 + 1.0 / 3f64.log2());
        assert!((ndcg(&[1.0, 3.0], 2) - expected).abs() < 1e-15);
    }

    #[test]
    fn grade_names() {
        for g in Grade::ALL {
            assert_eq!(g.name().parse::<Grade>().unwrap(), g);
        }
        assert_eq!("perfect".parse::<Grade>().unwrap(), Grade::Perfect);
        let j = parse_judgments("hotels in boston\tad_1\tPerfect\nq\tad_2\tBarely\n".as_bytes()).unwrap();
        assert_eq!(j.len(), 2);
        assert!(parse_judgments("q\ta\tPerfect\nq\ta\tBarely\n".as_bytes()).is_err());
        assert!(parse_judgments("q\ta\n".as_bytes()).is_err());
    }
}
