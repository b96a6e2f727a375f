use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::Rng;

use super::examples::{Label, TrainingExample};
use super::sampler::NegativeSampler;
use super::{EmbedError, TokenKind, Variant, Vocabulary};

/// Vocabulary with paired input and output vector tables.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub variant: Variant,
    pub vocab: Vocabulary,
    /// Input vectors `v`, one row per token id.
    pub input: Array2<f64>,
    /// Output vectors `v'`, one row per token id.
    pub output: Array2<f64>,
}

/// Read and update access to the two vector tables. Implemented by the
/// owned model and by the shared table used by parallel workers.
pub(crate) trait ParamStore {
    fn dim(&self) -> usize;
    fn accumulate_input(&self, id: u32, acc: &mut [f64]);
    fn accumulate_output(&self, id: u32, acc: &mut [f64]);
    fn add_input(&mut self, id: u32, coef: f64, delta: &[f64]);
    fn add_output(&mut self, id: u32, coef: f64, delta: &[f64]);
}

impl ParamStore for EmbeddingModel {
    fn dim(&self) -> usize {
        self.input.ncols()
    }

    fn accumulate_input(&self, id: u32, acc: &mut [f64]) {
        let row = self.input.row(id as usize);
        for (a, x) in acc.iter_mut().zip(row.as_slice().unwrap()) {
            *a += x;
        }
    }

    fn accumulate_output(&self, id: u32, acc: &mut [f64]) {
        let row = self.output.row(id as usize);
        for (a, x) in acc.iter_mut().zip(row.as_slice().unwrap()) {
            *a += x;
        }
    }

    fn add_input(&mut self, id: u32, coef: f64, delta: &[f64]) {
        let mut row = self.input.row_mut(id as usize);
        for (x, d) in row.as_slice_mut().unwrap().iter_mut().zip(delta) {
            *x += coef * d;
        }
    }

    fn add_output(&mut self, id: u32, coef: f64, delta: &[f64]) {
        let mut row = self.output.row_mut(id as usize);
        for (x, d) in row.as_slice_mut().unwrap().iter_mut().zip(delta) {
            *x += coef * d;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scratch buffers for one update.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    center: Vec<f64>,
    context: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Scratch {
            center: vec![0.0; dim],
            context: vec![0.0; dim],
        }
    }
}

/// One negative-sampling update for a single (center, context, target)
/// pair. Both sums are taken before any vector changes.
pub(crate) fn update_pair<S: ParamStore>(
    store: &mut S,
    center: &[u32],
    context: &[u32],
    target: f64,
    lr: f64,
    scratch: &mut Scratch,
) {
    scratch.center.iter_mut().for_each(|x| *x = 0.0);
    scratch.context.iter_mut().for_each(|x| *x = 0.0);
    for &g in center {
        store.accumulate_input(g, &mut scratch.center);
    }
    for &c in context {
        store.accumulate_output(c, &mut scratch.context);
    }
    let coef = (target - sigmoid(dot(&scratch.center, &scratch.context))) * lr;
    for &c in context {
        store.add_output(c, coef, &scratch.center);
    }
    for &g in center {
        store.add_input(g, coef, &scratch.context);
    }
}

/// Applies an example and, for positives, `negatives` sampled negatives of
/// `negative_kind`, each as its own sequential update.
pub(crate) fn apply_example<S: ParamStore, R: Rng + ?Sized>(
    store: &mut S,
    negative_kind: TokenKind,
    center: &[u32],
    context: &[u32],
    label: Label,
    lr: f64,
    sampler: &NegativeSampler,
    negatives: usize,
    rng: &mut R,
    scratch: &mut Scratch,
) {
    update_pair(store, center, context, label.target(), lr, scratch);
    if label == Label::Positive && negatives > 0 {
        let kind = [negative_kind];
        for _ in 0..negatives {
            if let Some(neg) = sampler.sample(&kind, context, rng) {
                update_pair(store, center, &[neg], 0.0, lr, scratch);
            }
        }
    }
}

/// `(Σ_center v) · (Σ_context v')`.
pub fn score(model: &EmbeddingModel, center: &[u32], context: &[u32]) -> f64 {
    let d = model.dim();
    let mut h = vec![0.0; d];
    let mut o = vec![0.0; d];
    for &g in center {
        model.accumulate_input(g, &mut h);
    }
    for &c in context {
        model.accumulate_output(c, &mut o);
    }
    dot(&h, &o)
}

/// Full softmax probability of `target` given a (possibly compositional)
/// center, normalized over the whole vocabulary.
pub fn softmax_prob(model: &EmbeddingModel, center: &[u32], target: u32) -> f64 {
    let scores: Vec<f64> = (0..model.vocab.len() as u32)
        .map(|d| score(model, center, &[d]))
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    (scores[target as usize] - max).exp() / z
}

/// Negative log likelihood of one pair: `-(t log σ(s) + (1-t) log σ(-s))`.
pub fn pair_loss(s: f64, target: f64) -> f64 {
    let log_sig = |x: f64| -(1.0 + (-x).exp()).ln();
    -(target * log_sig(s) + (1.0 - target) * log_sig(-s))
}

/// Gradient of [`pair_loss`] with respect to each center input vector and
/// each context output vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub score: f64,
    /// Shared by every center member: `-(t - σ(s)) Σ_context v'`.
    pub center: Vec<f64>,
    /// Shared by every context member: `-(t - σ(s)) Σ_center v`.
    pub context: Vec<f64>,
}

pub fn pair_gradient(model: &EmbeddingModel, center: &[u32], context: &[u32], target: f64) -> PairGradient {
    let d = model.dim();
    let mut h = vec![0.0; d];
    let mut o = vec![0.0; d];
    for &g in center {
        model.accumulate_input(g, &mut h);
    }
    for &c in context {
        model.accumulate_output(c, &mut o);
    }
    let s = dot(&h, &o);
    let k = -(target - sigmoid(s));
    PairGradient {
        score: s,
        center: o.iter().map(|x| k * x).collect(),
        context: h.iter().map(|x| k * x).collect(),
    }
}

/// One SGD step on `example`; positives also draw `negatives` sampled
/// negatives from the sampler.
pub fn sgd_step<R: Rng + ?Sized>(
    model: &mut EmbeddingModel,
    example: &TrainingExample,
    lr: f64,
    sampler: &NegativeSampler,
    negatives: usize,
    rng: &mut R,
) {
    let mut scratch = Scratch::new(model.dim());
    let kind = model.vocab.kind(example.context[0]);
    apply_example(
        model,
        kind,
        &example.center,
        &example.context,
        example.label,
        lr,
        sampler,
        negatives,
        rng,
        &mut scratch,
    );
}

const MAGIC: &str = "WORLD2VEC";
const FORMAT_VERSION: u32 = 1;

impl EmbeddingModel {
    pub fn zeros(variant: Variant, vocab: Vocabulary, dim: usize) -> Self {
        let n = vocab.len();
        EmbeddingModel {
            variant,
            vocab,
            input: Array2::zeros((n, dim)),
            output: Array2::zeros((n, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn id(&self, kind: TokenKind, token: &str) -> Option<u32> {
        self.vocab.get(kind, token)
    }

    pub fn input_vector(&self, id: u32) -> &[f64] {
        self.input.row(id as usize).to_slice().unwrap()
    }

    pub fn output_vector(&self, id: u32) -> &[f64] {
        self.output.row(id as usize).to_slice().unwrap()
    }

    /// Input vector of a token by kind and surface form.
    pub fn vector(&self, kind: TokenKind, token: &str) -> Option<&[f64]> {
        self.id(kind, token).map(|i| self.input_vector(i))
    }

    /// Writes the text model format with 9 significant digits per value.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{MAGIC} {FORMAT_VERSION} {} {} {}",
            self.variant,
            self.dim(),
            self.vocab.len()
        )?;
        let write_table = |w: &mut W, table: &Array2<f64>| -> std::io::Result<()> {
            for (id, kind, token, _) in self.vocab.iter() {
                write!(w, "{kind}\t{token}\t")?;
                for (k, x) in table.row(id as usize).iter().enumerate() {
                    if k > 0 {
                        w.write_all(b" ")?;
                    }
                    write!(w, "{x:.8e}")?;
                }
                w.write_all(b"\n")?;
            }
            Ok(())
        };
        write_table(&mut w, &self.input)?;
        writeln!(w, "#OUTPUT")?;
        write_table(&mut w, &self.output)?;
        w.flush()
    }

    /// Reads the text model format. Token counts are not stored, so the
    /// loaded vocabulary has zero counts.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, EmbedError> {
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, reason: &str| EmbedError::MalformedModel {
            line: line + 1,
            reason: reason.to_owned(),
        };
        let (_, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
        let header = header?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 5 || parts[0] != MAGIC {
            return Err(bad(0, "bad header"));
        }
        if parts[1].parse::<u32>().ok() != Some(FORMAT_VERSION) {
            return Err(bad(0, "unsupported version"));
        }
        let variant: Variant = parts[2].parse().map_err(|e: String| bad(0, &e))?;
        let dim: usize = parts[3].parse().map_err(|_| bad(0, "bad dimension"))?;
        let n: usize = parts[4].parse().map_err(|_| bad(0, "bad vocabulary size"))?;

        let mut entries = Vec::with_capacity(n);
        let mut input = Array2::zeros((n, dim));
        let mut output = Array2::zeros((n, dim));
        let parse_row = |idx: usize, line: &str, table: &mut Array2<f64>, row: usize| {
            let mut cols = line.splitn(3, '\t');
            let kind: TokenKind = cols
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|e: String| bad(idx, &e))?;
            let token = cols.next().ok_or_else(|| bad(idx, "missing token"))?.to_owned();
            let values = cols.next().ok_or_else(|| bad(idx, "missing vector"))?;
            let mut k = 0;
            for v in values.split(' ') {
                if k >= dim {
                    return Err(bad(idx, "too many values"));
                }
                let x: f64 = v.parse().map_err(|_| bad(idx, "bad float"))?;
                if !x.is_finite() {
                    return Err(bad(idx, "non-finite value"));
                }
                table[[row, k]] = x;
                k += 1;
            }
            if k != dim {
                return Err(bad(idx, "too few values"));
            }
            Ok((kind, token))
        };

        for row in 0..n {
            let (idx, line) = lines.next().ok_or_else(|| bad(row + 1, "truncated input table"))?;
            let (kind, token) = parse_row(idx, &line?, &mut input, row)?;
            entries.push(((kind, token), 0));
        }
        let (idx, line) = lines.next().ok_or_else(|| bad(n + 1, "missing #OUTPUT"))?;
        if line? != "#OUTPUT" {
            return Err(bad(idx, "expected #OUTPUT"));
        }
        for row in 0..n {
            let (idx, line) = lines.next().ok_or_else(|| bad(n + row + 2, "truncated output table"))?;
            let (kind, token) = parse_row(idx, &line?, &mut output, row)?;
            if entries[row].0 != (kind, token) {
                return Err(bad(idx, "output token order differs from input"));
            }
        }
        let vocab = Vocabulary::from_entries(entries, 0);
        if vocab.len() != n {
            return Err(bad(0, "duplicate tokens"));
        }
        Ok(EmbeddingModel {
            variant,
            vocab,
            input,
            output,
        })
    }
}
