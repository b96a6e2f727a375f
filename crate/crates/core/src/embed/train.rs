use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::annotate::AnnotatedSession;
use super::examples::EncodedSession;
use super::model::{apply_example, EmbeddingModel, ParamStore, Scratch};
use super::sampler::{build_negative_table, NegativeSampler};
use super::vocab::build_vocabulary;
use super::{EmbedError, TokenKind, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub min_count: u64,
    pub seed: u64,
    pub poi_mode: bool,
    pub implicit_negatives: bool,
    /// Frequent-token subsampling threshold; off when `None`.
    pub subsample: Option<f64>,
    pub power: f64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 1e-4,
            min_count: 2,
            seed: 1,
            poi_mode: false,
            implicit_negatives: true,
            subsample: None,
            power: 0.75,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_owned()));
        if self.dim == 0 || self.window == 0 || self.epochs == 0 || self.workers == 0 {
            return bad("dim, window, epochs and workers must be positive");
        }
        if !(self.lr_initial > 0.0 && self.lr_final > 0.0 && self.lr_final <= self.lr_initial) {
            return bad("learning rates must satisfy 0 < lr_final <= lr_initial");
        }
        if !(self.power > 0.0) {
            return bad("sampling power must be positive");
        }
        if matches!(self.subsample, Some(t) if !(t > 0.0)) {
            return bad("subsampling threshold must be positive");
        }
        Ok(())
    }

    fn learning_rate(&self, processed: u64, total: u64) -> f64 {
        let frac = if total == 0 {
            0.0
        } else {
            (processed as f64 / total as f64).min(1.0)
        };
        self.lr_initial - (self.lr_initial - self.lr_final) * frac
    }
}

/// Input and output tables shared by hogwild workers. Updates are relaxed
/// read-modify-write sequences, so concurrent writers may lose updates.
struct SharedTables {
    dim: usize,
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
}

impl SharedTables {
    fn from_model(model: &EmbeddingModel) -> Self {
        let pack = |a: &ndarray::Array2<f64>| a.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        SharedTables {
            dim: model.dim(),
            input: pack(&model.input),
            output: pack(&model.output),
        }
    }

    fn write_back(&self, model: &mut EmbeddingModel) {
        for (x, a) in model.input.iter_mut().zip(&self.input) {
            *x = f64::from_bits(a.load(Ordering::Relaxed));
        }
        for (x, a) in model.output.iter_mut().zip(&self.output) {
            *x = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }
}

struct SharedView<'a>(&'a SharedTables);

fn accumulate(table: &[AtomicU64], dim: usize, id: u32, acc: &mut [f64]) {
    let row = &table[id as usize * dim..(id as usize + 1) * dim];
    for (a, x) in acc.iter_mut().zip(row) {
        *a += f64::from_bits(x.load(Ordering::Relaxed));
    }
}

fn add(table: &[AtomicU64], dim: usize, id: u32, coef: f64, delta: &[f64]) {
    let row = &table[id as usize * dim..(id as usize + 1) * dim];
    for (x, d) in row.iter().zip(delta) {
        let v = f64::from_bits(x.load(Ordering::Relaxed)) + coef * d;
        x.store(v.to_bits(), Ordering::Relaxed);
    }
}

impl ParamStore for SharedView<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn accumulate_input(&self, id: u32, acc: &mut [f64]) {
        accumulate(&self.0.input, self.0.dim, id, acc)
    }

    fn accumulate_output(&self, id: u32, acc: &mut [f64]) {
        accumulate(&self.0.output, self.0.dim, id, acc)
    }

    fn add_input(&mut self, id: u32, coef: f64, delta: &[f64]) {
        add(&self.0.input, self.0.dim, id, coef, delta)
    }

    fn add_output(&mut self, id: u32, coef: f64, delta: &[f64]) {
        add(&self.0.output, self.0.dim, id, coef, delta)
    }
}

struct Job<'a> {
    config: &'a TrainConfig,
    sessions: &'a [EncodedSession],
    kinds: &'a [TokenKind],
    counts: &'a [u64],
    total_count: u64,
    sampler: &'a NegativeSampler,
    total_examples: u64,
    processed: &'a AtomicU64,
}

const PROGRESS_CHUNK: u64 = 1024;

impl Job<'_> {
    fn keep<R: Rng>(&self, id: u32, rng: &mut R) -> bool {
        let Some(t) = self.config.subsample else {
            return true;
        };
        let f = self.counts[id as usize] as f64 / self.total_count as f64;
        if f <= 0.0 {
            return true;
        }
        let p = ((f / t).sqrt() + 1.0) * t / f;
        p >= 1.0 || rng.random::<f64>() < p
    }

    /// Runs every epoch over sessions `worker, worker + stride, ...`.
    fn run<S: ParamStore>(&self, store: &mut S, worker: usize, stride: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(worker as u64 + 1);
        let mut scratch = Scratch::new(store.dim());
        let mut local = 0u64;
        let mut base = 0u64;
        for epoch in 0..self.config.epochs {
            for session in self.sessions.iter().skip(worker).step_by(stride) {
                let filtered;
                let session = if self.config.subsample.is_some() {
                    filtered = session.retain_events(|id| self.keep(id, &mut rng));
                    &filtered
                } else {
                    session
                };
                session.for_each_example(self.config.window, |center, context, label| {
                    let lr = self.config.learning_rate(base + local, self.total_examples);
                    apply_example(
                        store,
                        self.kinds[context[0] as usize],
                        center,
                        context,
                        label,
                        lr,
                        self.sampler,
                        self.config.negatives,
                        &mut rng,
                        &mut scratch,
                    );
                    local += 1;
                    if local == PROGRESS_CHUNK {
                        base = self.processed.fetch_add(local, Ordering::Relaxed) + local;
                        local = 0;
                    }
                });
            }
            if worker == 0 {
                log::info!(
                    "epoch {}/{} done, lr {:.6}",
                    epoch + 1,
                    self.config.epochs,
                    self.config.learning_rate(base + local, self.total_examples)
                );
            }
        }
        self.processed.fetch_add(local, Ordering::Relaxed);
    }
}

/// Trains one model variant. Input vectors start uniform in
/// `[-0.5/d, 0.5/d)`, output vectors at zero, and the learning rate decays
/// linearly with the number of processed examples. A single worker with a
/// fixed seed is bit-for-bit reproducible.
pub fn train(sessions: &[AnnotatedSession], config: &TrainConfig, variant: Variant) -> Result<EmbeddingModel, EmbedError> {
    config.validate()?;
    let vocab = build_vocabulary(sessions, variant, config.min_count)?;
    let encoded: Vec<EncodedSession> = sessions
        .iter()
        .map(|s| EncodedSession::encode(s, &vocab, variant, config.implicit_negatives))
        .filter(|e| !e.is_empty())
        .collect();
    let per_epoch: u64 = encoded.iter().map(|e| e.count_examples(config.window)).sum();
    let total_examples = per_epoch * config.epochs as u64;
    log::info!(
        "{variant}: {} tokens, {} sessions, {per_epoch} examples per epoch",
        vocab.len(),
        encoded.len()
    );

    let d = config.dim;
    let mut model = EmbeddingModel::zeros(variant, vocab, d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for x in model.input.iter_mut() {
        *x = (rng.random::<f64>() - 0.5) / d as f64;
    }

    let sampler = build_negative_table(&model.vocab, config.power);
    let kinds: Vec<TokenKind> = model.vocab.iter().map(|(_, k, _, _)| k).collect();
    let counts: Vec<u64> = model.vocab.iter().map(|(_, _, _, c)| c).collect();
    let processed = AtomicU64::new(0);
    let job = Job {
        config,
        sessions: &encoded,
        kinds: &kinds,
        total_count: counts.iter().sum(),
        counts: &counts,
        sampler: &sampler,
        total_examples,
        processed: &processed,
    };

    if config.workers == 1 {
        job.run(&mut model, 0, 1);
    } else {
        let shared = SharedTables::from_model(&model);
        std::thread::scope(|scope| {
            for w in 0..config.workers {
                let job = &job;
                let shared = &shared;
                scope.spawn(move || job.run(&mut SharedView(shared), w, config.workers));
            }
        });
        shared.write_back(&mut model);
    }
    Ok(model)
}
