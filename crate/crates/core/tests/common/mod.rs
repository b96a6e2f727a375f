#![allow(dead_code)]

use std::collections::BTreeMap;

use world2vec::embed::{train, AnnotatedSession, Annotator, EmbeddingModel, TokenKind, TrainConfig, Variant, Vocabulary};
use world2vec::geo::LocationResolver;
use world2vec::retrieval::AdIndex;
use world2vec::session::filter_sessions;
use world2vec::synth::{generate, SynthConfig, SynthCorpus};
use world2vec::tagger::{train_tagger, QueryParser};

pub const MAX_QUERIES: usize = 100;
pub const TAGGER_EPOCHS: usize = 10;

/// A synthetic corpus annotated with a tagger trained on its own tagging set.
pub struct Prepared {
    pub corpus: SynthCorpus,
    pub annotator: Annotator,
    pub train: Vec<AnnotatedSession>,
    pub test: Vec<AnnotatedSession>,
}

pub fn prepare(config: &SynthConfig) -> Prepared {
    let corpus = generate(config).expect("valid synth config");
    let (tagger, _) = train_tagger(&corpus.tagging, TAGGER_EPOCHS).expect("valid tagging corpus");
    let parser = QueryParser::new(tagger, corpus.lexicon.clone(), corpus.gazetteer.clone())
        .with_woeids(corpus.woeids.clone());
    let annotator = Annotator::new(
        LocationResolver::new(Some(corpus.woeids.clone()), None, false),
        Some(parser),
    );
    let train = annotator.annotate_all(&filter_sessions(corpus.train.clone(), MAX_QUERIES));
    let test = annotator.annotate_all(&filter_sessions(corpus.test.clone(), MAX_QUERIES));
    Prepared {
        corpus,
        annotator,
        train,
        test,
    }
}

pub struct Trained {
    pub model: EmbeddingModel,
    pub index: AdIndex,
}

/// Prepared corpora and trained models, built on first use.
#[derive(Default)]
pub struct Lab {
    pub train_config: TrainConfig,
    data: BTreeMap<u64, Prepared>,
    models: BTreeMap<(u64, &'static str), Trained>,
}

impl Lab {
    pub fn new(train_config: TrainConfig) -> Self {
        Lab {
            train_config,
            ..Default::default()
        }
    }

    pub fn data(&mut self, seed: u64) -> &Prepared {
        self.data
            .entry(seed)
            .or_insert_with(|| prepare(&SynthConfig { seed, ..SynthConfig::default() }))
    }

    pub fn model(&mut self, seed: u64, variant: Variant) -> &Trained {
        if !self.models.contains_key(&(seed, variant.as_str())) {
            let config = self.train_config.clone();
            let data = self.data(seed);
            let model = train(&data.train, &config, variant).expect("training succeeds");
            let index = AdIndex::build(&model);
            self.models.insert((seed, variant.as_str()), Trained { model, index });
        }
        &self.models[&(seed, variant.as_str())]
    }
}

/// Model whose input vectors are given per token; output vectors are zero.
pub fn model_from_vectors(variant: Variant, tokens: &[(TokenKind, &str, Vec<f64>)]) -> EmbeddingModel {
    let dim = tokens[0].2.len();
    let entries = tokens.iter().map(|(k, t, _)| ((*k, t.to_string()), 1)).collect();
    let vocab = Vocabulary::from_entries(entries, 1);
    let mut model = EmbeddingModel::zeros(variant, vocab, dim);
    for (k, t, v) in tokens {
        let id = model.id(*k, t).unwrap() as usize;
        model.input.row_mut(id).iter_mut().zip(v).for_each(|(x, y)| *x = *y);
    }
    model
}
