use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{TokenKind, Vocabulary};

const MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug)]
struct KindTable {
    ids: Vec<u32>,
    weights: Vec<f64>,
    total: f64,
    dist: WeightedIndex<f64>,
}

/// Draws token ids with probability proportional to `count^power`,
/// restricted to a set of token kinds.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    tables: Vec<Option<KindTable>>,
    power: f64,
}

/// Builds one weighted table per token kind. Tokens with zero count (for
/// instance after loading a model) are weighted uniformly.
pub fn build_negative_table(vocab: &Vocabulary, power: f64) -> NegativeSampler {
    assert!(power > 0.0, "power must be positive");
    let tables = TokenKind::ALL
        .iter()
        .map(|&kind| {
            let ids: Vec<u32> = vocab.ids_of_kind(kind).collect();
            if ids.is_empty() {
                return None;
            }
            let mut weights: Vec<f64> = ids
                .iter()
                .map(|&i| (vocab.count(i) as f64).powf(power))
                .collect();
            if weights.iter().all(|&w| w == 0.0) {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let total = weights.iter().sum();
            let dist = WeightedIndex::new(&weights).ok()?;
            Some(KindTable {
                ids,
                weights,
                total,
                dist,
            })
        })
        .collect();
    NegativeSampler { tables, power }
}

impl NegativeSampler {
    pub fn power(&self) -> f64 {
        self.power
    }

    /// Exact sampling probability of `id` when drawing from `kinds`.
    pub fn probability(&self, kinds: &[TokenKind], id: u32) -> f64 {
        let total: f64 = kinds
            .iter()
            .filter_map(|k| self.tables[k.index()].as_ref())
            .map(|t| t.total)
            .sum();
        kinds
            .iter()
            .filter_map(|k| self.tables[k.index()].as_ref())
            .find_map(|t| t.ids.iter().position(|&x| x == id).map(|p| t.weights[p]))
            .map_or(0.0, |w| w / total)
    }

    fn draw<R: Rng + ?Sized>(&self, kinds: &[TokenKind], rng: &mut R) -> Option<u32> {
        let table = if let [kind] = kinds {
            self.tables[kind.index()].as_ref()?
        } else {
            let present: Vec<&KindTable> = kinds
                .iter()
                .filter_map(|k| self.tables[k.index()].as_ref())
                .collect();
            let total: f64 = present.iter().map(|t| t.total).sum();
            let mut r = rng.random::<f64>() * total;
            let mut chosen = *present.last()?;
            for t in &present {
                if r < t.total {
                    chosen = t;
                    break;
                }
                r -= t.total;
            }
            chosen
        };
        Some(table.ids[table.dist.sample(rng)])
    }

    /// Draws a token of one of `kinds` that is not in `exclude`. Gives up
    /// after 100 rejected draws.
    pub fn sample<R: Rng + ?Sized>(&self, kinds: &[TokenKind], exclude: &[u32], rng: &mut R) -> Option<u32> {
        for _ in 0..MAX_ATTEMPTS {
            let id = self.draw(kinds, rng)?;
            if !exclude.contains(&id) {
                return Some(id);
            }
        }
        None
    }
}
