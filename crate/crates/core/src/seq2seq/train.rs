use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decode::{greedy_decode, ToyModel};
use super::model::{accumulate, forward, n_target_tokens, Batch};
use super::params::{Dims, ModelParams};
use super::vocab::Vocab;
use super::Seq2SeqError;
use crate::align::{align_output, AlignConfig};
use crate::corpus::SentencePair;

/// Optimization settings. Updates use Adam; teacher forcing is always on.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev token-accuracy gain before stopping.
    pub patience: usize,
    pub clip_norm: f64,
    /// Factor applied to the learning rate after every epoch that does not
    /// improve dev accuracy; 1.0 keeps it fixed.
    pub lr_decay: f64,
    /// Inverted-dropout probability on the embeddings and on the output
    /// layer input; 0.0 disables it.
    pub dropout: f64,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            batch_size: 16,
            max_epochs: 30,
            patience: 5,
            clip_norm: 5.0,
            lr_decay: 1.0,
            dropout: 0.0,
            seed: 42,
            embed_dim: 32,
            hidden_dim: 64,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), Seq2SeqError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Seq2SeqError::InvalidConfig(
                "learning rate must be finite and >= 0",
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Seq2SeqError::InvalidConfig(
                "batch size, max epochs and patience must be positive",
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Seq2SeqError::InvalidConfig("lr decay must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Seq2SeqError::InvalidConfig("dropout must be in [0, 1)"));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Seq2SeqError::InvalidConfig("clip norm must be positive"));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Seq2SeqError::InvalidConfig("dimensions must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy per target symbol over the epoch.
    pub train_loss: f64,
    /// Greedy-decoded word accuracy on the dev pairs, after aligning the
    /// output back onto the source tokens. Drives model selection.
    pub dev_accuracy: f64,
    /// Teacher-forced next-symbol accuracy on the dev pairs; breaks ties.
    pub dev_char_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    /// Parameters of the epoch with the best dev accuracy.
    pub model: ToyModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Rescales `g` so its Euclidean norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = sqrt(g.iter().map(|x| x * x).sum::<f64>());
    if norm > max_norm {
        let scale = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= scale);
    }
    norm
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / (sqrt(*v / c2) + Self::EPS);
        }
    }
}

struct Encoded {
    src: Vec<u32>,
    tgt: Vec<u32>,
}

fn encode_pairs(vocab: &Vocab, pairs: &[SentencePair]) -> Result<Vec<Encoded>, Seq2SeqError> {
    pairs
        .iter()
        .map(|p| {
            Ok(Encoded {
                src: vocab.encode_text(&p.lang, &p.src)?,
                tgt: vocab.encode_target(&p.tgt),
            })
        })
        .collect()
}

/// Teacher-forced next-symbol accuracy.
fn token_accuracy(params: &ModelParams, data: &[Encoded]) -> Result<f64, Seq2SeqError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for e in data {
        let f = forward(params, &e.src, &e.tgt)?;
        correct += f.n_correct();
        total += f.steps();
    }
    Ok(correct as f64 / total as f64)
}

/// Dev pairs with their reference word per source token.
struct DevSet<'a> {
    pairs: &'a [SentencePair],
    gold: Vec<Vec<alloc::string::String>>,
}

impl<'a> DevSet<'a> {
    fn new(pairs: &'a [SentencePair]) -> Self {
        let cfg = AlignConfig::default();
        let gold = pairs
            .iter()
            .map(|p| {
                let raw: Vec<&str> = p.src.split(' ').collect();
                align_output(&raw, &p.tgt, &cfg)
                    .map(|a| a.assignments)
                    .unwrap_or_default()
            })
            .collect();
        DevSet { pairs, gold }
    }

    /// Fraction of source tokens whose aligned greedy output equals the
    /// reference.
    fn word_accuracy(&self, params: &ModelParams, vocab: &Vocab) -> Result<f64, Seq2SeqError> {
        let cfg = AlignConfig::default();
        let (mut hits, mut total) = (0usize, 0usize);
        for (p, gold) in self.pairs.iter().zip(&self.gold) {
            let out = greedy_decode(params, vocab, &p.lang, &p.src)?;
            let raw: Vec<&str> = p.src.split(' ').collect();
            total += raw.len();
            if let Ok(a) = align_output(&raw, &out, &cfg) {
                hits += a
                    .assignments
                    .iter()
                    .zip(gold)
                    .filter(|(a, g)| a == g)
                    .count();
            }
        }
        Ok(hits as f64 / total.max(1) as f64)
    }
}

/// Trains on `train`, selecting the epoch with the best dev accuracy.
///
/// The vocabulary covers every language of `train` and `dev` but only the
/// characters of `train`. Pairs are sorted by source length and cut into fixed
/// chunks once; each epoch visits the chunks in a freshly shuffled order, so
/// every language is mixed into every epoch.
pub fn train(
    train: &[SentencePair],
    dev: &[SentencePair],
    cfg: &TrainConfig,
) -> Result<TrainedModel, Seq2SeqError> {
    if train.is_empty() || dev.is_empty() {
        return Err(Seq2SeqError::EmptyData);
    }
    cfg.validate()?;

    let base = Vocab::from_pairs(train);
    let mut langs: Vec<alloc::string::String> = base.langs().map(Into::into).collect();
    for p in dev {
        if !langs.contains(&p.lang) {
            langs.push(p.lang.clone());
        }
    }
    langs.sort();
    let vocab = Vocab::new(langs, base.chars().collect::<Vec<_>>());

    let train_enc = encode_pairs(&vocab, train)?;
    let dev_enc = encode_pairs(&vocab, dev)?;
    let dev_set = DevSet::new(dev);

    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    order.sort_by_key(|&i| (train_enc[i].src.len(), i));
    let batches: Vec<Batch> = order
        .chunks(cfg.batch_size)
        .map(|idx| {
            Batch::from_pairs(
                idx.iter()
                    .map(|&i| (train_enc[i].src.as_slice(), train_enc[i].tgt.as_slice())),
            )
        })
        .collect();
    let batch_tokens: Vec<usize> = batches.iter().map(n_target_tokens).collect();
    let total_tokens: usize = batch_tokens.iter().sum();

    let dims = Dims {
        vocab: vocab.len(),
        embed: cfg.embed_dim,
        hidden: cfg.hidden_dim,
    };
    let mut params = ModelParams::init_uniform(dims, cfg.seed);
    let mut adam = Adam::new(dims.n_params());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(3);

    let mut history = Vec::new();
    let mut best: Option<((f64, f64), usize, ModelParams)> = None;
    let mut since_best = 0usize;
    let mut grads = ModelParams::zeros(dims);
    let mut visit: Vec<usize> = (0..batches.len()).collect();
    let mut batch_nll = vec![0.0; batches.len()];
    let mut lr = cfg.learning_rate;

    for epoch in 1..=cfg.max_epochs {
        for i in (1..visit.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            visit.swap(i, j);
        }
        for (step, &b) in visit.iter().enumerate() {
            grads.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch_tokens[b] as f64;
            let dropout = (cfg.dropout > 0.0).then_some((&mut dropout_rng, cfg.dropout));
            let nll = accumulate(&params, &batches[b], &mut grads, scale, dropout)?;
            if !nll.is_finite() || !grads.is_finite() {
                return Err(Seq2SeqError::NonFiniteLoss { epoch, step });
            }
            batch_nll[b] = nll;
            clip_global_norm(grads.as_mut_slice(), cfg.clip_norm);
            adam.step(params.as_mut_slice(), grads.as_slice(), lr);
        }
        // Summed in chunk order so the figure does not depend on the shuffle.
        let train_loss = batch_nll.iter().sum::<f64>() / total_tokens as f64;
        let dev_accuracy = dev_set.word_accuracy(&params, &vocab)?;
        let dev_char_accuracy = token_accuracy(&params, &dev_enc)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            dev_accuracy,
            dev_char_accuracy,
        });
        let score = (dev_accuracy, dev_char_accuracy);
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            lr *= cfg.lr_decay;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch runs");
    Ok(TrainedModel {
        model: ToyModel::new(vocab, params)?,
        history,
        best_epoch,
    })
}
