//! Central finite-difference verification of [`loss_and_grads`].

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{loss_and_grads, Batch};
use super::params::{Dims, ModelParams};
use super::vocab::{EOS, UNK};
use super::Seq2SeqError;

pub const STEP: f64 = 1e-5;
/// Relative errors are taken against `max(|analytic|, |numeric|, FLOOR)`.
pub const FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub n_params: usize,
    pub max_rel_err: f64,
    /// Coordinate where the maximum was attained.
    pub worst_index: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// A seeded random model and batch for checking: weights uniform in
/// `[-0.5, 0.5]`, `n_seqs` source/target rows of uneven length so the batch
/// contains padding. Symbols are drawn from the non-special ids, so
/// `dims.vocab` must exceed 4.
pub fn random_problem(dims: Dims, n_seqs: usize, seed: u64) -> (ModelParams, Batch) {
    assert!(
        dims.vocab > UNK as usize + 1,
        "vocabulary has no ordinary symbols"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dims.n_params())
        .map(|_| rng.random_range(-0.5..=0.5))
        .collect();
    let params = ModelParams::from_flat(dims, data).expect("length matches dims");
    let (lo, hi) = (UNK + 1, dims.vocab as u32);
    let mut rows: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(n_seqs);
    for i in 0..n_seqs {
        let mut sym = |n: usize| -> Vec<u32> {
            let mut v: Vec<u32> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            v.push(EOS);
            v
        };
        let src = sym(2 + i % 3);
        let tgt = sym(1 + (i + 1) % 3);
        rows.push((src, tgt));
    }
    let batch = Batch::from_pairs(rows.iter().map(|(s, t)| (s.as_slice(), t.as_slice())));
    (params, batch)
}

/// Compares every analytic gradient coordinate with
/// `(L(θ + h) - L(θ - h)) / 2h`.
pub fn check(params: &ModelParams, batch: &Batch) -> Result<GradCheck, Seq2SeqError> {
    let (_, grads) = loss_and_grads(params, batch)?;
    let mut probe = params.clone();
    let mut worst = (0.0f64, 0usize);
    for i in 0..params.as_slice().len() {
        let orig = params.as_slice()[i];
        probe.as_mut_slice()[i] = orig + STEP;
        let (up, _) = loss_and_grads(&probe, batch)?;
        probe.as_mut_slice()[i] = orig - STEP;
        let (down, _) = loss_and_grads(&probe, batch)?;
        probe.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let rel = relative_error(grads.as_slice()[i], numeric);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    Ok(GradCheck {
        n_params: params.as_slice().len(),
        max_rel_err: worst.0,
        worst_index: worst.1,
    })
}
