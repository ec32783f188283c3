use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, tanh};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{Dims, GruView, GruViewMut, ModelParams, View};
use super::vocab::{BOS, PAD};
use super::Seq2SeqError;

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y[k] = dot(row k, x)` where row `k` starts at `w[k * stride]`. Rows are
/// taken four at a time so the accumulator chains overlap; each row is summed
/// exactly as [`dot`] would.
fn gemv(w: &[f64], stride: usize, x: &[f64], y: &mut [f64]) {
    let n = x.len();
    let body = n - n % 4;
    let done = y.len() - y.len() % 4;
    for (b, out) in y.chunks_exact_mut(4).enumerate() {
        let row = |r: usize| &w[(4 * b + r) * stride..(4 * b + r) * stride + n];
        let rows = [row(0), row(1), row(2), row(3)];
        let acc = lanes4(&rows, &x[..body]);
        for ((o, a), r) in out.iter_mut().zip(&acc).zip(&rows) {
            let tail: f64 = r[body..].iter().zip(&x[body..]).map(|(p, q)| p * q).sum();
            *o = (a[0] + a[1]) + (a[2] + a[3]) + tail;
        }
    }
    for k in done..y.len() {
        y[k] = dot(&w[k * stride..k * stride + n], x);
    }
}

/// Per-row lane sums: `acc[r][l] = Σ_j rows[r][4j + l] * x[4j + l]`.
#[cfg(all(target_arch = "x86_64", target_feature = "avx"))]
#[allow(unsafe_code)]
#[inline]
fn lanes4(rows: &[&[f64]; 4], x: &[f64]) -> [[f64; 4]; 4] {
    use core::arch::x86_64::*;
    let mut out = [[0.0f64; 4]; 4];
    // SAFETY: the avx target feature is enabled at compile time. Lanes are
    // built from indexed reads rather than pointer loads, which carry costly
    // precondition checks in builds with debug assertions.
    unsafe {
        let mut acc = [_mm256_setzero_pd(); 4];
        let mut j = 0;
        while j < x.len() {
            let load = |v: &[f64]| _mm256_set_pd(v[j + 3], v[j + 2], v[j + 1], v[j]);
            let xv = load(x);
            for (a, r) in acc.iter_mut().zip(rows) {
                *a = _mm256_add_pd(*a, _mm256_mul_pd(load(r), xv));
            }
            j += 4;
        }
        for r in 0..4 {
            _mm256_storeu_pd(&mut out[r][0], acc[r]);
        }
    }
    out
}

#[cfg(all(target_arch = "x86_64", not(target_feature = "avx")))]
#[allow(unsafe_code)]
#[inline]
fn lanes4(rows: &[&[f64]; 4], x: &[f64]) -> [[f64; 4]; 4] {
    use core::arch::x86_64::*;
    let mut out = [[0.0f64; 4]; 4];
    // SAFETY: sse2 is part of the x86_64 baseline. Lanes are built from
    // indexed reads rather than pointer loads, which carry costly precondition
    // checks in builds with debug assertions.
    unsafe {
        let mut lo = [_mm_setzero_pd(); 4];
        let mut hi = [_mm_setzero_pd(); 4];
        let mut j = 0;
        while j < x.len() {
            let load = |v: &[f64], i: usize| _mm_set_pd(v[i + 1], v[i]);
            let (x0, x1) = (load(x, j), load(x, j + 2));
            for r in 0..4 {
                lo[r] = _mm_add_pd(lo[r], _mm_mul_pd(load(rows[r], j), x0));
                hi[r] = _mm_add_pd(hi[r], _mm_mul_pd(load(rows[r], j + 2), x1));
            }
            j += 4;
        }
        for r in 0..4 {
            _mm_storeu_pd(&mut out[r][0], lo[r]);
            _mm_storeu_pd(&mut out[r][2], hi[r]);
        }
    }
    out
}

#[cfg(not(target_arch = "x86_64"))]
#[inline]
fn lanes4(rows: &[&[f64]; 4], x: &[f64]) -> [[f64; 4]; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    for j in (0..x.len()).step_by(4) {
        for (a, r) in acc.iter_mut().zip(rows) {
            for l in 0..4 {
                a[l] += r[j + l] * x[j + l];
            }
        }
    }
    acc
}

/// `y += Σ_k d[k] * row k`, rows as in [`gemv`], added in row order.
fn gemv_t_add(w: &[f64], stride: usize, d: &[f64], y: &mut [f64]) {
    let n = y.len();
    let mut blocks = d.chunks_exact(4);
    for (b, dk) in (&mut blocks).enumerate() {
        let row = |r: usize| &w[(4 * b + r) * stride..(4 * b + r) * stride + n];
        let (r0, r1, r2, r3) = (row(0), row(1), row(2), row(3));
        for ((((yi, a), b), c), e) in y.iter_mut().zip(r0).zip(r1).zip(r2).zip(r3) {
            *yi = (((*yi + dk[0] * a) + dk[1] * b) + dk[2] * c) + dk[3] * e;
        }
    }
    let done = d.len() - blocks.remainder().len();
    for k in done..d.len() {
        axpy(d[k], &w[k * stride..k * stride + n], y);
    }
}

/// `y += alpha * x`
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Normalizes `v` into a distribution and returns `log Σ exp(v)`.
fn softmax_in_place(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    max + log(sum)
}

/// Gate activations of one GRU step, each of length `hidden`.
struct GruTrace<'a> {
    z: &'a mut [f64],
    r: &'a mut [f64],
    n: &'a mut [f64],
    rh: &'a mut [f64],
    h: &'a mut [f64],
}

/// Read-only counterpart used by the backward pass.
struct GruSaved<'a> {
    z: &'a [f64],
    r: &'a [f64],
    n: &'a [f64],
}

/// `h' = (1 - z) * n + z * h` with
/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + Un (r * h) + bn)`.
fn gru_forward(g: &GruView<'_>, hidden: usize, x: &[f64], h_prev: &[f64], out: GruTrace<'_>) {
    let input = x.len();
    let h = hidden;
    let mut pw = vec![0.0; 3 * h];
    gemv(g.w, input, x, &mut pw);
    gemv(g.u, h, h_prev, out.z);
    gemv(&g.u[h * h..], h, h_prev, out.r);
    for k in 0..h {
        out.z[k] = sigmoid(g.b[k] + pw[k] + out.z[k]);
        out.r[k] = sigmoid(g.b[h + k] + pw[h + k] + out.r[k]);
        out.rh[k] = out.r[k] * h_prev[k];
    }
    gemv(&g.u[2 * h * h..], h, out.rh, out.n);
    for k in 0..h {
        out.n[k] = tanh(g.b[2 * h + k] + pw[2 * h + k] + out.n[k]);
        out.h[k] = (1.0 - out.z[k]) * out.n[k] + out.z[k] * h_prev[k];
    }
}

/// Writes the pre-activation gradients of one step into `dpre` (`3H`), and
/// `dx` and `dh_prev` (overwriting). Weight gradients are left to
/// [`gru_weight_grads`].
#[allow(clippy::too_many_arguments)]
fn gru_backward(
    g: &GruView<'_>,
    hidden: usize,
    h_prev: &[f64],
    saved: GruSaved<'_>,
    dh: &[f64],
    dpre: &mut [f64],
    dx: &mut [f64],
    dh_prev: &mut [f64],
    d_rh: &mut [f64],
) {
    let input = dx.len();
    let h = hidden;
    for k in 0..h {
        let (z, n) = (saved.z[k], saved.n[k]);
        dpre[2 * h + k] = dh[k] * (1.0 - z) * (1.0 - n * n);
        dpre[k] = dh[k] * (h_prev[k] - n) * z * (1.0 - z);
        dh_prev[k] = dh[k] * z;
    }
    d_rh.iter_mut().for_each(|v| *v = 0.0);
    gemv_t_add(&g.u[2 * h * h..], h, &dpre[2 * h..], d_rh);
    for k in 0..h {
        let r = saved.r[k];
        dpre[h + k] = d_rh[k] * h_prev[k] * r * (1.0 - r);
        dh_prev[k] += d_rh[k] * r;
    }
    gemv_t_add(g.u, h, &dpre[..2 * h], dh_prev);
    dx.iter_mut().for_each(|v| *v = 0.0);
    debug_assert_eq!(g.w.len(), 3 * h * input);
    gemv_t_add(g.w, input, dpre, dx);
}

/// `g[r] += Σ_t d[t][r] * x[t]` over the rows of `g` (`cols` wide), with `t`
/// running from the last step down to the first.
fn add_outer(g: &mut [f64], cols: usize, d: &[f64], d_stride: usize, x: &[f64], x_stride: usize) {
    let steps = d.len().div_ceil(d_stride);
    for (r, row) in g.chunks_exact_mut(cols).enumerate() {
        // Eight columns at a time stay in registers across all steps.
        let body = cols - cols % 8;
        for start in (0..body).step_by(8) {
            let chunk: &mut [f64; 8] = (&mut row[start..start + 8]).try_into().unwrap();
            let mut acc = *chunk;
            for t in (0..steps).rev() {
                let dv = d[t * d_stride + r];
                let at = t * x_stride + start;
                let xt: &[f64; 8] = x[at..at + 8].try_into().unwrap();
                for l in 0..8 {
                    acc[l] += dv * xt[l];
                }
            }
            *chunk = acc;
        }
        for t in (0..steps).rev() {
            let at = t * x_stride;
            axpy(
                d[t * d_stride + r],
                &x[at + body..at + cols],
                &mut row[body..],
            );
        }
    }
}

/// Accumulates the weight gradients of a whole sequence from the per-step
/// `dpre` rows (`T x 3H`), inputs `xs` (`T x I`), previous states `hs`
/// (`T x H`) and gated states `rhs` (`T x H`).
fn gru_weight_grads(
    gg: &mut GruViewMut<'_>,
    hidden: usize,
    dpre: &[f64],
    xs: &[f64],
    hs: &[f64],
    rhs: &[f64],
) {
    let h = hidden;
    let steps = dpre.len() / (3 * h);
    let input = xs.len() / steps;
    for (row, b) in gg.b.iter_mut().enumerate() {
        for t in (0..steps).rev() {
            *b += dpre[t * 3 * h + row];
        }
    }
    add_outer(&mut gg.u[..2 * h * h], h, dpre, 3 * h, hs, h);
    add_outer(&mut gg.u[2 * h * h..], h, &dpre[2 * h..], 3 * h, rhs, h);
    add_outer(gg.w, input, dpre, 3 * h, xs, input);
}

/// Buffers for one decoder step outside of a full forward trace.
pub(crate) struct DecoderState {
    pub s: Vec<f64>,
    pub ctx: Vec<f64>,
    pub logits: Vec<f64>,
    x: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
    s_next: Vec<f64>,
    attn: Vec<f64>,
}

/// One decoder step: feed `[E_t(prev); ctx_prev]`, update the state, attend,
/// and project `[s; ctx]` to logits.
#[allow(clippy::too_many_arguments)]
fn decoder_step(
    v: &View<'_>,
    d: Dims,
    prev: u32,
    s_prev: &[f64],
    ctx_prev: &[f64],
    enc: &[f64],
    x: &mut [f64],
    trace: GruTrace<'_>,
    attn: &mut [f64],
    ctx: &mut [f64],
    logits: &mut [f64],
    masks: Option<(&[f64], &[f64])>,
) {
    let (e, h) = (d.embed, d.hidden);
    let p = prev as usize;
    x[..e].copy_from_slice(&v.tgt_embed[p * e..(p + 1) * e]);
    if let Some((emb, _)) = masks {
        x[..e].iter_mut().zip(emb).for_each(|(a, m)| *a *= m);
    }
    x[e..].copy_from_slice(ctx_prev);
    let GruTrace { z, r, n, rh, h: s } = trace;
    gru_forward(&v.dec, h, x, s_prev, GruTrace { z, r, n, rh, h: s });
    let s: &[f64] = s;
    gemv(enc, h, s, attn);
    softmax_in_place(attn);
    ctx.iter_mut().for_each(|c| *c = 0.0);
    for (j, &a) in attn.iter().enumerate() {
        axpy(a, &enc[j * h..(j + 1) * h], ctx);
    }
    let masked;
    let (s, ctx): (&[f64], &[f64]) = match masks {
        Some((_, out)) => {
            masked = masked_concat(s, ctx, out);
            (&masked[..h], &masked[h..])
        }
        None => (s, ctx),
    };
    let mut from_ctx = vec![0.0; logits.len()];
    gemv(v.out_w, 2 * h, s, logits);
    gemv(&v.out_w[h..], 2 * h, ctx, &mut from_ctx);
    for ((l, b), c) in logits.iter_mut().zip(v.out_b).zip(&from_ctx) {
        *l = *b + *l + c;
    }
}

/// `[s; ctx] * mask`, elementwise.
fn masked_concat(s: &[f64], ctx: &[f64], mask: &[f64]) -> Vec<f64> {
    s.iter().chain(ctx).zip(mask).map(|(a, m)| a * m).collect()
}

/// Inverted-dropout masks for one pair; every entry is 0 or `1 / (1 - p)`.
/// Empty vectors mean no dropout.
#[derive(Clone, Debug, Default)]
pub(crate) struct Masks {
    /// `S x E`, over the source embeddings.
    enc: Vec<f64>,
    /// `T x E`, over the target embeddings fed to the decoder.
    dec: Vec<f64>,
    /// `T x 2H`, over `[s; ctx]` before the output projection.
    out: Vec<f64>,
}

impl Masks {
    pub(crate) fn draw(
        rng: &mut ChaCha8Rng,
        d: Dims,
        src_len: usize,
        tgt_len: usize,
        p: f64,
    ) -> Self {
        let keep = 1.0 / (1.0 - p);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect()
        };
        let enc = draw(src_len * d.embed);
        let dec = draw(tgt_len * d.embed);
        let out = draw(tgt_len * 2 * d.hidden);
        Masks { enc, dec, out }
    }

    fn is_empty(&self) -> bool {
        self.enc.is_empty()
    }
}

/// Gate activations of one encoder direction, in processing order.
#[derive(Clone, Debug)]
struct EncTrace {
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
    /// `(S + 1) x k`; row 0 is the zero initial state, row `i + 1` the state
    /// after step `i`.
    h: Vec<f64>,
    /// Inputs in processing order, `S x E`.
    x: Vec<f64>,
}

/// Runs one encoder direction of width `k` over the inputs `xs` (`S x E`).
/// The right-to-left cell reads position `S - 1 - i` at step `i`.
fn run_direction(
    g: &GruView<'_>,
    k: usize,
    xs: &[f64],
    e: usize,
    sl: usize,
    reverse: bool,
) -> EncTrace {
    let mut t = EncTrace {
        z: vec![0.0; sl * k],
        r: vec![0.0; sl * k],
        n: vec![0.0; sl * k],
        rh: vec![0.0; sl * k],
        h: vec![0.0; (sl + 1) * k],
        x: vec![0.0; sl * e],
    };
    for i in 0..sl {
        let p = if reverse { sl - 1 - i } else { i };
        t.x[i * e..(i + 1) * e].copy_from_slice(&xs[p * e..(p + 1) * e]);
        let (prev, next) = t.h.split_at_mut((i + 1) * k);
        let r = i * k..(i + 1) * k;
        gru_forward(
            g,
            k,
            &t.x[i * e..(i + 1) * e],
            &prev[i * k..],
            GruTrace {
                z: &mut t.z[r.clone()],
                r: &mut t.r[r.clone()],
                n: &mut t.n[r.clone()],
                rh: &mut t.rh[r],
                h: &mut next[..k],
            },
        );
    }
    t
}

/// Both encoder directions and the concatenated states `[fwd_j; bwd_j]`
/// (`S x H`) that the decoder attends over.
#[derive(Clone, Debug)]
struct Encoder {
    f: EncTrace,
    b: EncTrace,
    states: Vec<f64>,
}

fn run_encoder(v: &View<'_>, d: Dims, xs: &[f64], sl: usize) -> Encoder {
    let (hf, hb) = d.enc_split();
    let h = d.hidden;
    let f = run_direction(&v.enc_f, hf, xs, d.embed, sl, false);
    let b = run_direction(&v.enc_b, hb, xs, d.embed, sl, true);
    let mut states = vec![0.0; sl * h];
    for (j, row) in states.chunks_exact_mut(h).enumerate() {
        row[..hf].copy_from_slice(&f.h[(j + 1) * hf..(j + 2) * hf]);
        row[hf..].copy_from_slice(&b.h[(sl - j) * hb..(sl - j + 1) * hb]);
    }
    Encoder { f, b, states }
}

/// Decoder start state: the final state of each encoder direction.
fn decoder_init(d: Dims, enc: &[f64], sl: usize) -> Vec<f64> {
    let (hf, h) = (d.enc_split().0, d.hidden);
    let mut s = enc[(sl - 1) * h..(sl - 1) * h + hf].to_vec();
    s.extend_from_slice(&enc[hf..h]);
    s
}

/// Encoder states for `src`, flattened `S x H`.
pub(crate) fn encode(params: &ModelParams, src: &[u32]) -> Vec<f64> {
    let d = params.dims();
    let v = params.view();
    let e = d.embed;
    let mut xs = Vec::with_capacity(src.len() * e);
    for &id in src {
        xs.extend_from_slice(&v.src_embed[id as usize * e..(id as usize + 1) * e]);
    }
    run_encoder(&v, d, &xs, src.len()).states
}

impl DecoderState {
    /// Initial state: last encoder state, zero context.
    pub(crate) fn start(d: Dims, enc: &[f64], src_len: usize) -> Self {
        let h = d.hidden;
        DecoderState {
            s: decoder_init(d, enc, src_len),
            ctx: vec![0.0; h],
            logits: vec![0.0; d.vocab],
            x: vec![0.0; d.decoder_input()],
            z: vec![0.0; h],
            r: vec![0.0; h],
            n: vec![0.0; h],
            rh: vec![0.0; h],
            s_next: vec![0.0; h],
            attn: vec![0.0; src_len],
        }
    }

    /// Advances one step after emitting `prev`; logits are left in `self.logits`.
    pub(crate) fn step(&mut self, params: &ModelParams, enc: &[f64], prev: u32) {
        let d = params.dims();
        let v = params.view();
        let ctx_prev = self.ctx.clone();
        decoder_step(
            &v,
            d,
            prev,
            &self.s,
            &ctx_prev,
            enc,
            &mut self.x,
            GruTrace {
                z: &mut self.z,
                r: &mut self.r,
                n: &mut self.n,
                rh: &mut self.rh,
                h: &mut self.s_next,
            },
            &mut self.attn,
            &mut self.ctx,
            &mut self.logits,
            None,
        );
        core::mem::swap(&mut self.s, &mut self.s_next);
    }
}

/// Teacher-forced pass over one (source, target) pair, with everything the
/// backward pass needs.
#[derive(Clone, Debug)]
pub struct Forward {
    dims: Dims,
    src: Vec<u32>,
    tgt: Vec<u32>,
    enc: Encoder,
    dec_x: Vec<f64>,
    dec_z: Vec<f64>,
    dec_r: Vec<f64>,
    dec_n: Vec<f64>,
    dec_rh: Vec<f64>,
    /// `(T + 1) x H`, row 0 is the decoder start state.
    dec_s: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    /// `log Σ exp` of each logit row.
    lse: Vec<f64>,
    masks: Masks,
}

impl Forward {
    pub fn steps(&self) -> usize {
        self.tgt.len()
    }

    /// Output distribution at step `t` (predicting `tgt[t]`).
    pub fn prob_row(&self, t: usize) -> &[f64] {
        let v = self.dims.vocab;
        &self.probs[t * v..(t + 1) * v]
    }

    pub fn logit_row(&self, t: usize) -> &[f64] {
        let v = self.dims.vocab;
        &self.logits[t * v..(t + 1) * v]
    }

    /// Attention weights over the source positions at step `t`.
    pub fn attention_row(&self, t: usize) -> &[f64] {
        let s = self.src.len();
        &self.attn[t * s..(t + 1) * s]
    }

    /// Summed negative log-likelihood of the target.
    pub fn nll(&self) -> f64 {
        (0..self.steps())
            .map(|t| self.lse[t] - self.logit_row(t)[self.tgt[t] as usize])
            .sum()
    }

    /// Positions whose argmax equals the target symbol.
    pub fn n_correct(&self) -> usize {
        (0..self.steps())
            .filter(|&t| argmax(self.prob_row(t)) == self.tgt[t] as usize)
            .count()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

fn check_ids(ids: &[u32], vocab: usize, what: &str) -> Result<(), Seq2SeqError> {
    if ids.is_empty() {
        return Err(Seq2SeqError::Shape(format!("{what} sequence is empty")));
    }
    if let Some(bad) = ids.iter().find(|&&id| id as usize >= vocab) {
        return Err(Seq2SeqError::Shape(format!(
            "{what} id {bad} outside vocabulary of {vocab}"
        )));
    }
    Ok(())
}

/// Teacher-forced forward pass. The decoder is fed `BOS, tgt[0], ...,
/// tgt[T-2]` and predicts `tgt`. In a vocabulary too small to hold BOS the
/// last id stands in for it.
pub fn forward(params: &ModelParams, src: &[u32], tgt: &[u32]) -> Result<Forward, Seq2SeqError> {
    forward_masked(params, src, tgt, Masks::default())
}

pub(crate) fn forward_masked(
    params: &ModelParams,
    src: &[u32],
    tgt: &[u32],
    masks: Masks,
) -> Result<Forward, Seq2SeqError> {
    let d = params.dims();
    check_ids(src, d.vocab, "source")?;
    check_ids(tgt, d.vocab, "target")?;
    let (e, h, vv) = (d.embed, d.hidden, d.vocab);
    let (sl, tl) = (src.len(), tgt.len());
    let v = params.view();

    let mut enc_x = vec![0.0; sl * e];
    for (j, &id) in src.iter().enumerate() {
        let x = &mut enc_x[j * e..(j + 1) * e];
        x.copy_from_slice(&v.src_embed[id as usize * e..(id as usize + 1) * e]);
        if !masks.is_empty() {
            x.iter_mut()
                .zip(&masks.enc[j * e..])
                .for_each(|(a, m)| *a *= m);
        }
    }
    let enc = run_encoder(&v, d, &enc_x, sl);
    let enc_states = &enc.states[..];

    let di = d.decoder_input();
    let mut dec_x = vec![0.0; tl * di];
    let mut dec_z = vec![0.0; tl * h];
    let mut dec_r = vec![0.0; tl * h];
    let mut dec_n = vec![0.0; tl * h];
    let mut dec_rh = vec![0.0; tl * h];
    let mut dec_s = vec![0.0; (tl + 1) * h];
    dec_s[..h].copy_from_slice(&decoder_init(d, enc_states, sl));
    let mut attn = vec![0.0; tl * sl];
    let mut ctx = vec![0.0; tl * h];
    let mut logits = vec![0.0; tl * vv];
    let zeros = vec![0.0; h];
    for t in 0..tl {
        let prev = if t == 0 {
            BOS.min(vv as u32 - 1)
        } else {
            tgt[t - 1]
        };
        let (s_done, s_rest) = dec_s.split_at_mut((t + 1) * h);
        let (c_done, c_rest) = ctx.split_at_mut(t * h);
        let ctx_prev = if t == 0 {
            &zeros[..]
        } else {
            &c_done[(t - 1) * h..]
        };
        let r = t * h..(t + 1) * h;
        decoder_step(
            &v,
            d,
            prev,
            &s_done[t * h..],
            ctx_prev,
            enc_states,
            &mut dec_x[t * di..(t + 1) * di],
            GruTrace {
                z: &mut dec_z[r.clone()],
                r: &mut dec_r[r.clone()],
                n: &mut dec_n[r.clone()],
                rh: &mut dec_rh[r],
                h: &mut s_rest[..h],
            },
            &mut attn[t * sl..(t + 1) * sl],
            &mut c_rest[..h],
            &mut logits[t * vv..(t + 1) * vv],
            (!masks.is_empty()).then(|| {
                (
                    &masks.dec[t * e..(t + 1) * e],
                    &masks.out[t * 2 * h..(t + 1) * 2 * h],
                )
            }),
        );
    }
    let mut probs = logits.clone();
    let lse = probs.chunks_exact_mut(vv).map(softmax_in_place).collect();

    Ok(Forward {
        dims: d,
        src: src.to_vec(),
        tgt: tgt.to_vec(),
        enc,
        dec_x,
        dec_z,
        dec_r,
        dec_n,
        dec_rh,
        dec_s,
        attn,
        ctx,
        logits,
        probs,
        lse,
        masks,
    })
}

/// Adds `scale * d(nll)/d(params)` into `grads`.
fn backward(params: &ModelParams, f: &Forward, scale: f64, grads: &mut ModelParams) {
    let d = params.dims();
    let (e, h, vv) = (d.embed, d.hidden, d.vocab);
    let di = d.decoder_input();
    let (sl, tl) = (f.src.len(), f.tgt.len());
    let v = params.view();
    let mut g = grads.view_mut();
    let mut d_rh = vec![0.0; h];
    let mut dpre_dec = vec![0.0; tl * 3 * h];
    let mut dlogits_all = vec![0.0; tl * vv];
    let mut sc_used = vec![0.0; tl * 2 * h];

    let enc_states = &f.enc.states[..];
    let mut d_enc = vec![0.0; sl * h];
    let mut ds_rec = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    let mut d_sc = vec![0.0; 2 * h];
    let mut ds = vec![0.0; h];
    let mut dc = vec![0.0; h];
    let mut da = vec![0.0; sl];
    let mut dx = vec![0.0; di];
    let mut ds_prev = vec![0.0; h];
    let dropout = !f.masks.is_empty();

    for t in (0..tl).rev() {
        let s_t = &f.dec_s[(t + 1) * h..(t + 2) * h];
        let c_t = &f.ctx[t * h..(t + 1) * h];
        let a_t = &f.attn[t * sl..(t + 1) * sl];
        let out_mask = &f.masks.out[if dropout {
            t * 2 * h..(t + 1) * 2 * h
        } else {
            0..0
        }];
        let used = &mut sc_used[t * 2 * h..(t + 1) * 2 * h];
        used[..h].copy_from_slice(s_t);
        used[h..].copy_from_slice(c_t);
        if dropout {
            used.iter_mut().zip(out_mask).for_each(|(a, m)| *a *= m);
        }

        let dlogits = &mut dlogits_all[t * vv..(t + 1) * vv];
        dlogits.copy_from_slice(f.prob_row(t));
        dlogits[f.tgt[t] as usize] -= 1.0;
        dlogits.iter_mut().for_each(|dl| *dl *= scale);
        d_sc.iter_mut().for_each(|x| *x = 0.0);
        gemv_t_add(v.out_w, 2 * h, dlogits, &mut d_sc);
        if dropout {
            d_sc.iter_mut().zip(out_mask).for_each(|(a, m)| *a *= m);
        }
        for k in 0..h {
            ds[k] = d_sc[k] + ds_rec[k];
            dc[k] = d_sc[h + k] + dc_carry[k];
        }

        // Context is Σ a_j h_j with a = softmax(s · h_j).
        gemv(enc_states, h, &dc, &mut da);
        let mut weighted = 0.0;
        for j in 0..sl {
            weighted += a_t[j] * da[j];
        }
        for j in 0..sl {
            let de = a_t[j] * (da[j] - weighted);
            let hj = &enc_states[j * h..(j + 1) * h];
            axpy(de, hj, &mut ds);
            let dj = &mut d_enc[j * h..(j + 1) * h];
            axpy(a_t[j], &dc, dj);
            axpy(de, s_t, dj);
        }

        let r = t * h..(t + 1) * h;
        gru_backward(
            &v.dec,
            h,
            &f.dec_s[t * h..(t + 1) * h],
            GruSaved {
                z: &f.dec_z[r.clone()],
                r: &f.dec_r[r.clone()],
                n: &f.dec_n[r],
            },
            &ds,
            &mut dpre_dec[t * 3 * h..(t + 1) * 3 * h],
            &mut dx,
            &mut ds_prev,
            &mut d_rh,
        );
        let prev = if t == 0 {
            BOS.min(vv as u32 - 1)
        } else {
            f.tgt[t - 1]
        } as usize;
        if dropout {
            dx[..e]
                .iter_mut()
                .zip(&f.masks.dec[t * e..])
                .for_each(|(a, m)| *a *= m);
        }
        axpy(1.0, &dx[..e], &mut g.tgt_embed[prev * e..(prev + 1) * e]);
        dc_carry.copy_from_slice(&dx[e..]);
        ds_rec.copy_from_slice(&ds_prev);
    }
    for (k, b) in g.out_b.iter_mut().enumerate() {
        for t in (0..tl).rev() {
            *b += dlogits_all[t * vv + k];
        }
    }
    add_outer(g.out_w, 2 * h, &dlogits_all, vv, &sc_used, 2 * h);
    gru_weight_grads(
        &mut g.dec,
        h,
        &dpre_dec,
        &f.dec_x,
        &f.dec_s[..tl * h],
        &f.dec_rh,
    );
    // The decoder starts from the final state of each direction.
    let (hf, hb) = d.enc_split();
    axpy(
        1.0,
        &ds_rec[..hf],
        &mut d_enc[(sl - 1) * h..(sl - 1) * h + hf],
    );
    axpy(1.0, &ds_rec[hf..], &mut d_enc[hf..h]);

    let mut dxs = vec![0.0; sl * e];
    let dir = |k, off, reverse| DirGrad {
        k,
        off,
        h,
        sl,
        e,
        reverse,
    };
    backward_direction(
        &v.enc_f,
        &mut g.enc_f,
        dir(hf, 0, false),
        &f.enc.f,
        &d_enc,
        &mut dxs,
    );
    backward_direction(
        &v.enc_b,
        &mut g.enc_b,
        dir(hb, hf, true),
        &f.enc.b,
        &d_enc,
        &mut dxs,
    );
    for j in (0..sl).rev() {
        let dx = &mut dxs[j * e..(j + 1) * e];
        if dropout {
            dx.iter_mut()
                .zip(&f.masks.enc[j * e..])
                .for_each(|(a, m)| *a *= m);
        }
        let id = f.src[j] as usize;
        axpy(1.0, dx, &mut g.src_embed[id * e..(id + 1) * e]);
    }
}

/// Shape of one encoder direction inside the concatenated states.
#[derive(Clone, Copy)]
struct DirGrad {
    k: usize,
    off: usize,
    h: usize,
    sl: usize,
    e: usize,
    reverse: bool,
}

/// Backpropagates one encoder direction from the gradient of its slice
/// `d_enc[j][off..off + k]` of every position; input gradients are added by
/// position into `dxs`.
fn backward_direction(
    g: &GruView<'_>,
    gg: &mut GruViewMut<'_>,
    s: DirGrad,
    tr: &EncTrace,
    d_enc: &[f64],
    dxs: &mut [f64],
) {
    let DirGrad {
        k,
        off,
        h,
        sl,
        e,
        reverse,
    } = s;
    if k == 0 {
        return;
    }
    let (mut dh, mut dh_rec, mut dh_prev, mut d_rh) =
        (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut dx = vec![0.0; e];
    let mut dpre = vec![0.0; sl * 3 * k];
    for i in (0..sl).rev() {
        let p = if reverse { sl - 1 - i } else { i };
        for q in 0..k {
            dh[q] = d_enc[p * h + off + q] + dh_rec[q];
        }
        let r = i * k..(i + 1) * k;
        gru_backward(
            g,
            k,
            &tr.h[i * k..(i + 1) * k],
            GruSaved {
                z: &tr.z[r.clone()],
                r: &tr.r[r.clone()],
                n: &tr.n[r],
            },
            &dh,
            &mut dpre[i * 3 * k..(i + 1) * 3 * k],
            &mut dx,
            &mut dh_prev,
            &mut d_rh,
        );
        axpy(1.0, &dx, &mut dxs[p * e..(p + 1) * e]);
        dh_rec.copy_from_slice(&dh_prev);
    }
    gru_weight_grads(gg, k, &dpre, &tr.x, &tr.h[..sl * k], &tr.rh);
}

/// Padded mini-batch; rows are right-padded with PAD.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub src: Vec<Vec<u32>>,
    pub tgt: Vec<Vec<u32>>,
}

impl Batch {
    /// Pads every source row and every target row to the longest in the batch.
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a [u32], &'a [u32])>,
    {
        let (mut src, mut tgt): (Vec<Vec<u32>>, Vec<Vec<u32>>) = pairs
            .into_iter()
            .map(|(s, t)| (s.to_vec(), t.to_vec()))
            .unzip();
        let max_s = src.iter().map(Vec::len).max().unwrap_or(0);
        let max_t = tgt.iter().map(Vec::len).max().unwrap_or(0);
        src.iter_mut().for_each(|r| r.resize(max_s, PAD));
        tgt.iter_mut().for_each(|r| r.resize(max_t, PAD));
        Batch { src, tgt }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// The unpadded prefix; PAD may only appear as trailing padding.
fn unpad<'a>(row: &'a [u32], what: &str, i: usize) -> Result<&'a [u32], Seq2SeqError> {
    let len = row.iter().position(|&id| id == PAD).unwrap_or(row.len());
    if row[len..].iter().any(|&id| id != PAD) {
        return Err(Seq2SeqError::Shape(format!(
            "{what} row {i} has interior padding"
        )));
    }
    Ok(&row[..len])
}

/// Summed NLL of the batch, gradients of the summed NLL scaled by `scale`
/// added into `grads`. With `dropout`, masks are drawn row by row from the
/// given stream.
pub(crate) fn accumulate(
    params: &ModelParams,
    batch: &Batch,
    grads: &mut ModelParams,
    scale: f64,
    mut dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> Result<f64, Seq2SeqError> {
    let mut nll = 0.0;
    for (i, (s, t)) in batch.src.iter().zip(&batch.tgt).enumerate() {
        let s = unpad(s, "source", i)?;
        let t = unpad(t, "target", i)?;
        let masks = match dropout.as_mut() {
            Some((rng, p)) => Masks::draw(rng, params.dims(), s.len(), t.len(), *p),
            None => Masks::default(),
        };
        let f = forward_masked(params, s, t, masks)?;
        nll += f.nll();
        backward(params, &f, scale, grads);
    }
    Ok(nll)
}

pub(crate) fn n_target_tokens(batch: &Batch) -> usize {
    batch
        .tgt
        .iter()
        .map(|t| t.iter().filter(|&&id| id != PAD).count())
        .sum()
}

/// Mean cross-entropy per non-PAD target symbol and its gradient.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &Batch,
) -> Result<(f64, ModelParams), Seq2SeqError> {
    if batch.is_empty() || batch.src.len() != batch.tgt.len() {
        return Err(Seq2SeqError::Shape(format!(
            "batch with {} sources and {} targets",
            batch.src.len(),
            batch.tgt.len()
        )));
    }
    let n = n_target_tokens(batch);
    if n == 0 {
        return Err(Seq2SeqError::Shape("batch has no target symbols".into()));
    }
    let mut grads = ModelParams::zeros(params.dims());
    let scale = 1.0 / n as f64;
    let nll = accumulate(params, batch, &mut grads, scale, None)?;
    Ok((nll * scale, grads))
}
