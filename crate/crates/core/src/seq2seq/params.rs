use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Seq2SeqError;

pub(crate) const INIT_RANGE: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Dims {
    pub(crate) fn decoder_input(&self) -> usize {
        self.embed + self.hidden
    }

    /// Widths of the left-to-right and right-to-left encoder cells. Their
    /// states are concatenated, so encoder states are `hidden` wide.
    pub(crate) fn enc_split(&self) -> (usize, usize) {
        (self.hidden - self.hidden / 2, self.hidden / 2)
    }

    /// Block sizes in storage order: source embedding, target embedding,
    /// forward and backward encoder W/U/b, decoder W/U/b, output W/b.
    pub(crate) fn blocks(&self) -> [usize; 13] {
        let (v, e, h) = (self.vocab, self.embed, self.hidden);
        let (hf, hb) = self.enc_split();
        [
            v * e,
            v * e,
            3 * hf * e,
            3 * hf * hf,
            3 * hf,
            3 * hb * e,
            3 * hb * hb,
            3 * hb,
            3 * h * self.decoder_input(),
            3 * h * h,
            3 * h,
            v * 2 * h,
            v,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().sum()
    }
}

/// All weights, flattened block after block in row-major order. Gradients
/// share the same type and layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    dims: Dims,
    data: Vec<f64>,
}

pub(crate) struct GruView<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

pub(crate) struct GruViewMut<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

pub(crate) struct View<'a> {
    pub src_embed: &'a [f64],
    pub tgt_embed: &'a [f64],
    pub enc_f: GruView<'a>,
    pub enc_b: GruView<'a>,
    pub dec: GruView<'a>,
    pub out_w: &'a [f64],
    pub out_b: &'a [f64],
}

pub(crate) struct ViewMut<'a> {
    pub src_embed: &'a mut [f64],
    pub tgt_embed: &'a mut [f64],
    pub enc_f: GruViewMut<'a>,
    pub enc_b: GruViewMut<'a>,
    pub dec: GruViewMut<'a>,
    pub out_w: &'a mut [f64],
    pub out_b: &'a mut [f64],
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        ModelParams {
            dims,
            data: vec![0.0; dims.n_params()],
        }
    }

    /// Uniform initialization in `[-0.08, 0.08]`.
    pub fn init_uniform(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..dims.n_params())
            .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        ModelParams { dims, data }
    }

    pub fn from_flat(dims: Dims, data: Vec<f64>) -> Result<Self, Seq2SeqError> {
        if data.len() != dims.n_params() {
            return Err(Seq2SeqError::Shape(alloc::format!(
                "expected {} parameters, found {}",
                dims.n_params(),
                data.len()
            )));
        }
        Ok(ModelParams { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn view(&self) -> View<'_> {
        let mut rest = self.data.as_slice();
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head
        };
        let [se, te, fw, fu, fb, bw, bu, bb, dw, du, db, ow, ob] = self.dims.blocks();
        View {
            src_embed: take(se),
            tgt_embed: take(te),
            enc_f: GruView {
                w: take(fw),
                u: take(fu),
                b: take(fb),
            },
            enc_b: GruView {
                w: take(bw),
                u: take(bu),
                b: take(bb),
            },
            dec: GruView {
                w: take(dw),
                u: take(du),
                b: take(db),
            },
            out_w: take(ow),
            out_b: take(ob),
        }
    }

    pub(crate) fn view_mut(&mut self) -> ViewMut<'_> {
        let [se, te, fw, fu, fb, bw, bu, bb, dw, du, db, ow, ob] = self.dims.blocks();
        let rest = self.data.as_mut_slice();
        let (src_embed, rest) = rest.split_at_mut(se);
        let (tgt_embed, rest) = rest.split_at_mut(te);
        let (f_w, rest) = rest.split_at_mut(fw);
        let (f_u, rest) = rest.split_at_mut(fu);
        let (f_b, rest) = rest.split_at_mut(fb);
        let (b_w, rest) = rest.split_at_mut(bw);
        let (b_u, rest) = rest.split_at_mut(bu);
        let (b_b, rest) = rest.split_at_mut(bb);
        let (dec_w, rest) = rest.split_at_mut(dw);
        let (dec_u, rest) = rest.split_at_mut(du);
        let (dec_b, rest) = rest.split_at_mut(db);
        let (out_w, out_b) = rest.split_at_mut(ow);
        debug_assert_eq!(out_b.len(), ob);
        ViewMut {
            src_embed,
            tgt_embed,
            enc_f: GruViewMut {
                w: f_w,
                u: f_u,
                b: f_b,
            },
            enc_b: GruViewMut {
                w: b_w,
                u: b_u,
                b: b_b,
            },
            dec: GruViewMut {
                w: dec_w,
                u: dec_u,
                b: dec_b,
            },
            out_w,
            out_b,
        }
    }
}
