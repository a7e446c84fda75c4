//! From-scratch self-attention encoder in f64 with hand-written
//! backpropagation.
//!
//! Layout per layer: multi-head self-attention with residual then layer
//! norm, position-wise feed-forward (tanh-form gelu) with residual then
//! layer norm. The start marker's final representation feeds a two-layer
//! scoring head producing a single entailment logit.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.max_len == 0 || self.n_layers == 0 || self.d_ff == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must divide evenly into {} heads",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bq: Array1<f64>,
    pub bk: Array1<f64>,
    pub bv: Array1<f64>,
    pub bo: Array1<f64>,
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub dims: ModelDims,
    pub tok: Array2<f64>,
    pub pos: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_w1: Array2<f64>,
    pub head_b1: Array1<f64>,
    pub head_w2: Array1<f64>,
    pub head_b2: f64,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

impl Params {
    pub fn init(dims: ModelDims, rng: &mut ChaCha8Rng) -> Result<Params> {
        dims.validate()?;
        let d = dims.d_model;
        let f = dims.d_ff;
        let emb = |rng: &mut ChaCha8Rng, rows: usize| {
            Array2::from_shape_fn((rows, d), |_| rng.random_range(-0.1..0.1))
        };
        let tok = emb(rng, dims.vocab);
        let pos = emb(rng, dims.max_len);
        let mut layers = Vec::with_capacity(dims.n_layers);
        for _ in 0..dims.n_layers {
            layers.push(LayerParams {
                wq: xavier(rng, d, d),
                wk: xavier(rng, d, d),
                wv: xavier(rng, d, d),
                wo: xavier(rng, d, d),
                bq: Array1::zeros(d),
                bk: Array1::zeros(d),
                bv: Array1::zeros(d),
                bo: Array1::zeros(d),
                ln1_g: Array1::ones(d),
                ln1_b: Array1::zeros(d),
                w1: xavier(rng, d, f),
                b1: Array1::zeros(f),
                w2: xavier(rng, f, d),
                b2: Array1::zeros(d),
                ln2_g: Array1::ones(d),
                ln2_b: Array1::zeros(d),
            });
        }
        Ok(Params {
            dims,
            tok,
            pos,
            layers,
            head_w1: xavier(rng, d, d),
            head_b1: Array1::zeros(d),
            head_w2: xavier(rng, d, 1).column(0).to_owned(),
            head_b2: 0.0,
        })
    }

    pub fn zeros_like(other: &Params) -> Params {
        let d = other.dims.d_model;
        let f = other.dims.d_ff;
        Params {
            dims: other.dims,
            tok: Array2::zeros(other.tok.raw_dim()),
            pos: Array2::zeros(other.pos.raw_dim()),
            layers: other
                .layers
                .iter()
                .map(|_| LayerParams {
                    wq: Array2::zeros((d, d)),
                    wk: Array2::zeros((d, d)),
                    wv: Array2::zeros((d, d)),
                    wo: Array2::zeros((d, d)),
                    bq: Array1::zeros(d),
                    bk: Array1::zeros(d),
                    bv: Array1::zeros(d),
                    bo: Array1::zeros(d),
                    ln1_g: Array1::zeros(d),
                    ln1_b: Array1::zeros(d),
                    w1: Array2::zeros((d, f)),
                    b1: Array1::zeros(f),
                    w2: Array2::zeros((f, d)),
                    b2: Array1::zeros(d),
                    ln2_g: Array1::zeros(d),
                    ln2_b: Array1::zeros(d),
                })
                .collect(),
            head_w1: Array2::zeros((d, d)),
            head_b1: Array1::zeros(d),
            head_w2: Array1::zeros(d),
            head_b2: 0.0,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.visit_mut(|v, _| *v *= factor);
    }

    pub fn fill(&mut self, value: f64) {
        self.visit_mut(|v, _| *v = value);
    }

    /// Visit every parameter in canonical order. The flag marks values that
    /// weight decay applies to (matrices and embeddings, not biases or
    /// layer-norm affines).
    pub fn visit_mut(&mut self, mut f: impl FnMut(&mut f64, bool)) {
        for v in self.tok.iter_mut() {
            f(v, true);
        }
        for v in self.pos.iter_mut() {
            f(v, true);
        }
        for layer in &mut self.layers {
            for m in [&mut layer.wq, &mut layer.wk, &mut layer.wv, &mut layer.wo] {
                for v in m.iter_mut() {
                    f(v, true);
                }
            }
            for b in [&mut layer.bq, &mut layer.bk, &mut layer.bv, &mut layer.bo] {
                for v in b.iter_mut() {
                    f(v, false);
                }
            }
            for v in layer.ln1_g.iter_mut() {
                f(v, false);
            }
            for v in layer.ln1_b.iter_mut() {
                f(v, false);
            }
            for v in layer.w1.iter_mut() {
                f(v, true);
            }
            for v in layer.b1.iter_mut() {
                f(v, false);
            }
            for v in layer.w2.iter_mut() {
                f(v, true);
            }
            for v in layer.b2.iter_mut() {
                f(v, false);
            }
            for v in layer.ln2_g.iter_mut() {
                f(v, false);
            }
            for v in layer.ln2_b.iter_mut() {
                f(v, false);
            }
        }
        for v in self.head_w1.iter_mut() {
            f(v, true);
        }
        for v in self.head_b1.iter_mut() {
            f(v, false);
        }
        for v in self.head_w2.iter_mut() {
            f(v, true);
        }
        f(&mut self.head_b2, false);
    }

    pub fn flat_len(&self) -> usize {
        let mut n = 0;
        let mut copy = self.clone();
        copy.visit_mut(|_, _| n += 1);
        n
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut copy = self.clone();
        copy.visit_mut(|v, _| out.push(*v));
        out
    }

    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        let mut copy = self.clone();
        copy.visit_mut(|_, decay| out.push(decay));
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut i = 0;
        let mut overflow = false;
        self.visit_mut(|v, _| {
            if i < flat.len() {
                *v = flat[i];
            } else {
                overflow = true;
            }
            i += 1;
        });
        if overflow || i != flat.len() {
            return Err(Error::Data(format!(
                "parameter count mismatch: model has {i}, provided {}",
                flat.len()
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy on a logit:
/// max(z, 0) - z*y + ln(1 + exp(-|z|)).
pub fn bce_with_logits(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_prime(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let n = x.nrows();
    let d = x.ncols() as f64;
    let mut out = Array2::zeros(x.raw_dim());
    let mut xhat = Array2::zeros(x.raw_dim());
    let mut rstd = Array1::zeros(n);
    for r in 0..n {
        let row = x.row(r);
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for c in 0..x.ncols() {
            let h = (x[[r, c]] - mean) * rs;
            xhat[[r, c]] = h;
            out[[r, c]] = g[c] * h + b[c];
        }
    }
    (out, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dout: &Array2<f64>,
    g: &Array1<f64>,
    cache: &LnCache,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    let n = dout.nrows();
    let d = dout.ncols();
    let df = d as f64;
    let mut dx = Array2::zeros(dout.raw_dim());
    for r in 0..n {
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for c in 0..d {
            let dxhat = dout[[r, c]] * g[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * cache.xhat[[r, c]];
            dg[c] += dout[[r, c]] * cache.xhat[[r, c]];
            db[c] += dout[[r, c]];
        }
        mean_dxhat /= df;
        mean_dxhat_xhat /= df;
        for c in 0..d {
            let dxhat = dout[[r, c]] * g[c];
            dx[[r, c]] =
                cache.rstd[r] * (dxhat - mean_dxhat - cache.xhat[[r, c]] * mean_dxhat_xhat);
        }
    }
    dx
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

struct LayerCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    concat: Array2<f64>,
    ln1: LnCache,
    x_mid: Array2<f64>,
    u: Array2<f64>,
    g: Array2<f64>,
    ln2: LnCache,
}

pub struct ForwardCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    cls: Array1<f64>,
    z1: Array1<f64>,
    a1: Array1<f64>,
    pub logit: f64,
}

/// Run the encoder over a token id sequence, producing the entailment logit
/// and the activations needed for a backward pass.
pub fn forward(params: &Params, ids: &[usize]) -> Result<ForwardCache> {
    let dims = &params.dims;
    if ids.is_empty() {
        return Err(Error::InvalidArgument("empty token sequence".into()));
    }
    if ids.len() > dims.max_len {
        return Err(Error::InvalidArgument(format!(
            "sequence length {} exceeds max_len {}",
            ids.len(),
            dims.max_len
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= dims.vocab) {
        return Err(Error::InvalidArgument(format!(
            "token id {bad} outside vocabulary of {}",
            dims.vocab
        )));
    }

    let l = ids.len();
    let d = dims.d_model;
    let dh = dims.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = Array2::zeros((l, d));
    for (t, &id) in ids.iter().enumerate() {
        for c in 0..d {
            x[[t, c]] = params.tok[[id, c]] + params.pos[[t, c]];
        }
    }

    let mut layer_caches = Vec::with_capacity(dims.n_layers);
    for layer in &params.layers {
        let x_in = x.clone();
        let q = x.dot(&layer.wq) + &layer.bq;
        let k = x.dot(&layer.wk) + &layer.bk;
        let v = x.dot(&layer.wv) + &layer.bv;

        let mut concat = Array2::zeros((l, d));
        let mut probs = Vec::with_capacity(dims.n_heads);
        for h in 0..dims.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols).to_owned();
            let kh = k.slice(cols).to_owned();
            let vh = v.slice(cols).to_owned();
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|s| s * scale);
            softmax_rows(&mut scores);
            let ctx = scores.dot(&vh);
            concat.slice_mut(cols).assign(&ctx);
            probs.push(scores);
        }
        let attn = concat.dot(&layer.wo) + &layer.bo;
        let r1 = &x_in + &attn;
        let (x_mid, ln1) = layer_norm(&r1, &layer.ln1_g, &layer.ln1_b);

        let u = x_mid.dot(&layer.w1) + &layer.b1;
        let g = u.mapv(gelu);
        let f = g.dot(&layer.w2) + &layer.b2;
        let r2 = &x_mid + &f;
        let (x_out, ln2) = layer_norm(&r2, &layer.ln2_g, &layer.ln2_b);

        layer_caches.push(LayerCache {
            x_in,
            q,
            k,
            v,
            probs,
            concat,
            ln1,
            x_mid: x_mid.clone(),
            u,
            g,
            ln2,
        });
        x = x_out;
    }

    let cls = x.row(0).to_owned();
    let z1 = cls.dot(&params.head_w1) + &params.head_b1;
    let a1 = z1.mapv(gelu);
    let logit = a1.dot(&params.head_w2) + params.head_b2;
    if !logit.is_finite() {
        return Err(Error::Numeric("non-finite logit in forward pass".into()));
    }

    Ok(ForwardCache {
        ids: ids.to_vec(),
        layers: layer_caches,
        cls,
        z1,
        a1,
        logit,
    })
}

/// Accumulate gradients for one sample into `grads` given dLoss/dlogit.
pub fn backward(params: &Params, cache: &ForwardCache, dlogit: f64, grads: &mut Params) {
    let dims = &params.dims;
    let l = cache.ids.len();
    let d = dims.d_model;
    let dh = dims.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // scoring head
    grads.head_w2.scaled_add(dlogit, &cache.a1);
    grads.head_b2 += dlogit;
    let da1 = cache.z1.mapv(gelu_prime) * &params.head_w2.mapv(|w| w * dlogit);
    for r in 0..d {
        for c in 0..d {
            grads.head_w1[[r, c]] += cache.cls[r] * da1[c];
        }
    }
    grads.head_b1.scaled_add(1.0, &da1);
    let dcls = params.head_w1.dot(&da1);

    let mut dx = Array2::zeros((l, d));
    dx.row_mut(0).assign(&dcls);

    for li in (0..dims.n_layers).rev() {
        let layer = &params.layers[li];
        let lc = &cache.layers[li];
        let gl = &mut grads.layers[li];

        let dr2 = layer_norm_backward(&dx, &layer.ln2_g, &lc.ln2, &mut gl.ln2_g, &mut gl.ln2_b);
        // r2 = x_mid + ffn(x_mid)
        let df = &dr2;
        let mut dx_mid = dr2.clone();
        gl.w2.scaled_add(1.0, &lc.g.t().dot(df));
        gl.b2.scaled_add(1.0, &df.sum_axis(Axis(0)));
        let dg = df.dot(&layer.w2.t());
        let du = &dg * &lc.u.mapv(gelu_prime);
        gl.w1.scaled_add(1.0, &lc.x_mid.t().dot(&du));
        gl.b1.scaled_add(1.0, &du.sum_axis(Axis(0)));
        dx_mid.scaled_add(1.0, &du.dot(&layer.w1.t()));

        let dr1 =
            layer_norm_backward(&dx_mid, &layer.ln1_g, &lc.ln1, &mut gl.ln1_g, &mut gl.ln1_b);
        // r1 = x_in + attention(x_in)
        let dattn = &dr1;
        let mut dx_in = dr1.clone();
        gl.wo.scaled_add(1.0, &lc.concat.t().dot(dattn));
        gl.bo.scaled_add(1.0, &dattn.sum_axis(Axis(0)));
        let dconcat = dattn.dot(&layer.wo.t());

        let mut dq = Array2::zeros((l, d));
        let mut dk = Array2::zeros((l, d));
        let mut dv = Array2::zeros((l, d));
        for h in 0..dims.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = lc.q.slice(cols).to_owned();
            let kh = lc.k.slice(cols).to_owned();
            let vh = lc.v.slice(cols).to_owned();
            let probs = &lc.probs[h];
            let dctx = dconcat.slice(cols).to_owned();

            let dprobs = dctx.dot(&vh.t());
            dv.slice_mut(cols).assign(&probs.t().dot(&dctx));

            let mut dscores = Array2::zeros((l, l));
            for r in 0..l {
                let p = probs.row(r);
                let dp = dprobs.row(r);
                let dot: f64 = p.iter().zip(dp.iter()).map(|(a, b)| a * b).sum();
                for c in 0..l {
                    dscores[[r, c]] = p[c] * (dp[c] - dot) * scale;
                }
            }
            dq.slice_mut(cols).assign(&dscores.dot(&kh));
            dk.slice_mut(cols).assign(&dscores.t().dot(&qh));
        }

        gl.wq.scaled_add(1.0, &lc.x_in.t().dot(&dq));
        gl.bq.scaled_add(1.0, &dq.sum_axis(Axis(0)));
        dx_in.scaled_add(1.0, &dq.dot(&layer.wq.t()));
        gl.wk.scaled_add(1.0, &lc.x_in.t().dot(&dk));
        gl.bk.scaled_add(1.0, &dk.sum_axis(Axis(0)));
        dx_in.scaled_add(1.0, &dk.dot(&layer.wk.t()));
        gl.wv.scaled_add(1.0, &lc.x_in.t().dot(&dv));
        gl.bv.scaled_add(1.0, &dv.sum_axis(Axis(0)));
        dx_in.scaled_add(1.0, &dv.dot(&layer.wv.t()));

        dx = dx_in;
    }

    for (t, &id) in cache.ids.iter().enumerate() {
        grads.tok.row_mut(id).scaled_add(1.0, &dx.row(t));
        grads.pos.row_mut(t).scaled_add(1.0, &dx.row(t));
    }
}
