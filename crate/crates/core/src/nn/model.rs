use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::Layout;
use super::{ModelError, ModelParams, Token, TokenVector, Vocabulary};
use crate::canon::{validate_code, DfsCode};

/// Per-layer recurrent state, all zeros at the start of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn zeros(p: &ModelParams) -> Self {
        let d = p.dims();
        Self { h: vec![vec![0.0; d.hidden]; d.layers], c: vec![vec![0.0; d.hidden]; d.layers] }
    }

    /// Output of the top layer.
    pub fn top(&self) -> &[f64] {
        self.h.last().unwrap()
    }
}

/// Whether dropout masks are drawn, and from which generator.
pub enum DropoutMode<'a> {
    Eval,
    Train { p: f64, rng: &'a mut ChaCha8Rng },
}

impl DropoutMode<'_> {
    /// Inverted dropout mask of length `n`, or `None` when disabled.
    fn mask(&mut self, n: usize) -> Option<Vec<f64>> {
        match self {
            DropoutMode::Eval => None,
            DropoutMode::Train { p, .. } if *p == 0.0 => None,
            DropoutMode::Train { p, rng } => {
                let keep = 1.0 / (1.0 - *p);
                Some((0..n).map(|_| if rng.gen::<f64>() < *p { 0.0 } else { keep }).collect())
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y += W x` for row-major `W` with `x.len()` columns.
fn matvec_add(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (row, yr) in w.chunks_exact(cols).zip(y.iter_mut()) {
        *yr += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T dy`
fn matvec_t_add(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (row, &g) in w.chunks_exact(cols).zip(dy) {
        if g == 0.0 {
            continue;
        }
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// `dW += dy x^T`
fn outer_add(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &g) in dw.chunks_exact_mut(cols).zip(dy) {
        if g == 0.0 {
            continue;
        }
        for (d, a) in row.iter_mut().zip(x) {
            *d += g * a;
        }
    }
}

struct LayerCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// activated gates i, f, g, o concatenated
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct HeadCache {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
}

struct StepCache {
    hot: Option<[usize; 5]>,
    embed_mask: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    top: Vec<f64>,
    top_mask: Option<Vec<f64>>,
    heads: Vec<HeadCache>,
}

fn run_step(
    p: &ModelParams,
    state: &HiddenState,
    hot: Option<&[usize; 5]>,
    dropout: &mut DropoutMode,
) -> (StepCache, HiddenState) {
    let d = p.dims();
    let lay: &Layout = p.layout();
    let w = p.as_slice();
    let (e, hd) = (d.embed, d.hidden);

    let mut x = w[lay.embed_b..lay.embed_b + e].to_vec();
    if let Some(hot) = hot {
        for &i in hot {
            let row = &w[lay.embed_w + i * e..lay.embed_w + (i + 1) * e];
            for (a, b) in x.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let embed_mask = dropout.mask(e);
    if let Some(m) = &embed_mask {
        for (a, b) in x.iter_mut().zip(m) {
            *a *= b;
        }
    }

    let mut next = HiddenState { h: Vec::with_capacity(d.layers), c: Vec::with_capacity(d.layers) };
    let mut layers = Vec::with_capacity(d.layers);
    for (l, s) in lay.lstm.iter().enumerate() {
        let h_prev = &state.h[l];
        let c_prev = &state.c[l];
        let mut z = w[s.b..s.b + 4 * hd].to_vec();
        matvec_add(&w[s.wx..s.wx + 4 * hd * s.input], &x, &mut z);
        matvec_add(&w[s.wh..s.wh + 4 * hd * hd], h_prev, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hd..3 * hd).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            c[j] = z[hd + j] * c_prev[j] + z[j] * z[2 * hd + j];
            tanh_c[j] = c[j].tanh();
            h[j] = z[3 * hd + j] * tanh_c[j];
        }
        layers.push(LayerCache { x, h_prev: h_prev.clone(), c_prev: c_prev.clone(), gates: z, tanh_c });
        x = h.clone();
        next.h.push(h);
        next.c.push(c);
    }

    let top_mask = dropout.mask(hd);
    if let Some(m) = &top_mask {
        for (a, b) in x.iter_mut().zip(m) {
            *a *= b;
        }
    }
    let heads = lay
        .heads
        .iter()
        .zip(d.vocab_sizes)
        .map(|(s, n)| {
            let hh = d.head_hidden;
            let mut pre = w[s.b1..s.b1 + hh].to_vec();
            matvec_add(&w[s.w1..s.w1 + hh * hd], &x, &mut pre);
            let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let mut logits = w[s.b2..s.b2 + n].to_vec();
            matvec_add(&w[s.w2..s.w2 + n * hh], &act, &mut logits);
            HeadCache { pre, act, logits }
        })
        .collect();
    (StepCache { hot: hot.copied(), embed_mask, layers, top: x, top_mask, heads }, next)
}

fn check_input(p: &ModelParams, state: &HiddenState, x: &TokenVector) -> Result<(), ModelError> {
    let d = p.dims();
    if x.dim() != d.input_dim() {
        return Err(ModelError::Dimension(format!("token vector has {} entries, model expects {}", x.dim(), d.input_dim())));
    }
    if state.h.len() != d.layers
        || state.c.len() != d.layers
        || state.h.iter().chain(&state.c).any(|v| v.len() != d.hidden)
    {
        return Err(ModelError::Dimension("hidden state does not match the model".into()));
    }
    Ok(())
}

/// One recurrent step: returns the next state and the five head logit vectors.
pub fn forward_step(
    p: &ModelParams,
    state: &HiddenState,
    x: &TokenVector,
    dropout: &mut DropoutMode,
) -> Result<(HiddenState, [Vec<f64>; 5]), ModelError> {
    check_input(p, state, x)?;
    let (cache, next) = run_step(p, state, x.hot(), dropout);
    let mut heads = cache.heads.into_iter().map(|h| h.logits);
    Ok((next, std::array::from_fn(|_| heads.next().unwrap())))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Binary cross-entropy of one softmax head against a one-hot target,
/// `-sum_c [y_c log p_c + (1 - y_c) log(1 - p_c)]`, computed from logits.
///
/// `1 - p_c` is formed from the other exponentials rather than by
/// subtraction. When `grad` is given the derivative with respect to the
/// logits is added to it.
pub fn head_bce(logits: &[f64], target: usize, grad: Option<&mut [f64]>) -> f64 {
    let n = logits.len();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + e[i];
    }
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + e[i];
    }
    let s = prefix[n];
    let ln_s = s.ln();
    let floor = s * f64::MIN_POSITIVE;
    let others: Vec<f64> = (0..n).map(|c| (prefix[c] + suffix[c + 1]).max(floor)).collect();

    let mut loss = -(logits[target] - m - ln_s);
    for c in (0..n).filter(|&c| c != target) {
        loss -= others[c].ln() - ln_s;
    }
    if let Some(g) = grad {
        let ratio: Vec<f64> = (0..n).map(|c| if c == target { 0.0 } else { e[c] / others[c] }).collect();
        let r_sum: f64 = ratio.iter().sum();
        for j in 0..n {
            let pj = e[j] / s;
            let hit = if j == target { 1.0 } else { 0.0 };
            g[j] += pj - hit + ratio[j] - pj * r_sum;
        }
    }
    loss.max(0.0)
}

/// Input and target tokens of a teacher-forced pass: SOS then every tuple as
/// input, every tuple then EOS as target.
pub fn teacher_forcing(code: &DfsCode, v: &Vocabulary) -> Result<(Vec<TokenVector>, Vec<Token>), ModelError> {
    validate_code(code.tuples(), Some(v.labels()))
        .map_err(|(position, violation)| ModelError::InvalidCode { position, violation })?;
    let mut targets = Vec::with_capacity(code.len() + 1);
    for t in code.tuples() {
        targets.push(v.tuple_token(t)?);
    }
    targets.push(v.eos_token());
    let mut inputs = vec![TokenVector::sos(v)];
    for t in &targets[..targets.len() - 1] {
        inputs.push(TokenVector::from_token(t, v)?);
    }
    Ok((inputs, targets))
}

/// Everything a teacher-forced forward pass keeps for backpropagation.
pub struct Tape {
    steps: Vec<StepCache>,
    targets: Vec<Token>,
    loss: f64,
}

impl Tape {
    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Number of evaluated steps, `m + 1` for a code of `m` tuples.
    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// Adds `scale` times the gradient of the loss to `grad`.
    pub fn backward(&self, p: &ModelParams, grad: &mut ModelParams, scale: f64) {
        let d = p.dims();
        let lay = p.layout();
        let w = p.as_slice();
        let hd = d.hidden;
        let hh = d.head_hidden;
        let g = grad.as_mut_slice();

        let mut dh_next = vec![vec![0.0; hd]; d.layers];
        let mut dc_next = vec![vec![0.0; hd]; d.layers];
        for (step, target) in self.steps.iter().zip(&self.targets).rev() {
            // heads
            let mut d_top = vec![0.0; hd];
            for (k, (s, hc)) in lay.heads.iter().zip(&step.heads).enumerate() {
                let n = d.vocab_sizes[k];
                let mut dz = vec![0.0; n];
                head_bce(&hc.logits, target[k], Some(&mut dz));
                for v in &mut dz {
                    *v *= scale;
                }
                outer_add(&mut g[s.w2..s.w2 + n * hh], &dz, &hc.act);
                for (a, b) in g[s.b2..s.b2 + n].iter_mut().zip(&dz) {
                    *a += b;
                }
                let mut da = vec![0.0; hh];
                matvec_t_add(&w[s.w2..s.w2 + n * hh], &dz, &mut da);
                for (a, pre) in da.iter_mut().zip(&hc.pre) {
                    if *pre <= 0.0 {
                        *a = 0.0;
                    }
                }
                outer_add(&mut g[s.w1..s.w1 + hh * hd], &da, &step.top);
                for (a, b) in g[s.b1..s.b1 + hh].iter_mut().zip(&da) {
                    *a += b;
                }
                matvec_t_add(&w[s.w1..s.w1 + hh * hd], &da, &mut d_top);
            }
            if let Some(m) = &step.top_mask {
                for (a, b) in d_top.iter_mut().zip(m) {
                    *a *= b;
                }
            }

            // recurrent layers, top down
            let mut dh_in = d_top;
            for l in (0..d.layers).rev() {
                let s = &lay.lstm[l];
                let lc = &step.layers[l];
                let (gi, gf, gg, go) =
                    (&lc.gates[..hd], &lc.gates[hd..2 * hd], &lc.gates[2 * hd..3 * hd], &lc.gates[3 * hd..]);
                let mut dz = vec![0.0; 4 * hd];
                let mut dc_prev = vec![0.0; hd];
                for j in 0..hd {
                    let dh = dh_in[j] + dh_next[l][j];
                    let dc = dc_next[l][j] + dh * go[j] * (1.0 - lc.tanh_c[j] * lc.tanh_c[j]);
                    dz[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
                    dz[hd + j] = dc * lc.c_prev[j] * gf[j] * (1.0 - gf[j]);
                    dz[2 * hd + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
                    dz[3 * hd + j] = dh * lc.tanh_c[j] * go[j] * (1.0 - go[j]);
                    dc_prev[j] = dc * gf[j];
                }
                outer_add(&mut g[s.wx..s.wx + 4 * hd * s.input], &dz, &lc.x);
                outer_add(&mut g[s.wh..s.wh + 4 * hd * hd], &dz, &lc.h_prev);
                for (a, b) in g[s.b..s.b + 4 * hd].iter_mut().zip(&dz) {
                    *a += b;
                }
                let mut dx = vec![0.0; s.input];
                matvec_t_add(&w[s.wx..s.wx + 4 * hd * s.input], &dz, &mut dx);
                let mut dh_prev = vec![0.0; hd];
                matvec_t_add(&w[s.wh..s.wh + 4 * hd * hd], &dz, &mut dh_prev);
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                dh_in = dx;
            }

            // embedding
            let mut de = dh_in;
            if let Some(m) = &step.embed_mask {
                for (a, b) in de.iter_mut().zip(m) {
                    *a *= b;
                }
            }
            let e = d.embed;
            for (a, b) in g[lay.embed_b..lay.embed_b + e].iter_mut().zip(&de) {
                *a += b;
            }
            if let Some(hot) = &step.hot {
                for &i in hot {
                    let row = &mut g[lay.embed_w + i * e..lay.embed_w + (i + 1) * e];
                    for (a, b) in row.iter_mut().zip(&de) {
                        *a += b;
                    }
                }
            }
        }
    }
}

/// Teacher-forced forward pass over `code` that records a [`Tape`].
pub fn forward_sequence(
    p: &ModelParams,
    code: &DfsCode,
    v: &Vocabulary,
    dropout: &mut DropoutMode,
) -> Result<Tape, ModelError> {
    p.dims().check_vocabulary(v)?;
    let (inputs, targets) = teacher_forcing(code, v)?;
    let mut state = HiddenState::zeros(p);
    let mut steps = Vec::with_capacity(inputs.len());
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(&targets) {
        let (cache, next) = run_step(p, &state, x.hot(), dropout);
        for (hc, &k) in cache.heads.iter().zip(t) {
            loss += head_bce(&hc.logits, k, None);
        }
        steps.push(cache);
        state = next;
    }
    if !loss.is_finite() {
        return Err(ModelError::NonFinite("sequence loss".into()));
    }
    Ok(Tape { steps, targets, loss })
}

/// Sum over steps and heads of the binary cross-entropy, in evaluation mode.
pub fn sequence_loss(p: &ModelParams, code: &DfsCode, v: &Vocabulary) -> Result<f64, ModelError> {
    Ok(forward_sequence(p, code, v, &mut DropoutMode::Eval)?.loss)
}

/// Exact gradient of [`sequence_loss`] by backpropagation through time.
pub fn sequence_grad(p: &ModelParams, code: &DfsCode, v: &Vocabulary) -> Result<ModelParams, ModelError> {
    let tape = forward_sequence(p, code, v, &mut DropoutMode::Eval)?;
    let mut g = p.zeros_like();
    tape.backward(p, &mut g, 1.0);
    Ok(g)
}
