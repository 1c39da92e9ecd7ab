use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Vocabulary};

/// Layer widths of the sequence model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// output sizes of the five heads, equal to the vocabulary component sizes
    pub vocab_sizes: [usize; 5],
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub head_hidden: usize,
}

impl ModelDims {
    pub fn new(v: &Vocabulary, embed: usize, hidden: usize, layers: usize, head_hidden: usize) -> Self {
        Self { vocab_sizes: v.sizes(), embed, hidden, layers, head_hidden }
    }

    /// Widths used when none are given: embedding 128, recurrent 256, one
    /// layer, head hidden 512.
    pub fn default_for(v: &Vocabulary) -> Self {
        Self::new(v, 128, 256, 1, 512)
    }

    pub fn input_dim(&self) -> usize {
        self.vocab_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed == 0 || self.hidden == 0 || self.layers == 0 || self.head_hidden == 0 {
            return Err(ModelError::Dimension("all widths and the layer count must be positive".into()));
        }
        if self.vocab_sizes.iter().any(|&s| s < 2) {
            return Err(ModelError::Dimension("every vocabulary component needs a symbol and EOS".into()));
        }
        Ok(())
    }

    pub fn check_vocabulary(&self, v: &Vocabulary) -> Result<(), ModelError> {
        if self.vocab_sizes != v.sizes() {
            return Err(ModelError::Dimension(format!(
                "model head sizes {:?} do not match vocabulary sizes {:?}",
                self.vocab_sizes,
                v.sizes()
            )));
        }
        Ok(())
    }
}

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmSlots {
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
    pub input: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HeadSlots {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

/// Offsets of every tensor. Matrices are row-major with one row per output,
/// except the embedding, which stores one row of width `embed` per input
/// token so a one-hot input selects contiguous rows.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub tensors: Vec<TensorInfo>,
    pub embed_w: usize,
    pub embed_b: usize,
    pub lstm: Vec<LstmSlots>,
    pub heads: [HeadSlots; 5],
    pub total: usize,
}

impl Layout {
    fn new(d: &ModelDims) -> Self {
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, rows: usize, cols: usize| {
            tensors.push(TensorInfo { name, rows, cols, offset: total });
            total += rows * cols;
            total - rows * cols
        };
        let embed_w = add("embed.weight".into(), d.input_dim(), d.embed);
        let embed_b = add("embed.bias".into(), 1, d.embed);
        let mut lstm = Vec::new();
        for l in 0..d.layers {
            let input = if l == 0 { d.embed } else { d.hidden };
            let wx = add(format!("lstm{l}.weight_input"), 4 * d.hidden, input);
            let wh = add(format!("lstm{l}.weight_hidden"), 4 * d.hidden, d.hidden);
            let b = add(format!("lstm{l}.bias"), 1, 4 * d.hidden);
            lstm.push(LstmSlots { wx, wh, b, input });
        }
        let names = ["head.from_time", "head.to_time", "head.from_label", "head.edge_label", "head.to_label"];
        let heads = std::array::from_fn(|k| {
            let w1 = add(format!("{}.weight1", names[k]), d.head_hidden, d.hidden);
            let b1 = add(format!("{}.bias1", names[k]), 1, d.head_hidden);
            let w2 = add(format!("{}.weight2", names[k]), d.vocab_sizes[k], d.head_hidden);
            let b2 = add(format!("{}.bias2", names[k]), 1, d.vocab_sizes[k]);
            HeadSlots { w1, b1, w2, b2 }
        });
        Self { tensors, embed_w, embed_b, lstm, heads, total }
    }
}

/// All model weights as one flat `f64` vector with a named layout.
///
/// Gradients and optimizer moments use the same type.
#[derive(Debug, Clone)]
pub struct ModelParams {
    dims: ModelDims,
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.data == other.data
    }
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<Self, ModelError> {
        dims.validate()?;
        let layout = Arc::new(Layout::new(&dims));
        let data = vec![0.0; layout.total];
        Ok(Self { dims, layout, data })
    }

    /// Uniform initialisation in `±1/sqrt(fan_in)` for weights and biases.
    /// The embedding uses a fan-in of five since a token activates five rows.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = p.layout.clone();
        // a bias reuses the fan-in of the weight listed before it
        let mut fan_in = 5;
        for t in &layout.tensors {
            if t.rows > 1 && t.name != "embed.weight" {
                fan_in = t.cols;
            }
            if t.name.starts_with("lstm") {
                fan_in = p.dims.hidden;
            }
            let k = 1.0 / (fan_in as f64).sqrt();
            for x in &mut p.data[t.range()] {
                *x = rng.gen_range(-k..k);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self { dims: self.dims.clone(), layout: self.layout.clone(), data: vec![0.0; self.data.len()] }
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| &self.data[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.layout.tensors.iter().find(|t| t.name == name)?.range();
        Some(&mut self.data[r])
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims == other.dims
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<(), ModelError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(ModelError::Dimension("parameter shapes differ".into()))
        }
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }
}
