//! Checkpoint container.
//!
//! ```text
//! gshot-checkpoint 1
//! {"max_timestamp":6,"node_labels":[..],"edge_labels":[..],"dims":{..},"seed":0,"steps":120}
//! tensor embed.weight 58 128
//! <58*128 little-endian f64>
//! tensor embed.bias 1 128
//! ...
//! end
//! ```
//!
//! Every tensor line is followed by exactly `rows * cols * 8` bytes and a
//! newline.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelError, ModelParams, Vocabulary};
use crate::graph::{LabelSet, LabelSpace};

pub const CHECKPOINT_MAGIC: &str = "gshot-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    max_timestamp: usize,
    node_labels: Vec<String>,
    edge_labels: Vec<String>,
    dims: ModelDims,
    seed: u64,
    steps: u64,
}

/// A model together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub seed: u64,
    /// optimizer or meta-update steps taken so far
    pub steps: u64,
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut dyn Write) -> Result<(), ModelError> {
        self.params.dims().check_vocabulary(&self.vocab)?;
        let labels = self.vocab.labels();
        let header = Header {
            max_timestamp: self.vocab.max_timestamp(),
            node_labels: labels.node.symbols().to_vec(),
            edge_labels: labels.edge.symbols().to_vec(),
            dims: self.params.dims().clone(),
            seed: self.seed,
            steps: self.steps,
        };
        writeln!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for t in self.params.tensors() {
            writeln!(w, "tensor {} {} {}", t.name, t.rows, t.cols)?;
            let mut buf = Vec::with_capacity(t.len() * 8);
            for x in &self.params.as_slice()[t.range()] {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
            writeln!(w)?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn read_from(r: &mut dyn Read) -> Result<Self, ModelError> {
        let mut r = BufReader::new(r);
        let bad = |m: String| ModelError::Checkpoint(m);
        let magic = read_line(&mut r)?;
        let version = magic
            .strip_prefix(CHECKPOINT_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad("not a checkpoint file".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let header: Header =
            serde_json::from_str(&read_line(&mut r)?).map_err(|e| bad(format!("bad header: {e}")))?;
        let space = LabelSpace {
            node: LabelSet::from_symbols(header.node_labels.clone()),
            edge: LabelSet::from_symbols(header.edge_labels.clone()),
        };
        let vocab = Vocabulary::new(header.max_timestamp, Arc::new(space))?;
        let mut params = ModelParams::zeros(header.dims.clone())?;
        params.dims().check_vocabulary(&vocab)?;
        let tensors = params.tensors().to_vec();
        for t in tensors {
            let line = read_line(&mut r)?;
            let expect = format!("tensor {} {} {}", t.name, t.rows, t.cols);
            if line != expect {
                return Err(bad(format!("expected {expect:?}, found {line:?}")));
            }
            let mut buf = vec![0u8; t.len() * 8];
            r.read_exact(&mut buf)?;
            for (x, b) in params.as_mut_slice()[t.range()].iter_mut().zip(buf.chunks_exact(8)) {
                *x = f64::from_le_bytes(b.try_into().unwrap());
            }
            if read_line(&mut r)? != "" {
                return Err(bad(format!("tensor {} has trailing data", t.name)));
            }
        }
        if read_line(&mut r)? != "end" {
            return Err(bad("missing end marker".into()));
        }
        if !params.is_finite() {
            return Err(ModelError::NonFinite("checkpoint parameters".into()));
        }
        Ok(Self { params, vocab, seed: header.seed, steps: header.steps })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::read_from(&mut std::fs::File::open(path)?)
    }
}

fn read_line(r: &mut impl BufRead) -> Result<String, ModelError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(ModelError::Checkpoint("unexpected end of file".into()));
    }
    Ok(line.trim_end_matches('\n').to_string())
}
