//! Few-shot generative modeling of labeled graphs.
//!
//! Graphs are canonized to minimum DFS codes ([`canon`]), modeled with a
//! recurrent autoregressive network ([`nn`]), meta-trained across auxiliary
//! datasets ([`meta`]), adapted to a small target dataset by self-paced
//! fine-tuning ([`selfpaced`]), sampled back into graphs ([`sampler`]) and
//! scored against reference graphs ([`metrics`]).

pub mod canon;
pub mod config;
pub mod graph;
pub mod meta;
pub mod metrics;
pub mod nn;
pub mod sampler;
pub mod selfpaced;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/meta.md")]
    mod meta {}
    #[doc = include_str!("../../../book/src/selfpaced.md")]
    mod selfpaced {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
