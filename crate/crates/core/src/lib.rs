//! Loop erasure and partial loop erasure of Markov chain paths, with exact
//! and statistical verification tools and loop-erased random walk
//! experiments on Sierpiński gasket and carpet graphs.

pub mod chain;
pub mod erasure;
pub mod error;
pub mod exactlaw;
pub mod fractal;
pub mod fuzz;
pub mod io;
pub mod limits;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod scalar;

pub use chain::{build_chain, reachability_closure, sample_until_entry, EntrySampler, FinitePath, MarkovChain, StateSet};
pub use erasure::{loop_erase, partial_loop_erase, refinement_erase, ErasureResult};
pub use error::{Error, Result};
pub use exactlaw::{enumerate_erasure_law, ExactLawOptions, PathLaw, Pipeline};
pub use fractal::{carpet_graph, gasket_graph, CarpetTemplate, FractalGraph, FractalKind};
pub use network::ElectricalNetwork;
pub use scalar::{NumericMode, Rational, Scalar};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/erasure.md")]
    mod erasure {}
    #[doc = include_str!("../../../book/src/exact-laws.md")]
    mod exact_laws {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/fractals.md")]
    mod fractals {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
