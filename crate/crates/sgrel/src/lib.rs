//! Relationship classification for scene graphs, driven by box geometry.
//!
//! The crate trains and evaluates a small relationship classifier whose
//! inputs are bounding-box layouts, per-object appearance features and
//! object-class statistics, with four geometric self-supervision tasks
//! sharing the backbone. Everything is plain `f64` on the CPU and every
//! run is reproducible from a single seed.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod labels;
pub mod loss;
pub mod model;
pub mod nn;
pub mod scene;
pub mod spatial;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

/// The long-form guide, one chapter per concept.
///
/// These are the same chapters the rendered book under `book/` is built
/// from; including them here compiles every code block as a doctest, so
/// the guide cannot drift from the library.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/spatial-features.md")]
    pub mod spatial_features {}
    #[doc = include_str!("../../../book/src/self-supervision.md")]
    pub mod self_supervision {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/losses.md")]
    pub mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    pub mod synthetic_data {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    pub mod file_formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
