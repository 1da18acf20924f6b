//! Superpixel-based region-growing image segmentation.

pub mod adjacency;
pub mod canny;
pub mod coslic;
pub mod dataset;
pub mod error;
pub mod export;
pub mod features;
pub mod glcm;
pub mod gradient;
pub mod lab;
pub mod labels;
pub mod merge;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod similarity;
pub mod slic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/oversegmentation.md")]
    mod oversegmentation {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/merging.md")]
    mod merging {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
