//! Disintegration-time prediction for orally disintegrating tablet
//! formulations.
//!
//! The pipeline runs corpus → [`features::FeatureCodec`] →
//! [`mdfis::split`] → [`neuralnet::train`] → [`metrics::evaluate`].
//! [`pipeline`] wires the stages together the way the `odtnet` binary does.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod features;
pub mod mdfis;
pub mod metrics;
pub mod neuralnet;
pub mod pipeline;

pub use dataset::Corpus;
pub use error::{Error, Result};
pub use features::{EncodedDataset, FeatureCodec, Normalizer, RawDataset};
pub use mdfis::{SplitConfig, SplitResult, Strategy};
pub use metrics::EvaluationResult;
pub use neuralnet::{ModelFile, Network, NetworkConfig, Preset};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/splitting.md")]
    mod splitting {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
