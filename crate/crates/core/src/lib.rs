//! Hybrid recommender for knowledge-graph items.
//!
//! Editor/item interactions are factorized into edit representations
//! ([`mf`]), item text is turned into content vectors ([`text`]), the item
//! graph is embedded with TransR ([`graph`]) and the three item-side
//! representations are combined per dimension by a learned soft gate
//! ([`nmor`]). [`eval`] implements the per-editor ranking protocol and the
//! metrics; [`experiment`] wires everything together for ablations and the
//! sparsity study.

pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod ingest;
pub mod math;
pub mod mf;
pub mod nmor;
pub mod seed;
pub mod store;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use ingest::InteractionMatrix;
pub use mf::EmbeddingMatrix;
