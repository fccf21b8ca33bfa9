//! Name-based bug detection over JavaScript corpora with static and
//! contextual (ELMo-style) token embeddings.

pub mod analysis;
pub mod ast;
pub mod corpus;
pub mod detector;
pub mod embeddings;
pub mod error;
pub mod extraction;
pub mod lm;
pub mod mutation;
pub mod neural;
pub mod pipeline;
pub mod provider;
pub mod store;

pub use error::{Error, Result};
