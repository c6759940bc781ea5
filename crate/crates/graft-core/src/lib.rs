//! graft — a source-to-source fusion compiler for tree traversals over
//! heterogeneous tree types.
//!
//! The pipeline: parse a traversal program written in the `.tg` DSL, resolve
//! its node-kind hierarchy and virtual dispatch, summarize what every
//! statement and traversal call may read or write as finite automata over
//! field labels, build dependence graphs over merged traversal bodies, fuse
//! consecutive traversal calls into combined passes (memoized per concrete
//! function sequence, with type-specific partial fusion), and emit the result
//! as executable extended-DSL text. A tree interpreter runs both versions and
//! checks they produce identical trees and statement counts.

pub mod automata;
pub mod corpus;
pub mod depgraph;
pub mod error;
pub mod fusion;
pub mod codegen;
pub mod interp;
pub mod pipeline;
pub mod model;
pub mod resolve;
pub mod resolved;
pub mod surface;

pub use error::{Error, Result, Span};
