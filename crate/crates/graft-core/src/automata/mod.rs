//! Access automata: the NFA engine, access-path collection, and statement or
//! call summaries with the pairwise conflict test.

pub mod nfa;
pub mod paths;
pub mod summary;

pub use nfa::{AcceptMode, CanonicalDfa, Label, Nfa};
pub use paths::{collect_access_paths, APath, Cat, CollectCtx, PathSet};
pub use summary::{
    build_call_summary, build_statement_summary, conflicts, summarize_stmt, StatementSummary,
};
