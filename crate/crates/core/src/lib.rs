//! Toolkit for CCS with signals (CCS^s).
//!
//! The crate parses `.ccss` specification files, derives transitions from the
//! structural operational semantics (with derivation provenance), builds finite
//! state spaces, decides strong bisimilarity, classifies lasso-shaped paths as
//! just or unjust, and verifies mutual-exclusion protocols.
//!
//! ```
//! use ccss::{parser, lts};
//!
//! let spec = parser::parse("signals { s }\nsystem = (0 ^ s | s.0) \\ {s}").unwrap();
//! let lts = lts::explore(&spec.env, &spec.root, lts::Limits::default()).unwrap();
//! assert_eq!(lts.states.len(), 2);
//! assert_eq!(lts.transitions.len(), 1);
//! ```

pub mod bisim;
pub mod error;
pub mod justness;
pub mod lts;
pub mod parser;
pub mod print;
pub mod protocols;
pub mod sos;
pub mod term;
pub mod verifier;

pub use error::{ModelError, ParseError};
pub use term::{Action, Environment, Name, Term};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/terms.md")]
    mod terms {}
    #[doc = include_str!("../../../book/src/semantics.md")]
    mod semantics {}
    #[doc = include_str!("../../../book/src/bisimulation.md")]
    mod bisimulation {}
    #[doc = include_str!("../../../book/src/justness.md")]
    mod justness {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    mod protocols {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
