//! Concurrent lexicalized dependency parsing.
//!
//! Every word of the input is an actor carrying its own grammatical
//! knowledge: a word class, a feature structure, a concept, and valencies
//! describing the modifiers it may govern. Arcs are negotiated by message
//! passing — a new word searches for its head along the fringe of the
//! structure built so far, candidate heads answer with offers, and an
//! accepted offer becomes a labeled dependency. Admissibility is decided by
//! a four-clause predicate over class subsumption, feature unification,
//! conceptual integrity constraints, and word order. Ambiguity forks the
//! parse into independent readings by duplicating the affected actors.
//!
//! The crate is organized bottom-up:
//!
//! - [`features`]: feature structures, unification, textual notation
//! - [`hierarchy`]: word-class taxonomy and the concept system
//! - [`grammar`]: valencies, order tuples, lexicon files, inheritance
//! - `satisfies`: the admissibility predicate
//! - [`runtime`]: actor mailboxes, reception tasks, schedulers, traces
//! - [`protocol`]: the word-actor script and the scan controller
//! - [`oracle`]: brute-force enumeration of all valid analyses
//! - [`cli`]: run configuration and the command implementations
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod cli;
pub mod features;
pub mod grammar;
pub mod hierarchy;
pub mod oracle;
pub mod protocol;
pub mod runtime;
pub mod satisfies;

pub use features::{equivalent, expand, extract, parse_fs, render_fs, unify, FeatureStructure};
pub use grammar::{GrammarBundle, LexemeEntry, OrderTuple, Valency};
pub use hierarchy::{ClassHierarchy, ConceptSystem};
pub use protocol::{parse_sentence, ParseOptions, ParseRun, ReadingRecord};
pub use satisfies::{satisfies, CandidateView, SatisfiesResult};
