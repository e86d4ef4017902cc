//! Deterministic automata over shared transition graphs.
//!
//! This crate implements three tightly coupled pieces of machinery:
//!
//! * **DFAs with partial transition functions** ([`dfa`]): membership,
//!   completion, canonical minimization and equivalence with shortest
//!   counterexamples.
//! * **Visibly pushdown automata** ([`vpa`]): a pushdown model whose stack
//!   discipline is dictated by a partition of the alphabet into call, return
//!   and internal symbols. Deterministic VPAs admit polynomial-time language
//!   equivalence, implemented here through a synchronized product and an
//!   emptiness check based on well-matched summaries.
//! * **Immersions** ([`immersion`]): a single deterministic transition graph
//!   hosting several DFAs, one per target language, each picking its own
//!   initial state and final-state set. The size of an immersion is the
//!   number of states of the shared graph.
//!
//! On top of these, [`minimize`] searches for a minimum-size immersion by
//! encoding the existence of a `k`-state immersion as a CNF formula (solved
//! by a built-in DPLL solver or any external DIMACS solver), with an
//! independent brute-force enumerator as cross-check, and [`reduction`]
//! builds the family of DFA instances that tie minimum immersion size to
//! graph 3-colorability.

pub mod alphabet;
pub mod analysis;
pub mod dfa;
pub mod error;
pub mod immersion;
pub mod minimize;
pub mod reduction;
pub mod vpa;

pub use alphabet::{format_word, Alphabet, Word};
pub use analysis::{immersion_analyze, StructureReport};
pub use dfa::{Dfa, Equivalence};
pub use error::{AutomatonError, ParseError, ReductionError, ShapeError};
pub use immersion::{Immersion, TransitionGraph};
pub use vpa::{VisiblyAlphabet, Vpa};
