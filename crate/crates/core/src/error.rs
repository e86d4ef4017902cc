//! Error types shared across the crate.

use thiserror::Error;

use crate::alphabet::format_word;

/// Input errors for automaton-level operations.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(String),
    #[error("invalid symbol {0:?}: symbols are non-empty tokens without whitespace or commas")]
    BadSymbol(String),
    #[error("duplicate symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("state index {0} out of range (automaton has {1} states)")]
    StateOutOfRange(usize, usize),
    #[error("stack symbol index {0} out of range ({1} stack symbols)")]
    StackSymbolOutOfRange(usize, usize),
    #[error("transition ({0}, {1:?}) already defined")]
    DuplicateTransition(usize, String),
    #[error("alphabets differ: {0:?} vs {1:?}")]
    AlphabetMismatch(String, String),
    #[error("expected {expected} target languages, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("operation requires a deterministic VPA: {0}")]
    Nondeterministic(String),
    #[error("{0}")]
    Invalid(String),
}

/// Errors while reading one of the text formats.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: AutomatonError,
    },
    #[error("unexpected end of input: {0}")]
    Truncated(String),
}

impl ParseError {
    pub fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line,
            msg: msg.into(),
        }
    }
}

/// Violations of the structural assumptions required to strip a VPA back
/// into an immersion.
#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("VPA is nondeterministic: {0}")]
    Nondeterministic(String),
    #[error("VPA must have exactly one return symbol, found {0}")]
    ReturnArity(usize),
    #[error("VPA has no initial state")]
    NoInitial,
    #[error("no final state without outgoing transitions to merge into the accepting sink")]
    NoUsableFinal,
    #[error("final state {0} keeps outgoing transitions after merging")]
    FinalWithOutgoing(usize),
    #[error("initial state has a non-call outgoing transition on {0:?}")]
    InitialNonCall(String),
    #[error("no call rule from the initial state on {0:?}")]
    MissingCallRule(String),
    #[error("call on {0:?} targets the initial or accepting state, so its language slot is not representable")]
    CallTargetsEndpoint(String),
    #[error("accepted word outside the call-internal*-return shape: {}", format_word(.0))]
    WordOutsideShape(Vec<String>),
}

/// Errors from the hardness-reduction module.
#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("vertex {0} out of range 1..={1}")]
    VertexOutOfRange(usize, usize),
    #[error("graph must have at least {0} vertices")]
    TooFewVertices(usize),
    #[error("edge {{{0},{1}}} is a self-loop")]
    SelfLoop(usize, usize),
    #[error("coloring is not proper: edge {{{0},{1}}} is monochromatic (color {2})")]
    ImproperColoring(usize, usize, u8),
    #[error("coloring assigns no color to vertex {0}")]
    MissingColor(usize),
    #[error("color {0} of vertex {1} is outside {{0,1,2}}")]
    BadColor(u8, usize),
    #[error("instance exceeds the exact-solver guard ({0} > {1} vertices)")]
    ScaleGuard(usize, usize),
    #[error("immersion structure does not match the reduction shape: {0}")]
    Structure(String),
    #[error("derived coloring is improper: edge {{{0},{1}}} got color {2} on both ends")]
    Soundness(usize, usize, u8),
}

/// Errors from the SAT-based minimizer.
#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error(transparent)]
    Input(#[from] AutomatonError),
    #[error("budget {budget} is below the lower bound {lower_bound}")]
    BudgetBelowLowerBound { budget: usize, lower_bound: usize },
    #[error("target {0} is not in canonical minimal-complete form")]
    NonCanonicalTarget(usize),
    #[error("assignment does not satisfy the constraint model (clause {0})")]
    UnsatisfyingAssignment(usize),
    #[error("brute-force enumeration guard exceeded: {0:.3e} candidate graphs > {1:.3e}")]
    EnumerationGuard(f64, f64),
    #[error("external solver failed: {0}")]
    Backend(String),
}
