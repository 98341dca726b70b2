use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected: elements {0:?} are mutually comparable")]
    Cycle(Vec<String>),
    #[error("duplicate element identifier: {0}")]
    DuplicateElement(String),
    #[error("unknown element: {0}")]
    UnknownElement(String),
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not a bounded lattice: {0}")]
    NotALattice(String),
    #[error("not distributive: {0}")]
    NotDistributive(String),
    #[error("pseudocomplement does not exist for element {0}")]
    Pseudocomplement(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
