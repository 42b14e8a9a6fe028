pub mod error;
pub mod blocks;
pub mod classify;
pub mod corpus;
pub mod engine;
pub mod exec;
pub mod factor;
pub mod formula;
pub mod generator;
pub mod oracle;
pub mod poly;
pub mod sexp;
pub mod simplify;

pub use error::{Error, Result};
pub use formula::{Atom, Clause, Dnf, Formula, Relation};
pub use poly::{Monomial, Polynomial, Rational, Var};
