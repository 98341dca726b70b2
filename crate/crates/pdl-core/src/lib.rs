//! Finite pseudocomplemented distributive lattices (PDLs), their finite
//! duality with posets and weak p-morphisms, free algebras, and a decision
//! procedure for validity of universal sentences in the free algebra.
//!
//! The canonical representation of a finite PDL is its dual poset: elements
//! are upsets, meet and join are intersection and union, and the
//! pseudocomplement of an upset is the complement of its downset. Everything
//! the library decides (embeddability into the free algebra, validity of
//! universal sentences) is computed on the dual side and cross-validated by
//! brute-force oracles.

pub mod algebra;
pub mod bits;
pub mod config;
pub mod decide;
pub mod error;
pub mod formulas;
pub mod free;
pub mod poset;
pub mod skeleton;
pub mod surject;

pub use bits::ElemSet;
pub use config::Caps;
pub use error::{Error, Result};
pub use poset::{FinitePoset, PosetMap};
