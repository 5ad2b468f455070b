//! Curvature and moment-map invariants of nilpotent Lie algebras and their
//! rank-one solvable extensions, with certificates for Ricci-negative
//! derivations.

pub mod bracket;
pub mod certify;
pub mod cone;
pub mod corpus;
pub mod curvature;
pub mod degeneration;
pub mod derivations;
pub mod error;
pub mod field;
pub mod format;
pub mod jordan;
pub mod koszul;
pub mod linalg;
pub mod moment;
pub mod orbit;
pub mod lp;
pub mod polytope;
pub mod rng;
pub mod search;
pub mod weyl;

pub use bracket::{act, BasisChange, Bracket, ScalarKind, Triple};
pub use error::{Error, Result};
