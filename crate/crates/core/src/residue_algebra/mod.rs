//! Residue-field arithmetic `k = Q(x1, ..., xm)` and the independence tests
//! that separatedness and RV-independence reduce to.

pub mod independence;
pub mod poly;
pub mod ratfunc;

pub use independence::{
    algebraically_independent_over, linearly_independent_over, rank, transcendence_degree, LinearIndependence,
    ResSubfield,
};
pub use poly::{Monomial, Poly};
pub use ratfunc::{res_arith, ResElement, ResOp};
