//! Equation discovery for ODE systems from noisy, partially observed trajectories.
//!
//! The engine recovers symbolic right-hand sides `dx/dt = f(x, u, t; theta)` by
//! searching a physically typed context-free grammar (units, parity, invariance),
//! fitting free constants by bounded quasi-Newton derivative matching, scoring
//! candidates by a minimum-description-length criterion, and reporting ranked
//! equations together with bootstrap stability and identifiability diagnostics.
//!
//! Numeric kernels are generic over the scalar type via [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); concrete `f64` aliases are re-exported at
//! the crate root. Expression literals are exact rationals so canonicalization
//! folds constants without rounding.

pub mod expr;
pub mod grammar;
pub mod preprocess;
pub mod scalar;
pub mod util;

pub use expr::{ConstantVector, Equivalence, ExprTree, Leaf, Op};
pub use grammar::{DimVector, InvarianceClass, Parity, PhysType, SymmetrySpec, TypedGrammar};
pub use scalar::Scalar;

/// Concrete `f64` aliases for the generic core types.
pub type ConstantVector64 = expr::ConstantVector<f64>;
