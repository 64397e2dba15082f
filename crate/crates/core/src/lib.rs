//! Parametric reduced-order models of polynomial dynamical systems by direct
//! parameterization of invariant manifolds, with the power-series tools for
//! geometry-morphing finite-element integrands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod geomorph;
pub mod io;
pub mod kronalg;
pub mod manifold;
pub mod polyode;
pub mod simulate;
pub mod weakform;
