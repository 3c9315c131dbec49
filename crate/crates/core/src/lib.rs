//! Spectral solvers for scalar conservation laws on a three-edge traffic network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cheb;
pub mod flux;
pub mod fvs;
pub mod harness;
pub mod junction;
pub mod netsolver;
pub mod scalar;
pub mod spacetime;

pub use scalar::Scalar;

pub type CglGrid64 = cheb::CglGrid<f64>;
pub type CoeffVector64 = cheb::CoeffVector<f64>;
pub type FilterSpec64 = cheb::FilterSpec<f64>;
pub type FluxModel64 = flux::FluxModel<f64>;
pub type NetworkState64 = netsolver::NetworkState<f64>;
pub type NetworkSolver64 = netsolver::NetworkSolver<f64>;
pub type SpaceTimeCoeffs64 = spacetime::SpaceTimeCoeffs<f64>;
