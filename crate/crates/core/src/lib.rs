//! Data-driven synthesis of incremental input-to-state stabilizing controllers
//! for input-affine polynomial systems.
//!
//! The pipeline collects two input-state trajectories from an unknown plant,
//! lifts them through a monomial dictionary, solves a semidefinite feasibility
//! program for a quadratic incremental Lyapunov certificate, and checks the
//! result against the raw data and in closed-loop simulation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plant;
pub mod polyalg;
pub mod sdp;
pub mod synthesis;
pub mod verify;
