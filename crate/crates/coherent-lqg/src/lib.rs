//! Synthesis and verification of physically realizable coherent quantum
//! LQG controllers.
//!
//! The crate covers the whole pipeline: state-space types and the
//! realizability algebra ([`system`]), closed-loop assembly for the three
//! coupling configurations ([`closed_loop`]), the LQG evaluation pipeline
//! ([`eval`]), the tailored differential-evolution engine ([`de`]), and
//! the concrete atom-cavity synthesis problems with published controllers
//! as verification fixtures ([`scenarios`]).

pub mod closed_loop;
pub mod de;
pub mod error;
pub mod eval;
pub mod io;
pub mod scenarios;
pub mod system;

pub use error::{Error, Result};
