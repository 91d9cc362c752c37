//! Compile a Turing machine into a smooth vector field on R^11 whose
//! trajectory from an encoded input tape blows up in finite time exactly
//! when the machine halts on that tape.
//!
//! The pipeline has four layers:
//!
//! * [`tm`] - exact machine simulation (the symbolic oracle),
//! * [`encoding`] + [`layout`] + [`schedule`] + [`field`] - the machine
//!   realized as a time-periodic field on the 4-torus whose period map
//!   moves encoded configurations exactly one machine step,
//! * [`geometry`] - embedding into the unit ball of R^11 and Poincare
//!   radial compactification, sending the halting plateau to infinity,
//! * [`runtime`] - numerical integration in three coordinate systems with
//!   halting/blow-up event detection and trajectory export.

pub mod check;
pub mod cli;
pub mod encoding;
pub mod field;
pub mod geometry;
pub mod integrate;
pub mod layout;
pub mod runtime;
pub mod schedule;
pub mod smooth;
pub mod tm;

pub use encoding::{Config4, Rat, TapePoint};
pub use field::SuspensionField;
pub use geometry::AmbientField;
pub use tm::{Configuration, TMSpec, Tape};
