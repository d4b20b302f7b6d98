//! Synthesis of timed protocol-entity specifications from hierarchical
//! service specifications, plus co-simulation checks that the synthesized
//! entities respect the service's timing constraints.
//!
//! The pipeline is: parse ([`io`]) → check ([`validator`]) → project and
//! apply the synthesis rules ([`synthesizer`]) → flatten, remove
//! ε-transitions and minimize ([`reducer`]). [`pipeline::synthesize`] runs
//! all of it; [`simulator`] checks the result.

pub mod fixtures;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod rational;
pub mod reducer;
pub mod simulator;
pub mod synthesizer;
pub mod validator;
