//! Shipped example specifications.

/// The three-SAP example service (`fixtures/example-fig2.svc`).
pub const FIG2: &str = include_str!("../fixtures/example-fig2.svc");
