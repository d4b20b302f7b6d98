//! Text formats: the service DSL, the entity DSL, and Graphviz output.

mod diagnostic;
mod dot;
mod emit;
mod lexer;
mod parse;

pub use diagnostic::{has_errors, Diagnostic, Location, Severity, SourceMap};
pub use dot::{entity_to_dot, service_to_dot};
pub use emit::{emit_entity_spec, emit_service_spec, entity_event_text};
pub use parse::{parse_entity_spec, parse_service_spec, parse_service_spec_with_map, ParsedService};

use crate::model::{EntitySpec, ServiceSpec};

/// Either kind of machine, for rendering.
#[derive(Debug, Clone, Copy)]
pub enum AnyMachine<'a> {
    Service(&'a ServiceSpec),
    Entity(&'a EntitySpec),
}

pub fn emit_dot(machine: AnyMachine<'_>) -> String {
    match machine {
        AnyMachine::Service(spec) => service_to_dot(spec),
        AnyMachine::Entity(pe) => entity_to_dot(pe),
    }
}
