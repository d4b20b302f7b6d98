//! Graphviz rendering. Composite states become `cluster_` subgraphs; edges
//! into or out of a composite attach to its region initial/final with
//! `lhead`/`ltail`.

use std::fmt::Write;

use crate::model::{EntityEvent, EntitySpec, Region, ServiceSpec, SpecIndex, StateKind};

fn q(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

fn node_attrs(kind: &StateKind) -> &'static str {
    match kind {
        StateKind::Initial => "shape=box, style=\"rounded,bold\"",
        StateKind::Final => "shape=box, style=rounded, peripheries=2",
        _ => "shape=box, style=rounded",
    }
}

pub fn service_to_dot(spec: &ServiceSpec) -> String {
    let index = spec.index();
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", q(&spec.name));
    out.push_str("  rankdir=LR;\n  compound=true;\n");
    write_region_nodes(&spec.machine, 1, &mut out);
    for t in spec.machine.all_transitions() {
        let from = anchor(&index, t.source.as_str(), false);
        let to = anchor(&index, t.dest.as_str(), true);
        let mut attrs = vec![format!("label={}", q(&format!("{}@{} {}", t.sp, t.sap, t.interval)))];
        if index.region_of(&t.source).is_some() {
            attrs.push(format!("ltail={}", q(&format!("cluster_{}", t.source))));
        }
        if index.region_of(&t.dest).is_some() {
            attrs.push(format!("lhead={}", q(&format!("cluster_{}", t.dest))));
        }
        let _ = writeln!(out, "  {} -> {} [{}];", q(&from), q(&to), attrs.join(", "));
    }
    out.push_str("}\n");
    out
}

fn write_region_nodes(region: &Region, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for state in &region.states {
        match &state.kind {
            StateKind::Composite(inner) => {
                let _ = writeln!(out, "{pad}subgraph {} {{", q(&format!("cluster_{}", state.id)));
                let _ = writeln!(out, "{pad}  label={};", q(state.id.as_str()));
                if inner.states.is_empty() {
                    let _ = writeln!(
                        out,
                        "{pad}  {} [shape=point, style=invis];",
                        q(&format!("{}__anchor", state.id))
                    );
                }
                write_region_nodes(inner, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
            kind => {
                let _ = writeln!(out, "{pad}{} [{}];", q(state.id.as_str()), node_attrs(kind));
            }
        }
    }
}

/// Node an edge touching `state` attaches to; composites resolve to a node
/// inside their cluster.
fn anchor(index: &SpecIndex<'_>, state: &str, entering: bool) -> String {
    let mut cursor = state.to_string();
    while let Some(region) = index.region_of(&cursor.as_str().into()) {
        let pick = if entering {
            region.initial().or_else(|| region.states.first())
        } else {
            region.final_state().or_else(|| region.states.last())
        };
        match pick {
            Some(s) => cursor = s.id.to_string(),
            None => return format!("{cursor}__anchor"),
        }
    }
    cursor
}

pub fn entity_to_dot(pe: &EntitySpec) -> String {
    let m = &pe.machine;
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", q(&format!("{}_{}", pe.service, pe.sap)));
    out.push_str("  rankdir=LR;\n");
    for (i, s) in m.states.iter().enumerate() {
        let kind = if i == m.initial {
            StateKind::Initial
        } else if s.is_final {
            StateKind::Final
        } else {
            StateKind::Simple
        };
        let mut attrs = node_attrs(&kind).to_string();
        if i == m.initial && s.is_final {
            attrs.push_str(", peripheries=2");
        }
        let _ = writeln!(out, "  {} [{attrs}];", q(s.id.as_str()));
    }
    for t in &m.transitions {
        let label = match &t.label.event {
            EntityEvent::Execute {
                sp,
                interval,
                send_to,
                msg,
            } => match msg {
                Some(msg) => {
                    let dests: Vec<&str> = send_to.iter().map(|s| s.as_str()).collect();
                    format!("{sp} {interval} / !{msg} to {{{}}}", dests.join(", "))
                }
                None => format!("{sp} {interval}"),
            },
            EntityEvent::Receive { msg, from } => format!("?{msg} from {from}"),
            EntityEvent::Epsilon => "ε".to_string(),
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            q(m.states[t.source].id.as_str()),
            q(m.states[t.dest].id.as_str()),
            q(&label)
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG2;
    use crate::io::{parse_entity_spec, parse_service_spec};

    #[test]
    fn empty_machine_has_only_initial_node() {
        let spec = parse_service_spec("service e { saps A machine { initial i0 } }").unwrap();
        let dot = service_to_dot(&spec);
        assert!(dot.starts_with("digraph \"e\" {"));
        assert_eq!(dot.matches(" [shape=").count(), 1);
        assert!(dot.contains("\"i0\" [shape=box"));
        assert!(!dot.contains("->"));
    }

    #[test]
    fn fixture_has_one_cluster() {
        let spec = parse_service_spec(FIG2).unwrap();
        let dot = service_to_dot(&spec);
        assert_eq!(dot.matches("subgraph \"cluster_").count(), 1);
        assert!(
            dot.contains("\"i0\" -> \"ci\" [label=\"A@S1 [1, 3]\", lhead=\"cluster_cs\"]"),
            "{dot}"
        );
        assert!(
            dot.contains("\"cf\" -> \"s1\" [label=\"D@S1 [1, 2]\", ltail=\"cluster_cs\"]"),
            "{dot}"
        );
    }

    #[test]
    fn receive_edge_label() {
        let pe = parse_entity_spec("entity S2 of x { initial a state b trans t: a -> b recv m_t from S1 }").unwrap();
        let dot = entity_to_dot(&pe);
        assert!(dot.contains("[label=\"?m_t from S1\"]"), "{dot}");
        assert!(!dot.contains("subgraph"));
    }
}
