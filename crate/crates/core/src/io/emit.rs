//! Canonical text emission for service and entity specs.
//!
//! Service output order: SAPs as declared, channels by `(from, to)`, states
//! in declaration order, then each region's transitions by id.

use std::fmt::Write;

use super::lexer::quote;
use crate::model::{EntityEvent, EntitySpec, Label, Region, ServiceSpec, StateKind};

pub fn emit_service_spec(spec: &ServiceSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "service {} {{", spec.name);
    let saps: Vec<&str> = spec.saps.iter().map(|s| s.as_str()).collect();
    let _ = writeln!(out, "  saps {}", saps.join(", "));
    for (from, to, delay) in spec.delays.iter() {
        let _ = writeln!(out, "  channel {from} -> {to} delay {delay}");
    }
    out.push_str("  machine {\n");
    emit_region(&spec.machine, 2, &mut out);
    out.push_str("  }\n}\n");
    out
}

fn emit_region(region: &Region, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for state in &region.states {
        match &state.kind {
            StateKind::Initial => {
                let _ = writeln!(out, "{pad}initial {}", state.id);
            }
            StateKind::Simple => {
                let _ = writeln!(out, "{pad}state {}", state.id);
            }
            StateKind::Final => {
                let _ = writeln!(out, "{pad}final {}", state.id);
            }
            StateKind::Composite(inner) => {
                let _ = writeln!(out, "{pad}composite {} {{", state.id);
                emit_region(inner, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
    let mut transitions: Vec<_> = region.transitions.iter().collect();
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    for t in transitions {
        let _ = write!(
            out,
            "{pad}trans {}: {} -> {} on {} at {} within {}",
            t.id, t.source, t.dest, t.sp, t.sap, t.interval
        );
        write_guard_action(out, t.guard.as_deref(), t.action.as_deref());
        out.push('\n');
    }
}

fn write_guard_action(out: &mut String, guard: Option<&str>, action: Option<&str>) {
    if let Some(g) = guard {
        let _ = write!(out, " guard {}", quote(g));
    }
    if let Some(a) = action {
        let _ = write!(out, " do {}", quote(a));
    }
}

/// Event part of an entity transition line, e.g. `recv m_tA from S1`.
pub fn entity_event_text(label: &Label) -> String {
    let mut out = String::new();
    match &label.event {
        EntityEvent::Execute {
            sp,
            interval,
            send_to,
            msg,
        } => {
            let _ = write!(out, "exec {sp} within {interval}");
            if let Some(msg) = msg {
                let dests: Vec<&str> = send_to.iter().map(|s| s.as_str()).collect();
                let _ = write!(out, " send {msg} to {{{}}}", dests.join(", "));
            }
        }
        EntityEvent::Receive { msg, from } => {
            let _ = write!(out, "recv {msg} from {from}");
        }
        EntityEvent::Epsilon => out.push_str("eps"),
    }
    write_guard_action(&mut out, label.guard.as_deref(), label.action.as_deref());
    out
}

pub fn emit_entity_spec(pe: &EntitySpec) -> String {
    let m = &pe.machine;
    let mut out = String::new();
    let _ = writeln!(out, "entity {} of {} {{", pe.sap, pe.service);
    for (i, state) in m.states.iter().enumerate() {
        let kw = match (i == m.initial, state.is_final) {
            (true, true) => "initial final",
            (true, false) => "initial",
            (false, true) => "final",
            (false, false) => "state",
        };
        let _ = writeln!(out, "  {kw} {}", state.id);
    }
    let mut transitions: Vec<_> = m.transitions.iter().collect();
    transitions.sort_by(|a, b| a.id.cmp(&b.id).then(a.source.cmp(&b.source)).then(a.dest.cmp(&b.dest)));
    for t in transitions {
        let _ = writeln!(
            out,
            "  trans {}: {} -> {} {}",
            t.id,
            m.states[t.source].id,
            m.states[t.dest].id,
            entity_event_text(&t.label)
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
    use crate::model::{FlatMachine, FlatState, FlatTransition, MessageId, SapId, TimeInterval};
    use crate::rational::{int, ratio};
    use std::collections::BTreeSet;

    #[test]
    fn fixture_emission_is_canonical_and_idempotent() {
        let spec = parse_service_spec(FIG2).unwrap();
        let once = emit_service_spec(&spec);
        let again = emit_service_spec(&parse_service_spec(&once).unwrap());
        assert_eq!(once, again);
        assert_eq!(parse_service_spec(&once).unwrap(), spec);
        assert!(once.contains("trans tA: i0 -> cs on A at S1 within [1, 3]"));
        assert!(once.contains("channel S1 -> S3 delay [0.1, 0.2]"));
    }

    #[test]
    fn non_terminating_rationals_print_as_fractions() {
        let mut spec = parse_service_spec(FIG2).unwrap();
        let t = &mut spec.machine.transitions[0];
        t.interval = TimeInterval::new(ratio(1, 3), int(3)).unwrap();
        let text = emit_service_spec(&spec);
        assert!(text.contains("within [1/3, 3]"), "{text}");
        assert_eq!(parse_service_spec(&text).unwrap(), spec);
    }

    fn one_state_entity(label: Label) -> EntitySpec {
        EntitySpec {
            service: "svc".into(),
            sap: "S1".into(),
            machine: FlatMachine {
                states: vec![
                    FlatState {
                        id: "a".into(),
                        is_final: false,
                    },
                    FlatState {
                        id: "b".into(),
                        is_final: true,
                    },
                ],
                initial: 0,
                transitions: vec![FlatTransition {
                    id: "t".into(),
                    source: 0,
                    dest: 1,
                    label,
                }],
            },
        }
    }

    #[test]
    fn execute_without_receivers_omits_send_clause() {
        let pe = one_state_entity(Label::plain(EntityEvent::Execute {
            sp: "A".into(),
            interval: TimeInterval::new(int(1), int(2)).unwrap(),
            send_to: BTreeSet::new(),
            msg: None,
        }));
        let text = emit_entity_spec(&pe);
        assert!(text.contains("trans t: a -> b exec A within [1, 2]\n"), "{text}");
        assert!(!text.contains("send"));
        assert_eq!(parse_entity_spec(&text).unwrap(), pe);
    }

    #[test]
    fn receive_lines_have_no_interval() {
        let pe = one_state_entity(Label::plain(EntityEvent::Receive {
            msg: MessageId::new("m_t"),
            from: SapId::new("S2"),
        }));
        let text = emit_entity_spec(&pe);
        assert!(text.contains("trans t: a -> b recv m_t from S2\n"));
        assert!(!text.contains('['));
        assert_eq!(parse_entity_spec(&text).unwrap(), pe);
    }

    #[test]
    fn execute_with_send_guard_and_action_round_trips() {
        let pe = one_state_entity(Label {
            event: EntityEvent::Execute {
                sp: "A".into(),
                interval: TimeInterval::new(int(1), ratio(14, 5)).unwrap(),
                send_to: ["S3".into(), "S2".into()].into_iter().collect(),
                msg: Some(MessageId::new("m_tA")),
            },
            guard: Some("ok".into()),
            action: Some("x := \"y\"".into()),
        });
        let text = emit_entity_spec(&pe);
        assert!(
            text.contains("exec A within [1, 2.8] send m_tA to {S2, S3} guard \"ok\""),
            "{text}"
        );
        assert_eq!(parse_entity_spec(&text).unwrap(), pe);
        let eps = one_state_entity(Label::plain(EntityEvent::Epsilon));
        assert_eq!(parse_entity_spec(&emit_entity_spec(&eps)).unwrap(), eps);
    }
}
