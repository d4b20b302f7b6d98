//! End-to-end synthesis: validate, project, apply rules, reduce.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use thiserror::Error;

use crate::io::{emit_entity_spec, Diagnostic};
use crate::model::{EntitySpec, FlatMachine, ServiceSpec, TransitionId};
use crate::reducer::{flatten, minimize, remove_epsilon_cycles, remove_epsilon_transitions, ReduceError};
use crate::synthesizer::{plan, synthesize_primary, PrimaryEntitySpec, RuleApplication, SynthesisError};
use crate::validator::{validate, ValidationReport};

#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    #[error("specification is invalid:\n{}", .0.lines().join("\n"))]
    Invalid(ValidationReport),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("entity {sap}: {source}")]
    Reduce { sap: String, source: ReduceError },
}

/// Flatten, collapse ε-cycles, remove ε-moves, minimize.
pub fn reduce(ppe: &PrimaryEntitySpec) -> Result<FlatMachine, ReduceError> {
    let flat = flatten(ppe)?;
    let acyclic = remove_epsilon_cycles(&flat);
    let observable = remove_epsilon_transitions(&acyclic);
    Ok(minimize(&observable))
}

/// Makes transition ids unique and orders transitions by id. Copies of a
/// service transition made by ε-removal get `__2`, `__3`, ... suffixes.
pub fn normalize_ids(m: &FlatMachine) -> FlatMachine {
    let mut out = m.clone();
    out.transitions.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then(a.source.cmp(&b.source))
            .then(a.dest.cmp(&b.dest))
            .then(a.label.cmp(&b.label))
    });
    let mut count: HashMap<TransitionId, usize> = HashMap::new();
    for t in &mut out.transitions {
        let n = count.entry(t.id.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            t.id = TransitionId::new(format!("{}__{n}", t.id));
        }
    }
    out.transitions.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// The service transition an entity transition id was derived from.
pub fn cause_of(id: &TransitionId) -> &str {
    let s = id.as_str();
    match s.rsplit_once("__") {
        Some((base, n)) if !base.is_empty() && !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => base,
        _ => s,
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub service: String,
    pub entities: Vec<EntitySpec>,
    pub applications: Vec<RuleApplication>,
    pub warnings: Vec<Diagnostic>,
}

impl Synthesis {
    pub fn entity(&self, sap: &str) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.sap.as_str() == sap)
    }

    /// Rule per transition, adjusted intervals, and reduction sizes.
    pub fn log(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "service {}", self.service);
        for w in &self.warnings {
            let _ = writeln!(out, "{w}");
        }
        for app in &self.applications {
            let _ = writeln!(out, "{app}");
        }
        for e in &self.entities {
            let _ = writeln!(
                out,
                "entity {} states={} transitions={}",
                e.sap,
                e.machine.states.len(),
                e.machine.transitions.len()
            );
        }
        out
    }

    /// File name to content: one `<sap>.pe` per entity plus `pipeline.log`.
    pub fn outputs(&self) -> BTreeMap<String, String> {
        let mut files: BTreeMap<String, String> = self
            .entities
            .iter()
            .map(|e| (format!("{}.pe", e.sap), emit_entity_spec(e)))
            .collect();
        files.insert("pipeline.log".into(), self.log());
        files
    }
}

pub fn synthesize(spec: &ServiceSpec) -> Result<Synthesis, PipelineError> {
    let report = validate(spec);
    if report.has_errors() {
        return Err(PipelineError::Invalid(report));
    }
    let mut warnings = report.structure;
    warnings.extend(
        report
            .timing
            .iter()
            .map(|v| Diagnostic::warning(&v.rule.to_string(), v.detail.clone()).on(v.transition.as_str())),
    );
    let applications = plan(spec)?;
    let mut entities = Vec::new();
    for ppe in synthesize_primary(spec)? {
        let machine = reduce(&ppe).map_err(|source| PipelineError::Reduce {
            sap: ppe.sap.to_string(),
            source,
        })?;
        entities.push(EntitySpec {
            service: spec.name.clone(),
            sap: ppe.sap.clone(),
            machine: normalize_ids(&machine),
        });
    }
    Ok(Synthesis {
        service: spec.name.clone(),
        entities,
        applications,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG2;
    use crate::io::{parse_entity_spec, parse_service_spec};
    use crate::model::EntityEvent;

    fn fig2() -> Synthesis {
        synthesize(&parse_service_spec(FIG2).unwrap()).unwrap()
    }

    fn events(e: &EntitySpec) -> Vec<String> {
        let m = &e.machine;
        m.transitions
            .iter()
            .map(|t| format!("{} -{}-> {}", m.states[t.source].id, t.label, m.states[t.dest].id))
            .collect()
    }

    #[test]
    fn fixture_entities() {
        let s = fig2();
        assert_eq!(s.entities.len(), 3);
        assert_eq!(
            events(s.entity("S1").unwrap()),
            [
                "i0 -A [1, 2.8] !m_tA to {S2, S3}-> ci",
                "ci -?m_tB from S2-> cf",
                "cf -D [1, 1.9] !m_tD to {S2}-> s1",
                "s1 -?m_tE from S2-> i0",
            ]
        );
        assert_eq!(
            events(s.entity("S2").unwrap()),
            [
                "i0 -?m_tA from S1-> ci",
                "c1 -B [1, 4] !m_tB to {S1}-> cf",
                "ci -?m_tC from S3-> c1",
                "cf -?m_tD from S1-> s1",
                "s1 -E [1, 1.9] !m_tE to {S1, S3}-> i0",
            ]
        );
        assert_eq!(
            events(s.entity("S3").unwrap()),
            [
                "i0 -?m_tA from S1-> ci",
                "ci -C [2, 2.9] !m_tC to {S2}-> c1",
                "c1 -?m_tE from S2-> i0",
            ]
        );
        for e in &s.entities {
            assert!(e.machine.transitions.iter().all(|t| !t.label.event.is_epsilon()));
        }
    }

    #[test]
    fn outputs_round_trip_and_are_stable() {
        let a = fig2().outputs();
        let b = fig2().outputs();
        assert_eq!(a, b);
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            ["S1.pe", "S2.pe", "S3.pe", "pipeline.log"]
        );
        let s = fig2();
        for e in &s.entities {
            assert_eq!(&parse_entity_spec(&a[&format!("{}.pe", e.sap)]).unwrap(), e);
        }
        assert!(a["pipeline.log"].contains("transition=tE sp=E sap=S2 rule=1 X={S1, S3}"));
    }

    #[test]
    fn invalid_spec_is_refused() {
        let text = FIG2.replace("within [1, 3]", "within [0.05, 3]");
        let err = synthesize(&parse_service_spec(&text).unwrap()).unwrap_err();
        assert!(matches!(err, PipelineError::Invalid(_)));
        assert!(err.to_string().contains("MinBelowDelay"));
    }

    #[test]
    fn empty_adjusted_interval_aborts() {
        let text = FIG2.replace("within [1, 3]", "within [1, 1.1]");
        let err = synthesize(&parse_service_spec(&text).unwrap()).unwrap_err();
        assert!(
            matches!(err, PipelineError::Synthesis(SynthesisError::Adjust { .. })),
            "{err}"
        );
    }

    #[test]
    fn copies_get_suffixes() {
        let spec = parse_service_spec(
            "service x { saps A, B channel A -> B delay [0, 1] channel B -> A delay [0, 1]
               machine { initial i state s state u
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> u on Q at A within [1, 2]
               trans t3: u -> i on R at B within [1, 2]
               trans t4: s -> i on Z at B within [1, 2] } }",
        )
        .unwrap();
        let s = synthesize(&spec).unwrap();
        for e in &s.entities {
            let ids: Vec<&str> = e.machine.transitions.iter().map(|t| t.id.as_str()).collect();
            let mut sorted = ids.clone();
            sorted.dedup();
            assert_eq!(ids, sorted);
        }
        assert_eq!(cause_of(&"t1__2".into()), "t1");
        assert_eq!(cause_of(&"t1".into()), "t1");
        assert_eq!(cause_of(&"a__b".into()), "a__b");
    }

    #[test]
    fn one_sap_service() {
        let spec = parse_service_spec(
            "service solo { saps A machine { initial i state s
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> i on Q at A within [1, 2] } }",
        )
        .unwrap();
        let s = synthesize(&spec).unwrap();
        assert_eq!(s.outputs().len(), 2);
        assert!(!s.outputs()["A.pe"].contains("send"));
        assert!(s.entities[0]
            .machine
            .transitions
            .iter()
            .all(|t| matches!(&t.label.event, EntityEvent::Execute { msg: None, .. })));
    }
}
