//! Pre-synthesis checks: which synthesis rule governs each transition, the
//! time-assignment inequalities, and structural well-formedness.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::io::{Diagnostic, Severity};
use crate::model::{KindTag, SapId, ServiceSpec, SpecIndex, StateId, Transition, TransitionId};
use crate::rational::{format_rational, Rational};

/// The synthesis rule that applies to a transition, chosen by the kind of
/// its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    /// Destination is the top-level initial (or top-level final) state:
    /// every other entity is synchronized.
    ReturnToInitial,
    /// Destination is the final state of a composite: the entities that
    /// continue after the composite are notified.
    CompositeCompletion,
    /// Destination is a composite: its participants are notified.
    EnterComposite,
    /// Destination is a simple state: the entities acting next are notified.
    SimpleState,
}

impl RuleId {
    pub fn number(self) -> u8 {
        match self {
            RuleId::ReturnToInitial => 1,
            RuleId::CompositeCompletion => 2,
            RuleId::EnterComposite => 3,
            RuleId::SimpleState => 4,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Rule plus the set `X` of entities the executing entity must notify.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Destination {
    pub rule: RuleId,
    pub receivers: BTreeSet<SapId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("transition '{transition}' targets undeclared state '{state}'")]
    UnknownState { transition: TransitionId, state: StateId },
}

pub fn destination_set(t: &Transition, spec: &ServiceSpec) -> Result<Destination, ClassifyError> {
    destination_set_in(&spec.index(), t)
}

pub fn destination_set_in(index: &SpecIndex<'_>, t: &Transition) -> Result<Destination, ClassifyError> {
    let kind = index.kind(&t.dest).ok_or_else(|| ClassifyError::UnknownState {
        transition: t.id.clone(),
        state: t.dest.clone(),
    })?;
    let parent = index.parent(&t.dest).cloned();
    let (rule, mut receivers) = match (kind, parent) {
        (KindTag::Initial | KindTag::Final, None) => {
            (RuleId::ReturnToInitial, index.spec.saps.iter().cloned().collect())
        }
        (KindTag::Final, Some(cs)) => (RuleId::CompositeCompletion, index.continuation_saps(&cs)),
        (KindTag::Composite, _) => (RuleId::EnterComposite, index.participants(&t.dest)),
        // A nested region's initial state behaves like a simple state when
        // re-entered from inside its region.
        (KindTag::Simple | KindTag::Initial, _) => (RuleId::SimpleState, index.out_saps(&t.dest)),
    };
    receivers.remove(&t.sap);
    Ok(Destination { rule, receivers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimingRule {
    MinBelowDelay,
    MaxBelowDelay,
    SpreadTooSmall,
    SynthesizedIntervalEmpty,
    MissingChannel,
}

impl TimingRule {
    pub fn severity(self) -> Severity {
        match self {
            TimingRule::SynthesizedIntervalEmpty => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for TimingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingViolation {
    pub transition: TransitionId,
    pub rule: TimingRule,
    /// The evaluated inequality, with numbers.
    pub detail: String,
}

impl TimingViolation {
    pub fn severity(&self) -> Severity {
        self.rule.severity()
    }

    /// `<severity> <code> transition=<id> detail="<inequality>"`
    pub fn report_line(&self) -> String {
        format!(
            "{} {} transition={} detail=\"{}\"",
            self.severity(),
            self.rule,
            self.transition,
            self.detail
        )
    }
}

/// One evaluated inequality `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingCheck {
    pub transition: TransitionId,
    pub rule: TimingRule,
    pub lhs: Rational,
    pub rhs: Rational,
    pub detail: String,
}

impl TimingCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

fn list(values: &[Rational]) -> String {
    values.iter().map(format_rational).collect::<Vec<_>>().join(", ")
}

/// Evaluates every timing inequality of every transition with a non-empty
/// receiver set. Missing channels are reported as failing checks with
/// `lhs = 0, rhs = 1`.
pub fn timing_checks(spec: &ServiceSpec) -> Vec<TimingCheck> {
    let index = spec.index();
    let mut checks = Vec::new();
    let mut transitions: Vec<&Transition> = index.transitions().iter().map(|(t, _)| *t).collect();
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    for t in transitions {
        let Ok(dest) = destination_set_in(&index, t) else {
            continue;
        };
        if dest.receivers.is_empty() {
            continue;
        }
        let mut delays = Vec::new();
        let mut missing = Vec::new();
        for j in &dest.receivers {
            match spec.delays.get(&t.sap, j) {
                Some(d) => delays.push(d),
                None => missing.push(j.as_str()),
            }
        }
        if !missing.is_empty() {
            checks.push(TimingCheck {
                transition: t.id.clone(),
                rule: TimingRule::MissingChannel,
                lhs: Rational::from_integer(0.into()),
                rhs: Rational::from_integer(1.into()),
                detail: format!("no channel {} -> {{{}}}", t.sap, missing.join(", ")),
            });
            continue;
        }
        let mins: Vec<Rational> = delays.iter().map(|d| d.lower().clone()).collect();
        let maxs: Vec<Rational> = delays.iter().map(|d| d.upper().clone()).collect();
        let spreads: Vec<Rational> = delays.iter().map(|d| d.spread()).collect();
        let max_of = |v: &[Rational]| v.iter().max().cloned().unwrap();
        let min_t = t.interval.lower().clone();
        let max_t = t.interval.upper().clone();
        let f = format_rational;

        let max_min = max_of(&mins);
        checks.push(TimingCheck {
            transition: t.id.clone(),
            rule: TimingRule::MinBelowDelay,
            detail: format!("{} >= maximum({}) = {}", f(&min_t), list(&mins), f(&max_min)),
            lhs: min_t.clone(),
            rhs: max_min,
        });
        let max_max = max_of(&maxs);
        checks.push(TimingCheck {
            transition: t.id.clone(),
            rule: TimingRule::MaxBelowDelay,
            detail: format!("{} >= maximum({}) = {}", f(&max_t), list(&maxs), f(&max_max)),
            lhs: max_t.clone(),
            rhs: max_max.clone(),
        });
        let max_spread = max_of(&spreads);
        let spread_rhs = &min_t + &max_spread;
        let spread_terms: Vec<String> = delays
            .iter()
            .map(|d| format!("({} - {})", f(d.upper()), f(d.lower())))
            .collect();
        checks.push(TimingCheck {
            transition: t.id.clone(),
            rule: TimingRule::SpreadTooSmall,
            detail: format!(
                "{} >= {} + maximum({}) = {}",
                f(&max_t),
                f(&min_t),
                spread_terms.join(", "),
                f(&spread_rhs)
            ),
            lhs: max_t.clone(),
            rhs: spread_rhs,
        });
        let min_min = mins.iter().min().cloned().unwrap();
        let width = &max_t - &min_t;
        let needed = &max_max - &min_min;
        checks.push(TimingCheck {
            transition: t.id.clone(),
            rule: TimingRule::SynthesizedIntervalEmpty,
            detail: format!(
                "{} - {} = {} >= {} - {} = {} (adjusted interval [{}, {}])",
                f(&max_t),
                f(&min_t),
                f(&width),
                f(&max_max),
                f(&min_min),
                f(&needed),
                f(&(&min_t - &min_min)),
                f(&(&max_t - &max_max)),
            ),
            lhs: width,
            rhs: needed,
        });
    }
    checks
}

/// Failing timing checks. Transitions with no receivers are vacuously
/// valid.
pub fn validate_timing(spec: &ServiceSpec) -> Vec<TimingViolation> {
    timing_checks(spec)
        .into_iter()
        .filter(|c| !c.holds())
        .map(|c| TimingViolation {
            transition: c.transition,
            rule: c.rule,
            detail: if c.rule == TimingRule::MissingChannel {
                c.detail
            } else {
                format!("{} fails", c.detail)
            },
        })
        .collect()
}

/// Structural well-formedness: one top-level initial, one initial per
/// composite, transitions only crossing composite boundaries outward,
/// reachability, and composites that can complete. Also warns about
/// shapes the synthesized protocol cannot realize faithfully.
pub fn validate_structure(spec: &ServiceSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let index = spec.index();

    let mut ids = HashSet::new();
    for s in spec.machine.all_states() {
        if !ids.insert(s.id.as_str()) {
            out.push(Diagnostic::error("duplicate-id", format!("duplicate state '{}'", s.id)).on(s.id.as_str()));
        }
    }
    for t in spec.machine.all_transitions() {
        if !ids.insert(t.id.as_str()) {
            out.push(Diagnostic::error("duplicate-id", format!("duplicate identifier '{}'", t.id)).on(t.id.as_str()));
        }
    }
    let declared: HashSet<&SapId> = spec.saps.iter().collect();
    if declared.len() != spec.saps.len() {
        out.push(Diagnostic::error("duplicate-id", "duplicate SAP name"));
    }
    for (from, to, _) in spec.delays.iter() {
        for sap in [from, to] {
            if !declared.contains(sap) {
                out.push(
                    Diagnostic::error("undeclared-sap", format!("channel references undeclared SAP '{sap}'"))
                        .on(sap.as_str()),
                );
            }
        }
    }

    let top_initials = spec
        .machine
        .states
        .iter()
        .filter(|s| s.kind.tag() == KindTag::Initial)
        .count();
    if top_initials != 1 {
        out.push(Diagnostic::error(
            "initial-count",
            format!("the machine needs exactly one top-level initial state, found {top_initials}"),
        ));
    }
    let top_finals = spec
        .machine
        .states
        .iter()
        .filter(|s| s.kind.tag() == KindTag::Final)
        .count();
    if top_finals > 1 {
        out.push(Diagnostic::error("final-count", "more than one top-level final state"));
    }
    for s in spec.machine.all_states() {
        let Some(region) = index.region_of(&s.id) else { continue };
        let initials = region
            .states
            .iter()
            .filter(|x| x.kind.tag() == KindTag::Initial)
            .count();
        if initials != 1 {
            out.push(
                Diagnostic::error(
                    "composite-initial",
                    format!(
                        "composite '{}' needs exactly one internal initial state, found {initials}",
                        s.id
                    ),
                )
                .on(s.id.as_str()),
            );
        }
        let finals = region.states.iter().filter(|x| x.kind.tag() == KindTag::Final).count();
        if finals > 1 {
            out.push(
                Diagnostic::error(
                    "final-count",
                    format!("composite '{}' has more than one final state", s.id),
                )
                .on(s.id.as_str()),
            );
        }
        if finals == 0 && index.outgoing(&s.id).next().is_some() {
            out.push(
                Diagnostic::error(
                    "composite-cannot-complete",
                    format!("composite '{}' has outgoing transitions but no final state", s.id),
                )
                .on(s.id.as_str()),
            );
        }
    }

    for (t, declaring) in index.transitions() {
        let el = t.id.as_str();
        if !declared.contains(&t.sap) {
            out.push(
                Diagnostic::error(
                    "undeclared-sap",
                    format!("transition '{}' references undeclared SAP '{}'", t.id, t.sap),
                )
                .on(el),
            );
        }
        let (Some(src_kind), Some(_)) = (index.kind(&t.source), index.kind(&t.dest)) else {
            out.push(
                Diagnostic::error(
                    "undeclared-state",
                    format!("transition '{}' references an undeclared state", t.id),
                )
                .on(el),
            );
            continue;
        };
        if index.parent(&t.source) != declaring.as_ref() {
            out.push(
                Diagnostic::error(
                    "misplaced-transition",
                    format!(
                        "transition '{}' must be declared in the region containing its source '{}'",
                        t.id, t.source
                    ),
                )
                .on(el),
            );
        }
        let dest_parent = index.parent(&t.dest);
        let allowed = match (dest_parent, declaring) {
            (None, _) => true,
            (Some(p), Some(d)) => p == d || index.is_inside(d, p),
            (Some(_), None) => false,
        };
        if !allowed {
            out.push(
                Diagnostic::error(
                    "enters-interior",
                    format!(
                        "transition '{}' enters the interior of a composite; target the composite '{}' instead",
                        t.id,
                        dest_parent.map(|p| p.as_str()).unwrap_or("?")
                    ),
                )
                .on(el),
            );
        }
        if src_kind == KindTag::Final {
            out.push(
                Diagnostic::error(
                    "final-outgoing",
                    format!("final state '{}' has an outgoing transition", t.source),
                )
                .on(el),
            );
        }
    }

    if out.iter().any(Diagnostic::is_error) {
        return out;
    }

    // Flattened view: composites are replaced by their region's initial
    // (entering) and final (leaving).
    let mut edges: BTreeMap<StateId, Vec<(&Transition, StateId)>> = BTreeMap::new();
    for (t, _) in index.transitions() {
        edges
            .entry(index.exit_state(&t.source))
            .or_default()
            .push((t, index.entry_state(&t.dest)));
    }
    let mut reached = HashSet::new();
    if let Some(init) = index.top_initial() {
        let mut stack = vec![init.id.clone()];
        reached.insert(init.id.clone());
        while let Some(s) = stack.pop() {
            for (_, d) in edges.get(&s).into_iter().flatten() {
                if reached.insert(d.clone()) {
                    stack.push(d.clone());
                }
            }
        }
    }
    for s in spec.machine.all_states() {
        let probe = match s.kind.tag() {
            KindTag::Composite => index.entry_state(&s.id),
            _ => s.id.clone(),
        };
        if !reached.contains(&probe) {
            out.push(Diagnostic::error("unreachable", format!("state '{}' is unreachable", s.id)).on(s.id.as_str()));
        }
    }

    for (flat_source, outs) in &edges {
        let saps: BTreeSet<&SapId> = outs.iter().map(|(t, _)| &t.sap).collect();
        if saps.len() > 1 {
            let names: Vec<&str> = saps.iter().map(|s| s.as_str()).collect();
            out.push(
                Diagnostic::warning(
                    "nonlocal-choice",
                    format!(
                        "state '{flat_source}' offers SPs at several SAPs ({}); their entities may both act",
                        names.join(", ")
                    ),
                )
                .on(flat_source.as_str()),
            );
        }
        for (t, flat_dest) in outs {
            let Ok(dest) = destination_set_in(&index, t) else {
                continue;
            };
            let next: BTreeSet<&SapId> = edges
                .get(flat_dest)
                .into_iter()
                .flatten()
                .map(|(n, _)| &n.sap)
                .collect();
            if !dest.receivers.is_empty() && next.contains(&t.sap) {
                out.push(
                    Diagnostic::warning(
                        "local-continuation",
                        format!(
                            "transition '{}' notifies other entities but {} also acts next, before they synchronize",
                            t.id, t.sap
                        ),
                    )
                    .on(t.id.as_str()),
                );
            }
        }
    }
    for s in spec.machine.all_states() {
        let kind = s.kind.tag();
        if matches!(kind, KindTag::Composite | KindTag::Final) {
            continue;
        }
        if !edges.contains_key(&s.id) && reached.contains(&s.id) {
            out.push(
                Diagnostic::warning(
                    "dead-end",
                    format!("non-final state '{}' has no outgoing transitions", s.id),
                )
                .on(s.id.as_str()),
            );
        }
    }
    out
}

/// Structural diagnostics and timing violations together.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub structure: Vec<Diagnostic>,
    pub timing: Vec<TimingViolation>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.structure.iter().any(Diagnostic::is_error) || self.timing.iter().any(|v| v.severity() == Severity::Error)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .structure
            .iter()
            .map(|d| {
                let mut line = format!("{} {}", d.severity, d.code);
                if let Some(e) = &d.element {
                    line.push_str(&format!(" element={e}"));
                }
                if let Some(l) = d.location {
                    line.push_str(&format!(" at={l}"));
                }
                line.push_str(&format!(" detail=\"{}\"", d.message));
                line
            })
            .collect();
        lines.extend(self.timing.iter().map(TimingViolation::report_line));
        lines
    }
}

/// Runs structural checks and, when they pass, timing checks.
pub fn validate(spec: &ServiceSpec) -> ValidationReport {
    let structure = validate_structure(spec);
    let timing = if structure.iter().any(Diagnostic::is_error) {
        Vec::new()
    } else {
        validate_timing(spec)
    };
    ValidationReport { structure, timing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG2;
    use crate::io::parse_service_spec;
    use crate::model::TimeInterval;
    use crate::rational::{int, parse_rational, ratio};

    fn fig2() -> ServiceSpec {
        parse_service_spec(FIG2).unwrap()
    }

    fn saps(names: &[&str]) -> BTreeSet<SapId> {
        names.iter().map(|n| SapId::from(*n)).collect()
    }

    fn dest_of(spec: &ServiceSpec, id: &str) -> Destination {
        destination_set(spec.transition(&id.into()).unwrap(), spec).unwrap()
    }

    fn set_interval(spec: &mut ServiceSpec, id: &str, lo: &str, hi: &str) {
        let lo = parse_rational(lo).unwrap();
        let hi = parse_rational(hi).unwrap();
        fn walk(r: &mut crate::model::Region, id: &str, iv: &TimeInterval) {
            for t in &mut r.transitions {
                if t.id.as_str() == id {
                    t.interval = iv.clone();
                }
            }
            for s in &mut r.states {
                if let crate::model::StateKind::Composite(inner) = &mut s.kind {
                    walk(inner, id, iv);
                }
            }
        }
        walk(&mut spec.machine, id, &TimeInterval::new(lo, hi).unwrap());
    }

    #[test]
    fn fixture_destination_sets() {
        let spec = fig2();
        let a = dest_of(&spec, "tA");
        assert_eq!((a.rule, a.receivers), (RuleId::EnterComposite, saps(&["S2", "S3"])));
        let e = dest_of(&spec, "tE");
        assert_eq!((e.rule, e.receivers), (RuleId::ReturnToInitial, saps(&["S1", "S3"])));
        let b = dest_of(&spec, "tB");
        assert_eq!((b.rule, b.receivers), (RuleId::CompositeCompletion, saps(&["S1"])));
        let c = dest_of(&spec, "tC");
        assert_eq!((c.rule, c.receivers), (RuleId::SimpleState, saps(&["S2"])));
        let d = dest_of(&spec, "tD");
        assert_eq!((d.rule, d.receivers), (RuleId::SimpleState, saps(&["S2"])));
    }

    #[test]
    fn self_contained_transition_has_no_receivers() {
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s state u
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> u on Q at A within [1, 2]
               trans t3: u -> i on R at B within [1, 2] } }",
        )
        .unwrap();
        let d = dest_of(&spec, "t1");
        assert_eq!(d.rule, RuleId::SimpleState);
        assert!(d.receivers.is_empty());
    }

    #[test]
    fn top_level_final_synchronizes_everyone() {
        let spec = parse_service_spec(
            "service x { saps A, B, C machine { initial i final f trans t: i -> f on P at A within [1, 2] } }",
        )
        .unwrap();
        let d = dest_of(&spec, "t");
        assert_eq!((d.rule, d.receivers), (RuleId::ReturnToInitial, saps(&["B", "C"])));
    }

    #[test]
    fn fixture_timing_is_valid_with_expected_numbers() {
        let spec = fig2();
        assert!(validate_timing(&spec).is_empty());
        let a: Vec<_> = timing_checks(&spec)
            .into_iter()
            .filter(|c| c.transition.as_str() == "tA")
            .collect();
        let by = |r| a.iter().find(|c| c.rule == r).unwrap();
        let max = by(TimingRule::MaxBelowDelay);
        assert_eq!((max.lhs.clone(), max.rhs.clone()), (int(3), ratio(2, 10)));
        assert_eq!(max.detail, "3 >= maximum(0.1, 0.2) = 0.2");
        let min = by(TimingRule::MinBelowDelay);
        assert_eq!((min.lhs.clone(), min.rhs.clone()), (int(1), ratio(1, 10)));
        assert_eq!(min.detail, "1 >= maximum(0, 0.1) = 0.1");
        let spread = by(TimingRule::SpreadTooSmall);
        assert_eq!((spread.lhs.clone(), spread.rhs.clone()), (int(3), ratio(11, 10)));
        assert_eq!(spread.detail, "3 >= 1 + maximum((0.1 - 0), (0.2 - 0.1)) = 1.1");
    }

    #[test]
    fn min_below_delay_is_reported() {
        let mut spec = fig2();
        set_interval(&mut spec, "tA", "0.05", "3");
        let v = validate_timing(&spec);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, TimingRule::MinBelowDelay);
        assert_eq!(v[0].transition.as_str(), "tA");
        assert!(v[0]
            .report_line()
            .starts_with("error MinBelowDelay transition=tA detail=\"0.05 >= maximum(0, 0.1) = 0.1 fails\""));
    }

    #[test]
    fn inequalities_do_not_imply_nonempty_adjusted_interval() {
        let mut spec = fig2();
        set_interval(&mut spec, "tA", "1", "1.1");
        let v = validate_timing(&spec);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, TimingRule::SynthesizedIntervalEmpty);
        assert_eq!(v[0].severity(), Severity::Warning);
        let report = validate(&spec);
        assert!(!report.has_errors());
    }

    #[test]
    fn empty_receiver_set_is_vacuously_valid() {
        let spec = parse_service_spec(
            "service x { saps A machine { initial i state s trans t1: i -> s on P at A within [0, 0] trans t2: s -> i on Q at A within [5, 9] } }",
        )
        .unwrap();
        assert!(validate_timing(&spec).is_empty());
        assert!(timing_checks(&spec).is_empty());
    }

    #[test]
    fn missing_channel() {
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s trans t1: i -> s on P at A within [1, 2] trans t2: s -> i on Q at B within [1, 2] } }",
        )
        .unwrap();
        let v = validate_timing(&spec);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.rule == TimingRule::MissingChannel));
    }

    #[test]
    fn fixture_structure_is_clean() {
        assert!(validate_structure(&fig2()).is_empty());
    }

    #[test]
    fn structural_errors() {
        let codes = |src: &str| -> Vec<String> {
            validate_structure(&parse_service_spec(src).unwrap())
                .into_iter()
                .map(|d| d.code)
                .collect()
        };
        assert!(codes("service x { saps A machine { initial i initial j } }").contains(&"initial-count".to_string()));
        assert!(codes("service x { saps A machine { state s } }").contains(&"initial-count".to_string()));
        assert!(codes(
            "service x { saps A machine { initial i composite c { state a final f trans t2: a -> f on Q at A within [0, 1] } trans t: i -> c on P at A within [0, 1] } }"
        )
        .contains(&"composite-initial".to_string()));
        assert!(codes(
            "service x { saps A machine { initial i state s composite c { initial a state b trans t2: a -> b on Q at A within [0, 1] } trans t: i -> b on P at A within [0, 1] } }"
        )
        .contains(&"enters-interior".to_string()));
        assert!(codes(
            "service x { saps A machine { initial i composite c { initial a } state s trans t: i -> c on P at A within [0, 1] trans u: c -> s on Q at A within [0, 1] } }"
        )
        .contains(&"composite-cannot-complete".to_string()));
        assert!(codes("service x { saps A machine { initial i state s state lost trans t: i -> s on P at A within [0, 1] trans u: s -> i on Q at A within [0, 1] } }")
            .contains(&"unreachable".to_string()));
        assert!(codes("service x { saps A machine { initial i state s trans t: s -> i on P at A within [0, 1] composite c { initial a trans u: i -> a on Q at A within [0, 1] } } }")
            .contains(&"misplaced-transition".to_string()));
    }

    #[test]
    fn exit_from_substate_is_structurally_valid() {
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s
               composite c { initial a final f
                 trans t2: a -> f on Q at B within [1, 2]
                 trans t3: a -> s on X at B within [1, 2] }
               trans t1: i -> c on P at A within [1, 2]
               trans t4: c -> s on R at A within [1, 2]
               trans t5: s -> i on S at A within [1, 2] } }",
        )
        .unwrap();
        let diags = validate_structure(&spec);
        assert!(!crate::io::has_errors(&diags), "{diags:?}");
        // Exits are classified by their destination like any transition.
        let d = dest_of(&spec, "t3");
        assert_eq!((d.rule, d.receivers), (RuleId::SimpleState, saps(&["A"])));
    }

    #[test]
    fn warnings_for_risky_shapes() {
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s state u
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> u on Q at A within [1, 2]
               trans t3: s -> i on R at B within [1, 2] } }",
        )
        .unwrap();
        let diags = validate_structure(&spec);
        let codes: Vec<_> = diags.iter().map(|d| d.code.as_str()).collect();
        assert!(codes.contains(&"nonlocal-choice"));
        assert!(codes.contains(&"dead-end"));
        assert!(!crate::io::has_errors(&diags));
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> i on Q at B within [1, 2]
               trans t3: s -> s on R at B within [1, 2] } }",
        )
        .unwrap();
        let codes: Vec<_> = validate_structure(&spec).into_iter().map(|d| d.code).collect();
        assert!(!codes.contains(&"local-continuation".to_string()));
        let spec = parse_service_spec(
            "service x { saps A, B machine { initial i state s
               trans t1: i -> s on P at A within [1, 2]
               trans t2: s -> i on Q at B within [1, 2]
               trans t0: i -> i on Z at A within [1, 2] } }",
        )
        .unwrap();
        let codes: Vec<_> = validate_structure(&spec).into_iter().map(|d| d.code).collect();
        assert!(codes.contains(&"local-continuation".to_string()), "{codes:?}");
    }
}
