use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::timed::{EventKind, RunEnd, TimedTrace};
use crate::model::{SapId, ServiceSpec, TimeInterval, TransitionId};
use crate::rational::{format_rational, Rational};
use crate::validator::{destination_set_in, Destination, RuleId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("trace event {event} refers to unknown transition '{cause}'")]
    UnknownCause { event: usize, cause: TransitionId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub check: &'static str,
    pub run: usize,
    /// Position in the trace of the offending event.
    pub event: usize,
    pub transition: TransitionId,
    pub value: Rational,
    pub bound: TimeInterval,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "error {} run={} event={} transition={} detail=\"{} not in {}\"",
            self.check,
            self.run,
            self.event,
            self.transition,
            format_rational(&self.value),
            self.bound
        )
    }
}

struct Lookup<'a> {
    spec: &'a ServiceSpec,
    dests: HashMap<TransitionId, Destination>,
}

impl<'a> Lookup<'a> {
    fn new(spec: &'a ServiceSpec) -> Self {
        let index = spec.index();
        let dests = index
            .transitions()
            .iter()
            .filter_map(|(t, _)| destination_set_in(&index, t).ok().map(|d| (t.id.clone(), d)))
            .collect();
        Lookup { spec, dests }
    }

    fn get(&self, event: usize, cause: &TransitionId) -> Result<(&'a TimeInterval, &Destination), CheckError> {
        match (self.spec.transition(cause), self.dests.get(cause)) {
            (Some(t), Some(d)) => Ok((&t.interval, d)),
            _ => Err(CheckError::UnknownCause {
                event,
                cause: cause.clone(),
            }),
        }
    }
}

struct Receipt<'a> {
    to: &'a SapId,
    consumed: &'a Rational,
    arrived: &'a Rational,
}

fn receipts_by_origin(trace: &TimedTrace) -> HashMap<usize, Vec<Receipt<'_>>> {
    let mut out: HashMap<usize, Vec<Receipt<'_>>> = HashMap::new();
    for e in &trace.events {
        if let (EventKind::Recv { to, .. }, Some(origin), Some(arrived)) = (&e.kind, e.origin, &e.arrived) {
            out.entry(origin).or_default().push(Receipt {
                to,
                consumed: &e.time,
                arrived,
            });
        }
    }
    out
}

/// Each SP's time stays inside its service interval: the waiting time
/// alone when nobody is notified, otherwise waiting time plus the transit
/// time of each notification.
pub fn check_lemma1(trace: &TimedTrace, spec: &ServiceSpec) -> Result<Vec<Violation>, CheckError> {
    let lookup = Lookup::new(spec);
    let receipts = receipts_by_origin(trace);
    let mut out = Vec::new();
    for (idx, e) in trace.events.iter().enumerate() {
        let (EventKind::Exec { .. }, Some(waited)) = (&e.kind, &e.waited) else {
            continue;
        };
        let (interval, dest) = lookup.get(idx, &e.cause)?;
        let mut check = |value: Rational| {
            if !interval.contains(&value) {
                out.push(Violation {
                    check: "Lemma1",
                    run: trace.run,
                    event: idx,
                    transition: e.cause.clone(),
                    value,
                    bound: interval.clone(),
                });
            }
        };
        if dest.receivers.is_empty() {
            check(waited.clone());
        } else {
            for r in receipts.get(&idx).into_iter().flatten() {
                check(waited + (r.arrived - &e.time));
            }
        }
    }
    Ok(out)
}

/// Cumulative bounds along the chain of SP completions. The k-th
/// completion must lie within the sums of the first k intervals.
///
/// Completion is the Exec time when nobody is notified, the receipt at the
/// entity performing the next SP when it is notified, and otherwise
/// (including returns to the initial state) the latest receipt. Chains
/// whose choice of receipt decides the outcome are listed in `notes`.
pub fn check_lemma2(trace: &TimedTrace, spec: &ServiceSpec) -> Result<(Vec<Violation>, Vec<String>), CheckError> {
    let lookup = Lookup::new(spec);
    let receipts = receipts_by_origin(trace);
    let execs: Vec<(usize, &SapId)> = trace
        .events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match &e.kind {
            EventKind::Exec { sap, .. } => Some((i, sap)),
            _ => None,
        })
        .collect();
    let mut lo = Rational::default();
    let mut hi = Rational::default();
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    for (k, &(idx, _)) in execs.iter().enumerate() {
        let e = &trace.events[idx];
        let (interval, dest) = lookup.get(idx, &e.cause)?;
        lo += interval.lower();
        hi += interval.upper();
        let bound = TimeInterval::new(lo.clone(), hi.clone()).expect("sums of ordered bounds");
        let completion = if dest.receivers.is_empty() {
            e.time.clone()
        } else {
            let rs = receipts.get(&idx).map(Vec::as_slice).unwrap_or_default();
            if rs.len() < dest.receivers.len() {
                // Run ended before every notification was consumed.
                break;
            }
            let latest = rs.iter().map(|r| r.consumed).max().unwrap().clone();
            let earliest = rs.iter().map(|r| r.consumed).min().unwrap().clone();
            if rs.len() > 1 && bound.contains(&latest) != bound.contains(&earliest) {
                notes.push(format!(
                    "note Lemma2 run={} event={idx} transition={} detail=\"receipts {}..{} straddle {bound}\"",
                    trace.run,
                    e.cause,
                    format_rational(&earliest),
                    format_rational(&latest)
                ));
            }
            let next = execs.get(k + 1).map(|&(_, sap)| sap);
            match next.and_then(|n| rs.iter().find(|r| r.to == n)) {
                Some(r) if dest.rule != RuleId::ReturnToInitial => r.consumed.clone(),
                _ => latest,
            }
        };
        if !bound.contains(&completion) {
            violations.push(Violation {
                check: "Lemma2",
                run: trace.run,
                event: idx,
                transition: e.cause.clone(),
                value: completion,
                bound,
            });
        }
    }
    Ok((violations, notes))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConformanceReport {
    pub lemma1_violations: Vec<Violation>,
    pub lemma2_violations: Vec<Violation>,
    pub deadlocks: Vec<String>,
    pub equivalence_counterexample: Option<String>,
    /// Informational; does not make the report non-empty.
    pub notes: Vec<String>,
}

impl ConformanceReport {
    pub fn is_empty(&self) -> bool {
        self.lemma1_violations.is_empty()
            && self.lemma2_violations.is_empty()
            && self.deadlocks.is_empty()
            && self.equivalence_counterexample.is_none()
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .lemma1_violations
            .iter()
            .chain(&self.lemma2_violations)
            .map(Violation::to_string)
            .collect();
        out.extend(self.deadlocks.iter().map(|d| format!("error Deadlock detail=\"{d}\"")));
        if let Some(c) = &self.equivalence_counterexample {
            out.push(format!("error Counterexample detail=\"{c}\""));
        }
        out.extend(self.notes.iter().cloned());
        out
    }
}

/// Both timing checks over every trace; runs that end stuck are deadlocks.
pub fn check_conformance(spec: &ServiceSpec, traces: &[TimedTrace]) -> Result<ConformanceReport, CheckError> {
    let mut report = ConformanceReport::default();
    for trace in traces {
        report.lemma1_violations.extend(check_lemma1(trace, spec)?);
        let (violations, notes) = check_lemma2(trace, spec)?;
        report.lemma2_violations.extend(violations);
        report.notes.extend(notes);
        if trace.end == RunEnd::Deadlock {
            let at = trace
                .events
                .last()
                .map(|e| format_rational(&e.time))
                .unwrap_or_else(|| "0".into());
            report.deadlocks.push(format!(
                "run {} stuck at t={at} after {} events",
                trace.run,
                trace.events.len()
            ));
        }
    }
    Ok(report)
}
