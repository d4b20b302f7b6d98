//! Projection of a service machine onto each SAP and application of the
//! synthesis rules, producing one primary entity machine per SAP.
//!
//! Both intermediate forms keep the service machine's region hierarchy and
//! attach a label to every transition id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{
    DelayMatrix, EntityEvent, Label, MessageId, ModelError, Region, SapId, ServiceSpec, TimeInterval, TransitionId,
};
use crate::rational::{format_rational, Rational};
use crate::validator::{destination_set_in, ClassifyError, RuleId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProjectedLabel {
    SpLabeled { sp: String, interval: TimeInterval },
    Unlabeled,
}

/// The service machine as seen from one SAP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedSpec {
    pub sap: SapId,
    pub machine: Region,
    pub labels: BTreeMap<TransitionId, ProjectedLabel>,
}

impl ProjectedSpec {
    pub fn label(&self, id: &str) -> Option<&ProjectedLabel> {
        self.labels.get(&TransitionId::from(id))
    }
}

pub fn project(spec: &ServiceSpec, sap: &SapId) -> ProjectedSpec {
    let labels = spec
        .machine
        .all_transitions()
        .into_iter()
        .map(|t| {
            let label = if &t.sap == sap {
                ProjectedLabel::SpLabeled {
                    sp: t.sp.clone(),
                    interval: t.interval.clone(),
                }
            } else {
                ProjectedLabel::Unlabeled
            };
            (t.id.clone(), label)
        })
        .collect();
    ProjectedSpec {
        sap: sap.clone(),
        machine: spec.machine.clone(),
        labels,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdjustError {
    #[error("adjusted interval [{min}, {max}] is empty")]
    ResultEmpty { min: String, max: String },
    #[error("adjusted interval starts below zero ({0})")]
    NegativeResult(String),
    #[error("no channel {from} -> {to}")]
    MissingChannel { from: SapId, to: SapId },
}

/// `[min_t - min_j min d_ij, max_t - max_j max d_ij]` over `j` in `receivers`;
/// the interval itself when nobody is notified.
pub fn adjust_interval(
    interval: &TimeInterval,
    receivers: &BTreeSet<SapId>,
    sender: &SapId,
    delays: &DelayMatrix,
) -> Result<TimeInterval, AdjustError> {
    if receivers.is_empty() {
        return Ok(interval.clone());
    }
    let mut min_min: Option<&Rational> = None;
    let mut max_max: Option<&Rational> = None;
    for j in receivers {
        let d = delays.get(sender, j).ok_or_else(|| AdjustError::MissingChannel {
            from: sender.clone(),
            to: j.clone(),
        })?;
        min_min = Some(min_min.map_or(d.lower(), |m| m.min(d.lower())));
        max_max = Some(max_max.map_or(d.upper(), |m| m.max(d.upper())));
    }
    let lo = interval.lower() - min_min.unwrap();
    let hi = interval.upper() - max_max.unwrap();
    TimeInterval::new(lo.clone(), hi.clone()).map_err(|e| match e {
        ModelError::NegativeTime(_) if lo <= hi => AdjustError::NegativeResult(format_rational(&lo)),
        _ => AdjustError::ResultEmpty {
            min: format_rational(&lo),
            max: format_rational(&hi),
        },
    })
}

/// How one service transition was synthesized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleApplication {
    pub transition: TransitionId,
    pub sap: SapId,
    pub sp: String,
    pub rule: RuleId,
    pub receivers: BTreeSet<SapId>,
    pub original: TimeInterval,
    pub adjusted: TimeInterval,
}

impl fmt::Display for RuleApplication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x: Vec<&str> = self.receivers.iter().map(|s| s.as_str()).collect();
        write!(
            f,
            "transition={} sp={} sap={} rule={} X={{{}}} interval={} adjusted={}",
            self.transition,
            self.sp,
            self.sap,
            self.rule,
            x.join(", "),
            self.original,
            self.adjusted
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("transition '{transition}': {source} (see SynthesizedIntervalEmpty)")]
    Adjust {
        transition: TransitionId,
        source: AdjustError,
    },
    #[error("SAP '{0}' is not declared by the service")]
    UnknownSap(SapId),
}

/// Rule, receiver set and adjusted interval for every transition, in
/// transition-id order.
pub fn plan(spec: &ServiceSpec) -> Result<Vec<RuleApplication>, SynthesisError> {
    let index = spec.index();
    let mut out = Vec::new();
    let mut transitions: Vec<_> = index.transitions().iter().map(|(t, _)| *t).collect();
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    for t in transitions {
        let dest = destination_set_in(&index, t)?;
        let adjusted = adjust_interval(&t.interval, &dest.receivers, &t.sap, &spec.delays).map_err(|source| {
            SynthesisError::Adjust {
                transition: t.id.clone(),
                source,
            }
        })?;
        out.push(RuleApplication {
            transition: t.id.clone(),
            sap: t.sap.clone(),
            sp: t.sp.clone(),
            rule: dest.rule,
            receivers: dest.receivers,
            original: t.interval.clone(),
            adjusted,
        });
    }
    Ok(out)
}

/// Primary entity machine: the service hierarchy with entity events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryEntitySpec {
    pub service: String,
    pub sap: SapId,
    pub machine: Region,
    pub labels: BTreeMap<TransitionId, Label>,
}

impl PrimaryEntitySpec {
    pub fn label(&self, id: &str) -> Option<&Label> {
        self.labels.get(&TransitionId::from(id))
    }
}

pub fn apply_rules(
    projections: &[ProjectedSpec],
    spec: &ServiceSpec,
) -> Result<Vec<PrimaryEntitySpec>, SynthesisError> {
    let applications = plan(spec)?;
    let mut out = Vec::new();
    for proj in projections {
        if !spec.saps.contains(&proj.sap) {
            return Err(SynthesisError::UnknownSap(proj.sap.clone()));
        }
        let mut labels = BTreeMap::new();
        for app in &applications {
            let t = spec.transition(&app.transition).expect("planned transition exists");
            let event = match proj.labels.get(&app.transition) {
                Some(ProjectedLabel::SpLabeled { sp, .. }) => EntityEvent::Execute {
                    sp: sp.clone(),
                    interval: app.adjusted.clone(),
                    send_to: app.receivers.clone(),
                    msg: (!app.receivers.is_empty()).then(|| MessageId::for_transition(&app.transition)),
                },
                _ if app.receivers.contains(&proj.sap) => EntityEvent::Receive {
                    msg: MessageId::for_transition(&app.transition),
                    from: app.sap.clone(),
                },
                _ => EntityEvent::Epsilon,
            };
            let label = match event {
                EntityEvent::Execute { .. } => Label {
                    event,
                    guard: t.guard.clone(),
                    action: t.action.clone(),
                },
                _ => Label::plain(event),
            };
            labels.insert(app.transition.clone(), label);
        }
        out.push(PrimaryEntitySpec {
            service: spec.name.clone(),
            sap: proj.sap.clone(),
            machine: proj.machine.clone(),
            labels,
        });
    }
    Ok(out)
}

/// Projects onto every SAP and applies the rules.
pub fn synthesize_primary(spec: &ServiceSpec) -> Result<Vec<PrimaryEntitySpec>, SynthesisError> {
    let projections: Vec<_> = spec.saps.iter().map(|s| project(spec, s)).collect();
    apply_rules(&projections, spec)
}
