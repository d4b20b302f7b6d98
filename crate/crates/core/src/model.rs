//! Domain types for service and protocol-entity specifications.
//!
//! A [`ServiceSpec`] is a hierarchical state machine whose transitions are
//! labelled with service primitives observed at service access points. The
//! synthesized per-entity machines are [`EntitySpec`]s: flat machines whose
//! transitions carry [`EntityEvent`]s.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::rational::{format_rational, Rational};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                Self(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_string())
            }
        }
    };
}

string_id!(
    /// Service access point; also names the protocol entity attached to it.
    SapId
);
string_id!(StateId);
string_id!(TransitionId);
string_id!(
    /// Synchronization message name, derived from the originating transition.
    MessageId
);

impl MessageId {
    /// `m_<transition id>`, shared by every receiver of one send.
    pub fn for_transition(id: &TransitionId) -> Self {
        Self(format!("m_{}", id.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("interval min exceeds max ({min} > {max})")]
    InvertedInterval { min: String, max: String },
    #[error("negative time value {0}")]
    NegativeTime(String),
    #[error("channel from {0} to itself")]
    SelfChannel(SapId),
}

/// Closed interval `[min, max]` of non-negative exact times.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeInterval {
    min: Rational,
    max: Rational,
}

impl TimeInterval {
    pub fn new(min: Rational, max: Rational) -> Result<Self, ModelError> {
        let zero = Rational::from_integer(0.into());
        if min < zero {
            return Err(ModelError::NegativeTime(format_rational(&min)));
        }
        if max < zero {
            return Err(ModelError::NegativeTime(format_rational(&max)));
        }
        if min > max {
            return Err(ModelError::InvertedInterval {
                min: format_rational(&min),
                max: format_rational(&max),
            });
        }
        Ok(Self { min, max })
    }

    pub fn lower(&self) -> &Rational {
        &self.min
    }

    pub fn upper(&self) -> &Rational {
        &self.max
    }

    pub fn contains(&self, value: &Rational) -> bool {
        &self.min <= value && value <= &self.max
    }

    pub fn spread(&self) -> Rational {
        &self.max - &self.min
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.min), format_rational(&self.max))
    }
}

/// Channel delay bounds for each ordered pair of distinct SAPs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelayMatrix {
    entries: BTreeMap<(SapId, SapId), TimeInterval>,
}

impl DelayMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the bounds of `from -> to`.
    pub fn insert(&mut self, from: SapId, to: SapId, delay: TimeInterval) -> Result<Option<TimeInterval>, ModelError> {
        if from == to {
            return Err(ModelError::SelfChannel(from));
        }
        Ok(self.entries.insert((from, to), delay))
    }

    pub fn get(&self, from: &SapId, to: &SapId) -> Option<&TimeInterval> {
        self.entries.get(&(from.clone(), to.clone()))
    }

    /// Entries in lexicographic `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&SapId, &SapId, &TimeInterval)> {
        self.entries.iter().map(|((f, t), d)| (f, t, d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateKind {
    /// Initial state of a region. At the top level this is the stable
    /// initial state the service returns to.
    Initial,
    Simple,
    Final,
    /// Composite state with exactly one region.
    Composite(Region),
}

impl StateKind {
    pub fn tag(&self) -> KindTag {
        match self {
            StateKind::Initial => KindTag::Initial,
            StateKind::Simple => KindTag::Simple,
            StateKind::Final => KindTag::Final,
            StateKind::Composite(_) => KindTag::Composite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KindTag {
    Initial,
    Simple,
    Final,
    Composite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub id: StateId,
    pub kind: StateKind,
}

impl State {
    pub fn new(id: impl Into<String>, kind: StateKind) -> Self {
        Self {
            id: StateId::new(id),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: TransitionId,
    pub source: StateId,
    pub dest: StateId,
    /// Service primitive name.
    pub sp: String,
    pub sap: SapId,
    pub interval: TimeInterval,
    pub guard: Option<String>,
    pub action: Option<String>,
}

/// States plus the transitions declared alongside them. Transitions are
/// kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Region {
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
}

impl Region {
    pub fn new(states: Vec<State>, mut transitions: Vec<Transition>) -> Self {
        transitions.sort_by(|a, b| a.id.cmp(&b.id));
        Self { states, transitions }
    }

    pub fn initial(&self) -> Option<&State> {
        self.states.iter().find(|s| matches!(s.kind, StateKind::Initial))
    }

    pub fn final_state(&self) -> Option<&State> {
        self.states.iter().find(|s| matches!(s.kind, StateKind::Final))
    }

    /// Every transition in this region and all nested regions, pre-order.
    pub fn all_transitions(&self) -> Vec<&Transition> {
        let mut out = Vec::new();
        self.collect_transitions(&mut out);
        out
    }

    fn collect_transitions<'a>(&'a self, out: &mut Vec<&'a Transition>) {
        out.extend(self.transitions.iter());
        for state in &self.states {
            if let StateKind::Composite(inner) = &state.kind {
                inner.collect_transitions(out);
            }
        }
    }

    /// Every state in this region and all nested regions, pre-order.
    pub fn all_states(&self) -> Vec<&State> {
        let mut out = Vec::new();
        self.collect_states(&mut out);
        out
    }

    fn collect_states<'a>(&'a self, out: &mut Vec<&'a State>) {
        for state in &self.states {
            out.push(state);
            if let StateKind::Composite(inner) = &state.kind {
                inner.collect_states(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceSpec {
    pub name: String,
    pub saps: Vec<SapId>,
    pub delays: DelayMatrix,
    pub machine: Region,
}

impl ServiceSpec {
    pub fn transition(&self, id: &TransitionId) -> Option<&Transition> {
        self.machine.all_transitions().into_iter().find(|t| &t.id == id)
    }

    pub fn index(&self) -> SpecIndex<'_> {
        SpecIndex::new(self)
    }
}

#[derive(Debug, Clone)]
pub struct StateInfo<'a> {
    pub state: &'a State,
    /// Enclosing composite, `None` for top-level states.
    pub parent: Option<StateId>,
}

/// Lookup tables over a [`ServiceSpec`]'s hierarchy.
#[derive(Debug, Clone)]
pub struct SpecIndex<'a> {
    pub spec: &'a ServiceSpec,
    states: HashMap<StateId, StateInfo<'a>>,
    /// Each transition with the composite whose region declares it.
    transitions: Vec<(&'a Transition, Option<StateId>)>,
}

impl<'a> SpecIndex<'a> {
    pub fn new(spec: &'a ServiceSpec) -> Self {
        let mut index = SpecIndex {
            spec,
            states: HashMap::new(),
            transitions: Vec::new(),
        };
        index.visit(&spec.machine, None);
        index
    }

    fn visit(&mut self, region: &'a Region, parent: Option<StateId>) {
        for t in &region.transitions {
            self.transitions.push((t, parent.clone()));
        }
        for state in &region.states {
            // First declaration wins; duplicates are reported by validation.
            self.states.entry(state.id.clone()).or_insert_with(|| StateInfo {
                state,
                parent: parent.clone(),
            });
            if let StateKind::Composite(inner) = &state.kind {
                self.visit(inner, Some(state.id.clone()));
            }
        }
    }

    pub fn state(&self, id: &StateId) -> Option<&State> {
        self.states.get(id).map(|info| info.state)
    }

    pub fn kind(&self, id: &StateId) -> Option<KindTag> {
        self.state(id).map(|s| s.kind.tag())
    }

    pub fn parent(&self, id: &StateId) -> Option<&StateId> {
        self.states.get(id).and_then(|info| info.parent.as_ref())
    }

    pub fn is_top_level(&self, id: &StateId) -> bool {
        self.states.contains_key(id) && self.parent(id).is_none()
    }

    /// True when `id` is nested (at any depth) inside composite `cs`.
    pub fn is_inside(&self, id: &StateId, cs: &StateId) -> bool {
        let mut cursor = self.parent(id);
        while let Some(p) = cursor {
            if p == cs {
                return true;
            }
            cursor = self.parent(p);
        }
        false
    }

    pub fn region_of(&self, composite: &StateId) -> Option<&'a Region> {
        match &self.states.get(composite)?.state.kind {
            StateKind::Composite(region) => Some(region),
            _ => None,
        }
    }

    /// Transitions paired with the composite whose region declares them.
    pub fn transitions(&self) -> &[(&'a Transition, Option<StateId>)] {
        &self.transitions
    }

    pub fn outgoing(&self, source: &StateId) -> impl Iterator<Item = &'a Transition> + '_ {
        let source = source.clone();
        self.transitions
            .iter()
            .map(|(t, _)| *t)
            .filter(move |t| t.source == source)
    }

    pub fn top_initial(&self) -> Option<&'a State> {
        self.spec.machine.initial()
    }

    /// SAPs observing any SP on any transition nested inside `cs`.
    pub fn participants(&self, cs: &StateId) -> BTreeSet<SapId> {
        self.region_of(cs)
            .map(|r| r.all_transitions().into_iter().map(|t| t.sap.clone()).collect())
            .unwrap_or_default()
    }

    /// SAPs observing the SPs leaving `state`.
    pub fn out_saps(&self, state: &StateId) -> BTreeSet<SapId> {
        self.outgoing(state).map(|t| t.sap.clone()).collect()
    }

    /// SAPs observing the SPs on transitions sourced at composite `cs`
    /// itself, i.e. what happens once `cs` completes.
    pub fn continuation_saps(&self, cs: &StateId) -> BTreeSet<SapId> {
        self.out_saps(cs)
    }

    /// The state a transition entering `dest` actually lands in once
    /// composites are inlined: the innermost region initial.
    pub fn entry_state(&self, dest: &StateId) -> StateId {
        let mut cursor = dest.clone();
        while let Some(region) = self.region_of(&cursor) {
            match region.initial() {
                Some(init) => cursor = init.id.clone(),
                None => break,
            }
        }
        cursor
    }

    /// The state a transition sourced at `source` actually leaves from once
    /// composites are inlined: the innermost region final.
    pub fn exit_state(&self, source: &StateId) -> StateId {
        let mut cursor = source.clone();
        while let Some(region) = self.region_of(&cursor) {
            match region.final_state() {
                Some(fin) => cursor = fin.id.clone(),
                None => break,
            }
        }
        cursor
    }
}

pub fn participants(spec: &ServiceSpec, cs: &StateId) -> BTreeSet<SapId> {
    spec.index().participants(cs)
}

pub fn out_saps(spec: &ServiceSpec, state: &StateId) -> BTreeSet<SapId> {
    spec.index().out_saps(state)
}

pub fn continuation_saps(spec: &ServiceSpec, cs: &StateId) -> BTreeSet<SapId> {
    spec.index().continuation_saps(cs)
}

/// Event carried by a protocol-entity transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityEvent {
    /// Execute a service primitive locally, then notify `send_to`.
    Execute {
        sp: String,
        interval: TimeInterval,
        send_to: BTreeSet<SapId>,
        msg: Option<MessageId>,
    },
    /// Consume a synchronization message. Carries no interval: its time is
    /// part of the channel delay already accounted for by the sender.
    Receive {
        msg: MessageId,
        from: SapId,
    },
    Epsilon,
}

impl EntityEvent {
    pub fn is_epsilon(&self) -> bool {
        matches!(self, EntityEvent::Epsilon)
    }
}

impl fmt::Display for EntityEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityEvent::Execute {
                sp,
                interval,
                send_to,
                msg,
            } => {
                write!(f, "{sp} {interval}")?;
                if let Some(msg) = msg {
                    let dests: Vec<&str> = send_to.iter().map(SapId::as_str).collect();
                    write!(f, " !{msg} to {{{}}}", dests.join(", "))?;
                }
                Ok(())
            }
            EntityEvent::Receive { msg, from } => write!(f, "?{msg} from {from}"),
            EntityEvent::Epsilon => f.write_str("ε"),
        }
    }
}

/// A transition label: the event plus the opaque guard/action text copied
/// from the service transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub event: EntityEvent,
    pub guard: Option<String>,
    pub action: Option<String>,
}

impl Label {
    pub fn plain(event: EntityEvent) -> Self {
        Self {
            event,
            guard: None,
            action: None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.event)?;
        if let Some(g) = &self.guard {
            write!(f, " [{g}]")?;
        }
        if let Some(a) = &self.action {
            write!(f, " /{a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatState {
    pub id: StateId,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatTransition {
    pub id: TransitionId,
    pub source: usize,
    pub dest: usize,
    pub label: Label,
}

/// A machine without composite states. Transition endpoints index `states`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatMachine {
    pub states: Vec<FlatState>,
    pub initial: usize,
    pub transitions: Vec<FlatTransition>,
}

impl FlatMachine {
    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id.as_str() == id)
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &FlatTransition> {
        self.transitions.iter().filter(move |t| t.source == state)
    }

    /// States reachable from the initial state, as a membership mask.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        if self.states.is_empty() {
            return seen;
        }
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for t in self.outgoing(s) {
                if !seen[t.dest] {
                    seen[t.dest] = true;
                    stack.push(t.dest);
                }
            }
        }
        seen
    }

    /// Drops states unreachable from the initial state, keeping order.
    pub fn prune_unreachable(&self) -> FlatMachine {
        let keep = self.reachable();
        let mut remap = vec![usize::MAX; self.states.len()];
        let mut states = Vec::new();
        for (i, state) in self.states.iter().enumerate() {
            if keep[i] {
                remap[i] = states.len();
                states.push(state.clone());
            }
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|t| keep[t.source] && keep[t.dest])
            .map(|t| FlatTransition {
                source: remap[t.source],
                dest: remap[t.dest],
                ..t.clone()
            })
            .collect();
        FlatMachine {
            states,
            initial: remap[self.initial],
            transitions,
        }
    }

    /// Removes transitions repeating an earlier (source, dest, label).
    pub fn dedup_transitions(&mut self) {
        let mut seen = BTreeSet::new();
        self.transitions
            .retain(|t| seen.insert((t.source, t.dest, t.label.clone())));
    }
}

/// A synthesized protocol-entity specification for one SAP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpec {
    pub service: String,
    pub sap: SapId,
    pub machine: FlatMachine,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn iv(a: i64, b: i64) -> TimeInterval {
        TimeInterval::new(int(a), int(b)).unwrap()
    }

    fn tr(id: &str, s: &str, d: &str, sp: &str, sap: &str) -> Transition {
        Transition {
            id: id.into(),
            source: s.into(),
            dest: d.into(),
            sp: sp.into(),
            sap: sap.into(),
            interval: iv(1, 2),
            guard: None,
            action: None,
        }
    }

    fn spec_with(machine: Region) -> ServiceSpec {
        ServiceSpec {
            name: "t".into(),
            saps: ["S1", "S2", "S3", "S4"].into_iter().map(SapId::from).collect(),
            delays: DelayMatrix::new(),
            machine,
        }
    }

    fn saps(names: &[&str]) -> BTreeSet<SapId> {
        names.iter().map(|n| SapId::from(*n)).collect()
    }

    #[test]
    fn interval_invariants() {
        assert!(TimeInterval::new(ratio(3, 10), ratio(1, 10)).is_err());
        assert!(TimeInterval::new(int(-1), int(1)).is_err());
        let i = TimeInterval::new(ratio(1, 10), ratio(1, 10)).unwrap();
        assert!(i.contains(&ratio(1, 10)));
        assert_eq!(i.to_string(), "[0.1, 0.1]");
    }

    #[test]
    fn delay_matrix_rejects_self_channel() {
        let mut d = DelayMatrix::new();
        assert!(d.insert("S1".into(), "S1".into(), iv(0, 1)).is_err());
        d.insert("S2".into(), "S1".into(), iv(0, 1)).unwrap();
        d.insert("S1".into(), "S2".into(), iv(0, 2)).unwrap();
        let order: Vec<_> = d.iter().map(|(f, t, _)| format!("{f}{t}")).collect();
        assert_eq!(order, ["S1S2", "S2S1"]);
        assert!(d.get(&"S1".into(), &"S3".into()).is_none());
    }

    #[test]
    fn message_id_is_derived_from_transition() {
        assert_eq!(MessageId::for_transition(&"tA".into()).as_str(), "m_tA");
    }

    #[test]
    fn participants_of_composite() {
        let inner = Region::new(
            vec![
                State::new("ci", StateKind::Initial),
                State::new("c1", StateKind::Simple),
                State::new("cf", StateKind::Final),
            ],
            vec![tr("tC", "ci", "c1", "C", "S3"), tr("tB", "c1", "cf", "B", "S2")],
        );
        let empty = Region::new(vec![State::new("ei", StateKind::Initial)], vec![]);
        let spec = spec_with(Region::new(
            vec![
                State::new("i0", StateKind::Initial),
                State::new("cs", StateKind::Composite(inner)),
                State::new("es", StateKind::Composite(empty)),
            ],
            vec![],
        ));
        assert_eq!(participants(&spec, &"cs".into()), saps(&["S2", "S3"]));
        assert!(participants(&spec, &"es".into()).is_empty());
    }

    #[test]
    fn participants_recurse_into_nested_composites() {
        let deepest = Region::new(
            vec![State::new("di", StateKind::Initial), State::new("df", StateKind::Final)],
            vec![tr("tF", "di", "df", "F", "S4")],
        );
        let middle = Region::new(
            vec![
                State::new("mi", StateKind::Initial),
                State::new("inner", StateKind::Composite(deepest)),
            ],
            vec![],
        );
        let spec = spec_with(Region::new(
            vec![
                State::new("i0", StateKind::Initial),
                State::new("outer", StateKind::Composite(middle)),
            ],
            vec![],
        ));
        assert_eq!(participants(&spec, &"outer".into()), saps(&["S4"]));
        let idx = spec.index();
        assert!(idx.is_inside(&"df".into(), &"outer".into()));
        assert!(!idx.is_inside(&"i0".into(), &"outer".into()));
        assert_eq!(idx.entry_state(&"outer".into()).as_str(), "mi");
        assert_eq!(idx.entry_state(&"inner".into()).as_str(), "di");
        assert_eq!(idx.exit_state(&"inner".into()).as_str(), "df");
    }

    #[test]
    fn out_and_continuation_sets() {
        let inner = Region::new(
            vec![State::new("ci", StateKind::Initial), State::new("cf", StateKind::Final)],
            vec![tr("tB", "ci", "cf", "B", "S2")],
        );
        let spec = spec_with(Region::new(
            vec![
                State::new("i0", StateKind::Initial),
                State::new("cs", StateKind::Composite(inner)),
                State::new("s1", StateKind::Simple),
                State::new("s2", StateKind::Simple),
                State::new("dead", StateKind::Simple),
            ],
            vec![
                tr("tD", "cs", "s1", "D", "S1"),
                tr("tG", "cs", "s2", "G", "S3"),
                tr("tE", "s1", "i0", "E", "S2"),
                tr("tX", "s2", "s1", "X", "S1"),
                tr("tY", "s2", "i0", "Y", "S3"),
            ],
        ));
        assert_eq!(out_saps(&spec, &"s1".into()), saps(&["S2"]));
        assert_eq!(out_saps(&spec, &"s2".into()), saps(&["S1", "S3"]));
        assert!(out_saps(&spec, &"dead".into()).is_empty());
        assert_eq!(continuation_saps(&spec, &"cs".into()), saps(&["S1", "S3"]));
        assert!(continuation_saps(&spec, &"s1".into()).contains(&SapId::from("S2")));
    }

    #[test]
    fn flat_machine_prune_and_dedup() {
        let lab = Label::plain(EntityEvent::Epsilon);
        let mut m = FlatMachine {
            states: ["a", "b", "c"]
                .iter()
                .map(|n| FlatState {
                    id: StateId::from(*n),
                    is_final: false,
                })
                .collect(),
            initial: 0,
            transitions: vec![
                FlatTransition {
                    id: "x".into(),
                    source: 0,
                    dest: 2,
                    label: lab.clone(),
                },
                FlatTransition {
                    id: "y".into(),
                    source: 0,
                    dest: 2,
                    label: lab.clone(),
                },
            ],
        };
        m.dedup_transitions();
        assert_eq!(m.transitions.len(), 1);
        let pruned = m.prune_unreachable();
        assert_eq!(pruned.states.len(), 2);
        assert_eq!(pruned.transitions[0].dest, 1);
    }
}
