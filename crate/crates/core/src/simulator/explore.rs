//! Untimed exploration of the composed entities. Global states are the
//! entities' local states plus the FIFO contents of every channel; only
//! Exec events are observable.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{EntityEvent, EntitySpec, MessageId, SapId, ServiceSpec};
use crate::reducer::{inline, ReduceError};

/// An observable event: SP name at a SAP.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observable {
    pub sp: String,
    pub sap: SapId,
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.sp, self.sap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Maximum number of observable events along any explored path.
    pub depth: usize,
    /// Maximum number of distinct global states before giving up.
    pub state_cap: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            depth: 12,
            state_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("state space exceeds the cap of {0} global states")]
    CapExceeded(usize),
    #[error("no entity for SAP '{0}'")]
    MissingEntity(SapId),
    #[error(transparent)]
    Service(#[from] ReduceError),
}

/// Shortest word on which the service and the composed entities disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub word: Vec<Observable>,
    /// True when the last event is allowed by the service but not by the
    /// entities; false for the converse.
    pub service_only: bool,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word: Vec<String> = self.word.iter().map(Observable::to_string).collect();
        let side = if self.service_only {
            "service only"
        } else {
            "entities only"
        };
        write!(f, "{} ({side})", word.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deadlock {
    /// Observable events leading to the stuck state.
    pub word: Vec<Observable>,
    /// `sap:state` for every entity.
    pub states: Vec<String>,
    /// `from->to:msg` for every message still in flight.
    pub in_flight: Vec<String>,
}

impl fmt::Display for Deadlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word: Vec<String> = self.word.iter().map(Observable::to_string).collect();
        write!(
            f,
            "after [{}] entities at {{{}}} in flight {{{}}}",
            word.join(" "),
            self.states.join(", "),
            self.in_flight.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exploration {
    pub counterexample: Option<Counterexample>,
    pub deadlocks: Vec<Deadlock>,
    pub states_explored: usize,
}

type Global = (Vec<usize>, Vec<Vec<u32>>);

/// Visible moves out of a closure: the primitive and the state it leads to.
type Visible = Vec<(Observable, Global)>;

struct System<'a> {
    pes: Vec<&'a EntitySpec>,
    /// Channel slot per ordered entity pair.
    slot: HashMap<(usize, usize), usize>,
    slots: Vec<(usize, usize)>,
    messages: Vec<MessageId>,
    message_id: HashMap<MessageId, u32>,
}

enum Move {
    Silent(Global),
    Visible(Observable, Global),
}

impl<'a> System<'a> {
    fn new(spec: &ServiceSpec, pes: &'a [EntitySpec]) -> Result<Self, ExploreError> {
        let mut ordered = Vec::new();
        for sap in &spec.saps {
            let pe = pes
                .iter()
                .find(|p| &p.sap == sap)
                .ok_or_else(|| ExploreError::MissingEntity(sap.clone()))?;
            ordered.push(pe);
        }
        let n = ordered.len();
        let mut sys = System {
            pes: ordered,
            slot: HashMap::new(),
            slots: Vec::new(),
            messages: Vec::new(),
            message_id: HashMap::new(),
        };
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sys.slot.insert((i, j), sys.slots.len());
                    sys.slots.push((i, j));
                }
            }
        }
        Ok(sys)
    }

    fn intern(&mut self, msg: &MessageId) -> u32 {
        if let Some(&id) = self.message_id.get(msg) {
            return id;
        }
        let id = self.messages.len() as u32;
        self.messages.push(msg.clone());
        self.message_id.insert(msg.clone(), id);
        id
    }

    fn initial(&self) -> Global {
        (
            self.pes.iter().map(|p| p.machine.initial).collect(),
            vec![Vec::new(); self.slots.len()],
        )
    }

    fn index_of(&self, sap: &SapId) -> Option<usize> {
        self.pes.iter().position(|p| &p.sap == sap)
    }

    fn moves(&mut self, g: &Global) -> Vec<Move> {
        let mut out = Vec::new();
        for i in 0..self.pes.len() {
            let pe = self.pes[i];
            for t in pe.machine.outgoing(g.0[i]) {
                match &t.label.event {
                    EntityEvent::Execute { sp, send_to, msg, .. } => {
                        let mut next = g.clone();
                        next.0[i] = t.dest;
                        if let Some(msg) = msg {
                            let id = self.intern(msg);
                            for to in send_to {
                                // Sends to unknown entities or missing
                                // channels vanish; their receivers stall.
                                if let Some(&s) = self.index_of(to).and_then(|j| self.slot.get(&(i, j))) {
                                    next.1[s].push(id);
                                }
                            }
                        }
                        out.push(Move::Visible(
                            Observable {
                                sp: sp.clone(),
                                sap: pe.sap.clone(),
                            },
                            next,
                        ));
                    }
                    EntityEvent::Receive { msg, from } => {
                        let Some(&s) = self.index_of(from).and_then(|j| self.slot.get(&(j, i))) else {
                            continue;
                        };
                        let Some(&id) = self.message_id.get(msg) else { continue };
                        if g.1[s].first() == Some(&id) {
                            let mut next = g.clone();
                            next.0[i] = t.dest;
                            next.1[s].remove(0);
                            out.push(Move::Silent(next));
                        }
                    }
                    EntityEvent::Epsilon => {
                        let mut next = g.clone();
                        next.0[i] = t.dest;
                        out.push(Move::Silent(next));
                    }
                }
            }
        }
        out
    }

    fn describe(&self, g: &Global, word: &[Observable]) -> Deadlock {
        Deadlock {
            word: word.to_vec(),
            states: self
                .pes
                .iter()
                .zip(&g.0)
                .map(|(p, &s)| format!("{}:{}", p.sap, p.machine.states[s].id))
                .collect(),
            in_flight: self
                .slots
                .iter()
                .zip(&g.1)
                .flat_map(|(&(i, j), q)| q.iter().map(move |&m| (i, j, m)))
                .map(|(i, j, m)| format!("{}->{}:{}", self.pes[i].sap, self.pes[j].sap, self.messages[m as usize]))
                .collect(),
        }
    }
}

/// The service machine with composites inlined, labelled by observables.
struct ServiceGraph {
    initial: usize,
    edges: Vec<Vec<(Observable, usize)>>,
}

impl ServiceGraph {
    fn new(spec: &ServiceSpec) -> Result<Self, ReduceError> {
        let g = inline(&spec.machine)?;
        let mut edges = vec![Vec::new(); g.states.len()];
        for (s, d, t) in &g.edges {
            edges[*s].push((
                Observable {
                    sp: t.sp.clone(),
                    sap: t.sap.clone(),
                },
                *d,
            ));
        }
        Ok(ServiceGraph {
            initial: g.initial,
            edges,
        })
    }
}

/// Breadth-first over pairs (composed state set, service state set) reached
/// by the same observable word, so the first disagreement found is a
/// shortest one. Every global state met is also checked for deadlock.
pub fn explore(spec: &ServiceSpec, pes: &[EntitySpec], cfg: &ExploreConfig) -> Result<Exploration, ExploreError> {
    if cfg.depth == 0 {
        return Err(ExploreError::ZeroDepth);
    }
    let service = ServiceGraph::new(spec)?;
    let mut sys = System::new(spec, pes)?;
    // Seed message ids so receives of never-sent messages are recognized.
    for pe in pes {
        for t in &pe.machine.transitions {
            if let EntityEvent::Receive { msg, .. } | EntityEvent::Execute { msg: Some(msg), .. } = &t.label.event {
                sys.intern(msg);
            }
        }
    }

    let mut seen_globals: HashSet<Global> = HashSet::new();
    let mut stuck_checked: HashSet<Global> = HashSet::new();
    let mut deadlocks = Vec::new();
    let mut counterexample = None;

    // Silent closure of a set of global states; also records deadlocks.
    let mut close = |sys: &mut System<'_>,
                     start: Vec<Global>,
                     word: &[Observable],
                     service_terminal: bool,
                     deadlocks: &mut Vec<Deadlock>,
                     seen: &mut HashSet<Global>|
     -> Result<(BTreeSet<Global>, Visible), ExploreError> {
        let mut set = BTreeSet::new();
        let mut visible = Vec::new();
        let mut queue: VecDeque<Global> = start.into_iter().collect();
        while let Some(g) = queue.pop_front() {
            if !set.insert(g.clone()) {
                continue;
            }
            if seen.insert(g.clone()) && seen.len() > cfg.state_cap {
                return Err(ExploreError::CapExceeded(cfg.state_cap));
            }
            let moves = sys.moves(&g);
            if moves.is_empty() && stuck_checked.insert(g.clone()) {
                let quiet = g.1.iter().all(Vec::is_empty);
                let all_final = sys.pes.iter().zip(&g.0).all(|(p, &s)| p.machine.states[s].is_final);
                if !(quiet && (all_final || service_terminal)) {
                    deadlocks.push(sys.describe(&g, word));
                }
            }
            for m in moves {
                match m {
                    Move::Silent(n) => queue.push_back(n),
                    Move::Visible(o, n) => visible.push((o, n)),
                }
            }
        }
        Ok((set, visible))
    };

    let spec_terminal = |set: &BTreeSet<usize>| set.iter().any(|&s| service.edges[s].is_empty());
    let start_spec = BTreeSet::from([service.initial]);
    let initial = sys.initial();
    let (start_set, start_visible) = close(
        &mut sys,
        vec![initial],
        &[],
        spec_terminal(&start_spec),
        &mut deadlocks,
        &mut seen_globals,
    )?;
    let mut visited_pairs: HashSet<(BTreeSet<Global>, BTreeSet<usize>)> = HashSet::new();
    visited_pairs.insert((start_set, start_spec.clone()));
    let mut level: Vec<(Vec<Observable>, Visible, BTreeSet<usize>)> = vec![(Vec::new(), start_visible, start_spec)];

    'outer: for _ in 0..cfg.depth {
        let mut next_level = Vec::new();
        for (word, visible, spec_set) in level {
            let mut comp_by: BTreeMap<Observable, Vec<Global>> = BTreeMap::new();
            for (o, g) in visible {
                comp_by.entry(o).or_default().push(g);
            }
            let mut spec_by: BTreeMap<Observable, BTreeSet<usize>> = BTreeMap::new();
            for &s in &spec_set {
                for (o, d) in &service.edges[s] {
                    spec_by.entry(o.clone()).or_default().insert(*d);
                }
            }
            let labels: BTreeSet<&Observable> = comp_by.keys().chain(spec_by.keys()).collect();
            for o in labels {
                let mut w = word.clone();
                w.push(o.clone());
                match (comp_by.get(o), spec_by.get(o)) {
                    (Some(gs), Some(ss)) => {
                        let (set, vis) = close(
                            &mut sys,
                            gs.clone(),
                            &w,
                            spec_terminal(ss),
                            &mut deadlocks,
                            &mut seen_globals,
                        )?;
                        if visited_pairs.insert((set, ss.clone())) {
                            next_level.push((w, vis, ss.clone()));
                        }
                    }
                    (comp, _) => {
                        counterexample = Some(Counterexample {
                            word: w,
                            service_only: comp.is_none(),
                        });
                        break 'outer;
                    }
                }
            }
        }
        level = next_level;
    }
    Ok(Exploration {
        counterexample,
        deadlocks,
        states_explored: seen_globals.len(),
    })
}

/// `Ok(None)` when the composed entities and the service agree on every
/// observable word of length at most `depth`.
pub fn check_untimed_equivalence(
    spec: &ServiceSpec,
    pes: &[EntitySpec],
    depth: usize,
) -> Result<Option<Counterexample>, ExploreError> {
    let cfg = ExploreConfig {
        depth,
        ..ExploreConfig::default()
    };
    Ok(explore(spec, pes, &cfg)?.counterexample)
}

/// Stuck global states reachable within `cfg.depth` observable events. A
/// state is stuck when nothing can move and it is not a quiet completion
/// (all entities final, or the service itself ends there, with no message
/// in flight).
pub fn detect_deadlock(
    spec: &ServiceSpec,
    pes: &[EntitySpec],
    cfg: &ExploreConfig,
) -> Result<Vec<Deadlock>, ExploreError> {
    Ok(explore(spec, pes, cfg)?.deadlocks)
}
