//! Random inputs for property tests.
//!
//! Generated service machines are sequential cycles (or paths ending in a
//! top-level final) through simple and composite states, one transition
//! per state. SAP assignments that would let an entity act again right
//! after notifying others are rejected, and intervals are widened until
//! every timing check passes.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::has_errors;
use crate::model::{
    DelayMatrix, EntityEvent, FlatMachine, FlatState, FlatTransition, Label, MessageId, Region, SapId, ServiceSpec,
    State, StateKind, TimeInterval, Transition,
};
use crate::rational::{ratio, Rational};
use crate::validator::{destination_set, validate_structure, validate_timing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    /// 1..=4
    pub saps: usize,
    /// Upper bound on declared states, composites included; 2..=8.
    pub states: usize,
    /// 0..=2
    pub composites: usize,
    /// Return to the initial state instead of ending in a final state.
    pub cycle: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            saps: 3,
            states: 8,
            composites: 2,
            cycle: true,
        }
    }
}

fn tenths(rng: &mut ChaCha8Rng, max: i64) -> Rational {
    ratio(rng.gen_range(0..=max), 10)
}

enum Item {
    Simple,
    Composite(Vec<Item>),
}

struct Namer {
    states: usize,
    transitions: usize,
    composites: usize,
}

impl Namer {
    fn state(&mut self, prefix: &str) -> String {
        self.states += 1;
        format!("{prefix}{}", self.states)
    }
}

/// Item sequence whose declared-state cost fits `budget`.
fn items(rng: &mut ChaCha8Rng, budget: &mut usize, composites: &mut usize, depth: usize) -> Vec<Item> {
    let mut out = Vec::new();
    let want = rng.gen_range(1..=3);
    while out.len() < want && *budget > 0 {
        // A composite costs itself plus its initial and final, plus a body.
        if *composites > 0 && depth < 2 && *budget >= 4 && rng.gen_bool(0.4) {
            *composites -= 1;
            *budget -= 3;
            let body = items(rng, budget, composites, depth + 1);
            out.push(Item::Composite(body));
        } else {
            *budget -= 1;
            out.push(Item::Simple);
        }
    }
    out
}

/// Builds a region `start -> items... -> end`. Returns transitions in
/// execution order, with `(transition index, id of declaring region)`.
fn build(
    items: Vec<Item>,
    start: &str,
    end: &str,
    names: &mut Namer,
    states: &mut Vec<State>,
    transitions: &mut Vec<Transition>,
    placeholder: &TimeInterval,
) {
    let mut prev = start.to_string();
    for item in items {
        let id = match item {
            Item::Simple => {
                let id = names.state("s");
                states.push(State::new(id.clone(), StateKind::Simple));
                id
            }
            Item::Composite(body) => {
                names.composites += 1;
                let id = format!("c{}", names.composites);
                let ci = format!("{id}_i");
                let cf = format!("{id}_f");
                let mut inner_states = vec![
                    State::new(ci.clone(), StateKind::Initial),
                    State::new(cf.clone(), StateKind::Final),
                ];
                let mut inner_transitions = Vec::new();
                build(
                    body,
                    &ci,
                    &cf,
                    names,
                    &mut inner_states,
                    &mut inner_transitions,
                    placeholder,
                );
                states.push(State::new(
                    id.clone(),
                    StateKind::Composite(Region::new(inner_states, inner_transitions)),
                ));
                id
            }
        };
        transitions.push(edge(names, &prev, &id, placeholder));
        prev = id;
    }
    transitions.push(edge(names, &prev, end, placeholder));
}

fn edge(names: &mut Namer, from: &str, to: &str, placeholder: &TimeInterval) -> Transition {
    names.transitions += 1;
    Transition {
        id: format!("t{:02}", names.transitions).as_str().into(),
        source: from.into(),
        dest: to.into(),
        sp: format!("P{}", names.transitions),
        sap: SapId::new("?"),
        interval: placeholder.clone(),
        guard: None,
        action: None,
    }
}

fn for_each_transition(region: &mut Region, f: &mut impl FnMut(&mut Transition)) {
    for t in &mut region.transitions {
        f(t);
    }
    for s in &mut region.states {
        if let StateKind::Composite(inner) = &mut s.kind {
            for_each_transition(inner, f);
        }
    }
}

/// Lowest interval meeting every timing check for `t`, stretched by random
/// slack.
fn widen(rng: &mut ChaCha8Rng, spec: &ServiceSpec, t: &Transition) -> TimeInterval {
    let base_min = Rational::from_integer(BigInt::from(rng.gen_range(0..=3))) + tenths(rng, 9);
    let slack = Rational::from_integer(BigInt::from(rng.gen_range(0..=2))) + tenths(rng, 9);
    let receivers = destination_set(t, spec).map(|d| d.receivers).unwrap_or_default();
    let delays: Vec<&TimeInterval> = receivers.iter().filter_map(|j| spec.delays.get(&t.sap, j)).collect();
    if delays.is_empty() {
        let lo = base_min.max(ratio(1, 10));
        return TimeInterval::new(lo.clone(), lo + slack).unwrap();
    }
    let max_min = delays.iter().map(|d| d.lower()).max().unwrap().clone();
    let min_min = delays.iter().map(|d| d.lower()).min().unwrap().clone();
    let max_max = delays.iter().map(|d| d.upper()).max().unwrap().clone();
    let max_spread = delays.iter().map(|d| d.spread()).max().unwrap();
    let lo = base_min.max(max_min);
    let hi = [
        &lo + &slack,
        max_max.clone(),
        &lo + &max_spread,
        &lo + (&max_max - &min_min),
    ]
    .into_iter()
    .max()
    .unwrap();
    TimeInterval::new(lo, hi).unwrap()
}

/// True when some transition notifies others while its own SAP performs
/// the very next SP; such specs cannot keep the cumulative lower bound.
fn has_local_continuation(spec: &ServiceSpec) -> bool {
    validate_structure(spec).iter().any(|d| d.code == "local-continuation")
}

/// Deterministic in `seed`. The result passes structural and timing
/// validation with no errors and no warnings.
pub fn generate_random_sspec(params: GenParams, seed: u64) -> ServiceSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let saps: Vec<SapId> = (1..=params.saps.clamp(1, 4))
        .map(|i| SapId::new(format!("S{i}")))
        .collect();
    let mut delays = DelayMatrix::new();
    for i in &saps {
        for j in &saps {
            if i != j {
                let lo = tenths(&mut rng, 3);
                let hi = &lo + tenths(&mut rng, 3);
                delays
                    .insert(i.clone(), j.clone(), TimeInterval::new(lo, hi).unwrap())
                    .unwrap();
            }
        }
    }
    let placeholder = TimeInterval::new(ratio(1, 1), ratio(2, 1)).unwrap();
    let cap = params.states.clamp(2, 8);

    for attempt in 0..64 {
        let mut budget = cap - if params.cycle { 1 } else { 2 };
        let mut composites = params.composites.min(2);
        let body = items(&mut rng, &mut budget, &mut composites, 0);
        let mut names = Namer {
            states: 0,
            transitions: 0,
            composites: 0,
        };
        let mut states = vec![State::new("i0", StateKind::Initial)];
        let end = if params.cycle {
            "i0".to_string()
        } else {
            states.push(State::new("f0", StateKind::Final));
            "f0".to_string()
        };
        let mut transitions = Vec::new();
        build(
            body,
            "i0",
            &end,
            &mut names,
            &mut states,
            &mut transitions,
            &placeholder,
        );
        let mut spec = ServiceSpec {
            name: format!("gen{seed}"),
            saps: saps.clone(),
            delays: delays.clone(),
            machine: Region::new(states, transitions),
        };

        let mut assigned = false;
        for _ in 0..200 {
            let pick = |rng: &mut ChaCha8Rng| saps[rng.gen_range(0..saps.len())].clone();
            for_each_transition(&mut spec.machine, &mut |t| t.sap = pick(&mut rng));
            if !has_local_continuation(&spec) {
                assigned = true;
                break;
            }
        }
        if !assigned && attempt < 63 {
            continue;
        }
        if !assigned {
            // Everything at one SAP, ending in a final state: only the last
            // transition notifies anyone.
            return single_actor_path(&saps, delays, seed);
        }
        let ids: Vec<_> = spec
            .machine
            .all_transitions()
            .into_iter()
            .map(|t| t.id.clone())
            .collect();
        for id in ids {
            let t = spec.transition(&id).unwrap().clone();
            let iv = widen(&mut rng, &spec, &t);
            for_each_transition(&mut spec.machine, &mut |x| {
                if x.id == id {
                    x.interval = iv.clone();
                }
            });
        }
        debug_assert!(!has_errors(&validate_structure(&spec)));
        debug_assert!(validate_timing(&spec).is_empty());
        return spec;
    }
    unreachable!("the last attempt always returns")
}

fn single_actor_path(saps: &[SapId], delays: DelayMatrix, seed: u64) -> ServiceSpec {
    let mut spec = ServiceSpec {
        name: format!("gen{seed}"),
        saps: saps.to_vec(),
        delays,
        machine: Region::new(
            vec![
                State::new("i0", StateKind::Initial),
                State::new("s1", StateKind::Simple),
                State::new("f0", StateKind::Final),
            ],
            Vec::new(),
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (id, from, to) in [("t01", "i0", "s1"), ("t02", "s1", "f0")] {
        let t = Transition {
            id: id.into(),
            source: from.into(),
            dest: to.into(),
            sp: format!("P{}", &id[2..]),
            sap: saps[0].clone(),
            interval: TimeInterval::new(ratio(1, 1), ratio(2, 1)).unwrap(),
            guard: None,
            action: None,
        };
        spec.machine.transitions.push(t);
    }
    for i in 0..2 {
        let t = spec.machine.transitions[i].clone();
        spec.machine.transitions[i].interval = widen(&mut rng, &spec, &t);
    }
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatParams {
    pub states: usize,
    pub transitions: usize,
    /// Probability in percent that a transition is ε.
    pub epsilon_percent: u32,
}

impl Default for FlatParams {
    fn default() -> Self {
        FlatParams {
            states: 7,
            transitions: 11,
            epsilon_percent: 40,
        }
    }
}

/// Random flat machine over a four-letter alphabet plus ε.
pub fn random_flat_machine(params: FlatParams, seed: u64) -> FlatMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.states.max(1);
    let alphabet = [
        Label::plain(EntityEvent::Execute {
            sp: "A".into(),
            interval: TimeInterval::new(ratio(1, 1), ratio(2, 1)).unwrap(),
            send_to: BTreeSet::new(),
            msg: None,
        }),
        Label::plain(EntityEvent::Execute {
            sp: "B".into(),
            interval: TimeInterval::new(ratio(1, 2), ratio(3, 1)).unwrap(),
            send_to: BTreeSet::from([SapId::new("S2")]),
            msg: Some(MessageId::new("m_b")),
        }),
        Label::plain(EntityEvent::Receive {
            msg: MessageId::new("m_x"),
            from: SapId::new("S2"),
        }),
        Label::plain(EntityEvent::Receive {
            msg: MessageId::new("m_y"),
            from: SapId::new("S3"),
        }),
    ];
    let states = (0..n)
        .map(|i| FlatState {
            id: format!("q{i}").as_str().into(),
            is_final: rng.gen_bool(0.2),
        })
        .collect();
    let transitions = (0..params.transitions)
        .map(|k| {
            let label = if rng.gen_ratio(params.epsilon_percent.min(100), 100) {
                Label::plain(EntityEvent::Epsilon)
            } else {
                alphabet[rng.gen_range(0..alphabet.len())].clone()
            };
            FlatTransition {
                id: format!("t{k}").as_str().into(),
                source: rng.gen_range(0..n),
                dest: rng.gen_range(0..n),
                label,
            }
        })
        .collect();
    FlatMachine {
        states,
        initial: 0,
        transitions,
    }
}
