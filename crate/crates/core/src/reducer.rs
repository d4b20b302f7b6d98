//! Flattening, ε-removal and minimization of entity machines.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{
    DelayMatrix, FlatMachine, FlatState, FlatTransition, KindTag, Label, Region, ServiceSpec, StateId, Transition,
    TransitionId,
};
use crate::synthesizer::PrimaryEntitySpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("composite '{0}' cannot complete: it has outgoing transitions but no final state")]
    CannotComplete(StateId),
    #[error("composite '{0}' has no initial state to enter")]
    NoEntry(StateId),
    #[error("machine has no initial state")]
    NoInitial,
    #[error("transition '{0}' has no label")]
    MissingLabel(TransitionId),
    #[error("depth must be at least 1")]
    ZeroDepth,
}

/// A region hierarchy with composites inlined. Edges keep a reference to
/// the originating transition.
#[derive(Debug, Clone)]
pub struct InlinedGraph<'a> {
    /// Non-composite states in pre-order, with their top-level-final flag.
    pub states: Vec<(StateId, bool)>,
    pub initial: usize,
    pub edges: Vec<(usize, usize, &'a Transition)>,
}

/// Inlines every composite: transitions into a composite land on its
/// region's initial state, transitions out of it leave from its final state.
pub fn inline(machine: &Region) -> Result<InlinedGraph<'_>, ReduceError> {
    let holder = ServiceSpec {
        name: String::new(),
        saps: Vec::new(),
        delays: DelayMatrix::new(),
        machine: machine.clone(),
    };
    let index = holder.index();
    let mut states = Vec::new();
    let mut position = HashMap::new();
    for s in machine.all_states() {
        if s.kind.tag() == KindTag::Composite {
            continue;
        }
        let top_final = s.kind.tag() == KindTag::Final && index.is_top_level(&s.id);
        position.insert(s.id.clone(), states.len());
        states.push((s.id.clone(), top_final));
    }
    let initial = machine
        .initial()
        .and_then(|s| position.get(&index.entry_state(&s.id)).copied())
        .ok_or(ReduceError::NoInitial)?;
    let mut edges = Vec::new();
    let mut transitions = machine.all_transitions();
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    for t in transitions {
        let from = index.exit_state(&t.source);
        let source = *position
            .get(&from)
            .ok_or_else(|| ReduceError::CannotComplete(from.clone()))?;
        let to = index.entry_state(&t.dest);
        let dest = *position.get(&to).ok_or_else(|| ReduceError::NoEntry(to.clone()))?;
        edges.push((source, dest, t));
    }
    Ok(InlinedGraph { states, initial, edges })
}

/// Inlines the composites of a primary entity machine. Labels are copied
/// unchanged.
pub fn flatten(ppe: &PrimaryEntitySpec) -> Result<FlatMachine, ReduceError> {
    let graph = inline(&ppe.machine)?;
    let mut transitions = Vec::new();
    for (source, dest, t) in &graph.edges {
        let label = ppe
            .labels
            .get(&t.id)
            .ok_or_else(|| ReduceError::MissingLabel(t.id.clone()))?;
        transitions.push(FlatTransition {
            id: t.id.clone(),
            source: *source,
            dest: *dest,
            label: label.clone(),
        });
    }
    Ok(FlatMachine {
        states: graph
            .states
            .into_iter()
            .map(|(id, is_final)| FlatState { id, is_final })
            .collect(),
        initial: graph.initial,
        transitions,
    })
}

/// Rebuilds `m` with state `i` mapped to `block[i]`. Blocks are numbered by
/// their smallest member, whose id the merged state keeps. Transitions are
/// deduplicated by (source, dest, label); ε self-loops are dropped when
/// `drop_eps_loops` is set.
fn quotient(m: &FlatMachine, block: &[usize], drop_eps_loops: bool) -> FlatMachine {
    let mut rep: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &b) in block.iter().enumerate() {
        rep.entry(b).or_insert(i);
    }
    let mut order: Vec<(usize, usize)> = rep.iter().map(|(&b, &first)| (first, b)).collect();
    order.sort();
    let mut renumber = HashMap::new();
    let mut states = Vec::new();
    for (first, b) in order {
        renumber.insert(b, states.len());
        let is_final = (0..m.states.len()).any(|i| block[i] == b && m.states[i].is_final);
        states.push(FlatState {
            id: m.states[first].id.clone(),
            is_final,
        });
    }
    let mut seen = BTreeSet::new();
    let mut transitions = Vec::new();
    for t in &m.transitions {
        let source = renumber[&block[t.source]];
        let dest = renumber[&block[t.dest]];
        if drop_eps_loops && source == dest && t.label.event.is_epsilon() {
            continue;
        }
        if seen.insert((source, dest, t.label.clone())) {
            transitions.push(FlatTransition {
                id: t.id.clone(),
                source,
                dest,
                label: t.label.clone(),
            });
        }
    }
    FlatMachine {
        states,
        initial: renumber[&block[m.initial]],
        transitions,
    }
}

/// Collapses every strongly connected component of the ε-subgraph into
/// one state.
pub fn remove_epsilon_cycles(m: &FlatMachine) -> FlatMachine {
    let n = m.states.len();
    let mut eps: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &m.transitions {
        if t.label.event.is_epsilon() {
            eps[t.source].push(t.dest);
        }
    }
    let comp = tarjan(&eps);
    // Name each component by its smallest member so the result is stable.
    let mut smallest: HashMap<usize, usize> = HashMap::new();
    for (i, &c) in comp.iter().enumerate() {
        smallest.entry(c).or_insert(i);
    }
    let block: Vec<usize> = comp.iter().map(|c| smallest[c]).collect();
    quotient(m, &block, true)
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (node, next child position).
        let mut work = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 && index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*child) {
                *child += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    comp
}

fn epsilon_closure(m: &FlatMachine, from: usize) -> Vec<usize> {
    let mut seen = vec![false; m.states.len()];
    let mut order = vec![from];
    seen[from] = true;
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        i += 1;
        for t in m.outgoing(s) {
            if t.label.event.is_epsilon() && !seen[t.dest] {
                seen[t.dest] = true;
                order.push(t.dest);
            }
        }
    }
    order
}

/// Replaces ε-moves by copying, to each state, the observable transitions
/// of every state in its ε-closure. Unreachable states are pruned.
pub fn remove_epsilon_transitions(m: &FlatMachine) -> FlatMachine {
    let mut states = m.states.clone();
    let mut transitions = Vec::new();
    for s in 0..m.states.len() {
        let closure = epsilon_closure(m, s);
        states[s].is_final = closure.iter().any(|&c| m.states[c].is_final);
        for &c in &closure {
            for t in m.outgoing(c) {
                if !t.label.event.is_epsilon() {
                    transitions.push(FlatTransition { source: s, ..t.clone() });
                }
            }
        }
    }
    let mut out = FlatMachine {
        states,
        initial: m.initial,
        transitions,
    }
    .prune_unreachable();
    out.dedup_transitions();
    out
}

/// Quotient by the greatest bisimulation, labels compared structurally.
pub fn minimize(m: &FlatMachine) -> FlatMachine {
    type Signature<'a> = (usize, BTreeSet<(&'a Label, usize)>);
    let n = m.states.len();
    let mut block: Vec<usize> = m.states.iter().map(|s| usize::from(s.is_final)).collect();
    loop {
        let mut signatures: BTreeMap<Signature, usize> = BTreeMap::new();
        let mut next = vec![0; n];
        for s in 0..n {
            let sig: BTreeSet<(&Label, usize)> = m.outgoing(s).map(|t| (&t.label, block[t.dest])).collect();
            let fresh = signatures.len();
            next[s] = *signatures.entry((block[s], sig)).or_insert(fresh);
        }
        let stable = signatures.len() == block.iter().collect::<BTreeSet<_>>().len();
        block = next;
        if stable {
            break;
        }
    }
    quotient(m, &block, false)
}

/// Every label sequence of length at most `k` readable from the initial
/// state. ε-moves are taken silently and never appear in a sequence.
pub fn language_up_to_depth(m: &FlatMachine, k: usize) -> Result<BTreeSet<Vec<Label>>, ReduceError> {
    if k == 0 {
        return Err(ReduceError::ZeroDepth);
    }
    let mut alphabet: Vec<&Label> = Vec::new();
    let mut symbol: HashMap<&Label, usize> = HashMap::new();
    for t in &m.transitions {
        if !t.label.event.is_epsilon() && !symbol.contains_key(&t.label) {
            symbol.insert(&t.label, alphabet.len());
            alphabet.push(&t.label);
        }
    }
    let closure =
        |set: &BTreeSet<usize>| -> BTreeSet<usize> { set.iter().flat_map(|&s| epsilon_closure(m, s)).collect() };
    let mut words: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut frontier: Vec<(Vec<usize>, BTreeSet<usize>)> = vec![(Vec::new(), closure(&BTreeSet::from([m.initial])))];
    words.insert(Vec::new());
    for _ in 0..k {
        let mut next = Vec::new();
        for (word, states) in frontier {
            let mut step: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
            for &s in &states {
                for t in m.outgoing(s) {
                    if let Some(&a) = symbol.get(&t.label) {
                        step.entry(a).or_default().insert(t.dest);
                    }
                }
            }
            for (a, dests) in step {
                let mut w = word.clone();
                w.push(a);
                words.insert(w.clone());
                next.push((w, closure(&dests)));
            }
        }
        frontier = next;
    }
    Ok(words
        .into_iter()
        .map(|w| w.into_iter().map(|a| alphabet[a].clone()).collect())
        .collect())
}
