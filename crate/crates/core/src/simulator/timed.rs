use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{DelayMode, SimConfig, WaitingMode};
use crate::model::{DelayMatrix, EntityEvent, EntitySpec, MessageId, SapId, TimeInterval, TransitionId};
use crate::pipeline::cause_of;
use crate::rational::{format_rational, Rational};

const SAMPLE_STEPS: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Exec { sp: String, sap: SapId },
    Send { msg: MessageId, from: SapId, to: SapId },
    Recv { msg: MessageId, from: SapId, to: SapId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub time: Rational,
    /// Service transition this event stems from.
    pub cause: TransitionId,
    /// Time since the executing entity entered its source state (Exec only).
    pub waited: Option<Rational>,
    /// Index of the Exec event that produced this message (Send/Recv only).
    pub origin: Option<usize>,
    /// When the message reached the receiver's channel end (Recv only).
    pub arrived: Option<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunEnd {
    ReturnedToInitial,
    Completed,
    MaxSteps,
    Deadlock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedTrace {
    pub run: usize,
    pub events: Vec<TraceEvent>,
    pub end: RunEnd,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} ", format_rational(&self.time))?;
        match &self.kind {
            EventKind::Exec { sp, sap } => {
                write!(f, "EXEC {sp} at {sap} cause={}", self.cause)?;
                if let Some(w) = &self.waited {
                    write!(f, " waited={}", format_rational(w))?;
                }
                Ok(())
            }
            EventKind::Send { msg, from, to } => write!(f, "SEND {msg} {from}->{to} cause={}", self.cause),
            EventKind::Recv { msg, from, to } => {
                write!(f, "RECV {msg} {from}->{to} cause={}", self.cause)?;
                if let Some(a) = &self.arrived {
                    write!(f, " arrived={}", format_rational(a))?;
                }
                Ok(())
            }
        }
    }
}

impl TimedTrace {
    /// One event per line, prefixed by a run header.
    pub fn dump(&self) -> String {
        let mut out = format!("run {} end={:?}\n", self.run, self.end);
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("max_steps must be at least 1")]
    NoSteps,
    #[error("no channel {from} -> {to} for message {msg}")]
    MissingChannel { from: SapId, to: SapId, msg: MessageId },
    #[error("message {msg} is sent to {to}, which has no entity")]
    UnknownEntity { to: SapId, msg: MessageId },
}

struct InFlight {
    msg: MessageId,
    cause: TransitionId,
    origin: usize,
    sent: Rational,
    arrival: Rational,
}

fn sample(rng: &mut ChaCha8Rng, iv: &TimeInterval) -> Rational {
    let r = rng.gen_range(0..=SAMPLE_STEPS);
    iv.lower() + Rational::new(BigInt::from(r), BigInt::from(SAMPLE_STEPS)) * iv.spread()
}

fn draw_wait(rng: &mut ChaCha8Rng, mode: WaitingMode, iv: &TimeInterval) -> Rational {
    match mode {
        WaitingMode::UniformRandom => sample(rng, iv),
        WaitingMode::AlwaysMin => iv.lower().clone(),
        WaitingMode::AlwaysMax => iv.upper().clone(),
    }
}

/// Runs `cfg.runs` independent simulations. Run `r` is seeded with
/// `cfg.seed + r`.
pub fn simulate(pes: &[EntitySpec], delays: &DelayMatrix, cfg: &SimConfig) -> Result<Vec<TimedTrace>, SimError> {
    if cfg.runs == 0 {
        return Err(SimError::NoRuns);
    }
    if cfg.max_steps == 0 {
        return Err(SimError::NoSteps);
    }
    (0..cfg.runs)
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run as u64));
            Run::new(pes, delays, cfg, &mut rng).execute(run)
        })
        .collect()
}

struct Run<'a> {
    pes: &'a [EntitySpec],
    delays: &'a DelayMatrix,
    cfg: &'a SimConfig,
    rng: &'a mut ChaCha8Rng,
    by_sap: HashMap<&'a SapId, usize>,
    state: Vec<usize>,
    entered: Vec<Rational>,
    /// Planned firing time per outgoing Execute of the current state.
    planned: Vec<Vec<(usize, Rational)>>,
    channels: BTreeMap<(usize, usize), VecDeque<InFlight>>,
    pinned: BTreeMap<(usize, usize), bool>,
    events: Vec<TraceEvent>,
}

impl<'a> Run<'a> {
    fn new(pes: &'a [EntitySpec], delays: &'a DelayMatrix, cfg: &'a SimConfig, rng: &'a mut ChaCha8Rng) -> Self {
        let by_sap = pes.iter().enumerate().map(|(i, p)| (&p.sap, i)).collect();
        let mut pinned = BTreeMap::new();
        if cfg.delay_mode == DelayMode::PerChannelExtremes {
            for i in 0..pes.len() {
                for j in 0..pes.len() {
                    if i != j {
                        pinned.insert((i, j), rng.gen_bool(0.5));
                    }
                }
            }
        }
        let mut run = Run {
            pes,
            delays,
            cfg,
            rng,
            by_sap,
            state: pes.iter().map(|p| p.machine.initial).collect(),
            entered: vec![Rational::default(); pes.len()],
            planned: vec![Vec::new(); pes.len()],
            channels: BTreeMap::new(),
            pinned,
            events: Vec::new(),
        };
        for i in 0..pes.len() {
            run.plan(i);
        }
        run
    }

    fn plan(&mut self, pe: usize) {
        let m = &self.pes[pe].machine;
        let mut planned = Vec::new();
        for (k, t) in m.transitions.iter().enumerate() {
            if t.source != self.state[pe] {
                continue;
            }
            if let EntityEvent::Execute { interval, .. } = &t.label.event {
                let wait = draw_wait(self.rng, self.cfg.waiting_mode, interval);
                planned.push((k, &self.entered[pe] + wait));
            }
        }
        self.planned[pe] = planned;
    }

    fn delay(&mut self, from: usize, to: usize, d: &TimeInterval) -> Rational {
        match self.cfg.delay_mode {
            DelayMode::UniformRandom => sample(self.rng, d),
            DelayMode::AllMin => d.lower().clone(),
            DelayMode::AllMax => d.upper().clone(),
            DelayMode::PerChannelExtremes => {
                if self.pinned.get(&(from, to)).copied().unwrap_or(false) {
                    d.upper().clone()
                } else {
                    d.lower().clone()
                }
            }
        }
    }

    /// Earliest event: (time, receive-first rank, entity, transition index).
    fn next_event(&self) -> Option<(Rational, u8, usize, usize)> {
        let mut best: Option<(Rational, u8, usize, usize)> = None;
        for pe in 0..self.pes.len() {
            let m = &self.pes[pe].machine;
            for (k, t) in m.transitions.iter().enumerate() {
                if t.source != self.state[pe] {
                    continue;
                }
                let EntityEvent::Receive { msg, from } = &t.label.event else {
                    continue;
                };
                let Some(&src) = self.by_sap.get(from) else { continue };
                let Some(head) = self.channels.get(&(src, pe)).and_then(|q| q.front()) else {
                    continue;
                };
                if &head.msg != msg {
                    continue;
                }
                let time = head.arrival.clone().max(self.entered[pe].clone());
                let cand = (time, 0, pe, k);
                if best.as_ref().is_none_or(|b| cand < *b) {
                    best = Some(cand);
                }
            }
            for (k, time) in &self.planned[pe] {
                let cand = (time.clone(), 1, pe, *k);
                if best.as_ref().is_none_or(|b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    fn enter(&mut self, pe: usize, dest: usize, now: &Rational) {
        self.state[pe] = dest;
        self.entered[pe] = now.clone();
        self.plan(pe);
    }

    fn at_global_initial(&self) -> bool {
        self.pes
            .iter()
            .enumerate()
            .all(|(i, p)| self.state[i] == p.machine.initial)
            && self.channels.values().all(VecDeque::is_empty)
    }

    fn completed(&self) -> bool {
        self.pes
            .iter()
            .enumerate()
            .all(|(i, p)| p.machine.states[self.state[i]].is_final)
            && self.channels.values().all(VecDeque::is_empty)
    }

    fn execute(mut self, run: usize) -> Result<TimedTrace, SimError> {
        let mut steps = 0;
        let end = loop {
            if steps >= self.cfg.max_steps {
                break RunEnd::MaxSteps;
            }
            let Some((now, rank, pe, k)) = self.next_event() else {
                break if self.completed() {
                    RunEnd::Completed
                } else {
                    RunEnd::Deadlock
                };
            };
            steps += 1;
            let t = &self.pes[pe].machine.transitions[k];
            let me = &self.pes[pe].sap;
            if rank == 0 {
                let EntityEvent::Receive { msg, from } = &t.label.event else {
                    unreachable!()
                };
                let src = self.by_sap[from];
                let m = self.channels.get_mut(&(src, pe)).unwrap().pop_front().unwrap();
                debug_assert!(m.sent <= now);
                self.events.push(TraceEvent {
                    kind: EventKind::Recv {
                        msg: msg.clone(),
                        from: from.clone(),
                        to: me.clone(),
                    },
                    time: now.clone(),
                    cause: m.cause,
                    waited: None,
                    origin: Some(m.origin),
                    arrived: Some(m.arrival),
                });
            } else {
                let EntityEvent::Execute { sp, send_to, msg, .. } = &t.label.event else {
                    unreachable!()
                };
                let cause = TransitionId::new(cause_of(&t.id));
                let origin = self.events.len();
                self.events.push(TraceEvent {
                    kind: EventKind::Exec {
                        sp: sp.clone(),
                        sap: me.clone(),
                    },
                    time: now.clone(),
                    cause: cause.clone(),
                    waited: Some(&now - &self.entered[pe]),
                    origin: None,
                    arrived: None,
                });
                if let Some(msg) = msg {
                    for to in send_to {
                        let dst = *self.by_sap.get(to).ok_or_else(|| SimError::UnknownEntity {
                            to: to.clone(),
                            msg: msg.clone(),
                        })?;
                        let d = self.delays.get(me, to).ok_or_else(|| SimError::MissingChannel {
                            from: me.clone(),
                            to: to.clone(),
                            msg: msg.clone(),
                        })?;
                        let delay = self.delay(pe, dst, d);
                        let queue = self.channels.entry((pe, dst)).or_default();
                        // FIFO: a message never overtakes the one sent before it.
                        let mut arrival = &now + delay;
                        if let Some(last) = queue.back() {
                            arrival = arrival.max(last.arrival.clone());
                        }
                        queue.push_back(InFlight {
                            msg: msg.clone(),
                            cause: cause.clone(),
                            origin,
                            sent: now.clone(),
                            arrival,
                        });
                        self.events.push(TraceEvent {
                            kind: EventKind::Send {
                                msg: msg.clone(),
                                from: me.clone(),
                                to: to.clone(),
                            },
                            time: now.clone(),
                            cause: cause.clone(),
                            waited: None,
                            origin: Some(origin),
                            arrived: None,
                        });
                    }
                }
            }
            let dest = t.dest;
            self.enter(pe, dest, &now);
            if self.at_global_initial() {
                break RunEnd::ReturnedToInitial;
            }
        };
        Ok(TimedTrace {
            run,
            events: self.events,
            end,
        })
    }
}
