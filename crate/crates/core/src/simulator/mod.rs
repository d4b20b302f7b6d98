//! Co-simulation of synthesized entities over delayed FIFO channels, and
//! the checks run against the resulting traces: per-SP timing, cumulative
//! timing along the causal chain, untimed trace equivalence with the
//! service, and deadlock freedom.

mod conformance;
mod explore;
mod generate;
mod timed;

pub use conformance::{check_conformance, check_lemma1, check_lemma2, CheckError, ConformanceReport, Violation};
pub use explore::{
    check_untimed_equivalence, detect_deadlock, explore, Counterexample, Deadlock, Exploration, ExploreConfig,
    ExploreError, Observable,
};
pub use generate::{generate_random_sspec, random_flat_machine, FlatParams, GenParams};
pub use timed::{simulate, EventKind, RunEnd, SimError, TimedTrace, TraceEvent};

/// How channel delays are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayMode {
    UniformRandom,
    AllMin,
    AllMax,
    /// Each channel is pinned to its min or its max for a whole run.
    PerChannelExtremes,
}

/// How an entity's waiting time before an SP is drawn from its interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaitingMode {
    UniformRandom,
    AlwaysMin,
    AlwaysMax,
}

impl DelayMode {
    pub const ALL: [DelayMode; 4] = [
        DelayMode::UniformRandom,
        DelayMode::AllMin,
        DelayMode::AllMax,
        DelayMode::PerChannelExtremes,
    ];
}

impl WaitingMode {
    pub const ALL: [WaitingMode; 3] = [
        WaitingMode::UniformRandom,
        WaitingMode::AlwaysMin,
        WaitingMode::AlwaysMax,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub runs: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub delay_mode: DelayMode,
    pub waiting_mode: WaitingMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            runs: 1,
            seed: 0,
            max_steps: 10_000,
            delay_mode: DelayMode::UniformRandom,
            waiting_mode: WaitingMode::UniformRandom,
        }
    }
}
