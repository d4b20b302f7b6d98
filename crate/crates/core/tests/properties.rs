use std::collections::BTreeSet;

use proptest::prelude::*;
use tpsynth::io::{emit_entity_spec, emit_service_spec, parse_entity_spec, parse_service_spec};
use tpsynth::model::{EntityEvent, KindTag, Region, ServiceSpec, StateKind, TimeInterval, Transition};
use tpsynth::pipeline::{reduce, synthesize};
use tpsynth::rational::{ratio, Rational};
use tpsynth::reducer::{flatten, language_up_to_depth, minimize, remove_epsilon_cycles, remove_epsilon_transitions};
use tpsynth::simulator::{
    check_lemma1, check_lemma2, generate_random_sspec, random_flat_machine, simulate, DelayMode, FlatParams, GenParams,
    SimConfig, WaitingMode,
};
use tpsynth::synthesizer::{plan, synthesize_primary};
use tpsynth::validator::{destination_set, timing_checks, validate_timing, RuleId, TimingRule};

fn params() -> impl Strategy<Value = GenParams> {
    (1usize..=4, 2usize..=8, 0usize..=2, any::<bool>()).prop_map(|(saps, states, composites, cycle)| GenParams {
        saps,
        states,
        composites,
        cycle,
    })
}

fn map_transitions(region: &mut Region, f: &mut impl FnMut(&mut Transition)) {
    for t in &mut region.transitions {
        f(t);
    }
    for s in &mut region.states {
        if let StateKind::Composite(inner) = &mut s.kind {
            map_transitions(inner, f);
        }
    }
}

fn rules_of(spec: &ServiceSpec) -> Vec<(RuleId, BTreeSet<tpsynth::model::SapId>)> {
    spec.machine
        .all_transitions()
        .into_iter()
        .map(|t| {
            let d = destination_set(t, spec).unwrap();
            (d.rule, d.receivers)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn widening_max_keeps_timing_valid(p in params(), seed in any::<u64>(), extra in 0i64..50) {
        let mut spec = generate_random_sspec(p, seed);
        prop_assert!(validate_timing(&spec).is_empty());
        map_transitions(&mut spec.machine, &mut |t| {
            let hi = t.interval.upper() + ratio(extra, 10);
            t.interval = TimeInterval::new(t.interval.lower().clone(), hi).unwrap();
        });
        prop_assert!(validate_timing(&spec).is_empty());
    }

    #[test]
    fn shrinking_channel_max_keeps_three_checks(p in params(), seed in any::<u64>(), cut in 0i64..10) {
        let spec = generate_random_sspec(p, seed);
        let mut shrunk = spec.clone();
        let mut delays = tpsynth::model::DelayMatrix::new();
        for (from, to, d) in spec.delays.iter() {
            let hi = (d.upper() - ratio(cut, 100)).max(d.lower().clone());
            delays.insert(from.clone(), to.clone(), TimeInterval::new(d.lower().clone(), hi).unwrap()).unwrap();
        }
        shrunk.delays = delays;
        let failing: Vec<_> = timing_checks(&shrunk)
            .into_iter()
            .filter(|c| !c.holds() && c.rule != TimingRule::SynthesizedIntervalEmpty)
            .collect();
        prop_assert!(failing.is_empty(), "{:?}", failing);
    }

    #[test]
    fn destination_sets_ignore_timing(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        let mut retimed = spec.clone();
        map_transitions(&mut retimed.machine, &mut |t| {
            t.interval = TimeInterval::new(ratio(7, 1), ratio(9, 1)).unwrap();
        });
        retimed.delays = tpsynth::model::DelayMatrix::new();
        prop_assert_eq!(rules_of(&spec), rules_of(&retimed));
    }

    #[test]
    fn one_rule_per_destination_kind(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        let index = spec.index();
        for t in spec.machine.all_transitions() {
            let d = destination_set(t, &spec).unwrap();
            let expected = match (index.kind(&t.dest).unwrap(), index.is_top_level(&t.dest)) {
                (KindTag::Initial | KindTag::Final, true) => RuleId::ReturnToInitial,
                (KindTag::Final, false) => RuleId::CompositeCompletion,
                (KindTag::Composite, _) => RuleId::EnterComposite,
                _ => RuleId::SimpleState,
            };
            prop_assert_eq!(d.rule, expected);
            prop_assert!(!d.receivers.contains(&t.sap));
        }
    }

    #[test]
    fn label_partition(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        let pes = synthesize_primary(&spec).unwrap();
        for app in plan(&spec).unwrap() {
            let mut exec = 0;
            let mut recv = 0;
            let mut eps = 0;
            for pe in &pes {
                match &pe.labels[&app.transition].event {
                    EntityEvent::Execute { .. } => exec += 1,
                    EntityEvent::Receive { .. } => recv += 1,
                    EntityEvent::Epsilon => eps += 1,
                }
            }
            prop_assert_eq!(exec, 1);
            prop_assert_eq!(recv, app.receivers.len());
            prop_assert_eq!(eps, spec.saps.len() - 1 - app.receivers.len());
            prop_assert!(app.adjusted.upper() <= app.original.upper());
            prop_assert!(app.adjusted.lower() <= app.original.lower());
        }
    }

    #[test]
    fn projections_partition_sp_labels(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        let labeled: usize = spec
            .saps
            .iter()
            .map(|s| {
                tpsynth::synthesizer::project(&spec, s)
                    .labels
                    .values()
                    .filter(|l| matches!(l, tpsynth::synthesizer::ProjectedLabel::SpLabeled { .. }))
                    .count()
            })
            .sum();
        prop_assert_eq!(labeled, spec.machine.all_transitions().len());
    }

    #[test]
    fn synthesis_is_deterministic_and_round_trips(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        let text = emit_service_spec(&spec);
        prop_assert_eq!(&parse_service_spec(&text).unwrap(), &spec);
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        prop_assert_eq!(a.outputs(), b.outputs());
        for e in &a.entities {
            prop_assert_eq!(&parse_entity_spec(&emit_entity_spec(e)).unwrap(), e);
            prop_assert!(e.machine.transitions.iter().all(|t| !t.label.event.is_epsilon()));
        }
    }

    #[test]
    fn reduction_keeps_entity_language(p in params(), seed in any::<u64>()) {
        let spec = generate_random_sspec(p, seed);
        for ppe in synthesize_primary(&spec).unwrap() {
            let flat = flatten(&ppe).unwrap();
            let reduced = reduce(&ppe).unwrap();
            prop_assert_eq!(language_up_to_depth(&flat, 12).unwrap(), language_up_to_depth(&reduced, 12).unwrap());
        }
    }

    #[test]
    fn reducer_stages_keep_language(seed in any::<u64>()) {
        let m = random_flat_machine(FlatParams::default(), seed);
        let k = 10;
        let lang = language_up_to_depth(&m, k).unwrap();
        let acyclic = remove_epsilon_cycles(&m);
        prop_assert_eq!(&language_up_to_depth(&acyclic, k).unwrap(), &lang);
        let observable = remove_epsilon_transitions(&acyclic);
        prop_assert!(observable.transitions.iter().all(|t| !t.label.event.is_epsilon()));
        prop_assert_eq!(&language_up_to_depth(&observable, k).unwrap(), &lang);
        let min = minimize(&observable);
        prop_assert!(min.states.len() <= observable.states.len());
        prop_assert_eq!(&language_up_to_depth(&min, k).unwrap(), &lang);
        prop_assert_eq!(minimize(&min), min);
    }

    #[test]
    fn simulated_runs_keep_both_timing_bounds(p in params(), seed in any::<u64>(), mode in 0usize..12) {
        let spec = generate_random_sspec(p, seed);
        let pes = synthesize(&spec).unwrap().entities;
        let cfg = SimConfig {
            runs: 3,
            seed,
            max_steps: 500,
            delay_mode: DelayMode::ALL[mode % 4],
            waiting_mode: WaitingMode::ALL[mode / 4],
        };
        for trace in simulate(&pes, &spec.delays, &cfg).unwrap() {
            let v1 = check_lemma1(&trace, &spec).unwrap();
            prop_assert!(v1.is_empty(), "{:?}\n{}", v1, trace.dump());
            let (v2, _) = check_lemma2(&trace, &spec).unwrap();
            prop_assert!(v2.is_empty(), "{:?}\n{}", v2, trace.dump());
        }
    }
}

#[test]
fn adjusted_upper_bound_is_exact() {
    let spec = generate_random_sspec(GenParams::default(), 1);
    for app in plan(&spec).unwrap() {
        let drop: Rational = app.original.upper() - app.adjusted.upper();
        let expected = app
            .receivers
            .iter()
            .map(|j| spec.delays.get(&app.sap, j).unwrap().upper().clone())
            .max()
            .unwrap_or_default();
        assert_eq!(drop, expected);
    }
}
