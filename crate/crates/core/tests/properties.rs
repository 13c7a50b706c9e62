//! Cross-cutting property suites: execution determinism and the agreement
//! of the fast interpreter with the small-step relation, lasso soundness,
//! parser round trips over generated programs, and knowledge-set laws.

use proptest::prelude::*;
use robustcheck_core::ast::program_to_string;
use robustcheck_core::knowledge::{knowledge, progress_knowledge};
use robustcheck_core::parser::parse_program;
use robustcheck_core::progen::ProgramGen;
use robustcheck_core::semantics::{run, step, LowEvent, LowRun, Mode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// The continuation-stack fast path and the step relation produce the
    /// same events, final memory, and termination verdict.
    #[test]
    fn fast_and_small_step_runs_agree(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(3);
        let m = g.memory(&p);
        let fast = run(&p.body, &m, p.domain);
        // drive the step function directly, far enough to cover the prefix
        let mut c = p.body.clone();
        let mut mem = m.clone();
        let mut events = Vec::new();
        let budget = fast.events.len() + fast.lasso.len() + 64;
        for _ in 0..budget {
            if c.is_halt() {
                break;
            }
            let (cn, mn, ev) = step(&c, &mem, p.domain);
            events.extend(ev);
            c = cn;
            mem = mn;
        }
        if fast.terminated {
            prop_assert!(c.is_halt());
            prop_assert_eq!(&events, &fast.events);
            prop_assert_eq!(&mem, &fast.final_memory);
        } else {
            prop_assert!(!c.is_halt());
            let expected: Vec<_> = fast
                .events
                .iter()
                .chain(fast.lasso.iter().cycle())
                .take(events.len())
                .cloned()
                .collect();
            prop_assert_eq!(&events, &expected);
        }
    }

    /// Two runs from equal configurations are identical.
    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(4);
        let m = g.memory(&p);
        prop_assert_eq!(run(&p.body, &m, p.domain), run(&p.body, &m, p.domain));
    }

    /// Replaying a detected cycle reproduces the lasso events exactly,
    /// period after period.
    #[test]
    fn lasso_replay_is_sound(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(3);
        let m = g.memory(&p);
        let r = run(&p.body, &m, p.domain);
        if r.terminated || r.lasso.is_empty() {
            return Ok(());
        }
        let (mut c, mut mem) = r.cycle_entry.clone().unwrap();
        let mut replayed = Vec::new();
        let mut guard = 0usize;
        while replayed.len() < 3 * r.lasso.len() {
            let (cn, mn, ev) = step(&c, &mem, p.domain);
            replayed.extend(ev);
            c = cn;
            mem = mn;
            guard += 1;
            prop_assert!(guard < 100_000, "cycle replay ran away");
        }
        let expected: Vec<_> = r.lasso.iter().cycle().take(replayed.len()).cloned().collect();
        prop_assert_eq!(replayed, expected);
    }

    /// Printing a generated program and reparsing it yields the same AST
    /// (modulo spans) and environment.
    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(4);
        let printed = program_to_string(&p);
        let q = parse_program(&printed)
            .unwrap_or_else(|e| panic!("reparse failed: {e}\n{printed}"));
        prop_assert_eq!(p.body.strip_spans(), q.body.strip_spans(), "{}", printed);
        prop_assert_eq!(p.env, q.env);
    }

    /// Knowledge shrinks monotonically along a run and the anchor memory
    /// never leaves its own knowledge set; across proper low events the
    /// chain k ⊇ k→ ⊇ k-next holds.
    #[test]
    fn knowledge_monotone_and_sandwiched(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(3);
        let m = g.memory(&p);
        for mode in [Mode::Ps, Mode::Pi] {
            let lr = LowRun::of_run(&run(&p.body, &m, p.domain), &p.env, mode);
            let n = lr.finite_len().unwrap_or(6).min(6);
            let mut prev = knowledge(&p, &p.body, &m, &[], mode);
            prop_assert!(prev.contains(&m));
            for j in 0..n {
                let Some(next_event) = lr.event_at(j) else { break };
                let prefix = lr.materialize(j);
                let mut next_prefix = prefix.clone();
                next_prefix.push(next_event);
                let next = knowledge(&p, &p.body, &m, &next_prefix, mode);
                prop_assert!(next.is_subset(&prev));
                prop_assert!(next.contains(&m));
                if matches!(next_event, LowEvent::Assign(..)) {
                    let pk = progress_knowledge(&p, &p.body, &m, &prefix, mode);
                    prop_assert!(pk.is_subset(&prev));
                    prop_assert!(next.is_subset(&pk));
                }
                prev = next;
            }
        }
    }

    /// All memories returned by a knowledge query agree with the anchor on
    /// public variables.
    #[test]
    fn knowledge_sets_fix_the_public_part(seed in any::<u64>()) {
        let mut g = ProgramGen::new(seed);
        let p = g.program(3);
        let m = g.memory(&p);
        let k = knowledge(&p, &p.body, &m, &[], Mode::Ps);
        for m2 in k.iter() {
            prop_assert!(m2.agrees_public(&m, &p.env));
        }
    }
}

#[test]
fn generated_memories_are_in_domain() {
    let mut g = ProgramGen::new(7);
    for _ in 0..50 {
        let p = g.program(4);
        let m = g.memory(&p);
        assert_eq!(m.0.len(), p.env.len());
        assert!(m.0.iter().all(|&v| v < p.domain));
    }
}
