//! Randomized checks of the DSL, solver, lint and scoring against the
//! brute-force oracles in `patternwise-testkit`.

use patternwise_core::dsl::{lint_kb, parse_kb, serialize_kb, LintKind};
use patternwise_core::maut;
use patternwise_core::model::KnowledgeBase;
use patternwise_core::solver;
use patternwise_testkit::{
    oracle_dead_patterns, oracle_feasible, oracle_is_minimal_conflict, oracle_scores, random_kb,
    rng, to_assignment, valid_total_contexts, Ctx, Limits,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn kb_from_seed(seed: u64) -> KnowledgeBase {
    random_kb(&mut rng(seed), Limits::default())
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        let text = serialize_kb(&kb).unwrap();
        let back = parse_kb(&text).unwrap();
        prop_assert_eq!(&back, &kb);
        prop_assert_eq!(serialize_kb(&back).unwrap(), text);
    }

    #[test]
    fn parse_error_spans_point_into_the_source(seed in any::<u64>(), at in any::<prop::sample::Index>(), junk in "[=,()!\"a-z ]{1,4}") {
        let text = serialize_kb(&kb_from_seed(seed)).unwrap();
        let cut = at.index(text.len() + 1);
        let cut = (0..=cut).rev().find(|i| text.is_char_boundary(*i)).unwrap();
        let mutated = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
        if let Err(e) = parse_kb(&mutated) {
            let lines: Vec<&str> = mutated.split('\n').collect();
            for d in e.diagnostics() {
                prop_assert!(d.span.line >= 1 && d.span.line <= lines.len(), "{}", d);
                let width = lines[d.span.line - 1].chars().count();
                prop_assert!(d.span.column >= 1 && d.span.column <= width + 1, "{}", d);
            }
        }
    }

    #[test]
    fn solver_matches_oracle_on_total_contexts(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        for ctx in valid_total_contexts(&kb) {
            let got = solver::feasible_patterns(&kb, &to_assignment(&ctx)).unwrap();
            prop_assert_eq!(got.feasible, oracle_feasible(&kb, &ctx));
        }
    }

    #[test]
    fn answering_never_grows_the_feasible_set(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        let mut r = rng(seed ^ 0x5eed);
        let mut props: Vec<_> = kb.context_properties().collect();
        props.shuffle(&mut r);
        let mut ctx = Ctx::new();
        if !solver::check_context(&kb, &to_assignment(&ctx)).unwrap().is_empty() {
            return Ok(());
        }
        let mut previous = solver::feasible_patterns(&kb, &to_assignment(&ctx)).unwrap().feasible;
        prop_assert_eq!(&previous, &oracle_feasible(&kb, &ctx));
        for p in props {
            // A session rejects answers that break a contextual constraint.
            let allowed: Vec<&String> = p
                .domain
                .iter()
                .filter(|v| {
                    let mut trial = ctx.clone();
                    trial.insert(p.id.clone(), (*v).clone());
                    solver::check_context(&kb, &to_assignment(&trial)).unwrap().is_empty()
                })
                .collect();
            if allowed.is_empty() {
                break;
            }
            ctx.insert(p.id.clone(), allowed[r.random_range(0..allowed.len())].clone());
            let now = solver::feasible_patterns(&kb, &to_assignment(&ctx)).unwrap().feasible;
            prop_assert_eq!(&now, &oracle_feasible(&kb, &ctx));
            prop_assert!(now.iter().all(|id| previous.contains(id)));
            previous = now;
        }
    }

    #[test]
    fn conflict_diagnosis_is_minimal(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        for ctx in valid_total_contexts(&kb) {
            if !oracle_feasible(&kb, &ctx).is_empty() {
                continue;
            }
            let d = solver::diagnose_conflict(&kb, &to_assignment(&ctx)).unwrap();
            let subset: Vec<(String, String)> =
                d.conflict.iter().map(|p| (p.property.clone(), p.value.clone())).collect();
            prop_assert!(oracle_is_minimal_conflict(&kb, &subset), "{:?}", subset);
            prop_assert!(subset.iter().all(|(p, v)| ctx.get(p) == Some(v)));
        }
    }

    #[test]
    fn scores_match_oracle(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        for ctx in valid_total_contexts(&kb) {
            let Some(expected) = oracle_scores(&kb, &ctx) else {
                continue;
            };
            let Ok(ranking) = maut::rank(&kb, &to_assignment(&ctx)) else {
                prop_assert!(oracle_feasible(&kb, &ctx).is_empty());
                continue;
            };
            let total: f64 = ranking.weights.weights.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for s in &ranking.ranked {
                prop_assert!((0.0..=1.0).contains(&s.score));
                prop_assert!((s.score - expected[&s.pattern_id]).abs() < 1e-9);
                let sum: f64 = s.contributions.values().map(|c| c.product).sum();
                prop_assert!((s.score - sum).abs() < 1e-9);
            }
            for pair in ranking.ranked.windows(2) {
                prop_assert!(pair[0].score >= pair[1].score - 1e-9);
            }
        }
    }

    #[test]
    fn ranking_is_invariant_under_weight_scaling(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let kb = kb_from_seed(seed);
        let mut scaled = kb.clone();
        for w in scaled.base_weights.values_mut() {
            *w *= factor;
        }
        for rule in &mut scaled.weight_rules {
            for d in rule.deltas.values_mut() {
                *d *= factor;
            }
        }
        for ctx in valid_total_contexts(&kb) {
            let a = to_assignment(&ctx);
            let (Ok(x), Ok(y)) = (maut::rank(&kb, &a), maut::rank(&scaled, &a)) else {
                continue;
            };
            let ids = |r: &maut::Ranking| r.ranked.iter().map(|s| s.pattern_id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&x), ids(&y));
            for (s, t) in x.ranked.iter().zip(&y.ranked) {
                prop_assert!((s.score - t.score).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lint_dead_patterns_match_oracle(seed in any::<u64>()) {
        let kb = kb_from_seed(seed);
        let mut dead: Vec<String> = lint_kb(&kb)
            .into_iter()
            .filter(|w| w.kind == LintKind::DeadPattern)
            .map(|w| w.subject)
            .collect();
        dead.sort();
        let mut expected = oracle_dead_patterns(&kb);
        expected.sort();
        prop_assert_eq!(dead, expected);
    }
}

#[test]
fn swapping_base_weights_swaps_rankings_of_mirrored_patterns() {
    let kb = parse_kb(
        r#"
control swap
property c context
  values a, b
property x pattern
  values lo, hi
property y pattern
  values lo, hi
pattern p
  x = hi
  y = lo
pattern q
  x = lo
  y = hi
criterion cx
  from x direct
criterion cy
  from y direct
weights
  cx = 3
  cy = 1
"#,
    )
    .unwrap();
    let ctx = to_assignment(&Ctx::from([("c".to_string(), "a".to_string())]));
    let before = maut::rank(&kb, &ctx).unwrap();
    let mut swapped = kb.clone();
    swapped.base_weights.insert("cx".into(), 1.0);
    swapped.base_weights.insert("cy".into(), 3.0);
    let after = maut::rank(&swapped, &ctx).unwrap();
    assert_eq!(before.ranked[0].pattern_id, "p");
    assert_eq!(after.ranked[0].pattern_id, "q");
    assert!((before.ranked[0].score - 0.75).abs() < 1e-12);
    assert!((after.ranked[0].score - 0.75).abs() < 1e-12);
}

#[test]
fn rounding_never_lifts_a_score_above_one() {
    let kb = kb_from_seed(7293410628344233436);
    for ctx in valid_total_contexts(&kb) {
        if let Ok(r) = maut::rank(&kb, &to_assignment(&ctx)) {
            assert!(r.ranked.iter().all(|s| (0.0..=1.0).contains(&s.score)));
        }
    }
}
