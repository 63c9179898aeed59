//! The shipped authentication knowledge bases and reference contexts.

use std::fs;
use std::path::PathBuf;

use patternwise_core::dsl::{lint_kb, parse_context, parse_kb, serialize_kb};
use patternwise_core::maut;
use patternwise_core::model::{ContextAssignment, KnowledgeBase};
use patternwise_core::solver;
use patternwise_core::KbCatalog;
use patternwise_testkit::{all_total_contexts, oracle_feasible, oracle_scores, to_ctx};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn authn() -> KnowledgeBase {
    parse_kb(&fs::read_to_string(root().join("kbs/authn.kb")).unwrap()).unwrap()
}

fn rc(kb: &KnowledgeBase, n: u32) -> ContextAssignment {
    let path = root().join(format!("rcs/rc{n}.ctx"));
    parse_context(&fs::read_to_string(&path).unwrap(), "rc", Some(kb)).unwrap()
}

#[test]
fn catalog_links_password_child() {
    let catalog = KbCatalog::load_dir(&root().join("kbs")).unwrap();
    assert_eq!(catalog.len(), 2);
    let child = catalog.child_of("authn", "password").unwrap();
    assert_eq!(child.id, "password");
    assert!(catalog.child_of("authn", "passkey").is_none());
}

#[test]
fn shipped_kbs_round_trip_and_lint_clean() {
    for name in ["authn.kb", "password.kb"] {
        let kb = parse_kb(&fs::read_to_string(root().join("kbs").join(name)).unwrap()).unwrap();
        assert_eq!(parse_kb(&serialize_kb(&kb).unwrap()).unwrap(), kb, "{name}");
        assert!(lint_kb(&kb).is_empty(), "{name}: {:?}", lint_kb(&kb));
    }
}

#[test]
fn solver_and_scores_match_oracle_on_every_context() {
    let kb = authn();
    let contexts = all_total_contexts(&kb);
    assert_eq!(contexts.len(), 64);
    for ctx in contexts {
        let a = patternwise_testkit::to_assignment(&ctx);
        let got = solver::feasible_patterns(&kb, &a).unwrap();
        assert_eq!(got.feasible, oracle_feasible(&kb, &ctx), "{ctx:?}");
        let expected = oracle_scores(&kb, &ctx).unwrap();
        for s in maut::rank(&kb, &a).unwrap().ranked {
            assert!((s.score - expected[&s.pattern_id]).abs() < 1e-9);
        }
    }
}

#[test]
fn rc4_ranks_password_first_on_costs_alone() {
    let kb = authn();
    let ranking = maut::rank(&kb, &rc(&kb, 4)).unwrap();
    // budget=low and no-users=high push usability to zero: only costs count.
    assert_eq!(ranking.weights.get("usability"), 0.0);
    assert_eq!(ranking.weights.get("costs"), 1.0);
    assert_eq!(
        ranking.weights.fired_rules,
        vec!["W-budget-low", "W-users-high"]
    );
    let ids: Vec<&str> = ranking
        .ranked
        .iter()
        .map(|s| s.pattern_id.as_str())
        .collect();
    assert_eq!(
        ids,
        vec![
            "password",
            "key-stretch",
            "hrdw-token",
            "passkey",
            "biom-device",
            "biom-profile"
        ]
    );
    let scores: Vec<f64> = ranking.ranked.iter().map(|s| s.score).collect();
    assert_eq!(scores, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn rc3_explanation_names_the_security_filter() {
    let kb = authn();
    let e = maut::recommend(&kb, &rc(&kb, 3)).unwrap();
    assert_eq!(e.excluded.len(), 1);
    assert_eq!(e.excluded[0].pattern_id, "password");
    assert_eq!(e.excluded[0].violated[0].filter, "F1");
    // usability 1 + 0.7, costs 1 - 0.1, normalized by 2.6
    assert!((e.weights["usability"] - 1.7 / 2.6).abs() < 1e-12);
    assert!((e.weights["costs"] - 0.9 / 2.6).abs() < 1e-12);
    assert!(e.render().contains("excluded password by F1"));
}

#[test]
fn rc7_drops_hardware_token() {
    let kb = authn();
    let f = solver::feasible_patterns(&kb, &rc(&kb, 7)).unwrap();
    assert!(!f.is_feasible("hrdw-token"));
    assert_eq!(f.exclusions["hrdw-token"], vec!["F2"]);
}

#[test]
fn every_reference_context_is_total_and_feasible() {
    let kb = authn();
    for n in 1..=8 {
        let ctx = rc(&kb, n);
        assert!(kb.is_total(&ctx));
        assert!(!oracle_feasible(&kb, &to_ctx(&ctx)).is_empty());
    }
}

/// The shipped KB plus a budget filter that can leave nothing feasible.
fn authn_with_budget_filter() -> KnowledgeBase {
    authn_with_budget_filter_requiring("costs = low")
}

#[test]
fn diagnosis_isolates_security_and_budget() {
    let kb = authn_with_budget_filter();
    let mut ctx = ContextAssignment::new();
    for (p, v) in [
        ("sec-lev", "high"),
        ("use-lev", "low"),
        ("budget", "low"),
        ("shared-device", "no"),
    ] {
        ctx.set(p, v);
    }
    assert!(matches!(
        maut::recommend(&kb, &ctx),
        Err(patternwise_core::Error::IncompleteContext(_))
    ));
    assert_eq!(
        solver::feasible_patterns(&kb, &ctx).unwrap().feasible.len(),
        0
    );
    let d = solver::diagnose_conflict(&kb, &ctx).unwrap();
    let pairs: Vec<(&str, &str)> = d
        .conflict
        .iter()
        .map(|p| (p.property.as_str(), p.value.as_str()))
        .collect();
    assert_eq!(pairs, vec![("sec-lev", "high"), ("budget", "low")]);
    let filters: Vec<&str> = d.messages.iter().map(|m| m.filter.as_str()).collect();
    assert_eq!(filters, vec!["F1", "F4"]);
}

#[test]
fn four_answer_conflict_reduces_to_a_minimal_subset() {
    let mut ctx = ContextAssignment::new();
    for (p, v) in [
        ("sec-lev", "high"),
        ("shared-device", "yes"),
        ("intern-extern", "external"),
        ("budget", "low"),
    ] {
        ctx.set(p, v);
    }
    // Ruling out only high-cost patterns leaves key-stretch (medium) standing.
    let loose = authn_with_budget_filter_requiring("costs != high");
    assert_eq!(
        solver::feasible_patterns(&loose, &ctx).unwrap().feasible,
        vec!["key-stretch"]
    );

    let kb = authn_with_budget_filter();
    assert!(solver::feasible_patterns(&kb, &ctx)
        .unwrap()
        .feasible
        .is_empty());
    let d = solver::diagnose_conflict(&kb, &ctx).unwrap();
    let subset: Vec<(String, String)> = d
        .conflict
        .iter()
        .map(|p| (p.property.clone(), p.value.clone()))
        .collect();
    assert!(patternwise_testkit::oracle_is_minimal_conflict(
        &kb, &subset
    ));
    assert_eq!(
        subset,
        vec![
            ("sec-lev".to_string(), "high".to_string()),
            ("budget".to_string(), "low".to_string())
        ]
    );
}

fn authn_with_budget_filter_requiring(requirement: &str) -> KnowledgeBase {
    let text = fs::read_to_string(root().join("kbs/authn.kb")).unwrap()
        + &format!(
            "\nfilter F4\n  when budget = low\n  then {requirement}\n  message \"budget\"\n"
        );
    parse_kb(&text).unwrap()
}
