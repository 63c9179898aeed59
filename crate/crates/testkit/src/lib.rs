//! Test support: a seeded random knowledge-base generator and brute-force
//! oracles that share no evaluation code with `patternwise-core`.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use patternwise_core::model::{
    Condition, ContextAssignment, ContextualConstraint, Criterion, FilterCondition, KbLevel,
    KnowledgeBase, PatternDefinition, PatternLevel, Polarity, PropertyDecl, PropertyKind,
    WeightRule,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A total or partial context as a plain ordered map.
pub type Ctx = BTreeMap<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for generated knowledge bases.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_patterns: usize,
    pub max_context_properties: usize,
    pub max_pattern_properties: usize,
    pub max_filters: usize,
    pub max_domain: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_patterns: 8,
            max_context_properties: 3,
            max_pattern_properties: 3,
            max_filters: 6,
            max_domain: 3,
        }
    }
}

const TEXT_POOL: &[&str] = &[
    "",
    "plain text",
    "with \"quotes\"",
    "back\\slash",
    "tab\tand newline\n",
    "unicode: ünïcødé ✓",
    "# not a comment",
    "a, b = c",
];

fn text(rng: &mut impl Rng) -> String {
    TEXT_POOL.choose(rng).unwrap().to_string()
}

fn domain(rng: &mut impl Rng, max: usize) -> Vec<String> {
    let n = rng.random_range(2..=max.max(2));
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Generates a random condition over `props` (id → domain).
pub fn random_condition(
    rng: &mut impl Rng,
    props: &[(String, Vec<String>)],
    depth: u32,
) -> Condition {
    let leaf = depth == 0 || rng.random_bool(0.45);
    if leaf {
        let roll = rng.random_range(0..20);
        if roll == 0 {
            return Condition::True;
        }
        if roll == 1 {
            return Condition::False;
        }
        let (p, dom) = props.choose(rng).unwrap();
        let v = dom.choose(rng).unwrap().clone();
        return match rng.random_range(0..3) {
            0 => Condition::eq(p, v),
            1 => Condition::ne(p, v),
            _ => {
                let k = rng.random_range(1..=dom.len());
                let vals: Vec<String> = dom.choose_multiple(rng, k).cloned().collect();
                Condition::is_in(p, vals)
            }
        };
    }
    match rng.random_range(0..3) {
        0 => Condition::not(random_condition(rng, props, depth - 1)),
        k => {
            let n = rng.random_range(2..=3);
            let ops = (0..n)
                .map(|_| random_condition(rng, props, depth - 1))
                .collect();
            if k == 1 {
                Condition::and(ops)
            } else {
                Condition::or(ops)
            }
        }
    }
}

/// Generates a valid control-level knowledge base.
pub fn random_kb(rng: &mut impl Rng, limits: Limits) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new(format!("kb{}", rng.random_range(0..1000)), KbLevel::Control);
    kb.description = text(rng);

    let n_ctx = rng.random_range(1..=limits.max_context_properties);
    let n_pat = rng.random_range(1..=limits.max_pattern_properties);
    let ctx_props: Vec<(String, Vec<String>)> = (0..n_ctx)
        .map(|i| (format!("ctx{i}"), domain(rng, limits.max_domain)))
        .collect();
    let pat_props: Vec<(String, Vec<String>)> = (0..n_pat)
        .map(|i| (format!("prop{i}"), domain(rng, limits.max_domain)))
        .collect();
    for (id, dom) in &ctx_props {
        kb.property_decls.push(PropertyDecl {
            id: id.clone(),
            kind: PropertyKind::Context,
            domain: dom.clone(),
            question_text: rng.random_bool(0.5).then(|| text(rng)),
            description: text(rng),
        });
    }
    for (id, dom) in &pat_props {
        kb.property_decls.push(PropertyDecl {
            id: id.clone(),
            kind: PropertyKind::Pattern,
            domain: dom.clone(),
            question_text: None,
            description: text(rng),
        });
    }

    let n_patterns = rng.random_range(1..=limits.max_patterns);
    for i in 0..n_patterns {
        let values: IndexMap<String, String> = pat_props
            .iter()
            .map(|(p, dom)| (p.clone(), dom.choose(rng).unwrap().clone()))
            .collect();
        kb.patterns.push(PatternDefinition {
            id: format!("pat{i}"),
            level: PatternLevel::SecurityPattern,
            values,
            description: text(rng),
            child_kb: None,
        });
    }

    for i in 0..rng.random_range(0..=1) {
        kb.contextual_constraints.push(ContextualConstraint {
            id: format!("C{i}"),
            expr: random_condition(rng, &ctx_props, 2),
            message: text(rng),
        });
    }
    for i in 0..rng.random_range(0..=limits.max_filters) {
        kb.filter_conditions.push(FilterCondition {
            id: format!("F{i}"),
            guard: random_condition(rng, &ctx_props, 2),
            requirement: random_condition(rng, &pat_props, 2),
            message: text(rng),
        });
    }

    for (i, (p, _)) in pat_props.iter().enumerate() {
        if i > 0 && rng.random_bool(0.3) {
            continue;
        }
        let id = format!("crit{i}");
        kb.criteria.push(Criterion {
            id: id.clone(),
            source_property: p.clone(),
            polarity: if rng.random_bool(0.5) {
                Polarity::Direct
            } else {
                Polarity::Inverse
            },
        });
        kb.base_weights
            .insert(id, rng.random_range(1..=20) as f64 / 10.0);
    }
    for i in 0..rng.random_range(0..=2) {
        let mut deltas = IndexMap::new();
        for c in &kb.criteria {
            if rng.random_bool(0.6) {
                deltas.insert(c.id.clone(), rng.random_range(-10..=10) as f64 / 10.0);
            }
        }
        kb.weight_rules.push(WeightRule {
            id: format!("W{i}"),
            guard: random_condition(rng, &ctx_props, 1),
            deltas,
        });
    }
    kb
}

/// Two-valued evaluation under a total assignment. Panics if a property is
/// missing.
pub fn eval_total(cond: &Condition, ctx: &Ctx) -> bool {
    let get = |p: &String| -> &String {
        ctx.get(p)
            .unwrap_or_else(|| panic!("property {p} unassigned"))
    };
    match cond {
        Condition::True => true,
        Condition::False => false,
        Condition::Eq { property, value } => get(property) == value,
        Condition::Ne { property, value } => get(property) != value,
        Condition::In { property, values } => values.contains(get(property)),
        Condition::Not { operand } => !eval_total(operand, ctx),
        Condition::And { operands } => operands.iter().all(|c| eval_total(c, ctx)),
        Condition::Or { operands } => operands.iter().any(|c| eval_total(c, ctx)),
    }
}

/// Kleene evaluation on the numeric encoding false = 0, unknown = 1,
/// true = 2 (NOT is 2 - x, AND is min, OR is max).
pub fn eval_kleene(cond: &Condition, ctx: &Ctx) -> Option<bool> {
    fn go(cond: &Condition, ctx: &Ctx) -> u8 {
        let test = |p: &String, f: &dyn Fn(&String) -> bool| match ctx.get(p) {
            None => 1,
            Some(v) => 2 * f(v) as u8,
        };
        match cond {
            Condition::True => 2,
            Condition::False => 0,
            Condition::Eq { property, value } => test(property, &|v| v == value),
            Condition::Ne { property, value } => test(property, &|v| v != value),
            Condition::In { property, values } => test(property, &|v| values.contains(v)),
            Condition::Not { operand } => 2 - go(operand, ctx),
            Condition::And { operands } => operands.iter().map(|c| go(c, ctx)).min().unwrap_or(2),
            Condition::Or { operands } => operands.iter().map(|c| go(c, ctx)).max().unwrap_or(0),
        }
    }
    match go(cond, ctx) {
        0 => Some(false),
        2 => Some(true),
        _ => None,
    }
}

pub fn to_ctx(assignment: &ContextAssignment) -> Ctx {
    assignment
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn to_assignment(ctx: &Ctx) -> ContextAssignment {
    ctx.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
}

/// Every total context over the KB's context properties.
pub fn all_total_contexts(kb: &KnowledgeBase) -> Vec<Ctx> {
    let mut out = vec![Ctx::new()];
    for p in kb
        .property_decls
        .iter()
        .filter(|p| p.kind == PropertyKind::Context)
    {
        out = out
            .into_iter()
            .flat_map(|c| {
                p.domain.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(p.id.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    out
}

/// Total contexts that satisfy every contextual constraint.
pub fn valid_total_contexts(kb: &KnowledgeBase) -> Vec<Ctx> {
    all_total_contexts(kb)
        .into_iter()
        .filter(|c| {
            kb.contextual_constraints
                .iter()
                .all(|k| eval_total(&k.expr, c))
        })
        .collect()
}

fn pattern_ctx(p: &PatternDefinition) -> Ctx {
    p.values
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Feasible pattern ids under a (possibly partial) context: a pattern is
/// excluded iff some filter's guard is definitely true and its requirement
/// does not hold on the pattern.
pub fn oracle_feasible(kb: &KnowledgeBase, ctx: &Ctx) -> Vec<String> {
    kb.patterns
        .iter()
        .filter(|p| {
            let pv = pattern_ctx(p);
            kb.filter_conditions.iter().all(|f| {
                eval_kleene(&f.guard, ctx) != Some(true) || eval_total(&f.requirement, &pv)
            })
        })
        .map(|p| p.id.clone())
        .collect()
}

/// Patterns infeasible under every valid total context.
pub fn oracle_dead_patterns(kb: &KnowledgeBase) -> Vec<String> {
    let contexts = valid_total_contexts(kb);
    kb.patterns
        .iter()
        .filter(|p| {
            !contexts
                .iter()
                .any(|c| oracle_feasible(kb, c).contains(&p.id))
        })
        .map(|p| p.id.clone())
        .collect()
}

/// Checks that `subset` empties the feasible set and that no proper subset
/// does.
pub fn oracle_is_minimal_conflict(kb: &KnowledgeBase, subset: &[(String, String)]) -> bool {
    let as_ctx = |mask: u32| -> Ctx {
        subset
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, (p, v))| (p.clone(), v.clone()))
            .collect()
    };
    let full = (1u32 << subset.len()) - 1;
    if !oracle_feasible(kb, &as_ctx(full)).is_empty() {
        return false;
    }
    (0..full).all(|mask| !oracle_feasible(kb, &as_ctx(mask)).is_empty())
}

/// Weighted-sum score of every pattern under a total context, computed from
/// the raw definitions: weights are base plus the deltas of rules whose guard
/// holds, clamped at zero and normalized.
pub fn oracle_scores(kb: &KnowledgeBase, ctx: &Ctx) -> Option<BTreeMap<String, f64>> {
    let mut w: Vec<f64> = kb
        .criteria
        .iter()
        .map(|c| kb.base_weights.get(&c.id).copied().unwrap_or(0.0))
        .collect();
    for r in &kb.weight_rules {
        if eval_total(&r.guard, ctx) {
            for (i, c) in kb.criteria.iter().enumerate() {
                w[i] += r.deltas.get(&c.id).copied().unwrap_or(0.0);
            }
        }
    }
    let w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    let mut out = BTreeMap::new();
    for p in &kb.patterns {
        let mut s = 0.0;
        for (i, c) in kb.criteria.iter().enumerate() {
            let decl = kb.property(&c.source_property).unwrap();
            let n = decl.domain.len() as f64;
            let r = decl
                .domain
                .iter()
                .position(|v| Some(v.as_str()) == p.value(&decl.id))
                .unwrap() as f64;
            let u = match c.polarity {
                Polarity::Direct => r / (n - 1.0),
                Polarity::Inverse => (n - 1.0 - r) / (n - 1.0),
            };
            s += w[i] / sum * u;
        }
        out.insert(p.id.clone(), s);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use patternwise_core::model::validate;

    #[test]
    fn generated_kbs_are_valid() {
        let mut r = rng(7);
        for _ in 0..300 {
            let kb = random_kb(&mut r, Limits::default());
            let report = validate(&kb);
            assert!(report.is_empty(), "{report:?}");
        }
    }

    #[test]
    fn kleene_agrees_with_total_evaluation_on_total_contexts() {
        let mut r = rng(8);
        for _ in 0..100 {
            let kb = random_kb(&mut r, Limits::default());
            for c in all_total_contexts(&kb) {
                for f in &kb.filter_conditions {
                    assert_eq!(eval_kleene(&f.guard, &c), Some(eval_total(&f.guard, &c)));
                }
            }
        }
    }

    #[test]
    fn enumerates_product_of_domains() {
        let mut r = rng(9);
        let kb = random_kb(&mut r, Limits::default());
        let expected: usize = kb
            .property_decls
            .iter()
            .filter(|p| p.kind == PropertyKind::Context)
            .map(|p| p.domain.len())
            .product();
        assert_eq!(all_total_contexts(&kb).len(), expected);
    }
}
