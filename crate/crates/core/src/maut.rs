//! Additive multi-attribute utility ranking.
//!
//! Criterion weights start from the knowledge base's base weights; every
//! weight rule whose guard holds adds its deltas. The result is clamped at
//! zero and normalized to sum to one. A pattern's utility on a criterion is
//! the linear position of its value in the source property's ordinal domain,
//! reversed for inverse criteria. The score is the weighted sum.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{ContextAssignment, Criterion, KnowledgeBase, PatternDefinition, Polarity};
use crate::solver::{self, FeasibilityResult, FilterNote};
use crate::{Error, Result};

/// Scores that agree to this many decimal places rank as ties.
const RANK_RESOLUTION: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: IndexMap<String, f64>,
    /// Ids of the weight rules whose guard held.
    pub fired_rules: Vec<String>,
}

impl WeightVector {
    pub fn get(&self, criterion: &str) -> f64 {
        self.weights.get(criterion).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub weight: f64,
    pub utility: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPattern {
    pub pattern_id: String,
    pub score: f64,
    pub contributions: IndexMap<String, Contribution>,
}

pub fn resolve_weights(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<WeightVector> {
    let lookup = ctx.lookup();
    let mut raw: IndexMap<String, f64> = kb
        .criteria
        .iter()
        .map(|c| {
            (
                c.id.clone(),
                kb.base_weights.get(&c.id).copied().unwrap_or(0.0),
            )
        })
        .collect();
    let mut fired_rules = Vec::new();
    for rule in &kb.weight_rules {
        match rule.guard.eval(&lookup) {
            Some(true) => {
                for (criterion, delta) in &rule.deltas {
                    if let Some(w) = raw.get_mut(criterion) {
                        *w += delta;
                    }
                }
                fired_rules.push(rule.id.clone());
            }
            Some(false) => {}
            None => return Err(Error::UndecidedWeightGuard(rule.id.clone())),
        }
    }
    for w in raw.values_mut() {
        *w = w.max(0.0);
    }
    let total: f64 = raw.values().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    for w in raw.values_mut() {
        *w /= total;
    }
    Ok(WeightVector {
        weights: raw,
        fired_rules,
    })
}

/// Linear ordinal utility in `[0, 1]`.
pub fn utility(
    kb: &KnowledgeBase,
    pattern: &PatternDefinition,
    criterion: &Criterion,
) -> Result<f64> {
    let decl = kb
        .property(&criterion.source_property)
        .ok_or_else(|| Error::UnknownProperty {
            kb: kb.id.clone(),
            property: criterion.source_property.clone(),
        })?;
    let value = pattern
        .value(&criterion.source_property)
        .ok_or_else(|| Error::UnknownPattern(pattern.id.clone()))?;
    let rank = decl.rank_of(value).ok_or_else(|| Error::ValueOutOfDomain {
        property: decl.id.clone(),
        value: value.to_string(),
        domain: decl.domain.clone(),
    })?;
    let top = (decl.domain.len() - 1) as f64;
    let r = rank as f64;
    Ok(match criterion.polarity {
        Polarity::Direct => r / top,
        Polarity::Inverse => (top - r) / top,
    })
}

/// Scores a pattern under an already resolved weight vector.
pub fn score_with(
    kb: &KnowledgeBase,
    pattern: &PatternDefinition,
    weights: &WeightVector,
) -> Result<ScoredPattern> {
    let mut contributions = IndexMap::new();
    let mut score = 0.0;
    for criterion in &kb.criteria {
        let weight = weights.get(&criterion.id);
        let utility = utility(kb, pattern, criterion)?;
        let product = weight * utility;
        score += product;
        contributions.insert(
            criterion.id.clone(),
            Contribution {
                weight,
                utility,
                product,
            },
        );
    }
    // Summing normalized weights can overshoot 1 by an ulp.
    Ok(ScoredPattern {
        pattern_id: pattern.id.clone(),
        score: score.clamp(0.0, 1.0),
        contributions,
    })
}

pub fn score(
    kb: &KnowledgeBase,
    pattern_id: &str,
    ctx: &ContextAssignment,
) -> Result<ScoredPattern> {
    let pattern = kb
        .pattern(pattern_id)
        .ok_or_else(|| Error::UnknownPattern(pattern_id.to_string()))?;
    let feasibility = solver::feasible_patterns(kb, ctx)?;
    if !feasibility.is_feasible(pattern_id) {
        return Err(Error::PatternInfeasible(pattern_id.to_string()));
    }
    let weights = resolve_weights(kb, ctx)?;
    score_with(kb, pattern, &weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub weights: WeightVector,
    pub ranked: Vec<ScoredPattern>,
    pub feasibility: FeasibilityResult,
}

fn rank_key(score: f64) -> i64 {
    (score * RANK_RESOLUTION).round() as i64
}

/// Ranks the feasible patterns by descending score; ties keep declaration
/// order. `ctx` must assign every context property.
pub fn rank(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<Ranking> {
    let feasibility = solver::feasible_patterns(kb, ctx)?;
    let missing: Vec<String> = kb
        .context_properties()
        .filter(|p| !ctx.contains(&p.id))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteContext(missing));
    }
    if feasibility.feasible.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let weights = resolve_weights(kb, ctx)?;
    let mut ranked = feasibility
        .feasible
        .iter()
        .map(|id| {
            let pattern = kb.pattern(id).expect("feasible ids come from the kb");
            score_with(kb, pattern, &weights)
        })
        .collect::<Result<Vec<_>>>()?;
    // Stable sort keeps declaration order among ties.
    ranked.sort_by_key(|s| std::cmp::Reverse(rank_key(s.score)));
    Ok(Ranking {
        weights,
        ranked,
        feasibility,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub id: String,
    pub deltas: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedPattern {
    pub rank: usize,
    #[serde(flatten)]
    pub scored: ScoredPattern,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPattern {
    pub pattern_id: String,
    pub violated: Vec<FilterNote>,
}

/// The recommendation payload: ranking, the reasoning behind the weights,
/// and the filter audit of every excluded pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub kb: String,
    pub context: ContextAssignment,
    pub weights: IndexMap<String, f64>,
    pub fired_rules: Vec<FiredRule>,
    pub recommendations: Vec<RecommendedPattern>,
    pub excluded: Vec<ExcludedPattern>,
}

pub fn explain(kb: &KnowledgeBase, ctx: &ContextAssignment, ranking: &Ranking) -> Explanation {
    let fired_rules = ranking
        .weights
        .fired_rules
        .iter()
        .filter_map(|id| kb.weight_rules.iter().find(|r| &r.id == id))
        .map(|r| FiredRule {
            id: r.id.clone(),
            deltas: r.deltas.clone(),
        })
        .collect();
    let recommendations = ranking
        .ranked
        .iter()
        .enumerate()
        .map(|(i, s)| RecommendedPattern {
            rank: i + 1,
            scored: s.clone(),
            description: kb
                .pattern(&s.pattern_id)
                .map(|p| p.description.clone())
                .unwrap_or_default(),
        })
        .collect();
    let excluded = ranking
        .feasibility
        .exclusions
        .iter()
        .map(|(pattern, filters)| ExcludedPattern {
            pattern_id: pattern.clone(),
            violated: filters
                .iter()
                .map(|f| FilterNote {
                    filter: f.clone(),
                    message: kb.filter(f).map(|x| x.message.clone()).unwrap_or_default(),
                })
                .collect(),
        })
        .collect();
    Explanation {
        kb: kb.id.clone(),
        context: ctx.clone(),
        weights: ranking.weights.weights.clone(),
        fired_rules,
        recommendations,
        excluded,
    }
}

/// Convenience: rank and explain in one step.
pub fn recommend(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<Explanation> {
    let ranking = rank(kb, ctx)?;
    Ok(explain(kb, ctx, &ranking))
}

impl Explanation {
    pub fn top(&self) -> Option<&str> {
        self.recommendations
            .first()
            .map(|r| r.scored.pattern_id.as_str())
    }

    pub fn ranked_ids(&self) -> Vec<&str> {
        self.recommendations
            .iter()
            .map(|r| r.scored.pattern_id.as_str())
            .collect()
    }

    /// Human-readable rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let weights: Vec<String> = self
            .weights
            .iter()
            .map(|(c, w)| format!("{c} {w:.4}"))
            .collect();
        let _ = writeln!(out, "Weights: {}", weights.join(", "));
        if self.fired_rules.is_empty() {
            let _ = writeln!(out, "  (base weights, no weight rule applied)");
        }
        for rule in &self.fired_rules {
            let deltas: Vec<String> = rule
                .deltas
                .iter()
                .map(|(c, d)| format!("{c} {d:+}"))
                .collect();
            let _ = writeln!(out, "  rule {} applied: {}", rule.id, deltas.join(", "));
        }
        let _ = writeln!(out);
        for r in &self.recommendations {
            let _ = writeln!(
                out,
                "{}. {} (score {:.4})",
                r.rank, r.scored.pattern_id, r.scored.score
            );
            for (c, contrib) in &r.scored.contributions {
                let _ = writeln!(
                    out,
                    "     {c}: weight {:.4} x utility {:.4} = {:.4}",
                    contrib.weight, contrib.utility, contrib.product
                );
            }
            if !r.description.is_empty() {
                let _ = writeln!(out, "     {}", r.description);
            }
        }
        for e in &self.excluded {
            for note in &e.violated {
                let _ = writeln!(
                    out,
                    "excluded {} by {}: {}",
                    e.pattern_id, note.filter, note.message
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kb;

    fn two_criteria(rules: &str) -> KnowledgeBase {
        parse_kb(&format!(
            r#"
control t
property budget context
  values low, high
property usab pattern
  values low, medium, high
property costs pattern
  values low, medium, high
pattern a
  usab = high
  costs = high
pattern b
  usab = low
  costs = low
criterion usability
  from usab direct
criterion costs
  from costs inverse
weights
  usability = 1
  costs = 1
{rules}
"#
        ))
        .unwrap()
    }

    fn ctx(budget: &str) -> ContextAssignment {
        [("budget", budget)].into_iter().collect()
    }

    #[test]
    fn base_weights_are_normalized() {
        let kb = two_criteria("");
        let w = resolve_weights(&kb, &ctx("low")).unwrap();
        assert_eq!(w.get("usability"), 0.5);
        assert_eq!(w.get("costs"), 0.5);
        assert!(w.fired_rules.is_empty());
    }

    #[test]
    fn all_zero_weights_are_degenerate() {
        let kb = two_criteria("weights W\n  when budget = low\n  usability = -1\n  costs = -2\n");
        assert!(matches!(
            resolve_weights(&kb, &ctx("low")),
            Err(Error::DegenerateWeights)
        ));
        assert!(resolve_weights(&kb, &ctx("high")).is_ok());
    }

    #[test]
    fn undecided_weight_guard_is_an_error() {
        let kb = two_criteria("weights W\n  when budget = low\n  costs = 1\n");
        assert!(matches!(
            resolve_weights(&kb, &ContextAssignment::new()),
            Err(Error::UndecidedWeightGuard(id)) if id == "W"
        ));
    }

    #[test]
    fn utility_follows_rank() {
        let kb = two_criteria("");
        let a = kb.pattern("a").unwrap();
        let b = kb.pattern("b").unwrap();
        let usability = kb.criterion("usability").unwrap();
        let costs = kb.criterion("costs").unwrap();
        assert_eq!(utility(&kb, a, usability).unwrap(), 1.0);
        assert_eq!(utility(&kb, a, costs).unwrap(), 0.0);
        assert_eq!(utility(&kb, b, usability).unwrap(), 0.0);
        assert_eq!(utility(&kb, b, costs).unwrap(), 1.0);
    }

    #[test]
    fn score_is_weighted_sum() {
        let kb = two_criteria("");
        let s = score(&kb, "a", &ctx("high")).unwrap();
        assert_eq!(s.score, 0.5);
        assert_eq!(s.contributions["usability"].product, 0.5);
        assert_eq!(s.contributions["costs"].product, 0.0);

        let kb = two_criteria("weights W\n  when budget = low\n  usability = -1\n");
        let s = score(&kb, "b", &ctx("low")).unwrap();
        assert_eq!(s.score, s.contributions["costs"].utility);
    }

    #[test]
    fn ties_keep_declaration_order() {
        let kb = two_criteria("");
        let r = rank(&kb, &ctx("high")).unwrap();
        let ids: Vec<_> = r.ranked.iter().map(|s| s.pattern_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);

        let kb = two_criteria("weights W\n  when budget = low\n  costs = 0.5\n");
        let r = rank(&kb, &ctx("low")).unwrap();
        assert_eq!(r.ranked[0].pattern_id, "b");
    }

    #[test]
    fn rank_requires_total_context() {
        let kb = two_criteria("");
        assert!(matches!(
            rank(&kb, &ContextAssignment::new()),
            Err(Error::IncompleteContext(_))
        ));
    }

    #[test]
    fn single_pattern_explanation() {
        let kb = parse_kb(
            "control t\nproperty q context\n  values a, b\nproperty u pattern\n  values lo, hi\npattern only\n  u = hi\n  description \"The only one\"\ncriterion usability\n  from u direct\nweights\n  usability = 2\n",
        )
        .unwrap();
        let e = recommend(&kb, &[("q", "a")].into_iter().collect()).unwrap();
        assert_eq!(e.recommendations.len(), 1);
        assert!(e.excluded.is_empty());
        assert_eq!(e.recommendations[0].description, "The only one");
        assert_eq!(e.weights["usability"], 1.0);
        assert!(e.render().contains("1. only (score 1.0000)"));
    }
}
