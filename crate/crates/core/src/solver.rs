//! Feasibility filtering and conflict diagnosis.
//!
//! Patterns are an enumerated list, so the constraint problem reduces to
//! evaluating every filter condition against every declared pattern. Guards
//! are evaluated under three-valued logic: a guard that depends on an
//! unanswered property is undecided and excludes nothing.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{ContextAssignment, FilterCondition, KnowledgeBase, PatternDefinition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    /// Feasible pattern ids in declaration order.
    pub feasible: Vec<String>,
    /// Excluded pattern id → ids of the filter conditions it violates.
    pub exclusions: IndexMap<String, Vec<String>>,
}

impl FeasibilityResult {
    pub fn is_feasible(&self, pattern: &str) -> bool {
        self.feasible.iter().any(|p| p == pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPair {
    pub property: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterNote {
    pub filter: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictDiagnosis {
    /// Minimal subset of the current answers that leaves no pattern feasible.
    pub conflict: Vec<ContextPair>,
    /// Filters that exclude at least one pattern under the conflict subset.
    pub messages: Vec<FilterNote>,
    /// Filters whose guard holds before any question is answered and that
    /// exclude at least one pattern. Only populated when `conflict` is empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unconditional: Vec<String>,
}

/// Ids of contextual constraints that are decidably false under `ctx`.
pub fn check_context(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<Vec<String>> {
    kb.check_assignment(ctx)?;
    Ok(violated_constraints(kb, ctx))
}

pub(crate) fn violated_constraints(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Vec<String> {
    let lookup = ctx.lookup();
    kb.contextual_constraints
        .iter()
        .filter(|c| c.expr.eval(&lookup) == Some(false))
        .map(|c| c.id.clone())
        .collect()
}

/// Computes the feasible pattern set with a per-pattern audit of violated
/// filter conditions.
pub fn feasible_patterns(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<FeasibilityResult> {
    let violated = check_context(kb, ctx)?;
    if !violated.is_empty() {
        return Err(Error::ContextViolation(violated));
    }
    Ok(filter_patterns(kb, ctx))
}

fn violates(filter: &FilterCondition, pattern: &PatternDefinition) -> bool {
    let lookup = |p: &str| pattern.value(p);
    filter.requirement.eval(&lookup) != Some(true)
}

/// Filtering without the contextual-constraint precondition. `ctx` must
/// already be known to be in-domain.
pub(crate) fn filter_patterns(kb: &KnowledgeBase, ctx: &ContextAssignment) -> FeasibilityResult {
    let lookup = ctx.lookup();
    let active: Vec<&FilterCondition> = kb
        .filter_conditions
        .iter()
        .filter(|f| f.guard.eval(&lookup) == Some(true))
        .collect();

    let mut feasible = Vec::new();
    let mut exclusions = IndexMap::new();
    for pattern in &kb.patterns {
        let violated: Vec<String> = active
            .iter()
            .filter(|f| violates(f, pattern))
            .map(|f| f.id.clone())
            .collect();
        if violated.is_empty() {
            feasible.push(pattern.id.clone());
        } else {
            exclusions.insert(pattern.id.clone(), violated);
        }
    }
    FeasibilityResult {
        feasible,
        exclusions,
    }
}

pub(crate) fn feasible_count(kb: &KnowledgeBase, ctx: &ContextAssignment) -> usize {
    let lookup = ctx.lookup();
    let active: Vec<&FilterCondition> = kb
        .filter_conditions
        .iter()
        .filter(|f| f.guard.eval(&lookup) == Some(true))
        .collect();
    kb.patterns
        .iter()
        .filter(|p| !active.iter().any(|f| violates(f, p)))
        .count()
}

/// Finds a minimal subset of the answers in `ctx` that empties the feasible
/// set.
///
/// Answers are visited from the most recent to the oldest; an answer is
/// dropped if the feasible set stays empty without it. Feasibility is
/// monotone in the context, so every answer that survives is necessary.
pub fn diagnose_conflict(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Result<ConflictDiagnosis> {
    kb.check_assignment(ctx)?;
    let n = feasible_count(kb, ctx);
    if n > 0 {
        return Err(Error::NotConflicted(n));
    }

    let mut kept: Vec<(String, String)> = ctx
        .iter()
        .map(|(p, v)| (p.to_string(), v.to_string()))
        .collect();
    for idx in (0..kept.len()).rev() {
        let trial: ContextAssignment = kept
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, (p, v))| (p.clone(), v.clone()))
            .collect();
        if feasible_count(kb, &trial) == 0 {
            kept.remove(idx);
        }
    }

    let minimal: ContextAssignment = kept.iter().cloned().collect();
    let lookup = minimal.lookup();
    let messages: Vec<FilterNote> = kb
        .filter_conditions
        .iter()
        .filter(|f| f.guard.eval(&lookup) == Some(true))
        .filter(|f| kb.patterns.iter().any(|p| violates(f, p)))
        .map(|f| FilterNote {
            filter: f.id.clone(),
            message: f.message.clone(),
        })
        .collect();
    let unconditional = if kept.is_empty() {
        messages.iter().map(|m| m.filter.clone()).collect()
    } else {
        Vec::new()
    };

    Ok(ConflictDiagnosis {
        conflict: kept
            .into_iter()
            .map(|(property, value)| ContextPair { property, value })
            .collect(),
        messages,
        unconditional,
    })
}
