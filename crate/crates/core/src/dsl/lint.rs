//! Static checks over a valid knowledge base.
//!
//! Dead patterns and guard satisfiability need every total context that
//! satisfies the contextual constraints, so those checks are skipped (with a
//! warning) when the context space exceeds [`MAX_LINT_CONTEXTS`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ContextAssignment, KnowledgeBase, PropertyKind};
use crate::solver;

/// Upper bound on the number of total contexts the linter enumerates.
pub const MAX_LINT_CONTEXTS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintKind {
    /// Infeasible under every valid total context.
    DeadPattern,
    /// Guard never holds, or every pattern meets the requirement.
    VacuousFilter,
    UnreferencedProperty,
    /// No total context satisfies the contextual constraints.
    NoValidContext,
    EnumerationSkipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintWarning {
    pub kind: LintKind,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for LintWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            LintKind::DeadPattern => "dead-pattern",
            LintKind::VacuousFilter => "vacuous-filter",
            LintKind::UnreferencedProperty => "unreferenced-property",
            LintKind::NoValidContext => "no-valid-context",
            LintKind::EnumerationSkipped => "enumeration-skipped",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

fn warning(kind: LintKind, subject: &str, message: String) -> LintWarning {
    LintWarning {
        kind,
        subject: subject.to_string(),
        message,
    }
}

/// Number of total contexts, saturating at `u128::MAX`.
fn context_space(kb: &KnowledgeBase) -> u128 {
    kb.context_properties()
        .map(|p| p.domain.len() as u128)
        .fold(1u128, |acc, n| acc.saturating_mul(n))
}

/// Calls `f` for every total context in odometer order (last property
/// varies fastest).
fn for_each_total_context(kb: &KnowledgeBase, mut f: impl FnMut(&ContextAssignment)) {
    let props: Vec<_> = kb.context_properties().collect();
    let mut idx = vec![0usize; props.len()];
    loop {
        let ctx: ContextAssignment = props
            .iter()
            .zip(&idx)
            .map(|(p, &i)| (p.id.clone(), p.domain[i].clone()))
            .collect();
        f(&ctx);
        let mut pos = props.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < props[pos].domain.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

pub fn lint_kb(kb: &KnowledgeBase) -> Vec<LintWarning> {
    let mut out = Vec::new();

    let space = context_space(kb);
    if space > MAX_LINT_CONTEXTS {
        out.push(warning(
            LintKind::EnumerationSkipped,
            &kb.id,
            format!(
                "{space} total contexts exceed the limit of {MAX_LINT_CONTEXTS}; dead-pattern and guard checks skipped"
            ),
        ));
    } else {
        let mut live: BTreeSet<&str> = BTreeSet::new();
        let mut guard_fires: BTreeSet<&str> = BTreeSet::new();
        let mut valid = 0usize;
        for_each_total_context(kb, |ctx| {
            if !solver::violated_constraints(kb, ctx).is_empty() {
                return;
            }
            valid += 1;
            let lookup = ctx.lookup();
            for f in &kb.filter_conditions {
                if f.guard.eval(&lookup) == Some(true) {
                    guard_fires.insert(f.id.as_str());
                }
            }
            for id in solver::filter_patterns(kb, ctx).feasible {
                if let Some(p) = kb.pattern(&id) {
                    live.insert(p.id.as_str());
                }
            }
        });
        if valid == 0 {
            out.push(warning(
                LintKind::NoValidContext,
                &kb.id,
                "no total context satisfies the contextual constraints".to_string(),
            ));
        }
        for p in &kb.patterns {
            if !live.contains(p.id.as_str()) {
                out.push(warning(
                    LintKind::DeadPattern,
                    &p.id,
                    format!("pattern `{}` is infeasible in every valid context", p.id),
                ));
            }
        }
        for f in &kb.filter_conditions {
            if !guard_fires.contains(f.id.as_str()) {
                out.push(warning(
                    LintKind::VacuousFilter,
                    &f.id,
                    format!(
                        "filter `{}` never applies: its guard holds in no valid context",
                        f.id
                    ),
                ));
            }
        }
    }

    for f in &kb.filter_conditions {
        let all_pass = kb.patterns.iter().all(|p| {
            let lookup = |prop: &str| p.value(prop);
            f.requirement.eval(&lookup) == Some(true)
        });
        if all_pass {
            out.push(warning(
                LintKind::VacuousFilter,
                &f.id,
                format!(
                    "filter `{}` excludes nothing: every pattern meets its requirement",
                    f.id
                ),
            ));
        }
    }

    let mut used_context: BTreeSet<&str> = BTreeSet::new();
    let mut used_pattern: BTreeSet<&str> = BTreeSet::new();
    for c in &kb.contextual_constraints {
        used_context.extend(c.expr.properties());
    }
    for f in &kb.filter_conditions {
        used_context.extend(f.guard.properties());
        used_pattern.extend(f.requirement.properties());
    }
    for r in &kb.weight_rules {
        used_context.extend(r.guard.properties());
    }
    for c in &kb.criteria {
        used_pattern.insert(c.source_property.as_str());
    }
    for p in &kb.property_decls {
        let used = match p.kind {
            PropertyKind::Context => used_context.contains(p.id.as_str()),
            PropertyKind::Pattern => used_pattern.contains(p.id.as_str()),
        };
        if !used {
            let role = match p.kind {
                PropertyKind::Context => "no constraint, filter guard, or weight rule",
                PropertyKind::Pattern => "no filter requirement or criterion",
            };
            out.push(warning(
                LintKind::UnreferencedProperty,
                &p.id,
                format!("property `{}` is referenced by {role}", p.id),
            ));
        }
    }
    out
}
