use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Condition, KbLevel, KnowledgeBase, PatternLevel, PropertyKind};

/// Where in a knowledge base a violation sits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "snake_case")]
pub enum Location {
    Kb,
    Property { id: String },
    Pattern { id: String },
    PatternValue { pattern: String, property: String },
    Constraint { id: String },
    Filter { id: String },
    Criterion { id: String },
    WeightRule { id: String },
    BaseWeights,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Kb => f.write_str("knowledge base"),
            Location::Property { id } => write!(f, "property `{id}`"),
            Location::Pattern { id } => write!(f, "pattern `{id}`"),
            Location::PatternValue { pattern, property } => {
                write!(f, "pattern `{pattern}`, property `{property}`")
            }
            Location::Constraint { id } => write!(f, "constraint `{id}`"),
            Location::Filter { id } => write!(f, "filter `{id}`"),
            Location::Criterion { id } => write!(f, "criterion `{id}`"),
            Location::WeightRule { id } => write!(f, "weight rule `{id}`"),
            Location::BaseWeights => f.write_str("base weights"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: Location, message: impl Into<String>) {
        self.violations.push(Violation {
            location,
            message: message.into(),
        });
    }
}

const RESERVED: &[&str] = &["and", "or", "not", "in", "true", "false"];

/// Identifiers start with an ASCII letter and continue with letters, digits,
/// `-` or `_`. Connective keywords are reserved.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        && !RESERVED.contains(&s.to_ascii_lowercase().as_str())
}

/// Checks every structural invariant of a knowledge base. Never fails; an
/// empty report means the KB is well-formed.
pub fn validate(kb: &KnowledgeBase) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !is_identifier(&kb.id) {
        report.push(
            Location::Kb,
            format!("`{}` is not a valid identifier", kb.id),
        );
    }

    check_unique(
        kb.property_decls.iter().map(|p| p.id.as_str()),
        |id| Location::Property { id: id.into() },
        "duplicate property id",
        &mut report,
    );
    check_unique(
        kb.patterns.iter().map(|p| p.id.as_str()),
        |id| Location::Pattern { id: id.into() },
        "duplicate pattern id",
        &mut report,
    );
    check_unique(
        kb.contextual_constraints.iter().map(|c| c.id.as_str()),
        |id| Location::Constraint { id: id.into() },
        "duplicate constraint id",
        &mut report,
    );
    check_unique(
        kb.filter_conditions.iter().map(|c| c.id.as_str()),
        |id| Location::Filter { id: id.into() },
        "duplicate filter id",
        &mut report,
    );
    check_unique(
        kb.criteria.iter().map(|c| c.id.as_str()),
        |id| Location::Criterion { id: id.into() },
        "duplicate criterion id",
        &mut report,
    );
    check_unique(
        kb.weight_rules.iter().map(|c| c.id.as_str()),
        |id| Location::WeightRule { id: id.into() },
        "duplicate weight rule id",
        &mut report,
    );

    for prop in &kb.property_decls {
        let loc = || Location::Property {
            id: prop.id.clone(),
        };
        if !is_identifier(&prop.id) {
            report.push(loc(), format!("`{}` is not a valid identifier", prop.id));
        }
        let distinct: HashSet<&str> = prop.domain.iter().map(String::as_str).collect();
        if distinct.len() != prop.domain.len() {
            report.push(loc(), "domain values must be unique");
        }
        if distinct.len() < 2 {
            report.push(loc(), "domain needs at least two distinct values");
        }
        for v in &prop.domain {
            if !is_identifier(v) {
                report.push(
                    loc(),
                    format!("domain value `{v}` is not a valid identifier"),
                );
            }
        }
        if prop.kind == PropertyKind::Pattern && prop.question_text.is_some() {
            report.push(loc(), "pattern properties cannot carry question text");
        }
    }

    let expected_level = kb.level.pattern_level();
    for pattern in &kb.patterns {
        let loc = || Location::Pattern {
            id: pattern.id.clone(),
        };
        if !is_identifier(&pattern.id) {
            report.push(loc(), format!("`{}` is not a valid identifier", pattern.id));
        }
        if pattern.level != expected_level {
            report.push(
                loc(),
                format!(
                    "{:?} pattern in a {:?}-level knowledge base",
                    pattern.level, kb.level
                ),
            );
        }
        if pattern.child_kb.is_some()
            && (pattern.level != PatternLevel::SecurityPattern || kb.level != KbLevel::Control)
        {
            report.push(
                loc(),
                "only security patterns may reference a child knowledge base",
            );
        }
        for prop in kb.pattern_properties() {
            match pattern.values.get(&prop.id) {
                None => report.push(
                    Location::PatternValue {
                        pattern: pattern.id.clone(),
                        property: prop.id.clone(),
                    },
                    format!("missing value for pattern property `{}`", prop.id),
                ),
                Some(v) if !prop.admits(v) => report.push(
                    Location::PatternValue {
                        pattern: pattern.id.clone(),
                        property: prop.id.clone(),
                    },
                    format!(
                        "value `{v}` is not in the domain of `{}` ({})",
                        prop.id,
                        prop.domain.join(", ")
                    ),
                ),
                Some(_) => {}
            }
        }
        for key in pattern.values.keys() {
            match kb.property(key) {
                Some(p) if p.kind == PropertyKind::Pattern => {}
                Some(_) => report.push(
                    Location::PatternValue {
                        pattern: pattern.id.clone(),
                        property: key.clone(),
                    },
                    format!("`{key}` is a context property"),
                ),
                None => report.push(
                    Location::PatternValue {
                        pattern: pattern.id.clone(),
                        property: key.clone(),
                    },
                    format!("unknown property `{key}`"),
                ),
            }
        }
    }

    for c in &kb.contextual_constraints {
        check_condition(
            kb,
            &c.expr,
            PropertyKind::Context,
            Location::Constraint { id: c.id.clone() },
            "constraint",
            &mut report,
        );
    }

    for f in &kb.filter_conditions {
        let loc = Location::Filter { id: f.id.clone() };
        check_condition(
            kb,
            &f.guard,
            PropertyKind::Context,
            loc.clone(),
            "guard",
            &mut report,
        );
        check_condition(
            kb,
            &f.requirement,
            PropertyKind::Pattern,
            loc,
            "requirement",
            &mut report,
        );
    }

    for c in &kb.criteria {
        let loc = || Location::Criterion { id: c.id.clone() };
        if !is_identifier(&c.id) {
            report.push(loc(), format!("`{}` is not a valid identifier", c.id));
        }
        match kb.property(&c.source_property) {
            Some(p) if p.kind == PropertyKind::Pattern => {}
            Some(_) => report.push(
                loc(),
                format!("source `{}` is a context property", c.source_property),
            ),
            None => report.push(
                loc(),
                format!("unknown source property `{}`", c.source_property),
            ),
        }
    }

    for rule in &kb.weight_rules {
        let loc = Location::WeightRule {
            id: rule.id.clone(),
        };
        check_condition(
            kb,
            &rule.guard,
            PropertyKind::Context,
            loc.clone(),
            "guard",
            &mut report,
        );
        for (crit, delta) in &rule.deltas {
            if kb.criterion(crit).is_none() {
                report.push(loc.clone(), format!("unknown criterion `{crit}`"));
            }
            if !delta.is_finite() {
                report.push(loc.clone(), format!("delta for `{crit}` is not finite"));
            }
        }
    }

    for c in &kb.criteria {
        match kb.base_weights.get(&c.id) {
            None => report.push(
                Location::BaseWeights,
                format!("no base weight for criterion `{}`", c.id),
            ),
            Some(w) if !w.is_finite() || *w < 0.0 => report.push(
                Location::BaseWeights,
                format!("base weight for `{}` must be a non-negative number", c.id),
            ),
            Some(_) => {}
        }
    }
    for key in kb.base_weights.keys() {
        if kb.criterion(key).is_none() {
            report.push(Location::BaseWeights, format!("unknown criterion `{key}`"));
        }
    }

    report
}

fn check_unique<'a>(
    ids: impl Iterator<Item = &'a str>,
    loc: impl Fn(&str) -> Location,
    message: &str,
    report: &mut ValidationReport,
) {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            report.push(loc(id), format!("{message} `{id}`"));
        }
    }
}

fn check_condition(
    kb: &KnowledgeBase,
    cond: &Condition,
    allowed: PropertyKind,
    loc: Location,
    what: &str,
    report: &mut ValidationReport,
) {
    let mut problems = Vec::new();
    cond.for_each_test(&mut |property, value| match kb.property(property) {
        None => problems.push(format!("{what} references unknown property `{property}`")),
        Some(p) if p.kind != allowed => problems.push(format!(
            "{what} references {} property `{property}`; only {} properties are allowed here",
            kind_name(p.kind),
            kind_name(allowed)
        )),
        Some(p) if !p.admits(value) => problems.push(format!(
            "{what} tests `{property}` against `{value}`, which is not in its domain ({})",
            p.domain.join(", ")
        )),
        Some(_) => {}
    });
    check_shape(cond, what, &mut problems);
    problems.dedup();
    for p in problems {
        report.push(loc.clone(), p);
    }
}

fn check_shape(cond: &Condition, what: &str, problems: &mut Vec<String>) {
    match cond {
        Condition::In { property, values } if values.is_empty() => {
            problems.push(format!("{what} has an empty value set for `{property}`"))
        }
        Condition::And { operands } | Condition::Or { operands } => {
            if operands.len() < 2 {
                problems.push(format!(
                    "{what} has a connective with fewer than two operands"
                ));
            }
            for op in operands {
                check_shape(op, what, problems);
            }
        }
        Condition::Not { operand } => check_shape(operand, what, problems),
        _ => {}
    }
}

fn kind_name(kind: PropertyKind) -> &'static str {
    match kind {
        PropertyKind::Context => "context",
        PropertyKind::Pattern => "pattern",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use indexmap::IndexMap;

    fn small_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new("demo", KbLevel::Control);
        kb.property_decls.push(PropertyDecl {
            id: "budget".into(),
            kind: PropertyKind::Context,
            domain: vec!["low".into(), "high".into()],
            question_text: Some("Budget?".into()),
            description: String::new(),
        });
        kb.property_decls.push(PropertyDecl {
            id: "costs".into(),
            kind: PropertyKind::Pattern,
            domain: vec!["low".into(), "medium".into(), "high".into()],
            question_text: None,
            description: String::new(),
        });
        let mut values = IndexMap::new();
        values.insert("costs".to_string(), "low".to_string());
        kb.patterns.push(PatternDefinition {
            id: "cheap".into(),
            level: PatternLevel::SecurityPattern,
            values,
            description: String::new(),
            child_kb: None,
        });
        kb
    }

    #[test]
    fn small_kb_is_valid() {
        assert!(validate(&small_kb()).is_empty());
    }

    #[test]
    fn missing_pattern_value_is_reported_once() {
        let mut kb = small_kb();
        kb.patterns[0].values.clear();
        let report = validate(&kb);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].location,
            Location::PatternValue {
                pattern: "cheap".into(),
                property: "costs".into()
            }
        );
    }

    #[test]
    fn guard_on_pattern_property_is_a_kind_mismatch() {
        let mut kb = small_kb();
        kb.filter_conditions.push(FilterCondition {
            id: "F1".into(),
            guard: Condition::eq("costs", "low"),
            requirement: Condition::True,
            message: String::new(),
        });
        let report = validate(&kb);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].location,
            Location::Filter { id: "F1".into() }
        );
    }

    #[test]
    fn singleton_domain_and_question_on_pattern_property() {
        let mut kb = small_kb();
        kb.property_decls[1].question_text = Some("?".into());
        kb.property_decls[0].domain = vec!["only".into()];
        let report = validate(&kb);
        assert_eq!(report.violations.len(), 2, "{report:?}");
    }

    #[test]
    fn child_reference_only_on_sp_level() {
        let mut kb = small_kb();
        kb.level = KbLevel::Pattern;
        kb.patterns[0].level = PatternLevel::SecurityDesignPattern;
        kb.patterns[0].child_kb = Some("x.kb".into());
        let report = validate(&kb);
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("AuthN-strength"));
        assert!(is_identifier("no_users2"));
        assert!(!is_identifier("2fa"));
        assert!(!is_identifier("AND"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("a b"));
    }
}
