//! Domain types shared by every other module: property declarations,
//! patterns, rules, criteria and context assignments.

mod condition;
mod validate;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use condition::Condition;
pub use validate::{is_identifier, validate, Location, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Context,
    Pattern,
}

/// A finite ordinal variable. The position of a value in `domain` is its rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDecl {
    pub id: String,
    pub kind: PropertyKind,
    pub domain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_text: Option<String>,
    #[serde(default)]
    pub description: String,
}

impl PropertyDecl {
    pub fn rank_of(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }

    pub fn admits(&self, value: &str) -> bool {
        self.rank_of(value).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternLevel {
    #[serde(rename = "SP")]
    SecurityPattern,
    #[serde(rename = "SDP")]
    SecurityDesignPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDefinition {
    pub id: String,
    pub level: PatternLevel,
    pub values: IndexMap<String, String>,
    #[serde(default)]
    pub description: String,
    /// File reference to the pattern-level KB refining this pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_kb: Option<String>,
}

impl PatternDefinition {
    pub fn value(&self, property: &str) -> Option<&str> {
        self.values.get(property).map(String::as_str)
    }
}

/// The realization context: a partial assignment of context properties.
///
/// Insertion order is kept (it is the order answers were given) but does not
/// take part in equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextAssignment {
    values: IndexMap<String, String>,
}

impl ContextAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, property: &str) -> Option<&str> {
        self.values.get(property).map(String::as_str)
    }

    pub fn contains(&self, property: &str) -> bool {
        self.values.contains_key(property)
    }

    /// Assigns a value, keeping the original position if the property was
    /// already assigned.
    pub fn set(&mut self, property: impl Into<String>, value: impl Into<String>) {
        self.values.insert(property.into(), value.into());
    }

    pub fn remove(&mut self, property: &str) -> Option<String> {
        self.values.shift_remove(property)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pairs in assignment order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&str, &str)> + ExactSizeIterator {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn lookup<'a>(&'a self) -> impl Fn(&str) -> Option<&'a str> + 'a {
        move |p| self.get(p)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for ContextAssignment {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        let mut ctx = ContextAssignment::new();
        for (k, v) in iter {
            ctx.set(k, v);
        }
        ctx
    }
}

/// Restricts valid combinations of context values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualConstraint {
    pub id: String,
    pub expr: Condition,
    #[serde(default)]
    pub message: String,
}

/// `guard => requirement`: while the guard holds in the context, a pattern is
/// only feasible if the requirement holds on its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCondition {
    pub id: String,
    pub guard: Condition,
    pub requirement: Condition,
    #[serde(default)]
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Higher rank, higher utility.
    Direct,
    /// Lower rank, higher utility (costs and the like).
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub source_property: String,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRule {
    pub id: String,
    pub guard: Condition,
    pub deltas: IndexMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbLevel {
    Control,
    Pattern,
}

impl KbLevel {
    pub fn pattern_level(self) -> PatternLevel {
        match self {
            KbLevel::Control => PatternLevel::SecurityPattern,
            KbLevel::Pattern => PatternLevel::SecurityDesignPattern,
        }
    }
}

/// One control-level or pattern-level knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub id: String,
    pub level: KbLevel,
    #[serde(default)]
    pub description: String,
    pub property_decls: Vec<PropertyDecl>,
    pub patterns: Vec<PatternDefinition>,
    #[serde(default)]
    pub contextual_constraints: Vec<ContextualConstraint>,
    #[serde(default)]
    pub filter_conditions: Vec<FilterCondition>,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub weight_rules: Vec<WeightRule>,
    #[serde(default)]
    pub base_weights: IndexMap<String, f64>,
}

impl KnowledgeBase {
    pub fn new(id: impl Into<String>, level: KbLevel) -> Self {
        Self {
            id: id.into(),
            level,
            description: String::new(),
            property_decls: Vec::new(),
            patterns: Vec::new(),
            contextual_constraints: Vec::new(),
            filter_conditions: Vec::new(),
            criteria: Vec::new(),
            weight_rules: Vec::new(),
            base_weights: IndexMap::new(),
        }
    }

    pub fn property(&self, id: &str) -> Option<&PropertyDecl> {
        self.property_decls.iter().find(|p| p.id == id)
    }

    pub fn context_properties(&self) -> impl Iterator<Item = &PropertyDecl> {
        self.property_decls
            .iter()
            .filter(|p| p.kind == PropertyKind::Context)
    }

    pub fn pattern_properties(&self) -> impl Iterator<Item = &PropertyDecl> {
        self.property_decls
            .iter()
            .filter(|p| p.kind == PropertyKind::Pattern)
    }

    pub fn pattern(&self, id: &str) -> Option<&PatternDefinition> {
        self.patterns.iter().find(|p| p.id == id)
    }

    pub fn criterion(&self, id: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn filter(&self, id: &str) -> Option<&FilterCondition> {
        self.filter_conditions.iter().find(|f| f.id == id)
    }

    pub fn constraint(&self, id: &str) -> Option<&ContextualConstraint> {
        self.contextual_constraints.iter().find(|c| c.id == id)
    }

    /// Checks that every assigned property is a declared context property and
    /// every value lies in its domain.
    pub fn check_assignment(&self, ctx: &ContextAssignment) -> Result<(), crate::Error> {
        for (property, value) in ctx.iter() {
            let decl = match self.property(property) {
                Some(d) if d.kind == PropertyKind::Context => d,
                _ => {
                    return Err(crate::Error::UnknownProperty {
                        kb: self.id.clone(),
                        property: property.to_string(),
                    })
                }
            };
            if !decl.admits(value) {
                return Err(crate::Error::ValueOutOfDomain {
                    property: property.to_string(),
                    value: value.to_string(),
                    domain: decl.domain.clone(),
                });
            }
        }
        Ok(())
    }

    /// Whether `ctx` assigns every declared context property.
    pub fn is_total(&self, ctx: &ContextAssignment) -> bool {
        self.context_properties().all(|p| ctx.contains(&p.id))
    }
}
