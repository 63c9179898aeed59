//! Expectation suites: a directory of `.ctx` files plus an
//! `expectations.toml` manifest of ranking and exclusion rules.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use patternwise_core::dsl::parse_context;
use patternwise_core::maut::{self, Explanation};
use patternwise_core::model::{ContextAssignment, KnowledgeBase};
use patternwise_core::solver;
use serde::Deserialize;

pub const MANIFEST: &str = "expectations.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// The first `patterns.len()` ranks hold exactly `patterns`.
    TopSet,
    /// Rank 1 is one of `patterns`.
    TopOneOf,
    /// Every listed pattern is infeasible.
    Excluded,
    /// No listed pattern is ranked first.
    NeverTop,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::TopSet => "top_set",
            RuleKind::TopOneOf => "top_one_of",
            RuleKind::Excluded => "excluded",
            RuleKind::NeverTop => "never_top",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub kind: RuleKind,
    pub contexts: Vec<String>,
    pub patterns: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    rule: Vec<Rule>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{} is missing; a suite needs an expectations manifest", path.display())]
    MissingManifest { path: PathBuf },
    #[error("invalid manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{}", .0)]
    Context(#[from] patternwise_core::dsl::ParseError),
    #[error("rule {index} references unknown context `{context}` (no {context}.ctx)")]
    UnknownContext { index: usize, context: String },
    #[error("rule {index} references unknown pattern `{pattern}`")]
    UnknownPattern { index: usize, pattern: String },
    #[error("rule {index} has no {what}")]
    EmptyRule { index: usize, what: &'static str },
}

#[derive(Debug, Clone)]
pub struct Suite {
    /// Context name (file stem) → assignment, sorted by name.
    pub contexts: BTreeMap<String, ContextAssignment>,
    pub rules: Vec<Rule>,
}

impl Suite {
    /// Loads `dir/expectations.toml` and every `dir/*.ctx`, checking both
    /// against `kb`.
    pub fn load(dir: &Path, kb: &KnowledgeBase) -> Result<Suite, SuiteError> {
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.is_file() {
            return Err(SuiteError::MissingManifest {
                path: manifest_path,
            });
        }
        let text = fs::read_to_string(&manifest_path).map_err(|source| SuiteError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| SuiteError::Manifest {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        if manifest.rule.is_empty() {
            return Err(SuiteError::Manifest {
                path: manifest_path,
                message: "no [[rule]] entries".to_string(),
            });
        }

        let mut contexts = BTreeMap::new();
        let entries = fs::read_dir(dir).map_err(|source| SuiteError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for entry in entries {
            let path = entry
                .map_err(|source| SuiteError::Io {
                    path: dir.to_path_buf(),
                    source,
                })?
                .path();
            if path.extension().is_none_or(|e| e != "ctx") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|source| SuiteError::Io {
                path: path.clone(),
                source,
            })?;
            let ctx = parse_context(&text, &path.display().to_string(), Some(kb))?;
            contexts.insert(name.to_string(), ctx);
        }

        for (index, rule) in manifest.rule.iter().enumerate() {
            let index = index + 1;
            if rule.contexts.is_empty() {
                return Err(SuiteError::EmptyRule {
                    index,
                    what: "contexts",
                });
            }
            if rule.patterns.is_empty() {
                return Err(SuiteError::EmptyRule {
                    index,
                    what: "patterns",
                });
            }
            if let Some(c) = rule.contexts.iter().find(|c| !contexts.contains_key(*c)) {
                return Err(SuiteError::UnknownContext {
                    index,
                    context: c.clone(),
                });
            }
            if let Some(p) = rule.patterns.iter().find(|p| kb.pattern(p).is_none()) {
                return Err(SuiteError::UnknownPattern {
                    index,
                    pattern: p.clone(),
                });
            }
        }
        Ok(Suite {
            contexts,
            rules: manifest.rule,
        })
    }
}

/// Outcome of one rule on one context.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub context: String,
    pub kind: RuleKind,
    pub patterns: Vec<String>,
    pub passed: bool,
    pub detail: String,
    /// Smallest score gap that the outcome depends on; negative when the
    /// check fails. `None` for checks that do not depend on scores.
    pub margin: Option<f64>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} [{}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.context,
            self.kind,
            self.patterns.join(", ")
        )?;
        if !self.passed {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

type Outcome = Result<Explanation, String>;

fn outcome(kb: &KnowledgeBase, ctx: &ContextAssignment) -> Outcome {
    maut::recommend(kb, ctx).map_err(|e| e.to_string())
}

fn score_of(e: &Explanation, id: &str) -> Option<f64> {
    e.recommendations
        .iter()
        .find(|r| r.scored.pattern_id == id)
        .map(|r| r.scored.score)
}

fn best_outside(e: &Explanation, patterns: &[String]) -> f64 {
    e.recommendations
        .iter()
        .filter(|r| !patterns.contains(&r.scored.pattern_id))
        .map(|r| r.scored.score)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_rule(
    kb: &KnowledgeBase,
    ctx: &ContextAssignment,
    rule: &Rule,
    out: &Outcome,
) -> (bool, String, Option<f64>) {
    if rule.kind == RuleKind::Excluded {
        let feasibility = match solver::feasible_patterns(kb, ctx) {
            Ok(f) => f,
            Err(e) => return (false, e.to_string(), None),
        };
        let feasible: Vec<&str> = rule
            .patterns
            .iter()
            .filter(|p| feasibility.is_feasible(p))
            .map(String::as_str)
            .collect();
        return if feasible.is_empty() {
            (true, String::new(), None)
        } else {
            (
                false,
                format!("still feasible: {}", feasible.join(", ")),
                None,
            )
        };
    }

    let e = match out {
        Ok(e) => e,
        Err(msg) => return (false, msg.clone(), Some(f64::NEG_INFINITY)),
    };
    let ranked = e.ranked_ids();
    let detail = format!("ranking is {}", ranked.join(" > "));
    let listed = |f: fn(f64, f64) -> f64, init: f64| {
        rule.patterns
            .iter()
            .filter_map(|p| score_of(e, p))
            .fold(init, f)
    };
    let outside = best_outside(e, &rule.patterns);
    match rule.kind {
        RuleKind::TopSet => {
            let n = rule.patterns.len();
            let head = &ranked[..n.min(ranked.len())];
            let ok = head.len() == n && rule.patterns.iter().all(|p| head.contains(&p.as_str()));
            let margin = listed(f64::min, f64::INFINITY) - outside;
            (ok, detail, Some(margin))
        }
        RuleKind::TopOneOf => {
            let ok = rule.patterns.iter().any(|p| p == ranked[0]);
            (
                ok,
                detail,
                Some(listed(f64::max, f64::NEG_INFINITY) - outside),
            )
        }
        RuleKind::NeverTop => {
            let ok = !rule.patterns.iter().any(|p| p == ranked[0]);
            (
                ok,
                detail,
                Some(outside - listed(f64::max, f64::NEG_INFINITY)),
            )
        }
        RuleKind::Excluded => unreachable!(),
    }
}

/// Runs every rule on every context it names, in manifest order.
pub fn evaluate(kb: &KnowledgeBase, suite: &Suite) -> Vec<Check> {
    let outcomes: BTreeMap<&str, Outcome> = suite
        .contexts
        .iter()
        .map(|(name, ctx)| (name.as_str(), outcome(kb, ctx)))
        .collect();
    let mut checks = Vec::new();
    for rule in &suite.rules {
        for name in &rule.contexts {
            let ctx = &suite.contexts[name];
            let (passed, detail, margin) = check_rule(kb, ctx, rule, &outcomes[name.as_str()]);
            checks.push(Check {
                context: name.clone(),
                kind: rule.kind,
                patterns: rule.patterns.clone(),
                passed,
                detail,
                margin,
            });
        }
    }
    checks
}
