//! Question answering grounded in the active knowledge base.
//!
//! The built-in backend matches question keywords against element ids,
//! descriptions and messages, and explains exclusions from the filter audit.
//! An optional external backend forwards the question, the canonical `.kb`
//! text and the current context to an HTTP endpoint; any failure there falls
//! back to the built-in backend.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dsl::serialize_kb;
use crate::model::{ContextAssignment, KnowledgeBase};
use crate::solver;
use crate::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    External,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stub" => Ok(BackendKind::Stub),
            "external" => Ok(BackendKind::External),
            other => Err(Error::InvalidConfig(format!(
                "unknown assistant backend `{other}` (expected `stub` or `external`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistantConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub timeout: Duration,
    pub api_key: Option<String>,
}

impl Default for AssistantConfig {
    fn default() -> Self {
        AssistantConfig {
            backend: BackendKind::Stub,
            endpoint: None,
            timeout: DEFAULT_TIMEOUT,
            api_key: None,
        }
    }
}

impl AssistantConfig {
    /// Reads `ASSISTANT_BACKEND`, `ASSISTANT_ENDPOINT`,
    /// `ASSISTANT_TIMEOUT_SECONDS` and `ASSISTANT_API_KEY`.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = AssistantConfig::default();
        if let Some(b) = get("ASSISTANT_BACKEND") {
            cfg.backend = b.parse()?;
        }
        cfg.endpoint = get("ASSISTANT_ENDPOINT").filter(|s| !s.is_empty());
        if let Some(t) = get("ASSISTANT_TIMEOUT_SECONDS") {
            let secs: f64 = t.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "ASSISTANT_TIMEOUT_SECONDS must be a number, got `{t}`"
                ))
            })?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "ASSISTANT_TIMEOUT_SECONDS must be positive, got `{t}`"
                )));
            }
            cfg.timeout = Duration::from_secs_f64(secs);
        }
        cfg.api_key = get("ASSISTANT_API_KEY").filter(|s| !s.is_empty());
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.backend == BackendKind::External && self.endpoint.is_none() {
            return Err(Error::InvalidConfig(
                "the external assistant backend needs ASSISTANT_ENDPOINT".to_string(),
            ));
        }
        Ok(())
    }
}

/// One question and its answer, as recorded in a session transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistantExchange {
    pub question: String,
    pub answer: String,
    /// Ids of the knowledge-base elements the answer relies on.
    pub cited_elements: Vec<String>,
    /// Backend that produced the answer.
    pub source: BackendKind,
    /// Why the external backend was not used, when it was configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Serialize)]
struct ExternalRequest<'a> {
    question: &'a str,
    kb_excerpt: String,
    context: &'a ContextAssignment,
}

#[derive(Debug, Deserialize)]
struct ExternalResponse {
    answer: String,
    #[serde(default)]
    cited_elements: Vec<String>,
}

/// Answers `question` about `kb` under `ctx` with the configured backend.
/// This never fails: backend errors degrade to the built-in answer.
pub fn ask(
    config: &AssistantConfig,
    kb: &KnowledgeBase,
    ctx: &ContextAssignment,
    question: &str,
) -> AssistantExchange {
    if config.backend == BackendKind::External {
        match ask_external(config, kb, ctx, question) {
            Ok(ex) => return ex,
            Err(reason) => {
                let mut ex = stub_answer(kb, ctx, question);
                ex.fallback_reason = Some(reason);
                return ex;
            }
        }
    }
    stub_answer(kb, ctx, question)
}

fn ask_external(
    config: &AssistantConfig,
    kb: &KnowledgeBase,
    ctx: &ContextAssignment,
    question: &str,
) -> std::result::Result<AssistantExchange, String> {
    let endpoint = config.endpoint.as_deref().ok_or("no endpoint configured")?;
    let body = ExternalRequest {
        question,
        kb_excerpt: serialize_kb(kb).map_err(|e| e.to_string())?,
        context: ctx,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .build()
        .into();
    let mut request = agent.post(endpoint);
    if let Some(key) = &config.api_key {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response = request
        .send_json(&body)
        .map_err(|e| format!("request failed: {e}"))?;
    let parsed: ExternalResponse = response
        .body_mut()
        .read_json()
        .map_err(|e| format!("malformed response: {e}"))?;
    let known = element_ids(kb);
    Ok(AssistantExchange {
        question: question.to_string(),
        answer: parsed.answer,
        cited_elements: parsed
            .cited_elements
            .into_iter()
            .filter(|id| known.contains(id.as_str()))
            .collect(),
        source: BackendKind::External,
        fallback_reason: None,
    })
}

fn element_ids(kb: &KnowledgeBase) -> BTreeSet<&str> {
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    ids.insert(&kb.id);
    ids.extend(kb.property_decls.iter().map(|p| p.id.as_str()));
    ids.extend(kb.patterns.iter().map(|p| p.id.as_str()));
    ids.extend(kb.contextual_constraints.iter().map(|c| c.id.as_str()));
    ids.extend(kb.filter_conditions.iter().map(|f| f.id.as_str()));
    ids.extend(kb.criteria.iter().map(|c| c.id.as_str()));
    ids.extend(kb.weight_rules.iter().map(|r| r.id.as_str()));
    ids
}

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "be", "by", "can", "could", "do", "does", "for", "from",
    "how", "i", "in", "is", "it", "me", "mean", "my", "of", "on", "or", "please", "should", "tell",
    "that", "the", "this", "to", "was", "what", "when", "which", "with", "would", "you",
];

const EXCLUSION_WORDS: &[&str] = &[
    "why",
    "excluded",
    "exclude",
    "filtered",
    "removed",
    "not",
    "infeasible",
    "missing",
];

fn normalize(word: &str) -> String {
    let w = word.to_lowercase();
    if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(normalize)
}

fn keywords(text: &str) -> BTreeSet<String> {
    words(text)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

#[derive(Clone, Copy)]
enum Element<'k> {
    Property(&'k crate::model::PropertyDecl),
    Pattern(&'k crate::model::PatternDefinition),
    Filter(&'k crate::model::FilterCondition),
}

fn score(question: &BTreeSet<String>, id: &str, texts: &[&str]) -> u32 {
    let id_words = keywords(id);
    let text_words: BTreeSet<String> = texts.iter().flat_map(|t| keywords(t)).collect();
    question
        .iter()
        .map(|w| {
            if id_words.contains(w) {
                3
            } else if text_words.contains(w) {
                1
            } else {
                0
            }
        })
        .sum()
}

fn element_score(question: &BTreeSet<String>, el: Element<'_>) -> u32 {
    match el {
        Element::Property(p) => score(
            question,
            &p.id,
            &[&p.description, p.question_text.as_deref().unwrap_or("")],
        ),
        Element::Pattern(p) => score(question, &p.id, &[&p.description]),
        Element::Filter(f) => score(question, &f.id, &[&f.message]),
    }
}

/// First element with the highest positive score.
fn best<'k>(
    question: &BTreeSet<String>,
    candidates: impl Iterator<Item = Element<'k>>,
) -> Option<Element<'k>> {
    let mut best: Option<(u32, Element<'k>)> = None;
    for el in candidates {
        let s = element_score(question, el);
        if s > 0 && best.is_none_or(|(b, _)| s > b) {
            best = Some((s, el));
        }
    }
    best.map(|(_, el)| el)
}

fn exchange(question: &str, answer: String, cited: Vec<String>) -> AssistantExchange {
    AssistantExchange {
        question: question.to_string(),
        answer,
        cited_elements: cited,
        source: BackendKind::Stub,
        fallback_reason: None,
    }
}

/// The built-in keyword-matching backend.
pub fn stub_answer(
    kb: &KnowledgeBase,
    ctx: &ContextAssignment,
    question: &str,
) -> AssistantExchange {
    let q = keywords(question);
    let feasibility = solver::filter_patterns(kb, ctx);

    let wants_exclusion = words(question).any(|w| EXCLUSION_WORDS.contains(&w.as_str()));
    if wants_exclusion {
        if let Some(Element::Pattern(p)) = best(&q, kb.patterns.iter().map(Element::Pattern)) {
            if let Some(filters) = feasibility.exclusions.get(&p.id) {
                let mut cited = vec![p.id.clone()];
                let reasons: Vec<String> = filters
                    .iter()
                    .map(|fid| {
                        cited.push(fid.clone());
                        let msg = kb.filter(fid).map(|f| f.message.as_str()).unwrap_or("");
                        if msg.is_empty() {
                            format!("filter {fid}")
                        } else {
                            format!("{fid}: {msg}")
                        }
                    })
                    .collect();
                let answer = format!(
                    "`{}` is excluded under the current context by {}",
                    p.id,
                    reasons.join("; ")
                );
                return exchange(question, answer, cited);
            }
        }
    }

    let candidates = kb
        .property_decls
        .iter()
        .map(Element::Property)
        .chain(kb.patterns.iter().map(Element::Pattern))
        .chain(kb.filter_conditions.iter().map(Element::Filter));
    let Some(el) = best(&q, candidates) else {
        return exchange(
            question,
            "no knowledge-base match for this question".to_string(),
            Vec::new(),
        );
    };

    match el {
        Element::Property(p) => {
            let mut answer = format!("`{}`", p.id);
            if let Some(qt) = &p.question_text {
                answer.push_str(&format!(" asks: {qt}"));
            }
            if !p.description.is_empty() {
                answer.push_str(&format!(" {}", p.description));
            }
            answer.push_str(&format!(" Options: {}.", p.domain.join(", ")));
            if let Some(v) = ctx.get(&p.id) {
                answer.push_str(&format!(" Current answer: {v}."));
            }
            exchange(question, answer, vec![p.id.clone()])
        }
        Element::Pattern(p) => {
            let values: Vec<String> = p.values.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            let mut answer = format!("`{}`", p.id);
            if !p.description.is_empty() {
                answer.push_str(&format!(": {}", p.description));
            }
            answer.push_str(&format!(" ({})", values.join(", ")));
            let status = if feasibility.is_feasible(&p.id) {
                " It is feasible under the current context."
            } else {
                " It is excluded under the current context."
            };
            answer.push_str(status);
            exchange(question, answer, vec![p.id.clone()])
        }
        Element::Filter(f) => {
            let mut answer = format!("`{}`: when {} then {}.", f.id, f.guard, f.requirement);
            if !f.message.is_empty() {
                answer.push_str(&format!(" {}", f.message));
            }
            exchange(question, answer, vec![f.id.clone()])
        }
    }
}
