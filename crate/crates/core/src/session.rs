//! The recommendation process as a resumable state machine.
//!
//! A session starts on a control-level knowledge base (the security-pattern
//! stage), elicits the context one question at a time, ranks the feasible
//! patterns, and on selection of a pattern that has a refining knowledge base
//! repeats the process on it (the security-design-pattern stage).
//!
//! ```text
//! Eliciting ──answer──▶ Eliciting | Conflicted
//! Eliciting ──next_question (none left)──▶ Recommending
//! Conflicted ──retract──▶ Eliciting
//! Recommending ──recommendations──▶ AwaitingSelection
//! AwaitingSelection ──select──▶ Eliciting (next stage) | Done
//! ```

use std::sync::Arc;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::assistant::{self, AssistantConfig, AssistantExchange};
use crate::maut::{self, Explanation};
use crate::model::{ContextAssignment, KnowledgeBase, PropertyKind};
use crate::solver::{self, ConflictDiagnosis};
use crate::{Error, KbCatalog, Result};

/// Version of the snapshot document layout.
pub const SESSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SpStage,
    SdpStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Eliciting,
    Recommending,
    AwaitingSelection,
    Conflicted,
    Done,
}

impl SessionState {
    /// Whether the state machine permits moving from `self` to `next`.
    pub fn can_transition_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Eliciting, Eliciting)
                | (Eliciting, Conflicted)
                | (Eliciting, Recommending)
                | (Conflicted, Eliciting)
                | (Recommending, AwaitingSelection)
                | (AwaitingSelection, Eliciting)
                | (AwaitingSelection, Done)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub property: String,
    pub value: String,
    pub at: DateTime<Utc>,
    /// Pre-filled from the previous stage rather than answered in this one.
    #[serde(default)]
    pub inherited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub kb: String,
    pub answer_log: Vec<AnswerRecord>,
    pub selected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Started {
        at: DateTime<Utc>,
        kb: String,
    },
    Answered {
        at: DateTime<Utc>,
        property: String,
        value: String,
        #[serde(default)]
        inherited: bool,
    },
    Retracted {
        at: DateTime<Utc>,
        property: String,
        value: String,
    },
    Conflict {
        at: DateTime<Utc>,
        diagnosis: ConflictDiagnosis,
    },
    Recommended {
        at: DateTime<Utc>,
        kb: String,
        ranking: Vec<String>,
    },
    Selected {
        at: DateTime<Utc>,
        pattern: String,
    },
    StageEntered {
        at: DateTime<Utc>,
        stage: Stage,
        kb: String,
    },
    Assistant {
        at: DateTime<Utc>,
        exchange: AssistantExchange,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub property_id: String,
    pub question_text: String,
    pub description: String,
    pub options: Vec<String>,
    /// Option → feasible-set size if that option were chosen.
    pub impact_preview: IndexMap<String, usize>,
    /// Options that would violate a contextual constraint, with the ids of
    /// the violated constraints.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub invalid_options: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub accepted: bool,
    pub feasible_count: usize,
    pub conflict: Option<ConflictDiagnosis>,
}

/// One architect interaction. Snapshots are plain values; persist them with
/// serde.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    pub requirement: String,
    pub root_kb: String,
    pub stage: Stage,
    pub active_kb: String,
    pub ctx: ContextAssignment,
    pub answer_log: Vec<AnswerRecord>,
    pub selected_sp: Option<String>,
    pub selected_sdp: Option<String>,
    pub state: SessionState,
    pub completed_stages: Vec<StageRecord>,
    pub conflict: Option<ConflictDiagnosis>,
    pub last_recommendations: Option<Explanation>,
    pub transcript: Vec<TranscriptEvent>,
    pub created_at: DateTime<Utc>,
}

fn wrong_state(expected: &'static str, actual: SessionState) -> Error {
    Error::WrongState { expected, actual }
}

impl Session {
    /// Starts a session on a control-level knowledge base.
    pub fn start(catalog: &KbCatalog, requirement: &str, kb_id: &str) -> Result<Session> {
        Self::start_with_id(
            catalog,
            requirement,
            kb_id,
            uuid::Uuid::new_v4().to_string(),
        )
    }

    pub fn start_with_id(
        catalog: &KbCatalog,
        requirement: &str,
        kb_id: &str,
        id: String,
    ) -> Result<Session> {
        let kb = catalog.require(kb_id)?;
        if kb.level != crate::model::KbLevel::Control {
            return Err(Error::NotControlLevel(kb_id.to_string()));
        }
        let now = Utc::now();
        Ok(Session {
            schema_version: SESSION_SCHEMA_VERSION,
            id,
            requirement: requirement.to_string(),
            root_kb: kb_id.to_string(),
            stage: Stage::SpStage,
            active_kb: kb_id.to_string(),
            ctx: ContextAssignment::new(),
            answer_log: Vec::new(),
            selected_sp: None,
            selected_sdp: None,
            state: SessionState::Eliciting,
            completed_stages: Vec::new(),
            conflict: None,
            last_recommendations: None,
            transcript: vec![TranscriptEvent::Started {
                at: now,
                kb: kb_id.to_string(),
            }],
            created_at: now,
        })
    }

    fn transition(&mut self, next: SessionState) {
        assert!(
            self.state.can_transition_to(next),
            "illegal session transition {:?} -> {:?}",
            self.state,
            next
        );
        self.state = next;
    }

    pub fn active_kb<'c>(&self, catalog: &'c KbCatalog) -> Result<&'c KnowledgeBase> {
        catalog.require(&self.active_kb).map(|kb| kb.as_ref())
    }

    /// Feasible-set size under the current context.
    pub fn feasible_count(&self, catalog: &KbCatalog) -> Result<usize> {
        Ok(solver::feasible_count(self.active_kb(catalog)?, &self.ctx))
    }

    pub fn feasibility(&self, catalog: &KbCatalog) -> Result<solver::FeasibilityResult> {
        let kb = self.active_kb(catalog)?;
        Ok(solver::filter_patterns(kb, &self.ctx))
    }

    /// Context properties of the active KB that are still unanswered, in
    /// declaration order.
    pub fn unanswered<'c>(&self, catalog: &'c KbCatalog) -> Result<Vec<&'c str>> {
        let kb = self.active_kb(catalog)?;
        Ok(kb
            .context_properties()
            .filter(|p| !self.ctx.contains(&p.id))
            .map(|p| p.id.as_str())
            .collect())
    }

    /// The next question in declaration order, or `None` once every context
    /// property is answered (the session then moves to `Recommending`).
    pub fn next_question(&mut self, catalog: &KbCatalog) -> Result<Option<Question>> {
        if self.state != SessionState::Eliciting {
            return Err(wrong_state("eliciting", self.state));
        }
        let kb = self.active_kb(catalog)?;
        let Some(decl) = kb.context_properties().find(|p| !self.ctx.contains(&p.id)) else {
            self.transition(SessionState::Recommending);
            return Ok(None);
        };
        let mut impact_preview = IndexMap::new();
        let mut invalid_options = IndexMap::new();
        for value in &decl.domain {
            let mut trial = self.ctx.clone();
            trial.set(decl.id.clone(), value.clone());
            let violated = solver::violated_constraints(kb, &trial);
            if !violated.is_empty() {
                invalid_options.insert(value.clone(), violated);
            }
            impact_preview.insert(value.clone(), solver::feasible_count(kb, &trial));
        }
        Ok(Some(Question {
            property_id: decl.id.clone(),
            question_text: decl
                .question_text
                .clone()
                .unwrap_or_else(|| format!("What is the value of `{}`?", decl.id)),
            description: decl.description.clone(),
            options: decl.domain.clone(),
            impact_preview,
            invalid_options,
        }))
    }

    /// Records an answer. An answer that empties the feasible set moves the
    /// session to `Conflicted` and carries a minimal conflict diagnosis.
    pub fn answer(
        &mut self,
        catalog: &KbCatalog,
        property: &str,
        value: &str,
    ) -> Result<AnswerOutcome> {
        if self.state != SessionState::Eliciting {
            return Err(wrong_state("eliciting", self.state));
        }
        self.record_answer(catalog, property, value, false)
    }

    fn record_answer(
        &mut self,
        catalog: &KbCatalog,
        property: &str,
        value: &str,
        inherited: bool,
    ) -> Result<AnswerOutcome> {
        let kb = self.active_kb(catalog)?;
        let decl = kb
            .property(property)
            .filter(|p| p.kind == PropertyKind::Context)
            .ok_or_else(|| Error::UnknownProperty {
                kb: kb.id.clone(),
                property: property.to_string(),
            })?;
        if !decl.admits(value) {
            return Err(Error::ValueOutOfDomain {
                property: property.to_string(),
                value: value.to_string(),
                domain: decl.domain.clone(),
            });
        }
        if self.ctx.contains(property) {
            return Err(Error::AlreadyAnswered(property.to_string()));
        }
        let mut trial = self.ctx.clone();
        trial.set(property, value);
        let violated = solver::violated_constraints(kb, &trial);
        if !violated.is_empty() {
            return Err(Error::ContextViolation(violated));
        }

        let now = Utc::now();
        self.ctx = trial;
        self.answer_log.push(AnswerRecord {
            property: property.to_string(),
            value: value.to_string(),
            at: now,
            inherited,
        });
        self.transcript.push(TranscriptEvent::Answered {
            at: now,
            property: property.to_string(),
            value: value.to_string(),
            inherited,
        });

        let feasible_count = solver::feasible_count(kb, &self.ctx);
        let conflict = if feasible_count == 0 {
            let diagnosis = solver::diagnose_conflict(kb, &self.ctx)?;
            self.transcript.push(TranscriptEvent::Conflict {
                at: now,
                diagnosis: diagnosis.clone(),
            });
            self.conflict = Some(diagnosis.clone());
            self.transition(SessionState::Conflicted);
            Some(diagnosis)
        } else {
            self.transition(SessionState::Eliciting);
            None
        };
        Ok(AnswerOutcome {
            accepted: true,
            feasible_count,
            conflict,
        })
    }

    /// Removes an answer; the session returns to `Eliciting`. Returns the new
    /// feasible-set size.
    pub fn retract(&mut self, catalog: &KbCatalog, property: &str) -> Result<usize> {
        if !matches!(
            self.state,
            SessionState::Eliciting | SessionState::Conflicted
        ) {
            return Err(wrong_state("eliciting or conflicted", self.state));
        }
        let Some(value) = self.ctx.remove(property) else {
            return Err(Error::NotAnswered(property.to_string()));
        };
        self.answer_log.retain(|a| a.property != property);
        self.transcript.push(TranscriptEvent::Retracted {
            at: Utc::now(),
            property: property.to_string(),
            value,
        });
        self.conflict = None;
        self.transition(SessionState::Eliciting);
        self.feasible_count(catalog)
    }

    /// Ranks and explains the feasible patterns of the active KB. The first
    /// call moves the session to `AwaitingSelection`; later calls return the
    /// same payload.
    pub fn recommendations(&mut self, catalog: &KbCatalog) -> Result<Explanation> {
        match self.state {
            SessionState::Recommending => {
                let kb = self.active_kb(catalog)?;
                let explanation = maut::recommend(kb, &self.ctx)?;
                self.transcript.push(TranscriptEvent::Recommended {
                    at: Utc::now(),
                    kb: kb.id.clone(),
                    ranking: explanation
                        .ranked_ids()
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                });
                self.last_recommendations = Some(explanation.clone());
                self.transition(SessionState::AwaitingSelection);
                Ok(explanation)
            }
            SessionState::AwaitingSelection => Ok(self
                .last_recommendations
                .clone()
                .expect("awaiting selection implies a stored ranking")),
            other => Err(wrong_state("recommending", other)),
        }
    }

    /// Selects a recommended pattern. A security pattern with a refining KB
    /// starts the design-pattern stage; anything else finishes the session.
    pub fn select_pattern(&mut self, catalog: &KbCatalog, pattern_id: &str) -> Result<()> {
        if self.state != SessionState::AwaitingSelection {
            return Err(wrong_state("awaiting_selection", self.state));
        }
        let recommended = self
            .last_recommendations
            .as_ref()
            .is_some_and(|e| e.ranked_ids().contains(&pattern_id));
        if !recommended {
            return Err(Error::NotRecommended(pattern_id.to_string()));
        }
        let now = Utc::now();
        self.transcript.push(TranscriptEvent::Selected {
            at: now,
            pattern: pattern_id.to_string(),
        });
        self.completed_stages.push(StageRecord {
            stage: self.stage,
            kb: self.active_kb.clone(),
            answer_log: self.answer_log.clone(),
            selected: pattern_id.to_string(),
        });

        match self.stage {
            Stage::SpStage => {
                self.selected_sp = Some(pattern_id.to_string());
                match catalog.child_of(&self.active_kb, pattern_id) {
                    Some(child) => {
                        let child = child.clone();
                        let previous = std::mem::take(&mut self.ctx);
                        self.stage = Stage::SdpStage;
                        self.active_kb = child.id.clone();
                        self.answer_log.clear();
                        self.last_recommendations = None;
                        self.transcript.push(TranscriptEvent::StageEntered {
                            at: now,
                            stage: Stage::SdpStage,
                            kb: child.id.clone(),
                        });
                        self.transition(SessionState::Eliciting);
                        self.inherit(catalog, &child, &previous)?;
                    }
                    None => self.transition(SessionState::Done),
                }
            }
            Stage::SdpStage => {
                self.selected_sdp = Some(pattern_id.to_string());
                self.transition(SessionState::Done);
            }
        }
        Ok(())
    }

    /// Pre-fills answers for context properties the new KB shares with the
    /// previous stage. They stay retractable like any other answer.
    fn inherit(
        &mut self,
        catalog: &KbCatalog,
        kb: &KnowledgeBase,
        previous: &ContextAssignment,
    ) -> Result<()> {
        for decl in kb.context_properties() {
            if self.state != SessionState::Eliciting {
                break;
            }
            let Some(value) = previous.get(&decl.id) else {
                continue;
            };
            if !decl.admits(value) {
                continue;
            }
            match self.record_answer(catalog, &decl.id, value, true) {
                Ok(_) | Err(Error::ContextViolation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Snapshot of what the assistant needs: the active KB and the current
    /// context. Only valid while eliciting (including after a conflict).
    pub fn assistant_input(
        &self,
        catalog: &KbCatalog,
    ) -> Result<(Arc<KnowledgeBase>, ContextAssignment)> {
        if !matches!(
            self.state,
            SessionState::Eliciting | SessionState::Conflicted
        ) {
            return Err(wrong_state("eliciting or conflicted", self.state));
        }
        Ok((catalog.require(&self.active_kb)?.clone(), self.ctx.clone()))
    }

    /// Asks the assistant and records the exchange. Callers that must not
    /// hold a lock during a network call use [`Session::assistant_input`],
    /// [`assistant::ask`] and [`Session::record_exchange`] separately.
    pub fn ask(
        &mut self,
        catalog: &KbCatalog,
        config: &AssistantConfig,
        question: &str,
    ) -> Result<AssistantExchange> {
        let (kb, ctx) = self.assistant_input(catalog)?;
        let exchange = assistant::ask(config, &kb, &ctx, question);
        self.record_exchange(exchange.clone());
        Ok(exchange)
    }

    /// Appends an assistant exchange to the transcript.
    pub fn record_exchange(&mut self, exchange: AssistantExchange) {
        self.transcript.push(TranscriptEvent::Assistant {
            at: Utc::now(),
            exchange,
        });
    }

    /// Rebuilds a session from the answers and selections recorded in
    /// `snapshot`, on a fresh session with the same id and requirement.
    pub fn replay(catalog: &KbCatalog, snapshot: &Session) -> Result<Session> {
        let mut s = Session::start_with_id(
            catalog,
            &snapshot.requirement,
            &snapshot.root_kb,
            snapshot.id.clone(),
        )?;
        let finished = snapshot.state == SessionState::Done;
        for (i, record) in snapshot.completed_stages.iter().enumerate() {
            let is_last = i + 1 == snapshot.completed_stages.len();
            // The current stage's log is authoritative for the stage still in progress.
            let log = if is_last && finished {
                &snapshot.answer_log
            } else {
                &record.answer_log
            };
            s.replay_answers(catalog, log)?;
            s.advance_to_selection(catalog)?;
            s.select_pattern(catalog, &record.selected)?;
        }
        if finished {
            return Ok(s);
        }
        s.replay_answers(catalog, &snapshot.answer_log)?;
        match snapshot.state {
            SessionState::Eliciting | SessionState::Conflicted => {}
            SessionState::Recommending => {
                s.next_question(catalog)?;
            }
            SessionState::AwaitingSelection => s.advance_to_selection(catalog)?,
            SessionState::Done => unreachable!(),
        }
        Ok(s)
    }

    fn replay_answers(&mut self, catalog: &KbCatalog, log: &[AnswerRecord]) -> Result<()> {
        let keep: Vec<&str> = log
            .iter()
            .filter(|a| a.inherited)
            .map(|a| a.property.as_str())
            .collect();
        let dropped: Vec<String> = self
            .answer_log
            .iter()
            .filter(|a| a.inherited && !keep.contains(&a.property.as_str()))
            .map(|a| a.property.clone())
            .collect();
        for property in dropped {
            self.retract(catalog, &property)?;
        }
        for a in log.iter().filter(|a| !a.inherited) {
            self.answer(catalog, &a.property, &a.value)?;
        }
        Ok(())
    }

    fn advance_to_selection(&mut self, catalog: &KbCatalog) -> Result<()> {
        while self.state == SessionState::Eliciting {
            if self.next_question(catalog)?.is_some() {
                return Err(Error::IncompleteContext(
                    self.unanswered(catalog)?
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                ));
            }
        }
        self.recommendations(catalog)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kb;

    fn catalog() -> KbCatalog {
        let mut cat = KbCatalog::new();
        cat.insert(
            parse_kb(
                r#"
control root
property a context
  values x, y
property b context
  values x, y
property c pattern
  values lo, hi
pattern p1
  c = lo
pattern p2
  c = hi
filter F1
  when a = x
  then c = hi
filter F2
  when b = x
  then c = lo
criterion q
  from c direct
weights
  q = 1
"#,
            )
            .unwrap(),
        )
        .unwrap();
        cat.insert(
            parse_kb(
                "control leaf\n  level pattern\nproperty b context\n  values x, y\nproperty d context\n  values u, v\nproperty c pattern\n  values lo, hi\npattern s1\n  c = lo\npattern s2\n  c = hi\ncriterion q\n  from c direct\nweights\n  q = 1\n",
            )
            .unwrap(),
        )
        .unwrap();
        cat.link_child("root", "p2", "leaf").unwrap();
        cat
    }

    #[test]
    fn questions_follow_declaration_order() {
        let cat = catalog();
        let mut s = Session::start(&cat, "", "root").unwrap();
        let q = s.next_question(&cat).unwrap().unwrap();
        assert_eq!(q.property_id, "a");
        assert_eq!(q.impact_preview["x"], 1);
        assert_eq!(q.impact_preview["y"], 2);
        s.answer(&cat, "a", "y").unwrap();
        assert_eq!(s.next_question(&cat).unwrap().unwrap().property_id, "b");
        s.answer(&cat, "b", "y").unwrap();
        assert!(s.next_question(&cat).unwrap().is_none());
        assert_eq!(s.state, SessionState::Recommending);
    }

    #[test]
    fn conflict_then_retract() {
        let cat = catalog();
        let mut s = Session::start(&cat, "", "root").unwrap();
        s.answer(&cat, "a", "x").unwrap();
        let out = s.answer(&cat, "b", "x").unwrap();
        assert_eq!(out.feasible_count, 0);
        assert_eq!(s.state, SessionState::Conflicted);
        assert_eq!(out.conflict.unwrap().conflict.len(), 2);
        assert!(matches!(
            s.answer(&cat, "a", "y"),
            Err(Error::WrongState { .. })
        ));
        assert_eq!(s.retract(&cat, "b").unwrap(), 1);
        assert_eq!(s.state, SessionState::Eliciting);
        assert!(s.conflict.is_none());
    }

    #[test]
    fn answer_errors() {
        let cat = catalog();
        let mut s = Session::start(&cat, "", "root").unwrap();
        assert!(matches!(
            s.answer(&cat, "a", "ultra"),
            Err(Error::ValueOutOfDomain { .. })
        ));
        assert!(matches!(
            s.answer(&cat, "c", "lo"),
            Err(Error::UnknownProperty { .. })
        ));
        s.answer(&cat, "a", "y").unwrap();
        assert!(matches!(
            s.answer(&cat, "a", "x"),
            Err(Error::AlreadyAnswered(_))
        ));
        assert!(matches!(s.retract(&cat, "b"), Err(Error::NotAnswered(_))));
    }

    #[test]
    fn unknown_or_pattern_level_kb_cannot_start() {
        let cat = catalog();
        assert!(matches!(
            Session::start(&cat, "", "nope"),
            Err(Error::UnknownKb(_))
        ));
        assert!(matches!(
            Session::start(&cat, "", "leaf"),
            Err(Error::NotControlLevel(_))
        ));
    }

    #[test]
    fn selection_enters_child_stage_with_inherited_answers() {
        let cat = catalog();
        let mut s = Session::start(&cat, "req", "root").unwrap();
        s.answer(&cat, "a", "y").unwrap();
        s.answer(&cat, "b", "y").unwrap();
        assert!(s.next_question(&cat).unwrap().is_none());
        let rec = s.recommendations(&cat).unwrap();
        assert_eq!(rec.ranked_ids(), vec!["p2", "p1"]);
        assert!(matches!(
            s.select_pattern(&cat, "zz"),
            Err(Error::NotRecommended(_))
        ));
        s.select_pattern(&cat, "p2").unwrap();
        assert_eq!(s.stage, Stage::SdpStage);
        assert_eq!(s.state, SessionState::Eliciting);
        assert_eq!(s.selected_sp.as_deref(), Some("p2"));
        assert_eq!(s.ctx.get("b"), Some("y"));
        assert!(s.answer_log[0].inherited);
        assert_eq!(s.next_question(&cat).unwrap().unwrap().property_id, "d");

        s.answer(&cat, "d", "u").unwrap();
        s.next_question(&cat).unwrap();
        s.recommendations(&cat).unwrap();
        s.select_pattern(&cat, "s2").unwrap();
        assert_eq!(s.state, SessionState::Done);
        assert_eq!(s.selected_sdp.as_deref(), Some("s2"));

        let replayed = Session::replay(&cat, &s).unwrap();
        assert_eq!(replayed.state, s.state);
        assert_eq!(replayed.ctx, s.ctx);
        assert_eq!(replayed.completed_stages.len(), 2);
        assert_eq!(replayed.last_recommendations, s.last_recommendations);
    }

    #[test]
    fn selecting_leaf_pattern_finishes() {
        let cat = catalog();
        let mut s = Session::start(&cat, "", "root").unwrap();
        s.answer(&cat, "a", "y").unwrap();
        s.answer(&cat, "b", "y").unwrap();
        s.next_question(&cat).unwrap();
        s.recommendations(&cat).unwrap();
        s.select_pattern(&cat, "p1").unwrap();
        assert_eq!(s.state, SessionState::Done);
        assert_eq!(s.stage, Stage::SpStage);
    }

    #[test]
    fn retracted_inherited_answer_is_not_replayed() {
        let cat = catalog();
        let mut s = Session::start(&cat, "", "root").unwrap();
        s.answer(&cat, "a", "y").unwrap();
        s.answer(&cat, "b", "y").unwrap();
        s.next_question(&cat).unwrap();
        s.recommendations(&cat).unwrap();
        s.select_pattern(&cat, "p2").unwrap();
        s.retract(&cat, "b").unwrap();
        s.answer(&cat, "d", "v").unwrap();
        let r = Session::replay(&cat, &s).unwrap();
        assert_eq!(r.ctx, s.ctx);
        assert_eq!(r.answer_log.len(), 1);
    }

    #[test]
    fn transition_table() {
        use SessionState::*;
        assert!(Eliciting.can_transition_to(Recommending));
        assert!(!Recommending.can_transition_to(Eliciting));
        assert!(!Conflicted.can_transition_to(Recommending));
        assert!(!Done.can_transition_to(Eliciting));
    }
}
