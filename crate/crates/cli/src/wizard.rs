//! Interactive question-and-answer front end over a [`Session`].
//!
//! Input is line based. At a question, type an option number or value;
//! `?text` asks the assistant; `back` retracts the most recent answer given
//! in this stage. After a conflict, name an answer to retract. At the
//! recommendation prompt, type a rank or pattern id. End of input stops the
//! wizard and leaves the session where it is.

use std::io::{self, BufRead, Write};

use patternwise_core::assistant::AssistantConfig;
use patternwise_core::session::{Question, Session, SessionState, Stage};
use patternwise_core::solver::ConflictDiagnosis;
use patternwise_core::KbCatalog;

pub struct Wizard<'a, R, W> {
    catalog: &'a KbCatalog,
    assistant: &'a AssistantConfig,
    input: R,
    out: W,
}

fn print_conflict(out: &mut impl Write, d: &ConflictDiagnosis) -> io::Result<()> {
    writeln!(out, "No pattern is feasible with these answers.")?;
    if d.conflict.is_empty() {
        writeln!(
            out,
            "The knowledge base excludes every pattern regardless of the answers:"
        )?;
    } else {
        writeln!(out, "Conflicting answers:")?;
        for (i, pair) in d.conflict.iter().enumerate() {
            writeln!(out, "  {}) {} = {}", i + 1, pair.property, pair.value)?;
        }
    }
    for note in &d.messages {
        if note.message.is_empty() {
            writeln!(out, "  filter {}", note.filter)?;
        } else {
            writeln!(out, "  {}: {}", note.filter, note.message)?;
        }
    }
    Ok(())
}

impl<'a, R: BufRead, W: Write> Wizard<'a, R, W> {
    pub fn new(catalog: &'a KbCatalog, assistant: &'a AssistantConfig, input: R, out: W) -> Self {
        Wizard {
            catalog,
            assistant,
            input,
            out,
        }
    }

    fn read_line(&mut self) -> io::Result<Option<String>> {
        write!(self.out, "> ")?;
        self.out.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            writeln!(self.out)?;
            return Ok(None);
        }
        Ok(Some(line.trim().to_string()))
    }

    fn ask_assistant(&mut self, session: &mut Session, question: &str) -> io::Result<()> {
        match session.ask(self.catalog, self.assistant, question) {
            Ok(ex) => {
                writeln!(self.out, "assistant: {}", ex.answer)?;
                if !ex.cited_elements.is_empty() {
                    writeln!(self.out, "  (from: {})", ex.cited_elements.join(", "))?;
                }
            }
            Err(e) => writeln!(self.out, "assistant unavailable: {e}")?,
        }
        Ok(())
    }

    fn show_question(&mut self, q: &Question, answered: usize, total: usize) -> io::Result<()> {
        writeln!(self.out)?;
        writeln!(
            self.out,
            "[{}/{}] {} ({})",
            answered + 1,
            total,
            q.question_text,
            q.property_id
        )?;
        for (i, option) in q.options.iter().enumerate() {
            let n = q.impact_preview.get(option).copied().unwrap_or(0);
            let mut line = format!("  {}) {option}  -> {n} feasible", i + 1);
            if let Some(ids) = q.invalid_options.get(option) {
                line.push_str(&format!(" (violates {})", ids.join(", ")));
            }
            writeln!(self.out, "{line}")?;
        }
        Ok(())
    }

    /// Runs until the session is done or the input ends. Returns the session
    /// in whatever state it reached.
    pub fn run(&mut self, mut session: Session) -> io::Result<Session> {
        writeln!(
            self.out,
            "Answer with an option number or value. `?question` asks the assistant, `back` retracts the last answer."
        )?;
        loop {
            match session.state {
                SessionState::Eliciting => {
                    let total = session
                        .active_kb(self.catalog)
                        .map(|kb| kb.context_properties().count())
                        .unwrap_or(0);
                    let q = match session.next_question(self.catalog) {
                        Ok(Some(q)) => q,
                        Ok(None) => continue,
                        Err(e) => {
                            writeln!(self.out, "error: {e}")?;
                            return Ok(session);
                        }
                    };
                    self.show_question(&q, session.ctx.len(), total)?;
                    let Some(line) = self.read_line()? else {
                        return Ok(session);
                    };
                    self.handle_answer(&mut session, &q, &line)?;
                }
                SessionState::Conflicted => {
                    let conflict = session
                        .conflict
                        .clone()
                        .expect("conflicted sessions carry a diagnosis");
                    print_conflict(&mut self.out, &conflict)?;
                    writeln!(self.out, "Which answer do you want to retract?")?;
                    let Some(line) = self.read_line()? else {
                        return Ok(session);
                    };
                    if let Some(question) = line.strip_prefix('?') {
                        self.ask_assistant(&mut session, question.trim())?;
                        continue;
                    }
                    let property = match line.parse::<usize>() {
                        Ok(n) if n >= 1 && n <= conflict.conflict.len() => {
                            conflict.conflict[n - 1].property.clone()
                        }
                        _ => line,
                    };
                    match session.retract(self.catalog, &property) {
                        Ok(n) => writeln!(self.out, "retracted {property}; {n} patterns feasible")?,
                        Err(e) => writeln!(self.out, "error: {e}")?,
                    }
                }
                SessionState::Recommending | SessionState::AwaitingSelection => {
                    let first = session.state == SessionState::Recommending;
                    let explanation = match session.recommendations(self.catalog) {
                        Ok(e) => e,
                        Err(e) => {
                            writeln!(self.out, "error: {e}")?;
                            return Ok(session);
                        }
                    };
                    if first {
                        let level = match session.stage {
                            Stage::SpStage => "security patterns",
                            Stage::SdpStage => "security design patterns",
                        };
                        writeln!(self.out)?;
                        writeln!(self.out, "Recommended {level} for `{}`:", explanation.kb)?;
                        write!(self.out, "{}", explanation.render())?;
                    }
                    writeln!(self.out, "Select a pattern (rank or id):")?;
                    let Some(line) = self.read_line()? else {
                        return Ok(session);
                    };
                    let ids = explanation.ranked_ids();
                    let pattern = match line.parse::<usize>() {
                        Ok(n) if n >= 1 && n <= ids.len() => ids[n - 1].to_string(),
                        _ => line,
                    };
                    match session.select_pattern(self.catalog, &pattern) {
                        Ok(()) => {
                            if session.state == SessionState::Eliciting {
                                writeln!(
                                    self.out,
                                    "Selected {pattern}; refining with `{}`.",
                                    session.active_kb
                                )?;
                                let inherited: Vec<String> = session
                                    .answer_log
                                    .iter()
                                    .filter(|a| a.inherited)
                                    .map(|a| format!("{} = {}", a.property, a.value))
                                    .collect();
                                if !inherited.is_empty() {
                                    writeln!(self.out, "Carried over: {}", inherited.join(", "))?;
                                }
                            }
                        }
                        Err(e) => writeln!(self.out, "error: {e}")?,
                    }
                }
                SessionState::Done => {
                    writeln!(self.out)?;
                    if let Some(sp) = &session.selected_sp {
                        writeln!(self.out, "Selected security pattern: {sp}")?;
                    }
                    if let Some(sdp) = &session.selected_sdp {
                        writeln!(self.out, "Selected security design pattern: {sdp}")?;
                    }
                    return Ok(session);
                }
            }
        }
    }

    fn handle_answer(&mut self, session: &mut Session, q: &Question, line: &str) -> io::Result<()> {
        if let Some(question) = line.strip_prefix('?') {
            return self.ask_assistant(session, question.trim());
        }
        if line.eq_ignore_ascii_case("back") {
            let last = session
                .answer_log
                .iter()
                .rev()
                .find(|a| !a.inherited)
                .or(session.answer_log.last())
                .map(|a| a.property.clone());
            match last {
                Some(p) => match session.retract(self.catalog, &p) {
                    Ok(_) => writeln!(self.out, "retracted {p}")?,
                    Err(e) => writeln!(self.out, "error: {e}")?,
                },
                None => writeln!(self.out, "nothing to retract")?,
            }
            return Ok(());
        }
        let value = match line.parse::<usize>() {
            Ok(n) if n >= 1 && n <= q.options.len() => q.options[n - 1].clone(),
            _ => line.to_string(),
        };
        match session.answer(self.catalog, &q.property_id, &value) {
            Ok(out) if out.conflict.is_none() => {
                writeln!(self.out, "{} patterns feasible", out.feasible_count)?;
            }
            Ok(_) => {}
            Err(e) => writeln!(self.out, "error: {e}")?,
        }
        Ok(())
    }
}
