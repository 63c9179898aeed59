use std::fmt::Write;

use crate::model::{validate, KbLevel, KnowledgeBase, Polarity, PropertyKind};
use crate::Error;

/// Renders a valid knowledge base in canonical `.kb` form (LF line endings).
pub fn serialize_kb(kb: &KnowledgeBase) -> Result<String, Error> {
    let report = validate(kb);
    if !report.is_empty() {
        return Err(Error::InvalidKb(report));
    }
    let mut out = String::new();
    // Writing to a String cannot fail.
    let _ = write_kb(kb, &mut out);
    Ok(out)
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            '\r' => q.push_str("\\r"),
            other => q.push(other),
        }
    }
    q.push('"');
    q
}

fn write_kb(kb: &KnowledgeBase, out: &mut String) -> std::fmt::Result {
    writeln!(out, "control {}", kb.id)?;
    let level = match kb.level {
        KbLevel::Control => "control",
        KbLevel::Pattern => "pattern",
    };
    writeln!(out, "  level {level}")?;
    if !kb.description.is_empty() {
        writeln!(out, "  description {}", quote(&kb.description))?;
    }

    for p in &kb.property_decls {
        let kind = match p.kind {
            PropertyKind::Context => "context",
            PropertyKind::Pattern => "pattern",
        };
        writeln!(out, "\nproperty {} {kind}", p.id)?;
        writeln!(out, "  values {}", p.domain.join(", "))?;
        if let Some(q) = &p.question_text {
            writeln!(out, "  question {}", quote(q))?;
        }
        if !p.description.is_empty() {
            writeln!(out, "  description {}", quote(&p.description))?;
        }
    }

    for p in &kb.patterns {
        writeln!(out, "\npattern {}", p.id)?;
        for (k, v) in &p.values {
            writeln!(out, "  {k} = {v}")?;
        }
        if let Some(child) = &p.child_kb {
            writeln!(out, "  child {}", quote(child))?;
        }
        if !p.description.is_empty() {
            writeln!(out, "  description {}", quote(&p.description))?;
        }
    }

    for c in &kb.contextual_constraints {
        writeln!(out, "\nconstraint {}", c.id)?;
        writeln!(out, "  require {}", c.expr)?;
        if !c.message.is_empty() {
            writeln!(out, "  message {}", quote(&c.message))?;
        }
    }

    for f in &kb.filter_conditions {
        writeln!(out, "\nfilter {}", f.id)?;
        writeln!(out, "  when {}", f.guard)?;
        writeln!(out, "  then {}", f.requirement)?;
        if !f.message.is_empty() {
            writeln!(out, "  message {}", quote(&f.message))?;
        }
    }

    for c in &kb.criteria {
        let polarity = match c.polarity {
            Polarity::Direct => "direct",
            Polarity::Inverse => "inverse",
        };
        writeln!(out, "\ncriterion {}", c.id)?;
        writeln!(out, "  from {} {polarity}", c.source_property)?;
    }

    if !kb.base_weights.is_empty() {
        writeln!(out, "\nweights")?;
        for (k, w) in &kb.base_weights {
            writeln!(out, "  {k} = {w:?}")?;
        }
    }

    for r in &kb.weight_rules {
        writeln!(out, "\nweights {}", r.id)?;
        writeln!(out, "  when {}", r.guard)?;
        for (k, d) in &r.deltas {
            writeln!(out, "  {k} = {d:?}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_kb;
    use crate::model::{PatternDefinition, PatternLevel, PropertyDecl};

    #[test]
    fn minimal_kb_has_one_pattern_block() {
        let mut kb = KnowledgeBase::new("tiny", KbLevel::Control);
        kb.property_decls.push(PropertyDecl {
            id: "size".into(),
            kind: PropertyKind::Pattern,
            domain: vec!["small".into(), "large".into()],
            question_text: None,
            description: String::new(),
        });
        kb.patterns.push(PatternDefinition {
            id: "only".into(),
            level: PatternLevel::SecurityPattern,
            values: [("size".to_string(), "small".to_string())]
                .into_iter()
                .collect(),
            description: "one \"quoted\"\nline\\".into(),
            child_kb: None,
        });
        let text = serialize_kb(&kb).unwrap();
        assert_eq!(text.matches("\npattern ").count(), 1);
        assert!(!text.contains('\r'));
        assert_eq!(parse_kb(&text).unwrap(), kb);
    }

    #[test]
    fn invalid_kb_is_rejected() {
        let kb = KnowledgeBase::new("2bad", KbLevel::Control);
        assert!(matches!(serialize_kb(&kb), Err(Error::InvalidKb(_))));
    }
}
