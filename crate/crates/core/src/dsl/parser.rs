use std::collections::HashMap;

use indexmap::IndexMap;

use super::lexer::{lex, Line, Tok, Token};
use super::{Diagnostic, DiagnosticKind, ParseError, SourceSpan};
use crate::model::{
    validate, Condition, ContextualConstraint, Criterion, FilterCondition, KbLevel, KnowledgeBase,
    Location, PatternDefinition, Polarity, PropertyDecl, PropertyKind, WeightRule,
};

const DEFAULT_FILE: &str = "<input>";

/// Parses a `.kb` document. The result always passes [`validate`].
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, ParseError> {
    parse_kb_named(text, DEFAULT_FILE)
}

/// Like [`parse_kb`], with `file` used in diagnostics.
pub fn parse_kb_named(text: &str, file: &str) -> Result<KnowledgeBase, ParseError> {
    let lines = lex(text).map_err(|e| {
        ParseError::single(Diagnostic {
            kind: DiagnosticKind::Syntax,
            message: e.message,
            span: SourceSpan {
                file: file.to_string(),
                line: e.line,
                column: e.column,
                length: e.length,
            },
            expected: Vec::new(),
        })
    })?;
    let mut parser = Parser {
        file,
        spans: HashMap::new(),
        semantic: Vec::new(),
    };
    let doc = parser.document(&lines)?;
    parser.assemble(doc)
}

type PResult<T> = Result<T, ParseError>;

struct Parser<'f> {
    file: &'f str,
    spans: HashMap<Location, SourceSpan>,
    semantic: Vec<Diagnostic>,
}

#[derive(Default)]
struct Document {
    header: Option<(String, SourceSpan)>,
    level: Option<KbLevel>,
    description: Option<String>,
    properties: Vec<PropertyDecl>,
    patterns: Vec<PatternDefinition>,
    constraints: Vec<ContextualConstraint>,
    filters: Vec<FilterCondition>,
    criteria: Vec<Criterion>,
    base_weights: Option<IndexMap<String, f64>>,
    weight_rules: Vec<WeightRule>,
}

/// Token cursor over one line.
struct Cursor<'l> {
    line: &'l Line,
    pos: usize,
}

impl<'l> Cursor<'l> {
    fn new(line: &'l Line) -> Self {
        Self { line, pos: 0 }
    }

    fn peek(&self) -> Option<&'l Token> {
        self.line.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'l Token> {
        self.line.tokens.get(self.pos + offset)
    }

    fn bump(&mut self) -> Option<&'l Token> {
        let t = self.line.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.line.tokens.len()
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(kw))
    }
}

impl Parser<'_> {
    fn span(&self, line: &Line, column: usize, length: usize) -> SourceSpan {
        SourceSpan {
            file: self.file.to_string(),
            line: line.number,
            column,
            length,
        }
    }

    fn token_span(&self, line: &Line, token: &Token) -> SourceSpan {
        self.span(line, token.column, token.length)
    }

    fn line_span(&self, line: &Line) -> SourceSpan {
        let first = &line.tokens[0];
        let last = line.tokens.last().unwrap_or(first);
        self.span(line, first.column, last.column + last.length - first.column)
    }

    /// Span for "something was expected here": the next token, or the end of
    /// the line.
    fn here(&self, cur: &Cursor<'_>) -> SourceSpan {
        match cur.peek() {
            Some(t) => self.token_span(cur.line, t),
            None => self.span(cur.line, cur.line.width + 1, 0),
        }
    }

    fn syntax(
        &self,
        cur: &Cursor<'_>,
        message: impl Into<String>,
        expected: &[&str],
    ) -> ParseError {
        ParseError::single(Diagnostic {
            kind: DiagnosticKind::Syntax,
            message: message.into(),
            span: self.here(cur),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn unexpected(&self, cur: &Cursor<'_>, expected: &[&str]) -> ParseError {
        let message = match cur.peek() {
            Some(t) => format!("unexpected {}", t.tok),
            None => "unexpected end of line".to_string(),
        };
        self.syntax(cur, message, expected)
    }

    fn semantic(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.semantic.push(Diagnostic {
            kind: DiagnosticKind::Semantic,
            message: message.into(),
            span,
            expected: Vec::new(),
        });
    }

    fn ident(&self, cur: &mut Cursor<'_>, what: &str) -> PResult<(String, SourceSpan)> {
        match cur.peek() {
            Some(
                t @ Token {
                    tok: Tok::Ident(s), ..
                },
            ) => {
                cur.bump();
                Ok((s.clone(), self.token_span(cur.line, t)))
            }
            _ => Err(self.unexpected(cur, &[what])),
        }
    }

    fn string(&self, cur: &mut Cursor<'_>) -> PResult<String> {
        match cur.peek() {
            Some(Token {
                tok: Tok::Str(s), ..
            }) => {
                cur.bump();
                Ok(s.clone())
            }
            _ => Err(self.unexpected(cur, &["string"])),
        }
    }

    fn number(&self, cur: &mut Cursor<'_>) -> PResult<f64> {
        match cur.peek() {
            Some(Token {
                tok: Tok::Number(n),
                ..
            }) => {
                cur.bump();
                Ok(*n)
            }
            _ => Err(self.unexpected(cur, &["number"])),
        }
    }

    fn expect(&self, cur: &mut Cursor<'_>, tok: Tok, what: &str) -> PResult<()> {
        match cur.peek() {
            Some(t) if t.tok == tok => {
                cur.bump();
                Ok(())
            }
            _ => Err(self.unexpected(cur, &[what])),
        }
    }

    fn end(&self, cur: &Cursor<'_>) -> PResult<()> {
        if cur.at_end() {
            Ok(())
        } else {
            Err(self.unexpected(cur, &["end of line"]))
        }
    }

    fn document(&mut self, lines: &[Line]) -> PResult<Document> {
        let mut doc = Document::default();
        let mut i = 0;
        while i < lines.len() {
            let header = &lines[i];
            let mut end = i + 1;
            while end < lines.len() && lines[end].indented {
                end += 1;
            }
            if header.indented {
                let cur = Cursor::new(header);
                return Err(self.syntax(&cur, "attribute outside of a block", &["block keyword"]));
            }
            self.block(header, &lines[i + 1..end], &mut doc)?;
            i = end;
        }
        Ok(doc)
    }

    fn block(&mut self, header: &Line, body: &[Line], doc: &mut Document) -> PResult<()> {
        let mut cur = Cursor::new(header);
        let expected = [
            "control",
            "property",
            "pattern",
            "constraint",
            "filter",
            "criterion",
            "weights",
        ];
        let (keyword, _) = self.ident(&mut cur, "block keyword")?;
        match keyword.as_str() {
            "control" => self.control_block(cur, body, doc),
            "property" => self.property_block(cur, body, doc),
            "pattern" => self.pattern_block(cur, body, doc),
            "constraint" => self.constraint_block(cur, body, doc),
            "filter" => self.filter_block(cur, body, doc),
            "criterion" => self.criterion_block(cur, body, doc),
            "weights" => self.weights_block(cur, body, doc),
            _ => {
                cur.pos = 0;
                Err(self.syntax(&cur, format!("unknown block `{keyword}`"), &expected))
            }
        }
    }

    fn duplicate_attr(&self, line: &Line, name: &str) -> ParseError {
        let cur = Cursor::new(line);
        self.syntax(&cur, format!("duplicate `{name}` attribute"), &[])
    }

    fn control_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "knowledge base id")?;
        self.end(&cur)?;
        if let Some((first, _)) = &doc.header {
            self.semantic(
                span.clone(),
                format!("second knowledge base declaration `{id}` (already declared `{first}`)"),
            );
            return Ok(());
        }
        self.spans.insert(Location::Kb, span.clone());
        self.spans.insert(Location::BaseWeights, span.clone());
        doc.header = Some((id, span));
        for line in body {
            let mut cur = Cursor::new(line);
            let (attr, _) = self.ident(&mut cur, "attribute")?;
            match attr.as_str() {
                "level" => {
                    if doc.level.is_some() {
                        return Err(self.duplicate_attr(line, "level"));
                    }
                    let level = match cur.peek() {
                        Some(Token {
                            tok: Tok::Ident(s), ..
                        }) if s == "control" => KbLevel::Control,
                        Some(Token {
                            tok: Tok::Ident(s), ..
                        }) if s == "pattern" => KbLevel::Pattern,
                        _ => return Err(self.unexpected(&cur, &["control", "pattern"])),
                    };
                    cur.bump();
                    doc.level = Some(level);
                }
                "description" => {
                    if doc.description.is_some() {
                        return Err(self.duplicate_attr(line, "description"));
                    }
                    doc.description = Some(self.string(&mut cur)?);
                }
                _ => {
                    cur.pos = 0;
                    return Err(self.unexpected(&cur, &["level", "description"]));
                }
            }
            self.end(&cur)?;
        }
        Ok(())
    }

    fn property_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "property id")?;
        let kind = match cur.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) if s == "context" => PropertyKind::Context,
            Some(Token {
                tok: Tok::Ident(s), ..
            }) if s == "pattern" => PropertyKind::Pattern,
            _ => return Err(self.unexpected(&cur, &["context", "pattern"])),
        };
        cur.bump();
        self.end(&cur)?;
        self.spans
            .insert(Location::Property { id: id.clone() }, span.clone());

        let mut domain = None;
        let mut question = None;
        let mut description = None;
        for line in body {
            let mut cur = Cursor::new(line);
            let (attr, _) = self.ident(&mut cur, "attribute")?;
            match attr.as_str() {
                "values" => {
                    if domain.is_some() {
                        return Err(self.duplicate_attr(line, "values"));
                    }
                    let mut values = vec![self.ident(&mut cur, "value")?.0];
                    while matches!(
                        cur.peek(),
                        Some(Token {
                            tok: Tok::Comma,
                            ..
                        })
                    ) {
                        cur.bump();
                        values.push(self.ident(&mut cur, "value")?.0);
                    }
                    domain = Some(values);
                }
                "question" => {
                    if question.is_some() {
                        return Err(self.duplicate_attr(line, "question"));
                    }
                    question = Some(self.string(&mut cur)?);
                }
                "description" => {
                    if description.is_some() {
                        return Err(self.duplicate_attr(line, "description"));
                    }
                    description = Some(self.string(&mut cur)?);
                }
                _ => {
                    cur.pos = 0;
                    return Err(self.unexpected(&cur, &["values", "question", "description"]));
                }
            }
            self.end(&cur)?;
        }
        let Some(domain) = domain else {
            self.semantic(span, format!("property `{id}` declares no values"));
            return Ok(());
        };
        doc.properties.push(PropertyDecl {
            id,
            kind,
            domain,
            question_text: question,
            description: description.unwrap_or_default(),
        });
        Ok(())
    }

    fn pattern_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "pattern id")?;
        self.end(&cur)?;
        self.spans
            .insert(Location::Pattern { id: id.clone() }, span);

        let mut values = IndexMap::new();
        let mut description = None;
        let mut child = None;
        for line in body {
            let mut cur = Cursor::new(line);
            let is_assignment = matches!(cur.peek_at(1), Some(Token { tok: Tok::Eq, .. }));
            let (attr, attr_span) = self.ident(&mut cur, "property or attribute")?;
            if is_assignment {
                cur.bump();
                let (value, _) = self.ident(&mut cur, "value")?;
                self.end(&cur)?;
                let loc = Location::PatternValue {
                    pattern: id.clone(),
                    property: attr.clone(),
                };
                if values.contains_key(&attr) {
                    self.semantic(
                        attr_span,
                        format!("pattern `{id}` assigns `{attr}` more than once"),
                    );
                    continue;
                }
                self.spans.insert(loc, self.line_span(line));
                values.insert(attr, value);
                continue;
            }
            match attr.as_str() {
                "description" => {
                    if description.is_some() {
                        return Err(self.duplicate_attr(line, "description"));
                    }
                    description = Some(self.string(&mut cur)?);
                }
                "child" => {
                    if child.is_some() {
                        return Err(self.duplicate_attr(line, "child"));
                    }
                    child = Some(self.string(&mut cur)?);
                }
                _ => return Err(self.unexpected(&cur, &["`=`"])),
            }
            self.end(&cur)?;
        }
        doc.patterns.push(PatternDefinition {
            id,
            // Fixed up once the knowledge-base level is known.
            level: crate::model::PatternLevel::SecurityPattern,
            values,
            description: description.unwrap_or_default(),
            child_kb: child,
        });
        Ok(())
    }

    fn message_attr(
        &self,
        cur: &mut Cursor<'_>,
        slot: &mut Option<String>,
        line: &Line,
    ) -> PResult<()> {
        if slot.is_some() {
            return Err(self.duplicate_attr(line, "message"));
        }
        *slot = Some(self.string(cur)?);
        Ok(())
    }

    fn constraint_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "constraint id")?;
        self.end(&cur)?;
        self.spans
            .insert(Location::Constraint { id: id.clone() }, span.clone());
        let mut expr = None;
        let mut message = None;
        for line in body {
            let mut cur = Cursor::new(line);
            let (attr, _) = self.ident(&mut cur, "attribute")?;
            match attr.as_str() {
                "require" => {
                    if expr.is_some() {
                        return Err(self.duplicate_attr(line, "require"));
                    }
                    expr = Some(self.condition(&mut cur)?);
                }
                "message" => self.message_attr(&mut cur, &mut message, line)?,
                _ => {
                    cur.pos = 0;
                    return Err(self.unexpected(&cur, &["require", "message"]));
                }
            }
            self.end(&cur)?;
        }
        let Some(expr) = expr else {
            self.semantic(span, format!("constraint `{id}` has no `require` clause"));
            return Ok(());
        };
        doc.constraints.push(ContextualConstraint {
            id,
            expr,
            message: message.unwrap_or_default(),
        });
        Ok(())
    }

    fn filter_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "filter id")?;
        self.end(&cur)?;
        self.spans
            .insert(Location::Filter { id: id.clone() }, span.clone());
        let mut guard = None;
        let mut requirement = None;
        let mut message = None;
        for line in body {
            let mut cur = Cursor::new(line);
            let (attr, _) = self.ident(&mut cur, "attribute")?;
            match attr.as_str() {
                "when" => {
                    if guard.is_some() {
                        return Err(self.duplicate_attr(line, "when"));
                    }
                    guard = Some(self.condition(&mut cur)?);
                }
                "then" => {
                    if requirement.is_some() {
                        return Err(self.duplicate_attr(line, "then"));
                    }
                    requirement = Some(self.condition(&mut cur)?);
                }
                "message" => self.message_attr(&mut cur, &mut message, line)?,
                _ => {
                    cur.pos = 0;
                    return Err(self.unexpected(&cur, &["when", "then", "message"]));
                }
            }
            self.end(&cur)?;
        }
        match (guard, requirement) {
            (Some(guard), Some(requirement)) => {
                doc.filters.push(FilterCondition {
                    id,
                    guard,
                    requirement,
                    message: message.unwrap_or_default(),
                });
            }
            (None, _) => self.semantic(span, format!("filter `{id}` has no `when` clause")),
            (_, None) => self.semantic(span, format!("filter `{id}` has no `then` clause")),
        }
        Ok(())
    }

    fn criterion_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let (id, span) = self.ident(&mut cur, "criterion id")?;
        self.end(&cur)?;
        self.spans
            .insert(Location::Criterion { id: id.clone() }, span.clone());
        let mut source = None;
        for line in body {
            let mut cur = Cursor::new(line);
            let (attr, _) = self.ident(&mut cur, "attribute")?;
            if attr != "from" {
                cur.pos = 0;
                return Err(self.unexpected(&cur, &["from"]));
            }
            if source.is_some() {
                return Err(self.duplicate_attr(line, "from"));
            }
            let (property, _) = self.ident(&mut cur, "pattern property")?;
            let polarity = match cur.peek() {
                Some(Token {
                    tok: Tok::Ident(s), ..
                }) if s == "direct" => Polarity::Direct,
                Some(Token {
                    tok: Tok::Ident(s), ..
                }) if s == "inverse" => Polarity::Inverse,
                _ => return Err(self.unexpected(&cur, &["direct", "inverse"])),
            };
            cur.bump();
            self.end(&cur)?;
            source = Some((property, polarity));
        }
        let Some((source_property, polarity)) = source else {
            self.semantic(span, format!("criterion `{id}` has no `from` clause"));
            return Ok(());
        };
        doc.criteria.push(Criterion {
            id,
            source_property,
            polarity,
        });
        Ok(())
    }

    fn weights_block(
        &mut self,
        mut cur: Cursor<'_>,
        body: &[Line],
        doc: &mut Document,
    ) -> PResult<()> {
        let header_span = self.line_span(cur.line);
        let rule_id = if cur.at_end() {
            None
        } else {
            Some(self.ident(&mut cur, "weight rule id")?)
        };
        self.end(&cur)?;

        let mut guard = None;
        let mut entries: IndexMap<String, f64> = IndexMap::new();
        for line in body {
            let mut cur = Cursor::new(line);
            if rule_id.is_some()
                && cur.peek_keyword("when")
                && !matches!(cur.peek_at(1), Some(Token { tok: Tok::Eq, .. }))
            {
                cur.bump();
                if guard.is_some() {
                    return Err(self.duplicate_attr(line, "when"));
                }
                guard = Some(self.condition(&mut cur)?);
                self.end(&cur)?;
                continue;
            }
            let (criterion, span) = self.ident(&mut cur, "criterion")?;
            self.expect(&mut cur, Tok::Eq, "`=`")?;
            let value = self.number(&mut cur)?;
            self.end(&cur)?;
            if entries.insert(criterion.clone(), value).is_some() {
                self.semantic(
                    span,
                    format!("weight for `{criterion}` given more than once"),
                );
            }
        }

        match rule_id {
            None => {
                if doc.base_weights.is_some() {
                    self.semantic(header_span, "base weights declared more than once");
                    return Ok(());
                }
                self.spans.insert(Location::BaseWeights, header_span);
                doc.base_weights = Some(entries);
            }
            Some((id, span)) => {
                self.spans
                    .insert(Location::WeightRule { id: id.clone() }, span.clone());
                let Some(guard) = guard else {
                    self.semantic(span, format!("weight rule `{id}` has no `when` clause"));
                    return Ok(());
                };
                doc.weight_rules.push(WeightRule {
                    id,
                    guard,
                    deltas: entries,
                });
            }
        }
        Ok(())
    }

    // condition := or
    // or        := and ("OR" and)*
    // and       := unary ("AND" unary)*
    // unary     := "NOT" unary | "(" or ")" | "true" | "false" | test
    // test      := ident ("=" | "!=") ident | ident "in" "(" ident ("," ident)* ")"
    fn condition(&self, cur: &mut Cursor<'_>) -> PResult<Condition> {
        let mut operands = vec![self.and_expr(cur)?];
        while cur.peek_keyword("or") {
            cur.bump();
            operands.push(self.and_expr(cur)?);
        }
        Ok(if operands.len() == 1 {
            operands.pop().unwrap()
        } else {
            Condition::Or { operands }
        })
    }

    fn and_expr(&self, cur: &mut Cursor<'_>) -> PResult<Condition> {
        let mut operands = vec![self.unary(cur)?];
        while cur.peek_keyword("and") {
            cur.bump();
            operands.push(self.unary(cur)?);
        }
        Ok(if operands.len() == 1 {
            operands.pop().unwrap()
        } else {
            Condition::And { operands }
        })
    }

    fn unary(&self, cur: &mut Cursor<'_>) -> PResult<Condition> {
        const EXPECTED: &[&str] = &["property", "NOT", "(", "true", "false"];
        if cur.peek_keyword("not") {
            cur.bump();
            return Ok(Condition::not(self.unary(cur)?));
        }
        if cur.peek_keyword("true") {
            cur.bump();
            return Ok(Condition::True);
        }
        if cur.peek_keyword("false") {
            cur.bump();
            return Ok(Condition::False);
        }
        match cur.peek() {
            Some(Token {
                tok: Tok::LParen, ..
            }) => {
                cur.bump();
                let inner = self.condition(cur)?;
                self.expect(cur, Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) if !["and", "or", "in"].contains(&name.to_ascii_lowercase().as_str()) => {
                cur.bump();
                let property = name.clone();
                match cur.peek() {
                    Some(Token { tok: Tok::Eq, .. }) => {
                        cur.bump();
                        let (value, _) = self.ident(cur, "value")?;
                        Ok(Condition::Eq { property, value })
                    }
                    Some(Token { tok: Tok::Ne, .. }) => {
                        cur.bump();
                        let (value, _) = self.ident(cur, "value")?;
                        Ok(Condition::Ne { property, value })
                    }
                    _ if cur.peek_keyword("in") => {
                        cur.bump();
                        self.expect(cur, Tok::LParen, "`(`")?;
                        let mut values = vec![self.ident(cur, "value")?.0];
                        while matches!(
                            cur.peek(),
                            Some(Token {
                                tok: Tok::Comma,
                                ..
                            })
                        ) {
                            cur.bump();
                            values.push(self.ident(cur, "value")?.0);
                        }
                        self.expect(cur, Tok::RParen, "`)`")?;
                        Ok(Condition::In { property, values })
                    }
                    _ => Err(self.unexpected(cur, &["`=`", "`!=`", "in"])),
                }
            }
            _ => Err(self.unexpected(cur, EXPECTED)),
        }
    }

    fn assemble(mut self, doc: Document) -> PResult<KnowledgeBase> {
        let Some((id, header_span)) = doc.header else {
            let mut diagnostics = vec![Diagnostic {
                kind: DiagnosticKind::Semantic,
                message: "no knowledge base declared".into(),
                span: SourceSpan {
                    file: self.file.to_string(),
                    line: 1,
                    column: 1,
                    length: 0,
                },
                expected: vec!["control".into()],
            }];
            diagnostics.append(&mut self.semantic);
            return Err(ParseError::new(diagnostics));
        };
        let level = doc.level.unwrap_or(KbLevel::Control);
        let mut kb = KnowledgeBase::new(id, level);
        kb.description = doc.description.unwrap_or_default();
        kb.property_decls = doc.properties;
        kb.patterns = doc.patterns;
        for p in &mut kb.patterns {
            p.level = level.pattern_level();
        }
        kb.contextual_constraints = doc.constraints;
        kb.filter_conditions = doc.filters;
        kb.criteria = doc.criteria;
        kb.weight_rules = doc.weight_rules;
        kb.base_weights = doc.base_weights.unwrap_or_default();

        let report = validate(&kb);
        for v in report.violations {
            let span = self
                .spans
                .get(&v.location)
                .or_else(|| match &v.location {
                    Location::PatternValue { pattern, .. } => self.spans.get(&Location::Pattern {
                        id: pattern.clone(),
                    }),
                    _ => None,
                })
                .cloned()
                .unwrap_or_else(|| header_span.clone());
            self.semantic(span, v.message);
        }
        if self.semantic.is_empty() {
            Ok(kb)
        } else {
            self.semantic.sort_by_key(|d| (d.span.line, d.span.column));
            Err(ParseError::new(self.semantic))
        }
    }
}
