//! `.ctx` files: one `property = value` assignment per line.

use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, DiagnosticKind, ParseError, SourceSpan};
use crate::model::{ContextAssignment, KnowledgeBase, PropertyKind};

/// Parses a context file. When `kb` is given, every property must be one of
/// its context properties and every value must lie in the property's domain.
pub fn parse_context(
    text: &str,
    file: &str,
    kb: Option<&KnowledgeBase>,
) -> Result<ContextAssignment, ParseError> {
    let span = |line: usize, column: usize, length: usize| SourceSpan {
        file: file.to_string(),
        line,
        column,
        length,
    };
    let lines = lex(text).map_err(|e| {
        ParseError::single(Diagnostic {
            kind: DiagnosticKind::Syntax,
            message: e.message,
            span: span(e.line, e.column, e.length),
            expected: Vec::new(),
        })
    })?;

    let mut ctx = ContextAssignment::new();
    let mut errors = Vec::new();
    for line in &lines {
        let toks = &line.tokens;
        let (property, value) = match toks.as_slice() {
            [Token {
                tok: Tok::Ident(p), ..
            }, Token { tok: Tok::Eq, .. }, Token {
                tok: Tok::Ident(v), ..
            }] => (p, v),
            _ => {
                let (column, length, expected) = match toks.as_slice() {
                    [Token {
                        tok: Tok::Ident(_), ..
                    }, Token { tok: Tok::Eq, .. }, rest @ ..] => {
                        match rest.get(1).or(rest.first()) {
                            Some(t) if rest.len() > 1 => (t.column, t.length, "end of line"),
                            Some(t) => (t.column, t.length, "value"),
                            None => (line.width + 1, 0, "value"),
                        }
                    }
                    [Token {
                        tok: Tok::Ident(_), ..
                    }, t, ..] => (t.column, t.length, "`=`"),
                    [Token {
                        tok: Tok::Ident(_), ..
                    }] => (line.width + 1, 0, "`=`"),
                    [t, ..] => (t.column, t.length, "property"),
                    [] => unreachable!("lexer drops empty lines"),
                };
                return Err(ParseError::single(Diagnostic {
                    kind: DiagnosticKind::Syntax,
                    message: "expected `property = value`".into(),
                    span: span(line.number, column, length),
                    expected: vec![expected.to_string()],
                }));
            }
        };
        let prop_span = span(line.number, toks[0].column, toks[0].length);
        let value_span = span(line.number, toks[2].column, toks[2].length);
        if ctx.contains(property) {
            errors.push(semantic(
                prop_span,
                format!("`{property}` assigned more than once"),
            ));
            continue;
        }
        if let Some(kb) = kb {
            match kb.property(property) {
                Some(decl) if decl.kind == PropertyKind::Context => {
                    if !decl.admits(value) {
                        errors.push(semantic(
                            value_span,
                            format!(
                                "value `{value}` is not in the domain of `{property}` ({})",
                                decl.domain.join(", ")
                            ),
                        ));
                        continue;
                    }
                }
                Some(_) => {
                    errors.push(semantic(
                        prop_span,
                        format!("`{property}` is a pattern property, not a context property"),
                    ));
                    continue;
                }
                None => {
                    errors.push(semantic(
                        prop_span,
                        format!(
                            "unknown context property `{property}` in knowledge base `{}`",
                            kb.id
                        ),
                    ));
                    continue;
                }
            }
        }
        ctx.set(property.clone(), value.clone());
    }
    if errors.is_empty() {
        Ok(ctx)
    } else {
        Err(ParseError::new(errors))
    }
}

fn semantic(span: SourceSpan, message: String) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Semantic,
        message,
        span,
        expected: Vec::new(),
    }
}

/// Renders a context as a `.ctx` document in assignment order.
pub fn serialize_context(ctx: &ContextAssignment) -> String {
    let mut out = String::new();
    for (p, v) in ctx.iter() {
        out.push_str(p);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}
