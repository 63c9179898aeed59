//! Per-line tokenizer for the `.kb` and `.ctx` formats.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Number(f64),
    Eq,
    Ne,
    Comma,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(_) => f.write_str("string"),
            Tok::Number(n) => write!(f, "number `{n}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
        }
    }
}

/// A token with its 1-based starting column and width in characters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub column: usize,
    pub length: usize,
}

/// A logical source line with comments stripped and tokens resolved.
#[derive(Debug, Clone)]
pub(crate) struct Line {
    pub number: usize,
    pub indented: bool,
    pub tokens: Vec<Token>,
    /// Width of the raw line in characters, used for end-of-line spans.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub line: usize,
    pub column: usize,
    pub length: usize,
    pub message: String,
}

/// Splits a document into token lines, dropping blank and comment-only lines.
/// Accepts LF and CRLF endings.
pub(crate) fn lex(text: &str) -> Result<Vec<Line>, LexError> {
    let mut out = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let number = idx + 1;
        let tokens = lex_line(raw, number)?;
        if tokens.is_empty() {
            continue;
        }
        let indented = raw.starts_with([' ', '\t']);
        out.push(Line {
            number,
            indented,
            tokens,
            width: raw.chars().count(),
        });
    }
    Ok(out)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

fn lex_line(raw: &str, line: usize) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |column: usize, length: usize, message: String| LexError {
        line,
        column,
        length,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '#' => break,
            '=' => {
                i += 1;
                tokens.push(Token {
                    tok: Tok::Eq,
                    column: start + 1,
                    length: 1,
                });
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 2;
                    tokens.push(Token {
                        tok: Tok::Ne,
                        column: start + 1,
                        length: 2,
                    });
                } else {
                    return Err(err(start + 1, 1, "expected `!=`".into()));
                }
            }
            ',' | '(' | ')' => {
                i += 1;
                let tok = match c {
                    ',' => Tok::Comma,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                tokens.push(Token {
                    tok,
                    column: start + 1,
                    length: 1,
                });
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '"' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        '\\' => {
                            let escaped = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                _ => return Err(err(i + 1, 1, "invalid escape sequence".into())),
                            };
                            s.push(escaped);
                            i += 2;
                        }
                        other => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                if !closed {
                    return Err(err(
                        start + 1,
                        chars.len() - start,
                        "unterminated string".into(),
                    ));
                }
                tokens.push(Token {
                    tok: Tok::Str(s),
                    column: start + 1,
                    length: i - start,
                });
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '.'
                        || ((chars[i] == '-' || chars[i] == '+')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(start + 1, i - start, format!("invalid number `{text}`")))?;
                tokens.push(Token {
                    tok: Tok::Number(value),
                    column: start + 1,
                    length: i - start,
                });
            }
            c if c.is_ascii_alphabetic() => {
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                tokens.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    column: start + 1,
                    length: i - start,
                });
            }
            other => {
                return Err(err(start + 1, 1, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(tokens)
}
