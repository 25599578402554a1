//! Tokenizer for `.tm` sources. Newlines are whitespace; `#` comments run
//! to end of line. Every token carries its span and end column so the
//! parser can glue dash-separated names (`reject-partial`) back together.

use std::sync::Arc;

use super::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    /// Raw ISO-8601 date or datetime text.
    Date(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Dot,
    Arrow,        // ->
    TriggerArrow, // ~>
    Assign,       // :=
    Equal,        // =
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Plus,
    Minus,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("`{name}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Date(d) => format!("`{d}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::TriggerArrow => "`~>`".into(),
            Tok::Assign => "`:=`".into(),
            Tok::Equal => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    pub end_column: u32,
}

pub fn lex(file: &Arc<str>, text: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut column = 1u32;

    let span = |line: u32, column: u32| SourceSpan {
        file: file.clone(),
        line,
        column,
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }

        let start_line = line;
        let start_column = column;
        let mut push = |tok: Tok, width: u32| {
            tokens.push(Token {
                tok,
                span: span(start_line, start_column),
                end_column: start_column + width,
            });
        };

        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let width = (i - start) as u32;
            push(Tok::Ident(word), width);
            column += width;
            continue;
        }

        if c.is_ascii_digit() {
            // Dates win over arithmetic: 2020-03-01[T14:30:00].
            if let Some(len) = date_length(&chars[i..]) {
                let date: String = chars[i..i + len].iter().collect();
                push(Tok::Date(date), len as u32);
                i += len;
                column += len as u32;
                continue;
            }
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let width = (i - start) as u32;
            match digits.parse::<i64>() {
                Ok(n) => push(Tok::Int(n), width),
                Err(_) => errors.push(Diagnostic {
                    span: span(start_line, start_column),
                    rule: "SyntaxError".into(),
                    message: format!("integer literal `{digits}` out of range"),
                }),
            }
            column += width;
            continue;
        }

        if c == '"' {
            let mut value = String::new();
            let mut j = i + 1;
            let mut closed = false;
            while j < chars.len() {
                match chars[j] {
                    '"' => {
                        closed = true;
                        j += 1;
                        break;
                    }
                    '\\' if j + 1 < chars.len() => {
                        let escaped = chars[j + 1];
                        value.push(match escaped {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        j += 2;
                    }
                    '\n' => break,
                    other => {
                        value.push(other);
                        j += 1;
                    }
                }
            }
            if !closed {
                errors.push(Diagnostic {
                    span: span(start_line, start_column),
                    rule: "SyntaxError".into(),
                    message: "unterminated string literal".into(),
                });
                i = j;
                continue;
            }
            let width = (j - i) as u32;
            push(Tok::Str(value), width);
            i = j;
            column += width;
            continue;
        }

        let two = |a: char, b: char| i + 1 < chars.len() && c == a && chars[i + 1] == b;
        let (tok, width) = if two('-', '>') {
            (Tok::Arrow, 2)
        } else if two('~', '>') {
            (Tok::TriggerArrow, 2)
        } else if two(':', '=') {
            (Tok::Assign, 2)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::NotEq, 2)
        } else if two('<', '=') {
            (Tok::Le, 2)
        } else if two('>', '=') {
            (Tok::Ge, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else {
            match c {
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ':' => (Tok::Colon, 1),
                '.' => (Tok::Dot, 1),
                '=' => (Tok::Equal, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '!' => (Tok::Bang, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                other => {
                    errors.push(Diagnostic {
                        span: span(start_line, start_column),
                        rule: "SyntaxError".into(),
                        message: format!("unexpected character `{other}`"),
                    });
                    i += 1;
                    column += 1;
                    continue;
                }
            }
        };
        push(tok, width);
        i += width as usize;
        column += width;
    }

    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}

/// Length of an ISO date(-time) starting here: `DDDD-DD-DD` optionally
/// followed by `THH:MM:SS`.
fn date_length(chars: &[char]) -> Option<usize> {
    let digit = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_digit());
    let is = |i: usize, c: char| chars.get(i) == Some(&c);
    let date_ok = (0..4).all(digit)
        && is(4, '-')
        && digit(5)
        && digit(6)
        && is(7, '-')
        && digit(8)
        && digit(9);
    if !date_ok {
        return None;
    }
    let time_ok = is(10, 'T')
        && digit(11)
        && digit(12)
        && is(13, ':')
        && digit(14)
        && digit(15)
        && is(16, ':')
        && digit(17)
        && digit(18);
    Some(if time_ok { 19 } else { 10 })
}
