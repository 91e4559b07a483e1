//! Line-oriented tokenizer. Indentation is turned into `Indent`/`Dedent`
//! tokens the way Python's tokenizer does it; blank lines and `#` comments
//! are dropped.

use std::sync::Arc;

use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Def,
    Return,
    If,
    Then,
    Else,
    True,
    False,
    Extern,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Eq,
    Plus,
    Arrow,
    Star,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Def => "def",
            Tok::Return => "return",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Extern => "extern",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Eq => "=",
            Tok::Plus => "+",
            Tok::Arrow => "->",
            Tok::Star => "*",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(file: &Arc<str>, source: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut last_line = 1u32;
    // Open brackets carried over from previous lines; lines inside brackets
    // continue the current logical line.
    let mut depth = 0usize;
    for (idx, raw) in source.split('\n').enumerate() {
        let line_no = idx as u32 + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let code = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        if code.trim().is_empty() {
            continue;
        }
        last_line = line_no;
        let indent = code.chars().take_while(|c| *c == ' ').count();
        if code[indent..].starts_with('\t') {
            return Err(ParseError::syntax(
                Span::new(file.clone(), line_no, indent as u32 + 1, 1),
                "tabs are not allowed in indentation",
            ));
        }
        let here = |col: usize, len: usize| Span::new(file.clone(), line_no, col as u32 + 1, len as u32);
        if depth > 0 {
            let first = out.len();
            lex_line(code, indent, &here, &mut out)?;
            depth = bracket_depth(depth, &out[first..]);
            if depth == 0 {
                out.push(Token { tok: Tok::Newline, span: here(code.chars().count(), 0) });
            }
            continue;
        }
        let top = *indents.last().expect("indent stack is never empty");
        if indent > top {
            indents.push(indent);
            out.push(Token { tok: Tok::Indent, span: here(0, indent) });
        } else {
            while indent < *indents.last().expect("indent stack is never empty") {
                indents.pop();
                out.push(Token { tok: Tok::Dedent, span: here(0, indent) });
            }
            if indent != *indents.last().expect("indent stack is never empty") {
                return Err(ParseError::syntax(here(0, indent), "inconsistent dedent"));
            }
        }
        let first = out.len();
        lex_line(code, indent, &here, &mut out)?;
        depth = bracket_depth(depth, &out[first..]);
        if depth == 0 {
            out.push(Token { tok: Tok::Newline, span: here(code.chars().count(), 0) });
        }
    }
    if depth > 0 {
        out.push(Token { tok: Tok::Newline, span: Span::new(file.clone(), last_line, 1, 0) });
    }
    let end = Span::new(file.clone(), last_line, 1, 0);
    for _ in 1..indents.len() {
        out.push(Token { tok: Tok::Dedent, span: end.clone() });
    }
    out.push(Token { tok: Tok::Eof, span: end });
    Ok(out)
}

/// Bracket nesting after `tokens`; a stray closer resets to zero and is left
/// for the parser to report.
fn bracket_depth(start: usize, tokens: &[Token]) -> usize {
    tokens.iter().fold(start, |d, t| match t.tok {
        Tok::LParen | Tok::LBracket => d + 1,
        Tok::RParen | Tok::RBracket => d.saturating_sub(1),
        _ => d,
    })
}

fn lex_line(
    code: &str,
    start: usize,
    here: &impl Fn(usize, usize) -> Span,
    out: &mut Vec<Token>,
) -> Result<(), ParseError> {
    let chars: Vec<char> = code.chars().collect();
    let mut i = start;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' {
            i += 1;
            continue;
        }
        let begin = i;
        let tok = if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            let value = text
                .parse::<i64>()
                .map_err(|_| ParseError::syntax(here(begin, i - begin), "integer literal out of range"))?;
            Tok::Int(value)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[begin..i].iter().collect();
            match word.as_str() {
                "def" => Tok::Def,
                "return" => Tok::Return,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "true" => Tok::True,
                "false" => Tok::False,
                "extern" => Tok::Extern,
                _ => Tok::Ident(word),
            }
        } else {
            i += 1;
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '*' => Tok::Star,
                '-' if chars.get(i) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                _ => {
                    return Err(ParseError::syntax(
                        here(begin, 1),
                        format!("unexpected character `{c}`"),
                    ))
                }
            }
        };
        out.push(Token { tok, span: here(begin, i - begin) });
    }
    Ok(())
}
