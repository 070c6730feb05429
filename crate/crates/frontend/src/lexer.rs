//! Tokens with 1-based line/column positions.

use std::fmt;

use crate::error::{ErrorKind, ParseError};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    /// Identifiers may contain `.` and `-` after the first character, so
    /// dotted labels and keyword values like `add-one` are single tokens.
    Ident(String),
    Num(u128),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Comma,
    Semi,
    Colon,
    Assign,
    Eq,
    Ne,
    AndAnd,
    OrOr,
    Implies,
    Bang,
    Hash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Num(n) => return write!(f, "`{n}`"),
            Tok::Str(s) => return write!(f, "\"{s}\""),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Assign => ":=",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Implies => "=>",
            Tok::Bang => "!",
            Tok::Hash => "#",
            Tok::Eof => return f.write_str("end of file"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Width in characters, so errors can point anywhere inside the token.
    pub width: u32,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.' | '-')) {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Num(s.parse().map_err(|_| {
                ParseError::new(ErrorKind::Syntax, pos, format!("number `{s}` is too large"))
            })?)
        } else if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(ParseError::new(ErrorKind::Syntax, pos, "unterminated string"));
            }
            i += 1;
            Tok::Str(chars[start + 1..i - 1].iter().collect())
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (tok, n) = match two.as_str() {
                ":=" => (Tok::Assign, 2),
                "!=" => (Tok::Ne, 2),
                "&&" => (Tok::AndAnd, 2),
                "||" => (Tok::OrOr, 2),
                "=>" => (Tok::Implies, 2),
                _ => (
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '<' => Tok::Lt,
                        '>' => Tok::Gt,
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        ':' => Tok::Colon,
                        '=' => Tok::Eq,
                        '!' => Tok::Bang,
                        '#' => Tok::Hash,
                        _ => {
                            return Err(ParseError::new(
                                ErrorKind::Syntax,
                                pos,
                                format!("unexpected character `{c}`"),
                            ))
                        }
                    },
                    1,
                ),
            };
            i += n;
            tok
        };
        let width = (i - start) as u32;
        col += width;
        out.push(Token { tok, pos, width });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
        width: 1,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_words() {
        assert_eq!(
            toks("a.b := x # [] != add-one => \"s\" // note"),
            vec![
                Tok::Ident("a.b".into()),
                Tok::Assign,
                Tok::Ident("x".into()),
                Tok::Hash,
                Tok::LBracket,
                Tok::RBracket,
                Tok::Ne,
                Tok::Ident("add-one".into()),
                Tok::Implies,
                Tok::Str("s".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = lex("x\n  yy = 3").unwrap();
        assert_eq!((t[1].pos.line, t[1].pos.col, t[1].width), (2, 3, 2));
        assert_eq!((t[3].pos.line, t[3].pos.col), (2, 8));
    }

    #[test]
    fn stray_character() {
        let e = lex("x := $").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
    }
}
