//! Tokenizer for the C99 subset.

use crate::ast::SourceSpan;
use crate::parser::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Float(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest first so that greedy matching picks `<<=` before `<<` before `<`.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
    ">>", "<=", ">=", "==", "!=", "&&", "||", "(", ")", "[", "]", "{", "}", ";", ",", "+", "-",
    "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", ":", ".",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, line: u32, col: u32, start: usize) -> SourceSpan {
        let len = self.src[start..self.pos].chars().count() as u32;
        if self.line == line {
            SourceSpan::new(line, col, len)
        } else {
            SourceSpan::new(line, col, 1)
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    let mut at_line_start = true;

    while let Some(c) = cur.peek() {
        let (line, col, start) = (cur.line, cur.col, cur.pos);
        if c == '\n' {
            cur.bump();
            at_line_start = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        // Preprocessor lines are skipped; the input is expected to need no expansion.
        if c == '#' && at_line_start {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        at_line_start = false;

        if c == '/' && cur.peek_at(1) == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.peek() {
                    None => {
                        return Err(ParseError::Syntax {
                            span: SourceSpan::new(line, col, 2),
                            message: "unterminated block comment".into(),
                        })
                    }
                    Some('*') if cur.peek_at(1) == Some('/') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            continue;
        }

        if c.is_ascii_alphabetic() || c == '_' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            out.push(Token {
                tok: Tok::Ident(src[start..cur.pos].to_string()),
                span: cur.span_from(line, col, start),
            });
            continue;
        }

        if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            out.push(lex_number(&mut cur, line, col, start)?);
            continue;
        }

        let rest = &src[cur.pos..];
        if let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            out.push(Token {
                tok: Tok::Punct(p),
                span: cur.span_from(line, col, start),
            });
            continue;
        }

        return Err(ParseError::Syntax {
            span: SourceSpan::new(line, col, 1),
            message: format!("unexpected character `{c}`"),
        });
    }

    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(cur.line, cur.col, 0),
    });
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, line: u32, col: u32, start: usize) -> Result<Token, ParseError> {
    let mut is_float = false;
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') {
        is_float = true;
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = matches!(cur.peek_at(1), Some('+' | '-'));
        let digit_at = if sign { 2 } else { 1 };
        if cur.peek_at(digit_at).is_some_and(|d| d.is_ascii_digit()) {
            is_float = true;
            for _ in 0..digit_at {
                cur.bump();
            }
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    let text = cur.src[start..cur.pos].to_string();

    if matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
        while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            cur.bump();
        }
        let span = cur.span_from(line, col, start);
        let full = &cur.src[start..cur.pos];
        let construct = if full.starts_with("0x") || full.starts_with("0X") {
            "hexadecimal literal".to_string()
        } else {
            format!("numeric literal suffix in `{full}`")
        };
        return Err(ParseError::Unsupported { span, construct });
    }

    let span = cur.span_from(line, col, start);
    if !is_float && text.len() > 1 && text.starts_with('0') {
        return Err(ParseError::Unsupported {
            span,
            construct: format!("octal literal `{text}`"),
        });
    }
    Ok(Token {
        tok: if is_float { Tok::Float(text) } else { Tok::Int(text) },
        span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_keep_their_text() {
        assert_eq!(
            toks("0.00001 1e-5 .5 3 2."),
            vec![
                Tok::Float("0.00001".into()),
                Tok::Float("1e-5".into()),
                Tok::Float(".5".into()),
                Tok::Int("3".into()),
                Tok::Float("2.".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn greedy_punctuation() {
        assert_eq!(
            toks("a+=b<=c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("+="),
                Tok::Ident("b".into()),
                Tok::Punct("<="),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_directives_are_skipped() {
        let src = "#include <math.h>\n// line\nx /* block\n */ y";
        assert_eq!(
            toks(src),
            vec![Tok::Ident("x".into()), Tok::Ident("y".into()), Tok::Eof]
        );
    }

    #[test]
    fn spans_track_lines_and_columns() {
        let t = tokenize("a\n  bc").unwrap();
        assert_eq!(t[1].span, SourceSpan::new(2, 3, 2));
    }

    #[test]
    fn rejects_suffixes_and_octal() {
        assert!(matches!(tokenize("1.0f"), Err(ParseError::Unsupported { .. })));
        assert!(matches!(tokenize("0x10"), Err(ParseError::Unsupported { .. })));
        assert!(matches!(tokenize("017"), Err(ParseError::Unsupported { .. })));
        assert!(matches!(tokenize("a @ b"), Err(ParseError::Syntax { .. })));
    }
}
