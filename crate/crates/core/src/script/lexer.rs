use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    True,
    False,
    In,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Float(f) => format!("number {f}"),
            Tok::Str(_) => "string".into(),
            Tok::True => "True".into(),
            Tok::False => "False".into(),
            Tok::In => "in".into(),
            Tok::Assign => "'='".into(),
            Tok::Eq => "'=='".into(),
            Tok::Ne => "'!='".into(),
            Tok::Lt => "'<'".into(),
            Tok::Le => "'<='".into(),
            Tok::Gt => "'>'".into(),
            Tok::Ge => "'>='".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Python keywords and builtins outside the dialect. Using one is a syntax
/// error rather than an unknown name, so the diagnostic says why.
pub const RESERVED: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "finally", "for", "from", "global", "if", "import", "is", "lambda", "None",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
    "exec", "eval", "open", "__import__", "compile", "globals", "locals", "getattr", "setattr",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
    depth: usize,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn span_from(&self, start: usize, line: usize, col: usize) -> Span {
        Span {
            line,
            col,
            start,
            end: self.pos,
        }
    }

    fn col(&self, at: usize) -> usize {
        self.src[self.line_start..at].chars().count() + 1
    }

    fn err(&self, at: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            col: self.col(at),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.bytes.get(self.pos + 1).copied()
    }

    fn push(&mut self, tok: Tok, start: usize, line: usize, col: usize) {
        let span = self.span_from(start, line, col);
        self.out.push(Token { tok, span });
    }

    fn newline(&mut self) {
        self.line += 1;
        self.line_start = self.pos;
    }

    fn number(&mut self, start: usize) -> Result<Tok, SyntaxError> {
        let digits = |l: &mut Self| {
            while l.peek().is_some_and(|c| c.is_ascii_digit() || c == b'_') {
                l.pos += 1;
            }
        };
        digits(self);
        let mut float = false;
        if self.peek() == Some(b'.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            float = true;
            self.pos += 1;
            digits(self);
        } else if self.peek() == Some(b'.') && !self.peek2().is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') {
            // "1." is a float literal
            float = true;
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                float = true;
                digits(self);
            } else {
                self.pos = save;
            }
        }
        if self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') {
            return Err(self.err(start, "invalid number literal"));
        }
        let text: String = self.src[start..self.pos].chars().filter(|c| *c != '_').collect();
        if float {
            text.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(Tok::Float)
                .ok_or_else(|| self.err(start, format!("invalid number {text}")))
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| self.err(start, format!("integer {text} out of range")))
        }
    }

    fn string(&mut self, start: usize) -> Result<Tok, SyntaxError> {
        let quote = self.bytes[self.pos];
        self.pos += 1;
        let mut s = String::new();
        loop {
            let Some(c) = self.src[self.pos..].chars().next() else {
                return Err(self.err(start, "unterminated string"));
            };
            self.pos += c.len_utf8();
            match c {
                '\n' => return Err(self.err(start, "unterminated string")),
                '\\' => {
                    let Some(e) = self.src[self.pos..].chars().next() else {
                        return Err(self.err(start, "unterminated string"));
                    };
                    self.pos += e.len_utf8();
                    s.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        '\\' | '\'' | '"' => e,
                        other => {
                            return Err(self.err(self.pos - other.len_utf8() - 1, format!("unknown escape \\{other}")))
                        }
                    });
                }
                c if c as u32 == quote as u32 => return Ok(Tok::Str(s)),
                c => s.push(c),
            }
        }
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            let (line, col) = (self.line, self.col(start));
            match c {
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.peek().is_some_and(|c| c != b'\n') {
                        self.pos += 1;
                    }
                }
                b'\\' if self.peek2() == Some(b'\n') => {
                    self.pos += 2;
                    self.newline();
                }
                b'\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        self.push(Tok::Newline, start, line, col);
                    }
                    self.newline();
                }
                b'0'..=b'9' => {
                    let tok = self.number(start)?;
                    self.push(tok, start, line, col);
                }
                b'.' if self.peek2().is_some_and(|c| c.is_ascii_digit()) => {
                    let tok = self.number(start)?;
                    self.push(tok, start, line, col);
                }
                b'"' | b'\'' => {
                    if self.src[self.pos..].starts_with("\"\"\"") || self.src[self.pos..].starts_with("'''") {
                        return Err(self.err(start, "triple-quoted strings are not supported"));
                    }
                    let tok = self.string(start)?;
                    self.push(tok, start, line, col);
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                        self.pos += 1;
                    }
                    let word = &self.src[start..self.pos];
                    let tok = match word {
                        "True" => Tok::True,
                        "False" => Tok::False,
                        "in" => Tok::In,
                        w if RESERVED.contains(&w) => {
                            return Err(self.err(start, format!("unsupported construct '{w}'")))
                        }
                        w => Tok::Ident(w.to_string()),
                    };
                    self.push(tok, start, line, col);
                }
                _ => {
                    let two = self.src.get(self.pos..self.pos + 2).unwrap_or("");
                    let (tok, len) = match two {
                        "==" => (Tok::Eq, 2),
                        "!=" => (Tok::Ne, 2),
                        "<=" => (Tok::Le, 2),
                        ">=" => (Tok::Ge, 2),
                        "**" | "//" | "+=" | "-=" | "*=" | "/=" | "->" | ":=" => {
                            return Err(self.err(start, format!("unsupported operator '{two}'")))
                        }
                        _ => match c {
                            b'=' => (Tok::Assign, 1),
                            b'<' => (Tok::Lt, 1),
                            b'>' => (Tok::Gt, 1),
                            b'+' => (Tok::Plus, 1),
                            b'-' => (Tok::Minus, 1),
                            b'*' => (Tok::Star, 1),
                            b'/' => (Tok::Slash, 1),
                            b'(' | b'[' => {
                                self.depth += 1;
                                (if c == b'(' { Tok::LParen } else { Tok::LBracket }, 1)
                            }
                            b')' | b']' => {
                                self.depth = self.depth.saturating_sub(1);
                                (if c == b')' { Tok::RParen } else { Tok::RBracket }, 1)
                            }
                            b',' => (Tok::Comma, 1),
                            b'.' => (Tok::Dot, 1),
                            _ => {
                                let ch = self.src[start..].chars().next().unwrap_or('?');
                                return Err(self.err(start, format!("unexpected character {ch:?}")));
                            }
                        },
                    };
                    self.pos += len;
                    self.push(tok, start, line, col);
                }
            }
        }
        let end = self.pos;
        let col = self.col(end);
        self.push(Tok::Newline, end, self.line, col);
        self.push(Tok::Eof, end, self.line, col);
        Ok(self.out)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        line_start: 0,
        depth: 0,
        out: Vec::new(),
    }
    .run()
}
