//! Tokenizer for MiniLang sources.

use std::fmt;

use super::ParseError;

/// Byte range plus the 1-based line/column of its first character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Fn,
    Let,
    If,
    Else,
    While,
    Return,
    Suite,
    Case,
    Assert,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Fn => "fn",
            Keyword::Let => "let",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::While => "while",
            Keyword::Return => "return",
            Keyword::Suite => "suite",
            Keyword::Case => "case",
            Keyword::Assert => "assert",
        }
    }

    fn from_ident(s: &str) -> Option<Self> {
        Some(match s {
            "fn" => Keyword::Fn,
            "let" => Keyword::Let,
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "while" => Keyword::While,
            "return" => Keyword::Return,
            "suite" => Keyword::Suite,
            "case" => Keyword::Case,
            "assert" => Keyword::Assert,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
}

impl Symbol {
    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::LParen => "(",
            Symbol::RParen => ")",
            Symbol::LBrace => "{",
            Symbol::RBrace => "}",
            Symbol::Semi => ";",
            Symbol::Comma => ",",
            Symbol::Assign => "=",
            Symbol::Plus => "+",
            Symbol::Minus => "-",
            Symbol::Star => "*",
            Symbol::Slash => "/",
            Symbol::Percent => "%",
            Symbol::EqEq => "==",
            Symbol::NotEq => "!=",
            Symbol::Lt => "<",
            Symbol::Le => "<=",
            Symbol::Gt => ">",
            Symbol::Ge => ">=",
            Symbol::AndAnd => "&&",
            Symbol::OrOr => "||",
            Symbol::Bang => "!",
        }
    }

    /// Grouping punctuation carries structure only, no computation.
    pub fn is_grouping(self) -> bool {
        matches!(
            self,
            Symbol::LParen
                | Symbol::RParen
                | Symbol::LBrace
                | Symbol::RBrace
                | Symbol::Semi
                | Symbol::Comma
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Int(i64),
    True,
    False,
    Ident(String),
    Keyword(Keyword),
    Symbol(Symbol),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Int(v) => write!(f, "{v}"),
            TokenKind::True => f.write_str("true"),
            TokenKind::False => f.write_str("false"),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::Keyword(k) => f.write_str(k.as_str()),
            TokenKind::Symbol(s) => f.write_str(s.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

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

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
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

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            col: self.col,
        }
    }
}

/// Splits `src` into tokens, dropping whitespace and `#` comments.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }

        let mut span = cur.here();
        let kind = if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            if cur.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                return Err(ParseError::new(cur.here(), "malformed integer literal"));
            }
            let text = &src[span.start..cur.pos];
            let value = text
                .parse::<i64>()
                .map_err(|_| ParseError::new(span, format!("integer literal `{text}` out of range")))?;
            TokenKind::Int(value)
        } else if c.is_alphabetic() || c == '_' {
            while cur.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                cur.bump();
            }
            let text = &src[span.start..cur.pos];
            match text {
                "true" => TokenKind::True,
                "false" => TokenKind::False,
                _ => match Keyword::from_ident(text) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(text.to_string()),
                },
            }
        } else {
            let next = cur.peek2();
            let (sym, width) = match (c, next) {
                ('=', Some('=')) => (Symbol::EqEq, 2),
                ('!', Some('=')) => (Symbol::NotEq, 2),
                ('<', Some('=')) => (Symbol::Le, 2),
                ('>', Some('=')) => (Symbol::Ge, 2),
                ('&', Some('&')) => (Symbol::AndAnd, 2),
                ('|', Some('|')) => (Symbol::OrOr, 2),
                ('(', _) => (Symbol::LParen, 1),
                (')', _) => (Symbol::RParen, 1),
                ('{', _) => (Symbol::LBrace, 1),
                ('}', _) => (Symbol::RBrace, 1),
                (';', _) => (Symbol::Semi, 1),
                (',', _) => (Symbol::Comma, 1),
                ('=', _) => (Symbol::Assign, 1),
                ('+', _) => (Symbol::Plus, 1),
                ('-', _) => (Symbol::Minus, 1),
                ('*', _) => (Symbol::Star, 1),
                ('/', _) => (Symbol::Slash, 1),
                ('%', _) => (Symbol::Percent, 1),
                ('<', _) => (Symbol::Lt, 1),
                ('>', _) => (Symbol::Gt, 1),
                ('!', _) => (Symbol::Bang, 1),
                _ => return Err(ParseError::new(span, format!("unexpected character `{c}`"))),
            };
            for _ in 0..width {
                cur.bump();
            }
            TokenKind::Symbol(sym)
        };
        span.end = cur.pos;
        out.push(Token { kind, span });
    }
    Ok(out)
}
