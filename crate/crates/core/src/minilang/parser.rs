//! Recursive-descent parser with precedence climbing for expressions.

use super::ast::*;
use super::lexer::{lex, Keyword, Span, Symbol, Token, TokenKind};
use super::{ParseError, SourceText, SuiteParseError};

const MAX_NESTING: usize = 200;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: Span,
    next_site: SiteId,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        let tokens = lex(src)?;
        let eof = eof_span(src);
        Ok(Parser {
            tokens,
            pos: 0,
            eof,
            next_site: 0,
            depth: 0,
        })
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens.get(self.pos).map(|t| t.span).unwrap_or(self.eof)
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.pos) {
            Some(t) => ParseError::new(t.span, format!("expected {expected}, found `{}`", t.kind)),
            None => ParseError::new(self.eof, format!("expected {expected}, found end of input")),
        }
    }

    fn at_symbol(&self, sym: Symbol) -> bool {
        self.peek() == Some(&TokenKind::Symbol(sym))
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek() == Some(&TokenKind::Keyword(kw))
    }

    fn expect_symbol(&mut self, sym: Symbol) -> PResult<Span> {
        if self.at_symbol(sym) {
            let span = self.span();
            self.pos += 1;
            Ok(span)
        } else {
            Err(self.unexpected(&format!("`{}`", sym.as_str())))
        }
    }

    fn expect_keyword(&mut self, kw: Keyword) -> PResult<Span> {
        if self.at_keyword(kw) {
            let span = self.span();
            self.pos += 1;
            Ok(span)
        } else {
            Err(self.unexpected(&format!("`{}`", kw.as_str())))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
            }) => {
                let out = (name.clone(), *span);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(ParseError::new(self.span(), "nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn fndef(&mut self) -> PResult<FnDef> {
        let span = self.expect_keyword(Keyword::Fn)?;
        let (name, _) = self.expect_ident()?;
        self.expect_symbol(Symbol::LParen)?;
        let mut params: Vec<String> = Vec::new();
        if !self.at_symbol(Symbol::RParen) {
            loop {
                let (p, pspan) = self.expect_ident()?;
                if params.contains(&p) {
                    return Err(ParseError::new(pspan, format!("duplicate parameter `{p}`")));
                }
                params.push(p);
                if self.at_symbol(Symbol::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect_symbol(Symbol::RParen)?;
        let body = self.block()?;
        Ok(FnDef {
            name,
            params,
            body,
            span,
        })
    }

    fn block(&mut self) -> PResult<Block> {
        self.enter()?;
        self.expect_symbol(Symbol::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at_symbol(Symbol::RBrace) {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.pos += 1;
        self.leave();
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.peek() {
            Some(TokenKind::Keyword(Keyword::Let)) => {
                self.pos += 1;
                let (name, _) = self.expect_ident()?;
                self.expect_symbol(Symbol::Assign)?;
                let value = self.expr()?;
                self.expect_symbol(Symbol::Semi)?;
                StmtKind::Let(name, value)
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.pos += 1;
                let site = self.alloc_site();
                self.expect_symbol(Symbol::LParen)?;
                let cond = self.expr()?;
                self.expect_symbol(Symbol::RParen)?;
                let then_block = self.block()?;
                let else_block = if self.at_keyword(Keyword::Else) {
                    self.pos += 1;
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If {
                    site,
                    cond,
                    then_block,
                    else_block,
                }
            }
            Some(TokenKind::Keyword(Keyword::While)) => {
                self.pos += 1;
                let site = self.alloc_site();
                self.expect_symbol(Symbol::LParen)?;
                let cond = self.expr()?;
                self.expect_symbol(Symbol::RParen)?;
                let body = self.block()?;
                StmtKind::While { site, cond, body }
            }
            Some(TokenKind::Keyword(Keyword::Return)) => {
                self.pos += 1;
                let value = self.expr()?;
                self.expect_symbol(Symbol::Semi)?;
                StmtKind::Return(value)
            }
            Some(TokenKind::Ident(_))
                if self.peek_at(1) == Some(&TokenKind::Symbol(Symbol::Assign)) =>
            {
                let (name, _) = self.expect_ident()?;
                self.pos += 1;
                let value = self.expr()?;
                self.expect_symbol(Symbol::Semi)?;
                StmtKind::Assign(name, value)
            }
            _ => {
                let value = self.expr()?;
                self.expect_symbol(Symbol::Semi)?;
                StmtKind::Expr(value)
            }
        };
        Ok(Stmt { kind, span })
    }

    fn alloc_site(&mut self) -> SiteId {
        let site = self.next_site;
        self.next_site += 1;
        site
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        self.enter()?;
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.peek_binary() {
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        self.leave();
        Ok(lhs)
    }

    fn peek_binary(&self) -> Option<(BinaryOp, u8)> {
        let TokenKind::Symbol(sym) = self.peek()? else {
            return None;
        };
        Some(match sym {
            Symbol::OrOr => (BinaryOp::Or, 1),
            Symbol::AndAnd => (BinaryOp::And, 2),
            Symbol::EqEq => (BinaryOp::Eq, 3),
            Symbol::NotEq => (BinaryOp::Ne, 3),
            Symbol::Lt => (BinaryOp::Lt, 4),
            Symbol::Le => (BinaryOp::Le, 4),
            Symbol::Gt => (BinaryOp::Gt, 4),
            Symbol::Ge => (BinaryOp::Ge, 4),
            Symbol::Plus => (BinaryOp::Add, 5),
            Symbol::Minus => (BinaryOp::Sub, 5),
            Symbol::Star => (BinaryOp::Mul, 6),
            Symbol::Slash => (BinaryOp::Div, 6),
            Symbol::Percent => (BinaryOp::Rem, 6),
            _ => return None,
        })
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = match self.peek() {
            Some(TokenKind::Symbol(Symbol::Bang)) => Some(UnaryOp::Not),
            Some(TokenKind::Symbol(Symbol::Minus)) => Some(UnaryOp::Neg),
            _ => None,
        };
        match op {
            Some(op) => {
                self.pos += 1;
                self.enter()?;
                let operand = self.unary()?;
                self.leave();
                Ok(Expr {
                    kind: ExprKind::Unary(op, Box::new(operand)),
                    span,
                })
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().cloned() {
            Some(TokenKind::Int(v)) => {
                self.pos += 1;
                ExprKind::Int(v)
            }
            Some(TokenKind::True) => {
                self.pos += 1;
                ExprKind::Bool(true)
            }
            Some(TokenKind::False) => {
                self.pos += 1;
                ExprKind::Bool(false)
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.at_symbol(Symbol::LParen) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.at_symbol(Symbol::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.at_symbol(Symbol::Comma) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect_symbol(Symbol::RParen)?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            Some(TokenKind::Symbol(Symbol::LParen)) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_symbol(Symbol::RParen)?;
                return Ok(inner);
            }
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr { kind, span })
    }

    fn case(&mut self) -> PResult<TestCase> {
        let span = self.expect_keyword(Keyword::Case)?;
        let (name, _) = self.expect_ident()?;
        self.enter()?;
        self.expect_symbol(Symbol::LBrace)?;
        let mut body = Vec::new();
        while !self.at_symbol(Symbol::RBrace) {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            if self.at_keyword(Keyword::Assert) {
                let span = self.span();
                self.pos += 1;
                let cond = self.expr()?;
                self.expect_symbol(Symbol::Semi)?;
                body.push(Stmt {
                    kind: StmtKind::Assert(cond),
                    span,
                });
            } else {
                body.push(self.stmt()?);
            }
        }
        self.pos += 1;
        self.leave();
        Ok(TestCase { name, body, span })
    }

    fn suite(&mut self) -> PResult<SuiteTree> {
        let span = self.expect_keyword(Keyword::Suite)?;
        let (name, _) = self.expect_ident()?;
        self.expect_symbol(Symbol::LBrace)?;
        let mut cases: Vec<TestCase> = Vec::new();
        while !self.at_symbol(Symbol::RBrace) {
            let case = self.case()?;
            if cases.iter().any(|c| c.name == case.name) {
                return Err(ParseError::new(
                    case.span,
                    format!("duplicate case `{}`", case.name),
                ));
            }
            cases.push(case);
        }
        if cases.is_empty() {
            return Err(ParseError::new(self.span(), "a suite needs at least one case"));
        }
        self.pos += 1;
        Ok(SuiteTree { name, cases, span })
    }
}

fn eof_span(src: &str) -> Span {
    let line = 1 + src.matches('\n').count() as u32;
    let col = 1 + src.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32;
    Span {
        start: src.len(),
        end: src.len(),
        line,
        col,
    }
}

/// Parses a subject program: one or more function definitions.
pub fn parse_program(src: &SourceText) -> Result<ProgramTree, ParseError> {
    let mut p = Parser::new(src.text())?;
    let mut functions: Vec<FnDef> = Vec::new();
    loop {
        if p.at_eof() && !functions.is_empty() {
            break;
        }
        let f = p.fndef()?;
        if functions.iter().any(|g| g.name == f.name) {
            return Err(ParseError::new(f.span, format!("duplicate function `{}`", f.name)));
        }
        functions.push(f);
    }
    Ok(ProgramTree {
        functions,
        site_count: p.next_site,
    })
}

/// Parses a test source that must hold exactly one `suite` declaration.
///
/// A source made only of function definitions parses but yields
/// [`SuiteParseError::MissingSuite`].
pub fn parse_suite(src: &SourceText) -> Result<SuiteTree, SuiteParseError> {
    let mut p = Parser::new(src.text())?;
    let mut suite: Option<SuiteTree> = None;
    let mut first_fn: Option<Span> = None;
    while !p.at_eof() {
        if p.at_keyword(Keyword::Suite) {
            let at = p.span();
            let s = p.suite()?;
            if suite.is_some() {
                return Err(ParseError::new(at, "only one suite declaration is allowed").into());
            }
            suite = Some(s);
        } else if p.at_keyword(Keyword::Fn) {
            let f = p.fndef()?;
            first_fn.get_or_insert(f.span);
        } else {
            return Err(p.unexpected("`suite` or `fn`").into());
        }
    }
    match (suite, first_fn) {
        (None, _) => Err(SuiteParseError::MissingSuite),
        (Some(_), Some(at)) => Err(ParseError::new(
            at,
            "function definitions are not allowed next to a suite",
        )
        .into()),
        (Some(s), None) => Ok(s),
    }
}
