//! Syntax trees for subject programs and test suites.

use super::lexer::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Index of an `if`/`while` decision site, assigned in depth-first source
/// order within its tree. Site `k` owns arms `2k` (taken) and `2k + 1`.
pub type SiteId = u32;

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let(String, Expr),
    Assign(String, Expr),
    If {
        site: SiteId,
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        site: SiteId,
        cond: Expr,
        body: Block,
    },
    Return(Expr),
    Expr(Expr),
    /// Only legal at the top level of a test case.
    Assert(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq)]
pub struct FnDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTree {
    pub functions: Vec<FnDef>,
    /// Number of `if`/`while` sites; site ids are `0..site_count`.
    pub site_count: u32,
}

impl ProgramTree {
    pub fn function(&self, name: &str) -> Option<&FnDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub name: String,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTree {
    pub name: String,
    pub cases: Vec<TestCase>,
    pub span: Span,
}

impl SuiteTree {
    /// Static count of `assert` statements across all cases.
    pub fn assertions_total(&self) -> usize {
        self.cases
            .iter()
            .flat_map(|c| &c.body)
            .filter(|s| matches!(s.kind, StmtKind::Assert(_)))
            .count()
    }
}

/// Visits every statement in depth-first source order.
pub fn walk_block<'a>(block: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
    for stmt in block {
        visit(stmt);
        match &stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                walk_block(then_block, visit);
                if let Some(b) = else_block {
                    walk_block(b, visit);
                }
            }
            StmtKind::While { body, .. } => walk_block(body, visit),
            _ => {}
        }
    }
}
