//! Tree-walking interpreter with branch-arm instrumentation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::*;
use super::branches::arm_id;
use super::lexer::Span;
use super::report::{ExecutionReport, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecLimits {
    pub step_budget: u64,
    pub call_depth_limit: u32,
}

impl ExecLimits {
    pub fn new(step_budget: u64, call_depth_limit: u32) -> Option<Self> {
        (step_budget > 0 && call_depth_limit > 0).then_some(ExecLimits {
            step_budget,
            call_depth_limit,
        })
    }
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            step_budget: 1_000_000,
            call_depth_limit: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    /// Result of a function that ends without `return`.
    Unit,
}

impl Value {
    fn type_name(self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Unit => "unit",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => f.write_str("()"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Fault {
    span: Span,
    message: String,
}

impl Fault {
    fn new(span: Span, message: impl Into<String>) -> Self {
        Fault {
            span,
            message: message.into(),
        }
    }
}

type Exec<T> = Result<T, Fault>;

enum Flow {
    Normal,
    Return(Value),
}

struct Frame {
    scopes: Vec<HashMap<String, Value>>,
}

impl Frame {
    fn new() -> Self {
        Frame {
            scopes: vec![HashMap::new()],
        }
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn assign(&mut self, name: &str, value: Value) -> bool {
        match self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name)) {
            Some(slot) => {
                *slot = value;
                true
            }
            None => false,
        }
    }

    fn bind(&mut self, name: &str, value: Value) {
        self.scopes
            .last_mut()
            .expect("frame always has a scope")
            .insert(name.to_string(), value);
    }
}

struct Machine<'p> {
    functions: HashMap<&'p str, &'p FnDef>,
    limits: ExecLimits,
    steps: u64,
    depth: u32,
    covered: BTreeSet<u32>,
}

impl<'p> Machine<'p> {
    fn new(prog: &'p ProgramTree, limits: ExecLimits) -> Self {
        Machine {
            functions: prog.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
            limits,
            steps: 0,
            depth: 0,
            covered: BTreeSet::new(),
        }
    }

    fn tick(&mut self, span: Span) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.limits.step_budget {
            return Err(Fault::new(
                span,
                format!("step budget of {} exhausted", self.limits.step_budget),
            ));
        }
        Ok(())
    }

    /// `in_subject` is true while executing subject-program code; only then
    /// are decision outcomes recorded as covered arms.
    fn block(&mut self, frame: &mut Frame, block: &[Stmt], in_subject: bool) -> Exec<Flow> {
        frame.scopes.push(HashMap::new());
        let out = self.stmts(frame, block, in_subject);
        frame.scopes.pop();
        out
    }

    fn stmts(&mut self, frame: &mut Frame, block: &[Stmt], in_subject: bool) -> Exec<Flow> {
        for stmt in block {
            if let Flow::Return(v) = self.stmt(frame, stmt, in_subject)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, frame: &mut Frame, stmt: &Stmt, in_subject: bool) -> Exec<Flow> {
        self.tick(stmt.span)?;
        match &stmt.kind {
            StmtKind::Let(name, e) => {
                let v = self.expr(frame, e)?;
                frame.bind(name, v);
            }
            StmtKind::Assign(name, e) => {
                let v = self.expr(frame, e)?;
                if !frame.assign(name, v) {
                    return Err(Fault::new(stmt.span, format!("assignment to undefined variable `{name}`")));
                }
            }
            StmtKind::If {
                site,
                cond,
                then_block,
                else_block,
            } => {
                let taken = self.condition(frame, cond)?;
                if in_subject {
                    self.covered.insert(arm_id(*site, taken));
                }
                if taken {
                    return self.block(frame, then_block, in_subject);
                } else if let Some(b) = else_block {
                    return self.block(frame, b, in_subject);
                }
            }
            StmtKind::While { site, cond, body } => loop {
                let taken = self.condition(frame, cond)?;
                if in_subject {
                    self.covered.insert(arm_id(*site, taken));
                }
                if !taken {
                    break;
                }
                if let Flow::Return(v) = self.block(frame, body, in_subject)? {
                    return Ok(Flow::Return(v));
                }
                self.tick(stmt.span)?;
            },
            StmtKind::Return(e) => return Ok(Flow::Return(self.expr(frame, e)?)),
            StmtKind::Expr(e) => {
                self.expr(frame, e)?;
            }
            StmtKind::Assert(_) => {
                return Err(Fault::new(stmt.span, "assert outside a test case"));
            }
        }
        Ok(Flow::Normal)
    }

    fn condition(&mut self, frame: &mut Frame, cond: &Expr) -> Exec<bool> {
        match self.expr(frame, cond)? {
            Value::Bool(b) => Ok(b),
            other => Err(Fault::new(
                cond.span,
                format!("condition must be bool, found {}", other.type_name()),
            )),
        }
    }

    fn expr(&mut self, frame: &mut Frame, e: &Expr) -> Exec<Value> {
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => frame
                .lookup(name)
                .ok_or_else(|| Fault::new(e.span, format!("undefined variable `{name}`"))),
            ExprKind::Unary(op, inner) => {
                let v = self.expr(frame, inner)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(i)) => i
                        .checked_neg()
                        .map(Value::Int)
                        .ok_or_else(|| Fault::new(e.span, "integer overflow")),
                    (UnaryOp::Not, v) => Err(type_fault(e.span, "!", v)),
                    (UnaryOp::Neg, v) => Err(type_fault(e.span, "-", v)),
                }
            }
            ExprKind::Binary(op @ (BinaryOp::And | BinaryOp::Or), lhs, rhs) => {
                let l = self.bool_operand(frame, lhs, *op)?;
                match (op, l) {
                    (BinaryOp::And, false) => Ok(Value::Bool(false)),
                    (BinaryOp::Or, true) => Ok(Value::Bool(true)),
                    _ => Ok(Value::Bool(self.bool_operand(frame, rhs, *op)?)),
                }
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let l = self.expr(frame, lhs)?;
                let r = self.expr(frame, rhs)?;
                binary(*op, l, r).map_err(|m| Fault::new(e.span, m))
            }
            ExprKind::Call(name, args) => self.call(frame, e.span, name, args),
        }
    }

    fn bool_operand(&mut self, frame: &mut Frame, e: &Expr, op: BinaryOp) -> Exec<bool> {
        match self.expr(frame, e)? {
            Value::Bool(b) => Ok(b),
            v => Err(type_fault(e.span, op_symbol(op), v)),
        }
    }

    fn call(&mut self, frame: &mut Frame, span: Span, name: &str, args: &[Expr]) -> Exec<Value> {
        self.tick(span)?;
        let Some(&def) = self.functions.get(name) else {
            return Err(Fault::new(span, format!("call to undefined function `{name}`")));
        };
        if def.params.len() != args.len() {
            return Err(Fault::new(
                span,
                format!(
                    "`{name}` takes {} argument(s), {} given",
                    def.params.len(),
                    args.len()
                ),
            ));
        }
        let mut callee = Frame::new();
        for (param, arg) in def.params.iter().zip(args) {
            let v = self.expr(frame, arg)?;
            callee.bind(param, v);
        }
        if self.depth >= self.limits.call_depth_limit {
            return Err(Fault::new(
                span,
                format!("call depth limit of {} exceeded", self.limits.call_depth_limit),
            ));
        }
        self.depth += 1;
        let flow = self.stmts(&mut callee, &def.body, true);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::Unit),
        }
    }
}

fn op_symbol(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Add => "+",
        BinaryOp::Sub => "-",
        BinaryOp::Mul => "*",
        BinaryOp::Div => "/",
        BinaryOp::Rem => "%",
        BinaryOp::Eq => "==",
        BinaryOp::Ne => "!=",
        BinaryOp::Lt => "<",
        BinaryOp::Le => "<=",
        BinaryOp::Gt => ">",
        BinaryOp::Ge => ">=",
        BinaryOp::And => "&&",
        BinaryOp::Or => "||",
    }
}

fn type_fault(span: Span, op: &str, v: Value) -> Fault {
    Fault::new(span, format!("operator `{op}` cannot take {}", v.type_name()))
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, String> {
    use BinaryOp::*;
    match (op, l, r) {
        (Eq, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a == b)),
        (Eq, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a == b)),
        (Ne, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a != b)),
        (Ne, Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(a != b)),
        (Lt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a < b)),
        (Le, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a <= b)),
        (Gt, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a > b)),
        (Ge, Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a >= b)),
        (Div | Rem, Value::Int(_), Value::Int(0)) => Err("division by zero".into()),
        (Add | Sub | Mul | Div | Rem, Value::Int(a), Value::Int(b)) => {
            let out = match op {
                Add => a.checked_add(b),
                Sub => a.checked_sub(b),
                Mul => a.checked_mul(b),
                Div => a.checked_div(b),
                _ => a.checked_rem(b),
            };
            out.map(Value::Int).ok_or_else(|| "integer overflow".into())
        }
        _ => Err(format!(
            "operator `{}` cannot take {} and {}",
            op_symbol(op),
            l.type_name(),
            r.type_name()
        )),
    }
}

/// Runs every case of `suite` against `prog`.
///
/// Each case gets a fresh environment. A false assertion ends its case with
/// a failure and the next case still runs; a runtime fault stops the whole
/// suite. Status precedence is Error > Failure > Pass. Covered arms are those
/// of `prog` taken by any case executed so far.
pub fn execute_suite(prog: &ProgramTree, suite: &SuiteTree, limits: ExecLimits) -> ExecutionReport {
    let mut m = Machine::new(prog, limits);
    let assertions_total = suite.assertions_total() as u32;
    let mut executed = 0u32;
    let mut first_failure: Option<String> = None;
    let mut fault: Option<String> = None;

    'cases: for case in &suite.cases {
        let mut frame = Frame::new();
        for stmt in &case.body {
            let step = match &stmt.kind {
                StmtKind::Assert(cond) => m.tick(stmt.span).and_then(|_| m.condition(&mut frame, cond)).map(Some),
                _ => m.stmt(&mut frame, stmt, false).and_then(|flow| match flow {
                    Flow::Normal => Ok(None),
                    Flow::Return(_) => Err(Fault::new(stmt.span, "return outside a function")),
                }),
            };
            match step {
                Ok(None) | Ok(Some(true)) => {
                    if matches!(stmt.kind, StmtKind::Assert(_)) {
                        executed += 1;
                    }
                }
                Ok(Some(false)) => {
                    executed += 1;
                    first_failure.get_or_insert_with(|| {
                        format!("case `{}`: assertion failed at {}", case.name, stmt.span)
                    });
                    continue 'cases;
                }
                Err(f) => {
                    fault = Some(format!("case `{}`: {} at {}", case.name, f.message, f.span));
                    break 'cases;
                }
            }
        }
    }

    let (status, diagnostic) = match (fault, first_failure) {
        (Some(d), _) => (Status::Error, d),
        (None, Some(d)) => (Status::Failure, d),
        (None, None) => (
            Status::Pass,
            format!(
                "{assertions_total} assertion(s) passed in {} case(s)",
                suite.cases.len()
            ),
        ),
    };
    ExecutionReport {
        status,
        covered_arm_ids: m.covered,
        arms_total: 2 * prog.site_count,
        assertions_executed: executed,
        assertions_total,
        diagnostic,
    }
}

/// Calls one function with integer/bool arguments outside of any suite.
pub fn call_function(
    prog: &ProgramTree,
    name: &str,
    args: &[Value],
    limits: ExecLimits,
) -> Result<(Value, BTreeSet<u32>), String> {
    let mut m = Machine::new(prog, limits);
    let mut frame = Frame::new();
    let span = Span::default();
    let exprs: Vec<Expr> = args
        .iter()
        .map(|v| {
            let kind = match *v {
                Value::Int(i) => ExprKind::Int(i),
                Value::Bool(b) => ExprKind::Bool(b),
                Value::Unit => return Err("unit is not a valid argument".to_string()),
            };
            Ok(Expr { kind, span })
        })
        .collect::<Result<_, _>>()?;
    let v = m
        .call(&mut frame, span, name, &exprs)
        .map_err(|f| f.message)?;
    Ok((v, m.covered))
}
