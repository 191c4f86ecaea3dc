//! Random MiniLang programs and a reference evaluator that shares no code
//! with the crate's interpreter.
//!
//! Programs are generated as a small typed tree, rendered to source, and
//! evaluated directly from the tree. The evaluator logs every decision
//! `(site, outcome)` made in subject code.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum IntExpr {
    Lit(i64),
    Var(usize),
    Neg(Box<IntExpr>),
    Bin(char, Box<IntExpr>, Box<IntExpr>),
    CallHelper(Box<IntExpr>),
}

#[derive(Debug, Clone)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(&'static str, IntExpr, IntExpr),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Assign(usize, IntExpr),
    If(u32, BoolExpr, Vec<Stmt>, Option<Vec<Stmt>>),
    /// `counter = 0; while (counter < limit && cond) { body; counter = counter + 1; }`
    Loop(u32, usize, i64, BoolExpr, Vec<Stmt>),
    Return(IntExpr),
}

/// A function over `params` parameters plus `locals` extra variables.
#[derive(Debug, Clone)]
pub struct Func {
    pub name: &'static str,
    pub params: usize,
    pub locals: usize,
    pub body: Vec<Stmt>,
    pub result: IntExpr,
}

#[derive(Debug, Clone)]
pub struct Case {
    /// Test-code branch that must never be recorded.
    pub local_branch: Option<i64>,
    pub asserts: Vec<((i64, i64), i64)>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub helper: Option<Func>,
    pub main: Func,
    pub sites: u32,
    pub cases: Vec<Case>,
}

pub struct Gen {
    rng: ChaCha8Rng,
    sites: u32,
    max_sites: u32,
    counters: usize,
    has_helper: bool,
}

const MAX_COUNTERS: usize = 3;

impl Gen {
    pub fn new(seed: u64, max_sites: u32) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sites: 0,
            max_sites,
            counters: 0,
            has_helper: false,
        }
    }

    fn int(&mut self, vars: usize, depth: u32) -> IntExpr {
        let choice = if depth == 0 { self.rng.random_range(0..2) } else { self.rng.random_range(0..6) };
        match choice {
            0 => IntExpr::Lit(self.rng.random_range(-9..=9)),
            1 => IntExpr::Var(self.rng.random_range(0..vars)),
            2 => IntExpr::Neg(Box::new(self.int(vars, depth - 1))),
            3 if self.has_helper => IntExpr::CallHelper(Box::new(self.int(vars, depth - 1))),
            4 => {
                // A non-literal divisor can be zero, which faults.
                let divisor = if self.rng.random_bool(0.3) {
                    self.int(vars, depth - 1)
                } else {
                    IntExpr::Lit(self.rng.random_range(2..=7))
                };
                IntExpr::Bin('%', Box::new(self.int(vars, depth - 1)), Box::new(divisor))
            }
            _ => {
                let op = ['+', '-', '*'][self.rng.random_range(0..3)];
                IntExpr::Bin(op, Box::new(self.int(vars, depth - 1)), Box::new(self.int(vars, depth - 1)))
            }
        }
    }

    fn boolean(&mut self, vars: usize, depth: u32) -> BoolExpr {
        let choice = if depth == 0 { self.rng.random_range(0..2) } else { self.rng.random_range(0..5) };
        match choice {
            0 => BoolExpr::Lit(self.rng.random_bool(0.5)),
            1 => {
                let op = ["<", "<=", ">", ">=", "==", "!="][self.rng.random_range(0..6)];
                BoolExpr::Cmp(op, self.int(vars, 1), self.int(vars, 1))
            }
            2 => BoolExpr::And(Box::new(self.boolean(vars, depth - 1)), Box::new(self.boolean(vars, depth - 1))),
            3 => BoolExpr::Or(Box::new(self.boolean(vars, depth - 1)), Box::new(self.boolean(vars, depth - 1))),
            _ => BoolExpr::Not(Box::new(self.boolean(vars, depth - 1))),
        }
    }

    fn block(&mut self, vars: usize, depth: u32) -> Vec<Stmt> {
        let len = self.rng.random_range(0..=3);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let roll = self.rng.random_range(0..10);
            let can_branch = depth > 0 && self.sites < self.max_sites;
            let stmt = match roll {
                0..=2 if can_branch => {
                    let site = self.sites;
                    self.sites += 1;
                    let cond = self.boolean(vars, 2);
                    let then = self.block(vars, depth - 1);
                    let other = self.rng.random_bool(0.5).then(|| self.block(vars, depth - 1));
                    Stmt::If(site, cond, then, other)
                }
                3 | 4 if can_branch && self.counters < MAX_COUNTERS => {
                    let site = self.sites;
                    self.sites += 1;
                    let counter = self.counters;
                    self.counters += 1;
                    let limit = self.rng.random_range(0..=4);
                    let cond = self.boolean(vars, 1);
                    let body = self.block(vars, depth - 1);
                    Stmt::Loop(site, counter, limit, cond, body)
                }
                5 if depth < 2 => Stmt::Return(self.int(vars, 2)),
                _ => Stmt::Assign(self.rng.random_range(0..vars), self.int(vars, 2)),
            };
            out.push(stmt);
        }
        out
    }

    fn func(&mut self, name: &'static str, params: usize) -> Func {
        let locals = self.rng.random_range(0..=2);
        let vars = params + locals;
        self.counters = 0;
        let body = self.block(vars, 2);
        let result = self.int(vars, 2);
        Func {
            name,
            params,
            locals,
            body,
            result,
        }
    }

    /// One program of at most `max_sites` branch sites and a suite of one
    /// to three cases. Expected values are computed by the reference
    /// evaluator; a share of them is perturbed to produce failures.
    pub fn program(&mut self) -> Generated {
        let helper = self.rng.random_bool(0.4).then(|| self.func("helper", 1));
        self.has_helper = helper.is_some();
        let main = self.func("subject", 2);
        self.has_helper = false;
        let mut g = Generated {
            helper,
            main,
            sites: self.sites,
            cases: Vec::new(),
        };
        let n_cases = self.rng.random_range(1..=3);
        for _ in 0..n_cases {
            g.cases.push(self.case(&g));
        }
        g
    }

    pub fn case(&mut self, g: &Generated) -> Case {
        let local_branch = self.rng.random_bool(0.4).then(|| self.rng.random_range(-3..=3));
        let n = self.rng.random_range(1..=2);
        let asserts = (0..n)
            .map(|_| {
                let args = (self.rng.random_range(-6..=6), self.rng.random_range(-6..=6));
                let expected = match Reference::new(g).call_main(args) {
                    Ok(v) if self.rng.random_bool(0.8) => v,
                    Ok(v) => v.wrapping_add(1),
                    Err(_) => 0,
                };
                (args, expected)
            })
            .collect();
        Case { local_branch, asserts }
    }
}

fn var_name(f: &Func, i: usize) -> String {
    if i < f.params {
        format!("p{i}")
    } else {
        format!("v{}", i - f.params)
    }
}

fn render_int(f: &Func, e: &IntExpr) -> String {
    match e {
        IntExpr::Lit(v) => format!("({v})"),
        IntExpr::Var(i) => var_name(f, *i),
        IntExpr::Neg(e) => format!("(-{})", render_int(f, e)),
        IntExpr::Bin(op, l, r) => format!("({} {op} {})", render_int(f, l), render_int(f, r)),
        IntExpr::CallHelper(a) => format!("helper({})", render_int(f, a)),
    }
}

fn render_bool(f: &Func, e: &BoolExpr) -> String {
    match e {
        BoolExpr::Lit(b) => b.to_string(),
        BoolExpr::Cmp(op, l, r) => format!("({} {op} {})", render_int(f, l), render_int(f, r)),
        BoolExpr::And(l, r) => format!("({} && {})", render_bool(f, l), render_bool(f, r)),
        BoolExpr::Or(l, r) => format!("({} || {})", render_bool(f, l), render_bool(f, r)),
        BoolExpr::Not(e) => format!("!{}", render_bool(f, e)),
    }
}

fn render_block(f: &Func, block: &[Stmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in block {
        match s {
            Stmt::Assign(v, e) => out.push_str(&format!("{pad}{} = {};\n", var_name(f, *v), render_int(f, e))),
            Stmt::If(_, c, then, other) => {
                out.push_str(&format!("{pad}if ({}) {{\n", render_bool(f, c)));
                render_block(f, then, indent + 1, out);
                match other {
                    Some(b) => {
                        out.push_str(&format!("{pad}}} else {{\n"));
                        render_block(f, b, indent + 1, out);
                        out.push_str(&format!("{pad}}}\n"));
                    }
                    None => out.push_str(&format!("{pad}}}\n")),
                }
            }
            Stmt::Loop(_, k, limit, c, body) => {
                out.push_str(&format!("{pad}c{k} = 0;\n"));
                out.push_str(&format!("{pad}while (c{k} < {limit} && {}) {{\n", render_bool(f, c)));
                render_block(f, body, indent + 1, out);
                out.push_str(&format!("{pad}  c{k} = c{k} + 1;\n{pad}}}\n"));
            }
            Stmt::Return(e) => out.push_str(&format!("{pad}return {};\n", render_int(f, e))),
        }
    }
}

fn render_func(f: &Func) -> String {
    let params: Vec<String> = (0..f.params).map(|i| var_name(f, i)).collect();
    let mut out = format!("fn {}({}) {{\n", f.name, params.join(", "));
    for i in 0..f.locals {
        out.push_str(&format!("  let {} = {};\n", var_name(f, f.params + i), i as i64 + 1));
    }
    for k in 0..MAX_COUNTERS {
        out.push_str(&format!("  let c{k} = 0;\n"));
    }
    render_block(f, &f.body, 1, &mut out);
    out.push_str(&format!("  return {};\n}}\n", render_int(f, &f.result)));
    out
}

impl Generated {
    pub fn program_source(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.helper {
            out.push_str(&render_func(h));
        }
        out.push_str(&render_func(&self.main));
        out
    }

    pub fn suite_source(&self) -> String {
        let mut out = String::from("suite Generated {\n");
        for (i, case) in self.cases.iter().enumerate() {
            out.push_str(&format!("  case c{i} {{\n"));
            if let Some(k) = case.local_branch {
                out.push_str(&format!("    let t = 0;\n    if (t < ({k})) {{ t = 1; }} else {{ t = 2; }}\n"));
            }
            for ((a, b), e) in &case.asserts {
                out.push_str(&format!("    assert subject(({a}), ({b})) == ({e});\n"));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    /// Arms, status label, and assertions executed for the whole suite.
    pub fn reference_run(&self) -> (BTreeSet<u32>, &'static str, u32) {
        let mut r = Reference::new(self);
        let mut failed = false;
        let mut executed = 0;
        for case in &self.cases {
            for (args, expected) in &case.asserts {
                match r.call_main(*args) {
                    Err(()) => return (r.arms, "error", executed),
                    Ok(v) => {
                        executed += 1;
                        if v != *expected {
                            failed = true;
                            break;
                        }
                    }
                }
            }
        }
        (r.arms, if failed { "failure" } else { "pass" }, executed)
    }
}

enum Flow {
    Normal,
    Return(i64),
}

type Eval<T> = Result<T, ()>;

pub struct Reference<'a> {
    g: &'a Generated,
    pub arms: BTreeSet<u32>,
}

impl<'a> Reference<'a> {
    pub fn new(g: &'a Generated) -> Self {
        Reference { g, arms: BTreeSet::new() }
    }

    fn log(&mut self, site: u32, outcome: bool) {
        self.arms.insert(2 * site + u32::from(!outcome));
    }

    pub fn call_main(&mut self, args: (i64, i64)) -> Eval<i64> {
        let main = &self.g.main;
        self.call(main, &[args.0, args.1])
    }

    fn call(&mut self, f: &Func, args: &[i64]) -> Eval<i64> {
        let mut vars: Vec<i64> = args.to_vec();
        vars.extend((0..f.locals).map(|i| i as i64 + 1));
        let mut counters = HashMap::new();
        match self.block(&f.body, &mut vars, &mut counters)? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => self.int(&f.result, &vars),
        }
    }

    fn block(&mut self, block: &[Stmt], vars: &mut Vec<i64>, counters: &mut HashMap<usize, i64>) -> Eval<Flow> {
        for s in block {
            match s {
                Stmt::Assign(v, e) => vars[*v] = self.int(e, vars)?,
                Stmt::If(site, c, then, other) => {
                    let taken = self.boolean(c, vars)?;
                    self.log(*site, taken);
                    let branch = if taken { Some(then) } else { other.as_ref() };
                    if let Some(b) = branch {
                        if let Flow::Return(v) = self.block(b, vars, counters)? {
                            return Ok(Flow::Return(v));
                        }
                    }
                }
                Stmt::Loop(site, k, limit, c, body) => {
                    counters.insert(*k, 0);
                    loop {
                        let taken = counters[k] < *limit && self.boolean(c, vars)?;
                        self.log(*site, taken);
                        if !taken {
                            break;
                        }
                        if let Flow::Return(v) = self.block(body, vars, counters)? {
                            return Ok(Flow::Return(v));
                        }
                        *counters.get_mut(k).unwrap() += 1;
                    }
                }
                Stmt::Return(e) => return Ok(Flow::Return(self.int(e, vars)?)),
            }
        }
        Ok(Flow::Normal)
    }

    fn int(&mut self, e: &IntExpr, vars: &[i64]) -> Eval<i64> {
        match e {
            IntExpr::Lit(v) => Ok(*v),
            IntExpr::Var(i) => Ok(vars[*i]),
            IntExpr::Neg(e) => self.int(e, vars)?.checked_neg().ok_or(()),
            IntExpr::Bin(op, l, r) => {
                let (a, b) = (self.int(l, vars)?, self.int(r, vars)?);
                match op {
                    '+' => a.checked_add(b),
                    '-' => a.checked_sub(b),
                    '*' => a.checked_mul(b),
                    _ => a.checked_rem(b),
                }
                .ok_or(())
            }
            IntExpr::CallHelper(a) => {
                let arg = self.int(a, vars)?;
                let helper = self.g.helper.as_ref().expect("helper calls only exist with a helper");
                self.call(helper, &[arg])
            }
        }
    }

    fn boolean(&mut self, e: &BoolExpr, vars: &[i64]) -> Eval<bool> {
        match e {
            BoolExpr::Lit(b) => Ok(*b),
            BoolExpr::Cmp(op, l, r) => {
                let (a, b) = (self.int(l, vars)?, self.int(r, vars)?);
                Ok(match *op {
                    "<" => a < b,
                    "<=" => a <= b,
                    ">" => a > b,
                    ">=" => a >= b,
                    "==" => a == b,
                    _ => a != b,
                })
            }
            BoolExpr::And(l, r) => Ok(self.boolean(l, vars)? && self.boolean(r, vars)?),
            BoolExpr::Or(l, r) => Ok(self.boolean(l, vars)? || self.boolean(r, vars)?),
            BoolExpr::Not(e) => Ok(!self.boolean(e, vars)?),
        }
    }
}

/// Checks one generated program against the crate's interpreter. Returns a
/// description of the first disagreement.
pub fn check_against_interpreter(g: &Generated) -> Result<(), String> {
    use verilab_core::minilang::{execute_suite, parse_program, parse_suite, ExecLimits, SourceText};
    let prog_src = g.program_source();
    let suite_src = g.suite_source();
    let prog = parse_program(&SourceText::new(prog_src.as_str(), "gen").unwrap())
        .map_err(|e| format!("program does not parse: {e}\n{prog_src}"))?;
    let suite = parse_suite(&SourceText::new(suite_src.as_str(), "gen").unwrap())
        .map_err(|e| format!("suite does not parse: {e}\n{suite_src}"))?;
    let report = execute_suite(&prog, &suite, ExecLimits::default());
    let (arms, status, executed) = g.reference_run();
    let got = (&report.covered_arm_ids, report.status.as_str(), report.arms_total);
    let want = (&arms, status, 2 * g.sites);
    if got != want {
        return Err(format!("interpreter {got:?} vs reference {want:?}\n{prog_src}\n{suite_src}"));
    }
    if status != "error" && report.assertions_executed != executed {
        return Err(format!("assertions executed {} vs {executed}", report.assertions_executed));
    }
    Ok(())
}
