//! Checks that control flow and indexing are decidable at transform time.
//!
//! Integer locals and loop counters are compile-time values; `double`
//! parameters and locals are runtime values. Loop bounds, loop steps, `if`
//! conditions, array indices and integer assignments may only depend on the
//! former.

use std::collections::HashMap;
use std::fmt;

use crate::ast::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub span: SourceSpan,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.reason)
    }
}

/// Returns one violation per offending node; empty when the function can be unrolled.
pub fn validate_subset(ir: &FunctionIR) -> Vec<Violation> {
    let mut v = Validator {
        scopes: vec![HashMap::new()],
        out: Vec::new(),
    };
    for p in &ir.params {
        v.declare(&p.name, false);
    }
    v.stmts(&ir.body);
    v.out
}

struct Validator {
    /// name -> is a compile-time integer
    scopes: Vec<HashMap<String, bool>>,
    out: Vec<Violation>,
}

impl Validator {
    fn declare(&mut self, name: &str, compile_time: bool) {
        self.scopes
            .last_mut()
            .unwrap()
            .insert(name.to_string(), compile_time);
    }

    fn is_compile_time(&self, name: &str) -> bool {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .unwrap_or(false)
    }

    fn push(&mut self, span: SourceSpan, reason: impl Into<String>) {
        self.out.push(Violation {
            span,
            reason: reason.into(),
        });
    }

    /// True when `e` evaluates to an integer using only literals and compile-time names.
    fn constant(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Constant(lit) => lit.is_int,
            ExprKind::Var(name) => self.is_compile_time(name),
            ExprKind::ArrayRef { .. } | ExprKind::Call { .. } => false,
            ExprKind::Unary { operand, .. } => self.constant(operand),
            ExprKind::Binary { lhs, rhs, .. } => self.constant(lhs) && self.constant(rhs),
        }
    }

    fn require_constant(&mut self, e: &Expr, what: &str) {
        if self.constant(e) {
            self.indices_in(e);
        } else {
            self.push(e.span, what);
        }
    }

    /// Checks a runtime-valued expression: indices constant, no comparisons as values.
    fn value(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Binary { op, lhs, rhs } => {
                if op.is_comparison() {
                    self.push(e.span, "comparison used as a value");
                }
                self.value(lhs);
                self.value(rhs);
            }
            ExprKind::Unary { operand, .. } => self.value(operand),
            ExprKind::Call { args, .. } => args.iter().for_each(|a| self.value(a)),
            ExprKind::ArrayRef { indices, .. } => self.check_indices(indices),
            ExprKind::Constant(_) | ExprKind::Var(_) => {}
        }
    }

    fn indices_in(&mut self, e: &Expr) {
        let mut refs = Vec::new();
        e.walk(&mut |n| {
            if let ExprKind::ArrayRef { indices, .. } = &n.kind {
                refs.push(indices.clone());
            }
        });
        for idx in refs {
            self.check_indices(&idx);
        }
    }

    fn check_indices(&mut self, indices: &[Expr]) {
        for idx in indices {
            self.require_constant(idx, "non-constant array index");
        }
    }

    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn scoped(&mut self, body: &[Stmt]) {
        self.scopes.push(HashMap::new());
        self.stmts(body);
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Declaration { name, ty, dims, init } => {
                for d in dims {
                    self.require_constant(d, "non-constant array extent");
                }
                if let Some(init) = init {
                    self.assigned_value(*ty, init);
                }
                self.declare(name, *ty == ScalarType::Int);
            }
            StmtKind::Assignment { target, rhs } => {
                self.check_indices(&target.indices);
                let ty = if self.is_compile_time(&target.name) {
                    ScalarType::Int
                } else {
                    ScalarType::Double
                };
                self.assigned_value(ty, rhs);
            }
            StmtKind::ForLoop { counter, init, cond, step, body } => {
                self.require_constant(init, "non-constant loop start");
                self.scopes.push(HashMap::new());
                self.declare(counter, true);
                self.require_constant(cond, "non-constant loop bound");
                self.require_constant(step, "non-constant loop step");
                self.scoped(body);
                self.scopes.pop();
            }
            StmtKind::If { cond, then_body, else_body } => {
                if self.constant(cond) {
                    self.indices_in(cond);
                } else {
                    self.push(cond.span, "variable conditional");
                }
                self.scoped(then_body);
                if let Some(b) = else_body {
                    self.scoped(b);
                }
            }
            StmtKind::Block(body) => self.scoped(body),
            StmtKind::Return(_) => {}
        }
    }

    fn assigned_value(&mut self, ty: ScalarType, e: &Expr) {
        match ty {
            ScalarType::Int => self.require_constant(e, "int variable assigned a runtime value"),
            ScalarType::Double => self.value(e),
        }
    }
}
