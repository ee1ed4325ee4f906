//! Control-flow elimination: loops are unrolled, conditionals resolved and
//! array indices folded, leaving a [`StraightLineProgram`].

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ast::{self, BinaryOp, ExprKind, FunctionIR, ScalarType, SourceSpan, Stmt, StmtKind};
use crate::expr::{Constant, Expr, Func, Kind, LeafNames};
use crate::validate::{validate_subset, Violation};

/// Default cap on unrolled assignments (and loop iterations).
pub const DEFAULT_MAX_ASSIGNMENTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlattenError {
    #[error("{span}: expression is not a compile-time integer constant")]
    NotConstant { span: SourceSpan },
    #[error("{span}: integer division by zero")]
    DivisionByZero { span: SourceSpan },
    #[error("{span}: integer overflow in constant expression")]
    Overflow { span: SourceSpan },
    #[error("{span}: unrolling exceeds the limit of {limit} assignments")]
    BoundExplosion { span: SourceSpan, limit: usize },
    #[error("{span}: loop step is zero")]
    NonTerminatingLoop { span: SourceSpan },
    #[error("{span}: index {index:?} out of bounds for `{name}`")]
    IndexOutOfBounds {
        span: SourceSpan,
        name: String,
        index: Vec<i64>,
    },
    #[error("{span}: `{name}` is read before it is assigned")]
    Uninitialized { span: SourceSpan, name: String },
    #[error("{} subset violation(s), first at {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

/// Integer bindings visible to [`eval_const`].
pub trait ConstEnv {
    fn lookup(&self, name: &str) -> Option<i64>;
}

impl ConstEnv for HashMap<String, i64> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

impl ConstEnv for HashMap<&str, i64> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

/// Evaluates an integer expression with C semantics. Comparisons yield 0 or 1.
pub fn eval_const(expr: &ast::Expr, env: &impl ConstEnv) -> Result<i64, FlattenError> {
    let span = expr.span;
    let overflow = || FlattenError::Overflow { span };
    match &expr.kind {
        ExprKind::Constant(lit) if lit.is_int => lit
            .text
            .parse::<i64>()
            .map_err(|_| FlattenError::NotConstant { span }),
        ExprKind::Var(name) => env.lookup(name).ok_or(FlattenError::NotConstant { span }),
        ExprKind::Unary { operand, .. } => eval_const(operand, env)?.checked_neg().ok_or_else(overflow),
        ExprKind::Binary { op, lhs, rhs } => {
            let a = eval_const(lhs, env)?;
            let b = eval_const(rhs, env)?;
            Ok(match op {
                BinaryOp::Add => a.checked_add(b).ok_or_else(overflow)?,
                BinaryOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
                BinaryOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
                BinaryOp::Div => {
                    if b == 0 {
                        return Err(FlattenError::DivisionByZero { span });
                    }
                    a.checked_div(b).ok_or_else(overflow)?
                }
                BinaryOp::Lt => (a < b) as i64,
                BinaryOp::Le => (a <= b) as i64,
                BinaryOp::Gt => (a > b) as i64,
                BinaryOp::Ge => (a >= b) as i64,
                BinaryOp::Eq => (a == b) as i64,
                BinaryOp::Ne => (a != b) as i64,
            })
        }
        ExprKind::Constant(_) | ExprKind::ArrayRef { .. } | ExprKind::Call { .. } => {
            Err(FlattenError::NotConstant { span })
        }
    }
}

/// One scalar input: a parameter element in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputSlot {
    pub param: String,
    pub index: Vec<usize>,
}

impl InputSlot {
    /// C spelling, e.g. `a[0][1]`.
    pub fn c_name(&self) -> String {
        let mut s = self.param.clone();
        for i in &self.index {
            let _ = write!(s, "[{i}]");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignKind {
    /// From a declaration initializer.
    Init,
    /// From an assignment statement.
    Update,
}

/// A versioned scalar location. Each redefinition of a variable gets a new version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    pub index: Vec<usize>,
    pub version: u32,
}

impl Target {
    pub fn c_name(&self) -> String {
        InputSlot {
            param: self.name.clone(),
            index: self.index.clone(),
        }
        .c_name()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub target: Target,
    pub kind: AssignKind,
    /// Leaves are `Input(slot)` or `Temp(k)` with `k` an earlier assignment.
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StraightLineProgram {
    pub inputs: Vec<InputSlot>,
    pub assigns: Vec<Assign>,
    /// Assignment holding the final energy value.
    pub output: Option<u32>,
}

impl StraightLineProgram {
    /// Slots belonging to `param`, in row-major order.
    pub fn param_slots(&self, param: &str) -> Vec<u32> {
        self.inputs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.param == param)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Checks def-before-use, slot ranges and the output reference.
    pub fn check(&self) -> Result<(), String> {
        for (k, a) in self.assigns.iter().enumerate() {
            let mut bad = None;
            let _ = a.rhs.replace_leaves(&mut |leaf| {
                match leaf {
                    Kind::Input(i) if *i as usize >= self.inputs.len() => {
                        bad = Some(format!("assignment {k} reads missing input {i}"))
                    }
                    Kind::Temp(t) if *t as usize >= k => {
                        bad = Some(format!("assignment {k} reads later assignment {t}"))
                    }
                    _ => {}
                }
                None
            });
            if let Some(msg) = bad {
                return Err(msg);
            }
        }
        match self.output {
            Some(o) if o as usize >= self.assigns.len() => {
                Err(format!("output {o} is not an assignment"))
            }
            _ => Ok(()),
        }
    }

    /// Names for rendering: inputs by C spelling, temporaries by variable name.
    /// With `versioned`, temporaries carry `#version`.
    pub fn names(&self, versioned: bool) -> ProgramNames<'_> {
        ProgramNames {
            program: self,
            versioned,
        }
    }

    /// Right-hand side of assignment `k` as C text.
    pub fn render_rhs(&self, k: usize, versioned: bool) -> String {
        crate::expr::render(&self.assigns[k].rhs, &self.names(versioned))
    }

    /// Human-readable dump of the whole program.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# straight-line program: {} inputs, {} assignments",
            self.inputs.len(),
            self.assigns.len()
        );
        for (i, slot) in self.inputs.iter().enumerate() {
            let _ = writeln!(s, "input {i} {}", slot.c_name());
        }
        let names = self.names(true);
        for (k, a) in self.assigns.iter().enumerate() {
            let mut lhs = String::new();
            names.temp(k as u32, &mut lhs);
            let _ = writeln!(s, "{lhs} = {}", crate::expr::render(&a.rhs, &names));
        }
        if let Some(o) = self.output {
            let mut out = String::new();
            names.temp(o, &mut out);
            let _ = writeln!(s, "output {out}");
        }
        s
    }
}

pub struct ProgramNames<'a> {
    program: &'a StraightLineProgram,
    versioned: bool,
}

impl LeafNames for ProgramNames<'_> {
    fn input(&self, slot: u32, out: &mut String) {
        out.push_str(&self.program.inputs[slot as usize].c_name());
    }

    fn temp(&self, id: u32, out: &mut String) {
        let t = &self.program.assigns[id as usize].target;
        out.push_str(&t.c_name());
        if self.versioned {
            let _ = write!(out, "#{}", t.version);
        }
    }
}

/// Unrolls with the default assignment cap.
pub fn unroll(ir: &FunctionIR) -> Result<StraightLineProgram, FlattenError> {
    unroll_with_limit(ir, DEFAULT_MAX_ASSIGNMENTS)
}

pub fn unroll_with_limit(ir: &FunctionIR, limit: usize) -> Result<StraightLineProgram, FlattenError> {
    let violations = validate_subset(ir);
    if !violations.is_empty() {
        return Err(FlattenError::Invalid(violations));
    }

    let mut u = Unroller {
        scopes: vec![HashMap::new()],
        assigns: Vec::new(),
        versions: HashMap::new(),
        provisional: HashMap::new(),
        provisional_order: Vec::new(),
        limit,
        steps: 0,
    };
    for (i, p) in ir.params.iter().enumerate() {
        let dims = if p.extents.iter().all(Option::is_some) {
            Some(p.extents.iter().map(|e| e.unwrap()).collect())
        } else {
            None
        };
        u.bind(
            &p.name,
            Binding::Double {
                param: Some(i),
                dims,
                cells: HashMap::new(),
            },
        );
    }
    u.scopes.push(HashMap::new());
    u.stmts(&ir.body)?;

    let output = match u.scopes[1].get(&ir.energy_var) {
        Some(Binding::Double { cells, .. }) => match cells.get(&Vec::new()).map(Expr::kind) {
            Some(Kind::Temp(k)) => *k,
            _ => {
                return Err(FlattenError::Uninitialized {
                    span: ir.span,
                    name: ir.energy_var.clone(),
                })
            }
        },
        _ => {
            return Err(FlattenError::Uninitialized {
                span: ir.span,
                name: ir.energy_var.clone(),
            })
        }
    };

    // Lay out every parameter row-major, inferring missing extents from the
    // largest index the unrolled body touched.
    let mut inputs = Vec::new();
    let mut slot_of: HashMap<(usize, Vec<usize>), u32> = HashMap::new();
    for (pi, p) in ir.params.iter().enumerate() {
        let extents: Vec<usize> = (0..p.rank)
            .map(|d| {
                p.extents[d].unwrap_or_else(|| {
                    u.provisional_order
                        .iter()
                        .filter(|(q, _)| *q == pi)
                        .map(|(_, idx)| idx[d] + 1)
                        .max()
                        .unwrap_or(0)
                })
            })
            .collect();
        for index in row_major(&extents) {
            slot_of.insert((pi, index.clone()), inputs.len() as u32);
            inputs.push(InputSlot {
                param: p.name.clone(),
                index,
            });
        }
    }
    let remap: Vec<u32> = u
        .provisional_order
        .iter()
        .map(|key| slot_of[key])
        .collect();
    let assigns = u
        .assigns
        .into_iter()
        .map(|a| Assign {
            rhs: a.rhs.replace_leaves(&mut |leaf| match leaf {
                Kind::Input(p) => Some(Expr::input(remap[*p as usize])),
                _ => None,
            }),
            ..a
        })
        .collect();

    Ok(StraightLineProgram {
        inputs,
        assigns,
        output: Some(output),
    })
}

/// All index tuples of a box, last index fastest.
pub fn row_major(extents: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = extents.iter().product();
    let mut out = Vec::with_capacity(total);
    if total == 0 && !extents.is_empty() {
        return out;
    }
    let mut idx = vec![0; extents.len()];
    for _ in 0..total.max(1) {
        out.push(idx.clone());
        for d in (0..extents.len()).rev() {
            idx[d] += 1;
            if idx[d] < extents[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

enum Binding {
    Int(Option<i64>),
    Double {
        param: Option<usize>,
        dims: Option<Vec<usize>>,
        cells: HashMap<Vec<usize>, Expr>,
    },
}

struct Unroller {
    scopes: Vec<HashMap<String, Binding>>,
    assigns: Vec<Assign>,
    versions: HashMap<(String, Vec<usize>), u32>,
    provisional: HashMap<(usize, Vec<usize>), u32>,
    provisional_order: Vec<(usize, Vec<usize>)>,
    limit: usize,
    steps: usize,
}

impl ConstEnv for Unroller {
    fn lookup(&self, name: &str) -> Option<i64> {
        match self.binding(name)? {
            Binding::Int(v) => *v,
            Binding::Double { .. } => None,
        }
    }
}

impl Unroller {
    fn bind(&mut self, name: &str, b: Binding) {
        self.scopes.last_mut().unwrap().insert(name.to_string(), b);
    }

    fn binding(&self, name: &str) -> Option<&Binding> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn binding_mut(&mut self, name: &str) -> Option<&mut Binding> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }

    fn tick(&mut self, span: SourceSpan) -> Result<(), FlattenError> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(FlattenError::BoundExplosion {
                span,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }

    fn stmts(&mut self, body: &[Stmt]) -> Result<(), FlattenError> {
        body.iter().try_for_each(|s| self.stmt(s))
    }

    fn scoped(&mut self, body: &[Stmt]) -> Result<(), FlattenError> {
        self.scopes.push(HashMap::new());
        let r = self.stmts(body);
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FlattenError> {
        match &s.kind {
            StmtKind::Declaration { name, ty, dims, init } => {
                let dims = dims
                    .iter()
                    .map(|d| {
                        let n = eval_const(d, self)?;
                        if n <= 0 {
                            Err(FlattenError::IndexOutOfBounds {
                                span: d.span,
                                name: name.clone(),
                                index: vec![n],
                            })
                        } else {
                            Ok(n as usize)
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                match ty {
                    ScalarType::Int => {
                        let v = init.as_ref().map(|e| eval_const(e, self)).transpose()?;
                        self.bind(name, Binding::Int(v));
                    }
                    ScalarType::Double => {
                        let value = init.as_ref().map(|e| self.lower(e)).transpose()?;
                        self.bind(
                            name,
                            Binding::Double {
                                param: None,
                                dims: Some(dims),
                                cells: HashMap::new(),
                            },
                        );
                        if let Some(rhs) = value {
                            self.write(name, Vec::new(), rhs, AssignKind::Init, s.span)?;
                        }
                    }
                }
            }
            StmtKind::Assignment { target, rhs } => {
                let index = self.indices(&target.name, &target.indices, target.span)?;
                match self.binding(&target.name) {
                    Some(Binding::Int(_)) => {
                        let v = eval_const(rhs, self)?;
                        if let Some(Binding::Int(slot)) = self.binding_mut(&target.name) {
                            *slot = Some(v);
                        }
                    }
                    _ => {
                        let value = self.lower(rhs)?;
                        self.write(&target.name, index, value, AssignKind::Update, s.span)?;
                    }
                }
            }
            StmtKind::ForLoop { counter, init, cond, step, body } => {
                let mut i = eval_const(init, self)?;
                loop {
                    self.scopes.push(HashMap::new());
                    self.bind(counter, Binding::Int(Some(i)));
                    let go = eval_const(cond, self)? != 0;
                    if !go {
                        self.scopes.pop();
                        break;
                    }
                    self.tick(s.span)?;
                    self.scoped(body)?;
                    let delta = eval_const(step, self)?;
                    self.scopes.pop();
                    if delta == 0 {
                        return Err(FlattenError::NonTerminatingLoop { span: step.span });
                    }
                    i = i
                        .checked_add(delta)
                        .ok_or(FlattenError::Overflow { span: step.span })?;
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                if eval_const(cond, self)? != 0 {
                    self.scoped(then_body)?;
                } else if let Some(b) = else_body {
                    self.scoped(b)?;
                }
            }
            StmtKind::Block(body) => self.scoped(body)?,
            StmtKind::Return(_) => {}
        }
        Ok(())
    }

    fn indices(
        &self,
        name: &str,
        exprs: &[ast::Expr],
        span: SourceSpan,
    ) -> Result<Vec<usize>, FlattenError> {
        let raw = exprs
            .iter()
            .map(|e| eval_const(e, self))
            .collect::<Result<Vec<_>, _>>()?;
        let dims = match self.binding(name) {
            Some(Binding::Double { dims, .. }) => dims.as_deref(),
            _ => None,
        };
        let in_bounds = raw.iter().enumerate().all(|(d, &i)| {
            i >= 0 && dims.is_none_or(|dims| (i as usize) < dims[d])
        });
        if !in_bounds {
            return Err(FlattenError::IndexOutOfBounds {
                span,
                name: name.to_string(),
                index: raw,
            });
        }
        Ok(raw.into_iter().map(|i| i as usize).collect())
    }

    fn write(
        &mut self,
        name: &str,
        index: Vec<usize>,
        rhs: Expr,
        kind: AssignKind,
        span: SourceSpan,
    ) -> Result<(), FlattenError> {
        self.tick(span)?;
        let k = self.assigns.len() as u32;
        let version = self.versions.entry((name.to_string(), index.clone())).or_insert(0);
        let target = Target {
            name: name.to_string(),
            index: index.clone(),
            version: *version,
        };
        *version += 1;
        self.assigns.push(Assign { target, kind, rhs });
        if let Some(Binding::Double { cells, .. }) = self.binding_mut(name) {
            cells.insert(index, Expr::temp(k));
        }
        Ok(())
    }

    fn read(&mut self, name: &str, index: Vec<usize>, span: SourceSpan) -> Result<Expr, FlattenError> {
        let uninit = || FlattenError::Uninitialized {
            span,
            name: name.to_string(),
        };
        let Some(Binding::Double { param, cells, .. }) = self.binding(name) else {
            return Err(uninit());
        };
        if let Some(e) = cells.get(&index) {
            return Ok(e.clone());
        }
        let Some(p) = *param else {
            return Err(uninit());
        };
        let key = (p, index);
        let next = self.provisional.len() as u32;
        let id = *self.provisional.entry(key.clone()).or_insert_with(|| {
            self.provisional_order.push(key);
            next
        });
        Ok(Expr::input(id))
    }

    /// True when C would evaluate `e` in integer arithmetic.
    fn int_typed(&self, e: &ast::Expr) -> bool {
        match &e.kind {
            ExprKind::Constant(lit) => lit.is_int,
            ExprKind::Var(name) => matches!(self.binding(name), Some(Binding::Int(_))),
            ExprKind::Unary { operand, .. } => self.int_typed(operand),
            ExprKind::Binary { lhs, rhs, .. } => self.int_typed(lhs) && self.int_typed(rhs),
            ExprKind::ArrayRef { .. } | ExprKind::Call { .. } => false,
        }
    }

    /// Converts a runtime expression, folding integer subexpressions to literals.
    fn lower(&mut self, e: &ast::Expr) -> Result<Expr, FlattenError> {
        if self.int_typed(e) {
            return match &e.kind {
                ExprKind::Constant(lit) => Ok(Expr::constant(Constant::from_literal(&lit.text, lit.value))),
                _ => Ok(Expr::int(eval_const(e, self)?)),
            };
        }
        Ok(match &e.kind {
            ExprKind::Constant(lit) => Expr::constant(Constant::from_literal(&lit.text, lit.value)),
            ExprKind::Var(name) => self.read(name, Vec::new(), e.span)?,
            ExprKind::ArrayRef { base, indices } => {
                let idx = self.indices(base, indices, e.span)?;
                self.read(base, idx, e.span)?
            }
            ExprKind::Unary { operand, .. } => Expr::neg(self.lower(operand)?),
            ExprKind::Binary { op, lhs, rhs } => {
                let op = match op {
                    BinaryOp::Add => crate::expr::BinOp::Add,
                    BinaryOp::Sub => crate::expr::BinOp::Sub,
                    BinaryOp::Mul => crate::expr::BinOp::Mul,
                    BinaryOp::Div => crate::expr::BinOp::Div,
                    // validate_subset rejects comparisons in value position.
                    _ => return Err(FlattenError::NotConstant { span: e.span }),
                };
                let a = self.lower(lhs)?;
                let b = self.lower(rhs)?;
                Expr::binary(op, a, b)
            }
            ExprKind::Call { intrinsic, args } => match Func::from_intrinsic(*intrinsic) {
                Some(f) => Expr::call(f, self.lower(&args[0])?),
                None => {
                    let base = self.lower(&args[0])?;
                    Expr::pow(base, self.lower(&args[1])?)
                }
            },
        })
    }
}
