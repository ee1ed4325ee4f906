//! Numerical oracles: expression evaluation, a reference interpreter for the
//! looped source, central finite differences, and the report they feed.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ast::{BinaryOp, ExprKind, FunctionIR, Intrinsic, ScalarType, Stmt, StmtKind};
use crate::corpus::{CorpusFunction, SampleBox};
use crate::diff::{lower_index, DiffOptions, VarIndexMap};
use crate::expr::{Expr, Func, Kind};
use crate::flatten::{eval_const, ConstEnv, InputSlot, StraightLineProgram};
use crate::pipeline::{analyze, Analysis, Error, Modes};

/// Base finite-difference step; the step for `x_j` is `DEFAULT_H * max(1, |x_j|)`.
pub const DEFAULT_H: f64 = 1e-5;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const HESSIAN_TOL: f64 = 5e-4;
/// Allowed disagreement between the energy expression and the loop interpreter.
pub const FUNCTION_TOL: f64 = 1e-12;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("input slot {0} is not bound")]
    UnboundSlot(u32),
    #[error("temporary {0} is not bound")]
    UnboundTemp(u32),
    #[error("program has no output")]
    NoOutput,
}

/// Evaluates `e` with input slot `i` bound to `inputs[i]`.
pub fn eval_expr(e: &Expr, inputs: &[f64]) -> Result<f64, EvalError> {
    eval_with(e, inputs, &[], &mut HashMap::new())
}

/// Evaluates several expressions at one point, sharing common subtrees.
pub fn eval_many(exprs: &[Expr], inputs: &[f64]) -> Result<Vec<f64>, EvalError> {
    let mut memo = HashMap::new();
    exprs.iter().map(|e| eval_with(e, inputs, &[], &mut memo)).collect()
}

fn eval_with(
    e: &Expr,
    inputs: &[f64],
    temps: &[f64],
    memo: &mut HashMap<usize, f64>,
) -> Result<f64, EvalError> {
    let mut missing = None;
    let v = e.fold(memo, &mut |node, k| match node.kind() {
        Kind::Const(c) => c.value(),
        Kind::Input(i) => inputs.get(*i as usize).copied().unwrap_or_else(|| {
            missing = Some(EvalError::UnboundSlot(*i));
            f64::NAN
        }),
        Kind::Temp(t) => temps.get(*t as usize).copied().unwrap_or_else(|| {
            missing = Some(EvalError::UnboundTemp(*t));
            f64::NAN
        }),
        Kind::Neg(_) => -k[0],
        Kind::Binary(op, ..) => op.apply(k[0], k[1]),
        Kind::Call(f, _) => f.apply(k[0]),
        Kind::Pow(..) => k[0].powf(k[1]),
    });
    match missing {
        Some(err) => Err(err),
        None => Ok(v),
    }
}

/// Executes the straight-line program statement by statement.
pub fn eval_program(p: &StraightLineProgram, inputs: &[f64]) -> Result<f64, EvalError> {
    let out = p.output.ok_or(EvalError::NoOutput)?;
    let mut temps = Vec::with_capacity(p.assigns.len());
    for a in p.assigns.iter().take(out as usize + 1) {
        let v = eval_with(&a.rhs, inputs, &temps, &mut HashMap::new())?;
        temps.push(v);
    }
    temps.get(out as usize).copied().ok_or(EvalError::UnboundTemp(out))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("`{0}` read before assignment")]
    Uninitialized(String),
    #[error("no value supplied for {0}")]
    MissingInput(String),
    #[error("{0}")]
    Const(#[from] crate::flatten::FlattenError),
    #[error("unsupported statement at {0}")]
    Unsupported(crate::ast::SourceSpan),
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Int(i64),
    Double(f64),
}

impl Value {
    fn double(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Double(d) => d,
        }
    }
}

enum Cell {
    Int(Option<i64>),
    Double(HashMap<Vec<usize>, f64>),
    Param(String),
}

/// Reference executor: runs the looped function directly on `values`, where
/// `values[i]` is the value of `inputs[i]`. Integer arithmetic follows C.
pub fn interpret(ir: &FunctionIR, inputs: &[InputSlot], values: &[f64]) -> Result<f64, InterpError> {
    let params: HashMap<(String, Vec<usize>), f64> = inputs
        .iter()
        .zip(values)
        .map(|(s, v)| ((s.param.clone(), s.index.clone()), *v))
        .collect();
    let mut m = Interp {
        params,
        scopes: vec![HashMap::new()],
    };
    for p in &ir.params {
        m.scopes[0].insert(p.name.clone(), Cell::Param(p.name.clone()));
    }
    m.scopes.push(HashMap::new());
    m.stmts(&ir.body)?;
    match m.scopes[1].get(&ir.energy_var) {
        Some(Cell::Double(cells)) => cells
            .get(&Vec::new())
            .copied()
            .ok_or_else(|| InterpError::Uninitialized(ir.energy_var.clone())),
        _ => Err(InterpError::Uninitialized(ir.energy_var.clone())),
    }
}

struct Interp {
    params: HashMap<(String, Vec<usize>), f64>,
    scopes: Vec<HashMap<String, Cell>>,
}

impl ConstEnv for Interp {
    fn lookup(&self, name: &str) -> Option<i64> {
        match self.cell(name)? {
            Cell::Int(v) => *v,
            _ => None,
        }
    }
}

impl Interp {
    fn cell(&self, name: &str) -> Option<&Cell> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn cell_mut(&mut self, name: &str) -> Option<&mut Cell> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }

    fn stmts(&mut self, body: &[Stmt]) -> Result<(), InterpError> {
        body.iter().try_for_each(|s| self.stmt(s))
    }

    fn scoped(&mut self, body: &[Stmt]) -> Result<(), InterpError> {
        self.scopes.push(HashMap::new());
        let r = self.stmts(body);
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), InterpError> {
        match &s.kind {
            StmtKind::Declaration { name, ty, init, .. } => {
                let value = init.as_ref().map(|e| self.eval(e)).transpose()?;
                let cell = match ty {
                    ScalarType::Int => Cell::Int(value.map(|v| match v {
                        Value::Int(i) => i,
                        Value::Double(d) => d as i64,
                    })),
                    ScalarType::Double => {
                        let mut cells = HashMap::new();
                        if let Some(v) = value {
                            cells.insert(Vec::new(), v.double());
                        }
                        Cell::Double(cells)
                    }
                };
                self.scopes.last_mut().unwrap().insert(name.clone(), cell);
            }
            StmtKind::Assignment { target, rhs } => {
                let v = self.eval(rhs)?;
                let index = target
                    .indices
                    .iter()
                    .map(|i| eval_const(i, self).map(|i| i as usize))
                    .collect::<Result<Vec<_>, _>>()?;
                match self.cell_mut(&target.name) {
                    Some(Cell::Int(slot)) => {
                        *slot = Some(match v {
                            Value::Int(i) => i,
                            Value::Double(d) => d as i64,
                        })
                    }
                    Some(Cell::Double(cells)) => {
                        cells.insert(index, v.double());
                    }
                    _ => return Err(InterpError::Unsupported(s.span)),
                }
            }
            StmtKind::ForLoop { counter, init, cond, step, body } => {
                let mut i = eval_const(init, self)?;
                loop {
                    self.scopes.push(HashMap::new());
                    self.scopes
                        .last_mut()
                        .unwrap()
                        .insert(counter.clone(), Cell::Int(Some(i)));
                    if eval_const(cond, self)? == 0 {
                        self.scopes.pop();
                        break;
                    }
                    self.scoped(body)?;
                    let delta = eval_const(step, self)?;
                    self.scopes.pop();
                    if delta == 0 {
                        return Err(InterpError::Unsupported(step.span));
                    }
                    i += delta;
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                let taken = match self.eval(cond)? {
                    Value::Int(i) => i != 0,
                    Value::Double(d) => d != 0.0,
                };
                if taken {
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

    fn read(&self, name: &str, index: Vec<usize>) -> Result<f64, InterpError> {
        let spelled = || InputSlot { param: name.to_string(), index: index.clone() }.c_name();
        match self.cell(name) {
            Some(Cell::Double(cells)) => cells
                .get(&index)
                .copied()
                .ok_or_else(|| InterpError::Uninitialized(spelled())),
            Some(Cell::Param(p)) => self
                .params
                .get(&(p.clone(), index.clone()))
                .copied()
                .ok_or_else(|| InterpError::MissingInput(spelled())),
            _ => Err(InterpError::Uninitialized(spelled())),
        }
    }

    fn eval(&self, e: &crate::ast::Expr) -> Result<Value, InterpError> {
        Ok(match &e.kind {
            ExprKind::Constant(lit) => {
                if lit.is_int {
                    Value::Int(eval_const(e, self)?)
                } else {
                    Value::Double(lit.value)
                }
            }
            ExprKind::Var(name) => match self.cell(name) {
                Some(Cell::Int(Some(i))) => Value::Int(*i),
                Some(Cell::Int(None)) => return Err(InterpError::Uninitialized(name.clone())),
                _ => Value::Double(self.read(name, Vec::new())?),
            },
            ExprKind::ArrayRef { base, indices } => {
                let index = indices
                    .iter()
                    .map(|i| eval_const(i, self).map(|i| i as usize))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::Double(self.read(base, index)?)
            }
            ExprKind::Unary { operand, .. } => match self.eval(operand)? {
                Value::Int(_) => Value::Int(eval_const(e, self)?),
                Value::Double(d) => Value::Double(-d),
            },
            ExprKind::Binary { op, lhs, rhs } => {
                let (a, b) = (self.eval(lhs)?, self.eval(rhs)?);
                if let (Value::Int(_), Value::Int(_)) = (a, b) {
                    return Ok(Value::Int(eval_const(e, self)?));
                }
                let (x, y) = (a.double(), b.double());
                match op {
                    BinaryOp::Add => Value::Double(x + y),
                    BinaryOp::Sub => Value::Double(x - y),
                    BinaryOp::Mul => Value::Double(x * y),
                    BinaryOp::Div => Value::Double(x / y),
                    BinaryOp::Lt => Value::Int((x < y) as i64),
                    BinaryOp::Le => Value::Int((x <= y) as i64),
                    BinaryOp::Gt => Value::Int((x > y) as i64),
                    BinaryOp::Ge => Value::Int((x >= y) as i64),
                    BinaryOp::Eq => Value::Int((x == y) as i64),
                    BinaryOp::Ne => Value::Int((x != y) as i64),
                }
            }
            ExprKind::Call { intrinsic, args } => {
                let a = self.eval(&args[0])?.double();
                Value::Double(match Func::from_intrinsic(*intrinsic) {
                    Some(f) => f.apply(a),
                    None => {
                        debug_assert_eq!(*intrinsic, Intrinsic::Pow);
                        a.powf(self.eval(&args[1])?.double())
                    }
                })
            }
        })
    }
}

fn step(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

fn eval_at(p: &StraightLineProgram, x: &[f64]) -> f64 {
    eval_program(p, x).expect("point binds every input slot")
}

/// Central-difference gradient of the program output. Only the program is
/// evaluated, never a derivative expression.
pub fn fd_gradient(p: &StraightLineProgram, vars: &VarIndexMap, x: &[f64], h: f64) -> Vec<f64> {
    let mut pt = x.to_vec();
    vars.slots()
        .iter()
        .map(|&s| {
            let s = s as usize;
            let hj = step(x[s], h);
            pt[s] = x[s] + hj;
            let fp = eval_at(p, &pt);
            pt[s] = x[s] - hj;
            let fm = eval_at(p, &pt);
            pt[s] = x[s];
            (fp - fm) / (2.0 * hj)
        })
        .collect()
}

/// Central second differences; row-major `n x n`.
pub fn fd_hessian(p: &StraightLineProgram, vars: &VarIndexMap, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = vars.len();
    let slots = vars.slots();
    let f0 = eval_at(p, x);
    let mut pt = x.to_vec();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        let si = slots[i] as usize;
        let hi = step(x[si], h);
        pt[si] = x[si] + hi;
        let fp = eval_at(p, &pt);
        pt[si] = x[si] - hi;
        let fm = eval_at(p, &pt);
        pt[si] = x[si];
        out[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let sj = slots[j] as usize;
            let hj = step(x[sj], h);
            let mut f = |di: f64, dj: f64| {
                pt[si] = x[si] + di;
                pt[sj] = x[sj] + dj;
                let v = eval_at(p, &pt);
                pt[si] = x[si];
                pt[sj] = x[sj];
                v
            };
            let v = (f(hi, hj) - f(hi, -hj) - f(-hi, hj) + f(-hi, -hj)) / (4.0 * hi * hj);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdEntry {
    pub point: usize,
    /// `f`, `grad[j]` or `hess[i][j]`.
    pub entry: String,
    pub analytic: f64,
    /// Finite-difference value; for `f` the loop interpreter's value.
    pub fd: f64,
    pub abs_err: f64,
    /// `abs_err / max(1, |analytic|)`.
    pub rel_err: f64,
    pub pass: bool,
}

impl FdEntry {
    fn new(point: usize, entry: String, analytic: f64, fd: f64, tol: f64) -> Self {
        let abs_err = (analytic - fd).abs();
        let rel_err = abs_err / analytic.abs().max(1.0);
        FdEntry {
            point,
            entry,
            analytic,
            fd,
            abs_err,
            rel_err,
            pass: rel_err <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub name: String,
    pub points: usize,
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn pass_count(&self) -> usize {
        self.entries.iter().filter(|e| e.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_err).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {}/{} entries pass over {} points, max relative error {:.3e}",
            self.name,
            self.pass_count(),
            self.entries.len(),
            self.points,
            self.max_rel_err()
        )
    }

    pub fn to_text(&self) -> String {
        let width = self.entries.iter().map(|e| e.entry.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5}  {:<width$}  {:>23}  {:>23}  {:>10}  pass",
            "point", "entry", "analytic", "fd", "relerr"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:>5}  {:<width$}  {:>23.16e}  {:>23.16e}  {:>10.3e}  {}",
                e.point,
                e.entry,
                e.analytic,
                e.fd,
                e.rel_err,
                if e.pass { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "{}", self.summary());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("entry,analytic,fd,relerr,pass\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "p{}:{},{:e},{:e},{:e},{}",
                e.point, e.entry, e.analytic, e.fd, e.rel_err, e.pass
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct VerifyRequest {
    pub function: CorpusFunction,
    pub modes: Modes,
    pub points: usize,
    pub seed: u64,
    pub simplify: bool,
}

impl VerifyRequest {
    pub fn new(function: CorpusFunction) -> Self {
        VerifyRequest {
            function,
            modes: Modes::derivatives(),
            points: 100,
            seed: DEFAULT_SEED,
            simplify: true,
        }
    }
}

/// Draws `count` points over all input slots from the per-parameter boxes.
pub fn sample_points(
    inputs: &[InputSlot],
    box_for: impl Fn(&str) -> SampleBox,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| inputs.iter().map(|s| box_for(&s.param).sample(&mut rng)).collect())
        .collect()
}

/// Runs the pipeline in-process and checks every requested entry at seeded
/// random points. Points are checked in parallel; entries keep point order.
pub fn verify(req: &VerifyRequest) -> Result<FdReport, Error> {
    let f = &req.function;
    let opts = DiffOptions {
        simplify: req.simplify,
        ..Default::default()
    };
    let a = analyze(&f.source, &f.func, &f.energy, &f.vars, req.modes, opts)?;
    let points = sample_points(&a.program.inputs, |p| f.box_for(p), req.points, req.seed);
    let per_point: Vec<Vec<FdEntry>> = points
        .par_iter()
        .enumerate()
        .map(|(k, x)| check_point(&a, req.modes, k, x))
        .collect::<Result<_, _>>()?;
    let name = match f.s {
        Some(s) => format!("{} (s={s})", f.name),
        None => f.name.clone(),
    };
    Ok(FdReport {
        name,
        points: req.points,
        entries: per_point.into_iter().flatten().collect(),
    })
}

fn check_point(a: &Analysis, modes: Modes, k: usize, x: &[f64]) -> Result<Vec<FdEntry>, Error> {
    let b = &a.bundle;
    let n = a.vars.len();
    let mut out = Vec::new();
    let eval = |e: &[Expr]| eval_many(e, x).map_err(|e| Error::Verify(e.to_string()));
    if modes.function {
        let reference = interpret(&a.ir, &a.program.inputs, x).map_err(|e| Error::Verify(e.to_string()))?;
        let value = eval(std::slice::from_ref(&b.f))?[0];
        out.push(FdEntry::new(k, "f".into(), value, reference, FUNCTION_TOL));
    }
    if modes.gradient {
        let g = eval(&b.grad)?;
        let fd = fd_gradient(&a.program, &a.vars, x, DEFAULT_H);
        for j in 0..n {
            out.push(FdEntry::new(k, format!("grad[{j}]"), g[j], fd[j], GRADIENT_TOL));
        }
    }
    if modes.hessian {
        let h = eval(&b.hess_lower)?;
        let fd = fd_hessian(&a.program, &a.vars, x, DEFAULT_H);
        for i in 0..n {
            for j in 0..=i {
                out.push(FdEntry::new(
                    k,
                    format!("hess[{i}][{j}]"),
                    h[lower_index(i, j)],
                    fd[i][j],
                    HESSIAN_TOL,
                ));
            }
        }
    }
    Ok(out)
}

/// Wraps a user source file with default sampling boxes.
pub fn user_function(source: String, func: &str, energy: &str, vars: &[String]) -> CorpusFunction {
    CorpusFunction {
        name: func.to_string(),
        source,
        func: func.to_string(),
        energy: energy.to_string(),
        vars: vars.to_vec(),
        boxes: Vec::new(),
        s: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::flatten::unroll;
    use crate::parser::parse_source;

    fn program(src: &str, func: &str, energy: &str) -> (FunctionIR, StraightLineProgram) {
        let ir = parse_source(src, func, energy).unwrap();
        let p = unroll(&ir).unwrap();
        (ir, p)
    }

    #[test]
    fn eval_known_values() {
        let c = corpus::get("eq2", None).unwrap();
        let (_, p) = program(&c.source, "eq2", "energy");
        assert_eq!(eval_program(&p, &[0.0]).unwrap(), 1.0);

        let c = corpus::get("eq3", Some(2)).unwrap();
        let (_, p) = program(&c.source, "eq3", "energy");
        let f = crate::diff::substitute(&p).unwrap();
        assert_eq!(eval_expr(&f, &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn cross_entropy_value() {
        let c = corpus::get("cross_entropy", None).unwrap();
        let (ir, p) = program(&c.source, "cross_entropy", "loss");
        let x = [0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25];
        let v = eval_program(&p, &x).unwrap();
        let expected = -4.0 * 0.25 * 0.50001f64.ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.693127).abs() < 1e-6);
        assert_eq!(interpret(&ir, &p.inputs, &x).unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn unbound_slots() {
        let e = Expr::add(Expr::input(0), Expr::input(3));
        assert_eq!(eval_expr(&e, &[1.0]), Err(EvalError::UnboundSlot(3)));
        assert_eq!(eval_expr(&Expr::temp(0), &[]), Err(EvalError::UnboundTemp(0)));
    }

    #[test]
    fn fd_on_a_quadratic() {
        let (_, p) = program("double f(double x){ double e = x * x; return 0; }", "f", "e");
        let vars = VarIndexMap::from_names(&p, &["x"]).unwrap();
        let g = fd_gradient(&p, &vars, &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-9);
        let h = fd_hessian(&p, &vars, &[3.0], 1e-5);
        assert!((h[0][0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn fd_polynomial_and_product() {
        let c = corpus::get("eq1", None).unwrap();
        let (_, p) = program(&c.source, "eq1", "energy");
        let vars = VarIndexMap::from_names(&p, &["x"]).unwrap();
        let g = fd_gradient(&p, &vars, &[1.0], DEFAULT_H);
        assert!((g[0] - 164.0 / 7.0).abs() < 1e-5);

        let c = corpus::get("eq3", Some(2)).unwrap();
        let (_, p) = program(&c.source, "eq3", "energy");
        let vars = VarIndexMap::from_names(&p, &["x"]).unwrap();
        let h = fd_hessian(&p, &vars, &[0.5, 0.5], DEFAULT_H);
        assert!((h[0][0] + 8.0).abs() < 1e-4);
        assert!((h[1][1] + 8.0).abs() < 1e-4);
        assert!(h[1][0].abs() < 1e-4);
    }

    #[test]
    fn interpreter_handles_int_semantics_and_branches() {
        let src = "double f(double *x){ double e = 0; int k = 7;
            for (int i = 0; i < 4; i += 1) { if (i / 2 == 1) e = e + x[i] * (k / 2); else e -= x[i]; }
            return 0; }";
        let (ir, p) = program(src, "f", "e");
        let x = [1.0, 2.0, 3.0, 4.0];
        let v = interpret(&ir, &p.inputs, &x).unwrap();
        assert_eq!(v, -1.0 - 2.0 + 9.0 + 12.0);
        assert_eq!(v.to_bits(), eval_program(&p, &x).unwrap().to_bits());
    }

    #[test]
    fn report_formats() {
        let r = FdReport {
            name: "t".into(),
            points: 1,
            entries: vec![FdEntry::new(0, "grad[0]".into(), 2.0, 2.0 + 1e-9, GRADIENT_TOL)],
        };
        assert!(r.all_pass());
        let csv = r.to_csv();
        assert!(csv.starts_with("entry,analytic,fd,relerr,pass\np0:grad[0],2e0,"));
        assert!(csv.trim_end().ends_with(",true"));
        assert!(r.to_text().contains("1/1 entries pass"));
    }
}
