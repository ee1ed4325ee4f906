//! Symbolic differentiation of the substituted energy expression.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{BinOp, Constant, Expr, Func, Kind};
use crate::flatten::StraightLineProgram;
use crate::simplify::simplify_with;

/// Default cap on the expanded node count of any single expression.
pub const DEFAULT_MAX_NODES: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("{what} has {nodes} expression nodes, above the limit of {limit}")]
    ExpressionExplosion { what: String, nodes: u64, limit: u64 },
    #[error("program has no output assignment")]
    NoOutput,
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
    #[error("variable `{0}` listed twice")]
    DuplicateVar(String),
    #[error("variable `{0}` has no elements (array never indexed)")]
    EmptyVar(String),
}

/// Independent variables, as input slots in derivative order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarIndexMap {
    slots: Vec<u32>,
}

impl VarIndexMap {
    /// Resolves `--vars` style names: a parameter name selects all of its
    /// elements row-major, an element spelling like `a[1][0]` selects one.
    pub fn from_names<S: AsRef<str>>(
        p: &StraightLineProgram,
        names: &[S],
    ) -> Result<VarIndexMap, DiffError> {
        let mut slots = Vec::new();
        let mut seen = HashSet::new();
        for name in names {
            let name = name.as_ref();
            let picked: Vec<u32> = if p.inputs.iter().any(|s| s.param == name) {
                p.param_slots(name)
            } else if let Some(i) = p.inputs.iter().position(|s| s.c_name() == name) {
                vec![i as u32]
            } else {
                return Err(DiffError::UnknownVar(name.to_string()));
            };
            if picked.is_empty() {
                return Err(DiffError::EmptyVar(name.to_string()));
            }
            for s in picked {
                if !seen.insert(s) {
                    return Err(DiffError::DuplicateVar(name.to_string()));
                }
                slots.push(s);
            }
        }
        Ok(VarIndexMap { slots })
    }

    /// Explicit slots; duplicates and out-of-range slots are rejected.
    pub fn from_slots(p: &StraightLineProgram, slots: Vec<u32>) -> Result<VarIndexMap, DiffError> {
        let mut seen = HashSet::new();
        for &s in &slots {
            let Some(slot) = p.inputs.get(s as usize) else {
                return Err(DiffError::UnknownVar(format!("slot {s}")));
            };
            if !seen.insert(s) {
                return Err(DiffError::DuplicateVar(slot.c_name()));
            }
        }
        Ok(VarIndexMap { slots })
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn position(&self, slot: u32) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffOptions {
    pub simplify: bool,
    pub max_nodes: u64,
}

impl Default for DiffOptions {
    fn default() -> Self {
        DiffOptions {
            simplify: true,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

impl DiffOptions {
    pub fn raw() -> Self {
        DiffOptions {
            simplify: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub f: Expr,
    pub grad: Vec<Expr>,
    /// Entry `(i, j)` with `i >= j` lives at `i * (i + 1) / 2 + j`.
    /// Empty when the Hessian was not requested.
    pub hess_lower: Vec<Expr>,
    pub simplified: bool,
}

impl DerivativeBundle {
    pub fn build(
        p: &StraightLineProgram,
        vars: &VarIndexMap,
        opts: DiffOptions,
        with_hessian: bool,
    ) -> Result<DerivativeBundle, DiffError> {
        let mut f = substitute_with_limit(p, opts.max_nodes)?;
        if opts.simplify {
            f = simplify_with(&f, &mut HashMap::new());
        }
        let grad = gradient_of(&f, vars, opts)?;
        let hess_lower = if with_hessian {
            hessian_of(&grad, vars, opts)?
        } else {
            Vec::new()
        };
        Ok(DerivativeBundle {
            f,
            grad,
            hess_lower,
            simplified: opts.simplify,
        })
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    /// Full-matrix access; the upper triangle is the same node as its mirror.
    pub fn hess(&self, i: usize, j: usize) -> &Expr {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        &self.hess_lower[lower_index(r, c)]
    }
}

pub fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

/// Inlines every assignment into the output expression.
pub fn substitute(p: &StraightLineProgram) -> Result<Expr, DiffError> {
    substitute_with_limit(p, DEFAULT_MAX_NODES)
}

pub fn substitute_with_limit(p: &StraightLineProgram, limit: u64) -> Result<Expr, DiffError> {
    let out = p.output.ok_or(DiffError::NoOutput)? as usize;
    let mut values: Vec<Expr> = Vec::with_capacity(out + 1);
    for a in &p.assigns[..=out] {
        let v = a.rhs.replace_leaves(&mut |leaf| match leaf {
            Kind::Temp(t) => Some(values[*t as usize].clone()),
            _ => None,
        });
        values.push(v);
    }
    let f = values.pop().expect("output index checked above");
    check_size("substituted energy", &f, limit)?;
    Ok(f)
}

fn check_size(what: &str, e: &Expr, limit: u64) -> Result<(), DiffError> {
    if e.tree_size() > limit {
        Err(DiffError::ExpressionExplosion {
            what: what.to_string(),
            nodes: e.tree_size(),
            limit,
        })
    } else {
        Ok(())
    }
}

/// Derivative of `e` with respect to input slot `v`, without simplification.
///
/// `Temp` leaves are treated as constants; callers differentiate substituted
/// expressions.
pub fn differentiate(e: &Expr, v: u32) -> Expr {
    Differentiator::new(v).run(e)
}

/// One variable's rules with a memo that can span several expressions.
struct Differentiator {
    v: u32,
    zero: Expr,
    one: Expr,
    /// node id -> (derivative, depends on v)
    memo: HashMap<usize, (Expr, bool)>,
}

impl Differentiator {
    fn new(v: u32) -> Self {
        Differentiator {
            v,
            zero: Expr::zero(),
            one: Expr::one(),
            memo: HashMap::new(),
        }
    }

    fn run(&mut self, e: &Expr) -> Expr {
        let (v, zero, one) = (self.v, self.zero.clone(), self.one.clone());
        e.fold(&mut self.memo, &mut |node, kids| rule(node, kids, v, &zero, &one))
            .0
    }
}

fn is_literal_zero(e: &Expr) -> bool {
    e.as_const().is_some_and(|c| c.text() == "0")
}

fn rule(e: &Expr, kids: &[(Expr, bool)], v: u32, zero: &Expr, one: &Expr) -> (Expr, bool) {
    let dep = kids.iter().any(|k| k.1);
    let d = match e.kind() {
        Kind::Const(_) | Kind::Temp(_) => return (zero.clone(), false),
        Kind::Input(s) => {
            return if *s == v {
                (one.clone(), true)
            } else {
                (zero.clone(), false)
            }
        }
        Kind::Neg(_) => Expr::neg(kids[0].0.clone()),
        Kind::Binary(op, u, w) => {
            let (du, dw) = (kids[0].0.clone(), kids[1].0.clone());
            match op {
                BinOp::Add | BinOp::Sub => {
                    // 0 +- 0 stays a single literal so that terms independent of v
                    // show up as `*0` factors rather than `(0 + 0)` trees.
                    if is_literal_zero(&du) && is_literal_zero(&dw) {
                        zero.clone()
                    } else {
                        Expr::binary(*op, du, dw)
                    }
                }
                BinOp::Mul => Expr::add(Expr::mul(du, w.clone()), Expr::mul(u.clone(), dw)),
                BinOp::Div => Expr::div(
                    Expr::sub(Expr::mul(du, w.clone()), Expr::mul(u.clone(), dw)),
                    Expr::pow(w.clone(), Expr::int(2)),
                ),
            }
        }
        Kind::Pow(u, w) => {
            let (du, dw) = (kids[0].0.clone(), kids[1].0.clone());
            if !kids[1].1 {
                let reduced = match w.as_const() {
                    Some(c) => Expr::constant(Constant::from_f64(c.value() - 1.0)),
                    None => Expr::sub(w.clone(), one.clone()),
                };
                Expr::mul(Expr::mul(w.clone(), Expr::pow(u.clone(), reduced)), du)
            } else {
                Expr::mul(
                    e.clone(),
                    Expr::add(
                        Expr::mul(dw, Expr::call(Func::Log, u.clone())),
                        Expr::div(Expr::mul(w.clone(), du), u.clone()),
                    ),
                )
            }
        }
        Kind::Call(f, u) => {
            let du = kids[0].0.clone();
            match f {
                Func::Log => Expr::mul(Expr::div(one.clone(), u.clone()), du),
                Func::Exp => Expr::mul(e.clone(), du),
                Func::Sin => Expr::mul(Expr::call(Func::Cos, u.clone()), du),
                Func::Cos => Expr::mul(Expr::neg(Expr::call(Func::Sin, u.clone())), du),
                Func::Tan => Expr::div(du, Expr::pow(Expr::call(Func::Cos, u.clone()), Expr::int(2))),
                Func::Sqrt => Expr::div(du, Expr::mul(Expr::int(2), e.clone())),
            }
        }
    };
    (d, dep)
}

/// Raw gradient of the program output.
pub fn gradient(p: &StraightLineProgram, vars: &VarIndexMap) -> Result<Vec<Expr>, DiffError> {
    gradient_of(&substitute(p)?, vars, DiffOptions::raw())
}

/// Raw lower-triangular Hessian of the program output.
pub fn hessian(p: &StraightLineProgram, vars: &VarIndexMap) -> Result<Vec<Expr>, DiffError> {
    let grad = gradient(p, vars)?;
    hessian_of(&grad, vars, DiffOptions::raw())
}

pub fn gradient_of(f: &Expr, vars: &VarIndexMap, opts: DiffOptions) -> Result<Vec<Expr>, DiffError> {
    vars.slots()
        .par_iter()
        .enumerate()
        .map(|(j, &v)| {
            let mut g = differentiate(f, v);
            if opts.simplify {
                g = simplify_with(&g, &mut HashMap::new());
            }
            check_size(&format!("gradient entry {j}"), &g, opts.max_nodes)?;
            Ok(g)
        })
        .collect()
}

/// Row `i` holds the derivatives of `grad[0..=i]` with respect to `vars[i]`.
pub fn hessian_of(grad: &[Expr], vars: &VarIndexMap, opts: DiffOptions) -> Result<Vec<Expr>, DiffError> {
    let rows: Vec<Vec<Expr>> = vars
        .slots()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut d = Differentiator::new(v);
            let mut simp = HashMap::new();
            (0..=i)
                .map(|j| {
                    let mut h = d.run(&grad[j]);
                    if opts.simplify {
                        h = simplify_with(&h, &mut simp);
                    }
                    check_size(&format!("hessian entry ({i}, {j})"), &h, opts.max_nodes)?;
                    Ok(h)
                })
                .collect::<Result<Vec<_>, DiffError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{render, DefaultNames};
    use crate::flatten::unroll;
    use crate::parser::parse_source;

    fn x(i: u32) -> Expr {
        Expr::input(i)
    }

    fn program(src: &str, energy: &str) -> StraightLineProgram {
        unroll(&parse_source(src, "f", energy).unwrap()).unwrap()
    }

    #[test]
    fn substitute_chain() {
        let p = program("double f(double x){ double t = x * x; double e = t + t; return 0; }", "e");
        let f = substitute(&p).unwrap();
        assert_eq!(render(&f, &DefaultNames), "((x0*x0) + (x0*x0))");
        assert_eq!(f.tree_size(), 7);
    }

    #[test]
    fn substitute_identity() {
        let p = program("double f(double x){ double e = x; return 0; }", "e");
        assert_eq!(substitute(&p).unwrap(), x(0));
    }

    #[test]
    fn explosion_cap() {
        let p = program(
            "double f(double x){ double e = x; for (int i = 0; i < 30; i++) e = e * e; return 0; }",
            "e",
        );
        assert!(matches!(
            substitute(&p),
            Err(DiffError::ExpressionExplosion { .. })
        ));
    }

    #[test]
    fn rule_shapes() {
        let d = |e: &Expr| render(&differentiate(e, 0), &DefaultNames);
        assert_eq!(d(&Expr::mul(x(0), x(1))), "((1*x1) + (x0*0))");
        assert_eq!(d(&Expr::add(x(1), Expr::int(3))), "0");
        assert_eq!(d(&Expr::pow(x(0), Expr::int(2))), "((2*pow(x0, 1))*1)");
        assert_eq!(
            d(&Expr::call(Func::Log, Expr::add(x(1), Expr::from_f64(0.5)))),
            "(1/((x1 + 0.5))*0)"
        );
        assert_eq!(d(&Expr::call(Func::Cos, x(0))), "((-sin(x0))*1)");
        assert_eq!(d(&Expr::call(Func::Tan, x(0))), "1/(pow(cos(x0), 2))");
        assert_eq!(d(&Expr::call(Func::Sqrt, x(0))), "1/((2*sqrt(x0)))");
        assert_eq!(
            d(&Expr::div(x(0), x(1))),
            "((1*x1) - (x0*0))/(pow(x1, 2))"
        );
        assert_eq!(
            d(&Expr::pow(x(1), x(0))),
            "(pow(x1, x0)*((1*log(x1)) + (x0*0)/(x1)))"
        );
    }

    #[test]
    fn linearity_shape() {
        let a = Expr::mul(x(0), x(0));
        let b = Expr::call(Func::Sin, x(0));
        let d = differentiate(&Expr::add(a.clone(), b.clone()), 0);
        assert_eq!(
            d,
            Expr::add(differentiate(&a, 0), differentiate(&b, 0))
        );
    }

    #[test]
    fn var_map_resolution() {
        let p = program(
            "double f(const double **a, double y){ double e = a[1][1] * y; return 0; }",
            "e",
        );
        let all = VarIndexMap::from_names(&p, &["a"]).unwrap();
        assert_eq!(all.slots(), &[0, 1, 2, 3]);
        let some = VarIndexMap::from_names(&p, &["y", "a[0][1]"]).unwrap();
        assert_eq!(some.slots(), &[4, 1]);
        assert_eq!(
            VarIndexMap::from_names(&p, &["z"]),
            Err(DiffError::UnknownVar("z".into()))
        );
        assert!(matches!(
            VarIndexMap::from_names(&p, &["a", "a[1][0]"]),
            Err(DiffError::DuplicateVar(_))
        ));
    }

    #[test]
    fn bundle_mirror_is_the_same_node() {
        let p = program("double f(double x, double y){ double e = x * x * y; return 0; }", "e");
        let vars = VarIndexMap::from_names(&p, &["x", "y"]).unwrap();
        let b = DerivativeBundle::build(&p, &vars, DiffOptions::default(), true).unwrap();
        assert_eq!(b.hess_lower.len(), 3);
        assert!(b.hess(0, 1).ptr_eq(b.hess(1, 0)));
        assert_eq!(render(&b.grad[1], &DefaultNames), "(x0*x0)");
    }
}
