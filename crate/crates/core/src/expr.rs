//! Immutable expression DAG over scalar slots.
//!
//! Nodes are reference counted and never mutated, so a subtree that appears in
//! many places (the energy inside every gradient entry, a gradient inside every
//! Hessian entry of its column) is stored once. Transformations memoize on node
//! identity to preserve that sharing; only rendering re-expands the tree.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::ast::Intrinsic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Single-argument math functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Log,
    Exp,
    Sin,
    Cos,
    Tan,
    Sqrt,
}

impl Func {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Log => x.ln(),
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sqrt => x.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
        }
    }

    /// `None` for `pow`, which is a two-argument node of its own.
    pub fn from_intrinsic(i: Intrinsic) -> Option<Func> {
        Some(match i {
            Intrinsic::Pow => return None,
            Intrinsic::Log => Func::Log,
            Intrinsic::Exp => Func::Exp,
            Intrinsic::Sin => Func::Sin,
            Intrinsic::Cos => Func::Cos,
            Intrinsic::Tan => Func::Tan,
            Intrinsic::Sqrt => Func::Sqrt,
        })
    }
}

/// A numeric constant together with the literal text it is emitted as.
#[derive(Debug, Clone)]
pub struct Constant {
    text: Arc<str>,
    value: f64,
}

impl Constant {
    /// Keeps `text` verbatim; `value` must be what C would parse it to.
    pub fn from_literal(text: &str, value: f64) -> Constant {
        Constant {
            text: text.into(),
            value,
        }
    }

    pub fn int(v: i64) -> Constant {
        Constant {
            text: v.to_string().into(),
            value: v as f64,
        }
    }

    /// Shortest text that round-trips to `v`. Integral values print without a fraction.
    pub fn from_f64(v: f64) -> Constant {
        assert!(v.is_finite(), "constant {v} is not finite");
        if v.fract() == 0.0 && v.abs() < 1e15 {
            let i = v as i64;
            return Constant {
                text: i.to_string().into(),
                value: i as f64,
            };
        }
        let text = format!("{v:?}");
        Constant {
            value: text.parse().expect("debug formatting of f64 round-trips"),
            text: text.into(),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Integer literal text, which C types as `int`.
    pub fn is_int_text(&self) -> bool {
        let t = self.text.strip_prefix('-').unwrap_or(&self.text);
        !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
    }
}

impl PartialEq for Constant {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Const(Constant),
    /// A program input slot.
    Input(u32),
    /// The value of an earlier straight-line assignment.
    Temp(u32),
    Neg(Expr),
    Binary(BinOp, Expr, Expr),
    Call(Func, Expr),
    Pow(Expr, Expr),
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    hash: u64,
    size: u64,
}

impl Drop for Node {
    // Iterative teardown; long assignment chains produce DAGs deep enough to
    // overflow the stack with the default recursive drop.
    fn drop(&mut self) {
        let mut stack = Vec::new();
        take_children(&mut self.kind, &mut stack);
        while let Some(e) = stack.pop() {
            if let Ok(mut node) = Arc::try_unwrap(e.0) {
                take_children(&mut node.kind, &mut stack);
            }
        }
    }
}

fn take_children(kind: &mut Kind, stack: &mut Vec<Expr>) {
    match std::mem::replace(kind, Kind::Input(0)) {
        Kind::Neg(a) | Kind::Call(_, a) => stack.push(a),
        Kind::Binary(_, a, b) | Kind::Pow(a, b) => {
            stack.push(a);
            stack.push(b);
        }
        Kind::Const(_) | Kind::Input(_) | Kind::Temp(_) => {}
    }
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

// `add`, `mul` and friends are plain constructors taking owned operands;
// operator overloading would hide the allocation of a new node.
#[allow(clippy::should_implement_trait)]
impl Expr {
    fn make(kind: Kind) -> Expr {
        let mut h = DefaultHasher::new();
        let size = match &kind {
            Kind::Const(c) => {
                0u8.hash(&mut h);
                c.text.hash(&mut h);
                1
            }
            Kind::Input(i) => {
                1u8.hash(&mut h);
                i.hash(&mut h);
                1
            }
            Kind::Temp(i) => {
                2u8.hash(&mut h);
                i.hash(&mut h);
                1
            }
            Kind::Neg(a) => {
                3u8.hash(&mut h);
                a.0.hash.hash(&mut h);
                a.0.size.saturating_add(1)
            }
            Kind::Binary(op, a, b) => {
                4u8.hash(&mut h);
                op.hash(&mut h);
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
                1u64.saturating_add(a.0.size).saturating_add(b.0.size)
            }
            Kind::Call(f, a) => {
                5u8.hash(&mut h);
                f.hash(&mut h);
                a.0.hash.hash(&mut h);
                a.0.size.saturating_add(1)
            }
            Kind::Pow(a, b) => {
                6u8.hash(&mut h);
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
                1u64.saturating_add(a.0.size).saturating_add(b.0.size)
            }
        };
        Expr(Arc::new(Node {
            kind,
            hash: h.finish(),
            size,
        }))
    }

    pub fn constant(c: Constant) -> Expr {
        Expr::make(Kind::Const(c))
    }

    pub fn from_f64(v: f64) -> Expr {
        Expr::constant(Constant::from_f64(v))
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(Constant::int(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn input(slot: u32) -> Expr {
        Expr::make(Kind::Input(slot))
    }

    pub fn temp(id: u32) -> Expr {
        Expr::make(Kind::Temp(id))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::make(Kind::Neg(a))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::make(Kind::Binary(op, a, b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Div, a, b)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::make(Kind::Call(f, a))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::make(Kind::Pow(base, exponent))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Node count of the fully expanded tree, saturating at `u64::MAX`.
    pub fn tree_size(&self) -> u64 {
        self.0.size
    }

    /// Identity of the shared node; equal ids imply structural equality.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_const(&self) -> Option<&Constant> {
        match &self.0.kind {
            Kind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_const_value(&self, v: f64) -> bool {
        self.as_const().is_some_and(|c| c.value == v)
    }

    pub fn children(&self) -> impl Iterator<Item = &Expr> {
        let (a, b) = match &self.0.kind {
            Kind::Neg(a) | Kind::Call(_, a) => (Some(a), None),
            Kind::Binary(_, a, b) | Kind::Pow(a, b) => (Some(a), Some(b)),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Number of distinct shared nodes.
    pub fn dag_size(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if seen.insert(e.id()) {
                stack.extend(e.children());
            }
        }
        seen.len()
    }

    /// Input slots referenced anywhere in the expression.
    pub fn inputs(&self) -> BTreeSet<u32> {
        let mut seen = HashSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.kind() {
                Kind::Input(i) => {
                    out.insert(*i);
                }
                _ => stack.extend(e.children()),
            }
        }
        out
    }

    /// True if no `Temp` leaf remains.
    pub fn is_closed(&self) -> bool {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            if matches!(e.kind(), Kind::Temp(_)) {
                return false;
            }
            stack.extend(e.children());
        }
        true
    }

    /// Post-order traversal visiting each distinct node once. `f` receives the
    /// node and the results already computed for its children. Results for
    /// nodes already in `memo` are reused, so one memo can span several roots.
    pub fn fold<T: Clone>(
        &self,
        memo: &mut HashMap<usize, T>,
        f: &mut impl FnMut(&Expr, &[T]) -> T,
    ) -> T {
        let mut stack: Vec<(&Expr, bool)> = vec![(self, false)];
        let mut args = Vec::with_capacity(2);
        while let Some((e, ready)) = stack.pop() {
            if memo.contains_key(&e.id()) {
                continue;
            }
            if ready {
                args.clear();
                args.extend(e.children().map(|c| memo[&c.id()].clone()));
                let v = f(e, &args);
                memo.insert(e.id(), v);
            } else {
                stack.push((e, true));
                stack.extend(
                    e.children()
                        .filter(|c| !memo.contains_key(&c.id()))
                        .map(|c| (c, false)),
                );
            }
        }
        memo[&self.id()].clone()
    }

    /// Same node kind with new children, reusing `self` when nothing changed.
    pub fn with_children(&self, new: &[Expr]) -> Expr {
        match (self.kind(), new) {
            (Kind::Neg(a), [na]) if !na.ptr_eq(a) => Expr::neg(na.clone()),
            (Kind::Call(f, a), [na]) if !na.ptr_eq(a) => Expr::call(*f, na.clone()),
            (Kind::Binary(op, a, b), [na, nb]) if !(na.ptr_eq(a) && nb.ptr_eq(b)) => {
                Expr::binary(*op, na.clone(), nb.clone())
            }
            (Kind::Pow(a, b), [na, nb]) if !(na.ptr_eq(a) && nb.ptr_eq(b)) => {
                Expr::pow(na.clone(), nb.clone())
            }
            _ => self.clone(),
        }
    }

    /// Rebuilds the expression with leaves replaced by `leaf`, memoized per node.
    /// Interior nodes are reused when none of their children changed.
    pub fn replace_leaves(&self, leaf: &mut impl FnMut(&Kind) -> Option<Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.fold(&mut memo, &mut |e, kids| {
            if kids.is_empty() {
                leaf(e.kind()).unwrap_or_else(|| e.clone())
            } else {
                e.with_children(kids)
            }
        })
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        let mut known = HashSet::new();
        let mut stack = vec![(self, other)];
        while let Some((a, b)) = stack.pop() {
            if a.ptr_eq(b) || known.contains(&(a.id(), b.id())) {
                continue;
            }
            if a.0.hash != b.0.hash || a.0.size != b.0.size {
                return false;
            }
            let same = match (a.kind(), b.kind()) {
                (Kind::Const(x), Kind::Const(y)) => x == y,
                (Kind::Input(x), Kind::Input(y)) | (Kind::Temp(x), Kind::Temp(y)) => x == y,
                (Kind::Neg(_), Kind::Neg(_)) | (Kind::Pow(..), Kind::Pow(..)) => true,
                (Kind::Call(f, _), Kind::Call(g, _)) => f == g,
                (Kind::Binary(o, ..), Kind::Binary(p, ..)) => o == p,
                _ => false,
            };
            if !same {
                return false;
            }
            stack.extend(a.children().zip(b.children()));
            known.insert((a.id(), b.id()));
        }
        true
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, &DefaultNames))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, &DefaultNames))
    }
}

/// Supplies C text for leaves during rendering.
pub trait LeafNames {
    fn input(&self, slot: u32, out: &mut String);
    fn temp(&self, id: u32, out: &mut String);
}

/// `x<slot>` for inputs and `t<id>` for temporaries.
pub struct DefaultNames;

impl LeafNames for DefaultNames {
    fn input(&self, slot: u32, out: &mut String) {
        out.push('x');
        out.push_str(&slot.to_string());
    }

    fn temp(&self, id: u32, out: &mut String) {
        out.push('t');
        out.push_str(&id.to_string());
    }
}

/// Renders `e` as a C99 expression that evaluates the tree in node order.
///
/// Sums, differences and products carry their own parentheses; a quotient is
/// written `l/(r)` and gets wrapped only where C would otherwise re-associate
/// it. When both operands of an operator are integer literals, the left one is
/// cast to `double` so C does not fall back to integer arithmetic.
pub fn render(e: &Expr, names: &impl LeafNames) -> String {
    let mut out = String::with_capacity(e.tree_size().min(1 << 20) as usize * 4);
    write_c(e, names, &mut out);
    out
}

enum Step<'a> {
    Node(&'a Expr),
    Wrapped(&'a Expr),
    Text(&'static str),
}

pub fn write_c(e: &Expr, names: &impl LeafNames, out: &mut String) {
    let mut stack = vec![Step::Node(e)];
    while let Some(step) = stack.pop() {
        let e = match step {
            Step::Text(t) => {
                out.push_str(t);
                continue;
            }
            // Quotients are the only non-atomic rendering and need wrapping
            // as the right operand of `*` or under a negation.
            Step::Wrapped(e) if matches!(e.kind(), Kind::Binary(BinOp::Div, ..)) => {
                out.push('(');
                stack.push(Step::Text(")"));
                stack.push(Step::Node(e));
                continue;
            }
            Step::Wrapped(e) | Step::Node(e) => e,
        };
        // Steps are pushed in reverse order of output.
        match e.kind() {
            Kind::Const(c) => {
                if c.text.starts_with('-') {
                    out.push('(');
                    out.push_str(&c.text);
                    out.push(')');
                } else {
                    out.push_str(&c.text);
                }
            }
            Kind::Input(i) => names.input(*i, out),
            Kind::Temp(i) => names.temp(*i, out),
            Kind::Neg(a) => {
                out.push_str("(-");
                stack.push(Step::Text(")"));
                stack.push(Step::Wrapped(a));
            }
            Kind::Binary(op, a, b) => {
                let both_int = a.as_const().is_some_and(Constant::is_int_text)
                    && b.as_const().is_some_and(Constant::is_int_text);
                let cast = if both_int { "(double)" } else { "" };
                match op {
                    BinOp::Div => {
                        out.push_str(cast);
                        stack.push(Step::Text(")"));
                        stack.push(Step::Node(b));
                        stack.push(Step::Text("/("));
                        stack.push(Step::Node(a));
                    }
                    BinOp::Mul => {
                        out.push('(');
                        out.push_str(cast);
                        stack.push(Step::Text(")"));
                        stack.push(Step::Wrapped(b));
                        stack.push(Step::Text("*"));
                        stack.push(Step::Node(a));
                    }
                    BinOp::Add | BinOp::Sub => {
                        out.push('(');
                        out.push_str(cast);
                        stack.push(Step::Text(")"));
                        stack.push(Step::Node(b));
                        stack.push(Step::Text(if *op == BinOp::Add { " + " } else { " - " }));
                        stack.push(Step::Node(a));
                    }
                }
            }
            Kind::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                stack.push(Step::Text(")"));
                stack.push(Step::Node(a));
            }
            Kind::Pow(a, b) => {
                out.push_str("pow(");
                stack.push(Step::Text(")"));
                stack.push(Step::Node(b));
                stack.push(Step::Text(", "));
                stack.push(Step::Node(a));
            }
        }
    }
}
