//! Syntax tree for the accepted C99 subset.
//!
//! Nodes carry [`SourceSpan`]s for diagnostics. Structural comparison that
//! ignores spans is available through [`Expr::same_shape`] and
//! [`Stmt::same_shape`].

use std::fmt;

/// Location of a token range in the input text. Lines and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceSpan { line, column, length }
    }

    /// Span covering `self` through the end of `other`, when both sit on one line.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        if self.line == other.line && other.column >= self.column {
            SourceSpan {
                length: other.column + other.length - self.column,
                ..self
            }
        } else {
            self
        }
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan::new(1, 1, 0)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Scalar element types the subset understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Double,
    Int,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarType::Double => "double",
            ScalarType::Int => "int",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div
        )
    }
}

/// Math library functions that may be called from differentiated code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intrinsic {
    Pow,
    Log,
    Exp,
    Sin,
    Cos,
    Tan,
    Sqrt,
}

impl Intrinsic {
    pub const ALL: [Intrinsic; 7] = [
        Intrinsic::Pow,
        Intrinsic::Log,
        Intrinsic::Exp,
        Intrinsic::Sin,
        Intrinsic::Cos,
        Intrinsic::Tan,
        Intrinsic::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::Pow => "pow",
            Intrinsic::Log => "log",
            Intrinsic::Exp => "exp",
            Intrinsic::Sin => "sin",
            Intrinsic::Cos => "cos",
            Intrinsic::Tan => "tan",
            Intrinsic::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Intrinsic> {
        Intrinsic::ALL.into_iter().find(|i| i.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Intrinsic::Pow => 2,
            _ => 1,
        }
    }
}

/// A numeric literal. The source text is kept so it can be re-emitted verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Literal {
    pub text: String,
    pub value: f64,
    /// True for integer literals (no fraction or exponent), which C types as `int`.
    pub is_int: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Constant(Literal),
    Var(String),
    ArrayRef { base: String, indices: Vec<Expr> },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { intrinsic: Intrinsic, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Expr { kind, span }
    }

    /// Structural equality ignoring spans.
    pub fn same_shape(&self, other: &Expr) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Constant(a), Constant(b)) => a.text == b.text,
            (Var(a), Var(b)) => a == b,
            (
                ArrayRef { base: a, indices: ia },
                ArrayRef { base: b, indices: ib },
            ) => a == b && all_same(ia, ib),
            (
                Unary { op: oa, operand: a },
                Unary { op: ob, operand: b },
            ) => oa == ob && a.same_shape(b),
            (
                Binary { op: oa, lhs: la, rhs: ra },
                Binary { op: ob, lhs: lb, rhs: rb },
            ) => oa == ob && la.same_shape(lb) && ra.same_shape(rb),
            (
                Call { intrinsic: fa, args: aa },
                Call { intrinsic: fb, args: ab },
            ) => fa == fb && all_same(aa, ab),
            _ => false,
        }
    }

    /// Visits this node and all descendants in pre-order.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match &self.kind {
            ExprKind::Constant(_) | ExprKind::Var(_) => {}
            ExprKind::ArrayRef { indices, .. } => indices.iter().for_each(|e| e.walk(visit)),
            ExprKind::Unary { operand, .. } => operand.walk(visit),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(visit);
                rhs.walk(visit);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|e| e.walk(visit)),
        }
    }
}

fn all_same(a: &[Expr], b: &[Expr]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
}

/// Fully parenthesized rendering; re-parsing it yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Constant(lit) => f.write_str(&lit.text),
            ExprKind::Var(name) => f.write_str(name),
            ExprKind::ArrayRef { base, indices } => {
                f.write_str(base)?;
                for idx in indices {
                    write!(f, "[{idx}]")?;
                }
                Ok(())
            }
            ExprKind::Unary { operand, .. } => write!(f, "-({operand})"),
            ExprKind::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            ExprKind::Call { intrinsic, args } => {
                write!(f, "{}(", intrinsic.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Left-hand side of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub name: String,
    pub indices: Vec<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Declaration {
        name: String,
        ty: ScalarType,
        /// Array extents of a local array; empty for scalars.
        dims: Vec<Expr>,
        init: Option<Expr>,
    },
    /// Compound operators are desugared by the parser, so this is always plain `=`.
    Assignment { target: LValue, rhs: Expr },
    ForLoop {
        counter: String,
        init: Expr,
        /// The full loop condition, e.g. `i < 2`.
        cond: Expr,
        /// Signed increment added to the counter after each iteration.
        step: Expr,
        body: Vec<Stmt>,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    Block(Vec<Stmt>),
    Return(Option<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

impl Stmt {
    pub fn same_shape(&self, other: &Stmt) -> bool {
        use StmtKind::*;
        let opt = |a: &Option<Expr>, b: &Option<Expr>| match (a, b) {
            (Some(a), Some(b)) => a.same_shape(b),
            (None, None) => true,
            _ => false,
        };
        match (&self.kind, &other.kind) {
            (
                Declaration { name: na, ty: ta, dims: da, init: ia },
                Declaration { name: nb, ty: tb, dims: db, init: ib },
            ) => na == nb && ta == tb && all_same(da, db) && opt(ia, ib),
            (Assignment { target: ta, rhs: ra }, Assignment { target: tb, rhs: rb }) => {
                ta.name == tb.name && all_same(&ta.indices, &tb.indices) && ra.same_shape(rb)
            }
            (
                ForLoop { counter: ca, init: ia, cond: xa, step: sa, body: ba },
                ForLoop { counter: cb, init: ib, cond: xb, step: sb, body: bb },
            ) => {
                ca == cb
                    && ia.same_shape(ib)
                    && xa.same_shape(xb)
                    && sa.same_shape(sb)
                    && stmts_same(ba, bb)
            }
            (
                If { cond: ca, then_body: ta, else_body: ea },
                If { cond: cb, then_body: tb, else_body: eb },
            ) => {
                ca.same_shape(cb)
                    && stmts_same(ta, tb)
                    && match (ea, eb) {
                        (Some(a), Some(b)) => stmts_same(a, b),
                        (None, None) => true,
                        _ => false,
                    }
            }
            (Block(a), Block(b)) => stmts_same(a, b),
            (Return(a), Return(b)) => opt(a, b),
            _ => false,
        }
    }
}

pub fn stmts_same(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
}

/// A function parameter. Arrays are `double` with `rank` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub rank: usize,
    /// One entry per dimension; `None` where the declaration gives no literal extent.
    pub extents: Vec<Option<usize>>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionIR {
    pub name: String,
    pub params: Vec<Param>,
    pub energy_var: String,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

impl FunctionIR {
    pub fn param(&self, name: &str) -> Option<(usize, &Param)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }

    pub fn same_shape(&self, other: &FunctionIR) -> bool {
        self.name == other.name
            && self.energy_var == other.energy_var
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.rank == b.rank && a.extents == b.extents)
            && stmts_same(&self.body, &other.body)
    }
}
