//! Recursive descent parser for the supported C99 subset.
//!
//! Binary operators follow C99 precedence: equality < relational < additive <
//! multiplicative < unary < postfix. Anything outside the subset is rejected with
//! [`ParseError::Unsupported`] rather than a generic syntax error, so users learn
//! which construct to rewrite.

use std::collections::HashMap;

use thiserror::Error;

use crate::ast::*;
use crate::lexer::{tokenize, Tok, Token};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: SourceSpan, message: String },
    #[error("{span}: unsupported construct: {construct}")]
    Unsupported { span: SourceSpan, construct: String },
    #[error("{span}: use of undeclared identifier `{name}`")]
    UndeclaredIdentifier { span: SourceSpan, name: String },
    #[error("{span}: no function named `{name}` in source")]
    MissingFunction { span: SourceSpan, name: String },
    #[error("{span}: energy variable `{name}` is never declared and assigned at function scope")]
    MissingEnergyVar { span: SourceSpan, name: String },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Unsupported { span, .. }
            | ParseError::UndeclaredIdentifier { span, .. }
            | ParseError::MissingFunction { span, .. }
            | ParseError::MissingEnergyVar { span, .. } => *span,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

/// Parses `source_text` and returns the definition of `func_name`.
///
/// Other function definitions in the file are skipped without being checked.
pub fn parse_source(source_text: &str, func_name: &str, energy_var: &str) -> PResult<FunctionIR> {
    let tokens = tokenize(source_text)?;
    let start = find_function(&tokens, func_name)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: start,
        func_name,
        scopes: Vec::new(),
    };
    parser.function(energy_var)
}

/// Parses a standalone expression, resolving identifiers against `scalars`
/// (rank-0 names) and `arrays` (name, rank).
pub fn parse_expr(text: &str, scalars: &[&str], arrays: &[(&str, usize)]) -> PResult<Expr> {
    let tokens = tokenize(text)?;
    let mut scope = HashMap::new();
    for s in scalars {
        scope.insert(s.to_string(), Sym::Scalar);
    }
    for (a, rank) in arrays {
        scope.insert(a.to_string(), Sym::Array(*rank));
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        func_name: "",
        scopes: vec![scope],
    };
    let e = parser.expr()?;
    parser.expect_eof()?;
    Ok(e)
}

/// Locates the first token of the top-level definition of `name`.
fn find_function(tokens: &[Token], name: &str) -> PResult<usize> {
    let mut i = 0;
    while tokens[i].tok != Tok::Eof {
        let item_start = i;
        let mut first_paren_name: Option<&str> = None;
        let mut depth = 0usize;
        // Advance to the end of this top-level item: `;` or a `{ ... }` body.
        loop {
            match &tokens[i].tok {
                Tok::Eof => return Err(missing(name)),
                Tok::Punct("(") => {
                    if depth == 0 && first_paren_name.is_none() && i > item_start {
                        if let Tok::Ident(n) = &tokens[i - 1].tok {
                            first_paren_name = Some(n);
                        }
                    }
                    depth += 1;
                }
                Tok::Punct(")") => depth = depth.saturating_sub(1),
                Tok::Punct(";") if depth == 0 => {
                    i += 1;
                    break;
                }
                Tok::Punct("{") if depth == 0 => {
                    if first_paren_name == Some(name) {
                        return Ok(item_start);
                    }
                    let mut braces = 0usize;
                    loop {
                        match tokens[i].tok {
                            Tok::Punct("{") => braces += 1,
                            Tok::Punct("}") => {
                                braces -= 1;
                                if braces == 0 {
                                    break;
                                }
                            }
                            Tok::Eof => return Err(missing(name)),
                            _ => {}
                        }
                        i += 1;
                    }
                    i += 1;
                    break;
                }
                _ => {}
            }
            i += 1;
        }
    }
    Err(missing(name))
}

fn missing(name: &str) -> ParseError {
    ParseError::MissingFunction {
        span: SourceSpan::new(1, 1, 0),
        name: name.to_string(),
    }
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "while", "do", "switch", "goto", "break", "continue", "case", "default", "struct", "union",
    "enum", "typedef", "sizeof", "float", "char", "long", "short", "unsigned", "signed", "static",
    "extern", "register", "volatile", "auto", "inline", "restrict",
];

const RESERVED: &[&str] = &[
    "double", "int", "void", "const", "for", "if", "else", "return", "while", "do", "switch",
    "goto", "break", "continue", "case", "default", "struct", "union", "enum", "typedef",
    "sizeof", "float", "char", "long", "short", "unsigned", "signed", "static", "extern",
    "register", "volatile", "auto", "inline", "restrict",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sym {
    Scalar,
    Array(usize),
    Counter,
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    func_name: &'t str,
    scopes: Vec<HashMap<String, Sym>>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> &'t Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &'t Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.at_ident(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax {
            span: self.span(),
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, span: SourceSpan, construct: impl Into<String>) -> PResult<T> {
        Err(ParseError::Unsupported {
            span,
            construct: construct.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) | Tok::Int(s) | Tok::Float(s) => format!("`{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<SourceSpan> {
        if self.at_punct(p) {
            Ok(self.bump().span)
        } else {
            self.syntax(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.syntax(format!("unexpected {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let span = self.bump().span;
                Ok((name.clone(), span))
            }
            _ => self.syntax(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn new_name(&mut self) -> PResult<(String, SourceSpan)> {
        let (name, span) = self.ident()?;
        if Intrinsic::from_name(&name).is_some() {
            return Err(ParseError::Syntax {
                span,
                message: format!("`{name}` is reserved for the math function"),
            });
        }
        Ok((name, span))
    }

    fn lookup(&self, name: &str) -> Option<Sym> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, sym: Sym) {
        self.scopes
            .last_mut()
            .expect("scope stack is never empty inside a body")
            .insert(name.to_string(), sym);
    }

    fn check_keyword(&self) -> PResult<()> {
        if let Tok::Ident(w) = self.peek() {
            if UNSUPPORTED_KEYWORDS.contains(&w.as_str()) {
                return self.unsupported(self.span(), format!("`{w}`"));
            }
        }
        Ok(())
    }

    // ---- function level ----

    fn function(&mut self, energy_var: &str) -> PResult<FunctionIR> {
        let start = self.span();
        self.check_keyword()?;
        self.eat_ident("const");
        if !(self.eat_ident("double") || self.eat_ident("int") || self.eat_ident("void")) {
            self.check_keyword()?;
            return self.syntax(format!("expected return type, found {}", self.describe()));
        }
        if self.at_punct("*") {
            return self.unsupported(self.span(), "pointer return type");
        }
        let (name, _) = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        self.scopes.push(HashMap::new());
        if self.at_ident("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        } else if !self.at_punct(")") {
            loop {
                let p = self.param()?;
                if params.iter().any(|q: &Param| q.name == p.name) {
                    return Err(ParseError::Syntax {
                        span: p.span,
                        message: format!("duplicate parameter `{}`", p.name),
                    });
                }
                self.declare(&p.name, if p.rank == 0 { Sym::Scalar } else { Sym::Array(p.rank) });
                params.push(p);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let body = self.block_items()?;
        self.expect_punct("}")?;
        self.scopes.pop();

        check_energy(&body, energy_var, start)?;
        Ok(FunctionIR {
            name,
            params,
            energy_var: energy_var.to_string(),
            body,
            span: start,
        })
    }

    fn param(&mut self) -> PResult<Param> {
        let start = self.span();
        self.eat_ident("const");
        self.check_keyword()?;
        if self.at_ident("int") {
            return self.unsupported(self.span(), "`int` parameter (parameters must be double)");
        }
        if !self.eat_ident("double") {
            return self.syntax(format!("expected parameter type, found {}", self.describe()));
        }
        self.eat_ident("const");
        let mut stars = 0;
        while self.eat_punct("*") {
            stars += 1;
            self.eat_ident("const");
            self.eat_ident("restrict");
        }
        let (name, name_span) = self.new_name()?;
        let mut extents = vec![None; stars];
        while self.eat_punct("[") {
            if stars > 0 {
                return self.unsupported(name_span, "mixed pointer and array declarator");
            }
            if self.eat_punct("]") {
                extents.push(None);
                continue;
            }
            match self.peek() {
                Tok::Int(text) => {
                    let span = self.bump().span;
                    let n: usize = text.parse().map_err(|_| ParseError::Syntax {
                        span,
                        message: "array extent out of range".into(),
                    })?;
                    extents.push(Some(n));
                }
                _ => {
                    return self.unsupported(self.span(), "non-literal array extent in parameter")
                }
            }
            self.expect_punct("]")?;
        }
        Ok(Param {
            name,
            rank: extents.len(),
            extents,
            span: start.to(self.prev_span()),
        })
    }

    /// Statements up to (not including) the closing `}`.
    fn block_items(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.at_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.syntax("expected `}` before end of input");
            }
            self.statement(&mut out)?;
        }
        Ok(out)
    }

    // ---- statements ----

    fn statement(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let start = self.span();
        self.check_keyword()?;
        match self.peek() {
            Tok::Punct(";") => {
                self.bump();
            }
            Tok::Punct("{") => {
                self.bump();
                self.scopes.push(HashMap::new());
                let body = self.block_items()?;
                self.expect_punct("}")?;
                self.scopes.pop();
                out.push(Stmt {
                    kind: StmtKind::Block(body),
                    span: start,
                });
            }
            Tok::Ident(w) if w == "double" || w == "int" || w == "const" => self.declaration(out)?,
            Tok::Ident(w) if w == "void" => return self.unsupported(start, "`void` declaration"),
            Tok::Ident(w) if w == "for" => out.push(self.for_loop()?),
            Tok::Ident(w) if w == "if" => out.push(self.if_stmt()?),
            Tok::Ident(w) if w == "else" => return self.syntax("`else` without matching `if`"),
            Tok::Ident(w) if w == "return" => {
                self.bump();
                let value = if self.at_punct(";") { None } else { Some(self.expr()?) };
                self.expect_punct(";")?;
                out.push(Stmt {
                    kind: StmtKind::Return(value),
                    span: start,
                });
            }
            Tok::Ident(_) => out.push(self.assignment()?),
            Tok::Punct("*") => return self.unsupported(start, "pointer dereference"),
            Tok::Punct("++" | "--") => return self.unsupported(start, "increment statement"),
            _ => return self.syntax(format!("expected statement, found {}", self.describe())),
        }
        Ok(())
    }

    fn declaration(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        self.eat_ident("const");
        let ty = if self.eat_ident("double") {
            ScalarType::Double
        } else if self.eat_ident("int") {
            ScalarType::Int
        } else {
            self.check_keyword()?;
            return self.syntax(format!("expected type, found {}", self.describe()));
        };
        self.eat_ident("const");
        loop {
            if self.at_punct("*") {
                return self.unsupported(self.span(), "local pointer variable");
            }
            let (name, span) = self.new_name()?;
            let mut dims = Vec::new();
            while self.eat_punct("[") {
                if self.at_punct("]") {
                    return self.unsupported(self.span(), "local array without extent");
                }
                dims.push(self.expr()?);
                self.expect_punct("]")?;
            }
            if ty == ScalarType::Int && !dims.is_empty() {
                return self.unsupported(span, "integer array");
            }
            let init = if self.eat_punct("=") {
                if self.at_punct("{") {
                    return self.unsupported(self.span(), "initializer list");
                }
                if !dims.is_empty() {
                    return self.unsupported(span, "array initializer");
                }
                Some(self.expr()?)
            } else {
                None
            };
            // Declared after the initializer is parsed: `double x = x;` refers to an outer `x`.
            self.declare(&name, if dims.is_empty() { Sym::Scalar } else { Sym::Array(dims.len()) });
            out.push(Stmt {
                kind: StmtKind::Declaration { name, ty, dims, init },
                span,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(())
    }

    fn assignment(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let target = self.lvalue()?;
        let op_span = self.span();
        let op = match self.peek() {
            Tok::Punct(p @ ("=" | "+=" | "-=" | "*=")) => {
                self.bump();
                *p
            }
            Tok::Punct(p @ ("/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=")) => {
                return self.unsupported(op_span, format!("compound assignment `{p}`"))
            }
            Tok::Punct("++" | "--") => return self.unsupported(op_span, "increment statement"),
            Tok::Punct("(") => return self.unsupported(start, "call statement"),
            _ => return self.syntax(format!("expected assignment, found {}", self.describe())),
        };
        let value = self.expr()?;
        self.expect_punct(";")?;
        let rhs = match op {
            "=" => value,
            compound => {
                let bop = match compound {
                    "+=" => BinaryOp::Add,
                    "-=" => BinaryOp::Sub,
                    _ => BinaryOp::Mul,
                };
                let current = lvalue_expr(&target);
                let span = value.span;
                Expr::new(
                    ExprKind::Binary {
                        op: bop,
                        lhs: Box::new(current),
                        rhs: Box::new(value),
                    },
                    span,
                )
            }
        };
        Ok(Stmt {
            kind: StmtKind::Assignment { target, rhs },
            span: start,
        })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let (name, span) = self.ident()?;
        let sym = self.lookup(&name).ok_or_else(|| ParseError::UndeclaredIdentifier {
            span,
            name: name.clone(),
        })?;
        let indices = self.indices()?;
        match sym {
            Sym::Counter => return self.unsupported(span, "assignment to loop counter"),
            Sym::Scalar if !indices.is_empty() => {
                return Err(ParseError::Syntax {
                    span,
                    message: format!("`{name}` is not an array"),
                })
            }
            Sym::Array(rank) => self.check_rank(&name, span, rank, indices.len())?,
            Sym::Scalar => {}
        }
        Ok(LValue {
            name,
            indices,
            span: span.to(self.prev_span()),
        })
    }

    fn check_rank(&self, name: &str, span: SourceSpan, rank: usize, given: usize) -> PResult<()> {
        if given < rank {
            self.unsupported(span, format!("pointer arithmetic on array `{name}`"))
        } else if given > rank {
            Err(ParseError::Syntax {
                span,
                message: format!("too many indices for `{name}` (rank {rank})"),
            })
        } else {
            Ok(())
        }
    }

    fn indices(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        while self.eat_punct("[") {
            out.push(self.expr()?);
            self.expect_punct("]")?;
        }
        Ok(out)
    }

    fn for_loop(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        self.expect_punct("(")?;
        if !self.eat_ident("int") {
            return self.unsupported(
                self.span(),
                "loop counter must be declared as `int` in the for-init clause",
            );
        }
        let (counter, _) = self.new_name()?;
        self.expect_punct("=")?;
        let init = self.expr()?;
        if self.at_punct(",") {
            return self.unsupported(self.span(), "multiple loop counters");
        }
        self.expect_punct(";")?;

        self.scopes.push(HashMap::new());
        self.declare(&counter, Sym::Counter);
        if self.at_punct(";") {
            return self.unsupported(self.span(), "loop without condition");
        }
        let cond = self.expr()?;
        self.expect_punct(";")?;
        let step = self.loop_step(&counter)?;
        self.expect_punct(")")?;
        let body = self.body()?;
        self.scopes.pop();
        if body.is_empty() {
            return Err(ParseError::Syntax {
                span: start,
                message: "empty loop body".into(),
            });
        }
        Ok(Stmt {
            kind: StmtKind::ForLoop { counter, init, cond, step, body },
            span: start,
        })
    }

    fn loop_step(&mut self, counter: &str) -> PResult<Expr> {
        let span = self.span();
        let one = |span| {
            Expr::new(
                ExprKind::Constant(Literal {
                    text: "1".into(),
                    value: 1.0,
                    is_int: true,
                }),
                span,
            )
        };
        let neg = |e: Expr| {
            let span = e.span;
            Expr::new(
                ExprKind::Unary {
                    op: UnaryOp::Neg,
                    operand: Box::new(e),
                },
                span,
            )
        };
        let bad = || ParseError::Unsupported {
            span,
            construct: format!("loop step form (expected `{counter}++`, `{counter} += c` or similar)"),
        };
        let is_counter = |t: &Tok| matches!(t, Tok::Ident(n) if n == counter);

        if self.eat_punct("++") {
            return if is_counter(self.bump_tok()) { Ok(one(span)) } else { Err(bad()) };
        }
        if self.eat_punct("--") {
            return if is_counter(self.bump_tok()) { Ok(neg(one(span))) } else { Err(bad()) };
        }
        if !is_counter(self.bump_tok()) {
            return Err(bad());
        }
        match self.bump_tok() {
            Tok::Punct("++") => Ok(one(span)),
            Tok::Punct("--") => Ok(neg(one(span))),
            Tok::Punct("+=") => self.expr(),
            Tok::Punct("-=") => Ok(neg(self.expr()?)),
            Tok::Punct("=") => {
                if !is_counter(self.bump_tok()) {
                    return Err(bad());
                }
                match self.bump_tok() {
                    Tok::Punct("+") => self.multiplicative_chain(),
                    Tok::Punct("-") => Ok(neg(self.multiplicative_chain()?)),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }

    /// Operand of `i = i + <operand>`; stops before another additive operator.
    fn multiplicative_chain(&mut self) -> PResult<Expr> {
        let e = self.multiplicative()?;
        if self.at_punct("+") || self.at_punct("-") {
            return self.unsupported(self.span(), "loop step form");
        }
        Ok(e)
    }

    fn bump_tok(&mut self) -> &'t Tok {
        &self.bump().tok
    }

    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_punct("{") {
            self.scopes.push(HashMap::new());
            let body = self.block_items()?;
            self.expect_punct("}")?;
            self.scopes.pop();
            Ok(body)
        } else {
            self.scopes.push(HashMap::new());
            let mut out = Vec::new();
            if self.at_punct(";") {
                self.bump();
            } else {
                self.statement(&mut out)?;
            }
            self.scopes.pop();
            Ok(out)
        }
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_body = self.body()?;
        let else_body = if self.eat_ident("else") { Some(self.body()?) } else { None };
        Ok(Stmt {
            kind: StmtKind::If { cond, then_body, else_body },
            span: start,
        })
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let e = self.equality()?;
        match self.peek() {
            Tok::Punct(p @ ("&&" | "||")) => {
                self.unsupported(self.span(), format!("logical operator `{p}`"))
            }
            Tok::Punct("?") => self.unsupported(self.span(), "conditional operator `?:`"),
            Tok::Punct(p @ ("&" | "|" | "^" | "<<" | ">>")) => {
                self.unsupported(self.span(), format!("bitwise operator `{p}`"))
            }
            Tok::Punct("=") => self.unsupported(self.span(), "assignment inside expression"),
            _ => Ok(e),
        }
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinaryOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.at_punct(tok) {
                    self.bump();
                    let rhs = next(self)?;
                    let span = lhs.span.to(rhs.span);
                    lhs = Expr::new(
                        ExprKind::Binary {
                            op: *op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        span,
                    );
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn equality(&mut self) -> PResult<Expr> {
        self.binary_level(&[("==", BinaryOp::Eq), ("!=", BinaryOp::Ne)], Self::relational)
    }

    fn relational(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[
                ("<=", BinaryOp::Le),
                (">=", BinaryOp::Ge),
                ("<", BinaryOp::Lt),
                (">", BinaryOp::Gt),
            ],
            Self::additive,
        )
    }

    fn additive(&mut self) -> PResult<Expr> {
        self.binary_level(&[("+", BinaryOp::Add), ("-", BinaryOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let e = self.binary_level(&[("*", BinaryOp::Mul), ("/", BinaryOp::Div)], Self::unary)?;
        if self.at_punct("%") {
            return self.unsupported(self.span(), "modulo operator `%`");
        }
        Ok(e)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Punct("-") => {
                self.bump();
                let operand = self.unary()?;
                let span = start.to(operand.span);
                Ok(Expr::new(
                    ExprKind::Unary {
                        op: UnaryOp::Neg,
                        operand: Box::new(operand),
                    },
                    span,
                ))
            }
            Tok::Punct("+") => {
                self.bump();
                self.unary()
            }
            Tok::Punct("!") => self.unsupported(start, "logical not `!`"),
            Tok::Punct("~") => self.unsupported(start, "bitwise not `~`"),
            Tok::Punct("*") => self.unsupported(start, "pointer dereference"),
            Tok::Punct("&") => self.unsupported(start, "address-of operator"),
            Tok::Punct("++" | "--") => self.unsupported(start, "increment operator"),
            Tok::Punct("(")
                if matches!(self.peek_at(1), Tok::Ident(w) if w == "double" || w == "int" || w == "const") =>
            {
                self.unsupported(start, "cast expression")
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let e = self.primary()?;
        match self.peek() {
            Tok::Punct("++" | "--") => self.unsupported(self.span(), "increment operator"),
            Tok::Punct("." | "->") => self.unsupported(self.span(), "struct member access"),
            Tok::Punct("[") => self.unsupported(self.span(), "indexing a non-array expression"),
            Tok::Punct("(") => self.unsupported(self.span(), "call through expression"),
            _ => Ok(e),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        self.check_keyword()?;
        match self.peek() {
            Tok::Int(text) | Tok::Float(text) => {
                let is_int = matches!(self.peek(), Tok::Int(_));
                self.bump();
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    span: start,
                    message: format!("malformed number `{text}`"),
                })?;
                if is_int && text.parse::<i64>().is_err() {
                    return Err(ParseError::Syntax {
                        span: start,
                        message: format!("integer literal `{text}` out of range"),
                    });
                }
                Ok(Expr::new(
                    ExprKind::Constant(Literal {
                        text: text.clone(),
                        value,
                        is_int,
                    }),
                    start,
                ))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident()?;
                if self.at_punct("(") {
                    return self.call(name, span);
                }
                let sym = self.lookup(&name).ok_or_else(|| ParseError::UndeclaredIdentifier {
                    span,
                    name: name.clone(),
                })?;
                let indices = self.indices()?;
                let full = span.to(self.prev_span());
                match sym {
                    Sym::Scalar | Sym::Counter => {
                        if !indices.is_empty() {
                            return Err(ParseError::Syntax {
                                span,
                                message: format!("`{name}` is not an array"),
                            });
                        }
                        Ok(Expr::new(ExprKind::Var(name), span))
                    }
                    Sym::Array(rank) => {
                        self.check_rank(&name, span, rank, indices.len())?;
                        Ok(Expr::new(ExprKind::ArrayRef { base: name, indices }, full))
                    }
                }
            }
            _ => self.syntax(format!("expected expression, found {}", self.describe())),
        }
    }

    fn call(&mut self, name: String, span: SourceSpan) -> PResult<Expr> {
        let Some(intrinsic) = Intrinsic::from_name(&name) else {
            if name == self.func_name {
                return self.unsupported(span, "recursion");
            }
            return self.unsupported(span, format!("call to non-intrinsic function `{name}`"));
        };
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        if args.len() != intrinsic.arity() {
            return Err(ParseError::Syntax {
                span,
                message: format!(
                    "`{name}` expects {} argument(s), got {}",
                    intrinsic.arity(),
                    args.len()
                ),
            });
        }
        Ok(Expr::new(
            ExprKind::Call { intrinsic, args },
            span.to(self.prev_span()),
        ))
    }
}

fn lvalue_expr(target: &LValue) -> Expr {
    if target.indices.is_empty() {
        Expr::new(ExprKind::Var(target.name.clone()), target.span)
    } else {
        Expr::new(
            ExprKind::ArrayRef {
                base: target.name.clone(),
                indices: target.indices.clone(),
            },
            target.span,
        )
    }
}

/// The energy variable must be a `double` scalar declared at function scope and
/// assigned at least once (by its initializer or a later assignment).
fn check_energy(body: &[Stmt], energy: &str, fn_span: SourceSpan) -> PResult<()> {
    let decl = body.iter().find_map(|s| match &s.kind {
        StmtKind::Declaration { name, ty, dims, init } if name == energy => {
            Some((s.span, *ty, dims.is_empty(), init.is_some()))
        }
        _ => None,
    });
    let Some((span, ty, scalar, initialized)) = decl else {
        return Err(ParseError::MissingEnergyVar {
            span: fn_span,
            name: energy.to_string(),
        });
    };
    if ty != ScalarType::Double || !scalar {
        return Err(ParseError::Unsupported {
            span,
            construct: format!("energy variable `{energy}` must be a double scalar"),
        });
    }
    if initialized || assigns_to(body, energy) {
        Ok(())
    } else {
        Err(ParseError::MissingEnergyVar {
            span,
            name: energy.to_string(),
        })
    }
}

fn assigns_to(body: &[Stmt], name: &str) -> bool {
    body.iter().any(|s| match &s.kind {
        StmtKind::Assignment { target, .. } => target.name == name,
        StmtKind::ForLoop { body, .. } | StmtKind::Block(body) => assigns_to(body, name),
        StmtKind::If { then_body, else_body, .. } => {
            assigns_to(then_body, name) || else_body.as_ref().is_some_and(|b| assigns_to(b, name))
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CROSS_ENTROPY: &str = "double cross_entropy(const double **a, const double **b){
    double loss = 0;
    for(int i = 0; i < 2; i++){
        for(int j = 0; j < 2; j++ ){
            loss = loss - (b[i][j] * log(a[i][j] + 0.00001));
        }
    }
    return loss;
}";

    const FUNCTION_0: &str = "int function_0(double x){
    double energy = pow(x, 4) - 3*pow(x, 3) + 2;
    return 0;
}";

    #[test]
    fn function_0_listing() {
        let ir = parse_source(FUNCTION_0, "function_0", "energy").unwrap();
        assert_eq!(ir.params.len(), 1);
        assert_eq!(ir.params[0].name, "x");
        assert_eq!(ir.params[0].rank, 0);
        let decls: Vec<_> = ir
            .body
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Declaration { .. }))
            .collect();
        assert_eq!(decls.len(), 1);
        let StmtKind::Declaration { init: Some(init), .. } = &decls[0].kind else {
            panic!()
        };
        let expected = parse_expr("pow(x, 4) - 3*pow(x, 3) + 2", &["x"], &[]).unwrap();
        assert!(init.same_shape(&expected));
        assert_eq!(init.to_string(), "((pow(x, 4) - (3 * pow(x, 3))) + 2)");
    }

    #[test]
    fn identity_body() {
        let ir = parse_source("double f(double x){ double e = x; return 0; }", "f", "e").unwrap();
        assert_eq!(ir.body.len(), 2);
        match &ir.body[0].kind {
            StmtKind::Declaration { init: Some(e), .. } => {
                assert!(matches!(&e.kind, ExprKind::Var(v) if v == "x"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cross_entropy_listing() {
        let ir = parse_source(CROSS_ENTROPY, "cross_entropy", "loss").unwrap();
        assert_eq!(ir.params.len(), 2);
        assert!(ir.params.iter().all(|p| p.rank == 2 && p.extents == vec![None, None]));
        let decls = ir
            .body
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Declaration { .. }))
            .count();
        assert_eq!(decls, 1);
        let loop_stmt = ir
            .body
            .iter()
            .find(|s| matches!(s.kind, StmtKind::ForLoop { .. }))
            .unwrap();
        let StmtKind::ForLoop { body, counter, .. } = &loop_stmt.kind else { unreachable!() };
        assert_eq!(counter, "i");
        assert_eq!(body.len(), 1);
        let StmtKind::ForLoop { body: inner, counter, .. } = &body[0].kind else { panic!() };
        assert_eq!(counter, "j");
        assert_eq!(inner.len(), 1);
        assert!(matches!(inner[0].kind, StmtKind::Assignment { .. }));
    }

    #[test]
    fn compound_assignment_is_desugared() {
        let ir = parse_source("double f(double x){ double e = 1; e *= x; return 0; }", "f", "e")
            .unwrap();
        let StmtKind::Assignment { rhs, .. } = &ir.body[1].kind else { panic!() };
        assert_eq!(rhs.to_string(), "(e * x)");
    }

    #[test]
    fn precedence_follows_c() {
        let e = parse_expr("a - b * c / d + -e", &["a", "b", "c", "d", "e"], &[]).unwrap();
        assert_eq!(e.to_string(), "((a - ((b * c) / d)) + -(e))");
        let e = parse_expr("a < b + 1 == c", &["a", "b", "c"], &[]).unwrap();
        assert_eq!(e.to_string(), "((a < (b + 1)) == c)");
    }

    #[test]
    fn rejects_unsupported_constructs() {
        let cases = [
            ("double f(double x){ double e = 0; while (e < 1) { e = e + x; } return 0; }", "`while`"),
            ("double f(double x){ double e = g(x); return 0; }", "non-intrinsic"),
            ("double f(double x){ double e = f(x); return 0; }", "recursion"),
            ("double f(double *x){ double e = *x; return 0; }", "pointer dereference"),
            ("double f(double *x){ double e = x + 1; return 0; }", "pointer arithmetic"),
            ("double f(double x){ double e = x; switch (1) {} return 0; }", "`switch`"),
            ("double f(double x){ double e = x; e /= 2; return 0; }", "`/=`"),
            ("double f(double x){ double e = x > 0 ? x : 0; return 0; }", "conditional"),
        ];
        for (src, needle) in cases {
            match parse_source(src, "f", "e") {
                Err(ParseError::Unsupported { construct, .. }) => {
                    assert!(construct.contains(needle), "{construct} lacks {needle}")
                }
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_function_and_energy() {
        assert!(matches!(
            parse_source(FUNCTION_0, "nope", "energy"),
            Err(ParseError::MissingFunction { .. })
        ));
        assert!(matches!(
            parse_source(FUNCTION_0, "function_0", "loss"),
            Err(ParseError::MissingEnergyVar { .. })
        ));
        assert!(matches!(
            parse_source("double f(double x){ double e; return 0; }", "f", "e"),
            Err(ParseError::MissingEnergyVar { .. })
        ));
    }

    #[test]
    fn undeclared_identifier_has_span() {
        let err = parse_source("double f(double x){\n  double e = y;\n}", "f", "e").unwrap_err();
        assert_eq!(
            err,
            ParseError::UndeclaredIdentifier {
                span: SourceSpan::new(2, 14, 1),
                name: "y".into()
            }
        );
    }

    #[test]
    fn skips_other_functions() {
        let src = "int helper(int k) { while (k) { k--; } return k; }\n".to_string() + FUNCTION_0;
        assert!(parse_source(&src, "function_0", "energy").is_ok());
    }

    #[test]
    fn loop_steps() {
        let src = "double f(double *x){ double e = 0;
            for (int i = 6; i > 0; i -= 2) e += x[i];
            for (int k = 0; k < 3; k = k + 1) { e = e * x[k]; }
            for (int m = 3; m > 0; --m) { e = e - x[m]; }
            return 0; }";
        let ir = parse_source(src, "f", "e").unwrap();
        let steps: Vec<String> = ir
            .body
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::ForLoop { step, .. } => Some(step.to_string()),
                _ => None,
            })
            .collect();
        assert_eq!(steps, vec!["-(2)", "1", "-(1)"]);
    }

    #[test]
    fn empty_loop_body_is_rejected() {
        let src = "double f(double x){ double e = x; for (int i = 0; i < 2; i++) {} return 0; }";
        assert!(matches!(parse_source(src, "f", "e"), Err(ParseError::Syntax { .. })));
    }
}
