//! Source-to-source automatic differentiation for a restricted C99 subset.
//!
//! The pipeline is `parse_source` -> `unroll` -> `DerivativeBundle::build`
//! -> `emit`. The `verify` module checks derivatives against finite
//! differences and a reference interpreter of the looped source.

pub mod ast;
pub mod cc;
pub mod codegen;
pub mod corpus;
pub mod diff;
pub mod expr;
pub mod flatten;
pub mod gen;
pub mod lexer;
pub mod parser;
pub mod pipeline;
pub mod simplify;
pub mod slp_format;
pub mod validate;
pub mod verify;

pub use ast::{FunctionIR, Param, SourceSpan};
pub use codegen::{emit, EmitConfig, GeneratedArtifact, Layout, Mode, Modes, SourceFile, Statement};
pub use diff::{
    differentiate, gradient, hessian, substitute, DerivativeBundle, DiffError, DiffOptions, VarIndexMap,
};
pub use expr::{BinOp, Constant, Expr, Func, Kind};
pub use flatten::{
    eval_const, unroll, Assign, AssignKind, FlattenError, InputSlot, StraightLineProgram, Target,
};
pub use parser::{parse_source, ParseError};
pub use pipeline::{analyze, Analysis, Error};
pub use simplify::simplify;
pub use slp_format::{deserialize, serialize, FormatError};
pub use validate::{validate_subset, Violation};
pub use verify::{eval_expr, eval_program, fd_gradient, fd_hessian, interpret, FdReport, VerifyRequest};
