//! End-to-end driver: source text to derivative bundle to C files.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ast::FunctionIR;
pub use crate::codegen::{Mode, Modes};
use crate::codegen::{emit, EmitConfig, GeneratedArtifact, Layout};
use crate::diff::{DerivativeBundle, DiffError, DiffOptions, VarIndexMap};
use crate::flatten::{unroll_with_limit, FlattenError, StraightLineProgram, DEFAULT_MAX_ASSIGNMENTS};
use crate::parser::{parse_source, ParseError};
use crate::slp_format::FormatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Flatten(#[from] FlattenError),
    #[error("{0}")]
    Diff(#[from] DiffError),
    #[error("{0}")]
    Format(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("verification failed: {0}")]
    Verify(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 input or usage errors, 2 I/O, 3 resource caps,
    /// 4 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Flatten(FlattenError::BoundExplosion { .. })
            | Error::Diff(DiffError::ExpressionExplosion { .. }) => 3,
            Error::Io { .. } => 2,
            Error::Verify(_) => 4,
            _ => 1,
        }
    }
}

/// Everything computed before emission.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub ir: FunctionIR,
    pub program: StraightLineProgram,
    pub vars: VarIndexMap,
    pub bundle: DerivativeBundle,
}

/// Parses, unrolls and differentiates. The Hessian is built only when requested.
pub fn analyze<S: AsRef<str>>(
    source: &str,
    func: &str,
    energy: &str,
    vars: &[S],
    modes: Modes,
    opts: DiffOptions,
) -> Result<Analysis, Error> {
    analyze_with_limit(source, func, energy, vars, modes, opts, DEFAULT_MAX_ASSIGNMENTS)
}

pub fn analyze_with_limit<S: AsRef<str>>(
    source: &str,
    func: &str,
    energy: &str,
    vars: &[S],
    modes: Modes,
    opts: DiffOptions,
    max_assignments: usize,
) -> Result<Analysis, Error> {
    if modes.is_empty() {
        return Err(Error::Usage("no mode selected".into()));
    }
    if modes.needs_vars() && vars.is_empty() {
        return Err(Error::Usage(
            "--vars is required for gradient and hessian modes".into(),
        ));
    }
    let ir = parse_source(source, func, energy)?;
    let program = unroll_with_limit(&ir, max_assignments)?;
    let vars = VarIndexMap::from_names(&program, vars)?;
    let bundle = DerivativeBundle::build(&program, &vars, opts, modes.hessian)?;
    Ok(Analysis {
        ir,
        program,
        vars,
        bundle,
    })
}

impl Analysis {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.program, &self.vars)
    }

    pub fn emit(&self, cfg: &EmitConfig) -> GeneratedArtifact {
        emit(&self.bundle, &self.layout(), cfg)
    }
}

/// Writes the header and sources next to `stem` (a path without extension).
pub fn write_artifact(art: &GeneratedArtifact, dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut written = Vec::new();
    let files = std::iter::once((&art.header_name, &art.header))
        .chain(art.sources.iter().map(|s| (&s.filename, &s.text)));
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Runs `f` on a thread with a large stack. Parsing and unrolling recurse
/// over the syntax tree and deeply nested input needs the headroom.
pub fn with_large_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(LARGE_STACK)
            .spawn_scoped(s, f)
            .expect("spawn worker thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

pub const LARGE_STACK: usize = 512 << 20;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            Error::Flatten(FlattenError::BoundExplosion {
                span: Default::default(),
                limit: 1
            })
            .exit_code(),
            3
        );
        assert_eq!(Error::io("x", io::Error::other("boom")).exit_code(), 2);
        assert_eq!(Error::Verify("x".into()).exit_code(), 4);
    }

    #[test]
    fn gradient_needs_vars() {
        let src = "double f(double x){ double e = x; return 0; }";
        let none: [&str; 0] = [];
        let r = analyze(src, "f", "e", &none, Modes::only(Mode::Gradient), DiffOptions::default());
        assert!(matches!(r, Err(Error::Usage(_))));
        let r = analyze(src, "f", "e", &none, Modes::only(Mode::Function), DiffOptions::default());
        assert!(r.is_ok());
    }
}
