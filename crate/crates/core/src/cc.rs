//! Compiling a generated artifact with the system C compiler and running its
//! drivers on packed point data.
//!
//! The compiled program is a small harness around the artifact: it reads
//! `vals` as raw doubles from a file, calls one driver and writes the output
//! array back, so values cross the process boundary bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::codegen::{GeneratedArtifact, Mode, Modes};

/// Strict C99 with all common warnings.
pub const STRICT_FLAGS: &[&str] = &["-std=c99", "-Wall", "-Wextra", "-pedantic"];

#[derive(Debug, Error)]
pub enum CcError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("compilation failed:\n{0}")]
    Compile(String),
    #[error("kernel run failed: {0}")]
    Run(String),
}

/// The compiler named by `$CC`, else the first of `cc`, `gcc`, `clang` that runs.
pub fn find_compiler() -> Option<String> {
    let candidates = std::env::var("CC").ok().into_iter().chain(["cc", "gcc", "clang"].map(String::from));
    candidates.into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

/// A compiled harness executable.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub exe: PathBuf,
    /// Compiler diagnostics; empty for a clean build.
    pub warnings: String,
    dir: PathBuf,
}

fn harness(header: &str, modes: Modes) -> String {
    let mut t = String::new();
    t.push_str("#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n");
    let _ = writeln!(t, "#include \"{header}\"\n");
    t.push_str(
        "int main(int argc, char **argv)
{
    long num_inputs, num_points, out_len;
    double *vals, *out;
    FILE *f;
    if (argc != 7)
        return 2;
    num_inputs = atol(argv[4]);
    num_points = atol(argv[5]);
    out_len = atol(argv[6]);
    vals = malloc(sizeof(double) * (size_t)(num_inputs * num_points + 1));
    out = calloc((size_t)(out_len * num_points + 1), sizeof(double));
    if (!vals || !out)
        return 3;
    f = fopen(argv[2], \"rb\");
    if (!f || fread(vals, sizeof(double), (size_t)(num_inputs * num_points), f) != (size_t)(num_inputs * num_points))
        return 4;
    fclose(f);
",
    );
    let mut first = true;
    for mode in modes.iter() {
        let _ = writeln!(
            t,
            "    {}if (strcmp(argv[1], \"{}\") == 0)\n        {}(vals, (int)num_points, out);",
            if first { "" } else { "else " },
            mode.name(),
            mode.driver()
        );
        first = false;
    }
    t.push_str(
        "    else
        return 5;
    f = fopen(argv[3], \"wb\");
    if (!f || fwrite(out, sizeof(double), (size_t)(out_len * num_points), f) != (size_t)(out_len * num_points))
        return 6;
    fclose(f);
    free(vals);
    free(out);
    return 0;
}
",
    );
    t
}

/// Writes the artifact and a harness into `dir` and builds them with
/// `compiler`, [`STRICT_FLAGS`], `-O2` and `extra_flags`.
pub fn build(
    compiler: &str,
    art: &GeneratedArtifact,
    modes: Modes,
    dir: &Path,
    extra_flags: &[&str],
) -> Result<Kernel, CcError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(&art.header_name), &art.header)?;
    let mut sources = Vec::new();
    for s in &art.sources {
        std::fs::write(dir.join(&s.filename), &s.text)?;
        sources.push(dir.join(&s.filename));
    }
    let main = dir.join("acorns_harness_main.c");
    std::fs::write(&main, harness(&art.header_name, modes))?;
    sources.push(main);
    let exe = dir.join("acorns_harness");
    let out = Command::new(compiler)
        .args(STRICT_FLAGS)
        .arg("-O2")
        .args(extra_flags)
        .arg("-o")
        .arg(&exe)
        .args(&sources)
        .arg("-lm")
        .output()?;
    let diagnostics = String::from_utf8_lossy(&out.stderr).into_owned();
    if !out.status.success() {
        return Err(CcError::Compile(diagnostics));
    }
    Ok(Kernel {
        exe,
        warnings: diagnostics,
        dir: dir.to_path_buf(),
    })
}

impl Kernel {
    /// Runs the driver of `mode` on `vals` (`num_inputs` doubles per point)
    /// and returns `out_len` doubles per point.
    pub fn run(&self, mode: Mode, vals: &[f64], num_inputs: usize, out_len: usize) -> Result<Vec<f64>, CcError> {
        let num_points = vals.len().checked_div(num_inputs).unwrap_or(0);
        let input = self.dir.join(format!("vals_{}.bin", mode.name()));
        let output = self.dir.join(format!("out_{}.bin", mode.name()));
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_ne_bytes()).collect();
        std::fs::write(&input, bytes)?;
        let status = Command::new(&self.exe)
            .arg(mode.name())
            .arg(&input)
            .arg(&output)
            .arg(num_inputs.to_string())
            .arg(num_points.to_string())
            .arg(out_len.to_string())
            .status()?;
        if !status.success() {
            return Err(CcError::Run(format!("{} exited with {status}", self.exe.display())));
        }
        let raw = std::fs::read(&output)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_ne_bytes(c.try_into().unwrap()))
            .collect())
    }
}
