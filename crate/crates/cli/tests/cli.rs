use std::path::Path;
use std::process::{Command, Output};

use acorns_core::{corpus, deserialize, parse_source, unroll};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_acorns_autodiff"));
    c.env_remove("ACORNS_MAX_NODES");
    c
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    bin().current_dir(cwd).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A project directory holding `functions/<name>.c` and an empty `ders/`.
fn project(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let f = corpus::get(name, None).unwrap();
    std::fs::create_dir(dir.path().join("functions")).unwrap();
    std::fs::create_dir(dir.path().join("ders")).unwrap();
    std::fs::write(dir.path().join(format!("functions/{name}.c")), f.source).unwrap();
    dir
}

const CMAKE_ARGS: &[&str] = &[
    "functions/function_0.c",
    "energy",
    "--vars",
    "x",
    "--func",
    "function_0",
    "--output_filename",
    "ders/der_0",
];

#[test]
fn cmake_invocation_writes_header_and_source() {
    let dir = project("function_0");
    let o = run(dir.path(), CMAKE_ARGS);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut files: Vec<String> = std::fs::read_dir(dir.path().join("ders"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["der_0.h", "der_0_part0.c"]);
    let header = std::fs::read_to_string(dir.path().join("ders/der_0.h")).unwrap();
    for driver in ["void compute(", "void compute_grad(", "void compute_hess("] {
        assert!(header.contains(driver), "{driver}");
    }
    assert!(stdout(&o).starts_with("der_0: 1 vars"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = project("function_0");
    assert_eq!(code(&run(dir.path(), CMAKE_ARGS)), 0);
    let first: Vec<Vec<u8>> = ["ders/der_0.h", "ders/der_0_part0.c"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
    assert_eq!(code(&run(dir.path(), CMAKE_ARGS)), 0);
    for (f, bytes) in ["ders/der_0.h", "ders/der_0_part0.c"].iter().zip(first) {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), bytes, "{f}");
    }
}

#[test]
fn gradient_without_vars_is_a_usage_error() {
    let dir = project("function_0");
    let o = run(
        dir.path(),
        &[
            "functions/function_0.c",
            "energy",
            "--func",
            "function_0",
            "--output_filename",
            "ders/der_0",
            "--mode",
            "gradient",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--vars"), "{}", stderr(&o));
    assert!(!dir.path().join("ders/der_0.h").exists());
}

#[test]
fn function_mode_needs_no_vars() {
    let dir = project("function_0");
    let o = run(
        dir.path(),
        &["functions/function_0.c", "energy", "--func", "function_0", "--output_filename", "ders/f", "--mode", "function"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let header = std::fs::read_to_string(dir.path().join("ders/f.h")).unwrap();
    assert!(header.contains("void compute(") && !header.contains("void compute_grad("));
}

#[test]
fn cross_entropy_header_declares_gradient_and_hessian() {
    let dir = project("cross_entropy");
    let o = run(
        dir.path(),
        &[
            "functions/cross_entropy.c",
            "loss",
            "--vars",
            "a",
            "--func",
            "cross_entropy",
            "--output_filename",
            "ders/ce",
            "--mode",
            "gradient",
            "hessian",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let header = std::fs::read_to_string(dir.path().join("ders/ce.h")).unwrap();
    assert!(header.contains("void compute_grad(const double* vals, int num_points, double* ders);"));
    assert!(header.contains("void compute_hess(const double* vals, int num_points, double* hess);"));
    assert!(!header.contains("void compute("));
    assert!(header.contains("#define CE_NUM_VARS 4\n"));
    assert!(header.contains("#define CE_NUM_INPUTS 8\n"));
}

#[test]
fn no_simplify_keeps_zero_factors() {
    let dir = project("cross_entropy");
    let base = [
        "functions/cross_entropy.c",
        "loss",
        "--vars",
        "a",
        "--func",
        "cross_entropy",
        "--mode",
        "gradient",
        "--output_filename",
    ];
    let raw = run(dir.path(), &[&base[..], &["ders/raw", "--no-simplify"]].concat());
    assert_eq!(code(&raw), 0);
    let simp = run(dir.path(), &[&base[..], &["ders/simp"]].concat());
    assert_eq!(code(&simp), 0);
    let raw = std::fs::read_to_string(dir.path().join("ders/raw_part0.c")).unwrap();
    let simp = std::fs::read_to_string(dir.path().join("ders/simp_part0.c")).unwrap();
    assert!(raw.contains("(1/((a[0][1] + 0.00001))*0)"));
    assert!(!simp.contains("*0)"));
    assert!(std::fs::read_to_string(dir.path().join("ders/raw.h")).unwrap().contains("simplify: off"));
}

#[test]
fn parallel_flag_adds_guarded_pragma() {
    let dir = project("function_0");
    let o = run(dir.path(), &[CMAKE_ARGS, &["--parallel"]].concat());
    assert_eq!(code(&o), 0);
    let src = std::fs::read_to_string(dir.path().join("ders/der_0_part0.c")).unwrap();
    assert_eq!(src.matches("#ifdef _OPENMP\n#pragma omp parallel for\n#endif\n").count(), 3);
}

#[test]
fn single_file_uses_plain_name() {
    let dir = project("function_0");
    let o = run(dir.path(), &[CMAKE_ARGS, &["--single-file"]].concat());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("ders/der_0.c").exists());
    assert!(!dir.path().join("ders/der_0_part0.c").exists());
}

#[test]
fn split_size_is_honoured_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eq3.c"), corpus::eq3_source(10)).unwrap();
    let args = ["eq3.c", "energy", "--vars", "x", "--func", "eq3", "--no-simplify", "--mode", "hessian"];
    let o = run(dir.path(), &[&args[..], &["--output_filename", "out/e", "--split-size", "64K"]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let parts = std::fs::read_dir(dir.path().join("out")).unwrap().count() - 1;
    assert!(parts > 10, "{parts}");
    let o = run(dir.path(), &[&args[..], &["--output_filename", "out/e", "--split-size", "1K"]].concat());
    assert_eq!(code(&o), 1);
}

#[test]
fn dumps_round_trip() {
    let dir = project("cross_entropy");
    let o = run(
        dir.path(),
        &[
            "functions/cross_entropy.c",
            "loss",
            "--vars",
            "a",
            "--func",
            "cross_entropy",
            "--output_filename",
            "ders/ce",
            "--dump-slp",
            "--dump-text",
        ],
    );
    assert_eq!(code(&o), 0);
    let src = corpus::get("cross_entropy", None).unwrap().source;
    let p = unroll(&parse_source(&src, "cross_entropy", "loss").unwrap()).unwrap();
    let bytes = std::fs::read(dir.path().join("ders/ce.slp")).unwrap();
    assert_eq!(deserialize(&bytes).unwrap(), p);
    let text = std::fs::read_to_string(dir.path().join("ders/ce.slp.txt")).unwrap();
    assert_eq!(text, p.render_text());
}

#[test]
fn input_errors_exit_1_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.c"), "double f(double x){\n    double e = x +;\n    return 0;\n}\n").unwrap();
    let o = run(dir.path(), &["bad.c", "e", "--vars", "x", "--func", "f", "--output_filename", "o/f"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("2:"), "{}", stderr(&o));
    std::fs::write(dir.path().join("w.c"), "double f(double x){ double e = x; while (e < 1) e = e * 2; return 0; }")
        .unwrap();
    let o = run(dir.path(), &["w.c", "e", "--vars", "x", "--func", "f", "--output_filename", "o/f"]);
    assert_eq!(code(&o), 1);
    let o = run(dir.path(), &["w.c", "e", "--vars", "z", "--func", "g", "--output_filename", "o/f"]);
    assert_eq!(code(&o), 1);
    let o = run(dir.path(), &["w.c", "e", "--vars", "x", "--func", "f", "--output_filename", "o/f", "--mode", "bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn io_errors_exit_2() {
    let dir = project("function_0");
    let o = run(
        dir.path(),
        &["functions/missing.c", "energy", "--vars", "x", "--func", "function_0", "--output_filename", "ders/d"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = run(
        dir.path(),
        &["functions/function_0.c", "energy", "--vars", "x", "--func", "function_0", "--output_filename", "blocker/d"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn resource_caps_exit_3() {
    let dir = project("function_0");
    let o = bin()
        .current_dir(dir.path())
        .env("ACORNS_MAX_NODES", "5")
        .args(CMAKE_ARGS)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = bin()
        .current_dir(dir.path())
        .env("ACORNS_MAX_NODES", "lots")
        .args(CMAKE_ARGS)
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    std::fs::write(
        dir.path().join("big.c"),
        "double f(double x){ double e = 0; for (int i = 0; i < 100000000; i++) e = e + x; return 0; }",
    )
    .unwrap();
    let o = run(dir.path(), &["big.c", "e", "--vars", "x", "--func", "f", "--output_filename", "ders/big"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "eq2", "--points", "100", "--mode", "gradient"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("eq2: 100/100 entries pass over 100 points"), "{last}");
    let max: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(max <= 1e-6, "{max}");

    let o = run(dir.path(), &["verify", "eq3", "--s", "10", "--points", "100", "--mode", "hessian"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().last().unwrap().starts_with("eq3 (s=10): 5500/5500"));

    let o = run(dir.path(), &["verify", "const_fn", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert!(csv.starts_with("entry,analytic,fd,relerr,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0e0")));

    let o = run(dir.path(), &["verify", "nosuch"]);
    assert_eq!(code(&o), 1);

    std::fs::write(dir.path().join("wild.c"), "double w(double x){ double e = sin(1000000*x); return 0; }").unwrap();
    let o = run(
        dir.path(),
        &["verify", "--source", "wild.c", "--func", "w", "--energy", "e", "--vars", "x", "--mode", "gradient"],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}
