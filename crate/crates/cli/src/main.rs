//! `acorns_autodiff`: generate C99 derivative kernels from a C function.
//!
//! ```text
//! acorns_autodiff function_0.c energy --vars x --func function_0 --output_filename ders/der_0
//! acorns_autodiff verify eq3 --s 10 --points 100 --mode hessian
//! ```

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acorns_core::codegen::{EmitConfig, Mode, Modes, DEFAULT_SPLIT_TARGET, MIN_SPLIT_TARGET};
use acorns_core::diff::{DiffOptions, DEFAULT_MAX_NODES};
use acorns_core::pipeline::{self, analyze, write_artifact, Error};
use acorns_core::verify::{user_function, verify, VerifyRequest, DEFAULT_SEED};
use acorns_core::{corpus, slp_format};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "acorns_autodiff",
    version,
    about = "Differentiate a C99 function and emit gradient and Hessian kernels",
    args_conflicts_with_subcommands = true,
    subcommand_negates_reqs = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    generate: GenerateArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check derivatives against finite differences at random points.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// C source file containing the function.
    #[arg(required = true)]
    input: Option<PathBuf>,
    /// Local variable holding the value to differentiate.
    #[arg(required = true)]
    energy: Option<String>,
    /// Independent variables: parameter names or elements such as `a[0][1]`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    vars: Vec<String>,
    /// Name of the function to differentiate.
    #[arg(long, required = true)]
    func: Option<String>,
    /// Output path without extension; writes `<stem>.h` and `<stem>_partK.c`.
    #[arg(long = "output_filename", alias = "output-filename", required = true)]
    output_filename: Option<PathBuf>,
    /// Kernels to generate.
    #[arg(long, num_args = 1.., value_enum, default_values_t = [ModeArg::Function, ModeArg::Gradient, ModeArg::Hessian])]
    mode: Vec<ModeArg>,
    /// Target size of each generated source file, in bytes (suffixes K and M allowed).
    #[arg(long = "split-size", value_parser = parse_size, default_value_t = DEFAULT_SPLIT_TARGET)]
    split_size: usize,
    /// Annotate the point loops with an OpenMP parallel-for.
    #[arg(long)]
    parallel: bool,
    /// Keep unsimplified derivative expressions.
    #[arg(long = "no-simplify")]
    no_simplify: bool,
    /// Also write the straight-line program as `<stem>.slp`.
    #[arg(long = "dump-slp")]
    dump_slp: bool,
    /// Also write a readable listing of the straight-line program as `<stem>.slp.txt`.
    #[arg(long = "dump-text")]
    dump_text: bool,
    /// Name the source `<stem>.c` when everything fits in one file.
    #[arg(long = "single-file")]
    single_file: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Corpus function: eq1, eq2, eq3, cross_entropy, function_0, const_fn.
    #[arg(required_unless_present = "source")]
    name: Option<String>,
    /// Verify a user source file instead of a corpus function.
    #[arg(long, requires_all = ["func", "energy", "vars"], conflicts_with = "name")]
    source: Option<PathBuf>,
    #[arg(long)]
    func: Option<String>,
    #[arg(long)]
    energy: Option<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    vars: Vec<String>,
    /// Number of variables of eq3.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, num_args = 1.., value_enum, default_values_t = [ModeArg::Gradient, ModeArg::Hessian])]
    mode: Vec<ModeArg>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long = "no-simplify")]
    no_simplify: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Function,
    Gradient,
    Hessian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Csv,
}

fn modes(args: &[ModeArg]) -> Modes {
    let mut m = Modes::none();
    for a in args {
        m.insert(match a {
            ModeArg::Function => Mode::Function,
            ModeArg::Gradient => Mode::Gradient,
            ModeArg::Hessian => Mode::Hessian,
        });
    }
    m
}

fn parse_size(s: &str) -> Result<usize, String> {
    let (digits, unit) = match s.as_bytes().last() {
        Some(b'K' | b'k') => (&s[..s.len() - 1], 1 << 10),
        Some(b'M' | b'm') => (&s[..s.len() - 1], 1 << 20),
        _ => (s, 1),
    };
    let n: usize = digits.parse().map_err(|_| format!("invalid size `{s}`"))?;
    let bytes = n.checked_mul(unit).ok_or_else(|| format!("size `{s}` too large"))?;
    if bytes < MIN_SPLIT_TARGET {
        return Err(format!("split size must be at least {MIN_SPLIT_TARGET} bytes"));
    }
    Ok(bytes)
}

fn max_nodes() -> Result<u64, Error> {
    match std::env::var("ACORNS_MAX_NODES") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("ACORNS_MAX_NODES: `{v}` is not a node count"))),
        Err(_) => Ok(DEFAULT_MAX_NODES),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn generate(args: GenerateArgs) -> Result<String, Error> {
    let input = args.input.expect("required by clap");
    let energy = args.energy.expect("required by clap");
    let func = args.func.expect("required by clap");
    let stem = args.output_filename.expect("required by clap");
    let modes = modes(&args.mode);
    let opts = DiffOptions {
        simplify: !args.no_simplify,
        max_nodes: max_nodes()?,
    };

    let source = read(&input)?;
    let a = analyze(&source, &func, &energy, &args.vars, modes, opts)?;

    let dir = stem.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let basename = stem
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Usage(format!("invalid output stem `{}`", stem.display())))?
        .to_string();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    if args.dump_slp {
        write(&dir.join(format!("{basename}.slp")), slp_format::serialize(&a.program))?;
    }
    if args.dump_text {
        write(&dir.join(format!("{basename}.slp.txt")), a.program.render_text())?;
    }

    let source_name = input
        .file_name()
        .map_or_else(|| input.display().to_string(), |n| n.to_string_lossy().into_owned());
    let cfg = EmitConfig {
        modes,
        split_target_bytes: args.split_size,
        parallel: args.parallel,
        basename: basename.clone(),
        simplified: opts.simplify,
        single_file: args.single_file,
        provenance: vec![
            format!("source: {source_name}"),
            format!("function: {func}, energy: {energy}"),
            format!("vars: {} (n = {})", args.vars.join(" "), a.vars.len()),
        ],
    };
    let art = a.emit(&cfg);
    if args.single_file && art.sources.len() > 1 {
        eprintln!(
            "warning: output needs {} files; --single-file naming not applied",
            art.sources.len()
        );
    }
    let written = write_artifact(&art, dir)?;
    let names: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    Ok(format!(
        "{basename}: {} vars, {} statements, {} files ({})",
        a.vars.len(),
        art.statements.len(),
        art.sources.len() + 1,
        names.join(", ")
    ))
}

fn run_verify(args: VerifyArgs) -> Result<Option<String>, Error> {
    let function = match (&args.name, &args.source) {
        (_, Some(path)) => user_function(
            read(path)?,
            args.func.as_deref().unwrap_or_default(),
            args.energy.as_deref().unwrap_or_default(),
            &args.vars,
        ),
        (Some(name), None) => corpus::get(name, args.s).ok_or_else(|| {
            Error::Usage(format!(
                "unknown corpus function `{name}` (expected one of {})",
                corpus::NAMES.join(", ")
            ))
        })?,
        (None, None) => unreachable!("clap requires a name or --source"),
    };
    let req = VerifyRequest {
        function,
        modes: modes(&args.mode),
        points: args.points,
        seed: args.seed,
        simplify: !args.no_simplify,
    };
    let report = verify(&req)?;
    // The text report ends with the summary line; CSV stays machine-readable
    // and the summary goes to stderr.
    let body = match args.format {
        Format::Text => report.to_text(),
        Format::Csv => {
            eprintln!("{}", report.summary());
            report.to_csv()
        }
    };
    let _ = std::io::stdout().lock().write_all(body.as_bytes());
    if report.all_pass() {
        Ok(None)
    } else {
        Err(Error::Verify(report.summary()))
    }
}

/// Returns the summary line to print on success, if any.
fn run(cli: Cli) -> Result<Option<String>, Error> {
    match cli.command {
        Some(Command::Verify(v)) => run_verify(v),
        None => generate(cli.generate).map(Some),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // Worker threads render and differentiate long expressions.
    let _ = rayon::ThreadPoolBuilder::new()
        .stack_size(64 << 20)
        .build_global();
    match pipeline::with_large_stack(|| run(cli)) {
        Ok(summary) => {
            if let Some(line) = summary {
                let _ = writeln!(std::io::stdout().lock(), "{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("acorns_autodiff: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
