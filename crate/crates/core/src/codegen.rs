//! C99 emission: a header plus `_partK.c` sources with per-point drivers.
//!
//! Every requested entry becomes one statement writing into the current
//! point's output block. Statements of all modes form one ordered stream that
//! is packed greedily into files; each (mode, file) pair becomes a chunk
//! function and the drivers in part 0 call the chunks in order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;

use crate::diff::{lower_index, DerivativeBundle, VarIndexMap};
use crate::expr::{write_c, Expr, LeafNames};
use crate::flatten::StraightLineProgram;

pub const DEFAULT_SPLIT_TARGET: usize = 16 << 20;
pub const MIN_SPLIT_TARGET: usize = 1 << 16;

/// Which kernels to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modes {
    pub function: bool,
    pub gradient: bool,
    pub hessian: bool,
}

impl Modes {
    pub const fn all() -> Self {
        Modes {
            function: true,
            gradient: true,
            hessian: true,
        }
    }

    pub const fn none() -> Self {
        Modes {
            function: false,
            gradient: false,
            hessian: false,
        }
    }

    pub const fn derivatives() -> Self {
        Modes {
            function: false,
            gradient: true,
            hessian: true,
        }
    }

    pub fn only(mode: Mode) -> Self {
        let mut m = Modes::none();
        m.insert(mode);
        m
    }

    pub fn insert(&mut self, mode: Mode) {
        match mode {
            Mode::Function => self.function = true,
            Mode::Gradient => self.gradient = true,
            Mode::Hessian => self.hessian = true,
        }
    }

    pub fn contains(&self, mode: Mode) -> bool {
        match mode {
            Mode::Function => self.function,
            Mode::Gradient => self.gradient,
            Mode::Hessian => self.hessian,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.function || self.gradient || self.hessian)
    }

    pub fn needs_vars(&self) -> bool {
        self.gradient || self.hessian
    }

    pub fn iter(self) -> impl Iterator<Item = Mode> {
        Mode::ALL.into_iter().filter(move |m| self.contains(*m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Function,
    Gradient,
    Hessian,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Function, Mode::Gradient, Mode::Hessian];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Function => "function",
            Mode::Gradient => "gradient",
            Mode::Hessian => "hessian",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn driver(self) -> &'static str {
        match self {
            Mode::Function => "compute",
            Mode::Gradient => "compute_grad",
            Mode::Hessian => "compute_hess",
        }
    }

    fn out_param(self) -> &'static str {
        match self {
            Mode::Function => "out",
            Mode::Gradient => "ders",
            Mode::Hessian => "hess",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Mode::Function => "f",
            Mode::Gradient => "grad",
            Mode::Hessian => "hess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitConfig {
    pub modes: Modes,
    pub split_target_bytes: usize,
    pub parallel: bool,
    /// Output file stem without directory, e.g. `der_0`.
    pub basename: String,
    pub simplified: bool,
    /// Name `<basename>.c` instead of `<basename>_part0.c` when one file suffices.
    pub single_file: bool,
    /// Provenance lines written into the header comment.
    pub provenance: Vec<String>,
}

impl EmitConfig {
    pub fn new(basename: impl Into<String>) -> Self {
        EmitConfig {
            modes: Modes::all(),
            split_target_bytes: DEFAULT_SPLIT_TARGET,
            parallel: false,
            basename: basename.into(),
            simplified: true,
            single_file: false,
            provenance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub filename: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedArtifact {
    pub header_name: String,
    pub header: String,
    pub sources: Vec<SourceFile>,
    /// The ordered statement stream and the slice of it each source holds.
    pub statements: Vec<Statement>,
    pub parts: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub mode: Mode,
    /// One or two lines, each indented and newline terminated.
    pub text: String,
    /// Input slots the statement reads.
    pub slots: BTreeSet<u32>,
}

/// How one parameter appears in `vals`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub name: String,
    /// Identifier used in generated code (mangled if it would clash).
    pub c_name: String,
    pub extents: Vec<usize>,
    /// Offset of element 0 when the parameter occupies a row-major run of `vals`.
    pub offset: Option<usize>,
}

/// Placement of the input slots in each point's block of `vals`:
/// independent variables first, then the other parameters in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub order: Vec<u32>,
    pub position: Vec<usize>,
    pub params: Vec<ParamLayout>,
    /// Parameter index of each slot.
    slot_param: Vec<usize>,
    n_vars: usize,
    program_inputs: Vec<crate::flatten::InputSlot>,
}

const RESERVED: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex", "_Imaginary", "vals",
    "out", "ders", "hess", "num_points", "p", "v", "o", "pow", "log", "exp", "sin", "cos", "tan",
    "sqrt", "compute", "compute_grad", "compute_hess",
];

impl Layout {
    pub fn new(p: &StraightLineProgram, vars: &VarIndexMap) -> Layout {
        let mut order: Vec<u32> = vars.slots().to_vec();
        let chosen: BTreeSet<u32> = order.iter().copied().collect();
        order.extend((0..p.inputs.len() as u32).filter(|s| !chosen.contains(s)));
        let mut position = vec![0; p.inputs.len()];
        for (k, &s) in order.iter().enumerate() {
            position[s as usize] = k;
        }

        let mut names: Vec<&str> = Vec::new();
        for s in &p.inputs {
            if !names.contains(&s.param.as_str()) {
                names.push(&s.param);
            }
        }
        let mut slot_param = vec![0; p.inputs.len()];
        let params = names
            .iter()
            .enumerate()
            .map(|(pi, name)| {
                let slots = p.param_slots(name);
                for &s in &slots {
                    slot_param[s as usize] = pi;
                }
                let rank = p.inputs[slots[0] as usize].index.len();
                let extents = (0..rank)
                    .map(|d| slots.iter().map(|&s| p.inputs[s as usize].index[d] + 1).max().unwrap())
                    .collect();
                let first = position[slots[0] as usize];
                let contiguous = slots
                    .iter()
                    .enumerate()
                    .all(|(k, &s)| position[s as usize] == first + k);
                let mut c_name = name.to_string();
                while RESERVED.contains(&c_name.as_str()) || names.contains(&c_name.as_str()) && c_name != *name {
                    c_name.push('_');
                }
                ParamLayout {
                    name: name.to_string(),
                    c_name,
                    extents,
                    offset: contiguous.then_some(first),
                }
            })
            .collect();
        Layout {
            order,
            position,
            params,
            slot_param,
            n_vars: vars.len(),
            program_inputs: p.inputs.clone(),
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.order.len()
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    /// Packs per-parameter values into one point's `vals` block.
    pub fn pack(&self, slot_values: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&s| slot_values[s as usize]).collect()
    }

    fn alias(&self, pl: &ParamLayout) -> Option<String> {
        let off = pl.offset?;
        Some(match pl.extents.len() {
            0 => format!("    const double {} = vals[{off}];\n", pl.c_name),
            1 => format!("    const double *{} = vals + {off};\n", pl.c_name),
            _ => {
                let dims: String = pl.extents[1..].iter().map(|e| format!("[{e}]")).collect();
                format!(
                    "    const double (*{0}){1} = (const double (*){1})(vals + {off});\n",
                    pl.c_name, dims
                )
            }
        })
    }
}

impl LeafNames for Layout {
    fn input(&self, slot: u32, out: &mut String) {
        let pl = &self.params[self.slot_param[slot as usize]];
        if pl.offset.is_some() {
            out.push_str(&pl.c_name);
            for i in &self.program_inputs[slot as usize].index {
                let _ = write!(out, "[{i}]");
            }
        } else {
            let _ = write!(out, "vals[{}]", self.position[slot as usize]);
        }
    }

    fn temp(&self, id: u32, out: &mut String) {
        let _ = write!(out, "t{id}");
    }
}

/// Renders every requested entry as a statement, in mode order.
pub fn statement_stream(bundle: &DerivativeBundle, layout: &Layout, modes: Modes) -> Vec<Statement> {
    let n = bundle.n();
    let mut jobs: Vec<(Mode, String, &Expr, Option<String>)> = Vec::new();
    if modes.function {
        jobs.push((Mode::Function, "out[0]".into(), &bundle.f, None));
    }
    if modes.gradient {
        for (j, g) in bundle.grad.iter().enumerate() {
            jobs.push((Mode::Gradient, format!("out[{j}]"), g, None));
        }
    }
    if modes.hessian {
        for i in 0..n {
            for j in 0..=i {
                let lower = format!("out[{}]", i * n + j);
                let mirror = (i != j).then(|| format!("    out[{}] = {lower};\n", j * n + i));
                jobs.push((Mode::Hessian, lower, &bundle.hess_lower[lower_index(i, j)], mirror));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(mode, lhs, e, mirror)| {
            let mut text = String::with_capacity(e.tree_size().min(1 << 24) as usize * 6 + 32);
            text.push_str("    ");
            text.push_str(&lhs);
            text.push_str(" = ");
            write_c(e, layout, &mut text);
            text.push_str(";\n");
            if let Some(m) = mirror {
                text.push_str(&m);
            }
            Statement {
                mode,
                text,
                slots: e.inputs(),
            }
        })
        .collect()
}

/// Greedy in-order packing: a new file starts when the next statement would
/// push the current one past `budget` bytes. Oversized statements sit alone.
pub fn split(statements: &[Statement], budget: usize) -> Vec<Range<usize>> {
    let mut parts = Vec::new();
    let (mut start, mut size) = (0, 0usize);
    for (k, s) in statements.iter().enumerate() {
        if k > start && size + s.text.len() > budget {
            parts.push(start..k);
            start = k;
            size = 0;
        }
        size += s.text.len();
    }
    if start < statements.len() || parts.is_empty() {
        parts.push(start..statements.len());
    }
    parts
}

pub fn emit(bundle: &DerivativeBundle, layout: &Layout, cfg: &EmitConfig) -> GeneratedArtifact {
    assert!(!cfg.modes.is_empty(), "no output mode selected");
    assert!(
        cfg.split_target_bytes >= MIN_SPLIT_TARGET,
        "split target below {MIN_SPLIT_TARGET} bytes"
    );
    let statements = statement_stream(bundle, layout, cfg.modes);
    let prefix = c_identifier(&cfg.basename);

    // File overhead (includes, chunk wrappers, aliases, drivers) is not known
    // until the split is fixed, so reserve room for it and grow the reserve
    // until every file meets the size bound.
    let mut reserve = 4096 + layout.params.len() * 256;
    loop {
        let budget = cfg.split_target_bytes.saturating_sub(reserve).max(1);
        let parts = split(&statements, budget);
        let sources = render_sources(&statements, &parts, layout, cfg, &prefix);
        let worst = sources
            .iter()
            .zip(&parts)
            .map(|(src, r)| {
                let largest = statements[r.clone()].iter().map(|s| s.text.len()).max().unwrap_or(0);
                src.text.len() as isize - (cfg.split_target_bytes + largest) as isize
            })
            .max()
            .unwrap_or(0);
        if worst <= 0 || budget == 1 {
            let header = render_header(&statements, &parts, layout, cfg, &prefix);
            return GeneratedArtifact {
                header_name: format!("{}.h", cfg.basename),
                header,
                sources,
                statements,
                parts,
            };
        }
        reserve += worst as usize + 1024;
    }
}

/// Turns a file stem into a valid C identifier prefix.
pub fn c_identifier(stem: &str) -> String {
    let mut s: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

fn chunk_name(prefix: &str, mode: Mode, part: usize) -> String {
    format!("{prefix}_{}_chunk_{part}", mode.short())
}

fn chunk_signature(prefix: &str, mode: Mode, part: usize) -> String {
    format!("void {}(const double* vals, double* out)", chunk_name(prefix, mode, part))
}

/// Modes present in each part, in stream order.
fn part_modes(statements: &[Statement], parts: &[Range<usize>]) -> Vec<Vec<Mode>> {
    parts
        .iter()
        .map(|r| {
            let mut ms: Vec<Mode> = statements[r.clone()].iter().map(|s| s.mode).collect();
            ms.dedup();
            ms
        })
        .collect()
}

/// Output doubles per point of `mode` for `n` independent variables.
pub fn stride(mode: Mode, n: usize) -> usize {
    match mode {
        Mode::Function => 1,
        Mode::Gradient => n,
        Mode::Hessian => n * n,
    }
}

fn source_name(cfg: &EmitConfig, part: usize, parts: usize) -> String {
    if cfg.single_file && parts == 1 {
        format!("{}.c", cfg.basename)
    } else {
        format!("{}_part{part}.c", cfg.basename)
    }
}

fn render_sources(
    statements: &[Statement],
    parts: &[Range<usize>],
    layout: &Layout,
    cfg: &EmitConfig,
    prefix: &str,
) -> Vec<SourceFile> {
    let modes = part_modes(statements, parts);
    parts
        .iter()
        .enumerate()
        .map(|(k, range)| {
            let mut t = String::new();
            let _ = writeln!(
                t,
                "/* Generated by acorns_autodiff; part {k} of {}. */",
                parts.len()
            );
            t.push_str("#include <math.h>\n");
            let _ = writeln!(t, "#include \"{}.h\"", cfg.basename);
            for &mode in &modes[k] {
                let stmts: Vec<&Statement> =
                    statements[range.clone()].iter().filter(|s| s.mode == mode).collect();
                let used: BTreeSet<usize> = stmts
                    .iter()
                    .flat_map(|s| s.slots.iter().map(|&sl| layout.slot_param[sl as usize]))
                    .collect();
                t.push('\n');
                if k == 0 {
                    t.push_str("static ");
                }
                t.push_str(&chunk_signature(prefix, mode, k));
                t.push_str("\n{\n");
                let aliases: Vec<String> =
                    used.iter().filter_map(|&pi| layout.alias(&layout.params[pi])).collect();
                let direct = used.iter().any(|&pi| layout.params[pi].offset.is_none());
                for a in &aliases {
                    t.push_str(a);
                }
                if aliases.is_empty() && !direct {
                    t.push_str("    (void)vals;\n");
                }
                for s in stmts {
                    t.push_str(&s.text);
                }
                t.push_str("}\n");
            }
            if k == 0 {
                for mode in cfg.modes.iter() {
                    t.push('\n');
                    t.push_str(&driver(mode, &modes, layout, cfg, prefix));
                }
            }
            SourceFile {
                filename: source_name(cfg, k, parts.len()),
                text: t,
            }
        })
        .collect()
}

fn driver_signature(mode: Mode) -> String {
    format!(
        "void {}(const double* vals, int num_points, double* {})",
        mode.driver(),
        mode.out_param()
    )
}

/// The per-point loop of one mode.
pub fn driver(mode: Mode, part_modes: &[Vec<Mode>], layout: &Layout, cfg: &EmitConfig, prefix: &str) -> String {
    let out = mode.out_param();
    let chunks: Vec<usize> = (0..part_modes.len())
        .filter(|&k| part_modes[k].contains(&mode))
        .collect();
    let mut t = driver_signature(mode);
    t.push_str("\n{\n");
    if chunks.is_empty() {
        let _ = writeln!(t, "    (void)vals;\n    (void)num_points;\n    (void){out};");
    } else {
        t.push_str("    int p;\n");
        if cfg.parallel {
            t.push_str(&emit_parallel());
        }
        t.push_str("    for (p = 0; p < num_points; ++p) {\n");
        let _ = writeln!(
            t,
            "        const double* v = vals + (long)p * {};",
            layout.num_inputs()
        );
        let _ = writeln!(
            t,
            "        double* o = {out} + (long)p * {};",
            stride(mode, layout.num_vars())
        );
        for k in chunks {
            let _ = writeln!(t, "        {}(v, o);", chunk_name(prefix, mode, k));
        }
        t.push_str("    }\n");
    }
    t.push_str("}\n");
    t
}

/// Guarded parallel-for annotation for the point loop; serial C99 compilers
/// never see the pragma.
pub fn emit_parallel() -> String {
    "#ifdef _OPENMP\n#pragma omp parallel for\n#endif\n".to_string()
}

fn render_header(
    statements: &[Statement],
    parts: &[Range<usize>],
    layout: &Layout,
    cfg: &EmitConfig,
    prefix: &str,
) -> String {
    let n = layout.num_vars();
    let guard = format!("{}_H", prefix.to_ascii_uppercase());
    let mut t = String::from("/* Generated by acorns_autodiff ");
    t.push_str(env!("CARGO_PKG_VERSION"));
    t.push_str(".\n");
    for line in &cfg.provenance {
        let _ = writeln!(t, " * {line}");
    }
    let _ = writeln!(
        t,
        " * simplify: {}",
        if cfg.simplified {
            "on (the Hessian differentiates the simplified gradient)"
        } else {
            "off"
        }
    );
    let modes: Vec<&str> = cfg.modes.iter().map(Mode::name).collect();
    let _ = writeln!(t, " * modes: {}", modes.join(" "));
    let _ = writeln!(t, " * files: {}", parts.len());
    let _ = writeln!(t, " *");
    let _ = writeln!(
        t,
        " * Each point is a block of {} doubles in vals:",
        layout.num_inputs()
    );
    for pl in &layout.params {
        let dims: String = pl.extents.iter().map(|e| format!("[{e}]")).collect();
        match pl.offset {
            Some(off) => {
                let len: usize = pl.extents.iter().product();
                let _ = writeln!(t, " *   vals[{off}..{}) = {}{dims}", off + len, pl.name);
            }
            None => {
                let _ = writeln!(t, " *   {}{dims} scattered (independent elements first)", pl.name);
            }
        }
    }
    let _ = writeln!(
        t,
        " * compute writes out[p], compute_grad ders[p*{n} + j], compute_hess hess[p*{} + i*{n} + j].",
        n * n
    );
    t.push_str(" */\n");
    let _ = writeln!(t, "#ifndef {guard}\n#define {guard}\n");
    let _ = writeln!(t, "#define {}_NUM_INPUTS {}", prefix.to_ascii_uppercase(), layout.num_inputs());
    let _ = writeln!(t, "#define {}_NUM_VARS {n}\n", prefix.to_ascii_uppercase());
    for mode in cfg.modes.iter() {
        let _ = writeln!(t, "{};", driver_signature(mode));
    }
    let pm = part_modes(statements, parts);
    let external: Vec<String> = pm
        .iter()
        .enumerate()
        .skip(1)
        .flat_map(|(k, ms)| ms.iter().map(move |&m| chunk_signature(prefix, m, k)))
        .collect();
    if !external.is_empty() {
        t.push_str("\n/* Per-file chunks called by the drivers. */\n");
        for sig in external {
            let _ = writeln!(t, "{sig};");
        }
    }
    let _ = writeln!(t, "\n#endif");
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::DiffOptions;
    use crate::flatten::unroll;
    use crate::parser::parse_source;

    fn setup(src: &str, func: &str, energy: &str, vars: &[&str], opts: DiffOptions) -> (DerivativeBundle, Layout) {
        let p = unroll(&parse_source(src, func, energy).unwrap()).unwrap();
        let v = VarIndexMap::from_names(&p, vars).unwrap();
        let b = DerivativeBundle::build(&p, &v, opts, true).unwrap();
        (b, Layout::new(&p, &v))
    }

    const CE: &str = "double cross_entropy(const double **a, const double **b){
        double loss = 0;
        for(int i = 0; i < 2; i++) for(int j = 0; j < 2; j++)
            loss = loss - (b[i][j] * log(a[i][j] + 0.00001));
        return loss; }";

    #[test]
    fn cross_entropy_raw_gradient_keeps_zero_factors() {
        let (b, l) = setup(CE, "cross_entropy", "loss", &["a"], DiffOptions::raw());
        let mut cfg = EmitConfig::new("ce");
        cfg.modes = Modes::only(Mode::Gradient);
        cfg.simplified = false;
        let art = emit(&b, &l, &cfg);
        let src = &art.sources[0].text;
        assert!(src.contains("(1/((a[0][1] + 0.00001))*0)"));
        assert!(src.contains("log((a[0][0] + 0.00001))"));
        assert!(src.contains("const double (*a)[2] = (const double (*)[2])(vals + 0);"));
        assert!(src.contains("const double (*b)[2] = (const double (*)[2])(vals + 4);"));
        assert!(art.header.contains("void compute_grad(const double* vals, int num_points, double* ders);"));
        assert!(!art.header.contains("void compute_hess"));
    }

    #[test]
    fn hessian_upper_triangle_is_copied() {
        let src = "double f(double x, double y){ double e = 5; return 0; }";
        let (b, l) = setup(src, "f", "e", &["x", "y"], DiffOptions::default());
        let mut cfg = EmitConfig::new("k");
        cfg.modes = Modes::only(Mode::Hessian);
        let art = emit(&b, &l, &cfg);
        let text: String = art.statements.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(
            text,
            "    out[0] = 0;\n    out[2] = 0;\n    out[1] = out[2];\n    out[3] = 0;\n"
        );
        assert!(art.sources[0].text.contains("    (void)vals;\n"));
    }

    #[test]
    fn parallel_flag_only_adds_the_pragma() {
        let src = "double f(double x){ double e = sin(x) * x; return 0; }";
        let (b, l) = setup(src, "f", "e", &["x"], DiffOptions::default());
        let cfg = EmitConfig::new("k");
        let serial = emit(&b, &l, &cfg);
        let par = emit(&b, &l, &EmitConfig { parallel: true, ..cfg });
        let s = &serial.sources[0].text;
        let p = &par.sources[0].text;
        assert_eq!(p.matches("#pragma omp parallel for").count(), 3);
        assert_eq!(p.replace(&emit_parallel(), ""), *s);
        assert_eq!(serial.header, par.header);
    }

    fn stmt(len: usize) -> Statement {
        Statement {
            mode: Mode::Gradient,
            text: "x".repeat(len),
            slots: BTreeSet::new(),
        }
    }

    #[test]
    fn greedy_packing() {
        let s: Vec<Statement> = (0..10).map(|_| stmt(10)).collect();
        assert_eq!(split(&s, 30), vec![0..3, 3..6, 6..9, 9..10]);
        let s = vec![stmt(5), stmt(100), stmt(5)];
        assert_eq!(split(&s, 30), vec![0..1, 1..2, 2..3]);
        assert_eq!(split(&[], 30), vec![0..0]);
    }

    #[test]
    fn small_target_splits_and_declares_chunks() {
        let src = crate::corpus::eq3_source(6);
        let (b, l) = setup(&src, "eq3", "energy", &["x"], DiffOptions::default());
        let mut cfg = EmitConfig::new("h");
        cfg.split_target_bytes = MIN_SPLIT_TARGET;
        let art = emit(&b, &l, &cfg);
        let whole = emit(&b, &l, &EmitConfig::new("h"));
        assert_eq!(art.statements, whole.statements);
        assert_eq!(whole.sources.len(), 1);
        for (f, r) in art.sources.iter().zip(&art.parts) {
            let largest = art.statements[r.clone()].iter().map(|s| s.text.len()).max().unwrap();
            assert!(f.text.len() <= cfg.split_target_bytes + largest);
        }
        if art.sources.len() > 1 {
            assert!(art.header.contains("void h_hess_chunk_1(const double* vals, double* out);")
                || art.header.contains("void h_grad_chunk_1(const double* vals, double* out);"));
        }
    }

    #[test]
    fn identifiers_are_mangled() {
        assert_eq!(c_identifier("der-0"), "der_0");
        assert_eq!(c_identifier("0x"), "_0x");
        let src = "double f(double out, double sin_){ double e = out * sin_; return 0; }";
        let (b, l) = setup(src, "f", "e", &["out"], DiffOptions::default());
        assert_eq!(l.params[0].c_name, "out_");
        let art = emit(&b, &l, &EmitConfig::new("m"));
        assert!(art.sources[0].text.contains("const double out_ = vals[0];"));
    }

    #[test]
    fn scattered_parameters_use_direct_indexing() {
        let src = "double f(double *x){ double e = x[0] * x[1] * x[2]; return 0; }";
        let (b, l) = setup(src, "f", "e", &["x[2]"], DiffOptions::default());
        assert_eq!(l.order, vec![2, 0, 1]);
        assert_eq!(l.params[0].offset, None);
        let art = emit(&b, &l, &EmitConfig::new("s"));
        assert!(art.statements[1].text.contains("(vals[1]*vals[2])"), "{}", art.statements[1].text);
    }
}
