//! Inputs shared by the pipeline benchmarks.

use acorns_core::corpus;
use acorns_core::diff::{DiffOptions, VarIndexMap};
use acorns_core::{parse_source, unroll, FunctionIR, StraightLineProgram};

/// A corpus function parsed and unrolled once, ready for the later stages.
pub struct Fixture {
    pub name: String,
    pub ir: FunctionIR,
    pub program: StraightLineProgram,
    pub vars: VarIndexMap,
}

impl Fixture {
    pub fn corpus(name: &str, s: Option<usize>) -> Fixture {
        let f = corpus::get(name, s).unwrap_or_else(|| panic!("unknown corpus function {name}"));
        let ir = parse_source(&f.source, &f.func, &f.energy).expect("corpus source parses");
        let program = unroll(&ir).expect("corpus source unrolls");
        let vars = VarIndexMap::from_names(&program, &f.vars).expect("corpus vars resolve");
        let name = match s {
            Some(s) => format!("{name}_s{s}"),
            None => name.to_string(),
        };
        Fixture {
            name,
            ir,
            program,
            vars,
        }
    }

    pub fn eq3(s: usize) -> Fixture {
        Fixture::corpus("eq3", Some(s))
    }
}

/// Simplification on and off, labelled for benchmark ids.
pub const OPTIONS: [(&str, DiffOptions); 2] = [
    ("simplified", DiffOptions { simplify: true, max_nodes: acorns_core::diff::DEFAULT_MAX_NODES }),
    ("raw", DiffOptions { simplify: false, max_nodes: acorns_core::diff::DEFAULT_MAX_NODES }),
];

/// Sizes of `eq3` used across the benchmarks.
pub const EQ3_SIZES: [usize; 3] = [5, 10, 25];
