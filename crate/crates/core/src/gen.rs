//! Random expressions and loop programs for property tests and benchmarks.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::expr::{Constant, Expr, Func};

const CONSTANTS: &[&str] = &["0", "1", "2", "3", "0.5", "1.5", "0.25"];

/// A random expression over inputs `0..inputs` with depth at most `depth`.
/// Zero and one constants appear often so the simplifier has work to do.
pub fn random_expr(rng: &mut impl Rng, depth: u32, inputs: u32) -> Expr {
    if depth <= 1 || rng.random_bool(0.2) {
        return if rng.random_bool(0.6) {
            Expr::input(rng.random_range(0..inputs.max(1)))
        } else {
            let text = *CONSTANTS.choose(rng).unwrap();
            Expr::constant(Constant::from_literal(text, text.parse().unwrap()))
        };
    }
    let sub = |rng: &mut _| random_expr(rng, depth - 1, inputs);
    match rng.random_range(0..12) {
        0 => Expr::add(sub(rng), sub(rng)),
        1 => Expr::sub(sub(rng), sub(rng)),
        2 | 3 => Expr::mul(sub(rng), sub(rng)),
        4 => Expr::div(sub(rng), sub(rng)),
        5 => Expr::neg(sub(rng)),
        6 => {
            let w = ["0", "1", "2", "3", "0.5"].choose(rng).unwrap();
            Expr::pow(sub(rng), Expr::constant(Constant::from_literal(w, w.parse().unwrap())))
        }
        k => {
            let f = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Tan][k - 7 + rng.random_range(0..2)];
            Expr::call(f, sub(rng))
        }
    }
}

/// Source text of a random expression in the C subset. Leaves are `e`, `t`,
/// `y`, elements of `x` indexed by the counters in `counters`, the counters
/// themselves and literals.
pub fn random_expr_text(rng: &mut impl Rng, depth: u32, counters: &[&str]) -> String {
    if depth <= 1 || rng.random_bool(0.25) {
        return match rng.random_range(0..6) {
            0 => "e".into(),
            1 => "t".into(),
            2 => "y".into(),
            3 => format!("x[{}]", index_text(rng, counters)),
            4 if !counters.is_empty() => counters.choose(rng).unwrap().to_string(),
            _ => CONSTANTS.choose(rng).unwrap().to_string(),
        };
    }
    let sub = |rng: &mut _| random_expr_text(rng, depth - 1, counters);
    match rng.random_range(0..8) {
        0 => format!("{} + {}", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 => format!("{} * ({})", sub(rng), sub(rng)),
        3 => format!("-({})", sub(rng)),
        4 => format!("sin({})", sub(rng)),
        5 => format!("cos({})", sub(rng)),
        6 => format!("pow({}, 2)", sub(rng)),
        _ => format!("({}) / (2 + {})", sub(rng), format_args!("x[{}]", index_text(rng, counters))),
    }
}

/// An index into `x[4]` that stays in bounds for counters in `0..4`.
fn index_text(rng: &mut impl Rng, counters: &[&str]) -> String {
    if counters.is_empty() {
        return rng.random_range(0..4).to_string();
    }
    let c = counters.choose(rng).unwrap();
    match rng.random_range(0..4) {
        0 => format!("3 - {c}"),
        1 if counters.len() > 1 => format!("({} + {}) / 2", counters[0], counters[1]),
        2 => rng.random_range(0..4).to_string(),
        _ => c.to_string(),
    }
}

/// A generated loop program together with the number of straight-line
/// assignments its unrolling must contain.
#[derive(Debug, Clone)]
pub struct LoopProgram {
    pub source: String,
    pub assignments: usize,
}

/// Function name, energy variable and independent variable of every
/// [`random_loop_program`].
pub const LOOP_FUNC: &str = "prog";
pub const LOOP_ENERGY: &str = "e";
pub const LOOP_VARS: &[&str] = &["x", "y"];

enum Stmt {
    Assign(&'static str, String),
    For {
        counter: &'static str,
        lo: i64,
        hi: i64,
        inclusive: bool,
        step: i64,
        body: Vec<Stmt>,
    },
    If {
        counter: &'static str,
        bound: i64,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
}

/// `double prog(const double x[4], double y)` with loops nested at most
/// `max_depth` deep, constant bounds at most 4, and conditionals on the
/// counters. `x` has four elements.
pub fn random_loop_program(rng: &mut impl Rng, max_depth: usize) -> LoopProgram {
    const COUNTERS: [&str; 3] = ["i", "j", "k"];
    fn block(rng: &mut impl Rng, depth: usize, max_depth: usize, live: &mut Vec<&'static str>) -> Vec<Stmt> {
        let n = rng.random_range(1..=3);
        let mut out = Vec::new();
        for _ in 0..n {
            let roll = rng.random_range(0..10);
            if roll < 4 && depth < max_depth {
                let counter = COUNTERS[depth];
                let lo = rng.random_range(0..=1);
                let inclusive = rng.random_bool(0.3);
                let hi = if inclusive { rng.random_range(lo..=3) } else { rng.random_range(lo + 1..=4) };
                let step = if rng.random_bool(0.2) { 2 } else { 1 };
                live.push(counter);
                let body = block(rng, depth + 1, max_depth, live);
                live.pop();
                out.push(Stmt::For { counter, lo, hi, inclusive, step, body });
            } else if roll < 5 && !live.is_empty() {
                let counter = *live.choose(rng).unwrap();
                let bound = rng.random_range(0..=3);
                let then_body = vec![assign(rng, live)];
                let else_body = if rng.random_bool(0.5) { vec![assign(rng, live)] } else { Vec::new() };
                out.push(Stmt::If { counter, bound, then_body, else_body });
            } else {
                out.push(assign(rng, live));
            }
        }
        out
    }
    fn assign(rng: &mut impl Rng, live: &[&'static str]) -> Stmt {
        let target = if rng.random_bool(0.7) { "e" } else { "t" };
        let rhs = random_expr_text(rng, 3, live);
        // Damped update keeps values bounded over many iterations.
        Stmt::Assign(target, format!("0.5 * {target} + sin({rhs})"))
    }
    fn count(stmts: &[Stmt], env: &mut HashMap<&'static str, i64>) -> usize {
        let mut total = 0;
        for s in stmts {
            match s {
                Stmt::Assign(..) => total += 1,
                Stmt::For { counter, lo, hi, inclusive, step, body } => {
                    let mut c = *lo;
                    while if *inclusive { c <= *hi } else { c < *hi } {
                        env.insert(counter, c);
                        total += count(body, env);
                        c += step;
                    }
                    env.remove(counter);
                }
                Stmt::If { counter, bound, then_body, else_body } => {
                    total += count(if env[counter] < *bound { then_body } else { else_body }, env);
                }
            }
        }
        total
    }
    fn write(stmts: &[Stmt], indent: usize, out: &mut String) {
        let pad = "    ".repeat(indent);
        for s in stmts {
            match s {
                Stmt::Assign(t, rhs) => {
                    let _ = writeln!(out, "{pad}{t} = {rhs};");
                }
                Stmt::For { counter, lo, hi, inclusive, step, body } => {
                    let cmp = if *inclusive { "<=" } else { "<" };
                    let inc = if *step == 1 { format!("{counter}++") } else { format!("{counter} += {step}") };
                    let _ = writeln!(out, "{pad}for (int {counter} = {lo}; {counter} {cmp} {hi}; {inc}) {{");
                    write(body, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
                Stmt::If { counter, bound, then_body, else_body } => {
                    let _ = writeln!(out, "{pad}if ({counter} < {bound}) {{");
                    write(then_body, indent + 1, out);
                    if else_body.is_empty() {
                        let _ = writeln!(out, "{pad}}}");
                    } else {
                        let _ = writeln!(out, "{pad}}} else {{");
                        write(else_body, indent + 1, out);
                        let _ = writeln!(out, "{pad}}}");
                    }
                }
            }
        }
    }

    let body = block(rng, 0, max_depth.min(COUNTERS.len()), &mut Vec::new());
    let mut source = String::from("double prog(const double x[4], double y){\n    double e = y;\n    double t = x[0];\n");
    write(&body, 1, &mut source);
    source.push_str("    return e;\n}\n");
    LoopProgram {
        source,
        assignments: 2 + count(&body, &mut HashMap::new()),
    }
}
