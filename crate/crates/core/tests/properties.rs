use acorns_core::corpus;
use acorns_core::diff::{lower_index, substitute_with_limit, DiffOptions};
use acorns_core::expr::BinOp;
use acorns_core::flatten::AssignKind;
use acorns_core::gen::{random_expr, random_expr_text, random_loop_program, LOOP_ENERGY, LOOP_FUNC};
use acorns_core::parser::parse_expr;
use acorns_core::verify::{sample_points, verify, VerifyRequest};
use acorns_core::{
    deserialize, differentiate, eval_expr, eval_program, interpret, parse_source, serialize, simplify, substitute,
    unroll, DerivativeBundle, Expr, Kind, Modes, StraightLineProgram, VarIndexMap,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn program(src: &str, func: &str, energy: &str) -> StraightLineProgram {
    unroll(&parse_source(src, func, energy).unwrap()).unwrap()
}

fn point(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

const SCALARS: &[&str] = &["e", "t", "y", "i", "j", "k"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_expressions_reparse_to_the_same_tree(seed: u64) {
        let text = random_expr_text(&mut rng(seed), 6, &["i", "j"]);
        let e = parse_expr(&text, SCALARS, &[("x", 1)]).unwrap();
        let printed = e.to_string();
        let again = parse_expr(&printed, SCALARS, &[("x", 1)]).unwrap();
        prop_assert!(e.same_shape(&again), "{text}\n{printed}\n{again}");
        prop_assert_eq!(again.to_string(), printed);
    }

    #[test]
    fn parsing_is_deterministic(seed: u64) {
        let g = random_loop_program(&mut rng(seed), 3);
        let a = parse_source(&g.source, LOOP_FUNC, LOOP_ENERGY).unwrap();
        let b = parse_source(&g.source, LOOP_FUNC, LOOP_ENERGY).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.same_shape(&b));
    }

    #[test]
    fn parse_errors_point_inside_the_input(seed: u64) {
        let mut r = rng(seed);
        let g = random_loop_program(&mut r, 2);
        let mut src = g.source.clone();
        let at = r.random_range(0..src.len());
        let junk = ['@', '{', ')', ';', '$', '=', '[', '?'][r.random_range(0..8)];
        src.insert(at, junk);
        if let Err(e) = parse_source(&src, LOOP_FUNC, LOOP_ENERGY) {
            let span = e.span();
            let lines: Vec<&str> = src.split('\n').collect();
            prop_assert!(span.line >= 1 && (span.line as usize) <= lines.len(), "{e}");
            let line = lines[span.line as usize - 1];
            prop_assert!(span.column >= 1 && (span.column as usize) <= line.len() + 1, "{e}");
        }
    }

    #[test]
    fn unrolling_preserves_every_bit(seed: u64) {
        let mut r = rng(seed);
        let g = random_loop_program(&mut r, 3);
        let ir = parse_source(&g.source, LOOP_FUNC, LOOP_ENERGY).unwrap();
        let p = unroll(&ir).unwrap();
        prop_assert_eq!(p.assigns.len(), g.assignments);
        // Evaluation walks the shared DAG, so the tree-size cap does not apply.
        let f = substitute_with_limit(&p, u64::MAX).unwrap();
        for _ in 0..5 {
            let x = point(&mut r, p.inputs.len(), -2.0, 2.0);
            let looped = interpret(&ir, &p.inputs, &x).unwrap();
            prop_assert_eq!(looped.to_bits(), eval_program(&p, &x).unwrap().to_bits());
            prop_assert_eq!(looped.to_bits(), eval_expr(&f, &x).unwrap().to_bits());
        }
    }

    #[test]
    fn unrolling_straight_line_code_is_the_identity(seed: u64) {
        let g = random_loop_program(&mut rng(seed), 3);
        let p = unroll(&parse_source(&g.source, LOOP_FUNC, LOOP_ENERGY).unwrap()).unwrap();
        let mut src = String::from("double prog(const double x[4], double y){\n");
        for (k, a) in p.assigns.iter().enumerate() {
            let decl = if a.kind == AssignKind::Init { "double " } else { "" };
            src.push_str(&format!("    {decl}{} = {};\n", a.target.c_name(), p.render_rhs(k, false)));
        }
        src.push_str("    return 0;\n}\n");
        let again = unroll(&parse_source(&src, LOOP_FUNC, LOOP_ENERGY).unwrap()).unwrap();
        prop_assert_eq!(again.render_text(), p.render_text());
    }

    #[test]
    fn differentiation_is_linear_over_sums(seed: u64) {
        let mut r = rng(seed);
        let a = random_expr(&mut r, 5, 3);
        let b = random_expr(&mut r, 5, 3);
        for op in [BinOp::Add, BinOp::Sub] {
            let d = differentiate(&Expr::binary(op, a.clone(), b.clone()), 0);
            let (da, db) = (differentiate(&a, 0), differentiate(&b, 0));
            let zero = |e: &Expr| e.as_const().is_some_and(|c| c.text() == "0");
            if zero(&da) && zero(&db) {
                prop_assert!(zero(&d));
            } else {
                prop_assert_eq!(d, Expr::binary(op, da, db));
            }
        }
    }

    #[test]
    fn mixed_partials_agree(seed: u64) {
        let mut r = rng(seed);
        let f = random_expr(&mut r, 5, 3);
        let dij = differentiate(&differentiate(&f, 0), 1);
        let dji = differentiate(&differentiate(&f, 1), 0);
        for _ in 0..5 {
            let x = point(&mut r, 3, 0.2, 1.5);
            let (a, b) = (eval_expr(&dij, &x).unwrap(), eval_expr(&dji, &x).unwrap());
            if a.is_finite() && b.is_finite() && a.abs() < 1e12 {
                prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn simplification_keeps_values_and_never_grows(seed: u64) {
        let mut r = rng(seed);
        let depth = r.random_range(1..=8);
        let e = random_expr(&mut r, depth, 3);
        let s = simplify(&e);
        prop_assert!(s.tree_size() <= e.tree_size());
        prop_assert!(s.dag_size() <= e.dag_size());
        for _ in 0..4 {
            let x = point(&mut r, 3, 0.1, 2.0);
            let raw = eval_expr(&e, &x).unwrap();
            if !raw.is_finite() {
                continue;
            }
            let v = eval_expr(&s, &x).unwrap();
            prop_assert!((v - raw).abs() <= 1e-12 * raw.abs(), "{v} vs {raw}");
        }
    }
}

#[test]
fn corpus_interpretation_matches_substitution_bitwise() {
    for name in corpus::NAMES {
        let f = corpus::get(name, Some(5)).unwrap();
        let ir = parse_source(&f.source, &f.func, &f.energy).unwrap();
        let p = unroll(&ir).unwrap();
        let e = substitute(&p).unwrap();
        for x in sample_points(&p.inputs, |q| f.box_for(q), 100, 7) {
            let looped = interpret(&ir, &p.inputs, &x).unwrap();
            assert_eq!(looped.to_bits(), eval_expr(&e, &x).unwrap().to_bits(), "{name}");
        }
    }
}

#[test]
fn hessian_mirror_is_structurally_symmetric() {
    let f = corpus::get("eq3", Some(4)).unwrap();
    let p = program(&f.source, &f.func, &f.energy);
    let vars = VarIndexMap::from_names(&p, &f.vars).unwrap();
    for opts in [DiffOptions::default(), DiffOptions::raw()] {
        let b = DerivativeBundle::build(&p, &vars, opts, true).unwrap();
        assert_eq!(b.hess_lower.len(), 4 * 5 / 2);
        for i in 0..4 {
            for j in 0..4 {
                assert!(b.hess(i, j).ptr_eq(b.hess(j, i)));
                assert!(b.hess(i, j).ptr_eq(&b.hess_lower[lower_index(i.max(j), i.min(j))]));
            }
        }
    }
}

#[test]
fn seeded_reports_repeat_exactly() {
    let req = VerifyRequest::new(corpus::get("eq3", Some(3)).unwrap());
    let a = verify(&req).unwrap();
    let b = verify(&req).unwrap();
    assert_eq!(a, b);
    let other = verify(&VerifyRequest { seed: 1, ..req }).unwrap();
    assert_ne!(a.entries[0].analytic, other.entries[0].analytic);
}

#[test]
fn const_fn_derivatives_are_exactly_zero() {
    let req = VerifyRequest {
        modes: Modes::all(),
        ..VerifyRequest::new(corpus::get("const_fn", None).unwrap())
    };
    let r = verify(&req).unwrap();
    assert!(r.all_pass());
    for e in r.entries.iter().filter(|e| e.entry != "f") {
        assert_eq!(e.analytic, 0.0);
        assert!(e.fd.abs() < 1e-9);
    }
}

#[test]
fn large_programs_round_trip_through_the_binary_format() {
    let src = "double chain(const double x[2]){
    double e = 0;
    for (int i = 0; i < 100000; i++) { e = e * 0.5 + x[0] * x[1]; }
    return 0;
}";
    let p = program(src, "chain", "e");
    assert_eq!(p.assigns.len(), 100_001);
    let bytes = serialize(&p);
    let back = deserialize(&bytes).unwrap();
    assert_eq!(serialize(&back), bytes);
    assert_eq!(back.render_text(), p.render_text());
    let x = [0.3, 0.7];
    assert_eq!(eval_program(&back, &x).unwrap().to_bits(), eval_program(&p, &x).unwrap().to_bits());
}

#[test]
fn independent_variables_only_matter_for_derivatives() {
    let f = corpus::get("cross_entropy", None).unwrap();
    let p = program(&f.source, &f.func, &f.energy);
    let vars = VarIndexMap::from_names(&p, &f.vars).unwrap();
    let b = DerivativeBundle::build(&p, &vars, DiffOptions::default(), false).unwrap();
    assert_eq!(b.grad.len(), 4);
    let b_slots = p.param_slots("b");
    for g in &b.grad {
        // d/da[i][j] = -b[i][j] / (a[i][j] + eps) reads b but never differentiates it.
        assert!(g.inputs().iter().any(|s| b_slots.contains(s)));
        assert!(!matches!(g.kind(), Kind::Const(_)));
    }
}
