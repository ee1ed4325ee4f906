//! Local algebraic clean-up of derivative expressions.
//!
//! Only identities with a unit or zero operand and folding of operators whose
//! operands are both constants are applied. There is no reassociation,
//! distribution or cancellation, so subtrees that are kept evaluate bit for
//! bit as before.

use std::collections::HashMap;

use crate::expr::{BinOp, Constant, Expr, Kind};

/// Simplifies bottom-up; shared subtrees are simplified once.
pub fn simplify(e: &Expr) -> Expr {
    let mut memo = HashMap::new();
    simplify_with(e, &mut memo)
}

/// Like [`simplify`] with a caller-held memo, for simplifying several
/// expressions that share subtrees. The memo must not outlive the inputs.
pub fn simplify_with(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
    e.fold(memo, &mut |node, kids| {
        if kids.is_empty() {
            node.clone()
        } else {
            rewrite(node.with_children(kids))
        }
    })
}

fn rewrite(e: Expr) -> Expr {
    match e.kind() {
        Kind::Neg(a) => match a.kind() {
            Kind::Neg(inner) => inner.clone(),
            _ => e,
        },
        Kind::Pow(u, w) => {
            if w.is_const_value(1.0) {
                u.clone()
            } else if w.is_const_value(0.0) {
                Expr::one()
            } else {
                e
            }
        }
        Kind::Binary(op, a, b) => {
            if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
                let v = op.apply(x.value(), y.value());
                if v.is_finite() {
                    return Expr::constant(Constant::from_f64(v));
                }
            }
            let zero = |x: &Expr| x.is_const_value(0.0);
            let one = |x: &Expr| x.is_const_value(1.0);
            match op {
                BinOp::Mul if zero(a) || zero(b) => Expr::zero(),
                BinOp::Mul if one(b) => a.clone(),
                BinOp::Mul if one(a) => b.clone(),
                BinOp::Add if zero(b) => a.clone(),
                BinOp::Add if zero(a) => b.clone(),
                BinOp::Sub if zero(b) => a.clone(),
                BinOp::Div if one(b) => a.clone(),
                _ => e.clone(),
            }
        }
        _ => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{render, DefaultNames, Func};

    fn x(i: u32) -> Expr {
        Expr::input(i)
    }

    fn s(e: &Expr) -> String {
        render(&simplify(e), &DefaultNames)
    }

    #[test]
    fn zero_factor_disappears() {
        let eps = Expr::constant(Constant::from_literal("0.00001", 0.00001));
        let e = Expr::mul(Expr::div(Expr::one(), Expr::add(x(0), eps)), Expr::zero());
        assert_eq!(render(&e, &DefaultNames), "(1/((x0 + 0.00001))*0)");
        assert_eq!(s(&e), "0");
    }

    #[test]
    fn identities() {
        assert_eq!(s(&Expr::add(x(0), Expr::zero())), "x0");
        assert_eq!(s(&Expr::add(Expr::zero(), x(0))), "x0");
        assert_eq!(s(&Expr::sub(x(0), Expr::zero())), "x0");
        assert_eq!(s(&Expr::mul(Expr::one(), x(0))), "x0");
        assert_eq!(s(&Expr::div(x(0), Expr::one())), "x0");
        assert_eq!(s(&Expr::pow(x(0), Expr::one())), "x0");
        assert_eq!(s(&Expr::pow(x(0), Expr::zero())), "1");
        assert_eq!(s(&Expr::neg(Expr::neg(x(0)))), "x0");
    }

    #[test]
    fn no_cancellation_or_reassociation() {
        assert_eq!(s(&Expr::sub(x(0), x(0))), "(x0 - x0)");
        assert_eq!(s(&Expr::sub(Expr::zero(), x(0))), "(0 - x0)");
        let e = Expr::add(Expr::add(x(0), Expr::int(1)), Expr::int(2));
        assert_eq!(s(&e), "((x0 + 1) + 2)");
    }

    #[test]
    fn constant_folding_cascades() {
        let e = Expr::mul(
            Expr::add(Expr::int(2), Expr::int(3)),
            Expr::call(Func::Sin, Expr::mul(x(0), Expr::sub(Expr::int(1), Expr::int(0)))),
        );
        assert_eq!(s(&e), "(5*sin(x0))");
        let seventh = Expr::div(Expr::from_f64(22.0), Expr::from_f64(7.0));
        assert_eq!(simplify(&seventh).as_const().unwrap().value(), 22.0 / 7.0);
    }

    #[test]
    fn non_finite_results_are_not_folded() {
        let e = Expr::div(Expr::one(), Expr::zero());
        assert_eq!(s(&e), "(double)1/(0)");
    }

    #[test]
    fn sharing_survives() {
        let t = Expr::mul(x(0), Expr::add(x(1), Expr::zero()));
        let e = Expr::add(t.clone(), t);
        let r = simplify(&e);
        let Kind::Binary(_, a, b) = r.kind() else { panic!() };
        assert!(a.ptr_eq(b));
    }
}
