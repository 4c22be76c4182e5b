//! Canonical form.
//!
//! Associative chains of `+` and `*` are flattened, literal members folded by
//! exact rational arithmetic, the remaining members sorted by a total order,
//! and the chain re-associated left-deep. `-`, `/`, and the integer powers
//! fold when every operand is a literal. Constant slots are then renumbered in
//! pre-order so canonically equal skeletons carry identical slot labels.
//!
//! The member order is lexicographic on the *constant-anonymized* canonical
//! serialization (so `c3*x0` and `c7*x0` sort identically), tie-broken by the
//! fully indexed serialization. This keeps canonicalization a pure function of
//! the input tree while making trees that differ only in slot labeling
//! canonicalize to the same skeleton.

use num_rational::Rational64;

use super::{ExprTree, Leaf, Op};

/// Serialization with constant slots anonymized to `c` (shared with the
/// structural-equivalence check).
pub(crate) fn anon_for_equiv(e: &ExprTree, out: &mut String) {
    anon_string(e, out)
}

/// Serialization with constant slots anonymized to `c`.
fn anon_string(e: &ExprTree, out: &mut String) {
    match e {
        ExprTree::Leaf(Leaf::Const(_)) => out.push('c'),
        ExprTree::Leaf(_) => out.push_str(&e.to_string()),
        ExprTree::Node { op, children } => {
            out.push('(');
            out.push_str(op.symbol());
            for ch in children {
                out.push(' ');
                anon_string(ch, out);
            }
            out.push(')');
        }
    }
}

fn sort_key(e: &ExprTree) -> (String, String) {
    let mut anon = String::new();
    anon_string(e, &mut anon);
    (anon, e.to_string())
}

fn as_literal(e: &ExprTree) -> Option<Rational64> {
    match e {
        ExprTree::Leaf(Leaf::Lit(r)) => Some(*r),
        _ => None,
    }
}

fn checked_combine(op: Op, a: Rational64, b: Rational64) -> Option<Rational64> {
    // num-rational panics on overflow; work in i128 and convert back.
    let (an, ad) = (*a.numer() as i128, *a.denom() as i128);
    let (bn, bd) = (*b.numer() as i128, *b.denom() as i128);
    let (num, den) = match op {
        Op::Add => (an * bd + bn * ad, ad * bd),
        Op::Sub => (an * bd - bn * ad, ad * bd),
        Op::Mul => (an * bn, ad * bd),
        Op::Div => {
            if bn == 0 {
                return None;
            }
            (an * bd, ad * bn)
        }
        _ => return None,
    };
    reduce_to_r64(num, den)
}

fn checked_pow(base: Rational64, n: i32) -> Option<Rational64> {
    let mut num = 1i128;
    let mut den = 1i128;
    for _ in 0..n {
        num = num.checked_mul(*base.numer() as i128)?;
        den = den.checked_mul(*base.denom() as i128)?;
        if num.unsigned_abs() > u64::MAX as u128 || den.unsigned_abs() > u64::MAX as u128 {
            return None;
        }
    }
    reduce_to_r64(num, den)
}

fn reduce_to_r64(mut num: i128, mut den: i128) -> Option<Rational64> {
    if den == 0 {
        return None;
    }
    if den < 0 {
        num = -num;
        den = -den;
    }
    let g = gcd_i128(num.unsigned_abs(), den.unsigned_abs()).max(1);
    num /= g as i128;
    den /= g as i128;
    if num > i64::MAX as i128 || num < i64::MIN as i128 || den > i64::MAX as i128 {
        return None;
    }
    Some(Rational64::new_raw(num as i64, den as i64))
}

fn gcd_i128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Flatten same-op members of an associative chain.
fn flatten(op: Op, e: ExprTree, out: &mut Vec<ExprTree>) {
    match e {
        ExprTree::Node { op: o, children } if o == op => {
            for ch in children {
                flatten(op, ch, out);
            }
        }
        other => out.push(other),
    }
}

fn rebuild_left_deep(op: Op, mut members: Vec<ExprTree>) -> ExprTree {
    debug_assert!(!members.is_empty());
    let mut acc = members.remove(0);
    for m in members {
        acc = ExprTree::Node {
            op,
            children: vec![acc, m],
        };
    }
    acc
}

fn canon_rec(e: &ExprTree) -> ExprTree {
    match e {
        ExprTree::Leaf(_) => e.clone(),
        ExprTree::Node { op, children } => {
            let kids: Vec<ExprTree> = children.iter().map(canon_rec).collect();
            match op {
                Op::Add | Op::Mul => {
                    let mut members = Vec::new();
                    for k in kids {
                        flatten(*op, k, &mut members);
                    }
                    // fold literal members pairwise, exactly
                    let mut lit: Option<Rational64> = None;
                    let mut rest = Vec::new();
                    for m in members {
                        match (as_literal(&m), lit) {
                            (Some(v), None) => lit = Some(v),
                            (Some(v), Some(acc)) => match checked_combine(*op, acc, v) {
                                Some(folded) => lit = Some(folded),
                                None => rest.push(m),
                            },
                            (None, _) => rest.push(m),
                        }
                    }
                    if let Some(v) = lit {
                        rest.push(ExprTree::Leaf(Leaf::Lit(v)));
                    }
                    rest.sort_by_cached_key(sort_key);
                    rebuild_left_deep(*op, rest)
                }
                Op::Sub | Op::Div => {
                    if let (Some(a), Some(b)) = (as_literal(&kids[0]), as_literal(&kids[1])) {
                        if let Some(v) = checked_combine(*op, a, b) {
                            return ExprTree::Leaf(Leaf::Lit(v));
                        }
                    }
                    ExprTree::Node {
                        op: *op,
                        children: kids,
                    }
                }
                Op::Pow2 | Op::Pow3 | Op::Pow4 => {
                    if let Some(a) = as_literal(&kids[0]) {
                        if let Some(v) = checked_pow(a, op.power().unwrap()) {
                            return ExprTree::Leaf(Leaf::Lit(v));
                        }
                    }
                    ExprTree::Node {
                        op: *op,
                        children: kids,
                    }
                }
                // transcendentals of literals stay symbolic: their values are
                // not representable as exact rationals
                Op::Sin | Op::Cos | Op::Exp | Op::Log => ExprTree::Node {
                    op: *op,
                    children: kids,
                },
            }
        }
    }
}

fn renumber(e: &ExprTree, perm: &mut Vec<usize>) -> ExprTree {
    match e {
        ExprTree::Leaf(Leaf::Const(old)) => {
            let new = match perm.iter().position(|&o| o == *old) {
                Some(idx) => idx,
                None => {
                    perm.push(*old);
                    perm.len() - 1
                }
            };
            ExprTree::Leaf(Leaf::Const(new))
        }
        ExprTree::Leaf(_) => e.clone(),
        ExprTree::Node { op, children } => ExprTree::Node {
            op: *op,
            children: children.iter().map(|c| renumber(c, perm)).collect(),
        },
    }
}

/// Canonicalize, returning the slot permutation: `perm[new_slot] = old_slot`.
/// Constants are renumbered contiguously in pre-order of the canonical tree.
pub fn canonicalize_with_perm(e: &ExprTree) -> (ExprTree, Vec<usize>) {
    let canon = canon_rec(e);
    let mut perm = Vec::new();
    let renumbered = renumber(&canon, &mut perm);
    (renumbered, perm)
}

/// Canonical form of a tree. Idempotent.
pub fn canonicalize(e: &ExprTree) -> ExprTree {
    canonicalize_with_perm(e).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_sexpr;

    fn canon_str(s: &str) -> String {
        canonicalize(&parse_sexpr(s).unwrap()).print()
    }

    #[test]
    fn commutative_children_sort() {
        assert_eq!(canon_str("(+ x1 x0)"), "(+ x0 x1)");
    }

    #[test]
    fn associative_chains_left_deep_sorted() {
        assert_eq!(canon_str("(* x0 (* x1 x2))"), "(* (* x0 x1) x2)");
        assert_eq!(canon_str("(* (* x2 x1) x0)"), "(* (* x0 x1) x2)");
    }

    #[test]
    fn literal_folding_is_exact() {
        assert_eq!(canon_str("(+ 1 2)"), "3");
        assert_eq!(canon_str("(/ 1 3)"), "1/3");
        assert_eq!(canon_str("(* 0.5 (+ 1 1))"), "1");
        assert_eq!(canon_str("(pow3 -2)"), "-8");
        // division by a zero literal stays symbolic
        assert_eq!(canon_str("(/ 1 0)"), "(/ 1 0)");
        // transcendentals of literals stay symbolic
        assert_eq!(canon_str("(sin 1)"), "(sin 1)");
    }

    #[test]
    fn literals_fold_through_flattened_chains() {
        assert_eq!(canon_str("(+ 1 (+ x0 2))"), "(+ 3 x0)");
    }

    #[test]
    fn constants_renumber_in_preorder() {
        // sorting puts (* c? x0) before (* c? x1) regardless of slot labels
        let (canon, perm) = canonicalize_with_perm(
            &parse_sexpr("(+ (* c1 x1) (* c0 x0))").unwrap(),
        );
        assert_eq!(canon.print(), "(+ (* c0 x0) (* c1 x1))");
        assert_eq!(perm, vec![0, 1]);

        let (canon2, perm2) = canonicalize_with_perm(
            &parse_sexpr("(+ (* c0 x1) (* c1 x0))").unwrap(),
        );
        assert_eq!(canon2.print(), "(+ (* c0 x0) (* c1 x1))");
        assert_eq!(perm2, vec![1, 0]);
    }

    #[test]
    fn idempotent_on_samples() {
        for s in [
            "(+ (* 2 x1) (+ x0 (* x1 2)))",
            "(- (/ x0 x1) (sin (+ t 1)))",
            "(* (* c2 c0) (+ x0 c1))",
        ] {
            let once = canonicalize(&parse_sexpr(s).unwrap());
            let twice = canonicalize(&once);
            assert_eq!(once, twice, "not idempotent on {s}");
        }
    }
}
