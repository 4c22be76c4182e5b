//! Equivalence between fitted candidates and reference expressions.
//!
//! Two tiers. *Structural*: canonical skeletons (constants anonymized) match
//! and paired constants agree within a relative tolerance. *Numeric*: values
//! agree to 1e-6 relative at 256 Halton probe points in a declared variable
//! box. Anything else is *Distinct*. Probe points where either side faults are
//! skipped; if fewer than half the probes are valid the pair is Distinct.

use serde::{Deserialize, Serialize};

use super::{canonicalize_with_perm, evaluate, EvalContext, ExprTree};
use crate::scalar::Scalar;
use crate::util::seq::halton_box;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equivalence {
    Structural,
    Numeric,
    Distinct,
}

/// Probe region: per-state ranges, per-input ranges, and a time range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeBox {
    pub state: Vec<(f64, f64)>,
    pub input: Vec<(f64, f64)>,
    pub time: (f64, f64),
}

impl ProbeBox {
    /// Same range for every state channel, no inputs, unit time box.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Self {
        ProbeBox {
            state: vec![(lo, hi); d],
            input: Vec::new(),
            time: (0.0, 1.0),
        }
    }
}

const NUM_PROBES: usize = 256;
const NUMERIC_RTOL: f64 = 1e-6;

fn rel_close<S: Scalar>(a: S, b: S, tol: S) -> bool {
    let diff = (a - b).abs();
    diff <= tol * a.abs().max(b.abs()) + S::of(1e-12)
}

fn anon_skeleton(e: &ExprTree) -> String {
    let mut s = String::new();
    super::canon::anon_for_equiv(e, &mut s);
    s
}

/// Classify the relationship between two fitted expressions over the same
/// variable vocabulary.
pub fn equivalent<S: Scalar>(
    e1: &ExprTree,
    theta1: &[S],
    e2: &ExprTree,
    theta2: &[S],
    const_tol: f64,
    probe: &ProbeBox,
) -> Equivalence {
    let (c1, perm1) = canonicalize_with_perm(e1);
    let (c2, perm2) = canonicalize_with_perm(e2);
    if anon_skeleton(&c1) == anon_skeleton(&c2) {
        let tol = S::of(const_tol);
        let structural = perm1.len() == perm2.len()
            && perm1.iter().zip(&perm2).all(|(&o1, &o2)| {
                match (theta1.get(o1), theta2.get(o2)) {
                    (Some(&a), Some(&b)) => rel_close(a, b, tol),
                    _ => false,
                }
            });
        if structural {
            return Equivalence::Structural;
        }
    }
    if numeric_match(e1, theta1, e2, theta2, probe) {
        Equivalence::Numeric
    } else {
        Equivalence::Distinct
    }
}

fn numeric_match<S: Scalar>(
    e1: &ExprTree,
    theta1: &[S],
    e2: &ExprTree,
    theta2: &[S],
    probe: &ProbeBox,
) -> bool {
    let mut dims: Vec<(f64, f64)> = probe.state.clone();
    dims.extend(probe.input.iter().copied());
    dims.push(probe.time);
    let pts = halton_box(NUM_PROBES, &dims);
    let d = probe.state.len();
    let q = probe.input.len();
    let rtol = S::of(NUMERIC_RTOL);
    let mut valid = 0usize;
    for p in &pts {
        let state: Vec<S> = p[..d].iter().map(|&v| S::of(v)).collect();
        let input: Vec<S> = p[d..d + q].iter().map(|&v| S::of(v)).collect();
        let t = S::of(p[d + q]);
        let ctx1 = EvalContext::new(&state, &input, t, theta1);
        let ctx2 = EvalContext::new(&state, &input, t, theta2);
        match (evaluate(e1, &ctx1), evaluate(e2, &ctx2)) {
            (Ok(a), Ok(b)) => {
                if !a.is_finite() || !b.is_finite() {
                    continue;
                }
                valid += 1;
                if !rel_close(a, b, rtol) {
                    return false;
                }
            }
            _ => continue,
        }
    }
    valid >= NUM_PROBES / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_sexpr;

    fn check(s1: &str, t1: &[f64], s2: &str, t2: &[f64], box_: &ProbeBox) -> Equivalence {
        equivalent(
            &parse_sexpr(s1).unwrap(),
            t1,
            &parse_sexpr(s2).unwrap(),
            t2,
            1e-2,
            box_,
        )
    }

    #[test]
    fn commuted_sum_is_structural() {
        let b = ProbeBox::uniform(2, 0.5, 2.0);
        assert_eq!(check("(+ x0 x1)", &[], "(+ x1 x0)", &[], &b), Equivalence::Structural);
    }

    #[test]
    fn doubled_variable_is_numeric() {
        let b = ProbeBox::uniform(1, 0.5, 2.0);
        assert_eq!(
            check("(* 2 x0)", &[], "(+ x0 x0)", &[], &b),
            Equivalence::Numeric
        );
    }

    #[test]
    fn different_functions_are_distinct() {
        let b = ProbeBox::uniform(1, 0.5, 2.0);
        assert_eq!(
            check("x0", &[], "(* x0 x0)", &[], &b),
            Equivalence::Distinct
        );
    }

    #[test]
    fn constants_compared_relative() {
        let b = ProbeBox::uniform(1, 0.5, 2.0);
        assert_eq!(
            check("(* c0 x0)", &[1.0], "(* c0 x0)", &[1.005], &b),
            Equivalence::Structural
        );
        // 1.0 vs 1.5 fails the 1e-2 constant tolerance and the 1e-6 probes
        assert_eq!(
            check("(* c0 x0)", &[1.0], "(* c0 x0)", &[1.5], &b),
            Equivalence::Distinct
        );
    }

    #[test]
    fn slot_relabeling_is_structural() {
        // same function 2*x0 + 3*x1, written with swapped slot labels:
        // here c0 multiplies x1 (value 3) and c1 multiplies x0 (value 2)
        let b = ProbeBox::uniform(2, 0.5, 2.0);
        assert_eq!(
            check(
                "(+ (* c0 x0) (* c1 x1))",
                &[2.0, 3.0],
                "(+ (* c0 x1) (* c1 x0))",
                &[3.0, 2.0],
                &b
            ),
            Equivalence::Structural
        );
    }

    #[test]
    fn reflexive_and_symmetric() {
        let b = ProbeBox::uniform(1, 0.5, 2.0);
        for (s, th) in [("(* c0 (sin x0))", vec![0.4]), ("(/ 1 x0)", vec![])] {
            assert_eq!(check(s, &th, s, &th, &b), Equivalence::Structural);
        }
        let ab = check("(* 2 x0)", &[], "(+ x0 x0)", &[], &b);
        let ba = check("(+ x0 x0)", &[], "(* 2 x0)", &[], &b);
        assert_eq!(ab, ba);
    }
}
