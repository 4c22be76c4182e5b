//! Evaluation and forward-mode constant gradients.
//!
//! Evaluation is IEEE-style: overflow runs to infinity and is the caller's
//! problem. Two conditions instead yield a [`DomainFault`] marker so search
//! stays total without biasing toward guarded operators: `log` of a
//! non-positive argument, and division where `|denominator| < 1e-12`. Fitting
//! treats faulted points as a large finite penalty.
//!
//! [`CompiledExpr`] flattens a tree into a postfix program evaluated against a
//! reusable workspace; the fitting loop calls it millions of times. Gradients
//! are exact forward accumulation over the free-constant slots, optionally
//! extended with partials with respect to designated state channels (used by
//! latent-variable fitting).

use serde::{Deserialize, Serialize};

use super::{ExprTree, Leaf, Op};
use crate::scalar::Scalar;

/// Marker for an evaluation that left the operator domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainFault {
    DivNearZero,
    LogNonPositive,
}

/// Threshold under which a divisor counts as singular.
pub const DIV_EPS: f64 = 1e-12;

/// Evaluation point for one sample.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a, S> {
    pub state: &'a [S],
    pub input: &'a [S],
    pub t: S,
    pub theta: &'a [S],
}

impl<'a, S: Scalar> EvalContext<'a, S> {
    pub fn new(state: &'a [S], input: &'a [S], t: S, theta: &'a [S]) -> Self {
        EvalContext {
            state,
            input,
            t,
            theta,
        }
    }
}

/// Plain recursive evaluation.
pub fn evaluate<S: Scalar>(e: &ExprTree, ctx: &EvalContext<'_, S>) -> Result<S, DomainFault> {
    match e {
        ExprTree::Leaf(Leaf::State(i)) => Ok(ctx.state[*i]),
        ExprTree::Leaf(Leaf::Input(i)) => Ok(ctx.input[*i]),
        ExprTree::Leaf(Leaf::Time) => Ok(ctx.t),
        ExprTree::Leaf(Leaf::Const(i)) => Ok(ctx.theta[*i]),
        ExprTree::Leaf(Leaf::Lit(r)) => Ok(S::of(*r.numer() as f64) / S::of(*r.denom() as f64)),
        ExprTree::Node { op, children } => {
            let a = evaluate(&children[0], ctx)?;
            match op {
                Op::Add => Ok(a + evaluate(&children[1], ctx)?),
                Op::Sub => Ok(a - evaluate(&children[1], ctx)?),
                Op::Mul => Ok(a * evaluate(&children[1], ctx)?),
                Op::Div => {
                    let b = evaluate(&children[1], ctx)?;
                    if b.abs() < S::of(DIV_EPS) {
                        Err(DomainFault::DivNearZero)
                    } else {
                        Ok(a / b)
                    }
                }
                Op::Sin => Ok(a.sin()),
                Op::Cos => Ok(a.cos()),
                Op::Exp => Ok(a.exp()),
                Op::Log => {
                    if a <= S::zero() {
                        Err(DomainFault::LogNonPositive)
                    } else {
                        Ok(a.ln())
                    }
                }
                Op::Pow2 => Ok(a * a),
                Op::Pow3 => Ok(a * a * a),
                Op::Pow4 => {
                    let s = a * a;
                    Ok(s * s)
                }
            }
        }
    }
}

/// Exact analytic partial derivatives with respect to the constant slots, via
/// forward accumulation. Faults propagate.
pub fn grad_constants<S: Scalar>(
    e: &ExprTree,
    ctx: &EvalContext<'_, S>,
) -> Result<Vec<S>, DomainFault> {
    let compiled = CompiledExpr::new(e);
    let mut ws = GradWorkspace::new();
    compiled.eval_grad(ctx, &mut ws)?;
    Ok(ws.grad().to_vec())
}

#[derive(Clone, Debug)]
enum Instr<S> {
    State(usize),
    Input(usize),
    Time,
    Const(usize),
    Lit(S),
    Op(Op),
}

/// Postfix-compiled expression.
#[derive(Clone, Debug)]
pub struct CompiledExpr<S> {
    prog: Vec<Instr<S>>,
    n_consts: usize,
    /// State channels whose partials are tracked after the constant partials.
    tracked: Vec<usize>,
}

fn emit<S: Scalar>(e: &ExprTree, prog: &mut Vec<Instr<S>>) {
    match e {
        ExprTree::Leaf(Leaf::State(i)) => prog.push(Instr::State(*i)),
        ExprTree::Leaf(Leaf::Input(i)) => prog.push(Instr::Input(*i)),
        ExprTree::Leaf(Leaf::Time) => prog.push(Instr::Time),
        ExprTree::Leaf(Leaf::Const(i)) => prog.push(Instr::Const(*i)),
        ExprTree::Leaf(Leaf::Lit(r)) => {
            prog.push(Instr::Lit(S::of(*r.numer() as f64) / S::of(*r.denom() as f64)))
        }
        ExprTree::Node { op, children } => {
            for ch in children {
                emit(ch, prog);
            }
            prog.push(Instr::Op(*op));
        }
    }
}

/// Reusable evaluation stacks.
#[derive(Default)]
pub struct GradWorkspace<S> {
    vals: Vec<S>,
    grads: Vec<S>,
    np: usize,
}

impl<S: Scalar> GradWorkspace<S> {
    pub fn new() -> Self {
        GradWorkspace {
            vals: Vec::new(),
            grads: Vec::new(),
            np: 0,
        }
    }

    /// Gradient of the last `eval_grad` call: constant partials first, then
    /// tracked-state partials.
    pub fn grad(&self) -> &[S] {
        &self.grads[..self.np]
    }
}

impl<S: Scalar> CompiledExpr<S> {
    pub fn new(e: &ExprTree) -> Self {
        let mut prog = Vec::with_capacity(e.complexity());
        emit(e, &mut prog);
        CompiledExpr {
            prog,
            n_consts: e.num_constants(),
            tracked: Vec::new(),
        }
    }

    /// Also accumulate partials with respect to these state channels.
    pub fn with_tracked_states(mut self, tracked: &[usize]) -> Self {
        self.tracked = tracked.to_vec();
        self
    }

    pub fn n_consts(&self) -> usize {
        self.n_consts
    }

    pub fn n_partials(&self) -> usize {
        self.n_consts + self.tracked.len()
    }

    /// Value only.
    pub fn eval(&self, ctx: &EvalContext<'_, S>) -> Result<S, DomainFault> {
        let mut stack: Vec<S> = Vec::with_capacity(16);
        for instr in &self.prog {
            match instr {
                Instr::State(i) => stack.push(ctx.state[*i]),
                Instr::Input(i) => stack.push(ctx.input[*i]),
                Instr::Time => stack.push(ctx.t),
                Instr::Const(i) => stack.push(ctx.theta[*i]),
                Instr::Lit(v) => stack.push(*v),
                Instr::Op(op) => {
                    let v = if op.arity() == 2 {
                        let b = stack.pop().unwrap();
                        let a = stack.pop().unwrap();
                        apply_binary(*op, a, b)?
                    } else {
                        let a = stack.pop().unwrap();
                        apply_unary(*op, a)?
                    };
                    stack.push(v);
                }
            }
        }
        Ok(stack.pop().unwrap())
    }

    /// Value plus forward-mode gradient (constants, then tracked states),
    /// written into the workspace.
    pub fn eval_grad(&self, ctx: &EvalContext<'_, S>, ws: &mut GradWorkspace<S>) -> Result<S, DomainFault> {
        let np = self.n_partials();
        ws.np = np;
        ws.vals.clear();
        ws.grads.clear();
        let push_zero_grad = |grads: &mut Vec<S>| grads.extend(std::iter::repeat(S::zero()).take(np));
        for instr in &self.prog {
            match instr {
                Instr::State(i) => {
                    ws.vals.push(ctx.state[*i]);
                    push_zero_grad(&mut ws.grads);
                    if let Some(pos) = self.tracked.iter().position(|&s| s == *i) {
                        let base = ws.grads.len() - np;
                        ws.grads[base + self.n_consts + pos] = S::one();
                    }
                }
                Instr::Input(i) => {
                    ws.vals.push(ctx.input[*i]);
                    push_zero_grad(&mut ws.grads);
                }
                Instr::Time => {
                    ws.vals.push(ctx.t);
                    push_zero_grad(&mut ws.grads);
                }
                Instr::Const(i) => {
                    ws.vals.push(ctx.theta[*i]);
                    push_zero_grad(&mut ws.grads);
                    let base = ws.grads.len() - np;
                    ws.grads[base + *i] = S::one();
                }
                Instr::Lit(v) => {
                    ws.vals.push(*v);
                    push_zero_grad(&mut ws.grads);
                }
                Instr::Op(op) => {
                    if op.arity() == 2 {
                        let b = ws.vals.pop().unwrap();
                        let a = ws.vals.pop().unwrap();
                        let gb_start = ws.grads.len() - np;
                        let ga_start = gb_start - np;
                        let v = match op {
                            Op::Add => {
                                for k in 0..np {
                                    ws.grads[ga_start + k] =
                                        ws.grads[ga_start + k] + ws.grads[gb_start + k];
                                }
                                a + b
                            }
                            Op::Sub => {
                                for k in 0..np {
                                    ws.grads[ga_start + k] =
                                        ws.grads[ga_start + k] - ws.grads[gb_start + k];
                                }
                                a - b
                            }
                            Op::Mul => {
                                for k in 0..np {
                                    ws.grads[ga_start + k] = b * ws.grads[ga_start + k]
                                        + a * ws.grads[gb_start + k];
                                }
                                a * b
                            }
                            Op::Div => {
                                if b.abs() < S::of(DIV_EPS) {
                                    return Err(DomainFault::DivNearZero);
                                }
                                let v = a / b;
                                for k in 0..np {
                                    ws.grads[ga_start + k] =
                                        (ws.grads[ga_start + k] - v * ws.grads[gb_start + k]) / b;
                                }
                                v
                            }
                            _ => unreachable!(),
                        };
                        ws.grads.truncate(gb_start);
                        ws.vals.push(v);
                    } else {
                        let a = ws.vals.pop().unwrap();
                        let ga_start = ws.grads.len() - np;
                        let (v, dv) = match op {
                            Op::Sin => (a.sin(), a.cos()),
                            Op::Cos => (a.cos(), -a.sin()),
                            Op::Exp => {
                                let v = a.exp();
                                (v, v)
                            }
                            Op::Log => {
                                if a <= S::zero() {
                                    return Err(DomainFault::LogNonPositive);
                                }
                                (a.ln(), S::one() / a)
                            }
                            Op::Pow2 => (a * a, S::of(2.0) * a),
                            Op::Pow3 => (a * a * a, S::of(3.0) * a * a),
                            Op::Pow4 => {
                                let s = a * a;
                                (s * s, S::of(4.0) * a * a * a)
                            }
                            _ => unreachable!(),
                        };
                        for k in 0..np {
                            ws.grads[ga_start + k] = dv * ws.grads[ga_start + k];
                        }
                        ws.vals.push(v);
                    }
                }
            }
        }
        Ok(ws.vals.pop().unwrap())
    }
}

fn apply_binary<S: Scalar>(op: Op, a: S, b: S) -> Result<S, DomainFault> {
    match op {
        Op::Add => Ok(a + b),
        Op::Sub => Ok(a - b),
        Op::Mul => Ok(a * b),
        Op::Div => {
            if b.abs() < S::of(DIV_EPS) {
                Err(DomainFault::DivNearZero)
            } else {
                Ok(a / b)
            }
        }
        _ => unreachable!(),
    }
}

fn apply_unary<S: Scalar>(op: Op, a: S) -> Result<S, DomainFault> {
    match op {
        Op::Sin => Ok(a.sin()),
        Op::Cos => Ok(a.cos()),
        Op::Exp => Ok(a.exp()),
        Op::Log => {
            if a <= S::zero() {
                Err(DomainFault::LogNonPositive)
            } else {
                Ok(a.ln())
            }
        }
        Op::Pow2 => Ok(a * a),
        Op::Pow3 => Ok(a * a * a),
        Op::Pow4 => {
            let s = a * a;
            Ok(s * s)
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_sexpr;

    fn ctx64<'a>(state: &'a [f64], theta: &'a [f64]) -> EvalContext<'a, f64> {
        EvalContext::new(state, &[], 0.0, theta)
    }

    #[test]
    fn basic_values() {
        let e = parse_sexpr("(+ x0 c0)").unwrap();
        assert_eq!(evaluate(&e, &ctx64(&[2.0], &[3.0])).unwrap(), 5.0);
        let e = parse_sexpr("(sin x0)").unwrap();
        assert_eq!(evaluate(&e, &ctx64(&[0.0], &[])).unwrap(), 0.0);
    }

    #[test]
    fn singularities_fault_instead_of_crashing() {
        let e = parse_sexpr("(/ 1 x0)").unwrap();
        assert_eq!(
            evaluate(&e, &ctx64(&[0.0], &[])),
            Err(DomainFault::DivNearZero)
        );
        let e = parse_sexpr("(log x0)").unwrap();
        assert_eq!(
            evaluate(&e, &ctx64(&[-1.0], &[])),
            Err(DomainFault::LogNonPositive)
        );
        // IEEE semantics otherwise: exp overflow is an infinity, not a fault
        let e = parse_sexpr("(exp x0)").unwrap();
        assert!(evaluate(&e, &ctx64(&[1e4], &[])).unwrap().is_infinite());
    }

    #[test]
    fn linear_gradient() {
        let e = parse_sexpr("(* c0 x0)").unwrap();
        let g = grad_constants(&e, &ctx64(&[2.0], &[0.7])).unwrap();
        assert_eq!(g, vec![2.0]);
    }

    #[test]
    fn sine_gradient_at_zero() {
        let e = parse_sexpr("(sin c0)").unwrap();
        let g = grad_constants(&e, &ctx64(&[], &[0.0])).unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn compiled_matches_recursive() {
        let e = parse_sexpr("(- (* c0 (pow2 x0)) (/ (cos x1) (+ c1 2)))").unwrap();
        let state = [0.7, -1.3];
        let theta = [1.9, 0.4];
        let ctx = EvalContext::new(&state[..], &[], 0.3, &theta[..]);
        let compiled = CompiledExpr::new(&e);
        let mut ws = GradWorkspace::new();
        let v1: f64 = evaluate(&e, &ctx).unwrap();
        let v2 = compiled.eval(&ctx).unwrap();
        let v3 = compiled.eval_grad(&ctx, &mut ws).unwrap();
        assert!((v1 - v2).abs() < 1e-14);
        assert!((v1 - v3).abs() < 1e-14);
    }

    #[test]
    fn tracked_state_partials() {
        // d/dx0 of c0 * pow2(x0) = 2 c0 x0
        let e = parse_sexpr("(* c0 (pow2 x0))").unwrap();
        let compiled = CompiledExpr::new(&e).with_tracked_states(&[0]);
        let state = [3.0];
        let theta = [2.0];
        let ctx = EvalContext::new(&state[..], &[], 0.0, &theta[..]);
        let mut ws = GradWorkspace::new();
        let v = compiled.eval_grad(&ctx, &mut ws).unwrap();
        assert_eq!(v, 18.0);
        assert_eq!(ws.grad(), &[9.0, 12.0]); // [d/dc0, d/dx0]
    }
}
