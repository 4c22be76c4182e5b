//! Expression trees: representation, S-expression text, canonicalization,
//! evaluation with analytic constant gradients, and equivalence checking.
//!
//! A tree is the unit of search, fitting, and reporting. Internal nodes carry
//! operators from the fixed set `{+, -, *, /, sin, cos, exp, log, pow2, pow3,
//! pow4}`; leaves are state variables `x<i>`, input variables `u<i>`, the time
//! symbol `t`, free-constant slots `c<i>`, or exact rational literals.
//!
//! Trees are immutable after construction and cheap to clone; all operations
//! on them are pure, so they can be shared freely across worker threads.

mod canon;
mod equiv;
mod eval;
mod parse;

pub use canon::{canonicalize, canonicalize_with_perm};
pub use equiv::{equivalent, Equivalence, ProbeBox};
pub use eval::{evaluate, grad_constants, CompiledExpr, DomainFault, EvalContext, GradWorkspace};
pub use parse::parse_sexpr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::scalar::Scalar;

/// Operator vocabulary. Integer powers are distinct unary operators so every
/// operator has fixed arity; non-integer powers are expressible only through
/// `exp`/`log` composition on dimensionless arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
    Pow2,
    Pow3,
    Pow4,
}

impl Op {
    pub const ALL: [Op; 11] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Sin,
        Op::Cos,
        Op::Exp,
        Op::Log,
        Op::Pow2,
        Op::Pow3,
        Op::Pow4,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Pow2 => "pow2",
            Op::Pow3 => "pow3",
            Op::Pow4 => "pow4",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.symbol() == s)
    }

    /// Exponent for the integer-power operators.
    pub fn power(self) -> Option<i32> {
        match self {
            Op::Pow2 => Some(2),
            Op::Pow3 => Some(3),
            Op::Pow4 => Some(4),
            _ => None,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }
}

/// Leaf payloads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leaf {
    /// State variable `x<i>`.
    State(usize),
    /// Input / forcing variable `u<i>`.
    Input(usize),
    /// The time symbol `t`.
    Time,
    /// Free constant slot `c<i>`.
    Const(usize),
    /// Exact rational literal.
    Lit(Rational64),
}

/// Ordered rooted operator tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExprTree {
    Leaf(Leaf),
    Node { op: Op, children: Vec<ExprTree> },
}

impl ExprTree {
    /// Build an internal node. Panics if the child count does not match the
    /// operator arity — that is a programming error, not an input error.
    pub fn node(op: Op, children: Vec<ExprTree>) -> ExprTree {
        assert_eq!(
            children.len(),
            op.arity(),
            "arity mismatch constructing {}",
            op.symbol()
        );
        ExprTree::Node { op, children }
    }

    pub fn leaf(leaf: Leaf) -> ExprTree {
        ExprTree::Leaf(leaf)
    }

    pub fn lit_int(v: i64) -> ExprTree {
        ExprTree::Leaf(Leaf::Lit(Rational64::new(v, 1)))
    }

    pub fn state(i: usize) -> ExprTree {
        ExprTree::Leaf(Leaf::State(i))
    }

    pub fn constant(i: usize) -> ExprTree {
        ExprTree::Leaf(Leaf::Const(i))
    }

    /// Node count `|e|`.
    pub fn complexity(&self) -> usize {
        match self {
            ExprTree::Leaf(_) => 1,
            ExprTree::Node { children, .. } => {
                1 + children.iter().map(ExprTree::complexity).sum::<usize>()
            }
        }
    }

    /// Number of levels (a lone leaf has depth 1).
    pub fn depth(&self) -> usize {
        match self {
            ExprTree::Leaf(_) => 1,
            ExprTree::Node { children, .. } => {
                1 + children.iter().map(ExprTree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Number of free-constant slots, i.e. `1 + max c-index` (slots are kept
    /// contiguous by construction and by canonicalization).
    pub fn num_constants(&self) -> usize {
        self.fold_leaves(0, &mut |acc, leaf| match leaf {
            Leaf::Const(i) => acc.max(i + 1),
            _ => acc,
        })
    }

    pub fn max_state_index(&self) -> Option<usize> {
        let m = self.fold_leaves(usize::MAX, &mut |acc, leaf| match leaf {
            Leaf::State(i) => {
                if acc == usize::MAX {
                    i
                } else {
                    acc.max(i)
                }
            }
            _ => acc,
        });
        (m != usize::MAX).then_some(m)
    }

    pub fn max_input_index(&self) -> Option<usize> {
        let m = self.fold_leaves(usize::MAX, &mut |acc, leaf| match leaf {
            Leaf::Input(i) => {
                if acc == usize::MAX {
                    i
                } else {
                    acc.max(i)
                }
            }
            _ => acc,
        });
        (m != usize::MAX).then_some(m)
    }

    pub fn uses_time(&self) -> bool {
        self.any_leaf(&mut |leaf| matches!(leaf, Leaf::Time))
    }

    fn fold_leaves<T: Copy>(&self, init: T, f: &mut impl FnMut(T, Leaf) -> T) -> T {
        match self {
            ExprTree::Leaf(l) => f(init, *l),
            ExprTree::Node { children, .. } => {
                children.iter().fold(init, |acc, ch| ch.fold_leaves(acc, f))
            }
        }
    }

    fn any_leaf(&self, f: &mut impl FnMut(Leaf) -> bool) -> bool {
        match self {
            ExprTree::Leaf(l) => f(*l),
            ExprTree::Node { children, .. } => children.iter().any(|c| c.any_leaf(f)),
        }
    }

    /// Canonical S-expression text (the `Display` form).
    pub fn print(&self) -> String {
        self.to_string()
    }
}

/// Render a rational as decimal text when the denominator is a product of 2s
/// and 5s (exact), falling back to `p/q`.
fn format_rational(r: &Rational64) -> String {
    let num = *r.numer();
    let den = *r.denom();
    if den == 1 {
        return num.to_string();
    }
    let mut d = den;
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d == 1 && twos.max(fives) <= 18 {
        let digits = twos.max(fives);
        // scale numerator so the denominator becomes 10^digits
        let scale = 2i128.pow(digits - twos) * 5i128.pow(digits - fives);
        let scaled = num as i128 * scale;
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let pow10 = 10u128.pow(digits);
        let int = abs / pow10;
        let frac = abs % pow10;
        let frac_str = format!("{:0width$}", frac, width = digits as usize);
        let frac_str = frac_str.trim_end_matches('0');
        if frac_str.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac_str}")
        }
    } else {
        format!("{num}/{den}")
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprTree::Leaf(Leaf::State(i)) => write!(f, "x{i}"),
            ExprTree::Leaf(Leaf::Input(i)) => write!(f, "u{i}"),
            ExprTree::Leaf(Leaf::Time) => write!(f, "t"),
            ExprTree::Leaf(Leaf::Const(i)) => write!(f, "c{i}"),
            ExprTree::Leaf(Leaf::Lit(r)) => write!(f, "{}", format_rational(r)),
            ExprTree::Node { op, children } => {
                write!(f, "({}", op.symbol())?;
                for ch in children {
                    write!(f, " {ch}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Fitted constants for a tree: finite values, one per constant slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantVector<S>(pub Vec<S>);

impl<S: Scalar> ConstantVector<S> {
    pub fn empty() -> Self {
        ConstantVector(Vec::new())
    }

    /// Validates finiteness and length against the tree's slot count.
    pub fn for_tree(values: Vec<S>, tree: &ExprTree) -> Result<Self, ExprError> {
        if values.len() != tree.num_constants() {
            return Err(ExprError::ConstantLength {
                expected: tree.num_constants(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ExprError::NonFiniteConstant);
        }
        Ok(ConstantVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }
}

/// Errors from parsing and construction.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("unbalanced parenthesis at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("unknown symbol `{token}` at offset {offset}")]
    UnknownSymbol { token: String, offset: usize },
    #[error("operator `{op}` expects {expected} argument(s), got {got} (at offset {offset})")]
    ArityMismatch {
        op: String,
        expected: usize,
        got: usize,
        offset: usize,
    },
    #[error("numeric literal out of range at offset {offset}")]
    LiteralOverflow { offset: usize },
    #[error("empty input")]
    Empty,
    #[error("trailing input at offset {offset}")]
    Trailing { offset: usize },
    #[error("constant vector length {got} does not match tree slot count {expected}")]
    ConstantLength { expected: usize, got: usize },
    #[error("constant vector contains a non-finite entry")]
    NonFiniteConstant,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexity_counts_nodes() {
        assert_eq!(ExprTree::state(0).complexity(), 1);
        let e = ExprTree::node(Op::Add, vec![ExprTree::state(0), ExprTree::state(1)]);
        assert_eq!(e.complexity(), 3);
        let e = ExprTree::node(
            Op::Add,
            vec![
                ExprTree::state(0),
                ExprTree::node(Op::Mul, vec![ExprTree::lit_int(2), ExprTree::state(1)]),
            ],
        );
        assert_eq!(e.complexity(), 5);
    }

    #[test]
    fn rational_formatting_is_exact() {
        assert_eq!(format_rational(&Rational64::new(2, 1)), "2");
        assert_eq!(format_rational(&Rational64::new(1, 2)), "0.5");
        assert_eq!(format_rational(&Rational64::new(-5, 4)), "-1.25");
        assert_eq!(format_rational(&Rational64::new(1, 3)), "1/3");
    }

    #[test]
    #[should_panic]
    fn node_arity_is_checked() {
        let _ = ExprTree::node(Op::Sin, vec![ExprTree::state(0), ExprTree::state(1)]);
    }
}
