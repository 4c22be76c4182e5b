//! Physically typed context-free grammars over expression trees.
//!
//! Every quantity carries a [`PhysType`]: a dimension vector over the SI basis
//! (M, L, T, Θ, I), a parity tag describing behavior under sign flip of the
//! state, and an invariance class. Productions must preserve types, so the
//! grammar's language contains only unit-consistent, symmetry-respecting
//! trees; pruning happens before any fitting.
//!
//! Construction applies a [`SymmetrySpec`]: parity constraints tag the start
//! symbol and exclude subtrees without definite parity; rotational invariance
//! replaces Cartesian leaves with invariant composite terminals; autonomous
//! systems drop the time terminal; periodically forced systems get `sin`/`cos`
//! forcing terminals; Galilean pairs turn positions and velocities into
//! relative differences.
//!
//! A built grammar is immutable and shareable across workers. Enumeration
//! streams are single-consumer; sampling is pure given an RNG.

mod build;
mod enumerate;
mod export;
mod sample;

pub use build::{build, build_unconstrained, Rotational, SymmetrySpec, VariableInfo, Vocabulary};
pub use enumerate::{language_count, pruning_rate, EnumStream};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::expr::{ExprTree, Leaf, Op};

/// Integer exponents over the SI basis (M, L, T, Θ, I).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DimVector(pub [i32; 5]);

impl DimVector {
    pub const DIMENSIONLESS: DimVector = DimVector([0; 5]);

    pub fn is_dimensionless(&self) -> bool {
        self.0 == [0; 5]
    }

    pub fn add(&self, other: &DimVector) -> DimVector {
        let mut v = [0; 5];
        for i in 0..5 {
            v[i] = self.0[i] + other.0[i];
        }
        DimVector(v)
    }

    pub fn sub(&self, other: &DimVector) -> DimVector {
        let mut v = [0; 5];
        for i in 0..5 {
            v[i] = self.0[i] - other.0[i];
        }
        DimVector(v)
    }

    pub fn scale(&self, n: i32) -> DimVector {
        let mut v = [0; 5];
        for i in 0..5 {
            v[i] = self.0[i] * n;
        }
        DimVector(v)
    }

    /// Componentwise exact division, or `None` if any exponent is not
    /// divisible.
    pub fn div_exact(&self, n: i32) -> Option<DimVector> {
        let mut v = [0; 5];
        for i in 0..5 {
            if self.0[i] % n != 0 {
                return None;
            }
            v[i] = self.0[i] / n;
        }
        Some(DimVector(v))
    }
}

/// Behavior under sign flip of the state vector. `NoParity` means the value
/// has no definite parity (e.g. `exp` of anything), which a parity-constrained
/// position can never accept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
    NoParity,
}

impl Parity {
    /// Multiplicative combination (products and quotients).
    pub fn mul(self, other: Parity) -> Parity {
        use Parity::*;
        match (self, other) {
            (Odd, Odd) => Even,
            (Odd, Even) | (Even, Odd) => Odd,
            (Even, Even) => Even,
            _ => NoParity,
        }
    }

    /// Additive combination: equal definite parities survive, anything else
    /// loses definiteness.
    pub fn add(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::NoParity
        }
    }

    /// Parity of the n-th power.
    pub fn pow(self, n: i32) -> Parity {
        match self {
            Parity::Odd => {
                if n % 2 == 0 {
                    Parity::Even
                } else {
                    Parity::Odd
                }
            }
            Parity::Even => Parity::Even,
            Parity::NoParity => Parity::NoParity,
        }
    }
}

/// Invariance class under the declared rotation group. `Scalar` marks
/// quantities that do not transform at all (time, constants, literals) and
/// combines freely with anything; a Cartesian component is `Unrestricted` and
/// poisons invariance of whatever contains it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InvarianceClass {
    Scalar,
    SO2Invariant,
    SO3Invariant,
    Unrestricted,
}

impl InvarianceClass {
    /// Combination under sums, products, and quotients.
    pub fn join(self, other: InvarianceClass) -> InvarianceClass {
        use InvarianceClass::*;
        match (self, other) {
            (Unrestricted, _) | (_, Unrestricted) => Unrestricted,
            (Scalar, x) | (x, Scalar) => x,
            (a, b) if a == b => a,
            // mixing invariants of different groups has no consistent class
            _ => Unrestricted,
        }
    }
}

/// The full typing judgment attached to every subtree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhysType {
    pub dim: DimVector,
    pub parity: Parity,
    pub invariance: InvarianceClass,
}

impl PhysType {
    pub fn dimensionless_scalar() -> PhysType {
        PhysType {
            dim: DimVector::DIMENSIONLESS,
            parity: Parity::Even,
            invariance: InvarianceClass::Scalar,
        }
    }
}

/// Type-propagation failures.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch(DimVector, DimVector),
    #[error("operator `{0}` requires a dimensionless argument, got {1:?}")]
    NonDimensionlessArg(&'static str, DimVector),
    #[error("parity violation: required {required:?}, value has {got:?}")]
    ParityViolation { required: Parity, got: Parity },
    #[error("invariance violation: value is not invariant under the declared group")]
    InvarianceViolation,
    #[error("unknown variable `{0}{1}`")]
    UnknownVariable(char, usize),
    #[error("time symbol is not available in this grammar")]
    TimeNotAvailable,
    #[error("constant slots are not available in this grammar")]
    ConstantsNotAvailable,
    #[error("tree depth {got} exceeds the grammar limit {limit}")]
    DepthExceeded { got: usize, limit: usize },
}

/// Result type of an operator applied to typed children.
pub fn propagate_type(op: Op, children: &[PhysType]) -> Result<PhysType, TypeError> {
    assert_eq!(children.len(), op.arity(), "arity mismatch in propagate_type");
    let inv = children
        .iter()
        .map(|c| c.invariance)
        .reduce(InvarianceClass::join)
        .unwrap();
    match op {
        Op::Add | Op::Sub => {
            let (a, b) = (children[0], children[1]);
            if a.dim != b.dim {
                return Err(TypeError::DimMismatch(a.dim, b.dim));
            }
            Ok(PhysType {
                dim: a.dim,
                parity: a.parity.add(b.parity),
                invariance: inv,
            })
        }
        Op::Mul => Ok(PhysType {
            dim: children[0].dim.add(&children[1].dim),
            parity: children[0].parity.mul(children[1].parity),
            invariance: inv,
        }),
        Op::Div => Ok(PhysType {
            dim: children[0].dim.sub(&children[1].dim),
            parity: children[0].parity.mul(children[1].parity),
            invariance: inv,
        }),
        Op::Sin | Op::Cos | Op::Exp | Op::Log => {
            let a = children[0];
            if !a.dim.is_dimensionless() {
                return Err(TypeError::NonDimensionlessArg(op.symbol(), a.dim));
            }
            let parity = match op {
                Op::Sin => a.parity,
                Op::Cos => {
                    if a.parity == Parity::NoParity {
                        Parity::NoParity
                    } else {
                        Parity::Even
                    }
                }
                // exp/log of anything has no definite parity
                _ => Parity::NoParity,
            };
            Ok(PhysType {
                dim: DimVector::DIMENSIONLESS,
                parity,
                invariance: inv,
            })
        }
        Op::Pow2 | Op::Pow3 | Op::Pow4 => {
            let n = op.power().unwrap();
            let a = children[0];
            Ok(PhysType {
                dim: a.dim.scale(n),
                parity: a.parity.pow(n),
                invariance: inv,
            })
        }
    }
}

/// Parity requirement attached to a nonterminal: either any parity is
/// admissible (no constraint active) or the value must have the exact
/// definite parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParityReq {
    Any,
    Exact(Parity),
}

impl ParityReq {
    pub fn accepts(self, p: Parity) -> bool {
        match self {
            ParityReq::Any => true,
            ParityReq::Exact(req) => p == req,
        }
    }
}

/// Nonterminal key: the type a subtree must have at this position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NtKey {
    pub dim: DimVector,
    pub parity: ParityReq,
}

/// A typed terminal: a leaf or an atomic composite fragment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TerminalDef {
    pub name: String,
    pub fragment: ExprTree,
    pub ty: PhysType,
}

/// Right-hand side of a production.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Rhs {
    /// Index into the terminal table.
    Terminal(usize),
    /// Operator applied to child nonterminals.
    Compound { op: Op, children: Vec<usize> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Production {
    pub rhs: Rhs,
    /// Probability; per-nonterminal priors sum to 1.
    pub prior: f64,
    /// Minimum derivation depth through this production.
    pub min_depth: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Nonterminal {
    pub key: NtKey,
    pub prods: Vec<Production>,
    pub min_depth: usize,
}

/// A symmetry- and unit-constrained grammar, one start symbol per output
/// component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypedGrammar {
    pub vocab: Vocabulary,
    pub operators: Vec<Op>,
    pub terminals: Vec<TerminalDef>,
    pub max_depth: usize,
    pub nts: Vec<Nonterminal>,
    /// Start nonterminal per output component.
    pub starts: Vec<usize>,
    /// Rotational group the grammar enforces (admission checks invariance
    /// against it).
    pub rotational: Rotational,
    /// When set, type checking is skipped entirely (the unconstrained
    /// baseline grammar of the pruning measurements).
    pub untyped: bool,
}

impl TypedGrammar {
    pub fn num_components(&self) -> usize {
        self.starts.len()
    }

    /// Leaf typing from the vocabulary.
    pub fn leaf_type(&self, leaf: &Leaf) -> Result<PhysType, TypeError> {
        self.vocab.leaf_type(leaf)
    }

    /// Bottom-up value type of an arbitrary tree over this vocabulary.
    pub fn typecheck(&self, e: &ExprTree) -> Result<PhysType, TypeError> {
        match e {
            ExprTree::Leaf(l) => self.leaf_type(l),
            ExprTree::Node { op, children } => {
                let tys = children
                    .iter()
                    .map(|c| self.typecheck(c))
                    .collect::<Result<Vec<_>, _>>()?;
                propagate_type(*op, &tys)
            }
        }
    }

    /// Admission check for a candidate tree at the given output component:
    /// leaves must be available, the tree must type-check, the root type must
    /// satisfy the start symbol, and the depth budget must hold. Untyped
    /// grammars check only leaf availability and depth.
    pub fn admits(&self, e: &ExprTree, component: usize) -> Result<(), TypeError> {
        if e.depth() > self.max_depth {
            return Err(TypeError::DepthExceeded {
                got: e.depth(),
                limit: self.max_depth,
            });
        }
        self.check_leaf_availability(e)?;
        if self.untyped {
            return Ok(());
        }
        let ty = self.typecheck(e)?;
        let start = &self.nts[self.starts[component]].key;
        if ty.dim != start.dim {
            return Err(TypeError::DimMismatch(ty.dim, start.dim));
        }
        if !start.parity.accepts(ty.parity) {
            if let ParityReq::Exact(req) = start.parity {
                return Err(TypeError::ParityViolation {
                    required: req,
                    got: ty.parity,
                });
            }
        }
        if self.rotational != Rotational::None && ty.invariance == InvarianceClass::Unrestricted {
            return Err(TypeError::InvarianceViolation);
        }
        Ok(())
    }

    fn check_leaf_availability(&self, e: &ExprTree) -> Result<(), TypeError> {
        match e {
            ExprTree::Leaf(Leaf::State(i)) => {
                if *i < self.vocab.states.len() {
                    Ok(())
                } else {
                    Err(TypeError::UnknownVariable('x', *i))
                }
            }
            ExprTree::Leaf(Leaf::Input(i)) => {
                if *i < self.vocab.inputs.len() {
                    Ok(())
                } else {
                    Err(TypeError::UnknownVariable('u', *i))
                }
            }
            ExprTree::Leaf(Leaf::Time) => {
                if self.time_available() {
                    Ok(())
                } else {
                    Err(TypeError::TimeNotAvailable)
                }
            }
            ExprTree::Leaf(Leaf::Const(_)) => {
                if self.vocab.constants {
                    Ok(())
                } else {
                    Err(TypeError::ConstantsNotAvailable)
                }
            }
            ExprTree::Leaf(Leaf::Lit(_)) => Ok(()),
            ExprTree::Node { children, .. } => {
                for c in children {
                    self.check_leaf_availability(c)?;
                }
                Ok(())
            }
        }
    }

    /// Whether any terminal exposes the time symbol (directly or inside a
    /// forcing fragment).
    pub fn time_available(&self) -> bool {
        self.terminals.iter().any(|t| t.fragment.uses_time())
    }

    /// Sampled tree and its exact log prior; see [`sample::sample_seeded`].
    pub fn sample_seeded(&self, component: usize, seed: u64) -> (ExprTree, f64) {
        sample::sample_seeded(self, component, seed)
    }

    pub fn sample(
        &self,
        component: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> (ExprTree, f64) {
        sample::sample(self, component, rng)
    }

    /// Exact log prior of a tree under this grammar, when derivable.
    pub fn log_prior_of(&self, e: &ExprTree, component: usize) -> Option<f64> {
        sample::log_prior_of(self, e, component)
    }

    /// Lazy enumeration of the component's language up to `depth`.
    pub fn enumerate(&self, component: usize, depth: usize, cap: usize) -> EnumStream<'_> {
        EnumStream::new(self, component, depth, cap)
    }

    /// Grammar export used by the external-proposer protocol.
    pub fn export_json(&self) -> serde_json::Value {
        export::export_json(self)
    }
}

/// Grammar construction and enumeration failures.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("the grammar derives no tree for component {component} within depth {max_depth}")]
    EmptyLanguage { component: usize, max_depth: usize },
    #[error("enumeration budget exceeded (cap {cap})")]
    BudgetExceeded { cap: usize },
    #[error("reachable type space exceeded the safety cap ({cap})")]
    TypeSpaceExceeded { cap: usize },
    #[error("invalid symmetry spec: {0}")]
    InvalidSpec(String),
}

/// Convenience for building literal pools.
pub fn lit(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ty(dim: [i32; 5], parity: Parity) -> PhysType {
        PhysType {
            dim: DimVector(dim),
            parity,
            invariance: InvarianceClass::Unrestricted,
        }
    }

    #[test]
    fn mul_adds_dimension_vectors() {
        // (L T^-1) * T = L
        let a = ty([0, 1, -1, 0, 0], Parity::Even);
        let b = ty([0, 0, 1, 0, 0], Parity::Even);
        let r = propagate_type(Op::Mul, &[a, b]).unwrap();
        assert_eq!(r.dim, DimVector([0, 1, 0, 0, 0]));
    }

    #[test]
    fn transcendentals_require_dimensionless() {
        let a = ty([0, 1, 0, 0, 0], Parity::Even);
        assert!(matches!(
            propagate_type(Op::Sin, &[a]),
            Err(TypeError::NonDimensionlessArg("sin", _))
        ));
    }

    #[test]
    fn addition_requires_equal_dims() {
        let a = ty([0, 1, 0, 0, 0], Parity::Even);
        let b = ty([0, 0, 1, 0, 0], Parity::Even);
        assert!(matches!(
            propagate_type(Op::Add, &[a, b]),
            Err(TypeError::DimMismatch(_, _))
        ));
    }

    #[test]
    fn parity_tables() {
        let odd = ty([0; 5], Parity::Odd);
        let even = ty([0; 5], Parity::Even);
        assert_eq!(propagate_type(Op::Mul, &[odd, odd]).unwrap().parity, Parity::Even);
        assert_eq!(propagate_type(Op::Mul, &[odd, even]).unwrap().parity, Parity::Odd);
        assert_eq!(propagate_type(Op::Sin, &[odd]).unwrap().parity, Parity::Odd);
        assert_eq!(propagate_type(Op::Cos, &[odd]).unwrap().parity, Parity::Even);
        assert_eq!(propagate_type(Op::Exp, &[odd]).unwrap().parity, Parity::NoParity);
        assert_eq!(propagate_type(Op::Pow2, &[odd]).unwrap().parity, Parity::Even);
        assert_eq!(propagate_type(Op::Pow3, &[odd]).unwrap().parity, Parity::Odd);
        assert_eq!(
            propagate_type(Op::Add, &[odd, even]).unwrap().parity,
            Parity::NoParity
        );
        assert_eq!(propagate_type(Op::Div, &[even, odd]).unwrap().parity, Parity::Odd);
    }

    #[test]
    fn invariance_join() {
        use InvarianceClass::*;
        assert_eq!(Scalar.join(SO3Invariant), SO3Invariant);
        assert_eq!(SO3Invariant.join(SO3Invariant), SO3Invariant);
        assert_eq!(SO3Invariant.join(Unrestricted), Unrestricted);
        assert_eq!(SO2Invariant.join(SO3Invariant), Unrestricted);
    }
}
