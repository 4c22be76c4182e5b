//! Exhaustive enumeration of a grammar's language up to a depth bound.
//!
//! The language is the set of canonical forms of type-valid trees over the
//! grammar's terminals whose root type matches the start symbol. Enumeration
//! runs bottom-up, level by level: trees of depth `l+1` are operator
//! combinations with at least one child on the depth-`l` frontier,
//! canonicalized and deduplicated. Canonicalization composes (the canonical
//! form of `op(a, b)` equals the canonical form built from canonical `a`,
//! `b`), so each canonical form is produced from canonical children exactly.
//!
//! Yield order is deterministic: depth-major, then lexicographic on the
//! serialization. The stream stops with [`GrammarError::BudgetExceeded`] when
//! the number of stored trees (all value types, not only start-matching ones)
//! or the generation work passes the cap.

use std::collections::HashSet;

use super::{GrammarError, ParityReq, PhysType, TypedGrammar};
use crate::expr::{canonicalize, ExprTree, Leaf, Op};
use crate::grammar::Parity;

#[derive(Clone)]
struct Entry {
    tree: ExprTree,
    ty: Option<PhysType>,
    n_consts: usize,
}

/// Lazy depth-major enumeration stream.
pub struct EnumStream<'g> {
    g: &'g TypedGrammar,
    depth: usize,
    cap: usize,
    start_dim: super::DimVector,
    start_parity: ParityReq,
    definite_parity: bool,
    all: Vec<Entry>,
    frontier_start: usize,
    level: usize,
    pending: std::vec::IntoIter<ExprTree>,
    seen: HashSet<String>,
    work: usize,
    finished: bool,
}

impl<'g> EnumStream<'g> {
    pub fn new(g: &'g TypedGrammar, component: usize, depth: usize, cap: usize) -> Self {
        let start = &g.nts[g.starts[component]].key;
        EnumStream {
            g,
            depth,
            cap,
            start_dim: start.dim,
            start_parity: start.parity,
            definite_parity: matches!(start.parity, ParityReq::Exact(_)),
            all: Vec::new(),
            frontier_start: 0,
            level: 0,
            pending: Vec::new().into_iter(),
            seen: HashSet::new(),
            work: 0,
            finished: false,
        }
    }

    fn matches_start(&self, e: &Entry) -> bool {
        if self.g.untyped {
            return true;
        }
        match e.ty {
            Some(ty) => ty.dim == self.start_dim && self.start_parity.accepts(ty.parity),
            None => false,
        }
    }

    /// Keep a candidate entry if it is new and admissible as a subtree.
    fn consider(&mut self, tree: ExprTree, ty: Option<PhysType>, new: &mut Vec<Entry>) -> Result<(), GrammarError> {
        self.work += 1;
        if self.work > self.cap.saturating_mul(4) {
            return Err(GrammarError::BudgetExceeded { cap: self.cap });
        }
        if !self.g.untyped {
            let ty = ty.expect("typed mode requires a value type");
            if self.definite_parity && ty.parity == Parity::NoParity {
                // no definite-parity position can ever accept it
                return Ok(());
            }
        }
        let key = tree.print();
        if self.seen.contains(&key) {
            return Ok(());
        }
        if self.seen.len() + 1 > self.cap {
            return Err(GrammarError::BudgetExceeded { cap: self.cap });
        }
        self.seen.insert(key);
        let n_consts = tree.num_constants();
        new.push(Entry { tree, ty, n_consts });
        Ok(())
    }

    fn build_level(&mut self) -> Result<Vec<Entry>, GrammarError> {
        let mut new = Vec::new();
        if self.level == 0 {
            let terminals = self.g.terminals.clone();
            for t in &terminals {
                let canon = canonicalize(&t.fragment);
                let ty = if self.g.untyped { None } else { Some(t.ty) };
                self.consider(canon, ty, &mut new)?;
            }
            return Ok(new);
        }
        let ops = self.g.operators.clone();
        let n_all = self.all.len();
        let frontier = self.frontier_start..n_all;
        for op in &ops {
            if op.arity() == 1 {
                for i in frontier.clone() {
                    let child = self.all[i].clone();
                    if let Some((tree, ty)) = self.combine1(*op, &child) {
                        self.consider(tree, ty, &mut new)?;
                    }
                }
            } else {
                // at least one child from the frontier
                for i in 0..n_all {
                    for j in 0..n_all {
                        if i < self.frontier_start && j < self.frontier_start {
                            continue;
                        }
                        let a = self.all[i].clone();
                        let b = self.all[j].clone();
                        if let Some((tree, ty)) = self.combine2(*op, &a, &b) {
                            self.consider(tree, ty, &mut new)?;
                        }
                    }
                }
            }
        }
        Ok(new)
    }

    fn combine1(&self, op: Op, a: &Entry) -> Option<(ExprTree, Option<PhysType>)> {
        let ty = if self.g.untyped {
            None
        } else {
            Some(super::propagate_type(op, &[a.ty?]).ok()?)
        };
        let tree = canonicalize(&ExprTree::node(op, vec![a.tree.clone()]));
        Some((tree, ty))
    }

    fn combine2(&self, op: Op, a: &Entry, b: &Entry) -> Option<(ExprTree, Option<PhysType>)> {
        let ty = if self.g.untyped {
            None
        } else {
            Some(super::propagate_type(op, &[a.ty?, b.ty?]).ok()?)
        };
        let mut next_slot = a.n_consts;
        let b_shifted = offset_const_slots(&b.tree, &mut next_slot);
        let tree = canonicalize(&ExprTree::node(op, vec![a.tree.clone(), b_shifted]));
        Some((tree, ty))
    }
}

fn offset_const_slots(e: &ExprTree, next: &mut usize) -> ExprTree {
    match e {
        ExprTree::Leaf(Leaf::Const(_)) => {
            let s = *next;
            *next += 1;
            ExprTree::constant(s)
        }
        ExprTree::Leaf(_) => e.clone(),
        ExprTree::Node { op, children } => ExprTree::Node {
            op: *op,
            children: children.iter().map(|c| offset_const_slots(c, next)).collect(),
        },
    }
}

impl<'g> Iterator for EnumStream<'g> {
    type Item = Result<ExprTree, GrammarError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(t) = self.pending.next() {
                return Some(Ok(t));
            }
            if self.finished || self.level >= self.depth {
                return None;
            }
            match self.build_level() {
                Err(e) => {
                    self.finished = true;
                    return Some(Err(e));
                }
                Ok(new) => {
                    self.level += 1;
                    if new.is_empty() {
                        // language saturated below the requested depth
                        self.finished = true;
                        return None;
                    }
                    let mut yieldable: Vec<ExprTree> = new
                        .iter()
                        .filter(|e| self.matches_start(e))
                        .map(|e| e.tree.clone())
                        .collect();
                    yieldable.sort_by_key(|t| t.print());
                    self.frontier_start = self.all.len();
                    self.all.extend(new);
                    self.pending = yieldable.into_iter();
                }
            }
        }
    }
}

/// Number of canonical trees in the component's language up to `depth`.
pub fn language_count(
    g: &TypedGrammar,
    component: usize,
    depth: usize,
    cap: usize,
) -> Result<usize, GrammarError> {
    let mut n = 0usize;
    for item in g.enumerate(component, depth, cap) {
        item?;
        n += 1;
    }
    Ok(n)
}

/// Fraction of the unconstrained language eliminated by the constrained
/// grammar: `1 - |L(g_c)| / |L(g_0)|`. Both grammars must share terminals and
/// operators for the ratio to mean anything; that is the caller's contract.
pub fn pruning_rate(
    g_unconstrained: &TypedGrammar,
    g_constrained: &TypedGrammar,
    depth: usize,
    cap: usize,
) -> Result<f64, GrammarError> {
    let c0 = language_count(g_unconstrained, 0, depth, cap)?;
    let cc = language_count(g_constrained, 0, depth, cap)?;
    if c0 == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - cc as f64 / c0 as f64)
}
