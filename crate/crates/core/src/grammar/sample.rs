//! Top-down sampling and derivation replay.
//!
//! At each nonterminal, productions whose minimum completion depth exceeds the
//! remaining budget are masked out and the rest renormalized; in the last two
//! levels terminal productions are up-weighted by 2. The returned log prior is
//! the exact sum of the (depth-adjusted) production log probabilities actually
//! used, and `log_prior_of` recomputes it by walking a tree's unique
//! derivation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Rhs, TypedGrammar};
use crate::expr::{ExprTree, Leaf};
use crate::util::rng::{stream, Stream};

/// Effective production weights at a node `remaining` levels above the depth
/// floor. Masked productions get weight zero.
fn effective_weights(g: &TypedGrammar, nt: usize, remaining: usize) -> Vec<f64> {
    let boost_terminals = remaining <= 2;
    g.nts[nt]
        .prods
        .iter()
        .map(|p| {
            if p.min_depth > remaining {
                0.0
            } else if boost_terminals && matches!(p.rhs, Rhs::Terminal(_)) {
                2.0 * p.prior
            } else {
                p.prior
            }
        })
        .collect()
}

fn shift_const_slots(e: &ExprTree, next_slot: &mut usize) -> ExprTree {
    match e {
        ExprTree::Leaf(Leaf::Const(_)) => {
            let s = *next_slot;
            *next_slot += 1;
            ExprTree::constant(s)
        }
        ExprTree::Leaf(_) => e.clone(),
        ExprTree::Node { op, children } => ExprTree::Node {
            op: *op,
            children: children
                .iter()
                .map(|c| shift_const_slots(c, next_slot))
                .collect(),
        },
    }
}

fn sample_from(
    g: &TypedGrammar,
    nt: usize,
    remaining: usize,
    rng: &mut ChaCha8Rng,
    log_prior: &mut f64,
    next_slot: &mut usize,
) -> ExprTree {
    let weights = effective_weights(g, nt, remaining);
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "no viable production (min_depth pruning bug)");
    let mut draw = rng.gen::<f64>() * total;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        if draw < *w {
            chosen = i;
            break;
        }
        draw -= w;
    }
    *log_prior += (weights[chosen] / total).ln();
    match &g.nts[nt].prods[chosen].rhs {
        Rhs::Terminal(ti) => shift_const_slots(&g.terminals[*ti].fragment, next_slot),
        Rhs::Compound { op, children } => {
            let kids = children
                .iter()
                .map(|&c| sample_from(g, c, remaining - 1, rng, log_prior, next_slot))
                .collect();
            ExprTree::Node { op: *op, children: kids }
        }
    }
}

/// Draw one tree for the component; returns (tree, exact log prior).
pub fn sample(g: &TypedGrammar, component: usize, rng: &mut ChaCha8Rng) -> (ExprTree, f64) {
    let mut log_prior = 0.0;
    let mut next_slot = 0usize;
    let tree = sample_from(
        g,
        g.starts[component],
        g.max_depth,
        rng,
        &mut log_prior,
        &mut next_slot,
    );
    (tree, log_prior)
}

pub fn sample_seeded(g: &TypedGrammar, component: usize, seed: u64) -> (ExprTree, f64) {
    let mut rng = stream(seed, Stream::Proposals, component as u64);
    sample(g, component, &mut rng)
}

/// Match a subtree against a terminal fragment: identical up to the fragment's
/// single anonymous constant slot.
fn matches_fragment(tree: &ExprTree, frag: &ExprTree) -> bool {
    match (tree, frag) {
        (ExprTree::Leaf(Leaf::Const(_)), ExprTree::Leaf(Leaf::Const(_))) => true,
        (ExprTree::Leaf(a), ExprTree::Leaf(b)) => a == b,
        (
            ExprTree::Node { op: oa, children: ca },
            ExprTree::Node { op: ob, children: cb },
        ) => oa == ob && ca.len() == cb.len() && ca.iter().zip(cb).all(|(a, b)| matches_fragment(a, b)),
        _ => false,
    }
}

fn replay(
    g: &TypedGrammar,
    nt: usize,
    tree: &ExprTree,
    remaining: usize,
) -> Option<f64> {
    let weights = effective_weights(g, nt, remaining);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    // terminal productions take precedence, mirroring the dedup rule that a
    // fragment-shaped subtree counts as the atomic terminal
    for (i, p) in g.nts[nt].prods.iter().enumerate() {
        if weights[i] <= 0.0 {
            continue;
        }
        if let Rhs::Terminal(ti) = p.rhs {
            if matches_fragment(tree, &g.terminals[ti].fragment) {
                return Some((weights[i] / total).ln());
            }
        }
    }
    if let ExprTree::Node { op, children } = tree {
        for (i, p) in g.nts[nt].prods.iter().enumerate() {
            if weights[i] <= 0.0 {
                continue;
            }
            if let Rhs::Compound { op: pop, children: pcs } = &p.rhs {
                if pop != op {
                    continue;
                }
                let mut acc = (weights[i] / total).ln();
                let mut ok = true;
                for (child, &cnt) in children.iter().zip(pcs) {
                    match replay(g, cnt, child, remaining - 1) {
                        Some(lp) => acc += lp,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Some(acc);
                }
            }
        }
    }
    None
}

/// Log prior of a tree under the grammar's sampling distribution, when the
/// tree is derivable from the component's start symbol within the depth
/// budget.
pub fn log_prior_of(g: &TypedGrammar, tree: &ExprTree, component: usize) -> Option<f64> {
    replay(g, g.starts[component], tree, g.max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;
    use crate::grammar::build::{build, build_unconstrained, SymmetrySpec, Vocabulary};
    use crate::grammar::DimVector;

    fn small_grammar() -> TypedGrammar {
        build(
            Vocabulary::dimensionless(2, 0),
            &SymmetrySpec::unconstrained(),
            &[Op::Add, Op::Mul, Op::Sin],
            &[DimVector::DIMENSIONLESS],
            4,
        )
        .unwrap()
    }

    #[test]
    fn single_production_grammar_samples_its_tree_with_zero_log_prior() {
        let vocab = Vocabulary {
            states: vec![crate::grammar::build::VariableInfo::state(
                "x0",
                DimVector::DIMENSIONLESS,
            )],
            inputs: vec![],
            time_dim: DimVector::DIMENSIONLESS,
            constants: false,
            literals: vec![],
        };
        let g = build(vocab, &SymmetrySpec::unconstrained(), &[], &[DimVector::DIMENSIONLESS], 1)
            .unwrap();
        let (tree, lp) = g.sample_seeded(0, 42);
        assert_eq!(tree.print(), "x0");
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn equiprobable_terminals_draw_about_half_each() {
        let g = build_unconstrained(
            Vocabulary {
                states: vec![
                    crate::grammar::build::VariableInfo::state("x0", DimVector::DIMENSIONLESS),
                    crate::grammar::build::VariableInfo::state("x1", DimVector::DIMENSIONLESS),
                ],
                inputs: vec![],
                time_dim: DimVector::DIMENSIONLESS,
                constants: false,
                literals: vec![],
            },
            &[],
            1,
            1,
        )
        .unwrap();
        let mut rng = stream(7, Stream::Proposals, 0);
        let n = 10_000;
        let mut count_x0 = 0usize;
        for _ in 0..n {
            let (t, _) = sample(&g, 0, &mut rng);
            if t.print() == "x0" {
                count_x0 += 1;
            }
        }
        let freq = count_x0 as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn log_prior_replay_matches_sampled_prior() {
        let g = small_grammar();
        let mut rng = stream(3, Stream::Proposals, 0);
        for _ in 0..500 {
            let (tree, lp) = sample(&g, 0, &mut rng);
            let replayed = log_prior_of(&g, &tree, 0)
                .unwrap_or_else(|| panic!("underivable sample {}", tree.print()));
            assert!(
                (replayed - lp).abs() < 1e-12,
                "prior mismatch for {}: {} vs {}",
                tree.print(),
                lp,
                replayed
            );
        }
    }

    #[test]
    fn samples_respect_depth_budget() {
        let g = small_grammar();
        let mut rng = stream(9, Stream::Proposals, 0);
        for _ in 0..2000 {
            let (tree, _) = sample(&g, 0, &mut rng);
            assert!(tree.depth() <= 4);
        }
    }

    #[test]
    fn three_production_distribution_matches_priors_chi_squared() {
        // one NT with three terminal productions, uniform priors
        let g = build_unconstrained(
            Vocabulary {
                states: vec![
                    crate::grammar::build::VariableInfo::state("x0", DimVector::DIMENSIONLESS),
                    crate::grammar::build::VariableInfo::state("x1", DimVector::DIMENSIONLESS),
                    crate::grammar::build::VariableInfo::state("x2", DimVector::DIMENSIONLESS),
                ],
                inputs: vec![],
                time_dim: DimVector::DIMENSIONLESS,
                constants: false,
                literals: vec![],
            },
            &[],
            1,
            1,
        )
        .unwrap();
        let mut rng = stream(11, Stream::Proposals, 0);
        let n = 10_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (t, _) = sample(&g, 0, &mut rng);
            match t.print().as_str() {
                "x0" => counts[0] += 1,
                "x1" => counts[1] += 1,
                _ => counts[2] += 1,
            }
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-squared with 2 dof, p > 0.01 requires statistic < 9.21
        assert!(chi2 < 9.21, "chi2 = {chi2}, counts {counts:?}");
    }
}
