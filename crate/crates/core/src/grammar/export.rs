//! Grammar export for the external-proposer protocol.
//!
//! The export is a plain JSON description of the vocabulary, terminals,
//! nonterminals, and productions with priors; external proposers use it to
//! generate candidate S-expressions that the engine then re-validates.

use serde_json::{json, Value};

use super::{ParityReq, Rhs, TypedGrammar};

fn parity_str(p: super::Parity) -> &'static str {
    match p {
        super::Parity::Odd => "odd",
        super::Parity::Even => "even",
        super::Parity::NoParity => "none",
    }
}

pub fn export_json(g: &TypedGrammar) -> Value {
    let terminals: Vec<Value> = g
        .terminals
        .iter()
        .map(|t| {
            json!({
                "name": t.name,
                "sexpr": t.fragment.print(),
                "dim": t.ty.dim.0,
                "parity": parity_str(t.ty.parity),
            })
        })
        .collect();
    let nonterminals: Vec<Value> = g
        .nts
        .iter()
        .enumerate()
        .map(|(i, nt)| {
            let parity = match nt.key.parity {
                ParityReq::Any => "any".to_string(),
                ParityReq::Exact(p) => parity_str(p).to_string(),
            };
            let prods: Vec<Value> = nt
                .prods
                .iter()
                .map(|p| match &p.rhs {
                    Rhs::Terminal(ti) => json!({
                        "terminal": g.terminals[*ti].name,
                        "prior": p.prior,
                    }),
                    Rhs::Compound { op, children } => json!({
                        "op": op.symbol(),
                        "children": children,
                        "prior": p.prior,
                    }),
                })
                .collect();
            json!({
                "id": i,
                "dim": nt.key.dim.0,
                "parity": parity,
                "productions": prods,
            })
        })
        .collect();
    json!({
        "operators": g.operators.iter().map(|o| o.symbol()).collect::<Vec<_>>(),
        "terminals": terminals,
        "nonterminals": nonterminals,
        "starts": g.starts,
        "max_depth": g.max_depth,
        "untyped": g.untyped,
    })
}

#[cfg(test)]
mod tests {
    use crate::expr::Op;
    use crate::grammar::build::{build, SymmetrySpec, Vocabulary};
    use crate::grammar::DimVector;

    #[test]
    fn export_names_every_production_and_priors_sum_to_one() {
        let g = build(
            Vocabulary::dimensionless(2, 0),
            &SymmetrySpec::unconstrained(),
            &[Op::Add, Op::Mul, Op::Sin],
            &[DimVector::DIMENSIONLESS],
            4,
        )
        .unwrap();
        let v = g.export_json();
        assert!(v["nonterminals"].as_array().unwrap().len() >= 1);
        for nt in v["nonterminals"].as_array().unwrap() {
            let sum: f64 = nt["productions"]
                .as_array()
                .unwrap()
                .iter()
                .map(|p| p["prior"].as_f64().unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-9, "priors sum to {sum}");
        }
    }
}
