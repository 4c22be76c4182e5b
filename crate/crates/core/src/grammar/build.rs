//! Grammar construction from a typed vocabulary and a symmetry specification.
//!
//! The production table realizes the type system over a bounded set of
//! intermediate types (iterated to the depth limit, exponents capped); it is
//! what sampling and the JSON export use. Enumeration and admission checks run
//! directly on the type system, so soundness never depends on the caps.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{
    DimVector, GrammarError, InvarianceClass, Nonterminal, NtKey, Parity, ParityReq, PhysType,
    Production, Rhs, TerminalDef, TypedGrammar,
};
use crate::expr::{ExprTree, Leaf, Op};

/// Declared typing of one variable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    pub dim: DimVector,
    pub parity: Parity,
    pub invariance: InvarianceClass,
}

impl VariableInfo {
    /// A state variable: odd under sign flip, Cartesian.
    pub fn state(name: impl Into<String>, dim: DimVector) -> Self {
        VariableInfo {
            name: name.into(),
            dim,
            parity: Parity::Odd,
            invariance: InvarianceClass::Unrestricted,
        }
    }

    /// An external input: unaffected by state sign flip.
    pub fn input(name: impl Into<String>, dim: DimVector) -> Self {
        VariableInfo {
            name: name.into(),
            dim,
            parity: Parity::Even,
            invariance: InvarianceClass::Unrestricted,
        }
    }
}

/// Leaf typing for a problem instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocabulary {
    pub states: Vec<VariableInfo>,
    pub inputs: Vec<VariableInfo>,
    /// Dimension of the time symbol (zero after nondimensionalization).
    pub time_dim: DimVector,
    /// Whether the free-constant terminal `c` is available.
    pub constants: bool,
    /// Rational literal pool offered as terminals.
    pub literals: Vec<Rational64>,
}

impl Vocabulary {
    /// All-dimensionless vocabulary with `d` states, `q` inputs, and a
    /// constant terminal — the shape every post-nondimensionalization run
    /// uses.
    pub fn dimensionless(d: usize, q: usize) -> Self {
        Vocabulary {
            states: (0..d)
                .map(|i| VariableInfo::state(format!("x{i}"), DimVector::DIMENSIONLESS))
                .collect(),
            inputs: (0..q)
                .map(|i| VariableInfo::input(format!("u{i}"), DimVector::DIMENSIONLESS))
                .collect(),
            time_dim: DimVector::DIMENSIONLESS,
            constants: true,
            literals: Vec::new(),
        }
    }

    pub fn leaf_type(&self, leaf: &Leaf) -> Result<PhysType, super::TypeError> {
        match leaf {
            Leaf::State(i) => self
                .states
                .get(*i)
                .map(|v| PhysType {
                    dim: v.dim,
                    parity: v.parity,
                    invariance: v.invariance,
                })
                .ok_or(super::TypeError::UnknownVariable('x', *i)),
            Leaf::Input(i) => self
                .inputs
                .get(*i)
                .map(|v| PhysType {
                    dim: v.dim,
                    parity: v.parity,
                    invariance: v.invariance,
                })
                .ok_or(super::TypeError::UnknownVariable('u', *i)),
            Leaf::Time => Ok(PhysType {
                dim: self.time_dim,
                parity: Parity::Even,
                invariance: InvarianceClass::Scalar,
            }),
            Leaf::Const(_) | Leaf::Lit(_) => Ok(PhysType::dimensionless_scalar()),
        }
    }
}

/// Rotation group to enforce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rotational {
    None,
    SO2,
    SO3,
}

/// Symmetry constraints for one problem instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetrySpec {
    /// Required parity per output component (`None` entries unconstrained).
    pub enforce_parity: Vec<Option<Parity>>,
    pub rotational: Rotational,
    /// Autonomous systems have no explicit time dependence.
    pub autonomous: bool,
    /// Known forcing frequency (rad per time unit); only for non-autonomous
    /// systems, which then get `sin`/`cos` forcing terminals instead of a
    /// bare time leaf.
    pub forcing_frequency: Option<f64>,
    /// (position state index, velocity state index) per particle; with two or
    /// more declared particles, paired leaves are replaced by relative
    /// differences.
    pub galilean_pairs: Vec<(usize, usize)>,
}

impl SymmetrySpec {
    pub fn unconstrained() -> Self {
        SymmetrySpec {
            enforce_parity: Vec::new(),
            rotational: Rotational::None,
            autonomous: true,
            forcing_frequency: None,
            galilean_pairs: Vec::new(),
        }
    }

    pub fn autonomous_odd(n_components: usize) -> Self {
        SymmetrySpec {
            enforce_parity: vec![Some(Parity::Odd); n_components],
            rotational: Rotational::None,
            autonomous: true,
            forcing_frequency: None,
            galilean_pairs: Vec::new(),
        }
    }
}

const TYPE_CAP: usize = 4096;
/// Intermediate-type exponent cap for the production table (see module docs).
const EXP_CAP: i32 = 12;

fn fragment_type(vocab: &Vocabulary, frag: &ExprTree) -> Result<PhysType, super::TypeError> {
    match frag {
        ExprTree::Leaf(l) => vocab.leaf_type(l),
        ExprTree::Node { op, children } => {
            let tys = children
                .iter()
                .map(|c| fragment_type(vocab, c))
                .collect::<Result<Vec<_>, _>>()?;
            super::propagate_type(*op, &tys)
        }
    }
}

fn invariant_fragments(vocab: &Vocabulary, group: Rotational) -> Vec<(String, ExprTree)> {
    let d = vocab.states.len();
    let mut frags = Vec::new();
    // |x|^2 over the whole state vector
    if d >= 1 {
        let mut terms: Vec<ExprTree> = (0..d)
            .map(|i| ExprTree::node(Op::Pow2, vec![ExprTree::state(i)]))
            .collect();
        let mut acc = terms.remove(0);
        for t in terms {
            acc = ExprTree::node(Op::Add, vec![acc, t]);
        }
        frags.push(("normsq_x".to_string(), acc));
    }
    let q = vocab.inputs.len();
    let dim_needed = match group {
        Rotational::SO2 => 2,
        Rotational::SO3 => 3,
        Rotational::None => return frags,
    };
    if q == d && d == dim_needed {
        // x . u
        let mut terms: Vec<ExprTree> = (0..d)
            .map(|i| {
                ExprTree::node(
                    Op::Mul,
                    vec![ExprTree::state(i), ExprTree::leaf(Leaf::Input(i))],
                )
            })
            .collect();
        let mut acc = terms.remove(0);
        for t in terms {
            acc = ExprTree::node(Op::Add, vec![acc, t]);
        }
        frags.push(("dot_xu".to_string(), acc));
        // |x × u|^2 : planar pseudo-scalar squared for SO2, cross-norm
        // squared for SO3
        let cross_term = |i: usize, j: usize| {
            ExprTree::node(
                Op::Sub,
                vec![
                    ExprTree::node(
                        Op::Mul,
                        vec![ExprTree::state(i), ExprTree::leaf(Leaf::Input(j))],
                    ),
                    ExprTree::node(
                        Op::Mul,
                        vec![ExprTree::state(j), ExprTree::leaf(Leaf::Input(i))],
                    ),
                ],
            )
        };
        let crosssq = match group {
            Rotational::SO2 => ExprTree::node(Op::Pow2, vec![cross_term(0, 1)]),
            Rotational::SO3 => {
                let c0 = ExprTree::node(Op::Pow2, vec![cross_term(1, 2)]);
                let c1 = ExprTree::node(Op::Pow2, vec![cross_term(2, 0)]);
                let c2 = ExprTree::node(Op::Pow2, vec![cross_term(0, 1)]);
                ExprTree::node(Op::Add, vec![ExprTree::node(Op::Add, vec![c0, c1]), c2])
            }
            Rotational::None => unreachable!(),
        };
        frags.push(("crosssq_xu".to_string(), crosssq));
    }
    frags
}

/// Build the terminal table implied by the vocabulary and symmetry spec.
fn build_terminals(
    vocab: &Vocabulary,
    spec: &SymmetrySpec,
) -> Result<Vec<TerminalDef>, GrammarError> {
    let mut terminals: Vec<(String, ExprTree)> = Vec::new();
    let invariance_on = spec.rotational != Rotational::None;

    if invariance_on {
        terminals.extend(invariant_fragments(vocab, spec.rotational));
    } else {
        // Galilean replacement only applies with at least two declared
        // particles; otherwise there is nothing to difference.
        let galilean = spec.galilean_pairs.len() >= 2;
        let paired: BTreeSet<usize> = if galilean {
            spec.galilean_pairs
                .iter()
                .flat_map(|&(p, v)| [p, v])
                .collect()
        } else {
            BTreeSet::new()
        };
        for (i, v) in vocab.states.iter().enumerate() {
            if !paired.contains(&i) {
                terminals.push((v.name.clone(), ExprTree::state(i)));
            }
        }
        if galilean {
            for a in 0..spec.galilean_pairs.len() {
                for b in (a + 1)..spec.galilean_pairs.len() {
                    let (pa, va) = spec.galilean_pairs[a];
                    let (pb, vb) = spec.galilean_pairs[b];
                    terminals.push((
                        format!("dpos_{pa}_{pb}"),
                        ExprTree::node(Op::Sub, vec![ExprTree::state(pa), ExprTree::state(pb)]),
                    ));
                    terminals.push((
                        format!("dvel_{va}_{vb}"),
                        ExprTree::node(Op::Sub, vec![ExprTree::state(va), ExprTree::state(vb)]),
                    ));
                }
            }
        }
        for (i, v) in vocab.inputs.iter().enumerate() {
            terminals.push((v.name.clone(), ExprTree::leaf(Leaf::Input(i))));
        }
    }

    match (spec.autonomous, spec.forcing_frequency) {
        (true, Some(_)) => {
            return Err(GrammarError::InvalidSpec(
                "forcing frequency declared for an autonomous system".into(),
            ))
        }
        (true, None) => {}
        (false, Some(omega)) => {
            let w = Rational64::approximate_float(omega).ok_or_else(|| {
                GrammarError::InvalidSpec("forcing frequency is not representable".into())
            })?;
            let wt = ExprTree::node(
                Op::Mul,
                vec![ExprTree::Leaf(Leaf::Lit(w)), ExprTree::Leaf(Leaf::Time)],
            );
            terminals.push(("sin_wt".into(), ExprTree::node(Op::Sin, vec![wt.clone()])));
            terminals.push(("cos_wt".into(), ExprTree::node(Op::Cos, vec![wt])));
        }
        (false, None) => {
            terminals.push(("t".into(), ExprTree::Leaf(Leaf::Time)));
        }
    }

    if vocab.constants {
        terminals.push(("c".into(), ExprTree::constant(0)));
    }
    for l in &vocab.literals {
        terminals.push((
            format!("lit_{l}"),
            ExprTree::Leaf(Leaf::Lit(*l)),
        ));
    }

    // type every terminal; skip fragments the vocabulary cannot type
    // (e.g. a dot product over mismatched units)
    let mut defs = Vec::new();
    for (name, frag) in terminals {
        match fragment_type(vocab, &frag) {
            Ok(ty) => defs.push(TerminalDef { name, fragment: frag, ty }),
            Err(_) => {}
        }
    }
    Ok(defs)
}

fn within_caps(d: &DimVector) -> bool {
    d.0.iter().all(|e| e.abs() <= EXP_CAP)
}

/// Reachable value types for the production table: (dim, parity) pairs for
/// parity-constrained components, dims alone otherwise.
struct Closure {
    dims: BTreeSet<DimVector>,
    typed: BTreeSet<(DimVector, Parity)>,
}

fn closure(
    terminals: &[TerminalDef],
    operators: &[Op],
    max_depth: usize,
    want_typed: bool,
) -> Result<Closure, GrammarError> {
    let mut dims: BTreeSet<DimVector> = terminals.iter().map(|t| t.ty.dim).collect();
    let mut typed: BTreeSet<(DimVector, Parity)> = terminals
        .iter()
        .filter(|t| t.ty.parity != Parity::NoParity)
        .map(|t| (t.ty.dim, t.ty.parity))
        .collect();
    for _ in 1..max_depth {
        let mut new_dims = Vec::new();
        for op in operators {
            match op {
                Op::Mul => {
                    for a in &dims {
                        for b in &dims {
                            new_dims.push(a.add(b));
                        }
                    }
                }
                Op::Div => {
                    for a in &dims {
                        for b in &dims {
                            new_dims.push(a.sub(b));
                        }
                    }
                }
                Op::Pow2 | Op::Pow3 | Op::Pow4 => {
                    for a in &dims {
                        new_dims.push(a.scale(op.power().unwrap()));
                    }
                }
                _ => {}
            }
        }
        let before = dims.len();
        dims.extend(new_dims.into_iter().filter(within_caps));
        if dims.len() > TYPE_CAP {
            return Err(GrammarError::TypeSpaceExceeded { cap: TYPE_CAP });
        }
        if want_typed {
            let mut new_typed = Vec::new();
            for op in operators {
                match op {
                    Op::Add | Op::Sub => {}
                    Op::Mul | Op::Div => {
                        for &(da, pa) in &typed {
                            for &(db, pb) in &typed {
                                let d = if *op == Op::Mul { da.add(&db) } else { da.sub(&db) };
                                new_typed.push((d, pa.mul(pb)));
                            }
                        }
                    }
                    Op::Sin => {
                        for &(d, p) in &typed {
                            if d.is_dimensionless() {
                                new_typed.push((d, p));
                            }
                        }
                    }
                    Op::Cos => {
                        if typed.iter().any(|(d, _)| d.is_dimensionless()) {
                            new_typed.push((DimVector::DIMENSIONLESS, Parity::Even));
                        }
                    }
                    Op::Exp | Op::Log => {} // no definite parity
                    Op::Pow2 | Op::Pow3 | Op::Pow4 => {
                        let n = op.power().unwrap();
                        for &(d, p) in &typed {
                            new_typed.push((d.scale(n), p.pow(n)));
                        }
                    }
                }
            }
            typed.extend(
                new_typed
                    .into_iter()
                    .filter(|(d, p)| within_caps(d) && *p != Parity::NoParity),
            );
            if typed.len() > TYPE_CAP {
                return Err(GrammarError::TypeSpaceExceeded { cap: TYPE_CAP });
            }
        }
        if dims.len() == before && !want_typed {
            break;
        }
    }
    Ok(Closure { dims, typed })
}

struct NtBuilder {
    keys: Vec<NtKey>,
    index: BTreeMap<(DimVector, Option<Parity>), usize>,
}

impl NtBuilder {
    fn new() -> Self {
        NtBuilder {
            keys: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    fn intern(&mut self, dim: DimVector, parity: Option<Parity>) -> usize {
        let map_key = (dim, parity);
        if let Some(&id) = self.index.get(&map_key) {
            return id;
        }
        let id = self.keys.len();
        self.keys.push(NtKey {
            dim,
            parity: match parity {
                None => ParityReq::Any,
                Some(p) => ParityReq::Exact(p),
            },
        });
        self.index.insert(map_key, id);
        id
    }
}

fn productions_for(
    key: &NtKey,
    cl: &Closure,
    terminals: &[TerminalDef],
    operators: &[Op],
    nts: &mut NtBuilder,
) -> Vec<Rhs> {
    let mut prods = Vec::new();
    for (ti, t) in terminals.iter().enumerate() {
        if t.ty.dim == key.dim && key.parity.accepts(t.ty.parity) {
            prods.push(Rhs::Terminal(ti));
        }
    }
    let d = key.dim;
    match key.parity {
        ParityReq::Any => {
            for op in operators {
                match op {
                    Op::Add | Op::Sub => {
                        if cl.dims.contains(&d) {
                            let c = nts.intern(d, None);
                            prods.push(Rhs::Compound {
                                op: *op,
                                children: vec![c, c],
                            });
                        }
                    }
                    Op::Mul => {
                        for d1 in cl.dims.iter() {
                            let d2 = d.sub(d1);
                            if cl.dims.contains(&d2) {
                                let c1 = nts.intern(*d1, None);
                                let c2 = nts.intern(d2, None);
                                prods.push(Rhs::Compound {
                                    op: *op,
                                    children: vec![c1, c2],
                                });
                            }
                        }
                    }
                    Op::Div => {
                        for d2 in cl.dims.iter() {
                            let d1 = d.add(d2);
                            if cl.dims.contains(&d1) {
                                let c1 = nts.intern(d1, None);
                                let c2 = nts.intern(*d2, None);
                                prods.push(Rhs::Compound {
                                    op: *op,
                                    children: vec![c1, c2],
                                });
                            }
                        }
                    }
                    Op::Sin | Op::Cos | Op::Exp | Op::Log => {
                        if d.is_dimensionless() {
                            let c = nts.intern(DimVector::DIMENSIONLESS, None);
                            prods.push(Rhs::Compound {
                                op: *op,
                                children: vec![c],
                            });
                        }
                    }
                    Op::Pow2 | Op::Pow3 | Op::Pow4 => {
                        if let Some(dc) = d.div_exact(op.power().unwrap()) {
                            if cl.dims.contains(&dc) {
                                let c = nts.intern(dc, None);
                                prods.push(Rhs::Compound {
                                    op: *op,
                                    children: vec![c],
                                });
                            }
                        }
                    }
                }
            }
        }
        ParityReq::Exact(p) => {
            let has = |d: DimVector, p: Parity| cl.typed.contains(&(d, p));
            for op in operators {
                match op {
                    Op::Add | Op::Sub => {
                        if has(d, p) {
                            let c = nts.intern(d, Some(p));
                            prods.push(Rhs::Compound {
                                op: *op,
                                children: vec![c, c],
                            });
                        }
                    }
                    Op::Mul | Op::Div => {
                        let parity_pairs: &[(Parity, Parity)] = match p {
                            Parity::Odd => &[(Parity::Odd, Parity::Even), (Parity::Even, Parity::Odd)],
                            Parity::Even => &[(Parity::Odd, Parity::Odd), (Parity::Even, Parity::Even)],
                            Parity::NoParity => &[],
                        };
                        for &(p1, p2) in parity_pairs {
                            for &(d1, q1) in cl.typed.iter() {
                                if q1 != p1 {
                                    continue;
                                }
                                let d2 = if *op == Op::Mul { d.sub(&d1) } else { d1.sub(&d) };
                                if has(d2, p2) {
                                    let c1 = nts.intern(d1, Some(p1));
                                    let c2 = nts.intern(d2, Some(p2));
                                    prods.push(Rhs::Compound {
                                        op: *op,
                                        children: vec![c1, c2],
                                    });
                                }
                            }
                        }
                    }
                    Op::Sin => {
                        if d.is_dimensionless() && has(d, p) {
                            let c = nts.intern(d, Some(p));
                            prods.push(Rhs::Compound {
                                op: *op,
                                children: vec![c],
                            });
                        }
                    }
                    Op::Cos => {
                        if d.is_dimensionless() && p == Parity::Even {
                            for cp in [Parity::Odd, Parity::Even] {
                                if has(d, cp) {
                                    let c = nts.intern(d, Some(cp));
                                    prods.push(Rhs::Compound {
                                        op: *op,
                                        children: vec![c],
                                    });
                                }
                            }
                        }
                    }
                    // exp/log never have definite parity
                    Op::Exp | Op::Log => {}
                    Op::Pow2 | Op::Pow4 => {
                        if p == Parity::Even {
                            if let Some(dc) = d.div_exact(op.power().unwrap()) {
                                for cp in [Parity::Odd, Parity::Even] {
                                    if has(dc, cp) {
                                        let c = nts.intern(dc, Some(cp));
                                        prods.push(Rhs::Compound {
                                            op: *op,
                                            children: vec![c],
                                        });
                                    }
                                }
                            }
                        }
                    }
                    Op::Pow3 => {
                        if let Some(dc) = d.div_exact(3) {
                            if has(dc, p) {
                                let c = nts.intern(dc, Some(p));
                                prods.push(Rhs::Compound {
                                    op: *op,
                                    children: vec![c],
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    prods
}

/// Build a typed grammar for output components with the given target
/// dimensions (dimensionless after rescaling; `dim(x_i) - dim(t)` in raw-unit
/// mode).
pub fn build(
    vocab: Vocabulary,
    spec: &SymmetrySpec,
    operators: &[Op],
    target_dims: &[DimVector],
    max_depth: usize,
) -> Result<TypedGrammar, GrammarError> {
    if !spec.enforce_parity.is_empty() && spec.enforce_parity.len() != target_dims.len() {
        return Err(GrammarError::InvalidSpec(format!(
            "enforce_parity has {} entries for {} output components",
            spec.enforce_parity.len(),
            target_dims.len()
        )));
    }
    let terminals = build_terminals(&vocab, spec)?;
    if terminals.is_empty() {
        return Err(GrammarError::EmptyLanguage {
            component: 0,
            max_depth,
        });
    }
    let parities: Vec<Option<Parity>> = (0..target_dims.len())
        .map(|i| spec.enforce_parity.get(i).copied().flatten())
        .collect();
    let want_typed = parities.iter().any(Option::is_some);
    let cl = closure(&terminals, operators, max_depth, want_typed)?;

    let mut nts = NtBuilder::new();
    let starts: Vec<usize> = target_dims
        .iter()
        .zip(&parities)
        .map(|(&dim, &par)| nts.intern(dim, par))
        .collect();

    // expand productions breadth-first over interned keys
    let mut prod_table: Vec<Vec<Rhs>> = Vec::new();
    let mut next = 0usize;
    while next < nts.keys.len() {
        let key = nts.keys[next];
        let prods = productions_for(&key, &cl, &terminals, operators, &mut nts);
        prod_table.push(prods);
        next += 1;
    }

    // min-depth fixpoint; unusable productions and nonterminals drop out
    let n = prod_table.len();
    let mut min_depth = vec![usize::MAX; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            for rhs in &prod_table[i] {
                let d = match rhs {
                    Rhs::Terminal(_) => 1,
                    Rhs::Compound { children, .. } => {
                        let worst = children.iter().map(|&c| min_depth[c]).max().unwrap();
                        if worst == usize::MAX {
                            continue;
                        }
                        worst + 1
                    }
                };
                if d < min_depth[i] {
                    min_depth[i] = d;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let usable = |rhs: &Rhs| -> Option<usize> {
        match rhs {
            Rhs::Terminal(_) => Some(1),
            Rhs::Compound { children, .. } => {
                let worst = children.iter().map(|&c| min_depth[c]).max().unwrap();
                (worst != usize::MAX && worst + 1 <= max_depth).then_some(worst + 1)
            }
        }
    };

    let mut grammar_nts = Vec::with_capacity(n);
    for i in 0..n {
        let prods: Vec<Production> = prod_table[i]
            .iter()
            .filter_map(|rhs| {
                usable(rhs).map(|d| Production {
                    rhs: rhs.clone(),
                    prior: 0.0,
                    min_depth: d,
                })
            })
            .collect();
        let count = prods.len();
        let mut prods = prods;
        for p in &mut prods {
            p.prior = 1.0 / count as f64;
        }
        grammar_nts.push(Nonterminal {
            key: nts.keys[i],
            prods,
            min_depth: min_depth[i],
        });
    }

    for (comp, &s) in starts.iter().enumerate() {
        if grammar_nts[s].min_depth > max_depth || grammar_nts[s].prods.is_empty() {
            return Err(GrammarError::EmptyLanguage {
                component: comp,
                max_depth,
            });
        }
    }

    Ok(TypedGrammar {
        vocab,
        operators: operators.to_vec(),
        terminals,
        max_depth,
        nts: grammar_nts,
        starts,
        rotational: spec.rotational,
        untyped: false,
    })
}

/// The unconstrained baseline grammar over the same terminals and operators:
/// a single untyped nonterminal with every production. Used to measure
/// pruning rates.
pub fn build_unconstrained(
    vocab: Vocabulary,
    operators: &[Op],
    n_components: usize,
    max_depth: usize,
) -> Result<TypedGrammar, GrammarError> {
    // terminals are the raw vocabulary: every leaf, the time symbol, and the
    // constant terminal, with no symmetry processing
    let mut terminals: Vec<TerminalDef> = Vec::new();
    for (i, v) in vocab.states.iter().enumerate() {
        terminals.push(TerminalDef {
            name: v.name.clone(),
            fragment: ExprTree::state(i),
            ty: vocab.leaf_type(&Leaf::State(i)).unwrap(),
        });
    }
    for (i, v) in vocab.inputs.iter().enumerate() {
        terminals.push(TerminalDef {
            name: v.name.clone(),
            fragment: ExprTree::leaf(Leaf::Input(i)),
            ty: vocab.leaf_type(&Leaf::Input(i)).unwrap(),
        });
    }
    if vocab.constants {
        terminals.push(TerminalDef {
            name: "c".into(),
            fragment: ExprTree::constant(0),
            ty: PhysType::dimensionless_scalar(),
        });
    }
    for l in &vocab.literals {
        terminals.push(TerminalDef {
            name: format!("lit_{l}"),
            fragment: ExprTree::Leaf(Leaf::Lit(*l)),
            ty: PhysType::dimensionless_scalar(),
        });
    }
    if terminals.is_empty() {
        return Err(GrammarError::EmptyLanguage {
            component: 0,
            max_depth,
        });
    }
    let mut prods: Vec<Production> = Vec::new();
    for ti in 0..terminals.len() {
        prods.push(Production {
            rhs: Rhs::Terminal(ti),
            prior: 0.0,
            min_depth: 1,
        });
    }
    for op in operators {
        prods.push(Production {
            rhs: Rhs::Compound {
                op: *op,
                children: vec![0; op.arity()],
            },
            prior: 0.0,
            min_depth: 2,
        });
    }
    let count = prods.len();
    for p in &mut prods {
        p.prior = 1.0 / count as f64;
    }
    Ok(TypedGrammar {
        vocab,
        operators: operators.to_vec(),
        terminals,
        max_depth,
        nts: vec![Nonterminal {
            key: NtKey {
                dim: DimVector::DIMENSIONLESS,
                parity: ParityReq::Any,
            },
            prods,
            min_depth: 1,
        }],
        starts: vec![0; n_components.max(1)],
        rotational: Rotational::None,
        untyped: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::TypeError;

    fn mech_vocab() -> Vocabulary {
        // x: position (L), v: velocity (L/T)
        Vocabulary {
            states: vec![
                VariableInfo::state("x0", DimVector([0, 1, 0, 0, 0])),
                VariableInfo::state("x1", DimVector([0, 1, -1, 0, 0])),
            ],
            inputs: vec![],
            time_dim: DimVector([0, 0, 1, 0, 0]),
            constants: false,
            literals: vec![],
        }
    }

    #[test]
    fn autonomous_grammar_has_no_time_leaf() {
        let g = build(
            Vocabulary::dimensionless(2, 0),
            &SymmetrySpec::unconstrained(),
            &[Op::Add, Op::Mul, Op::Sin],
            &[DimVector::DIMENSIONLESS; 2],
            4,
        )
        .unwrap();
        assert!(!g.time_available());
        let mut rng = crate::util::rng::stream(1, crate::util::rng::Stream::Proposals, 0);
        for _ in 0..200 {
            let (tree, _) = g.sample(0, &mut rng);
            assert!(!tree.uses_time());
        }
    }

    #[test]
    fn forced_grammar_gets_forcing_terminals_not_bare_time() {
        let mut spec = SymmetrySpec::unconstrained();
        spec.autonomous = false;
        spec.forcing_frequency = Some(2.0);
        let g = build(
            Vocabulary::dimensionless(1, 0),
            &spec,
            &[Op::Add, Op::Mul],
            &[DimVector::DIMENSIONLESS],
            4,
        )
        .unwrap();
        assert!(g.terminals.iter().any(|t| t.name == "sin_wt"));
        assert!(g.terminals.iter().any(|t| t.name == "cos_wt"));
        assert!(!g.terminals.iter().any(|t| t.name == "t"));
    }

    #[test]
    fn over_constrained_spec_reports_empty_language() {
        // odd parity required but the only terminal is even: no derivation
        let vocab = Vocabulary {
            states: vec![],
            inputs: vec![VariableInfo::input("u0", DimVector::DIMENSIONLESS)],
            time_dim: DimVector::DIMENSIONLESS,
            constants: false,
            literals: vec![],
        };
        let mut spec = SymmetrySpec::unconstrained();
        spec.enforce_parity = vec![Some(Parity::Odd)];
        let err = build(
            vocab,
            &spec,
            &[Op::Add, Op::Mul],
            &[DimVector::DIMENSIONLESS],
            4,
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::EmptyLanguage { .. }));
    }

    #[test]
    fn raw_unit_grammar_rejects_ill_typed_trees() {
        let g = build(
            mech_vocab(),
            &SymmetrySpec::unconstrained(),
            &[Op::Add, Op::Mul],
            // target L^2 T^-1, reachable as x0 * x1
            &[DimVector([0, 2, -1, 0, 0])],
            5,
        )
        .unwrap();
        let good = crate::expr::parse_sexpr("(* x0 x1)").unwrap();
        assert!(g.admits(&good, 0).is_ok());
        // right shape, wrong dimension at the root
        let wrong_dim = crate::expr::parse_sexpr("(* x1 x1)").unwrap();
        assert!(matches!(
            g.admits(&wrong_dim, 0),
            Err(TypeError::DimMismatch(_, _))
        ));
        // internally inconsistent: L + L T^-1
        let bad = crate::expr::parse_sexpr("(+ x0 x1)").unwrap();
        assert!(matches!(
            g.admits(&bad, 0),
            Err(TypeError::DimMismatch(_, _))
        ));
    }

    #[test]
    fn parity_constrained_grammar_excludes_even_roots() {
        let g = build(
            Vocabulary::dimensionless(1, 0),
            &SymmetrySpec::autonomous_odd(1),
            &[Op::Sin, Op::Pow2, Op::Add, Op::Mul],
            &[DimVector::DIMENSIONLESS],
            4,
        )
        .unwrap();
        let even_root = crate::expr::parse_sexpr("(pow2 x0)").unwrap();
        assert!(matches!(
            g.admits(&even_root, 0),
            Err(TypeError::ParityViolation { .. })
        ));
        let odd_root = crate::expr::parse_sexpr("(sin x0)").unwrap();
        assert!(g.admits(&odd_root, 0).is_ok());
    }

    #[test]
    fn galilean_pairs_replace_leaves_with_differences() {
        let vocab = Vocabulary {
            states: vec![
                VariableInfo::state("x0", DimVector::DIMENSIONLESS),
                VariableInfo::state("x1", DimVector::DIMENSIONLESS),
                VariableInfo::state("x2", DimVector::DIMENSIONLESS),
                VariableInfo::state("x3", DimVector::DIMENSIONLESS),
            ],
            inputs: vec![],
            time_dim: DimVector::DIMENSIONLESS,
            constants: true,
            literals: vec![],
        };
        let mut spec = SymmetrySpec::unconstrained();
        spec.galilean_pairs = vec![(0, 1), (2, 3)];
        let g = build(
            vocab,
            &spec,
            &[Op::Add, Op::Mul],
            &[DimVector::DIMENSIONLESS; 4],
            4,
        )
        .unwrap();
        assert!(g.terminals.iter().any(|t| t.name == "dpos_0_2"));
        assert!(g.terminals.iter().any(|t| t.name == "dvel_1_3"));
        assert!(!g.terminals.iter().any(|t| t.name == "x0"));
    }
}
