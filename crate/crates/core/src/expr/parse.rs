//! S-expression parser.
//!
//! Grammar: `expr := atom | '(' op expr+ ')'` with atoms `x<i>`, `u<i>`, `t`,
//! `c<i>`, and rational literals. Literals are decimal (`2`, `-0.25`) or, for
//! exact round-tripping of folded values, explicit fractions (`1/3`). Errors
//! carry the byte offset of the offending token.

use num_rational::Rational64;

use super::{ExprError, ExprTree, Leaf, Op};

struct Token<'a> {
    text: &'a str,
    offset: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
        } else if b == b'(' || b == b')' {
            tokens.push(Token {
                text: &text[i..i + 1],
                offset: i,
            });
            i += 1;
        } else {
            let start = i;
            while i < bytes.len()
                && !bytes[i].is_ascii_whitespace()
                && bytes[i] != b'('
                && bytes[i] != b')'
            {
                i += 1;
            }
            tokens.push(Token {
                text: &text[start..i],
                offset: start,
            });
        }
    }
    tokens
}

fn parse_index(s: &str) -> Option<usize> {
    if s.len() > 1 && s.starts_with('0') {
        // reject zero-padded indices so print/parse round-trips
        return None;
    }
    s.parse().ok()
}

fn parse_literal(s: &str, offset: usize) -> Option<Result<Rational64, ExprError>> {
    let body = s.strip_prefix('-').unwrap_or(s);
    if body.is_empty() || !body.chars().next().unwrap().is_ascii_digit() {
        return None;
    }
    let overflow = || ExprError::LiteralOverflow { offset };
    if let Some((num, den)) = s.split_once('/') {
        let (num, den) = match (num.parse::<i64>(), den.parse::<i64>()) {
            (Ok(n), Ok(d)) if d != 0 => (n, d),
            (Err(_), _) | (_, Err(_)) => return Some(Err(overflow())),
            _ => return None,
        };
        return Some(Ok(Rational64::new(num, den)));
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let num: i64 = match digits.parse() {
        Ok(n) => n,
        Err(_) => return Some(Err(overflow())),
    };
    let den = 10i64.checked_pow(frac_part.len() as u32);
    match den {
        Some(d) => Some(Ok(Rational64::new(num, d))),
        None => Some(Err(overflow())),
    }
}

fn parse_atom(tok: &Token<'_>) -> Result<ExprTree, ExprError> {
    let s = tok.text;
    if s == "t" {
        return Ok(ExprTree::Leaf(Leaf::Time));
    }
    for (prefix, build) in [
        ("x", Leaf::State as fn(usize) -> Leaf),
        ("u", Leaf::Input as fn(usize) -> Leaf),
        ("c", Leaf::Const as fn(usize) -> Leaf),
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            if let Some(idx) = parse_index(rest) {
                return Ok(ExprTree::Leaf(build(idx)));
            }
        }
    }
    if let Some(lit) = parse_literal(s, tok.offset) {
        return lit.map(|r| ExprTree::Leaf(Leaf::Lit(r)));
    }
    Err(ExprError::UnknownSymbol {
        token: s.to_string(),
        offset: tok.offset,
    })
}

fn parse_expr<'a>(
    tokens: &[Token<'a>],
    pos: &mut usize,
    text_len: usize,
) -> Result<ExprTree, ExprError> {
    let tok = tokens.get(*pos).ok_or(ExprError::Unbalanced { offset: text_len })?;
    if tok.text == "(" {
        let open_offset = tok.offset;
        *pos += 1;
        let head = tokens.get(*pos).ok_or(ExprError::Unbalanced { offset: text_len })?;
        let op = Op::from_symbol(head.text).ok_or_else(|| ExprError::UnknownSymbol {
            token: head.text.to_string(),
            offset: head.offset,
        })?;
        *pos += 1;
        let mut children = Vec::new();
        loop {
            match tokens.get(*pos) {
                None => return Err(ExprError::Unbalanced { offset: text_len }),
                Some(t) if t.text == ")" => {
                    *pos += 1;
                    break;
                }
                Some(_) => children.push(parse_expr(tokens, pos, text_len)?),
            }
        }
        if children.len() != op.arity() {
            return Err(ExprError::ArityMismatch {
                op: op.symbol().to_string(),
                expected: op.arity(),
                got: children.len(),
                offset: open_offset,
            });
        }
        Ok(ExprTree::Node { op, children })
    } else if tok.text == ")" {
        Err(ExprError::Unbalanced { offset: tok.offset })
    } else {
        let atom = parse_atom(tok)?;
        *pos += 1;
        Ok(atom)
    }
}

/// Parse one S-expression; the whole input must be consumed.
pub fn parse_sexpr(text: &str) -> Result<ExprTree, ExprError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut pos = 0;
    let tree = parse_expr(&tokens, &mut pos, text.len())?;
    if pos != tokens.len() {
        return Err(ExprError::Trailing {
            offset: tokens[pos].offset,
        });
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_basic_forms() {
        let e = parse_sexpr("(+ x0 (* 2 x1))").unwrap();
        assert_eq!(e.complexity(), 5);
        assert!(matches!(e, ExprTree::Node { op: Op::Add, .. }));

        let e = parse_sexpr("(sin x0)").unwrap();
        assert_eq!(e.complexity(), 2);
    }

    #[test]
    fn unbalanced_input_reports_offset() {
        let err = parse_sexpr("(+ x0").unwrap_err();
        assert_eq!(err, ExprError::Unbalanced { offset: 5 });
        let err = parse_sexpr(")").unwrap_err();
        assert_eq!(err, ExprError::Unbalanced { offset: 0 });
    }

    #[test]
    fn arity_and_symbol_errors_carry_offsets() {
        let err = parse_sexpr("(sin x0 x1)").unwrap_err();
        assert!(matches!(err, ExprError::ArityMismatch { expected: 1, got: 2, .. }));
        let err = parse_sexpr("(foo x0)").unwrap_err();
        assert_eq!(
            err,
            ExprError::UnknownSymbol {
                token: "foo".into(),
                offset: 1
            }
        );
    }

    #[test]
    fn literals_parse_exactly() {
        let e = parse_sexpr("-1.25").unwrap();
        assert_eq!(e, ExprTree::Leaf(Leaf::Lit(Rational64::new(-5, 4))));
        let e = parse_sexpr("1/3").unwrap();
        assert_eq!(e, ExprTree::Leaf(Leaf::Lit(Rational64::new(1, 3))));
    }

    #[test]
    fn print_parse_round_trip() {
        for text in ["(+ x0 (* 2 x1))", "(sin (+ t c0))", "(/ u1 0.5)", "(pow3 x2)"] {
            let e = parse_sexpr(text).unwrap();
            assert_eq!(parse_sexpr(&e.print()).unwrap(), e);
        }
    }
}
