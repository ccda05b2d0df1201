//! Text syntax for exact scalars.
//!
//! Atoms: integers, `z` (ζ = e^{iπ/6}), `w` (ω), `i`, `sqrt3`, `pi`.
//! Operators: `+ - * / ^` and parentheses, e.g. `-4/3*i*pi` or `(1/2 - z^3)*pi^-1`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{CycloRational, PiGraded};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let t: String = cs[st..i].iter().collect();
            out.push(Tok::Int(t.parse::<BigInt>().map_err(|e| e.to_string())?));
        } else if c.is_ascii_alphabetic() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(alloc::format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<PiGraded, String> {
        let mut acc = match self.peek_op() {
            Some('+') => {
                self.pos += 1;
                self.term()?
            }
            Some('-') => {
                self.pos += 1;
                -self.term()?
            }
            _ => self.term()?,
        };
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let t = self.term()?;
            acc = if op == '+' { acc + t } else { acc - t };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<PiGraded, String> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let f = self.unary()?;
            acc = if op == '*' {
                acc * f
            } else {
                let inv = f.inv().ok_or("division by zero or by a non-monomial")?;
                acc * inv
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<PiGraded, String> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<PiGraded, String> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let neg = if self.peek_op() == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let e: u32 = match self.toks.get(self.pos) {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                u32::try_from(n).map_err(|_| "exponent too large")?
            }
            _ => return Err("expected integer exponent".into()),
        };
        let b = if neg { base.inv().ok_or("negative power of a non-monomial")? } else { base };
        let mut r = PiGraded::one();
        for _ in 0..e {
            r = &r * &b;
        }
        Ok(r)
    }

    fn atom(&mut self) -> Result<PiGraded, String> {
        let t = self.toks.get(self.pos).cloned().ok_or("unexpected end of input")?;
        self.pos += 1;
        match t {
            Tok::Int(n) => Ok(CycloRational::from_rational(BigRational::from_integer(n)).into()),
            Tok::Ident(id) => match id.as_str() {
                "z" => Ok(CycloRational::zeta().into()),
                "w" => Ok(CycloRational::omega().into()),
                "i" => Ok(CycloRational::i().into()),
                "sqrt3" => Ok(CycloRational::sqrt3().into()),
                "pi" => Ok(PiGraded::pi()),
                _ => Err(alloc::format!("unknown symbol '{id}'")),
            },
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => Err(alloc::format!("unexpected '{c}'")),
        }
    }
}

/// Parse an exact scalar expression.
pub fn parse_pigraded(s: &str) -> Result<PiGraded, String> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err("empty expression".into());
    }
    let mut p = Parser { toks, pos: 0 };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err("trailing input".into());
    }
    Ok(v)
}

/// Parse an expression that must have π-degree zero.
pub fn parse_cyclo(s: &str) -> Result<CycloRational, String> {
    let v = parse_pigraded(s)?;
    if v.is_zero() {
        return Ok(CycloRational::zero());
    }
    match v.as_monomial() {
        Some((c, 0)) => Ok(c.clone()),
        _ => Err("expression is not free of pi".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn display_round_trips() {
        let xs = [
            CycloRational::ratio(-4, 3) * CycloRational::i(),
            CycloRational::omega() + CycloRational::ratio(7, 5),
            CycloRational::from_ints([3, -2, 1, 9]),
        ];
        for x in xs {
            assert_eq!(parse_cyclo(&format!("{x}")).unwrap(), x);
            let p = PiGraded::monomial(x.clone(), 1) + PiGraded::monomial(x.clone(), -2);
            assert_eq!(parse_pigraded(&format!("{p}")).unwrap(), p);
        }
    }

    #[test]
    fn symbolic_forms() {
        assert_eq!(parse_cyclo("w^3").unwrap(), CycloRational::one());
        assert_eq!(parse_cyclo("sqrt3*sqrt3/3").unwrap(), CycloRational::one());
        assert_eq!(parse_cyclo("-(1/2) + i*sqrt3/2").unwrap(), CycloRational::omega());
        let bm = parse_pigraded("-4/3*i*pi").unwrap();
        assert_eq!(bm.degree(), Some(1));
        assert!(parse_cyclo("pi").is_err());
        assert!(parse_cyclo("q").is_err());
        assert!(parse_cyclo("1/(1+pi)").is_err());
    }
}
