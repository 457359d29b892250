//! Parser for the deterministic textual form of differential polynomials.
//!
//! Grammar (round-trips with the `Display` impls):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' int)?
//! atom   := integer | ident | 'Ix' '(' expr ')' | 'It' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers resolve against a [`SymbolTable`]: either a parameter or a jet
//! written as `base`, `base_xxt`, etc.

use std::collections::BTreeMap;

use crate::scalar::Scalar;

use super::{bases, d_t_n, d_x_n, int_t, int_x, DiffExpr, DiffRingError, JetBase};

/// Resolves identifiers while parsing.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    jets: BTreeMap<String, JetBase>,
    params: Vec<String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable::default()
    }

    /// Table with the bases and parameters used by the one-field pair:
    /// jets w, u, sigma, phi, psi, a1, alpha(t), beta(t), the coordinate x,
    /// and parameters b3, a2, lambda, c1..c4.
    pub fn standard() -> Self {
        let mut t = SymbolTable::new();
        for b in [
            bases::w(),
            bases::u(),
            bases::sigma(),
            bases::phi(),
            bases::psi(),
            bases::a1(),
            bases::alpha(),
            bases::beta(),
            bases::x(),
        ] {
            t.register_jet(b);
        }
        for p in ["b3", "a2", "lambda", "c1", "c2", "c3", "c4"] {
            t.register_param(p);
        }
        t
    }

    pub fn register_jet(&mut self, base: JetBase) {
        self.jets.insert(base.name().to_string(), base);
    }

    pub fn register_param(&mut self, name: &str) {
        if !self.params.iter().any(|p| p == name) {
            self.params.push(name.to_string());
        }
    }

    fn lookup_jet(&self, name: &str) -> Option<&JetBase> {
        self.jets.get(name)
    }

    fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Tok>, DiffRingError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                chars.next();
            }
            '+' => {
                chars.next();
                out.push(Tok::Plus);
            }
            '-' => {
                chars.next();
                out.push(Tok::Minus);
            }
            '*' => {
                chars.next();
                out.push(Tok::Star);
            }
            '/' => {
                chars.next();
                out.push(Tok::Slash);
            }
            '^' => {
                chars.next();
                out.push(Tok::Caret);
            }
            '(' => {
                chars.next();
                out.push(Tok::LParen);
            }
            ')' => {
                chars.next();
                out.push(Tok::RParen);
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let n: i64 = s
                    .parse()
                    .map_err(|_| DiffRingError::Parse(format!("integer out of range: {s}")))?;
                out.push(Tok::Int(n));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(s));
            }
            other => {
                return Err(DiffRingError::Parse(format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    table: &'a SymbolTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), DiffRingError> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(DiffRingError::Parse(format!("expected {tok:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<DiffExpr, DiffRingError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.next();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<DiffExpr, DiffRingError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    acc = acc.mul(&self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.next();
                    let rhs = self.factor()?;
                    let s = rhs.as_scalar().ok_or_else(|| {
                        DiffRingError::Parse("division by a jet expression".into())
                    })?;
                    if s.is_zero() {
                        return Err(DiffRingError::Parse("division by zero".into()));
                    }
                    acc = acc.scale(&s.inv());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<DiffExpr, DiffRingError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(self.factor()?.neg());
        }
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.next();
                true
            } else {
                false
            };
            let e = match self.next() {
                Some(Tok::Int(n)) => n,
                other => {
                    return Err(DiffRingError::Parse(format!(
                        "expected integer exponent, found {other:?}"
                    )))
                }
            };
            let e = if neg { -e } else { e };
            if e >= 0 {
                return Ok(base.pow(e as u32));
            }
            // negative power: only a single pure base jet qualifies
            let mut terms = base.terms();
            match (terms.next(), terms.next()) {
                (Some((m, s)), None) if s.is_one() && m.factors().len() == 1 => {
                    let (v, ve) = &m.factors()[0];
                    if *ve == 1 && v.is_base() {
                        return Ok(DiffExpr::base_pow(v.base().clone(), e as i32));
                    }
                    Err(DiffRingError::Parse("negative power of a non-base jet".into()))
                }
                _ => Err(DiffRingError::Parse("negative power of a compound expression".into())),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<DiffExpr, DiffRingError> {
        match self.next() {
            Some(Tok::Int(n)) => Ok(DiffExpr::from_int(n)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) if name == "Ix" || name == "It" => {
                self.expect(Tok::LParen)?;
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                let res = if name == "Ix" { int_x(&inner) } else { int_t(&inner) };
                res.map_err(|e| DiffRingError::Parse(format!("inside {name}(..): {e}")))
            }
            Some(Tok::Ident(name)) => self.resolve(&name),
            other => Err(DiffRingError::Parse(format!("unexpected token {other:?}"))),
        }
    }

    fn resolve(&self, name: &str) -> Result<DiffExpr, DiffRingError> {
        if let Some((head, tail)) = name.split_once('_') {
            let base = self.table.lookup_jet(head).ok_or_else(|| {
                DiffRingError::Parse(format!("unknown jet base `{head}` in `{name}`"))
            })?;
            let mut xo = 0u32;
            let mut to = 0u32;
            for c in tail.chars() {
                match c {
                    'x' => xo += 1,
                    't' => to += 1,
                    other => {
                        return Err(DiffRingError::Parse(format!(
                            "invalid derivative suffix `{other}` in `{name}`"
                        )))
                    }
                }
            }
            if tail.is_empty() {
                return Err(DiffRingError::Parse(format!("empty derivative suffix in `{name}`")));
            }
            let e = d_t_n(&d_x_n(&DiffExpr::base(base.clone()), xo), to);
            return Ok(e);
        }
        if let Some(base) = self.table.lookup_jet(name) {
            return Ok(DiffExpr::base(base.clone()));
        }
        if self.table.is_param(name) {
            return Ok(DiffExpr::scalar(Scalar::param(name)));
        }
        Err(DiffRingError::Parse(format!("unknown symbol `{name}`")))
    }
}

/// Parse an expression against a symbol table.
pub fn parse_expr(src: &str, table: &SymbolTable) -> Result<DiffExpr, DiffRingError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, table };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(DiffRingError::Parse(format!(
            "trailing input at token {:?}",
            p.toks.get(p.pos)
        )));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffring::{d_x, JetVar};

    fn parse(s: &str) -> DiffExpr {
        parse_expr(s, &SymbolTable::standard()).unwrap()
    }

    #[test]
    fn parses_the_documented_shape() {
        let e = parse("(3*b3/(2*a2))*w + alpha");
        let w_coeff = Scalar::from_int(3)
            .mul(&Scalar::param("b3"))
            .div(&Scalar::from_int(2).mul(&Scalar::param("a2")));
        let want = DiffExpr::base(bases::w())
            .scale(&w_coeff)
            .add(&DiffExpr::base(bases::alpha()));
        assert_eq!(e, want);
    }

    #[test]
    fn jet_suffixes_and_antiderivatives() {
        let e = parse("w_xt + Ix(w_t)");
        let want = DiffExpr::jet(JetVar::new(bases::w(), 1, 1)).add(&DiffExpr::jet(
            JetVar::with_antider(bases::w(), 0, 1, 1, 0),
        ));
        assert_eq!(e, want);
    }

    #[test]
    fn round_trip_is_exact() {
        let samples = [
            "(3*b3/(2*a2))*w + alpha",
            "w_xx + 2*sigma*sigma_x",
            "(-5)*w + (1/2)*u_t",
            "Ix(w_t) + Ix(Ix(w))",
            "phi_x*phi^-1",
            "w^2*sigma_x + x",
        ];
        for s in samples {
            let e = parse(s);
            let printed = e.to_string();
            let back = parse(&printed);
            assert_eq!(e, back, "round trip failed for `{s}` -> `{printed}`");
        }
    }

    #[test]
    fn unknown_symbols_are_rejected() {
        assert!(parse_expr("zeta + 1", &SymbolTable::standard()).is_err());
    }

    #[test]
    fn derivative_of_parsed_antiderivative() {
        let e = parse("Ix(w)");
        assert_eq!(d_x(&e), parse("w"));
    }
}
