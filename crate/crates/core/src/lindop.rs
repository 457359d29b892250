//! Linear differential operators with differential-polynomial coefficients.
//!
//! An operator is an ordered coefficient vector per power of the derivation
//! `D = d/dx`. Composition expands by the Leibniz rule, so the ring is
//! associative but noncommutative. On top of that sit the differential Bell
//! polynomials, the closed-form Darboux transform of coefficients for orders
//! up to three, Ore right division (the general-order route to the same
//! transform) and the generalized Miura residual.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use thiserror::Error;

use crate::diffring::{
    bases, d_x, impose_t_flow, parse_expr, substitute_one, DiffExpr, DiffRingError, JetBase,
    JetVar, SymbolTable,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OperatorError {
    #[error("closed-form Darboux transform supports order <= 3, got {0}")]
    UnsupportedOrder(usize),
    #[error("divisor leading coefficient `{0}` is not a unit (jet-free nonzero scalar)")]
    NonInvertibleLeading(String),
    #[error("cannot divide by the zero operator")]
    ZeroDivisor,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Finite-order linear differential operator `sum_k a_k D^k`.
///
/// The zero operator has an empty coefficient vector; otherwise the leading
/// coefficient is nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinDiffOp {
    coeffs: Vec<DiffExpr>,
}

impl LinDiffOp {
    pub fn zero() -> Self {
        LinDiffOp::default()
    }

    pub fn identity() -> Self {
        LinDiffOp::from_coeffs(vec![DiffExpr::one()])
    }

    /// Build from coefficients indexed by derivative power; trims the zero tail.
    pub fn from_coeffs(mut coeffs: Vec<DiffExpr>) -> Self {
        while coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            coeffs.pop();
        }
        LinDiffOp { coeffs }
    }

    /// The bare derivation `D`.
    pub fn derivation() -> Self {
        LinDiffOp::from_coeffs(vec![DiffExpr::zero(), DiffExpr::one()])
    }

    pub fn monomial(coeff: DiffExpr, power: usize) -> Self {
        let mut coeffs = vec![DiffExpr::zero(); power];
        coeffs.push(coeff);
        LinDiffOp::from_coeffs(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Order of the operator; 0 for the zero operator by convention.
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> DiffExpr {
        self.coeffs.get(k).cloned().unwrap_or_else(DiffExpr::zero)
    }

    pub fn coeffs(&self) -> &[DiffExpr] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&DiffExpr> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k).add(&other.coeff(k))).collect();
        LinDiffOp::from_coeffs(coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LinDiffOp { coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        LinDiffOp::from_coeffs(self.coeffs.iter().map(|c| c.scale(s)).collect())
    }

    /// Coefficient-wise t-derivative (the operator's explicit time dependence).
    pub fn d_t(&self) -> Self {
        LinDiffOp::from_coeffs(self.coeffs.iter().map(crate::diffring::d_t).collect())
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let mut out: i64 = 1;
    for i in 0..k {
        out = out * (n - i) as i64 / (i + 1) as i64;
    }
    out
}

/// Operator product with Leibniz expansion `D o f = f D + f'`.
pub fn compose(l: &LinDiffOp, m: &LinDiffOp) -> LinDiffOp {
    if l.is_zero() || m.is_zero() {
        return LinDiffOp::zero();
    }
    let n = l.order() + m.order();
    let mut coeffs = vec![DiffExpr::zero(); n + 1];
    for (i, a) in l.coeffs.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in m.coeffs.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            // D^i o b = sum_k C(i,k) b^(k) D^(i-k)
            let mut bk = b.clone();
            for k in 0..=i {
                if k > 0 {
                    bk = d_x(&bk);
                    if bk.is_zero() {
                        break;
                    }
                }
                let c = a.mul(&bk).scale(&Scalar::from_int(binomial(i, k)));
                coeffs[i - k + j] = coeffs[i - k + j].add(&c);
            }
        }
    }
    LinDiffOp::from_coeffs(coeffs)
}

/// `[L, M] = L o M - M o L`.
pub fn commutator(l: &LinDiffOp, m: &LinDiffOp) -> LinDiffOp {
    compose(l, m).sub(&compose(m, l))
}

/// Apply the operator to a wave-function base symbol: `sum a_k psi_{x^k}`.
pub fn apply(l: &LinDiffOp, psi: &JetBase) -> DiffExpr {
    let mut out = DiffExpr::zero();
    for (k, a) in l.coeffs.iter().enumerate() {
        let jet = DiffExpr::jet(JetVar::new(psi.clone(), k as u32, 0));
        out = out.add(&a.mul(&jet));
    }
    out
}

static BELL_CACHE: Mutex<Vec<DiffExpr>> = Mutex::new(Vec::new());

/// Differential Bell polynomial `B_n` in sigma-jets.
///
/// `B_0 = 1`, `B_{n+1} = d_x(B_n) + sigma * B_n`; substituting
/// `sigma = phi_x/phi` turns `B_n * phi` into the n-th x-derivative of phi.
pub fn bell(n: usize) -> DiffExpr {
    let mut cache = BELL_CACHE.lock().expect("bell cache poisoned");
    if cache.is_empty() {
        cache.push(DiffExpr::one());
    }
    let sigma = DiffExpr::base(bases::sigma());
    while cache.len() <= n {
        let prev = cache.last().unwrap();
        let next = d_x(prev).add(&sigma.mul(prev));
        cache.push(next);
    }
    cache[n].clone()
}

/// The combination `sum_k a_k B_k(sigma)` for an operator's coefficients.
///
/// For a spectral operator this equals the eigenvalue on solutions; its
/// x-derivative is the exact remainder of the Darboux intertwining division.
pub fn bell_combination(l: &LinDiffOp) -> DiffExpr {
    let mut out = DiffExpr::zero();
    for (k, a) in l.coeffs.iter().enumerate() {
        out = out.add(&a.mul(&bell(k)));
    }
    out
}

/// Closed-form Darboux transform of the coefficients, orders 0..=3.
///
/// These are the quotients of the intertwining division
/// `(D - sigma) o L = L[1] o (D - sigma) + R`, written out explicitly; they
/// agree with [`ore_right_divide`] for fully symbolic coefficients. The
/// second-order case reads `a2[1] = a2`, `a1[1] = a1 + a2'`,
/// `a0[1] = a0 + a1' + 2 a2 sigma' + sigma a2'`.
pub fn darboux_transform(l: &LinDiffOp) -> Result<LinDiffOp, OperatorError> {
    if l.is_zero() {
        return Ok(LinDiffOp::zero());
    }
    let sigma = DiffExpr::base(bases::sigma());
    let sigma_x = d_x(&sigma);
    let sigma_xx = d_x(&sigma_x);
    let two = Scalar::from_int(2);
    let three = Scalar::from_int(3);
    match l.order() {
        0 => Ok(l.clone()),
        1 => {
            let (a0, a1) = (l.coeff(0), l.coeff(1));
            Ok(LinDiffOp::from_coeffs(vec![a0.add(&d_x(&a1)), a1]))
        }
        2 => {
            let (a0, a1, a2) = (l.coeff(0), l.coeff(1), l.coeff(2));
            let a2p = d_x(&a2);
            let new_a1 = a1.add(&a2p);
            let new_a0 = a0
                .add(&d_x(&a1))
                .add(&a2.mul(&sigma_x).scale(&two))
                .add(&sigma.mul(&a2p));
            Ok(LinDiffOp::from_coeffs(vec![new_a0, new_a1, a2]))
        }
        3 => {
            let (b0, b1, b2, b3) = (l.coeff(0), l.coeff(1), l.coeff(2), l.coeff(3));
            let b3p = d_x(&b3);
            let b2p = d_x(&b2);
            let new_b2 = b2.add(&b3p);
            let new_b1 = b1
                .add(&b2p)
                .add(&b3.mul(&sigma_x).scale(&three))
                .add(&sigma.mul(&b3p));
            let new_b0 = b0
                .add(&d_x(&b1))
                .add(&sigma.mul(&b2p))
                .add(&b3.mul(&sigma.mul(&sigma_x).add(&sigma_xx)).scale(&three))
                .add(&b2.mul(&sigma_x).scale(&two))
                .add(&b3p.mul(&sigma_x).scale(&two))
                .add(&b3p.mul(&sigma.mul(&sigma)));
            Ok(LinDiffOp::from_coeffs(vec![new_b0, new_b1, new_b2, b3]))
        }
        n => Err(OperatorError::UnsupportedOrder(n)),
    }
}

/// Ore right division: `n = q o d + r` with `r.order() < d.order()`.
///
/// The divisor's leading coefficient must be a unit of the coefficient ring,
/// i.e. a nonzero jet-free scalar.
pub fn ore_right_divide(
    n: &LinDiffOp,
    d: &LinDiffOp,
) -> Result<(LinDiffOp, LinDiffOp), OperatorError> {
    if d.is_zero() {
        return Err(OperatorError::ZeroDivisor);
    }
    let lead = d.leading().expect("nonzero divisor");
    let lead = lead
        .as_scalar()
        .filter(|s| !s.is_zero())
        .ok_or_else(|| OperatorError::NonInvertibleLeading(lead.to_string()))?;
    let lead_inv = Scalar::one().div(&lead);

    let mut rem = n.clone();
    let mut quot = LinDiffOp::zero();
    while !rem.is_zero() && rem.order() >= d.order() {
        let k = rem.order() - d.order();
        let c = rem.leading().expect("nonzero").scale(&lead_inv);
        let t = LinDiffOp::monomial(c, k);
        quot = quot.add(&t);
        rem = rem.sub(&compose(&t, d));
    }
    Ok((quot, rem))
}

/// Generalized Miura residual `sigma_t - d_x(sum a_k B_k(sigma))` for the
/// evolution operator `A` (Abelian case: the commutator term vanishes).
pub fn miura_residual(a: &LinDiffOp) -> DiffExpr {
    let sigma_t = DiffExpr::jet(JetVar::new(bases::sigma(), 0, 1));
    sigma_t.sub(&d_x(&bell_combination(a)))
}

/// [`miura_residual`] after substituting `sigma = phi_x/phi` and eliminating
/// `phi_t` through the evolution equation `phi_t = A phi`. Identically zero
/// for every operator `A` whose coefficients are free of sigma and phi.
pub fn miura_residual_on_eigenfunction(a: &LinDiffOp) -> Result<DiffExpr, DiffRingError> {
    let phi = bases::phi();
    let log_deriv =
        DiffExpr::jet(JetVar::new(phi.clone(), 1, 0)).mul(&DiffExpr::base_pow(phi.clone(), -1));
    let residual = miura_residual(a);
    let in_phi = substitute_one(&residual, &bases::sigma(), &log_deriv)?;
    impose_t_flow(&in_phi, &phi, &apply(a, &phi))
}

impl fmt::Display for LinDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for k in (0..self.coeffs.len()).rev() {
            let c = &self.coeffs[k];
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let d_part = match k {
                0 => String::new(),
                1 => "D".to_string(),
                _ => format!("D^{k}"),
            };
            let needs_parens = c.num_terms() > 1;
            if k == 0 {
                if needs_parens {
                    write!(f, "({c})")?;
                } else {
                    write!(f, "{c}")?;
                }
            } else if c == &DiffExpr::one() {
                write!(f, "{d_part}")?;
            } else if needs_parens {
                write!(f, "({c})*{d_part}")?;
            } else {
                write!(f, "{c}*{d_part}")?;
            }
        }
        Ok(())
    }
}

impl LinDiffOp {
    /// Parse the rendered operator form, e.g. `b3*D^3 + (w + alpha)*D + w_x`.
    pub fn parse(src: &str, table: &SymbolTable) -> Result<Self, OperatorError> {
        let src = src.trim();
        if src == "0" {
            return Ok(LinDiffOp::zero());
        }
        let mut coeffs: BTreeMap<usize, DiffExpr> = BTreeMap::new();
        for piece in split_top_level_plus(src) {
            let piece = piece.trim();
            if piece.is_empty() {
                return Err(OperatorError::Parse("empty operator term".into()));
            }
            let (expr_src, power) = match find_d_suffix(piece) {
                Some((head, power)) => (head, power),
                None => (piece, 0usize),
            };
            let expr = if expr_src.trim().is_empty() {
                DiffExpr::one()
            } else {
                parse_expr(expr_src, table).map_err(|e| OperatorError::Parse(e.to_string()))?
            };
            let slot = coeffs.entry(power).or_insert_with(DiffExpr::zero);
            *slot = slot.add(&expr);
        }
        let max = coeffs.keys().next_back().copied().unwrap_or(0);
        let mut v = vec![DiffExpr::zero(); max + 1];
        for (k, e) in coeffs {
            v[k] = e;
        }
        Ok(LinDiffOp::from_coeffs(v))
    }
}

fn split_top_level_plus(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in src.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            '+' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Split a term like `coeff*D^k` into the coefficient source and k.
fn find_d_suffix(term: &str) -> Option<(&str, usize)> {
    let t = term.trim_end();
    let (head, power) = if let Some(stripped) = t.strip_suffix('D') {
        (stripped, 1usize)
    } else {
        let idx = t.rfind("D^")?;
        let pow: usize = t[idx + 2..].trim().parse().ok()?;
        (&t[..idx], pow)
    };
    let head = head.trim_end();
    if head.is_empty() {
        return Some(("", power));
    }
    // The D factor must be multiplied in, not be part of an identifier.
    let head = head.strip_suffix('*')?;
    Some((head, power))
}
