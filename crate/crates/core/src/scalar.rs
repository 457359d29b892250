//! Exact scalar coefficients: rational functions of declared constant parameters.
//!
//! Coefficients of differential polynomials are elements of Q(b3, a2, ...):
//! ratios of multivariate polynomials over the rationals. No floating point
//! enters here; zero-testing is a decision procedure (numerator identically
//! zero), and equality is decided by cross-multiplication.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A commuting constant parameter symbol (e.g. `b3`, `a2`, `lambda`, `c1`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Param(Arc<str>);

impl Param {
    pub fn new(name: &str) -> Self {
        Param(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Power product of parameters, sorted by name, no zero exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct ParamMono(Vec<(Param, u32)>);

impl ParamMono {
    pub fn one() -> Self {
        ParamMono(Vec::new())
    }

    pub fn var(p: Param) -> Self {
        ParamMono(vec![(p, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| *e).sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map: BTreeMap<Param, u32> = self.0.iter().cloned().collect();
        for (p, e) in &other.0 {
            *map.entry(p.clone()).or_insert(0) += e;
        }
        ParamMono(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    /// Exact quotient, or `None` when some exponent of `other` exceeds ours.
    pub fn try_div(&self, other: &Self) -> Option<Self> {
        let mut map: BTreeMap<Param, u32> = self.0.iter().cloned().collect();
        for (p, e) in &other.0 {
            let slot = map.get_mut(p)?;
            if *slot < *e {
                return None;
            }
            *slot -= *e;
        }
        Some(ParamMono(map.into_iter().filter(|(_, e)| *e > 0).collect()))
    }

    fn gcd(&self, other: &Self) -> Self {
        let other_map: BTreeMap<&Param, u32> = other.0.iter().map(|(p, e)| (p, *e)).collect();
        ParamMono(
            self.0
                .iter()
                .filter_map(|(p, e)| {
                    let oe = *other_map.get(p)?;
                    Some((p.clone(), (*e).min(oe)))
                })
                .filter(|(_, e)| *e > 0)
                .collect(),
        )
    }

    /// Graded-lex comparison used to pick leading terms for division.
    fn grlex(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for ParamMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (p, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{}", p.name())?;
            } else {
                write!(f, "{}^{}", p.name(), e)?;
            }
        }
        Ok(())
    }
}

/// Multivariate polynomial in parameters with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ParamPoly {
    terms: BTreeMap<ParamMono, BigRational>,
}

impl ParamPoly {
    pub fn zero() -> Self {
        ParamPoly::default()
    }

    pub fn one() -> Self {
        ParamPoly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(ParamMono::one(), c);
        }
        ParamPoly { terms }
    }

    pub fn var(p: Param) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(ParamMono::var(p), BigRational::one());
        ParamPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&ParamMono::one())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// The constant value when the polynomial has no parameter dependence.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&ParamMono::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    fn insert(&mut self, m: ParamMono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = ParamPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.insert(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return ParamPoly::zero();
        }
        ParamPoly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    fn leading(&self) -> Option<(&ParamMono, &BigRational)> {
        self.terms.iter().max_by(|a, b| a.0.grlex(b.0))
    }

    /// Common monomial factor of all terms.
    fn mono_content(&self) -> ParamMono {
        let mut it = self.terms.keys();
        let first = match it.next() {
            Some(m) => m.clone(),
            None => return ParamMono::one(),
        };
        it.fold(first, |acc, m| acc.gcd(m))
    }

    fn div_mono(&self, m: &ParamMono) -> Self {
        ParamPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.try_div(m).expect("content divides"), c.clone()))
                .collect(),
        }
    }

    /// Exact polynomial division; `None` when the division leaves a remainder.
    pub fn try_exact_div(&self, den: &Self) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        let (dlm, dlc) = den.leading().expect("nonzero");
        let dlm = dlm.clone();
        let dlc = dlc.clone();
        let mut rem = self.clone();
        let mut quot = ParamPoly::zero();
        while !rem.is_zero() {
            let (rlm, rlc) = rem.leading().expect("nonzero");
            let qm = rlm.try_div(&dlm)?;
            let qc = rlc / &dlc;
            let mut t = ParamPoly::zero();
            t.insert(qm, qc);
            quot = quot.add(&t);
            rem = rem.sub(&t.mul(den));
        }
        Some(quot)
    }

    pub fn eval<F>(&self, assign: &F) -> Result<num_complex::Complex64, String>
    where
        F: Fn(&Param) -> Option<num_complex::Complex64>,
    {
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = num_complex::Complex64::new(rational_to_f64(c), 0.0);
            for (p, e) in &m.0 {
                let pv = assign(p).ok_or_else(|| format!("unbound parameter `{}`", p.name()))?;
                v *= pv.powi(*e as i32);
            }
            total += v;
        }
        Ok(total)
    }

    pub fn params(&self, out: &mut std::collections::BTreeSet<Param>) {
        for m in self.terms.keys() {
            for (p, _) in &m.0 {
                out.insert(p.clone());
            }
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    // Good enough for the numeric bridging paths; exact values stay exact.
    let num = r.numer();
    let den = r.denom();
    bigint_to_f64(num) / bigint_to_f64(den)
}

fn bigint_to_f64(i: &BigInt) -> f64 {
    i.to_string().parse::<f64>().unwrap_or(f64::NAN)
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", abs)?;
            } else if abs.is_one() {
                write!(f, "{}", m)?;
            } else {
                write!(f, "{}*{}", abs, m)?;
            }
        }
        Ok(())
    }
}

/// Element of the fraction field Q(params): `num/den`, `den` nonzero.
///
/// Normalization keeps the denominator monic under graded-lex, cancels common
/// monomial content, and collapses exact divisions. Equality is decided by
/// cross-multiplication, so partially reduced representatives still compare
/// correctly.
#[derive(Clone, Debug)]
pub struct Scalar {
    num: ParamPoly,
    den: ParamPoly,
}

impl Scalar {
    fn normalized(mut num: ParamPoly, mut den: ParamPoly) -> Self {
        assert!(!den.is_zero(), "scalar denominator is zero");
        if num.is_zero() {
            return Scalar { num, den: ParamPoly::one() };
        }
        if let Some(q) = num.try_exact_div(&den) {
            return Scalar { num: q, den: ParamPoly::one() };
        }
        let g = num.mono_content().gcd(&den.mono_content());
        if !g.is_one() {
            num = num.div_mono(&g);
            den = den.div_mono(&g);
        }
        // Jointly primitive integer coefficients, positive leading den coefficient.
        let mut denom_lcm = BigInt::one();
        let mut numer_gcd = BigInt::zero();
        for c in num.terms.values().chain(den.terms.values()) {
            denom_lcm = num_integer::lcm(denom_lcm, c.denom().clone());
            numer_gcd = num_integer::gcd(numer_gcd, c.numer().clone());
        }
        let mut scale = BigRational::new(denom_lcm, numer_gcd);
        if den.leading().expect("nonzero").1 * &scale < BigRational::zero() {
            scale = -scale;
        }
        if !scale.is_one() {
            num = num.scale(&scale);
            den = den.scale(&scale);
        }
        Scalar { num, den }
    }

    pub fn zero() -> Self {
        Scalar { num: ParamPoly::zero(), den: ParamPoly::one() }
    }

    pub fn one() -> Self {
        Scalar { num: ParamPoly::one(), den: ParamPoly::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar {
            num: ParamPoly::constant(BigRational::from_integer(BigInt::from(n))),
            den: ParamPoly::one(),
        }
    }

    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0);
        Scalar {
            num: ParamPoly::constant(BigRational::new(BigInt::from(num), BigInt::from(den))),
            den: ParamPoly::one(),
        }
    }

    pub fn param(name: &str) -> Self {
        Scalar { num: ParamPoly::var(Param::new(name)), den: ParamPoly::one() }
    }

    pub fn from_big_rational(r: BigRational) -> Self {
        Scalar { num: ParamPoly::constant(r), den: ParamPoly::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn num(&self) -> &ParamPoly {
        &self.num
    }

    pub fn den(&self) -> &ParamPoly {
        &self.den
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Scalar::normalized(self.num.add(&other.num), self.den.clone());
        }
        Scalar::normalized(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn neg(&self) -> Self {
        Scalar { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Scalar::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// Multiplicative inverse; panics on zero (callers check first).
    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "inverse of zero scalar");
        Scalar::normalized(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.inv())
    }

    pub fn pow(&self, e: i32) -> Self {
        let mut out = Scalar::one();
        let base = if e < 0 { self.inv() } else { self.clone() };
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// The exact rational value when parameter-free.
    pub fn as_rational(&self) -> Option<BigRational> {
        let n = self.num.as_constant()?;
        let d = self.den.as_constant()?;
        Some(n / d)
    }

    pub fn eval<F>(&self, assign: &F) -> Result<num_complex::Complex64, String>
    where
        F: Fn(&Param) -> Option<num_complex::Complex64>,
    {
        let n = self.num.eval(assign)?;
        let d = self.den.eval(assign)?;
        if d.norm() == 0.0 {
            return Err("denominator evaluates to zero".into());
        }
        Ok(n / d)
    }

    pub fn params(&self) -> std::collections::BTreeSet<Param> {
        let mut out = std::collections::BTreeSet::new();
        self.num.params(&mut out);
        self.den.params(&mut out);
        out
    }

    /// True when this renders as a bare product `c*m` with positive rational c.
    pub(crate) fn is_simple_positive(&self) -> bool {
        if !self.den.is_one() {
            return false;
        }
        self.num.terms.len() == 1 && self.num.terms.values().next().unwrap().is_positive()
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl Eq for Scalar {}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            let num_needs_parens = self.num.terms.len() > 1;
            if num_needs_parens {
                write!(f, "({})/({})", self.num, self.den)
            } else {
                write!(f, "{}/({})", self.num, self.den)
            }
        }
    }
}
