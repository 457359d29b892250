//! Exact commutative differential-polynomial ring over jet variables.
//!
//! Elements are polynomials in jets (a field symbol together with x/t
//! derivative orders or formal antiderivative markers) with [`Scalar`]
//! coefficients. Everything is kept in a canonical normal form, so zero
//! testing — and therefore identity checking — is decidable.

mod parse;

pub use parse::{parse_expr, SymbolTable};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffRingError {
    #[error("non-integrable term `{0}`: not linear in jets and not a recognizable total derivative")]
    NonIntegrable(String),
    #[error("substitution reached an antiderivative of `{base}` but the right side is not formally integrable: {inner}")]
    UnprolongableAntiderivative { base: String, inner: String },
    #[error("cannot substitute into a negative power of `{0}`")]
    NonUnitInverse(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("t-flow right side for `{0}` must not contain t-derivatives of `{0}`")]
    FlowNotAutonomous(String),
}

/// How a base symbol depends on the independent variables.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum BaseKind {
    /// Ordinary field symbol; flags say whether x resp. t derivatives act.
    Field { x_dep: bool, t_dep: bool },
    /// The coordinate x itself: d_x(x) = 1, d_t(x) = 0.
    CoordX,
}

/// A registered base symbol for jets.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct JetBase {
    name: Arc<str>,
    kind: BaseKind,
}

impl JetBase {
    pub fn field(name: &str) -> Self {
        JetBase { name: Arc::from(name), kind: BaseKind::Field { x_dep: true, t_dep: true } }
    }

    /// A symbol depending on t only (e.g. alpha(t), beta(t)).
    pub fn t_only(name: &str) -> Self {
        JetBase { name: Arc::from(name), kind: BaseKind::Field { x_dep: false, t_dep: true } }
    }

    pub fn coord_x() -> Self {
        JetBase { name: Arc::from("x"), kind: BaseKind::CoordX }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    fn x_dep(&self) -> bool {
        match self.kind {
            BaseKind::Field { x_dep, .. } => x_dep,
            BaseKind::CoordX => true,
        }
    }

    fn t_dep(&self) -> bool {
        match self.kind {
            BaseKind::Field { t_dep, .. } => t_dep,
            BaseKind::CoordX => false,
        }
    }
}

impl PartialOrd for JetBase {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JetBase {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name.cmp(&other.name).then_with(|| self.kind.cmp(&other.kind))
    }
}

impl fmt::Debug for JetBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Common base symbols used throughout the crate.
pub mod bases {
    use super::JetBase;

    pub fn w() -> JetBase {
        JetBase::field("w")
    }
    pub fn u() -> JetBase {
        JetBase::field("u")
    }
    pub fn sigma() -> JetBase {
        JetBase::field("sigma")
    }
    pub fn phi() -> JetBase {
        JetBase::field("phi")
    }
    pub fn psi() -> JetBase {
        JetBase::field("psi")
    }
    pub fn a1() -> JetBase {
        JetBase::field("a1")
    }
    pub fn alpha() -> JetBase {
        JetBase::t_only("alpha")
    }
    pub fn beta() -> JetBase {
        JetBase::t_only("beta")
    }
    pub fn x() -> JetBase {
        JetBase::coord_x()
    }
}

/// One jet: a base with derivative orders and antiderivative markers.
///
/// An antiderivative marker and a derivative on the same axis cancel before
/// storage, so `ix > 0` implies `x_order == 0` (same for t).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    base: JetBase,
    x_order: u32,
    t_order: u32,
    ix: u32,
    it: u32,
}

impl JetVar {
    pub fn new(base: JetBase, x_order: u32, t_order: u32) -> Self {
        let x_order = if base.x_dep() { x_order } else { 0 };
        let t_order = if base.t_dep() { t_order } else { 0 };
        JetVar { base, x_order, t_order, ix: 0, it: 0 }
    }

    pub fn base_jet(base: JetBase) -> Self {
        JetVar::new(base, 0, 0)
    }

    pub fn with_antider(base: JetBase, x_order: u32, t_order: u32, ix: u32, it: u32) -> Self {
        assert!(!(ix > 0 && x_order > 0), "antiderivative and derivative on x must cancel");
        assert!(!(it > 0 && t_order > 0), "antiderivative and derivative on t must cancel");
        JetVar { base, x_order, t_order, ix, it }
    }

    pub fn base(&self) -> &JetBase {
        &self.base
    }

    pub fn x_order(&self) -> u32 {
        self.x_order
    }

    pub fn t_order(&self) -> u32 {
        self.t_order
    }

    pub fn antider_x(&self) -> u32 {
        self.ix
    }

    pub fn antider_t(&self) -> u32 {
        self.it
    }

    pub fn is_base(&self) -> bool {
        self.x_order == 0 && self.t_order == 0 && self.ix == 0 && self.it == 0
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.ix {
            write!(f, "Ix(")?;
        }
        for _ in 0..self.it {
            write!(f, "It(")?;
        }
        write!(f, "{}", self.base.name())?;
        if self.x_order > 0 || self.t_order > 0 {
            write!(f, "_")?;
            for _ in 0..self.x_order {
                write!(f, "x")?;
            }
            for _ in 0..self.t_order {
                write!(f, "t")?;
            }
        }
        for _ in 0..(self.ix + self.it) {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Power product of jets; exponents may be negative only for pure base jets
/// (used to express log-derivative substitutions like phi^-1).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default, Hash)]
pub struct Monomial(Vec<(JetVar, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn jet(v: JetVar) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(JetVar, i32)] {
        &self.0
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().map(|(_, e)| *e as i64).sum()
    }

    fn from_map(map: BTreeMap<JetVar, i32>) -> Self {
        Monomial(map.into_iter().filter(|(_, e)| *e != 0).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map: BTreeMap<JetVar, i32> = self.0.iter().cloned().collect();
        for (v, e) in &other.0 {
            *map.entry(v.clone()).or_insert(0) += e;
        }
        Monomial::from_map(map)
    }

    pub fn pow_jet(v: JetVar, e: i32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(v, e)])
        }
    }

    /// Exact quotient by `other`, allowing exponents to go negative is not
    /// wanted here: returns `None` unless every factor of `other` divides.
    pub fn try_div(&self, other: &Self) -> Option<Self> {
        let mut map: BTreeMap<JetVar, i32> = self.0.iter().cloned().collect();
        for (v, e) in &other.0 {
            let slot = map.entry(v.clone()).or_insert(0);
            if *slot < *e {
                return None;
            }
            *slot -= e;
        }
        Some(Monomial::from_map(map))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{}", v)?;
            } else {
                write!(f, "{}^{}", v, e)?;
            }
        }
        Ok(())
    }
}

/// Normalized differential polynomial: map from monomials to nonzero scalars.
///
/// Two expressions are equal iff their normalized term maps agree; `is_zero`
/// is an exact decision procedure.
#[derive(Clone, Debug, Default)]
pub struct DiffExpr {
    terms: BTreeMap<Monomial, Scalar>,
}

impl DiffExpr {
    pub fn zero() -> Self {
        DiffExpr::default()
    }

    pub fn one() -> Self {
        DiffExpr::scalar(Scalar::one())
    }

    pub fn scalar(s: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !s.is_zero() {
            terms.insert(Monomial::one(), s);
        }
        DiffExpr { terms }
    }

    pub fn from_int(n: i64) -> Self {
        DiffExpr::scalar(Scalar::from_int(n))
    }

    pub fn jet(v: JetVar) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::jet(v), Scalar::one());
        DiffExpr { terms }
    }

    pub fn base(b: JetBase) -> Self {
        DiffExpr::jet(JetVar::base_jet(b))
    }

    /// phi^-1 and friends: a pure base jet raised to a (possibly negative) power.
    pub fn base_pow(b: JetBase, e: i32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::pow_jet(JetVar::base_jet(b), e), Scalar::one());
        DiffExpr { terms }
    }

    pub fn monomial(m: Monomial, s: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !s.is_zero() {
            terms.insert(m, s);
        }
        DiffExpr { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn insert(&mut self, m: Monomial, s: Scalar) {
        if s.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(s);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&s);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, s) in &other.terms {
            out.insert(m.clone(), s.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        DiffExpr {
            terms: self.terms.iter().map(|(m, s)| (m.clone(), s.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = DiffExpr::zero();
        for (m1, s1) in &self.terms {
            for (m2, s2) in &other.terms {
                out.insert(m1.mul(m2), s1.mul(s2));
            }
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        if s.is_zero() {
            return DiffExpr::zero();
        }
        DiffExpr {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.mul(s))).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = DiffExpr::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// The scalar content when the expression has no jets.
    pub fn as_scalar(&self) -> Option<Scalar> {
        if self.terms.is_empty() {
            return Some(Scalar::zero());
        }
        if self.terms.len() == 1 {
            if let Some(s) = self.terms.get(&Monomial::one()) {
                return Some(s.clone());
            }
        }
        None
    }

    /// Formal partial derivative with respect to a single jet variable.
    pub fn partial(&self, v: &JetVar) -> Self {
        let mut out = DiffExpr::zero();
        for (m, s) in &self.terms {
            for (idx, (jv, e)) in m.0.iter().enumerate() {
                if jv == v {
                    let mut rest: Vec<(JetVar, i32)> = m.0.clone();
                    if *e == 1 {
                        rest.remove(idx);
                    } else {
                        rest[idx].1 -= 1;
                    }
                    out.insert(
                        Monomial(rest),
                        s.mul(&Scalar::from_int(*e as i64)),
                    );
                }
            }
        }
        out
    }

    /// Coefficient of `v^k`, as a polynomial in the remaining jets.
    pub fn coeff_of_power(&self, v: &JetVar, k: i32) -> Self {
        let mut out = DiffExpr::zero();
        for (m, s) in &self.terms {
            let e = m.0.iter().find(|(jv, _)| jv == v).map(|(_, e)| *e).unwrap_or(0);
            if e == k {
                let rest: Vec<(JetVar, i32)> =
                    m.0.iter().filter(|(jv, _)| jv != v).cloned().collect();
                out.insert(Monomial(rest), s.clone());
            }
        }
        out
    }

    /// Replace every occurrence of the monomial `pattern` (to any multiplicity)
    /// by `replacement`.
    pub fn rewrite_monomial(&self, pattern: &Monomial, replacement: &DiffExpr) -> Self {
        assert!(!pattern.is_one());
        let mut out = DiffExpr::zero();
        for (m, s) in &self.terms {
            let mut k = 0u32;
            let mut rest = m.clone();
            while let Some(r) = rest.try_div(pattern) {
                rest = r;
                k += 1;
            }
            if k == 0 {
                out.insert(m.clone(), s.clone());
            } else {
                let repl = replacement.pow(k).mul(&DiffExpr::monomial(rest, Scalar::one()));
                out = out.add(&repl.scale(s));
            }
        }
        out
    }

    pub fn jet_bases(&self) -> std::collections::BTreeSet<JetBase> {
        let mut out = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            for (v, _) in &m.0 {
                out.insert(v.base().clone());
            }
        }
        out
    }
}

impl PartialEq for DiffExpr {
    fn eq(&self, other: &Self) -> bool {
        if self.terms.len() != other.terms.len() {
            return false;
        }
        self.terms
            .iter()
            .zip(other.terms.iter())
            .all(|((m1, s1), (m2, s2))| m1 == m2 && s1 == s2)
    }
}

impl Eq for DiffExpr {}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    T,
}

/// Derivative of a single jet along an axis, as an expression.
fn d_jet(v: &JetVar, axis: Axis) -> DiffExpr {
    match axis {
        Axis::X => {
            if v.base.kind() == BaseKind::CoordX {
                return DiffExpr::one();
            }
            if !v.base.x_dep() {
                return DiffExpr::zero();
            }
            if v.ix > 0 {
                DiffExpr::jet(JetVar { ix: v.ix - 1, ..v.clone() })
            } else {
                DiffExpr::jet(JetVar { x_order: v.x_order + 1, ..v.clone() })
            }
        }
        Axis::T => {
            if !v.base.t_dep() {
                return DiffExpr::zero();
            }
            if v.it > 0 {
                DiffExpr::jet(JetVar { it: v.it - 1, ..v.clone() })
            } else {
                DiffExpr::jet(JetVar { t_order: v.t_order + 1, ..v.clone() })
            }
        }
    }
}

fn derive(e: &DiffExpr, axis: Axis) -> DiffExpr {
    let mut out = DiffExpr::zero();
    for (m, s) in &e.terms {
        for (idx, (v, exp)) in m.0.iter().enumerate() {
            let dv = d_jet(v, axis);
            if dv.is_zero() {
                continue;
            }
            let mut rest = m.0.clone();
            if *exp == 1 {
                rest.remove(idx);
            } else {
                rest[idx].1 -= 1;
            }
            let coeff = s.mul(&Scalar::from_int(*exp as i64));
            let term = DiffExpr::monomial(Monomial(rest), coeff).mul(&dv);
            out = out.add(&term);
        }
    }
    out
}

/// x-derivative with the Leibniz rule; antiderivative markers cancel first.
pub fn d_x(e: &DiffExpr) -> DiffExpr {
    derive(e, Axis::X)
}

/// t-derivative; commutes with [`d_x`] on every expression.
pub fn d_t(e: &DiffExpr) -> DiffExpr {
    derive(e, Axis::T)
}

pub fn d_x_n(e: &DiffExpr, n: u32) -> DiffExpr {
    let mut out = e.clone();
    for _ in 0..n {
        out = d_x(&out);
    }
    out
}

pub fn d_t_n(e: &DiffExpr, n: u32) -> DiffExpr {
    let mut out = e.clone();
    for _ in 0..n {
        out = d_t(&out);
    }
    out
}

/// Antiderivative of a single jet along an axis, when representable.
fn int_jet(v: &JetVar, axis: Axis) -> Option<JetVar> {
    match axis {
        Axis::X => {
            if v.base.kind() == BaseKind::CoordX || !v.base.x_dep() {
                return None;
            }
            if v.x_order > 0 {
                Some(JetVar { x_order: v.x_order - 1, ..v.clone() })
            } else {
                Some(JetVar { ix: v.ix + 1, ..v.clone() })
            }
        }
        Axis::T => {
            if !v.base.t_dep() {
                return None;
            }
            if v.t_order > 0 {
                Some(JetVar { t_order: v.t_order - 1, ..v.clone() })
            } else {
                Some(JetVar { it: v.it + 1, ..v.clone() })
            }
        }
    }
}

fn integrate_term(m: &Monomial, s: &Scalar, axis: Axis) -> Result<DiffExpr, DiffRingError> {
    let fail = || {
        DiffRingError::NonIntegrable(format!(
            "{}",
            DiffExpr::monomial(m.clone(), s.clone())
        ))
    };

    // Pure power of the coordinate: x^k -> x^(k+1)/(k+1).
    if axis == Axis::X && m.0.len() == 1 {
        let (v, e) = &m.0[0];
        if v.base.kind() == BaseKind::CoordX && *e > 0 {
            return Ok(DiffExpr::monomial(
                Monomial::pow_jet(v.clone(), e + 1),
                s.mul(&Scalar::rational(1, (*e as i64) + 1)),
            ));
        }
    }

    // Single jet, exponent one: shift a derivative order down (or mark).
    if m.0.len() == 1 && m.0[0].1 == 1 {
        let v = &m.0[0].0;
        let iv = int_jet(v, axis).ok_or_else(fail)?;
        return Ok(DiffExpr::monomial(Monomial::jet(iv), s.clone()));
    }

    // Term-wise total-derivative recognition: c * v^a * d(v) -> c * v^(a+1)/(a+1).
    for (idx, (u, eu)) in m.0.iter().enumerate() {
        if *eu != 1 {
            continue;
        }
        let Some(v) = int_jet(u, axis) else { continue };
        let rest: Vec<(JetVar, i32)> = m
            .0
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, f)| f.clone())
            .collect();
        if rest.len() == 1 && rest[0].0 == v && rest[0].1 > 0 {
            let a = rest[0].1;
            return Ok(DiffExpr::monomial(
                Monomial::pow_jet(v, a + 1),
                s.mul(&Scalar::rational(1, (a as i64) + 1)),
            ));
        }
    }

    Err(fail())
}

fn integrate(e: &DiffExpr, axis: Axis) -> Result<DiffExpr, DiffRingError> {
    let mut out = DiffExpr::zero();
    for (m, s) in &e.terms {
        out = out.add(&integrate_term(m, s, axis)?);
    }
    Ok(out)
}

/// Formal x-antiderivative with integration constant fixed to zero.
///
/// Defined on expressions that are linear in jets or recognizable term-wise as
/// total x-derivatives; `d_x(int_x(e)) == e` on the whole domain.
pub fn int_x(e: &DiffExpr) -> Result<DiffExpr, DiffRingError> {
    integrate(e, Axis::X)
}

/// Formal t-antiderivative; same domain rules as [`int_x`].
pub fn int_t(e: &DiffExpr) -> Result<DiffExpr, DiffRingError> {
    integrate(e, Axis::T)
}

/// Substitution of base jets by expressions, with automatic prolongation.
///
/// A rule maps a base symbol to its replacement; derivatives of the base are
/// replaced by derivatives of the replacement, and antiderivative markers are
/// resolved through [`int_x`]/[`int_t`] when the right side is integrable.
pub fn substitute(
    e: &DiffExpr,
    rules: &BTreeMap<JetBase, DiffExpr>,
) -> Result<DiffExpr, DiffRingError> {
    let mut out = DiffExpr::zero();
    for (m, s) in &e.terms {
        let mut term = DiffExpr::scalar(s.clone());
        for (v, exp) in &m.0 {
            let factor = match rules.get(v.base()) {
                None => DiffExpr::monomial(Monomial::pow_jet(v.clone(), *exp), Scalar::one()),
                Some(r) => {
                    let mut repl = r.clone();
                    for _ in 0..v.x_order {
                        repl = d_x(&repl);
                    }
                    for _ in 0..v.t_order {
                        repl = d_t(&repl);
                    }
                    for _ in 0..v.ix {
                        repl = int_x(&repl).map_err(|err| {
                            DiffRingError::UnprolongableAntiderivative {
                                base: v.base().name().to_string(),
                                inner: err.to_string(),
                            }
                        })?;
                    }
                    for _ in 0..v.it {
                        repl = int_t(&repl).map_err(|err| {
                            DiffRingError::UnprolongableAntiderivative {
                                base: v.base().name().to_string(),
                                inner: err.to_string(),
                            }
                        })?;
                    }
                    if *exp < 0 {
                        return Err(DiffRingError::NonUnitInverse(v.base().name().to_string()));
                    }
                    repl.pow(*exp as u32)
                }
            };
            term = term.mul(&factor);
        }
        out = out.add(&term);
    }
    Ok(out)
}

pub fn substitute_one(
    e: &DiffExpr,
    base: &JetBase,
    rhs: &DiffExpr,
) -> Result<DiffExpr, DiffRingError> {
    let mut rules = BTreeMap::new();
    rules.insert(base.clone(), rhs.clone());
    substitute(e, &rules)
}

/// Eliminate all t-derivatives of `base` using the evolution rule
/// `d_t(base) = rhs`, where `rhs` contains no t-derivatives of `base`.
///
/// Mixed jets base_{x^a t^b} are rewritten as d_x^a applied to the (b-1)-fold
/// t-prolongation of `rhs`.
pub fn impose_t_flow(
    e: &DiffExpr,
    base: &JetBase,
    rhs: &DiffExpr,
) -> Result<DiffExpr, DiffRingError> {
    let has_t_jet = |expr: &DiffExpr| {
        expr.terms.keys().any(|m| {
            m.0.iter()
                .any(|(v, _)| v.base() == base && (v.t_order > 0 || v.it > 0))
        })
    };
    if has_t_jet(rhs) {
        return Err(DiffRingError::FlowNotAutonomous(base.name().to_string()));
    }

    // ladder[k] expresses d_t^{k+1}(base) with no t-derivatives of `base` left
    let mut ladder: Vec<DiffExpr> = vec![rhs.clone()];
    let mut out = e.clone();
    loop {
        let max_t = out
            .terms
            .keys()
            .flat_map(|m| m.0.iter())
            .filter(|(v, _)| v.base() == base)
            .map(|(v, _)| v.t_order)
            .max()
            .unwrap_or(0);
        if max_t == 0 {
            return Ok(out);
        }
        while ladder.len() < max_t as usize {
            let prev = ladder.last().unwrap();
            let mut next = d_t(prev);
            // d_t reintroduces first-order t-jets of `base`; flatten them.
            next = replace_t_jets(&next, base, &ladder[0]);
            ladder.push(next);
        }
        let mut replaced = DiffExpr::zero();
        for (m, s) in &out.terms {
            let mut term = DiffExpr::scalar(s.clone());
            for (v, exp) in &m.0 {
                let factor = if v.base() == base && v.t_order > 0 {
                    if *exp < 0 {
                        return Err(DiffRingError::NonUnitInverse(base.name().to_string()));
                    }
                    if v.it > 0 {
                        return Err(DiffRingError::FlowNotAutonomous(base.name().to_string()));
                    }
                    d_x_n(&ladder[(v.t_order - 1) as usize], v.x_order).pow(*exp as u32)
                } else {
                    DiffExpr::monomial(Monomial::pow_jet(v.clone(), *exp), Scalar::one())
                };
                term = term.mul(&factor);
            }
            replaced = replaced.add(&term);
        }
        out = replaced;
    }
}

fn replace_t_jets(e: &DiffExpr, base: &JetBase, flow: &DiffExpr) -> DiffExpr {
    let mut out = DiffExpr::zero();
    for (m, s) in &e.terms {
        let mut term = DiffExpr::scalar(s.clone());
        for (v, exp) in &m.0 {
            let factor = if v.base() == base && v.t_order == 1 && v.it == 0 {
                d_x_n(flow, v.x_order).pow(*exp as u32)
            } else {
                debug_assert!(!(v.base() == base && v.t_order > 1));
                DiffExpr::monomial(Monomial::pow_jet(v.clone(), *exp), Scalar::one())
            };
            term = term.mul(&factor);
        }
        out = out.add(&term);
    }
    out
}

impl fmt::Display for DiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, s) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m.is_one() {
                if s.is_simple_positive() {
                    write!(f, "{}", s)?;
                } else {
                    write!(f, "({})", s)?;
                }
            } else if s.is_one() {
                write!(f, "{}", m)?;
            } else if s.is_simple_positive() {
                write!(f, "{}*{}", s, m)?;
            } else {
                write!(f, "({})*{}", s, m)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> DiffExpr {
        DiffExpr::base(bases::w())
    }
    fn wx() -> DiffExpr {
        DiffExpr::jet(JetVar::new(bases::w(), 1, 0))
    }
    fn sigma() -> DiffExpr {
        DiffExpr::base(bases::sigma())
    }

    #[test]
    fn leibniz_on_square() {
        // d_x(w^2) = 2 w w_x
        let got = d_x(&w().mul(&w()));
        let want = w().mul(&wx()).scale(&Scalar::from_int(2));
        assert_eq!(got, want);
    }

    #[test]
    fn antiderivative_cancels_under_d_x() {
        let iw = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 0, 1, 0));
        assert_eq!(d_x(&iw), w());
    }

    #[test]
    fn bell_step_expansion() {
        // d_x(sigma_x + sigma^2) = sigma_xx + 2 sigma sigma_x
        let sx = DiffExpr::jet(JetVar::new(bases::sigma(), 1, 0));
        let sxx = DiffExpr::jet(JetVar::new(bases::sigma(), 2, 0));
        let got = d_x(&sx.add(&sigma().mul(&sigma())));
        let want = sxx.add(&sigma().mul(&sx).scale(&Scalar::from_int(2)));
        assert_eq!(got, want);
    }

    #[test]
    fn t_derivative_conventions() {
        let wt = DiffExpr::jet(JetVar::new(bases::w(), 0, 1));
        assert_eq!(d_t(&w()), wt);
        let iw = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 0, 1, 0));
        let iwt = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 1, 1, 0));
        assert_eq!(d_t(&iw), iwt);
        assert_eq!(d_t(&d_x(&w())), d_x(&d_t(&w())));
    }

    #[test]
    fn x_coordinate_rules() {
        let x = DiffExpr::base(bases::x());
        assert_eq!(d_x(&x), DiffExpr::one());
        assert!(d_t(&x).is_zero());
        // int_x(x) = x^2/2, and d_x of that gives x back
        let half_x2 = int_x(&x).unwrap();
        assert_eq!(d_x(&half_x2), x);
    }

    #[test]
    fn t_only_bases_are_x_constant() {
        let alpha = DiffExpr::base(bases::alpha());
        assert!(d_x(&alpha).is_zero());
        assert!(!d_t(&alpha).is_zero());
    }

    #[test]
    fn int_x_on_linear_and_total_derivative_terms() {
        assert_eq!(int_x(&wx()).unwrap(), w());
        let iw = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 0, 1, 0));
        assert_eq!(int_x(&w()).unwrap(), iw);
        // w * w_x = d_x(w^2/2)
        let got = int_x(&w().mul(&wx())).unwrap();
        let want = w().mul(&w()).scale(&Scalar::rational(1, 2));
        assert_eq!(got, want);
        assert_eq!(d_x(&got), w().mul(&wx()));
    }

    #[test]
    fn int_x_rejects_nonintegrable_products() {
        let bad = w().mul(&sigma());
        assert!(matches!(int_x(&bad), Err(DiffRingError::NonIntegrable(_))));
    }

    #[test]
    fn substitution_prolongs_derivatives() {
        // w -> sigma_x turns w_x into sigma_xx
        let sxx = DiffExpr::jet(JetVar::new(bases::sigma(), 2, 0));
        let rule = DiffExpr::jet(JetVar::new(bases::sigma(), 1, 0));
        let got = substitute_one(&wx(), &bases::w(), &rule).unwrap();
        assert_eq!(got, sxx);
    }

    #[test]
    fn substitution_resolves_antiderivatives_when_integrable() {
        // Ix(w) with w -> sigma_x becomes sigma
        let iw = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 0, 1, 0));
        let rule = DiffExpr::jet(JetVar::new(bases::sigma(), 1, 0));
        assert_eq!(substitute_one(&iw, &bases::w(), &rule).unwrap(), sigma());
        // but w -> sigma^2 is not integrable
        let bad = substitute_one(&iw, &bases::w(), &sigma().mul(&sigma()));
        assert!(matches!(
            bad,
            Err(DiffRingError::UnprolongableAntiderivative { .. })
        ));
    }

    #[test]
    fn zero_seed_substitution() {
        let g = wx().add(&w().mul(&w()));
        let got = substitute_one(&g, &bases::w(), &DiffExpr::zero()).unwrap();
        assert!(got.is_zero());
    }

    #[test]
    fn negative_powers_differentiate_by_leibniz() {
        // d_x(phi^-1) = -phi_x * phi^-2
        let phim1 = DiffExpr::base_pow(bases::phi(), -1);
        let phix = DiffExpr::jet(JetVar::new(bases::phi(), 1, 0));
        let phim2 = DiffExpr::base_pow(bases::phi(), -2);
        let got = d_x(&phim1);
        let want = phix.mul(&phim2).neg();
        assert_eq!(got, want);
        // phi * phi^-1 collapses to 1
        let phi = DiffExpr::base(bases::phi());
        assert_eq!(phi.mul(&phim1), DiffExpr::one());
    }

    #[test]
    fn t_flow_elimination_terminates_and_is_exact() {
        // phi_t = phi_xx: then phi_tt becomes phi_xxxx, phi_xt becomes phi_xxx
        let phi = bases::phi();
        let flow = DiffExpr::jet(JetVar::new(phi.clone(), 2, 0));
        let ptt = DiffExpr::jet(JetVar::new(phi.clone(), 0, 2));
        let got = impose_t_flow(&ptt, &phi, &flow).unwrap();
        assert_eq!(got, DiffExpr::jet(JetVar::new(phi.clone(), 4, 0)));
        let pxt = DiffExpr::jet(JetVar::new(phi.clone(), 1, 1));
        let got = impose_t_flow(&pxt, &phi, &flow).unwrap();
        assert_eq!(got, DiffExpr::jet(JetVar::new(phi, 3, 0)));
    }

    #[test]
    fn partial_derivative_and_coefficient_extraction() {
        // e = 3 w sigma_x + w^2; de/dw = 3 sigma_x + 2 w
        let sx = DiffExpr::jet(JetVar::new(bases::sigma(), 1, 0));
        let e = w().mul(&sx).scale(&Scalar::from_int(3)).add(&w().mul(&w()));
        let got = e.partial(&JetVar::base_jet(bases::w()));
        let want = sx.scale(&Scalar::from_int(3)).add(&w().scale(&Scalar::from_int(2)));
        assert_eq!(got, want);
        let c = e.coeff_of_power(&JetVar::new(bases::sigma(), 1, 0), 1);
        assert_eq!(c, w().scale(&Scalar::from_int(3)));
    }

    #[test]
    fn is_zero_on_cancellations() {
        assert!(w().sub(&w()).is_zero());
        let iw = DiffExpr::jet(JetVar::with_antider(bases::w(), 0, 0, 1, 0));
        assert!(d_x(&iw).sub(&w()).is_zero());
    }
}
