//! Closed-form exponential sums `sum_i c_i exp(k_i x + om_i t)`.
//!
//! Seeds, their Wronskians and every derivative needed by the dressing
//! formulas stay in this class, so field values are generated analytically
//! and grids are used only for checking.

use std::collections::BTreeMap;

use num_complex::Complex64;

type Key = (u64, u64, u64, u64);

fn key(k: Complex64, om: Complex64) -> Key {
    (k.re.to_bits(), k.im.to_bits(), om.re.to_bits(), om.im.to_bits())
}

/// One exponential term: amplitude, x-frequency, t-frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub amp: Complex64,
    pub k: Complex64,
    pub om: Complex64,
}

/// Finite sum of complex exponentials, closed under +, *, d_x, d_t.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpSum {
    terms: Vec<ExpTerm>,
}

impl ExpSum {
    pub fn zero() -> Self {
        ExpSum::default()
    }

    pub fn one() -> Self {
        ExpSum::from_terms(vec![ExpTerm {
            amp: Complex64::new(1.0, 0.0),
            k: Complex64::new(0.0, 0.0),
            om: Complex64::new(0.0, 0.0),
        }])
    }

    pub fn from_terms(terms: Vec<ExpTerm>) -> Self {
        let mut map: BTreeMap<Key, ExpTerm> = BTreeMap::new();
        for t in terms {
            map.entry(key(t.k, t.om))
                .and_modify(|e| e.amp += t.amp)
                .or_insert(t);
        }
        ExpSum {
            terms: map.into_values().filter(|t| t.amp.norm() != 0.0).collect(),
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.terms.clone();
        v.extend_from_slice(&other.terms);
        ExpSum::from_terms(v)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        ExpSum::from_terms(
            self.terms
                .iter()
                .map(|t| ExpTerm { amp: t.amp * c, ..*t })
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                v.push(ExpTerm { amp: a.amp * b.amp, k: a.k + b.k, om: a.om + b.om });
            }
        }
        ExpSum::from_terms(v)
    }

    pub fn d_x(&self) -> Self {
        ExpSum::from_terms(
            self.terms
                .iter()
                .map(|t| ExpTerm { amp: t.amp * t.k, ..*t })
                .collect(),
        )
    }

    pub fn d_t(&self) -> Self {
        ExpSum::from_terms(
            self.terms
                .iter()
                .map(|t| ExpTerm { amp: t.amp * t.om, ..*t })
                .collect(),
        )
    }

    pub fn d_x_n(&self, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..n {
            out = out.d_x();
        }
        out
    }

    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            acc += term.amp * (term.k * x + term.om * t).exp();
        }
        acc
    }

    /// Magnitude scale of the sum at a point (sum of term magnitudes); used
    /// to decide whether an evaluation is a genuine zero crossing.
    pub fn scale_at(&self, x: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| (term.amp * (term.k * x + term.om * t).exp()).norm())
            .sum()
    }
}

/// Wronskian with respect to x: determinant of the derivative matrix
/// `[f_j^(i)]` for i = 0..n-1, expanded symbolically.
pub fn wronskian(fs: &[ExpSum]) -> ExpSum {
    let n = fs.len();
    if n == 0 {
        return ExpSum::one();
    }
    // rows: derivative order, columns: functions
    let mut rows: Vec<Vec<ExpSum>> = Vec::with_capacity(n);
    for i in 0..n {
        rows.push(fs.iter().map(|f| f.d_x_n(i)).collect());
    }
    det(&rows, &(0..n).collect::<Vec<_>>())
}

fn det(rows: &[Vec<ExpSum>], cols: &[usize]) -> ExpSum {
    let n = cols.len();
    if n == 1 {
        return rows[rows.len() - n][cols[0]].clone();
    }
    let row = rows.len() - n;
    let mut acc = ExpSum::zero();
    for (j, &c) in cols.iter().enumerate() {
        let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = det(rows, &sub);
        let term = rows[row][c].mul(&minor);
        if j % 2 == 0 {
            acc = acc.add(&term);
        } else {
            acc = acc.sub(&term);
        }
    }
    acc
}
