//! Exact multivariate polynomials over the rationals.
//!
//! Terms are stored in a canonical map keyed by [`Monomial`], ordered
//! graded-lexicographically, with zero coefficients never stored. Two
//! polynomials are equal exactly when their term maps are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q`, an integer, or a finite decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(Rational::from_integer(n));
    }
    // decimal with optional exponent, parsed digit by digit so 0.1 stays 1/10
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("not a rational: {s:?}")));
    }
    let n: BigInt = digits.parse().unwrap();
    let shift = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    let mut value = Rational::from_integer(n) * pow_signed(&ten, shift);
    if neg {
        value = -value;
    }
    Ok(value)
}

/// `base^exp` for a possibly negative exponent.
pub fn pow_signed(base: &Rational, exp: i32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp.unsigned_abs() {
        acc *= base;
    }
    if exp < 0 {
        acc.recip()
    } else {
        acc
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite binary64 number.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

/// Exponent vector, ordered graded-lexicographically (total degree, then lex).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn weighted_degree(&self, weights: &[u32]) -> i64 {
        self.0.iter().zip(weights).map(|(&e, &w)| e as i64 * w as i64).sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(Monomial(vec![0; dim]), c);
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    /// The coordinate function `x_axis` (zero-based).
    pub fn var(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        Self::monomial(dim, e, Rational::one())
    }

    pub fn monomial(dim: usize, exps: Vec<u32>, c: Rational) -> Self {
        assert_eq!(exps.len(), dim, "exponent vector length must equal dimension");
        let mut p = Self::zero(dim);
        p.add_term(Monomial(exps), c);
        p
    }

    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            check_dim(dim, e.len())?;
            p.add_term(Monomial(e), c);
        }
        Ok(p)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exps: &[u32]) -> Rational {
        self.terms.get(&Monomial(exps.to_vec())).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&vec![0; self.dim])
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.dim, other.dim)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.dim, other.dim)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.dim, other.dim)?;
        let mut out = Polynomial::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let e = ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect();
                out.add_term(Monomial(e), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.dim);
        }
        Polynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::one(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative with respect to `axis` (zero-based).
    pub fn partial(&self, axis: usize) -> Result<Polynomial> {
        if axis >= self.dim {
            return Err(Error::IndexOutOfRange { index: axis, limit: self.dim });
        }
        let mut out = Polynomial::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.0[axis];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[axis] -= 1;
            out.add_term(Monomial(exps), c * rat(e as i64));
        }
        Ok(out)
    }

    pub fn depends_on(&self, axis: usize) -> bool {
        self.terms.keys().any(|m| m.0.get(axis).copied().unwrap_or(0) > 0)
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Rational> {
        check_dim(self.dim, x.len())?;
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(&m.0) {
                for _ in 0..e {
                    t *= xi;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms
            .iter()
            .map(|(m, c)| to_f64(c) * m.0.iter().zip(x).map(|(&e, xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }

    /// Sum of the terms whose weighted degree equals `degree`.
    pub fn weighted_part(&self, weights: &[u32], degree: i64) -> Result<Polynomial> {
        check_dim(self.dim, weights.len())?;
        Ok(Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.weighted_degree(weights) == degree)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        })
    }

    /// All nonzero weighted-homogeneous components keyed by weighted degree.
    pub fn weighted_parts(&self, weights: &[u32]) -> Result<BTreeMap<i64, Polynomial>> {
        check_dim(self.dim, weights.len())?;
        let mut out: BTreeMap<i64, Polynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.weighted_degree(weights))
                .or_insert_with(|| Polynomial::zero(self.dim))
                .add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn is_weighted_homogeneous(&self, weights: &[u32], degree: i64) -> bool {
        weights.len() == self.dim && self.terms.keys().all(|m| m.weighted_degree(weights) == degree)
    }

    /// Substitutes `subs[i]` for variable `x_i`; the result lives in the
    /// substitutes' common dimension.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Polynomial> {
        check_dim(self.dim, subs.len())?;
        let out_dim = subs.first().map(|p| p.dim).unwrap_or(0);
        for s in subs {
            check_dim(out_dim, s.dim)?;
        }
        // cache powers per variable
        let mut powers: Vec<Vec<Polynomial>> = subs.iter().map(|s| vec![Polynomial::one(s.dim)]).collect();
        let mut out = Polynomial::zero(out_dim);
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(out_dim, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e as usize];
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Drops the last variable. Fails if the polynomial depends on it.
    pub fn drop_last_var(&self) -> Result<Polynomial> {
        if self.dim == 0 {
            return Err(Error::StructureViolation("cannot drop a variable from a 0-dimensional polynomial".into()));
        }
        if self.depends_on(self.dim - 1) {
            return Err(Error::StructureViolation(format!("polynomial {self} depends on x{}", self.dim)));
        }
        Ok(Polynomial {
            dim: self.dim - 1,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (Monomial(m.0[..self.dim - 1].to_vec()), c.clone()))
                .collect(),
        })
    }

    pub fn compile(&self) -> CompiledPolynomial {
        CompiledPolynomial {
            terms: self.terms.iter().map(|(m, c)| (to_f64(c), m.0.clone())).collect(),
        }
    }

    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson { exp: m.0.clone(), coeff: c.to_string() })
                .collect(),
        }
    }

    pub fn from_json(raw: &PolynomialJson, dim: usize) -> Result<Polynomial> {
        let mut p = Polynomial::zero(dim);
        for t in &raw.terms {
            check_dim(dim, t.exp.len())?;
            p.add_term(Monomial(t.exp.clone()), parse_rational(&t.coeff)?);
        }
        Ok(p)
    }
}

/// Float evaluation form of a polynomial, for the numeric modules.
#[derive(Clone, Debug, Default)]
pub struct CompiledPolynomial {
    terms: Vec<(f64, Vec<u32>)>,
}

impl CompiledPolynomial {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, e) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                match k {
                    0 => {}
                    1 => t *= xi,
                    2 => t *= xi * xi,
                    _ => t *= xi.powi(k as i32),
                }
            }
            acc += t;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub coeff: String,
}

/// Wire form `{"terms":[{"exp":[..],"coeff":"p/q"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub terms: Vec<TermJson>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first reads more naturally
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let vars: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| if e == 1 { format!("x{}", k + 1) } else { format!("x{}^{}", k + 1, e) })
                .collect();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]({})", self.dim, self)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial dimension mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&rat(-1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(i: usize) -> Polynomial {
        Polynomial::var(4, i)
    }

    fn c(n: i64) -> Polynomial {
        Polynomial::constant(4, rat(n))
    }

    fn pt(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&k| rat(k)).collect()
    }

    #[test]
    fn add_examples() {
        assert!((&x(0) + &(-&x(0))).is_zero());
        let x1x3 = &x(0) * &x(2);
        assert_eq!(&x1x3 + &x1x3, x1x3.scale(&rat(2)));
        let p = &x(2).pow(2) + &(&c(2) * &x(1));
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coefficient(&[0, 0, 2, 0]), rat(1));
        assert_eq!(p.coefficient(&[0, 1, 0, 0]), rat(2));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(&x(2) * &x(2), Polynomial::monomial(4, vec![0, 0, 2, 0], rat(1)));
        let lhs = &(&x(0) + &x(1)) * &(&x(0) - &x(1));
        assert_eq!(lhs, &x(0).pow(2) - &x(1).pow(2));
        assert!((&lhs * &Polynomial::zero(4)).is_zero());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Polynomial::var(2, 0);
        let b = Polynomial::var(3, 0);
        assert!(matches!(a.try_add(&b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(a.try_mul(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.eval(&pt(&[1, 2, 3])).is_err());
        assert!(a.partial(2).is_err());
    }

    #[test]
    fn partial_examples() {
        assert_eq!(x(2).pow(2).partial(2).unwrap(), x(2).scale(&rat(2)));
        assert!(x(1).scale(&rat(2)).partial(0).unwrap().is_zero());
        let p = &(&c(4) * &(&x(0) * &x(2))) + &(&c(8) * &(&x(0) * &x(1)));
        assert_eq!(p.partial(1).unwrap(), x(0).scale(&rat(8)));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(x(2).pow(2).eval(&pt(&[0, 0, 0, 0])).unwrap(), rat(0));
        assert_eq!(x(1).scale(&rat(2)).eval(&pt(&[1, 3, 0, 0])).unwrap(), rat(6));
        let p = &x(2).scale(&rat(12)) + &(&x(0) * &x(1)).scale(&rat(8));
        assert_eq!(p.eval(&pt(&[1, 1, 1, 0])).unwrap(), rat(20));
    }

    #[test]
    fn weighted_part_examples() {
        let w = [1, 1, 2, 5];
        let p = &x(2).pow(2) + &x(1).scale(&rat(2));
        assert_eq!(p.weighted_part(&w, 4).unwrap(), x(2).pow(2));
        assert_eq!(p.weighted_part(&w, 1).unwrap(), x(1).scale(&rat(2)));
        assert!(Polynomial::zero(4).weighted_part(&w, 3).unwrap().is_zero());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-4/6").unwrap(), ratio(-2, 3));
        assert_eq!(parse_rational("7").unwrap(), rat(7));
        assert_eq!(parse_rational("0.1").unwrap(), ratio(1, 10));
        assert_eq!(parse_rational("-2.5e-1").unwrap(), ratio(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn json_form() {
        let p = &x(2).pow(2) + &x(1).scale(&ratio(-3, 2));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"terms":[{"exp":[0,1,0,0],"coeff":"-3/2"},{"exp":[0,0,2,0],"coeff":"1"}]}"#);
        let raw: PolynomialJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Polynomial::from_json(&raw, 4).unwrap(), p);
    }

    #[test]
    fn compose_substitutes() {
        // (x1 + x2^2) with x1 -> x2, x2 -> 2 x1
        let p = &x(0) + &x(1).pow(2);
        let subs = vec![x(1), x(0).scale(&rat(2)), x(2), x(3)];
        assert_eq!(p.compose(&subs).unwrap(), &x(1) + &x(0).pow(2).scale(&rat(4)));
    }

    fn arb_poly(dim: usize) -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((prop::collection::vec(0u32..3, dim), -5i64..=5, 1i64..=3), 0..5).prop_map(
            move |ts| Polynomial::from_terms(dim, ts.into_iter().map(|(e, n, d)| (e, ratio(n, d)))).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_poly(3), b in arb_poly(3), c in arb_poly(3)) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn mixed_partials_commute(a in arb_poly(3), i in 0usize..3, j in 0usize..3) {
            prop_assert_eq!(
                a.partial(i).unwrap().partial(j).unwrap(),
                a.partial(j).unwrap().partial(i).unwrap()
            );
        }

        #[test]
        fn weighted_parts_partition(a in arb_poly(4)) {
            let w = [1, 1, 2, 5];
            let parts = a.weighted_parts(&w).unwrap();
            let mut sum = Polynomial::zero(4);
            let mut seen = std::collections::BTreeSet::new();
            for (d, p) in &parts {
                prop_assert_eq!(p, &a.weighted_part(&w, *d).unwrap());
                for (m, _) in p.terms() {
                    prop_assert!(seen.insert(m.clone()));
                }
                sum = &sum + p;
            }
            prop_assert_eq!(sum, a);
        }

        #[test]
        fn substitution_homogeneity(a in arb_poly(4), ln in 1i64..7, ld in 1i64..5,
                                    xs in prop::collection::vec((-6i64..6, 1i64..4), 4)) {
            let w = [1u32, 1, 2, 5];
            let lam = ratio(ln, ld);
            let x: Vec<Rational> = xs.iter().map(|&(n, d)| ratio(n, d)).collect();
            let dx: Vec<Rational> = x.iter().zip(&w).map(|(xi, &wi)| xi * pow_signed(&lam, wi as i32)).collect();
            for (d, p) in a.weighted_parts(&w).unwrap() {
                let lhs = p.eval(&dx).unwrap();
                let rhs = pow_signed(&lam, d as i32) * p.eval(&x).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
