//! Exact truncated power series in the grading fugacity `t`.
//!
//! Coefficients are generic over [`Coefficient`]: arbitrary-precision
//! integers for unrefined Hilbert series, exact rationals for plethystic
//! intermediates, and [`Laurent`] multinomials in node fugacities for
//! refined series. The truncation order is inclusive: a series of order
//! `K` stores the coefficients of `t^0 ..= t^K`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("fugacity mismatch: {left:?} vs {right:?}")]
    FugacityMismatch { left: Vec<String>, right: Vec<String> },
    #[error("unknown fugacity `{0}`")]
    UnknownFugacity(String),
    #[error("coefficient t^{requested} requested from a series truncated at order {order}")]
    OrderExceeded { requested: usize, order: usize },
    #[error("plethystic logarithm needs constant term 1, found {0}")]
    NonUnitConstantTerm(String),
    #[error("plethystic exponential needs constant term 0, found {0}")]
    NonzeroConstantTerm(String),
    #[error("coefficient of t^{exponent} is not an integer: {value}")]
    NonIntegralCoefficient { exponent: usize, value: String },
    #[error("series still depends on fugacities {0:?}")]
    FugacitiesRemain(Vec<String>),
    #[error("malformed series JSON: {0}")]
    Json(String),
}

/// Ring operations needed by [`TruncatedSeries`].
pub trait Coefficient: Clone + PartialEq + fmt::Debug + Send + Sync + Zero + One {
    fn from_i64(v: i64) -> Self;
    fn add_assign_ref(&mut self, other: &Self);
    fn sub_assign_ref(&mut self, other: &Self);
    fn mul_ref(&self, other: &Self) -> Self;
}

impl Coefficient for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
}

impl Coefficient for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
}

/// Sparse exponent vector over fugacity indices; zero exponents are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(usize, i64)>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(index: usize, exponent: i64) -> Self {
        if exponent == 0 {
            Monomial::unit()
        } else {
            Monomial(vec![(index, exponent)])
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, i64)>) -> Self {
        let mut out = Monomial::unit();
        for (i, e) in pairs {
            out = out.mul(&Monomial::var(i, e));
        }
        out
    }

    pub fn exponent(&self, index: usize) -> i64 {
        self.0.iter().find(|(i, _)| *i == index).map_or(0, |(_, e)| *e)
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, i64)] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                let e = a[i].1 + b[j].1;
                if e != 0 {
                    out.push((a[i].0, e));
                }
                i += 1;
                j += 1;
            }
        }
        Monomial(out)
    }

    /// Drops fugacity `index` (which must have exponent zero here) and
    /// shifts higher indices down by one.
    fn remove_index(&self, index: usize) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter(|(i, _)| *i != index)
                .map(|&(i, e)| if i > index { (i - 1, e) } else { (i, e) })
                .collect(),
        )
    }
}

/// Laurent multinomial in node fugacities with big-integer coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Laurent {
    terms: BTreeMap<Monomial, BigInt>,
}

impl Laurent {
    pub fn term(monomial: Monomial, coeff: BigInt) -> Self {
        let mut terms = BTreeMap::new();
        if !Zero::is_zero(&coeff) {
            terms.insert(monomial, coeff);
        }
        Laurent { terms }
    }

    pub fn constant(c: BigInt) -> Self {
        Laurent::term(Monomial::unit(), c)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: Monomial, c: &BigInt) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if !Zero::is_zero(c) {
                    v.insert(c.clone());
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if Zero::is_zero(o.get()) {
                    o.remove();
                }
            }
        }
    }

    /// The part of `self` independent of fugacity `index`, with that index removed.
    pub fn constant_term_in(&self, index: usize) -> Laurent {
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.exponent(index) == 0)
            .map(|(m, c)| (m.remove_index(index), c.clone()))
            .collect();
        Laurent { terms }
    }

    /// Value with every fugacity set to 1.
    pub fn at_one(&self) -> BigInt {
        self.terms.values().sum()
    }

    /// Some(c) when the multinomial is the constant c.
    pub fn as_constant(&self) -> Option<BigInt> {
        match self.terms.len() {
            0 => Some(BigInt::zero()),
            1 => self.terms.get(&Monomial::unit()).cloned(),
            _ => None,
        }
    }
}

impl std::ops::Add for Laurent {
    type Output = Laurent;
    fn add(mut self, other: Laurent) -> Laurent {
        self.add_assign_ref(&other);
        self
    }
}

impl std::ops::Mul for Laurent {
    type Output = Laurent;
    fn mul(self, other: Laurent) -> Laurent {
        self.mul_ref(&other)
    }
}

impl Zero for Laurent {
    fn zero() -> Self {
        Laurent::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Laurent {
    fn one() -> Self {
        Laurent::constant(BigInt::one())
    }
}

impl Coefficient for Laurent {
    fn from_i64(v: i64) -> Self {
        Laurent::constant(BigInt::from(v))
    }
    fn add_assign_ref(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c);
        }
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), &-c);
        }
    }
    fn mul_ref(&self, other: &Self) -> Self {
        let mut out = Laurent::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), &(ca * cb));
            }
        }
        out
    }
}

/// Power series in `t` truncated at an inclusive order.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries<C = BigInt> {
    order: usize,
    fugacities: Vec<String>,
    coeffs: Vec<C>,
}

/// Series with exact rational coefficients.
pub type RationalSeries = TruncatedSeries<BigRational>;
/// Series whose coefficients are Laurent multinomials in node fugacities.
pub type RefinedSeries = TruncatedSeries<Laurent>;

impl<C: Coefficient> TruncatedSeries<C> {
    pub fn zero(order: usize) -> Self {
        TruncatedSeries { order, fugacities: Vec::new(), coeffs: vec![C::zero(); order + 1] }
    }

    pub fn one(order: usize) -> Self {
        Self::monomial(order, 0, C::one())
    }

    /// `coeff * t^exponent`, or zero when the exponent exceeds the order.
    pub fn monomial(order: usize, exponent: usize, coeff: C) -> Self {
        let mut s = Self::zero(order);
        if exponent <= order {
            s.coeffs[exponent] = coeff;
        }
        s
    }

    /// Builds a series from low-to-high coefficients, truncating or zero-padding.
    pub fn from_coeffs(order: usize, coeffs: impl IntoIterator<Item = C>) -> Self {
        let mut s = Self::zero(order);
        for (k, c) in coeffs.into_iter().enumerate().take(order + 1) {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn with_fugacities(mut self, fugacities: Vec<String>) -> Self {
        self.fugacities = fugacities;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn fugacities(&self) -> &[String] {
        &self.fugacities
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coefficient(&self, k: usize) -> Result<&C, SeriesError> {
        self.coeffs.get(k).ok_or(SeriesError::OrderExceeded { requested: k, order: self.order })
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        TruncatedSeries {
            order,
            fugacities: self.fugacities.clone(),
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    fn check_context(&self, other: &Self) -> Result<(), SeriesError> {
        // A series without fugacities is compatible with any context.
        if self.fugacities == other.fugacities
            || self.fugacities.is_empty()
            || other.fugacities.is_empty()
        {
            Ok(())
        } else {
            Err(SeriesError::FugacityMismatch {
                left: self.fugacities.clone(),
                right: other.fugacities.clone(),
            })
        }
    }

    fn merged_context(&self, other: &Self) -> Vec<String> {
        if self.fugacities.is_empty() {
            other.fugacities.clone()
        } else {
            self.fugacities.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_context(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncate(order);
        out.fugacities = self.merged_context(other);
        for (c, o) in out.coeffs.iter_mut().zip(&other.coeffs) {
            c.add_assign_ref(o);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_context(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncate(order);
        out.fugacities = self.merged_context(other);
        for (c, o) in out.coeffs.iter_mut().zip(&other.coeffs) {
            c.sub_assign_ref(o);
        }
        Ok(out)
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_context(other)?;
        let order = self.order.min(other.order);
        let mut out = Self::zero(order);
        out.fugacities = self.merged_context(other);
        for (i, a) in self.coeffs.iter().enumerate().take(order + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(order + 1 - i) {
                if !b.is_zero() {
                    let p = a.mul_ref(b);
                    out.coeffs[i + j].add_assign_ref(&p);
                }
            }
        }
        Ok(out)
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: &C) -> Self {
        let mut out = self.clone();
        for x in &mut out.coeffs {
            *x = x.mul_ref(c);
        }
        out
    }

    /// Multiplies by `t^k`, dropping terms beyond the order.
    pub fn shift(&self, k: usize) -> Self {
        let mut out = Self::zero(self.order);
        out.fugacities = self.fugacities.clone();
        for i in 0..=self.order {
            if i + k <= self.order {
                out.coeffs[i + k] = self.coeffs[i].clone();
            }
        }
        out
    }

    /// Divides in place by `(1 - t^d)`.
    pub fn div_one_minus_t_pow(&mut self, d: usize) {
        assert!(d >= 1, "geometric factor needs d >= 1");
        for k in d..=self.order {
            let prev = self.coeffs[k - d].clone();
            self.coeffs[k].add_assign_ref(&prev);
        }
    }

    /// Multiplies in place by `(1 - t^d)`.
    pub fn mul_one_minus_t_pow(&mut self, d: usize) {
        for k in (d..=self.order).rev() {
            let prev = self.coeffs[k - d].clone();
            self.coeffs[k].sub_assign_ref(&prev);
        }
    }

    /// Substitutes `t -> t^k`, keeping the order.
    pub fn substitute_power(&self, k: usize) -> Self {
        let mut out = Self::zero(self.order);
        out.fugacities = self.fugacities.clone();
        for i in 0..=self.order / k.max(1) {
            out.coeffs[i * k] = self.coeffs[i].clone();
        }
        out
    }

    pub fn map<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> TruncatedSeries<D> {
        TruncatedSeries {
            order: self.order,
            fugacities: self.fugacities.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }
}

/// Expansion of `1 / (1 - t^d)` up to `t^order`.
pub fn expand_inverse<C: Coefficient>(d: usize, order: usize) -> TruncatedSeries<C> {
    let mut s = TruncatedSeries::one(order);
    s.div_one_minus_t_pow(d);
    s
}

impl TruncatedSeries<Laurent> {
    /// Keeps only the part of each coefficient independent of fugacity `name`.
    pub fn constant_term(&self, name: &str) -> Result<Self, SeriesError> {
        let index = self
            .fugacities
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| SeriesError::UnknownFugacity(name.to_string()))?;
        let mut fugacities = self.fugacities.clone();
        fugacities.remove(index);
        Ok(TruncatedSeries {
            order: self.order,
            fugacities,
            coeffs: self.coeffs.iter().map(|c| c.constant_term_in(index)).collect(),
        })
    }

    /// Sets every fugacity to 1.
    pub fn at_unit_fugacities(&self) -> TruncatedSeries<BigInt> {
        TruncatedSeries {
            order: self.order,
            fugacities: Vec::new(),
            coeffs: self.coeffs.iter().map(Laurent::at_one).collect(),
        }
    }

    /// Converts a series with no fugacity dependence to integer coefficients.
    pub fn into_unrefined(&self) -> Result<TruncatedSeries<BigInt>, SeriesError> {
        let coeffs = self
            .coeffs
            .iter()
            .map(Laurent::as_constant)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| SeriesError::FugacitiesRemain(self.fugacities.clone()))?;
        Ok(TruncatedSeries { order: self.order, fugacities: Vec::new(), coeffs })
    }
}

impl TruncatedSeries<BigInt> {
    pub fn to_rational(&self) -> RationalSeries {
        self.map(|c| BigRational::from_integer(c.clone()))
    }

    pub fn to_refined(&self) -> RefinedSeries {
        self.map(|c| Laurent::constant(c.clone()))
    }
}

impl RationalSeries {
    pub fn to_integer(&self) -> Result<TruncatedSeries<BigInt>, SeriesError> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if c.is_integer() {
                    Ok(c.to_integer())
                } else {
                    Err(SeriesError::NonIntegralCoefficient { exponent: k, value: c.to_string() })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TruncatedSeries { order: self.order, fugacities: self.fugacities.clone(), coeffs })
    }
}

/// Möbius function by trial division.
pub fn mobius(n: usize) -> i64 {
    assert!(n >= 1);
    let mut n = n;
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Plethystic logarithm `sum_k mu(k)/k log s(t^k)` truncated at `order`.
pub fn plethystic_log(
    s: &TruncatedSeries<BigInt>,
    order: usize,
) -> Result<RationalSeries, SeriesError> {
    let c0 = s.coefficient(0)?;
    if !c0.is_one() {
        return Err(SeriesError::NonUnitConstantTerm(c0.to_string()));
    }
    let order = order.min(s.order());
    let sr = s.truncate(order).to_rational();
    let a = sr.coeffs();

    // log s via n L_n = n a_n - sum_{k<n} k L_k a_{n-k}
    let mut log = vec![BigRational::zero(); order + 1];
    for n in 1..=order {
        let mut acc = &a[n] * rational(n as i64, 1);
        for k in 1..n {
            acc -= &log[k] * &a[n - k] * rational(k as i64, 1);
        }
        log[n] = acc / rational(n as i64, 1);
    }

    let mut out = vec![BigRational::zero(); order + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        for k in (1..=n).filter(|k| n % k == 0) {
            let mu = mobius(k);
            if mu != 0 {
                *slot += &log[n / k] * rational(mu, k as i64);
            }
        }
    }
    Ok(RationalSeries::from_coeffs(order, out))
}

/// Plethystic exponential `exp(sum_k s(t^k)/k)` truncated at `order`.
pub fn plethystic_exp(s: &RationalSeries, order: usize) -> Result<RationalSeries, SeriesError> {
    let c0 = s.coefficient(0)?;
    if !Zero::is_zero(c0) {
        return Err(SeriesError::NonzeroConstantTerm(c0.to_string()));
    }
    let order = order.min(s.order());
    let a = s.coeffs();

    let mut f = vec![BigRational::zero(); order + 1];
    for (n, slot) in f.iter_mut().enumerate().skip(1) {
        for k in (1..=n).filter(|k| n % k == 0) {
            *slot += &a[n / k] * rational(1, k as i64);
        }
    }
    // exp via n E_n = sum_{k=1}^n k F_k E_{n-k}
    let mut e = vec![BigRational::zero(); order + 1];
    e[0] = BigRational::one();
    for n in 1..=order {
        let mut acc = BigRational::zero();
        for k in 1..=n {
            acc += &f[k] * &e[n - k] * rational(k as i64, 1);
        }
        e[n] = acc / rational(n as i64, 1);
    }
    Ok(RationalSeries::from_coeffs(order, e))
}

trait TextCoeff {
    /// Returns (is_negative, magnitude text, magnitude is one, needs parentheses).
    fn text_parts(&self, names: &[String]) -> (bool, String, bool, bool);
}

impl TextCoeff for BigInt {
    fn text_parts(&self, _: &[String]) -> (bool, String, bool, bool) {
        let mag = self.abs();
        (self.is_negative(), mag.to_string(), mag.is_one(), false)
    }
}

impl TextCoeff for BigRational {
    fn text_parts(&self, _: &[String]) -> (bool, String, bool, bool) {
        let mag = self.abs();
        (self.is_negative(), mag.to_string(), mag.is_one(), false)
    }
}

fn monomial_text(m: &Monomial, names: &[String]) -> String {
    m.pairs()
        .iter()
        .map(|&(i, e)| {
            let name = names.get(i).map_or_else(|| format!("z{i}"), Clone::clone);
            if e == 1 {
                name
            } else {
                format!("{name}^{e}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

impl TextCoeff for Laurent {
    fn text_parts(&self, names: &[String]) -> (bool, String, bool, bool) {
        if let Some(c) = self.as_constant() {
            return c.text_parts(names);
        }
        let mut body = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            let mono = monomial_text(m, names);
            let piece = match (m.is_unit(), mag.is_one()) {
                (true, _) => mag.to_string(),
                (false, true) => mono,
                (false, false) => format!("{mag}*{mono}"),
            };
            match (k, c.is_negative()) {
                (0, true) => body.push_str(&format!("-{piece}")),
                (0, false) => body.push_str(&piece),
                (_, true) => body.push_str(&format!(" - {piece}")),
                (_, false) => body.push_str(&format!(" + {piece}")),
            }
        }
        let multi = self.terms.len() > 1;
        (false, body, false, multi)
    }
}

impl<C: Coefficient + TextCoeff> fmt::Display for TruncatedSeries<C> {
    /// Renders as `1 + 3*t^2 - t^4`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let (neg, mag, unit, paren) = c.text_parts(&self.fugacities);
            let mag = if paren { format!("({mag})") } else { mag };
            let power = match k {
                0 => String::new(),
                1 => "t".to_string(),
                _ => format!("t^{k}"),
            };
            let term = match (k, unit) {
                (0, _) => mag,
                (_, true) => power,
                (_, false) => format!("{mag}*{power}"),
            };
            match (first, neg) {
                (true, true) => write!(f, "-{term}")?,
                (true, false) => write!(f, "{term}")?,
                (false, true) => write!(f, " - {term}")?,
                (false, false) => write!(f, " + {term}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// JSON encoding of series coefficients; numbers are decimal strings.
pub trait JsonCoefficient: Coefficient {
    fn to_json(&self, names: &[String]) -> Value;
    fn from_json(v: &Value, names: &[String]) -> Result<Self, SeriesError>;
}

fn parse_bigint(v: &Value) -> Result<BigInt, SeriesError> {
    let s =
        v.as_str().ok_or_else(|| SeriesError::Json(format!("expected decimal string, got {v}")))?;
    s.parse().map_err(|_| SeriesError::Json(format!("not an integer: {s:?}")))
}

impl JsonCoefficient for BigInt {
    fn to_json(&self, _: &[String]) -> Value {
        Value::String(self.to_string())
    }
    fn from_json(v: &Value, _: &[String]) -> Result<Self, SeriesError> {
        parse_bigint(v)
    }
}

impl JsonCoefficient for BigRational {
    fn to_json(&self, _: &[String]) -> Value {
        Value::String(self.to_string())
    }
    fn from_json(v: &Value, _: &[String]) -> Result<Self, SeriesError> {
        let s = v
            .as_str()
            .ok_or_else(|| SeriesError::Json(format!("expected decimal string, got {v}")))?;
        s.parse().map_err(|_| SeriesError::Json(format!("not a rational: {s:?}")))
    }
}

impl JsonCoefficient for Laurent {
    fn to_json(&self, names: &[String]) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(m, c)| {
                    let exps: Map<String, Value> =
                        m.pairs().iter().map(|&(i, e)| (names[i].clone(), json!(e))).collect();
                    json!({ "exponents": exps, "coefficient": c.to_string() })
                })
                .collect(),
        )
    }

    fn from_json(v: &Value, names: &[String]) -> Result<Self, SeriesError> {
        let items = v
            .as_array()
            .ok_or_else(|| SeriesError::Json("refined coefficient must be an array".into()))?;
        let mut out = Laurent::default();
        for item in items {
            let coeff = parse_bigint(&item["coefficient"])?;
            let exps = item["exponents"]
                .as_object()
                .ok_or_else(|| SeriesError::Json("missing exponents object".into()))?;
            let mut pairs = Vec::new();
            for (name, e) in exps {
                let idx = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| SeriesError::UnknownFugacity(name.clone()))?;
                let e = e.as_i64().ok_or_else(|| SeriesError::Json(format!("bad exponent {e}")))?;
                pairs.push((idx, e));
            }
            out.add_term(Monomial::from_pairs(pairs), &coeff);
        }
        Ok(out)
    }
}

impl<C: JsonCoefficient> TruncatedSeries<C> {
    /// `{"order":K,"coeffs":{"0":"1","2":"3"}}`, plus `"fugacities"` when refined.
    pub fn to_json(&self) -> Value {
        let mut coeffs = Map::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs.insert(k.to_string(), c.to_json(&self.fugacities));
            }
        }
        let mut obj = Map::new();
        obj.insert("order".into(), json!(self.order));
        if !self.fugacities.is_empty() {
            obj.insert("fugacities".into(), json!(self.fugacities));
        }
        obj.insert("coeffs".into(), Value::Object(coeffs));
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self, SeriesError> {
        let order = v["order"]
            .as_u64()
            .ok_or_else(|| SeriesError::Json("missing integer `order`".into()))?
            as usize;
        let fugacities: Vec<String> = match v.get("fugacities") {
            None => Vec::new(),
            Some(f) => serde_json::from_value(f.clone())
                .map_err(|e| SeriesError::Json(format!("fugacities: {e}")))?,
        };
        let coeffs = v["coeffs"]
            .as_object()
            .ok_or_else(|| SeriesError::Json("missing `coeffs` object".into()))?;
        let mut s = Self::zero(order).with_fugacities(fugacities);
        for (k, c) in coeffs {
            let k: usize =
                k.parse().map_err(|_| SeriesError::Json(format!("bad exponent key {k:?}")))?;
            if k > order {
                return Err(SeriesError::Json(format!("exponent {k} exceeds order {order}")));
            }
            s.coeffs[k] = C::from_json(c, &s.fugacities)?;
        }
        Ok(s)
    }
}

/// Coefficient of `t^k` as an `i64`, when it fits.
pub fn small_coefficient(s: &TruncatedSeries<BigInt>, k: usize) -> Option<i64> {
    s.coefficient(k).ok().and_then(ToPrimitive::to_i64)
}
