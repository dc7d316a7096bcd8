//! Scalar abstraction shared by the float and exact-rational code paths,
//! plus the small numerical helpers (compensated sums, binomial weights)
//! used throughout the crate.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arithmetic the estimators and oracles need from a number type.
///
/// Implemented for `f64` (the hot path) and [`BigRational`] (exact mode used
/// by the verification oracles).
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    /// Running-sum type; compensated for floats, plain for rationals.
    type Acc: Clone + Default + Send;

    fn from_u64(v: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn acc_add(acc: &mut Self::Acc, v: Self);
    fn acc_merge(acc: &mut Self::Acc, other: &Self::Acc);
    fn acc_total(acc: &Self::Acc) -> Self;

    /// `P(K = k)` for `K ~ Bin(n, p)`, `k = 0..=n`.
    fn binomial_weights(n: u32, p: &Self) -> Vec<Self>;

    fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num) / Self::from_u64(den)
    }

    fn powu(&self, exp: u32) -> Self {
        let mut out = Self::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        out
    }
}

impl Scalar for f64 {
    type Acc = NeumaierSum;

    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn acc_add(acc: &mut NeumaierSum, v: f64) {
        acc.add(v);
    }
    fn acc_merge(acc: &mut NeumaierSum, other: &NeumaierSum) {
        acc.merge(other);
    }
    fn acc_total(acc: &NeumaierSum) -> f64 {
        acc.total()
    }
    fn binomial_weights(n: u32, p: &f64) -> Vec<f64> {
        binomial_pmf(n, *p)
    }
    fn powu(&self, exp: u32) -> f64 {
        self.powi(exp as i32)
    }
}

impl Scalar for BigRational {
    type Acc = RationalSum;

    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn acc_add(acc: &mut RationalSum, v: BigRational) {
        acc.0 += v;
    }
    fn acc_merge(acc: &mut RationalSum, other: &RationalSum) {
        acc.0 += &other.0;
    }
    fn acc_total(acc: &RationalSum) -> BigRational {
        acc.0.clone()
    }
    fn binomial_weights(n: u32, p: &BigRational) -> Vec<BigRational> {
        let q = BigRational::one() - p;
        let mut coeff = BigInt::one();
        (0..=n)
            .map(|k| {
                if k > 0 {
                    coeff = coeff.clone() * BigInt::from(n - k + 1) / BigInt::from(k);
                }
                BigRational::from_integer(coeff.clone()) * p.powu(k) * q.powu(n - k)
            })
            .collect()
    }
}

/// Plain exact accumulator for rationals.
#[derive(Clone, Debug)]
pub struct RationalSum(pub BigRational);

impl Default for RationalSum {
    fn default() -> Self {
        RationalSum(BigRational::zero())
    }
}

/// Neumaier's improved Kahan–Babuška summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of a sequence of terms.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().collect::<NeumaierSum>().total()
}

/// Correctly rounded conversion of an arbitrary rational to `f64`.
///
/// `BigRational::to_f64` loses accuracy once numerator and denominator
/// overflow a double, so the quotient is formed on scaled integers.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let num = r.numer().abs();
    let den = r.denom().abs();
    // scale so the integer quotient carries ~64 significant bits
    let shift = 64i64 - (num.bits() as i64 - den.bits() as i64);
    let q = if shift >= 0 {
        (num << (shift as usize)) / den
    } else {
        num / (den << ((-shift) as usize))
    };
    let mant = q.to_f64().unwrap_or(f64::INFINITY);
    let v = mant * 2f64.powi(-shift as i32);
    if neg {
        -v
    } else {
        v
    }
}

/// Parse a decimal (`0.25`, `-1.5e-3`), integer or fraction (`1/3`) string
/// into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(n / d);
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -value } else { value })
}

/// Canonical text form of a rational: `n` or `n/d`, reduced.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Binomial probabilities `P(K = k)` for `K ~ Bin(n, p)`, `k = 0..=n`.
///
/// Built outward from the mode with the ratio recurrence and normalised by
/// the compensated total, so there is no overflow for large `n` and the
/// relative error stays at a few ulps times `n`.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if p <= 0.0 {
        let mut v = vec![0.0; len];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; len];
        v[n as usize] = 1.0;
        return v;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mode = (((n as f64) + 1.0) * p).floor().min(n as f64) as usize;
    let mut w = vec![0.0; len];
    w[mode] = 1.0;
    for k in mode..n as usize {
        // P(k+1)/P(k) = (n-k)/(k+1) * p/q
        w[k + 1] = w[k] * ((n as usize - k) as f64 / (k + 1) as f64) * odds;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * (k as f64 / (n as usize - k + 1) as f64) / odds;
    }
    let total = compensated_sum(w.iter().copied());
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Exact binomial coefficient; panics on overflow of `u64`.
pub fn binomial_coefficient(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}
