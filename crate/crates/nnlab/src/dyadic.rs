//! Exact arithmetic on dyadic rationals in `[0, 1]`.
//!
//! A [`Dyadic`] is a number `m / 2^e` stored in canonical form: the numerator
//! is odd (or zero with exponent zero) and never exceeds the denominator.
//! All arithmetic is exact. Comparisons first go through a double-precision
//! filter with a tracked error bound ([`ApproxFloat`]) and fall back to exact
//! big-integer comparison only when the float intervals overlap; points in
//! this laboratory routinely differ at bit positions far beyond double
//! precision, so the fallback is load-bearing, not a corner case.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Default hard cap on the exponent (denominator bits) enforced by the
/// process generators. Values this large indicate runaway precision.
pub const DEFAULT_PRECISION_CAP: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DyadicError {
    #[error("numerator exceeds 2^{exponent} (value would leave [0,1])")]
    OutOfRange { exponent: u64 },
    #[error("sum exceeds 1")]
    SumAboveOne,
    #[error("difference is negative")]
    NegativeResult,
    #[error("0 and 1 belong to no odd-numerator order")]
    NoOrder,
    #[error("{value} does not have order {order}")]
    NotOfOrder { value: String, order: u64 },
    #[error("index {index} is out of range for order {order} (1..=2^{max_log2})")]
    IndexOutOfRange {
        index: u64,
        order: u64,
        max_log2: u64,
    },
    #[error("malformed dyadic literal {input:?}, expected \"m/2^e\"")]
    ParseError { input: String },
    #[error("malformed dyadic binary encoding")]
    DecodeError,
}

/// A double-precision stand-in for an exact value, with a guaranteed bound
/// `|value - exact| <= error_bound`. Order decisions are only made when the
/// widened intervals are disjoint.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ApproxFloat {
    pub value: f64,
    pub error_bound: f64,
}

impl ApproxFloat {
    /// Compares two filtered values. `None` means the intervals overlap and
    /// the caller must fall back to an exact comparison.
    pub fn try_cmp(self, other: ApproxFloat) -> Option<Ordering> {
        if self.error_bound == 0.0 && other.error_bound == 0.0 {
            return self.value.partial_cmp(&other.value);
        }
        // The exact value lies in [value, value + error_bound]; next_up makes
        // the computed upper end safe against the rounding of the addition.
        let hi_self = (self.value + self.error_bound).next_up();
        let hi_other = (other.value + other.error_bound).next_up();
        if hi_self < other.value {
            return Some(Ordering::Less);
        }
        if hi_other < self.value {
            return Some(Ordering::Greater);
        }
        None
    }
}

#[derive(Debug)]
struct Repr {
    num: BigUint,
    exp: u64,
    approx: ApproxFloat,
}

/// Exact `m / 2^e` in `[0, 1]`, canonical (odd numerator, or `0/2^0`).
///
/// Values are immutable; clones share the underlying representation.
#[derive(Clone)]
pub struct Dyadic {
    repr: Arc<Repr>,
}

/// Exponent below which the float approximation gives up and reports a fixed
/// safe bound. Keeps every intermediate strictly inside normal f64 range.
const TINY_EXP: i64 = -969;

fn exp2i(s: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&s));
    f64::from_bits(((s + 1023) as u64) << 52)
}

fn top_u64(num: &BigUint, shift: u64) -> u64 {
    let shifted: BigUint = num >> shift;
    let digits = shifted.to_u64_digits();
    match digits.len() {
        0 => 0,
        1 => digits[0],
        _ => unreachable!("top bits exceed one limb"),
    }
}

fn approx_of(num: &BigUint, exp: u64) -> ApproxFloat {
    if num.is_zero() {
        return ApproxFloat {
            value: 0.0,
            error_bound: 0.0,
        };
    }
    let bits = num.bits();
    // The exact value lies in [2^(bits-1-exp), 2^(bits-exp)).
    let magnitude = bits as i64 - exp as i64;
    if magnitude < TINY_EXP {
        return ApproxFloat {
            value: 0.0,
            error_bound: exp2i(TINY_EXP),
        };
    }
    if bits <= 53 {
        let m = top_u64(num, 0);
        ApproxFloat {
            value: m as f64 * exp2i(-(exp as i64)),
            error_bound: 0.0,
        }
    } else {
        let shift = bits - 53;
        let t = top_u64(num, shift);
        let s = shift as i64 - exp as i64;
        // Exact value in [t*2^s, (t+1)*2^s); both products below are exact.
        ApproxFloat {
            value: t as f64 * exp2i(s),
            error_bound: exp2i(s),
        }
    }
}

impl Dyadic {
    /// Builds `m / 2^e`, cancelling factors of two. Rejects values above 1.
    pub fn new(mut num: BigUint, mut exp: u64) -> Result<Dyadic, DyadicError> {
        if num.is_zero() {
            return Ok(Dyadic::from_repr(BigUint::zero(), 0));
        }
        let tz = num.trailing_zeros().unwrap_or(0);
        let cancel = tz.min(exp);
        if cancel > 0 {
            num >>= cancel;
            exp -= cancel;
        }
        // Canonical numerator is odd unless the remaining value is still even,
        // which can only mean m > 2^e.
        if num.bits() > exp && !(num.is_one() && exp == 0) {
            return Err(DyadicError::OutOfRange { exponent: exp });
        }
        Ok(Dyadic::from_repr(num, exp))
    }

    fn from_repr(num: BigUint, exp: u64) -> Dyadic {
        let approx = approx_of(&num, exp);
        Dyadic {
            repr: Arc::new(Repr { num, exp, approx }),
        }
    }

    pub fn zero() -> Dyadic {
        Dyadic::from_repr(BigUint::zero(), 0)
    }

    pub fn one() -> Dyadic {
        Dyadic::from_repr(BigUint::one(), 0)
    }

    pub fn one_half() -> Dyadic {
        Dyadic::from_repr(BigUint::one(), 1)
    }

    /// Convenience constructor for small literals.
    pub fn from_u64_ratio(num: u64, exp: u64) -> Result<Dyadic, DyadicError> {
        Dyadic::new(BigUint::from(num), exp)
    }

    /// `2^-e`.
    pub fn pow2_neg(exp: u64) -> Dyadic {
        Dyadic::from_repr(BigUint::one(), exp)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.repr.num
    }

    pub fn exponent(&self) -> u64 {
        self.repr.exp
    }

    pub fn approx(&self) -> ApproxFloat {
        self.repr.approx
    }

    /// Best-effort `f64` view, for plotting and report output only.
    pub fn to_f64_lossy(&self) -> f64 {
        self.repr.approx.value
    }

    pub fn is_zero(&self) -> bool {
        self.repr.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.repr.exp == 0 && self.repr.num.is_one()
    }

    /// Exact order: `e` such that the value has odd numerator over `2^e`.
    /// 0 and 1 are rejected; they belong to no such order.
    pub fn order(&self) -> Result<u64, DyadicError> {
        if self.is_zero() || self.is_one() {
            return Err(DyadicError::NoOrder);
        }
        Ok(self.repr.exp)
    }

    /// Total order of exact values: float filter first, exact fallback on
    /// overlap.
    pub fn compare(&self, other: &Dyadic) -> Ordering {
        if let Some(ord) = self.repr.approx.try_cmp(other.repr.approx) {
            return ord;
        }
        self.compare_exact(other)
    }

    /// Pure big-integer comparison, independent of the filter. Kept public so
    /// the filtered path can be audited against it.
    pub fn compare_exact(&self, other: &Dyadic) -> Ordering {
        let (ea, eb) = (self.repr.exp, other.repr.exp);
        match ea.cmp(&eb) {
            Ordering::Equal => self.repr.num.cmp(&other.repr.num),
            Ordering::Greater => self.repr.num.cmp(&(&other.repr.num << (ea - eb))),
            Ordering::Less => (&self.repr.num << (eb - ea)).cmp(&other.repr.num),
        }
    }

    /// Exact sum; rejects results above 1 since points live in `[0, 1]`.
    pub fn add(&self, other: &Dyadic) -> Result<Dyadic, DyadicError> {
        let exp = self.repr.exp.max(other.repr.exp);
        let a = &self.repr.num << (exp - self.repr.exp);
        let b = &other.repr.num << (exp - other.repr.exp);
        let sum = a + b;
        Dyadic::new(sum, exp).map_err(|_| DyadicError::SumAboveOne)
    }

    /// Exact `self - other`; rejects negative results.
    pub fn sub(&self, other: &Dyadic) -> Result<Dyadic, DyadicError> {
        if self.compare(other) == Ordering::Less {
            return Err(DyadicError::NegativeResult);
        }
        let exp = self.repr.exp.max(other.repr.exp);
        let a = &self.repr.num << (exp - self.repr.exp);
        let b = &other.repr.num << (exp - other.repr.exp);
        Ok(Dyadic::new(a - b, exp).expect("difference of in-range values is in range"))
    }

    /// `|self - other|`, the metric on `[0, 1]`.
    pub fn abs_diff(&self, other: &Dyadic) -> Dyadic {
        match self.compare(other) {
            Ordering::Less => other.sub(self).expect("ordered subtraction"),
            _ => self.sub(other).expect("ordered subtraction"),
        }
    }

    /// Exact `self / 2^j`.
    pub fn shift_right(&self, j: u64) -> Dyadic {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic::from_repr(self.repr.num.clone(), self.repr.exp + j)
    }

    /// Serializes to the compact binary form: LEB128 exponent, LEB128 byte
    /// count, big-endian magnitude bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mag = if self.is_zero() {
            Vec::new()
        } else {
            self.repr.num.to_bytes_be()
        };
        let mut out = Vec::with_capacity(mag.len() + 10);
        write_varint(&mut out, self.repr.exp);
        write_varint(&mut out, mag.len() as u64);
        out.extend_from_slice(&mag);
        out
    }

    /// Decodes [`Dyadic::to_bytes`] output, validating canonical form.
    pub fn from_bytes(buf: &[u8]) -> Result<(Dyadic, usize), DyadicError> {
        let (exp, n1) = read_varint(buf).ok_or(DyadicError::DecodeError)?;
        let (len, n2) = read_varint(&buf[n1..]).ok_or(DyadicError::DecodeError)?;
        let start = n1 + n2;
        let end = start
            .checked_add(len as usize)
            .ok_or(DyadicError::DecodeError)?;
        if buf.len() < end {
            return Err(DyadicError::DecodeError);
        }
        let mag = &buf[start..end];
        if !mag.is_empty() && mag[0] == 0 {
            return Err(DyadicError::DecodeError);
        }
        let num = BigUint::from_bytes_be(mag);
        let value = Dyadic::new(num, exp).map_err(|_| DyadicError::DecodeError)?;
        // Canonical encodings only: re-encoding must not change anything.
        if value.repr.exp != exp {
            return Err(DyadicError::DecodeError);
        }
        Ok((value, end))
    }
}

/// The `i`-th element of the order-`p` odd-numerator dyadics sorted by exact
/// distance to `d`, ties broken toward the smaller value. `i` is 1-based, so
/// `i = 1` returns `d` itself. The result always satisfies
/// `|result - d| <= i / 2^(p-1)`.
pub fn nth_closest_dyadic(d: &Dyadic, p: u64, i: u64) -> Result<Dyadic, DyadicError> {
    if p == 0 || d.order().ok() != Some(p) {
        return Err(DyadicError::NotOfOrder {
            value: d.to_string(),
            order: p,
        });
    }
    let count_log2 = p - 1;
    if i == 0 || (count_log2 < 64 && i > (1u64 << count_log2)) {
        return Err(DyadicError::IndexOutOfRange {
            index: i,
            order: p,
            max_log2: count_log2,
        });
    }
    // Elements are (2j+1)/2^p for j in [0, 2^(p-1)); d sits at j0. Walk the
    // ring of offsets 0, -1, +1, -2, +2, ... clipping at the boundary; the
    // smaller-j twin of each tied pair comes first.
    let j0: BigUint = (d.numerator() - 1u32) >> 1;
    let j_max: BigUint = (BigUint::one() << count_log2) - 1u32;
    let mut remaining = i;
    let mut r = BigUint::zero();
    loop {
        if r.is_zero() {
            remaining -= 1;
            if remaining == 0 {
                return Ok(make_order_p(&j0, p));
            }
        } else {
            if j0 >= r {
                remaining -= 1;
                if remaining == 0 {
                    return Ok(make_order_p(&(&j0 - &r), p));
                }
            }
            let hi = &j0 + &r;
            if hi <= j_max {
                remaining -= 1;
                if remaining == 0 {
                    return Ok(make_order_p(&hi, p));
                }
            }
        }
        r += 1u32;
    }
}

fn make_order_p(j: &BigUint, p: u64) -> Dyadic {
    Dyadic::from_repr((j << 1u32) + 1u32, p)
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(buf: &[u8]) -> Option<(u64, usize)> {
    let mut v: u64 = 0;
    for (i, &byte) in buf.iter().enumerate().take(10) {
        v |= u64::from(byte & 0x7f) << (7 * i);
        if byte & 0x80 == 0 {
            return Some((v, i + 1));
        }
    }
    None
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.repr.exp == other.repr.exp && self.repr.num == other.repr.num
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        self.compare(other)
    }
}

impl Hash for Dyadic {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.repr.exp.hash(state);
        self.repr.num.hash(state);
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.repr.num, self.repr.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Dyadic {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DyadicError::ParseError {
            input: s.to_string(),
        };
        let (m, e) = s.split_once("/2^").ok_or_else(err)?;
        let num = BigUint::from_str(m.trim()).map_err(|_| err())?;
        let exp = u64::from_str(e.trim()).map_err(|_| err())?;
        Dyadic::new(num, exp)
    }
}

impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dy(m: u64, e: u64) -> Dyadic {
        Dyadic::from_u64_ratio(m, e).unwrap()
    }

    #[test]
    fn normalize_cancels_common_factors() {
        let v = dy(6, 3);
        assert_eq!(v.numerator(), &BigUint::from(3u32));
        assert_eq!(v.exponent(), 2);
    }

    #[test]
    fn normalize_zero_and_full_scale() {
        let zero = dy(0, 5);
        assert!(zero.is_zero());
        assert_eq!(zero.exponent(), 0);
        let one = dy(1 << 10, 10);
        assert!(one.is_one());
        assert_eq!(one.exponent(), 0);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            Dyadic::from_u64_ratio(9, 3),
            Err(DyadicError::OutOfRange { .. })
        ));
        assert!(Dyadic::from_u64_ratio(8, 3).unwrap().is_one());
    }

    #[test]
    fn arithmetic_examples() {
        assert!(dy(1, 1).abs_diff(&dy(1, 1)).is_zero());
        assert_eq!(dy(3, 3).abs_diff(&dy(1, 3)), dy(1, 2));
        assert_eq!(dy(1, 2).add(&dy(1, 3)).unwrap(), dy(3, 3));
        assert!(matches!(
            dy(3, 2).add(&dy(1, 1)),
            Err(DyadicError::SumAboveOne)
        ));
        assert!(matches!(
            dy(1, 3).sub(&dy(1, 2)),
            Err(DyadicError::NegativeResult)
        ));
    }

    #[test]
    fn shift_right_examples() {
        assert_eq!(Dyadic::one().shift_right(3), dy(1, 3));
        assert!(Dyadic::zero().shift_right(100).is_zero());
        assert_eq!(dy(3, 3).shift_right(2), dy(3, 5));
    }

    #[test]
    fn compare_examples() {
        assert_eq!(dy(1, 1).compare(&dy(1, 1)), Ordering::Equal);
        assert_eq!(dy(3, 3).compare(&dy(5, 3)), Ordering::Less);
        // 1/2 - 2^-80 differs from 1/2 only beyond double precision; the
        // filter must fall back and still get the exact answer.
        let near = Dyadic::one_half().sub(&Dyadic::pow2_neg(80)).unwrap();
        assert_eq!(near.compare(&Dyadic::one_half()), Ordering::Less);
        assert!(near.approx().try_cmp(Dyadic::one_half().approx()).is_none());
    }

    #[test]
    fn order_examples() {
        assert_eq!(dy(5, 3).order().unwrap(), 3);
        assert_eq!(dy(1, 1).order().unwrap(), 1);
        assert_eq!(dy(7, 10).order().unwrap(), 10);
        assert!(matches!(Dyadic::zero().order(), Err(DyadicError::NoOrder)));
        assert!(matches!(Dyadic::one().order(), Err(DyadicError::NoOrder)));
    }

    #[test]
    fn nth_closest_examples() {
        let d = dy(3, 3);
        assert_eq!(nth_closest_dyadic(&d, 3, 1).unwrap(), dy(3, 3));
        assert_eq!(nth_closest_dyadic(&d, 3, 2).unwrap(), dy(1, 3));
        assert_eq!(nth_closest_dyadic(&d, 3, 3).unwrap(), dy(5, 3));
        assert_eq!(nth_closest_dyadic(&d, 3, 4).unwrap(), dy(7, 3));
        assert!(nth_closest_dyadic(&d, 3, 5).is_err());
        assert!(nth_closest_dyadic(&d, 3, 0).is_err());
        // 1/2 is not of order 3.
        assert!(nth_closest_dyadic(&Dyadic::one_half(), 3, 1).is_err());
    }

    /// Brute-force reference: enumerate all of the order-p dyadics, sort by
    /// (distance, value), take the i-th.
    fn nth_closest_by_enumeration(d: &Dyadic, p: u64, i: u64) -> Dyadic {
        let mut all: Vec<Dyadic> = (0..(1u64 << (p - 1))).map(|j| dy(2 * j + 1, p)).collect();
        all.sort_by(|a, b| {
            a.abs_diff(d)
                .compare_exact(&b.abs_diff(d))
                .then(a.compare_exact(b))
        });
        all[(i - 1) as usize].clone()
    }

    #[test]
    fn nth_closest_matches_enumeration() {
        for p in 1..=6u64 {
            for j in 0..(1u64 << (p - 1)) {
                let d = dy(2 * j + 1, p);
                for i in 1..=(1u64 << (p - 1)) {
                    let got = nth_closest_dyadic(&d, p, i).unwrap();
                    let want = nth_closest_by_enumeration(&d, p, i);
                    assert_eq!(got, want, "d={d} p={p} i={i}");
                }
            }
        }
    }

    #[test]
    fn nth_closest_distance_bound_and_monotone() {
        for p in 2..=7u64 {
            for j in [0u64, 1, (1 << (p - 1)) - 1] {
                let d = dy(2 * j + 1, p);
                let mut prev: Option<Dyadic> = None;
                for i in 1..=(1u64 << (p - 1)) {
                    let got = nth_closest_dyadic(&d, p, i).unwrap();
                    let dist = got.abs_diff(&d);
                    if let Some(pd) = prev {
                        assert_ne!(dist.compare(&pd), Ordering::Less);
                    }
                    // |D_{k,i} - d| <= i / 2^(p-1)
                    let bound = Dyadic::new(BigUint::from(i), p - 1).unwrap();
                    assert_ne!(dist.compare(&bound), Ordering::Greater);
                    prev = Some(dist);
                }
            }
        }
    }

    /// At the interval edges the expansion is one-sided; check both ends at
    /// an order far beyond machine words.
    #[test]
    fn nth_closest_clips_at_boundaries_large_order() {
        let p = 200u64;
        let leftmost = Dyadic::new(BigUint::one(), p).unwrap();
        for i in 1..=20u64 {
            let got = nth_closest_dyadic(&leftmost, p, i).unwrap();
            let want = Dyadic::new(BigUint::from(2 * i - 1), p).unwrap();
            assert_eq!(got, want, "left edge i={i}");
        }
        let rightmost = Dyadic::new((BigUint::one() << p) - 1u32, p).unwrap();
        for i in 1..=20u64 {
            let got = nth_closest_dyadic(&rightmost, p, i).unwrap();
            let want = Dyadic::new((BigUint::one() << p) - BigUint::from(2 * i - 1), p).unwrap();
            assert_eq!(got, want, "right edge i={i}");
        }
        // One step in from the left edge: the lone left twin comes before
        // its tied right partner, then everything expands rightward.
        let near_left = Dyadic::new(BigUint::from(3u32), p).unwrap();
        let expect = [3u64, 1, 5, 7, 9];
        for (i, m) in expect.iter().enumerate() {
            let got = nth_closest_dyadic(&near_left, p, i as u64 + 1).unwrap();
            assert_eq!(got, Dyadic::new(BigUint::from(*m), p).unwrap());
        }
    }

    #[test]
    fn text_round_trip() {
        for v in [Dyadic::zero(), Dyadic::one(), dy(5, 3), dy(101, 9)] {
            let s = v.to_string();
            let back: Dyadic = s.parse().unwrap();
            assert_eq!(back, v);
        }
        assert!("3/4".parse::<Dyadic>().is_err());
        assert!("x/2^2".parse::<Dyadic>().is_err());
    }

    #[test]
    fn binary_round_trip_rejects_noncanonical() {
        let v = dy(5, 3);
        let bytes = v.to_bytes();
        let (back, used) = Dyadic::from_bytes(&bytes).unwrap();
        assert_eq!(back, v);
        assert_eq!(used, bytes.len());
        // Leading zero bytes and even numerators are rejected.
        assert!(Dyadic::from_bytes(&[3, 1, 0]).is_err());
        assert!(Dyadic::from_bytes(&[3, 1, 4]).is_err());
    }

    #[test]
    fn tiny_values_filter_is_safe() {
        let tiny = Dyadic::pow2_neg(5000);
        let tinier = Dyadic::pow2_neg(5001);
        assert_eq!(tiny.compare(&tinier), Ordering::Greater);
        assert_eq!(tiny.compare(&tiny.clone()), Ordering::Equal);
        assert_eq!(Dyadic::zero().compare(&tiny), Ordering::Less);
    }

    fn arb_dyadic() -> impl Strategy<Value = Dyadic> {
        (proptest::collection::vec(any::<u8>(), 0..12), 0u64..96).prop_map(|(bytes, extra)| {
            let num = BigUint::from_bytes_be(&bytes);
            let bits = num.bits();
            Dyadic::new(num, bits + extra).unwrap()
        })
    }

    proptest! {
        #[test]
        fn filter_agrees_with_exact(a in arb_dyadic(), b in arb_dyadic()) {
            prop_assert_eq!(a.compare(&b), a.compare_exact(&b));
        }

        /// Near-ties at deep bit positions: pairs differing by 2^-e for e up
        /// to 4096 must still compare exactly.
        #[test]
        fn filter_agrees_on_deep_near_ties(a in arb_dyadic(), e in 1u64..4096) {
            let eps = Dyadic::pow2_neg(e);
            if let Ok(b) = a.add(&eps) {
                prop_assert_eq!(a.compare(&b), Ordering::Less);
                prop_assert_eq!(b.compare(&a), Ordering::Greater);
                prop_assert_eq!(a.compare(&b), a.compare_exact(&b));
            }
            if let Ok(c) = a.sub(&eps) {
                prop_assert_eq!(a.compare(&c), Ordering::Greater);
                prop_assert_eq!(c.compare(&a), c.compare_exact(&a));
            }
        }

        #[test]
        fn abs_diff_is_a_metric(a in arb_dyadic(), b in arb_dyadic(), c in arb_dyadic()) {
            // symmetry
            prop_assert_eq!(a.abs_diff(&b), b.abs_diff(&a));
            // identity of indiscernibles
            prop_assert_eq!(a.abs_diff(&b).is_zero(), a == b);
            // triangle inequality
            let ab = a.abs_diff(&b);
            let bc = b.abs_diff(&c);
            let ac = a.abs_diff(&c);
            let sum = ab.add(&bc).unwrap_or_else(|_| Dyadic::one());
            if ab.add(&bc).is_ok() {
                prop_assert_ne!(ac.compare(&sum), Ordering::Greater);
            }
        }

        #[test]
        fn shift_distributes_over_add(a in arb_dyadic(), b in arb_dyadic(), j in 0u64..200) {
            if let Ok(sum) = a.add(&b) {
                let lhs = sum.shift_right(j);
                let rhs = a.shift_right(j).add(&b.shift_right(j)).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }

        /// Values straddling the filter's give-up threshold (around
        /// 2^-969) must still order correctly through the fallback.
        #[test]
        fn filter_safe_at_tiny_threshold(bits in 1u64..20, around in 900u64..1100, e in 1u64..40) {
            let num = (BigUint::one() << bits) - 1u32;
            let a = Dyadic::new(num, bits + around).unwrap();
            let eps = Dyadic::pow2_neg(a.exponent() + e);
            let b = a.add(&eps).unwrap();
            prop_assert_eq!(a.compare(&b), Ordering::Less);
            prop_assert_eq!(a.compare(&b), a.compare_exact(&b));
            prop_assert_eq!(b.compare(&a), Ordering::Greater);
            prop_assert_eq!(a.compare(&a.clone()), Ordering::Equal);
            prop_assert_eq!(Dyadic::zero().compare(&a), Ordering::Less);
        }

        #[test]
        fn serialization_round_trips(a in arb_dyadic()) {
            let text: Dyadic = a.to_string().parse().unwrap();
            prop_assert_eq!(&text, &a);
            let (bin, _) = Dyadic::from_bytes(&a.to_bytes()).unwrap();
            prop_assert_eq!(&bin, &a);
        }
    }
}
