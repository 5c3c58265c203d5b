//! Exact, order-independent accumulation of `f64` values.
//!
//! Every finite double is an integer multiple of 2^-1074, so a sum of doubles
//! is an integer in those units. [`ExactSum`] stores that integer as a short
//! little-endian vector of 32-bit digits held in `i64` slots, kept normalized
//! after every update so reads need no scratch copy. Adding and then subtracting the same
//! values restores a bit-identical accumulator regardless of order, which is
//! what lets block moves be reverted exactly.

use smallvec::SmallVec;
use std::cmp::Ordering;

const DIGIT_BITS: u32 = 32;
const DIGIT_MASK: i64 = (1 << DIGIT_BITS) - 1;

#[derive(Debug, Default)]
pub struct ExactSum {
    /// Digit index (in units of 2^32 · 2^-1074) of `digits[0]`.
    lo: i32,
    /// Every digit but the top one lies in `[0, 2^32)`; the top one is
    /// non-zero and carries the sign.
    digits: SmallVec<[i64; 4]>,
}

// The derived clone copies digits one by one through an iterator; this is
// on the move path, so copy the slice directly.
impl Clone for ExactSum {
    fn clone(&self) -> Self {
        Self {
            lo: self.lo,
            digits: SmallVec::from_slice(&self.digits),
        }
    }
}

fn decompose(x: f64) -> Option<(bool, u64, u32)> {
    assert!(x.is_finite(), "ExactSum only accepts finite values, got {x}");
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let exp = ((bits >> 52) & 0x7ff) as u32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        if frac == 0 {
            None
        } else {
            Some((neg, frac, 0))
        }
    } else {
        Some((neg, frac | (1u64 << 52), exp - 1))
    }
}

fn ldexp(m: f64, e: i32) -> f64 {
    let mut m = m;
    let mut e = e;
    while e > 1000 {
        m *= f64::from_bits(((1000 + 1023) as u64) << 52);
        e -= 1000;
    }
    while e < -1000 {
        m *= f64::from_bits(((-1000i32 + 1023) as u64) << 52);
        e += 1000;
    }
    m * f64::from_bits(((e + 1023) as u64) << 52)
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_f64(x: f64) -> Self {
        let mut s = Self::new();
        s.add_f64(x);
        s
    }

    fn ensure_window(&mut self, lo: i32, hi: i32) {
        if self.digits.is_empty() {
            self.lo = lo;
            self.digits.resize((hi - lo) as usize, 0);
            return;
        }
        if lo < self.lo {
            let extra = (self.lo - lo) as usize;
            self.digits.insert_many(0, std::iter::repeat_n(0, extra));
            self.lo = lo;
        }
        let cur_hi = self.lo + self.digits.len() as i32;
        if hi > cur_hi {
            self.digits.resize((hi - self.lo) as usize, 0);
        }
    }

    pub fn add_f64(&mut self, x: f64) {
        self.add_signed(x, false);
    }

    pub fn sub_f64(&mut self, x: f64) {
        self.add_signed(x, true);
    }

    fn add_signed(&mut self, x: f64, negate: bool) {
        let Some((neg, mant, pos)) = decompose(x) else {
            return;
        };
        let neg = neg ^ negate;
        let k = (pos / DIGIT_BITS) as i32;
        let wide = (mant as u128) << (pos % DIGIT_BITS);
        self.ensure_window(k, k + 3);
        let base = (k - self.lo) as usize;
        for i in 0..3 {
            let d = ((wide >> (32 * i)) as u64 & DIGIT_MASK as u64) as i64;
            if neg {
                self.digits[base + i] -= d;
            } else {
                self.digits[base + i] += d;
            }
        }
        self.normalize();
    }

    pub fn add(&mut self, other: &ExactSum) {
        self.merge(other, false);
    }

    pub fn sub(&mut self, other: &ExactSum) {
        self.merge(other, true);
    }

    fn merge(&mut self, other: &ExactSum, negate: bool) {
        if other.digits.is_empty() {
            return;
        }
        let olo = other.lo;
        let ohi = other.lo + other.digits.len() as i32;
        self.ensure_window(olo, ohi);
        let base = (olo - self.lo) as usize;
        for (i, &d) in other.digits.iter().enumerate() {
            if negate {
                self.digits[base + i] -= d;
            } else {
                self.digits[base + i] += d;
            }
        }
        self.normalize();
    }

    /// Propagates carries so that every digit but the top one lies in
    /// `[0, 2^32)`, then trims zero digits at both ends.
    fn normalize(&mut self) {
        normalize_digits(&mut self.lo, &mut self.digits);
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    /// Exact comparison of the represented values.
    pub fn exact_eq(&self, other: &ExactSum) -> bool {
        if self.lo == other.lo && self.digits == other.digits {
            return true;
        }
        // Non-negative normalized digit strings are unique; negative ones may
        // differ in how the sign is folded, so compare by subtraction.
        if self.signum() != Ordering::Less && other.signum() != Ordering::Less {
            return false;
        }
        let mut d = self.clone();
        d.sub(other);
        d.is_zero()
    }

    pub fn signum(&self) -> Ordering {
        match self.digits.last() {
            None => Ordering::Equal,
            Some(&t) if t < 0 => Ordering::Less,
            Some(_) => Ordering::Greater,
        }
    }

    /// The represented value rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        match self.digits.last() {
            None => 0.0,
            Some(&top) if top > 0 => round_digits(self.lo, &self.digits),
            Some(_) => {
                let mut lo = self.lo;
                let mut d: SmallVec<[i64; 4]> = self.digits.iter().map(|x| -x).collect();
                normalize_digits(&mut lo, &mut d);
                -round_digits(lo, &d)
            }
        }
    }
}

/// Rounds the positive normalized integer `Σ d[i] 2^(32 (lo + i))` units of
/// 2^-1074 to the nearest double.
fn round_digits(lo: i32, d: &[i64]) -> f64 {
    let h = d.len() - 1;
    let get = |i: isize| -> u128 {
        if i < 0 {
            0
        } else {
            d[i as usize] as u128
        }
    };
    let hi = h as isize;
    let u = (get(hi) << 64) | (get(hi - 1) << 32) | get(hi - 2);
    let sticky = h >= 3 && d[..h - 2].iter().any(|&x| x != 0);
    let base = lo + h as i32 - 2;
    let nbits = 128 - u.leading_zeros();
    let (mut mant, mut shift) = if nbits <= 53 {
        (u as u64, 0i32)
    } else {
        let shift = nbits - 53;
        let mant = (u >> shift) as u64;
        let rem = u & ((1u128 << shift) - 1);
        let half = 1u128 << (shift - 1);
        let up = rem > half || (rem == half && (sticky || mant & 1 == 1));
        (mant + up as u64, shift as i32)
    };
    if mant == 1u64 << 53 {
        mant >>= 1;
        shift += 1;
    }
    let e = shift + DIGIT_BITS as i32 * base - 1074;
    ldexp(mant as f64, e)
}

fn normalize_digits(lo: &mut i32, d: &mut SmallVec<[i64; 4]>) {
    let mut carry = 0i64;
    for x in d.iter_mut() {
        let v = *x + carry;
        carry = v >> DIGIT_BITS;
        *x = v & DIGIT_MASK;
    }
    while carry != 0 && carry != -1 {
        let v = carry;
        carry = v >> DIGIT_BITS;
        d.push(v & DIGIT_MASK);
    }
    if carry == -1 {
        // Fold the sign back into the top digit so it becomes negative.
        match d.last_mut() {
            Some(t) => *t -= 1 << DIGIT_BITS,
            None => d.push(-1),
        }
    }
    while let Some(&t) = d.last() {
        if t == 0 {
            d.pop();
        } else {
            break;
        }
    }
    let lead = d.iter().take_while(|&&x| x == 0).count();
    if lead > 0 {
        d.drain(..lead);
        *lo += lead as i32;
    }
    if d.is_empty() {
        *lo = 0;
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        self.exact_eq(other)
    }
}
