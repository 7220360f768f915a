//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s
//! with `|lo| ≤ ulp(hi)/2`, good for about 32 significant digits.
//!
//! Only what the local kernel solves need: `+ - * /`, `sqrt` and `exp`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Unit roundoff, `2⁻¹⁰⁶`.
pub const EPSILON: f64 = 1.232595164407831e-32;

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.3190468138462996e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[cfg(target_feature = "fma")]
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[cfg(not(target_feature = "fma"))]
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    #[inline]
    fn split(a: f64) -> (f64, f64) {
        let t = 134217729.0 * a;
        let hi = t - (t - a);
        (hi, a - hi)
    }
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn mul_f64_exact(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    /// `self += a·b` with a single renormalization; the error stays within
    /// a few units of `2⁻¹⁰⁶·|a·b|` per step, which is what dot products need.
    #[inline]
    pub fn mul_acc(&mut self, a: Dd, b: Dd) {
        let (p, e) = two_prod(a.hi, b.hi);
        let e = e + (a.hi * b.lo + a.lo * b.hi);
        let (s, t) = two_sum(self.hi, p);
        let (hi, lo) = quick_two_sum(s, t + (self.lo + e));
        *self = Dd { hi, lo };
    }

    #[inline]
    pub fn sqr(self) -> Dd {
        self * self
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        let r = (self - Dd::mul_f64_exact(s, s)).hi / (2.0 * s);
        Dd::new(s, r)
    }

    pub fn exp(self) -> Dd {
        if self.hi < -708.0 {
            return Dd::ZERO;
        }
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY, 0.0);
        }
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        // x = k ln2 + j/256 + t with |t| ≤ 1/512, exp(j/256) from a table.
        let tables = tables();
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        let j = (r.hi * 256.0).round();
        let t = r - Dd::from(j / 256.0);
        // Orders from DD_TERMS on stay below 1e-19 relative: plain f64.
        let mut q = 0.0;
        for c in tables.inv_fact[DD_TERMS..].iter().rev() {
            q = q * t.hi + c.hi;
        }
        let mut p = Dd::from(q);
        for c in tables.inv_fact[..DD_TERMS].iter().rev() {
            p = p * t + *c;
        }
        let e = p * tables.exp_frac[(j as i64 + TABLE_HALF as i64) as usize];
        scale2(e, k as i32)
    }

    /// Slow but self-contained series, used to build the tables.
    fn exp_series(self) -> Dd {
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).mul_f64(1.0 / 1024.0);
        let mut term = r;
        let mut s = r;
        let mut n = 2.0;
        while term.hi.abs() > EPSILON * s.hi.abs() * 1e-2 && n < 30.0 {
            term = (term * r) / Dd::from(n);
            s += term;
            n += 1.0;
        }
        // expm1 doubling keeps the relative accuracy of small s.
        for _ in 0..10 {
            s = s.mul_f64(2.0) + s.sqr();
        }
        scale2(s + Dd::ONE, k as i32)
    }
}

/// `x·2ᵏ`, split so neither factor under- or overflows.
fn scale2(x: Dd, k: i32) -> Dd {
    let (p1, p2) = (2f64.powi(k / 2), 2f64.powi(k - k / 2));
    Dd {
        hi: x.hi * p1 * p2,
        lo: x.lo * p1 * p2,
    }
}

const TAYLOR_TERMS: usize = 10;
const DD_TERMS: usize = 6;
const TABLE_HALF: usize = 90;

struct Tables {
    /// `1/k!` for `k = 0..=TAYLOR_TERMS`.
    inv_fact: Vec<Dd>,
    /// `exp(j/256)` for `j = -TABLE_HALF..=TABLE_HALF`.
    exp_frac: Vec<Dd>,
}

fn tables() -> &'static Tables {
    static TABLES: std::sync::OnceLock<Tables> = std::sync::OnceLock::new();
    TABLES.get_or_init(|| {
        let mut inv_fact = vec![Dd::ONE];
        let mut f = 1.0;
        for k in 1..=TAYLOR_TERMS {
            f *= k as f64;
            inv_fact.push(Dd::ONE / Dd::from(f));
        }
        let exp_frac = (-(TABLE_HALF as i64)..=TABLE_HALF as i64)
            .map(|j| Dd::from(j as f64 / 256.0).exp_series())
            .collect();
        Tables { inv_fact, exp_frac }
    })
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        Dd::new(q1, q2) + Dd::from(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}
