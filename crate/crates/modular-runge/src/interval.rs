//! Certified real interval arithmetic with exact rational endpoints.
//!
//! Every inequality asserted by this crate is one-sided, so a rigorous
//! enclosure `[lo, hi]` with outward rounding is all that is needed: an upper
//! bound claim `|x| <= B` is accepted only when `hi <= B` exactly as rationals.
//! Endpoints are arbitrary-precision rationals; `shrink` rounds them outward to
//! dyadics with `prec` fractional bits to stop denominator growth.  The
//! elementary enclosures (ln, exp, pi, trigonometric values at rational
//! multiples of 2*pi, integer roots) carry explicit truncation-error terms, so
//! each returned interval certifiably contains the exact value.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::rat_int;

/// A closed interval with rational endpoints, `lo <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RInt {
    lo: BigRational,
    hi: BigRational,
}

fn two_pow(bits: u32) -> BigInt {
    BigInt::one() << bits
}

/// floor(r * 2^bits) / 2^bits.
fn round_down(r: &BigRational, bits: u32) -> BigRational {
    let scaled = r.numer() * two_pow(bits);
    BigRational::new(scaled.div_floor(r.denom()), two_pow(bits))
}

/// ceil(r * 2^bits) / 2^bits.
fn round_up(r: &BigRational, bits: u32) -> BigRational {
    let scaled = r.numer() * two_pow(bits);
    BigRational::new(scaled.div_ceil(r.denom()), two_pow(bits))
}

impl RInt {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "inverted interval");
        RInt { lo, hi }
    }

    pub fn point(r: BigRational) -> Self {
        RInt { lo: r.clone(), hi: r }
    }

    pub fn from_int(i: i64) -> Self {
        Self::point(rat_int(i))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> BigRational {
        (&self.hi + &self.lo) / rat_int(2)
    }

    pub fn contains(&self, r: &BigRational) -> bool {
        &self.lo <= r && r <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    /// Round endpoints outward to dyadics with `prec` fractional bits.
    pub fn shrink(&self, prec: u32) -> Self {
        RInt {
            lo: round_down(&self.lo, prec),
            hi: round_up(&self.hi, prec),
        }
    }

    pub fn neg(&self) -> Self {
        RInt { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        RInt { lo: &self.lo + &rhs.lo, hi: &self.hi + &rhs.hi }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let cands = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        RInt { lo, hi }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        self.mul(&RInt::point(r.clone()))
    }

    /// Reciprocal; requires the interval to exclude zero.
    pub fn recip(&self) -> Self {
        assert!(
            !self.contains_zero(),
            "reciprocal of an interval containing zero"
        );
        RInt {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.recip())
    }

    /// Enclosure of |x| over the interval.
    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            let hi = if -&self.lo > self.hi { -self.lo.clone() } else { self.hi.clone() };
            RInt { lo: BigRational::zero(), hi }
        }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, rhs: &Self) -> Self {
        RInt {
            lo: if self.lo < rhs.lo { self.lo.clone() } else { rhs.lo.clone() },
            hi: if self.hi > rhs.hi { self.hi.clone() } else { rhs.hi.clone() },
        }
    }

    /// x^e by repeated squaring (e >= 0).
    pub fn pow_i(&self, e: u32) -> Self {
        let mut acc = RInt::point(BigRational::one());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Certified: every point of self is <= every point of rhs.
    pub fn le_certain(&self, rhs: &Self) -> bool {
        self.hi <= rhs.lo
    }

    /// Certified: sup(self) <= r.
    pub fn le_rat(&self, r: &BigRational) -> bool {
        self.hi <= *r
    }

    /// Certified: inf(self) >= r.
    pub fn ge_rat(&self, r: &BigRational) -> bool {
        self.lo >= *r
    }

    /// Certified: sup(self) < r.
    pub fn lt_rat(&self, r: &BigRational) -> bool {
        self.hi < *r
    }

    pub fn to_f64(&self) -> f64 {
        self.mid().to_f64().unwrap_or(f64::NAN)
    }

    /// sqrt enclosure; requires lo >= 0.
    pub fn sqrt(&self, prec: u32) -> Self {
        assert!(!self.lo.is_negative(), "sqrt of a negative interval");
        RInt {
            lo: sqrt_down(&self.lo, prec),
            hi: sqrt_up(&self.hi, prec),
        }
    }

    /// n-th root enclosure; requires lo >= 0.
    pub fn nth_root(&self, n: u32, prec: u32) -> Self {
        assert!(n >= 1);
        assert!(!self.lo.is_negative(), "root of a negative interval");
        RInt {
            lo: nth_root_down(&self.lo, n, prec),
            hi: nth_root_up(&self.hi, n, prec),
        }
    }

    /// ln enclosure; requires lo > 0.
    pub fn ln(&self, prec: u32) -> Self {
        assert!(self.lo.is_positive(), "ln of a nonpositive interval");
        let lo = ln_point(&self.lo, prec);
        let hi = ln_point(&self.hi, prec);
        RInt { lo: lo.lo, hi: hi.hi }.shrink(prec)
    }

    /// exp enclosure.
    pub fn exp(&self, prec: u32) -> Self {
        let lo = exp_point(&self.lo, prec);
        let hi = exp_point(&self.hi, prec);
        RInt { lo: lo.lo, hi: hi.hi }.shrink(prec)
    }

    /// Decimal rendering with outward rounding, `digits` places after the
    /// point, as a `[lo, hi]` pair of strings.
    pub fn to_decimal_pair(&self, digits: u32) -> (String, String) {
        (
            decimal_dir(&self.lo, digits, false),
            decimal_dir(&self.hi, digits, true),
        )
    }
}

/// Decimal string of r rounded toward -inf (up=false) or +inf (up=true).
fn decimal_dir(r: &BigRational, digits: u32, up: bool) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = r.numer() * &scale;
    let q = if up {
        scaled.div_ceil(r.denom())
    } else {
        scaled.div_floor(r.denom())
    };
    let neg = q.is_negative();
    let q_abs = q.abs();
    let (int_part, frac_part) = q_abs.div_rem(&scale);
    let frac_str = format!("{:0>width$}", frac_part.to_string(), width = digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_str)
}

/// Largest dyadic s/2^prec with (s/2^prec)^2 <= r.
fn sqrt_down(r: &BigRational, prec: u32) -> BigRational {
    if r.is_zero() {
        return BigRational::zero();
    }
    // floor(sqrt(floor(r * 4^prec))) / 2^prec
    let m = (r.numer() << (2 * prec)).div_floor(r.denom());
    BigRational::new(m.sqrt(), two_pow(prec))
}

/// Smallest dyadic s/2^prec with (s/2^prec)^2 >= r.
fn sqrt_up(r: &BigRational, prec: u32) -> BigRational {
    if r.is_zero() {
        return BigRational::zero();
    }
    let m = (r.numer() << (2 * prec)).div_ceil(r.denom());
    let mut s = m.sqrt();
    if &s * &s < m {
        s += 1;
    }
    BigRational::new(s, two_pow(prec))
}

fn nth_root_down(r: &BigRational, n: u32, prec: u32) -> BigRational {
    if r.is_zero() {
        return BigRational::zero();
    }
    let m = (r.numer() << (n * prec)).div_floor(r.denom());
    BigRational::new(m.nth_root(n), two_pow(prec))
}

fn nth_root_up(r: &BigRational, n: u32, prec: u32) -> BigRational {
    if r.is_zero() {
        return BigRational::zero();
    }
    let m = (r.numer() << (n * prec)).div_ceil(r.denom());
    let mut s = m.nth_root(n);
    if s.clone().pow(n) < m {
        s += 1;
    }
    BigRational::new(s, two_pow(prec))
}

/// Enclosure of ln 2 = 2 * atanh(1/3).
pub fn ln2(prec: u32) -> RInt {
    atanh_small(&BigRational::new(BigInt::one(), BigInt::from(3)), prec)
        .scale(&rat_int(2))
        .shrink(prec)
}

/// atanh(z) = sum z^(2i+1)/(2i+1) for |z| <= 1/3 + epsilon; tail bounded by
/// |z|^(2n+1) / ((2n+1)(1-z^2)).
fn atanh_small(z: &BigRational, prec: u32) -> RInt {
    let z_abs = z.abs();
    assert!(z_abs <= BigRational::new(BigInt::from(2), BigInt::from(5)));
    let zz = z * z;
    let mut sum = BigRational::zero();
    let mut pow = z.clone();
    let mut k: u32 = 1;
    let eps = BigRational::new(BigInt::one(), two_pow(prec + 4));
    loop {
        sum += &pow / rat_int(k as i64);
        pow *= &zz;
        k += 2;
        // once the next term is below eps, the whole tail is below
        // eps / (1 - z^2) <= 2 eps for |z| <= 2/5 (1 - z^2 >= 21/25 > 1/2)
        if pow.abs() / rat_int(k as i64) < eps {
            break;
        }
    }
    let tail = &eps * rat_int(2);
    RInt::new(&sum - &tail, &sum + &tail).shrink(prec + 2)
}

/// Enclosure of ln r for a positive rational r.
pub fn ln_point(r: &BigRational, prec: u32) -> RInt {
    assert!(r.is_positive(), "ln of a nonpositive rational");
    // reduce to m in [3/4, 3/2) with r = m * 2^k
    let mut m = r.clone();
    let mut k: i64 = 0;
    let three_halves = BigRational::new(BigInt::from(3), BigInt::from(2));
    let three_quarters = BigRational::new(BigInt::from(3), BigInt::from(4));
    // use bit lengths to get within a few doublings first
    let shift = crate::arith::approx_log2(&m);
    if shift > 1 {
        m /= BigRational::from(BigInt::one() << (shift as u32 - 1));
        k += shift - 1;
    } else if shift < -1 {
        m *= BigRational::from(BigInt::one() << ((-shift) as u32 - 1));
        k -= -shift - 1;
    }
    while m >= three_halves {
        m /= rat_int(2);
        k += 1;
    }
    while m < three_quarters {
        m *= rat_int(2);
        k -= 1;
    }
    // ln m = 2 atanh((m-1)/(m+1)), argument in (-1/7, 1/5]
    let z = (&m - BigRational::one()) / (&m + BigRational::one());
    let ln_m = atanh_small(&z, prec + 8).scale(&rat_int(2));
    let ln2_enc = ln2(prec + 8);
    ln_m.add(&ln2_enc.scale(&rat_int(k))).shrink(prec)
}

/// Enclosure of exp r for a rational r.
pub fn exp_point(r: &BigRational, prec: u32) -> RInt {
    // halve until |r'| <= 1/2, then Taylor, then square back
    let mut halvings: u32 = 0;
    let mut arg = r.clone();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    while arg.abs() > half {
        arg /= rat_int(2);
        halvings += 1;
        assert!(halvings < 64, "exp argument out of supported range");
    }
    let work = prec + 2 * halvings + 16;
    let eps = BigRational::new(BigInt::one(), two_pow(work));
    let mut sum = BigRational::one();
    let mut term = BigRational::one();
    let mut i: u32 = 1;
    loop {
        term = &term * &arg / rat_int(i as i64);
        sum += &term;
        i += 1;
        if term.abs() < eps {
            break;
        }
    }
    // tail of sum_{j >= i} |arg|^j / j! is below |next term| / (1 - |arg|) <= 2 eps
    let tail = &eps * rat_int(2);
    let mut enc = RInt::new(&sum - &tail, &sum + &tail);
    for _ in 0..halvings {
        enc = enc.mul(&enc).shrink(work);
    }
    enc.shrink(prec)
}

/// Enclosure of pi via Machin's formula 16 atan(1/5) - 4 atan(1/239).
pub fn pi(prec: u32) -> RInt {
    fn atan_inv(q: i64, prec: u32) -> RInt {
        // alternating series: atan(1/q) = sum (-1)^i / ((2i+1) q^(2i+1));
        // truncation error is bounded by the first omitted term
        let qq = rat_int(q * q);
        let mut term = BigRational::new(BigInt::one(), BigInt::from(q));
        let mut sum = BigRational::zero();
        let mut i: u32 = 0;
        let eps = BigRational::new(BigInt::one(), two_pow(prec + 6));
        loop {
            let contrib = &term / rat_int((2 * i + 1) as i64);
            if i % 2 == 0 {
                sum += &contrib;
            } else {
                sum -= &contrib;
            }
            term = &term / &qq;
            i += 1;
            let next = &term / rat_int((2 * i + 1) as i64);
            if next < eps {
                // alternating: true value lies between sum and sum -/+ next
                return RInt::new(&sum - &next, &sum + &next);
            }
        }
    }
    atan_inv(5, prec + 8)
        .scale(&rat_int(16))
        .sub(&atan_inv(239, prec + 8).scale(&rat_int(4)))
        .shrink(prec)
}

/// Enclosures of cos(2 pi t) and sin(2 pi t) for rational t.
pub fn cos_sin_2pi(t: &BigRational, prec: u32) -> (RInt, RInt) {
    // reduce t mod 1 to [-1/2, 1/2]
    let mut t = t - t.floor();
    if t > BigRational::new(BigInt::one(), BigInt::from(2)) {
        t -= BigRational::one();
    }
    let theta = pi(prec + 16).scale(&(&t * rat_int(2)));
    // |theta| <= pi < 4
    let work = prec + 16;
    let eps = BigRational::new(BigInt::one(), two_pow(work));
    let theta_sq = theta.mul(&theta);
    // cos: sum (-1)^i theta^(2i) / (2i)!, remainder after the i=n-1 term is
    // bounded by sup|theta|^(2n) / (2n)!
    let sup = theta.abs().hi().clone();
    let sup_sq = &sup * &sup;
    let mut cos_sum = RInt::point(BigRational::one());
    let mut sin_sum = theta.clone();
    let mut cos_term = RInt::point(BigRational::one());
    let mut sin_term = theta.clone();
    // factor_c = sup^(2i) / (2i)!, factor_s = sup^(2i) / (2i+1)! after pass i
    let mut factor_c = BigRational::one();
    let mut factor_s = BigRational::one();
    let mut i: i64 = 1;
    let (cos_rem, sin_rem) = loop {
        // next cos term: (-1)^i theta^(2i) / (2i)!
        cos_term = cos_term.mul(&theta_sq).scale(
            &BigRational::new(BigInt::one(), BigInt::from((2 * i - 1) * (2 * i))),
        );
        sin_term = sin_term.mul(&theta_sq).scale(
            &BigRational::new(BigInt::one(), BigInt::from((2 * i) * (2 * i + 1))),
        );
        if i % 2 == 1 {
            cos_sum = cos_sum.sub(&cos_term);
            sin_sum = sin_sum.sub(&sin_term);
        } else {
            cos_sum = cos_sum.add(&cos_term);
            sin_sum = sin_sum.add(&sin_term);
        }
        cos_sum = cos_sum.shrink(work + 8);
        sin_sum = sin_sum.shrink(work + 8);
        // Lagrange remainders after including degree 2i (cos) / 2i+1 (sin)
        factor_c = &factor_c * &sup_sq / BigRational::from(BigInt::from((2 * i - 1) * (2 * i)));
        factor_s = &factor_s * &sup_sq / BigRational::from(BigInt::from((2 * i) * (2 * i + 1)));
        let cos_rem = &factor_c * &sup_sq
            / BigRational::from(BigInt::from((2 * i + 1) * (2 * i + 2)));
        let sin_rem = &factor_s * &sup_sq * &sup
            / BigRational::from(BigInt::from((2 * i + 1) * (2 * i + 2)));
        if cos_rem < eps && sin_rem < eps {
            break (cos_rem, sin_rem);
        }
        i += 1;
        assert!(i < 10_000, "trig series failed to converge");
    };
    let widen = |e: &RInt, rem: &BigRational| {
        RInt::new(e.lo() - rem, e.hi() + rem).shrink(prec)
    };
    (widen(&cos_sum, &cos_rem), widen(&sin_sum, &sin_rem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    // the f64 reference is itself rounded, so compare midpoints with slack
    fn assert_contains_f64(e: &RInt, x: f64) {
        let mid = e.to_f64();
        assert!(
            (mid - x).abs() <= 1e-9 * (1.0 + x.abs()),
            "{x} vs enclosure midpoint {mid}"
        );
    }

    #[test]
    fn basic_ops() {
        let a = RInt::new(rat(1, 2), rat(3, 4));
        let b = RInt::new(rat(-1, 3), rat(1, 5));
        let c = a.mul(&b);
        assert!(c.contains(&(rat(1, 2) * rat(-1, 3))));
        assert!(c.contains(&(rat(3, 4) * rat(1, 5))));
        assert!(a.sub(&a).contains_zero());
        let d = a.shrink(16);
        assert!(d.lo() <= a.lo() && a.hi() <= d.hi());
    }

    #[test]
    fn pi_and_ln2_digits() {
        let p = pi(120);
        assert_contains_f64(&p, std::f64::consts::PI);
        assert!(p.width() < rat(1, 1_000_000_000));
        let l = ln2(120);
        assert_contains_f64(&l, std::f64::consts::LN_2);
    }

    #[test]
    fn ln_and_exp() {
        let e3 = ln_point(&rat_int(3), 100);
        assert_contains_f64(&e3, 3f64.ln());
        // a large value, exercising the power-of-two reduction
        let big = BigRational::from(BigInt::from(10u64).pow(30));
        let lb = ln_point(&big, 100);
        assert_contains_f64(&lb, 30.0 * 10f64.ln());
        let ex = exp_point(&rat(-7, 2), 100);
        assert_contains_f64(&ex, (-3.5f64).exp());
        // exp(ln x) contains x
        let x = rat(17, 5);
        let roundtrip = ln_point(&x, 128).exp(100);
        assert!(roundtrip.contains(&x));
    }

    #[test]
    fn roots() {
        let s = RInt::point(rat_int(2)).sqrt(100);
        assert_contains_f64(&s, std::f64::consts::SQRT_2);
        let sq = s.mul(&s);
        assert!(sq.contains(&rat_int(2)));
        let c = RInt::point(rat_int(5)).nth_root(3, 80);
        assert_contains_f64(&c, 5f64.powf(1.0 / 3.0));
    }

    #[test]
    fn trig_known_values() {
        // cos(2 pi / 4) = 0, sin(2 pi / 4) = 1
        let (c, s) = cos_sin_2pi(&rat(1, 4), 80);
        assert!(c.contains_zero());
        assert!(s.contains(&rat_int(1)));
        // cos(2 pi / 3) = -1/2, sin(2 pi / 3) = sqrt(3)/2
        let (c, s) = cos_sin_2pi(&rat(1, 3), 80);
        assert!(c.contains(&rat(-1, 2)));
        assert_contains_f64(&s, 3f64.sqrt() / 2.0);
        // cos(2 pi * 5) = 1 (integer argument reduces to 0)
        let (c, s) = cos_sin_2pi(&rat_int(5), 80);
        assert!(c.contains(&rat_int(1)));
        assert!(s.contains_zero());
        // a negative fraction
        let (c, s) = cos_sin_2pi(&rat(-1, 6), 80);
        assert!(c.contains(&rat(1, 2)));
        assert_contains_f64(&s, -(3f64.sqrt()) / 2.0);
    }

    #[test]
    fn decimal_rendering() {
        let e = RInt::new(rat(1, 3), rat(1, 2));
        let (lo, hi) = e.to_decimal_pair(4);
        assert_eq!(lo, "0.3333");
        assert_eq!(hi, "0.5000");
        let n = RInt::new(rat(-1, 3), rat(-1, 4));
        let (lo, hi) = n.to_decimal_pair(4);
        assert_eq!(lo, "-0.3334");
        assert_eq!(hi, "-0.2500");
    }
}
