//! Small number-theoretic helpers used throughout the crate.
//!
//! Everything here is elementary: Euler phi, divisor functions, unit groups
//! modulo N, and the order of SL2(Z/NZ).  All functions are exact over machine
//! integers at desk scale (N well below 2^16), with widening to `u128`/`BigInt`
//! where products can overflow.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1);
    let mut n = n;
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Number of positive divisors of n.
pub fn divisor_count(n: u64) -> u64 {
    assert!(n >= 1);
    let mut n = n;
    let mut count = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            count *= e + 1;
        }
        p += 1;
    }
    if n > 1 {
        count *= 2;
    }
    count
}

/// Sum of k-th powers of divisors of n, as a BigInt (sigma_3 of moderate n
/// already exceeds u64 comfortably in series work).
pub fn sigma_k(n: u64, k: u32) -> BigInt {
    assert!(n >= 1);
    let mut total = BigInt::zero();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            total += BigInt::from(d).pow(k);
            let e = n / d;
            if e != d {
                total += BigInt::from(e).pow(k);
            }
        }
        d += 1;
    }
    total
}

/// The positive divisors of n in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    assert!(n >= 1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

/// Inverse of a modulo n when gcd(a, n) = 1.
pub fn mod_inv(a: u64, n: u64) -> Option<u64> {
    assert!(n >= 1);
    let (mut r0, mut r1) = (n as i128, (a % n) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(n as i128) as u64)
}

/// The unit group (Z/NZ)^* as a sorted list.
pub fn units_mod(n: u64) -> Vec<u64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![0];
    }
    (1..n).filter(|&a| num_integer::gcd(a, n) == 1).collect()
}

/// Closure of a set of units modulo n under multiplication, as a sorted list.
/// An empty generator list yields the trivial subgroup {1}.
pub fn unit_subgroup_closure(n: u64, gens: &[u64]) -> Vec<u64> {
    assert!(n >= 2);
    for &g in gens {
        assert!(
            num_integer::gcd(g % n, n) == 1,
            "generator {g} is not a unit mod {n}"
        );
    }
    let mut seen = std::collections::BTreeSet::new();
    seen.insert(1u64);
    let mut frontier = vec![1u64];
    while let Some(x) = frontier.pop() {
        for &g in gens {
            let y = x * (g % n) % n;
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    seen.into_iter().collect()
}

/// |SL2(Z/NZ)| = N^3 * prod_{p | N} (1 - 1/p^2).
pub fn sl2_order(n: u64) -> u64 {
    assert!(n >= 1);
    if n == 1 {
        return 1;
    }
    let mut num: u128 = (n as u128).pow(3);
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            // multiply by (p^2 - 1) / p^2 exactly
            num = num / ((p as u128) * (p as u128)) * ((p as u128) * (p as u128) - 1);
        }
        p += 1;
    }
    if m > 1 {
        num = num / ((m as u128) * (m as u128)) * ((m as u128) * (m as u128) - 1);
    }
    num as u64
}

/// Exact integer power of a rational.
pub fn rat_pow(base: &BigRational, exp: i64) -> BigRational {
    if exp == 0 {
        return BigRational::one();
    }
    base.pow(i32::try_from(exp).expect("exponent fits in i32"))
}

/// Rational from an integer pair.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn rat_int(num: i64) -> BigRational {
    BigRational::from(BigInt::from(num))
}

/// True if the rational is an integer.
pub fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one() || r.numer().is_zero()
}

/// Floor of log2 of a positive rational, cheap (used to seed precision loops).
pub fn approx_log2(r: &BigRational) -> i64 {
    assert!(r.is_positive());
    let nb = r.numer().abs().bits() as i64;
    let db = r.denom().bits() as i64;
    nb - db
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_and_divisors() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(5), 4);
        assert_eq!(euler_phi(6), 2);
        assert_eq!(euler_phi(12), 4);
        assert_eq!(divisor_count(12), 6);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(sigma_k(6, 3), BigInt::from(1 + 8 + 27 + 216));
    }

    #[test]
    fn units_and_inverses() {
        assert_eq!(units_mod(5), vec![1, 2, 3, 4]);
        assert_eq!(units_mod(8), vec![1, 3, 5, 7]);
        assert_eq!(mod_inv(3, 7), Some(5));
        assert_eq!(mod_inv(2, 4), None);
        assert_eq!(unit_subgroup_closure(5, &[2]), vec![1, 2, 3, 4]);
        assert_eq!(unit_subgroup_closure(8, &[3]), vec![1, 3]);
        assert_eq!(unit_subgroup_closure(7, &[]), vec![1]);
    }

    #[test]
    fn sl2_orders() {
        // |SL2(Z/3)| = 24, |SL2(Z/4)| = 48, |SL2(Z/5)| = 120,
        // |SL2(Z/6)| = 144, |SL2(Z/7)| = 336, |SL2(Z/8)| = 384.
        assert_eq!(sl2_order(3), 24);
        assert_eq!(sl2_order(4), 48);
        assert_eq!(sl2_order(5), 120);
        assert_eq!(sl2_order(6), 144);
        assert_eq!(sl2_order(7), 336);
        assert_eq!(sl2_order(8), 384);
    }
}
