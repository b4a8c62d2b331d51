//! Weight-1 Eisenstein series E_alpha for alpha = (a, b) in (Z/N)^2, N > 2,
//! as exact q-expansions on the q_N = q^(1/N) grid.
//!
//!   E_alpha = c_0 + sum_(m,n >= 1, m = a mod N) zeta_N^(bn) q_N^(mn)
//!                 - sum_(m,n >= 1, m = -a mod N) zeta_N^(-bn) q_N^(mn)
//!
//! with constant term
//!   c_0 = 0                                  if a = b = 0   (E_0 = 0),
//!   c_0 = (1/2) (1 + zeta^b) / (1 - zeta^b)  if a = 0, b != 0,
//!   c_0 = 1/2 - a_0/N (0 <= a_0 < N)         if a != 0.
//!
//! GL_2(Z/N) acts on indices by right multiplication of the row vector
//! (a, b); this action is compatible with q-expansions: the index T twists
//! coefficients by zeta^e, and diag(1, d) applies sigma_d to coefficients.
//! The scaled series 2N E_alpha has all coefficients in Z[zeta_N], which
//! every product computation relies on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;

use crate::arith::rat;
use crate::congruence::Mat;
use crate::cyclotomic::CycNum;
use crate::qexp::QExp;

/// Right action of A on the index row vector (a, b).
pub fn index_act(n: u64, alpha: (u64, u64), a: &Mat) -> (u64, u64) {
    assert_eq!(a.level(), n);
    let e = a.entries().map(|x| x as u128);
    let (p, q) = (alpha.0 as u128, alpha.1 as u128);
    (
        ((p * e[0] + q * e[2]) % n as u128) as u64,
        ((p * e[1] + q * e[3]) % n as u128) as u64,
    )
}

/// The +--normalized index: the lexicographically smaller of alpha and
/// -alpha, together with the sign relating them (E_(-alpha) = -E_alpha).
pub fn index_normalize(n: u64, alpha: (u64, u64)) -> ((u64, u64), i8) {
    let neg = ((n - alpha.0 % n) % n, (n - alpha.1 % n) % n);
    let pos = (alpha.0 % n, alpha.1 % n);
    if neg < pos {
        (neg, -1)
    } else {
        (pos, 1)
    }
}

/// Exact constant term of E_alpha.
pub fn constant_term(n: u64, alpha: (u64, u64)) -> CycNum {
    let (a, b) = (alpha.0 % n, alpha.1 % n);
    if a == 0 && b == 0 {
        CycNum::zero(n)
    } else if a == 0 {
        let zb = CycNum::zeta_pow(n, b as i64);
        let num = CycNum::one(n).add(&zb);
        let den = CycNum::one(n).sub(&zb);
        num.div(&den).expect("zeta^b != 1").scale_rat(&rat(1, 2))
    } else {
        CycNum::from_rat(n, &(rat(1, 2) - rat(a as i64, n as i64)))
    }
}

/// E_alpha + O(q_N^prec).  E_(0,0) is identically zero.
pub fn eis_qexp(n: u64, alpha: (u64, u64), prec: i64) -> QExp {
    assert!(n > 2, "Eisenstein data needs N > 2");
    assert!(prec > 0);
    let (a, b) = (alpha.0 % n, alpha.1 % n);
    if a == 0 && b == 0 {
        return QExp::zero(n, n, prec);
    }
    let mut coeffs = vec![CycNum::zero(n); prec as usize];
    coeffs[0] = constant_term(n, alpha);
    // positive part: m = a (N), coefficient zeta^(b nn) at q_N^(m nn)
    let mut add_part = |residue: u64, bb: i64, sign: i64| {
        let first = if residue == 0 { n } else { residue };
        let mut m = first as i64;
        while m < prec {
            let mut e = m;
            let mut nn: i64 = 1;
            while e < prec {
                let z = CycNum::zeta_pow(n, bb * nn).mul_int(&BigInt::from(sign));
                coeffs[e as usize] = coeffs[e as usize].add(&z);
                nn += 1;
                e += m;
            }
            m += n as i64;
        }
    };
    add_part(a, b as i64, 1);
    add_part((n - a) % n, -(b as i64), -1);
    QExp::new(n, n, 0, coeffs)
}

/// 2N E_alpha, which has integral coefficients.
pub fn eis_scaled_qexp(n: u64, alpha: (u64, u64), prec: i64) -> QExp {
    let f = eis_qexp(n, alpha, prec).scale_rat(&rat(2 * n as i64, 1));
    debug_assert!(
        f.coeffs().iter().all(|c| c.is_integral()),
        "2N E_alpha must be integral"
    );
    f
}

/// Shared cache of scaled Eisenstein expansions at a fixed level and
/// precision; the trace-form evaluation asks for the same indices many times.
pub struct EisCache {
    n: u64,
    prec: i64,
    map: Mutex<HashMap<(u64, u64), Arc<QExp>>>,
}

impl EisCache {
    pub fn new(n: u64, prec: i64) -> Self {
        EisCache {
            n,
            prec,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// 2N E_alpha at the cache precision.
    pub fn scaled(&self, alpha: (u64, u64)) -> Arc<QExp> {
        let key = (alpha.0 % self.n, alpha.1 % self.n);
        let mut guard = self.map.lock().unwrap();
        Arc::clone(
            guard
                .entry(key)
                .or_insert_with(|| Arc::new(eis_scaled_qexp(self.n, key, self.prec))),
        )
    }
}

/// E_alpha(tau) by direct summation of the q_N-series under the embedding
/// zeta_N |-> e^(2 pi i / N).  Plain f64: this is the consistency oracle for
/// the transformation law, nothing certified feeds from it.
pub fn eis_value_numeric(
    n: u64,
    alpha: (u64, u64),
    tau: num_complex::Complex64,
    terms: i64,
) -> num_complex::Complex64 {
    assert!(tau.im > 0.0, "tau must lie in the upper half plane");
    let f = eis_qexp(n, alpha, terms);
    let q_n = (num_complex::Complex64::i() * 2.0 * std::f64::consts::PI * tau / n as f64).exp();
    let mut out = num_complex::Complex64::new(0.0, 0.0);
    let mut q_pow = num_complex::Complex64::new(1.0, 0.0);
    for e in 0..terms {
        let c = f.coeff(e);
        if !c.is_zero() {
            out += c.embed_f64(1) * q_pow;
        }
        q_pow *= q_n;
    }
    out
}

/// |(c tau + d)^(-1) E_alpha(gamma tau) - E_(alpha gamma)(tau)| for gamma in
/// SL_2(Z).  The weight-1 law makes this zero; the numeric value measures
/// only truncation and rounding.
pub fn transformation_defect(
    n: u64,
    alpha: (u64, u64),
    gamma: [i64; 4],
    tau: num_complex::Complex64,
    terms: i64,
) -> f64 {
    let [a, b, c, d] = gamma;
    assert_eq!(a * d - b * c, 1, "gamma must lie in SL_2(Z)");
    let cd = num_complex::Complex64::new(c as f64, 0.0) * tau + d as f64;
    let gamma_tau = (num_complex::Complex64::new(a as f64, 0.0) * tau + b as f64) / cd;
    let lhs = eis_value_numeric(n, alpha, gamma_tau, terms) / cd;
    let red = |x: i64| x.rem_euclid(n as i64) as u64;
    let moved = (
        (alpha.0 * red(a) + alpha.1 * red(c)) % n,
        (alpha.0 * red(b) + alpha.1 * red(d)) % n,
    );
    let rhs = eis_value_numeric(n, moved, tau, terms);
    (lhs - rhs).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::units_mod;

    #[test]
    fn constant_terms() {
        // N = 4, b = 1: (1/2)(1+i)/(1-i) = i/2
        let c = constant_term(4, (0, 1));
        let half_i = CycNum::zeta(4).scale_rat(&rat(1, 2));
        assert_eq!(c, half_i);
        // a != 0: 1/2 - a/N
        assert_eq!(
            constant_term(5, (2, 3)),
            CycNum::from_rat(5, &rat(1, 10))
        );
        assert_eq!(
            constant_term(5, (4, 0)),
            CycNum::from_rat(5, &rat(-3, 10))
        );
        assert!(constant_term(7, (0, 0)).is_zero());
    }

    #[test]
    fn odd_symmetry() {
        for n in [3u64, 5, 8] {
            for alpha in [(1, 0), (0, 1), (2, 3), (n - 1, 1)] {
                let plus = eis_qexp(n, alpha, 30);
                let minus = eis_qexp(n, ((n - alpha.0) % n, (n - alpha.1) % n), 30);
                assert_eq!(plus.neg(), minus, "E_(-a) = -E_a at N={n} {alpha:?}");
            }
        }
    }

    #[test]
    fn index_t_twists_coefficients() {
        // E_(alpha T)(tau) = E_alpha(tau + 1): coefficient at q_N^e picks up
        // zeta_N^e; this ties the formal index action to the expansion
        for n in [3u64, 5, 6] {
            let t = Mat::t(n);
            for alpha in [(1u64, 0u64), (0, 1), (2, 1), (1, n - 1)] {
                let base = eis_qexp(n, alpha, 25);
                let acted = eis_qexp(n, index_act(n, alpha, &t), 25);
                for e in 0..25 {
                    let want = base.coeff(e).mul(&CycNum::zeta_pow(n, e));
                    assert_eq!(acted.coeff(e), want, "N={n} alpha={alpha:?} e={e}");
                }
            }
        }
    }

    #[test]
    fn index_diag_applies_galois() {
        // E_(alpha diag(1, d)) = sigma_d(E_alpha)
        for n in [5u64, 8] {
            for &d in &units_mod(n) {
                let a = Mat::new(n, [1, 0, 0, d]);
                for alpha in [(1u64, 1u64), (0, 1), (3, 2)] {
                    let lhs = eis_qexp(n, index_act(n, alpha, &a), 20);
                    let rhs = eis_qexp(n, alpha, 20).galois(d).unwrap();
                    assert_eq!(lhs, rhs, "N={n} d={d} alpha={alpha:?}");
                }
            }
        }
    }

    #[test]
    fn scaled_series_are_integral() {
        for n in [3u64, 4, 5, 6, 8] {
            for a in 0..n {
                for b in 0..n {
                    let f = eis_scaled_qexp(n, (a, b), 40);
                    assert!(
                        f.coeffs().iter().all(|c| c.is_integral()),
                        "2N E_({a},{b}) at N={n} not integral"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_row_series_live_on_the_coarse_grid() {
        // a = 0 forces exponents that are multiples of N
        let f = eis_qexp(5, (0, 2), 31);
        for e in 0..31 {
            if e % 5 != 0 {
                assert!(f.coeff(e).is_zero());
            }
        }
        assert!(!f.coeff(5).is_zero());
    }

    #[test]
    fn zero_row_sum_vanishes() {
        // sum over b != 0 of E_(0,b) is zero: the q-coefficients cancel in
        // pairs and the constant terms telescope
        for n in [3u64, 4, 5, 7] {
            let mut s = QExp::zero(n, n, 30);
            for b in 1..n {
                s = s.add(&eis_qexp(n, (0, b), 30));
            }
            assert!(s.is_known_zero(), "sum of E_(0,b) at N={n}");
        }
    }

    #[test]
    fn sum_of_squares_vanishes() {
        // sum over nonzero alpha of E_alpha^2 is SL_2(Z/N)-invariant of
        // weight 2, hence lies in M_2(SL_2(Z)) = 0; a deep identity that
        // exercises constant terms and coefficients together
        for n in [3u64, 4, 5] {
            let prec = 24;
            let mut s = QExp::zero(n, n, prec);
            for a in 0..n {
                for b in 0..n {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let e = eis_qexp(n, (a, b), prec);
                    s = s.add(&e.mul(&e).truncate(prec));
                }
            }
            assert!(s.is_known_zero(), "sum of E_alpha^2 at N={n}");
        }
    }

    #[test]
    fn cache_returns_shared_series() {
        let cache = EisCache::new(5, 20);
        let a = cache.scaled((1, 2));
        let b = cache.scaled((1, 2));
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(*a, eis_scaled_qexp(5, (1, 2), 20));
    }
}
