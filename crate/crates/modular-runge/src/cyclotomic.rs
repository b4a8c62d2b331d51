//! Exact arithmetic in Q(zeta_N) and Z[zeta_N].
//!
//! Elements are stored in the power basis 1, zeta, ..., zeta^(phi(N)-1) modulo
//! the N-th cyclotomic polynomial Phi_N, with a common positive integer
//! denominator kept in lowest terms; the representation is canonical, so
//! equality is coefficient-wise.  The power basis is an integral basis of
//! Z[zeta_N], so integrality is exactly `den == 1`.
//!
//! Galois elements sigma_d (gcd(d, N) = 1) act by zeta |-> zeta^d.  Infinite
//! places correspond to embedding exponents k modulo k ~ -k; absolute values
//! |x|_v are returned as certified intervals, normalized so that |2|_v = 2.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::{divisors, euler_phi, units_mod};
use crate::interval::{cos_sin_2pi, RInt};
use crate::{Error, Result};

/// Immutable per-level data: Phi_N, reduction tables, trig caches.
pub struct CycCtx {
    n: u64,
    phi: usize,
    /// monic Phi_N as integer coefficients, constant term first, length phi+1
    phi_poly: Vec<BigInt>,
    /// x^j mod Phi_N for 0 <= j < max(2*phi - 1, N), enough to reduce any
    /// product and any exponent arising from the Galois action
    pow_table: Vec<Vec<BigInt>>,
    /// per precision, enclosures of (cos, sin)(2 pi r / N) for r in 0..N
    trig: Mutex<HashMap<u32, Arc<Vec<(RInt, RInt)>>>>,
}

/// Exact division of integer polynomials (constant term first); panics if the
/// division is not exact, which cannot happen for cyclotomic factors.
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    assert!(!den.is_empty() && den.last().unwrap().is_one());
    let mut rem: Vec<BigInt> = num.to_vec();
    let out_len = num.len() - den.len() + 1;
    let mut quot = vec![BigInt::zero(); out_len];
    for i in (0..out_len).rev() {
        let c = rem[i + den.len() - 1].clone();
        if !c.is_zero() {
            quot[i] = c.clone();
            for (j, d) in den.iter().enumerate() {
                rem[i + j] -= &c * d;
            }
        }
    }
    assert!(rem.iter().all(|c| c.is_zero()), "inexact polynomial division");
    quot
}

/// Phi_N by repeatedly dividing x^N - 1 by the Phi_d for proper divisors d.
fn cyclotomic_poly(n: u64) -> Vec<BigInt> {
    let mut table: HashMap<u64, Vec<BigInt>> = HashMap::new();
    for m in divisors(n) {
        let mut poly = vec![BigInt::zero(); m as usize + 1];
        poly[0] = BigInt::from(-1);
        poly[m as usize] = BigInt::one();
        for d in divisors(m) {
            if d < m {
                let phi_d = table[&d].clone();
                poly = poly_div_exact(&poly, &phi_d);
            }
        }
        table.insert(m, poly);
    }
    table.remove(&n).unwrap()
}

impl CycCtx {
    fn new(n: u64) -> Self {
        assert!(n >= 1);
        let phi = euler_phi(n) as usize;
        let phi_poly = cyclotomic_poly(n);
        assert_eq!(phi_poly.len(), phi + 1);
        // x^phi = -(phi_poly[0] + ... + phi_poly[phi-1] x^(phi-1)), then shift
        let table_len = (2 * phi - 1).max(n as usize).max(phi);
        let mut pow_table: Vec<Vec<BigInt>> = Vec::with_capacity(table_len);
        for j in 0..phi.min(table_len) {
            let mut row = vec![BigInt::zero(); phi];
            row[j] = BigInt::one();
            pow_table.push(row);
        }
        for j in phi..table_len {
            // x^j = x * x^(j-1); reduce the overflow coefficient via
            // x^phi = -sum_{i<phi} phi_poly[i] x^i
            let prev = pow_table[j - 1].clone();
            let mut row = vec![BigInt::zero(); phi];
            for i in 0..phi - 1 {
                row[i + 1] = prev[i].clone();
            }
            let top = prev[phi - 1].clone();
            if !top.is_zero() {
                for i in 0..phi {
                    row[i] -= &top * &phi_poly[i];
                }
            }
            pow_table.push(row);
        }
        CycCtx {
            n,
            phi,
            phi_poly,
            pow_table,
            trig: Mutex::new(HashMap::new()),
        }
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.phi
    }

    pub fn phi_poly(&self) -> &[BigInt] {
        &self.phi_poly
    }

    /// Reduce an integer coefficient vector of length <= 2*phi - 1 mod Phi_N.
    fn reduce(&self, mut c: Vec<BigInt>) -> Vec<BigInt> {
        assert!(c.len() <= self.pow_table.len());
        for j in (self.phi..c.len()).rev() {
            let top = std::mem::replace(&mut c[j], BigInt::zero());
            if !top.is_zero() {
                let row = &self.pow_table[j];
                for i in 0..self.phi {
                    let add = &top * &row[i];
                    c[i] += add;
                }
            }
        }
        c.truncate(self.phi);
        c.resize(self.phi, BigInt::zero());
        c
    }

    /// Enclosures of cos/sin(2 pi r / N) for all residues r, cached per prec.
    fn trig_table(&self, prec: u32) -> Arc<Vec<(RInt, RInt)>> {
        let mut guard = self.trig.lock().unwrap();
        if let Some(t) = guard.get(&prec) {
            return Arc::clone(t);
        }
        let mut v = Vec::with_capacity(self.n as usize);
        for r in 0..self.n {
            let t = BigRational::new(BigInt::from(r), BigInt::from(self.n));
            v.push(cos_sin_2pi(&t, prec));
        }
        let arc = Arc::new(v);
        guard.insert(prec, Arc::clone(&arc));
        arc
    }
}

static REGISTRY: OnceLock<Mutex<HashMap<u64, Arc<CycCtx>>>> = OnceLock::new();

/// The shared context for level N (created on first use).
pub fn ctx(n: u64) -> Arc<CycCtx> {
    let reg = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = reg.lock().unwrap();
    Arc::clone(guard.entry(n).or_insert_with(|| Arc::new(CycCtx::new(n))))
}

/// An element of Q(zeta_N): num[i] are the numerators over the common
/// denominator den > 0, with gcd(content(num), den) = 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycNum {
    level: u64,
    num: Vec<BigInt>,
    den: BigInt,
}

impl CycNum {
    fn normalized(level: u64, num: Vec<BigInt>, den: BigInt) -> Self {
        assert!(!den.is_zero());
        let (mut num, mut den) = if den.is_negative() {
            (num.into_iter().map(|c| -c).collect::<Vec<_>>(), -den)
        } else {
            (num, den)
        };
        let mut content = den.clone();
        for c in &num {
            if !c.is_zero() {
                content = content.gcd(c);
            }
            if content.is_one() {
                break;
            }
        }
        if num.iter().all(|c| c.is_zero()) {
            den = BigInt::one();
        } else if !content.is_one() {
            for c in &mut num {
                *c /= &content;
            }
            den /= &content;
        }
        CycNum { level, num, den }
    }

    pub fn zero(level: u64) -> Self {
        let phi = ctx(level).degree();
        CycNum {
            level,
            num: vec![BigInt::zero(); phi],
            den: BigInt::one(),
        }
    }

    pub fn one(level: u64) -> Self {
        Self::from_int(level, 1)
    }

    pub fn from_int(level: u64, v: i64) -> Self {
        let phi = ctx(level).degree();
        let mut num = vec![BigInt::zero(); phi];
        num[0] = BigInt::from(v);
        CycNum {
            level,
            num,
            den: BigInt::one(),
        }
    }

    pub fn from_bigint(level: u64, v: BigInt) -> Self {
        let phi = ctx(level).degree();
        let mut num = vec![BigInt::zero(); phi];
        num[0] = v;
        CycNum {
            level,
            num,
            den: BigInt::one(),
        }
    }

    pub fn from_rat(level: u64, r: &BigRational) -> Self {
        let phi = ctx(level).degree();
        let mut num = vec![BigInt::zero(); phi];
        num[0] = r.numer().clone();
        CycNum::normalized(level, num, r.denom().clone())
    }

    /// zeta_N^k, any integer k.
    pub fn zeta_pow(level: u64, k: i64) -> Self {
        let c = ctx(level);
        let kk = k.rem_euclid(level as i64) as usize;
        let num = if kk < c.degree() {
            let mut v = vec![BigInt::zero(); c.degree()];
            v[kk] = BigInt::one();
            v
        } else {
            let mut v = vec![BigInt::zero(); kk + 1];
            v[kk] = BigInt::one();
            c.reduce(v)
        };
        CycNum::normalized(level, num, BigInt::one())
    }

    pub fn zeta(level: u64) -> Self {
        Self::zeta_pow(level, 1)
    }

    /// Construct from per-power rational coordinates (length phi(N)).
    pub fn from_rat_coords(level: u64, coords: &[BigRational]) -> Self {
        let c = ctx(level);
        assert_eq!(coords.len(), c.degree());
        let mut den = BigInt::one();
        for r in coords {
            den = den.lcm(r.denom());
        }
        let num = coords
            .iter()
            .map(|r| r.numer() * (&den / r.denom()))
            .collect();
        CycNum::normalized(level, num, den)
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|c| c.is_zero())
    }

    /// True when the element lies in Z[zeta_N].
    pub fn is_integral(&self) -> bool {
        self.den.is_one()
    }

    pub fn is_rational(&self) -> bool {
        self.num.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if self.is_rational() {
            Some(BigRational::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    /// Rational coordinates in the power basis, length phi(N).
    pub fn rat_coords(&self) -> Vec<BigRational> {
        self.num
            .iter()
            .map(|c| BigRational::new(c.clone(), self.den.clone()))
            .collect()
    }

    fn check_level(&self, rhs: &CycNum) -> Result<()> {
        if self.level != rhs.level {
            return Err(Error::LevelMismatch(self.level, rhs.level));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &CycNum) -> CycNum {
        self.check_level(rhs).expect("level mismatch");
        let g = self.den.gcd(&rhs.den);
        let la = &rhs.den / &g;
        let lb = &self.den / &g;
        let num = self
            .num
            .iter()
            .zip(&rhs.num)
            .map(|(a, b)| a * &la + b * &lb)
            .collect();
        CycNum::normalized(self.level, num, &self.den * &la)
    }

    pub fn neg(&self) -> CycNum {
        CycNum {
            level: self.level,
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, rhs: &CycNum) -> CycNum {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &CycNum) -> CycNum {
        self.check_level(rhs).expect("level mismatch");
        let c = ctx(self.level);
        let phi = c.degree();
        let mut conv = vec![BigInt::zero(); 2 * phi - 1];
        for (i, a) in self.num.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.num.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                conv[i + j] += a * b;
            }
        }
        let num = c.reduce(conv);
        CycNum::normalized(self.level, num, &self.den * &rhs.den)
    }

    pub fn mul_int(&self, k: &BigInt) -> CycNum {
        CycNum::normalized(
            self.level,
            self.num.iter().map(|c| c * k).collect(),
            self.den.clone(),
        )
    }

    pub fn scale_rat(&self, r: &BigRational) -> CycNum {
        CycNum::normalized(
            self.level,
            self.num.iter().map(|c| c * r.numer()).collect(),
            &self.den * r.denom(),
        )
    }

    /// sigma_d, requiring gcd(d, N) = 1.
    pub fn galois(&self, d: u64) -> Result<CycNum> {
        let n = self.level;
        if n == 1 {
            return Ok(self.clone());
        }
        if num_integer::gcd(d % n, n) != 1 {
            return Err(Error::NotAUnit(d % n, n));
        }
        let c = ctx(n);
        let phi = c.degree();
        let mut acc = vec![BigInt::zero(); phi.max(n as usize)];
        for (i, coeff) in self.num.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            // zeta^i |-> zeta^(i d), exponent first reduced mod N
            let e = ((i as u64 * (d % n)) % n) as usize;
            acc[e] += coeff;
        }
        let num = c.reduce(acc);
        Ok(CycNum::normalized(self.level, num, self.den.clone()))
    }

    /// Complex conjugation.
    pub fn conj(&self) -> CycNum {
        if self.level <= 2 {
            self.clone()
        } else {
            self.galois(self.level - 1).expect("N-1 is a unit")
        }
    }

    /// Field norm down to Q (product of all conjugates).
    pub fn norm_q(&self) -> BigRational {
        if self.is_zero() {
            return BigRational::zero();
        }
        let mut prod = CycNum::one(self.level);
        for d in units_mod(self.level) {
            let d = if self.level == 1 { 1 } else { d };
            prod = prod.mul(&self.galois(d).expect("unit"));
        }
        prod.as_rational()
            .expect("product over all conjugates is rational")
    }

    /// Exact inverse; errors on zero.
    pub fn inv(&self) -> Result<CycNum> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        // product of the nontrivial conjugates, divided by the norm
        let mut prod = CycNum::one(self.level);
        for d in units_mod(self.level) {
            if self.level == 1 || d == 1 {
                continue;
            }
            prod = prod.mul(&self.galois(d).expect("unit"));
        }
        let norm = self
            .mul(&prod)
            .as_rational()
            .expect("x times its conjugates is rational");
        assert!(!norm.is_zero(), "nonzero element has nonzero norm");
        Ok(prod.scale_rat(&norm.recip()))
    }

    pub fn div(&self, rhs: &CycNum) -> Result<CycNum> {
        Ok(self.mul(&rhs.inv()?))
    }

    /// Certified enclosure of |x|_v.
    pub fn abs_at(&self, v: &InfinitePlace, prec: u32) -> RInt {
        assert_eq!(v.level, self.level, "place level mismatch");
        let c = ctx(self.level);
        let table = c.trig_table(prec + 8);
        let mut re = RInt::zero();
        let mut im = RInt::zero();
        for (i, coeff) in self.num.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let r = (i as u64 * v.k) % self.level;
            let (cos, sin) = &table[r as usize];
            let s = BigRational::from(coeff.clone());
            re = re.add(&cos.scale(&s));
            im = im.add(&sin.scale(&s));
        }
        let den = BigRational::from(self.den.clone());
        re = re.scale(&den.recip()).shrink(prec + 8);
        im = im.scale(&den.recip()).shrink(prec + 8);
        let mag_sq = re.mul(&re).add(&im.mul(&im));
        mag_sq.abs().sqrt(prec + 4).shrink(prec)
    }

    /// Serialize coordinates as "num/den" strings (length phi(N)).
    pub fn coord_strings(&self) -> Vec<String> {
        self.num
            .iter()
            .map(|c| format!("{}/{}", c, self.den))
            .collect()
    }

    /// Floating-point image under zeta |-> e^(2 pi i k / N).  Feeds only the
    /// numerical transformation oracle; certified work goes through abs_at.
    pub fn embed_f64(&self, k: u64) -> num_complex::Complex64 {
        use num_traits::ToPrimitive;
        let n = self.level;
        let mut out = num_complex::Complex64::new(0.0, 0.0);
        for (i, coeff) in self.num.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            let c = BigRational::new(coeff.clone(), self.den.clone())
                .to_f64()
                .expect("coordinate fits in f64");
            let theta = 2.0 * std::f64::consts::PI * ((i as u64 * k) % n) as f64 / n as f64;
            out += num_complex::Complex64::from_polar(c, theta);
        }
        out
    }

    pub fn from_coord_strings(level: u64, coords: &[String]) -> Result<CycNum> {
        let mut rats = Vec::with_capacity(coords.len());
        for s in coords {
            let (n, d) = s
                .split_once('/')
                .ok_or_else(|| Error::InvalidInput(format!("bad rational: {s}")))?;
            let n: BigInt = n
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad numerator: {s}")))?;
            let d: BigInt = d
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad denominator: {s}")))?;
            if d.is_zero() {
                return Err(Error::InvalidInput("zero denominator".into()));
            }
            rats.push(BigRational::new(n, d));
        }
        if rats.len() != ctx(level).degree() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                ctx(level).degree(),
                rats.len()
            )));
        }
        Ok(CycNum::from_rat_coords(level, &rats))
    }
}

/// An infinite place of Q(zeta_N): the embedding zeta |-> e^(2 pi i k / N),
/// with k taken modulo complex conjugation (k ~ N - k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InfinitePlace {
    level: u64,
    k: u64,
}

impl InfinitePlace {
    pub fn new(level: u64, k: u64) -> Self {
        assert!(level >= 1);
        if level <= 2 {
            return InfinitePlace { level, k: level - 1 };
        }
        let k = k % level;
        assert!(
            num_integer::gcd(k, level) == 1,
            "embedding exponent must be a unit"
        );
        let k = k.min(level - k);
        InfinitePlace { level, k }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn exponent(&self) -> u64 {
        self.k
    }

    /// Local degree: 2 for complex places (N > 2), 1 for the real place.
    pub fn degree(&self) -> u32 {
        if self.level > 2 {
            2
        } else {
            1
        }
    }
}

/// All infinite places of Q(zeta_N); phi(N)/2 of them for N > 2.
pub fn all_places(level: u64) -> Vec<InfinitePlace> {
    if level <= 2 {
        return vec![InfinitePlace::new(level, level.saturating_sub(1))];
    }
    (1..=level / 2)
        .filter(|&k| num_integer::gcd(k, level) == 1)
        .map(|k| InfinitePlace { level, k })
        .collect()
}

/// Norm from Q(zeta_N) into the fixed field of D: the product of sigma_d(x)
/// over coset representatives of the stabilizer of x inside the subgroup D of
/// (Z/N)^*.
pub fn norm_to_subfield(x: &CycNum, d_sub: &[u64]) -> CycNum {
    let n = x.level();
    if n == 1 {
        return x.clone();
    }
    for &d in d_sub {
        assert!(num_integer::gcd(d % n, n) == 1, "D must consist of units");
    }
    assert!(d_sub.contains(&1), "D must contain 1");
    let stab: Vec<u64> = d_sub
        .iter()
        .copied()
        .filter(|&d| x.galois(d).expect("unit") == *x)
        .collect();
    // coset representatives of stab in D (left = right: abelian group)
    let mut covered = std::collections::BTreeSet::new();
    let mut prod = CycNum::one(n);
    for &d in d_sub {
        if covered.contains(&d) {
            continue;
        }
        for &s in &stab {
            covered.insert(d * s % n);
        }
        prod = prod.mul(&x.galois(d).expect("unit"));
    }
    prod
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn cyclotomic_polys() {
        // Phi_3 = x^2 + x + 1, Phi_4 = x^2 + 1, Phi_6 = x^2 - x + 1,
        // Phi_12 = x^4 - x^2 + 1
        let p3: Vec<i64> = cyclotomic_poly(3).iter().map(|c| c.try_into().unwrap()).collect();
        assert_eq!(p3, vec![1, 1, 1]);
        let p4: Vec<i64> = cyclotomic_poly(4).iter().map(|c| c.try_into().unwrap()).collect();
        assert_eq!(p4, vec![1, 0, 1]);
        let p6: Vec<i64> = cyclotomic_poly(6).iter().map(|c| c.try_into().unwrap()).collect();
        assert_eq!(p6, vec![1, -1, 1]);
        let p12: Vec<i64> = cyclotomic_poly(12).iter().map(|c| c.try_into().unwrap()).collect();
        assert_eq!(p12, vec![1, 0, -1, 0, 1]);
        let p1: Vec<i64> = cyclotomic_poly(1).iter().map(|c| c.try_into().unwrap()).collect();
        assert_eq!(p1, vec![-1, 1]);
    }

    #[test]
    fn zeta_reduction() {
        // zeta_3^2 = -1 - zeta_3
        let z = CycNum::zeta(3);
        let sq = z.mul(&z);
        let expect = CycNum::from_int(3, -1).sub(&z);
        assert_eq!(sq, expect);
        // zeta_4^2 = -1
        let z4 = CycNum::zeta(4);
        assert_eq!(z4.mul(&z4), CycNum::from_int(4, -1));
        // zeta_5^5 = 1
        assert_eq!(CycNum::zeta_pow(5, 5), CycNum::one(5));
        // sum of all fifth roots of unity is 0
        let mut s = CycNum::zero(5);
        for k in 0..5 {
            s = s.add(&CycNum::zeta_pow(5, k));
        }
        assert!(s.is_zero());
    }

    #[test]
    fn galois_action() {
        let z = CycNum::zeta(5);
        assert_eq!(z.galois(2).unwrap(), CycNum::zeta_pow(5, 2));
        // sigma_1 is the identity on a random-ish element
        let x = z.mul(&z).add(&CycNum::from_rat(5, &rat(7, 3)));
        assert_eq!(x.galois(1).unwrap(), x);
        // composition: sigma_2 of sigma_3 = sigma_6 = sigma_1 mod 5
        let a = x.galois(3).unwrap().galois(2).unwrap();
        assert_eq!(a, x);
        // non-unit rejected
        assert!(z.galois(5).is_err());
    }

    #[test]
    fn galois_composition_sweep() {
        for n in [3u64, 4, 5, 6, 8, 12] {
            let x = CycNum::zeta(n)
                .add(&CycNum::from_rat(n, &rat(3, 7)))
                .mul(&CycNum::zeta_pow(n, 2).sub(&CycNum::from_int(n, 2)));
            for &d in &units_mod(n) {
                for &e in &units_mod(n) {
                    let lhs = x.galois(e).unwrap().galois(d).unwrap();
                    let rhs = x.galois(d * e % n).unwrap();
                    assert_eq!(lhs, rhs, "sigma_{d} sigma_{e} != sigma_{} at N={n}", d * e % n);
                }
            }
        }
    }

    /// Residue oracle: multiply in (Z/p)[x]/(Phi_N) for several primes p and
    /// compare with the exact product reduced mod p.
    #[test]
    fn mul_matches_residue_oracle() {
        fn to_modp(x: &CycNum, p: u64) -> Vec<u64> {
            let pb = BigInt::from(p);
            let den = x.den.mod_floor(&pb);
            let den_u: u64 = den.try_into().unwrap();
            let inv = crate::arith::mod_inv(den_u, p).expect("p must not divide den");
            x.num
                .iter()
                .map(|c| {
                    let r: u64 = c.mod_floor(&pb).try_into().unwrap();
                    r * inv % p
                })
                .collect()
        }
        fn polymul_modp(a: &[u64], b: &[u64], phi_poly: &[BigInt], p: u64) -> Vec<u64> {
            let phi = a.len();
            let mut conv = vec![0u64; 2 * phi - 1];
            for i in 0..phi {
                for j in 0..phi {
                    conv[i + j] = (conv[i + j] + a[i] * b[j]) % p;
                }
            }
            // reduce by monic Phi_N mod p
            let pp: Vec<u64> = phi_poly
                .iter()
                .map(|c| {
                    let r: u64 = c.mod_floor(&BigInt::from(p)).try_into().unwrap();
                    r
                })
                .collect();
            for j in (phi..conv.len()).rev() {
                let top = conv[j];
                conv[j] = 0;
                if top != 0 {
                    for i in 0..phi {
                        // x^j -= top * x^(j-phi) * Phi_N
                        let idx = j - phi + i;
                        let sub = top * pp[i] % p;
                        conv[idx] = (conv[idx] + p - sub) % p;
                    }
                }
            }
            conv.truncate(phi);
            conv
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for n in [5u64, 8, 12] {
            let c = ctx(n);
            for _ in 0..20 {
                let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                    let coords: Vec<BigRational> = (0..c.degree())
                        .map(|_| rat(rng.gen_range(-30..30), rng.gen_range(1..7)))
                        .collect();
                    CycNum::from_rat_coords(n, &coords)
                };
                let a = mk(&mut rng);
                let b = mk(&mut rng);
                let prod = a.mul(&b);
                for p in [10007u64, 31337, 65537] {
                    let am = to_modp(&a, p);
                    let bm = to_modp(&b, p);
                    let want = polymul_modp(&am, &bm, c.phi_poly(), p);
                    assert_eq!(to_modp(&prod, p), want, "N={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn inverse_and_division() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [3u64, 5, 8] {
            let c = ctx(n);
            for _ in 0..10 {
                let coords: Vec<BigRational> = (0..c.degree())
                    .map(|_| rat(rng.gen_range(-9..9), 1))
                    .collect();
                let x = CycNum::from_rat_coords(n, &coords);
                if x.is_zero() {
                    continue;
                }
                let inv = x.inv().unwrap();
                assert_eq!(x.mul(&inv), CycNum::one(n));
            }
        }
        assert!(CycNum::zero(5).inv().is_err());
        // 1 / (1 - zeta_3): (1 - zeta)(1 - zeta^2) = 3
        let d = CycNum::one(3).sub(&CycNum::zeta(3));
        let i = d.inv().unwrap();
        assert_eq!(d.mul(&i), CycNum::one(3));
    }

    #[test]
    fn scaled_inverse_of_one_minus_zeta_is_integral() {
        // N / (1 - zeta_N^b) lies in Z[zeta_N] for b != 0 mod N: it is a root
        // of ((x+1)^N - 1)/x scaled; checked directly here
        for n in 3u64..=10 {
            for b in 1..n {
                let d = CycNum::one(n).sub(&CycNum::zeta_pow(n, b as i64));
                let q = d.inv().unwrap().mul_int(&BigInt::from(n));
                assert!(q.is_integral(), "N/(1-zeta^{b}) not integral at N={n}");
            }
        }
    }

    #[test]
    fn places_and_absolute_values() {
        // |2|_v = 2 at every infinite place
        for n in [3u64, 5, 12] {
            let places = all_places(n);
            assert_eq!(places.len() as u64, euler_phi(n) / 2);
            for v in &places {
                let e = CycNum::from_int(n, 2).abs_at(v, 64);
                assert!(e.contains(&rat(2, 1)));
                // roots of unity have absolute value 1
                let z = CycNum::zeta_pow(n, 3).abs_at(v, 64);
                assert!(z.contains(&rat(1, 1)));
            }
        }
        // |1 - zeta_3| = sqrt(3) at the unique place of Q(zeta_3)
        let d = CycNum::one(3).sub(&CycNum::zeta(3));
        let v = all_places(3)[0];
        let e = d.abs_at(&v, 80);
        let approx = e.to_f64();
        assert!((approx - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn product_formula_for_integral_elements() {
        // |Norm(x)| equals prod over infinite places of |x|_v^2 for N > 2
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [5u64, 7, 8] {
            let c = ctx(n);
            for _ in 0..5 {
                let coords: Vec<BigRational> = (0..c.degree())
                    .map(|_| rat(rng.gen_range(-5..6), 1))
                    .collect();
                let x = CycNum::from_rat_coords(n, &coords);
                if x.is_zero() {
                    continue;
                }
                let norm_abs = x.norm_q().abs();
                let mut prod = RInt::point(BigRational::one());
                for v in all_places(n) {
                    let a = x.abs_at(&v, 96);
                    prod = prod.mul(&a).mul(&a);
                }
                assert!(
                    prod.contains(&norm_abs),
                    "product formula violated at N={n}"
                );
            }
        }
    }

    #[test]
    fn norms_to_subfields() {
        // full-unit norm of zeta_5 is zeta^(1+2+3+4) = 1
        let z = CycNum::zeta(5);
        let full = units_mod(5);
        assert_eq!(norm_to_subfield(&z, &full), CycNum::one(5));
        // rational x: stabilizer is everything, product has one factor
        let x = CycNum::from_rat(5, &rat(7, 2));
        assert_eq!(norm_to_subfield(&x, &full), x);
        // norm of an integral element stays integral
        let y = CycNum::one(5).sub(&CycNum::zeta(5));
        let ny = norm_to_subfield(&y, &full);
        assert!(ny.is_integral());
        assert_eq!(ny.as_rational(), Some(rat(5, 1)));
        // index-2 subgroup {1, 4} of (Z/5)^*: norm of zeta is zeta * zeta^4 = 1
        let sub = vec![1u64, 4];
        assert_eq!(norm_to_subfield(&z, &sub), CycNum::one(5));
        // and the result is fixed by sigma_4
        let w = CycNum::zeta(5).add(&CycNum::zeta_pow(5, 2));
        let nw = norm_to_subfield(&w, &sub);
        assert_eq!(nw.galois(4).unwrap(), nw);
    }

    #[test]
    fn galois_permutes_place_absolute_values() {
        // {|sigma_d(x)|_v : v} = {|x|_v : v} as multisets, within tolerance
        let n = 7u64;
        let x = CycNum::zeta(7)
            .add(&CycNum::zeta_pow(7, 3).mul_int(&BigInt::from(2)))
            .add(&CycNum::from_int(7, 1));
        let places = all_places(n);
        let mut orig: Vec<f64> = places.iter().map(|v| x.abs_at(v, 80).to_f64()).collect();
        let y = x.galois(3).unwrap();
        let mut moved: Vec<f64> = places.iter().map(|v| y.abs_at(v, 80).to_f64()).collect();
        orig.sort_by(f64::total_cmp);
        moved.sort_by(f64::total_cmp);
        for (a, b) in orig.iter().zip(&moved) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coord_string_round_trip() {
        let x = CycNum::from_rat_coords(
            5,
            &[rat(1, 2), rat(-3, 4), rat(0, 1), rat(7, 1)],
        );
        let s = x.coord_strings();
        let y = CycNum::from_coord_strings(5, &s).unwrap();
        assert_eq!(x, y);
    }
}
