//! Truncated q-expansions with coefficients in Q(zeta_N).
//!
//! A `QExp` stores the coefficients of sum_n a_n q^(n/den) for exponents
//! start <= n < prec on the grid with denominator `den` (so den = N holds
//! expansions in q_N = q^(1/N), den = w expansions in a width-w cusp
//! parameter).  Coefficients outside [start, prec) are unknown, not zero;
//! every operation propagates the largest provable precision.  Exponents may
//! be negative (Laurent tails of meromorphic functions).
//!
//! Level-1 series (Delta, E4, j) use coefficient level 1, where Q(zeta_1) = Q.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::cyclotomic::CycNum;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QExp {
    level: u64,
    den: u64,
    start: i64,
    /// coeffs[i] is the coefficient of q^((start + i)/den); length = prec - start
    coeffs: Vec<CycNum>,
}

impl QExp {
    pub fn new(level: u64, den: u64, start: i64, coeffs: Vec<CycNum>) -> Self {
        assert!(den >= 1);
        for c in &coeffs {
            assert_eq!(c.level(), level, "coefficient level mismatch");
        }
        QExp {
            level,
            den,
            start,
            coeffs,
        }
        .trimmed()
    }

    /// The zero series known up to (but excluding) exponent prec/den.
    pub fn zero(level: u64, den: u64, prec: i64) -> Self {
        QExp {
            level,
            den,
            start: prec,
            coeffs: Vec::new(),
        }
    }

    /// The constant series c + O(q^(prec/den)).
    pub fn constant(c: CycNum, den: u64, prec: i64) -> Self {
        assert!(prec > 0);
        let level = c.level();
        let mut coeffs = vec![CycNum::zero(level); prec as usize];
        coeffs[0] = c;
        QExp {
            level,
            den,
            start: 0,
            coeffs,
        }
        .trimmed()
    }

    fn trimmed(mut self) -> Self {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.start += lead as i64;
        }
        self
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    /// Grid denominator: exponents are integer multiples of 1/den.
    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// Exponents n < prec (in grid units) are known.
    pub fn prec(&self) -> i64 {
        self.start + self.coeffs.len() as i64
    }

    /// Coefficient of q^(n/den).  Exponents below the stored window are zero
    /// by construction; asking beyond the known precision is a logic error.
    pub fn coeff(&self, n: i64) -> CycNum {
        assert!(n < self.prec(), "coefficient beyond known precision");
        if n < self.start {
            CycNum::zero(self.level)
        } else {
            self.coeffs[(n - self.start) as usize].clone()
        }
    }

    /// Smallest exponent with a nonzero known coefficient; None when every
    /// known coefficient vanishes (the series may still be nonzero beyond).
    pub fn vanishing_order(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| self.start + i as i64)
    }

    pub fn is_known_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Restrict the known window to exponents < new_prec.
    pub fn truncate(&self, new_prec: i64) -> QExp {
        let mut out = self.clone();
        if new_prec <= out.start {
            return QExp::zero(out.level, out.den, new_prec);
        }
        let keep = (new_prec - out.start) as usize;
        if keep < out.coeffs.len() {
            out.coeffs.truncate(keep);
        }
        out
    }

    fn check_compat(&self, rhs: &QExp) -> Result<()> {
        if self.level != rhs.level {
            return Err(Error::LevelMismatch(self.level, rhs.level));
        }
        if self.den != rhs.den {
            return Err(Error::InvalidInput(format!(
                "grid mismatch: 1/{} vs 1/{}",
                self.den, rhs.den
            )));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &QExp) -> QExp {
        self.check_compat(rhs).expect("incompatible series");
        let prec = self.prec().min(rhs.prec());
        let start = self.start.min(rhs.start).min(prec);
        let mut coeffs = Vec::with_capacity((prec - start) as usize);
        for n in start..prec {
            let mut c = CycNum::zero(self.level);
            if n >= self.start && n < self.prec() {
                c = c.add(&self.coeffs[(n - self.start) as usize]);
            }
            if n >= rhs.start && n < rhs.prec() {
                c = c.add(&rhs.coeffs[(n - rhs.start) as usize]);
            }
            coeffs.push(c);
        }
        QExp {
            level: self.level,
            den: self.den,
            start,
            coeffs,
        }
        .trimmed()
    }

    pub fn neg(&self) -> QExp {
        QExp {
            level: self.level,
            den: self.den,
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn sub(&self, rhs: &QExp) -> QExp {
        self.add(&rhs.neg())
    }

    pub fn mul_scalar(&self, s: &CycNum) -> QExp {
        assert_eq!(s.level(), self.level);
        QExp {
            level: self.level,
            den: self.den,
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect(),
        }
        .trimmed()
    }

    pub fn scale_rat(&self, r: &BigRational) -> QExp {
        QExp {
            level: self.level,
            den: self.den,
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| c.scale_rat(r)).collect(),
        }
        .trimmed()
    }

    /// Product with rigorous precision: coefficients of the product are fully
    /// determined for exponents below min(p1 + s2, p2 + s1).
    pub fn mul(&self, rhs: &QExp) -> QExp {
        self.check_compat(rhs).expect("incompatible series");
        let (s1, p1) = (self.start, self.prec());
        let (s2, p2) = (rhs.start, rhs.prec());
        let start = s1 + s2;
        let prec = (p1 + s2).min(p2 + s1);
        if prec <= start {
            return QExp::zero(self.level, self.den, prec);
        }
        let mut coeffs = vec![CycNum::zero(self.level); (prec - start) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let ei = s1 + i as i64;
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let e = ei + s2 + j as i64;
                if e >= prec {
                    break;
                }
                let idx = (e - start) as usize;
                coeffs[idx] = coeffs[idx].add(&a.mul(b));
            }
        }
        QExp {
            level: self.level,
            den: self.den,
            start,
            coeffs,
        }
        .trimmed()
    }

    pub fn pow(&self, e: u32) -> QExp {
        assert!(e >= 1, "zeroth power has unbounded precision");
        let mut acc = self.clone();
        for _ in 1..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Division f/g.  g must have a certain nonzero leading coefficient
    /// within its known window; the quotient precision follows from the
    /// recursion h_e = (f_(e+s) - sum h g)/g_s.
    pub fn div(&self, rhs: &QExp) -> Result<QExp> {
        self.check_compat(rhs)?;
        let s2 = rhs.vanishing_order().ok_or(Error::Undetermined)?;
        let lead = rhs.coeff(s2);
        let lead_inv = lead.inv()?;
        let (s1, p1) = (self.start, self.prec());
        let p2 = rhs.prec();
        let hstart = s1 - s2;
        // coefficient e of h uses f_(e+s2) (need e+s2 < p1) and g up to
        // index e + 2 s2 - hstart < p2
        let prec = (p1 - s2).min(p2 + hstart - s2);
        if prec <= hstart {
            return Ok(QExp::zero(self.level, self.den, prec));
        }
        let mut h: Vec<CycNum> = Vec::with_capacity((prec - hstart) as usize);
        for e in hstart..prec {
            let mut acc = self.coeff(e + s2);
            for (i, hc) in h.iter().enumerate() {
                if hc.is_zero() {
                    continue;
                }
                let gidx = e + s2 - (hstart + i as i64);
                if gidx < rhs.start {
                    continue;
                }
                acc = acc.sub(&hc.mul(&rhs.coeffs[(gidx - rhs.start) as usize]));
            }
            h.push(acc.mul(&lead_inv));
        }
        Ok(QExp {
            level: self.level,
            den: self.den,
            start: hstart,
            coeffs: h,
        }
        .trimmed())
    }

    /// Apply sigma_d to every coefficient.
    pub fn galois(&self, d: u64) -> Result<QExp> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            coeffs.push(c.galois(d)?);
        }
        Ok(QExp {
            level: self.level,
            den: self.den,
            start: self.start,
            coeffs,
        })
    }

    /// Multiply by q^(t/den) (shift all exponents by t).
    pub fn shift(&self, t: i64) -> QExp {
        QExp {
            level: self.level,
            den: self.den,
            start: self.start + t,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Refine the grid: exponent n/den becomes (n*factor)/(den*factor).
    pub fn upsample(&self, factor: u64) -> QExp {
        assert!(factor >= 1);
        if factor == 1 {
            return self.clone();
        }
        let f = factor as i64;
        let mut coeffs = Vec::with_capacity(self.coeffs.len() * factor as usize);
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.clone());
            if i + 1 < self.coeffs.len() {
                for _ in 1..factor {
                    coeffs.push(CycNum::zero(self.level));
                }
            }
        }
        // exponents strictly below prec*factor are known (those not hit are 0)
        let start = self.start * f;
        let prec = self.prec() * f;
        coeffs.resize((prec - start).max(0) as usize, CycNum::zero(self.level));
        QExp {
            level: self.level,
            den: self.den * factor,
            start,
            coeffs,
        }
    }

    /// Coarsen the grid by `factor` (which must divide den): every known
    /// coefficient at an exponent not divisible by factor must vanish,
    /// otherwise the series does not live on the coarser grid.
    pub fn downsample(&self, factor: u64) -> Result<QExp> {
        assert!(factor >= 1 && self.den % factor == 0);
        if factor == 1 {
            return Ok(self.clone());
        }
        let f = factor as i64;
        let new_den = self.den / factor;
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = self.start + i as i64;
            if e.rem_euclid(f) != 0 && !c.is_zero() {
                return Err(Error::GridViolation { width: new_den });
            }
        }
        let start = num_integer::Integer::div_ceil(&self.start, &f);
        let prec = num_integer::Integer::div_ceil(&self.prec(), &f);
        let mut coeffs = Vec::with_capacity((prec - start).max(0) as usize);
        for m in start..prec {
            let e = m * f;
            coeffs.push(if e < self.start || e >= self.prec() {
                CycNum::zero(self.level)
            } else {
                self.coeffs[(e - self.start) as usize].clone()
            });
        }
        Ok(QExp {
            level: self.level,
            den: new_den,
            start,
            coeffs,
        })
    }

    /// Reinterpret rational coefficients at a new cyclotomic level.
    pub fn with_level(&self, level: u64) -> QExp {
        if level == self.level {
            return self.clone();
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let r = c
                    .as_rational()
                    .expect("level change requires rational coefficients");
                CycNum::from_rat(level, &r)
            })
            .collect();
        QExp {
            level,
            den: self.den,
            start: self.start,
            coeffs,
        }
    }

    pub fn coeffs(&self) -> &[CycNum] {
        &self.coeffs
    }
}

/// Serialized form: coefficients as exact rational coordinate vectors in the
/// power basis of Q(zeta_level).
#[derive(Serialize, Deserialize)]
pub struct QExpJson {
    pub level: u64,
    pub den: u64,
    pub start: i64,
    pub prec: i64,
    pub coeffs: Vec<Vec<String>>,
}

impl QExp {
    pub fn to_json(&self) -> QExpJson {
        QExpJson {
            level: self.level,
            den: self.den,
            start: self.start,
            prec: self.prec(),
            coeffs: self.coeffs.iter().map(|c| c.coord_strings()).collect(),
        }
    }

    pub fn from_json(j: &QExpJson) -> Result<QExp> {
        if j.prec - j.start != j.coeffs.len() as i64 {
            return Err(Error::InvalidInput(
                "coefficient count does not match prec - start".into(),
            ));
        }
        let mut coeffs = Vec::with_capacity(j.coeffs.len());
        for c in &j.coeffs {
            coeffs.push(CycNum::from_coord_strings(j.level, c)?);
        }
        Ok(QExp {
            level: j.level,
            den: j.den,
            start: j.start,
            coeffs,
        })
    }
}

/// prod_(n>=1) (1 - q^n) + O(q^prec) via the pentagonal number theorem.
pub fn eta_quotientless(prec: i64) -> QExp {
    assert!(prec > 0);
    let mut coeffs = vec![CycNum::zero(1); prec as usize];
    let mut k: i64 = 0;
    loop {
        let mut hit = false;
        for kk in [k, -k] {
            if kk == 0 && k != 0 {
                continue;
            }
            let e = kk * (3 * kk - 1) / 2;
            if e < prec {
                hit = true;
                let sign = if k % 2 == 0 { 1 } else { -1 };
                coeffs[e as usize] =
                    coeffs[e as usize].add(&CycNum::from_int(1, sign));
            }
            if k == 0 {
                break;
            }
        }
        if !hit {
            break;
        }
        k += 1;
    }
    QExp::new(1, 1, 0, coeffs)
}

/// prod (1 - q^n)^24 + O(q^prec), the level-1 series Delta/q.
pub fn eta_pow24(prec: i64) -> QExp {
    let p = eta_quotientless(prec);
    let p2 = p.mul(&p).truncate(prec);
    let p4 = p2.mul(&p2).truncate(prec);
    let p8 = p4.mul(&p4).truncate(prec);
    let p16 = p8.mul(&p8).truncate(prec);
    p16.mul(&p8).truncate(prec)
}

/// Delta = q prod (1 - q^n)^24, known for exponents < prec.
pub fn delta_qexp(prec: i64) -> QExp {
    eta_pow24(prec - 1).shift(1)
}

/// E4 = 1 + 240 sum sigma_3(n) q^n + O(q^prec).
pub fn e4_qexp(prec: i64) -> QExp {
    assert!(prec > 0);
    let mut coeffs = vec![CycNum::zero(1); prec as usize];
    coeffs[0] = CycNum::one(1);
    for n in 1..prec {
        let s = crate::arith::sigma_k(n as u64, 3);
        coeffs[n as usize] = CycNum::from_bigint(1, s * BigInt::from(240));
    }
    QExp::new(1, 1, 0, coeffs)
}

/// j = E4^3 / Delta = q^-1 + 744 + 196884 q + ...
pub fn j_qexp(prec: i64) -> QExp {
    let p = prec + 2;
    let e4 = e4_qexp(p);
    let num = e4.pow(3);
    let den = delta_qexp(p);
    num.div(&den).expect("Delta has leading coefficient 1")
}
