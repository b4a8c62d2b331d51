//! The space M_(k,G) of weight-k forms attached to G and its integral basis
//! of Eisenstein trace forms.
//!
//! M_(k,G) is spanned over Q by the traces
//!
//!   T_(j,alpha) = sum_(g in G) zeta_N^(j det g) E_(alpha_1 g) ... E_(alpha_k g)
//!
//! with alpha_i in (Z/N)^2 - {0} and 0 <= j < phi(N).  The implementation
//! works with the scaled series 2N E_alpha throughout, so every stored
//! coefficient is in Z[zeta_N]; a stored form equals (2N)^k T_(j,alpha).
//!
//! Independence of selected forms is certified by expansion at infinity to
//! the Sturm precision P = floor(k mubar / 12) + 1 with mubar = |SL_2(Z/N)|/2:
//! a nonzero holomorphic weight-k form of level N has at most k mubar / 12
//! leading zero q_N-coefficients, so rank of the coefficient window equals
//! rank of the forms, in both directions.
//!
//! At weight k = 12m the K_G-dimension is m mu - g + 1 by Riemann-Roch, and
//! the Q-dimension is [K_G : Q] (m mu - g + 1).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::arith::{euler_phi, sl2_order};
use crate::congruence::{CurveData, Mat};
use crate::cyclotomic::CycNum;
use crate::eisenstein::{index_act, index_normalize, EisCache};
use crate::linalg::RankAccumulatorModP;
use crate::qexp::QExp;
use crate::{Error, Result};

/// Sturm precision: coefficients q_N^0 .. q_N^(P-1) determine a weight-k
/// level-N form.
pub fn sturm_prec(n: u64, k: u64) -> i64 {
    let mubar = sl2_order(n) / 2;
    (k * mubar / 12 + 1) as i64
}

/// dim over K_G of M_(12m,G).
pub fn dimension_kg(curve: &CurveData, m: u64) -> u64 {
    let v = m as i64 * curve.mu() as i64 - curve.genus() as i64 + 1;
    assert!(v > 0, "weight 12m space must have positive dimension");
    v as u64
}

/// dim over Q of M_(12m,G).
pub fn dimension_q(curve: &CurveData, m: u64) -> u64 {
    curve.field_degree() * dimension_kg(curve, m)
}

/// Riemann-Roch lower bound for dim_(K_G) W_m, the forms vanishing to order
/// >= m w_c at every cusp outside Sigma: m sum_(c not in Sigma) w_c - g + 1.
pub fn w_dimension_lower(curve: &CurveData, m: u64, sigma: &[usize]) -> i64 {
    let outside: u64 = curve
        .cusps()
        .iter()
        .enumerate()
        .filter(|(i, _)| !sigma.contains(i))
        .map(|(_, c)| c.width)
        .sum();
    m as i64 * outside as i64 - curve.genus() as i64 + 1
}

/// Identification of a trace form: the twist exponent and the index list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFormKey {
    pub j: u64,
    pub alphas: Vec<(u64, u64)>,
}

/// Cache of products of scaled Eisenstein series, keyed by the sorted
/// +--normalized index multiset.  Shared prefixes of sorted keys make the
/// recursive fill cheap, and G-translates of one candidate collide here.
/// The map is behind a mutex so det-grouped sums can run on worker threads;
/// two threads may race on one product, in which case the first insert wins
/// and the duplicate is dropped.
pub struct ProductCache {
    eis: EisCache,
    map: Mutex<HashMap<Vec<(u64, u64)>, Arc<QExp>>>,
}

impl ProductCache {
    pub fn new(n: u64, prec: i64) -> Self {
        ProductCache {
            eis: EisCache::new(n, prec),
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn level(&self) -> u64 {
        self.eis.level()
    }

    pub fn prec(&self) -> i64 {
        self.eis.prec()
    }

    /// Product of 2N E_beta over the sorted normalized key.
    fn product(&self, key: &[(u64, u64)]) -> Arc<QExp> {
        if let Some(p) = self.map.lock().unwrap().get(key) {
            return Arc::clone(p);
        }
        let value = if key.len() == 1 {
            self.eis.scaled(key[0])
        } else {
            let prefix = self.product(&key[..key.len() - 1]);
            let last = self.eis.scaled(key[key.len() - 1]);
            Arc::new(prefix.mul(&last))
        };
        Arc::clone(
            self.map
                .lock()
                .unwrap()
                .entry(key.to_vec())
                .or_insert(value),
        )
    }

    /// Signed product prod_l 2N E_(alpha_l A) for raw indices, or None when
    /// some index degenerates (E_beta = 0 for beta in the 2-torsion).
    pub fn signed_product(
        &self,
        alphas: &[(u64, u64)],
        a: &Mat,
    ) -> Option<(i8, Arc<QExp>)> {
        let n = self.eis.level();
        let mut key = Vec::with_capacity(alphas.len());
        let mut sign = 1i8;
        for &alpha in alphas {
            let moved = index_act(n, alpha, a);
            let (norm, s) = index_normalize(n, moved);
            if norm == (0, 0) || ((2 * norm.0) % n == 0 && (2 * norm.1) % n == 0) {
                return None;
            }
            sign *= s;
            key.push(norm);
        }
        key.sort();
        Some((sign, self.product(&key)))
    }
}

/// P_delta(A) = sum over g in G with det(gA) = delta of the scaled products
/// prod_l 2N E_(alpha_l g A).  The trace twisted by j is recovered as
/// sum_delta zeta^(j delta) P_delta(A), for every j at once.
///
/// The sum over G splits across worker threads (see [`crate::thread_count`]);
/// partial sums merge by exact rational addition, so the grouping is
/// independent of the split.
pub fn det_grouped_products(
    curve: &CurveData,
    cache: &ProductCache,
    alphas: &[(u64, u64)],
    a: &Mat,
) -> BTreeMap<u64, QExp> {
    let elements = curve.elements();
    let workers = crate::thread_count().min(elements.len()).max(1);
    if workers == 1 {
        return det_grouped_chunk(curve, cache, alphas, a, elements);
    }
    let chunk = elements.len().div_ceil(workers);
    let partials: Vec<BTreeMap<u64, QExp>> = std::thread::scope(|s| {
        let handles: Vec<_> = elements
            .chunks(chunk)
            .map(|es| s.spawn(move || det_grouped_chunk(curve, cache, alphas, a, es)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let n = curve.level();
    let prec = cache.prec();
    let mut groups: BTreeMap<u64, QExp> = BTreeMap::new();
    for part in partials {
        for (delta, p) in part {
            let entry = groups
                .entry(delta)
                .or_insert_with(|| QExp::zero(n, n, prec));
            *entry = entry.add(&p);
        }
    }
    groups
}

fn det_grouped_chunk(
    curve: &CurveData,
    cache: &ProductCache,
    alphas: &[(u64, u64)],
    a: &Mat,
    elements: &[Mat],
) -> BTreeMap<u64, QExp> {
    let n = curve.level();
    let prec = cache.prec();
    let mut groups: BTreeMap<u64, QExp> = BTreeMap::new();
    for g in elements {
        let ga = g.mul(a);
        let delta = ga.det();
        let entry = groups
            .entry(delta)
            .or_insert_with(|| QExp::zero(n, n, prec));
        if let Some((sign, prod)) = cache.signed_product(alphas, &ga) {
            *entry = if sign >= 0 {
                entry.add(&prod)
            } else {
                entry.sub(&prod)
            };
        }
    }
    groups
}

/// (2N)^k T_(j,alpha) * A as a q_N-expansion at the cache precision.
pub fn trace_form(
    curve: &CurveData,
    cache: &ProductCache,
    key: &TraceFormKey,
    a: &Mat,
) -> QExp {
    let n = curve.level();
    let groups = det_grouped_products(curve, cache, &key.alphas, a);
    let mut out = QExp::zero(n, n, cache.prec());
    for (delta, p) in &groups {
        let z = CycNum::zeta_pow(n, (key.j * delta) as i64);
        out = out.add(&p.mul_scalar(&z));
    }
    out
}

/// Flatten a q-expansion window into a rational row vector: phi(N)
/// coordinates per coefficient, exponents 0..prec.
pub fn flatten_window(f: &QExp, prec: i64) -> Vec<BigRational> {
    let phi = euler_phi(f.level()) as usize;
    let mut row = Vec::with_capacity(prec as usize * phi);
    for e in 0..prec {
        let c = f.coeff(e);
        row.extend(c.rat_coords());
    }
    row
}

/// The same window reduced into GF(p) for fast rank certification.
pub fn flatten_window_modp(f: &QExp, prec: i64) -> Vec<u64> {
    flatten_window(f, prec)
        .iter()
        .map(crate::linalg::rational_modp)
        .collect()
}

/// An independent spanning set of M_(12m,G) over Q found by streaming
/// candidate traces in a fixed deterministic order.
pub struct Basis {
    pub m: u64,
    pub weight: u64,
    pub prec: i64,
    pub keys: Vec<TraceFormKey>,
    /// scaled expansions (2N)^k T * I at infinity, q_N grid, length dim_q
    pub at_infinity: Vec<QExp>,
    pub dim_kg: u64,
    pub dim_q: u64,
}

/// The +--inequivalent nonzero indices with E_alpha != 0, sorted: candidates
/// are nondecreasing lists over this set.
pub fn index_reps(n: u64) -> Vec<(u64, u64)> {
    let mut reps = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if (a, b) == (0, 0) {
                continue;
            }
            if (2 * a) % n == 0 && (2 * b) % n == 0 {
                continue; // E is identically zero on the 2-torsion
            }
            if index_normalize(n, (a, b)).0 == (a, b) {
                reps.push((a, b));
            }
        }
    }
    reps
}

/// Advance a nondecreasing index vector in lexicographic order; false when
/// the stream is exhausted.
fn next_multiset(idx: &mut [usize], top: usize) -> bool {
    for i in (0..idx.len()).rev() {
        if idx[i] + 1 < top {
            let v = idx[i] + 1;
            for x in idx[i..].iter_mut() {
                *x = v;
            }
            return true;
        }
    }
    false
}

/// Build the basis of M_(12m,G) at precision >= Sturm.  Streams candidates
/// (alpha multisets in lex order, all twists j per candidate) and keeps the
/// ones that raise the Q-rank of the expansion window at infinity, until the
/// Riemann-Roch dimension is reached.
pub fn build_basis(curve: &CurveData, m: u64, prec: i64) -> Result<Basis> {
    let n = curve.level();
    let k = 12 * m;
    let sturm = sturm_prec(n, k);
    let prec = prec.max(sturm);
    let want = dimension_q(curve, m) as usize;
    let phi = euler_phi(n);
    let cache = ProductCache::new(n, prec);
    let reps = index_reps(n);
    let mut acc = RankAccumulatorModP::new(sturm as usize * phi as usize);
    let mut keys = Vec::with_capacity(want);
    let mut at_infinity = Vec::with_capacity(want);
    let mut idx = vec![0usize; k as usize];
    // candidate cap: a safety net against an implementation error leaving
    // the stream spinning; the spanning theorem guarantees termination over
    // the full stream
    let max_candidates = 200_000usize;
    let identity = Mat::id(n);
    for _ in 0..max_candidates {
        let alphas: Vec<(u64, u64)> = idx.iter().map(|&i| reps[i]).collect();
        let groups = det_grouped_products(curve, &cache, &alphas, &identity);
        if groups.values().any(|p| !p.is_known_zero()) {
            for j in 0..phi {
                let mut f = QExp::zero(n, n, prec);
                for (delta, p) in &groups {
                    let z = CycNum::zeta_pow(n, (j * delta) as i64);
                    f = f.add(&p.mul_scalar(&z));
                }
                if f.is_known_zero() {
                    continue;
                }
                if acc.try_insert(flatten_window_modp(&f, sturm)) {
                    keys.push(TraceFormKey {
                        j,
                        alphas: alphas.clone(),
                    });
                    at_infinity.push(f);
                    if keys.len() == want {
                        return Ok(Basis {
                            m,
                            weight: k,
                            prec,
                            keys,
                            at_infinity,
                            dim_kg: dimension_kg(curve, m),
                            dim_q: want as u64,
                        });
                    }
                }
            }
        }
        if !next_multiset(&mut idx, reps.len()) {
            break;
        }
    }
    Err(Error::DimensionNotReached {
        got: keys.len(),
        want,
    })
}

/// Expansions of every basis form at every cusp, on the width grid: entry
/// [i][c] is (2N)^k T_i * A_c as a series in q_(w_c).  Forms sharing an
/// index list reuse one det-grouped product computation per cusp.
pub fn cusp_expansions(
    curve: &CurveData,
    cache: &ProductCache,
    basis: &Basis,
) -> Result<Vec<Vec<QExp>>> {
    let n = curve.level();
    let mut out: Vec<Vec<QExp>> = vec![Vec::new(); basis.keys.len()];
    // group the basis forms by index list
    let mut by_alphas: BTreeMap<Vec<(u64, u64)>, Vec<usize>> = BTreeMap::new();
    for (i, key) in basis.keys.iter().enumerate() {
        by_alphas.entry(key.alphas.clone()).or_default().push(i);
    }
    for (cusp_id, cusp) in curve.cusps().iter().enumerate() {
        let a = curve.cusp_rep(cusp_id);
        let factor = n / cusp.width;
        for (alphas, form_ids) in &by_alphas {
            let groups = det_grouped_products(curve, cache, alphas, &a);
            for &i in form_ids {
                let j = basis.keys[i].j;
                let mut f = QExp::zero(n, n, cache.prec());
                for (delta, p) in &groups {
                    let z = CycNum::zeta_pow(n, (j * delta) as i64);
                    f = f.add(&p.mul_scalar(&z));
                }
                // a width-w cusp only sees exponents divisible by N/w
                out[i].push(f.downsample(factor)?);
            }
        }
    }
    Ok(out)
}
