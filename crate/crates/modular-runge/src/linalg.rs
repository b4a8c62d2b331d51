//! Exact integer and rational linear algebra: saturated integer kernels,
//! rational rank and membership, lattice reduction.
//!
//! The kernel of an integer matrix acting on Z^d is computed by column
//! operations over Z (a Hermite-style reduction applied simultaneously to an
//! identity matrix); the result is automatically saturated because it is the
//! full integer kernel, not the span of cleared rational solutions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Basis of {x in Z^d : A x = 0} for the m x d matrix A (rows of length d).
/// Basis vectors are primitive with positive leading coordinate.
pub fn kernel_basis(a: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let m = a.len();
    if m == 0 {
        return Vec::new();
    }
    let d = a[0].len();
    assert!(a.iter().all(|r| r.len() == d));
    // h: working copy (column view), u: unimodular column transform
    let mut h: Vec<Vec<BigInt>> = (0..d).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect();
    let mut u: Vec<Vec<BigInt>> = (0..d)
        .map(|j| {
            let mut col = vec![BigInt::zero(); d];
            col[j] = BigInt::one();
            col
        })
        .collect();
    let mut pivot_col = 0usize;
    for row in 0..m {
        if pivot_col >= d {
            break;
        }
        // clear row `row` across columns >= pivot_col via gcd column ops
        loop {
            // find the column with the smallest nonzero absolute entry
            let mut best: Option<usize> = None;
            for j in pivot_col..d {
                if !h[j][row].is_zero()
                    && best.map_or(true, |b| h[j][row].abs() < h[b][row].abs())
                {
                    best = Some(j);
                }
            }
            let Some(b) = best else { break };
            h.swap(pivot_col, b);
            u.swap(pivot_col, b);
            let mut done = true;
            for j in pivot_col + 1..d {
                if h[j][row].is_zero() {
                    continue;
                }
                let q = div_nearest(&h[j][row], &h[pivot_col][row]);
                if !q.is_zero() {
                    for i in 0..m {
                        let s = &q * &h[pivot_col][i];
                        h[j][i] -= s;
                    }
                    for i in 0..d {
                        let s = &q * &u[pivot_col][i];
                        u[j][i] -= s;
                    }
                }
                if !h[j][row].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if !h[pivot_col][row].is_zero() {
            pivot_col += 1;
        }
    }
    let mut out = Vec::new();
    for j in pivot_col..d {
        debug_assert!(h[j].iter().all(|x| x.is_zero()));
        out.push(normalize_primitive(u[j].clone()));
    }
    for v in &out {
        debug_assert!(a
            .iter()
            .all(|row| row.iter().zip(v).map(|(r, x)| r * x).sum::<BigInt>().is_zero()));
    }
    out
}

/// Quotient rounding to nearest (ties toward zero), so remainders shrink.
fn div_nearest(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    let two_r = r.abs() * 2;
    if two_r > b.abs() {
        if (a.is_negative()) == (b.is_negative()) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

fn normalize_primitive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    let mut g = BigInt::zero();
    for x in &v {
        g = g.gcd(x);
    }
    if !g.is_zero() && !g.is_one() {
        for x in &mut v {
            *x /= &g;
        }
    }
    if let Some(first) = v.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in &mut v {
                *x = -&*x;
            }
        }
    }
    v
}

/// Rank of a rational matrix (Gaussian elimination).
pub fn rank_rational(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let nrows = m.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = m[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].clone().recip();
        for i in rank + 1..nrows {
            if m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] * &inv;
            for j in col..ncols {
                let s = &f * &m[rank][j];
                m[i][j] -= s;
            }
        }
        rank += 1;
    }
    rank
}

/// Whether v lies in the row space of `rows` over Q.
pub fn in_row_space(rows: &[Vec<BigRational>], v: &[BigRational]) -> bool {
    let base = rank_rational(rows);
    let mut aug: Vec<Vec<BigRational>> = rows.to_vec();
    aug.push(v.to_vec());
    rank_rational(&aug) == base
}

/// Coefficients x with sum x_i rows[i] = v, or None when v is outside the
/// row space.  Eliminates on rows augmented with identity columns so the
/// combination is read off the reduced target.
pub fn solve_in_row_space(
    rows: &[Vec<BigRational>],
    v: &[BigRational],
) -> Option<Vec<BigRational>> {
    let nrows = rows.len();
    if nrows == 0 {
        return v.iter().all(|x| x.is_zero()).then(Vec::new);
    }
    let ncols = rows[0].len();
    // working rows carry [row | e_i], the target carries [v | 0]
    let mut work: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut w = r.clone();
            w.extend((0..nrows).map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }));
            w
        })
        .collect();
    let mut target: Vec<BigRational> = v.to_vec();
    target.extend(std::iter::repeat_n(BigRational::zero(), nrows));
    let mut row = 0usize;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let Some(p) = (row..nrows).find(|&i| !work[i][col].is_zero()) else {
            continue;
        };
        work.swap(row, p);
        let inv = work[row][col].clone().recip();
        for x in work[row].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..nrows {
            if i == row || work[i][col].is_zero() {
                continue;
            }
            let f = work[i][col].clone();
            for j in 0..ncols + nrows {
                let s = &f * &work[row][j];
                work[i][j] -= s;
            }
        }
        if !target[col].is_zero() {
            let f = target[col].clone();
            for j in 0..ncols + nrows {
                let s = &f * &work[row][j];
                target[j] -= s;
            }
        }
        row += 1;
    }
    if target[..ncols].iter().any(|x| !x.is_zero()) {
        return None;
    }
    // v - sum target[ncols + i] rows-reduction bookkeeping: the negated
    // multipliers are the combination
    Some(target[ncols..].iter().map(|x| -x).collect())
}

/// Row-style Hermite canonical form of the lattice spanned by `rows`
/// (zero rows dropped); equal lattices give equal output.
pub fn hnf_rows(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut m: Vec<Vec<BigInt>> = rows.iter().filter(|r| r.iter().any(|x| !x.is_zero())).cloned().collect();
    if m.is_empty() {
        return Vec::new();
    }
    let ncols = m[0].len();
    let mut row = 0usize;
    for col in 0..ncols {
        if row == m.len() {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for i in row..m.len() {
                if !m[i][col].is_zero()
                    && best.map_or(true, |b| m[i][col].abs() < m[b][col].abs())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            m.swap(row, b);
            let mut done = true;
            for i in row + 1..m.len() {
                if m[i][col].is_zero() {
                    continue;
                }
                let q = div_nearest(&m[i][col], &m[row][col]);
                for j in 0..ncols {
                    let s = &q * &m[row][j];
                    m[i][j] -= s;
                }
                if !m[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if m[row][col].is_zero() {
            continue;
        }
        if m[row][col].is_negative() {
            for j in 0..ncols {
                m[row][j] = -&m[row][j];
            }
        }
        // reduce the rows above into canonical range [0, pivot)
        for i in 0..row {
            let q = m[i][col].div_floor(&m[row][col]);
            if !q.is_zero() {
                for j in 0..ncols {
                    let s = &q * &m[row][j];
                    m[i][j] -= s;
                }
            }
        }
        row += 1;
    }
    m.truncate(row);
    m
}

/// Incremental rank tracking over Q: rows are inserted one at a time and
/// kept in reduced form, so each insertion costs one elimination pass.
pub struct RankAccumulator {
    ncols: usize,
    /// reduced rows together with their pivot column, sorted by pivot
    rows: Vec<(usize, Vec<BigRational>)>,
}

impl RankAccumulator {
    pub fn new(ncols: usize) -> Self {
        RankAccumulator {
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `row` against the currently stored rows; if a nonzero residue
    /// remains, keep it and report that the rank grew.  The stored rows form
    /// a reduced echelon set (each has zeros at every other pivot), so one
    /// pass eliminates exactly and a nonzero residue proves independence.
    pub fn try_insert(&mut self, mut row: Vec<BigRational>) -> bool {
        assert_eq!(row.len(), self.ncols);
        for (pivot, r) in &self.rows {
            if row[*pivot].is_zero() {
                continue;
            }
            let f = row[*pivot].clone();
            for (x, y) in row.iter_mut().zip(r) {
                *x -= &f * y;
            }
        }
        let Some(pivot) = row.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = row[pivot].clone().recip();
        for x in row.iter_mut() {
            *x *= &inv;
        }
        // restore the mutual-reduction invariant
        for (_, r) in self.rows.iter_mut() {
            if r[pivot].is_zero() {
                continue;
            }
            let f = r[pivot].clone();
            for (x, y) in r.iter_mut().zip(&row) {
                *x -= &f * y;
            }
        }
        self.rows.push((pivot, row));
        self.rows.sort_by_key(|(p, _)| *p);
        true
    }
}

/// Rank tracking modulo the Mersenne prime 2^61 - 1.  For integer input
/// rows, independence mod p implies independence over Q, so accepting a row
/// only when the mod-p rank grows yields an exact independence certificate;
/// the (astronomically unlikely) false rejection of an independent row is
/// harmless in a streaming construction, which simply consumes more
/// candidates.
pub const RANK_PRIME: u64 = (1 << 61) - 1;

pub struct RankAccumulatorModP {
    ncols: usize,
    rows: Vec<(usize, Vec<u64>)>,
}

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % RANK_PRIME as u128) as u64
}

fn powmod(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b);
        }
        b = mulmod(b, b);
        e >>= 1;
    }
    acc
}

/// Reduce a rational to GF(p); the denominator must be a unit mod p.
pub fn rational_modp(r: &BigRational) -> u64 {
    let p = BigInt::from(RANK_PRIME);
    let num: u64 = r.numer().mod_floor(&p).try_into().unwrap();
    let den: u64 = r.denom().mod_floor(&p).try_into().unwrap();
    assert!(den != 0, "denominator divisible by the rank prime");
    mulmod(num, powmod(den, RANK_PRIME - 2))
}

impl RankAccumulatorModP {
    pub fn new(ncols: usize) -> Self {
        RankAccumulatorModP {
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Same contract as `RankAccumulator::try_insert`, over GF(p).
    pub fn try_insert(&mut self, mut row: Vec<u64>) -> bool {
        assert_eq!(row.len(), self.ncols);
        for (pivot, r) in &self.rows {
            let f = row[*pivot];
            if f == 0 {
                continue;
            }
            for (x, y) in row.iter_mut().zip(r) {
                let s = mulmod(f, *y);
                *x = (*x + RANK_PRIME - s) % RANK_PRIME;
            }
        }
        let Some(pivot) = row.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = powmod(row[pivot], RANK_PRIME - 2);
        for x in row.iter_mut() {
            *x = mulmod(*x, inv);
        }
        for (_, r) in self.rows.iter_mut() {
            let f = r[pivot];
            if f == 0 {
                continue;
            }
            for (x, y) in r.iter_mut().zip(&row) {
                let s = mulmod(f, *y);
                *x = (*x + RANK_PRIME - s) % RANK_PRIME;
            }
        }
        self.rows.push((pivot, row));
        self.rows.sort_by_key(|(p, _)| *p);
        true
    }
}

/// Lovasz-reduced basis (delta = 3/4) of the lattice spanned by the input
/// vectors, which must be linearly independent.  Exact rational arithmetic;
/// meant for the small dimensions arising here.
pub fn lll_reduce(basis: &mut Vec<Vec<BigInt>>) {
    let n = basis.len();
    if n <= 1 {
        return;
    }
    let dim = basis[0].len();
    assert!(basis.iter().all(|v| v.len() == dim));
    // full Gram-Schmidt recomputation: (mu, |b*_i|^2)
    let gram = |b: &Vec<Vec<BigInt>>| -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        let mut mu = vec![vec![BigRational::zero(); n]; n];
        let mut bstar: Vec<Vec<BigRational>> = Vec::with_capacity(n);
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let mut star: Vec<BigRational> =
                b[i].iter().map(|x| BigRational::from(x.clone())).collect();
            for j in 0..i {
                let num: BigRational = b[i]
                    .iter()
                    .zip(&bstar[j])
                    .map(|(x, y)| BigRational::from(x.clone()) * y)
                    .sum();
                let m = &num / &norms[j];
                for (s, y) in star.iter_mut().zip(&bstar[j]) {
                    *s -= &m * y;
                }
                mu[i][j] = m;
            }
            let nn: BigRational = star.iter().map(|x| x * x).sum();
            assert!(!nn.is_zero(), "lll input must be independent");
            norms.push(nn);
            bstar.push(star);
        }
        (mu, norms)
    };
    let round = |x: &BigRational| -> BigInt {
        let shifted = x + BigRational::new(BigInt::one(), BigInt::from(2));
        shifted.floor().to_integer()
    };
    let (mut mu, mut norms) = gram(basis);
    let delta = BigRational::new(BigInt::from(3), BigInt::from(4));
    let mut k = 1usize;
    while k < n {
        for j in (0..k).rev() {
            let q = round(&mu[k][j]);
            if !q.is_zero() {
                for i in 0..dim {
                    let s = &q * &basis[j][i];
                    basis[k][i] -= s;
                }
                let (m2, n2) = gram(basis);
                mu = m2;
                norms = n2;
            }
        }
        let lhs = &norms[k];
        let rhs = (&delta - &mu[k][k - 1] * &mu[k][k - 1]) * &norms[k - 1];
        if *lhs >= rhs {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            let (m2, n2) = gram(basis);
            mu = m2;
            norms = n2;
            k = k.max(2) - 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use proptest::prelude::*;

    fn bi(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn mat(entries: &[&[i64]]) -> Vec<Vec<BigInt>> {
        entries.iter().map(|r| r.iter().map(|&x| bi(x)).collect()).collect()
    }

    #[test]
    fn kernel_simple() {
        let a = mat(&[&[1, 1, -2]]);
        let k = kernel_basis(&a);
        assert_eq!(k.len(), 2);
        // (1, 1, 1) must be an integer combination of the basis: solve in Z
        // using the Hermite form of the lattice
        let mut with_target = k.clone();
        with_target.push(vec![bi(1), bi(1), bi(1)]);
        assert_eq!(hnf_rows(&k), hnf_rows(&with_target));
    }

    #[test]
    fn kernel_of_full_rank_matrix_is_trivial() {
        let a = mat(&[&[2, 0], &[0, 3]]);
        assert!(kernel_basis(&a).is_empty());
    }

    #[test]
    fn kernel_saturation_via_minors() {
        // gcd of maximal minors of a saturated lattice basis is 1
        let a = mat(&[&[6, 10, 15]]);
        let k = kernel_basis(&a);
        assert_eq!(k.len(), 2);
        let minor = |c1: usize, c2: usize| -> BigInt {
            &k[0][c1] * &k[1][c2] - &k[0][c2] * &k[1][c1]
        };
        let g = minor(0, 1).gcd(&minor(0, 2)).gcd(&minor(1, 2));
        assert!(g.is_one(), "kernel lattice not saturated, minor gcd {g}");
    }

    #[test]
    fn rank_and_membership() {
        let rows = vec![
            vec![rat(1, 1), rat(2, 1), rat(3, 1)],
            vec![rat(2, 1), rat(4, 1), rat(6, 1)],
            vec![rat(0, 1), rat(1, 1), rat(1, 2)],
        ];
        assert_eq!(rank_rational(&rows), 2);
        assert!(in_row_space(&rows, &[rat(1, 1), rat(3, 1), rat(7, 2)]));
        assert!(!in_row_space(&rows, &[rat(0, 1), rat(0, 1), rat(1, 1)]));
    }

    #[test]
    fn solve_recovers_combinations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for round in 0..25 {
            let nrows = 1 + round % 4;
            let rows: Vec<Vec<BigRational>> = (0..nrows)
                .map(|_| (0..5).map(|_| rat(rng.gen_range(-9..9), 1)).collect())
                .collect();
            let coeffs: Vec<BigRational> =
                (0..nrows).map(|_| rat(rng.gen_range(-5..5), 3)).collect();
            let target: Vec<BigRational> = (0..5)
                .map(|j| {
                    coeffs
                        .iter()
                        .zip(&rows)
                        .map(|(c, r)| c * &r[j])
                        .sum()
                })
                .collect();
            let x = solve_in_row_space(&rows, &target).expect("combination exists");
            for j in 0..5 {
                let got: BigRational =
                    x.iter().zip(&rows).map(|(c, r)| c * &r[j]).sum();
                assert_eq!(got, target[j]);
            }
        }
        // outside the span
        let rows = vec![vec![rat(1, 1), rat(0, 1)], vec![rat(2, 1), rat(0, 1)]];
        assert!(solve_in_row_space(&rows, &[rat(0, 1), rat(1, 1)]).is_none());
    }

    #[test]
    fn rank_accumulator_modp_matches_exact_rank() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rows: Vec<Vec<i64>> = (0..4)
                .map(|_| (0..5).map(|_| rng.gen_range(-50..50)).collect())
                .collect();
            let rat_rows: Vec<Vec<BigRational>> = rows
                .iter()
                .map(|r| r.iter().map(|&x| BigRational::from(BigInt::from(x))).collect())
                .collect();
            let want = rank_rational(&rat_rows);
            let mut acc = RankAccumulatorModP::new(5);
            for r in &rat_rows {
                let row: Vec<u64> = r.iter().map(rational_modp).collect();
                acc.try_insert(row);
            }
            assert_eq!(acc.rank(), want);
        }
    }

    #[test]
    fn rank_accumulator_detects_dependence() {
        let mut acc = RankAccumulator::new(3);
        assert!(acc.try_insert(vec![rat(0, 1), rat(0, 1), rat(1, 1)]));
        assert!(acc.try_insert(vec![rat(1, 1), rat(2, 1), rat(5, 1)]));
        // 2 (1,2,5) - 3 (0,0,1): dependent even though pivots arrived out
        // of order across the first two insertions
        assert!(!acc.try_insert(vec![rat(2, 1), rat(4, 1), rat(7, 1)]));
        assert!(acc.try_insert(vec![rat(0, 1), rat(1, 1), rat(0, 1)]));
        assert_eq!(acc.rank(), 3);
        assert!(!acc.try_insert(vec![rat(-3, 7), rat(1, 2), rat(11, 5)]));
    }

    #[test]
    fn hnf_canonicalizes_equal_lattices() {
        let b1 = mat(&[&[2, 0], &[0, 3]]);
        let b2 = mat(&[&[2, 3], &[4, 3]]);
        // both span the lattice {(x, y): x even-ish}? check: (2,3)+(4,3)...
        // (4,3)-(2,3) = (2,0); (2,3)-(2,0) = (0,3): same lattice
        assert_eq!(hnf_rows(&b1), hnf_rows(&b2));
        let b3 = mat(&[&[1, 0], &[0, 3]]);
        assert_ne!(hnf_rows(&b1), hnf_rows(&b3));
    }

    #[test]
    fn lll_finds_short_vectors() {
        let mut b = mat(&[&[12, 2], &[13, 4]]);
        let before = hnf_rows(&b);
        lll_reduce(&mut b);
        assert_eq!(hnf_rows(&b), before, "lll must preserve the lattice");
        let norm = |v: &Vec<BigInt>| -> BigInt { v.iter().map(|x| x * x).sum() };
        // det = 22, so |b_1|^2 <= sqrt(2) * 22 < 32 by the reduction bound;
        // the only vectors that short are multiples of (1, 2) and (5, -2)
        assert!(norm(&b[0]) <= bi(31), "first vector still long: {:?}", b);
        // and on a lattice with a planted short vector it is found exactly
        let mut c = mat(&[&[1, 0, 599], &[0, 1, 600], &[0, 0, 1201]]);
        lll_reduce(&mut c);
        let shortest = c.iter().map(&norm).min().unwrap();
        // (1, 1, -1) = e1 + e2 - (third column relation) lies in the lattice
        assert!(shortest <= bi(3), "planted vector missed: {:?}", c);
    }

    proptest! {
        #[test]
        fn kernel_dimension_and_exactness(
            rows in prop::collection::vec(
                prop::collection::vec(-9i64..=9, 5),
                1..=3,
            )
        ) {
            let a: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| bi(x)).collect()).collect();
            let k = kernel_basis(&a);
            let rat_rows: Vec<Vec<BigRational>> = a.iter().map(|r| r.iter().map(|x| BigRational::from(x.clone())).collect()).collect();
            let rank = rank_rational(&rat_rows);
            prop_assert_eq!(k.len(), 5 - rank);
            for v in &k {
                for row in &a {
                    let s: BigInt = row.iter().zip(v).map(|(r, x)| r * x).sum();
                    prop_assert!(s.is_zero());
                }
            }
            // kernel vectors are independent
            let kr: Vec<Vec<BigRational>> = k.iter().map(|r| r.iter().map(|x| BigRational::from(x.clone())).collect()).collect();
            prop_assert_eq!(rank_rational(&kr), k.len());
        }

        #[test]
        fn lll_preserves_lattice(
            rows in prop::collection::vec(
                prop::collection::vec(-20i64..=20, 3),
                3,
            )
        ) {
            let b: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| bi(x)).collect()).collect();
            let rat_rows: Vec<Vec<BigRational>> = b.iter().map(|r| r.iter().map(|x| BigRational::from(x.clone())).collect()).collect();
            prop_assume!(rank_rational(&rat_rows) == 3);
            let before = hnf_rows(&b);
            let mut reduced = b.clone();
            lll_reduce(&mut reduced);
            prop_assert_eq!(hnf_rows(&reduced), before);
        }
    }
}
