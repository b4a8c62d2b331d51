//! Subgroups of GL_2(Z/N) and the combinatorics of the associated curve:
//! coset space, cusps with widths, elliptic point counts, genus.
//!
//! Throughout, G is a subgroup of GL_2(Z/N) with N > 2 and -I in G, given by
//! generators.  H := G intersect SL_2 also contains -I, so the curve data
//! depends only on the image of G in GL_2(Z/N)/{+-1} as it should.
//!
//! Cusps are the orbits of right multiplication by T = [1 1; 0 1] on the
//! coset space H\SL_2(Z/N); the width of a cusp is its orbit length, and the
//! widths sum to mu = [SL_2(Z/N) : H].  e_2 and e_3 count cosets fixed by
//! S = [0 -1; 1 0] and ST.  The genus is determined by
//! 12(g - 1) + 3 e_2 + 4 e_3 + 6 #cusps = mu.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::arith::{euler_phi, sl2_order, unit_subgroup_closure};
use crate::cyclotomic::CycNum;
use crate::{Error, Result};

/// A 2x2 matrix over Z/N, row major: [a, b, c, d] = [a b; c d].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mat {
    n: u64,
    a: [u64; 4],
}

impl Mat {
    pub fn new(n: u64, entries: [u64; 4]) -> Self {
        assert!(n >= 1);
        Mat {
            n,
            a: [
                entries[0] % n,
                entries[1] % n,
                entries[2] % n,
                entries[3] % n,
            ],
        }
    }

    pub fn id(n: u64) -> Self {
        Mat::new(n, [1, 0, 0, 1])
    }

    pub fn neg_id(n: u64) -> Self {
        Mat::new(n, [n - 1, 0, 0, n - 1])
    }

    /// T = [1 1; 0 1]
    pub fn t(n: u64) -> Self {
        Mat::new(n, [1, 1, 0, 1])
    }

    /// S = [0 -1; 1 0]
    pub fn s(n: u64) -> Self {
        Mat::new(n, [0, n - 1, 1, 0])
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    pub fn entries(&self) -> [u64; 4] {
        self.a
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        let n = self.n as u128;
        let a = self.a.map(|x| x as u128);
        let b = rhs.a.map(|x| x as u128);
        Mat {
            n: self.n,
            a: [
                ((a[0] * b[0] + a[1] * b[2]) % n) as u64,
                ((a[0] * b[1] + a[1] * b[3]) % n) as u64,
                ((a[2] * b[0] + a[3] * b[2]) % n) as u64,
                ((a[2] * b[1] + a[3] * b[3]) % n) as u64,
            ],
        }
    }

    pub fn det(&self) -> u64 {
        let n = self.n as u128;
        let a = self.a.map(|x| x as u128);
        ((a[0] * a[3] + n * n - a[1] * a[2]) % n) as u64
    }

    pub fn neg(&self) -> Mat {
        Mat {
            n: self.n,
            a: self.a.map(|x| (self.n - x) % self.n),
        }
    }

    /// First row (a, b): the index used by the Eisenstein action.
    pub fn row(&self) -> (u64, u64) {
        (self.a[0], self.a[1])
    }
}

/// All of SL_2(Z/N) by brute force (N is small by construction).
pub fn sl2_elements(n: u64) -> Vec<Mat> {
    let mut out = Vec::with_capacity(sl2_order(n) as usize);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let m = Mat::new(n, [a, b, c, d]);
                    if m.det() == 1 {
                        out.push(m);
                    }
                }
            }
        }
    }
    assert_eq!(out.len() as u64, sl2_order(n));
    out
}

/// All of GL_2(Z/N).
pub fn gl2_elements(n: u64) -> Vec<Mat> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let m = Mat::new(n, [a, b, c, d]);
                    if num_integer::gcd(m.det(), n) == 1 {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

/// Closure of a generating set under multiplication (a finite monoid closed
/// under multiplication and containing invertible elements is a group).
pub fn group_closure(n: u64, gens: &[Mat]) -> Vec<Mat> {
    let mut seen: BTreeSet<Mat> = BTreeSet::new();
    seen.insert(Mat::id(n));
    let mut frontier: Vec<Mat> = vec![Mat::id(n)];
    while let Some(m) = frontier.pop() {
        for g in gens {
            let p = m.mul(g);
            if seen.insert(p) {
                frontier.push(p);
            }
        }
    }
    seen.into_iter().collect()
}

/// A cusp of the curve: T-orbit on H\SL_2(Z/N).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cusp {
    /// lexicographically least matrix among all matrices in all cosets of
    /// the orbit; scales f to the cusp via f |-> f * rep
    pub rep: [u64; 4],
    pub width: u64,
}

/// Invariants of the curve attached to G.
pub struct CurveData {
    n: u64,
    group: Vec<Mat>,
    det_image: Vec<u64>,
    h_order: u64,
    mu: u64,
    cusps: Vec<Cusp>,
    e2: u64,
    e3: u64,
    genus: u64,
    infinity_cusp: usize,
    coset_index: HashMap<Mat, usize>,
    coset_cusp: Vec<usize>,
}

impl CurveData {
    pub fn from_generators(n: u64, gens: &[[u64; 4]]) -> Result<CurveData> {
        if n <= 2 {
            return Err(Error::InvalidInput(format!(
                "level N > 2 required, got N = {n}"
            )));
        }
        let gen_mats: Vec<Mat> = gens.iter().map(|&e| Mat::new(n, e)).collect();
        for (i, m) in gen_mats.iter().enumerate() {
            if num_integer::gcd(m.det(), n) != 1 {
                return Err(Error::InvalidInput(format!(
                    "generator {i} has determinant {} not invertible mod {n}",
                    m.det()
                )));
            }
        }
        let group = group_closure(n, &gen_mats);
        if !group.contains(&Mat::neg_id(n)) {
            return Err(Error::InvalidInput(
                "the group must contain -I".into(),
            ));
        }
        Ok(Self::from_elements(n, group))
    }

    fn from_elements(n: u64, group: Vec<Mat>) -> CurveData {
        let det_image: Vec<u64> = {
            let dets: Vec<u64> = group.iter().map(Mat::det).collect();
            unit_subgroup_closure(n, &dets)
        };
        let h: Vec<Mat> = group.iter().filter(|m| m.det() == 1).copied().collect();
        let h_order = h.len() as u64;

        // cosets of H\SL_2: orbits of left multiplication by H
        let sl2 = sl2_elements(n);
        let mut coset_index: HashMap<Mat, usize> = HashMap::with_capacity(sl2.len());
        let mut coset_least: Vec<Mat> = Vec::new();
        for s in &sl2 {
            if coset_index.contains_key(s) {
                continue;
            }
            let id = coset_least.len();
            let mut least = *s;
            for hh in &h {
                let e = hh.mul(s);
                coset_index.insert(e, id);
                if e < least {
                    least = e;
                }
            }
            coset_least.push(least);
        }
        let mu = coset_least.len() as u64;
        assert_eq!(mu * h_order, sl2_order(n), "coset count times |H| = |SL2|");

        // cusps: T-orbits on cosets
        let t = Mat::t(n);
        let mut coset_cusp: Vec<usize> = vec![usize::MAX; mu as usize];
        let mut raw_cusps: Vec<(Mat, u64, usize)> = Vec::new(); // (least mat, width, first coset)
        for c0 in 0..mu as usize {
            if coset_cusp[c0] != usize::MAX {
                continue;
            }
            let cusp_id = raw_cusps.len();
            let mut width = 0u64;
            let mut least = coset_least[c0];
            let mut cur = c0;
            loop {
                coset_cusp[cur] = cusp_id;
                width += 1;
                if coset_least[cur] < least {
                    least = coset_least[cur];
                }
                let next = coset_index[&coset_least[cur].mul(&t)];
                if next == c0 {
                    break;
                }
                cur = next;
            }
            raw_cusps.push((least, width, c0));
        }
        assert_eq!(
            raw_cusps.iter().map(|c| c.1).sum::<u64>(),
            mu,
            "cusp widths sum to mu"
        );

        // order cusps by their least representative, remap coset -> cusp ids
        let mut order: Vec<usize> = (0..raw_cusps.len()).collect();
        order.sort_by_key(|&i| raw_cusps[i].0);
        let mut remap = vec![0usize; raw_cusps.len()];
        for (new_id, &old_id) in order.iter().enumerate() {
            remap[old_id] = new_id;
        }
        for c in coset_cusp.iter_mut() {
            *c = remap[*c];
        }
        let cusps: Vec<Cusp> = order
            .iter()
            .map(|&i| Cusp {
                rep: raw_cusps[i].0.entries(),
                width: raw_cusps[i].1,
            })
            .collect();
        let infinity_cusp = coset_cusp[coset_index[&Mat::id(n)]];

        // elliptic counts: cosets fixed by right multiplication by S and ST
        let s_mat = Mat::s(n);
        let st = s_mat.mul(&t);
        let mut e2 = 0u64;
        let mut e3 = 0u64;
        for c in 0..mu as usize {
            let rep = coset_least[c];
            if coset_index[&rep.mul(&s_mat)] == c {
                e2 += 1;
            }
            if coset_index[&rep.mul(&st)] == c {
                e3 += 1;
            }
        }

        let c_count = cusps.len() as u64;
        let twelve_g = mu as i64 - 3 * e2 as i64 - 4 * e3 as i64 - 6 * c_count as i64 + 12;
        assert!(
            twelve_g >= 0 && twelve_g % 12 == 0,
            "genus formula must give a nonnegative integer, got 12g = {twelve_g}"
        );
        let genus = (twelve_g / 12) as u64;

        CurveData {
            n,
            group,
            det_image,
            h_order,
            mu,
            cusps,
            e2,
            e3,
            genus,
            infinity_cusp,
            coset_index,
            coset_cusp,
        }
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    /// All elements of G, sorted.
    pub fn elements(&self) -> &[Mat] {
        &self.group
    }

    pub fn order(&self) -> u64 {
        self.group.len() as u64
    }

    /// det(G) as a sorted subgroup of (Z/N)^*.
    pub fn det_image(&self) -> &[u64] {
        &self.det_image
    }

    /// [K_G : Q] where K_G is the fixed field of det(G) acting on Q(zeta_N).
    pub fn field_degree(&self) -> u64 {
        euler_phi(self.n) / self.det_image.len() as u64
    }

    pub fn h_order(&self) -> u64 {
        self.h_order
    }

    /// mu = [SL_2(Z/N) : H], the degree of X_G -> X(1) over C.
    pub fn mu(&self) -> u64 {
        self.mu
    }

    pub fn cusps(&self) -> &[Cusp] {
        &self.cusps
    }

    pub fn e2(&self) -> u64 {
        self.e2
    }

    pub fn e3(&self) -> u64 {
        self.e3
    }

    pub fn genus(&self) -> u64 {
        self.genus
    }

    /// Index of the cusp containing the identity coset (the cusp at infinity).
    pub fn infinity_cusp(&self) -> usize {
        self.infinity_cusp
    }

    pub fn cusp_rep(&self, cusp: usize) -> Mat {
        Mat::new(self.n, self.cusps[cusp].rep)
    }

    /// Which cusp the coset of an SL_2 element belongs to.
    pub fn cusp_of(&self, s: &Mat) -> usize {
        self.coset_cusp[self.coset_index[s]]
    }

    /// Lexicographically least representatives of the right cosets G\GL_2.
    pub fn gl2_coset_reps(&self) -> Vec<Mat> {
        let gl2 = gl2_elements(self.n);
        let mut assigned: BTreeSet<Mat> = BTreeSet::new();
        let mut reps = Vec::new();
        for x in &gl2 {
            if assigned.contains(x) {
                continue;
            }
            let mut least = *x;
            for g in &self.group {
                let e = g.mul(x);
                assigned.insert(e);
                if e < least {
                    least = e;
                }
            }
            reps.push(least);
        }
        reps.sort();
        reps
    }

    /// The subgroup of (Z/N)^* stabilizing a cusp via d |-> cusp of
    /// rep * diag(1, d) ... not defined here: Galois movement of cusps is
    /// derived from values of the basis functions, not from coset data.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "level": self.n,
            "group_order": self.order(),
            "det_image": self.det_image,
            "field_degree": self.field_degree(),
            "mu": self.mu,
            "genus": self.genus,
            "e2": self.e2,
            "e3": self.e3,
            "cusp_count": self.cusps.len(),
            "infinity_cusp": self.infinity_cusp,
            "cusps": self.cusps.iter().map(|c| serde_json::json!({
                "rep": c.rep,
                "width": c.width,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Standard families used by tests and the command line.
pub mod families {
    /// Generators of the full upper-triangular (Borel) subgroup.
    pub fn borel(n: u64) -> Vec<[u64; 4]> {
        let mut gens = vec![[1, 1, 0, 1]];
        for u in crate::arith::units_mod(n) {
            gens.push([u, 0, 0, 1]);
            gens.push([1, 0, 0, u]);
        }
        gens
    }

    /// Generators of {+-[1 0; 0 d] : d unit}: the fiberwise model of the
    /// principal level structure (H = {+-I}).
    pub fn diagonal_det(n: u64) -> Vec<[u64; 4]> {
        let mut gens = vec![[n - 1, 0, 0, n - 1]];
        for u in crate::arith::units_mod(n) {
            gens.push([1, 0, 0, u]);
        }
        gens
    }

    /// Generators of all of GL_2(Z/N).
    pub fn full_gl2(n: u64) -> Vec<[u64; 4]> {
        let mut gens = vec![[1, 1, 0, 1], [0, n - 1, 1, 0]];
        for u in crate::arith::units_mod(n) {
            gens.push([u, 0, 0, 1]);
        }
        gens
    }
}

/// Totals per T-orbit needed for Sigma selection: (cusp ids, total width).
pub fn orbit_width_totals(cusps: &[Cusp], orbits: &[Vec<usize>]) -> BTreeMap<usize, u64> {
    let mut totals = BTreeMap::new();
    for (i, orbit) in orbits.iter().enumerate() {
        totals.insert(i, orbit.iter().map(|&c| cusps[c].width).sum());
    }
    totals
}

/// Orbit decomposition of the cusps under the subgroup D of (Z/N)^*, with
/// the permutation realized by each sigma_d kept for later stabilizer use.
#[derive(Debug, Clone)]
pub struct CuspOrbits {
    pub d_subgroup: Vec<u64>,
    /// cusp id -> orbit id; orbits are numbered by their least member
    pub orbit_of: Vec<usize>,
    pub orbits: Vec<Vec<usize>>,
    /// d -> the permutation c |-> sigma_d(c) of cusp ids
    pub perms: BTreeMap<u64, Vec<usize>>,
}

impl CuspOrbits {
    /// Number of Galois orbits of cusps over the fixed field of D.
    pub fn count(&self) -> usize {
        self.orbits.len()
    }

    /// Elements of D fixing the cusp; the residue field of the cusp over
    /// the fixed field of D has degree |D| / |stabilizer| = orbit size.
    pub fn stabilizer(&self, cusp: usize) -> Vec<u64> {
        self.d_subgroup
            .iter()
            .copied()
            .filter(|d| self.perms[d][cusp] == cusp)
            .collect()
    }
}

/// Orbits of the cusps under sigma_d for d in d_sub, computed semantically:
/// sigma_d sends the cusp c to the unique cusp c' whose value vector is the
/// coefficientwise sigma_d-image of the vector of c.  The vectors must come
/// from functions fixed by the star action of G (so that the action is
/// equivariant) and must be pairwise distinct.
pub fn galois_orbits_of_cusps(
    curve: &CurveData,
    d_sub: &[u64],
    values: &[Vec<CycNum>],
) -> Result<CuspOrbits> {
    let n = curve.level();
    let d_subgroup = unit_subgroup_closure(n, d_sub);
    for d in &d_subgroup {
        if !curve.det_image().contains(d) {
            return Err(Error::SigmaInvalid(format!(
                "Galois subgroup element {d} lies outside det(G) = {:?}; the \
                 fixed field K must contain K_G",
                curve.det_image()
            )));
        }
    }
    let nc = curve.cusps().len();
    if values.len() != nc {
        return Err(Error::InvalidInput(format!(
            "need one value vector per cusp: got {} for {nc} cusps",
            values.len()
        )));
    }
    for (c1, v1) in values.iter().enumerate() {
        if values.iter().skip(c1 + 1).any(|v2| v1 == v2) {
            return Err(Error::NotSeparating);
        }
    }
    let mut perms: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &d in &d_subgroup {
        let mut perm = Vec::with_capacity(nc);
        let mut hit = vec![false; nc];
        for vec_c in values {
            let moved: Vec<CycNum> = vec_c
                .iter()
                .map(|v| v.galois(d))
                .collect::<Result<_>>()?;
            let Some(target) = values.iter().position(|w| *w == moved) else {
                return Err(Error::InvalidInput(format!(
                    "sigma_{d} maps a cusp value vector outside the cusp set; \
                     the separating functions are not G-invariant"
                )));
            };
            if hit[target] {
                return Err(Error::InvalidInput(format!(
                    "sigma_{d} is not a bijection on cusps"
                )));
            }
            hit[target] = true;
            perm.push(target);
        }
        if d == 1 {
            assert!(
                perm.iter().enumerate().all(|(i, &p)| i == p),
                "sigma_1 must act trivially"
            );
        }
        perms.insert(d, perm);
    }
    // the infinity cusp is fixed whenever its values are rational
    let inf = curve.infinity_cusp();
    if values[inf].iter().all(CycNum::is_rational) {
        for (d, perm) in &perms {
            assert_eq!(
                perm[inf], inf,
                "sigma_{d} moved the infinity cusp despite rational values"
            );
        }
    }
    // connected components under all the permutations
    let mut orbit_of = vec![usize::MAX; nc];
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for c0 in 0..nc {
        if orbit_of[c0] != usize::MAX {
            continue;
        }
        let id = orbits.len();
        let mut members = vec![c0];
        orbit_of[c0] = id;
        let mut queue = vec![c0];
        while let Some(c) = queue.pop() {
            for perm in perms.values() {
                let c2 = perm[c];
                if orbit_of[c2] == usize::MAX {
                    orbit_of[c2] = id;
                    members.push(c2);
                    queue.push(c2);
                }
            }
        }
        members.sort_unstable();
        orbits.push(members);
    }
    let out = CuspOrbits {
        d_subgroup,
        orbit_of,
        orbits,
        perms,
    };
    // orbit-stabilizer: each orbit size divides |D|
    for orbit in &out.orbits {
        assert_eq!(
            out.d_subgroup.len() % orbit.len(),
            0,
            "orbit size must divide the Galois group order"
        );
    }
    Ok(out)
}

/// Sigma is valid when it is a nonempty proper union of Galois orbits.
pub fn validate_sigma(curve: &CurveData, orbits: &CuspOrbits, sigma: &[usize]) -> Result<()> {
    let nc = curve.cusps().len();
    let set: BTreeSet<usize> = sigma.iter().copied().collect();
    if set.len() != sigma.len() || sigma.iter().any(|&c| c >= nc) {
        return Err(Error::SigmaInvalid(
            "Sigma must be a set of valid cusp ids".into(),
        ));
    }
    if set.is_empty() || set.len() == nc {
        return Err(Error::SigmaInvalid(
            "Sigma must be nonempty and proper".into(),
        ));
    }
    for orbit in &orbits.orbits {
        let inside = orbit.iter().filter(|c| set.contains(c)).count();
        if inside != 0 && inside != orbit.len() {
            return Err(Error::SigmaInvalid(format!(
                "Sigma splits the Galois orbit {orbit:?}"
            )));
        }
    }
    Ok(())
}

/// Default Sigma: drop the single orbit of maximal total width (ties to the
/// smaller orbit id) and keep everything else.  Maximizing the dropped width
/// minimizes the multiplier m needed for m sum_(c not in Sigma) w_c > g.
pub fn sigma_auto(curve: &CurveData, orbits: &CuspOrbits) -> Result<Vec<usize>> {
    if orbits.count() < 2 {
        return Err(Error::SigmaInvalid(format!(
            "need at least two Galois orbits of cusps, found {}",
            orbits.count()
        )));
    }
    let totals = orbit_width_totals(curve.cusps(), &orbits.orbits);
    let dropped = totals
        .iter()
        .max_by_key(|(id, w)| (**w, std::cmp::Reverse(**id)))
        .map(|(id, _)| *id)
        .expect("at least one orbit");
    let mut sigma: Vec<usize> = (0..curve.cusps().len())
        .filter(|&c| orbits.orbit_of[c] != dropped)
        .collect();
    sigma.sort_unstable();
    validate_sigma(curve, orbits, &sigma)?;
    Ok(sigma)
}

/// Smallest m >= 1 with m sum_(c not in Sigma) w_c > g.
pub fn runge_m(curve: &CurveData, sigma: &[usize]) -> Result<u64> {
    let outside: u64 = curve
        .cusps()
        .iter()
        .enumerate()
        .filter(|(c, _)| !sigma.contains(c))
        .map(|(_, cusp)| cusp.width)
        .sum();
    if outside == 0 {
        return Err(Error::SigmaInvalid(
            "Sigma leaves no cusp outside; m is undefined".into(),
        ));
    }
    let m = curve.genus() / outside + 1;
    let n = curve.level();
    assert!(24 * m <= n * n * n, "m exceeds the trivial bound N^3 / 24");
    Ok(m)
}

/// The Runge condition: strictly fewer places in S than Galois orbits of
/// cusps over K.
pub fn runge_condition(orbit_count: u64, s: u64) -> bool {
    s < orbit_count
}
