//! Cosets, double cosets and the Hecke algebra of (PSL(2,Z), PGL(2,Z[1/p])),
//! bounded-height enumeration of coset elements, and the truncated regular
//! representation on the positive-determinant part of Γ\G.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::arith_core::{
    adj, canon, canon_i64, cmul, det, ext_gcd, mul_wide, order_key, p_exponent, CongruenceLevel, IMat,
    PElement, ID,
};
use crate::error::{HeckeError, Result};
use crate::par;

/// Default ceiling on the number of (a, c) candidate pairs scanned by an enumeration.
pub const DEFAULT_BUDGET: u64 = 400_000_000;

// ---------------------------------------------------------------------------
// enumeration of integer matrices of fixed determinant

/// All canonical primitive integer matrices with determinant `det` and
/// height <= `h`, sorted by (height, lexicographic).
pub fn enumerate_det(det_value: i128, h: u64, budget: u64) -> Result<Vec<IMat>> {
    let hh = h as i64;
    let cands = (2 * h + 1) * (2 * h + 1);
    if cands > budget {
        return Err(HeckeError::BudgetExceeded(format!("{cands} candidate columns > budget {budget}")));
    }
    let avals: Vec<i64> = (0..=hh).collect();
    let chunks = par::map(&avals, |&a| column_solutions(a, hh, det_value));
    let mut out: Vec<IMat> = chunks.into_iter().flatten().collect();
    out.sort_unstable_by_key(order_key);
    Ok(out)
}

fn primitive(m: &IMat) -> bool {
    let g = num_integer::gcd(num_integer::gcd(m[0], m[1]), num_integer::gcd(m[2], m[3]));
    g == 1
}

fn column_solutions(a: i64, h: i64, n: i128) -> Vec<IMat> {
    let mut out = Vec::new();
    // c = 0: a*d = n
    if a > 0 && n % a as i128 == 0 {
        let d = n / a as i128;
        if d.unsigned_abs() <= h as u128 {
            let d = d as i64;
            for b in -h..=h {
                let m = [a, b, 0, d];
                if primitive(&m) {
                    out.push(m);
                }
            }
        }
    }
    for c in -h..=h {
        if c == 0 {
            continue;
        }
        let (g, x, y) = ext_gcd(a as i128, c as i128);
        if n % g != 0 {
            continue;
        }
        let d0 = x * n / g;
        let b0 = -y * n / g;
        let cs = c as i128 / g;
        let as_ = a as i128 / g;
        // d = d0 + t*cs, b = b0 + t*as_
        let (mut lo, mut hi) = range_for(d0, cs, h as i128);
        if as_ != 0 {
            let (l2, h2) = range_for(b0, as_, h as i128);
            lo = lo.max(l2);
            hi = hi.min(h2);
        } else if b0.abs() > h as i128 {
            continue;
        }
        let mut t = lo;
        while t <= hi {
            let d = (d0 + t * cs) as i64;
            let b = (b0 + t * as_) as i64;
            t += 1;
            if a == 0 && b <= 0 {
                continue;
            }
            let m = [a, b, c, d];
            if primitive(&m) {
                out.push(m);
            }
        }
    }
    out
}

/// t-range with |v0 + t*s| <= h, s != 0.
fn range_for(v0: i128, s: i128, h: i128) -> (i128, i128) {
    let (lo_v, hi_v) = (-h - v0, h - v0);
    if s > 0 {
        (div_ceil(lo_v, s), div_floor(hi_v, s))
    } else {
        (div_ceil(hi_v, s), div_floor(lo_v, s))
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

// ---------------------------------------------------------------------------
// right coset transversals of congruence levels

#[derive(Clone, Debug)]
pub struct CosetRepSet {
    pub level: CongruenceLevel,
    pub reps: Vec<PElement>,
    reps_i: Vec<IMat>,
    coset_of: HashMap<u64, usize>,
}

impl CosetRepSet {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn reps_imat(&self) -> &[IMat] {
        &self.reps_i
    }

    /// Index i with g ∈ Γ0 s_i, for g in the modular group.
    pub fn coset_index(&self, g: &IMat) -> usize {
        if self.level.k == 0 {
            return 0;
        }
        self.coset_of[&self.level.quotient().code_of(g)]
    }
}

/// Transversal of Γ0\Γ: the identity for the trivial coset, then for each
/// remaining coset its first element in (height, lexicographic) order.
pub fn right_coset_reps(level: &CongruenceLevel) -> CosetRepSet {
    let p = level.p;
    if level.k == 0 {
        return CosetRepSet {
            level: level.clone(),
            reps: vec![PElement::identity(p)],
            reps_i: vec![ID],
            coset_of: HashMap::new(),
        };
    }
    let q = level.quotient();
    let total = q.order() as usize;
    let mut coset_of: HashMap<u64, usize> = HashMap::with_capacity(total);
    let mut reps_i = Vec::new();
    let add = |g: &IMat, coset_of: &mut HashMap<u64, usize>, reps_i: &mut Vec<IMat>| {
        let c = q.code_of(g);
        if coset_of.contains_key(&c) {
            return;
        }
        let id = reps_i.len();
        reps_i.push(*g);
        for h in level.members() {
            coset_of.insert(q.mul(*h, c), id);
        }
    };
    add(&ID, &mut coset_of, &mut reps_i);
    let mut h = 1;
    while coset_of.len() < total {
        h *= 2;
        let all = enumerate_det(1, h, u64::MAX).expect("unbounded budget");
        for g in &all {
            add(g, &mut coset_of, &mut reps_i);
            if coset_of.len() == total {
                break;
            }
        }
    }
    let reps = reps_i.iter().map(|m| PElement::from_ints(p, *m).unwrap()).collect();
    CosetRepSet { level: level.clone(), reps, reps_i, coset_of }
}

// ---------------------------------------------------------------------------
// double cosets

/// Row Hermite form under left multiplication by SL(2,Z):
/// `[[a, b], [0, d]]` with a > 0, 0 <= b < |d|.
pub fn hnf(m: &IMat) -> IMat {
    let (a, c) = (m[0] as i128, m[2] as i128);
    let (g, x, y) = ext_gcd(a, c);
    let gamma = [x, y, -c / g, a / g];
    let r = [
        gamma[0] * m[0] as i128 + gamma[1] * m[2] as i128,
        gamma[0] * m[1] as i128 + gamma[1] * m[3] as i128,
        gamma[2] * m[0] as i128 + gamma[3] * m[2] as i128,
        gamma[2] * m[1] as i128 + gamma[3] * m[3] as i128,
    ];
    debug_assert_eq!(r[2], 0);
    let d = r[3];
    let b = r[1].rem_euclid(d.abs());
    [r[0] as i64, b as i64, 0, d as i64]
}

/// Double-coset label: the exponent m of the Smith form diag(1, p^m).
pub fn classify(theta: &PElement) -> u32 {
    theta.det_exponent()
}

#[derive(Clone, Debug)]
pub struct DoubleCoset {
    pub m: u32,
    pub canonical_sigma: PElement,
    pub right_reps: Vec<PElement>,
    pub degree: usize,
}

/// Positive-determinant right transversal Γ\ΓσΓ in Hermite form.
pub fn hermite_reps(p: u64, m: u32) -> Vec<IMat> {
    let n = p.pow(m) as i64;
    let mut out = Vec::new();
    let mut a = 1i64;
    loop {
        let d = n / a;
        for b in 0..d {
            let r = [a, b, 0, d];
            if primitive(&r) {
                out.push(r);
            }
        }
        if a == n {
            break;
        }
        a *= p as i64;
    }
    out.sort_unstable();
    out
}

pub fn double_coset_decomp(sigma: &PElement) -> DoubleCoset {
    let p = sigma.p();
    let m = classify(sigma);
    let flip = sigma.det_sign() < 0;
    let reps: Vec<PElement> = hermite_reps(p, m)
        .into_iter()
        .map(|r| {
            let r = if flip { [r[0], -r[1], r[2], -r[3]] } else { r };
            PElement::from_ints(p, r).unwrap()
        })
        .collect();
    let cs = if flip { [1, 0, 0, -(p.pow(m) as i64)] } else { [1, 0, 0, p.pow(m) as i64] };
    DoubleCoset {
        m,
        canonical_sigma: PElement::from_ints(p, cs).unwrap(),
        degree: reps.len(),
        right_reps: reps,
    }
}

/// Degree [Γ : Γ_σ] of the class diag(1, p^m).
pub fn degree(p: u64, m: u32) -> u64 {
    if m == 0 {
        1
    } else {
        p.pow(m - 1) * (p + 1)
    }
}

// ---------------------------------------------------------------------------
// Hecke algebra

/// Integer combination of the classes [Γ diag(1,p^m) Γ].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HeckeElement {
    pub p: u64,
    pub terms: BTreeMap<u32, BigInt>,
}

impl HeckeElement {
    pub fn zero(p: u64) -> Self {
        HeckeElement { p, terms: BTreeMap::new() }
    }

    pub fn basis(p: u64, m: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, BigInt::one());
        HeckeElement { p, terms }
    }

    pub fn add_term(&mut self, m: u32, c: BigInt) {
        let e = self.terms.entry(m).or_insert_with(BigInt::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &HeckeElement) -> HeckeElement {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn scale(&self, k: &BigInt) -> HeckeElement {
        let mut out = HeckeElement::zero(self.p);
        for (m, c) in &self.terms {
            out.add_term(*m, c * k);
        }
        out
    }

    /// Largest label with a nonzero coefficient.
    pub fn span(&self) -> u32 {
        self.terms.keys().copied().max().unwrap_or(0)
    }

    /// Σ c_m deg(m).
    pub fn degree(&self) -> BigInt {
        self.terms.iter().map(|(m, c)| c * BigInt::from(degree(self.p, *m))).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Structure constants of [σ][τ] for generators diag(1,p^m1), diag(1,p^m2):
/// c_ρ = #{(i,j) : Γ σ_i τ_j = Γ ρ} with ρ the Hermite form diag(1,p^m).
pub fn generator_product(p: u64, m1: u32, m2: u32) -> HeckeElement {
    let a = hermite_reps(p, m1);
    let b = hermite_reps(p, m2);
    let mut out = HeckeElement::zero(p);
    for x in &a {
        for y in &b {
            let prod = cmul(x, y).expect("small product");
            let h = hnf(&prod);
            let m = p_exponent(det(&prod), p).unwrap();
            if h == [1, 0, 0, p.pow(m) as i64] {
                out.add_term(m, BigInt::one());
            }
        }
    }
    out
}

pub fn hecke_product(a: &HeckeElement, b: &HeckeElement) -> HeckeElement {
    assert_eq!(a.p, b.p);
    let mut out = HeckeElement::zero(a.p);
    for (m1, c1) in &a.terms {
        for (m2, c2) in &b.terms {
            let g = generator_product(a.p, *m1, *m2);
            out = out.add(&g.scale(&(c1 * c2)));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// truncated regular representation

/// Sparse integer matrix of a Hecke element on the basis {Γg : det-exponent <= radius}.
#[derive(Clone, Debug)]
pub struct TruncatedRegularRep {
    pub p: u64,
    pub radius: u32,
    /// Hermite form of each basis coset.
    pub cosets: Vec<IMat>,
    pub exponent: Vec<u32>,
    pub rows: Vec<BTreeMap<usize, BigInt>>,
    /// Rows whose images lie entirely inside the ball.
    pub interior: Vec<bool>,
}

pub fn coset_ball(p: u64, radius: u32) -> Vec<IMat> {
    (0..=radius).flat_map(|m| hermite_reps(p, m)).collect()
}

/// (T f)(Γg) = Σ_i f(Γ σ_i g) for [ΓσΓ] = ⊔ Γσ_i.
pub fn regular_rep_matrix(h: &HeckeElement, radius: u32) -> TruncatedRegularRep {
    let p = h.p;
    let cosets = coset_ball(p, radius);
    let index: HashMap<IMat, usize> = cosets.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let exponent: Vec<u32> = cosets.iter().map(|c| p_exponent(det(c), p).unwrap()).collect();
    let span = h.span();
    let mut rows = vec![BTreeMap::new(); cosets.len()];
    for (m, coeff) in &h.terms {
        let reps = hermite_reps(p, *m);
        for (i, g) in cosets.iter().enumerate() {
            for s in &reps {
                let prod = cmul(s, g).unwrap();
                let key = hnf(&prod);
                if let Some(&j) = index.get(&key) {
                    let e: &mut BigInt = rows[i].entry(j).or_insert_with(BigInt::zero);
                    *e += coeff;
                }
            }
        }
    }
    for r in rows.iter_mut() {
        r.retain(|_, v: &mut BigInt| !v.is_zero());
    }
    let interior = exponent.iter().map(|e| e + span <= radius).collect();
    TruncatedRegularRep { p, radius, cosets, exponent, rows, interior }
}

impl TruncatedRegularRep {
    pub fn dim(&self) -> usize {
        self.cosets.len()
    }

    /// Row i of self * other, valid when the rows it touches are interior in `other`.
    pub fn mul_row(&self, other: &TruncatedRegularRep, i: usize) -> BTreeMap<usize, BigInt> {
        let mut out: BTreeMap<usize, BigInt> = BTreeMap::new();
        for (k, a) in &self.rows[i] {
            for (j, b) in &other.rows[*k] {
                *out.entry(*j).or_insert_with(BigInt::zero) += a * b;
            }
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    pub fn entry(&self, i: usize, j: usize) -> BigInt {
        self.rows[i].get(&j).cloned().unwrap_or_else(BigInt::zero)
    }
}

// ---------------------------------------------------------------------------
// coset identity ⊔ Γσs_i = ΓσΓ = ⊔ r_jσΓ

#[derive(Clone, Debug)]
pub struct CosetIdentityReport {
    pub degree: usize,
    pub right_transversal: Vec<PElement>,
    pub left_transversal: Vec<PElement>,
    pub ball_height: u64,
    pub ball_elements: usize,
    pub right_hits: Vec<usize>,
    pub left_hits: Vec<usize>,
    pub ok: bool,
}

pub fn coset_identity_check(sigma: &PElement, ball_height: u64) -> CosetIdentityReport {
    let p = sigma.p();
    let dc = double_coset_decomp(sigma);
    let right: Vec<IMat> = dc.right_reps.iter().map(|r| r.to_imat().unwrap()).collect();
    let left: Vec<IMat> = dc.right_reps.iter().map(|r| cinv_imat(&r.to_imat().unwrap())).collect();
    let det_sigma: i128 = sigma.det().to_i128().unwrap();
    let ball = enumerate_det(det_sigma, ball_height, u64::MAX).unwrap();
    let mut right_hits = vec![0usize; right.len()];
    let mut left_hits = vec![0usize; left.len()];
    let mut ok = right.len() == dc.degree && left.len() == dc.degree;
    let pe = det_sigma.abs();
    for th in &ball {
        let r_in: Vec<usize> = (0..right.len()).filter(|&i| in_gamma_quot(&mul_wide(th, &adj(&right[i])), pe)).collect();
        let l_in: Vec<usize> = (0..left.len()).filter(|&j| in_gamma_quot(&mul_wide(&adj(&left[j]), th), pe)).collect();
        ok &= r_in.len() == 1 && l_in.len() == 1;
        for i in r_in {
            right_hits[i] += 1;
        }
        for j in l_in {
            left_hits[j] += 1;
        }
    }
    ok &= right_hits.iter().all(|h| *h > 0) && left_hits.iter().all(|h| *h > 0);
    CosetIdentityReport {
        degree: dc.degree,
        right_transversal: dc.right_reps.clone(),
        left_transversal: left.iter().map(|m| PElement::from_ints(p, *m).unwrap()).collect(),
        ball_height,
        ball_elements: ball.len(),
        right_hits,
        left_hits,
        ok,
    }
}

fn cinv_imat(m: &IMat) -> IMat {
    canon_i64(&adj(m))
}

/// `x / scale ∈ SL(2, Z)` up to sign.
fn in_gamma_quot(x: &[i128; 4], scale: i128) -> bool {
    if x.iter().any(|v| v % scale != 0) {
        return false;
    }
    let y = x.map(|v| v / scale);
    (y[0] * y[3] - y[1] * y[2]).abs() == 1
}

// ---------------------------------------------------------------------------
// sets of group elements: cosets, products, Hecke blocks

type Labeler = dyn Fn(&IMat, &mut Vec<u32>) + Send + Sync;

/// A subset X of G described by its possible canonical determinants, a
/// left-translation period T^(p^period_exp) X = X, and a labeler assigning each
/// element to zero or more output slots (repeats count with multiplicity).
#[derive(Clone)]
pub struct ThetaSet {
    pub p: u64,
    pub pieces: Vec<(i8, u32)>,
    pub period_exp: u32,
    pub slots: usize,
    /// labels depend only on the residue modulo this number, if set
    pub residue_modulus: Option<u64>,
    labeler: Arc<Labeler>,
    pub description: String,
}

impl std::fmt::Debug for ThetaSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThetaSet")
            .field("description", &self.description)
            .field("pieces", &self.pieces)
            .field("period_exp", &self.period_exp)
            .field("slots", &self.slots)
            .finish()
    }
}

/// Upper-triangular family {[[a, b0 + kM], [0, d]] : k ∈ Z}, M = step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Family {
    pub a: i64,
    pub d: i64,
    pub b0: i64,
    pub step: i64,
    pub slot: u32,
}

/// Elements of a ThetaSet up to a height bound.
#[derive(Clone, Debug, Default)]
pub struct Enumerated {
    /// (element, slots) with c != 0 (or all elements in naive mode), in (height, lex) order
    pub elements: Vec<(IMat, Vec<u32>)>,
    /// negative-determinant elements met (excluded from kernel sums)
    pub excluded_negative_det: usize,
    pub candidates: usize,
}

fn in_level_scaled(x: [i128; 4], level: &CongruenceLevel) -> bool {
    match canon(x) {
        Some(m) if det(&m) == 1 => level.contains(&m),
        _ => false,
    }
}

impl ThetaSet {
    pub fn new(
        p: u64,
        pieces: Vec<(i8, u32)>,
        period_exp: u32,
        slots: usize,
        residue_modulus: Option<u64>,
        description: String,
        labeler: Arc<Labeler>,
    ) -> Self {
        ThetaSet { p, pieces, period_exp, slots, residue_modulus, labeler, description }
    }

    pub fn labels(&self, m: &IMat) -> Vec<u32> {
        let mut out = Vec::new();
        (self.labeler)(m, &mut out);
        out
    }

    pub fn contains(&self, m: &IMat) -> bool {
        !self.labels(m).is_empty()
    }

    /// Single-slot set containing exactly one element.
    pub fn singleton(p: u64, g: &IMat) -> Self {
        let g = canon_i64(g);
        let d = det(&g);
        let sign = if d < 0 { -1 } else { 1 };
        let e = p_exponent(d, p).expect("element of G");
        ThetaSet::new(p, vec![(sign, e)], 64, 1, None, format!("{{{g:?}}}"), Arc::new(move |m, out| {
            if *m == g {
                out.push(0)
            }
        }))
    }

    /// Right coset Γ0 g.
    pub fn right_coset(level: &CongruenceLevel, g: &PElement) -> Self {
        let gi = g.to_imat().unwrap();
        let ga = adj(&gi);
        let lvl = level.clone();
        ThetaSet::new(
            level.p,
            vec![(g.det_sign(), g.det_exponent())],
            level.k,
            1,
            None,
            format!("{} {}", level.label(), g),
            Arc::new(move |m, out| {
                if in_level_scaled(mul_wide(m, &ga), &lvl) {
                    out.push(0)
                }
            }),
        )
    }

    /// Left coset g Γ0.
    pub fn left_coset(g: &PElement, level: &CongruenceLevel) -> Self {
        let gi = g.to_imat().unwrap();
        let ga = adj(&gi);
        let lvl = level.clone();
        ThetaSet::new(
            level.p,
            vec![(g.det_sign(), g.det_exponent())],
            level.k + g.det_exponent(),
            1,
            None,
            format!("{} {}", g, level.label()),
            Arc::new(move |m, out| {
                if in_level_scaled(mul_wide(&ga, m), &lvl) {
                    out.push(0)
                }
            }),
        )
    }

    /// σ1 Γ0 σ2 as a set (not a double coset).
    pub fn product(s1: &PElement, level: &CongruenceLevel, s2: &PElement) -> Self {
        let a1 = adj(&s1.to_imat().unwrap());
        let a2 = adj(&s2.to_imat().unwrap());
        let (e1, e2) = (s1.det_exponent(), s2.det_exponent());
        let sign = s1.det_sign() * s2.det_sign();
        let mut pieces = Vec::new();
        let mut e = e1 + e2;
        loop {
            pieces.push((sign, e));
            if e < 2 {
                break;
            }
            e -= 2;
        }
        let lvl = level.clone();
        ThetaSet::new(
            level.p,
            pieces,
            level.k + e1,
            1,
            None,
            format!("{} {} {}", s1, level.label(), s2),
            Arc::new(move |m, out| {
                let x = mul_wide(&a1, m);
                let x: IMat = match canon(x) {
                    Some(v) => v,
                    None => return,
                };
                if in_level_scaled(mul_wide(&x, &a2), &lvl) {
                    out.push(0)
                }
            }),
        )
    }

    /// The sets X_ij = s_i^{-1} Γ0 σ Γ0 s_j of the block Hecke matrix, slot
    /// i*r + j; with `diagonal` only X_ii, slot i.
    pub fn hecke_blocks(reps: &CosetRepSet, sigma: &PElement, diagonal: bool) -> Self {
        let level = reps.level.clone();
        let p = level.p;
        let tester = DoubleCosetTester::new(&level, sigma);
        let s: Vec<IMat> = reps.reps_imat().to_vec();
        let s_inv: Vec<IMat> = s.iter().map(cinv_imat).collect();
        let r = s.len();
        let e = sigma.det_exponent();
        let residue = p.pow(level.k + e);
        ThetaSet::new(
            p,
            vec![(sigma.det_sign(), e)],
            level.k,
            if diagonal { r } else { r * r },
            Some(residue),
            format!("blocks {} {}", level.label(), sigma),
            Arc::new(move |m, out| {
                for i in 0..r {
                    let left = match cmul(&s[i], m) {
                        Some(v) => v,
                        None => continue,
                    };
                    if diagonal {
                        if let Some(x) = cmul(&left, &s_inv[i]) {
                            if tester.contains(&x) {
                                out.push(i as u32);
                            }
                        }
                    } else {
                        for j in 0..r {
                            if let Some(x) = cmul(&left, &s_inv[j]) {
                                if tester.contains(&x) {
                                    out.push((i * r + j) as u32);
                                }
                            }
                        }
                    }
                }
            }),
        )
    }

    /// Upper-triangular families covering every c = 0 element of the set.
    pub fn families(&self) -> Vec<Family> {
        let p = self.p as i64;
        let mut out = Vec::new();
        for &(sign, e) in &self.pieces {
            if sign < 0 {
                continue;
            }
            let n = p.pow(e);
            let mut a = 1i64;
            loop {
                let d = n / a;
                let step = p.pow(self.period_exp) * d;
                for b0 in 0..step {
                    let m = [a, b0, 0, d];
                    if !primitive(&m) {
                        continue;
                    }
                    for slot in self.labels(&m) {
                        out.push(Family { a, d, b0, step, slot });
                    }
                }
                if a == n {
                    break;
                }
                a *= p;
            }
        }
        out
    }

    /// Elements up to height `h`; with `with_upper` false the c = 0 elements are
    /// skipped (they are covered by `families`).
    pub fn enumerate(&self, h: u64, with_upper: bool, budget: u64) -> Result<Enumerated> {
        let mut all: Vec<IMat> = Vec::new();
        let mut excluded = 0usize;
        let mut candidates = 0usize;
        for &(sign, e) in &self.pieces {
            let dv = sign as i128 * (self.p as i128).pow(e);
            let els = enumerate_det(dv, h, budget)?;
            candidates += els.len();
            if sign < 0 {
                excluded += els.iter().filter(|m| self.contains(m)).count();
                continue;
            }
            all.extend(els.into_iter().filter(|m| with_upper || m[2] != 0));
        }
        all.sort_unstable_by_key(order_key);
        let labels = self.label_all(&all);
        let elements: Vec<(IMat, Vec<u32>)> =
            all.into_iter().zip(labels).filter(|(_, l)| !l.is_empty()).collect();
        Ok(Enumerated { elements, excluded_negative_det: excluded, candidates })
    }

    /// Labels for many elements, sharing work across equal residues when possible.
    pub fn label_all(&self, els: &[IMat]) -> Vec<Vec<u32>> {
        match self.residue_modulus {
            None => par::map(els, |m| self.labels(m)),
            Some(n) => {
                let key = |m: &IMat| m.map(|v| v.rem_euclid(n as i64));
                let mut uniq: Vec<IMat> = els.iter().map(key).collect();
                uniq.sort_unstable();
                uniq.dedup();
                // representatives: the residues themselves are valid integer matrices
                // with the right determinant class only modulo n, so label a real
                // element carrying each residue instead
                let mut rep_of: HashMap<IMat, IMat> = HashMap::with_capacity(uniq.len());
                for m in els {
                    rep_of.entry(key(m)).or_insert(*m);
                }
                let reps: Vec<IMat> = uniq.iter().map(|r| rep_of[r]).collect();
                let labs = par::map(&reps, |m| self.labels(m));
                let table: HashMap<IMat, Vec<u32>> = uniq.into_iter().zip(labs).collect();
                els.iter().map(|m| table[&key(m)].clone()).collect()
            }
        }
    }
}

/// Membership in Γ0 σ Γ0 = ⊔_j Γ0 σ t_j, t_j over (Γ0 ∩ σ^{-1}Γ0σ)\Γ0.
#[derive(Clone, Debug)]
pub struct DoubleCosetTester {
    level: CongruenceLevel,
    sig: i8,
    e: u32,
    sigma_t_adj: Vec<IMat>,
    pe: i128,
}

impl DoubleCosetTester {
    pub fn new(level: &CongruenceLevel, sigma: &PElement) -> Self {
        let s = sigma.to_imat().unwrap();
        let e = sigma.det_exponent();
        let ts: Vec<IMat> = if level.k == 0 {
            vec![ID]
        } else {
            let h = crate::arith_core::gamma_sigma(level, &sigma.inv());
            let reps = right_coset_reps(&h);
            reps.reps_imat().iter().copied().filter(|t| level.contains(t)).collect()
        };
        let sigma_t_adj = ts.iter().map(|t| adj(&cmul(&s, t).unwrap())).collect();
        DoubleCosetTester {
            level: level.clone(),
            sig: sigma.det_sign(),
            e,
            sigma_t_adj,
            pe: (level.p as i128).pow(e),
        }
    }

    pub fn num_cosets(&self) -> usize {
        self.sigma_t_adj.len()
    }

    pub fn contains(&self, x: &IMat) -> bool {
        let d = det(x);
        if (d < 0) != (self.sig < 0) || d.abs() != self.pe {
            return false;
        }
        if self.level.k == 0 {
            return true;
        }
        for a in &self.sigma_t_adj {
            let y = mul_wide(x, a);
            if y.iter().all(|v| v % self.pe == 0) {
                let z = y.map(|v| v / self.pe);
                if let Some(zm) = canon(z) {
                    if self.level.contains(&zm) {
                        return true;
                    }
                }
            }
        }
        let _ = self.e;
        false
    }
}
