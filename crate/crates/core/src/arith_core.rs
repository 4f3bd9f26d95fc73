//! Exact arithmetic in PGL(2, Z[1/p]) and PSL(2, Z), congruence levels given
//! through finite quotients, the Moebius action and reduction to the standard
//! fundamental domain.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

use crate::error::{HeckeError, Result};

/// Row-major integer 2x2 matrix `[a, b, c, d]` used on hot paths.
pub type IMat = [i64; 4];

pub const ID: IMat = [1, 0, 0, 1];

pub fn det(m: &IMat) -> i128 {
    m[0] as i128 * m[3] as i128 - m[1] as i128 * m[2] as i128
}

pub fn adj(m: &IMat) -> IMat {
    [m[3], -m[1], -m[2], m[0]]
}

pub fn mul_wide(x: &IMat, y: &IMat) -> [i128; 4] {
    let (a, b, c, d) = (x[0] as i128, x[1] as i128, x[2] as i128, x[3] as i128);
    let (e, f, g, h) = (y[0] as i128, y[1] as i128, y[2] as i128, y[3] as i128);
    [a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h]
}

fn narrow(m: [i128; 4]) -> Option<IMat> {
    let mut out = [0i64; 4];
    for i in 0..4 {
        out[i] = i64::try_from(m[i]).ok()?;
    }
    Some(out)
}

pub fn mul(x: &IMat, y: &IMat) -> Option<IMat> {
    narrow(mul_wide(x, y))
}

pub fn height(m: &IMat) -> u64 {
    m.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

/// `Some(e)` when `|n| = p^e`.
pub fn p_exponent(n: i128, p: u64) -> Option<u32> {
    let mut n = n.unsigned_abs();
    if n == 0 {
        return None;
    }
    let p = p as u128;
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    (n == 1).then_some(e)
}

/// Divide by the integer content and make the leading nonzero entry positive.
pub fn canon(m: [i128; 4]) -> Option<IMat> {
    let g = m.iter().fold(0i128, |g, v| g.gcd(v));
    if g == 0 {
        return None;
    }
    let lead = m.iter().copied().find(|v| *v != 0).unwrap();
    let s = if lead < 0 { -g } else { g };
    narrow([m[0] / s, m[1] / s, m[2] / s, m[3] / s])
}

pub fn canon_i64(m: &IMat) -> IMat {
    canon([m[0] as i128, m[1] as i128, m[2] as i128, m[3] as i128]).expect("nonzero matrix")
}

/// Canonical product; `None` on overflow of the 64-bit carrier.
pub fn cmul(x: &IMat, y: &IMat) -> Option<IMat> {
    canon(mul_wide(x, y))
}

/// Canonical inverse (the adjugate of a canonical matrix is canonical up to sign).
pub fn cinv(m: &IMat) -> IMat {
    canon_i64(&adj(m))
}

/// Lexicographic-after-height ordering key used everywhere for determinism.
pub fn order_key(m: &IMat) -> (u64, IMat) {
    (height(m), *m)
}

/// An element of PGL(2, Z[1/p]) in canonical integral form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PElement {
    m: [BigInt; 4],
    p: u64,
}

impl fmt::Display for PElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.m[0], self.m[1], self.m[2], self.m[3])
    }
}

fn strip_p(v: &BigInt, p: u64) -> (BigInt, u32) {
    let pb = BigInt::from(p);
    let mut v = v.clone();
    let mut e = 0;
    while !v.is_zero() && (&v % &pb).is_zero() {
        v /= &pb;
        e += 1;
    }
    (v, e)
}

impl PElement {
    /// Canonical representative of the class of an integer matrix.
    pub fn from_ints(p: u64, m: [i64; 4]) -> Result<Self> {
        Self::from_big(p, m.map(BigInt::from))
    }

    pub fn from_big(p: u64, m: [BigInt; 4]) -> Result<Self> {
        normalize(p, m, [BigInt::one(), BigInt::one(), BigInt::one(), BigInt::one()])
    }

    pub fn identity(p: u64) -> Self {
        Self::from_ints(p, ID).unwrap()
    }

    pub fn t(p: u64) -> Self {
        Self::from_ints(p, [1, 1, 0, 1]).unwrap()
    }

    pub fn s(p: u64) -> Self {
        Self::from_ints(p, [0, -1, 1, 0]).unwrap()
    }

    pub fn diag(p: u64, a: i64, d: i64) -> Result<Self> {
        Self::from_ints(p, [a, 0, 0, d])
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn entries(&self) -> &[BigInt; 4] {
        &self.m
    }

    pub fn det(&self) -> BigInt {
        &self.m[0] * &self.m[3] - &self.m[1] * &self.m[2]
    }

    /// Exponent `e` with `det = ±p^e`.
    pub fn det_exponent(&self) -> u32 {
        strip_p(&self.det(), self.p).1
    }

    pub fn det_sign(&self) -> i8 {
        if self.det().is_negative() {
            -1
        } else {
            1
        }
    }

    /// 64-bit copy of the canonical matrix, if it fits.
    pub fn to_imat(&self) -> Option<IMat> {
        let mut out = [0i64; 4];
        for i in 0..4 {
            out[i] = self.m[i].to_i64()?;
        }
        Some(out)
    }

    pub fn mul(&self, other: &PElement) -> PElement {
        assert_eq!(self.p, other.p, "prime context mismatch");
        let (a, b) = (&self.m, &other.m);
        let prod = [
            &a[0] * &b[0] + &a[1] * &b[2],
            &a[0] * &b[1] + &a[1] * &b[3],
            &a[2] * &b[0] + &a[3] * &b[2],
            &a[2] * &b[1] + &a[3] * &b[3],
        ];
        PElement::from_big(self.p, prod).expect("product of group elements")
    }

    pub fn inv(&self) -> PElement {
        let m = &self.m;
        PElement::from_big(self.p, [m[3].clone(), -m[1].clone(), -m[2].clone(), m[0].clone()])
            .expect("inverse of group element")
    }

    pub fn in_gamma(&self) -> bool {
        self.det().is_one()
    }

    pub fn height(&self) -> BigInt {
        self.m.iter().map(|v| v.abs()).max().unwrap()
    }
}

/// Canonical form of the projective class of `num/den` (entrywise), where every
/// denominator must be a signed power of `p`.
pub fn normalize(p: u64, num: [BigInt; 4], den: [BigInt; 4]) -> Result<PElement> {
    let mut shift = [0u32; 4];
    for i in 0..4 {
        let (rest, e) = strip_p(&den[i], p);
        if den[i].is_zero() || rest.abs() != BigInt::one() {
            return Err(HeckeError::BadDenominator(den[i].to_string()));
        }
        shift[i] = e;
    }
    let top = *shift.iter().max().unwrap();
    let pb = BigInt::from(p);
    let mut m: [BigInt; 4] = Default::default();
    for i in 0..4 {
        let sign = if den[i].is_negative() { -1 } else { 1 };
        m[i] = &num[i] * num_traits::pow(pb.clone(), (top - shift[i]) as usize) * sign;
    }
    let d = &m[0] * &m[3] - &m[1] * &m[2];
    if d.is_zero() {
        return Err(HeckeError::SingularMatrix);
    }
    let g = m.iter().fold(BigInt::zero(), |g, v| g.gcd(v));
    let lead = m.iter().find(|v| !v.is_zero()).unwrap().clone();
    let g = if lead.is_negative() { -g } else { g };
    for v in m.iter_mut() {
        *v = &*v / &g;
    }
    let d = &m[0] * &m[3] - &m[1] * &m[2];
    let (rest, _) = strip_p(&d, p);
    if rest.abs() != BigInt::one() {
        return Err(HeckeError::NotInGroup(d.to_string()));
    }
    Ok(PElement { m, p })
}

/// Point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() || y <= 0.0 {
            return Err(HeckeError::InvalidPoint(format!("{x}+{y}i")));
        }
        Ok(HPoint { x, y })
    }
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// Action of `g` on `z`, with the automorphy factor `cz + d` of the integral
/// representative (det = p^e > 0).
pub fn moebius(g: &PElement, z: HPoint) -> Result<(HPoint, Complex64)> {
    if g.det_sign() < 0 {
        return Err(HeckeError::NegativeDeterminant);
    }
    let m: [f64; 4] = std::array::from_fn(|i| g.m[i].to_f64().unwrap());
    let m = if m[2] < 0.0 || (m[2] == 0.0 && m[3] < 0.0) { m.map(|v| -v) } else { m };
    let zc = z.z();
    let j = zc * m[2] + m[3];
    let w = (zc * m[0] + m[1]) / j;
    Ok((HPoint::new(w.re, w.im)?, j))
}

/// Reduce `z` into F = {|Re z| <= 1/2, |z| >= 1}; returns `(z0, gamma)` with
/// `gamma z = z0`.  Ties go to Re z0 in [-1/2, 1/2) and, on the unit circle, to
/// Re z0 <= 0.
pub fn reduce_to_f(z: HPoint, p: u64, max_steps: usize) -> Result<(HPoint, PElement)> {
    let mut g: [i128; 4] = [1, 0, 0, 1];
    let mut w = z.z();
    let mut steps = 0;
    let apply_t = |g: &mut [i128; 4], k: i128| {
        g[0] += k * g[2];
        g[1] += k * g[3];
    };
    let apply_s = |g: &mut [i128; 4]| {
        *g = [-g[2], -g[3], g[0], g[1]];
    };
    loop {
        steps += 1;
        if steps > max_steps {
            return Err(HeckeError::NonConvergence(max_steps));
        }
        let k = -(w.re + 0.5).floor();
        if k != 0.0 {
            w.re += k;
            apply_t(&mut g, k as i128);
        }
        if w.norm_sqr() < 1.0 {
            w = -w.inv();
            apply_s(&mut g);
        } else {
            break;
        }
        if g.iter().any(|v| v.unsigned_abs() > (1u128 << 62)) {
            return Err(HeckeError::NonConvergence(steps));
        }
    }
    if w.re >= 0.5 {
        w.re -= 1.0;
        apply_t(&mut g, -1);
    }
    if w.norm_sqr() == 1.0 && w.re > 0.0 {
        w = -w.inv();
        apply_s(&mut g);
    }
    let gm = PElement::from_big(p, g.map(BigInt::from))?;
    Ok((HPoint::new(w.re, w.im)?, gm))
}

// ---------------------------------------------------------------------------
// finite quotients SL(2, Z/N)/{±1}

/// Arithmetic in SL(2, Z/N)/{±1}; elements are packed into a `u64` code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quotient {
    pub n: u64,
}

impl Quotient {
    pub fn new(n: u64) -> Self {
        assert!(n >= 1);
        Quotient { n }
    }

    fn raw(&self, m: [u64; 4]) -> u64 {
        ((m[0] * self.n + m[1]) * self.n + m[2]) * self.n + m[3]
    }

    pub fn reduce(&self, m: &IMat) -> [u64; 4] {
        let n = self.n as i64;
        m.map(|v| v.rem_euclid(n) as u64)
    }

    pub fn reduce_wide(&self, m: &[i128; 4]) -> [u64; 4] {
        let n = self.n as i128;
        m.map(|v| v.rem_euclid(n) as u64)
    }

    /// Code of the ± class of a residue matrix.
    pub fn code(&self, m: [u64; 4]) -> u64 {
        let neg = m.map(|v| (self.n - v) % self.n);
        self.raw(m).min(self.raw(neg))
    }

    pub fn code_of(&self, m: &IMat) -> u64 {
        self.code(self.reduce(m))
    }

    pub fn decode(&self, c: u64) -> [u64; 4] {
        let n = self.n;
        [c / (n * n * n), (c / (n * n)) % n, (c / n) % n, c % n]
    }

    pub fn mul(&self, x: u64, y: u64) -> u64 {
        let (a, b) = (self.decode(x), self.decode(y));
        let n = self.n as u128;
        let f = |u: u64, v: u64, w: u64, z: u64| ((u as u128 * v as u128 + w as u128 * z as u128) % n) as u64;
        self.code([
            f(a[0], b[0], a[1], b[2]),
            f(a[0], b[1], a[1], b[3]),
            f(a[2], b[0], a[3], b[2]),
            f(a[2], b[1], a[3], b[3]),
        ])
    }

    pub fn identity(&self) -> u64 {
        self.code([1 % self.n, 0, 0, 1 % self.n])
    }

    /// All elements, sorted by code.
    pub fn elements(&self) -> Vec<u64> {
        let n = self.n;
        if n == 1 {
            return vec![0];
        }
        let mut out = Vec::new();
        let inv = |a: u64| -> Option<u64> {
            let (g, x, _) = ext_gcd(a as i128, n as i128);
            (g == 1).then(|| x.rem_euclid(n as i128) as u64)
        };
        for a in 0..n {
            for c in 0..n {
                if (a as u128).gcd(&(c as u128)).gcd(&(n as u128)) != 1 {
                    continue;
                }
                if let Some(ai) = inv(a) {
                    for b in 0..n {
                        let d = ((1 + b as u128 * c as u128) % n as u128 * ai as u128 % n as u128) as u64;
                        out.push(self.code([a, b, c, d]));
                    }
                } else {
                    let ci = inv(c).expect("column is unimodular");
                    for d in 0..n {
                        let b = (((a as u128 * d as u128 + n as u128 - 1) % n as u128) * ci as u128 % n as u128) as u64;
                        out.push(self.code([a, b, c, d]));
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn order(&self) -> u64 {
        psl_order(self.n)
    }
}

/// |SL(2, Z/N)/{±1}|.
pub fn psl_order(n: u64) -> u64 {
    if n == 1 {
        return 1;
    }
    let mut sl = n * n * n;
    let mut rest = n;
    let mut q = 2;
    while q * q <= rest {
        if rest % q == 0 {
            sl = sl / (q * q) * (q * q - 1);
            while rest % q == 0 {
                rest /= q;
            }
        }
        q += 1;
    }
    if rest > 1 {
        sl = sl / (rest * rest) * (rest * rest - 1);
    }
    if n == 2 {
        sl
    } else {
        sl / 2
    }
}

pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

// ---------------------------------------------------------------------------
// congruence levels

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LevelKind {
    Gamma,
    Gamma0(u32),
    Principal(u32),
    Derived,
}

/// A subgroup of PSL(2, Z) containing Γ(p^k), stored as its image in
/// SL(2, Z/p^k)/{±1}.
#[derive(Clone, Debug)]
pub struct CongruenceLevel {
    pub p: u64,
    pub k: u32,
    pub kind: LevelKind,
    quot: Quotient,
    members: Vec<u64>,
    pub index_in_gamma: u64,
}

impl PartialEq for CongruenceLevel {
    fn eq(&self, other: &Self) -> bool {
        // compare at the common modulus
        if self.p != other.p {
            return false;
        }
        let k = self.k.max(other.k);
        let a = self.lift(k);
        let b = other.lift(k);
        a.members == b.members
    }
}

impl CongruenceLevel {
    pub fn gamma(p: u64) -> Self {
        CongruenceLevel {
            p,
            k: 0,
            kind: LevelKind::Gamma,
            quot: Quotient::new(1),
            members: vec![0],
            index_in_gamma: 1,
        }
    }

    fn from_predicate(p: u64, k: u32, kind: LevelKind, pred: impl Fn([u64; 4]) -> bool) -> Self {
        if k == 0 {
            return Self::gamma(p);
        }
        let quot = Quotient::new(p.pow(k));
        let members: Vec<u64> = quot.elements().into_iter().filter(|c| pred(quot.decode(*c))).collect();
        let index_in_gamma = quot.order() / members.len() as u64;
        CongruenceLevel { p, k, kind, quot, members, index_in_gamma }
    }

    pub fn gamma0(p: u64, k: u32) -> Self {
        Self::from_predicate(p, k, LevelKind::Gamma0(k), |m| m[2] == 0)
    }

    pub fn principal(p: u64, k: u32) -> Self {
        let n = p.pow(k);
        Self::from_predicate(p, k, LevelKind::Principal(k), move |m| m[1] == 0 && m[2] == 0 && (m[0] == 1 % n || m[0] == n - 1))
    }

    pub fn modulus(&self) -> u64 {
        self.quot.n
    }

    pub fn quotient(&self) -> Quotient {
        self.quot
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn contains_code(&self, code: u64) -> bool {
        self.members.binary_search(&code).is_ok()
    }

    /// Membership of a modular-group element (det 1 integer matrix).
    pub fn contains(&self, g: &IMat) -> bool {
        self.k == 0 || self.contains_code(self.quot.code_of(g))
    }

    /// Haar weight 1/[Γ:Γ0] as (numerator, denominator).
    pub fn haar_weight(&self) -> (u64, u64) {
        (1, self.index_in_gamma)
    }

    pub fn label(&self) -> String {
        match self.kind {
            LevelKind::Gamma => "gamma".into(),
            LevelKind::Gamma0(k) => format!("gamma0:{}^{}", self.p, k),
            LevelKind::Principal(k) => format!("principal:{}^{}", self.p, k),
            LevelKind::Derived => format!("derived:{}^{}[index {}]", self.p, self.k, self.index_in_gamma),
        }
    }

    /// Same subgroup described at modulus p^k2 (k2 >= k).
    pub fn lift(&self, k2: u32) -> CongruenceLevel {
        assert!(k2 >= self.k);
        if k2 == self.k {
            return self.clone();
        }
        let q2 = Quotient::new(self.p.pow(k2));
        let me = self.clone();
        let mut out = Self::from_predicate(self.p, k2, self.kind.clone(), move |m| {
            let im: IMat = m.map(|v| v as i64);
            me.contains(&im)
        });
        out.quot = q2;
        out
    }
}

/// Γ0 ∩ σ Γ0 σ^{-1}, described modulo p^(k+e) where det σ = ±p^e.
pub fn gamma_sigma(level: &CongruenceLevel, sigma: &PElement) -> CongruenceLevel {
    let e = sigma.det_exponent();
    let k2 = level.k + e;
    if k2 == 0 {
        return level.clone();
    }
    let s = sigma.to_imat().expect("sigma fits in 64 bits");
    let sa = adj(&s);
    let pe = (level.p as i128).pow(e);
    let n2 = (level.p as i128).pow(k2);
    let lvl = level.clone();
    let mut out = CongruenceLevel::from_predicate(level.p, k2, LevelKind::Derived, move |m| {
        let g: IMat = m.map(|v| v as i64);
        if !lvl.contains(&g) {
            return false;
        }
        let x = mul_wide(&sa, &g);
        let x = narrow(x.map(|v| v.rem_euclid(n2))).unwrap();
        let y = mul_wide(&x, &s).map(|v| v.rem_euclid(n2));
        if y.iter().any(|v| v % pe != 0) {
            return false;
        }
        let h: IMat = y.map(|v| (v / pe) as i64);
        lvl.contains(&h)
    });
    if out.members.len() as u64 == out.quot.order() {
        out.kind = LevelKind::Gamma;
    }
    out
}

/// [Γ0 : (Γ0)_σ].
pub fn relative_index(level: &CongruenceLevel, sigma: &PElement) -> u64 {
    gamma_sigma(level, sigma).index_in_gamma / level.index_in_gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe(p: u64, m: [i64; 4]) -> PElement {
        PElement::from_ints(p, m).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(pe(2, [2, 2, 0, 2]), PElement::t(2));
        assert_eq!(pe(2, ID), PElement::identity(2));
        let half = normalize(
            2,
            [1, 0, 0, 1].map(BigInt::from),
            [2, 1, 1, 1].map(BigInt::from),
        )
        .unwrap();
        assert_eq!(half, pe(2, [1, 0, 0, 2]));
        assert_eq!(normalize(2, [1, 0, 0, 1].map(BigInt::from), [3, 1, 1, 1].map(BigInt::from)),
            Err(HeckeError::BadDenominator("3".into())));
        assert_eq!(PElement::from_ints(2, [1, 1, 1, 1]), Err(HeckeError::SingularMatrix));
        assert!(matches!(PElement::from_ints(2, [3, 0, 0, 1]), Err(HeckeError::NotInGroup(_))));
    }

    #[test]
    fn group_law_examples() {
        let p = 3;
        let t = PElement::t(p);
        assert_eq!(t.mul(&t.inv()), PElement::identity(p));
        assert_eq!(pe(p, [1, 0, 0, 3]).inv(), pe(p, [3, 0, 0, 1]));
        let s = PElement::s(p);
        assert_eq!(s.mul(&s), PElement::identity(p));
    }

    #[test]
    fn in_gamma_examples() {
        assert!(PElement::t(2).in_gamma());
        assert!(!pe(2, [1, 0, 0, 2]).in_gamma());
        assert!(!pe(2, [1, 0, 0, -1]).in_gamma());
    }

    #[test]
    fn moebius_examples() {
        let i = HPoint::new(0.0, 1.0).unwrap();
        let (w, j) = moebius(&PElement::identity(2), i).unwrap();
        assert_eq!((w, j), (i, Complex64::new(1.0, 0.0)));
        let (w, j) = moebius(&PElement::s(2), i).unwrap();
        assert!((w.x).abs() < 1e-15 && (w.y - 1.0).abs() < 1e-15);
        assert!((j - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let (w, j) = moebius(&pe(2, [1, 0, 0, 2]), HPoint::new(0.0, 2.0).unwrap()).unwrap();
        assert!((w.y - 1.0).abs() < 1e-15 && w.x.abs() < 1e-15);
        assert_eq!(j, Complex64::new(2.0, 0.0));
        assert_eq!(moebius(&pe(2, [0, 2, 1, 0]), i).unwrap_err(), HeckeError::NegativeDeterminant);
    }

    #[test]
    fn reduce_examples() {
        let (z0, g) = reduce_to_f(HPoint::new(0.0, 1.0).unwrap(), 2, 1000).unwrap();
        assert_eq!(z0, HPoint::new(0.0, 1.0).unwrap());
        assert_eq!(g, PElement::identity(2));
        let (z0, g) = reduce_to_f(HPoint::new(5.0, 1.0).unwrap(), 2, 1000).unwrap();
        assert!((z0.x).abs() < 1e-15 && (z0.y - 1.0).abs() < 1e-15);
        assert_eq!(g, pe(2, [1, -5, 0, 1]));
        let z = HPoint::new(0.1, 0.1).unwrap();
        let (z0, g) = reduce_to_f(z, 2, 1000).unwrap();
        assert!(z0.x.abs() <= 0.5 && z0.z().norm() >= 1.0);
        let (w, _) = moebius(&g, z).unwrap();
        assert!((w.z() - z0.z()).norm() < 1e-12);
    }

    #[test]
    fn height_examples() {
        assert_eq!(PElement::identity(2).height(), BigInt::from(1));
        let t3 = PElement::t(2).mul(&PElement::t(2)).mul(&PElement::t(2));
        assert_eq!(t3.height(), BigInt::from(3));
        assert_eq!(pe(2, [2, 1, 1, 1]).height(), BigInt::from(2));
    }

    #[test]
    fn quotient_orders() {
        for n in [1u64, 2, 3, 4, 5, 8, 9, 16, 25, 27] {
            assert_eq!(Quotient::new(n).elements().len() as u64, psl_order(n), "n={n}");
        }
        assert_eq!(psl_order(2), 6);
        assert_eq!(psl_order(16), 1536);
    }

    #[test]
    fn gamma_sigma_examples() {
        for p in [2u64, 3, 5] {
            let g = CongruenceLevel::gamma(p);
            assert_eq!(gamma_sigma(&g, &PElement::identity(p)), g);
            let gs = gamma_sigma(&g, &pe(p, [1, 0, 0, p as i64]));
            assert_eq!(gs.index_in_gamma, p + 1);
            assert_eq!(gs, CongruenceLevel::gamma0(p, 1));
            let gs2 = gamma_sigma(&g, &pe(p, [1, 0, 0, (p * p) as i64]));
            assert_eq!(gs2.index_in_gamma, p * (p + 1));
        }
    }
}
