//! Discrete-series kernels of weight n on the upper half-plane, traces of
//! χ_F πₙ(θ) χ_F by quadrature over the fundamental domain F, truncated sums
//! over coset-like sets of group elements, and the symbol integral over ℍ.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul};

use crate::arith_core::{adj, det, height, CongruenceLevel, HPoint, IMat, PElement, ID};
use crate::cosets::{Enumerated, Family, ThetaSet, DEFAULT_BUDGET};
use crate::error::{HeckeError, Result};
use crate::par;
use crate::quad::{adaptive, gauss_legendre, AdaptiveOpts, CKahanSum, Cell, KahanSum, TensorRule};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Weight(u32);

impl Weight {
    pub fn new(n: u32) -> Result<Self> {
        if n < 4 || n % 2 == 1 {
            return Err(HeckeError::InvalidWeight(n));
        }
        Ok(Weight(n))
    }

    pub fn n(&self) -> u32 {
        self.0
    }

    /// Kernel constant (n-1)/(4π).
    pub fn c_n(&self) -> f64 {
        (self.0 as f64 - 1.0) / (4.0 * PI)
    }

    /// (n-1)/12, the trace of χ_F πₙ(e) χ_F.
    pub fn identity_trace(&self) -> f64 {
        (self.0 as f64 - 1.0) / 12.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// split height between the bulk panel and the cusp panel of F
    pub y_max: f64,
    pub rel_tol: f64,
    /// absolute tolerance per term
    pub abs_tol: f64,
    pub max_depth: u32,
    pub order: usize,
    /// ceiling on enumeration candidates
    pub budget: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            y_max: 2.0,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_depth: 14,
            order: 8,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_max >= 2.0) || !self.y_max.is_finite() {
            return Err(HeckeError::Config(format!("y_max {} < 2", self.y_max)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(HeckeError::Config(format!("rel_tol {} not in (0,1)", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) || self.order < 2 {
            return Err(HeckeError::Config("bad abs_tol or rule order".into()));
        }
        Ok(())
    }

    fn opts(&self, abs: f64) -> AdaptiveOpts {
        AdaptiveOpts { rel_tol: self.rel_tol, abs_tol: abs, max_depth: self.max_depth }
    }
}

/// Complex value with an absolute error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceValue {
    pub value: Complex64,
    pub err: f64,
}

impl TraceValue {
    pub fn new(value: Complex64, err: f64) -> Self {
        TraceValue { value, err }
    }

    pub fn exact(value: f64) -> Self {
        TraceValue { value: Complex64::new(value, 0.0), err: 0.0 }
    }

    pub fn contains(&self, target: Complex64, slack: f64) -> bool {
        (self.value - target).norm() <= self.err + slack
    }
}

impl Add for TraceValue {
    type Output = TraceValue;
    fn add(self, o: TraceValue) -> TraceValue {
        TraceValue { value: self.value + o.value, err: self.err + o.err }
    }
}

impl AddAssign for TraceValue {
    fn add_assign(&mut self, o: TraceValue) {
        *self = *self + o;
    }
}

impl Mul<f64> for TraceValue {
    type Output = TraceValue;
    fn mul(self, k: f64) -> TraceValue {
        TraceValue { value: self.value * k, err: self.err * k.abs() }
    }
}

/// Compensated sum of trace values in the given order.
pub fn sum_values<'a, I: IntoIterator<Item = &'a TraceValue>>(it: I) -> TraceValue {
    let mut v = CKahanSum::default();
    let mut e = KahanSum::default();
    for t in it {
        v.add(t.value);
        e.add(t.err);
    }
    TraceValue { value: v.value(), err: e.value() }
}

/// cₙ((z - w̄)/(2i))^(-n).
pub fn bergman_kernel(n: Weight, z: HPoint, w: HPoint) -> Complex64 {
    let base = (z.z() - w.z().conj()) / (2.0 * I);
    base.inv().powi(n.n() as i32) * n.c_n()
}

// ---------------------------------------------------------------------------
// symbols

/// A summand of a trace integrand: either one group element or a translation
/// family {[[a, b0 + kM], [0, d]]}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    /// adjugate entries of the integral representative and sqrt(det)
    Element { a: f64, b: f64, c: f64, d: f64, sqrt_det: f64 },
    Family { a: f64, d: f64, b0: f64, step: f64 },
}

impl Term {
    pub fn element(m: &IMat) -> Result<Self> {
        let dt = det(m);
        if dt <= 0 {
            return Err(HeckeError::NegativeDeterminant);
        }
        let j = adj(m);
        Ok(Term::Element {
            a: j[0] as f64,
            b: j[1] as f64,
            c: j[2] as f64,
            d: j[3] as f64,
            sqrt_det: (dt as f64).sqrt(),
        })
    }

    pub fn from_pelement(g: &PElement) -> Result<Self> {
        if g.det_sign() < 0 {
            return Err(HeckeError::NegativeDeterminant);
        }
        match g.to_imat() {
            Some(m) => Term::element(&m),
            None => {
                let e = g.entries();
                let f: [f64; 4] = std::array::from_fn(|i| e[i].to_f64().unwrap());
                let dt = f[0] * f[3] - f[1] * f[2];
                Ok(Term::Element { a: f[3], b: -f[1], c: -f[2], d: f[0], sqrt_det: dt.sqrt() })
            }
        }
    }

    pub fn family(f: &Family) -> Self {
        Term::Family { a: f.a as f64, d: f.d as f64, b0: f.b0 as f64, step: f.step as f64 }
    }

    /// Berezin symbol at z = x + iy (density against dν₀).
    #[inline]
    pub fn symbol(&self, n: Weight, x: f64, y: f64) -> Complex64 {
        let nn = n.n() as i32;
        match *self {
            Term::Element { a, b, c, d, sqrt_det } => {
                let q = Complex64::new(b + (a - d) * x - c * (x * x + y * y), (a + d) * y);
                let w = Complex64::new(0.0, 2.0 * y * sqrt_det) / q;
                w.powi(nn) * n.c_n()
            }
            Term::Family { a, d, b0, step } => {
                let tau = Complex64::new(((d - a) * x - b0) / step, (d + a) * y / step);
                let pre = Complex64::new(0.0, 2.0 * y * (a * d).sqrt() / step).powi(nn);
                pre * lipschitz(nn as u32, tau) * n.c_n()
            }
        }
    }
}

/// Σ_{k∈Z} (τ + k)^(-n) for Im τ > 0, n >= 2.
pub fn lipschitz(n: u32, tau: Complex64) -> Complex64 {
    debug_assert!(tau.im > 0.0);
    if tau.im >= 0.3 {
        lipschitz_q(n, tau)
    } else {
        lipschitz_direct(n, tau, 12)
    }
}

/// q-expansion (-2πi)^n/(n-1)! Σ m^(n-1) q^m.
pub fn lipschitz_q(n: u32, tau: Complex64) -> Complex64 {
    let q = (2.0 * PI * I * tau).exp();
    let qa = q.norm();
    let mut lnf = 0.0;
    for k in 1..n {
        lnf += (k as f64).ln();
    }
    let mut s = Complex64::new(0.0, 0.0);
    let mut qm = q;
    let mut m = 1u32;
    loop {
        let t = qm * (m as f64).powi(n as i32 - 1);
        s += t;
        let mag = (m as f64).powi(n as i32 - 1) * qa.powi(m as i32);
        if m > 4 && mag < 1e-18 * s.norm().max(1e-300) {
            break;
        }
        if m > 5000 {
            break;
        }
        qm *= q;
        m += 1;
    }
    let sign = if n % 4 == 0 { 1.0 } else if n % 2 == 0 { -1.0 } else { 0.0 };
    let pre = if n % 2 == 0 {
        Complex64::new(sign * (n as f64 * (2.0 * PI).ln() - lnf).exp(), 0.0)
    } else {
        (-2.0 * PI * I).powi(n as i32) / lnf.exp()
    };
    pre * s
}

/// Direct sum over |k + round(Re τ)| <= kmax with Euler–Maclaurin tails.
pub fn lipschitz_direct(n: u32, tau: Complex64, kmax: i64) -> Complex64 {
    let shift = tau.re.round();
    let t = tau - shift;
    let ni = n as i32;
    let mut acc = CKahanSum::default();
    for k in -kmax..=kmax {
        acc.add((t + k as f64).powi(-ni));
    }
    let a = kmax as f64 + 0.5;
    let nf = n as f64;
    let tail = |w: Complex64| {
        w.powi(1 - ni) / (nf - 1.0) - w.powi(-ni - 1) * (nf / 24.0)
            + w.powi(-ni - 3) * (7.0 * nf * (nf + 1.0) * (nf + 2.0) / 5760.0)
    };
    // Σ_{k>K}(t+k)^-n ≈ tail(A+t), Σ_{k<-K}(t+k)^-n = Σ_{k>K}(k - t)^-n (n even)
    let up = tail(t + a);
    let down = if n % 2 == 0 { tail(a - t) } else { -tail(a - t) };
    acc.value() + up + down
}

// ---------------------------------------------------------------------------
// quadrature over F

/// ∫_F of a density f(x, y) against dν₀, split into the bulk panel
/// b(x) <= y <= y_max and the cusp panel y >= y_max (integrated in s = 1/y).
pub fn integrate_over_f<G: Fn(f64, f64) -> Complex64>(f: &G, q: &QuadratureSpec) -> Result<TraceValue> {
    let rule = TensorRule::new(q.order);
    let ym = q.y_max;
    let bulk = |x: f64, u: f64| {
        let b = (1.0 - x * x).sqrt();
        let y = b + u * (ym - b);
        f(x, y) * ((ym - b) / (y * y))
    };
    let cusp = |x: f64, s: f64| {
        if s <= 0.0 {
            // limit of the density as y → ∞ is finite; dν₀ = dx ds
            f(x, 1e300_f64.sqrt())
        } else {
            f(x, 1.0 / s)
        }
    };
    let opts = q.opts(q.abs_tol / 4.0);
    let mut total = TraceValue::default();
    for (x0, x1) in [(-0.5, 0.0), (0.0, 0.5)] {
        let r1 = adaptive(&bulk, Cell::new(x0, x1, 0.0, 1.0), &rule, &opts)?;
        let r2 = adaptive(&cusp, Cell::new(x0, x1, 0.0, 1.0 / ym), &rule, &opts)?;
        total += TraceValue::new(r1.value, r1.err);
        total += TraceValue::new(r2.value, r2.err);
    }
    Ok(total)
}

fn term_trace(n: Weight, t: &Term, q: &QuadratureSpec) -> Result<TraceValue> {
    if let Term::Element { a, b, c, d, .. } = *t {
        if a == d && b == 0.0 && c == 0.0 {
            return Ok(TraceValue::exact(n.identity_trace()));
        }
    }
    integrate_over_f(&|x, y| t.symbol(n, x, y), q)
}

/// Tr(χ_F πₙ(θ) χ_F) = ∫_F S_θ dν₀.
pub fn trace_pl_pi_pl(n: Weight, theta: &PElement, q: &QuadratureSpec) -> Result<TraceValue> {
    q.validate()?;
    let t = Term::from_pelement(theta)?;
    term_trace(n, &t, q)
}

// ---------------------------------------------------------------------------
// sums over sets

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumMode {
    /// translation families summed in closed form, other elements by height
    Families,
    /// every element integrated separately up to the height bound
    Naive,
}

/// Per-slot sums of traces over a ThetaSet truncated at a height bound.
#[derive(Clone, Debug)]
pub struct SetSum {
    pub slots: Vec<TraceValue>,
    pub terms_used: usize,
    pub families: usize,
    pub excluded_negative_det: usize,
    pub tail_bound: f64,
    /// Σ |trace| over the outermost height shell that was summed
    pub last_shell: f64,
    pub height: u64,
}

impl SetSum {
    pub fn total(&self) -> TraceValue {
        sum_values(&self.slots)
    }
}

/// Σ_{θ ∈ X, height(θ) <= h} Tr(χ_F πₙ(θ) χ_F), with translation families
/// summed completely.  `h = 0` means the identity alone (if it lies in X).
pub fn sum_over_set(n: Weight, set: &ThetaSet, h: u64, q: &QuadratureSpec, mode: SumMode) -> Result<SetSum> {
    q.validate()?;
    let mut slots = vec![TraceValue::default(); set.slots];
    if h == 0 {
        for s in set.labels(&ID) {
            slots[s as usize] += TraceValue::exact(n.identity_trace());
        }
        return Ok(SetSum {
            slots,
            terms_used: 1,
            families: 0,
            excluded_negative_det: 0,
            tail_bound: 0.0,
            last_shell: 0.0,
            height: 0,
        });
    }
    let fams = if mode == SumMode::Families { set.families() } else { Vec::new() };
    let en: Enumerated = set.enumerate(h, mode == SumMode::Naive, q.budget)?;
    let fam_vals = par::map(&fams, |f| term_trace(n, &Term::family(f), q));
    let el_vals = par::map(&en.elements, |(m, _)| term_trace(n, &Term::element(m)?, q));
    let mut acc: Vec<(CKahanSum, KahanSum)> = vec![Default::default(); set.slots];
    for (f, v) in fams.iter().zip(fam_vals) {
        let v = v?;
        acc[f.slot as usize].0.add(v.value);
        acc[f.slot as usize].1.add(v.err);
    }
    let mut last_shell = KahanSum::default();
    for ((m, labels), v) in en.elements.iter().zip(el_vals) {
        let v = v?;
        if height(m) == h {
            last_shell.add(v.value.norm() * labels.len() as f64);
        }
        for s in labels {
            acc[*s as usize].0.add(v.value);
            acc[*s as usize].1.add(v.err);
        }
    }
    let tb = tail_bound_set(n, set, h);
    for (slot, (v, e)) in slots.iter_mut().zip(acc) {
        *slot = TraceValue::new(v.value(), e.value() + tb);
    }
    Ok(SetSum {
        slots,
        terms_used: en.elements.len() + fams.len(),
        families: fams.len(),
        excluded_negative_det: en.excluded_negative_det,
        tail_bound: tb,
        last_shell: last_shell.value(),
        height: h,
    })
}

/// Σ over Γ0 g of the traces, truncated at height `h`.
pub fn sum_over_coset(
    n: Weight,
    level: &CongruenceLevel,
    g: &PElement,
    h: u64,
    q: &QuadratureSpec,
) -> Result<SetSum> {
    sum_over_set(n, &ThetaSet::right_coset(level, g), h, q, SumMode::Families)
}

// ---------------------------------------------------------------------------
// tail bounds

/// Upper bound for ∫_F |S_θ| dν₀ over all θ with c != 0, height >= h and
/// determinant `det`.  Uses 2cosh d(z,θz)·det = e1² + e2² + c²y² + e3²/y²
/// with h <= |e1| + |e2| + |e3| + |c| on F.
pub fn max_term_bound(n: Weight, det_value: f64, h: f64) -> f64 {
    let dd = det_value;
    let half_n = n.n() as f64 / 2.0;
    let f = |y: f64| {
        let phi = (2.0 * dd).max(y * y).max(h * h / (y * y + 10.0 / 3.0));
        (4.0 * dd / (phi + 2.0 * dd)).powf(half_n) / (y * y)
    };
    // breakpoints where the max switches branch
    let y0 = 3f64.sqrt() / 2.0;
    let cross = ((-10.0 / 3.0 + (100.0 / 9.0 + 4.0 * h * h).sqrt()) / 2.0).sqrt().max(y0);
    let mut pts = vec![y0, cross, (2.0 * dd).sqrt().max(y0)];
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (gx, gw) = gauss_legendre(24);
    let mut acc = KahanSum::default();
    let seg = |a: f64, b: f64, acc: &mut KahanSum| {
        if b <= a {
            return;
        }
        // geometric subdivision to follow y^-2 decay
        let k = ((b / a).ln() / 0.5f64.ln().abs()).ceil().clamp(1.0, 200.0) as usize;
        let r = (b / a).powf(1.0 / k as f64);
        let mut lo = a;
        for _ in 0..k {
            let hi = lo * r;
            for (x, w) in gx.iter().zip(&gw) {
                let y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                acc.add(0.5 * (hi - lo) * w * f(y));
            }
            lo = hi;
        }
    };
    for w in pts.windows(2) {
        seg(w[0], w[1], &mut acc);
    }
    let top = pts[2];
    // beyond the last breakpoint phi = y², integrate to a far cutoff then close analytically
    let far = top * 1e4;
    seg(top, far, &mut acc);
    acc.add((4.0 * dd).powf(half_n) * far.powf(-(2.0 * half_n) - 1.0) / (2.0 * half_n + 1.0));
    n.c_n() * acc.value()
}

/// Upper bound on #{θ : det θ = ±det, height <= h}.
fn count_bound(det_value: f64, h: f64) -> f64 {
    (16.0 * det_value + 9.0) * h * h
}

fn raw_tail(n: Weight, dets: &[f64], h: f64) -> f64 {
    let mut total = 0.0;
    for &dv in dets {
        let mut lo = h;
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let term = count_bound(dv, 2.0 * lo) * max_term_bound(n, dv, lo.max(1.0));
            total += term;
            if term < 1e-30 || (term < 1e-6 * total && term > prev * 0.99) {
                break;
            }
            prev = term;
            lo *= 2.0;
        }
    }
    total
}

/// Bound on Σ_{height(θ) > h, c != 0} |Tr(χ_F πₙ(θ) χ_F)| for θ of the given
/// determinants, by dyadic shell counts times the maximal term.  Taken as the
/// running minimum over bounds 2..=h so that it never increases with h.
pub fn tail_bound_dets(n: Weight, dets: &[f64], h: u64) -> f64 {
    let h = h.max(2);
    (2..=h).map(|hh| raw_tail(n, dets, hh as f64)).fold(f64::INFINITY, f64::min)
}

pub fn tail_bound_set(n: Weight, set: &ThetaSet, h: u64) -> f64 {
    let dets: Vec<f64> = set
        .pieces
        .iter()
        .filter(|(s, _)| *s > 0)
        .map(|(_, e)| (set.p as f64).powi(*e as i32))
        .collect();
    let raw = tail_bound_dets(n, &dets, h);
    raw * set.slots.max(1) as f64
}

/// Tail bound for Γ0 g at height `h`.
pub fn tail_bound(n: Weight, _level: &CongruenceLevel, g: &PElement, h: u64) -> f64 {
    let d = g.det().to_f64().unwrap().abs();
    tail_bound_dets(n, &[d], h)
}

// ---------------------------------------------------------------------------
// symbol integral over ℍ for split hyperbolic elements

/// Eigenvalue ratio data of a split hyperbolic element.
#[derive(Clone, Copy, Debug)]
pub struct HyperbolicData {
    pub lambda_plus: i128,
    pub lambda_minus: i128,
    pub det: i128,
}

pub fn split_hyperbolic(sigma: &PElement) -> Result<HyperbolicData> {
    if sigma.det_sign() < 0 {
        return Err(HeckeError::NegativeDeterminant);
    }
    let m = sigma.to_imat().ok_or(HeckeError::Overflow("sigma entries"))?;
    let tr = (m[0] + m[3]) as i128;
    let dt = det(&m);
    let disc = tr * tr - 4 * dt;
    if disc <= 0 {
        return Err(HeckeError::NonHyperbolic);
    }
    let r = num_integer::Roots::sqrt(&disc);
    if r * r != disc {
        return Err(HeckeError::NotSplit);
    }
    Ok(HyperbolicData { lambda_plus: (tr + r) / 2, lambda_minus: (tr - r) / 2, det: dt })
}

/// ∫ of the Berezin symbol of σ over ℍ, truncated by Siegel strips of width 1
/// at the two fixed cusps and evaluated in coordinates where σ is diagonal.
/// In log-polar coordinates z = e^ρ e^{iφ} the strips cut ρ to
/// [log|cos φ|, -log|cos φ|] and dν₀ = dρ dφ / sin²φ.
pub fn symbol_integral_over_h(n: Weight, sigma: &PElement, q: &QuadratureSpec) -> Result<TraceValue> {
    q.validate()?;
    let hd = split_hyperbolic(sigma)?;
    // both eigenvalues share a sign; the symbol is even in the overall sign
    let lp = (hd.lambda_plus as f64).abs();
    let lm = (hd.lambda_minus as f64).abs();
    let t = Term::Element { a: lm, b: 0.0, c: 0.0, d: lp, sqrt_det: (lp * lm).sqrt() };
    let rule = TensorRule::new(q.order);
    let opts = q.opts(q.abs_tol.max(1e-14));
    let half = PI / 2.0;
    // φ = π/2 ∓ (π/2)τ³ smooths the logarithmic edge at φ = π/2; t ∈ [0,1] spans ρ
    let f = |side: f64| {
        move |tau: f64, tt: f64| {
            let phi = half - side * half * tau * tau * tau;
            let dphi = 3.0 * half * tau * tau;
            let cphi = phi.cos().abs();
            if cphi <= 0.0 || tau <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let len = -2.0 * cphi.ln();
            let rho = cphi.ln() + tt * len;
            let r = rho.exp();
            let (x, y) = (r * phi.cos(), r * phi.sin());
            if y <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let s = phi.sin();
            t.symbol(n, x, y) * (len * dphi / (s * s))
        }
    };
    let mut total = TraceValue::default();
    for side in [1.0, -1.0] {
        let g = f(side);
        let r = adaptive(&g, Cell::new(0.0, 1.0, 0.0, 1.0), &rule, &opts)?;
        total += TraceValue::new(r.value, r.err);
    }
    Ok(total)
}

/// Harish-Chandra character r^(n/2)/(1 - r) of the weight-n discrete series
/// at a split hyperbolic element, r = |λ-/λ+| < 1.
pub fn harish_chandra_character(n: Weight, sigma: &PElement) -> Result<f64> {
    let hd = split_hyperbolic(sigma)?;
    let r = (hd.lambda_minus as f64 / hd.lambda_plus as f64).abs();
    let r = r.min(1.0 / r);
    Ok(r.powi(n.n() as i32 / 2) / (1.0 - r))
}

/// Σ_{γ ∈ Γ, height(γ) <= h} Tr(χ_F πₙ(γσγ⁻¹) χ_F).
pub fn conjugate_ball_sum(n: Weight, sigma: &PElement, h: u64, q: &QuadratureSpec) -> Result<SetSum> {
    q.validate()?;
    let p = sigma.p();
    let s = sigma.to_imat().ok_or(HeckeError::Overflow("sigma entries"))?;
    let gammas = crate::cosets::enumerate_det(1, h, q.budget)?;
    let conj: Vec<IMat> = gammas
        .iter()
        .map(|g| {
            let gi = adj(g);
            crate::arith_core::cmul(&crate::arith_core::cmul(g, &s).unwrap(), &gi).unwrap()
        })
        .collect();
    let vals = par::map(&conj, |m| term_trace(n, &Term::element(m)?, q));
    let mut out = Vec::with_capacity(vals.len());
    let mut last = KahanSum::default();
    for (g, v) in gammas.iter().zip(vals) {
        let v = v?;
        if height(g) == h {
            last.add(v.value.norm());
        }
        out.push(v);
    }
    let total = sum_values(&out);
    let _ = p;
    Ok(SetSum {
        slots: vec![total],
        terms_used: out.len(),
        families: 0,
        excluded_negative_det: 0,
        tail_bound: 0.0,
        last_shell: last.value(),
        height: h,
    })
}
