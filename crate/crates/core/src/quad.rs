//! Gauss-Legendre rules, compensated summation and deterministic adaptive
//! rectangle quadrature.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{HeckeError, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CKahanSum {
    re: KahanSum,
    im: KahanSum,
}

impl CKahanSum {
    pub fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn csum<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut s = CKahanSum::default();
    for v in it {
        s.add(v);
    }
    s.value()
}

pub fn rsum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = KahanSum::default();
    for v in it {
        s.add(v);
    }
    s.value()
}

/// Tensor Gauss-Legendre rule on a rectangle, reused across cells.
#[derive(Clone, Debug)]
pub struct TensorRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl TensorRule {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        TensorRule { x, w }
    }

    pub fn order(&self) -> usize {
        self.x.len()
    }

    pub fn apply<F: Fn(f64, f64) -> Complex64>(&self, f: &F, c: &Cell) -> Complex64 {
        let hx = 0.5 * (c.x1 - c.x0);
        let hy = 0.5 * (c.y1 - c.y0);
        let mx = 0.5 * (c.x1 + c.x0);
        let my = 0.5 * (c.y1 + c.y0);
        let mut acc = CKahanSum::default();
        for (xi, wi) in self.x.iter().zip(&self.w) {
            let x = mx + hx * xi;
            let mut row = CKahanSum::default();
            for (yj, wj) in self.x.iter().zip(&self.w) {
                row.add(f(x, my + hy * yj) * *wj);
            }
            acc.add(row.value() * *wi);
        }
        acc.value() * (hx * hy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Cell { x0, x1, y0, y1 }
    }
    fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
    fn children(&self) -> [Cell; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Cell::new(self.x0, xm, self.y0, ym),
            Cell::new(xm, self.x1, self.y0, ym),
            Cell::new(self.x0, xm, ym, self.y1),
            Cell::new(xm, self.x1, ym, self.y1),
        ]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QuadResult {
    pub value: Complex64,
    pub err: f64,
    pub evals: usize,
}

/// Adaptive quadrature over `cell`.  A cell is accepted when the parent rule
/// and the sum over its four children agree to `max(rel_tol*|children|,
/// abs_tol*area_fraction)`.  Cells are visited depth first in a fixed order so
/// the result is bit-reproducible.
pub fn adaptive<F: Fn(f64, f64) -> Complex64>(
    f: &F,
    cell: Cell,
    rule: &TensorRule,
    opts: &AdaptiveOpts,
) -> Result<QuadResult> {
    let total_area = cell.area();
    let per_cell = rule.order() * rule.order();
    let mut value = CKahanSum::default();
    let mut err = KahanSum::default();
    let mut evals = per_cell;
    let first = rule.apply(f, &cell);
    let mut stack = vec![(cell, first, 0u32)];
    while let Some((c, parent, depth)) = stack.pop() {
        let kids = c.children();
        let vals: Vec<Complex64> = kids.iter().map(|k| rule.apply(f, k)).collect();
        evals += 4 * per_cell;
        let fine = csum(vals.iter().copied());
        let diff = (fine - parent).norm();
        let tol = (opts.rel_tol * fine.norm()).max(opts.abs_tol * c.area() / total_area);
        if diff <= tol {
            value.add(fine);
            err.add(diff);
            continue;
        }
        if depth >= opts.max_depth {
            return Err(HeckeError::QuadratureFailure(format!(
                "cell [{:.3e},{:.3e}]x[{:.3e},{:.3e}] err {:.3e} > tol {:.3e} at depth {}",
                c.x0, c.x1, c.y0, c.y1, diff, tol, depth
            )));
        }
        for (k, v) in kids.iter().zip(vals).rev() {
            stack.push((*k, v, depth + 1));
        }
    }
    Ok(QuadResult {
        value: value.value(),
        err: err.value(),
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(rsum(v), 2.0);
    }

    #[test]
    fn adaptive_handles_peak() {
        let f = |x: f64, y: f64| Complex64::new(1.0 / (1e-3 + x * x + y * y), 0.0);
        let opts = AdaptiveOpts { rel_tol: 1e-10, abs_tol: 1e-12, max_depth: 30 };
        let r = adaptive(&f, Cell::new(0.0, 1.0, 0.0, 1.0), &TensorRule::new(8), &opts).unwrap();
        // reference from a polar split: integral over the unit square
        let g = |x: f64| ((1.0 / (1e-3f64 + x * x).sqrt()).atan()) / (1e-3 + x * x).sqrt();
        let (gx, gw) = gauss_legendre(40);
        let mut acc = 0.0;
        for k in 0..200 {
            let a = k as f64 / 200.0;
            let b = (k + 1) as f64 / 200.0;
            for (x, w) in gx.iter().zip(&gw) {
                acc += 0.5 * (b - a) * w * g(0.5 * (a + b) + 0.5 * (b - a) * x);
            }
        }
        assert!((r.value.re - acc).abs() < 1e-8, "{} vs {}", r.value.re, acc);
    }
}
