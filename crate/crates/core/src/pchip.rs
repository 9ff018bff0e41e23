//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Butland slopes).
//!
//! Each piece is monotone between its two knots, so interior extrema can only
//! sit at knots. The solver relies on that to evaluate Godunov and
//! Engquist–Osher fluxes for tabulated fluxes exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidFlux(
                "tabulated flux needs at least two (u, φ) pairs of equal length".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFlux(
                "tabulated flux contains non-finite values".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidFlux(
                "tabulated abscissae must be strictly increasing".into(),
            ));
        }
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                let (d0, d1) = (delta[i - 1], delta[i]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn last_knot(&self) -> f64 {
        *self.xs.last().expect("nonempty")
    }

    /// Slope used for linear extrapolation beyond the last knot.
    pub fn end_slope(&self) -> f64 {
        *self.slopes.last().expect("nonempty")
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Value, first and second derivative at `x`; linear extrapolation outside the table.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (
                self.ys[0] + self.slopes[0] * (x - self.xs[0]),
                self.slopes[0],
                0.0,
            );
        }
        if x >= self.xs[n - 1] {
            let s = self.slopes[n - 1];
            return (self.ys[n - 1] + s * (x - self.xs[n - 1]), s, 0.0);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, m0, m1) = (
            self.ys[i],
            self.ys[i + 1],
            self.slopes[i] * h,
            self.slopes[i + 1] * h,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let d = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        let dd = (12.0 * t - 6.0) * y0
            + (6.0 * t - 4.0) * m0
            + (-12.0 * t + 6.0) * y1
            + (6.0 * t - 2.0) * m1;
        (v, d / h, dd / (h * h))
    }

    /// Knots strictly inside `(a, b)`.
    pub fn knots_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.xs.iter().copied().filter(move |&k| k > a && k < b)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 4.0], vec![0.0, 0.5, 0.7, 0.8]).unwrap();
        for (x, y) in [(0.0, 0.0), (1.0, 0.5), (2.0, 0.7), (4.0, 0.8)] {
            assert!((p.eval3(x).0 - y).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let xs: Vec<f64> = (0..20).map(|i| (i * i) as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&u| u / (1.0 + u)).collect();
        let p = Pchip::new(xs, ys).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..4000 {
            let x = k as f64 * 36.1 / 4000.0;
            let (v, d, _) = p.eval3(x);
            assert!(v >= prev - 1e-15);
            assert!(d >= -1e-12);
            prev = v;
        }
    }

    #[test]
    fn rejects_unsorted() {
        assert!(Pchip::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }
}
