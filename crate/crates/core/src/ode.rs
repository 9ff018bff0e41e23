//! Scalar Dormand–Prince 5(4) integrator with cubic Hermite dense output.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights are the last row of A; these are fifth minus fourth order
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    /// Step cap, which also bounds the interpolation error of the dense output.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h0: 1e-4,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

/// Accepted nodes `(t, y, y')` of a scalar trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTable {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DenseTable {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("nonempty table")
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.t.len();
        match self.t.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite value and derivative at `t`; `None` outside the table.
    pub fn eval(&self, t: f64) -> Option<(f64, f64)> {
        if self.t.len() == 1 {
            return (t == self.t[0]).then(|| (self.y[0], self.dy[0]));
        }
        if t < self.t_start() || t > self.t_end() {
            return None;
        }
        let i = self.segment(t);
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.dy[i] * h, self.dy[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let d = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (6.0 * s - 6.0 * s2) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        Some((v, d / h))
    }

    fn table(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.y.iter().copied()).collect()
    }
}

/// Integrate `y' = f(t, y)` from `(t0, y0)` to `t1 > t0`.
pub fn integrate<F: Fn(f64, f64) -> f64>(
    f: F,
    t0: f64,
    y0: f64,
    t1: f64,
    opts: OdeOptions,
) -> Result<DenseTable> {
    if !(t1 > t0) {
        return Err(Error::Domain(format!("ODE interval [{t0}, {t1}] is empty")));
    }
    let mut out = DenseTable {
        t: vec![t0],
        y: vec![y0],
        dy: vec![f(t0, y0)],
    };
    let (mut t, mut y) = (t0, y0);
    let mut k = [0.0f64; 7];
    k[0] = out.dy[0];
    let mut h = opts.h0.min(t1 - t0).min(opts.h_max);
    let fail = |t: f64, reason: String, tab: &DenseTable| Error::Integration {
        t,
        reason,
        last_table: tab.table(),
    };
    for _ in 0..opts.max_steps {
        if t >= t1 {
            return Ok(out);
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut acc = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += h * A[s][j] * kj;
            }
            k[s] = f(t + C[s] * h, acc);
        }
        let y_new = y + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let err_abs = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
        let err = (err_abs / scale).abs();
        if !y_new.is_finite() || !err.is_finite() {
            h *= 0.25;
            if h < opts.h_min {
                return Err(fail(t, "non-finite right-hand side".into(), &out));
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            // FSAL: the seventh stage is f(t + h, y_new)
            k[0] = k[6];
            out.t.push(t);
            out.y.push(y);
            out.dy.push(k[0]);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(opts.h_max);
        if h < opts.h_min && t < t1 {
            return Err(fail(t, format!("step size underflow (h = {h:e})"), &out));
        }
    }
    Err(fail(t, "maximum number of steps exceeded".into(), &out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let tab = integrate(|_, y| y, 0.0, 1.0, 2.0, OdeOptions::default()).unwrap();
        assert!((tab.y.last().unwrap() - 2f64.exp()).abs() < 1e-8 * 2f64.exp());
        let (v, d) = tab.eval(1.3).unwrap();
        assert!((v - 1.3f64.exp()).abs() < 1e-6);
        assert!((d - 1.3f64.exp()).abs() < 1e-4);
        assert!(tab.eval(2.5).is_none());
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = cos t, y(0) = 0
        let tab = integrate(|t, _| t.cos(), 0.0, 0.0, 3.0, OdeOptions::default()).unwrap();
        assert!((tab.y.last().unwrap() - 3f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reports_failure_with_table() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = integrate(|_, y| y * y, 0.0, 1.0, 2.0, OdeOptions::default()).unwrap_err();
        match err {
            Error::Integration { t, last_table, .. } => {
                assert!(t < 1.0 && t > 0.9);
                assert!(!last_table.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
