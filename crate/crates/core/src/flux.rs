//! Flux catalog, structural constants and hypothesis checks.
//!
//! A [`Flux`] is immutable once built. Catalog kinds carry closed-form values,
//! derivatives and constants; tabulated fluxes interpolate with a
//! shape-preserving cubic and never infer `(H, K)` on their own.
//!
//! The `(H, K)` inequality checks are evaluated in log space so that the
//! saturated catalog pairs can be verified to relative precision far out on
//! the tail, where `φ'` of the exponential flux underflows and `Hφ + K`
//! would otherwise be a catastrophic cancellation.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pchip::Pchip;
use crate::quad;

/// Default upper end of the evaluation domain.
pub const DEFAULT_U_MAX: f64 = 1e6;
/// Default number of points for the log-spaced hypothesis grid.
pub const HYPOTHESIS_GRID_POINTS: usize = 2048;

/// `(H, K)` pair of the concavity hypothesis `φ''(Hφ + K) ≤ −(φ')²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Pair {
    pub h: f64,
    pub k: f64,
}

impl H2Pair {
    pub fn new(h: f64, k: f64) -> Self {
        Self { h, k }
    }
}

/// Shape of the flux.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// `sgn p [(1+u)^p − 1]`, `p < 1`, `p ≠ 0`.
    Power { p: f64 },
    /// `1 − e^{−αu}`.
    Exponential { alpha: f64 },
    /// `log(1+u)`.
    Logarithmic,
    /// `1 − 1/log(e+u)`.
    LogLog,
    /// `Cu`.
    Linear { c: f64 },
    /// Monotone cubic through user samples, linear beyond the last knot.
    Tabulated(Pchip),
    /// `base(u) + drift·u`.
    Drifted { base: Box<FluxKind>, drift: f64 },
    /// `base(u + k) − base(k)`.
    Shifted { base: Box<FluxKind>, k: f64 },
}

/// Sign of `φ'` over the domain, used by the numerical fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowDirection {
    Increasing,
    Decreasing,
    General,
}

impl FluxKind {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } => {
                if *p == -1.0 {
                    u / (1.0 + u)
                } else if *p == 0.5 {
                    u / ((1.0 + u).sqrt() + 1.0)
                } else {
                    p.signum() * (p * u.ln_1p()).exp_m1()
                }
            }
            FluxKind::Exponential { alpha } => -(-alpha * u).exp_m1(),
            FluxKind::Logarithmic => u.ln_1p(),
            FluxKind::LogLog => (u / E).ln_1p() / (E + u).ln(),
            FluxKind::Linear { c } => c * u,
            FluxKind::Tabulated(t) => t.eval3(u).0,
            FluxKind::Drifted { base, drift } => base.value(u) + drift * u,
            FluxKind::Shifted { base, k } => base.value(u + k) - base.value(*k),
        }
    }

    pub fn d1(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } => {
                if *p == -1.0 {
                    let w = 1.0 + u;
                    1.0 / (w * w)
                } else {
                    p.abs() * ((p - 1.0) * u.ln_1p()).exp()
                }
            }
            FluxKind::Exponential { alpha } => alpha * (-alpha * u).exp(),
            FluxKind::Logarithmic => 1.0 / (1.0 + u),
            FluxKind::LogLog => {
                let l = (E + u).ln();
                1.0 / ((E + u) * l * l)
            }
            FluxKind::Linear { c } => *c,
            FluxKind::Tabulated(t) => t.eval3(u).1,
            FluxKind::Drifted { base, drift } => base.d1(u) + drift,
            FluxKind::Shifted { base, k } => base.d1(u + k),
        }
    }

    pub fn d2(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } => p.abs() * (p - 1.0) * ((p - 2.0) * u.ln_1p()).exp(),
            FluxKind::Exponential { alpha } => -alpha * alpha * (-alpha * u).exp(),
            FluxKind::Logarithmic => -1.0 / ((1.0 + u) * (1.0 + u)),
            FluxKind::LogLog => {
                let l = (E + u).ln();
                -(l + 2.0) / ((E + u) * (E + u) * l * l * l)
            }
            FluxKind::Linear { .. } => 0.0,
            FluxKind::Tabulated(t) => t.eval3(u).2,
            FluxKind::Drifted { base, .. } => base.d2(u),
            FluxKind::Shifted { base, k } => base.d2(u + k),
        }
    }

    /// `φ''(u)/φ'(u)` in closed form for catalog kinds.
    fn d2_over_d1(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } => (p - 1.0) / (1.0 + u),
            FluxKind::Exponential { alpha } => -alpha,
            FluxKind::Logarithmic => -1.0 / (1.0 + u),
            FluxKind::LogLog => {
                let l = (E + u).ln();
                -(l + 2.0) / ((E + u) * l)
            }
            FluxKind::Shifted { base, k } => base.d2_over_d1(u + k),
            _ => self.d2(u) / self.d1(u),
        }
    }

    /// `tail(u)/φ'(u)`, finite even where both factors underflow.
    fn tail_over_d1(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } if *p < 0.0 => (1.0 + u) / p.abs(),
            FluxKind::Exponential { alpha } => 1.0 / alpha,
            FluxKind::LogLog => {
                let l = (E + u).ln();
                (E + u) * l
            }
            FluxKind::Shifted { base, k } => base.tail_over_d1(u + k),
            _ => self.tail(u) / self.d1(u),
        }
    }

    pub fn cphi(&self) -> f64 {
        match self {
            FluxKind::Power { .. }
            | FluxKind::Exponential { .. }
            | FluxKind::Logarithmic
            | FluxKind::LogLog => 0.0,
            FluxKind::Linear { c } => *c,
            FluxKind::Tabulated(t) => t.end_slope(),
            FluxKind::Drifted { base, drift } => base.cphi() + drift,
            FluxKind::Shifted { base, .. } => base.cphi(),
        }
    }

    /// `lim_{u→∞} (φ(u) − Cφ u)`, possibly infinite.
    pub fn centered_limit(&self) -> f64 {
        match self {
            FluxKind::Power { p } => {
                if *p < 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            FluxKind::Exponential { .. } | FluxKind::LogLog => 1.0,
            FluxKind::Logarithmic => f64::INFINITY,
            FluxKind::Linear { .. } => 0.0,
            FluxKind::Tabulated(t) => {
                let last = t.last_knot();
                t.eval3(last).0 - t.end_slope() * last
            }
            FluxKind::Drifted { base, .. } => base.centered_limit(),
            FluxKind::Shifted { base, k } => {
                base.centered_limit() - (base.value(*k) - base.cphi() * k)
            }
        }
    }

    /// `lim(φ − Cφ u) − (φ(u) − Cφ u)` computed without cancellation where possible.
    pub fn tail(&self, u: f64) -> f64 {
        match self {
            FluxKind::Power { p } if *p < 0.0 => (p * u.ln_1p()).exp(),
            FluxKind::Exponential { alpha } => (-alpha * u).exp(),
            FluxKind::LogLog => 1.0 / (E + u).ln(),
            FluxKind::Drifted { base, .. } => base.tail(u),
            FluxKind::Shifted { base, k } => base.tail(u + k),
            _ => {
                let lim = self.centered_limit();
                if lim.is_finite() {
                    lim - (self.value(u) - self.cphi() * u)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The same flux with the linear growth rate removed: `φ(u) − Cφ u`.
    pub fn centered(&self) -> FluxKind {
        let c = self.cphi();
        match self {
            FluxKind::Drifted { base, drift } if base.cphi() == 0.0 && *drift == c => {
                (**base).clone()
            }
            _ if c == 0.0 => self.clone(),
            FluxKind::Linear { .. } => FluxKind::Linear { c: 0.0 },
            _ => FluxKind::Drifted {
                base: Box::new(self.clone()),
                drift: -c,
            },
        }
    }

    fn is_tabulated(&self) -> bool {
        match self {
            FluxKind::Tabulated(_) => true,
            FluxKind::Drifted { base, .. } | FluxKind::Shifted { base, .. } => base.is_tabulated(),
            _ => false,
        }
    }

    fn catalog_pair(&self) -> Option<H2Pair> {
        match self {
            FluxKind::Power { p } => {
                let h = p / (1.0 - p);
                Some(H2Pair::new(h, h.abs()))
            }
            FluxKind::Exponential { .. } => Some(H2Pair::new(-1.0, 1.0)),
            FluxKind::Logarithmic | FluxKind::LogLog => Some(H2Pair::new(0.0, 1.0)),
            FluxKind::Drifted { base, .. } => base.catalog_pair(),
            FluxKind::Shifted { base, k } if matches!(**base, FluxKind::LogLog) => {
                let l = (E + k).ln();
                Some(H2Pair::new(0.0, 1.0 / (l * l)))
            }
            _ => None,
        }
    }

    /// Points in `(a, b)` where `φ'` may change sign (a superset is fine).
    pub fn critical_points(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            FluxKind::Tabulated(t) => t.knots_between(a, b).collect(),
            FluxKind::Drifted { base, .. } if base.is_tabulated() => match &**base {
                FluxKind::Tabulated(t) => t.knots_between(a, b).collect(),
                other => other.critical_points(a, b),
            },
            FluxKind::Shifted { base, k } => base
                .critical_points(a + k, b + k)
                .into_iter()
                .map(|x| x - k)
                .collect(),
            _ => {
                // catalog derivatives are monotone in u, so at most one sign change
                let (da, db) = (self.d1(a), self.d1(b));
                if da * db < 0.0 {
                    quad::bisect(|u| self.d1(u), a, b, 1e-14 * (1.0 + b.abs()))
                        .map(|r| vec![r])
                        .unwrap_or_default()
                } else {
                    Vec::new()
                }
            }
        }
    }
}

/// Constants attached to a flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralConstants {
    /// `lim φ(u)/u`.
    pub cphi: f64,
    /// Lipschitz constant `M`.
    pub lipschitz: f64,
    pub h2: Option<H2Pair>,
    /// `lim |φ(u) − Cφ u|`, `+∞` when unbounded.
    pub gamma: f64,
    /// `sup_{u ≥ 0} |φ(u) − Cφ u|`.
    pub sup_centered: f64,
    /// Sign of `φ' − Cφ` (0 when it vanishes or changes sign).
    pub monotone_sign: i8,
}

/// An evaluable flux with cached constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Flux {
    kind: FluxKind,
    u_max: f64,
    constants: StructuralConstants,
    direction: FlowDirection,
}

impl Flux {
    fn build(kind: FluxKind, supplied: Option<H2Pair>) -> Result<Self> {
        let u_max = DEFAULT_U_MAX;
        let v0 = kind.value(0.0);
        if v0 != 0.0 {
            return Err(Error::InvalidFlux(format!("φ(0) must vanish, got {v0}")));
        }
        let cphi = kind.cphi();
        let grid = quad::log_grid(u_max, HYPOTHESIS_GRID_POINTS);
        let lipschitz = if kind.is_tabulated() {
            1.05 * grid.iter().map(|&u| kind.d1(u).abs()).fold(0.0, f64::max)
        } else {
            match &kind {
                FluxKind::Power { p } => p.abs(),
                FluxKind::Exponential { alpha } => *alpha,
                FluxKind::Logarithmic => 1.0,
                FluxKind::LogLog => 1.0 / E,
                FluxKind::Linear { c } => c.abs(),
                // φ' is monotone for every catalog base, so its extremes sit at 0 and ∞
                _ => kind.d1(0.0).abs().max(cphi.abs()),
            }
        };
        let limit = kind.centered_limit();
        let gamma = limit.abs();
        let sup_centered = if limit.is_infinite() {
            f64::INFINITY
        } else {
            grid.iter()
                .map(|&u| (kind.value(u) - cphi * u).abs())
                .fold(gamma, f64::max)
        };
        let centered = kind.centered();
        let mut pos = false;
        let mut neg = false;
        for &u in &grid {
            let d = centered.d1(u);
            pos |= d > 0.0;
            neg |= d < 0.0;
        }
        let monotone_sign = match (pos, neg) {
            (true, false) => 1,
            (false, true) => -1,
            _ => 0,
        };
        let (mut inc, mut dec) = (true, true);
        for &u in &grid {
            let d = kind.d1(u);
            inc &= d >= 0.0;
            dec &= d <= 0.0;
        }
        let direction = match (inc, dec) {
            (true, _) => FlowDirection::Increasing,
            (false, true) => FlowDirection::Decreasing,
            _ => FlowDirection::General,
        };
        let h2 = supplied.or_else(|| kind.catalog_pair());
        Ok(Self {
            kind,
            u_max,
            constants: StructuralConstants {
                cphi,
                lipschitz,
                h2,
                gamma,
                sup_centered,
                monotone_sign,
            },
            direction,
        })
    }

    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() || p == 0.0 {
            return Err(Error::InvalidFlux(format!(
                "power exponent must be finite and nonzero, got {p}"
            )));
        }
        if p >= 1.0 {
            return Err(Error::InvalidFlux(format!(
                "power exponent {p} ≥ 1 gives a superlinear, non-Lipschitz flux"
            )));
        }
        Self::build(FluxKind::Power { p }, None)
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidFlux(format!(
                "exponential rate must be positive, got {alpha}"
            )));
        }
        Self::build(FluxKind::Exponential { alpha }, None)
    }

    pub fn logarithmic() -> Self {
        Self::build(FluxKind::Logarithmic, None).expect("catalog flux")
    }

    pub fn loglog() -> Self {
        Self::build(FluxKind::LogLog, None).expect("catalog flux")
    }

    pub fn linear(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidFlux("linear speed must be finite".into()));
        }
        Self::build(FluxKind::Linear { c }, None)
    }

    /// Tabulated flux through `(us[i], phis[i])`; `us[0]` must be 0 and `phis[0]` 0.
    pub fn tabulated(us: Vec<f64>, phis: Vec<f64>, h2: Option<H2Pair>) -> Result<Self> {
        if us.first() != Some(&0.0) {
            return Err(Error::InvalidFlux(
                "tabulated flux must start at u = 0".into(),
            ));
        }
        Self::build(FluxKind::Tabulated(Pchip::new(us, phis)?), h2)
    }

    /// `φ(u) + drift·u`, keeping the `(H, K)` pair of `φ` for the centered hypothesis.
    pub fn drifted(base: &Flux, drift: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::InvalidFlux("drift must be finite".into()));
        }
        Self::build(
            FluxKind::Drifted {
                base: Box::new(base.kind.clone()),
                drift,
            },
            base.constants.h2,
        )
    }

    /// `φ_k(u) = φ(u + k) − φ(k)`.
    pub fn shifted(base: &Flux, k: f64, h2: Option<H2Pair>) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidFlux(format!(
                "shift must be nonnegative, got {k}"
            )));
        }
        Self::build(
            FluxKind::Shifted {
                base: Box::new(base.kind.clone()),
                k,
            },
            h2,
        )
    }

    /// Replace the `(H, K)` candidate.
    pub fn with_h2(mut self, pair: Option<H2Pair>) -> Self {
        self.constants.h2 = pair;
        self
    }

    pub fn with_u_max(mut self, u_max: f64) -> Self {
        self.u_max = u_max;
        self
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn structural_constants(&self) -> &StructuralConstants {
        &self.constants
    }

    pub fn cphi(&self) -> f64 {
        self.constants.cphi
    }

    pub fn lipschitz(&self) -> f64 {
        self.constants.lipschitz
    }

    pub fn is_bounded_centered(&self) -> bool {
        self.constants.sup_centered.is_finite()
    }

    /// Power exponent when this is a power flux.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            FluxKind::Power { p } => Some(p),
            _ => None,
        }
    }

    /// `φ(u)`, with negative arguments clamped to 0.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::Domain(format!(
                "flux argument must be finite, got {u}"
            )));
        }
        Ok(self.value(u))
    }

    /// `φ'(u)`, with negative arguments clamped to 0.
    pub fn deriv(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::Domain(format!(
                "flux argument must be finite, got {u}"
            )));
        }
        Ok(self.d1(u))
    }

    /// Unchecked `φ(max(u, 0))` for hot loops.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.kind.value(u.max(0.0))
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        self.kind.d1(u.max(0.0))
    }

    pub fn d2(&self, u: f64) -> f64 {
        self.kind.d2(u.max(0.0))
    }

    /// Run the structural hypothesis checks on `samples`.
    ///
    /// `shift` requests the shifted-flux check at level `k`; when its pair is
    /// `None`, the catalog pair of the shifted flux is used if one exists.
    pub fn check_hypotheses(
        &self,
        samples: &[f64],
        shift: Option<(f64, Option<H2Pair>)>,
    ) -> HypothesisReport {
        let centered = self.kind.centered();
        let cphi = self.constants.cphi;
        let lip = self.constants.lipschitz;

        let mut h1 = self.kind.value(0.0) == 0.0;
        for w in samples.windows(2) {
            let (u, v) = (w[0], w[1]);
            let diff = (self.kind.value(u) - self.kind.value(v)).abs();
            h1 &= diff <= lip * (u - v).abs() * (1.0 + 1e-12) + 1e-300;
        }
        let top = samples.iter().copied().fold(0.0, f64::max);
        let growth_ok = samples
            .iter()
            .filter(|&&u| u >= 0.1 * top && u > 0.0)
            .all(|&u| (self.kind.value(u) / u - cphi).abs() <= 1e-2);
        h1 &= growth_ok;

        let h2 = self.constants.h2.map(|pair| {
            let mut out = inequality_outcome(&self.kind, pair, samples);
            if cphi != 0.0 {
                out.holds = false;
            }
            out
        });
        let h2_prime = self
            .constants
            .h2
            .map(|pair| inequality_outcome(&centered, pair, samples));
        let h2_shifted = shift.and_then(|(k, pair)| {
            let shifted = FluxKind::Shifted {
                base: Box::new(self.kind.clone()),
                k,
            };
            pair.or_else(|| shifted.catalog_pair())
                .map(|p| ShiftedOutcome {
                    k,
                    pair: p,
                    outcome: inequality_outcome(&shifted, p, samples),
                })
        });
        let h3_min_l = self
            .constants
            .h2
            .and_then(|pair| h3_min_l(&centered, pair, samples));
        HypothesisReport {
            h1,
            h2,
            h2_prime,
            h2_shifted,
            h3_min_l,
        }
    }

    /// `check_hypotheses` on the default log-spaced grid over `[0, u_max]`.
    pub fn check_hypotheses_default(
        &self,
        shift: Option<(f64, Option<H2Pair>)>,
    ) -> HypothesisReport {
        self.check_hypotheses(&quad::log_grid(self.u_max, HYPOTHESIS_GRID_POINTS), shift)
    }

    /// Blow-up profile `(g, Ψ, Ψ(∞))` after normalizing to the concave case.
    pub fn blowup_profile(&self) -> Result<BlowupProfile> {
        let pair = self
            .constants
            .h2
            .ok_or_else(|| Error::UnsupportedFlux("blow-up profile needs an (H, K) pair".into()))?;
        BlowupProfile::new(self.kind.centered(), pair)
    }
}

/// `(Hφ(u) + K)/φ'(u)`, through the tail when `K = −H·lim(φ − Cφ u)`.
fn affine_over_d1(kind: &FluxKind, pair: H2Pair, u: f64) -> f64 {
    let lim = kind.centered_limit();
    let cancels = pair.h != 0.0
        && lim.is_finite()
        && (pair.k + pair.h * lim).abs() <= 1e-12 * pair.k.abs().max(1.0);
    if cancels {
        -pair.h * kind.tail_over_d1(u)
    } else {
        (pair.h * kind.value(u) + pair.k) / kind.d1(u)
    }
}

/// `φ''(Hφ+K)/φ'²` as a product of two ratios that stay finite on the tail.
fn h2_ratio(kind: &FluxKind, pair: H2Pair, u: f64) -> f64 {
    let a = kind.d2_over_d1(u);
    let b = affine_over_d1(kind, pair, u);
    if a == 0.0 && b.is_finite() {
        return 0.0;
    }
    a * b
}

fn inequality_outcome(kind: &FluxKind, pair: H2Pair, samples: &[f64]) -> HypothesisOutcome {
    let mut holds = true;
    let mut worst = f64::NEG_INFINITY;
    let mut saturation = 0.0f64;
    for &u in samples {
        let r = h2_ratio(kind, pair, u);
        if r.is_nan() {
            holds = false;
            worst = f64::INFINITY;
            saturation = f64::INFINITY;
            continue;
        }
        let m = r + 1.0;
        worst = worst.max(m);
        saturation = saturation.max(m.abs());
        if m > 1e-10 {
            holds = false;
        }
    }
    HypothesisOutcome {
        holds,
        worst_margin: worst,
        saturation,
    }
}

fn h3_min_l(kind: &FluxKind, pair: H2Pair, samples: &[f64]) -> Option<f64> {
    let mut best = 0.0f64;
    for &u in samples {
        let r = affine_over_d1(kind, pair, u);
        if r.is_nan() {
            return None;
        }
        let numerator_positive = pair.h * kind.value(u) + pair.k > 0.0 || r > 0.0;
        if !numerator_positive {
            continue;
        }
        if r <= 0.0 || r.is_infinite() {
            return None;
        }
        best = best.max(r / (1.0 + u));
    }
    Some(best)
}

/// Outcome of one inequality hypothesis over a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisOutcome {
    pub holds: bool,
    /// `max (φ''(Hφ+K)/φ'² + 1)`; nonpositive when the inequality holds.
    pub worst_margin: f64,
    /// `max |φ''(Hφ+K)/φ'² + 1|`; zero for an exactly saturated pair.
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedOutcome {
    pub k: f64,
    pub pair: H2Pair,
    pub outcome: HypothesisOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `φ(0) = 0`, Lipschitz on the samples, and `φ(u)/u` within 10⁻² of `Cφ` on the top decade.
    pub h1: bool,
    pub h2: Option<HypothesisOutcome>,
    /// The inequality for `φ − Cφ u`.
    pub h2_prime: Option<HypothesisOutcome>,
    pub h2_shifted: Option<ShiftedOutcome>,
    /// Smallest `L` with `Hφ + K ≤ L(1+u)φ'` on the samples; `None` if infeasible.
    pub h3_min_l: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ProfileForm {
    Power { p: f64 },
    Exponential { alpha: f64 },
    Logarithmic,
    Numeric,
}

/// `g(u) = (Hφ+K)/φ'` and `Ψ(y) = ∫_0^y φ'/g`, for the concave-normalized flux.
#[derive(Debug, Clone)]
pub struct BlowupProfile {
    kind: FluxKind,
    pair: H2Pair,
    sign: f64,
    form: ProfileForm,
    psi_inf: f64,
}

impl BlowupProfile {
    fn new(centered: FluxKind, pair: H2Pair) -> Result<Self> {
        // convex case: reflect φ → −φ, K → −K
        let sign = if centered.d2(0.0) > 0.0 { -1.0 } else { 1.0 };
        let pair = H2Pair::new(pair.h, sign * pair.k);
        let form = match (&centered, centered.catalog_pair()) {
            (FluxKind::Power { p }, Some(c)) if c == pair && sign > 0.0 => {
                ProfileForm::Power { p: *p }
            }
            (FluxKind::Exponential { alpha }, Some(c)) if c == pair && sign > 0.0 => {
                ProfileForm::Exponential { alpha: *alpha }
            }
            (FluxKind::Logarithmic, Some(c)) if c == pair && sign > 0.0 => ProfileForm::Logarithmic,
            _ => ProfileForm::Numeric,
        };
        let mut prof = Self {
            kind: centered,
            pair,
            sign,
            form,
            psi_inf: f64::NAN,
        };
        prof.psi_inf = match form {
            ProfileForm::Power { p } => p.abs(),
            ProfileForm::Exponential { alpha } => alpha,
            ProfileForm::Logarithmic => 1.0,
            ProfileForm::Numeric => prof.psi_numeric_inf()?,
        };
        Ok(prof)
    }

    fn integrand(&self, u: f64) -> f64 {
        let d = self.kind.d1(u);
        if d == 0.0 {
            return 0.0;
        }
        self.sign * d / affine_over_d1(&self.kind, self.raw_pair(), u)
    }

    fn raw_pair(&self) -> H2Pair {
        H2Pair::new(self.pair.h, self.sign * self.pair.k)
    }

    fn psi_numeric_inf(&self) -> Result<f64> {
        Ok(quad::integrate_to_infinity(|u| self.integrand(u), 0.0, 1e-13, 1e-12)?.value)
    }

    pub fn pair(&self) -> H2Pair {
        self.pair
    }

    /// `g(u)`; errors where `φ'` vanishes.
    pub fn g(&self, u: f64) -> Result<f64> {
        let g = affine_over_d1(&self.kind, self.raw_pair(), u.max(0.0));
        if !g.is_finite() {
            return Err(Error::Singularity { u });
        }
        Ok(g)
    }

    pub fn psi(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        if y.is_infinite() {
            return Ok(self.psi_inf);
        }
        Ok(match self.form {
            ProfileForm::Power { p } => p.abs() * -((p - 1.0) * y.ln_1p()).exp_m1(),
            ProfileForm::Exponential { alpha } => alpha * -(-alpha * y).exp_m1(),
            ProfileForm::Logarithmic => y / (1.0 + y),
            ProfileForm::Numeric => self.psi_quadrature(y)?,
        })
    }

    /// `Ψ(y)` by adaptive quadrature, whatever the closed form.
    pub fn psi_quadrature(&self, y: f64) -> Result<f64> {
        if self.kind.d1(0.0) == 0.0 {
            return Err(Error::Singularity { u: 0.0 });
        }
        Ok(quad::integrate(|u| self.integrand(u), 0.0, y, 1e-14, 1e-13)?.value)
    }

    pub fn psi_inf(&self) -> f64 {
        self.psi_inf
    }

    /// `Ψ⁻¹(z)`; 0 for `z ≤ 0` and `+∞` for `z ≥ Ψ(∞)`.
    pub fn psi_inv(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        if z >= self.psi_inf {
            return Ok(f64::INFINITY);
        }
        match self.form {
            // (1+y)^{p−1} = 1 − z/|p|
            ProfileForm::Power { p } => Ok(((1.0 - z / p.abs()).ln() / (p - 1.0)).exp_m1()),
            ProfileForm::Exponential { alpha } => Ok(-(1.0 - z / alpha).ln() / alpha),
            ProfileForm::Logarithmic => Ok(z / (1.0 - z)),
            ProfileForm::Numeric => {
                let mut hi = 1.0;
                while self.psi(hi)? < z {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Ok(f64::INFINITY);
                    }
                }
                quad::bisect(
                    |y| self.psi(y).map(|v| v - z).unwrap_or(f64::NAN),
                    0.0,
                    hi,
                    1e-13 * hi,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn catalog() -> Vec<Flux> {
        vec![
            Flux::power(-1.0).unwrap(),
            Flux::power(-0.5).unwrap(),
            Flux::power(0.5).unwrap(),
            Flux::power(-2.3).unwrap(),
            Flux::exponential(1.0).unwrap(),
            Flux::exponential(2.5).unwrap(),
            Flux::logarithmic(),
            Flux::loglog(),
        ]
    }

    #[test]
    fn eval_examples() {
        let f = Flux::power(-1.0).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.5);
        let l = Flux::logarithmic();
        assert_relative_eq!(l.eval(E - 1.0).unwrap(), 1.0, max_relative = 1e-15);
        for f in catalog() {
            assert_eq!(f.eval(0.0).unwrap(), 0.0);
        }
        assert_eq!(Flux::linear(0.3).unwrap().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_arguments_clamp_and_nan_errors() {
        let f = Flux::power(-1.0).unwrap();
        assert_eq!(f.eval(-0.25).unwrap(), 0.0);
        assert!(matches!(f.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(f.deriv(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn deriv_examples() {
        assert_eq!(Flux::power(-1.0).unwrap().deriv(1.0).unwrap(), 0.25);
        assert_eq!(Flux::linear(-0.7).unwrap().deriv(3.0).unwrap(), -0.7);
        assert_eq!(Flux::exponential(1.0).unwrap().deriv(0.0).unwrap(), 1.0);
    }

    #[test]
    fn power_general_exponent_matches_definition() {
        for &p in &[-2.3, -0.5, 0.25, 0.75] {
            let f = Flux::power(p).unwrap();
            for &u in &[1e-8, 0.3, 4.0, 1e3] {
                let direct = p.signum() * ((1.0f64 + u).powf(p) - 1.0);
                assert_relative_eq!(f.eval(u).unwrap(), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn structural_constants_catalog() {
        let c = *Flux::power(-1.0).unwrap().structural_constants();
        assert_eq!(c.cphi, 0.0);
        assert_eq!(c.h2, Some(H2Pair::new(-0.5, 0.5)));
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.monotone_sign, 1);
        assert_eq!(c.lipschitz, 1.0);

        let e = *Flux::exponential(3.0).unwrap().structural_constants();
        assert_eq!(e.h2, Some(H2Pair::new(-1.0, 1.0)));
        assert_eq!(e.gamma, 1.0);

        let l = *Flux::logarithmic().structural_constants();
        assert_eq!(l.h2, Some(H2Pair::new(0.0, 1.0)));
        assert!(l.gamma.is_infinite());

        let lin = *Flux::linear(0.4).unwrap().structural_constants();
        assert_eq!(lin.cphi, 0.4);
        assert_eq!(lin.h2, None);
        assert_eq!(lin.gamma, 0.0);
        assert_eq!(lin.monotone_sign, 0);
    }

    #[test]
    fn custom_flux_reports_absent_pair() {
        let us: Vec<f64> = (0..50).map(|i| i as f64 * 0.5).collect();
        let phis: Vec<f64> = us.iter().map(|&u| u / (1.0 + u)).collect();
        let f = Flux::tabulated(us, phis, None).unwrap();
        assert_eq!(f.structural_constants().h2, None);
        assert!(f.blowup_profile().is_err());
    }

    #[test]
    fn drifted_flux_constants() {
        let base = Flux::power(-1.0).unwrap();
        let f = Flux::drifted(&base, 0.3).unwrap();
        let c = f.structural_constants();
        assert_relative_eq!(c.cphi, 0.3);
        assert_relative_eq!(c.lipschitz, 1.3);
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.monotone_sign, 1);
        assert_eq!(f.kind().centered(), FluxKind::Power { p: -1.0 });
        let r = f.check_hypotheses_default(None);
        assert!(!r.h2.unwrap().holds);
        assert!(r.h2_prime.unwrap().holds);
    }

    #[test]
    fn h2_saturates_for_power_exponential_logarithmic() {
        for f in catalog()
            .into_iter()
            .filter(|f| !matches!(f.kind(), FluxKind::LogLog))
        {
            let r = f.check_hypotheses_default(None);
            let h2 = r.h2.unwrap();
            assert!(h2.holds, "{:?}", f.kind());
            assert!(h2.saturation <= 1e-9, "{:?}: {}", f.kind(), h2.saturation);
        }
    }

    #[test]
    fn h2_saturation_direct_formula_on_moderate_grid() {
        // direct (non-log) evaluation, restricted to where it does not cancel
        let f = Flux::power(-1.0).unwrap();
        let pair = f.structural_constants().h2.unwrap();
        for k in 0..200 {
            let u = 10f64.powf(-6.0 + 9.0 * k as f64 / 199.0);
            let lhs = f.d2(u) * (pair.h * f.value(u) + pair.k);
            let rhs = -(f.d1(u) * f.d1(u));
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs(), "u={u}");
        }
    }

    #[test]
    fn loglog_satisfies_h2_strictly_and_shifted() {
        let f = Flux::loglog();
        let r = f.check_hypotheses_default(Some((1.0, None)));
        assert!(r.h2.unwrap().holds);
        let s = r.h2_shifted.unwrap();
        assert_eq!(s.k, 1.0);
        let l = (E + 1.0).ln();
        assert_relative_eq!(s.pair.k, 1.0 / (l * l));
        assert!(s.outcome.holds);
        // the shifted pair satisfies |K| < γ_k
        let shifted = Flux::shifted(&f, 1.0, Some(s.pair)).unwrap();
        assert_relative_eq!(
            shifted.structural_constants().gamma,
            1.0 / l,
            max_relative = 1e-12
        );
        assert!(s.pair.k < shifted.structural_constants().gamma);
    }

    #[test]
    fn linear_fails_h2() {
        let f = Flux::linear(1.0)
            .unwrap()
            .with_h2(Some(H2Pair::new(0.0, 1.0)));
        let r = f.check_hypotheses_default(None);
        assert!(!r.h2.unwrap().holds);
    }

    #[test]
    fn h3_constant_for_power() {
        let f = Flux::power(-1.0).unwrap();
        let r = f.check_hypotheses_default(None);
        assert_relative_eq!(r.h3_min_l.unwrap(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn blowup_profile_closed_form_vs_quadrature() {
        for &p in &[-1.0, -0.5, -2.0, 0.5] {
            let f = Flux::power(p).unwrap();
            let prof = f.blowup_profile().unwrap();
            assert_eq!(prof.psi(0.0).unwrap(), 0.0);
            assert_relative_eq!(prof.psi_inf(), p.abs());
            for &y in &[0.1, 1.0, 7.5, 100.0] {
                let closed = prof.psi(y).unwrap();
                let numeric = prof.psi_quadrature(y).unwrap();
                assert!(
                    (closed - numeric).abs() <= 1e-10,
                    "p={p} y={y}: {closed} vs {numeric}"
                );
                let expected = p.abs() * (1.0 - (1.0f64 + y).powf(p - 1.0));
                assert_relative_eq!(closed, expected, max_relative = 1e-12);
            }
        }
        let prof = Flux::power(-1.0).unwrap().blowup_profile().unwrap();
        assert_relative_eq!(prof.psi(1.0).unwrap(), 0.75, max_relative = 1e-15);
        assert_relative_eq!(prof.g(1.0).unwrap(), 1.0);
    }

    #[test]
    fn blowup_profile_other_catalog_kinds() {
        for f in [
            Flux::exponential(2.0).unwrap(),
            Flux::logarithmic(),
            Flux::loglog(),
        ] {
            let prof = f.blowup_profile().unwrap();
            for &y in &[0.5, 3.0, 40.0] {
                let closed = prof.psi(y).unwrap();
                let numeric = prof.psi_quadrature(y).unwrap();
                assert!((closed - numeric).abs() <= 1e-10, "{:?}", f.kind());
                if prof.psi_inf() - closed > 1e-6 {
                    let back = prof.psi_inv(closed).unwrap();
                    assert_relative_eq!(back, y, max_relative = 1e-6);
                }
            }
            assert!(prof.psi(1e6).unwrap() <= prof.psi_inf() + 1e-12);
        }
    }

    #[test]
    fn psi_inverse_power_roundtrip_and_edges() {
        let prof = Flux::power(-1.0).unwrap().blowup_profile().unwrap();
        assert_eq!(prof.psi_inv(-0.1).unwrap(), 0.0);
        assert!(prof.psi_inv(1.0).unwrap().is_infinite());
        let y = prof.psi_inv(0.5).unwrap();
        assert_relative_eq!(prof.psi(y).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn deriv_matches_finite_differences() {
        let h = 1e-5;
        for f in catalog() {
            for &u in &[0.01, 0.5, 3.0, 20.0, 400.0] {
                let fd = (f.value(u + h) - f.value(u - h)) / (2.0 * h);
                let d = f.d1(u);
                assert!(
                    (fd - d).abs() <= 1e-6 * d.abs() + 1e-10,
                    "{:?} u={u}: {fd} vs {d}",
                    f.kind()
                );
            }
        }
    }

    #[test]
    fn large_u_growth_rate() {
        for f in catalog() {
            let c = f.cphi();
            let mut prev = f64::INFINITY;
            for &u in &[1e3, 1e4, 1e5, 1e6] {
                let dev = (f.value(u) / u - c).abs();
                assert!(u < 1e5 || dev <= 1e-2);
                assert!(dev <= prev);
                prev = dev;
            }
        }
    }

    proptest! {
        #[test]
        fn lipschitz_bound(u in 0.0f64..1e6, v in 0.0f64..1e6, which in 0usize..8) {
            let f = &catalog()[which];
            let m = f.lipschitz();
            prop_assert!((f.value(u) - f.value(v)).abs() <= m * (u - v).abs() * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn psi_monotone_and_bounded(a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let prof = Flux::power(-1.0).unwrap().blowup_profile().unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(prof.psi(lo).unwrap() <= prof.psi(hi).unwrap());
            prop_assert!(prof.psi(hi).unwrap() <= prof.psi_inf());
        }
    }
}
