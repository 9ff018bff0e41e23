//! Closed-form entropy solutions for the power flux `φ = sgn p [(1+u)^p − 1]`.
//!
//! Two families share the same rarefaction fan `(|p|t/(x − c))^{1/(1−p)} − 1`:
//!
//! * measure data `u₀ = δ₀` (fan centred at `c = 0`), where for `p < 0` an atom of
//!   mass `max{1 − t, 0}` survives at the origin and a shock is born at `t = 1`,
//!   while for `0 < p < 1` the atom dissolves instantly and the shock starts at
//!   `t = 0`;
//! * pulse data `(n/2)χ_(−1/n, 1/n)` (fan centred at `c = 1/n`), whose left
//!   discontinuity overtakes the bottom of the fan at the breakdown time `tₙ`.
//!
//! After the shock forms its position solves `ξ' = φ(u⁺)/u⁺`, with `u⁺` the fan
//! value at `ξ`. The degenerate start `ξ = c` is bootstrapped with a mass
//! conservation locator, which is also exposed as an independent oracle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::measure::{Atom, RadonMeasure};
use crate::ode::{self, DenseTable, OdeOptions};
use crate::quad;
use crate::solver::{self, GridSolution, SolverConfig};

/// Offset from the shock birth time at which the ODE is seeded.
pub const BOOTSTRAP_OFFSET: f64 = 1e-4;

/// Which initial datum the solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// `u₀ = δ₀`.
    Measure,
    /// `u₀ = (n/2) χ_(−1/n, 1/n)`.
    Pulse { n: u64 },
}

/// How the first point of a shock curve was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StartupMethod {
    /// Seeded at `t_boot` from the mass-conservation locator.
    MassBootstrap { t_boot: f64 },
    /// Started from a nondegenerate initial condition.
    Direct,
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p == 0.0 || p >= 1.0 {
        return Err(Error::Domain(format!(
            "power exponent must lie in (−∞, 1) \\ {{0}}, got {p}"
        )));
    }
    Ok(())
}

/// Fan value `(L/y)^{1/(1−p)} − 1` with `L = |p|t`, `y = x − c > 0`.
#[inline]
fn fan(p: f64, l: f64, y: f64) -> f64 {
    ((l / y).ln() / (1.0 - p)).exp_m1()
}

/// Regular mass `∫_{c + rL}^{c + L} fan dx` in units of `L`.
fn fan_mass_fraction(p: f64, r: f64) -> f64 {
    let b = -p / (1.0 - p);
    if r <= 0.0 {
        return if b > 0.0 {
            1.0 / b - 1.0
        } else {
            f64::INFINITY
        };
    }
    -(b * r.ln()).exp_m1() / b - (1.0 - r)
}

/// Position of the shock at time `t` from mass conservation alone.
///
/// Solves `[fan mass on (ξ, c + |p|t)] + [atom mass] = 1` by bisection in `ln r`.
pub fn shock_from_mass_conservation(p: f64, t: f64) -> Result<f64> {
    locate(p, t, 0.0, if p < 0.0 { (1.0 - t).max(0.0) } else { 0.0 })
}

/// The same locator for pulse data after breakdown (fan centred at `1/n`).
pub fn pulse_shock_from_mass_conservation(n: u64, p: f64, t: f64) -> Result<f64> {
    locate(p, t, 1.0 / n as f64, 0.0)
}

fn locate(p: f64, t: f64, c: f64, atom: f64) -> Result<f64> {
    check_p(p)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("locator needs t > 0, got {t}")));
    }
    let l = p.abs() * t;
    let target = 1.0 - atom;
    if l * fan_mass_fraction(p, 0.0) <= target * (1.0 + 1e-14) {
        // the whole fan fits: no shock yet
        return Ok(c);
    }
    let g = |s: f64| l * fan_mass_fraction(p, s.exp()) - target;
    let s = quad::bisect(g, -745.0, 0.0, 1e-14)?;
    Ok(c + l * s.exp())
}

/// Tabulated shock `ξ(t)` with dense output.
#[derive(Debug, Clone, Serialize)]
pub struct ShockCurve {
    pub p: f64,
    pub mode: Mode,
    /// Birth time (`1` or `0` for measure data, `tₙ` for pulses).
    pub t_start: f64,
    pub xi_start: f64,
    pub startup: StartupMethod,
    /// Interpolation order of the dense output.
    pub interpolation_order: u8,
    /// `max |ξ' − φ(u⁺)/u⁺|` at interval midpoints of the dense output.
    pub max_rh_residual: f64,
    #[serde(skip)]
    table: Option<DenseTable>,
    horizon: f64,
}

impl ShockCurve {
    fn centre(&self) -> f64 {
        match self.mode {
            Mode::Measure => 0.0,
            Mode::Pulse { n } => 1.0 / n as f64,
        }
    }

    /// `(t, ξ)` pairs of the accepted steps.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(self.t_start, self.xi_start)];
        if let Some(tab) = &self.table {
            out.extend(tab.t.iter().copied().zip(tab.y.iter().copied()));
        }
        out
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `ξ(t)` on `[t_start, horizon]`.
    pub fn xi(&self, t: f64) -> Result<f64> {
        if t < self.t_start || t > self.horizon * (1.0 + 1e-14) {
            return Err(Error::Domain(format!(
                "t = {t} outside the shock lifetime [{}, {}]",
                self.t_start, self.horizon
            )));
        }
        if t == self.t_start {
            return Ok(self.xi_start);
        }
        if let StartupMethod::MassBootstrap { t_boot } = self.startup {
            if t <= t_boot {
                return shock_from_mass_conservation(self.p, t);
            }
        }
        match &self.table {
            Some(tab) => Ok(tab
                .eval(t.min(tab.t_end()))
                .map(|v| v.0)
                .unwrap_or(self.xi_start)),
            None => Ok(self.xi_start),
        }
    }

    /// Rankine–Hugoniot speed `φ(u⁺)/u⁺` at `(t, ξ)`.
    pub fn rh_speed(&self, t: f64, xi: f64) -> f64 {
        rh_speed(self.p, self.centre(), t, xi)
    }
}

fn rh_speed(p: f64, c: f64, t: f64, xi: f64) -> f64 {
    let l = p.abs() * t;
    let y = xi - c;
    if y >= l {
        return p.abs();
    }
    if y <= 0.0 {
        return 0.0;
    }
    let u = fan(p, l, y);
    if !u.is_finite() {
        return 0.0;
    }
    if u == 0.0 {
        return p.abs();
    }
    if p == -1.0 {
        return 1.0 / (1.0 + u);
    }
    p.signum() * (p * u.ln_1p()).exp_m1() / u
}

fn shock_ode(
    p: f64,
    mode: Mode,
    t0: f64,
    xi0: f64,
    startup: StartupMethod,
    t_end: f64,
    horizon: f64,
) -> Result<ShockCurve> {
    let c = match mode {
        Mode::Measure => 0.0,
        Mode::Pulse { n } => 1.0 / n as f64,
    };
    let (t_seed, xi_seed) = match startup {
        StartupMethod::MassBootstrap { t_boot } => {
            (t_boot, shock_from_mass_conservation(p, t_boot)?)
        }
        StartupMethod::Direct => (t0, xi0),
    };
    let table = if t_end > t_seed {
        // ξ starts many orders of magnitude below 1, so the error control is purely relative
        let opts = OdeOptions {
            rtol: 1e-9,
            atol: 1e-300,
            h0: 1e-5 * t_seed.max(BOOTSTRAP_OFFSET),
            h_max: (t_end - t_seed) / 2000.0,
            ..OdeOptions::default()
        };
        Some(ode::integrate(
            |t, xi| rh_speed(p, c, t, xi),
            t_seed,
            xi_seed,
            t_end,
            opts,
        )?)
    } else {
        None
    };
    let mut max_res = 0.0f64;
    if let Some(tab) = &table {
        for w in tab.t.windows(2) {
            let tm = 0.5 * (w[0] + w[1]);
            let (v, d) = tab.eval(tm).expect("inside table");
            max_res = max_res.max((d - rh_speed(p, c, tm, v)).abs());
        }
    }
    Ok(ShockCurve {
        p,
        mode,
        t_start: t0,
        xi_start: xi0,
        startup,
        interpolation_order: 3,
        max_rh_residual: max_res,
        table,
        horizon,
    })
}

/// Shock curve for measure data `δ₀` up to time `t_end`.
pub fn integrate_shock(p: f64, t_end: f64) -> Result<ShockCurve> {
    check_p(p)?;
    let t0 = if p < 0.0 { 1.0 } else { 0.0 };
    if !(t_end > t0) {
        return Err(Error::Domain(format!(
            "shock for p = {p} is born at t = {t0}; horizon {t_end} is too short"
        )));
    }
    let t_boot = (t0 + BOOTSTRAP_OFFSET).min(t_end);
    shock_ode(
        p,
        Mode::Measure,
        t0,
        0.0,
        StartupMethod::MassBootstrap { t_boot },
        t_end,
        t_end,
    )
}

/// Breakdown time `tₙ` and shock origin `xₙ` for pulse data.
pub fn breakdown(n: u64, p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::Domain("pulse level must be positive".into()));
    }
    let flux = Flux::power(p)?;
    let m = n as f64 / 2.0;
    let (phi, dphi) = (flux.value(m), flux.d1(m));
    let den = phi - m * dphi;
    Ok((1.0 / den, (phi + m * dphi) / (n as f64 * den)))
}

/// Entropy solution of the power-flux problem with measure or pulse data.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub p: f64,
    pub mode: Mode,
    pub horizon: f64,
    flux: Flux,
    shock: Option<ShockCurve>,
    /// `(tₙ, xₙ, left-edge speed)` for pulse data.
    pulse: Option<(f64, f64, f64)>,
}

impl ExactSolution {
    /// Solution with `u₀ = δ₀` on `(0, T]`.
    pub fn measure(p: f64, horizon: f64) -> Result<Self> {
        check_p(p)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let birth = if p < 0.0 { 1.0 } else { 0.0 };
        let shock = if horizon > birth {
            Some(integrate_shock(p, horizon)?)
        } else {
            None
        };
        Ok(Self {
            p,
            mode: Mode::Measure,
            horizon,
            flux: Flux::power(p)?,
            shock,
            pulse: None,
        })
    }

    /// Solution with `u₀ = (n/2)χ_(−1/n, 1/n)` on `[0, T]`.
    pub fn pulse(n: u64, p: f64, horizon: f64) -> Result<Self> {
        let (tn, xn) = breakdown(n, p)?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be nonnegative, got {horizon}"
            )));
        }
        let flux = Flux::power(p)?;
        let m = n as f64 / 2.0;
        let left_speed = flux.value(m) / m;
        let shock = if horizon > tn {
            Some(shock_ode(
                p,
                Mode::Pulse { n },
                tn,
                xn,
                StartupMethod::Direct,
                horizon,
                horizon,
            )?)
        } else {
            None
        };
        Ok(Self {
            p,
            mode: Mode::Pulse { n },
            horizon,
            flux,
            shock,
            pulse: Some((tn, xn, left_speed)),
        })
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    pub fn shock(&self) -> Option<&ShockCurve> {
        self.shock.as_ref()
    }

    /// `(tₙ, xₙ)` for pulse data.
    pub fn breakdown(&self) -> Option<(f64, f64)> {
        self.pulse.map(|(t, x, _)| (t, x))
    }

    /// Centre of the rarefaction fan.
    pub fn fan_centre(&self) -> f64 {
        match self.mode {
            Mode::Measure => 0.0,
            Mode::Pulse { n } => 1.0 / n as f64,
        }
    }

    /// Atom mass at the origin.
    pub fn atom_mass(&self, t: f64) -> f64 {
        match self.mode {
            Mode::Measure if self.p < 0.0 => (1.0 - t).max(0.0),
            Mode::Measure if t == 0.0 => 1.0,
            _ => 0.0,
        }
    }

    /// Left end of the support of `u_r(·, t)`.
    pub fn lower_edge(&self, t: f64) -> Result<f64> {
        match (self.mode, self.pulse) {
            (Mode::Pulse { n }, Some((tn, _, s))) if t <= tn => Ok(s * t - 1.0 / n as f64),
            _ => match &self.shock {
                Some(sh) if t >= sh.t_start => sh.xi(t),
                _ => Ok(self.fan_centre()),
            },
        }
    }

    /// Right end of the support of `u_r(·, t)`.
    pub fn upper_edge(&self, t: f64) -> f64 {
        self.fan_centre() + self.p.abs() * t
    }

    /// `(u_r(x, t), atom mass at the origin)`.
    pub fn eval(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        let lo_ok = match self.mode {
            Mode::Measure => t > 0.0,
            Mode::Pulse { .. } => t >= 0.0,
        };
        if !lo_ok || t > self.horizon * (1.0 + 1e-14) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "({x}, {t}) outside the solution domain (0, {}]",
                self.horizon
            )));
        }
        Ok((self.regular(x, t)?, self.atom_mass(t)))
    }

    /// Regular part `u_r(x, t)`.
    pub fn regular(&self, x: f64, t: f64) -> Result<f64> {
        let c = self.fan_centre();
        let l = self.p.abs() * t;
        let y = x - c;
        if y >= l {
            return Ok(0.0);
        }
        if let (Mode::Pulse { n }, Some((tn, _, s))) = (self.mode, self.pulse) {
            if t <= tn {
                let half = n as f64 / 2.0;
                let fan_bottom = (2.0 / (n as f64 + 2.0)).powf(1.0 - self.p) * l + c;
                return Ok(if x >= fan_bottom {
                    fan(self.p, l, y)
                } else if x >= s * t - c {
                    half
                } else {
                    0.0
                });
            }
        } else if self.p < 0.0 && t <= 1.0 {
            return Ok(if y > 0.0 { fan(self.p, l, y) } else { 0.0 });
        }
        let xi = self.lower_edge(t)?;
        Ok(if x >= xi && y > 0.0 {
            fan(self.p, l, y)
        } else {
            0.0
        })
    }

    /// `sup_x u_r(·, t)`; infinite while the atom is alive.
    pub fn sup_regular(&self, t: f64) -> Result<f64> {
        if let (Mode::Pulse { n }, Some((tn, _, _))) = (self.mode, self.pulse) {
            if t <= tn {
                return Ok(n as f64 / 2.0);
            }
        }
        let xi = self.lower_edge(t)?;
        let y = xi - self.fan_centre();
        if y <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(fan(self.p, self.p.abs() * t, y))
    }

    /// `∫ u_r(x, t) dx` from the closed-form antiderivative.
    pub fn regular_mass(&self, t: f64) -> Result<f64> {
        let l = self.p.abs() * t;
        if let (Mode::Pulse { n }, Some((tn, _, s))) = (self.mode, self.pulse) {
            if t <= tn {
                let c = self.fan_centre();
                let r = (2.0 / (n as f64 + 2.0)).powf(1.0 - self.p);
                let plateau = (r * l + c) - (s * t - c);
                return Ok(l * fan_mass_fraction(self.p, r) + plateau * n as f64 / 2.0);
            }
        }
        if l == 0.0 {
            return Ok(0.0);
        }
        let r = ((self.lower_edge(t)? - self.fan_centre()) / l).max(0.0);
        Ok(l * fan_mass_fraction(self.p, r))
    }

    /// `∫_{t1}^{t2} φ(u_r(x, s)) ds` by adaptive quadrature split at the kinks in `s`.
    pub fn flux_integral(&self, x: f64, t1: f64, t2: f64) -> Result<f64> {
        if t2 <= t1 {
            return Ok(0.0);
        }
        let y = x - self.fan_centre();
        let mut breaks = vec![y / self.p.abs()];
        if let Some((tn, _, s)) = self.pulse {
            breaks.push(tn);
            if s != 0.0 {
                breaks.push((x + self.fan_centre()) / s);
            }
            if let Mode::Pulse { n } = self.mode {
                let r = (2.0 / (n as f64 + 2.0)).powf(1.0 - self.p);
                breaks.push(y / (r * self.p.abs()));
            }
        }
        if let Some(sh) = &self.shock {
            breaks.push(sh.t_start);
            let lo = sh.t_start.max(t1);
            let hi = sh.horizon().min(t2);
            if hi > lo {
                let g = |s: f64| sh.xi(s).map(|v| v - x).unwrap_or(f64::NAN);
                if let Ok(ts) = quad::bisect(g, lo, hi, 1e-14) {
                    breaks.push(ts);
                }
            }
        }
        let q = quad::integrate_with_breaks(
            |s| {
                if s <= 0.0 {
                    return 0.0;
                }
                self.regular(x, s)
                    .map(|u| self.flux.value(u))
                    .unwrap_or(f64::NAN)
            },
            t1,
            t2,
            &breaks,
            1e-13,
            1e-12,
        )?;
        Ok(q.value)
    }
}

/// `u_n(x, t)` for pulse data at level `n`.
pub fn rn_exact(n: u64, p: f64, x: f64, t: f64) -> Result<f64> {
    ExactSolution::pulse(n, p, t.max(0.0))?
        .eval(x, t)
        .map(|v| v.0)
}

/// `(u_r(x, t), atom mass)` for measure data.
pub fn eval_exact(sol: &ExactSolution, x: f64, t: f64) -> Result<(f64, f64)> {
    sol.eval(x, t)
}

/// Atoms carried unchanged along `x_l + Cφ t` on top of the entropy solution for the
/// regular part alone.
///
/// It satisfies the entropy inequalities away from the atoms yet keeps the regular part
/// bounded next to them, so it differs from the solution built as a limit of
/// regularized problems.
#[derive(Debug, Clone)]
pub struct FrozenDirac {
    pub regular: GridSolution,
    pub atoms: Vec<Atom>,
    pub cphi: f64,
}

impl FrozenDirac {
    pub fn atom_positions(&self, t: f64) -> Vec<f64> {
        self.atoms.iter().map(|a| a.x + self.cphi * t).collect()
    }

    /// Regular mass plus the frozen atom masses.
    pub fn total_mass(&self, t: f64) -> Result<f64> {
        Ok(self.regular.mass(t)? + self.atoms.iter().map(|a| a.mass).sum::<f64>())
    }
}

pub fn frozen_dirac_solution(
    u0: &RadonMeasure,
    flux: &Flux,
    cfg: &SolverConfig,
) -> Result<FrozenDirac> {
    if !u0.grid().same_as(&cfg.grid) {
        return Err(Error::GridMismatch("datum and solver grids differ".into()));
    }
    let mut regular = solver::run(u0.density(), flux, cfg)?;
    regular.datum_id = "frozen-dirac regular part".into();
    Ok(FrozenDirac {
        regular,
        atoms: u0.atoms().to_vec(),
        cphi: flux.cphi(),
    })
}
