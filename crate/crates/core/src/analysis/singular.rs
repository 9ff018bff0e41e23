use serde::Serialize;

use super::sampled::SampledSolution;
use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::measure::{total_mass, Atom, RadonMeasure};
use crate::solver::GridSolution;

/// Atoms count as dissolved once their estimated mass drops below this fraction.
pub const WAITING_TIME_MASS_FRACTION: f64 = 0.02;
/// Half-width of the window around an atom used for sup-norms.
pub const SUP_WINDOW_HALF_WIDTH: f64 = 0.1;
/// Sup-norms count as bounded in `n` when the finer level exceeds the coarser by at
/// most this factor (or stays below the mass of the atoms spread over the window); an
/// atom of mass `c` at level `n` has height `n·c/2`.
pub const SUP_GROWTH_LIMIT: f64 = 1.5;
const OFFSETS: [f64; 3] = [4.0, 8.0, 16.0];

/// Which one-sided limit of `Φ(·, t1, t2)` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxTimeIntegral {
    pub x: f64,
    pub t1: f64,
    pub t2: f64,
    pub value: f64,
    pub side: Side,
    pub shifted: bool,
}

/// First-order Richardson limit `2m(4h) − m(8h)` of values sampled at offsets
/// `4h, 8h, 16h`.
///
/// The third sample only flags a non-monotone sequence whose spread exceeds `0.02·scale`.
fn extrapolate(m: [f64; 3], scale: f64) -> (f64, bool) {
    let d1 = m[1] - m[0];
    let d2 = m[2] - m[1];
    let monotone = d1 * d2 >= 0.0;
    let spread = (m[2] - m[0]).abs().max(d1.abs());
    (2.0 * m[0] - m[1], monotone || spread <= 0.02 * scale)
}

/// One-sided limit `Φ(x∓, t1, t2)` from offsets `{4, 8, 16}·h`.
pub fn flux_time_integral<S: SampledSolution + ?Sized>(
    sol: &S,
    x: f64,
    t1: f64,
    t2: f64,
    side: Side,
) -> Result<FluxTimeIntegral> {
    let h = sol.resolution();
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let mut m = [0.0; 3];
    for (k, o) in OFFSETS.iter().enumerate() {
        m[k] = sol.flux_integral(x + sign * o * h, t1, t2)?;
    }
    let scale = m.iter().fold(t2 - t1, |a, v| a.max(v.abs()));
    Ok(FluxTimeIntegral {
        x,
        t1,
        t2,
        value: extrapolate(m, scale).0,
        side,
        shifted: sol.flux().cphi() != 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularMassEstimate {
    pub value: f64,
    pub offsets: [f64; 3],
    pub raw: [f64; 3],
    pub low_confidence: bool,
}

/// Mass of the atom started at `atom.x`, at time `t`, from the jump of `Φ(·, 0, t)`.
pub fn singular_mass<S: SampledSolution + ?Sized>(
    sol: &S,
    atom: &Atom,
    t: f64,
) -> Result<SingularMassEstimate> {
    let h = sol.resolution();
    let c = atom.mass;
    let mut raw = [0.0; 3];
    let mut offsets = [0.0; 3];
    for (k, o) in OFFSETS.iter().enumerate() {
        let d = o * h;
        offsets[k] = d;
        if t == 0.0 {
            raw[k] = c;
            continue;
        }
        let left = sol.flux_integral(atom.x - d, 0.0, t)?;
        let right = sol.flux_integral(atom.x + d, 0.0, t)?;
        raw[k] = c + left - right;
    }
    let (v, ok) = extrapolate(raw, c);
    Ok(SingularMassEstimate {
        value: v.clamp(0.0, c),
        offsets,
        raw,
        low_confidence: !ok,
    })
}

/// Waiting-time bounds `(lower, upper)`; `upper` is infinite when unavailable.
///
/// The lower bound is `max_l min{T, c_l/sup|φ − Cφu|}`. The upper bound is
/// `(H+1)‖u₀‖/(γ − |K|)` for bounded centered flux with `γ > |K|`, and `0` when the
/// centered flux is unbounded.
pub fn waiting_time_bounds(flux: &Flux, u0: &RadonMeasure, horizon: f64) -> (f64, f64) {
    let sc = flux.structural_constants();
    if !flux.is_bounded_centered() {
        return (0.0, 0.0);
    }
    let lower = u0
        .atoms()
        .iter()
        .map(|a| (a.mass / sc.sup_centered).min(horizon))
        .fold(0.0, f64::max);
    let upper = match sc.h2 {
        Some(pair) if sc.gamma > pair.k.abs() => {
            (pair.h + 1.0) * total_mass(u0) / (sc.gamma - pair.k.abs())
        }
        _ => f64::INFINITY,
    };
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitingTimeReport {
    /// `None` when the horizon is below the lower bound or no time qualifies.
    pub t0_estimate: Option<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub upper_bound_available: bool,
    /// Per-level estimates of the two finest levels agree.
    pub accepted: bool,
    pub within_bounds: Option<bool>,
    pub levels: Vec<u64>,
    pub times: Vec<f64>,
    /// Largest `singular mass / initial atom mass` over atoms, per level and time.
    pub singular_mass: Vec<Vec<f64>>,
    /// Windowed sup-norm near the atoms, per level and time.
    pub sup_norm: Vec<Vec<f64>>,
    pub per_level_estimates: Vec<Option<f64>>,
    pub note: String,
}

/// First time after which `ok` holds at every later time.
fn settle_time(times: &[f64], ok: &[bool]) -> Option<f64> {
    let last_bad = ok.iter().rposition(|b| !b);
    match last_bad {
        None => times.first().copied(),
        Some(i) if i + 1 < times.len() => Some(times[i + 1]),
        _ => None,
    }
}

/// Estimate the waiting time from runs at three or more regularization levels.
pub fn estimate_waiting_time(
    runs: &[&GridSolution],
    u0: &RadonMeasure,
) -> Result<WaitingTimeReport> {
    if runs.len() < 3 {
        return Err(Error::Precondition(format!(
            "waiting-time estimation needs at least 3 levels, got {}",
            runs.len()
        )));
    }
    let mut runs: Vec<&GridSolution> = runs.to_vec();
    if runs.iter().any(|r| r.level.is_none()) {
        return Err(Error::Precondition(
            "runs must carry a regularization level".into(),
        ));
    }
    runs.sort_by_key(|r| r.level);
    let flux = &runs[0].flux;
    let horizon = runs[0].horizon();
    let times = runs[0].times();
    if runs.iter().any(|r| r.times() != times) {
        return Err(Error::GridMismatch("runs must share snapshot times".into()));
    }
    let (lower, upper) = waiting_time_bounds(flux, u0, horizon);
    let levels: Vec<u64> = runs.iter().map(|r| r.level.unwrap_or(0)).collect();
    let atoms = u0.atoms();
    let cphi = flux.cphi();

    let mut singular = Vec::with_capacity(runs.len());
    let mut sups = Vec::with_capacity(runs.len());
    for r in &runs {
        let mut sm = Vec::with_capacity(times.len());
        let mut sp = Vec::with_capacity(times.len());
        for &t in &times {
            let mut worst: f64 = 0.0;
            let mut sup: f64 = 0.0;
            for a in atoms {
                worst = worst.max(singular_mass(*r, a, t)?.value / a.mass);
                let xc = a.x + cphi * t;
                sup = sup.max(r.window_sup(
                    t,
                    xc - SUP_WINDOW_HALF_WIDTH,
                    xc + SUP_WINDOW_HALF_WIDTH,
                )?);
            }
            sm.push(worst);
            sp.push(sup);
        }
        singular.push(sm);
        sups.push(sp);
    }
    let per_level: Vec<Option<f64>> = singular
        .iter()
        .map(|sm| {
            let ok: Vec<bool> = sm.iter().map(|v| *v < WAITING_TIME_MASS_FRACTION).collect();
            settle_time(&times, &ok)
        })
        .collect();
    let top = runs.len() - 1;
    // a dissolved atom spread over the window sets the floor for "bounded"
    let floor = atoms.iter().map(|a| a.mass).sum::<f64>() / (2.0 * SUP_WINDOW_HALF_WIDTH);
    let bounded: Vec<bool> = (0..times.len())
        .map(|j| sups[top][j] <= SUP_GROWTH_LIMIT * sups[top - 1][j].max(floor))
        .collect();
    let t_bounded = settle_time(&times, &bounded);
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let mut note = String::new();
    let estimate = if lower >= horizon {
        note.push_str("t0 >= T: horizon below the lower bound");
        None
    } else {
        match (per_level[top], t_bounded) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => {
                note.push_str("singular mass or sup-norms do not settle before T");
                None
            }
        }
    };
    let accepted = match (per_level[top], per_level[top - 1], estimate) {
        (Some(a), Some(b), Some(_)) => (a - b).abs() <= (0.05 * a).max(2.0 * spacing),
        _ => false,
    };
    if estimate.is_some() && !accepted {
        note.push_str("finest two levels disagree");
    }
    let upper_available = upper.is_finite();
    if !upper_available {
        note.push_str(if note.is_empty() { "" } else { "; " });
        note.push_str("upper bound unavailable");
    }
    let within_bounds = estimate.map(|e| e >= lower * 0.95 && e <= upper * 1.05);
    Ok(WaitingTimeReport {
        t0_estimate: estimate,
        lower_bound: lower,
        upper_bound: upper,
        upper_bound_available: upper_available,
        accepted,
        within_bounds,
        levels,
        times,
        singular_mass: singular,
        sup_norm: sups,
        per_level_estimates: per_level,
        note,
    })
}

/// Lebesgue measure of `{x : u_n(x, t) > threshold(n)}` for each run.
pub fn support_nullity_diagnostic<F: Fn(u64) -> f64>(
    runs: &[&GridSolution],
    t: f64,
    threshold: F,
) -> Result<Vec<(u64, f64)>> {
    runs.iter()
        .map(|r| {
            let n = r.level.unwrap_or(0);
            let thr = threshold(n);
            let s = r.snapshot(t)?;
            let count = s.u.iter().filter(|v| **v > thr).count();
            Ok((n, count as f64 * r.grid.dx))
        })
        .collect()
}
