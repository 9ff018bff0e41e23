use serde::Serialize;

use super::report::Series;
use super::sampled::SampledSolution;
use crate::error::{Error, Result};
use crate::flux::{Flux, FluxKind};
use crate::measure::{l1_distance, shift_cells, total_variation};
use crate::solver::{self, GridSolution, SolverConfig};

/// Relative slack of the blow-up lower bound.
pub const BLOWUP_RELATIVE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AronsonBenilanReport {
    pub t1: f64,
    pub t2: f64,
    /// Smallest `rhs − lhs` over the sampled points, in flux units.
    pub worst_margin: f64,
    pub worst_x: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `rhs − lhs` at each sampled point.
    pub margins: Vec<f64>,
}

/// Cellwise one-sided time bound
/// `φ̃(u(t2)) + K/H ≤ (t2/t1)^H [φ̃(u(t1)) + K/H]` (or `φ̃(u) − K ln t` nonincreasing
/// when `H = 0`) in the frame moving with `Cφ`.
///
/// `xs` are positions at `t1`; the tolerance is `5·dx·M·(1 + (t2/t1)^H)` for discrete
/// solutions and `10⁻¹²·(1 + (t2/t1)^H)` otherwise.
pub fn aronson_benilan_check<S: SampledSolution + ?Sized>(
    sol: &S,
    xs: &[f64],
    t1: f64,
    t2: f64,
) -> Result<AronsonBenilanReport> {
    if !(t1 > 0.0 && t2 >= t1) {
        return Err(Error::Domain(format!("need 0 < t1 ≤ t2, got {t1}, {t2}")));
    }
    let flux = sol.flux();
    let pair = flux.structural_constants().h2.ok_or_else(|| {
        Error::UnsupportedFlux("Aronson–Bénilan check needs an (H, K) pair".into())
    })?;
    let centered: FluxKind = flux.kind().centered();
    let c = flux.cphi();
    let ratio = t2 / t1;
    let factor = ratio.powf(pair.h);
    let mut worst = f64::INFINITY;
    let mut worst_x = f64::NAN;
    let mut margins = Vec::with_capacity(xs.len());
    for &x in xs {
        let u1 = sol.regular(x, t1)?;
        let u2 = sol.regular(x + c * (t2 - t1), t2)?;
        let (p1, p2) = (centered.value(u1), centered.value(u2));
        let margin = if pair.h == 0.0 {
            (p1 - pair.k * t1.ln()) - (p2 - pair.k * t2.ln())
        } else {
            let s = pair.k / pair.h;
            factor * (p1 + s) - (p2 + s)
        };
        margins.push(margin);
        if margin < worst {
            worst = margin;
            worst_x = x;
        }
    }
    let tolerance = match sol.spacing() {
        Some(dx) => 5.0 * dx * flux.lipschitz() * (1.0 + factor),
        None => 1e-12 * (1.0 + factor),
    };
    Ok(AronsonBenilanReport {
        t1,
        t2,
        worst_margin: worst,
        worst_x,
        tolerance,
        pass: worst >= -tolerance,
        margins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupPoint {
    pub x: f64,
    /// `Ψ⁻¹(Ψ(∞) − |x − x0|/t)`, `None` when the argument is not positive.
    pub bound: Option<f64>,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub x0: f64,
    pub t: f64,
    /// `+1` when the profile is approached from the right.
    pub side: i8,
    pub points: Vec<BlowupPoint>,
    pub pass: bool,
    pub relative_tolerance: f64,
}

/// Side from which `u_r` blows up: right when `φ' > Cφ`.
fn blowup_side(flux: &Flux) -> i8 {
    let centered = flux.kind().centered();
    if centered.d1(1.0) >= 0.0 {
        1
    } else {
        -1
    }
}

/// Default approach sequence `x0 ± Ψ(∞)·t·2^{-k}`, `k = 1..=6`.
pub fn dyadic_approach(flux: &Flux, x0: f64, t: f64) -> Result<Vec<f64>> {
    let profile = flux.blowup_profile()?;
    let side = blowup_side(flux) as f64;
    Ok((1..=6)
        .map(|k| x0 + side * profile.psi_inf() * t * 0.5f64.powi(k))
        .collect())
}

/// Lower bound `u_r(x̄, t) ≥ Ψ⁻¹(Ψ(∞) − |x̄ − x0|/t)` next to an atom at `x0`.
///
/// `xs` are positions in the frame moving with `Cφ`; `None` selects the dyadic
/// approach sequence. A point passes when `u_r ≥ (1 − 0.1)·bound`.
pub fn blowup_bound_check<S: SampledSolution + ?Sized>(
    sol: &S,
    x0: f64,
    t: f64,
    xs: Option<&[f64]>,
) -> Result<BlowupReport> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("blow-up check needs t > 0, got {t}")));
    }
    let flux = sol.flux();
    let profile = flux.blowup_profile()?;
    let side = blowup_side(flux);
    let xs = match xs {
        Some(v) => v.to_vec(),
        None => dyadic_approach(flux, x0, t)?,
    };
    let shift = flux.cphi() * t;
    let mut points = Vec::with_capacity(xs.len());
    for x in xs {
        let z = profile.psi_inf() - (x - x0).abs() / t;
        let value = sol.regular(x + shift, t)?;
        let bound = if z > 0.0 {
            Some(profile.psi_inv(z)?)
        } else {
            None
        };
        let pass = bound.map_or(true, |b| value >= (1.0 - BLOWUP_RELATIVE_TOLERANCE) * b);
        points.push(BlowupPoint {
            x,
            bound,
            value,
            pass,
        });
    }
    Ok(BlowupReport {
        x0,
        t,
        side,
        pass: points.iter().all(|p| p.pass),
        points,
        relative_tolerance: BLOWUP_RELATIVE_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscriminationReport {
    pub constructed: BlowupReport,
    pub witness: BlowupReport,
    /// The constructed solution passes and the witness fails.
    pub discriminates: bool,
}

/// Run the blow-up check on a constructed solution and on a competing witness.
pub fn blowup_discrimination<A, B>(
    constructed: &A,
    witness: &B,
    x0: f64,
    t: f64,
    xs: Option<&[f64]>,
) -> Result<DiscriminationReport>
where
    A: SampledSolution + ?Sized,
    B: SampledSolution + ?Sized,
{
    let constructed = blowup_bound_check(constructed, x0, t, xs)?;
    let witness = blowup_bound_check(witness, x0, t, xs)?;
    Ok(DiscriminationReport {
        discriminates: constructed.pass && !witness.pass,
        constructed,
        witness,
    })
}

/// Windowed sup-norm near `x0 + Cφt` for each level.
pub fn sup_norm_trend(runs: &[&GridSolution], x0: f64, t: f64, half_width: f64) -> Result<Series> {
    let mut ns = Vec::new();
    let mut sups = Vec::new();
    for r in runs {
        let xc = x0 + r.flux.cphi() * t;
        ns.push(r.level.unwrap_or(0) as f64);
        sups.push(r.window_sup(t, xc - half_width, xc + half_width)?);
    }
    Ok(Series::new("windowed sup-norm vs n", ns, sups))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalileanReport {
    pub cphi: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare the run with `φ`, shifted back by `Cφ t`, against the run with `φ − Cφ u`.
///
/// The tolerance is `5(dx + dt)·T·TV(u₀)` with `dt` the step of the uncentered run.
pub fn galilean_shift_check(u0: &[f64], flux: &Flux, cfg: &SolverConfig) -> Result<GalileanReport> {
    if u0.len() != cfg.grid.n_cells {
        return Err(Error::Config("datum does not match the solver grid".into()));
    }
    let c = flux.cphi();
    let centered = Flux::drifted(flux, -c)?;
    let (a, b) = rayon::join(
        || solver::run(u0, flux, cfg),
        || solver::run(u0, &centered, cfg),
    );
    let (a, b) = (a?, b?);
    let dx = cfg.grid.dx;
    let dt = if flux.lipschitz() > 0.0 {
        cfg.cfl * dx / flux.lipschitz()
    } else {
        cfg.horizon
    };
    let tolerance = 5.0 * (dx + dt) * cfg.horizon * total_variation(u0);
    let mut times = Vec::new();
    let mut distances = Vec::new();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let (back, _) = shift_cells(&sa.u, -c * sa.t / dx);
        times.push(sa.t);
        distances.push(l1_distance(&back, &sb.u, dx));
    }
    let worst = distances.iter().copied().fold(0.0, f64::max);
    Ok(GalileanReport {
        cphi: c,
        times,
        distances,
        tolerance,
        pass: worst <= tolerance,
    })
}
