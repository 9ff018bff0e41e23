use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::measure::{total_variation, Atom, Grid, TestFunction};
use crate::solver::GridSolution;

/// Kružkov pair `E(u) = |u − k|`, `F(u) = sgn(u − k)(φ(u) − φ(k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KruzkovPair {
    pub k: f64,
}

impl KruzkovPair {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!(
                "entropy level must be nonnegative, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn entropy(&self, u: f64) -> f64 {
        (u - self.k).abs()
    }

    pub fn entropy_flux(&self, flux: &Flux, u: f64) -> f64 {
        let d = flux.value(u) - flux.value(self.k);
        if u > self.k {
            d
        } else if u < self.k {
            -d
        } else {
            0.0
        }
    }

    /// Growth constants `(C_E, C_F)`.
    pub fn growth_constants(&self, flux: &Flux) -> (f64, f64) {
        (1.0, flux.cphi())
    }
}

/// Separable test function `ζ(x, t) = ρ(x)·θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceTimeTest {
    pub space: TestFunction,
    pub time: TestFunction,
}

impl SpaceTimeTest {
    /// Upper bound for `sup|ζ| + sup|ζ_x| + sup|ζ_t|`.
    pub fn c1_norm(&self) -> f64 {
        self.space.c1_norm() * self.time.c1_norm()
    }

    /// Default budget `10·dx·TV(u₀ₙ)·T·‖ζ‖_{C¹}`.
    pub fn tolerance(&self, traj: &GridSolution) -> f64 {
        10.0 * traj.grid.dx * total_variation(traj.initial()) * traj.horizon() * self.c1_norm()
    }
}

fn exclusion_half_width(traj: &GridSolution) -> f64 {
    8.0 * traj.grid.dx + traj.level.map_or(0.0, |n| 2.0 / n as f64)
}

fn check_exclusion(traj: &GridSolution, zeta: &SpaceTimeTest, atoms: &[Atom]) -> Result<()> {
    let w = exclusion_half_width(traj);
    let c = traj.flux.cphi();
    let (ta, tb) = (zeta.time.a.max(0.0), zeta.time.b.min(traj.horizon()));
    for a in atoms {
        let p0 = a.x + c * ta;
        let p1 = a.x + c * tb;
        let (lo, hi) = (p0.min(p1) - w, p0.max(p1) + w);
        if zeta.space.a < hi && zeta.space.b > lo {
            return Err(Error::Precondition(format!(
                "test function support [{}, {}] meets the exclusion window around the atom at {}",
                zeta.space.a, zeta.space.b, a.x
            )));
        }
    }
    Ok(())
}

/// Discrete residual of the Kružkov inequality
/// `∫∫ E(u)ζ_t + F(u)ζ_x + ∫ E(u₀)ζ(·, 0) ≥ 0` over the stored snapshots.
///
/// Time derivatives of `θ` enter as difference quotients and space derivatives of `ρ`
/// as edge differences, so constant states give exactly zero.
pub fn kruzkov_residual(
    traj: &GridSolution,
    pair: KruzkovPair,
    zeta: &SpaceTimeTest,
    atoms: &[Atom],
) -> Result<f64> {
    check_exclusion(traj, zeta, atoms)?;
    let g = traj.grid;
    let i0 = g.cell_of(zeta.space.a.max(g.x_min)).unwrap_or(0);
    let i1 = g
        .cell_of(zeta.space.b.min(g.x_max))
        .unwrap_or(g.n_cells - 1);
    let rho: Vec<f64> = (i0..=i1).map(|i| zeta.space.eval(g.center(i))).collect();
    let drho: Vec<f64> = (i0..=i1)
        .map(|i| (zeta.space.eval(g.edge(i + 1)) - zeta.space.eval(g.edge(i))) / g.dx)
        .collect();
    let flux = &traj.flux;
    let moments = |u: &[f64]| {
        let mut a = 0.0;
        let mut b = 0.0;
        for (k, i) in (i0..=i1).enumerate() {
            a += pair.entropy(u[i]) * rho[k];
            b += pair.entropy_flux(flux, u[i]) * drho[k];
        }
        (a * g.dx, b * g.dx)
    };
    let snaps = &traj.snapshots;
    let vals: Vec<(f64, f64, f64)> = snaps
        .iter()
        .map(|s| {
            let (a, b) = moments(&s.u);
            (zeta.time.eval(s.t), a, b)
        })
        .collect();
    let mut r = vals[0].0 * vals[0].1;
    for j in 0..snaps.len() - 1 {
        let dt = snaps[j + 1].t - snaps[j].t;
        let (th0, a0, b0) = vals[j];
        let (th1, a1, b1) = vals[j + 1];
        r += (th1 - th0) * 0.5 * (a0 + a1) + dt * 0.5 * (th0 * b0 + th1 * b1);
    }
    Ok(r)
}

/// Random separable test functions whose spatial support avoids the atom exclusion
/// windows; about half of them are nonzero at `t = 0`.
pub fn random_test_functions<R: Rng>(
    rng: &mut R,
    grid: &Grid,
    horizon: f64,
    atoms: &[Atom],
    cphi: f64,
    exclusion: f64,
    count: usize,
) -> Result<Vec<SpaceTimeTest>> {
    let span = grid.x_max - grid.x_min;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::Precondition(
                "no admissible test-function support found".into(),
            ));
        }
        let half = span * rng.gen_range(0.02..0.15);
        let centre = rng.gen_range(grid.x_min + half..grid.x_max - half);
        let space = TestFunction::new(
            centre - half,
            centre - half * rng.gen_range(0.2..0.8),
            centre + half * rng.gen_range(0.0..0.2),
            centre + half,
            rng.gen_range(0.5..2.0),
        )?;
        let starts_at_zero = rng.gen_bool(0.5);
        let (ta, tb) = if starts_at_zero {
            (-0.5 * horizon, rng.gen_range(0.3..0.95) * horizon)
        } else {
            let ta = rng.gen_range(0.0..0.6) * horizon;
            (ta, ta + rng.gen_range(0.1..0.39) * horizon)
        };
        let len = tb - ta;
        let time = TestFunction::new(ta, ta + 0.3 * len, tb - 0.3 * len, tb, 1.0)?;
        let blocked = atoms.iter().any(|a| {
            let p0 = a.x + cphi * ta.max(0.0);
            let p1 = a.x + cphi * tb;
            space.a < p0.max(p1) + exclusion && space.b > p0.min(p1) - exclusion
        });
        if !blocked {
            out.push(SpaceTimeTest { space, time });
        }
    }
    Ok(out)
}

/// Exclusion half-width `8dx + 2/n` used for a run.
pub fn exclusion_width(traj: &GridSolution) -> f64 {
    exclusion_half_width(traj)
}
