//! Explicit conservative finite-volume scheme with monotone numerical fluxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{FlowDirection, Flux};
use crate::measure::{self, Grid, RadonMeasure};
use crate::quad::neumaier_sum;

pub const DEFAULT_CFL: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NumericalFlux {
    #[default]
    UpwindGodunov,
    EngquistOsher,
}

/// A point `x + speed·t` at which the time integral of the interface flux is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: Grid,
    pub cfl: f64,
    pub numerical_flux: NumericalFlux,
    pub horizon: f64,
    /// Sorted times in `[0, T]`; `0` and `T` are always stored.
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub probes: Vec<Probe>,
}

impl SolverConfig {
    pub fn new(grid: Grid, horizon: f64) -> Self {
        Self {
            grid,
            cfl: DEFAULT_CFL,
            numerical_flux: NumericalFlux::default(),
            horizon,
            snapshot_times: vec![0.0, horizon],
            probes: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// Snapshots every `horizon/count`, plus any `extra` times.
    pub fn with_uniform_snapshots(mut self, count: usize, extra: &[f64]) -> Self {
        let mut times: Vec<f64> = (0..=count)
            .map(|k| self.horizon * k as f64 / count as f64)
            .collect();
        times.extend_from_slice(extra);
        self.snapshot_times = times;
        self
    }

    pub fn with_probes(mut self, probes: Vec<Probe>) -> Self {
        self.probes = probes;
        self
    }

    pub fn with_numerical_flux(mut self, nf: NumericalFlux) -> Self {
        self.numerical_flux = nf;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    fn normalized_times(&self) -> Result<Vec<f64>> {
        let mut times = self.snapshot_times.clone();
        times.push(0.0);
        times.push(self.horizon);
        if times
            .iter()
            .any(|t| !t.is_finite() || *t < 0.0 || *t > self.horizon * (1.0 + 1e-12))
        {
            return Err(Error::Config(format!(
                "snapshot times must lie in [0, {}]",
                self.horizon
            )));
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * self.horizon.max(1.0));
        Ok(times)
    }

    pub fn validate(&self, flux: &Flux) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1), got {}",
                self.cfl
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let m = flux.lipschitz();
        if m > 0.0 && self.cfl * self.grid.dx / m < 1e-300 {
            return Err(Error::Config("time step underflows".into()));
        }
        self.normalized_times().map(|_| ())
    }
}

/// Godunov or Engquist–Osher flux `F(uL, uR)`.
pub fn numerical_flux(flux: &Flux, nf: NumericalFlux, ul: f64, ur: f64) -> f64 {
    let (ul, ur) = (ul.max(0.0), ur.max(0.0));
    match flux.direction() {
        FlowDirection::Increasing => flux.value(ul),
        FlowDirection::Decreasing => flux.value(ur),
        FlowDirection::General => match nf {
            NumericalFlux::UpwindGodunov => godunov_general(flux, ul, ur),
            NumericalFlux::EngquistOsher => eo_general(flux, ul, ur),
        },
    }
}

fn godunov_general(flux: &Flux, ul: f64, ur: f64) -> f64 {
    let (lo, hi) = if ul <= ur { (ul, ur) } else { (ur, ul) };
    let mut vals = vec![flux.value(lo), flux.value(hi)];
    vals.extend(
        flux.kind()
            .critical_points(lo, hi)
            .into_iter()
            .map(|c| flux.value(c)),
    );
    if ul <= ur {
        vals.into_iter().fold(f64::INFINITY, f64::min)
    } else {
        vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(∫_0^u max(φ', 0), ∫_0^u min(φ', 0))` using the sign-change points of `φ'`.
fn eo_parts(flux: &Flux, u: f64) -> (f64, f64) {
    let mut pts = vec![0.0];
    pts.extend(flux.kind().critical_points(0.0, u));
    pts.push(u);
    let (mut pos, mut neg) = (0.0, 0.0);
    for w in pts.windows(2) {
        let d = flux.value(w[1]) - flux.value(w[0]);
        if d > 0.0 {
            pos += d;
        } else {
            neg += d;
        }
    }
    (pos, neg)
}

fn eo_general(flux: &Flux, ul: f64, ur: f64) -> f64 {
    eo_parts(flux, ul).0 + eo_parts(flux, ur).1
}

fn max_dt(flux: &Flux, dx: f64, cfl: f64) -> f64 {
    let m = flux.lipschitz();
    if m > 0.0 {
        cfl * dx / m
    } else {
        f64::INFINITY
    }
}

/// One explicit step `uᵢ − (dt/dx)(F_{i+½} − F_{i−½})` with zero inflow at both ends.
pub fn step(
    u: &[f64],
    flux: &Flux,
    nf: NumericalFlux,
    dx: f64,
    dt: f64,
    cfl: f64,
) -> Result<Vec<f64>> {
    let limit = max_dt(flux, dx, cfl);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt: limit });
    }
    let mut st = Stepper::new(u.to_vec(), flux.clone(), nf, dx);
    st.full_range();
    st.advance(dt);
    Ok(st.u)
}

/// Stateful stepper restricted to the active support.
pub(crate) struct Stepper {
    pub u: Vec<f64>,
    flux: Flux,
    nf: NumericalFlux,
    dx: f64,
    f: Vec<f64>,
    lo: usize,
    hi: usize,
    /// Interface fluxes are `φ(u_left)` when `φ` is nondecreasing.
    upwind: bool,
}

impl Stepper {
    pub fn new(u: Vec<f64>, flux: Flux, nf: NumericalFlux, dx: f64) -> Self {
        let n = u.len();
        let first = u.iter().position(|v| *v != 0.0);
        let last = u.iter().rposition(|v| *v != 0.0);
        let (lo, hi) = match (first, last) {
            (Some(a), Some(b)) => (a, b + 1),
            _ => (0, 0),
        };
        let upwind = flux.direction() == FlowDirection::Increasing;
        Self {
            u,
            flux,
            nf,
            dx,
            f: vec![0.0; n + 1],
            lo,
            hi,
            upwind,
        }
    }

    pub fn full_range(&mut self) {
        self.lo = 0;
        self.hi = self.u.len();
    }

    /// Interface flux `F_j` between cells `j − 1` and `j` from the last step.
    pub fn interface_flux(&self, j: usize) -> f64 {
        self.f[j]
    }

    pub fn advance(&mut self, dt: f64) {
        let n = self.u.len();
        if self.hi <= self.lo {
            return;
        }
        // grow the active window by one cell on each side; it never shrinks
        let lo = self.lo.saturating_sub(1);
        let hi = (self.hi + 1).min(n);
        let u = &mut self.u;
        let f = &mut self.f;
        let at = |u: &[f64], i: isize| {
            if i < 0 || i as usize >= n {
                0.0
            } else {
                u[i as usize]
            }
        };
        if self.upwind {
            for j in lo..=hi {
                f[j] = if j == 0 {
                    0.0
                } else {
                    self.flux.value(u[j - 1])
                };
            }
        } else {
            for j in lo..=hi {
                f[j] = numerical_flux(
                    &self.flux,
                    self.nf,
                    at(u, j as isize - 1),
                    at(u, j as isize),
                );
            }
        }
        let lambda = dt / self.dx;
        for i in lo..hi {
            u[i] -= lambda * (f[i + 1] - f[i]);
        }
        self.lo = lo;
        self.hi = hi;
    }

    pub fn active(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }
}

/// Per-step records of discrete mass, minimum and maximum.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Diagnostics {
    /// `max_k |mass_k − mass_0| / mass_0`.
    pub fn max_relative_mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        if m0 == 0.0 {
            return self.mass.iter().fold(0.0, |a, m| a.max(m.abs()));
        }
        self.mass
            .iter()
            .fold(0.0, |a, m| a.max((m - m0).abs() / m0))
    }

    /// Largest per-step relative change in mass.
    pub fn max_step_mass_drift(&self) -> f64 {
        let m0 = self
            .mass
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(f64::MIN_POSITIVE);
        self.mass
            .windows(2)
            .fold(0.0, |a, w| a.max((w[1] - w[0]).abs() / m0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

/// Cumulative `∫_0^t F dt` through the interface nearest `x + speed·t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub probe: Probe,
    /// Values at each snapshot time.
    pub cumulative: Vec<f64>,
}

/// Trajectory of cell averages for one regularization level.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub level: Option<u64>,
    pub datum_id: String,
    pub grid: Grid,
    pub flux: Flux,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub probes: Vec<ProbeRecord>,
    pub steps: usize,
    pub initial_max: f64,
}

impl GridSolution {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Index of the snapshot at time `t` (within `1e-9·max(T, 1)`).
    pub fn snapshot_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.horizon().max(1.0);
        self.snapshots.iter().position(|s| (s.t - t).abs() <= tol)
    }

    pub fn snapshot(&self, t: f64) -> Result<&Snapshot> {
        self.snapshot_index(t)
            .map(|i| &self.snapshots[i])
            .ok_or_else(|| Error::Domain(format!("no snapshot stored at t = {t}")))
    }

    pub fn horizon(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0].u
    }

    /// Cell value at `x` in the snapshot at `t`; 0 outside the grid.
    pub fn value_at(&self, x: f64, t: f64) -> Result<f64> {
        let s = self.snapshot(t)?;
        Ok(self.grid.cell_of(x).map_or(0.0, |i| s.u[i]))
    }

    pub fn mass(&self, t: f64) -> Result<f64> {
        Ok(neumaier_sum(self.snapshot(t)?.u.iter().copied()) * self.grid.dx)
    }

    /// `∫_{t1}^{t2}` of the interface flux at a recorded probe.
    pub fn probe_integral(&self, x: f64, speed: f64, t1: f64, t2: f64) -> Option<f64> {
        let rec = self
            .probes
            .iter()
            .find(|r| (r.probe.x - x).abs() <= 1e-12 * (1.0 + x.abs()) && r.probe.speed == speed)?;
        let (i1, i2) = (self.snapshot_index(t1)?, self.snapshot_index(t2)?);
        Some(rec.cumulative[i2] - rec.cumulative[i1])
    }

    /// Largest cell value at the snapshot `t` over the window `[a, b]`.
    pub fn window_sup(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        let s = self.snapshot(t)?;
        let i0 = self.grid.cell_of(a.max(self.grid.x_min)).unwrap_or(0);
        let i1 = self
            .grid
            .cell_of(b.min(self.grid.x_max))
            .unwrap_or(self.grid.n_cells - 1);
        Ok(s.u[i0..=i1].iter().copied().fold(0.0, f64::max))
    }
}

/// Extreme characteristic speeds `min/max φ'` over `[0, u_max]`.
pub fn speed_range(flux: &Flux, u_max: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut pts: Vec<f64> = (0..=512).map(|k| u_max * k as f64 / 512.0).collect();
    pts.extend(flux.kind().critical_points(0.0, u_max));
    for u in pts {
        let d = flux.d1(u);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Check that waves leaving the support of `u0` cannot reach the boundary by `T`.
pub fn check_padding(u0: &[f64], flux: &Flux, grid: &Grid, horizon: f64) -> Result<()> {
    let first = u0.iter().position(|v| *v != 0.0);
    let last = u0.iter().rposition(|v| *v != 0.0);
    let (Some(a), Some(b)) = (first, last) else {
        return Ok(());
    };
    let u_max = u0.iter().copied().fold(0.0, f64::max);
    let (s_min, s_max) = speed_range(flux, u_max);
    let m = flux.lipschitz();
    // numerical diffusion of the first-order scheme spreads fronts by about √(dx·M·T)
    let blur = 8.0 * (grid.dx * m * horizon).sqrt() + 8.0 * grid.dx;
    let need_left = (-s_min).max(0.0) * horizon + if s_min < 0.0 { blur } else { 0.0 };
    let need_right = s_max.max(0.0) * horizon + if s_max > 0.0 { blur } else { 0.0 };
    let left_room = grid.edge(a) - grid.x_min;
    let right_room = grid.x_max - grid.edge(b + 1);
    if left_room < need_left || right_room < need_right {
        return Err(Error::Domain(format!(
            "grid padding insufficient: need {need_left:.4} left and {need_right:.4} right, have {left_room:.4} and {right_room:.4}"
        )));
    }
    Ok(())
}

/// Run the scheme from `u0n` to the horizon.
pub fn run(u0n: &[f64], flux: &Flux, cfg: &SolverConfig) -> Result<GridSolution> {
    run_labelled(u0n, flux, cfg, None, "density")
}

/// Regularize the atoms of `u0` at level `n` and run.
pub fn run_measure(
    u0: &RadonMeasure,
    n: u64,
    flux: &Flux,
    cfg: &SolverConfig,
) -> Result<GridSolution> {
    if !u0.grid().same_as(&cfg.grid) {
        return Err(Error::GridMismatch("datum and solver grids differ".into()));
    }
    let u0n = measure::dirac_regularize(u0, n)?;
    run_labelled(&u0n, flux, cfg, Some(n), &format!("measure@n={n}"))
}

pub fn run_labelled(
    u0n: &[f64],
    flux: &Flux,
    cfg: &SolverConfig,
    level: Option<u64>,
    datum_id: &str,
) -> Result<GridSolution> {
    cfg.validate(flux)?;
    if u0n.len() != cfg.grid.n_cells {
        return Err(Error::GridMismatch(format!(
            "datum has {} cells, grid has {}",
            u0n.len(),
            cfg.grid.n_cells
        )));
    }
    if u0n.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidMeasure(
            "initial density must be finite and nonnegative".into(),
        ));
    }
    check_padding(u0n, flux, &cfg.grid, cfg.horizon)?;
    let times = cfg.normalized_times()?;
    let grid = cfg.grid;
    let dt_max = max_dt(flux, grid.dx, cfg.cfl);
    let mut st = Stepper::new(u0n.to_vec(), flux.clone(), cfg.numerical_flux, grid.dx);

    let mut diagnostics = Diagnostics::default();
    let record = |d: &mut Diagnostics, t: f64, u: &[f64], lo: usize, hi: usize| {
        let slice = &u[lo..hi.max(lo)];
        d.t.push(t);
        d.mass.push(neumaier_sum(slice.iter().copied()) * grid.dx);
        d.min.push(slice.iter().copied().fold(
            if lo > 0 || hi < u.len() {
                0.0
            } else {
                f64::INFINITY
            },
            f64::min,
        ));
        d.max.push(slice.iter().copied().fold(0.0, f64::max));
    };
    let (lo, hi) = st.active();
    record(&mut diagnostics, 0.0, &st.u, lo, hi);

    let mut probes: Vec<ProbeRecord> = cfg
        .probes
        .iter()
        .map(|p| ProbeRecord {
            probe: *p,
            cumulative: vec![0.0],
        })
        .collect();
    let mut running = vec![0.0f64; probes.len()];
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        u: st.u.clone(),
    }];
    let mut t = 0.0;
    let mut steps = 0usize;
    for &target in times.iter().skip(1) {
        while t < target {
            let mut dt = dt_max.min(target - t);
            // avoid a sliver step just before the snapshot
            if target - t - dt < 1e-9 * dt {
                dt = target - t;
            }
            st.advance(dt);
            for (k, rec) in probes.iter().enumerate() {
                let x = rec.probe.x + rec.probe.speed * t;
                let j = grid.nearest_edge(x);
                let mut flow = st.interface_flux(j);
                if rec.probe.speed != 0.0 {
                    let left = if j > 0 { st.u[j - 1] } else { 0.0 };
                    let right = if j < grid.n_cells { st.u[j] } else { 0.0 };
                    flow -= rec.probe.speed * 0.5 * (left + right);
                }
                running[k] += dt * flow;
            }
            t = if dt == target - t { target } else { t + dt };
            steps += 1;
            let (lo, hi) = st.active();
            record(&mut diagnostics, t, &st.u, lo, hi);
        }
        snapshots.push(Snapshot {
            t: target,
            u: st.u.clone(),
        });
        for (k, rec) in probes.iter_mut().enumerate() {
            rec.cumulative.push(running[k]);
        }
    }
    let initial_max = u0n.iter().copied().fold(0.0, f64::max);
    Ok(GridSolution {
        level,
        datum_id: datum_id.to_string(),
        grid,
        flux: flux.clone(),
        snapshots,
        diagnostics,
        probes,
        steps,
        initial_max,
    })
}

/// L¹ distance between two runs, recorded every step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Largest increase between consecutive steps.
    pub max_increase: f64,
    pub nonincreasing: bool,
    /// `max u_a(t) ≤ max u_a(0)` and `min u_a(t) ≥ 0` at every step, for both runs.
    pub max_principle: bool,
}

/// Advance both data in lockstep and record `‖u_a − u_b‖_{L¹}`.
pub fn l1_contraction_check(
    u0a: &[f64],
    u0b: &[f64],
    flux: &Flux,
    cfg: &SolverConfig,
) -> Result<ContractionReport> {
    cfg.validate(flux)?;
    if u0a.len() != u0b.len() || u0a.len() != cfg.grid.n_cells {
        return Err(Error::GridMismatch(
            "both data must live on the solver grid".into(),
        ));
    }
    check_padding(u0a, flux, &cfg.grid, cfg.horizon)?;
    check_padding(u0b, flux, &cfg.grid, cfg.horizon)?;
    let dx = cfg.grid.dx;
    let dt_max = max_dt(flux, dx, cfg.cfl);
    let mut a = Stepper::new(u0a.to_vec(), flux.clone(), cfg.numerical_flux, dx);
    let mut b = Stepper::new(u0b.to_vec(), flux.clone(), cfg.numerical_flux, dx);
    let (amax, bmax) = (
        u0a.iter().copied().fold(0.0, f64::max),
        u0b.iter().copied().fold(0.0, f64::max),
    );
    let mut times = vec![0.0];
    let mut distances = vec![measure::l1_distance(u0a, u0b, dx)];
    let mut max_principle = true;
    let mut t = 0.0;
    while t < cfg.horizon {
        let dt = dt_max.min(cfg.horizon - t);
        a.advance(dt);
        b.advance(dt);
        t = if dt == cfg.horizon - t {
            cfg.horizon
        } else {
            t + dt
        };
        times.push(t);
        distances.push(measure::l1_distance(&a.u, &b.u, dx));
        max_principle &= a.u.iter().all(|v| *v >= 0.0 && *v <= amax)
            && b.u.iter().all(|v| *v >= 0.0 && *v <= bmax);
    }
    let max_increase = distances
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ContractionReport {
        times,
        nonincreasing: max_increase <= 1e-10,
        max_increase,
        distances,
        max_principle,
    })
}
