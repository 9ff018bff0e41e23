//! Nonnegative Radon measures on the line: a density of cell averages on a
//! uniform grid plus finitely many Dirac atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `n_cells` cells on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min || n_cells == 0 {
            return Err(Error::Domain(format!(
                "invalid grid [{x_min}, {x_max}] with {n_cells} cells"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
        })
    }

    /// Grid with spacing exactly `dx`, extending `x_max` up to a whole number of cells.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Domain(format!(
                "grid spacing must be positive, got {dx}"
            )));
        }
        let n = ((x_max - x_min) / dx - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            x_min,
            x_max: x_min + n as f64 * dx,
            n_cells: n,
            dx,
        })
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Left edge of cell `i` (edge `n_cells` is `x_max`).
    #[inline]
    pub fn edge(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Index of the cell containing `x`, if inside the grid.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.x_min || x > self.x_max {
            return None;
        }
        Some((((x - self.x_min) / self.dx).floor() as usize).min(self.n_cells - 1))
    }

    /// Index of the edge nearest to `x`, clamped to the grid.
    pub fn nearest_edge(&self, x: f64) -> usize {
        (((x - self.x_min) / self.dx).round().max(0.0) as usize).min(self.n_cells)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_cells == other.n_cells
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.dx
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }
}

/// A Dirac atom `mass·δ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// Density (cell averages on `grid`) plus atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonMeasure {
    grid: Grid,
    density: Vec<f64>,
    atoms: Vec<Atom>,
}

impl RadonMeasure {
    pub fn new(grid: Grid, density: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if density.len() != grid.n_cells {
            return Err(Error::GridMismatch(format!(
                "density has {} values for a grid of {} cells",
                density.len(),
                grid.n_cells
            )));
        }
        if density.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure(
                "density must be finite and nonnegative".into(),
            ));
        }
        if atoms
            .iter()
            .any(|a| !a.x.is_finite() || !a.mass.is_finite() || a.mass < 0.0)
        {
            return Err(Error::InvalidMeasure(
                "atom masses must be finite and nonnegative".into(),
            ));
        }
        if atoms.windows(2).any(|w| w[1].x <= w[0].x) {
            return Err(Error::InvalidMeasure(
                "atom locations must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            grid,
            density,
            atoms,
        })
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            grid,
            density: vec![0.0; grid.n_cells],
            atoms: Vec::new(),
        }
    }

    pub fn dirac(grid: Grid, x: f64, mass: f64) -> Result<Self> {
        Self::new(grid, vec![0.0; grid.n_cells], vec![Atom { x, mass }])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn regular_mass(&self) -> f64 {
        l1_norm(&self.density, self.grid.dx)
    }

    pub fn singular_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Total variation of the density plus twice each atom mass (the jump up and down).
    pub fn total_variation(&self) -> f64 {
        total_variation(&self.density) + 2.0 * self.singular_mass()
    }
}

/// `∫density + Σ c_l` (midpoint rule).
pub fn total_mass(m: &RadonMeasure) -> f64 {
    m.regular_mass() + m.singular_mass()
}

/// `T_a(m)`: atoms move by `a`; the density is remapped conservatively.
pub fn translate(m: &RadonMeasure, a: f64) -> Result<RadonMeasure> {
    let g = m.grid;
    let atoms: Vec<Atom> = m
        .atoms
        .iter()
        .map(|at| Atom {
            x: at.x + a,
            mass: at.mass,
        })
        .collect();
    if let Some(bad) = atoms.iter().find(|at| at.x < g.x_min || at.x > g.x_max) {
        return Err(Error::Domain(format!(
            "translated atom at {} leaves the grid; extend the domain",
            bad.x
        )));
    }
    let (density, lost) = shift_cells(&m.density, a / g.dx);
    if lost > 1e-14 * (1.0 + m.regular_mass() / g.dx) {
        return Err(Error::Domain(format!(
            "translated density leaves the grid (lost {:e}); extend the domain",
            lost * g.dx
        )));
    }
    RadonMeasure::new(g, density, atoms)
}

/// Shift cell averages by `s` cells, splitting each cell between the two it lands on.
///
/// Returns the shifted values and the sum of values pushed off the grid.
pub fn shift_cells(values: &[f64], s: f64) -> (Vec<f64>, f64) {
    let n = values.len() as i64;
    let whole = s.floor();
    let frac = s - whole;
    let k = whole as i64;
    let mut out = vec![0.0; values.len()];
    let mut lost = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (j, w) in [(i as i64 + k, 1.0 - frac), (i as i64 + k + 1, frac)] {
            if w == 0.0 {
                continue;
            }
            if (0..n).contains(&j) {
                out[j as usize] += w * v;
            } else {
                lost += w * v;
            }
        }
    }
    (out, lost)
}

/// `⟨m, ρ⟩ = Σ density_i ρ(x_i) dx + Σ c_l ρ(x_l)`.
pub fn pair(m: &RadonMeasure, rho: &TestFunction) -> f64 {
    let g = &m.grid;
    let dens: f64 = m
        .density
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| v * rho.eval(g.center(i)))
        .sum();
    dens * g.dx + m.atoms.iter().map(|a| a.mass * rho.eval(a.x)).sum::<f64>()
}

/// Replace each atom by a rectangular pulse of width `2/n` and height `n·c/2`.
///
/// Pulse ends are snapped to the nearest cell edges and the height adjusted so
/// that the discrete mass of each pulse is exactly its atom mass.
pub fn dirac_regularize(m: &RadonMeasure, n: u64) -> Result<Vec<f64>> {
    let g = m.grid;
    if n == 0 {
        return Err(Error::Domain(
            "regularization level must be positive".into(),
        ));
    }
    let half = 1.0 / n as f64;
    if g.dx > 0.5 * half * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!(
            "dx = {} cannot resolve pulses of width 2/{n} with four cells (need dx ≤ {})",
            g.dx,
            0.5 * half
        )));
    }
    let mut out = m.density.clone();
    for a in &m.atoms {
        if a.x - half < g.x_min || a.x + half > g.x_max {
            return Err(Error::Domain(format!(
                "pulse around atom at {} leaves the grid",
                a.x
            )));
        }
        let i0 = g.nearest_edge(a.x - half);
        let i1 = g.nearest_edge(a.x + half);
        let width = (i1 - i0) as f64 * g.dx;
        let height = a.mass / width;
        for v in &mut out[i0..i1] {
            *v += height;
        }
    }
    Ok(out)
}

/// Exact cell averages of `h·χ_[a,b]`.
pub fn indicator_density(grid: &Grid, a: f64, b: f64, h: f64) -> Vec<f64> {
    (0..grid.n_cells)
        .map(|i| {
            let (l, r) = (grid.edge(i), grid.edge(i + 1));
            let overlap = (r.min(b) - l.max(a)).max(0.0);
            h * overlap / grid.dx
        })
        .collect()
}

/// Midpoint samples of `f` at cell centers.
pub fn sample_density<F: Fn(f64) -> f64>(grid: &Grid, f: F) -> Vec<f64> {
    (0..grid.n_cells).map(|i| f(grid.center(i))).collect()
}

pub fn l1_norm(values: &[f64], dx: f64) -> f64 {
    crate::quad::neumaier_sum(values.iter().map(|v| v.abs())) * dx
}

pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    crate::quad::neumaier_sum(a.iter().zip(b).map(|(x, y)| (x - y).abs())) * dx
}

/// Discrete total variation `Σ|u_{i+1} − u_i|`, counting jumps to zero at both ends.
pub fn total_variation(values: &[f64]) -> f64 {
    let inner: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    inner + values.first().map_or(0.0, |v| v.abs()) + values.last().map_or(0.0, |v| v.abs())
}

fn bump_kernel(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else {
        let v = (-1.0 / s).exp();
        (v, v / (s * s))
    }
}

/// C^∞ step from 0 at `s ≤ 0` to 1 at `s ≥ 1`, with its derivative.
pub fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0);
    }
    let (f, df) = bump_kernel(s);
    let (g, dg) = bump_kernel(1.0 - s);
    let den = f + g;
    (f / den, (df * g + f * dg) / (den * den))
}

/// Smooth bump: zero outside `[a, b]`, equal to `amplitude` on `[c, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub b: f64,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(a: f64, c: f64, d: f64, b: f64, amplitude: f64) -> Result<Self> {
        if !(a < c && c <= d && d < b) || !amplitude.is_finite() {
            return Err(Error::Domain(format!(
                "test function needs a < c ≤ d < b, got {a}, {c}, {d}, {b}"
            )));
        }
        Ok(Self {
            a,
            c,
            d,
            b,
            amplitude,
        })
    }

    /// Symmetric bump on `[center − half_width, center + half_width]` with a plateau of half its width.
    pub fn bump(center: f64, half_width: f64, amplitude: f64) -> Result<Self> {
        Self::new(
            center - half_width,
            center - 0.5 * half_width,
            center + 0.5 * half_width,
            center + half_width,
            amplitude,
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        if x <= self.a || x >= self.b {
            (0.0, 0.0)
        } else if x < self.c {
            let w = self.c - self.a;
            let (v, d) = smoothstep((x - self.a) / w);
            (self.amplitude * v, self.amplitude * d / w)
        } else if x <= self.d {
            (self.amplitude, 0.0)
        } else {
            let w = self.b - self.d;
            let (v, d) = smoothstep((self.b - x) / w);
            (self.amplitude * v, -self.amplitude * d / w)
        }
    }

    /// Values and derivatives at the cell centers of `grid`.
    pub fn sample(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        (0..grid.n_cells)
            .map(|i| self.eval_with_derivative(grid.center(i)))
            .unzip()
    }

    /// `sup|ρ| + sup|ρ'|`.
    pub fn c1_norm(&self) -> f64 {
        let ramp = 1.0 / (self.c - self.a).min(self.b - self.d);
        // max of the smoothstep derivative is 2 at s = 1/2
        self.amplitude.abs() * (1.0 + 2.0 * ramp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(-4.0, 4.0, 1024).unwrap()
    }

    #[test]
    fn masses() {
        let g = grid();
        assert_eq!(total_mass(&RadonMeasure::dirac(g, 0.0, 1.0).unwrap()), 1.0);
        let m = RadonMeasure::new(
            g,
            indicator_density(&g, 0.0, 1.0, 1.0),
            vec![Atom { x: 0.0, mass: 0.5 }],
        )
        .unwrap();
        assert_relative_eq!(total_mass(&m), 1.5, max_relative = 1e-14);
    }

    #[test]
    fn pulse_mass_is_one_for_every_level() {
        let g = Grid::new(-1.0, 1.0, 1 << 14).unwrap();
        let m = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
        for k in 1..=12u32 {
            let n = 1u64 << k;
            let u = dirac_regularize(&m, n).unwrap();
            assert_relative_eq!(l1_norm(&u, g.dx), 1.0, max_relative = 1e-14);
            let peak = u.iter().copied().fold(0.0, f64::max);
            assert_relative_eq!(peak, n as f64 / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn pulse_for_n2_and_heavier_atom() {
        let g = Grid::new(-2.0, 2.0, 256).unwrap();
        let u = dirac_regularize(&RadonMeasure::dirac(g, 0.0, 1.0).unwrap(), 2).unwrap();
        for i in 0..g.n_cells {
            let x = g.center(i);
            let expected = if x.abs() < 0.5 { 1.0 } else { 0.0 };
            assert_eq!(u[i], expected);
        }
        let g = Grid::new(-1.0, 1.0, 400).unwrap();
        let u = dirac_regularize(&RadonMeasure::dirac(g, 0.0, 2.0).unwrap(), 10).unwrap();
        assert_relative_eq!(
            u.iter().copied().fold(0.0, f64::max),
            10.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(l1_norm(&u, g.dx), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn pure_density_unchanged_and_coarse_grid_rejected() {
        let g = grid();
        let dens = indicator_density(&g, 1.0, 2.0, 0.3);
        let m = RadonMeasure::new(g, dens.clone(), vec![]).unwrap();
        assert_eq!(dirac_regularize(&m, 64).unwrap(), dens);
        let m = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
        assert!(matches!(
            dirac_regularize(&m, 1024),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn translation() {
        let g = grid();
        let m = RadonMeasure::new(
            g,
            indicator_density(&g, 0.0, 1.0, 1.0),
            vec![Atom { x: 0.25, mass: 1.0 }],
        )
        .unwrap();
        let t = translate(&m, 0.7).unwrap();
        assert_eq!(t.atoms()[0].x, 0.25 + 0.7);
        assert_relative_eq!(total_mass(&t), total_mass(&m), max_relative = 1e-12);
        assert_eq!(translate(&m, 0.0).unwrap(), m);
        assert!(matches!(translate(&m, 3.9), Err(Error::Domain(_))));
    }

    #[test]
    fn pairing_examples() {
        let g = grid();
        let m = RadonMeasure::new(
            g,
            indicator_density(&g, 0.0, 1.0, 1.0),
            vec![Atom { x: 0.0, mass: 1.0 }],
        )
        .unwrap();
        let flat = TestFunction::new(-3.0, -2.0, 2.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(pair(&m, &flat), 2.0, max_relative = 1e-12);
        let far = TestFunction::bump(-3.0, 0.5, 1.0).unwrap();
        assert_eq!(pair(&m, &far), 0.0);
        let d = RadonMeasure::dirac(g, 0.5, 1.0).unwrap();
        let rho = TestFunction::bump(0.5, 0.4, 0.7).unwrap();
        assert_relative_eq!(pair(&d, &rho), 0.7);
    }

    #[test]
    fn test_function_is_c1() {
        let f = TestFunction::new(0.0, 0.3, 0.5, 1.0, 2.0).unwrap();
        let h = 1e-6;
        for k in 1..200 {
            let x = k as f64 / 200.0;
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            assert!((fd - f.derivative(x)).abs() < 1e-4, "x={x}");
            assert!(f.derivative(x).abs() <= f.c1_norm());
        }
        assert_eq!(f.eval(-0.1), 0.0);
        assert_eq!(f.derivative(1.0), 0.0);
    }

    #[test]
    fn weak_star_surrogate() {
        let g = Grid::new(-1.0, 1.0, 1 << 14).unwrap();
        let m = RadonMeasure::dirac(g, 0.1, 1.0).unwrap();
        let rho = TestFunction::new(-0.5, 0.0, 0.05, 0.6, 1.0).unwrap();
        let exact = pair(&m, &rho);
        for k in 3..=12u32 {
            let n = 1u64 << k;
            let reg = RadonMeasure::new(g, dirac_regularize(&m, n).unwrap(), vec![]).unwrap();
            let err = (pair(&reg, &rho) - exact).abs();
            // |ρ(x) − ρ(x_l)| ≤ sup|ρ'|·(1/n + dx/2) over the pulse
            assert!(
                err <= rho.c1_norm() * (1.0 / n as f64 + g.dx),
                "n={n}: {err}"
            );
        }
    }

    proptest! {
        #[test]
        fn pairing_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
            let g = Grid::new(-2.0, 2.0, 256).unwrap();
            let d1 = sample_density(&g, |x| ((x + seed as f64 * 0.01).sin()).abs());
            let d2 = sample_density(&g, |x| (x * x * 0.1).min(1.0));
            let m1 = RadonMeasure::new(g, d1.clone(), vec![Atom { x: 0.3, mass: 0.4 }]).unwrap();
            let m2 = RadonMeasure::new(g, d2.clone(), vec![Atom { x: 0.3, mass: 1.1 }]).unwrap();
            let rho = TestFunction::bump(0.2, 1.0, 1.0).unwrap();
            let rho2 = TestFunction::bump(-0.5, 0.8, 1.0).unwrap();
            // linear in the measure (nonnegative combinations stay measures)
            let (a, b) = (alpha.abs(), beta.abs());
            let comb: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
            let mc = RadonMeasure::new(g, comb, vec![Atom { x: 0.3, mass: a * 0.4 + b * 1.1 }]).unwrap();
            let lhs = pair(&mc, &rho);
            let rhs = a * pair(&m1, &rho) + b * pair(&m2, &rho);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            // linear in the test function
            let combined = |x: f64| alpha * rho.eval(x) + beta * rho2.eval(x);
            let direct: f64 = d1.iter().enumerate().map(|(i, v)| v * combined(g.center(i))).sum::<f64>() * g.dx
                + 0.4 * combined(0.3);
            let split = alpha * pair(&m1, &rho) + beta * pair(&m1, &rho2);
            prop_assert!((direct - split).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn translation_preserves_mass(a in -1.5f64..1.5) {
            let g = Grid::new(-4.0, 4.0, 512).unwrap();
            let m = RadonMeasure::new(g, indicator_density(&g, -0.5, 0.7, 2.0), vec![Atom { x: 0.1, mass: 0.3 }]).unwrap();
            let t = translate(&m, a).unwrap();
            prop_assert!((total_mass(&t) - total_mass(&m)).abs() <= 1e-12 * total_mass(&m));
        }
    }
}
