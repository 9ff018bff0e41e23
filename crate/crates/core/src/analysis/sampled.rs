use crate::error::{Error, Result};
use crate::exact::{ExactSolution, FrozenDirac, Mode};
use crate::flux::Flux;
use crate::quad::neumaier_sum;
use crate::solver::GridSolution;

/// Offset unit for side limits of closed-form solutions.
const EXACT_RESOLUTION: f64 = 1e-10;

/// Read access shared by finite-volume runs, closed-form solutions and the frozen-atom
/// witness.
pub trait SampledSolution {
    fn flux(&self) -> &Flux;

    /// Absolutely continuous part `u_r(x, t)`.
    fn regular(&self, x: f64, t: f64) -> Result<f64>;

    /// `Φ(x, t1, t2) = ∫_{t1}^{t2} (φ − Cφ u)(x + Cφ(s − t1), s) ds`.
    fn flux_integral(&self, x: f64, t1: f64, t2: f64) -> Result<f64>;

    /// Unit for the side-limit offsets `{4, 8, 16}·h`.
    fn resolution(&self) -> f64;

    /// `sup u_r(·, t)` over `[a, b]`.
    fn window_sup(&self, t: f64, a: f64, b: f64) -> Result<f64>;

    /// Cell width for discrete solutions.
    fn spacing(&self) -> Option<f64> {
        None
    }
}

/// `dx·Σ_{i ≥ j} u_i` where `j` is the edge nearest to `x`.
fn tail_mass(sol: &GridSolution, x: f64, t: f64) -> Result<f64> {
    let s = sol.snapshot(t)?;
    let j = sol.grid.nearest_edge(x);
    Ok(neumaier_sum(s.u[j..].iter().copied()) * sol.grid.dx)
}

impl SampledSolution for GridSolution {
    fn flux(&self) -> &Flux {
        &self.flux
    }

    fn regular(&self, x: f64, t: f64) -> Result<f64> {
        self.value_at(x, t)
    }

    /// Exact for the scheme: the change of mass to the right of the moving edge equals
    /// the time-integrated interface flux minus `Cφ` times the swept mass.
    fn flux_integral(&self, x: f64, t1: f64, t2: f64) -> Result<f64> {
        let c = self.flux.cphi();
        Ok(tail_mass(self, x + c * (t2 - t1), t2)? - tail_mass(self, x, t1)?)
    }

    fn resolution(&self) -> f64 {
        match self.level {
            Some(n) => self.grid.dx.max(0.5 / n as f64),
            None => self.grid.dx,
        }
    }

    fn window_sup(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        GridSolution::window_sup(self, t, a, b)
    }

    fn spacing(&self) -> Option<f64> {
        Some(self.grid.dx)
    }
}

impl SampledSolution for ExactSolution {
    fn flux(&self) -> &Flux {
        ExactSolution::flux(self)
    }

    fn regular(&self, x: f64, t: f64) -> Result<f64> {
        if t == 0.0 && self.mode == Mode::Measure {
            return Ok(0.0);
        }
        ExactSolution::regular(self, x, t)
    }

    fn flux_integral(&self, x: f64, t1: f64, t2: f64) -> Result<f64> {
        ExactSolution::flux_integral(self, x, t1, t2)
    }

    fn resolution(&self) -> f64 {
        match self.mode {
            Mode::Measure => EXACT_RESOLUTION,
            Mode::Pulse { n } => EXACT_RESOLUTION.max(0.5 / n as f64),
        }
    }

    /// The regular part is nondecreasing up to its lower edge and nonincreasing after it.
    fn window_sup(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        if t == 0.0 {
            return match self.mode {
                Mode::Measure => Ok(0.0),
                Mode::Pulse { n } => {
                    let c = 1.0 / n as f64;
                    Ok(if a < c && b > -c { n as f64 / 2.0 } else { 0.0 })
                }
            };
        }
        if b < a {
            return Err(Error::Domain(format!("empty window [{a}, {b}]")));
        }
        let lo = self.lower_edge(t)?;
        if b < lo {
            return Ok(0.0);
        }
        if a <= lo {
            self.sup_regular(t)
        } else {
            ExactSolution::regular(self, a, t)
        }
    }
}

impl SampledSolution for FrozenDirac {
    fn flux(&self) -> &Flux {
        &self.regular.flux
    }

    fn regular(&self, x: f64, t: f64) -> Result<f64> {
        self.regular.value_at(x, t)
    }

    fn flux_integral(&self, x: f64, t1: f64, t2: f64) -> Result<f64> {
        self.regular.flux_integral(x, t1, t2)
    }

    fn resolution(&self) -> f64 {
        self.regular.grid.dx
    }

    fn window_sup(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        self.regular.window_sup(t, a, b)
    }

    fn spacing(&self) -> Option<f64> {
        Some(self.regular.grid.dx)
    }
}
