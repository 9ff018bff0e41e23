//! Experiment configuration: JSON schema plus the compact `kind:arg:arg` forms used
//! on the command line.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{Flux, H2Pair};
use crate::measure::{self, Atom, Grid, RadonMeasure};
use crate::solver::{self, NumericalFlux, SolverConfig, DEFAULT_CFL};

/// Checks understood by `verify`.
pub const CHECK_NAMES: [&str; 9] = [
    "mass",
    "max-principle",
    "contraction",
    "waiting-time",
    "singular-mass",
    "entropy",
    "aronson-benilan",
    "blowup",
    "hypotheses",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluxSpec {
    Power {
        p: f64,
    },
    Exponential {
        alpha: f64,
    },
    Logarithmic,
    Loglog,
    Linear {
        c: f64,
    },
    Drifted {
        base: Box<FluxSpec>,
        drift: f64,
    },
    Tabulated {
        u: Vec<f64>,
        phi: Vec<f64>,
        #[serde(default)]
        h: Option<f64>,
        #[serde(default)]
        k: Option<f64>,
    },
}

impl FluxSpec {
    pub fn build(&self) -> Result<Flux> {
        match self {
            FluxSpec::Power { p } => Flux::power(*p),
            FluxSpec::Exponential { alpha } => Flux::exponential(*alpha),
            FluxSpec::Logarithmic => Ok(Flux::logarithmic()),
            FluxSpec::Loglog => Ok(Flux::loglog()),
            FluxSpec::Linear { c } => Flux::linear(*c),
            FluxSpec::Drifted { base, drift } => Flux::drifted(&base.build()?, *drift),
            FluxSpec::Tabulated { u, phi, h, k } => {
                let pair = match (h, k) {
                    (Some(h), Some(k)) => Some(H2Pair::new(*h, *k)),
                    (None, None) => None,
                    _ => {
                        return Err(Error::Config(
                            "tabulated flux needs both h and k or neither".into(),
                        ))
                    }
                };
                Flux::tabulated(u.clone(), phi.clone(), pair)
            }
        }
    }
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("cannot parse {what} from '{s}'")))
}

/// `power:P`, `exponential:ALPHA`, `log`, `loglog`, `linear:C`, `drifted:DRIFT:BASE…`.
impl FromStr for FluxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let arity = |n: usize| {
            if parts.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "flux '{s}' expects {} argument(s)",
                    n - 1
                )))
            }
        };
        match parts[0] {
            "power" => {
                arity(2)?;
                Ok(FluxSpec::Power {
                    p: parse_num(parts[1], "p")?,
                })
            }
            "exponential" | "exp" => {
                arity(2)?;
                Ok(FluxSpec::Exponential {
                    alpha: parse_num(parts[1], "alpha")?,
                })
            }
            "log" | "logarithmic" => {
                arity(1)?;
                Ok(FluxSpec::Logarithmic)
            }
            "loglog" => {
                arity(1)?;
                Ok(FluxSpec::Loglog)
            }
            "linear" => {
                arity(2)?;
                Ok(FluxSpec::Linear {
                    c: parse_num(parts[1], "c")?,
                })
            }
            "drifted" if parts.len() >= 3 => Ok(FluxSpec::Drifted {
                drift: parse_num(parts[1], "drift")?,
                base: Box::new(parts[2..].join(":").parse()?),
            }),
            other => Err(Error::Config(format!("unknown flux '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatumSpec {
    /// Atom of mass `mass` at `x`.
    Dirac { x: f64, mass: f64 },
    /// `height·χ_[a, b]`.
    Box { a: f64, b: f64, height: f64 },
}

impl DatumSpec {
    /// Smallest interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DatumSpec::Dirac { x, .. } => (x, x),
            DatumSpec::Box { a, b, .. } => (a, b),
        }
    }

    /// Largest density value, `None` for atoms.
    pub fn height(&self) -> Option<f64> {
        match *self {
            DatumSpec::Dirac { .. } => None,
            DatumSpec::Box { height, .. } => Some(height),
        }
    }
}

/// `dirac:X:MASS` or `box:A:B:HEIGHT`.
impl FromStr for DatumSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match (parts[0], parts.len()) {
            ("dirac", 3) => Ok(DatumSpec::Dirac {
                x: parse_num(parts[1], "x")?,
                mass: parse_num(parts[2], "mass")?,
            }),
            ("box", 4) => Ok(DatumSpec::Box {
                a: parse_num(parts[1], "a")?,
                b: parse_num(parts[2], "b")?,
                height: parse_num(parts[3], "height")?,
            }),
            _ => Err(Error::Config(format!(
                "datum '{s}' must be dirac:X:MASS or box:A:B:HEIGHT"
            ))),
        }
    }
}

/// Build the measure on `grid`.
pub fn build_measure(grid: Grid, parts: &[DatumSpec]) -> Result<RadonMeasure> {
    let mut density = vec![0.0; grid.n_cells];
    let mut atoms = Vec::new();
    for p in parts {
        match *p {
            DatumSpec::Dirac { x, mass } => atoms.push(Atom { x, mass }),
            DatumSpec::Box { a, b, height } => {
                for (d, v) in density
                    .iter_mut()
                    .zip(measure::indicator_density(&grid, a, b, height))
                {
                    *d += v;
                }
            }
        }
    }
    RadonMeasure::new(grid, density, atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::with_spacing(self.x_min, self.x_max, self.dx)
    }
}

/// Grid resolving pulses at every level and padded for waves up to the horizon.
///
/// `dx = 1/(2·max n)`, or `1/256` without atoms.
pub fn auto_grid(
    flux: &Flux,
    datum: &[DatumSpec],
    levels: &[u64],
    horizon: f64,
) -> Result<GridSpec> {
    if datum.is_empty() {
        return Err(Error::Config("datum must not be empty".into()));
    }
    let has_atoms = datum.iter().any(|d| matches!(d, DatumSpec::Dirac { .. }));
    let n_max = levels.iter().copied().max().unwrap_or(0);
    let n_min = levels.iter().copied().min().unwrap_or(0);
    if has_atoms && n_min == 0 {
        return Err(Error::Config(
            "atoms need at least one positive level n".into(),
        ));
    }
    let dx = if has_atoms {
        0.5 / n_max as f64
    } else {
        1.0 / 256.0
    };
    let lo = datum
        .iter()
        .map(|d| d.support().0)
        .fold(f64::INFINITY, f64::min);
    let hi = datum
        .iter()
        .map(|d| d.support().1)
        .fold(f64::NEG_INFINITY, f64::max);
    let pulse = if has_atoms { 1.0 / n_min as f64 } else { 0.0 };
    let u_top = datum
        .iter()
        .map(|d| d.height().unwrap_or(0.0))
        .chain(datum.iter().filter_map(|d| match d {
            DatumSpec::Dirac { mass, .. } => Some(mass * n_max as f64 / 2.0),
            _ => None,
        }))
        .fold(0.0, f64::max);
    let (s_min, s_max) = solver::speed_range(flux, u_top);
    let blur = 8.0 * (dx * flux.lipschitz() * horizon).sqrt() + 16.0 * dx;
    let left = (-s_min).max(0.0) * horizon + blur;
    let right = s_max.max(0.0) * horizon + blur;
    Ok(GridSpec {
        x_min: lo - pulse - left,
        x_max: hi + pulse + right,
        dx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnapshotSpec {
    Uniform { uniform: usize },
    Times(Vec<f64>),
}

impl Default for SnapshotSpec {
    fn default() -> Self {
        SnapshotSpec::Uniform { uniform: 20 }
    }
}

impl SnapshotSpec {
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        match self {
            SnapshotSpec::Uniform { uniform } => {
                let n = (*uniform).max(1);
                (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
            }
            SnapshotSpec::Times(v) => v.clone(),
        }
    }
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flux: FluxSpec,
    pub datum: Vec<DatumSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub levels: Vec<u64>,
    pub horizon: f64,
    #[serde(default)]
    pub snapshots: SnapshotSpec,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub numerical_flux: NumericalFlux,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datum.is_empty() {
            return Err(Error::Config("datum must not be empty".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if self.levels.contains(&0) {
            return Err(Error::Config("levels must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if let Some(bad) = self
            .checks
            .iter()
            .find(|c| !CHECK_NAMES.contains(&c.as_str()))
        {
            return Err(Error::Config(format!(
                "unknown check '{bad}' (known: {})",
                CHECK_NAMES.join(", ")
            )));
        }
        self.flux.build()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        match &self.grid {
            Some(g) => g.build(),
            None => {
                auto_grid(&self.flux.build()?, &self.datum, &self.levels, self.horizon)?.build()
            }
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.grid()?, self.horizon)
            .with_snapshots(self.snapshots.times(self.horizon))
            .with_cfl(self.cfl)
            .with_numerical_flux(self.numerical_flux))
    }

    pub fn measure(&self) -> Result<RadonMeasure> {
        build_measure(self.grid()?, &self.datum)
    }
}
