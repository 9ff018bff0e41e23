//! Verification checks run against finite-volume trajectories, closed-form solutions
//! and the frozen-atom witness through one sampled-solution interface.

mod entropy;
mod estimates;
mod report;
mod sampled;
mod singular;

pub use entropy::{
    exclusion_width, kruzkov_residual, random_test_functions, KruzkovPair, SpaceTimeTest,
};
pub use estimates::{
    aronson_benilan_check, blowup_bound_check, blowup_discrimination, dyadic_approach,
    galilean_shift_check, sup_norm_trend, AronsonBenilanReport, BlowupPoint, BlowupReport,
    DiscriminationReport, GalileanReport, BLOWUP_RELATIVE_TOLERANCE,
};
pub use report::{CheckReport, Series};
pub use sampled::SampledSolution;
pub use singular::{
    estimate_waiting_time, flux_time_integral, singular_mass, support_nullity_diagnostic,
    waiting_time_bounds, FluxTimeIntegral, Side, SingularMassEstimate, WaitingTimeReport,
    SUP_GROWTH_LIMIT, SUP_WINDOW_HALF_WIDTH, WAITING_TIME_MASS_FRACTION,
};
