use approx::assert_relative_eq;
use radonlaw::analysis::*;
use radonlaw::exact::{frozen_dirac_solution, ExactSolution};
use radonlaw::flux::Flux;
use radonlaw::measure::{indicator_density, Atom, Grid, RadonMeasure, TestFunction};
use radonlaw::solver::{run, run_measure, GridSolution, Snapshot, SolverConfig};
use radonlaw::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p1() -> Flux {
    Flux::power(-1.0).unwrap()
}

fn origin() -> Atom {
    Atom { x: 0.0, mass: 1.0 }
}

#[test]
fn exact_singular_mass_follows_the_linear_law() {
    let sol = ExactSolution::measure(-1.0, 2.0).unwrap();
    for t in [0.25, 0.5, 0.75] {
        let s = singular_mass(&sol, &origin(), t).unwrap();
        assert!((s.value - (1.0 - t)).abs() < 1e-4, "t = {t}: {s:?}");
        assert!(!s.low_confidence);
    }
    for t in [1.0, 1.5, 2.0] {
        assert!(singular_mass(&sol, &origin(), t).unwrap().value < 1e-4);
    }
}

#[test]
fn fv_singular_mass_at_half_time() {
    let g = Grid::with_spacing(-0.05, 0.75, 1.0 / 2048.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.5);
    let r = run_measure(&u0, 1024, &p1(), &cfg).unwrap();
    let s = singular_mass(&r, &origin(), 0.5).unwrap();
    assert!((s.value - 0.5).abs() <= 0.05, "{s:?}");
}

#[test]
fn side_limits_of_the_flux_integral() {
    let sol = ExactSolution::measure(-1.0, 1.0).unwrap();
    let left = flux_time_integral(&sol, 0.0, 0.0, 0.5, Side::Left).unwrap();
    let right = flux_time_integral(&sol, 0.0, 0.0, 0.5, Side::Right).unwrap();
    assert_eq!(left.value, 0.0);
    // Φ(0⁺, 0, t) = t·γ with γ = 1
    assert!((right.value - 0.5).abs() < 1e-4);
    assert!(left.value <= right.value);
    assert!(!right.shifted);
}

#[test]
fn waiting_time_bound_examples() {
    let g = Grid::new(-1.0, 1.0, 64).unwrap();
    let one = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let (lo, hi) = waiting_time_bounds(&p1(), &one, 5.0);
    assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
    assert_relative_eq!(hi, 1.0, max_relative = 1e-12);
    let two = RadonMeasure::dirac(g, 0.0, 2.0).unwrap();
    assert_relative_eq!(
        waiting_time_bounds(&p1(), &two, 5.0).0,
        2.0,
        max_relative = 1e-12
    );
    // the lower bound is capped by the horizon
    assert_relative_eq!(waiting_time_bounds(&p1(), &two, 1.5).0, 1.5);
    for p in [-0.25, -0.5, -2.0] {
        let (lo, hi) = waiting_time_bounds(&Flux::power(p).unwrap(), &one, 5.0);
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-12);
    }
    // |K| = γ for the exponential flux: no upper bound
    let (lo, hi) = waiting_time_bounds(&Flux::exponential(1.0).unwrap(), &one, 5.0);
    assert_relative_eq!(lo, 1.0);
    assert!(hi.is_infinite());
    assert_eq!(
        waiting_time_bounds(&Flux::power(0.5).unwrap(), &one, 5.0),
        (0.0, 0.0)
    );
}

#[test]
fn waiting_time_needs_three_levels() {
    let g = Grid::with_spacing(-0.05, 0.5, 1.0 / 512.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.2);
    let r = run_measure(&u0, 64, &p1(), &cfg).unwrap();
    assert!(matches!(
        estimate_waiting_time(&[&r, &r], &u0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn waiting_time_reports_horizon_below_lower_bound() {
    let g = Grid::with_spacing(-0.05, 0.9, 1.0 / 1024.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.5).with_uniform_snapshots(10, &[]);
    let runs: Vec<GridSolution> = [64, 128, 256]
        .iter()
        .map(|&n| run_measure(&u0, n, &p1(), &cfg).unwrap())
        .collect();
    let refs: Vec<&GridSolution> = runs.iter().collect();
    let rep = estimate_waiting_time(&refs, &u0).unwrap();
    assert!(rep.t0_estimate.is_none());
    assert!(rep.note.contains("t0 >= T"));
    assert_eq!(rep.levels, vec![64, 128, 256]);
}

#[test]
fn unbounded_flux_dissolves_the_atom_quickly() {
    let f = Flux::power(0.5).unwrap();
    let g = Grid::with_spacing(-0.01, 0.25, 1.0 / 4096.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.2).with_uniform_snapshots(40, &[]);
    let runs: Vec<GridSolution> = [512, 1024, 2048]
        .iter()
        .map(|&n| run_measure(&u0, n, &f, &cfg).unwrap())
        .collect();
    let refs: Vec<&GridSolution> = runs.iter().collect();
    let rep = estimate_waiting_time(&refs, &u0).unwrap();
    let est = rep.t0_estimate.unwrap();
    assert!(est <= 0.1, "{rep:?}");
    // per-level estimates shrink as n grows
    let per: Vec<f64> = rep.per_level_estimates.iter().map(|v| v.unwrap()).collect();
    assert!(per.windows(2).all(|w| w[1] <= w[0]), "{per:?}");
}

#[test]
fn support_nullity_examples() {
    let g = Grid::with_spacing(-0.05, 0.75, 1.0 / 4096.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.5);
    let runs: Vec<GridSolution> = [64, 256, 1024]
        .iter()
        .map(|&n| run_measure(&u0, n, &p1(), &cfg).unwrap())
        .collect();
    let refs: Vec<&GridSolution> = runs.iter().collect();
    let m = support_nullity_diagnostic(&refs, 0.5, |n| (n as f64).sqrt()).unwrap();
    assert!(m.windows(2).all(|w| w[1].1 < w[0].1), "{m:?}");
    let none = support_nullity_diagnostic(&refs, 0.5, |n| n as f64).unwrap();
    assert!(none.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn kruzkov_pair_identities() {
    let f = p1();
    let k = KruzkovPair::new(0.5).unwrap();
    assert_eq!(k.entropy(2.0), 1.5);
    assert_relative_eq!(k.entropy_flux(&f, 2.0), f.value(2.0) - f.value(0.5));
    assert_relative_eq!(k.entropy_flux(&f, 0.1), f.value(0.5) - f.value(0.1));
    assert_eq!(k.growth_constants(&f), (1.0, 0.0));
    let zero = KruzkovPair::new(0.0).unwrap();
    assert_eq!(zero.entropy(0.7), 0.7);
    assert_eq!(zero.entropy_flux(&f, 0.7), f.value(0.7));
    assert!(KruzkovPair::new(-1.0).is_err());
}

fn constant_solution(c: f64) -> GridSolution {
    let g = Grid::new(-2.0, 2.0, 400).unwrap();
    let snapshots = (0..=20)
        .map(|k| Snapshot {
            t: 0.05 * k as f64,
            u: vec![c; 400],
        })
        .collect();
    GridSolution {
        level: None,
        datum_id: "constant".into(),
        grid: g,
        flux: p1(),
        snapshots,
        diagnostics: Default::default(),
        probes: vec![],
        steps: 0,
        initial_max: c,
    }
}

#[test]
fn kruzkov_residual_vanishes_on_constants() {
    let sol = constant_solution(0.8);
    let zeta = SpaceTimeTest {
        space: TestFunction::bump(0.1, 0.7, 1.3).unwrap(),
        time: TestFunction::new(0.1, 0.3, 0.5, 0.9, 1.0).unwrap(),
    };
    for k in [0.0, 0.3, 0.8, 2.0] {
        let r = kruzkov_residual(&sol, KruzkovPair::new(k).unwrap(), &zeta, &[]).unwrap();
        assert!(r.abs() < 1e-13, "k = {k}: {r}");
    }
}

#[test]
fn kruzkov_residual_is_positive_across_an_entropic_shock() {
    // 0 → 1 is a compressive jump for the concave flux; it moves at speed φ(1)/1 = 1/2
    let g = Grid::with_spacing(-1.0, 4.0, 1.0 / 1024.0).unwrap();
    let u0 = indicator_density(&g, 0.0, 2.0, 1.0);
    let cfg = SolverConfig::new(g, 1.0).with_uniform_snapshots(400, &[]);
    let sol = run(&u0, &p1(), &cfg).unwrap();
    let zeta = SpaceTimeTest {
        space: TestFunction::new(-0.4, -0.1, 0.9, 1.4, 1.0).unwrap(),
        time: TestFunction::new(0.1, 0.3, 0.6, 0.9, 1.0).unwrap(),
    };
    for k in [0.25, 0.5, 0.75] {
        let r = kruzkov_residual(&sol, KruzkovPair::new(k).unwrap(), &zeta, &[]).unwrap();
        assert!(r > 1e-3, "k = {k}: {r}");
    }
    for k in [0.0, 1.0, 1.5] {
        let r = kruzkov_residual(&sol, KruzkovPair::new(k).unwrap(), &zeta, &[]).unwrap();
        assert!(r >= -zeta.tolerance(&sol), "k = {k}: {r}");
    }
}

#[test]
fn kruzkov_residual_rejects_supports_near_atoms() {
    let g = Grid::with_spacing(-0.05, 0.75, 1.0 / 2048.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let r = run_measure(&u0, 256, &p1(), &SolverConfig::new(g, 0.5)).unwrap();
    let zeta = SpaceTimeTest {
        space: TestFunction::bump(0.01, 0.05, 1.0).unwrap(),
        time: TestFunction::new(0.1, 0.2, 0.3, 0.4, 1.0).unwrap(),
    };
    let res = kruzkov_residual(&r, KruzkovPair::new(0.0).unwrap(), &zeta, &[origin()]);
    assert!(matches!(res, Err(Error::Precondition(_))));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = exclusion_width(&r);
    let zs = random_test_functions(&mut rng, &g, 0.5, &[origin()], 0.0, w, 20).unwrap();
    assert_eq!(zs.len(), 20);
    for z in &zs {
        assert!(z.space.b <= -w || z.space.a >= w);
        assert!(kruzkov_residual(&r, KruzkovPair::new(0.5).unwrap(), z, &[origin()]).is_ok());
    }
}

#[test]
fn aronson_benilan_examples() {
    let sol = ExactSolution::measure(-1.0, 2.0).unwrap();
    let xs: Vec<f64> = (1..50).map(|k| 0.01 * k as f64).collect();
    let same = aronson_benilan_check(&sol, &xs, 0.5, 0.5).unwrap();
    assert!(same.margins.iter().all(|m| *m == 0.0));
    let rep = aronson_benilan_check(&sol, &xs, 0.5, 1.0).unwrap();
    // inside the fan at both times the bound is attained
    assert!(rep.margins.iter().all(|m| m.abs() < 1e-12), "{rep:?}");
    let log = Flux::logarithmic();
    let g = Grid::with_spacing(-1.0, 3.0, 1.0 / 512.0).unwrap();
    let u0 = indicator_density(&g, -0.5, 0.5, 2.0);
    let cfg = SolverConfig::new(g, 1.0).with_snapshots(vec![0.25, 0.5]);
    let r = run(&u0, &log, &cfg).unwrap();
    let rep = aronson_benilan_check(&r, &g.centers(), 0.25, 1.0).unwrap();
    assert!(rep.pass, "{rep:?}");
    let bare = Flux::linear(1.0).unwrap();
    let r = run(&u0, &bare, &cfg).unwrap();
    assert!(matches!(
        aronson_benilan_check(&r, &g.centers(), 0.25, 0.5),
        Err(Error::UnsupportedFlux(_))
    ));
}

#[test]
fn blowup_bound_examples() {
    let sol = ExactSolution::measure(-1.0, 1.0).unwrap();
    let rep = blowup_bound_check(&sol, 0.0, 0.5, Some(&[0.25])).unwrap();
    let pt = &rep.points[0];
    assert_relative_eq!(pt.bound.unwrap(), 2f64.sqrt() - 1.0, max_relative = 1e-10);
    assert_relative_eq!(pt.value, 2f64.sqrt() - 1.0, max_relative = 1e-12);
    assert_eq!(rep.side, 1);
    // beyond Ψ(∞)·t the bound is vacuous
    let rep = blowup_bound_check(&sol, 0.0, 0.5, Some(&[0.5, 0.7])).unwrap();
    assert!(rep.points.iter().all(|p| p.bound.is_none() && p.pass));
    assert!(blowup_bound_check(&sol, 0.0, 0.5, None).unwrap().pass);
}

#[test]
fn blowup_discriminates_the_frozen_witness() {
    let f = p1();
    let g = Grid::with_spacing(-0.05, 1.0, 1.0 / 2048.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.5);
    let witness = frozen_dirac_solution(&u0, &f, &cfg).unwrap();
    let exact = ExactSolution::measure(-1.0, 1.0).unwrap();
    let xs = [0.1, 0.2, 0.3, 0.4];
    let rep = blowup_discrimination(&exact, &witness, 0.0, 0.5, Some(&xs)).unwrap();
    assert!(rep.discriminates, "{rep:?}");
    let fv = run_measure(&u0, 1024, &f, &cfg).unwrap();
    let rep = blowup_discrimination(&fv, &witness, 0.0, 0.5, Some(&xs)).unwrap();
    assert!(rep.discriminates, "{rep:?}");
    // the witness keeps its atom at full mass
    let s = singular_mass(&witness, &origin(), 0.5).unwrap();
    assert_relative_eq!(s.value, 1.0);
}

#[test]
fn sup_norm_trend_diverges_before_the_waiting_time() {
    let g = Grid::with_spacing(-0.05, 0.75, 1.0 / 4096.0).unwrap();
    let u0 = RadonMeasure::dirac(g, 0.0, 1.0).unwrap();
    let cfg = SolverConfig::new(g, 0.5);
    let runs: Vec<GridSolution> = [64, 256, 1024]
        .iter()
        .map(|&n| run_measure(&u0, n, &p1(), &cfg).unwrap())
        .collect();
    let refs: Vec<&GridSolution> = runs.iter().collect();
    let s = sup_norm_trend(&refs, 0.0, 0.5, 0.1).unwrap();
    assert!(s.y.windows(2).all(|w| w[1] > 2.0 * w[0]), "{s:?}");
}

#[test]
fn galilean_examples() {
    let g = Grid::with_spacing(-1.0, 3.0, 1.0 / 512.0).unwrap();
    let u0 = indicator_density(&g, 0.0, 1.0, 1.0);
    let cfg = SolverConfig::new(g, 1.0).with_uniform_snapshots(4, &[]);
    let zero = galilean_shift_check(&u0, &p1(), &cfg).unwrap();
    assert_eq!(zero.cphi, 0.0);
    assert!(zero.distances.iter().all(|d| *d == 0.0));
    let drifted = Flux::drifted(&p1(), 0.3).unwrap();
    let rep = galilean_shift_check(&u0, &drifted, &cfg).unwrap();
    assert_relative_eq!(rep.cphi, 0.3);
    assert!(rep.pass, "{rep:?}");
    let lin = Flux::linear(0.5).unwrap();
    let rep = galilean_shift_check(&u0, &lin, &cfg).unwrap();
    assert!(rep.pass, "{rep:?}");
    let bad = Grid::new(-1.0, 3.0, 100).unwrap();
    assert!(matches!(
        galilean_shift_check(&indicator_density(&bad, 0.0, 1.0, 1.0), &p1(), &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn check_report_serializes() {
    let rep =
        CheckReport::new("demo", 0.2, 0.1).with_series(Series::new("s", vec![0.0], vec![1.0]));
    assert!(rep.pass);
    let v = serde_json::to_value(&rep).unwrap();
    for key in ["name", "pass", "margin", "tolerance", "evidence_series"] {
        assert!(v.get(key).is_some());
    }
    assert!(!CheckReport::new("demo", -0.2, 0.1).pass);
}

#[test]
fn tail_mass_flux_integral_matches_edge_probe() {
    let g = Grid::with_spacing(-0.5, 3.0, 1.0 / 512.0).unwrap();
    let u0 = indicator_density(&g, 0.0, 0.5, 2.0);
    let probe = radonlaw::solver::Probe { x: 0.25, speed: 0.0 };
    let cfg = SolverConfig::new(g, 1.5)
        .with_uniform_snapshots(6, &[])
        .with_probes(vec![probe]);
    let sol = run(&u0, &p1(), &cfg).unwrap();
    for &t in &sol.times()[1..] {
        let tail = sol.flux_integral(0.25, 0.0, t).unwrap();
        let edge = sol.probe_integral(0.25, 0.0, 0.0, t).unwrap();
        assert!(edge > 0.0);
        assert_relative_eq!(tail, edge, max_relative = 1e-12);
    }
}
