//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured values. Regression numbers marked "frozen" were
//! produced by the first converged run of this engine and pin the
//! behavior bitwise-deterministically thereafter.

use std::sync::OnceLock;

use becpair::analysis::{self, CorrelationClass};
use becpair::engine::{
    self, ConvergenceReport, EngineOptions, GridSpec, SourceSampling, TwoParticlePattern,
};
use becpair::feasibility::{self, Verdict};
use becpair::geometry::{ExperimentGeometry, Mode, Side, SourceRegion};
use becpair::kinematics::{self, helium_reference_beam, momentum_spread_coefficient};
use becpair::timing::{self, ShotConfig};

const LAMBDA: f64 = 1.083e-6;

fn dds_geom() -> ExperimentGeometry {
    ExperimentGeometry::new(Mode::DoubleDoubleSlit, 5e-3, 25e-3, 100e-6, 0.5, 60e-6).unwrap()
}

fn ghost_geom() -> ExperimentGeometry {
    ExperimentGeometry::new(Mode::Ghost, 5e-3, 25e-3, 50e-6, 0.5, 60e-6).unwrap()
}

fn converged(
    geom: &ExperimentGeometry,
    source_x: f64,
    half_window: f64,
) -> (TwoParticlePattern, ConvergenceReport) {
    let source = SourceRegion::uniform([source_x, 10e-6, 0.0]).unwrap();
    let grid = GridSpec::new(half_window, 201, 201).unwrap();
    engine::converged_pattern(geom, &source, &grid, LAMBDA, &EngineOptions::default(), None).unwrap()
}

fn dds25() -> &'static (TwoParticlePattern, ConvergenceReport) {
    static CACHE: OnceLock<(TwoParticlePattern, ConvergenceReport)> = OnceLock::new();
    CACHE.get_or_init(|| converged(&dds_geom(), 25e-6, 0.75e-3))
}

fn dds50() -> &'static (TwoParticlePattern, ConvergenceReport) {
    static CACHE: OnceLock<(TwoParticlePattern, ConvergenceReport)> = OnceLock::new();
    CACHE.get_or_init(|| converged(&dds_geom(), 50e-6, 0.75e-3))
}

fn dds200() -> &'static (TwoParticlePattern, ConvergenceReport) {
    static CACHE: OnceLock<(TwoParticlePattern, ConvergenceReport)> = OnceLock::new();
    CACHE.get_or_init(|| converged(&dds_geom(), 200e-6, 0.75e-3))
}

fn ghost50() -> &'static (TwoParticlePattern, ConvergenceReport) {
    static CACHE: OnceLock<(TwoParticlePattern, ConvergenceReport)> = OnceLock::new();
    CACHE.get_or_init(|| converged(&ghost_geom(), 50e-6, 1.0e-3))
}

fn ghost400() -> &'static (TwoParticlePattern, ConvergenceReport) {
    static CACHE: OnceLock<(TwoParticlePattern, ConvergenceReport)> = OnceLock::new();
    CACHE.get_or_init(|| converged(&ghost_geom(), 400e-6, 1.0e-3))
}

fn assert_frozen(name: &str, got: f64, frozen: f64, tol: f64) {
    assert!(
        (got - frozen).abs() <= tol,
        "{name}: got {got}, frozen regression value {frozen} (tol {tol})"
    );
}

/// Index-level deviation between the conditional maximum (local max pixel
/// nearest the expectation) and the expected pixel.
fn maxima_index_deviation(pattern: &TwoParticlePattern, condition_at: f64, expect_at: f64) -> usize {
    let slice = analysis::conditional_slice(pattern, Side::A, condition_at).unwrap();
    let expect_idx = pattern.nearest_index(Side::B, expect_at).unwrap() as isize;
    let peak = slice.y.iter().cloned().fold(0.0f64, f64::max);
    let mut best: Option<isize> = None;
    for i in 1..slice.y.len() - 1 {
        if slice.y[i] >= slice.y[i - 1] && slice.y[i] >= slice.y[i + 1] && slice.y[i] > 0.05 * peak {
            let d = (i as isize - expect_idx).abs();
            if best.map_or(true, |b| d < b) {
                best = Some(d);
            }
        }
    }
    best.expect("no local maximum found") as usize
}

#[test]
fn criterion_1_kinematics() {
    let beam = helium_reference_beam();
    let tau = kinematics::fall_time(&beam.constants, 0.5, beam.recoil_velocity).unwrap();
    assert!((tau - 0.3288).abs() < 1e-4, "fall time {tau}");
    let tau_up = kinematics::fall_time(
        &beam.constants,
        0.5,
        beam.recoil_velocity * (1.0 + beam.velocity_spread_yz),
    )
    .unwrap();
    assert!((tau_up - 0.3297).abs() < 1e-4, "fall time with spread {tau_up}");
    let spread = timing::pair_time_spread(&beam, 0.5, beam.velocity_spread_yz).unwrap();
    assert!((spread - 0.9e-3).abs() < 0.05e-3, "pair spread {spread}");
    let reach = kinematics::lateral_reach(&beam, 0.5).unwrap();
    assert!((reach - 30.2e-3).abs() < 0.1e-3, "reach {reach}");
    println!(
        "ACCEPTANCE 1 PASS: fall {:.4} s / {:.4} s, pair spread {:.3} ms, reach {:.2} mm",
        tau,
        tau_up,
        spread * 1e3,
        reach * 1e3
    );
}

#[test]
fn criterion_2_fringe_formulas() {
    let f100 = feasibility::fringe_distances(&dds_geom(), LAMBDA);
    assert!((f100.dds - 271e-6).abs() < 1e-6, "d_f = {}", f100.dds);
    let f50 = feasibility::fringe_distances(&ghost_geom(), LAMBDA);
    assert!((f50.ghost_a - 542e-6).abs() < 1e-6, "d_f^A = {}", f50.ghost_a);
    assert!((f50.ghost_b - 758e-6).abs() < 1e-6, "d_f^B = {}", f50.ghost_b);
    println!(
        "ACCEPTANCE 2 PASS: d_f {:.2} um, d_f^A {:.2} um, d_f^B {:.2} um",
        f100.dds * 1e6,
        f50.ghost_a * 1e6,
        f50.ghost_b * 1e6
    );
}

#[test]
fn criterion_3_condition_chain() {
    let beam = helium_reference_beam();

    // reference double double-slit configuration
    let src = SourceRegion::uniform([50e-6, 10e-6, 0.0]).unwrap();
    let report = feasibility::evaluate_chain(&dds_geom(), &src, &beam).unwrap();
    let thr = report.entry("I").unwrap().lhs;
    let formula_thr = momentum_spread_coefficient() * LAMBDA * 5e-3 / 100e-6;
    assert!((thr - formula_thr).abs() <= 1e-15 * formula_thr, "threshold not exact");
    assert!((thr - 28e-6).abs() < 0.1e-6, "threshold {thr}");
    let bound = LAMBDA * 25e-3 / (5.0 * 60e-6);
    let entry_ii = report.entry("II").unwrap();
    assert_eq!(entry_ii.lhs, 5.0 * 60e-6, "required resolution floor");
    assert!((bound - 90e-6).abs() < 0.3e-6, "slit bound {bound}");
    assert!((entry_ii.rhs - LAMBDA * 25e-3 / 100e-6).abs() < 1e-15, "d_f not exact");
    assert_eq!(report.overall, Verdict::Marginal, "overall verdict");

    // ghost configuration
    let ghost_src = SourceRegion::uniform([400e-6, 10e-6, 0.0]).unwrap();
    let ghost_report = feasibility::evaluate_chain(&ghost_geom(), &ghost_src, &beam).unwrap();
    assert_eq!(ghost_report.entry("III").unwrap().verdict, Verdict::NotApplicable);
    let ghost_thr = ghost_report.entry("I").unwrap().lhs;
    assert!((ghost_thr - 56e-6).abs() < 0.5e-6, "ghost threshold {ghost_thr}");
    println!(
        "ACCEPTANCE 3 PASS: chain [{}] overall {}, ghost threshold {:.2} um with III n/a",
        report.chain_line(),
        report.overall.label(),
        ghost_thr * 1e6
    );
}

#[test]
fn criterion_4_figure3_regimes() {
    // S_x = 25 um: product of one-particle patterns
    let (p25, _) = dds25();
    let s25 = analysis::summarize(p25).unwrap();
    assert!(s25.diagnosis.rank1_fraction >= 0.95, "rank1 {}", s25.diagnosis.rank1_fraction);
    assert!(s25.marginal_visibility_a >= 0.8, "marginal {}", s25.marginal_visibility_a);
    assert_frozen("S25 rank1", s25.diagnosis.rank1_fraction, 0.980550, 2e-3);
    assert_frozen("S25 marginal", s25.marginal_visibility_a, 0.924579, 2e-3);

    // S_x = 50 um: entangled regime
    let (p50, _) = dds50();
    let s50 = analysis::summarize(p50).unwrap();
    for (side, fit) in [("A", &s50.conditional_fit_a), ("B", &s50.conditional_fit_b)] {
        assert!(
            (fit.period - 271e-6).abs() / 271e-6 < 0.02,
            "side {side} conditional period {}",
            fit.period
        );
    }
    // the background-corrected two-particle visibility is the entanglement
    // measure; the plain diagonal-average value is reported alongside and
    // pinned as a regression (product patterns score up to ~1/2 on it)
    assert!(s50.corrected_two_particle_visibility > 0.5, "corrected {}", s50.corrected_two_particle_visibility);
    assert!(s50.two_particle_visibility > 0.5, "plain {}", s50.two_particle_visibility);
    assert!(s50.marginal_visibility_a <= 0.2, "marginal {}", s50.marginal_visibility_a);
    assert_frozen("S50 plain 2p vis", s50.two_particle_visibility, 0.972026, 2e-3);
    assert_frozen("S50 corrected 2p vis", s50.corrected_two_particle_visibility, 1.0, 2e-3);
    assert_frozen("S50 marginal", s50.marginal_visibility_a, 0.118516, 2e-3);
    assert_frozen("S50 rank1", s50.diagnosis.rank1_fraction, 0.685288, 2e-3);
    assert_eq!(s50.diagnosis.class, CorrelationClass::Diagonal);
    let pitch = p50.pitch_b();
    for px in (-25i32..=25).step_by(5) {
        let xa = px as f64 * pitch;
        let dev = maxima_index_deviation(p50, xa, xa);
        assert!(dev <= 1, "conditional maximum off the diagonal by {dev} px at x_A = {px} px");
    }

    // S_x = 200 um: washed out, factorizable again
    let (p200, _) = dds200();
    let s200 = analysis::summarize(p200).unwrap();
    assert!(
        s200.corrected_two_particle_visibility <= 0.2,
        "corrected {}",
        s200.corrected_two_particle_visibility
    );
    assert!(
        s200.diagnosis.rank1_fraction > s50.diagnosis.rank1_fraction + 0.2,
        "rank1 should rise back: {} vs {}",
        s200.diagnosis.rank1_fraction,
        s50.diagnosis.rank1_fraction
    );
    assert_frozen("S200 plain 2p vis", s200.two_particle_visibility, 0.378792, 2e-3);
    assert_frozen("S200 corrected 2p vis", s200.corrected_two_particle_visibility, 0.093778, 2e-3);
    assert_frozen("S200 rank1", s200.diagnosis.rank1_fraction, 0.989411, 2e-3);
    assert_frozen("S200 marginal", s200.marginal_visibility_a, 0.938774, 2e-3);

    println!(
        "ACCEPTANCE 4 PASS: S25 rank1 {:.3} marg {:.3}; S50 period {:.2} um vis {:.3} (corrected {:.3}) marg {:.3}; S200 corrected vis {:.3} rank1 {:.3}",
        s25.diagnosis.rank1_fraction,
        s25.marginal_visibility_a,
        s50.conditional_fit_b.period * 1e6,
        s50.two_particle_visibility,
        s50.corrected_two_particle_visibility,
        s50.marginal_visibility_a,
        s200.corrected_two_particle_visibility,
        s200.diagnosis.rank1_fraction
    );
    let _ = df;
}

#[test]
fn criterion_5_figure5_regimes() {
    // S_x = 50 um: product-like (single-particle fringes on side A only)
    let (p50, _) = ghost50();
    let s50 = analysis::summarize(p50).unwrap();
    assert!(s50.diagnosis.rank1_fraction >= 0.9, "rank1 {}", s50.diagnosis.rank1_fraction);
    assert_eq!(s50.diagnosis.class, CorrelationClass::None);
    assert_frozen("ghost S50 rank1", s50.diagnosis.rank1_fraction, 0.983635, 2e-3);

    // S_x = 400 um: anti-diagonal two-particle interference
    let (p400, _) = ghost400();
    let s400 = analysis::summarize(p400).unwrap();
    assert!(
        (s400.conditional_fit_a.period - 542e-6).abs() / 542e-6 < 0.02,
        "side A period {}",
        s400.conditional_fit_a.period
    );
    assert!(
        (s400.conditional_fit_b.period - 758e-6).abs() / 758e-6 < 0.02,
        "side B period {}",
        s400.conditional_fit_b.period
    );
    assert_eq!(s400.diagnosis.class, CorrelationClass::AntiDiagonal);
    assert_frozen("ghost S400 anti vis", s400.diagnosis.antidiagonal_visibility, 0.9838, 2e-3);
    assert_frozen("ghost S400 cond B period", s400.conditional_fit_b.period, 7.561532e-4, 2e-7);
    // conditional maxima opposite the conditioning position near the axis
    // (the side-B / side-A fringe-distance ratio ~1.4 bends the maxima
    // line away from -x_A at larger offsets)
    let pitch = p400.pitch_b();
    for px in [-1i32, 0, 1] {
        let xa = px as f64 * pitch;
        let dev = maxima_index_deviation(p400, xa, -xa);
        assert!(dev <= 1, "anti-diagonal maximum off by {dev} px at x_A = {px} px");
    }

    println!(
        "ACCEPTANCE 5 PASS: ghost S50 rank1 {:.3} ({}); S400 periods A {:.2} um / B {:.2} um, class {}",
        s50.diagnosis.rank1_fraction,
        s50.diagnosis.class.label(),
        s400.conditional_fit_a.period * 1e6,
        s400.conditional_fit_b.period * 1e6,
        s400.diagnosis.class.label()
    );
}

/// Brute-force reference: direct double loop over source samples and
/// detector pixels, evaluating every path term independently of the
/// engine's factored tables. Shares only the phase-reference convention
/// (an exact global phase).
fn brute_force(
    geom: &ExperimentGeometry,
    source: &SourceRegion,
    sampling: &SourceSampling,
    grid: &GridSpec,
) -> Vec<f64> {
    let dist = |a: [f64; 3], b: [f64; 3]| -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    let k = std::f64::consts::TAU / LAMBDA;
    let l1 = geom.source_slit_distance;
    let l2 = geom.slit_detector_distance;
    let offset = l1 + l2;
    let half_d = geom.slit_separation / 2.0;
    let slits_a = [[half_d, l1, 0.0], [-half_d, l1, 0.0]];
    let slits_b = [[half_d, -l1, 0.0], [-half_d, -l1, 0.0]];

    // midpoint samples in the same row-major order as the engine
    let positions = |extent: f64, n: usize| -> Vec<f64> {
        if extent == 0.0 {
            return vec![0.0];
        }
        (0..n).map(|i| -extent / 2.0 + (i as f64 + 0.5) * extent / n as f64).collect()
    };
    let xs = positions(source.extent[0], sampling.counts[0]);
    let ys = positions(source.extent[1], sampling.counts[1]);

    let axis_a = grid.axis(Side::A);
    let axis_b = grid.axis(Side::B);
    let mut values = Vec::with_capacity(axis_a.len() * axis_b.len());
    let mut total_weight = 0.0;
    for &sx in &xs {
        for &sy in &ys {
            total_weight += source.weight([sx, sy, 0.0]);
        }
    }
    for &xa in &axis_a {
        for &xb in &axis_b {
            let det_a = [xa, offset, 0.0];
            let det_b = [xb, -offset, 0.0];
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for &sx in &xs {
                for &sy in &ys {
                    let s = [sx, sy, 0.0];
                    let w = source.weight(s);
                    match geom.mode {
                        Mode::DoubleDoubleSlit => {
                            for slit_a in slits_a {
                                for slit_b in slits_b {
                                    let la = dist(s, slit_a) + dist(slit_a, det_a) - offset;
                                    let lb = dist(s, slit_b) + dist(slit_b, det_b) - offset;
                                    acc += num_complex::Complex64::from_polar(w, k * (la + lb));
                                }
                            }
                        }
                        Mode::Ghost => {
                            let lb = dist(s, det_b) - offset;
                            for slit_a in slits_a {
                                let la = dist(s, slit_a) + dist(slit_a, det_a) - offset;
                                acc += num_complex::Complex64::from_polar(w, k * (la + lb));
                            }
                        }
                    }
                }
            }
            values.push((acc / total_weight).norm_sqr());
        }
    }
    values
}

#[test]
fn criterion_6_oracle_equivalence() {
    let grid = GridSpec::new(0.3e-3, 21, 21).unwrap();
    let sampling = SourceSampling::from_counts([10, 3, 1]).unwrap();
    let source = SourceRegion::uniform([6e-6, 10e-6, 0.0]).unwrap();
    let mut worst = 0.0f64;
    for geom in [dds_geom(), ghost_geom()] {
        let pattern =
            engine::integrate_source(&geom, &source, &sampling, &grid, LAMBDA, &EngineOptions::default())
                .unwrap();
        let reference = brute_force(&geom, &source, &sampling, &grid);
        let peak = pattern.peak();
        assert!(peak > 0.0);
        for (got, want) in pattern.values.iter().zip(&reference) {
            let dev = (got - want).abs() / peak;
            worst = worst.max(dev);
            assert!(dev <= 1e-12, "engine {got} vs brute force {want} (dev {dev:.3e})");
        }
    }
    println!("ACCEPTANCE 6 PASS: optimized engine matches brute-force summation, worst relative deviation {worst:.3e}");
}

#[test]
fn criterion_7_convergence_of_all_acceptance_configurations() {
    let cases: [(&str, &ConvergenceReport); 5] = [
        ("dds S25", &dds25().1),
        ("dds S50", &dds50().1),
        ("dds S200", &dds200().1),
        ("ghost S50", &ghost50().1),
        ("ghost S400", &ghost400().1),
    ];
    for (name, report) in cases {
        assert!(
            report.deviation < 1e-3,
            "{name}: halving deviation {} at counts {:?}",
            report.deviation,
            report.sampling.counts
        );
    }
    // the per-module invariant and property suites run as unit tests in
    // cargo test; this criterion additionally pins the quadrature gate
    println!(
        "ACCEPTANCE 7 PASS: halving deviations {:?} all below 1e-3",
        cases.map(|(_, r)| format!("{:.2e}", r.deviation))
    );
}

#[test]
fn criterion_8_timing_monte_carlo() {
    let beam = helium_reference_beam();

    // perfect identification with zero spread and instantaneous collisions
    let ideal = ShotConfig {
        mean_pairs: 2.0,
        collision_time_constant: 0.0,
        vertical_spread_fraction: 0.0,
        seed: 21,
        ..Default::default()
    };
    let (perfect, _) = timing::run_shots(&ideal, &beam, 200, 1e-6, None).unwrap();
    assert_eq!(perfect.true_positive_rate, 1.0);
    assert_eq!(perfect.unpaired_fraction, 0.0);

    // defaults with 10 pairs per shot: arrival-time identification fails
    let busy = ShotConfig { mean_pairs: 10.0, seed: 20260810, ..Default::default() };
    let (summary, _) = timing::run_shots(&busy, &beam, 2000, 2e-3, None).unwrap();
    assert!(summary.false_pair_rate > 0.5, "false pair rate {}", summary.false_pair_rate);
    assert_frozen("false pair rate", summary.false_pair_rate, 0.899027, 1e-6);

    // usable coincidence rate at a few pairs per shot and eta = 0.25
    let sparse = ShotConfig { mean_pairs: 1.0, efficiency: 0.25, seed: 20260810, ..Default::default() };
    let (usable, _) = timing::run_shots(&sparse, &beam, 2000, 2e-3, None).unwrap();
    assert_frozen("usable rate", usable.identified_per_shot, 0.0875, 1e-6);
    assert_frozen("usable tp rate", usable.true_positive_rate, 0.554286, 1e-6);

    println!(
        "ACCEPTANCE 8 PASS: ideal identification perfect; mean-10 false-pair rate {:.3}; mean-1 eta-0.25 usable rate {:.4} (tp {:.3})",
        summary.false_pair_rate,
        usable.identified_per_shot,
        usable.true_positive_rate
    );
}
