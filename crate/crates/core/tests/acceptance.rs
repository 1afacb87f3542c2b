//! Acceptance criteria for the verification harness, one test per
//! criterion. Each test prints a single pass/fail line (visible with
//! `--nocapture`) and asserts the criterion with its tolerance and, where
//! stated, its time budget pinned in code.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use voatrace::branching::SublatticePair;
use voatrace::chars::ModuleCharacterSet;
use voatrace::io;
use voatrace::kernels::SiegelPoint;
use voatrace::verify::{
    self, check_branching_coverage, check_branching_transform, check_character_transform,
    check_diagonal_trace_transform, check_insertion_derivative, check_modular_data,
    check_modular_relations, check_poisson_inversion, check_siegel_trace_inversion,
    check_theta_prefactor_matrix, check_theta_prefactor_scalar, CheckReport, GAMMA_S, GAMMA_T,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn charset(name: &str) -> ModuleCharacterSet {
    ModuleCharacterSet::new(io::load_lattice(name).unwrap())
}

fn pair(name: &str) -> SublatticePair {
    io::load_pair(name).unwrap().pair
}

fn verdict(criterion: &str, report: &CheckReport, elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    println!(
        "criterion {criterion}: {} (max residual {:.3e} vs tolerance {:.1e}, {:.2}s vs budget {:.0}s)",
        if report.passed && in_time { "PASS" } else { "FAIL" },
        report.max_residual(),
        report.tolerance,
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
    );
    assert!(
        report.passed,
        "{criterion}: max residual {:.3e} exceeds {:.1e}",
        report.max_residual(),
        report.tolerance
    );
    assert!(in_time, "{criterion}: took {elapsed:?}, budget {budget:?}");
}

#[test]
fn criterion_1_scalar_inversion_on_both_a1_modules() {
    let l = io::load_lattice("a1").unwrap();
    let taus: Vec<Complex64> =
        [0.6, 0.8, 1.0, 1.4, 2.2].iter().map(|&y| c(0.0, y)).collect();
    let t0 = Instant::now();
    let report = check_poisson_inversion(&l, &taus, 1e-12, 1e-10).unwrap();
    let elapsed = t0.elapsed();
    assert_eq!(report.residuals.len(), 10, "two modules x five points");
    verdict("1 (scalar inversion)", &report, elapsed, Duration::from_secs(1));
}

#[test]
fn criterion_2_character_transform_under_four_words() {
    let ms = [charset("a1"), charset("glue")];
    let gammas = [GAMMA_S, GAMMA_T, [[0, -1], [1, 1]], [[-1, 0], [-1, -1]]];
    let taus = [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0)];
    let t0 = Instant::now();
    let report = check_character_transform(&ms, &gammas, &taus, 1e-8).unwrap();
    let elapsed = t0.elapsed();
    verdict("2 (character transform)", &report, elapsed, Duration::from_secs(5));
}

#[test]
fn criterion_3_diagonal_transform_on_rank_two_lattices() {
    let ms = [charset("two-i2"), charset("glue")];
    let tau_pairs = [
        [c(0.0, 1.0), c(0.0, 2.0)],
        [c(0.0, 1.3), c(0.0, 0.8)],
        [c(0.2, 0.9), c(-0.1, 1.4)],
        [c(0.5, 1.0), c(0.0, 1.1)],
    ];
    let t0 = Instant::now();
    let report = check_diagonal_trace_transform(&ms, GAMMA_S, &tau_pairs, 1e-12, 1e-8).unwrap();
    let elapsed = t0.elapsed();
    verdict("3 (diagonal transform)", &report, elapsed, Duration::from_secs(30));
}

#[test]
fn criterion_4_siegel_inversion_including_a_repeated_eigenvalue() {
    let m = charset("glue");
    let points = [
        SiegelPoint::new(vec![vec![c(0.0, 2.0), c(0.0, 0.5)], vec![c(0.0, 0.5), c(0.0, 1.0)]])
            .unwrap(),
        SiegelPoint::new(vec![vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]])
            .unwrap(),
        // Characteristic polynomial (x - 2i)^2: a double eigenvalue.
        SiegelPoint::new(vec![vec![c(1.0, 2.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(-1.0, 2.0)]])
            .unwrap(),
        SiegelPoint::new(vec![vec![c(0.3, 1.2), c(0.1, 0.2)], vec![c(0.1, 0.2), c(-0.4, 0.9)]])
            .unwrap(),
        SiegelPoint::new(vec![vec![c(0.0, 1.5), c(0.2, 0.0)], vec![c(0.2, 0.0), c(0.0, 0.8)]])
            .unwrap(),
    ];
    let t0 = Instant::now();
    let report = check_siegel_trace_inversion(&m, &points, 1e-12, 1e-8).unwrap();
    let elapsed = t0.elapsed();
    verdict("4 (Siegel-point inversion)", &report, elapsed, Duration::from_secs(60));
}

#[test]
fn criterion_5_prefactor_identities() {
    let t0 = Instant::now();
    let scalar = check_theta_prefactor_scalar(
        &charset("a1"),
        &[c(0.0, 1.0), c(0.0, 2.0)],
        1e-12,
        1e-10,
    )
    .unwrap();
    let matrix = check_theta_prefactor_matrix(
        &charset("glue"),
        &[
            SiegelPoint::new(vec![vec![c(0.3, 1.2), c(0.1, 0.2)], vec![c(0.1, 0.2), c(-0.4, 0.9)]])
                .unwrap(),
            SiegelPoint::new(vec![vec![c(0.0, 1.3), c(0.2, 0.1)], vec![c(0.2, 0.1), c(0.0, 1.1)]])
                .unwrap(),
            SiegelPoint::new(vec![vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]])
                .unwrap(),
        ],
        1e-12,
        1e-8,
    )
    .unwrap();
    let elapsed = t0.elapsed() / 2;
    verdict("5a (scalar prefactor)", &scalar, elapsed, Duration::from_secs(30));
    verdict("5b (matrix prefactor)", &matrix, elapsed, Duration::from_secs(30));
}

#[test]
fn criterion_6_branching_intertwines_and_corruption_is_caught() {
    let pairs = [
        ("orthogonal-split", pair("orthogonal-split")),
        ("glued-split", pair("glued-split")),
    ];
    let refs: Vec<(&str, &SublatticePair)> =
        pairs.iter().map(|(n, p)| (*n, p)).collect();
    let report = check_branching_transform(&refs, 1e-8).unwrap();
    verdict(
        "6a (branching transform)",
        &report,
        Duration::ZERO,
        Duration::from_secs(1),
    );

    let config = io::default_suite().unwrap();
    let controls = verify::run_controls(&config).unwrap();
    let control = controls
        .iter()
        .find(|c| c.check_name == "branching-transform")
        .expect("branching control present");
    println!(
        "criterion 6b (corrupted branching table): {} (control residual {:.3e} > 0.1)",
        if control.rejected && control.residual > 0.1 { "PASS" } else { "FAIL" },
        control.residual
    );
    assert!(control.rejected, "corrupted table slipped through");
    assert!(
        control.residual > 0.1,
        "corrupted-table residual {:.3e} not clearly separated",
        control.residual
    );
}

#[test]
fn criterion_7_module_coverage_and_character_identity() {
    let p = pair("glued-split");
    let coverage = p.module_coverage().unwrap();
    let all_witnessed = coverage.complete()
        && coverage.part1.len() == 4
        && coverage.part2.len() == 4;
    println!(
        "criterion 7a (module coverage): {} ({} + {} modules witnessed)",
        if all_witnessed { "PASS" } else { "FAIL" },
        coverage.part1.iter().filter(|w| w.is_some()).count(),
        coverage.part2.iter().filter(|w| w.is_some()).count(),
    );
    assert!(all_witnessed, "{coverage:?}");

    let taus = [c(0.0, 1.0), c(0.3, 1.2), c(0.0, 2.0)];
    let report = check_branching_coverage("glued-split", &p, &taus, 1e-10).unwrap();
    verdict(
        "7b (branching character identity)",
        &report,
        Duration::ZERO,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_8_modular_data_agreement_and_relations() {
    let ms = [charset("a1"), charset("two-i2"), charset("glue"), charset("e8")];
    let t0 = Instant::now();
    let data = check_modular_data(&ms, 1e-8).unwrap();
    let relations = check_modular_relations(&ms, 1e-7).unwrap();
    let elapsed = t0.elapsed() / 2;
    verdict("8a (closed-form agreement)", &data, elapsed, Duration::from_secs(60));
    verdict("8b (group relations)", &relations, elapsed, Duration::from_secs(60));
}

#[test]
fn criterion_9_insertion_matches_finite_differences() {
    let a1 = charset("a1");
    let two = charset("two-i2");
    let taus_a1 = [c(0.0, 1.07)];
    let taus_two = [c(0.0, 0.95), c(0.2, 1.15)];
    let samples: Vec<(&ModuleCharacterSet, &[Complex64])> =
        vec![(&a1, &taus_a1), (&two, &taus_two)];
    let t0 = Instant::now();
    let report = check_insertion_derivative(&samples, 1e-12, 1e-6).unwrap();
    let elapsed = t0.elapsed();
    verdict("9 (insertion derivative)", &report, elapsed, Duration::from_secs(60));
}

#[test]
fn criterion_10_suite_runs_are_bit_identical() {
    let config = io::default_suite().unwrap();
    let first = verify::run_suite(&config).unwrap();
    let second = verify::run_suite(&config).unwrap();
    let identical = first.to_json() == second.to_json();
    println!(
        "criterion 10 (deterministic reports): {} (suite {}, controls {}/{} rejected)",
        if identical && first.passed { "PASS" } else { "FAIL" },
        if first.passed { "PASS" } else { "FAIL" },
        first.controls.iter().filter(|c| c.rejected).count(),
        first.controls.len(),
    );
    assert!(first.passed, "default suite must pass");
    assert!(identical, "two runs produced different report bytes");
}
