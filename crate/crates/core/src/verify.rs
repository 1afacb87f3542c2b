//! The transformation identities as executable checks. Every check
//! evaluates both sides of one identity on a configured sample set, records
//! one residual per sample, and passes only when every residual beats the
//! check tolerance. A suite run executes all checks concurrently plus one
//! negative control per check — the same computation with one input
//! deliberately perturbed, which must fail — so a vacuous pass cannot go
//! unnoticed. Reports assemble in a canonical order regardless of thread
//! scheduling, and two runs of the same suite produce identical bytes.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::branching::SublatticePair;
use crate::chars::ModuleCharacterSet;
use crate::error::{Error, Result};
use crate::kernels::{self, SiegelPoint};
use crate::lattice::IntegralLattice;
use crate::linalg::{self, CMat};
use crate::modular::{self, ModularDatum};

/// Size of the deliberate perturbation applied by every negative control.
pub const CONTROL_PERTURBATION: f64 = 1e-3;
/// Default absolute tolerance for the inner theta and eta evaluations.
pub const DEFAULT_EVAL_TOL: f64 = 1e-12;
/// Entry bound for SL2(Z) inputs; keeps the word decomposition within
/// exact integer arithmetic.
pub const MAX_SL2_ENTRY: i64 = 1 << 20;
/// Central-difference step for first derivatives.
const FD_STEP: f64 = 1e-5;
/// Central-difference step for the mixed second derivatives.
const FD_MIXED_STEP: f64 = 1e-4;
/// The vacuum column of a valid S-matrix must clear this floor in modulus.
const VACUUM_FLOOR: f64 = 1e-6;

/// Canonical check names, in report order.
pub const CHECK_NAMES: [&str; 12] = [
    "poisson-inversion",
    "character-transform",
    "diagonal-trace-transform",
    "siegel-trace-inversion",
    "theta-prefactor-scalar",
    "theta-prefactor-matrix",
    "dual-pair-sum-inversion",
    "insertion-derivative",
    "modular-data",
    "modular-relations",
    "branching-transform",
    "branching-coverage",
];

// ---------------------------------------------------------------------------
// SL2(Z) words and their action
// ---------------------------------------------------------------------------

/// An integer matrix `[[a, b], [c, d]]`.
pub type Sl2Matrix = [[i64; 2]; 2];

/// The inversion generator `S = [[0, -1], [1, 0]]`.
pub const GAMMA_S: Sl2Matrix = [[0, -1], [1, 0]];
/// The translation generator `T = [[1, 1], [0, 1]]`.
pub const GAMMA_T: Sl2Matrix = [[1, 1], [0, 1]];

/// One factor of a word in the generators: `S` or a translation power `T^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    S,
    T(i64),
}

pub fn sl2_mul(a: Sl2Matrix, b: Sl2Matrix) -> Sl2Matrix {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Decomposes `gamma` into a word in `S` and `T` by the continued-fraction
/// algorithm: while the bottom-left entry is nonzero, split off `T^n S`
/// with `n = floor(a/c)`, which strictly shrinks `|c|`; the remaining
/// upper-triangular matrix is `T^b` or `S^2 T^{-b}`.
pub fn sl2_word(gamma: Sl2Matrix) -> Result<Vec<Letter>> {
    for row in &gamma {
        for &e in row {
            if e.abs() > MAX_SL2_ENTRY {
                return Err(Error::InvalidInput(format!(
                    "SL2(Z) entry {e} exceeds the supported bound {MAX_SL2_ENTRY}"
                )));
            }
        }
    }
    let det = gamma[0][0] as i128 * gamma[1][1] as i128 - gamma[0][1] as i128 * gamma[1][0] as i128;
    if det != 1 {
        return Err(Error::NotInSL2Z { det: det as i64 });
    }
    let mut m = [
        [gamma[0][0] as i128, gamma[0][1] as i128],
        [gamma[1][0] as i128, gamma[1][1] as i128],
    ];
    let mut word = Vec::new();
    while m[1][0] != 0 {
        let n = m[0][0].div_euclid(m[1][0]);
        word.push(Letter::T(n as i64));
        word.push(Letter::S);
        // m <- S^{-1} T^{-n} m, so that gamma = (word) * m still holds.
        let r0 = [m[0][0] - n * m[1][0], m[0][1] - n * m[1][1]];
        m[0] = m[1];
        m[1] = [-r0[0], -r0[1]];
    }
    let (a, b) = (m[0][0], m[0][1]);
    if a == 1 {
        if b != 0 {
            word.push(Letter::T(b as i64));
        }
    } else {
        // [[-1, b], [0, -1]] = S^2 T^{-b}.
        word.push(Letter::S);
        word.push(Letter::S);
        if b != 0 {
            word.push(Letter::T(-b as i64));
        }
    }
    Ok(word)
}

/// Multiplies a word back into a matrix; inverse of `sl2_word`.
pub fn sl2_from_word(word: &[Letter]) -> Sl2Matrix {
    let mut m = [[1, 0], [0, 1]];
    for &letter in word {
        m = match letter {
            Letter::S => sl2_mul(m, GAMMA_S),
            Letter::T(n) => sl2_mul(m, [[1, n], [0, 1]]),
        };
    }
    m
}

/// Fractional-linear action of `gamma` on the upper half-plane.
pub fn moebius(gamma: Sl2Matrix, tau: Complex64) -> Complex64 {
    let a = gamma[0][0] as f64;
    let b = gamma[0][1] as f64;
    let c = gamma[1][0] as f64;
    let d = gamma[1][1] as f64;
    (a * tau + b) / (c * tau + d)
}

/// The matrix `A^gamma` with `char_j(gamma tau) = sum_h A^gamma_{jh}
/// char_h(tau)`: the product of the letter actions, with `S` acting by the
/// validated S-matrix and `T^n` by the exact phases
/// `exp(2 pi i n (wt_j - g/24))`.
pub fn gamma_representation(
    m: &ModuleCharacterSet,
    datum: &ModularDatum,
    gamma: Sl2Matrix,
) -> Result<CMat> {
    let word = sl2_word(gamma)?;
    let n_mod = m.num_modules();
    let g = m.lattice().rank() as i64;
    let mut rho = linalg::cmat_identity(n_mod);
    for letter in word {
        match letter {
            Letter::S => rho = linalg::cmat_mul(&rho, datum.s()),
            Letter::T(n) => {
                for j in 0..n_mod {
                    let frac: Ratio<i64> =
                        (m.conformal_weight(j) - Ratio::new(g, 24)) * Ratio::from_integer(n);
                    let phase = kernels::unit_phase(frac);
                    for row in rho.iter_mut() {
                        row[j] *= phase;
                    }
                }
            }
        }
    }
    Ok(rho)
}

/// The inversion prefactor `det(-iA)^{-1/2}` with the principal branch,
/// rejecting points whose determinant falls within `1e-6` of the cut.
pub fn inversion_prefactor(a: &SiegelPoint) -> Result<Complex64> {
    let g = a.dim();
    let mut m = linalg::cmat_zero(g, g);
    for i in 0..g {
        for j in 0..g {
            m[i][j] = Complex64::new(0.0, -1.0) * a.entry(i, j);
        }
    }
    let det = linalg::cmat_det(&m);
    let arg = det.arg();
    if arg.abs() > PI - 1e-6 {
        return Err(Error::BranchAmbiguity { arg });
    }
    Ok(det.sqrt().finv())
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Outcome of one check: the serialized sample points, one residual per
/// sample, and the verdict. `passed` is true exactly when every residual
/// is finite and their maximum is below `tolerance`; the constructor
/// enforces this, so a report can never claim a pass its residuals do not
/// support. Wall time is informational and excluded from serialization so
/// reports compare bit-for-bit across runs.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub sample_points: Vec<String>,
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CheckReport {
    pub fn new(
        check_name: String,
        sample_points: Vec<String>,
        residuals: Vec<f64>,
        tolerance: f64,
        wall_time: Duration,
    ) -> Self {
        let finite = residuals.iter().all(|r| r.is_finite());
        let max = residuals.iter().copied().fold(0.0f64, f64::max);
        let passed = finite && max < tolerance;
        CheckReport { check_name, sample_points, residuals, tolerance, passed, wall_time }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0f64, f64::max)
    }
}

/// Outcome of one negative control: the perturbed residual and whether the
/// check rejected it (which it must).
#[derive(Debug, Clone, Serialize)]
pub struct ControlReport {
    pub check_name: String,
    pub residual: f64,
    pub rejected: bool,
}

impl ControlReport {
    fn new(check_name: &str, residual: f64, tolerance: f64) -> Self {
        ControlReport {
            check_name: check_name.to_owned(),
            residual,
            rejected: !(residual < tolerance),
        }
    }
}

/// Every check report plus every control report; `passed` requires all
/// checks to pass and all controls to be rejected.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub reports: Vec<CheckReport>,
    pub controls: Vec<ControlReport>,
    pub passed: bool,
}

impl SuiteResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite reports serialize")
    }
}

// ---------------------------------------------------------------------------
// Suite configuration
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct NamedPair {
    pub name: String,
    pub pair: SublatticePair,
}

#[derive(Debug, Clone)]
pub struct PoissonSection {
    pub lattice: String,
    pub taus: Vec<Complex64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CharacterSection {
    pub lattices: Vec<String>,
    pub gammas: Vec<Sl2Matrix>,
    pub taus: Vec<Complex64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct DiagonalSection {
    pub lattices: Vec<String>,
    pub gamma: Sl2Matrix,
    pub tau_pairs: Vec<[Complex64; 2]>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct SiegelSection {
    pub lattice: String,
    pub points: Vec<SiegelPoint>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct PrefactorScalarSection {
    pub lattice: String,
    pub taus: Vec<Complex64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct PrefactorMatrixSection {
    pub lattice: String,
    pub points: Vec<SiegelPoint>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct DualPairSection {
    pub samples: Vec<(String, SiegelPoint)>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct InsertionSection {
    pub samples: Vec<(String, Vec<Complex64>)>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct ModularSection {
    pub lattices: Vec<String>,
    pub agreement_tolerance: f64,
    pub relation_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct BranchingSection {
    pub pairs: Vec<String>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CoverageSection {
    pub pair: String,
    pub taus: Vec<Complex64>,
    pub tolerance: f64,
}

/// Everything a suite run needs: the lattice and pair pool, the inner
/// evaluation tolerance, and one section of samples per check.
#[derive(Debug)]
pub struct SuiteConfig {
    pub lattices: Vec<IntegralLattice>,
    pub pairs: Vec<NamedPair>,
    pub eval_tolerance: f64,
    pub poisson: PoissonSection,
    pub character: CharacterSection,
    pub diagonal: DiagonalSection,
    pub siegel: SiegelSection,
    pub prefactor_scalar: PrefactorScalarSection,
    pub prefactor_matrix: PrefactorMatrixSection,
    pub dual_pair: DualPairSection,
    pub insertion: InsertionSection,
    pub modular: ModularSection,
    pub branching: BranchingSection,
    pub coverage: CoverageSection,
}

impl SuiteConfig {
    pub fn lattice(&self, name: &str) -> Result<&IntegralLattice> {
        self.lattices
            .iter()
            .find(|l| l.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("suite references unknown lattice {name:?}")))
    }

    pub fn pair(&self, name: &str) -> Result<&SublatticePair> {
        self.pairs
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.pair)
            .ok_or_else(|| Error::InvalidInput(format!("suite references unknown pair {name:?}")))
    }

    fn charset(&self, name: &str) -> Result<ModuleCharacterSet> {
        Ok(ModuleCharacterSet::new(self.lattice(name)?.clone()))
    }

    /// Replaces every check tolerance with `t` (the `--tol` override).
    pub fn override_tolerances(&mut self, t: f64) {
        self.poisson.tolerance = t;
        self.character.tolerance = t;
        self.diagonal.tolerance = t;
        self.siegel.tolerance = t;
        self.prefactor_scalar.tolerance = t;
        self.prefactor_matrix.tolerance = t;
        self.dual_pair.tolerance = t;
        self.insertion.tolerance = t;
        self.modular.agreement_tolerance = t;
        self.modular.relation_tolerance = t;
        self.branching.tolerance = t;
        self.coverage.tolerance = t;
    }

    /// Extends the Siegel-point sample sets with `count` pseudorandom
    /// upper-half-space points per section: `X + i(B^T B + 0.2 I)` with the
    /// entries of the symmetric `X` and of `B` drawn uniformly from
    /// `[-1, 1)`. Prefactor samples falling near the branch cut are redrawn.
    pub fn extend_with_seed(&mut self, seed: u64, count: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.lattice(&self.siegel.lattice)?.rank();
        for _ in 0..count {
            self.siegel.points.push(random_siegel_point(&mut rng, g)?);
        }
        let g = self.lattice(&self.prefactor_matrix.lattice)?.rank();
        for _ in 0..count {
            let mut point = None;
            for _ in 0..64 {
                let p = random_siegel_point(&mut rng, g)?;
                if inversion_prefactor(&p).is_ok() {
                    point = Some(p);
                    break;
                }
            }
            self.prefactor_matrix.points.push(point.ok_or(Error::NoConvergence {
                what: "prefactor sample rejection",
                iterations: 64,
                residual: f64::NAN,
            })?);
        }
        Ok(())
    }
}

fn random_siegel_point(rng: &mut ChaCha8Rng, g: usize) -> Result<SiegelPoint> {
    let mut x = vec![vec![0.0f64; g]; g];
    for i in 0..g {
        for j in i..g {
            let v: f64 = rng.gen_range(-1.0..1.0);
            x[i][j] = v;
            x[j][i] = v;
        }
    }
    let b: Vec<Vec<f64>> =
        (0..g).map(|_| (0..g).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut entries = linalg::cmat_zero(g, g);
    for i in 0..g {
        for j in 0..g {
            let mut y = if i == j { 0.2 } else { 0.0 };
            for (row, _) in b.iter().zip(0..) {
                y += row[i] * row[j];
            }
            entries[i][j] = Complex64::new(x[i][j], y);
        }
    }
    SiegelPoint::new(entries)
}

// ---------------------------------------------------------------------------
// Check bodies
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
struct Partial {
    samples: Vec<String>,
    residuals: Vec<f64>,
}

impl Partial {
    fn push(&mut self, sample: String, residual: f64) {
        self.samples.push(sample);
        self.residuals.push(residual);
    }

    fn merge(&mut self, other: Partial) {
        self.samples.extend(other.samples);
        self.residuals.extend(other.residuals);
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.4}{:+.4}i", z.re, z.im)
}

fn fmt_taus(taus: &[Complex64]) -> String {
    let inner: Vec<String> = taus.iter().map(|&t| fmt_c(t)).collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_point(a: &SiegelPoint) -> String {
    let rows: Vec<String> = a
        .entries()
        .iter()
        .map(|row| {
            let inner: Vec<String> = row.iter().map(|&z| fmt_c(z)).collect();
            format!("[{}]", inner.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_sl2(gamma: Sl2Matrix) -> String {
    format!(
        "[[{},{}],[{},{}]]",
        gamma[0][0], gamma[0][1], gamma[1][0], gamma[1][1]
    )
}

/// Scalar theta inversion: `theta_j(-1/tau)` against
/// `sqrt(-i tau) |D|^{-1/2} sum_h exp(-2 pi i (j,h)) theta_h(tau)`.
fn poisson_partial(l: &IntegralLattice, taus: &[Complex64], eval_tol: f64) -> Result<Partial> {
    if l.rank() != 1 {
        return Err(Error::InvalidInput(
            "the scalar inversion check needs a rank-one lattice".into(),
        ));
    }
    let d = l.discriminant_group();
    let r = d.cosets().len();
    let order = (d.order() as f64).sqrt();
    let mut out = Partial::default();
    for &tau in taus {
        let point = SiegelPoint::scalar(tau)?;
        let inv = point.neg_inverse()?;
        let thetas: Vec<Complex64> = (0..r)
            .map(|h| kernels::siegel_theta(l, d.coset(h), &point, eval_tol))
            .collect::<Result<_>>()?;
        let prefactor = (Complex64::new(0.0, -1.0) * tau).sqrt();
        for j in 0..r {
            let lhs = kernels::siegel_theta(l, d.coset(j), &inv, eval_tol)?;
            let mut rhs = Complex64::zero();
            for h in 0..r {
                rhs += kernels::unit_phase(-d.pairing(j, h)) * thetas[h];
            }
            rhs *= prefactor / order;
            out.push(
                format!("{} module {} tau {}", l.name(), j, fmt_c(tau)),
                (lhs - rhs).norm(),
            );
        }
    }
    Ok(out)
}

/// Single-variable character transform under a word in `S` and `T`:
/// `char_j(gamma tau)` against `sum_h rho(gamma)_{jh} char_h(tau)`.
fn character_partial(
    m: &ModuleCharacterSet,
    gammas: &[Sl2Matrix],
    taus: &[Complex64],
) -> Result<Partial> {
    let datum = modular::best_modular_datum(m)?;
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let mut out = Partial::default();
    for &gamma in gammas {
        let rho = gamma_representation(m, &datum, gamma)?;
        for &tau in taus {
            let values: Vec<Complex64> =
                (0..n).map(|h| m.char_single(h, tau)).collect::<Result<_>>()?;
            for j in 0..n {
                let lhs = m.char_single(j, moebius(gamma, tau))?;
                let mut rhs = Complex64::zero();
                for h in 0..n {
                    rhs += rho[j][h] * values[h];
                }
                out.push(
                    format!("{name} gamma {} tau {} module {j}", fmt_sl2(gamma), fmt_c(tau)),
                    (lhs - rhs).norm(),
                );
            }
        }
    }
    Ok(out)
}

/// Diagonal multi-variable transform: the same `gamma` applied to every
/// variable, with the matrix `rho(gamma)` on the right-hand side.
fn diagonal_partial(
    m: &ModuleCharacterSet,
    gamma: Sl2Matrix,
    tau_pairs: &[[Complex64; 2]],
    eval_tol: f64,
) -> Result<Partial> {
    if m.lattice().rank() != 2 {
        return Err(Error::InvalidInput(
            "the diagonal transform check is configured with tau pairs and needs rank two".into(),
        ));
    }
    let datum = modular::best_modular_datum(m)?;
    let rho = gamma_representation(m, &datum, gamma)?;
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let mut out = Partial::default();
    for pair in tau_pairs {
        let transformed = [moebius(gamma, pair[0]), moebius(gamma, pair[1])];
        let values: Vec<Complex64> = (0..n)
            .map(|h| m.trace_diagonal(h, pair, eval_tol))
            .collect::<Result<_>>()?;
        for j in 0..n {
            let lhs = m.trace_diagonal(j, &transformed, eval_tol)?;
            let mut rhs = Complex64::zero();
            for h in 0..n {
                rhs += rho[j][h] * values[h];
            }
            out.push(
                format!(
                    "{name} gamma {} taus ({}, {}) module {j}",
                    fmt_sl2(gamma),
                    fmt_c(pair[0]),
                    fmt_c(pair[1])
                ),
                (lhs - rhs).norm(),
            );
        }
    }
    Ok(out)
}

/// Full Siegel-point inversion of the traces:
/// `trace_j(-A^{-1})` against `sum_h s_{jh} trace_h(A)`.
fn siegel_partial(
    m: &ModuleCharacterSet,
    datum: &ModularDatum,
    point: &SiegelPoint,
    eval_tol: f64,
) -> Result<Partial> {
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let inv = point.neg_inverse()?;
    let values: Vec<Complex64> =
        (0..n).map(|h| m.trace_hg(h, point, eval_tol)).collect::<Result<_>>()?;
    let mut out = Partial::default();
    for j in 0..n {
        let lhs = m.trace_hg(j, &inv, eval_tol)?;
        let mut rhs = Complex64::zero();
        for h in 0..n {
            rhs += datum.s_entry(j, h) * values[h];
        }
        out.push(
            format!("{name} point {} module {j}", fmt_point(point)),
            (lhs - rhs).norm(),
        );
    }
    Ok(out)
}

/// Theta inversion with the explicit prefactor:
/// `det(-iA)^{-1/2} theta_j(-A^{-1})` against the closed-form S-matrix
/// applied to the theta vector; `factor_scale` is 1 for the check and
/// `1 + CONTROL_PERTURBATION` for its negative control.
fn prefactor_partial(
    m: &ModuleCharacterSet,
    point: &SiegelPoint,
    eval_tol: f64,
    factor_scale: f64,
) -> Result<Partial> {
    let closed = modular::s_matrix_closed_form(m);
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let f = inversion_prefactor(point)? * factor_scale;
    let inv = point.neg_inverse()?;
    let values: Vec<Complex64> =
        (0..n).map(|h| m.gamma(h, point, eval_tol)).collect::<Result<_>>()?;
    let mut out = Partial::default();
    for j in 0..n {
        let lhs = f * m.gamma(j, &inv, eval_tol)?;
        let mut rhs = Complex64::zero();
        for h in 0..n {
            rhs += closed.s_entry(j, h) * values[h];
        }
        out.push(
            format!("{name} point {} module {j}", fmt_point(point)),
            (lhs - rhs).norm(),
        );
    }
    Ok(out)
}

/// The inversion-invariant sum `sum_i trace_i(A) trace_{i'}(A)` with
/// `i'` the dual module, compared between `A` and `-A^{-1}`.
fn dual_pair_partial(
    m: &ModuleCharacterSet,
    point: &SiegelPoint,
    eval_tol: f64,
    lhs_point: &SiegelPoint,
) -> Result<Partial> {
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let sum_at = |pt: &SiegelPoint| -> Result<Complex64> {
        let traces: Vec<Complex64> =
            (0..n).map(|i| m.trace_hg(i, pt, eval_tol)).collect::<Result<_>>()?;
        let mut acc = Complex64::zero();
        for (i, &t) in traces.iter().enumerate() {
            acc += t * traces[m.disc().dual_index(i)];
        }
        Ok(acc)
    };
    let lhs = sum_at(&lhs_point.neg_inverse()?)?;
    let rhs = sum_at(point)?;
    let mut out = Partial::default();
    out.push(format!("{name} point {}", fmt_point(point)), (lhs - rhs).norm());
    Ok(out)
}

/// Cartan insertion against `2 pi i` times the numerical tau-derivative of
/// the diagonal trace, plus symmetry of the mixed second derivatives.
/// Residuals are relative.
fn insertion_partial(
    m: &ModuleCharacterSet,
    taus: &[Complex64],
    eval_tol: f64,
    insertion_scale: f64,
) -> Result<Partial> {
    let g = m.lattice().rank();
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut out = Partial::default();
    let insertion_at = |j: usize, axis: usize, at: &[Complex64]| -> Result<Complex64> {
        m.insertion_trace_cartan(j, axis, at, eval_tol)
    };
    for j in 0..n {
        for axis in 0..g {
            let ins = insertion_at(j, axis, taus)? * insertion_scale;
            let mut plus = taus.to_vec();
            let mut minus = taus.to_vec();
            plus[axis] += FD_STEP;
            minus[axis] -= FD_STEP;
            let deriv = (m.trace_diagonal(j, &plus, eval_tol)?
                - m.trace_diagonal(j, &minus, eval_tol)?)
                / (2.0 * FD_STEP);
            let target = two_pi_i * deriv;
            let denom = ins.norm().max(target.norm()).max(1e-9);
            out.push(
                format!("{name} taus {} module {j} axis {axis}", fmt_taus(taus)),
                (ins - target).norm() / denom,
            );
        }
        for p in 0..g {
            for q in (p + 1)..g {
                let cross = |outer: usize, inner: usize| -> Result<Complex64> {
                    let mut plus = taus.to_vec();
                    let mut minus = taus.to_vec();
                    plus[outer] += FD_MIXED_STEP;
                    minus[outer] -= FD_MIXED_STEP;
                    Ok((insertion_at(j, inner, &plus)? - insertion_at(j, inner, &minus)?)
                        / (2.0 * FD_MIXED_STEP))
                };
                let dq_of_p = cross(q, p)?;
                let dp_of_q = cross(p, q)?;
                let denom = dq_of_p.norm().max(dp_of_q.norm()).max(1e-9);
                out.push(
                    format!("{name} taus {} module {j} mixed ({p},{q})", fmt_taus(taus)),
                    (dq_of_p - dp_of_q).norm() / denom,
                );
            }
        }
    }
    Ok(out)
}

/// Numeric S-matrix against the discriminant closed form, plus the floor
/// on the vacuum column that the fusion argument needs.
fn modular_data_partial(m: &ModuleCharacterSet) -> Result<Partial> {
    let numeric = modular::s_matrix_numeric(m)?;
    let closed = modular::s_matrix_closed_form(m);
    let n = m.num_modules();
    let name = m.lattice().name().to_owned();
    let mut deviation = 0.0f64;
    for j in 0..n {
        for h in 0..n {
            deviation = deviation.max((closed.s_entry(j, h) - numeric.s_entry(j, h)).norm());
        }
    }
    let mut out = Partial::default();
    out.push(format!("{name} closed-form agreement"), deviation);
    let deficit = (VACUUM_FLOOR - modular::vacuum_column_min(&numeric)).max(0.0);
    out.push(format!("{name} vacuum column floor"), deficit);
    Ok(out)
}

/// Group relations of the best available modular datum.
fn modular_relations_partial(m: &ModuleCharacterSet) -> Result<Partial> {
    let datum = modular::best_modular_datum(m)?;
    let name = m.lattice().name().to_owned();
    let mut out = Partial::default();
    match modular::validate_group_relations(&datum, m) {
        Ok(d) => {
            out.push(format!("{name} symmetry"), d.symmetry);
            out.push(format!("{name} unitarity"), d.unitarity);
            out.push(format!("{name} charge conjugation"), d.s_squared);
            out.push(format!("{name} (ST)^3"), d.st_cubed);
        }
        Err(Error::ValidationMismatch { deviation }) => {
            out.push(format!("{name} relations (threshold exceeded)"), deviation);
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

fn pair_data(
    pair: &SublatticePair,
) -> (ModuleCharacterSet, ModuleCharacterSet, ModuleCharacterSet) {
    (
        ModuleCharacterSet::new(pair.full().clone()),
        ModuleCharacterSet::new(pair.part(0).clone()),
        ModuleCharacterSet::new(pair.part(1).clone()),
    )
}

/// Intertwining of the branching matrices with the modular data:
/// `S^1 R^k (S^2)^T = sum_h s^L_{kh} R^h`, one Frobenius residual per
/// ambient module.
fn branching_partial(name: &str, pair: &SublatticePair) -> Result<Partial> {
    let (full, p1, p2) = pair_data(pair);
    let d_full = modular::best_modular_datum(&full)?;
    let d1 = modular::best_modular_datum(&p1)?;
    let d2 = modular::best_modular_datum(&p2)?;
    let residuals = pair.intertwining_residuals(&d_full, &d1, &d2)?;
    let mut out = Partial::default();
    for (k, r) in residuals.into_iter().enumerate() {
        out.push(format!("{name} module {k}"), r);
    }
    Ok(out)
}

/// Coverage of every part module by some decomposition, plus the character
/// identity `sum_{ij} r^k_{ij} chi^1_i chi^2_j = chi^L_k`; `lhs_scale`
/// perturbs the full character for the negative control.
fn coverage_partial(
    name: &str,
    pair: &SublatticePair,
    taus: &[Complex64],
    lhs_scale: f64,
) -> Result<Partial> {
    let coverage = pair.module_coverage()?;
    let mut out = Partial::default();
    let missing1 = coverage.part1.iter().filter(|w| w.is_none()).count();
    let missing2 = coverage.part2.iter().filter(|w| w.is_none()).count();
    out.push(
        format!(
            "{name} coverage ({} of {} part-one, {} of {} part-two modules witnessed)",
            coverage.part1.len() - missing1,
            coverage.part1.len(),
            coverage.part2.len() - missing2,
            coverage.part2.len()
        ),
        (missing1 + missing2) as f64,
    );

    let (full, p1, p2) = pair_data(pair);
    let matrices = pair.all_branching_matrices()?;
    for (k, r) in matrices.iter().enumerate() {
        for &tau in taus {
            let lhs = full.char_single(k, tau)? * lhs_scale;
            let mut rhs = Complex64::zero();
            for i in 0..p1.num_modules() {
                for j in 0..p2.num_modules() {
                    if r.entry(i, j) != 0 {
                        rhs += Complex64::new(r.entry(i, j) as f64, 0.0)
                            * p1.char_single(i, tau)?
                            * p2.char_single(j, tau)?;
                    }
                }
            }
            out.push(
                format!("{name} module {k} tau {}", fmt_c(tau)),
                (lhs - rhs).norm(),
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Public check entry points
// ---------------------------------------------------------------------------

fn report_from(
    name: &str,
    partial: Partial,
    tolerance: f64,
    started: Instant,
) -> CheckReport {
    CheckReport::new(
        name.to_owned(),
        partial.samples,
        partial.residuals,
        tolerance,
        started.elapsed(),
    )
}

pub fn check_poisson_inversion(
    l: &IntegralLattice,
    taus: &[Complex64],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let partial = poisson_partial(l, taus, eval_tol)?;
    Ok(report_from(CHECK_NAMES[0], partial, tolerance, t0))
}

pub fn check_character_transform(
    ms: &[ModuleCharacterSet],
    gammas: &[Sl2Matrix],
    taus: &[Complex64],
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for m in ms {
        partial.merge(character_partial(m, gammas, taus)?);
    }
    Ok(report_from(CHECK_NAMES[1], partial, tolerance, t0))
}

pub fn check_diagonal_trace_transform(
    ms: &[ModuleCharacterSet],
    gamma: Sl2Matrix,
    tau_pairs: &[[Complex64; 2]],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for m in ms {
        partial.merge(diagonal_partial(m, gamma, tau_pairs, eval_tol)?);
    }
    Ok(report_from(CHECK_NAMES[2], partial, tolerance, t0))
}

pub fn check_siegel_trace_inversion(
    m: &ModuleCharacterSet,
    points: &[SiegelPoint],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let datum = modular::best_modular_datum(m)?;
    let mut partial = Partial::default();
    for point in points {
        partial.merge(siegel_partial(m, &datum, point, eval_tol)?);
    }
    Ok(report_from(CHECK_NAMES[3], partial, tolerance, t0))
}

pub fn check_theta_prefactor_scalar(
    m: &ModuleCharacterSet,
    taus: &[Complex64],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    if m.lattice().rank() != 1 {
        return Err(Error::InvalidInput(
            "the scalar prefactor check needs a rank-one lattice".into(),
        ));
    }
    let mut partial = Partial::default();
    for &tau in taus {
        let point = SiegelPoint::scalar(tau)?;
        partial.merge(prefactor_partial(m, &point, eval_tol, 1.0)?);
    }
    Ok(report_from(CHECK_NAMES[4], partial, tolerance, t0))
}

pub fn check_theta_prefactor_matrix(
    m: &ModuleCharacterSet,
    points: &[SiegelPoint],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for point in points {
        partial.merge(prefactor_partial(m, point, eval_tol, 1.0)?);
    }
    Ok(report_from(CHECK_NAMES[5], partial, tolerance, t0))
}

pub fn check_dual_pair_sum_inversion(
    samples: &[(&ModuleCharacterSet, &SiegelPoint)],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for (m, point) in samples {
        partial.merge(dual_pair_partial(m, point, eval_tol, point)?);
    }
    Ok(report_from(CHECK_NAMES[6], partial, tolerance, t0))
}

pub fn check_insertion_derivative(
    samples: &[(&ModuleCharacterSet, &[Complex64])],
    eval_tol: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for (m, taus) in samples {
        partial.merge(insertion_partial(m, taus, eval_tol, 1.0)?);
    }
    Ok(report_from(CHECK_NAMES[7], partial, tolerance, t0))
}

pub fn check_modular_data(ms: &[ModuleCharacterSet], tolerance: f64) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for m in ms {
        partial.merge(modular_data_partial(m)?);
    }
    Ok(report_from(CHECK_NAMES[8], partial, tolerance, t0))
}

pub fn check_modular_relations(ms: &[ModuleCharacterSet], tolerance: f64) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for m in ms {
        partial.merge(modular_relations_partial(m)?);
    }
    Ok(report_from(CHECK_NAMES[9], partial, tolerance, t0))
}

pub fn check_branching_transform(
    pairs: &[(&str, &SublatticePair)],
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let mut partial = Partial::default();
    for (name, pair) in pairs {
        partial.merge(branching_partial(name, pair)?);
    }
    Ok(report_from(CHECK_NAMES[10], partial, tolerance, t0))
}

pub fn check_branching_coverage(
    name: &str,
    pair: &SublatticePair,
    taus: &[Complex64],
    tolerance: f64,
) -> Result<CheckReport> {
    let t0 = Instant::now();
    let partial = coverage_partial(name, pair, taus, 1.0)?;
    Ok(report_from(CHECK_NAMES[11], partial, tolerance, t0))
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

/// One unit of concurrent work: a (check, sample-slot) pair.
#[derive(Debug, Clone, Copy)]
enum JobSpec {
    Poisson,
    Character(usize),
    Diagonal(usize),
    Siegel(usize),
    PrefactorScalar,
    PrefactorMatrix(usize),
    DualPair(usize),
    Insertion(usize),
    ModularData(usize),
    ModularRelations(usize),
    BranchingTransform(usize),
    Coverage,
}

fn job_check_index(spec: JobSpec) -> usize {
    match spec {
        JobSpec::Poisson => 0,
        JobSpec::Character(_) => 1,
        JobSpec::Diagonal(_) => 2,
        JobSpec::Siegel(_) => 3,
        JobSpec::PrefactorScalar => 4,
        JobSpec::PrefactorMatrix(_) => 5,
        JobSpec::DualPair(_) => 6,
        JobSpec::Insertion(_) => 7,
        JobSpec::ModularData(_) => 8,
        JobSpec::ModularRelations(_) => 9,
        JobSpec::BranchingTransform(_) => 10,
        JobSpec::Coverage => 11,
    }
}

fn job_list(config: &SuiteConfig) -> Vec<JobSpec> {
    let mut jobs = vec![JobSpec::Poisson];
    jobs.extend((0..config.character.lattices.len()).map(JobSpec::Character));
    jobs.extend((0..config.diagonal.lattices.len()).map(JobSpec::Diagonal));
    jobs.extend((0..config.siegel.points.len()).map(JobSpec::Siegel));
    jobs.push(JobSpec::PrefactorScalar);
    jobs.extend((0..config.prefactor_matrix.points.len()).map(JobSpec::PrefactorMatrix));
    jobs.extend((0..config.dual_pair.samples.len()).map(JobSpec::DualPair));
    jobs.extend((0..config.insertion.samples.len()).map(JobSpec::Insertion));
    jobs.extend((0..config.modular.lattices.len()).map(JobSpec::ModularData));
    jobs.extend((0..config.modular.lattices.len()).map(JobSpec::ModularRelations));
    jobs.extend((0..config.branching.pairs.len()).map(JobSpec::BranchingTransform));
    jobs.push(JobSpec::Coverage);
    jobs
}

fn run_job(config: &SuiteConfig, spec: JobSpec) -> Result<Partial> {
    let tol = config.eval_tolerance;
    match spec {
        JobSpec::Poisson => {
            let l = config.lattice(&config.poisson.lattice)?;
            poisson_partial(l, &config.poisson.taus, tol)
        }
        JobSpec::Character(i) => {
            let m = config.charset(&config.character.lattices[i])?;
            character_partial(&m, &config.character.gammas, &config.character.taus)
        }
        JobSpec::Diagonal(i) => {
            let m = config.charset(&config.diagonal.lattices[i])?;
            diagonal_partial(&m, config.diagonal.gamma, &config.diagonal.tau_pairs, tol)
        }
        JobSpec::Siegel(i) => {
            let m = config.charset(&config.siegel.lattice)?;
            let datum = modular::best_modular_datum(&m)?;
            siegel_partial(&m, &datum, &config.siegel.points[i], tol)
        }
        JobSpec::PrefactorScalar => {
            let m = config.charset(&config.prefactor_scalar.lattice)?;
            if m.lattice().rank() != 1 {
                return Err(Error::InvalidInput(
                    "the scalar prefactor check needs a rank-one lattice".into(),
                ));
            }
            let mut out = Partial::default();
            for &tau in &config.prefactor_scalar.taus {
                let point = SiegelPoint::scalar(tau)?;
                out.merge(prefactor_partial(&m, &point, tol, 1.0)?);
            }
            Ok(out)
        }
        JobSpec::PrefactorMatrix(i) => {
            let m = config.charset(&config.prefactor_matrix.lattice)?;
            prefactor_partial(&m, &config.prefactor_matrix.points[i], tol, 1.0)
        }
        JobSpec::DualPair(i) => {
            let (name, point) = &config.dual_pair.samples[i];
            let m = config.charset(name)?;
            dual_pair_partial(&m, point, tol, point)
        }
        JobSpec::Insertion(i) => {
            let (name, taus) = &config.insertion.samples[i];
            let m = config.charset(name)?;
            insertion_partial(&m, taus, tol, 1.0)
        }
        JobSpec::ModularData(i) => {
            let m = config.charset(&config.modular.lattices[i])?;
            modular_data_partial(&m)
        }
        JobSpec::ModularRelations(i) => {
            let m = config.charset(&config.modular.lattices[i])?;
            modular_relations_partial(&m)
        }
        JobSpec::BranchingTransform(i) => {
            let name = &config.branching.pairs[i];
            branching_partial(name, config.pair(name)?)
        }
        JobSpec::Coverage => {
            let name = &config.coverage.pair;
            coverage_partial(name, config.pair(name)?, &config.coverage.taus, 1.0)
        }
    }
}

fn tolerance_of(config: &SuiteConfig, check: usize) -> f64 {
    match check {
        0 => config.poisson.tolerance,
        1 => config.character.tolerance,
        2 => config.diagonal.tolerance,
        3 => config.siegel.tolerance,
        4 => config.prefactor_scalar.tolerance,
        5 => config.prefactor_matrix.tolerance,
        6 => config.dual_pair.tolerance,
        7 => config.insertion.tolerance,
        8 => config.modular.agreement_tolerance,
        9 => config.modular.relation_tolerance,
        10 => config.branching.tolerance,
        11 => config.coverage.tolerance,
        _ => unreachable!("check index out of range"),
    }
}

/// Runs every check on the configured samples, distributing
/// (check, sample) jobs over the available threads, then runs every
/// negative control. Reports assemble in the canonical `CHECK_NAMES`
/// order regardless of completion order; two runs over the same
/// configuration produce identical reports.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteResult> {
    let specs = job_list(config);
    let n = specs.len();
    let slots: Mutex<Vec<Option<(Result<Partial>, Duration)>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let workers = thread::available_parallelism().map(|v| v.get()).unwrap_or(2).clamp(1, n.max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let t0 = Instant::now();
                let out = run_job(config, specs[i]);
                let elapsed = t0.elapsed();
                slots.lock().expect("no poisoned slot lock")[i] = Some((out, elapsed));
            });
        }
    });

    // Job order is canonical, so the first error (in job order) is the
    // deterministic one to surface.
    let mut partials = Vec::with_capacity(n);
    let mut elapsed = Vec::with_capacity(n);
    for slot in slots.into_inner().expect("no poisoned slot lock") {
        let (result, dt) = slot.expect("every job completed");
        partials.push(result?);
        elapsed.push(dt);
    }

    let mut reports = Vec::with_capacity(CHECK_NAMES.len());
    for check in 0..CHECK_NAMES.len() {
        let mut merged = Partial::default();
        let mut wall = Duration::ZERO;
        for (i, &spec) in specs.iter().enumerate() {
            if job_check_index(spec) == check {
                let p = std::mem::take(&mut partials[i]);
                merged.merge(p);
                wall += elapsed[i];
            }
        }
        reports.push(CheckReport::new(
            CHECK_NAMES[check].to_owned(),
            merged.samples,
            merged.residuals,
            tolerance_of(config, check),
            wall,
        ));
    }

    let controls = run_controls(config)?;
    let passed =
        reports.iter().all(|r| r.passed) && controls.iter().all(|c| c.rejected);
    Ok(SuiteResult { reports, controls, passed })
}

// ---------------------------------------------------------------------------
// Negative controls
// ---------------------------------------------------------------------------

fn first_sample<'a, T>(items: &'a [T], check: &str) -> Result<&'a T> {
    items.first().ok_or_else(|| {
        Error::InvalidInput(format!("negative control for {check} needs at least one sample"))
    })
}

/// A copy of `point` with its (0, 0) entry shifted by the control
/// perturbation along the real axis.
fn perturbed_point(point: &SiegelPoint) -> Result<SiegelPoint> {
    let mut entries = point.entries().clone();
    entries[0][0] += Complex64::new(CONTROL_PERTURBATION, 0.0);
    SiegelPoint::new(entries)
}

/// Reruns each check with one deliberately perturbed input (size
/// `CONTROL_PERTURBATION`); every one of these must fail its check, which
/// guards the suite against vacuous passes.
pub fn run_controls(config: &SuiteConfig) -> Result<Vec<ControlReport>> {
    let tol = config.eval_tolerance;
    let mut controls = Vec::with_capacity(CHECK_NAMES.len());

    // Scalar theta inversion with the left side evaluated at a shifted tau.
    {
        let section = &config.poisson;
        let l = config.lattice(&section.lattice)?;
        let d = l.discriminant_group();
        let r = d.cosets().len();
        let &tau = first_sample(&section.taus, CHECK_NAMES[0])?;
        let shifted = tau + CONTROL_PERTURBATION;
        let lhs = kernels::siegel_theta(
            l,
            d.coset(0),
            &SiegelPoint::scalar(shifted)?.neg_inverse()?,
            tol,
        )?;
        let mut rhs = Complex64::zero();
        for h in 0..r {
            rhs += kernels::unit_phase(-d.pairing(0, h))
                * kernels::siegel_theta(l, d.coset(h), &SiegelPoint::scalar(tau)?, tol)?;
        }
        rhs *= (Complex64::new(0.0, -1.0) * tau).sqrt() / (d.order() as f64).sqrt();
        controls.push(ControlReport::new(CHECK_NAMES[0], (lhs - rhs).norm(), section.tolerance));
    }

    // Character transform with the left side at a shifted tau.
    {
        let section = &config.character;
        let name = first_sample(&section.lattices, CHECK_NAMES[1])?;
        let &gamma = first_sample(&section.gammas, CHECK_NAMES[1])?;
        let &tau = first_sample(&section.taus, CHECK_NAMES[1])?;
        let m = config.charset(name)?;
        let datum = modular::best_modular_datum(&m)?;
        let rho = gamma_representation(&m, &datum, gamma)?;
        let lhs = m.char_single(0, moebius(gamma, tau + CONTROL_PERTURBATION))?;
        let mut rhs = Complex64::zero();
        for h in 0..m.num_modules() {
            rhs += rho[0][h] * m.char_single(h, tau)?;
        }
        controls.push(ControlReport::new(CHECK_NAMES[1], (lhs - rhs).norm(), section.tolerance));
    }

    // Diagonal transform with the first variable shifted on the left side.
    {
        let section = &config.diagonal;
        let name = first_sample(&section.lattices, CHECK_NAMES[2])?;
        let pair = first_sample(&section.tau_pairs, CHECK_NAMES[2])?;
        let m = config.charset(name)?;
        let datum = modular::best_modular_datum(&m)?;
        let rho = gamma_representation(&m, &datum, section.gamma)?;
        let transformed = [
            moebius(section.gamma, pair[0] + CONTROL_PERTURBATION),
            moebius(section.gamma, pair[1]),
        ];
        let lhs = m.trace_diagonal(0, &transformed, tol)?;
        let mut rhs = Complex64::zero();
        for h in 0..m.num_modules() {
            rhs += rho[0][h] * m.trace_diagonal(h, pair, tol)?;
        }
        controls.push(ControlReport::new(CHECK_NAMES[2], (lhs - rhs).norm(), section.tolerance));
    }

    // Siegel inversion with a perturbed point on the inverted side.
    {
        let section = &config.siegel;
        let point = first_sample(&section.points, CHECK_NAMES[3])?;
        let m = config.charset(&section.lattice)?;
        let datum = modular::best_modular_datum(&m)?;
        let lhs = m.trace_hg(0, &perturbed_point(point)?.neg_inverse()?, tol)?;
        let mut rhs = Complex64::zero();
        for h in 0..m.num_modules() {
            rhs += datum.s_entry(0, h) * m.trace_hg(h, point, tol)?;
        }
        controls.push(ControlReport::new(CHECK_NAMES[3], (lhs - rhs).norm(), section.tolerance));
    }

    // Prefactor checks with the prefactor itself scaled.
    {
        let section = &config.prefactor_scalar;
        let &tau = first_sample(&section.taus, CHECK_NAMES[4])?;
        let m = config.charset(&section.lattice)?;
        let point = SiegelPoint::scalar(tau)?;
        let partial = prefactor_partial(&m, &point, tol, 1.0 + CONTROL_PERTURBATION)?;
        let residual = partial.residuals.iter().copied().fold(0.0f64, f64::max);
        controls.push(ControlReport::new(CHECK_NAMES[4], residual, section.tolerance));
    }
    {
        let section = &config.prefactor_matrix;
        let point = first_sample(&section.points, CHECK_NAMES[5])?;
        let m = config.charset(&section.lattice)?;
        let partial = prefactor_partial(&m, point, tol, 1.0 + CONTROL_PERTURBATION)?;
        let residual = partial.residuals.iter().copied().fold(0.0f64, f64::max);
        controls.push(ControlReport::new(CHECK_NAMES[5], residual, section.tolerance));
    }

    // Invariant sum with a perturbed point feeding the inverted side.
    {
        let section = &config.dual_pair;
        let (name, point) = first_sample(&section.samples, CHECK_NAMES[6])?;
        let m = config.charset(name)?;
        let partial = dual_pair_partial(&m, point, tol, &perturbed_point(point)?)?;
        controls.push(ControlReport::new(CHECK_NAMES[6], partial.residuals[0], section.tolerance));
    }

    // Derivative identity with the insertion trace scaled.
    {
        let section = &config.insertion;
        let (name, taus) = first_sample(&section.samples, CHECK_NAMES[7])?;
        let m = config.charset(name)?;
        let partial = insertion_partial(&m, taus, tol, 1.0 + CONTROL_PERTURBATION)?;
        let residual = partial.residuals.iter().copied().fold(0.0f64, f64::max);
        controls.push(ControlReport::new(CHECK_NAMES[7], residual, section.tolerance));
    }

    // Closed form agreement with one perturbed closed-form entry.
    {
        let section = &config.modular;
        let name = first_sample(&section.lattices, CHECK_NAMES[8])?;
        let m = config.charset(name)?;
        let numeric = modular::s_matrix_numeric(&m)?;
        let closed = modular::s_matrix_closed_form(&m);
        let mut deviation = 0.0f64;
        for j in 0..m.num_modules() {
            for h in 0..m.num_modules() {
                let mut c = closed.s_entry(j, h);
                if j == 0 && h == 0 {
                    c += CONTROL_PERTURBATION;
                }
                deviation = deviation.max((c - numeric.s_entry(j, h)).norm());
            }
        }
        controls.push(ControlReport::new(CHECK_NAMES[8], deviation, section.agreement_tolerance));
    }

    // Group relations with one perturbed S entry (unitarity deviation).
    {
        let section = &config.modular;
        let name = first_sample(&section.lattices, CHECK_NAMES[9])?;
        let m = config.charset(name)?;
        let datum = modular::best_modular_datum(&m)?;
        let mut s = datum.s().clone();
        s[0][0] += CONTROL_PERTURBATION;
        let sdag = linalg::cmat_conj_transpose(&s);
        let prod = linalg::cmat_mul(&s, &sdag);
        let residual = linalg::max_norm(&linalg::cmat_sub(
            &prod,
            &linalg::cmat_identity(m.num_modules()),
        ));
        controls.push(ControlReport::new(CHECK_NAMES[9], residual, section.relation_tolerance));
    }

    // Intertwining with one flipped entry in the vacuum branching matrix.
    {
        let section = &config.branching;
        let name = first_sample(&section.pairs, CHECK_NAMES[10])?;
        let pair = config.pair(name)?;
        let (full, p1, p2) = pair_data(pair);
        let d_full = modular::best_modular_datum(&full)?;
        let d1 = modular::best_modular_datum(&p1)?;
        let d2 = modular::best_modular_datum(&p2)?;
        let matrices = pair.all_branching_matrices()?;
        let mut r0 = matrices[0].to_complex();
        r0[0][0] += Complex64::new(1.0, 0.0);
        let lhs = linalg::cmat_mul(&linalg::cmat_mul(d1.s(), &r0), &linalg::cmat_transpose(d2.s()));
        let mut rhs = linalg::cmat_zero(p1.num_modules(), p2.num_modules());
        for (h, r) in matrices.iter().enumerate() {
            let rc = r.to_complex();
            let s = d_full.s_entry(0, h);
            for i in 0..p1.num_modules() {
                for j in 0..p2.num_modules() {
                    rhs[i][j] += s * rc[i][j];
                }
            }
        }
        let residual = linalg::frobenius_norm(&linalg::cmat_sub(&lhs, &rhs));
        controls.push(ControlReport::new(CHECK_NAMES[10], residual, section.tolerance));
    }

    // Character identity with the full character scaled.
    {
        let section = &config.coverage;
        let pair = config.pair(&section.pair)?;
        let &tau = first_sample(&section.taus, CHECK_NAMES[11])?;
        let partial =
            coverage_partial(&section.pair, pair, &[tau], 1.0 + CONTROL_PERTURBATION)?;
        // Skip the coverage-count entry; the perturbation targets the
        // character identity.
        let residual = partial.residuals[1..].iter().copied().fold(0.0f64, f64::max);
        controls.push(ControlReport::new(CHECK_NAMES[11], residual, section.tolerance));
    }

    Ok(controls)
}
