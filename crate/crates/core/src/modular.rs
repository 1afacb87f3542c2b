//! Modular transformation data for the characters of a lattice vertex
//! algebra: the numeric S-matrix recovered from character values by solving
//! linear systems, the closed-form S-matrix from the discriminant pairing,
//! and the exact T-phases. The numeric matrix is the source of truth; the
//! closed form starts out unvalidated and earns its flag by matching the
//! numeric one.

use num_complex::Complex64;
use num_traits::Zero;

use crate::chars::ModuleCharacterSet;
use crate::error::{Error, Result};
use crate::kernels::{make_siegel_point, SiegelPoint};
use crate::linalg::{self, CMat};

/// Condition-number ceiling beyond which a sample system is rejected.
pub const CONDITION_LIMIT: f64 = 1e8;
/// Residual ceiling for the solved transformation systems.
pub const SYSTEM_RESIDUAL_LIMIT: f64 = 1e-8;

/// S-matrix together with the exact T-phases and diagnostics from the
/// solve that produced it.
#[derive(Debug, Clone)]
pub struct ModularDatum {
    s: CMat,
    t: Vec<Complex64>,
    condition: f64,
    validated: bool,
}

impl ModularDatum {
    pub fn s(&self) -> &CMat {
        &self.s
    }

    pub fn s_entry(&self, i: usize, j: usize) -> Complex64 {
        self.s[i][j]
    }

    /// Diagonal of the T-matrix: exact unit phases.
    pub fn t(&self) -> &[Complex64] {
        &self.t
    }

    /// One-norm condition estimate of the sample matrix used in the solve
    /// (1.0 for the closed form, which involves no solve).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Whether this datum has been checked against an independent source:
    /// true for the numeric solve (validated by construction against the
    /// group relations), false for the closed form until
    /// `validate_closed_form` promotes it.
    pub fn validated(&self) -> bool {
        self.validated
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }
}

/// Ladder of single-variable sample points: `tau_m = i (1 + (m + s) / r)`
/// where the variant shift `s` interleaves a second, disjoint ladder.
fn sample_ladder(r: usize, variant: u32) -> Vec<Complex64> {
    let shift = 0.5 * variant as f64;
    (0..r)
        .map(|m| Complex64::new(0.0, 1.0 + (m as f64 + shift) / r as f64))
        .collect()
}

/// Index shift making the scattered sample families of different variants
/// disjoint (the Kronecker sequence never revisits an index).
fn variant_offset(variant: u32) -> usize {
    41 * variant as usize
}

/// Axis constants of the low-discrepancy Kronecker sequence (inverse powers
/// of the generalized golden ratio `phi_g`, the root of `x^{g+1} = x + 1`).
/// Multivariable sample points must be scattered over the whole parameter
/// box: points along any one-parameter curve are nearly dependent for
/// factorizing trace functions (a Moebius graph matches a smooth curve to
/// third order), which makes line ladders hopelessly ill-conditioned.
fn kronecker_alphas(g: usize) -> Vec<f64> {
    let d = g as f64;
    let mut phi = 1.5f64;
    for _ in 0..64 {
        let f = phi.powf(d + 1.0) - phi - 1.0;
        phi -= f / ((d + 1.0) * phi.powf(d) - 1.0);
    }
    (1..=g).map(|k| phi.powi(-(k as i32))).collect()
}

fn scattered_point(g: usize, m: usize, alphas: &[f64]) -> Vec<Complex64> {
    (0..g)
        .map(|p| {
            let frac = ((m + 1) as f64 * alphas[p]).fract();
            Complex64::new(0.0, 0.9 + 0.07 * p as f64 + 2.4 * frac)
        })
        .collect()
}

/// Scattered full symmetric sample point: diagonal imaginary parts as in
/// `scattered_point`, real off-diagonal entries in [0.15, 0.85]. The
/// off-diagonal entries matter: a lattice can have an isometry that fixes
/// every diagonal point while swapping two cosets (it acts by sign flips in
/// the orthonormal frame), making the swapped pair inseparable by diagonal
/// traces. Such an isometry negates off-diagonal entries, so points with
/// nonzero ones tell the pair apart.
fn scattered_matrix_point(g: usize, m: usize, alphas: &[f64]) -> Result<SiegelPoint> {
    let mut a = linalg::cmat_zero(g, g);
    let mut axis = 0;
    for p in 0..g {
        let frac = ((m + 1) as f64 * alphas[axis]).fract();
        axis += 1;
        a[p][p] = Complex64::new(0.0, 0.9 + 0.07 * p as f64 + 2.4 * frac);
    }
    for p in 0..g {
        for q in (p + 1)..g {
            let frac = ((m + 1) as f64 * alphas[axis]).fract();
            axis += 1;
            let c = Complex64::new(0.15 + 0.7 * frac, 0.0);
            a[p][q] = c;
            a[q][p] = c;
        }
    }
    make_siegel_point(a)
}

/// Numeric S-matrix: solves `chi_j(-1/tau_m) = sum_h S_jh chi_h(tau_m)`
/// row by row on a ladder of sample points.
///
/// When distinct modules have identical single-variable characters the
/// sample matrix is singular no matter how the ladder is chosen; the solver
/// then escalates deterministically, first to multivariable diagonal
/// traces, then to traces at full symmetric matrix points. Those transform
/// with the same matrix and separate modules that mere characters cannot.
/// If even they coincide (a rank-1 lattice's modules swapped by charge
/// conjugation have equal traces everywhere), the matrix is not recoverable
/// from trace samples and the solve fails honestly with
/// `IllConditionedSamples`.
pub fn s_matrix_numeric(m: &ModuleCharacterSet) -> Result<ModularDatum> {
    s_matrix_numeric_variant(m, 0)
}

/// Same solve on a disjoint family of sample points; the result must agree
/// with variant 0 (sample-independence of the transformation matrix).
pub fn s_matrix_numeric_variant(m: &ModuleCharacterSet, variant: u32) -> Result<ModularDatum> {
    let r = m.num_modules();
    let g = m.lattice().rank();
    let offset = variant_offset(variant);

    // Attempt 1: single-variable ladder.
    let taus = sample_ladder(r, variant);
    let mut x = linalg::cmat_zero(r, r);
    for (row, &tau) in taus.iter().enumerate() {
        for h in 0..r {
            x[row][h] = m.char_single(h, tau)?;
        }
    }
    let mut condition = linalg::condition_estimate(&x);
    let mut rhs_at = RhsSource::Single(taus);

    if condition > CONDITION_LIMIT && g >= 2 {
        // Attempt 2: scattered multivariable diagonal samples.
        let alphas = kronecker_alphas(g);
        let mut xd = linalg::cmat_zero(r, r);
        for row in 0..r {
            let point = scattered_point(g, row + offset, &alphas);
            for h in 0..r {
                xd[row][h] = m.trace_diagonal(h, &point, 1e-13)?;
            }
        }
        let cd = linalg::condition_estimate(&xd);
        if cd < condition {
            x = xd;
            condition = cd;
            rhs_at = RhsSource::Diagonal(alphas);
        }
    }
    if condition > CONDITION_LIMIT && g >= 2 {
        // Attempt 3: scattered full-matrix samples with off-diagonal
        // entries, for coset pairs that diagonal points cannot separate.
        let alphas = kronecker_alphas(g + g * (g - 1) / 2);
        let mut xm = linalg::cmat_zero(r, r);
        for row in 0..r {
            let point = scattered_matrix_point(g, row + offset, &alphas)?;
            for h in 0..r {
                xm[row][h] = m.trace_hg(h, &point, 1e-13)?;
            }
        }
        let cm = linalg::condition_estimate(&xm);
        if cm < condition {
            x = xm;
            condition = cm;
            rhs_at = RhsSource::Matrix(alphas);
        }
    }
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditionedSamples { estimate: condition });
    }

    let lu = linalg::lu_factor(&x).ok_or(Error::IllConditionedSamples { estimate: condition })?;
    let mut s = linalg::cmat_zero(r, r);
    for j in 0..r {
        let mut rhs = vec![Complex64::zero(); r];
        for row in 0..r {
            rhs[row] = match &rhs_at {
                RhsSource::Single(taus) => {
                    let inv = -Complex64::new(1.0, 0.0) / taus[row];
                    m.char_single(j, inv)?
                }
                RhsSource::Diagonal(alphas) => {
                    let point = scattered_point(g, row + offset, alphas);
                    let inv: Vec<Complex64> =
                        point.iter().map(|&t| -Complex64::new(1.0, 0.0) / t).collect();
                    m.trace_diagonal(j, &inv, 1e-13)?
                }
                RhsSource::Matrix(alphas) => {
                    let point = scattered_matrix_point(g, row + offset, alphas)?;
                    m.trace_hg(j, &point.neg_inverse()?, 1e-13)?
                }
            };
        }
        let sol = lu.solve(&rhs);
        // Residual check on the solved system.
        let mut residual = 0.0f64;
        let mut scale = 1.0f64;
        for row in 0..r {
            let mut acc = Complex64::zero();
            for h in 0..r {
                acc += x[row][h] * sol[h];
            }
            residual = residual.max((acc - rhs[row]).norm());
            scale = scale.max(rhs[row].norm());
        }
        if residual > SYSTEM_RESIDUAL_LIMIT * scale {
            return Err(Error::InconsistentSystem {
                residual: residual / scale,
                tolerance: SYSTEM_RESIDUAL_LIMIT,
            });
        }
        s[j] = sol;
    }

    let t = (0..r).map(|j| m.t_phase(j)).collect();
    let datum = ModularDatum { s, t, condition, validated: true };
    // The solve only pins down S on the sampled points; the group relations
    // below are independent evidence that it is the transformation matrix.
    let diag = validate_group_relations(&datum, m)?;
    let _ = diag;
    Ok(datum)
}

enum RhsSource {
    Single(Vec<Complex64>),
    Diagonal(Vec<f64>),
    Matrix(Vec<f64>),
}

/// Closed-form S-matrix from the discriminant pairing:
/// `S_jh = |L*/L|^{-1/2} exp(-2 pi i <rep_j, rep_h>)`. Returned unvalidated.
pub fn s_matrix_closed_form(m: &ModuleCharacterSet) -> ModularDatum {
    let r = m.num_modules();
    let norm = 1.0 / (r as f64).sqrt();
    let mut s = linalg::cmat_zero(r, r);
    for j in 0..r {
        for h in 0..r {
            let pairing = m.disc().pairing(j, h);
            s[j][h] = norm * crate::kernels::unit_phase(-pairing);
        }
    }
    let t = (0..r).map(|j| m.t_phase(j)).collect();
    ModularDatum { s, t, condition: 1.0, validated: false }
}

/// Promotes a closed-form datum by comparing it entrywise against a
/// numerically solved one; mismatch beyond `tol` is an error carrying the
/// worst deviation.
pub fn validate_closed_form(
    closed: &ModularDatum,
    numeric: &ModularDatum,
    tol: f64,
) -> Result<ModularDatum> {
    let r = closed.dim();
    let mut worst = 0.0f64;
    for j in 0..r {
        for h in 0..r {
            worst = worst.max((closed.s[j][h] - numeric.s[j][h]).norm());
        }
    }
    if worst > tol {
        return Err(Error::ValidationMismatch { deviation: worst });
    }
    let mut out = closed.clone();
    out.validated = true;
    out.condition = numeric.condition;
    Ok(out)
}

/// Worst-case deviations of the group relations for an S/T datum.
#[derive(Debug, Clone, Copy)]
pub struct GroupRelationDiagnostics {
    /// `max |S - S^T|`.
    pub symmetry: f64,
    /// `max |S S^dagger - I|`.
    pub unitarity: f64,
    /// `max |S^2 - C|` against the charge-conjugation permutation.
    pub s_squared: f64,
    /// `max |(S T)^3 - S^2|`.
    pub st_cubed: f64,
}

impl GroupRelationDiagnostics {
    pub fn worst(&self) -> f64 {
        self.symmetry
            .max(self.unitarity)
            .max(self.s_squared)
            .max(self.st_cubed)
    }
}

/// Checks `S = S^T`, `S S^dagger = I`, `S^2 = C` (charge conjugation) and
/// `(S T)^3 = S^2`. Errors with `ValidationMismatch` when the deviation
/// exceeds 1e-7; the harness asserts tighter bounds per check.
pub fn validate_group_relations(
    datum: &ModularDatum,
    m: &ModuleCharacterSet,
) -> Result<GroupRelationDiagnostics> {
    let r = datum.dim();
    let s = &datum.s;
    let mut symmetry = 0.0f64;
    for j in 0..r {
        for h in 0..r {
            symmetry = symmetry.max((s[j][h] - s[h][j]).norm());
        }
    }
    let sdag = linalg::cmat_conj_transpose(s);
    let prod = linalg::cmat_mul(s, &sdag);
    let unitarity = linalg::max_norm(&linalg::cmat_sub(&prod, &linalg::cmat_identity(r)));

    let s2 = linalg::cmat_mul(s, s);
    let mut conj = linalg::cmat_zero(r, r);
    for j in 0..r {
        conj[j][m.disc().dual_index(j)] = Complex64::new(1.0, 0.0);
    }
    let s_squared = linalg::max_norm(&linalg::cmat_sub(&s2, &conj));

    let mut st = linalg::cmat_zero(r, r);
    for j in 0..r {
        for h in 0..r {
            st[j][h] = s[j][h] * datum.t[h];
        }
    }
    let st3 = linalg::cmat_mul(&linalg::cmat_mul(&st, &st), &st);
    let st_cubed = linalg::max_norm(&linalg::cmat_sub(&st3, &s2));

    let diag = GroupRelationDiagnostics { symmetry, unitarity, s_squared, st_cubed };
    if diag.worst() > 1e-7 {
        return Err(Error::ValidationMismatch { deviation: diag.worst() });
    }
    Ok(diag)
}

/// Worst residual of the single-variable inversion identity
/// `chi_j(-1/tau) = sum_h S_jh chi_h(tau)` over the given sample points —
/// a functional check of a given S-matrix that works even when no solve
/// could have produced it.
pub fn functional_inversion_residual(
    datum: &ModularDatum,
    m: &ModuleCharacterSet,
    taus: &[Complex64],
) -> Result<f64> {
    let r = datum.dim();
    let mut worst = 0.0f64;
    for &tau in taus {
        let inv = -Complex64::new(1.0, 0.0) / tau;
        for j in 0..r {
            let lhs = m.char_single(j, inv)?;
            let mut rhs = Complex64::zero();
            for h in 0..r {
                rhs += datum.s_entry(j, h) * m.char_single(h, tau)?;
            }
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Fixed off-axis sample points for the functional validation of a
/// closed-form S-matrix.
const FUNCTIONAL_TAUS: [(f64, f64); 3] = [(0.0, 1.0), (0.31, 1.1), (-0.4, 0.8)];

/// Best available validated S/T datum: the numeric solve when the samples
/// can separate the modules, otherwise the closed form promoted by checking
/// the group relations and the inversion identity on fixed sample points.
pub fn best_modular_datum(m: &ModuleCharacterSet) -> Result<ModularDatum> {
    match s_matrix_numeric(m) {
        Ok(datum) => Ok(datum),
        Err(Error::IllConditionedSamples { .. }) => {
            let closed = s_matrix_closed_form(m);
            validate_group_relations(&closed, m)?;
            let taus: Vec<Complex64> = FUNCTIONAL_TAUS
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect();
            let residual = functional_inversion_residual(&closed, m, &taus)?;
            if residual > 1e-9 {
                return Err(Error::ValidationMismatch { deviation: residual });
            }
            let mut out = closed;
            out.validated = true;
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// Index of the charge-conjugate module (the coset of `-rep_j`).
pub fn dual_coset(m: &ModuleCharacterSet, j: usize) -> usize {
    m.disc().dual_index(j)
}

/// The matrix of `tau -> tau + 1` acting on characters (diagonal), provided
/// for symmetry with `s_matrix_numeric`.
pub fn t_matrix(m: &ModuleCharacterSet) -> Vec<Complex64> {
    (0..m.num_modules()).map(|j| m.t_phase(j)).collect()
}

/// Verlinde-style sanity estimate: the column of the vacuum module must be
/// strictly nonzero for the fusion expressions `S_aj S_bj / S_0j` to make
/// sense. Returns the minimum magnitude.
pub fn vacuum_column_min(datum: &ModularDatum) -> f64 {
    (0..datum.dim())
        .map(|j| datum.s[j][0].norm())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntegralLattice;

    fn chars(name: &str, gram: Vec<Vec<i64>>) -> ModuleCharacterSet {
        ModuleCharacterSet::new(IntegralLattice::new(name, gram).unwrap())
    }

    #[test]
    fn a1_s_matrix_is_the_hadamard_kernel() {
        // For the rank-1 lattice <2>: S = (1/sqrt 2) [[1, 1], [1, -1]].
        let m = chars("a1", vec![vec![2]]);
        let datum = s_matrix_numeric(&m).unwrap();
        let w = 1.0 / 2.0f64.sqrt();
        let expect = [[w, w], [w, -w]];
        for j in 0..2 {
            for h in 0..2 {
                assert!(
                    (datum.s_entry(j, h) - Complex64::new(expect[j][h], 0.0)).norm() < 1e-9,
                    "entry ({j},{h}) = {}",
                    datum.s_entry(j, h)
                );
            }
        }
        assert!(datum.validated());
        assert!(datum.condition() < 1e3);
    }

    #[test]
    fn closed_form_matches_numeric_on_a1() {
        let m = chars("a1", vec![vec![2]]);
        let numeric = s_matrix_numeric(&m).unwrap();
        let closed = s_matrix_closed_form(&m);
        assert!(!closed.validated());
        let promoted = validate_closed_form(&closed, &numeric, 1e-8).unwrap();
        assert!(promoted.validated());
    }

    #[test]
    fn coinciding_characters_force_multivariable_samples() {
        // Both rank-2 lattices of determinant 4 here have a pair of modules
        // with identical single-variable characters (the cosets are swapped
        // by an isometry), so the plain ladder is singular and the solver
        // must escalate: diagonal samples suffice for the orthogonal sum,
        // while the glued form also has equal diagonal traces (the swap
        // isometry is a sign flip in the orthonormal frame) and needs full
        // matrix points.
        for (name, gram) in [
            ("two-i2", vec![vec![2, 0], vec![0, 2]]),
            ("glue", vec![vec![4, 2], vec![2, 2]]),
        ] {
            let m = chars(name, gram);
            let datum = s_matrix_numeric(&m).unwrap();
            let closed = s_matrix_closed_form(&m);
            let promoted = validate_closed_form(&closed, &datum, 1e-8);
            assert!(promoted.is_ok(), "{name}: {:?}", promoted.err());
        }
    }

    #[test]
    fn group_relations_hold_for_closed_form() {
        for (name, gram) in [
            ("a1", vec![vec![2]]),
            ("two-i2", vec![vec![2, 0], vec![0, 2]]),
            ("glue", vec![vec![4, 2], vec![2, 2]]),
        ] {
            let m = chars(name, gram);
            let datum = s_matrix_closed_form(&m);
            let diag = validate_group_relations(&datum, &m).unwrap();
            assert!(diag.worst() < 1e-12, "{name}: {:?}", diag);
        }
    }

    #[test]
    fn charge_conjugation_without_trace_separation_fails_honestly() {
        // For <4>, the modules at rep +-1/4 are distinct but have equal
        // traces at every diagonal point (they are swapped by the dual
        // isometry), so no trace-sample system can separate them.
        let m = chars("z4", vec![vec![4]]);
        match s_matrix_numeric(&m) {
            Err(Error::IllConditionedSamples { estimate }) => {
                assert!(estimate > CONDITION_LIMIT);
            }
            other => panic!("expected IllConditionedSamples, got {other:?}"),
        }
        // The closed form still satisfies the group relations.
        let closed = s_matrix_closed_form(&m);
        let diag = validate_group_relations(&closed, &m).unwrap();
        assert!(diag.worst() < 1e-12);
    }

    #[test]
    fn dual_coset_indices() {
        let m = chars("z4", vec![vec![4]]);
        // Cosets ordered: 0, -1/4, 1/4, 1/2; conjugation swaps the middle two.
        assert_eq!(dual_coset(&m, 0), 0);
        assert_eq!(dual_coset(&m, 1), 2);
        assert_eq!(dual_coset(&m, 2), 1);
        assert_eq!(dual_coset(&m, 3), 3);
    }

    #[test]
    fn vacuum_column_is_positive() {
        let m = chars("glue", vec![vec![4, 2], vec![2, 2]]);
        let datum = s_matrix_closed_form(&m);
        assert!(vacuum_column_min(&datum) > 0.49);
    }

    #[test]
    fn t_phases_of_the_rank_one_root_lattice() {
        // Weights 0 and 1/4 at central charge 1: the T-matrix diagonal is
        // (e^{-pi i/12}, e^{5 pi i/12}).
        let m = chars("a1", vec![vec![2]]);
        let datum = s_matrix_closed_form(&m);
        let expect0 = Complex64::from_polar(1.0, -std::f64::consts::PI / 12.0);
        let expect1 = Complex64::from_polar(1.0, 5.0 * std::f64::consts::PI / 12.0);
        assert!((datum.t()[0] - expect0).norm() < 1e-15);
        assert!((datum.t()[1] - expect1).norm() < 1e-15);
    }

    #[test]
    fn numeric_solve_is_sample_independent() {
        // Disjoint sample families must recover the same matrix.
        for (name, gram) in [
            ("a1", vec![vec![2]]),
            ("two-i2", vec![vec![2, 0], vec![0, 2]]),
        ] {
            let m = chars(name, gram);
            let d0 = s_matrix_numeric_variant(&m, 0).unwrap();
            let d1 = s_matrix_numeric_variant(&m, 1).unwrap();
            let r = d0.dim();
            let mut worst = 0.0f64;
            for j in 0..r {
                for h in 0..r {
                    worst = worst.max((d0.s_entry(j, h) - d1.s_entry(j, h)).norm());
                }
            }
            assert!(worst < 1e-8, "{name}: ladder disagreement {worst}");
        }
    }

    #[test]
    fn best_datum_falls_back_to_validated_closed_form() {
        // No trace sampling separates the conjugate pair of <4>, so the
        // best datum is the closed form, functionally validated.
        let m = chars("z4", vec![vec![4]]);
        let datum = best_modular_datum(&m).unwrap();
        assert!(datum.validated());
        let closed = s_matrix_closed_form(&m);
        for j in 0..4 {
            for h in 0..4 {
                assert_eq!(datum.s_entry(j, h), closed.s_entry(j, h));
            }
        }
        // And for a solvable lattice it is the numeric result.
        let m = chars("a1", vec![vec![2]]);
        let datum = best_modular_datum(&m).unwrap();
        assert!(datum.condition() > 1.0);
    }
}

