//! Characters and trace functions of the modules attached to an even
//! positive-definite lattice. The irreducible modules are indexed by the
//! cosets of the discriminant group; their graded characters are
//! `theta / eta^g`, and the multivariable refinements replace the single
//! `tau` by a point of the Siegel upper half-space.
//!
//! Single-variable characters are evaluated through truncated q-expansions,
//! while the Siegel-point traces go through the direct theta sum in
//! `kernels` — two deliberately independent code paths, so agreement
//! between them is a meaningful check rather than a tautology.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::kernels::{self, SiegelPoint};
use crate::lattice::{DiscriminantData, IntegralLattice, Rat};
use crate::qseries::{eta_series, theta_coset_series, TruncatedQSeries};

const PI: f64 = std::f64::consts::PI;

/// The set of irreducible-module characters of a lattice: the lattice, its
/// discriminant group, and a cache of truncated character expansions.
pub struct ModuleCharacterSet {
    lattice: IntegralLattice,
    disc: DiscriminantData,
    cache: Mutex<BTreeMap<(usize, i64), Arc<TruncatedQSeries>>>,
}

impl ModuleCharacterSet {
    pub fn new(lattice: IntegralLattice) -> Self {
        let disc = lattice.discriminant_group();
        Self { lattice, disc, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn lattice(&self) -> &IntegralLattice {
        &self.lattice
    }

    pub fn disc(&self) -> &DiscriminantData {
        &self.disc
    }

    /// Number of irreducible modules = order of the discriminant group.
    pub fn num_modules(&self) -> usize {
        self.disc.order() as usize
    }

    /// Central charge of the underlying vertex algebra = lattice rank.
    pub fn central_charge(&self) -> f64 {
        self.lattice.rank() as f64
    }

    fn check_module_index(&self, j: usize) -> Result<()> {
        if j >= self.num_modules() {
            return Err(Error::InvalidInput(format!(
                "module index {j} out of range (lattice has {} modules)",
                self.num_modules()
            )));
        }
        Ok(())
    }

    /// Truncated q-expansion of the character of module `j`:
    /// `theta_j / eta^g`, valid below `cutoff`.
    pub fn char_series(&self, j: usize, cutoff: Rat) -> Result<TruncatedQSeries> {
        self.check_module_index(j)?;
        let g = self.lattice.rank() as u32;
        // Budget the component cutoffs so the quotient is still valid below
        // the requested cutoff after the inversion loses 2 * g/24.
        let eta_cut = cutoff + Rat::new(3 * g as i64, 24) + Rat::from_integer(1);
        let eta_pow = eta_series(eta_cut)?.pow(g).invert()?;
        let theta = theta_coset_series(
            &self.lattice,
            self.disc.coset(j),
            cutoff + Rat::from_integer(1),
        )?;
        Ok(theta.mul(&eta_pow))
    }

    /// Cutoff heuristic: keep exponents until `|q|^N` is far below the
    /// floating-point noise floor, with margin for coefficient growth.
    /// Rounded up to a multiple of 5 so nearby evaluation points share a
    /// cached series.
    fn adaptive_cutoff(&self, im: f64) -> i64 {
        let n = (49.5 / (2.0 * PI * im)).ceil() as i64;
        let n = n.max(5);
        (n + 4) / 5 * 5
    }

    fn cached_char_series(&self, j: usize, cutoff: i64) -> Result<Arc<TruncatedQSeries>> {
        let mut cache = self.cache.lock().expect("character cache lock");
        if let Some(s) = cache.get(&(j, cutoff)) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(self.char_series(j, Rat::from_integer(cutoff))?);
        cache.insert((j, cutoff), Arc::clone(&s));
        Ok(s)
    }

    /// Character of module `j` at `tau` in the upper half-plane, through
    /// the truncated q-expansion.
    pub fn char_single(&self, j: usize, tau: Complex64) -> Result<Complex64> {
        self.check_module_index(j)?;
        if tau.im <= 0.0 {
            return Err(Error::NotInUpperHalfPlane {
                value: format!("{}+{}i", tau.re, tau.im),
            });
        }
        let cutoff = self.adaptive_cutoff(tau.im);
        let series = self.cached_char_series(j, cutoff)?;
        Ok(series.eval(tau))
    }

    /// Trace of module `j` at a Siegel point `A`:
    /// `theta_j(A) / prod_i eta(mu_i)` over the spectrum of `A`.
    pub fn trace_hg(&self, j: usize, a: &SiegelPoint, tol: f64) -> Result<Complex64> {
        self.trace_hg_with_budget(j, a, tol, kernels::DEFAULT_VECTOR_BUDGET)
    }

    pub fn trace_hg_with_budget(
        &self,
        j: usize,
        a: &SiegelPoint,
        tol: f64,
        budget: u64,
    ) -> Result<Complex64> {
        self.check_module_index(j)?;
        let theta =
            kernels::siegel_theta_with_budget(&self.lattice, self.disc.coset(j), a, tol, budget)?;
        let spec = kernels::spectrum(a)?;
        let mut denom = Complex64::new(1.0, 0.0);
        for &mu in spec.eigenvalues() {
            denom *= kernels::eta_numeric(mu)?;
        }
        Ok(theta / denom)
    }

    /// Trace at a diagonal point `diag(taus)`, dividing by `prod eta(tau_p)`
    /// directly (no spectral decomposition involved).
    pub fn trace_diagonal(&self, j: usize, taus: &[Complex64], tol: f64) -> Result<Complex64> {
        self.check_module_index(j)?;
        if taus.len() != self.lattice.rank() {
            return Err(Error::InvalidInput(format!(
                "expected {} diagonal entries, got {}",
                self.lattice.rank(),
                taus.len()
            )));
        }
        let a = SiegelPoint::diagonal(taus)?;
        let theta = kernels::siegel_theta(&self.lattice, self.disc.coset(j), &a, tol)?;
        let mut denom = Complex64::new(1.0, 0.0);
        for &t in taus {
            denom *= kernels::eta_numeric(t)?;
        }
        Ok(theta / denom)
    }

    /// Theta sum of module `j` at a Siegel point (no eta division): the
    /// numerator of the trace, exposed as its own operation because the
    /// inversion-prefactor identity is stated for it directly.
    pub fn gamma(&self, j: usize, a: &SiegelPoint, tol: f64) -> Result<Complex64> {
        self.gamma_with_budget(j, a, tol, kernels::DEFAULT_VECTOR_BUDGET)
    }

    pub fn gamma_with_budget(
        &self,
        j: usize,
        a: &SiegelPoint,
        tol: f64,
        budget: u64,
    ) -> Result<Complex64> {
        self.check_module_index(j)?;
        kernels::siegel_theta_with_budget(&self.lattice, self.disc.coset(j), a, tol, budget)
    }

    /// Insertion trace along a Cartan direction at a diagonal point: the
    /// trace with a weight-one current inserted, normalized so that it
    /// equals `2 pi i` times the partial derivative of `trace_diagonal`
    /// with respect to `taus[axis]`.
    ///
    /// Closed form used here, with `nu = (1/2 pi i) eta'/eta`:
    /// `(2 pi i)^2 [ sum_beta (beta~_axis^2/2 - nu(tau_axis) ... ) ]`
    /// assembled as `(2 pi i)^2 (W/2 - nu * Theta) / prod eta`, where `W`
    /// is the theta sum weighted by `beta~_axis^2`.
    pub fn insertion_trace_cartan(
        &self,
        j: usize,
        axis: usize,
        taus: &[Complex64],
        tol: f64,
    ) -> Result<Complex64> {
        self.check_module_index(j)?;
        let g = self.lattice.rank();
        if axis >= g {
            return Err(Error::InvalidInput(format!(
                "axis {axis} out of range for rank {g}"
            )));
        }
        if taus.len() != g {
            return Err(Error::InvalidInput(format!(
                "expected {} diagonal entries, got {}",
                g,
                taus.len()
            )));
        }
        let a = SiegelPoint::diagonal(taus)?;
        let (theta, weighted) = kernels::theta_sums(
            &self.lattice,
            self.disc.coset(j),
            &a,
            tol,
            kernels::DEFAULT_VECTOR_BUDGET,
            Some(axis),
        )?;
        let nu = kernels::eta_log_derivative(taus[axis])?;
        let mut denom = Complex64::new(1.0, 0.0);
        for &t in taus {
            denom *= kernels::eta_numeric(t)?;
        }
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        Ok(two_pi_i * two_pi_i * (weighted / 2.0 - nu * theta) / denom)
    }

    /// Conformal weight of module `j`: `<rep, rep>/2` of the minimal-norm
    /// coset representative.
    pub fn conformal_weight(&self, j: usize) -> Rat {
        self.disc.coset(j).norm() / Rat::from_integer(2)
    }

    /// Exact T-phase of module `j`: `exp(2 pi i (wt_j - g/24))`.
    pub fn t_phase(&self, j: usize) -> Complex64 {
        let g = self.lattice.rank() as i64;
        let frac: Ratio<i64> = self.conformal_weight(j) - Ratio::new(g, 24);
        kernels::unit_phase(frac)
    }

    /// The frame of commuting Cartan directions underlying the diagonal
    /// traces: one axis per orthonormal-frame coordinate.
    pub fn diagonal_frame(&self) -> DiagonalFrame {
        let g = self.lattice.rank();
        DiagonalFrame {
            axis_labels: (0..g).collect(),
            central_charges: vec![1.0; g],
        }
    }
}

/// Labels for the orthogonal decomposition of the stress tensor into rank
/// many commuting pieces, each of central charge one; the diagonal trace
/// attaches one variable to each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalFrame {
    axis_labels: Vec<usize>,
    central_charges: Vec<f64>,
}

impl DiagonalFrame {
    pub fn axis_labels(&self) -> &[usize] {
        &self.axis_labels
    }

    pub fn central_charges(&self) -> &[f64] {
        &self.central_charges
    }

    /// Sum of the per-axis central charges; equals the total central
    /// charge of the character set that produced this frame.
    pub fn total_central_charge(&self) -> f64 {
        self.central_charges.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn a1_chars() -> ModuleCharacterSet {
        ModuleCharacterSet::new(IntegralLattice::new("a1", vec![vec![2]]).unwrap())
    }

    fn glue_chars() -> ModuleCharacterSet {
        ModuleCharacterSet::new(
            IntegralLattice::new("glue", vec![vec![4, 2], vec![2, 2]]).unwrap(),
        )
    }

    #[test]
    fn vacuum_character_value_at_i() {
        let m = a1_chars();
        let v = m.char_single(0, c(0.0, 1.0)).unwrap();
        // theta(i) / eta(i) with both factors frozen independently.
        assert!((v - c(1.30656296487637653, 0.0)).norm() < 1e-12, "{v}");
    }

    #[test]
    fn char_series_leading_exponents() {
        let m = a1_chars();
        // chi_0 = q^{-1/24} (1 + q + ...), chi_1 = q^{1/4 - 1/24} (2 + ...).
        let s0 = m.char_series(0, Rat::from_integer(3)).unwrap();
        assert_eq!(s0.leading_exponent(), Some(Rat::new(-1, 24)));
        assert_eq!(s0.coeff(Rat::new(-1, 24)), Complex64::new(1.0, 0.0));
        // Next exponent: -1/24 + 1 has coefficient p(1) + count(norm 2) = 1 + 2 = 3.
        assert_eq!(s0.coeff(Rat::new(23, 24)), Complex64::new(3.0, 0.0));
        let s1 = m.char_series(1, Rat::from_integer(3)).unwrap();
        assert_eq!(s1.leading_exponent(), Some(Rat::new(5, 24)));
        assert_eq!(s1.coeff(Rat::new(5, 24)), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn out_of_range_module_index() {
        let m = a1_chars();
        assert!(matches!(m.char_single(2, c(0.0, 1.0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lower_half_plane_rejected() {
        let m = a1_chars();
        assert!(matches!(
            m.char_single(0, c(0.0, -1.0)),
            Err(Error::NotInUpperHalfPlane { .. })
        ));
    }

    #[test]
    fn q_series_and_theta_sum_routes_agree() {
        // chi_j(tau) computed through the truncated expansion must match
        // the Siegel trace at the 1x1 point (tau) computed by direct
        // summation plus eta division.
        let m = a1_chars();
        for tau in [c(0.0, 1.0), c(0.3, 0.9), c(-0.7, 1.4)] {
            let a = SiegelPoint::scalar(tau).unwrap();
            for j in 0..m.num_modules() {
                let via_series = m.char_single(j, tau).unwrap();
                let via_sum = m.trace_hg(j, &a, 1e-13).unwrap();
                assert!(
                    (via_series - via_sum).norm() < 1e-10,
                    "j={j} tau={tau}: {via_series} vs {via_sum}"
                );
            }
        }
        let m = glue_chars();
        for j in 0..m.num_modules() {
            let tau = c(0.1, 0.8);
            let a = SiegelPoint::new(vec![
                vec![tau, Complex64::new(0.0, 0.0)],
                vec![Complex64::new(0.0, 0.0), tau],
            ])
            .unwrap();
            let via_series = m.char_single(j, tau).unwrap();
            let via_sum = m.trace_hg(j, &a, 1e-13).unwrap();
            assert!((via_series - via_sum).norm() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn diagonal_trace_collapses_to_character_at_equal_variables() {
        let m = glue_chars();
        let tau = c(0.2, 1.1);
        for j in 0..m.num_modules() {
            let diag = m.trace_diagonal(j, &[tau, tau], 1e-13).unwrap();
            let single = m.char_single(j, tau).unwrap();
            assert!((diag - single).norm() < 1e-10, "j={j}: {diag} vs {single}");
        }
    }

    #[test]
    fn spectral_and_direct_eta_division_agree_on_diagonal_points() {
        let m = glue_chars();
        let taus = [c(0.0, 1.0), c(0.0, 2.0)];
        let a = SiegelPoint::diagonal(&taus).unwrap();
        for j in 0..m.num_modules() {
            let via_spectrum = m.trace_hg(j, &a, 1e-13).unwrap();
            let direct = m.trace_diagonal(j, &taus, 1e-13).unwrap();
            assert!((via_spectrum - direct).norm() < 1e-11, "j={j}");
        }
        // Same at a repeated eigenvalue, where the spectral route has to
        // handle a double root.
        let taus = [c(0.0, 1.0), c(0.0, 1.0)];
        let a = SiegelPoint::diagonal(&taus).unwrap();
        for j in 0..m.num_modules() {
            let via_spectrum = m.trace_hg(j, &a, 1e-13).unwrap();
            let direct = m.trace_diagonal(j, &taus, 1e-13).unwrap();
            assert!((via_spectrum - direct).norm() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn diagonal_frame_charges_sum_to_central_charge() {
        let m = glue_chars();
        let frame = m.diagonal_frame();
        assert_eq!(frame.axis_labels(), &[0, 1]);
        assert_eq!(frame.total_central_charge(), m.central_charge());
    }

    #[test]
    fn insertion_trace_matches_finite_difference() {
        let m = glue_chars();
        let taus = [c(0.1, 1.0), c(-0.2, 1.3)];
        let h = 1e-5;
        for j in 0..m.num_modules() {
            for axis in 0..2 {
                let ins = m.insertion_trace_cartan(j, axis, &taus, 1e-13).unwrap();
                let mut up = taus;
                up[axis] += c(h, 0.0);
                let mut dn = taus;
                dn[axis] -= c(h, 0.0);
                let fd = (m.trace_diagonal(j, &up, 1e-13).unwrap()
                    - m.trace_diagonal(j, &dn, 1e-13).unwrap())
                    / (2.0 * h);
                let expected = c(0.0, 2.0 * PI) * fd;
                let scale = ins.norm().max(1.0);
                assert!(
                    (ins - expected).norm() < 2e-6 * scale,
                    "j={j} axis={axis}: {ins} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn insertion_traces_sum_to_character_derivative() {
        // At equal variables, sum_axis 2 pi i d/dtau_axis collapses to
        // (2 pi i)^2 q d/dq applied to the character.
        let m = a1_chars();
        let tau = c(0.0, 1.2);
        let two_pi_i = c(0.0, 2.0 * PI);
        for j in 0..m.num_modules() {
            let ins = m.insertion_trace_cartan(j, 0, &[tau], 1e-13).unwrap();
            let series = m.char_series(j, Rat::from_integer(25)).unwrap();
            let expected = two_pi_i * two_pi_i * series.derive_qddq().eval(tau);
            assert!((ins - expected).norm() < 1e-8, "j={j}: {ins} vs {expected}");
        }
        let m = glue_chars();
        let tau = c(0.15, 0.95);
        for j in 0..m.num_modules() {
            let sum: Complex64 = (0..2)
                .map(|axis| m.insertion_trace_cartan(j, axis, &[tau, tau], 1e-13).unwrap())
                .sum();
            let series = m.char_series(j, Rat::from_integer(25)).unwrap();
            let expected = two_pi_i * two_pi_i * series.derive_qddq().eval(tau);
            assert!((sum - expected).norm() < 1e-8, "j={j}: {sum} vs {expected}");
        }
    }

    #[test]
    fn t_phases_are_unit_and_match_weights() {
        let m = glue_chars();
        // Weights: 0, 1/4, 1/4, 1/2; central charge 2 so the vacuum phase
        // is exp(-2 pi i / 12).
        assert_eq!(m.conformal_weight(0), Rat::new(0, 1));
        assert_eq!(m.conformal_weight(1), Rat::new(1, 4));
        assert_eq!(m.conformal_weight(3), Rat::new(1, 2));
        for j in 0..m.num_modules() {
            assert!((m.t_phase(j).norm() - 1.0).abs() < 1e-15);
        }
        let expected = c(0.0, -2.0 * PI / 12.0).exp();
        assert!((m.t_phase(0) - expected).norm() < 1e-15);
    }
}
