//! Analytic kernels: points of the Siegel upper half-space, their spectra,
//! numerical Dedekind eta and Eisenstein values, and the Siegel theta sum
//! of a lattice coset with a rigorous tail bound.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{CosetLabel, IntegralLattice, Rat};
use crate::linalg::{self, CMat};

const PI: f64 = std::f64::consts::PI;

/// Default cap on the number of lattice vectors a single theta sum may
/// enumerate before giving up with `TolUnachievable`.
pub const DEFAULT_VECTOR_BUDGET: u64 = 10_000_000;
/// Default absolute tail tolerance for Siegel theta sums.
pub const DEFAULT_THETA_TOL: f64 = 1e-12;

/// A point of the Siegel upper half-space: a complex symmetric matrix whose
/// imaginary part is positive definite. Construction validates; asymmetric
/// input is rejected rather than silently symmetrized.
#[derive(Debug, Clone)]
pub struct SiegelPoint {
    entries: CMat,
    dim: usize,
    epsilon: f64,
}

impl SiegelPoint {
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.len();
        if dim == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "matrix is not square: row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
        }
        let scale = linalg::max_norm(&entries).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (entries[i][j] - entries[j][i]).norm() > 1e-12 * scale {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        let im: Vec<Vec<f64>> = entries
            .iter()
            .map(|row| row.iter().map(|z| z.im).collect())
            .collect();
        let eigs = linalg::jacobi_eigenvalues(im);
        let epsilon = eigs[0];
        if epsilon <= 0.0 {
            return Err(Error::ImagPartNotPositiveDefinite { eigenvalue: epsilon });
        }
        Ok(Self { entries, dim, epsilon })
    }

    /// The 1x1 point `(tau)`.
    pub fn scalar(tau: Complex64) -> Result<Self> {
        if tau.im <= 0.0 {
            return Err(Error::NotInUpperHalfPlane { value: format_complex(tau) });
        }
        Self::new(vec![vec![tau]])
    }

    /// The diagonal point `diag(taus)`.
    pub fn diagonal(taus: &[Complex64]) -> Result<Self> {
        for &t in taus {
            if t.im <= 0.0 {
                return Err(Error::NotInUpperHalfPlane { value: format_complex(t) });
            }
        }
        let n = taus.len();
        let mut m = linalg::cmat_zero(n, n);
        for i in 0..n {
            m[i][i] = taus[i];
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }

    /// Smallest eigenvalue of the imaginary part; controls tail decay of
    /// theta sums at this point.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j && self.entries[i][j] != Complex64::zero() {
                    return false;
                }
            }
        }
        true
    }

    /// The point `-A^{-1}` (the image of `A` under the inversion generator).
    /// The inverse is validated against `A * A^{-1} = I` to 1e-12.
    pub fn neg_inverse(&self) -> Result<SiegelPoint> {
        let inv = linalg::cmat_inverse(&self.entries)
            .ok_or(Error::NoConvergence { what: "matrix inverse", iterations: 0, residual: f64::INFINITY })?;
        let prod = linalg::cmat_mul(&self.entries, &inv);
        let id = linalg::cmat_identity(self.dim);
        let residual = linalg::max_norm(&linalg::cmat_sub(&prod, &id));
        if residual > 1e-12 * linalg::max_norm(&self.entries).max(1.0) {
            return Err(Error::NoConvergence {
                what: "matrix inverse",
                iterations: 1,
                residual,
            });
        }
        let neg: CMat = inv
            .iter()
            .map(|row| row.iter().map(|z| -z).collect())
            .collect();
        // Enforce exact symmetry of the result so that downstream validation
        // never trips on roundoff from the solve: the true inverse of a
        // symmetric matrix is symmetric, so averaging is a projection, not a
        // repair of bad input.
        let mut sym = neg.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                sym[i][j] = (neg[i][j] + neg[j][i]) / 2.0;
            }
        }
        SiegelPoint::new(sym)
    }

    /// Determinant of the matrix.
    pub fn det(&self) -> Complex64 {
        linalg::cmat_det(&self.entries)
    }
}

fn format_complex(z: Complex64) -> String {
    format!("{}{}{}i", z.re, if z.im < 0.0 { "-" } else { "+" }, z.im.abs())
}

/// Validated construction of a Siegel upper half-space point.
pub fn make_siegel_point(entries: CMat) -> Result<SiegelPoint> {
    SiegelPoint::new(entries)
}

/// The spectrum of a Siegel point: eigenvalues (all in the upper half-plane)
/// and whether the point is provably semisimple (pairwise-distinct
/// eigenvalues at working precision).
#[derive(Debug, Clone)]
pub struct SpectrumData {
    eigenvalues: Vec<Complex64>,
    semisimple: bool,
}

impl SpectrumData {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn semisimple(&self) -> bool {
        self.semisimple
    }
}

/// Eigenvalues of a Siegel point via the characteristic polynomial
/// (Faddeev-LeVerrier) and a simultaneous root iteration. The computed
/// roots are validated: membership in the upper half-plane plus the Vieta
/// cross-checks (product = determinant, sum = trace).
pub fn spectrum(a: &SiegelPoint) -> Result<SpectrumData> {
    let n = a.dim();

    // Matrices that are diagonal up to roundoff (as produced, for example,
    // by numerically inverting an exactly diagonal point) carry their
    // eigenvalues on the diagonal. Reading them off directly sidesteps the
    // root iteration, whose clusters grow uncontrollably at the high
    // multiplicities such matrices typically have. Gershgorin bounds the
    // error of dropping the off-diagonal part by its largest entry.
    let mut max_entry = 0.0f64;
    let mut max_off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let norm = a.entry(i, j).norm();
            max_entry = max_entry.max(norm);
            if i != j {
                max_off = max_off.max(norm);
            }
        }
    }
    if max_off <= 1e-13 * max_entry.max(1.0) {
        let mut roots: Vec<Complex64> = (0..n).map(|i| a.entry(i, i)).collect();
        sort_roots(&mut roots, max_entry.max(1.0));
        for &r in &roots {
            if r.im <= 0.0 {
                return Err(Error::EigenvalueOutsideH { value: format_complex(r) });
            }
        }
        return Ok(SpectrumData { eigenvalues: roots, semisimple: true });
    }

    let coeffs = char_poly(a.entries());
    let raw = durand_kerner(&coeffs)?;
    let scale = raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    // p(x) = det(xI - A), so det(A) = (-1)^n p(0) = (-1)^n c_n.
    let det = coeffs[n] * if n % 2 == 0 { 1.0 } else { -1.0 };
    let trace: Complex64 = (0..n).map(|i| a.entry(i, i)).sum();

    // An m-fold root scatters the simultaneous iteration into a cluster of
    // radius ~ eps^(1/m), which grows quickly with m. Group the raw roots
    // at escalating radii, polishing each cluster with Newton on the
    // (m-1)-th derivative (which has a *simple* root at an m-fold root),
    // and accept the first grouping that passes the Vieta cross-checks.
    // A radius coarse enough to merge genuinely distinct eigenvalues fails
    // those checks, so the escalation cannot overshoot silently.
    let mut best_failure = f64::INFINITY;
    for rung in [1e-5, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1] {
        let (mut roots, semisimple) = group_and_polish(&coeffs, &raw, rung * scale);
        sort_roots(&mut roots, scale);
        let prod: Complex64 = roots.iter().product();
        let det_residual = (prod - det).norm() / det.norm().max(1.0);
        let sum: Complex64 = roots.iter().sum();
        let trace_residual = (sum - trace).norm() / trace.norm().max(1.0);
        if det_residual <= 1e-9 && trace_residual <= 1e-9 {
            for &r in &roots {
                if r.im <= 0.0 {
                    return Err(Error::EigenvalueOutsideH { value: format_complex(r) });
                }
            }
            return Ok(SpectrumData { eigenvalues: roots, semisimple });
        }
        best_failure = best_failure.min(det_residual.max(trace_residual));
    }
    Err(Error::NoConvergence {
        what: "eigenvalue solver (Vieta cross-checks)",
        iterations: 0,
        residual: best_failure,
    })
}

/// Sorts by real part with a tolerance so that roundoff in nominally equal
/// keys cannot shuffle the order, then by imaginary part.
fn sort_roots(roots: &mut [Complex64], scale: f64) {
    roots.sort_by(|x, y| {
        let dr = x.re - y.re;
        if dr.abs() > 1e-9 * scale {
            return dr.partial_cmp(&0.0).unwrap();
        }
        x.im.partial_cmp(&y.im).unwrap()
    });
}

/// Groups raw roots into clusters of the given radius and polishes each
/// multiple cluster to its center; returns the polished roots (with
/// multiplicity) and whether every cluster was simple.
fn group_and_polish(
    coeffs: &[Complex64],
    raw: &[Complex64],
    radius: f64,
) -> (Vec<Complex64>, bool) {
    let n = raw.len();
    let mut roots: Vec<Complex64> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut semisimple = true;
    for i in 0..n {
        if used[i] {
            continue;
        }
        let mut members = vec![raw[i]];
        used[i] = true;
        for j in (i + 1)..n {
            if !used[j] && (raw[j] - raw[i]).norm() <= radius {
                members.push(raw[j]);
                used[j] = true;
            }
        }
        let m = members.len();
        let mut center = members.iter().sum::<Complex64>() / m as f64;
        if m > 1 {
            semisimple = false;
            let mut d = coeffs.to_vec();
            for _ in 0..(m - 1) {
                d = poly_derivative(&d);
            }
            center = newton_polish(&d, center, 10.0 * radius);
        }
        for _ in 0..m {
            roots.push(center);
        }
    }
    (roots, semisimple)
}

/// Characteristic polynomial `det(xI - A)` by the Faddeev-LeVerrier
/// recurrence; returns monic coefficients `[1, c_1, ..., c_n]`.
fn char_poly(a: &CMat) -> Vec<Complex64> {
    let n = a.len();
    let mut coeffs = vec![Complex64::one()];
    let mut m = linalg::cmat_identity(n);
    for k in 1..=n {
        let am = linalg::cmat_mul(a, &m);
        let tr: Complex64 = (0..n).map(|i| am[i][i]).sum();
        let ck = -tr / (k as f64);
        coeffs.push(ck);
        m = am;
        for i in 0..n {
            m[i][i] += ck;
        }
    }
    coeffs
}

/// Coefficient vector of the derivative of a dense polynomial given highest
/// degree first.
fn poly_derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    (0..n).map(|k| coeffs[k] * ((n - k) as f64)).collect()
}

/// Newton refinement of a simple root; gives up (returning the start point)
/// if the iteration leaves a trust radius instead of converging.
fn newton_polish(coeffs: &[Complex64], start: Complex64, trust: f64) -> Complex64 {
    let eval = |x: Complex64| -> Complex64 {
        let mut p = Complex64::zero();
        for &c in coeffs {
            p = p * x + c;
        }
        p
    };
    let dcoeffs = poly_derivative(coeffs);
    let deval = |x: Complex64| -> Complex64 {
        let mut p = Complex64::zero();
        for &c in &dcoeffs {
            p = p * x + c;
        }
        p
    };
    let mut x = start;
    for _ in 0..60 {
        let d = deval(x);
        if d.norm() == 0.0 {
            return start;
        }
        let step = eval(x) / d;
        x -= step;
        if (x - start).norm() > trust {
            return start;
        }
        if step.norm() <= 1e-16 * x.norm().max(1.0) {
            break;
        }
    }
    x
}

/// Simultaneous (Weierstrass) root iteration for a monic polynomial with
/// deterministic initial guesses on a Cauchy-bound circle.
fn durand_kerner(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-coeffs[1]]);
    }
    let radius = 1.0 + coeffs.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| {
            let angle = 2.0 * PI * (j as f64) / (n as f64) + 0.4;
            radius * Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut p = Complex64::zero();
        for &c in coeffs {
            p = p * x + c;
        }
        p
    };
    let scale_at = |x: Complex64| -> f64 {
        let ax = x.norm();
        let mut s = 0.0;
        for &c in coeffs {
            s = s * ax + c.norm();
        }
        s.max(f64::MIN_POSITIVE)
    };
    let max_iter = 300;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let mut max_step = 0.0f64;
        for j in 0..n {
            let mut den = Complex64::one();
            for k in 0..n {
                if k != j {
                    den *= z[j] - z[k];
                }
            }
            if den.norm() == 0.0 {
                // Coincident iterates: nudge deterministically.
                z[j] += Complex64::new(1e-6 * radius, 1e-6 * radius);
                continue;
            }
            let step = eval(z[j]) / den;
            z[j] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius {
            break;
        }
        let worst = z
            .iter()
            .map(|&x| eval(x).norm() / scale_at(x))
            .fold(0.0, f64::max);
        if worst < 1e-14 {
            break;
        }
    }
    let worst = z
        .iter()
        .map(|&x| eval(x).norm() / scale_at(x))
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(Error::NoConvergence {
            what: "polynomial root iteration",
            iterations,
            residual: worst,
        });
    }
    Ok(z)
}

/// Dedekind eta at a point of the upper half-plane, via the product
/// `exp(pi i tau / 12) prod (1 - q^n)` with terms below 1e-17 dropped.
pub fn eta_numeric(tau: Complex64) -> Result<Complex64> {
    if tau.im <= 0.0 {
        return Err(Error::NotInUpperHalfPlane { value: format_complex(tau) });
    }
    let q = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
    let mut prod = Complex64::one();
    let mut qn = q;
    while qn.norm() >= 1e-17 {
        prod *= Complex64::one() - qn;
        qn *= q;
    }
    Ok((Complex64::new(0.0, PI) * tau / 12.0).exp() * prod)
}

/// The logarithmic derivative ratio `nu(tau) = (1/2 pi i) eta'(tau)/eta(tau)
/// = 1/24 - sum_{n>=1} n q^n / (1 - q^n)`.
pub fn eta_log_derivative(tau: Complex64) -> Result<Complex64> {
    if tau.im <= 0.0 {
        return Err(Error::NotInUpperHalfPlane { value: format_complex(tau) });
    }
    let q = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
    let mut acc = Complex64::new(1.0 / 24.0, 0.0);
    let mut qn = q;
    let mut n = 1.0;
    while qn.norm() * n >= 1e-18 {
        acc -= n * qn / (Complex64::one() - qn);
        qn *= q;
        n += 1.0;
    }
    Ok(acc)
}

/// Eisenstein series of weight `2k` evaluated numerically:
/// `2 zeta(2k) + (2 (2 pi i)^{2k} / (2k-1)!) sum sigma_{2k-1}(n) q^n`.
pub fn eisenstein_numeric(k: u32, tau: Complex64) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::InvalidInput("Eisenstein weight must be at least 2".into()));
    }
    if tau.im <= 0.0 {
        return Err(Error::NotInUpperHalfPlane { value: format_complex(tau) });
    }
    let q = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
    let two_pi = 2.0 * PI;
    let mut pow = 1.0;
    let mut fact = 1.0;
    for i in 1..=(2 * k) {
        pow *= two_pi;
        if i < 2 * k {
            fact *= i as f64;
        }
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let c = 2.0 * sign * pow / fact;
    let mut acc = Complex64::new(2.0 * crate::qseries::zeta_even(k), 0.0);
    let mut qn = q;
    for n in 1u64..100_000 {
        let s = sigma_pow(n, 2 * k - 1) * c;
        let term = qn * s;
        acc += term;
        // sigma_m(n) < n^{m+1}, so once |q|^n n^{2k} |c| is negligible the
        // remaining tail is too (geometric decay beats the polynomial).
        if qn.norm() * (n as f64).powi(2 * k as i32) * c.abs() < 1e-18 * acc.norm().max(1.0) {
            return Ok(acc);
        }
        qn *= q;
    }
    Err(Error::NoConvergence {
        what: "Eisenstein q-expansion",
        iterations: 100_000,
        residual: qn.norm(),
    })
}

fn sigma_pow(n: u64, m: u32) -> f64 {
    let mut acc = 0.0;
    for d in 1..=n {
        if n % d == 0 {
            acc += (d as f64).powi(m as i32);
        }
    }
    acc
}

/// Tail radius: enumerate all coset vectors with `<beta, beta> <= R` so the
/// omitted terms sum below `tol/2`. Derived from
/// `sum_{Q > R} e^{-pi eps Q} <= e^{-pi eps R / 2} (3 + sqrt(2/(eps lambda)))^g`
/// where `lambda` is the smallest Gram eigenvalue; the `weighted` variant
/// covers an extra factor of `Q` in the summand.
fn tail_radius(eps: f64, lambda: f64, g: usize, tol: f64, weighted: bool) -> f64 {
    let k = 3.0 + (2.0 / (eps * lambda)).sqrt();
    let base = (g as f64) * k.ln() + (2.0 / tol).ln();
    let mut r = (2.0 / (PI * eps)) * base;
    if weighted {
        // Solve R e^{-pi eps R/2} K^g <= tol/2 by two fixed-point rounds.
        for _ in 0..2 {
            r = (2.0 / (PI * eps)) * (base + r.max(1.0).ln());
        }
    }
    r.max(1.0)
}

/// Siegel theta sum of the coset `L + rep` at the point `A`:
/// `sum_beta exp(pi i <beta~, A beta~>)` where `beta~` are the coordinates
/// of `beta` in a fixed orthonormal frame (the transposed Cholesky factor
/// of the Gram matrix). Absolute accuracy `tol` via the tail bound above.
pub fn siegel_theta(
    l: &IntegralLattice,
    coset: &CosetLabel,
    a: &SiegelPoint,
    tol: f64,
) -> Result<Complex64> {
    siegel_theta_with_budget(l, coset, a, tol, DEFAULT_VECTOR_BUDGET)
}

pub fn siegel_theta_with_budget(
    l: &IntegralLattice,
    coset: &CosetLabel,
    a: &SiegelPoint,
    tol: f64,
    budget: u64,
) -> Result<Complex64> {
    let (theta, _) = theta_sums(l, coset, a, tol, budget, None)?;
    Ok(theta)
}

/// Shared enumeration for plain and weighted theta sums. With
/// `axis = Some(j)` also returns `sum beta~_j^2 exp(pi i <beta~, A beta~>)`,
/// the building block for insertion traces.
pub(crate) fn theta_sums(
    l: &IntegralLattice,
    coset: &CosetLabel,
    a: &SiegelPoint,
    tol: f64,
    budget: u64,
    axis: Option<usize>,
) -> Result<(Complex64, Complex64)> {
    if a.dim() != l.rank() {
        return Err(Error::InvalidInput(format!(
            "matrix dimension {} does not match lattice rank {}",
            a.dim(),
            l.rank()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let tol = tol.max(1e-14);
    let g = l.rank();
    let eps = a.epsilon();
    let lambda = l.min_eigenvalue();
    let r = tail_radius(eps, lambda, g, tol, axis.is_some());
    let max_norm = Rat::from_integer(r.ceil() as i64).max(coset.norm());
    let shell = l.enumerate_shifted(coset.rep(), max_norm, budget)?;

    // B = C^T A C maps coordinate vectors to the frame quadratic form.
    let c = l.cholesky_factor();
    let mut b = linalg::cmat_zero(g, g);
    for i in 0..g {
        for j in 0..g {
            let mut acc = Complex64::zero();
            for p in 0..g {
                for q in 0..g {
                    acc += c[p][i] * a.entry(p, q) * c[q][j];
                }
            }
            b[i][j] = acc;
        }
    }

    let mut plain = Vec::with_capacity(shell.len());
    let mut weighted = Vec::with_capacity(if axis.is_some() { shell.len() } else { 0 });
    let mut x = vec![0.0f64; g];
    for idx in 0..shell.len() {
        let off = shell.offset(idx);
        let rep = coset.rep();
        for i in 0..g {
            x[i] = off[i] as f64 + rat_f64(rep[i]);
        }
        let mut s = Complex64::zero();
        for i in 0..g {
            let mut row = Complex64::zero();
            for j in 0..g {
                row += b[i][j] * x[j];
            }
            s += row * x[i];
        }
        let term = (Complex64::new(0.0, PI) * s).exp();
        if let Some(ax) = axis {
            // beta~_ax = (C x)_ax.
            let mut coord = 0.0;
            for j in ax..g {
                coord += c[ax][j] * x[j];
            }
            weighted.push(term * (coord * coord));
        }
        plain.push(term);
    }
    let theta = linalg::pairwise_sum(&plain);
    let theta_weighted = linalg::pairwise_sum(&weighted);
    Ok((theta, theta_weighted))
}

fn rat_f64(x: Rat) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Exact rational helper for tests and callers that need `Ratio` powers of
/// the T-phase: `exp(2 pi i frac)` for a rational `frac`.
pub fn unit_phase(frac: Ratio<i64>) -> Complex64 {
    let f = frac - frac.floor();
    let angle = 2.0 * PI * (*f.numer() as f64) / (*f.denom() as f64);
    Complex64::new(angle.cos(), angle.sin())
}

/// Greatest common divisor helper re-exported for the CLI's fraction
/// parsing.
pub fn reduce_fraction(num: i64, den: i64) -> (i64, i64) {
    let g = num.gcd(&den).max(1);
    (num / g, den / g)
}
