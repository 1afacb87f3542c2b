//! Truncated q-expansions on a fixed fractional exponent grid: the Dedekind
//! eta product, Eisenstein series, and theta series of lattice cosets,
//! together with ring operations (multiply, invert, q d/dq) that track the
//! truncation cutoff honestly.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{CosetLabel, IntegralLattice, Rat};

/// A q-series truncated below `cutoff`: terms are `coeff * q^(key/grid)`
/// with integer keys, and every kept exponent satisfies `key/grid < cutoff`.
#[derive(Debug, Clone)]
pub struct TruncatedQSeries {
    grid: i64,
    cutoff: Rat,
    terms: BTreeMap<i64, Complex64>,
}

impl TruncatedQSeries {
    fn new(grid: i64, cutoff: Rat) -> Self {
        assert!(grid > 0);
        Self { grid, cutoff, terms: BTreeMap::new() }
    }

    /// Builds a series from explicit `(exponent, coefficient)` pairs.
    pub fn from_terms(
        grid: i64,
        cutoff: Rat,
        terms: impl IntoIterator<Item = (Rat, Complex64)>,
    ) -> Result<Self> {
        let mut s = Self::new(grid, cutoff);
        for (e, c) in terms {
            let key = e * Rat::from_integer(grid);
            if !key.is_integer() {
                return Err(Error::InvalidInput(format!(
                    "exponent {e} does not lie on the 1/{grid} grid"
                )));
            }
            if e < cutoff {
                s.add_term(key.to_integer(), c);
            }
        }
        Ok(s)
    }

    fn add_term(&mut self, key: i64, c: Complex64) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key).or_insert_with(Complex64::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// Exponent grid denominator: all exponents are multiples of `1/grid`.
    pub fn grid(&self) -> i64 {
        self.grid
    }

    /// Truncation cutoff: exponents `>= cutoff` have been dropped.
    pub fn cutoff(&self) -> Rat {
        self.cutoff
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (Rat, Complex64)> + '_ {
        self.terms.iter().map(move |(&k, &c)| (Rat::new(k, self.grid), c))
    }

    /// Coefficient of `q^e` (zero if absent or off-grid).
    pub fn coeff(&self, e: Rat) -> Complex64 {
        let key = e * Rat::from_integer(self.grid);
        if !key.is_integer() {
            return Complex64::zero();
        }
        self.terms.get(&key.to_integer()).copied().unwrap_or_else(Complex64::zero)
    }

    /// Smallest exponent with a nonzero coefficient.
    pub fn leading_exponent(&self) -> Option<Rat> {
        self.terms.keys().next().map(|&k| Rat::new(k, self.grid))
    }

    fn regrid(&self, grid: i64) -> Self {
        assert_eq!(grid % self.grid, 0);
        let f = grid / self.grid;
        let mut out = Self::new(grid, self.cutoff);
        for (&k, &c) in &self.terms {
            out.terms.insert(k * f, c);
        }
        out
    }

    /// Product of two truncated series. The result's cutoff is the honest
    /// one: `min(cutoff_a + lead_b, cutoff_b + lead_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let grid = num_integer::lcm(self.grid, other.grid);
        let a = self.regrid(grid);
        let b = other.regrid(grid);
        let lead_a = a.leading_exponent().unwrap_or(a.cutoff);
        let lead_b = b.leading_exponent().unwrap_or(b.cutoff);
        let cutoff = (a.cutoff + lead_b).min(b.cutoff + lead_a);
        let cutoff_key = key_bound(cutoff, grid);
        let mut out = Self::new(grid, cutoff);
        for (&ka, &ca) in &a.terms {
            for (&kb, &cb) in &b.terms {
                let k = ka + kb;
                if k < cutoff_key {
                    out.add_term(k, ca * cb);
                } else {
                    break; // keys ascend within the inner map
                }
            }
        }
        out
    }

    /// Multiplicative inverse. The leading coefficient must be nonzero;
    /// the result is truncated at `cutoff - 2 * lead`, which is all the
    /// precision the input supports.
    pub fn invert(&self) -> Result<Self> {
        let lead_key = *self.terms.keys().next().ok_or(Error::NonInvertibleLeadingTerm)?;
        let c0 = self.terms[&lead_key];
        if c0.norm() == 0.0 {
            return Err(Error::NonInvertibleLeadingTerm);
        }
        let lead = Rat::new(lead_key, self.grid);
        let cutoff = self.cutoff - lead - lead;
        // Relative precision in grid steps: f = c0 q^lead (1 + g) with g
        // supported on steps 1..steps.
        let steps = (key_bound(self.cutoff, self.grid) - lead_key).max(0);
        let rel: Vec<(i64, Complex64)> = self
            .terms
            .iter()
            .filter(|(&k, _)| k > lead_key)
            .map(|(&k, &c)| (k - lead_key, c))
            .collect();
        let mut h = vec![Complex64::zero(); steps.max(1) as usize];
        h[0] = Complex64::one() / c0;
        for s in 1..steps {
            let mut acc = Complex64::zero();
            for &(t, c) in &rel {
                if t > s {
                    break;
                }
                acc += c * h[(s - t) as usize];
            }
            h[s as usize] = -acc / c0;
        }
        let mut out = Self::new(self.grid, cutoff);
        let out_bound = key_bound(cutoff, self.grid);
        for (s, &c) in h.iter().enumerate() {
            let k = -lead_key + s as i64;
            if k < out_bound {
                out.add_term(k, c);
            }
        }
        Ok(out)
    }

    /// The operator `q d/dq`: multiplies each coefficient by its exponent.
    pub fn derive_qddq(&self) -> Self {
        let mut out = Self::new(self.grid, self.cutoff);
        for (&k, &c) in &self.terms {
            out.add_term(k, c * (k as f64 / self.grid as f64));
        }
        out
    }

    pub fn scale(&self, f: Complex64) -> Self {
        let mut out = Self::new(self.grid, self.cutoff);
        for (&k, &c) in &self.terms {
            out.add_term(k, c * f);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let grid = num_integer::lcm(self.grid, other.grid);
        let a = self.regrid(grid);
        let b = other.regrid(grid);
        let cutoff = a.cutoff.min(b.cutoff);
        let bound = key_bound(cutoff, grid);
        let mut out = Self::new(grid, cutoff);
        for (&k, &c) in a.terms.iter().chain(b.terms.iter()) {
            if k < bound {
                out.add_term(k, c);
            }
        }
        out
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, n: u32) -> Self {
        assert!(n >= 1);
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Numerical evaluation at `tau` in the upper half-plane:
    /// sum of `c * exp(2 pi i tau e)` over kept terms, ascending exponents.
    pub fn eval(&self, tau: Complex64) -> Complex64 {
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let mut acc = Complex64::zero();
        for (&k, &c) in &self.terms {
            let e = k as f64 / self.grid as f64;
            acc += c * (two_pi_i * tau * e).exp();
        }
        acc
    }

    /// Plain-text rendering, one `coefficient * q^(exponent)` line per term,
    /// coefficients printed to 17 significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (e, c) in self.terms() {
            let exp = if e.is_integer() {
                format!("{}", e.to_integer())
            } else {
                format!("{}/{}", e.numer(), e.denom())
            };
            out.push_str(&format!("({:.16e}, {:.16e}) * q^({})\n", c.re, c.im, exp));
        }
        out
    }
}

/// Smallest integer key bound: keys `>= bound` correspond to exponents
/// `>= cutoff`.
fn key_bound(cutoff: Rat, grid: i64) -> i64 {
    (cutoff * Rat::from_integer(grid)).ceil().to_integer()
}

/// Dedekind eta as a truncated series on the grid of 1/24:
/// `q^{1/24} prod_{n>=1} (1 - q^n)`.
pub fn eta_series(cutoff: Rat) -> Result<TruncatedQSeries> {
    let min = Rat::new(1, 24);
    if cutoff <= min {
        return Err(Error::CutoffTooSmall {
            cutoff: cutoff.to_string(),
            minimum: "1/24".into(),
        });
    }
    // Integer-exponent part: prod (1 - q^n) truncated at cutoff - 1/24.
    let int_cut = (cutoff - min).ceil().to_integer();
    let mut coeffs: Vec<i64> = vec![0; int_cut as usize + 1];
    coeffs[0] = 1;
    for n in 1..=(int_cut as usize) {
        for e in (n..coeffs.len()).rev() {
            coeffs[e] -= coeffs[e - n];
        }
    }
    let mut s = TruncatedQSeries::new(24, cutoff);
    let bound = key_bound(cutoff, 24);
    for (e, &c) in coeffs.iter().enumerate() {
        let k = 24 * e as i64 + 1;
        if c != 0 && k < bound {
            s.add_term(k, Complex64::new(c as f64, 0.0));
        }
    }
    Ok(s)
}

/// Bernoulli number `B_n` (B_1 = -1/2 convention) via the defining
/// recurrence, exact over i128 rationals.
pub fn bernoulli(n: usize) -> Ratio<i128> {
    let mut b: Vec<Ratio<i128>> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(Ratio::one());
            continue;
        }
        // sum_{j=0}^{m} C(m+1, j) B_j = 0.
        let mut acc = Ratio::zero();
        let mut binom: i128 = 1; // C(m+1, 0)
        for (j, bj) in b.iter().enumerate() {
            acc += bj * binom;
            binom = binom * (m as i128 + 1 - j as i128) / (j as i128 + 1);
        }
        b.push(-acc / Ratio::from_integer(m as i128 + 1));
    }
    b[n]
}

/// `zeta(2k)` from the Bernoulli closed form
/// `zeta(2k) = (-1)^{k+1} B_{2k} (2 pi)^{2k} / (2 (2k)!)`.
pub fn zeta_even(k: u32) -> f64 {
    assert!(k >= 1 && k <= 15);
    let b = bernoulli(2 * k as usize);
    let b_f = b.to_f64().expect("small Bernoulli number");
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut pow = 1.0;
    let mut fact = 1.0;
    for i in 1..=(2 * k) {
        pow *= two_pi;
        fact *= i as f64;
    }
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    sign * b_f * pow / (2.0 * fact)
}

/// Eisenstein series of weight `2k`, normalized as
/// `2 zeta(2k) + (2 (2 pi i)^{2k} / (2k-1)!) sum sigma_{2k-1}(n) q^n`.
pub fn eisenstein_series(k: u32, cutoff: Rat) -> Result<TruncatedQSeries> {
    if k == 0 {
        return Err(Error::InvalidInput("Eisenstein weight must be at least 2".into()));
    }
    if cutoff <= Rat::zero() {
        return Err(Error::CutoffTooSmall { cutoff: cutoff.to_string(), minimum: "0".into() });
    }
    let mut s = TruncatedQSeries::new(1, cutoff);
    s.add_term(0, Complex64::new(2.0 * zeta_even(k), 0.0));
    // (2 pi i)^{2k} = (-1)^k (2 pi)^{2k}, so the q-coefficients are real.
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut pow = 1.0; // (2 pi)^{2k}
    let mut fact = 1.0; // (2k - 1)!
    for i in 1..=(2 * k) {
        pow *= two_pi;
        if i < 2 * k {
            fact *= i as f64;
        }
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let c = 2.0 * sign * pow / fact;
    let n_max = cutoff.ceil().to_integer() - 1;
    for n in 1..=n_max.max(0) {
        if Rat::from_integer(n) >= cutoff {
            break;
        }
        s.add_term(n, Complex64::new(c * sigma(n as u64, 2 * k - 1) as f64, 0.0));
    }
    Ok(s)
}

/// Divisor power sum `sigma_m(n) = sum_{d | n} d^m`.
fn sigma(n: u64, m: u32) -> u64 {
    let mut acc = 0u64;
    for d in 1..=n {
        if n % d == 0 {
            acc += d.pow(m);
        }
    }
    acc
}

/// Theta series of the coset `L + rep`: `sum q^{<beta, beta>/2}` over the
/// coset, truncated below `cutoff`. Exponents live on the 1/(24 det) grid.
pub fn theta_coset_series(
    l: &IntegralLattice,
    coset: &CosetLabel,
    cutoff: Rat,
) -> Result<TruncatedQSeries> {
    let lead = coset.norm() / Rat::from_integer(2);
    if cutoff <= lead {
        return Err(Error::CutoffTooSmall {
            cutoff: cutoff.to_string(),
            minimum: lead.to_string(),
        });
    }
    let grid = 24 * l.det();
    let shell = l.enumerate_by_norm(coset, cutoff * Rat::from_integer(2))?;
    let mut s = TruncatedQSeries::new(grid, cutoff);
    let bound = key_bound(cutoff, grid);
    for i in 0..shell.len() {
        let e = shell.norm(i) / Rat::from_integer(2);
        let key = (e * Rat::from_integer(grid)).to_integer();
        if key < bound {
            s.add_term(key, Complex64::one());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(n, d)
    }

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn eta_small_cutoff_terms() {
        let e = eta_series(rat(3, 1)).unwrap();
        let terms: Vec<(Rat, f64)> = e.terms().map(|(x, c)| (x, c.re)).collect();
        assert_eq!(
            terms,
            vec![(rat(1, 24), 1.0), (rat(25, 24), -1.0), (rat(49, 24), -1.0)]
        );
    }

    #[test]
    fn eta_rejects_tiny_cutoff() {
        assert!(matches!(
            eta_series(rat(1, 24)),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn eta_satisfies_pentagonal_number_pattern() {
        // 1/eta * q^{1/24} = sum_k (-1)^k q^{k(3k-1)/2}: nonzero coefficients
        // of the product sit exactly at generalized pentagonal numbers.
        let e = eta_series(rat(721, 24)).unwrap(); // integer exponents 0..=29
        let mut expected = std::collections::BTreeMap::new();
        for k in -10i64..=10 {
            let p = k * (3 * k - 1) / 2;
            if (0..30).contains(&p) {
                expected.insert(p, if k % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        for n in 0..30i64 {
            let c = e.coeff(rat(24 * n + 1, 24)).re;
            assert_eq!(c, expected.get(&n).copied().unwrap_or(0.0), "exponent {n} + 1/24");
        }
    }

    #[test]
    fn eta_eval_matches_closed_form_at_i() {
        // eta(i) = Gamma(1/4) / (2 pi^{3/4}).
        let e = eta_series(rat(20, 1)).unwrap();
        let v = e.eval(Complex64::new(0.0, 1.0));
        assert!((v.re - 0.768225422326056659).abs() < 1e-14, "{}", v.re);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn bernoulli_numbers_are_exact() {
        assert_eq!(bernoulli(0), Ratio::from_integer(1));
        assert_eq!(bernoulli(1), Ratio::new(-1, 2));
        assert_eq!(bernoulli(2), Ratio::new(1, 6));
        assert_eq!(bernoulli(4), Ratio::new(-1, 30));
        assert_eq!(bernoulli(12), Ratio::new(-691, 2730));
        assert_eq!(bernoulli(3), Ratio::from_integer(0));
    }

    #[test]
    fn zeta_even_matches_pi_powers() {
        assert!((zeta_even(1) - PI * PI / 6.0).abs() < 1e-15);
        assert!((zeta_even(2) - PI.powi(4) / 90.0).abs() < 1e-15);
        assert!((zeta_even(3) - PI.powi(6) / 945.0).abs() < 1e-13);
    }

    #[test]
    fn eisenstein_weight_two_coefficients() {
        let g2 = eisenstein_series(1, rat(8, 1)).unwrap();
        assert!((g2.coeff(rat(0, 1)).re - PI * PI / 3.0).abs() < 1e-12);
        let c1 = g2.coeff(rat(1, 1)).re;
        assert!((c1 + 8.0 * PI * PI).abs() < 1e-10, "{c1}");
        // sigma_1 ratios: n=5 -> 6, n=6 -> 12.
        assert!((g2.coeff(rat(5, 1)).re / c1 - 6.0).abs() < 1e-12);
        assert!((g2.coeff(rat(6, 1)).re / c1 - 12.0).abs() < 1e-12);
    }

    #[test]
    fn eisenstein_weight_four_coefficients() {
        let g4 = eisenstein_series(2, rat(8, 1)).unwrap();
        assert!((g4.coeff(rat(0, 1)).re - PI.powi(4) / 45.0).abs() < 1e-12);
        let c1 = g4.coeff(rat(1, 1)).re;
        assert!((c1 - 16.0 * PI.powi(4) / 3.0).abs() < 1e-9, "{c1}");
        // sigma_3(6) = 252.
        assert!((g4.coeff(rat(6, 1)).re / c1 - 252.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_multiplies_to_one() {
        let e = eta_series(rat(6, 1)).unwrap();
        let inv = e.invert().unwrap();
        let prod = e.mul(&inv);
        assert_eq!(prod.coeff(rat(0, 1)), Complex64::one());
        for (exp, c) in prod.terms() {
            if !exp.is_zero() {
                panic!("unexpected residual term {c} * q^{exp}");
            }
        }
        // Cutoff bookkeeping: inverse of a series with lead 1/24 loses 2/24.
        assert_eq!(inv.cutoff(), rat(6, 1) - rat(2, 24));
        assert_eq!(inv.leading_exponent(), Some(rat(-1, 24)));
    }

    #[test]
    fn invert_rejects_zero_series() {
        let z = TruncatedQSeries::new(1, rat(5, 1));
        assert!(matches!(z.invert(), Err(Error::NonInvertibleLeadingTerm)));
    }

    #[test]
    fn derive_multiplies_by_exponent() {
        let e = eta_series(rat(3, 1)).unwrap();
        let d = e.derive_qddq();
        assert!((d.coeff(rat(1, 24)).re - 1.0 / 24.0).abs() < 1e-16);
        assert!((d.coeff(rat(25, 24)).re + 25.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn theta_series_of_a1_cosets() {
        let l = IntegralLattice::new("a1", vec![vec![2]]).unwrap();
        let d = l.discriminant_group();
        let t0 = theta_coset_series(&l, d.coset(0), rat(5, 1)).unwrap();
        // 1 + 2q + 2q^4 below cutoff 5.
        assert_eq!(t0.coeff(rat(0, 1)).re, 1.0);
        assert_eq!(t0.coeff(rat(1, 1)).re, 2.0);
        assert_eq!(t0.coeff(rat(2, 1)).re, 0.0);
        assert_eq!(t0.coeff(rat(4, 1)).re, 2.0);
        assert_eq!(t0.num_terms(), 3);
        let t1 = theta_coset_series(&l, d.coset(1), rat(5, 1)).unwrap();
        // 2q^{1/4} + 2q^{9/4} below cutoff 5.
        assert_eq!(t1.coeff(rat(1, 4)).re, 2.0);
        assert_eq!(t1.coeff(rat(9, 4)).re, 2.0);
        assert_eq!(t1.num_terms(), 2);
    }

    #[test]
    fn theta_cutoff_must_cover_leading_exponent() {
        let l = IntegralLattice::new("a1", vec![vec![2]]).unwrap();
        let d = l.discriminant_group();
        assert!(matches!(
            theta_coset_series(&l, d.coset(1), rat(1, 4)),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn theta_of_direct_sum_is_a_product() {
        let a1 = IntegralLattice::new("a1", vec![vec![2]]).unwrap();
        let l2 = IntegralLattice::new("two-i2", vec![vec![2, 0], vec![0, 2]]).unwrap();
        let da = a1.discriminant_group();
        let dl = l2.discriminant_group();
        let t_a = theta_coset_series(&a1, da.coset(0), rat(8, 1)).unwrap();
        let t_prod = t_a.mul(&t_a);
        let t_sum = theta_coset_series(&l2, dl.coset(0), rat(8, 1)).unwrap();
        for (e, c) in t_sum.terms() {
            if e < t_prod.cutoff() {
                assert_eq!(t_prod.coeff(e), c, "exponent {e}");
            }
        }
    }

    #[test]
    fn theta_eval_matches_gaussian_sum_at_i() {
        // Theta of the rank-1 lattice <2> at tau = i: sum exp(-2 pi n^2).
        let l = IntegralLattice::new("a1", vec![vec![2]]).unwrap();
        let d = l.discriminant_group();
        let t0 = theta_coset_series(&l, d.coset(0), rat(9, 1)).unwrap();
        let v = t0.eval(Complex64::new(0.0, 1.0));
        assert!((v.re - 1.00373488548773909).abs() < 1e-14, "{}", v.re);
        // Shifted coset: 2 sum exp(-2 pi (n + 1/2)^2).
        let t1 = theta_coset_series(&l, d.coset(1), rat(9, 1)).unwrap();
        let v1 = t1.eval(Complex64::new(0.0, 1.0));
        assert!((v1.re - 0.415760602596027032).abs() < 1e-14, "{}", v1.re);
    }

    #[test]
    fn render_is_stable() {
        let e = eta_series(rat(2, 1)).unwrap();
        let text = e.render();
        assert_eq!(
            text,
            "(1.0000000000000000e0, 0.0000000000000000e0) * q^(1/24)\n\
             (-1.0000000000000000e0, 0.0000000000000000e0) * q^(25/24)\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn theta_coefficients_are_nonnegative_integers(
            diag in proptest::collection::vec(1i64..=3, 1..=2),
            cutoff in 2i64..=10,
        ) {
            let g = diag.len();
            let mut gram = vec![vec![0i64; g]; g];
            for i in 0..g {
                gram[i][i] = 2 * diag[i];
            }
            let l = IntegralLattice::new("diag", gram).unwrap();
            let d = l.discriminant_group();
            for c in d.cosets() {
                let t = theta_coset_series(&l, c, Rat::from_integer(cutoff)).unwrap();
                for (_, coeff) in t.terms() {
                    prop_assert!(coeff.im == 0.0);
                    prop_assert!(coeff.re >= 1.0);
                    prop_assert_eq!(coeff.re.fract(), 0.0);
                }
            }
        }

        #[test]
        fn mul_cutoff_is_min_rule(a in 2i64..=6, b in 2i64..=6) {
            let x = eta_series(Rat::from_integer(a)).unwrap();
            let y = eta_series(Rat::from_integer(b)).unwrap();
            let p = x.mul(&y);
            let expect = (Rat::from_integer(a) + rat(1, 24)).min(Rat::from_integer(b) + rat(1, 24));
            prop_assert_eq!(p.cutoff(), expect);
            prop_assert_eq!(p.leading_exponent(), Some(rat(2, 24)));
        }
    }
}
