//! Small dense linear-algebra helpers shared by the analytic kernels and
//! the modular-data solver: Jacobi eigenvalues for real symmetric matrices,
//! LU factorization over the complex numbers, and a deterministic pairwise
//! summation tree.

use num_complex::Complex64;
use num_traits::Zero;

/// Eigenvalues of a real symmetric matrix via cyclic Jacobi rotations,
/// sorted ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 1 {
        return vec![a[0][0]];
    }
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

pub type CMat = Vec<Vec<Complex64>>;

pub fn cmat_zero(rows: usize, cols: usize) -> CMat {
    vec![vec![Complex64::zero(); cols]; rows]
}

pub fn cmat_identity(n: usize) -> CMat {
    let mut m = cmat_zero(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn cmat_mul(a: &CMat, b: &CMat) -> CMat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = cmat_zero(n, m);
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            if ail.is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn cmat_sub(a: &CMat, b: &CMat) -> CMat {
    a.iter()
        .zip(b.iter())
        .map(|(ra, rb)| ra.iter().zip(rb.iter()).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn cmat_transpose(a: &CMat) -> CMat {
    let (n, m) = (a.len(), a[0].len());
    let mut out = cmat_zero(m, n);
    for i in 0..n {
        for j in 0..m {
            out[j][i] = a[i][j];
        }
    }
    out
}

pub fn cmat_conj_transpose(a: &CMat) -> CMat {
    let (n, m) = (a.len(), a[0].len());
    let mut out = cmat_zero(m, n);
    for i in 0..n {
        for j in 0..m {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

/// Maximum absolute column sum.
pub fn one_norm(a: &CMat) -> f64 {
    let (n, m) = (a.len(), a[0].len());
    (0..m)
        .map(|j| (0..n).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude.
pub fn max_norm(a: &CMat) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// LU factorization with partial pivoting. Returns the packed factors and
/// the row permutation, or `None` when a pivot collapses to zero.
pub struct LuFactors {
    lu: CMat,
    perm: Vec<usize>,
    sign: f64,
}

pub fn lu_factor(a: &CMat) -> Option<LuFactors> {
    let n = a.len();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (mut best, mut best_mag) = (k, lu[k][k].norm());
        for i in (k + 1)..n {
            let mag = lu[i][k].norm();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return None;
        }
        if best != k {
            lu.swap(best, k);
            perm.swap(best, k);
            sign = -sign;
        }
        let piv = lu[k][k];
        for i in (k + 1)..n {
            let f = lu[i][k] / piv;
            lu[i][k] = f;
            for j in (k + 1)..n {
                let sub = f * lu[k][j];
                lu[i][j] -= sub;
            }
        }
    }
    Some(LuFactors { lu, perm, sign })
}

/// Determinant via LU with partial pivoting.
pub fn cmat_det(a: &CMat) -> Complex64 {
    match lu_factor(a) {
        None => Complex64::zero(),
        Some(f) => {
            let mut det = Complex64::new(f.sign, 0.0);
            for k in 0..a.len() {
                det *= f.lu[k][k];
            }
            det
        }
    }
}

impl LuFactors {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let sub = self.lu[i][j] * y[j];
                y[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let sub = self.lu[i][j] * y[j];
                y[i] -= sub;
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

/// Inverse via LU; `None` if singular to working precision.
pub fn cmat_inverse(a: &CMat) -> Option<CMat> {
    let n = a.len();
    let f = lu_factor(a)?;
    let mut inv = cmat_zero(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::zero(); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = f.solve(&e);
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// One-norm condition estimate `|A|_1 * |A^{-1}|_1`; infinite if singular.
pub fn condition_estimate(a: &CMat) -> f64 {
    match cmat_inverse(a) {
        Some(inv) => one_norm(a) * one_norm(&inv),
        None => f64::INFINITY,
    }
}

/// Deterministic pairwise (fixed binary tree) summation: the same slice
/// always produces bit-identical results, and the tree keeps rounding error
/// logarithmic in the term count.
pub fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    match terms.len() {
        0 => Complex64::zero(),
        1 => terms[0],
        2 => terms[0] + terms[1],
        3 => (terms[0] + terms[1]) + terms[2],
        4 => (terms[0] + terms[1]) + (terms[2] + terms[3]),
        n => {
            let mid = n / 2;
            pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
        }
    }
}
