//! Even positive-definite lattices: Gram-matrix validation, discriminant
//! group data via the Smith normal form, and exact enumeration of lattice
//! vectors (with a rational coset shift) below a norm cutoff.
//!
//! Everything here is exact: Gram arithmetic runs over `i128`, coset
//! representatives and vector norms are `Ratio<i64>`, and the enumeration
//! bounds are checked with rational comparisons so no vector is lost or
//! duplicated to rounding.

use num_rational::{Ratio, Rational64};
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Rational scalar used for coset coordinates and vector norms.
pub type Rat = Rational64;
type Rat128 = Ratio<i128>;

/// Ranks beyond this are rejected up front; the enumeration and SNF code
/// paths are exact and desk-scale, not asymptotic.
pub const MAX_RANK: usize = 16;
/// Gram entries beyond this magnitude are rejected so that the `i128`
/// minor/SNF arithmetic cannot overflow.
pub const MAX_ENTRY: i64 = 1 << 20;

fn rat_to_128(x: Rat) -> Rat128 {
    Ratio::new(*x.numer() as i128, *x.denom() as i128)
}

fn rat_from_128(x: Rat128) -> Rat {
    let n = *x.numer();
    let d = *x.denom();
    debug_assert!(n.abs() <= i64::MAX as i128 && d <= i64::MAX as i128);
    Ratio::new(n as i64, d as i64)
}

/// Fractional part in `[0, 1)`.
fn frac(x: Rat) -> Rat {
    x - x.floor()
}

/// An even positive-definite lattice given by a Gram matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralLattice {
    name: String,
    gram: Vec<Vec<i64>>,
    rank: usize,
    det: i64,
}

impl IntegralLattice {
    /// Validates a Gram matrix and builds the lattice.
    ///
    /// Checks, in order: shape and entry bounds, symmetry, even diagonal,
    /// and positive definiteness via the signs of the leading principal
    /// minors (computed exactly with fraction-free elimination).
    pub fn new(name: impl Into<String>, gram: Vec<Vec<i64>>) -> Result<Self> {
        let rank = gram.len();
        if rank == 0 {
            return Err(Error::InvalidInput("empty Gram matrix".into()));
        }
        if rank > MAX_RANK {
            return Err(Error::InvalidInput(format!(
                "rank {rank} exceeds the supported maximum {MAX_RANK}"
            )));
        }
        for (i, row) in gram.iter().enumerate() {
            if row.len() != rank {
                return Err(Error::InvalidInput(format!(
                    "Gram matrix is not square: row {i} has {} entries, expected {rank}",
                    row.len()
                )));
            }
            for &e in row {
                if e.abs() > MAX_ENTRY {
                    return Err(Error::InvalidInput(format!(
                        "Gram entry {e} exceeds the supported magnitude {MAX_ENTRY}"
                    )));
                }
            }
        }
        for i in 0..rank {
            for j in (i + 1)..rank {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            if row[i] % 2 != 0 {
                return Err(Error::NotEven { index: i });
            }
        }
        let minors = leading_minors(&gram)?;
        let det_i128 = minors[rank - 1];
        let det = i64::try_from(det_i128).map_err(|_| {
            Error::InvalidInput(format!("determinant {det_i128} exceeds the supported range"))
        })?;
        Ok(Self { name: name.into(), gram, rank, det })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gram(&self) -> &[Vec<i64>] {
        &self.gram
    }

    /// Determinant of the Gram matrix = order of the discriminant group.
    pub fn det(&self) -> i64 {
        self.det
    }

    /// Bilinear form `<x, y>` on rational coordinate vectors.
    pub fn inner(&self, x: &[Rat], y: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for i in 0..self.rank {
            for j in 0..self.rank {
                acc += x[i] * Rat::from_integer(self.gram[i][j]) * y[j];
            }
        }
        acc
    }

    /// Quadratic form `<x, x>`.
    pub fn norm(&self, x: &[Rat]) -> Rat {
        self.inner(x, x)
    }

    /// Upper-triangular real factor `C` with `G = C^T C` (transposed
    /// Cholesky). Maps coordinates to an orthonormal frame: `|C x|^2 = <x, x>`.
    pub fn cholesky_factor(&self) -> Vec<Vec<f64>> {
        let n = self.rank;
        // Standard lower-triangular Cholesky of G, returned transposed.
        let mut l = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.gram[i][j] as f64;
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    debug_assert!(s > 0.0);
                    l[i][j] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let mut c = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..=i {
                c[j][i] = l[i][j];
            }
        }
        c
    }

    /// Smallest eigenvalue of the Gram matrix (binary64 estimate), used for
    /// tail bounds in the analytic kernels.
    pub fn min_eigenvalue(&self) -> f64 {
        let a: Vec<Vec<f64>> = self
            .gram
            .iter()
            .map(|row| row.iter().map(|&e| e as f64).collect())
            .collect();
        let eigs = crate::linalg::jacobi_eigenvalues(a);
        eigs[0]
    }

    /// Discriminant group `L*/L`: canonical coset representatives, the order,
    /// and the pairing table `<rep_i, rep_j> mod 1`.
    pub fn discriminant_group(&self) -> DiscriminantData {
        let g = self.rank;
        let (u, d, v) = smith_normal_form(&self.gram);
        let _ = u;
        let order: i128 = d.iter().product();
        debug_assert_eq!(order, self.det as i128);

        // Coset representatives of L*/L: columns of V scaled by 1/d_i span
        // G^{-1} Z^g mod Z^g; run over the mixed-radix index set.
        let mut raw_reps: Vec<Vec<Rat>> = Vec::with_capacity(order as usize);
        let mut idx = vec![0i128; g];
        loop {
            let mut x = vec![Rat128::zero(); g];
            for (i, &k) in idx.iter().enumerate() {
                if k != 0 {
                    for (row, xr) in x.iter_mut().enumerate() {
                        *xr += Ratio::new(v[row][i] * k, d[i]);
                    }
                }
            }
            let rep: Vec<Rat> = x.iter().map(|&c| frac(rat_from_128(c))).collect();
            raw_reps.push(rep);
            // Increment the mixed-radix counter.
            let mut pos = 0;
            loop {
                if pos == g {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < d[pos] {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == g {
                break;
            }
        }

        // Reduce each representative to the minimal-norm vector in its
        // coset; break ties by the lexicographically greatest coordinates.
        let mut cosets: Vec<CosetLabel> = raw_reps
            .iter()
            .map(|rep| {
                let bound = self.norm(rep);
                let shell = self
                    .enumerate_shifted(rep, bound, u64::MAX)
                    .expect("norm bound is nonnegative");
                let min_norm = shell
                    .norms
                    .first()
                    .copied()
                    .expect("coset contains its representative");
                let mut best: Option<Vec<Rat>> = None;
                for i in 0..shell.len() {
                    if shell.norm(i) != min_norm {
                        break; // shells are sorted by norm
                    }
                    let cand = shell.vector(i);
                    if best.as_ref().map_or(true, |b| cand > *b) {
                        best = Some(cand);
                    }
                }
                CosetLabel { rep: best.unwrap(), norm: min_norm }
            })
            .collect();
        cosets.sort_by(|a, b| a.norm.cmp(&b.norm).then_with(|| a.rep.cmp(&b.rep)));
        debug_assert!(cosets[0].norm.is_zero());

        let n = cosets.len();
        let mut pairing_table = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let p = frac(self.inner(&cosets[i].rep, &cosets[j].rep));
                pairing_table[i][j] = p;
                pairing_table[j][i] = p;
            }
        }
        DiscriminantData { cosets, order: order as i64, pairing_table }
    }

    /// All vectors `beta` in `L + rep(coset)` with `<beta, beta> <= max_norm`,
    /// sorted by norm and then lexicographically by integer offset.
    pub fn enumerate_by_norm(&self, coset: &CosetLabel, max_norm: Rat) -> Result<VectorShell> {
        self.enumerate_shifted(&coset.rep, max_norm, u64::MAX)
    }

    /// Enumeration around an arbitrary rational shift with a vector-count
    /// budget (used by the analytic kernels, which derive their cutoff from
    /// a tail bound and must fail loudly rather than run unbounded).
    pub(crate) fn enumerate_shifted(
        &self,
        shift: &[Rat],
        max_norm: Rat,
        budget: u64,
    ) -> Result<VectorShell> {
        if max_norm < Rat::zero() {
            return Err(Error::NegativeCutoff { cutoff: max_norm.to_string() });
        }
        assert_eq!(shift.len(), self.rank);
        let g = self.rank;
        let (lower, diag) = self.ldl();
        let shift128: Vec<Rat128> = shift.iter().map(|&s| rat_to_128(s)).collect();
        let bound = rat_to_128(max_norm);

        // Depth-first walk over coordinates g-1, g-2, ..., 0. At each level
        // the quadratic form has been completed to
        //     Q(x) = sum_i diag[i] * (x_i + sum_{j>i} lower[j][i] x_j)^2,
        // so given the chosen tail coordinates the feasible range for the
        // current one is an interval. Interval endpoints are located with
        // binary64 square roots, then every candidate is re-checked exactly.
        let mut offsets: Vec<Vec<i64>> = Vec::new();
        let mut norms128: Vec<Rat128> = Vec::new();
        let mut current = vec![0i64; g];
        let mut emitted: u64 = 0;

        // tail_sums[i] = sum_{k>i} diag[k]*(x_k + c_k)^2 for the current
        // partial assignment; centers[i] = shift_i + sum_{j>i} lower[j][i]*x_j.
        struct Frame {
            level: usize,
            hi: i64,
            next: i64,
            center: Rat128,
            used: Rat128, // norm consumed by levels above
        }

        let make_frame = |level: usize,
                          used: Rat128,
                          xs: &[i64],
                          shift128: &[Rat128]|
         -> Frame {
            // center = shift_level + sum_{j>level} lower[j][level] * (x_j + shift_j)
            let mut center = shift128[level];
            for j in (level + 1)..g {
                let xj = Ratio::from_integer(xs[j] as i128) + shift128[j];
                center += lower[j][level] * xj;
            }
            let budget_here = bound - used;
            debug_assert!(budget_here >= Rat128::zero());
            let s = (budget_here.to_f64().unwrap_or(0.0).max(0.0)
                / diag[level].to_f64().unwrap_or(1.0))
            .sqrt();
            let c = center.to_f64().unwrap_or(0.0);
            // One unit of slack on each side; candidates are checked exactly.
            let lo = (-c - s).floor() as i64 - 1;
            let hi = (-c + s).ceil() as i64 + 1;
            Frame { level, hi, next: lo, center, used }
        };

        let mut stack: Vec<Frame> = Vec::with_capacity(g);
        stack.push(make_frame(g - 1, Rat128::zero(), &current, &shift128));
        while let Some(frame) = stack.last_mut() {
            if frame.next > frame.hi {
                stack.pop();
                continue;
            }
            let m = frame.next;
            frame.next += 1;
            let z = Ratio::from_integer(m as i128) + frame.center;
            let term = diag[frame.level] * z * z;
            let used = frame.used + term;
            if used > bound {
                continue;
            }
            let level = frame.level;
            current[level] = m;
            if level == 0 {
                emitted += 1;
                if emitted > budget {
                    return Err(Error::TolUnachievable { needed: emitted, budget });
                }
                offsets.push(current.clone());
                norms128.push(used);
            } else {
                stack.push(make_frame(level - 1, used, &current, &shift128));
            }
        }

        let mut order: Vec<usize> = (0..offsets.len()).collect();
        order.sort_by(|&a, &b| {
            norms128[a]
                .cmp(&norms128[b])
                .then_with(|| offsets[a].cmp(&offsets[b]))
        });
        let offsets: Vec<Vec<i64>> = order.iter().map(|&i| std::mem::take(&mut offsets[i])).collect();
        let norms: Vec<Rat> = order.iter().map(|&i| rat_from_128(norms128[i])).collect();
        Ok(VectorShell { rep: shift.to_vec(), offsets, norms })
    }

    /// Exact rational LDL^T factorization of the Gram matrix:
    /// `G = L D L^T` with `L` unit lower triangular and `D` positive.
    fn ldl(&self) -> (Vec<Vec<Rat128>>, Vec<Rat128>) {
        let n = self.rank;
        let mut lower = vec![vec![Rat128::zero(); n]; n];
        let mut diag = vec![Rat128::zero(); n];
        for i in 0..n {
            let mut di = Ratio::from_integer(self.gram[i][i] as i128);
            for k in 0..i {
                di -= diag[k] * lower[i][k] * lower[i][k];
            }
            debug_assert!(di > Rat128::zero());
            diag[i] = di;
            lower[i][i] = Ratio::from_integer(1);
            for j in (i + 1)..n {
                let mut s = Ratio::from_integer(self.gram[j][i] as i128);
                for k in 0..i {
                    s -= diag[k] * lower[j][k] * lower[i][k];
                }
                lower[j][i] = s / diag[i];
            }
        }
        (lower, diag)
    }
}

/// A coset of `L` in the dual lattice `L*`, named by its canonical
/// representative: the minimal-norm vector, ties broken by taking the
/// lexicographically greatest coordinate vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetLabel {
    rep: Vec<Rat>,
    norm: Rat,
}

impl CosetLabel {
    /// Coordinates of the canonical representative (in the lattice basis).
    pub fn rep(&self) -> &[Rat] {
        &self.rep
    }

    /// Norm `<rep, rep>` of the canonical representative.
    pub fn norm(&self) -> Rat {
        self.norm
    }
}

/// The discriminant group `L*/L` of a lattice.
#[derive(Debug, Clone)]
pub struct DiscriminantData {
    cosets: Vec<CosetLabel>,
    order: i64,
    pairing_table: Vec<Vec<Rat>>,
}

impl DiscriminantData {
    /// Cosets in canonical order: sorted by representative norm, then
    /// lexicographically. Index 0 is always the zero coset.
    pub fn cosets(&self) -> &[CosetLabel] {
        &self.cosets
    }

    pub fn coset(&self, j: usize) -> &CosetLabel {
        &self.cosets[j]
    }

    /// Group order = determinant of the Gram matrix.
    pub fn order(&self) -> i64 {
        self.order
    }

    /// `<rep_i, rep_j> mod 1`, reduced to `[0, 1)`.
    pub fn pairing(&self, i: usize, j: usize) -> Rat {
        self.pairing_table[i][j]
    }

    /// Index of the coset containing the dual-lattice vector `x`, or `None`
    /// if `x` does not lie in any coset (i.e. is not in `L*`).
    pub fn coset_index_of(&self, x: &[Rat]) -> Option<usize> {
        'outer: for (j, c) in self.cosets.iter().enumerate() {
            if c.rep.len() != x.len() {
                return None;
            }
            for (a, b) in x.iter().zip(c.rep.iter()) {
                if !(a - b).is_integer() {
                    continue 'outer;
                }
            }
            return Some(j);
        }
        None
    }

    /// Index of the coset of `-rep_j` (charge conjugation).
    pub fn dual_index(&self, j: usize) -> usize {
        let neg: Vec<Rat> = self.cosets[j].rep.iter().map(|&c| -c).collect();
        self.coset_index_of(&neg)
            .expect("negation permutes the cosets")
    }
}

/// The set of vectors in `L + shift` with norm at most a cutoff, sorted by
/// norm and then lexicographically by integer offset. Vectors are stored as
/// integer offsets from the shift, so `vector(i) = offsets[i] + rep`.
#[derive(Debug, Clone)]
pub struct VectorShell {
    rep: Vec<Rat>,
    offsets: Vec<Vec<i64>>,
    norms: Vec<Rat>,
}

impl VectorShell {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// The shift (coset representative) the shell was enumerated around.
    pub fn rep(&self) -> &[Rat] {
        &self.rep
    }

    pub fn offset(&self, i: usize) -> &[i64] {
        &self.offsets[i]
    }

    /// Full coordinates of the `i`-th vector: offset + shift.
    pub fn vector(&self, i: usize) -> Vec<Rat> {
        self.offsets[i]
            .iter()
            .zip(self.rep.iter())
            .map(|(&m, &r)| Rat::from_integer(m) + r)
            .collect()
    }

    pub fn norm(&self, i: usize) -> Rat {
        self.norms[i]
    }

    pub fn norms(&self) -> &[Rat] {
        &self.norms
    }
}

/// Leading principal minors via fraction-free (Bareiss) elimination.
/// Errors with the first non-positive minor, which certifies that the
/// symmetric matrix is not positive definite.
fn leading_minors(gram: &[Vec<i64>]) -> Result<Vec<i128>> {
    let n = gram.len();
    let mut a: Vec<Vec<i128>> = gram
        .iter()
        .map(|row| row.iter().map(|&e| e as i128).collect())
        .collect();
    let mut minors = Vec::with_capacity(n);
    let mut prev: i128 = 1;
    for k in 0..n {
        let piv = a[k][k];
        if piv <= 0 {
            return Err(Error::NotPositiveDefinite { order: k + 1, minor: piv });
        }
        minors.push(piv);
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                a[i][j] = (a[i][j] * piv - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = piv;
    }
    Ok(minors)
}

/// Smith normal form over the integers: returns `(U, d, V)` with
/// `U * A * V = diag(d)`, `U`, `V` unimodular and `d` the positive invariant
/// factors (each dividing the next).
fn smith_normal_form(gram: &[Vec<i64>]) -> (Vec<Vec<i128>>, Vec<i128>, Vec<Vec<i128>>) {
    let n = gram.len();
    let mut a: Vec<Vec<i128>> = gram
        .iter()
        .map(|row| row.iter().map(|&e| e as i128).collect())
        .collect();
    let mut u = identity(n);
    let mut v = identity(n);

    for t in 0..n {
        'stage: loop {
            // Locate the entry of minimal nonzero magnitude in the trailing
            // submatrix and move it to the (t, t) pivot slot.
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if a[i][j] != 0
                        && pivot.map_or(true, |(pi, pj)| a[i][j].abs() < a[pi][pj].abs())
                    {
                        pivot = Some((i, j));
                    }
                }
            }
            let (pi, pj) = pivot.expect("nonsingular Gram matrix");
            if pi != t {
                a.swap(pi, t);
                u.swap(pi, t);
            }
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(pj, t);
                }
                for row in v.iter_mut() {
                    row.swap(pj, t);
                }
            }
            if a[t][t] < 0 {
                for j in 0..n {
                    a[t][j] = -a[t][j];
                    u[t][j] = -u[t][j];
                }
            }
            let p = a[t][t];
            let mut clean = true;
            for i in (t + 1)..n {
                let q = a[i][t].div_euclid(p);
                if q != 0 {
                    for j in 0..n {
                        a[i][j] -= q * a[t][j];
                        u[i][j] -= q * u[t][j];
                    }
                }
                if a[i][t] != 0 {
                    clean = false;
                }
            }
            for j in (t + 1)..n {
                let q = a[t][j].div_euclid(p);
                if q != 0 {
                    for row in a.iter_mut() {
                        row[j] -= q * row[t];
                    }
                    for row in v.iter_mut() {
                        row[j] -= q * row[t];
                    }
                }
                if a[t][j] != 0 {
                    clean = false;
                }
            }
            if !clean {
                continue 'stage;
            }
            // Divisibility fix-up: the pivot must divide every remaining
            // entry; if not, fold the offending row in and restart.
            for i in (t + 1)..n {
                for j in (t + 1)..n {
                    if a[i][j] % p != 0 {
                        for col in 0..n {
                            a[t][col] += a[i][col];
                            u[t][col] += u[i][col];
                        }
                        continue 'stage;
                    }
                }
            }
            break;
        }
    }
    let d: Vec<i128> = (0..n).map(|i| a[i][i]).collect();
    debug_assert!(d.iter().all(|&x| x > 0));
    (u, d, v)
}

fn identity(n: usize) -> Vec<Vec<i128>> {
    let mut m = vec![vec![0i128; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1;
    }
    m
}

/// Gram matrix of the even unimodular rank-8 root lattice, shared by tests
/// across modules.
#[cfg(test)]
pub(crate) fn e8_gram() -> Vec<Vec<i64>> {
    vec![
        vec![2, 0, -1, 0, 0, 0, 0, 0],
        vec![0, 2, 0, -1, 0, 0, 0, 0],
        vec![-1, 0, 2, -1, 0, 0, 0, 0],
        vec![0, -1, -1, 2, -1, 0, 0, 0],
        vec![0, 0, 0, -1, 2, -1, 0, 0],
        vec![0, 0, 0, 0, -1, 2, -1, 0],
        vec![0, 0, 0, 0, 0, -1, 2, -1],
        vec![0, 0, 0, 0, 0, 0, -1, 2],
    ]
}
