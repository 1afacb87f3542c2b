//! Decomposition of lattice modules along an orthogonal pair of
//! sublattices. Given a full-rank embedding of `L1 (+) L2` into `L`, every
//! module of `L` splits into finitely many product modules of the parts;
//! the 0/1 matrices recording which pairs occur intertwine the modular data
//! of the three lattices and reproduce the characters of `L` as bilinear
//! combinations of part characters.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{DiscriminantData, IntegralLattice, Rat};
use crate::linalg;
use crate::modular::ModularDatum;

/// Orthogonal pair of sublattices spanning a finite-index sublattice of a
/// common overlattice, with the discriminant data of all three.
#[derive(Debug)]
pub struct SublatticePair {
    full: IntegralLattice,
    parts: [IntegralLattice; 2],
    embeddings: [Vec<Vec<i64>>; 2],
    glue_index: i64,
    transversal: Vec<Vec<Rat>>,
    disc_full: DiscriminantData,
    disc_parts: [DiscriminantData; 2],
}

impl SublatticePair {
    /// Validates and assembles a pair. Each embedding row is the image of a
    /// part basis vector in the coordinates of the full lattice. The rows
    /// must reproduce the part Gram matrices, the two parts must be
    /// mutually orthogonal, and the stacked rows must span a finite-index
    /// sublattice (ranks add up to the full rank).
    pub fn new(
        full: IntegralLattice,
        part1: IntegralLattice,
        embedding1: Vec<Vec<i64>>,
        part2: IntegralLattice,
        embedding2: Vec<Vec<i64>>,
    ) -> Result<Self> {
        let g = full.rank();
        let parts = [part1, part2];
        let embeddings = [embedding1, embedding2];
        if parts[0].rank() + parts[1].rank() != g {
            return Err(Error::InvalidInput(format!(
                "part ranks {} + {} do not add up to the full rank {}",
                parts[0].rank(),
                parts[1].rank(),
                g
            )));
        }
        for p in 0..2 {
            let e = &embeddings[p];
            if e.len() != parts[p].rank() || e.iter().any(|row| row.len() != g) {
                return Err(Error::InvalidInput(format!(
                    "embedding {} must be a {} x {} integer matrix",
                    p + 1,
                    parts[p].rank(),
                    g
                )));
            }
            if e.iter().flatten().any(|&v| v.unsigned_abs() > MAX_EMBEDDING_ENTRY) {
                return Err(Error::InvalidInput(format!(
                    "embedding {} entries exceed the supported magnitude {}",
                    p + 1,
                    MAX_EMBEDDING_ENTRY
                )));
            }
        }
        // Gram consistency: images must have the inner products the part
        // claims, and the two images must be orthogonal to each other.
        for p in 0..2 {
            for (i, row_i) in embeddings[p].iter().enumerate() {
                for (j, row_j) in embeddings[p].iter().enumerate() {
                    if pair_inner(&full, row_i, row_j) != parts[p].gram()[i][j] as i128 {
                        return Err(Error::InvalidInput(format!(
                            "embedding {} does not reproduce the part Gram entry ({i}, {j})",
                            p + 1
                        )));
                    }
                }
            }
        }
        for row_i in &embeddings[0] {
            for row_j in &embeddings[1] {
                if pair_inner(&full, row_i, row_j) != 0 {
                    return Err(Error::InvalidInput(
                        "part embeddings are not orthogonal".into(),
                    ));
                }
            }
        }

        let mut stacked: Vec<Vec<i64>> = Vec::with_capacity(g);
        stacked.extend(embeddings[0].iter().cloned());
        stacked.extend(embeddings[1].iter().cloned());
        let hnf = hermite_normal_form(&stacked)?;
        let glue_index = (0..g)
            .try_fold(1i64, |acc, i| acc.checked_mul(hnf[i][i]))
            .filter(|&v| 0 < v && v <= MAX_GLUE_INDEX)
            .ok_or_else(|| {
                Error::InvalidInput(
                    "part embeddings do not span a sublattice of supported finite index".into(),
                )
            })?;
        let transversal = hnf_transversal(&hnf);

        let disc_full = full.discriminant_group();
        let disc_parts = [
            parts[0].discriminant_group(),
            parts[1].discriminant_group(),
        ];
        Ok(SublatticePair {
            full,
            parts,
            embeddings,
            glue_index,
            transversal,
            disc_full,
            disc_parts,
        })
    }

    pub fn full(&self) -> &IntegralLattice {
        &self.full
    }

    pub fn part(&self, p: usize) -> &IntegralLattice {
        &self.parts[p]
    }

    pub fn disc_full(&self) -> &DiscriminantData {
        &self.disc_full
    }

    pub fn disc_part(&self, p: usize) -> &DiscriminantData {
        &self.disc_parts[p]
    }

    /// Index of `L1 (+) L2` inside the full lattice.
    pub fn glue_index(&self) -> i64 {
        self.glue_index
    }

    /// Coset representatives of the full lattice modulo the embedded sum.
    pub fn transversal(&self) -> &[Vec<Rat>] {
        &self.transversal
    }

    /// Orthogonal projection of a vector (full-lattice coordinates) onto
    /// part `p`, expressed in that part's basis coordinates.
    fn project(&self, p: usize, v: &[Rat]) -> Result<Vec<Rat>> {
        let gram = self.full.gram();
        let g = self.full.rank();
        let e = &self.embeddings[p];
        // Inner products of v with the embedded part basis.
        let mut w = vec![Rat::zero(); e.len()];
        for (i, row) in e.iter().enumerate() {
            for a in 0..g {
                for b in 0..g {
                    w[i] += Rat::from_integer(row[a] * gram[a][b]) * v[b];
                }
            }
        }
        solve_rational(self.parts[p].gram(), &w)
    }

    /// Decomposes module `k` of the full lattice: entry `(i, j)` counts the
    /// transversal classes whose shifted projections land in part-1 coset
    /// `i` and part-2 coset `j` (0 or 1 for a valid pair).
    pub fn decompose(&self, k: usize) -> Result<BranchingMatrix> {
        if k >= self.disc_full.cosets().len() {
            return Err(Error::InvalidInput(format!(
                "module index {k} out of range for {} modules",
                self.disc_full.cosets().len()
            )));
        }
        let rep = self.disc_full.coset(k).rep().to_vec();
        let d1 = self.disc_parts[0].cosets().len();
        let d2 = self.disc_parts[1].cosets().len();
        let mut entries = vec![vec![0u32; d2]; d1];
        for t in &self.transversal {
            let v: Vec<Rat> = rep.iter().zip(t).map(|(&r, &s)| r + s).collect();
            let mut idx = [0usize; 2];
            for p in 0..2 {
                let c = self.project(p, &v)?;
                idx[p] = self.disc_parts[p]
                    .coset_index_of(&c)
                    .ok_or(Error::ProjectionNotInDual { part: p + 1 })?;
            }
            entries[idx[0]][idx[1]] += 1;
        }
        Ok(BranchingMatrix { module: k, entries })
    }

    /// All branching matrices, indexed by the full lattice's modules.
    pub fn all_branching_matrices(&self) -> Result<Vec<BranchingMatrix>> {
        (0..self.disc_full.cosets().len())
            .map(|k| self.decompose(k))
            .collect()
    }

    /// Checks that the branching matrices intertwine the modular data:
    /// `S1 R_k S2^T = sum_h S_kh R_h` for every module `k` of the full
    /// lattice. Returns the Frobenius-norm residual per module.
    pub fn intertwining_residuals(
        &self,
        s_full: &ModularDatum,
        s_part1: &ModularDatum,
        s_part2: &ModularDatum,
    ) -> Result<Vec<f64>> {
        let matrices = self.all_branching_matrices()?;
        let d = matrices.len();
        let complex: Vec<linalg::CMat> = matrices.iter().map(BranchingMatrix::to_complex).collect();
        let s2t = linalg::cmat_transpose(s_part2.s());
        let mut residuals = Vec::with_capacity(d);
        for k in 0..d {
            let lhs = linalg::cmat_mul(&linalg::cmat_mul(s_part1.s(), &complex[k]), &s2t);
            let mut rhs = linalg::cmat_zero(complex[k].len(), complex[k][0].len());
            for (h, rk) in complex.iter().enumerate() {
                let w = s_full.s_entry(k, h);
                for (r_out, r_in) in rhs.iter_mut().zip(rk) {
                    for (o, &i) in r_out.iter_mut().zip(r_in) {
                        *o += w * i;
                    }
                }
            }
            residuals.push(linalg::frobenius_norm(&linalg::cmat_sub(&lhs, &rhs)));
        }
        Ok(residuals)
    }

    /// Reports, for every module of each part, one full-lattice module in
    /// whose decomposition it occurs (or `None` when it never does).
    pub fn module_coverage(&self) -> Result<CoverageReport> {
        let matrices = self.all_branching_matrices()?;
        let d1 = self.disc_parts[0].cosets().len();
        let d2 = self.disc_parts[1].cosets().len();
        let mut part1: Vec<Option<CoverageWitness>> = vec![None; d1];
        let mut part2: Vec<Option<CoverageWitness>> = vec![None; d2];
        for m in &matrices {
            for i in 0..d1 {
                for j in 0..d2 {
                    if m.entries[i][j] > 0 {
                        part1[i].get_or_insert(CoverageWitness { module: m.module, partner: j });
                        part2[j].get_or_insert(CoverageWitness { module: m.module, partner: i });
                    }
                }
            }
        }
        Ok(CoverageReport { part1, part2 })
    }
}

/// One occurrence certifying that a part module shows up in a
/// decomposition: the full-lattice module and the other part's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageWitness {
    pub module: usize,
    pub partner: usize,
}

/// Coverage witnesses per part module.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub part1: Vec<Option<CoverageWitness>>,
    pub part2: Vec<Option<CoverageWitness>>,
}

impl CoverageReport {
    pub fn complete(&self) -> bool {
        self.part1.iter().all(Option::is_some) && self.part2.iter().all(Option::is_some)
    }
}

/// Which product modules of the parts occur in full-lattice module `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingMatrix {
    module: usize,
    entries: Vec<Vec<u32>>,
}

impl BranchingMatrix {
    pub fn module(&self) -> usize {
        self.module
    }

    pub fn entry(&self, i: usize, j: usize) -> u32 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.entries
    }

    /// Total number of product modules counted with multiplicity; equals
    /// the glue index for a consistent pair.
    pub fn total(&self) -> u64 {
        self.entries.iter().flatten().map(|&e| e as u64).sum()
    }

    pub fn to_complex(&self) -> linalg::CMat {
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&e| Complex64::new(e as f64, 0.0))
                    .collect()
            })
            .collect()
    }
}

/// Bound on embedding entries, matching the Gram entry bound of
/// `IntegralLattice`; keeps every exact inner product inside `i128`.
pub const MAX_EMBEDDING_ENTRY: u64 = 1 << 20;
/// Bound on the index of the embedded sum, which also bounds the size of
/// the materialized transversal.
pub const MAX_GLUE_INDEX: i64 = 1 << 20;

fn pair_inner(full: &IntegralLattice, x: &[i64], y: &[i64]) -> i128 {
    let gram = full.gram();
    let g = full.rank();
    let mut acc = 0i128;
    for a in 0..g {
        for b in 0..g {
            acc += x[a] as i128 * gram[a][b] as i128 * y[b] as i128;
        }
    }
    acc
}

/// Row-style Hermite normal form: returns an upper-triangular matrix with
/// nonnegative diagonal whose rows span the same sublattice as the input
/// rows. A zero diagonal entry means the rows do not have full rank.
/// Intermediate overflow (possible only for adversarially large inputs) is
/// reported as `InvalidInput` rather than wrapping.
fn hermite_normal_form(rows: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let overflow =
        || Error::InvalidInput("embedding matrix is too large to reduce exactly".into());
    let reduce_row = |row: &mut Vec<i128>, pivot: &[i128], q: i128| -> Result<()> {
        for (e, &p) in row.iter_mut().zip(pivot) {
            *e = q
                .checked_mul(p)
                .and_then(|sub| e.checked_sub(sub))
                .ok_or_else(overflow)?;
        }
        Ok(())
    };
    let n = rows.len();
    let mut h: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&e| e as i128).collect())
        .collect();
    for c in 0..n {
        loop {
            // Pick the row at or below the pivot with the smallest nonzero
            // entry in this column and reduce the others by it.
            let mut pivot: Option<usize> = None;
            for r in c..n {
                if h[r][c] != 0
                    && pivot.map_or(true, |p| h[r][c].abs() < h[p][c].abs())
                {
                    pivot = Some(r);
                }
            }
            let Some(p) = pivot else { break };
            h.swap(c, p);
            let mut clean = true;
            for r in (c + 1)..n {
                if h[r][c] != 0 {
                    let q = h[r][c].div_euclid(h[c][c]);
                    let (pivot_row, lower) = h.split_at_mut(c + 1);
                    reduce_row(&mut lower[r - c - 1], &pivot_row[c], q)?;
                    clean &= h[r][c] == 0;
                }
            }
            if clean {
                break;
            }
        }
        if h[c][c] < 0 {
            for e in &mut h[c] {
                *e = -*e;
            }
        }
    }
    // Reduce entries above each pivot into [0, pivot).
    for c in 0..n {
        if h[c][c] == 0 {
            continue;
        }
        for r in 0..c {
            let q = h[r][c].div_euclid(h[c][c]);
            if q != 0 {
                let (upper, pivot_row) = h.split_at_mut(c);
                reduce_row(&mut upper[r], &pivot_row[0], q)?;
            }
        }
    }
    h.iter()
        .map(|r| {
            r.iter()
                .map(|&e| i64::try_from(e).map_err(|_| overflow()))
                .collect()
        })
        .collect()
}

/// Box transversal of the quotient by an upper-triangular row span: every
/// class has a unique representative with `0 <= x_i < h_ii`.
fn hnf_transversal(hnf: &[Vec<i64>]) -> Vec<Vec<Rat>> {
    let n = hnf.len();
    let total: i64 = (0..n).map(|i| hnf[i][i]).product();
    let mut out = Vec::with_capacity(total.max(0) as usize);
    let mut counter = vec![0i64; n];
    loop {
        out.push(counter.iter().map(|&c| Rat::from_integer(c)).collect());
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            counter[i] += 1;
            if counter[i] < hnf[i][i] {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

/// Exact Gaussian elimination for a small integer system `G c = w`. The
/// matrix is a validated Gram matrix, hence nonsingular.
fn solve_rational(gram: &[Vec<i64>], w: &[Rat]) -> Result<Vec<Rat>> {
    type Rat128 = Ratio<i128>;
    let n = w.len();
    let mut a: Vec<Vec<Rat128>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Rat128::from_integer(gram[i][j] as i128))
                .collect()
        })
        .collect();
    let mut b: Vec<Rat128> = w
        .iter()
        .map(|r| Rat128::new(*r.numer() as i128, *r.denom() as i128))
        .collect();
    for c in 0..n {
        let p = (c..n)
            .find(|&r| !a[r][c].is_zero())
            .expect("part Gram matrices are nonsingular");
        a.swap(c, p);
        b.swap(c, p);
        let inv = Rat128::one() / a[c][c];
        for r in (c + 1)..n {
            let f = a[r][c] * inv;
            if f.is_zero() {
                continue;
            }
            for s in c..n {
                let sub = f * a[c][s];
                a[r][s] -= sub;
            }
            let sub = f * b[c];
            b[r] -= sub;
        }
    }
    let mut x = vec![Rat128::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for s in (r + 1)..n {
            acc -= a[r][s] * x[s];
        }
        x[r] = acc / a[r][r];
    }
    x.iter()
        .map(|r| {
            let numer = i64::try_from(*r.numer());
            let denom = i64::try_from(*r.denom());
            match (numer, denom) {
                (Ok(n), Ok(d)) => Ok(Rat::new(n, d)),
                _ => Err(Error::InvalidInput(
                    "projection coordinates are too large to represent exactly".into(),
                )),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chars::ModuleCharacterSet;
    use crate::modular;

    fn lat(name: &str, gram: Vec<Vec<i64>>) -> IntegralLattice {
        IntegralLattice::new(name, gram).unwrap()
    }

    fn orthogonal_split() -> SublatticePair {
        SublatticePair::new(
            lat("two-i2", vec![vec![2, 0], vec![0, 2]]),
            lat("first", vec![vec![2]]),
            vec![vec![1, 0]],
            lat("second", vec![vec![2]]),
            vec![vec![0, 1]],
        )
        .unwrap()
    }

    fn glued_split() -> SublatticePair {
        SublatticePair::new(
            lat("glue", vec![vec![4, 2], vec![2, 2]]),
            lat("first", vec![vec![4]]),
            vec![vec![1, 0]],
            lat("second", vec![vec![4]]),
            vec![vec![-1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn direct_sum_has_trivial_glue_and_permutation_branching() {
        let pair = orthogonal_split();
        assert_eq!(pair.glue_index(), 1);
        assert_eq!(pair.transversal().len(), 1);
        // Full cosets in sorted order: (0,0), (0,1/2), (1/2,0), (1/2,1/2);
        // each decomposes into exactly the matching product module.
        let expect = [(0, 0), (0, 1), (1, 0), (1, 1)];
        for (k, &(i, j)) in expect.iter().enumerate() {
            let m = pair.decompose(k).unwrap();
            assert_eq!(m.total(), 1, "module {k}");
            assert_eq!(m.entry(i, j), 1, "module {k}");
        }
    }

    #[test]
    fn glued_pair_has_index_two_branching() {
        let pair = glued_split();
        assert_eq!(pair.glue_index(), 2);
        assert_eq!(pair.transversal().len(), 2);
        // Part cosets in sorted order: 0, -1/4, 1/4, 1/2.
        let expect: [&[(usize, usize)]; 4] = [
            &[(0, 0), (3, 3)],
            &[(1, 1), (2, 2)],
            &[(1, 2), (2, 1)],
            &[(0, 3), (3, 0)],
        ];
        for (k, pairs) in expect.iter().enumerate() {
            let m = pair.decompose(k).unwrap();
            assert_eq!(m.total(), 2, "module {k}");
            for &(i, j) in *pairs {
                assert_eq!(m.entry(i, j), 1, "module {k} entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn coverage_is_complete_for_both_sample_pairs() {
        for pair in [orthogonal_split(), glued_split()] {
            let report = pair.module_coverage().unwrap();
            assert!(report.complete());
            for witness in report.part1.iter().chain(&report.part2) {
                assert!(witness.is_some());
            }
        }
    }

    #[test]
    fn determinants_match_the_index_formula() {
        for pair in [orthogonal_split(), glued_split()] {
            let d = pair.full().det();
            let d1 = pair.part(0).det();
            let d2 = pair.part(1).det();
            let glue = pair.glue_index();
            assert_eq!(d1 * d2, glue * glue * d);
        }
    }

    #[test]
    fn branching_reproduces_full_characters() {
        // chi^L_k(tau) = sum_ij R^k_ij chi^1_i(tau) chi^2_j(tau).
        let pair = glued_split();
        let full = ModuleCharacterSet::new(pair.full().clone());
        let p1 = ModuleCharacterSet::new(pair.part(0).clone());
        let p2 = ModuleCharacterSet::new(pair.part(1).clone());
        for tau in [
            Complex64::new(0.0, 1.0),
            Complex64::new(0.3, 0.9),
            Complex64::new(-0.2, 1.7),
        ] {
            for k in 0..4 {
                let m = pair.decompose(k).unwrap();
                let mut acc = Complex64::zero();
                for i in 0..4 {
                    for j in 0..4 {
                        if m.entry(i, j) > 0 {
                            acc += (m.entry(i, j) as f64)
                                * p1.char_single(i, tau).unwrap()
                                * p2.char_single(j, tau).unwrap();
                        }
                    }
                }
                let lhs = full.char_single(k, tau).unwrap();
                assert!(
                    (lhs - acc).norm() < 1e-10 * lhs.norm().max(1.0),
                    "module {k} at {tau}: {lhs} vs {acc}"
                );
            }
        }
    }

    #[test]
    fn branching_matrices_intertwine_modular_data() {
        let pair = glued_split();
        let full = ModuleCharacterSet::new(pair.full().clone());
        let p1 = ModuleCharacterSet::new(pair.part(0).clone());
        let p2 = ModuleCharacterSet::new(pair.part(1).clone());
        let s_full = modular::s_matrix_numeric(&full).unwrap();
        // The rank-1 parts admit no numeric solve; their closed form is
        // checked against the group relations instead.
        let s1 = modular::s_matrix_closed_form(&p1);
        modular::validate_group_relations(&s1, &p1).unwrap();
        let s2 = modular::s_matrix_closed_form(&p2);
        let residuals = pair
            .intertwining_residuals(&s_full, &s1, &s2)
            .unwrap();
        assert_eq!(residuals.len(), 4);
        for (k, r) in residuals.iter().enumerate() {
            assert!(*r < 1e-8, "module {k}: residual {r}");
        }
    }

    #[test]
    fn inconsistent_embeddings_are_rejected() {
        // Wrong Gram: the row (1, 0) has norm 2, not 4.
        let err = SublatticePair::new(
            lat("two-i2", vec![vec![2, 0], vec![0, 2]]),
            lat("first", vec![vec![4]]),
            vec![vec![1, 0]],
            lat("second", vec![vec![2]]),
            vec![vec![0, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));

        // Not orthogonal.
        let err = SublatticePair::new(
            lat("glue", vec![vec![4, 2], vec![2, 2]]),
            lat("first", vec![vec![4]]),
            vec![vec![1, 0]],
            lat("second", vec![vec![2]]),
            vec![vec![0, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));

        // Rank mismatch.
        let err = SublatticePair::new(
            lat("two-i2", vec![vec![2, 0], vec![0, 2]]),
            lat("first", vec![vec![2]]),
            vec![vec![1, 0]],
            lat("second", vec![vec![2, 0], vec![0, 2]]),
            vec![vec![0, 1], vec![1, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn hermite_form_of_the_glued_embedding() {
        let h = hermite_normal_form(&[vec![1, 0], vec![-1, 2]]).unwrap();
        assert_eq!(h, vec![vec![1, 0], vec![0, 2]]);
        let t = hnf_transversal(&h);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], vec![Rat::zero(), Rat::zero()]);
        assert_eq!(t[1], vec![Rat::zero(), Rat::from_integer(1)]);
    }

    #[test]
    fn hermite_form_handles_dependent_rows() {
        let h = hermite_normal_form(&[vec![2, 4], vec![1, 2]]).unwrap();
        // Rows are dependent: rank 1, zero diagonal in the second slot.
        assert_eq!(h[0], vec![1, 2]);
        assert_eq!(h[1][1], 0);
    }
}
