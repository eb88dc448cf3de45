//! Dense complex linear algebra for the relay solvers.
//!
//! Everything here works on `nalgebra` matrices of [`Complex64`] in their
//! native column-major layout, which is also the column-stacking order used
//! by [`vectorize`]. Ranks are tolerance based: a singular value counts when it
//! exceeds `rel_tol * sigma_max`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("partition count mismatch: {left} blocks vs {right} blocks")]
    PartitionMismatch { left: usize, right: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("inconsistent system: rank([H | h]) = {augmented_rank} exceeds rank(H) = {rank}")]
    Inconsistent { rank: usize, augmented_rank: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("rank tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
}

/// Singular-value cutoff relative to the largest singular value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance(f64);

impl RankTolerance {
    pub const DEFAULT_REL_TOL: f64 = 1e-10;

    pub fn new(rel_tol: f64) -> Result<Self, LinalgError> {
        if rel_tol > 0.0 && rel_tol < 1.0 {
            Ok(Self(rel_tol))
        } else {
            Err(LinalgError::InvalidTolerance(rel_tol))
        }
    }

    pub fn rel_tol(self) -> f64 {
        self.0
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self(Self::DEFAULT_REL_TOL)
    }
}

/// A matrix split column-wise into `D >= 1` blocks sharing one row count.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedMatrix {
    blocks: Vec<CMatrix>,
}

impl PartitionedMatrix {
    pub fn new(blocks: Vec<CMatrix>) -> Result<Self, LinalgError> {
        let Some(first) = blocks.first() else {
            return Err(LinalgError::Shape("a partitioned matrix needs at least one block".into()));
        };
        let rows = first.nrows();
        if let Some((r, b)) = blocks.iter().enumerate().find(|(_, b)| b.nrows() != rows) {
            return Err(LinalgError::Shape(format!(
                "block {r} has {} rows, expected {rows}",
                b.nrows()
            )));
        }
        Ok(Self { blocks })
    }

    /// Splits `matrix` into consecutive blocks of `block_cols` columns.
    pub fn uniform(matrix: &CMatrix, block_cols: usize) -> Result<Self, LinalgError> {
        if block_cols == 0 || !matrix.ncols().is_multiple_of(block_cols) || matrix.ncols() == 0 {
            return Err(LinalgError::Shape(format!(
                "{} columns cannot be split into blocks of {block_cols}",
                matrix.ncols()
            )));
        }
        let blocks = (0..matrix.ncols() / block_cols)
            .map(|r| matrix.columns(r * block_cols, block_cols).into_owned())
            .collect();
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn partition_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn to_matrix(&self) -> CMatrix {
        hcat(self.rows(), &self.blocks)
    }
}

/// Draws a matrix of i.i.d. CN(0, 1) entries (variance 1/2 per real component).
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Column-wise concatenation. `rows` fixes the height when `blocks` is empty.
pub fn hcat<'a, I>(rows: usize, blocks: I) -> CMatrix
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    let blocks: Vec<&CMatrix> = blocks.into_iter().collect();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hcat: row count mismatch");
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Row-wise stacking. `cols` fixes the width when `blocks` is empty.
pub fn vcat<'a, I>(cols: usize, blocks: I) -> CMatrix
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    let blocks: Vec<&CMatrix> = blocks.into_iter().collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vcat: column count mismatch");
        out.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (p, q) = b.shape();
    let mut out = CMatrix::zeros(a.nrows() * p, a.ncols() * q);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            let mut block = out.view_mut((i * p, j * q), (p, q));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Khatri-Rao product: the partition-wise Kronecker product
/// `[A_1 ⊗ B_1, ..., A_D ⊗ B_D]`.
pub fn khatri_rao(a: &PartitionedMatrix, b: &PartitionedMatrix) -> Result<CMatrix, LinalgError> {
    if a.partition_count() != b.partition_count() {
        return Err(LinalgError::PartitionMismatch {
            left: a.partition_count(),
            right: b.partition_count(),
        });
    }
    let products: Vec<CMatrix> = a
        .blocks()
        .iter()
        .zip(b.blocks())
        .map(|(ar, br)| kron(ar, br))
        .collect();
    Ok(hcat(a.rows() * b.rows(), &products))
}

/// Stacks the columns of `a` into one vector.
pub fn vectorize(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vectorize`] for a matrix with `rows` rows.
pub fn devectorize(v: &CVector, rows: usize) -> Result<CMatrix, LinalgError> {
    if rows == 0 || !v.len().is_multiple_of(rows) {
        return Err(LinalgError::Shape(format!(
            "vector of length {} cannot be reshaped to {rows} rows",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, v.len() / rows, v.as_slice()))
}

/// Plain (non-conjugating) transpose, as used in `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn transpose(a: &CMatrix) -> CMatrix {
    a.transpose()
}

/// Singular values in descending order; empty for an empty matrix.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn rank_from_singular_values(sv: &[f64], tol: RankTolerance) -> usize {
    let Some(&max) = sv.iter().max_by(|x, y| x.total_cmp(y)) else {
        return 0;
    };
    if max <= 0.0 {
        return 0;
    }
    let cutoff = tol.rel_tol() * max;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Number of singular values above `rel_tol * sigma_max`; 0 for the zero matrix.
pub fn numeric_rank(a: &CMatrix, tol: RankTolerance) -> usize {
    rank_from_singular_values(&singular_values(a), tol)
}

/// Kruskal rank by exhaustive search over column subsets.
///
/// Cost grows combinatorially; keep the column count at a dozen or so.
pub fn kruskal_rank(a: &CMatrix, tol: RankTolerance) -> usize {
    let max_r = a.nrows().min(a.ncols());
    for r in 1..=max_r {
        let all_independent = (0..a.ncols()).combinations(r).all(|cols| {
            let sub = a.select_columns(cols.iter());
            numeric_rank(&sub, tol) == r
        });
        if !all_independent {
            return r - 1;
        }
    }
    max_r
}

/// Generalized Kruskal rank: the largest `r` such that every set of `r`
/// blocks, concatenated, has full column rank. Exhaustive over block subsets.
pub fn generalized_kruskal_rank(a: &PartitionedMatrix, tol: RankTolerance) -> usize {
    let d = a.partition_count();
    for r in 1..=d {
        let all_independent = (0..d).combinations(r).all(|idx| {
            let sub = hcat(a.rows(), idx.iter().map(|&i| &a.blocks()[i]));
            sub.ncols() <= sub.nrows() && numeric_rank(&sub, tol) == sub.ncols()
        });
        if !all_independent {
            return r - 1;
        }
    }
    d
}

/// Moore-Penrose pseudo-inverse with singular values below the relative
/// cutoff treated as zero.
pub fn pseudo_inverse(a: &CMatrix, tol: RankTolerance) -> CMatrix {
    if a.is_empty() {
        return CMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let cutoff = tol.rel_tol() * max;
    svd.pseudo_inverse(cutoff)
        .expect("SVD computed with both singular-vector sets")
}

/// Minimum-norm solution of a consistent system plus the ranks that decided
/// consistency.
#[derive(Debug, Clone)]
pub struct ConsistentSolution {
    pub x: CVector,
    pub rank: usize,
    pub augmented_rank: usize,
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Solves `H x = h`, returning the minimum-norm `x` and the rank diagnostics.
///
/// The system is declared inconsistent when `rank([H | h]) > rank(H)`.
pub fn solve_consistent_detailed(
    h_mat: &CMatrix,
    rhs: &CVector,
    tol: RankTolerance,
) -> Result<ConsistentSolution, LinalgError> {
    if rhs.len() != h_mat.nrows() {
        return Err(LinalgError::Shape(format!(
            "right-hand side has length {}, system has {} rows",
            rhs.len(),
            h_mat.nrows()
        )));
    }
    if !is_finite(h_mat) {
        return Err(LinalgError::NonFinite("system matrix"));
    }
    if !rhs.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(LinalgError::NonFinite("right-hand side"));
    }
    if h_mat.nrows() == 0 {
        return Ok(ConsistentSolution {
            x: CVector::zeros(h_mat.ncols()),
            rank: 0,
            augmented_rank: 0,
        });
    }

    let mut augmented = CMatrix::zeros(h_mat.nrows(), h_mat.ncols() + 1);
    augmented.columns_mut(0, h_mat.ncols()).copy_from(h_mat);
    augmented.column_mut(h_mat.ncols()).copy_from(rhs);
    let augmented_rank = numeric_rank(&augmented, tol);

    if h_mat.ncols() == 0 {
        return if augmented_rank == 0 {
            Ok(ConsistentSolution { x: CVector::zeros(0), rank: 0, augmented_rank })
        } else {
            Err(LinalgError::Inconsistent { rank: 0, augmented_rank })
        };
    }

    let svd = h_mat.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = rank_from_singular_values(&sv, tol);
    if augmented_rank > rank {
        return Err(LinalgError::Inconsistent { rank, augmented_rank });
    }
    let cutoff = tol.rel_tol() * svd.singular_values.max();
    let x = svd
        .solve(rhs, cutoff)
        .expect("SVD computed with both singular-vector sets");
    Ok(ConsistentSolution { x, rank, augmented_rank })
}

/// Minimum-norm solution of `H x = h`; fails with
/// [`LinalgError::Inconsistent`] when no exact solution exists.
pub fn solve_consistent(
    h_mat: &CMatrix,
    rhs: &CVector,
    tol: RankTolerance,
) -> Result<CVector, LinalgError> {
    solve_consistent_detailed(h_mat, rhs, tol).map(|s| s.x)
}

/// Frobenius norm.
pub fn fro(a: &CMatrix) -> f64 {
    a.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, &data.iter().map(|&x| c(x)).collect::<Vec<_>>())
    }

    fn tol() -> RankTolerance {
        RankTolerance::default()
    }

    #[test]
    fn kron_identity_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = complex_gaussian(2, 3, &mut rng);
        let k = kron(&CMatrix::identity(2, 2), &b);
        assert_eq!(k.shape(), (4, 6));
        assert_eq!(k.view((0, 0), (2, 3)), b.view((0, 0), (2, 3)));
        assert_eq!(k.view((2, 3), (2, 3)), b.view((0, 0), (2, 3)));
        assert!(k.view((0, 3), (2, 3)).iter().all(|z| *z == Complex64::ZERO));
        assert!(k.view((2, 0), (2, 3)).iter().all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn kron_scalar_and_small_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = complex_gaussian(3, 2, &mut rng);
        let s = Complex64::new(0.5, -2.0);
        assert_eq!(kron(&CMatrix::from_element(1, 1, s), &b), &b * s);

        let a = real(1, 2, &[1.0, 2.0]);
        let b = real(2, 1, &[3.0, 4.0]);
        assert_eq!(kron(&a, &b), real(2, 2, &[3.0, 6.0, 4.0, 8.0]));
    }

    #[test]
    fn kron_matches_nalgebra_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = complex_gaussian(3, 2, &mut rng);
        let b = complex_gaussian(2, 4, &mut rng);
        assert!((kron(&a, &b) - a.kronecker(&b)).norm() < 1e-14);
    }

    #[test]
    fn khatri_rao_shapes_and_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = PartitionedMatrix::new(vec![
            complex_gaussian(3, 1, &mut rng),
            complex_gaussian(3, 2, &mut rng),
        ])
        .unwrap();
        let b = PartitionedMatrix::new(vec![
            complex_gaussian(2, 2, &mut rng),
            complex_gaussian(2, 3, &mut rng),
        ])
        .unwrap();
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.shape(), (6, 2 + 2 * 3));
        let first = kron(&a.blocks()[0], &b.blocks()[0]);
        let second = kron(&a.blocks()[1], &b.blocks()[1]);
        assert!((kr.columns(0, 2) - first).norm() < 1e-15);
        assert!((kr.columns(2, 6) - second).norm() < 1e-15);
    }

    #[test]
    fn khatri_rao_single_columns_is_columnwise_kron() {
        let a = real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = real(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let pa = PartitionedMatrix::uniform(&a, 1).unwrap();
        let pb = PartitionedMatrix::uniform(&b, 1).unwrap();
        let kr = khatri_rao(&pa, &pb).unwrap();
        // column 0: (1,3) ⊗ (5,7); column 1: (2,4) ⊗ (6,8)
        let expected = real(4, 2, &[5.0, 12.0, 7.0, 16.0, 15.0, 24.0, 21.0, 32.0]);
        assert_eq!(kr, expected);
    }

    #[test]
    fn khatri_rao_partition_mismatch() {
        let a = PartitionedMatrix::uniform(&CMatrix::identity(2, 2), 1).unwrap();
        let b = PartitionedMatrix::uniform(&CMatrix::identity(2, 2), 2).unwrap();
        assert_eq!(
            khatri_rao(&a, &b),
            Err(LinalgError::PartitionMismatch { left: 2, right: 1 })
        );
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let a = real(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        let v = vectorize(&a);
        assert_eq!(v.iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(devectorize(&v, 2).unwrap(), a);
    }

    #[test]
    fn devectorize_rejects_bad_length() {
        let v = CVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]);
        assert!(matches!(devectorize(&v, 2), Err(LinalgError::Shape(_))));
        assert!(matches!(devectorize(&v, 0), Err(LinalgError::Shape(_))));
    }

    #[test]
    fn numeric_rank_basics() {
        assert_eq!(numeric_rank(&CMatrix::identity(4, 4), tol()), 4);
        assert_eq!(numeric_rank(&CMatrix::zeros(3, 3), tol()), 0);
        assert_eq!(numeric_rank(&CMatrix::zeros(0, 3), tol()), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            assert_eq!(numeric_rank(&complex_gaussian(4, 6, &mut rng), tol()), 4);
        }
    }

    #[test]
    fn kruskal_rank_examples() {
        assert_eq!(kruskal_rank(&CMatrix::identity(3, 3), tol()), 3);
        let a = real(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(kruskal_rank(&a, tol()), 2);
        let z = real(3, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 1.0, 0.0, 5.0]);
        assert_eq!(kruskal_rank(&z, tol()), 0);
        // repeated column caps the Kruskal rank at 1 while the rank stays 2
        let rep = real(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0, 3.0, 0.0]);
        assert_eq!(numeric_rank(&rep, tol()), 2);
        assert_eq!(kruskal_rank(&rep, tol()), 1);
    }

    #[test]
    fn generalized_kruskal_rank_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b0 = complex_gaussian(6, 2, &mut rng);
        let b1 = complex_gaussian(6, 2, &mut rng);
        let dup = PartitionedMatrix::new(vec![b0.clone(), b1, b0.clone()]).unwrap();
        assert!(generalized_kruskal_rank(&dup, tol()) <= 1);

        let mut zero_col = complex_gaussian(6, 2, &mut rng);
        zero_col.column_mut(1).fill(Complex64::ZERO);
        let z = PartitionedMatrix::new(vec![b0, zero_col]).unwrap();
        assert_eq!(generalized_kruskal_rank(&z, tol()), 0);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let i3 = CMatrix::identity(3, 3);
        assert!((pseudo_inverse(&i3, tol()) - &i3).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let wide = complex_gaussian(2, 4, &mut rng);
        let right = &wide * pseudo_inverse(&wide, tol());
        assert!((right - CMatrix::identity(2, 2)).norm() < 1e-10);

        let tall = complex_gaussian(4, 2, &mut rng);
        let left = pseudo_inverse(&tall, tol()) * &tall;
        assert!((left - CMatrix::identity(2, 2)).norm() < 1e-10);

        let empty = CMatrix::zeros(0, 3);
        assert_eq!(pseudo_inverse(&empty, tol()).shape(), (3, 0));
    }

    #[test]
    fn solve_consistent_examples() {
        let h = CVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]);
        let x = solve_consistent(&CMatrix::identity(3, 3), &h, tol()).unwrap();
        assert!((x - &h).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = complex_gaussian(2, 4, &mut rng);
        let b = complex_gaussian(2, 1, &mut rng).column(0).into_owned();
        let x = solve_consistent(&a, &b, tol()).unwrap();
        assert!((&a * x - &b).norm() <= 1e-10 * b.norm());

        let bad = real(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let rhs = CVector::from_vec(vec![c(1.0), c(2.0)]);
        assert_eq!(
            solve_consistent(&bad, &rhs, tol()),
            Err(LinalgError::Inconsistent { rank: 1, augmented_rank: 2 })
        );
    }

    #[test]
    fn solve_consistent_edge_cases() {
        let x = solve_consistent(&CMatrix::zeros(0, 4), &CVector::zeros(0), tol()).unwrap();
        assert_eq!(x, CVector::zeros(4));
        let short = CVector::zeros(1);
        assert!(matches!(
            solve_consistent(&CMatrix::identity(2, 2), &short, tol()),
            Err(LinalgError::Shape(_))
        ));
        let mut nan = CMatrix::identity(2, 2);
        nan[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(
            solve_consistent(&nan, &CVector::zeros(2), tol()),
            Err(LinalgError::NonFinite("system matrix"))
        );
    }

    #[test]
    fn tolerance_bounds() {
        assert!(RankTolerance::new(0.0).is_err());
        assert!(RankTolerance::new(1.0).is_err());
        assert_eq!(RankTolerance::new(1e-8).unwrap().rel_tol(), 1e-8);
        assert_eq!(RankTolerance::default().rel_tol(), 1e-10);
    }

    #[test]
    fn partitioned_matrix_validation() {
        assert!(PartitionedMatrix::new(vec![]).is_err());
        assert!(PartitionedMatrix::new(vec![CMatrix::zeros(2, 1), CMatrix::zeros(3, 1)]).is_err());
        assert!(PartitionedMatrix::uniform(&CMatrix::zeros(2, 5), 2).is_err());
        let p = PartitionedMatrix::uniform(&CMatrix::identity(2, 4), 2).unwrap();
        assert_eq!(p.partition_count(), 2);
        assert_eq!(p.to_matrix(), CMatrix::identity(2, 4));
    }
}
