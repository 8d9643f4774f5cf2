//! Exact integer linear algebra for design matrices.
//!
//! A design matrix is an integer matrix whose column sums are all equal.
//! This module validates design matrices and computes the exact lattice
//! objects the rest of the crate consumes: a basis of the integer kernel
//! `Z^n ∩ ker A`, a saturated (Markov) generating set of the same lattice
//! for network construction, and a maximal linearly independent set of
//! columns.
//!
//! All intermediate arithmetic runs on `BigInt` or machine integers; Hermite
//! normal form entries can grow far beyond the input magnitude even for
//! small matrices.

mod markov;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column sums differ: column 1 sums to {expected}, but {}", format_column_sums(.offending))]
    UnequalColumnSums {
        expected: i64,
        /// 1-based column indices with their sums.
        offending: Vec<(usize, i64)>,
    },
    #[error("column sums are all zero; the shared column sum must be nonzero")]
    ZeroColumnSum,
    #[error("integer overflow converting an exact result back to i64")]
    Overflow,
    #[error("kernel relation completion exceeded its internal work bound")]
    CompletionOverflow,
}

fn format_column_sums(offending: &[(usize, i64)]) -> String {
    offending
        .iter()
        .map(|(c, s)| format!("column {c} sums to {s}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Dense integer matrix with arbitrary-precision entries, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&x| BigInt::from(x)));
        }
        IntMat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IntMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a * other.at(k, j);
                    let cur = out.at(i, j) + add;
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn to_i64_rows(&self) -> Result<Vec<Vec<i64>>, MatrixError> {
        self.data
            .chunks(self.cols.max(1))
            .take(self.rows)
            .map(|row| {
                row.iter()
                    .map(|v| i64::try_from(v).map_err(|_| MatrixError::Overflow))
                    .collect()
            })
            .collect()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m.at(k, k).is_zero() {
                let swap = (k + 1..n).find(|&r| !m.at(r, k).is_zero());
                match swap {
                    Some(r) => {
                        for j in 0..n {
                            let a = m.at(k, j).clone();
                            let b = m.at(r, j).clone();
                            m.set(k, j, b);
                            m.set(r, j, a);
                        }
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (m.at(i, j) * m.at(k, k) - m.at(i, k) * m.at(k, j)) / &prev;
                    m.set(i, j, v);
                }
                m.set(i, k, BigInt::zero());
            }
            prev = m.at(k, k).clone();
        }
        sign * m.at(n - 1, n - 1).clone()
    }

    #[cfg(test)]
    fn row_is_zero(&self, i: usize) -> bool {
        self.row(i).iter().all(|v| v.is_zero())
    }

    /// Applies the unimodular row operation
    /// `(row_i, row_j) <- (x·row_i + y·row_j, -b/d·row_i + a/d·row_j)`
    /// where `d = gcd(a, b) = x·a + y·b`. The 2x2 block has determinant 1.
    fn gcd_row_op(&mut self, i: usize, j: usize, x: &BigInt, y: &BigInt, bd: &BigInt, ad: &BigInt) {
        for col in 0..self.cols {
            let vi = self.at(i, col).clone();
            let vj = self.at(j, col).clone();
            self.set(i, col, x * &vi + y * &vj);
            self.set(j, col, ad * vj - bd * vi);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for col in 0..self.cols {
            let v = -self.at(i, col).clone();
            self.set(i, col, v);
        }
    }

    fn add_multiple_of_row(&mut self, target: usize, source: usize, factor: &BigInt) {
        for col in 0..self.cols {
            let v = self.at(target, col) + factor * self.at(source, col);
            self.set(target, col, v);
        }
    }
}

/// Result of a row Hermite normal form computation: `u * input = h` with
/// `u` unimodular.
#[derive(Debug, Clone)]
pub struct Hnf {
    pub h: IntMat,
    pub u: IntMat,
    /// Column index of the pivot in each nonzero row of `h`, in row order.
    pub pivots: Vec<usize>,
}

impl Hnf {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

/// Row Hermite normal form with unimodular transform.
///
/// `h` has its nonzero rows on top with strictly increasing pivot columns,
/// every pivot positive, entries above a pivot reduced into `[0, pivot)`,
/// and `u · m = h` with `|det u| = 1`.
pub fn hermite_normal_form(m: &IntMat) -> Hnf {
    let mut h = m.clone();
    let mut u = IntMat::identity(m.rows());
    let mut pivots = Vec::new();

    let mut pr = 0;
    for pc in 0..h.cols() {
        if pr == h.rows() {
            break;
        }
        if (pr..h.rows()).all(|r| h.at(r, pc).is_zero()) {
            continue;
        }
        for r in pr + 1..h.rows() {
            if h.at(r, pc).is_zero() {
                continue;
            }
            let a = h.at(pr, pc).clone();
            let b = h.at(r, pc).clone();
            let eg = a.extended_gcd(&b);
            let ad = &a / &eg.gcd;
            let bd = &b / &eg.gcd;
            h.gcd_row_op(pr, r, &eg.x, &eg.y, &bd, &ad);
            u.gcd_row_op(pr, r, &eg.x, &eg.y, &bd, &ad);
        }
        if h.at(pr, pc).is_negative() {
            h.negate_row(pr);
            u.negate_row(pr);
        }
        pivots.push(pc);
        pr += 1;
    }

    // Reduce entries above each pivot into [0, pivot).
    for (row, &pc) in pivots.iter().enumerate() {
        for above in 0..row {
            let q = h.at(above, pc).div_floor(h.at(row, pc));
            if !q.is_zero() {
                let f = -q;
                h.add_multiple_of_row(above, row, &f);
                u.add_multiple_of_row(above, row, &f);
            }
        }
    }

    Hnf { h, u, pivots }
}

/// Exact rank of an integer matrix.
pub fn integer_rank(m: &IntMat) -> usize {
    hermite_normal_form(m).rank()
}

/// Validated integer matrix with equal column sums.
///
/// All-zero rows are dropped on construction (their original indices are
/// kept in `dropped_rows`); a zero row adds nothing to any column sum and
/// would make the corresponding theta species unproducible downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignMatrix {
    m: usize,
    n: usize,
    entries: Vec<i64>,
    column_sum: i64,
    dropped_rows: Vec<usize>,
}

impl DesignMatrix {
    pub fn new(raw: Vec<Vec<i64>>) -> Result<Self, MatrixError> {
        if raw.is_empty() || raw[0].is_empty() {
            return Err(MatrixError::EmptyMatrix);
        }
        let n = raw[0].len();
        for (i, row) in raw.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::RaggedRows {
                    row: i + 1,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let sums: Vec<i64> = (0..n).map(|j| raw.iter().map(|r| r[j]).sum()).collect();
        let c = sums[0];
        let offending: Vec<(usize, i64)> = sums
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != c)
            .map(|(j, &s)| (j + 1, s))
            .collect();
        if !offending.is_empty() {
            return Err(MatrixError::UnequalColumnSums { expected: c, offending });
        }
        if c == 0 {
            return Err(MatrixError::ZeroColumnSum);
        }
        let mut entries = Vec::new();
        let mut dropped_rows = Vec::new();
        for (i, row) in raw.iter().enumerate() {
            if row.iter().all(|&x| x == 0) {
                dropped_rows.push(i);
            } else {
                entries.extend_from_slice(row);
            }
        }
        let m = raw.len() - dropped_rows.len();
        debug_assert!(m >= 1, "c != 0 guarantees a nonzero row");
        Ok(DesignMatrix {
            m,
            n,
            entries,
            column_sum: c,
            dropped_rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn column_sum(&self) -> i64 {
        self.column_sum
    }

    pub fn dropped_rows(&self) -> &[usize] {
        &self.dropped_rows
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.m).map(|i| self.entry(i, j)).collect()
    }

    pub fn has_negative_entries(&self) -> bool {
        self.entries.iter().any(|&x| x < 0)
    }

    pub fn to_int_mat(&self) -> IntMat {
        IntMat::from_i64_rows(&(0..self.m).map(|i| self.row(i).to_vec()).collect::<Vec<_>>())
    }

    /// `A · x` in floating point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        (0..self.m)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &v)| a as f64 * v).sum())
            .collect()
    }

    /// `A · v` exactly, for integer vectors.
    pub fn apply_int(&self, v: &[i64]) -> Vec<i128> {
        assert_eq!(v.len(), self.n, "dimension mismatch");
        (0..self.m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a as i128 * b as i128)
                    .sum()
            })
            .collect()
    }

    pub fn rank(&self) -> usize {
        integer_rank(&self.to_int_mat())
    }

    /// Basis of the integer kernel lattice `Z^n ∩ ker A`, in Hermite normal
    /// form (pivots positive, so each vector's first nonzero entry is
    /// positive). The output is deterministic.
    pub fn kernel_basis(&self) -> Result<KernelBasis, MatrixError> {
        let at = self.to_int_mat().transpose();
        let hnf = hermite_normal_form(&at);
        let r = hnf.rank();
        let k = self.n - r;
        if k == 0 {
            return Ok(KernelBasis {
                n: self.n,
                vectors: Vec::new(),
                pivots: Vec::new(),
            });
        }
        // Rows of U below the rank span ker A over Z: u·Aᵀ = 0 row-wise, and
        // unimodularity of U makes them a lattice basis, not just a spanning set.
        let kernel_rows: Vec<Vec<BigInt>> = (r..self.n).map(|i| hnf.u.row(i).to_vec()).collect();
        let km = IntMat {
            rows: k,
            cols: self.n,
            data: kernel_rows.into_iter().flatten().collect(),
        };
        let canon = hermite_normal_form(&km);
        debug_assert_eq!(canon.rank(), k);
        let vectors = canon.h.to_i64_rows()?;
        Ok(KernelBasis {
            n: self.n,
            vectors,
            pivots: canon.pivots,
        })
    }

    /// Markov basis of the kernel lattice: kernel vectors whose binomial
    /// relations `x^{v⁺} = x^{v⁻}` carry the *full* relation ideal of the
    /// matrix, not just a spanning sub-ideal. This is the generating set the
    /// network constructors want: networks built from a bare lattice basis
    /// can have critical siphons, networks built from a Markov basis cannot.
    ///
    /// Spans the same lattice as [`DesignMatrix::kernel_basis`], possibly
    /// with more vectors. Deterministic; each vector's first nonzero entry
    /// is positive and its positive/negative supports are disjoint.
    pub fn markov_basis(&self) -> Result<Vec<Vec<i64>>, MatrixError> {
        markov::markov_basis(self)
    }

    /// Greedy leftmost maximal independent column set: scan columns left to
    /// right and keep a column iff it is independent of those already kept.
    pub fn independent_columns(&self) -> ColumnSet {
        let mut kept: Vec<usize> = Vec::new();
        for j in 0..self.n {
            let mut cols: Vec<Vec<i64>> = kept.iter().map(|&c| self.column(c)).collect();
            cols.push(self.column(j));
            // Candidate columns as rows; row rank equals column rank.
            let mat = IntMat::from_i64_rows(&cols);
            if integer_rank(&mat) == cols.len() {
                kept.push(j);
            }
        }
        ColumnSet { indices: kept }
    }
}

/// Lattice basis of `Z^n ∩ ker A`, HNF-reduced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBasis {
    n: usize,
    vectors: Vec<Vec<i64>>,
    pivots: Vec<usize>,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[Vec<i64>] {
        &self.vectors
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Membership test: `v` lies in the lattice generated by the basis.
    ///
    /// Back-substitution over the HNF pivots; every elimination step must
    /// divide exactly.
    pub fn contains(&self, v: &[i64]) -> bool {
        if v.len() != self.n {
            return false;
        }
        let mut rem: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
        for (row, &pc) in self.vectors.iter().zip(&self.pivots) {
            let pivot = BigInt::from(row[pc]);
            let (q, r) = rem[pc].div_rem(&pivot);
            if !r.is_zero() {
                return false;
            }
            if !q.is_zero() {
                for (dst, &src) in rem.iter_mut().zip(row) {
                    *dst -= &q * BigInt::from(src);
                }
            }
        }
        rem.iter().all(|x| x.is_zero())
    }

    /// True iff `other` generates the same lattice.
    pub fn same_lattice(&self, other: &[Vec<i64>]) -> bool {
        other.iter().all(|v| self.contains(v)) && {
            match basis_from_vectors(self.n, other) {
                Some(b) => self.vectors.iter().all(|v| b.contains(v)),
                None => false,
            }
        }
    }
}

/// Builds an HNF-reduced basis for the lattice generated by arbitrary
/// integer vectors. Returns `None` on i64 overflow in the reduced form.
pub fn basis_from_vectors(n: usize, vectors: &[Vec<i64>]) -> Option<KernelBasis> {
    if vectors.is_empty() {
        return Some(KernelBasis {
            n,
            vectors: Vec::new(),
            pivots: Vec::new(),
        });
    }
    let mat = IntMat::from_i64_rows(vectors);
    let hnf = hermite_normal_form(&mat);
    let r = hnf.rank();
    let rows = hnf.h.to_i64_rows().ok()?;
    Some(KernelBasis {
        n,
        vectors: rows.into_iter().take(r).collect(),
        pivots: hnf.pivots,
    })
}

/// Maximal linearly independent column subset, 0-based ascending indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSet {
    indices: Vec<usize>,
}

impl ColumnSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_matrix() -> DesignMatrix {
        DesignMatrix::new(vec![vec![2, 1, 0], vec![0, 1, 2]]).unwrap()
    }

    #[test]
    fn validates_paper_matrix() {
        let a = paper_matrix();
        assert_eq!(a.rows(), 2);
        assert_eq!(a.cols(), 3);
        assert_eq!(a.column_sum(), 2);
    }

    #[test]
    fn validates_identity() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(a.column_sum(), 1);
    }

    #[test]
    fn rejects_unequal_column_sums() {
        let err = DesignMatrix::new(vec![vec![1, 2], vec![0, 0]]).unwrap_err();
        match err {
            MatrixError::UnequalColumnSums { expected, offending } => {
                assert_eq!(expected, 1);
                assert_eq!(offending, vec![(2, 2)]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_and_zero_sum() {
        assert_eq!(DesignMatrix::new(vec![]).unwrap_err(), MatrixError::EmptyMatrix);
        assert_eq!(
            DesignMatrix::new(vec![vec![]]).unwrap_err(),
            MatrixError::EmptyMatrix
        );
        assert_eq!(
            DesignMatrix::new(vec![vec![0, 0], vec![0, 0]]).unwrap_err(),
            MatrixError::ZeroColumnSum
        );
        assert_eq!(
            DesignMatrix::new(vec![vec![1, -1], vec![-1, 1]]).unwrap_err(),
            MatrixError::ZeroColumnSum
        );
    }

    #[test]
    fn drops_zero_rows() {
        let a = DesignMatrix::new(vec![vec![2, 1, 0], vec![0, 0, 0], vec![0, 1, 2]]).unwrap();
        assert_eq!(a.rows(), 2);
        assert_eq!(a.dropped_rows(), &[1]);
        assert_eq!(a.row(1), &[0, 1, 2]);
    }

    fn assert_is_row_hnf(h: &IntMat, pivots: &[usize]) {
        // Pivot columns strictly increasing, pivots positive, entries above
        // pivots reduced, zero rows at the bottom.
        let mut last = None;
        for (row, &pc) in pivots.iter().enumerate() {
            if let Some(l) = last {
                assert!(pc > l, "pivot columns not increasing");
            }
            last = Some(pc);
            assert!(h.at(row, pc).is_positive(), "pivot not positive");
            for j in 0..pc {
                assert!(h.at(row, j).is_zero(), "entry left of pivot not zero");
            }
            for above in 0..row {
                let v = h.at(above, pc);
                assert!(
                    !v.is_negative() && v < h.at(row, pc),
                    "entry above pivot not reduced"
                );
            }
        }
        for row in pivots.len()..h.rows() {
            assert!(h.row_is_zero(row), "nonzero row below the rank");
        }
    }

    fn check_hnf(m: &IntMat) -> Hnf {
        let hnf = hermite_normal_form(m);
        assert_eq!(hnf.u.mul(m), hnf.h, "U·M != H");
        let det = hnf.u.determinant();
        assert_eq!(det.abs(), BigInt::one(), "U not unimodular");
        assert_is_row_hnf(&hnf.h, &hnf.pivots);
        hnf
    }

    #[test]
    fn hnf_identity() {
        let id = IntMat::identity(3);
        let hnf = check_hnf(&id);
        assert_eq!(hnf.h, id);
        assert_eq!(hnf.u, IntMat::identity(3));
    }

    #[test]
    fn hnf_zero_matrix() {
        let z = IntMat::zeros(2, 3);
        let hnf = check_hnf(&z);
        assert_eq!(hnf.h, z);
        assert_eq!(hnf.u, IntMat::identity(2));
        assert_eq!(hnf.rank(), 0);
    }

    #[test]
    fn hnf_paper_matrix() {
        let m = IntMat::from_i64_rows(&[vec![2, 1, 0], vec![0, 1, 2]]);
        let hnf = check_hnf(&m);
        assert_eq!(hnf.rank(), 2);
    }

    #[test]
    fn kernel_of_paper_matrix() {
        let b = paper_matrix().kernel_basis().unwrap();
        assert_eq!(b.vectors(), &[vec![1, -2, 1]]);
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        assert!(b.is_empty());
        assert_eq!(b.dim(), 0);
    }

    #[test]
    fn kernel_of_ones_row() {
        let a = DesignMatrix::new(vec![vec![1, 1, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        assert_eq!(b.dim(), 2);
        for v in b.vectors() {
            assert!(a.apply_int(v).iter().all(|&x| x == 0));
        }
        assert!(b.same_lattice(&[vec![1, -1, 0], vec![0, 1, -1]]));
    }

    #[test]
    fn independent_columns_examples() {
        assert_eq!(paper_matrix().independent_columns().indices(), &[0, 1]);
        let id = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(id.independent_columns().indices(), &[0, 1]);
        let ones = DesignMatrix::new(vec![vec![1, 1, 1]]).unwrap();
        assert_eq!(ones.independent_columns().indices(), &[0]);
    }

    #[test]
    fn rank_nullity_on_examples() {
        for a in [
            paper_matrix(),
            DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap(),
            DesignMatrix::new(vec![vec![1, 1, 1]]).unwrap(),
            DesignMatrix::new(vec![vec![1, 0, 1], vec![1, 0, 1], vec![0, 2, 0]]).unwrap(),
        ] {
            let b = a.kernel_basis().unwrap();
            let bp = a.independent_columns();
            assert_eq!(b.dim(), a.cols() - a.rank());
            assert_eq!(bp.len(), a.rank());
            assert_eq!(b.dim() + bp.len(), a.cols());
        }
    }

    #[test]
    fn kernel_vectors_sum_to_zero() {
        let a = DesignMatrix::new(vec![vec![2, 1, 0, 1], vec![0, 1, 2, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        assert_eq!(b.dim(), 2);
        for v in b.vectors() {
            assert!(a.apply_int(v).iter().all(|&x| x == 0));
            assert_eq!(v.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn kernel_is_deterministic() {
        let a = DesignMatrix::new(vec![vec![2, 1, 0, 3], vec![1, 2, 3, 0]]).unwrap();
        let b1 = a.kernel_basis().unwrap();
        let b2 = a.kernel_basis().unwrap();
        assert_eq!(b1, b2);
        for v in b1.vectors() {
            let first = v.iter().find(|&&x| x != 0).unwrap();
            assert!(*first > 0, "sign convention violated in {v:?}");
        }
    }

    /// Brute-force lattice oracle: every integer kernel vector with small
    /// entries must be generated by the basis.
    fn assert_lattice_complete(a: &DesignMatrix, bound: i64) {
        let b = a.kernel_basis().unwrap();
        let n = a.cols();
        let width = (2 * bound + 1) as usize;
        let total = width.pow(n as u32);
        for code in 0..total {
            let mut v = vec![0i64; n];
            let mut rem = code;
            for slot in v.iter_mut() {
                *slot = (rem % width) as i64 - bound;
                rem /= width;
            }
            if a.apply_int(&v).iter().all(|&x| x == 0) {
                assert!(b.contains(&v), "kernel vector {v:?} not in basis lattice");
            }
        }
    }

    #[test]
    fn lattice_completeness_small_cases() {
        assert_lattice_complete(&paper_matrix(), 3);
        assert_lattice_complete(&DesignMatrix::new(vec![vec![1, 1, 1]]).unwrap(), 3);
        assert_lattice_complete(
            &DesignMatrix::new(vec![vec![3, 1, 2], vec![-1, 1, 0]]).unwrap(),
            3,
        );
        // A case where a naive rational-kernel scale-up would miss points:
        // (1,1,-2) and (1,-2,1) generate index-3 sublattice of the kernel.
        assert_lattice_complete(&DesignMatrix::new(vec![vec![1, 1, 1], vec![1, 1, 1]]).unwrap(), 2);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn design_matrix_strategy() -> impl Strategy<Value = DesignMatrix> {
            (1usize..=3, 1usize..=4)
                .prop_flat_map(|(m, n)| {
                    (
                        proptest::collection::vec(
                            proptest::collection::vec(-2i64..=2, m),
                            n,
                        ),
                        1i64..=2,
                    )
                })
                .prop_map(|(cols_partial, c)| {
                    // Columns get a balancing entry so all sums equal c.
                    let n = cols_partial.len();
                    let m = cols_partial[0].len() + 1;
                    let mut rows = vec![vec![0i64; n]; m];
                    for (j, col) in cols_partial.iter().enumerate() {
                        let mut s = 0;
                        for (i, &v) in col.iter().enumerate() {
                            rows[i][j] = v;
                            s += v;
                        }
                        rows[m - 1][j] = c - s;
                    }
                    DesignMatrix::new(rows).expect("constructed with equal column sums")
                })
        }

        proptest! {
            #[test]
            fn kernel_basis_invariants(a in design_matrix_strategy()) {
                let b = a.kernel_basis().unwrap();
                prop_assert_eq!(b.dim(), a.cols() - a.rank());
                for v in b.vectors() {
                    prop_assert!(a.apply_int(v).iter().all(|&x| x == 0));
                    prop_assert_eq!(v.iter().sum::<i64>(), 0);
                    let first = v.iter().find(|&&x| x != 0).unwrap();
                    prop_assert!(*first > 0);
                }
            }

            #[test]
            fn hnf_contract_random(rows in proptest::collection::vec(
                proptest::collection::vec(-6i64..=6, 1usize..=4), 1usize..=4)
            ) {
                let width = rows[0].len();
                prop_assume!(rows.iter().all(|r| r.len() == width));
                let m = IntMat::from_i64_rows(&rows);
                let hnf = hermite_normal_form(&m);
                prop_assert_eq!(hnf.u.mul(&m), hnf.h);
                prop_assert_eq!(hnf.u.determinant().abs(), BigInt::one());
            }
        }
    }
}
