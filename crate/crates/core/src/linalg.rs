// SPDX-License-Identifier: Apache-2.0

//! Dense row-major matrices over GF(2^θ).
//!
//! Elimination pivots on the first nonzero entry scanning down each column,
//! so every reduction is deterministic.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::field::{FieldContext, FieldError, Gf};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operands live in different fields")]
    FieldMismatch,
    #[error("Cauchy parameters repeat element {0}")]
    DuplicateElement(Gf),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: Arc<FieldContext>,
    rows: usize,
    cols: usize,
    data: Vec<Gf>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} over GF({})", self.rows, self.cols, self.field.q())?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| format!("{:x}", x.0)).collect();
            writeln!(f, "  [{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Result of [`Matrix::solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Unique(Matrix),
    /// Column indices of the free variables.
    Underdetermined(Vec<usize>),
    Inconsistent,
}

/// A consistent system solved as far as the equations allow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSolution {
    /// One particular solution (free variables set to zero).
    pub values: Vec<Gf>,
    /// `determined[v]` is true when every solution agrees on variable `v`.
    pub determined: Vec<bool>,
}

impl PartialSolution {
    pub fn all_determined(&self, range: std::ops::Range<usize>) -> bool {
        self.determined[range].iter().all(|&d| d)
    }
}

/// Reduced row echelon form plus bookkeeping.
struct Echelon {
    m: Matrix,
    pivots: Vec<usize>,
}

impl Matrix {
    pub fn zeros(field: &Arc<FieldContext>, rows: usize, cols: usize) -> Self {
        Self { field: Arc::clone(field), rows, cols, data: vec![Gf::ZERO; rows * cols] }
    }

    pub fn identity(field: &Arc<FieldContext>, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, Gf::ONE);
        }
        m
    }

    pub fn from_vec(field: &Arc<FieldContext>, rows: usize, cols: usize, data: Vec<Gf>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(&bad) = data.iter().find(|x| !field.contains(**x)) {
            return Err(FieldError::NotInField { value: u32::from(bad.0), q: field.q() }.into());
        }
        Ok(Self { field: Arc::clone(field), rows, cols, data })
    }

    pub fn from_rows(field: &Arc<FieldContext>, rows: &[Vec<u16>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().map(|&v| Gf(v)).collect();
        Self::from_vec(field, rows.len(), cols, data)
    }

    /// Cauchy matrix with entry (i, j) = 1 / (a_i − b_j).
    pub fn cauchy(field: &Arc<FieldContext>, a: &[Gf], b: &[Gf]) -> Result<Self, LinalgError> {
        let mut seen = BTreeSet::new();
        for &x in a.iter().chain(b) {
            if !field.contains(x) {
                return Err(FieldError::NotInField { value: u32::from(x.0), q: field.q() }.into());
            }
            if !seen.insert(x) {
                return Err(LinalgError::DuplicateElement(x));
            }
        }
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &ai in a {
            for &bj in b {
                data.push(field.inv(field.sub(ai, bj))?);
            }
        }
        Ok(Self { field: Arc::clone(field), rows: a.len(), cols: b.len(), data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Arc<FieldContext> {
        &self.field
    }

    pub fn data(&self) -> &[Gf] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Gf {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Gf) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Gf] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Gf> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(&self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Contiguous block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> Matrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let mut b = Matrix::zeros(&self.field, nr, nc);
        for r in 0..nr {
            b.data[r * nc..(r + 1) * nc]
                .copy_from_slice(&self.data[(r0 + r) * self.cols + c0..(r0 + r) * self.cols + c0 + nc]);
        }
        b
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut s = Matrix::zeros(&self.field, rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                s.set(i, j, self.get(r, c));
            }
        }
        s
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    /// Copy `src` into this matrix at offset (r0, c0).
    pub fn paste(&mut self, r0: usize, c0: usize, src: &Matrix) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols, "paste out of range");
        for r in 0..src.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + src.cols].copy_from_slice(src.row(r));
        }
    }

    /// Right-pad with zero columns up to `width`.
    pub fn pad_columns(&self, width: usize) -> Result<Matrix, LinalgError> {
        if width < self.cols {
            return Err(LinalgError::DimensionMismatch(format!("cannot pad {} columns down to {width}", self.cols)));
        }
        let mut m = Matrix::zeros(&self.field, self.rows, width);
        m.paste(0, 0, self);
        Ok(m)
    }

    fn same_field(&self, other: &Matrix) -> Result<(), LinalgError> {
        if Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field {
            Ok(())
        } else {
            Err(LinalgError::FieldMismatch)
        }
    }

    pub fn mat_mul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(&self.field, self.rows, other.cols);
        for r in 0..self.rows {
            let acc = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                self.field.axpy(acc, self.get(r, k), other.row(k));
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[Gf]) -> Result<Vec<Gf>, LinalgError> {
        if v.len() != self.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut acc = vec![Gf::ZERO; self.cols];
        for (r, &coef) in v.iter().enumerate() {
            self.field.axpy(&mut acc, coef, self.row(r));
        }
        Ok(acc)
    }

    fn echelon(&self) -> Echelon {
        let f = Arc::clone(&self.field);
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..m.cols {
            if lead == m.rows {
                break;
            }
            let Some(p) = (lead..m.rows).find(|&r| !m.get(r, c).is_zero()) else {
                continue;
            };
            if p != lead {
                for k in 0..m.cols {
                    m.data.swap(p * m.cols + k, lead * m.cols + k);
                }
            }
            let scale = f.inv(m.get(lead, c)).expect("pivot is nonzero");
            for k in 0..m.cols {
                let v = m.get(lead, k);
                m.set(lead, k, f.mul(v, scale));
            }
            let pivot_row = m.row(lead).to_vec();
            for r in 0..m.rows {
                if r != lead {
                    let factor = m.get(r, c);
                    if !factor.is_zero() {
                        let cols = m.cols;
                        f.axpy(&mut m.data[r * cols..(r + 1) * cols], factor, &pivot_row);
                    }
                }
            }
            pivots.push(c);
            lead += 1;
        }
        Echelon { m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.echelon().pivots.len()
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Basis (as rows) of `{v : v · selfᵀ = 0}`, i.e. of the right null space.
    pub fn null_space_basis(&self) -> Matrix {
        let ech = self.echelon();
        let free: Vec<usize> = (0..self.cols).filter(|c| !ech.pivots.contains(c)).collect();
        let mut basis = Matrix::zeros(&self.field, free.len(), self.cols);
        for (b, &fc) in free.iter().enumerate() {
            basis.set(b, fc, Gf::ONE);
            for (pr, &pc) in ech.pivots.iter().enumerate() {
                // char 2: -x = x
                basis.set(b, pc, ech.m.get(pr, fc));
            }
        }
        basis
    }

    fn augment(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        self.same_field(rhs)?;
        if self.rows != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "coefficient rows {} vs right-hand side rows {}",
                self.rows, rhs.rows
            )));
        }
        let mut aug = Matrix::zeros(&self.field, self.rows, self.cols + rhs.cols);
        aug.paste(0, 0, self);
        aug.paste(0, self.cols, rhs);
        Ok(aug)
    }

    /// Solve `self · X = rhs` exactly.
    pub fn solve(&self, rhs: &Matrix) -> Result<SolveOutcome, LinalgError> {
        let aug = self.augment(rhs)?;
        let ech = aug.echelon();
        if ech.pivots.iter().any(|&p| p >= self.cols) {
            return Ok(SolveOutcome::Inconsistent);
        }
        if ech.pivots.len() < self.cols {
            let free = (0..self.cols).filter(|c| !ech.pivots.contains(c)).collect();
            return Ok(SolveOutcome::Underdetermined(free));
        }
        Ok(SolveOutcome::Unique(ech.m.block(0, self.cols, self.cols, rhs.cols)))
    }

    /// Solve `self · x = rhs` for a single right-hand side, reporting which
    /// variables are pinned down even when the system is underdetermined.
    /// Returns `None` when the system is inconsistent.
    pub fn solve_partial(&self, rhs: &[Gf]) -> Result<Option<PartialSolution>, LinalgError> {
        let rhs = Matrix::from_vec(&self.field, rhs.len(), 1, rhs.to_vec())?;
        let aug = self.augment(&rhs)?;
        let ech = aug.echelon();
        if ech.pivots.iter().any(|&p| p >= self.cols) {
            return Ok(None);
        }
        let n = self.cols;
        let mut values = vec![Gf::ZERO; n];
        let mut determined = vec![false; n];
        let is_pivot: Vec<bool> = (0..n).map(|c| ech.pivots.contains(&c)).collect();
        for (pr, &pc) in ech.pivots.iter().enumerate() {
            values[pc] = ech.m.get(pr, n);
            determined[pc] = (0..n).all(|c| is_pivot[c] || ech.m.get(pr, c).is_zero());
        }
        Ok(Some(PartialSolution { values, determined }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn gf(theta: u8) -> Arc<FieldContext> {
        Arc::new(FieldContext::new(theta).unwrap())
    }

    fn random_matrix(f: &Arc<FieldContext>, rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        let q = f.q() as u16;
        let data = (0..rows * cols).map(|_| Gf(rng.random_range(0..q))).collect();
        Matrix::from_vec(f, rows, cols, data).unwrap()
    }

    #[test]
    fn cauchy_examples() {
        let f = gf(4);
        assert_eq!(Matrix::cauchy(&f, &[Gf(2)], &[Gf(1)]).unwrap().get(0, 0), Gf(0xE));
        assert_eq!(Matrix::cauchy(&f, &[Gf(0)], &[Gf(1)]).unwrap().get(0, 0), Gf(0x1));
        let f4 = gf(2);
        assert_eq!(Matrix::cauchy(&f4, &[Gf(0), Gf(1)], &[Gf(0)]), Err(LinalgError::DuplicateElement(Gf(0))));
    }

    #[test]
    fn mat_mul_examples() {
        let f = gf(4);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let y = random_matrix(&f, 2, 3, &mut rng);
        assert_eq!(Matrix::identity(&f, 2).mat_mul(&y).unwrap(), y);
        assert!(Matrix::zeros(&f, 4, 2).mat_mul(&y).unwrap().is_zero());
        let a = Matrix::from_rows(&f, &[vec![2]]).unwrap();
        let b = Matrix::from_rows(&f, &[vec![9]]).unwrap();
        assert_eq!(a.mat_mul(&b).unwrap().get(0, 0), Gf(1));
        assert!(matches!(y.mat_mul(&y), Err(LinalgError::DimensionMismatch(_))));
        let other = gf(5);
        assert_eq!(Matrix::identity(&other, 2).mat_mul(&y), Err(LinalgError::FieldMismatch));
    }

    #[test]
    fn solve_examples() {
        let f = gf(4);
        let v = Matrix::from_rows(&f, &[vec![3], vec![7], vec![0xB]]).unwrap();
        assert_eq!(Matrix::identity(&f, 3).solve(&v).unwrap(), SolveOutcome::Unique(v.clone()));
        assert_eq!(Matrix::zeros(&f, 3, 3).solve(&v).unwrap(), SolveOutcome::Inconsistent);
        let f4 = gf(2);
        let coeff = Matrix::from_rows(&f4, &[vec![1, 1]]).unwrap();
        let rhs = Matrix::from_rows(&f4, &[vec![2]]).unwrap();
        assert_eq!(coeff.solve(&rhs).unwrap(), SolveOutcome::Underdetermined(vec![1]));
    }

    #[test]
    fn rank_and_null_space_examples() {
        let f = gf(4);
        assert_eq!(Matrix::identity(&f, 5).rank(), 5);
        assert_eq!(Matrix::zeros(&f, 2, 2).rank(), 0);
        let m = Matrix::from_rows(&f, &[vec![1, 1]]).unwrap();
        let n = m.null_space_basis();
        assert_eq!(n, Matrix::from_rows(&f, &[vec![1, 1]]).unwrap());
    }

    #[test]
    fn partial_solution_flags_pinned_variables() {
        let f = gf(4);
        // x0 = 5, x1 + x2 = 3: x0 determined, x1/x2 not
        let coeff = Matrix::from_rows(&f, &[vec![1, 0, 0], vec![0, 1, 1]]).unwrap();
        let sol = coeff.solve_partial(&[Gf(5), Gf(3)]).unwrap().unwrap();
        assert_eq!(sol.determined, vec![true, false, false]);
        assert_eq!(sol.values[0], Gf(5));
        let zero = Matrix::zeros(&f, 1, 2);
        assert_eq!(zero.solve_partial(&[Gf(1)]).unwrap(), None);
    }

    /// Brute-force determinant over GF(2^θ) by permutation expansion; sign is
    /// irrelevant in characteristic 2.
    fn permutation_determinant(m: &Matrix) -> Gf {
        fn rec(m: &Matrix, row: usize, used: &mut Vec<bool>) -> Gf {
            if row == m.rows() {
                return Gf::ONE;
            }
            let f = m.field();
            let mut acc = Gf::ZERO;
            for c in 0..m.cols() {
                if !used[c] && !m.get(row, c).is_zero() {
                    used[c] = true;
                    acc = f.add(acc, f.mul(m.get(row, c), rec(m, row + 1, used)));
                    used[c] = false;
                }
            }
            acc
        }
        rec(m, 0, &mut vec![false; m.cols()])
    }

    #[test]
    fn rank_agrees_with_permutation_determinant() {
        let f = gf(3);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        for n in 1..=4 {
            for _ in 0..200 {
                let m = random_matrix(&f, n, n, &mut rng);
                assert_eq!(m.is_invertible(), !permutation_determinant(&m).is_zero());
            }
        }
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
            }
        }
        out
    }

    #[test]
    fn cauchy_square_submatrices_invertible_gf16() {
        let f = gf(4);
        let a: Vec<Gf> = (0..4).map(Gf).collect();
        let b: Vec<Gf> = (4..8).map(Gf).collect();
        let c = Matrix::cauchy(&f, &a, &b).unwrap();
        let mut count = 0;
        for k in 1..=4 {
            for rows in subsets(4, k) {
                for cols in subsets(4, k) {
                    let s = c.select(&rows, &cols);
                    assert!(s.is_invertible());
                    assert!(!permutation_determinant(&s).is_zero());
                    count += 1;
                }
            }
        }
        assert_eq!(count, 69);
    }

    #[test]
    fn rank_nullity() {
        let f = gf(4);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..300 {
            let rows = rng.random_range(1..7);
            let cols = rng.random_range(1..7);
            let mut m = random_matrix(&f, rows, cols, &mut rng);
            if rng.random_bool(0.5) && rows > 1 {
                // force a dependent row
                let r0 = m.row(0).to_vec();
                for c in 0..cols {
                    m.set(rows - 1, c, r0[c]);
                }
            }
            // left null space {v : v·m = 0} via transpose
            let left = m.transpose().null_space_basis();
            assert_eq!(m.rank() + left.rows(), rows);
            for b in 0..left.rows() {
                assert!(m.left_mul_vec(left.row(b)).unwrap().iter().all(|x| x.is_zero()));
            }
            let right = m.null_space_basis();
            assert_eq!(right.rows() + m.rank(), cols);
            assert!(m.mat_mul(&right.transpose()).unwrap().is_zero());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn solve_recovers_full_rank(seed in any::<u64>(), n in 1usize..6, extra in 0usize..4) {
                let f = gf(8);
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
                let coeff = random_matrix(&f, n + extra, n, &mut rng);
                prop_assume!(coeff.rank() == n);
                let x = random_matrix(&f, n, 2, &mut rng);
                let rhs = coeff.mat_mul(&x).unwrap();
                prop_assert_eq!(coeff.solve(&rhs).unwrap(), SolveOutcome::Unique(x));
            }

            #[test]
            fn partial_solution_satisfies_system(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
                let f = gf(4);
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
                let coeff = random_matrix(&f, rows, cols, &mut rng);
                let x: Vec<Gf> = (0..cols).map(|_| Gf(rng.random_range(0..16))).collect();
                let rhs = coeff.transpose().left_mul_vec(&x).unwrap();
                let sol = coeff.solve_partial(&rhs).unwrap().expect("consistent by construction");
                prop_assert_eq!(coeff.transpose().left_mul_vec(&sol.values).unwrap(), rhs);
                for v in 0..cols {
                    if sol.determined[v] {
                        prop_assert_eq!(sol.values[v], x[v]);
                    }
                }
            }
        }
    }
}
