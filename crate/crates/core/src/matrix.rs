//! Square integer matrices with arbitrary-precision entries.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// An element of Z^d.
pub type IntVector = Vec<BigInt>;

pub fn int_vector(values: &[i64]) -> IntVector {
    values.iter().map(|&v| BigInt::from(v)).collect()
}

pub fn norm_sq(x: &[BigInt]) -> BigInt {
    x.iter().map(|c| c * c).sum()
}

pub fn norm_f64(x: &[BigInt]) -> f64 {
    x.iter().map(|c| c.to_f64().unwrap_or(f64::INFINITY).powi(2)).sum::<f64>().sqrt()
}

pub fn add_vectors(a: &[BigInt], b: &[BigInt]) -> IntVector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vectors(a: &[BigInt], b: &[BigInt]) -> IntVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn neg_vector(a: &[BigInt]) -> IntVector {
    a.iter().map(|x| -x).collect()
}

/// Square d×d matrix over Z, row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn from_row_major(dim: usize, entries: Vec<BigInt>) -> Result<Self> {
        if dim == 0 {
            return invalid("matrix dimension must be positive");
        }
        if entries.len() != dim * dim {
            return invalid(format!("matrix is not square: {} entries for declared dimension {}", entries.len(), dim));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_i64(dim: usize, entries: &[i64]) -> Result<Self> {
        Self::from_row_major(dim, int_vector(entries))
    }

    /// Builds a matrix from explicit rows; ragged or non-square input is rejected.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return invalid(format!("matrix is not square: {} rows of lengths {:?}", dim, {
                rows.iter().map(Vec::len).collect::<Vec<_>>()
            }));
        }
        let flat: Vec<i64> = rows.iter().flatten().copied().collect();
        Self::from_i64(dim, &flat)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> IntVector {
        (0..self.dim).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix product");
        let d = self.dim;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = BigInt::zero();
                for l in 0..d {
                    acc += self.get(i, l) * other.get(l, j);
                }
                entries.push(acc);
            }
        }
        Self { dim: d, entries }
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> IntVector {
        assert_eq!(self.dim, x.len(), "dimension mismatch in matrix-vector product");
        (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn neg(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|a| -a).collect() }
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let entries = (0..d * d).map(|idx| self.get(idx % d, idx / d).clone()).collect();
        Self { dim: d, entries }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        let d = self.dim;
        let mut m: Vec<Vec<BigInt>> = (0..d).map(|i| self.entries[i * d..(i + 1) * d].to_vec()).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..d {
            if m[k][k].is_zero() {
                match (k + 1..d).find(|&r| !m[r][k].is_zero()) {
                    Some(r) => {
                        m.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..d {
                for j in k + 1..d {
                    let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                    m[i][j] = v / &prev;
                }
            }
            prev = m[k][k].clone();
        }
        sign * &m[d - 1][d - 1]
    }

    /// Inverse of a unimodular matrix (det ±1); `None` otherwise.
    pub fn inverse_unimodular(&self) -> Option<Self> {
        let inv = self.inverse_rational()?;
        if inv.iter().any(|q| !q.is_integer()) {
            return None;
        }
        let entries = inv.into_iter().map(|q| q.to_integer()).collect();
        Some(Self { dim: self.dim, entries })
    }

    /// Gauss-Jordan inverse over Q, row-major.
    #[allow(clippy::needless_range_loop)]
    pub fn inverse_rational(&self) -> Option<Vec<BigRational>> {
        let d = self.dim;
        let mut a: Vec<Vec<BigRational>> = (0..d)
            .map(|i| {
                let mut row: Vec<BigRational> =
                    (0..d).map(|j| BigRational::from_integer(self.get(i, j).clone())).collect();
                row.extend((0..d).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
                row
            })
            .collect();
        for col in 0..d {
            let pivot = (col..d).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, pivot);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v = &*v / &p;
            }
            for r in 0..d {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in 0..2 * d {
                        let delta = &f * &a[col][c];
                        a[r][c] -= delta;
                    }
                }
            }
        }
        Some(a.into_iter().flat_map(|row| row.into_iter().skip(d)).collect())
    }

    pub fn max_abs_entry(&self) -> BigInt {
        self.entries.iter().map(|e| e.abs()).max().unwrap_or_default()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j).to_f64().unwrap_or(f64::NAN))
    }

    /// Entries as i64, if all of them fit.
    pub fn to_i64(&self) -> Option<Vec<i64>> {
        self.entries.iter().map(|e| e.to_i64()).collect()
    }

    /// Spectral norm (largest singular value), numerically.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.to_f64())
    }
}

pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0_f64, f64::max)
}

/// True iff `lambda^2 I - M^T M` is positive definite, i.e. ‖M‖ < λ, decided exactly.
pub fn operator_norm_below(m: &IntMatrix, lambda: &BigRational) -> bool {
    let d = m.dim();
    let gram = m.transpose().mul(m);
    let l2 = lambda * lambda;
    let shifted: Vec<Vec<BigRational>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let g = BigRational::from_integer(gram.get(i, j).clone());
                    if i == j {
                        &l2 - g
                    } else {
                        -g
                    }
                })
                .collect()
        })
        .collect();
    // Sylvester: all leading principal minors positive.
    (1..=d).all(|k| rational_det(&shifted, k).is_positive())
}

#[allow(clippy::needless_range_loop)]
fn rational_det(m: &[Vec<BigRational>], size: usize) -> BigRational {
    let mut a: Vec<Vec<BigRational>> = m[..size].iter().map(|r| r[..size].to_vec()).collect();
    let mut det = BigRational::one();
    for col in 0..size {
        let Some(pivot) = (col..size).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for r in col + 1..size {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &p;
            for c in col..size {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    det
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> IntMatrix {
        IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn rejects_non_square() {
        assert!(IntMatrix::from_rows(&[vec![1, 2, 3], vec![4, 5, 6]]).is_err());
        assert!(IntMatrix::from_i64(2, &[1, 2, 3]).is_err());
    }

    #[test]
    fn bareiss_matches_cofactor() {
        let m = IntMatrix::from_rows(&[vec![2, -1, 0], vec![1, 3, 4], vec![0, 5, -2]]).unwrap();
        // cofactor expansion along the first row: 2·(−26) + 1·(−2)
        let expected = 2 * (3 * -2 - 4 * 5) - 2;
        assert_eq!(m.det(), BigInt::from(expected));
        assert_eq!(cat().det(), BigInt::one());
    }

    #[test]
    fn unimodular_inverse() {
        let inv = cat().inverse_unimodular().unwrap();
        assert_eq!(inv, IntMatrix::from_rows(&[vec![1, -1], vec![-1, 2]]).unwrap());
        assert!(cat().mul(&inv).is_identity());
        let not_unimodular = IntMatrix::from_rows(&[vec![2, 0], vec![0, 1]]).unwrap();
        assert!(not_unimodular.inverse_unimodular().is_none());
    }

    #[test]
    fn exact_norm_bound() {
        // ‖cat‖ = (3+√5)/2 ≈ 2.6180
        let below = BigRational::new(BigInt::from(262), BigInt::from(100));
        let above = BigRational::new(BigInt::from(261), BigInt::from(100));
        assert!(operator_norm_below(&cat(), &below));
        assert!(!operator_norm_below(&cat(), &above));
        assert!((cat().operator_norm() - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }
}
