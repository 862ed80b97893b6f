//! Exact arithmetic in the semidirect product G_A = Z^d ⋊_A Z.
//!
//! Elements are kept in the normal form `x·z^k` with `x ∈ H = Z^d`, and the
//! defining relation is `z·x = (Ax)·z`. Induction on `k` gives the product
//! `(x·z^k)(y·z^m) = (x + A^k y)·z^(k+m)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{add_vectors, neg_vector, IntMatrix, IntVector};

/// Tolerance on `| |μ| - 1 |` for the numeric eigenvalue test.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenModulus {
    pub modulus: f64,
    pub is_stable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hyperbolicity {
    Hyperbolic,
    NotHyperbolic(String),
}

impl Hyperbolicity {
    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, Hyperbolicity::Hyperbolic)
    }
}

pub fn eigen_moduli(a: &IntMatrix) -> Vec<EigenModulus> {
    let mut moduli: Vec<f64> = a.to_f64().complex_eigenvalues().iter().map(|c| c.norm()).collect();
    moduli.sort_by(|x, y| x.total_cmp(y));
    moduli.into_iter().map(|modulus| EigenModulus { modulus, is_stable: modulus < 1.0 }).collect()
}

/// Decides whether `a` is a hyperbolic element of GL(d, Z).
///
/// The numeric eigenvalue test is backed by exact integer checks
/// `det(A - I) != 0` and `det(A + I) != 0`.
pub fn check_hyperbolic(a: &IntMatrix) -> Hyperbolicity {
    let det = a.det();
    if det.abs() != BigInt::one() {
        return Hyperbolicity::NotHyperbolic(format!("det A = {det}, not ±1"));
    }
    let id = IntMatrix::identity(a.dim());
    if a.sub(&id).det().is_zero() {
        return Hyperbolicity::NotHyperbolic("eigenvalue 1: det(A - I) = 0".into());
    }
    if a.add(&id).det().is_zero() {
        return Hyperbolicity::NotHyperbolic("eigenvalue -1: det(A + I) = 0".into());
    }
    for ev in eigen_moduli(a) {
        if (ev.modulus - 1.0).abs() <= EIGEN_TOLERANCE {
            return Hyperbolicity::NotHyperbolic(format!(
                "eigenvalue of modulus {:.12} on the unit circle",
                ev.modulus
            ));
        }
    }
    Hyperbolicity::Hyperbolic
}

/// A hyperbolic matrix in GL(d, Z), with cached numeric data.
#[derive(Clone, Debug)]
pub struct ToralMatrix {
    matrix: IntMatrix,
    inverse: IntMatrix,
    det: BigInt,
    eigen: Vec<EigenModulus>,
    op_norm: f64,
    op_norm_inv: f64,
}

impl ToralMatrix {
    pub fn new(matrix: IntMatrix) -> Result<Self> {
        if let Hyperbolicity::NotHyperbolic(reason) = check_hyperbolic(&matrix) {
            return invalid(format!("matrix {matrix} is not hyperbolic: {reason}"));
        }
        let inverse = matrix.inverse_unimodular().expect("det ±1 implies an integer inverse");
        Ok(Self {
            det: matrix.det(),
            eigen: eigen_moduli(&matrix),
            op_norm: matrix.operator_norm(),
            op_norm_inv: inverse.operator_norm(),
            matrix,
            inverse,
        })
    }

    /// Arnold's cat map [[2,1],[1,1]].
    pub fn cat_map() -> Self {
        Self::new(IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).unwrap()).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &IntMatrix {
        &self.inverse
    }

    pub fn det(&self) -> &BigInt {
        &self.det
    }

    pub fn eigen(&self) -> &[EigenModulus] {
        &self.eigen
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    pub fn op_norm_inv(&self) -> f64 {
        self.op_norm_inv
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigen.iter().map(|e| e.modulus).fold(0.0, f64::max)
    }
}

/// Normal form `x·z^k`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: IntVector,
    pub k: i64,
}

impl GroupElement {
    pub fn new(x: IntVector, k: i64) -> Self {
        Self { x, k }
    }

    pub fn from_i64(x: &[i64], k: i64) -> Self {
        Self::new(crate::matrix::int_vector(x), k)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![BigInt::zero(); dim], 0)
    }

    /// The element `z^k`.
    pub fn z_power(dim: usize, k: i64) -> Self {
        Self::new(vec![BigInt::zero(); dim], k)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_identity(&self) -> bool {
        self.k == 0 && self.x.iter().all(Zero::is_zero)
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "((")?;
        for (i, c) in self.x.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "),{})", self.k)
    }
}

/// The group G_A together with a memo of exact powers of A.
///
/// The cache is shared behind a lock; concurrent inserts of the same power
/// store identical values, so readers never observe disagreement.
#[derive(Debug)]
pub struct GroupContext {
    a: ToralMatrix,
    powers: RwLock<HashMap<i64, Arc<IntMatrix>>>,
}

impl Clone for GroupContext {
    fn clone(&self) -> Self {
        let powers = self.powers.read().expect("power cache poisoned").clone();
        Self { a: self.a.clone(), powers: RwLock::new(powers) }
    }
}

impl GroupContext {
    pub fn new(a: ToralMatrix) -> Self {
        let mut powers = HashMap::new();
        powers.insert(0, Arc::new(IntMatrix::identity(a.dim())));
        powers.insert(1, Arc::new(a.matrix().clone()));
        powers.insert(-1, Arc::new(a.inverse().clone()));
        Self { a, powers: RwLock::new(powers) }
    }

    pub fn toral(&self) -> &ToralMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Exact `A^j`, memoized.
    pub fn matrix_power(&self, j: i64) -> Arc<IntMatrix> {
        if let Some(m) = self.powers.read().expect("power cache poisoned").get(&j) {
            return Arc::clone(m);
        }
        // Build from the nearest cached power on the same side of zero.
        let step = if j > 0 { 1 } else { -1 };
        let base = if j > 0 { self.a.matrix() } else { self.a.inverse() };
        let (mut e, mut m) = {
            let cache = self.powers.read().expect("power cache poisoned");
            let mut e = j;
            loop {
                e -= step;
                if let Some(m) = cache.get(&e) {
                    break (e, (**m).clone());
                }
            }
        };
        let mut fresh = Vec::new();
        while e != j {
            m = m.mul(base);
            e += step;
            fresh.push((e, Arc::new(m.clone())));
        }
        let mut cache = self.powers.write().expect("power cache poisoned");
        for (exp, mat) in fresh {
            cache.entry(exp).or_insert(mat);
        }
        Arc::clone(&cache[&j])
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.dim())
    }

    pub fn z(&self) -> GroupElement {
        GroupElement::z_power(self.dim(), 1)
    }

    /// The element `x·z^0` of H.
    pub fn lattice(&self, x: IntVector) -> GroupElement {
        GroupElement::new(x, 0)
    }

    fn check_dim(&self, g: &GroupElement) -> Result<()> {
        if g.dim() != self.dim() {
            return invalid(format!("element {g} has dimension {}, group has dimension {}", g.dim(), self.dim()));
        }
        Ok(())
    }

    /// `(x·z^k)(y·z^m) = (x + A^k y)·z^(k+m)`.
    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check_dim(g)?;
        self.check_dim(h)?;
        let twisted = if g.k == 0 { h.x.clone() } else { self.matrix_power(g.k).mul_vec(&h.x) };
        Ok(GroupElement::new(add_vectors(&g.x, &twisted), g.k + h.k))
    }

    /// `(x·z^k)^{-1} = (-A^{-k} x)·z^{-k}`.
    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_dim(g)?;
        let x = if g.k == 0 { neg_vector(&g.x) } else { neg_vector(&self.matrix_power(-g.k).mul_vec(&g.x)) };
        Ok(GroupElement::new(x, -g.k))
    }

    /// `g^n` by square-and-multiply.
    pub fn power(&self, g: &GroupElement, n: i64) -> Result<GroupElement> {
        let mut base = if n < 0 { self.inverse(g)? } else { g.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.multiply(&acc, &base)?;
            }
            e >>= 1;
            if e > 0 {
                base = self.multiply(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// `[g, h] = g h g^{-1} h^{-1}`.
    pub fn commutator(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let gh = self.multiply(g, h)?;
        let gi = self.inverse(g)?;
        let hi = self.inverse(h)?;
        self.multiply(&self.multiply(&gh, &gi)?, &hi)
    }
}
