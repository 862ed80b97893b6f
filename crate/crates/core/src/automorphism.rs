//! Automorphisms of G_A of the form `x ↦ Bx` on H and `z ↦ v·z^e`, subject
//! to `A^e B = B A`.

use std::sync::RwLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::group::{GroupContext, GroupElement, ToralMatrix};
use crate::matrix::{add_vectors, neg_vector, IntMatrix, IntVector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAutomorphism {
    b: IntMatrix,
    v: IntVector,
    e: i8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Validity::Valid => None,
            Validity::Invalid(why) => Some(why),
        }
    }
}

impl GroupAutomorphism {
    /// Builds the triple without checking the commutation law; see [`validate_automorphism`].
    pub fn new(b: IntMatrix, v: IntVector, e: i8) -> Result<Self> {
        if e != 1 && e != -1 {
            return invalid(format!("exponent e must be ±1, got {e}"));
        }
        if v.len() != b.dim() {
            return invalid(format!("v has length {}, B is {}×{}", v.len(), b.dim(), b.dim()));
        }
        Ok(Self { b, v, e })
    }

    pub fn identity(dim: usize) -> Self {
        Self { b: IntMatrix::identity(dim), v: vec![BigInt::zero(); dim], e: 1 }
    }

    pub fn b(&self) -> &IntMatrix {
        &self.b
    }

    pub fn v(&self) -> &IntVector {
        &self.v
    }

    pub fn e(&self) -> i8 {
        self.e
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// Image of `z`, namely `v·z^e`.
    pub fn z_image(&self) -> GroupElement {
        GroupElement::new(self.v.clone(), i64::from(self.e))
    }
}

/// Checks `|det B| = 1` and `A^e B = B A` exactly.
pub fn validate_automorphism(a: &ToralMatrix, cand: &GroupAutomorphism) -> Result<Validity> {
    if cand.dim() != a.dim() {
        return invalid(format!("automorphism has dimension {}, matrix has {}", cand.dim(), a.dim()));
    }
    let det = cand.b.det();
    if det.abs() != BigInt::one() {
        return Ok(Validity::Invalid(format!("|det B| = {} ≠ 1", det.abs())));
    }
    let ae = if cand.e == 1 { a.matrix() } else { a.inverse() };
    if ae.mul(&cand.b) != cand.b.mul(a.matrix()) {
        let lhs = if cand.e == 1 { "A B" } else { "A^-1 B" };
        return Ok(Validity::Invalid(format!("{lhs} ≠ B A for B = {}", cand.b)));
    }
    Ok(Validity::Valid)
}

/// `φ(x·z^k) = (Bx, 0) · φ(z)^k`, computed with the group law.
pub fn apply_automorphism(ctx: &GroupContext, phi: &GroupAutomorphism, g: &GroupElement) -> Result<GroupElement> {
    let head = GroupElement::new(phi.b.mul_vec(&g.x), 0);
    let tail = ctx.power(&phi.z_image(), g.k)?;
    ctx.multiply(&head, &tail)
}

/// `(Bx + Σ_{i<k} A^i v)·z^k`, valid for `e = +1` and `k ≥ 0`.
pub fn closed_form_image(ctx: &GroupContext, phi: &GroupAutomorphism, g: &GroupElement) -> Result<GroupElement> {
    if phi.e != 1 || g.k < 0 {
        return invalid("closed form holds only for e = +1 and k ≥ 0");
    }
    let mut x = phi.b.mul_vec(&g.x);
    for i in 0..g.k {
        x = add_vectors(&x, &ctx.matrix_power(i).mul_vec(&phi.v));
    }
    Ok(GroupElement::new(x, g.k))
}

/// Applies a fixed automorphism many times, memoizing `φ(z)^k`.
pub struct AutomorphismApplier<'a> {
    ctx: &'a GroupContext,
    phi: &'a GroupAutomorphism,
    z_powers: RwLock<FxHashMap<i64, GroupElement>>,
}

impl<'a> AutomorphismApplier<'a> {
    pub fn new(ctx: &'a GroupContext, phi: &'a GroupAutomorphism) -> Self {
        Self { ctx, phi, z_powers: RwLock::new(FxHashMap::default()) }
    }

    pub fn apply(&self, g: &GroupElement) -> Result<GroupElement> {
        let cached = self.z_powers.read().expect("cache poisoned").get(&g.k).cloned();
        let tail = match cached {
            Some(t) => t,
            None => {
                let t = self.ctx.power(&self.phi.z_image(), g.k)?;
                self.z_powers.write().expect("cache poisoned").entry(g.k).or_insert(t).clone()
            }
        };
        let head = GroupElement::new(self.phi.b.mul_vec(&g.x), 0);
        self.ctx.multiply(&head, &tail)
    }
}

/// The inverse automorphism `(B^{-1}, v', e)`, where `v'` solves `φ(v'·z^e) = z`.
pub fn inverse_automorphism(ctx: &GroupContext, phi: &GroupAutomorphism) -> Result<GroupAutomorphism> {
    let b_inv = phi.b.inverse_unimodular().ok_or_else(|| Error::InvalidArgument("B is not unimodular".into()))?;
    // φ(v'·z^e) = (B v')·φ(z^e) and φ(z^e) = w·z for some w ∈ H.
    let w = apply_automorphism(ctx, phi, &GroupElement::z_power(ctx.dim(), i64::from(phi.e)))?;
    debug_assert_eq!(w.k, 1);
    let v_prime = b_inv.mul_vec(&neg_vector(&w.x));
    let inv = GroupAutomorphism::new(b_inv, v_prime, phi.e)?;
    match validate_automorphism(ctx.toral(), &inv)? {
        Validity::Valid => Ok(inv),
        Validity::Invalid(why) => Err(Error::Violation(format!("derived inverse automorphism invalid: {why}"))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacteristicReport {
    pub samples: usize,
    /// Samples whose image left H.
    pub escaped: Vec<String>,
    /// Samples where `B^{-1} φ(x) ≠ x`.
    pub not_bijective: Vec<String>,
    /// `det(A - I)`; non-zero means `(A - I)Z^d` has full rank.
    pub det_a_minus_i: String,
}

impl CharacteristicReport {
    pub fn passed(&self) -> bool {
        self.escaped.is_empty() && self.not_bijective.is_empty() && self.det_a_minus_i != "0"
    }
}

/// Checks `φ(H) = H` on sampled lattice vectors, and that `φ|_H` is the bijection `B`.
pub fn check_characteristic_subgroup<R: Rng>(
    ctx: &GroupContext,
    phi: &GroupAutomorphism,
    samples: usize,
    coordinate_bound: i64,
    rng: &mut R,
) -> Result<CharacteristicReport> {
    let b_inv = phi.b.inverse_unimodular().ok_or_else(|| Error::InvalidArgument("B is not unimodular".into()))?;
    let mut escaped = Vec::new();
    let mut not_bijective = Vec::new();
    for i in 0..samples {
        let x: IntVector = if i == 0 {
            vec![BigInt::zero(); ctx.dim()]
        } else {
            (0..ctx.dim()).map(|_| BigInt::from(rng.gen_range(-coordinate_bound..=coordinate_bound))).collect()
        };
        let g = GroupElement::new(x, 0);
        let image = apply_automorphism(ctx, phi, &g)?;
        if image.k != 0 {
            escaped.push(g.to_string());
        } else if b_inv.mul_vec(&image.x) != g.x {
            not_bijective.push(g.to_string());
        }
    }
    let det = ctx.toral().matrix().sub(&IntMatrix::identity(ctx.dim())).det();
    Ok(CharacteristicReport { samples, escaped, not_bijective, det_a_minus_i: det.to_string() })
}

/// Every integer matrix `B` with entries in `[-bound, bound]`, `|det B| = 1`
/// and `A^e B = B A`, in sorted order.
///
/// The commutation law is linear in the entries of `B`; the scan runs over
/// the free variables of its solution space only.
pub fn enumerate_commuting_matrices(a: &ToralMatrix, e: i8, bound: u32, budget: usize) -> Result<Vec<IntMatrix>> {
    if bound == 0 {
        return invalid("entry bound must be at least 1");
    }
    if e != 1 && e != -1 {
        return invalid("e must be ±1");
    }
    let d = a.dim();
    let n = d * d;
    let ae = if e == 1 { a.matrix() } else { a.inverse() };
    // Row (i,j) of the system: Σ_l ae[i,l] B[l,j] - Σ_l B[i,l] A[l,j] = 0, with B[r,c] at index r*d+c.
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    for i in 0..d {
        for j in 0..d {
            let mut row = vec![BigRational::zero(); n];
            for l in 0..d {
                row[l * d + j] += BigRational::from_integer(ae.get(i, l).clone());
                row[i * d + l] -= BigRational::from_integer(a.matrix().get(l, j).clone());
            }
            rows.push(row);
        }
    }
    let (rref, pivots) = reduced_row_echelon(rows, n);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let side = 2 * u64::from(bound) + 1;
    let combos = side.checked_pow(free.len() as u32).filter(|&c| c <= budget as u64);
    let Some(combos) = combos else {
        return Err(Error::BudgetExceeded {
            limit: budget,
            during: format!("scanning {} free entries in [-{bound}, {bound}]", free.len()),
            completed: None,
        });
    };
    let b = i64::from(bound);
    let mut found: Vec<IntMatrix> = (0..combos)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut entries = vec![BigRational::zero(); n];
            for &c in &free {
                entries[c] = BigRational::from_integer(BigInt::from((idx % side) as i64 - b));
                idx /= side;
            }
            // Pivot variables: x_p = -Σ_free rref[r][f] x_f.
            for (r, &p) in pivots.iter().enumerate() {
                let mut val = BigRational::zero();
                for &f in &free {
                    val -= &rref[r][f] * &entries[f];
                }
                if !val.is_integer() || val.abs() > BigRational::from_integer(BigInt::from(b)) {
                    return None;
                }
                entries[p] = val;
            }
            let m = IntMatrix::from_row_major(d, entries.into_iter().map(|q| q.to_integer()).collect()).ok()?;
            (m.det().abs() == BigInt::one()).then_some(m)
        })
        .collect();
    found.sort();
    Ok(found)
}

#[allow(clippy::needless_range_loop)]
fn reduced_row_echelon(mut rows: Vec<Vec<BigRational>>, cols: usize) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let pv = rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v = &*v / &pv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &rows[r][j];
                    rows[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(pivots.len());
    (rows, pivots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::int_vector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> GroupContext {
        GroupContext::new(ToralMatrix::cat_map())
    }

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    fn e(x: &[i64], k: i64) -> GroupElement {
        GroupElement::from_i64(x, k)
    }

    fn shift_by_a() -> GroupAutomorphism {
        GroupAutomorphism::new(ToralMatrix::cat_map().matrix().clone(), int_vector(&[1, 0]), 1).unwrap()
    }

    fn flip() -> GroupAutomorphism {
        // Rotation by a quarter turn conjugates the cat map to its inverse.
        GroupAutomorphism::new(m(&[vec![0, 1], vec![-1, 0]]), int_vector(&[2, -1]), -1).unwrap()
    }

    #[test]
    fn validation_examples() {
        let a = ToralMatrix::cat_map();
        let id = GroupAutomorphism::identity(2);
        assert!(validate_automorphism(&a, &id).unwrap().is_valid());
        let self_b = GroupAutomorphism::new(a.matrix().clone(), int_vector(&[0, 0]), 1).unwrap();
        assert!(validate_automorphism(&a, &self_b).unwrap().is_valid());
        let shear = GroupAutomorphism::new(m(&[vec![1, 1], vec![0, 1]]), int_vector(&[0, 0]), 1).unwrap();
        assert!(!validate_automorphism(&a, &shear).unwrap().is_valid());
        assert!(validate_automorphism(&a, &flip()).unwrap().is_valid());
        let wrong_dim = GroupAutomorphism::identity(3);
        assert!(validate_automorphism(&a, &wrong_dim).is_err());
        let singular = GroupAutomorphism::new(m(&[vec![2, 0], vec![0, 2]]), int_vector(&[0, 0]), 1).unwrap();
        assert!(!validate_automorphism(&a, &singular).unwrap().is_valid());
    }

    #[test]
    fn application_examples() {
        let c = ctx();
        let g = e(&[3, -4], -2);
        assert_eq!(apply_automorphism(&c, &GroupAutomorphism::identity(2), &g).unwrap(), g);
        assert_eq!(apply_automorphism(&c, &shift_by_a(), &e(&[0, 0], 2)).unwrap(), e(&[3, 1], 2));
    }

    #[test]
    fn closed_form_matches_composition() {
        let c = ctx();
        let phi = shift_by_a();
        for k in 0..=20 {
            let g = e(&[2, -1], k);
            assert_eq!(apply_automorphism(&c, &phi, &g).unwrap(), closed_form_image(&c, &phi, &g).unwrap());
        }
        assert!(closed_form_image(&c, &phi, &e(&[0, 0], -1)).is_err());
    }

    #[test]
    fn negative_powers_use_inverse_of_z_image() {
        let c = ctx();
        for phi in [shift_by_a(), flip()] {
            let zi = apply_automorphism(&c, &phi, &e(&[0, 0], -1)).unwrap();
            let z = apply_automorphism(&c, &phi, &c.z()).unwrap();
            assert_eq!(zi, c.inverse(&z).unwrap());
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let c = ctx();
        for phi in [shift_by_a(), flip(), GroupAutomorphism::identity(2)] {
            let inv = inverse_automorphism(&c, &phi).unwrap();
            for g in [e(&[1, 2], 3), e(&[-5, 0], -4), e(&[0, 0], 0), e(&[7, 7], 1)] {
                let there = apply_automorphism(&c, &phi, &g).unwrap();
                assert_eq!(apply_automorphism(&c, &inv, &there).unwrap(), g);
            }
        }
    }

    #[test]
    fn characteristic_subgroup() {
        let c = ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for phi in [shift_by_a(), flip()] {
            let report = check_characteristic_subgroup(&c, &phi, 200, 50, &mut rng).unwrap();
            assert!(report.passed(), "{report:?}");
            assert_eq!(report.det_a_minus_i, "-1");
        }
        let image = apply_automorphism(&c, &shift_by_a(), &e(&[5, -3], 0)).unwrap();
        assert_eq!(image.k, 0);
        assert_eq!(apply_automorphism(&c, &flip(), &c.identity()).unwrap(), c.identity());
    }

    /// Every 2×2 matrix with entries in [-bound, bound], filtered directly.
    fn brute_force_commuting(a: &ToralMatrix, e: i8, bound: i64) -> Vec<IntMatrix> {
        let ae = if e == 1 { a.matrix().clone() } else { a.inverse().clone() };
        let r = -bound..=bound;
        let mut out = Vec::new();
        for p in r.clone() {
            for q in r.clone() {
                for s in r.clone() {
                    for t in r.clone() {
                        let b = IntMatrix::from_i64(2, &[p, q, s, t]).unwrap();
                        if (p * t - q * s).abs() == 1 && ae.mul(&b) == b.mul(a.matrix()) {
                            out.push(b);
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn commuting_matrices_match_brute_force() {
        let a = ToralMatrix::cat_map();
        for e in [1, -1] {
            let fast = enumerate_commuting_matrices(&a, e, 5, 1_000_000).unwrap();
            assert_eq!(fast, brute_force_commuting(&a, e, 5), "e = {e}");
        }
    }

    #[test]
    fn commuting_matrices_are_signed_powers_of_the_square_root() {
        // [[1,1],[1,0]]^2 = A, so its powers commute with A and have det ±1.
        let a = ToralMatrix::cat_map();
        let root = m(&[vec![1, 1], vec![1, 0]]);
        let root_inv = root.inverse_unimodular().unwrap();
        let mut powers = vec![IntMatrix::identity(2)];
        let (mut up, mut down) = (IntMatrix::identity(2), IntMatrix::identity(2));
        for _ in 0..8 {
            up = up.mul(&root);
            down = down.mul(&root_inv);
            powers.push(up.clone());
            powers.push(down.clone());
        }
        let found = enumerate_commuting_matrices(&a, 1, 5, 1_000_000).unwrap();
        assert!(found.contains(&IntMatrix::identity(2)));
        assert!(found.contains(&IntMatrix::identity(2).neg()));
        assert!(found.contains(a.matrix()) && found.contains(a.inverse()));
        for b in &found {
            assert!(powers.contains(b) || powers.contains(&b.neg()), "{b} is not ±root^n");
        }
        assert_eq!(found.len(), 18);
    }

    #[test]
    fn anti_commuting_matrices_conjugate_a_to_its_inverse() {
        let a = ToralMatrix::cat_map();
        let found = enumerate_commuting_matrices(&a, -1, 5, 1_000_000).unwrap();
        assert!(!found.is_empty());
        for b in &found {
            let b_inv = b.inverse_unimodular().unwrap();
            assert_eq!(b.mul(a.matrix()).mul(&b_inv), *a.inverse());
        }
    }

    #[test]
    fn commuting_budget() {
        let a = ToralMatrix::cat_map();
        assert!(matches!(enumerate_commuting_matrices(&a, 1, 100, 10), Err(Error::BudgetExceeded { .. })));
    }

    fn element() -> impl Strategy<Value = GroupElement> {
        (prop::collection::vec(-50i64..=50, 2), -8i64..=8).prop_map(|(x, k)| e(&x, k))
    }

    proptest! {
        #[test]
        fn homomorphism(g in element(), h in element(), which in 0usize..3) {
            let c = ctx();
            let phi = [shift_by_a(), flip(), GroupAutomorphism::identity(2)][which].clone();
            let gh = c.multiply(&g, &h).unwrap();
            let lhs = apply_automorphism(&c, &phi, &gh).unwrap();
            let rhs = c.multiply(&apply_automorphism(&c, &phi, &g).unwrap(),
                                 &apply_automorphism(&c, &phi, &h).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn conjugation_relation_preserved(x in prop::collection::vec(-50i64..=50, 2)) {
            let c = ctx();
            let phi = flip();
            let h = e(&x, 0);
            let zxz = c.multiply(&c.multiply(&c.z(), &h).unwrap(), &c.inverse(&c.z()).unwrap()).unwrap();
            let ax = GroupElement::new(c.toral().matrix().mul_vec(&h.x), 0);
            prop_assert_eq!(apply_automorphism(&c, &phi, &zxz).unwrap(), apply_automorphism(&c, &phi, &ax).unwrap());
        }

        #[test]
        fn applier_matches_direct(g in element()) {
            let c = ctx();
            let phi = flip();
            let applier = AutomorphismApplier::new(&c, &phi);
            prop_assert_eq!(applier.apply(&g).unwrap(), apply_automorphism(&c, &phi, &g).unwrap());
        }
    }
}
