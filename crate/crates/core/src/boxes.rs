//! Box sets `B(ℓ, h) = { x·z^k : ‖x‖ ≤ λ^ℓ, |k| ≤ h }` with exact membership,
//! the choice of λ, and sampled checks of the box-inclusion lemmas.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::automorphism::{apply_automorphism, GroupAutomorphism};
use crate::error::{invalid, Error, Result};
use crate::group::{GroupContext, GroupElement, ToralMatrix};
use crate::matrix::{norm_f64, norm_sq, operator_norm_below, IntMatrix, IntVector};
use crate::metric::{neighborhood, ElementSet, GeneratingSet};

/// Denominator of the rational grid λ is chosen from.
pub const LAMBDA_DENOMINATOR: i64 = 100;
/// Default number of powers `A^{±i} v` inspected when choosing λ.
pub const DEFAULT_LAMBDA_POWERS: u32 = 32;

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rational_pow(q: &BigRational, e: u64) -> BigRational {
    let e = u32::try_from(e).expect("exponent fits in u32");
    BigRational::new(q.numer().pow(e), q.denom().pow(e))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSet {
    lambda: BigRational,
    ell: u64,
    h: u64,
    /// `floor(λ^{2ℓ})`; since ‖x‖² is an integer, ‖x‖² ≤ λ^{2ℓ} iff ‖x‖² ≤ cap.
    cap: BigInt,
}

impl BoxSet {
    pub fn new(lambda: &BigRational, ell: u64, h: u64) -> Result<Self> {
        if *lambda <= BigRational::from_integer(BigInt::from(2)) {
            return invalid(format!("λ = {lambda} must exceed 2"));
        }
        let pw = rational_pow(lambda, 2 * ell);
        let cap = pw.numer() / pw.denom();
        Ok(Self { lambda: lambda.clone(), ell, h, cap })
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn h(&self) -> u64 {
        self.h
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn norm_sq_cap(&self) -> &BigInt {
        &self.cap
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        g.k.unsigned_abs() <= self.h && norm_sq(&g.x) <= self.cap
    }
}

pub fn box_membership(bx: &BoxSet, g: &GroupElement) -> bool {
    bx.contains(g)
}

/// Smallest `(ℓ, h)`, each at least `min`, with every element of `set` in `B(ℓ, h)`.
pub fn enclosing_box(lambda: &BigRational, set: &ElementSet, min: u64) -> Result<(u64, u64)> {
    let h = set.iter().map(|g| g.k.unsigned_abs()).max().unwrap_or(0).max(min);
    let max_sq = set.iter().map(|g| norm_sq(&g.x)).max().unwrap_or_default();
    let mut ell = min;
    loop {
        if BoxSet::new(lambda, ell, h)?.cap >= max_sq {
            return Ok((ell, h));
        }
        ell += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaChoice {
    #[serde(serialize_with = "ser_rational")]
    pub lambda: BigRational,
    pub lambda_f64: f64,
    /// Largest `i` for which `‖A^{±i} v‖ < λ^i` was checked directly; larger
    /// `i` follow from `‖A^{±1}‖ < λ`.
    pub powers_checked: u32,
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// `√p + √q < c`, exactly.
fn sqrt_sum_below(p: &BigInt, q: &BigInt, c: &BigRational) -> bool {
    if !c.is_positive() {
        return false;
    }
    let p = BigRational::from_integer(p.clone());
    let q = BigRational::from_integer(q.clone());
    let t = c * c - &p - &q;
    t.is_positive() && BigRational::from_integer(BigInt::from(4)) * p * q < &t * &t
}

fn lambda_conditions_hold(a: &ToralMatrix, phi: &GroupAutomorphism, lambda: &BigRational, powers: u32) -> bool {
    let two = BigRational::from_integer(BigInt::from(2));
    if *lambda <= two {
        return false;
    }
    let Some(b_inv) = phi.b().inverse_unimodular() else {
        return false;
    };
    for m in [a.matrix(), a.inverse(), phi.b(), &b_inv] {
        if !operator_norm_below(m, lambda) {
            return false;
        }
    }
    let v = phi.v();
    let one_plus = lambda + BigRational::one();
    for dir in [a.matrix(), a.inverse()] {
        let mut w: IntVector = dir.mul_vec(v);
        if !sqrt_sum_below(&norm_sq(v), &norm_sq(&w), &one_plus) {
            return false;
        }
        for i in 2..=powers {
            w = dir.mul_vec(&w);
            let bound = rational_pow(lambda, 2 * u64::from(i));
            if BigRational::from_integer(norm_sq(&w)) >= bound {
                return false;
            }
        }
    }
    true
}

/// The smallest multiple of 1/100 strictly above
/// `max(2, ‖A‖, ‖A⁻¹‖, ‖B‖, ‖B⁻¹‖, ‖v‖+‖A^{±1}v‖−1, max_i ‖A^{±i}v‖^{1/i})`,
/// with every condition then re-verified in exact arithmetic.
pub fn choose_lambda(a: &ToralMatrix, phi: &GroupAutomorphism, powers: u32) -> Result<LambdaChoice> {
    if phi.dim() != a.dim() {
        return invalid("automorphism and matrix dimensions differ");
    }
    let b_inv = phi.b().inverse_unimodular().ok_or_else(|| Error::InvalidArgument("B is not unimodular".into()))?;
    let v = phi.v();
    let v_norm = norm_f64(v);
    let mut floor =
        2.0_f64.max(a.op_norm()).max(a.op_norm_inv()).max(phi.b().operator_norm()).max(b_inv.operator_norm());
    for dir in [a.matrix(), a.inverse()] {
        let mut w = dir.mul_vec(v);
        floor = floor.max(v_norm + norm_f64(&w) - 1.0);
        for i in 2..=powers {
            w = dir.mul_vec(&w);
            floor = floor.max(norm_f64(&w).powf(1.0 / f64::from(i)));
        }
    }
    let first = (floor * LAMBDA_DENOMINATOR as f64).floor() as i64 + 1;
    for cents in (first..).take(1000) {
        let lambda = rational(cents, LAMBDA_DENOMINATOR);
        if lambda_conditions_hold(a, phi, &lambda, powers) {
            return Ok(LambdaChoice {
                lambda_f64: cents as f64 / LAMBDA_DENOMINATOR as f64,
                lambda,
                powers_checked: powers,
            });
        }
    }
    Err(Error::Violation(format!("no admissible λ found near {floor}")))
}

/// Lattice points of `B(ℓ, h)`: a few fixed points, uniform interior points,
/// and points of maximal norm along a random coordinate.
pub fn sample_box<R: Rng>(bx: &BoxSet, dim: usize, count: usize, rng: &mut R) -> Result<Vec<GroupElement>> {
    let radius = bx
        .cap
        .sqrt()
        .to_i64()
        .ok_or_else(|| Error::InvalidArgument("box too large to sample with 64-bit coordinates".into()))?;
    let h = i64::try_from(bx.h).map_err(|_| Error::InvalidArgument("h too large".into()))?;
    let mut out = vec![GroupElement::identity(dim), GroupElement::z_power(dim, h), GroupElement::z_power(dim, -h)];
    while out.len() < count {
        let boundary = out.len() % 2 == 1;
        let k = if boundary && rng.gen_bool(0.5) {
            if rng.gen_bool(0.5) {
                h
            } else {
                -h
            }
        } else {
            rng.gen_range(-h..=h)
        };
        let x = if boundary {
            boundary_point(&bx.cap, dim, radius, rng)
        } else {
            interior_point(&bx.cap, dim, radius, rng)
        };
        out.push(GroupElement::new(x, k));
    }
    out.truncate(count);
    Ok(out)
}

fn interior_point<R: Rng>(cap: &BigInt, dim: usize, radius: i64, rng: &mut R) -> IntVector {
    loop {
        let x: IntVector = (0..dim).map(|_| BigInt::from(rng.gen_range(-radius..=radius))).collect();
        if norm_sq(&x) <= *cap {
            return x;
        }
    }
}

fn boundary_point<R: Rng>(cap: &BigInt, dim: usize, radius: i64, rng: &mut R) -> IntVector {
    let free_axis = rng.gen_range(0..dim);
    loop {
        let mut x: IntVector = (0..dim)
            .map(|i| if i == free_axis { BigInt::zero() } else { BigInt::from(rng.gen_range(-radius..=radius)) })
            .collect();
        let used = norm_sq(&x);
        if used > *cap {
            continue;
        }
        let last = (cap - used).sqrt();
        x[free_axis] = if rng.gen_bool(0.5) { last } else { -last };
        return x;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InclusionReport {
    pub check: String,
    pub ell: u64,
    pub h: u64,
    pub n: u32,
    pub samples: usize,
    pub images_checked: usize,
    pub violations: Vec<String>,
}

impl InclusionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn run_inclusion<F>(
    check: &str,
    (ell, h, n): (u64, u64, u32),
    samples: &[GroupElement],
    target: &BoxSet,
    images: F,
) -> Result<InclusionReport>
where
    F: Fn(&GroupElement) -> Result<Vec<GroupElement>> + Sync,
{
    let per_sample: Vec<(usize, Vec<String>)> = samples
        .par_iter()
        .map(|g| {
            let imgs = images(g)?;
            let bad = imgs.iter().filter(|img| !target.contains(img)).map(|img| format!("{g} -> {img}")).collect();
            Ok((imgs.len(), bad))
        })
        .collect::<Result<_>>()?;
    let images_checked = per_sample.iter().map(|(c, _)| c).sum();
    let violations = per_sample.into_iter().flat_map(|(_, v)| v).collect();
    Ok(InclusionReport { check: check.to_string(), ell, h, n, samples: samples.len(), images_checked, violations })
}

/// Checks `U_1(B(ℓ,h)) ⊂ B(ℓ+h, h+1)` on sampled elements and every generator.
pub fn check_box_inclusion_u1<R: Rng>(
    ctx: &GroupContext,
    gens: &GeneratingSet,
    lambda: &BigRational,
    ell: u64,
    h: u64,
    samples: usize,
    rng: &mut R,
) -> Result<InclusionReport> {
    if ell < 1 || h < 1 {
        return invalid("the one-step inclusion needs ℓ, h ≥ 1");
    }
    let source = BoxSet::new(lambda, ell, h)?;
    let target = BoxSet::new(lambda, ell + h, h + 1)?;
    let points = sample_box(&source, ctx.dim(), samples, rng)?;
    run_inclusion("U1", (ell, h, 1), &points, &target, |g| {
        Ok(gens.generators().iter().map(|s| gens.right_multiply(ctx, g, s)).collect())
    })
}

/// Checks `U_N(B(ℓ,h)) ⊂ B(ℓ + N(h+N), h+N)`; every sample's full `U_N` is expanded.
#[allow(clippy::too_many_arguments)]
pub fn check_box_inclusion_un<R: Rng>(
    ctx: &GroupContext,
    gens: &GeneratingSet,
    lambda: &BigRational,
    ell: u64,
    h: u64,
    n: u32,
    samples: usize,
    rng: &mut R,
) -> Result<InclusionReport> {
    if ell < 1 || h < 1 {
        return invalid("the N-step inclusion needs ℓ, h ≥ 1");
    }
    let big_n = u64::from(n);
    let source = BoxSet::new(lambda, ell, h)?;
    let target = BoxSet::new(lambda, ell + big_n * (h + big_n), h + big_n)?;
    let points = sample_box(&source, ctx.dim(), samples, rng)?;
    run_inclusion("UN", (ell, h, n), &points, &target, |g| {
        let start: ElementSet = std::iter::once(g.clone()).collect();
        Ok(neighborhood(ctx, gens, &start, n, usize::MAX)?.sorted())
    })
}

/// Checks `φ(B(ℓ,h)) ⊂ B(ℓ+h, h+1)` for `ℓ, h ≥ 2`.
pub fn check_phi_inclusion<R: Rng>(
    ctx: &GroupContext,
    phi: &GroupAutomorphism,
    lambda: &BigRational,
    ell: u64,
    h: u64,
    samples: usize,
    rng: &mut R,
) -> Result<InclusionReport> {
    if ell < 2 || h < 2 {
        return invalid("the automorphism inclusion needs ℓ, h ≥ 2");
    }
    let source = BoxSet::new(lambda, ell, h)?;
    let target = BoxSet::new(lambda, ell + h, h + 1)?;
    let points = sample_box(&source, ctx.dim(), samples, rng)?;
    run_inclusion("phi", (ell, h, 0), &points, &target, |g| Ok(vec![apply_automorphism(ctx, phi, g)?]))
}

/// `‖M‖ < λ` for an integer matrix, exactly; re-exported for reports.
pub fn norm_below(m: &IntMatrix, lambda: &BigRational) -> bool {
    operator_norm_below(m, lambda)
}
