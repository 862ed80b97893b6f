//! Geometry of the suspension `M̃ = R^d × R`: the stable/unstable splitting
//! of `A`, the logarithmic upper bound on distance to the origin, and its
//! comparison against exact word lengths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{linear_fit, LinearFit};
use crate::error::{Error, Result};
use crate::group::{GroupElement, ToralMatrix};
use crate::matrix::operator_norm;
use crate::metric::WordLengthOracle;

/// Tolerance on linear-algebra residuals.
pub const LINEAR_TOLERANCE: f64 = 1e-9;
/// Safety margin subtracted from the slowest exponent.
pub const SIGMA_MARGIN: f64 = 1e-6;
/// Additive slack in [`log_distance_bound`], one unit per leafwise estimate.
pub const C0: f64 = 2.0;

const MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct HyperbolicSplitting {
    stable_basis: DMatrix<f64>,
    unstable_basis: DMatrix<f64>,
    sigma: f64,
    proj_s: DMatrix<f64>,
    proj_u: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverPoint<'a> {
    pub x: &'a [f64],
    pub s: f64,
}

/// Orthonormal basis of the dominant `m`-dimensional invariant subspace of `m_op`.
fn dominant_subspace(m_op: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    let d = m_op.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = DMatrix::from_fn(d, m, |_, _| rng.gen_range(-1.0..1.0));
    let mut q = start.qr().q();
    for _ in 0..MAX_ITERATIONS {
        let next = (m_op * &q).qr().q();
        let moved = (&next * next.transpose() - &q * q.transpose()).norm();
        q = next;
        if moved < 1e-14 {
            break;
        }
    }
    let residual = (DMatrix::identity(d, d) - &q * q.transpose()) * m_op * &q;
    if residual.norm() > LINEAR_TOLERANCE * operator_norm(m_op).max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "invariant subspace did not converge (residual {:.2e})",
            residual.norm()
        )));
    }
    Ok(q)
}

/// Splits `R^d = E^s ⊕ E^u`. The unstable space is the dominant invariant
/// subspace of `A` and the stable one that of `A⁻¹`; both are found by
/// orthogonal iteration, which also covers complex eigenvalue pairs.
pub fn compute_splitting(a: &ToralMatrix) -> Result<HyperbolicSplitting> {
    let d = a.dim();
    let n_s = a.eigen().iter().filter(|e| e.is_stable).count();
    let n_u = d - n_s;
    let m = a.matrix().to_f64();
    let m_inv = a.inverse().to_f64();
    let stable_basis = dominant_subspace(&m_inv, n_s, 1)?;
    let unstable_basis = dominant_subspace(&m, n_u, 2)?;

    let mut v = DMatrix::zeros(d, d);
    v.columns_mut(0, n_s).copy_from(&stable_basis);
    v.columns_mut(n_s, n_u).copy_from(&unstable_basis);
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("stable and unstable spaces are not transverse".into()))?;
    let pick = |range: std::ops::Range<usize>| {
        let mut diag = DMatrix::zeros(d, d);
        for i in range {
            diag[(i, i)] = 1.0;
        }
        &v * diag * &v_inv
    };
    let sigma = a.eigen().iter().map(|e| e.modulus.ln().abs()).fold(f64::INFINITY, f64::min) - SIGMA_MARGIN;
    Ok(HyperbolicSplitting { proj_s: pick(0..n_s), proj_u: pick(n_s..d), stable_basis, unstable_basis, sigma })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplittingResiduals {
    /// `‖P_s + P_u − I‖`
    pub sum_to_identity: f64,
    /// `max(‖A P_s − P_s A‖, ‖A P_u − P_u A‖)`
    pub commutes_with_a: f64,
    /// Largest `‖A u‖ / e^{−σ}` over stable basis vectors and `‖A⁻¹ u‖ / e^{−σ}` over unstable ones.
    pub basis_contraction: f64,
}

impl SplittingResiduals {
    pub fn passed(&self) -> bool {
        self.sum_to_identity <= LINEAR_TOLERANCE
            && self.commutes_with_a <= LINEAR_TOLERANCE
            && self.basis_contraction <= 1.0 + LINEAR_TOLERANCE
    }
}

impl HyperbolicSplitting {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.proj_s.nrows()
    }

    pub fn stable_basis(&self) -> &DMatrix<f64> {
        &self.stable_basis
    }

    pub fn unstable_basis(&self) -> &DMatrix<f64> {
        &self.unstable_basis
    }

    pub fn stable_projection(&self) -> &DMatrix<f64> {
        &self.proj_s
    }

    pub fn unstable_projection(&self) -> &DMatrix<f64> {
        &self.proj_u
    }

    pub fn residuals(&self, a: &ToralMatrix) -> SplittingResiduals {
        let d = self.dim();
        let m = a.matrix().to_f64();
        let m_inv = a.inverse().to_f64();
        let sum_to_identity = (&self.proj_s + &self.proj_u - DMatrix::identity(d, d)).norm();
        let commutes_with_a =
            (&m * &self.proj_s - &self.proj_s * &m).norm().max((&m * &self.proj_u - &self.proj_u * &m).norm());
        let rate = (-self.sigma).exp();
        let worst = |op: &DMatrix<f64>, basis: &DMatrix<f64>| {
            basis.column_iter().map(|u| (op * u).norm() / u.norm() / rate).fold(0.0, f64::max)
        };
        let basis_contraction = worst(&m, &self.stable_basis).max(worst(&m_inv, &self.unstable_basis));
        SplittingResiduals { sum_to_identity, commutes_with_a, basis_contraction }
    }
}

fn log_plus(t: f64) -> f64 {
    if t > 1.0 {
        t.ln()
    } else {
        0.0
    }
}

/// `(2/σ)·log⁺‖x_s‖ + (2/σ)·log⁺‖x_u‖ + |s| + c₀`, an upper bound for the
/// distance from `(x, s)` to the origin of `M̃`.
pub fn log_distance_bound(split: &HyperbolicSplitting, p: CoverPoint<'_>) -> f64 {
    let x = DVector::from_column_slice(p.x);
    let xs = (&split.proj_s * &x).norm();
    let xu = (&split.proj_u * &x).norm();
    2.0 / split.sigma * (log_plus(xs) + log_plus(xu)) + p.s.abs() + C0
}

/// `i(x·z^k) = (x, k)`, with coordinates rounded to `f64`.
pub fn cover_coordinates(g: &GroupElement) -> (Vec<f64>, f64) {
    let x = g.x.iter().map(|c| num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::INFINITY)).collect();
    (x, g.k as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QiRow {
    pub word_length: u32,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QiReport {
    pub radius: u32,
    pub entries: usize,
    /// Smallest `Q` with `word length ≤ Q·bound + Q` on every entry.
    pub q_hat: f64,
    /// Least-squares fit of word length on the bound.
    pub regression: LinearFit,
    /// Largest `word length / bound`.
    pub max_ratio: f64,
    pub violations: usize,
    #[serde(skip)]
    pub rows: Vec<QiRow>,
}

impl QiReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares every exact word length in the oracle with the cover-distance
/// bound of its image.
pub fn qi_comparison(oracle: &WordLengthOracle, split: &HyperbolicSplitting) -> Result<QiReport> {
    if oracle.radius() < 6 {
        return Err(Error::InsufficientData(format!("oracle radius {} is below 6", oracle.radius())));
    }
    if oracle.dim() != split.dim() {
        return Err(Error::InvalidArgument("oracle and splitting dimensions differ".into()));
    }
    let rows: Vec<QiRow> = oracle
        .entries()
        .par_iter()
        .map(|(g, wl)| {
            let (x, s) = cover_coordinates(g);
            let bound = log_distance_bound(split, CoverPoint { x: &x, s });
            QiRow { word_length: *wl, bound, ratio: f64::from(*wl) / bound }
        })
        .collect();
    let q_hat = rows.iter().map(|r| f64::from(r.word_length) / (r.bound + 1.0)).fold(0.0, f64::max);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let xs: Vec<f64> = rows.iter().map(|r| r.bound).collect();
    let ys: Vec<f64> = rows.iter().map(|r| f64::from(r.word_length)).collect();
    let regression = linear_fit(&xs, &ys).ok_or_else(|| Error::InsufficientData("degenerate regression".into()))?;
    // q_hat is attained, so allow for the rounding of one multiplication
    let violations = rows.iter().filter(|r| f64::from(r.word_length) > q_hat * r.bound + q_hat + 1e-9).count();
    Ok(QiReport { radius: oracle.radius(), entries: rows.len(), q_hat, regression, max_ratio, violations, rows })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContractionCertificate {
    pub samples: usize,
    pub t_max: u32,
    /// Largest `‖A^t u‖ / e^{−σt}` seen.
    pub worst_ratio: f64,
}

impl ContractionCertificate {
    pub fn passed(&self, slack: f64) -> bool {
        self.worst_ratio <= slack
    }
}

/// Samples unit vectors in `E^s` and checks `‖A^t u‖ ≤ e^{−σt}` up to `t_max`.
///
/// Powers are taken of `A` restricted to `E^s`, written in the orthonormal
/// stable basis. Iterating `A` on `R^d` directly would let rounding noise in
/// the unstable direction dominate after a few steps.
pub fn contraction_certificate<R: Rng>(
    a: &ToralMatrix,
    split: &HyperbolicSplitting,
    samples: usize,
    t_max: u32,
    rng: &mut R,
) -> ContractionCertificate {
    let basis = &split.stable_basis;
    let restricted = basis.transpose() * a.matrix().to_f64() * basis;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut c = DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        let n = c.norm();
        if n == 0.0 {
            continue;
        }
        c /= n;
        for t in 1..=t_max {
            c = &restricted * c;
            worst = worst.max(c.norm() / (-split.sigma * f64::from(t)).exp());
        }
    }
    ContractionCertificate { samples, t_max, worst_ratio: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupContext;
    use crate::matrix::IntMatrix;
    use crate::metric::{word_ball, GeneratingSet, DEFAULT_ELEMENT_BUDGET};
    use approx::assert_abs_diff_eq;

    fn golden_log() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn cat_map_splitting() {
        let a = ToralMatrix::cat_map();
        let sp = compute_splitting(&a).unwrap();
        assert_abs_diff_eq!(sp.sigma(), golden_log() - SIGMA_MARGIN, epsilon = 1e-12);
        // E^u is the eigenline of (3+√5)/2: direction (1, (√5−1)/2)
        let u = sp.unstable_basis().column(0);
        let slope = u[1] / u[0];
        assert_abs_diff_eq!(slope, (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
        let s = sp.stable_basis().column(0);
        assert_abs_diff_eq!(s[1] / s[0], -(5f64.sqrt() + 1.0) / 2.0, epsilon = 1e-10);
        let res = sp.residuals(&a);
        assert!(res.passed(), "{res:?}");
    }

    #[test]
    fn block_diagonal_has_same_sigma() {
        let a = ToralMatrix::new(
            IntMatrix::from_rows(&[vec![2, 1, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 2, 1], vec![0, 0, 1, 1]]).unwrap(),
        )
        .unwrap();
        let sp = compute_splitting(&a).unwrap();
        assert_abs_diff_eq!(sp.sigma(), golden_log() - SIGMA_MARGIN, epsilon = 1e-12);
        assert_eq!(sp.stable_basis().ncols(), 2);
        assert!(sp.residuals(&a).passed());
    }

    #[test]
    fn complex_pair_in_three_dimensions() {
        // characteristic polynomial t³ − t − 1: one real root ≈ 1.3247 and a complex
        // pair of modulus ≈ 0.8688 inside the unit circle
        let a =
            ToralMatrix::new(IntMatrix::from_rows(&[vec![0, 0, 1], vec![1, 0, 1], vec![0, 1, 0]]).unwrap()).unwrap();
        let sp = compute_splitting(&a).unwrap();
        assert_eq!(sp.stable_basis().ncols(), 2);
        let res = sp.residuals(&a);
        assert!(res.sum_to_identity < LINEAR_TOLERANCE && res.commutes_with_a < LINEAR_TOLERANCE, "{res:?}");
        let plastic: f64 = 1.324_717_957_244_746;
        assert_abs_diff_eq!(sp.sigma(), (1.0 / plastic.sqrt()).ln().abs() - SIGMA_MARGIN, epsilon = 1e-9);
    }

    #[test]
    fn bound_examples() {
        let sp = compute_splitting(&ToralMatrix::cat_map()).unwrap();
        assert_eq!(log_distance_bound(&sp, CoverPoint { x: &[0.0, 0.0], s: 0.0 }), C0);
        let s_dir = sp.stable_basis().column(0).into_owned() * sp.sigma().exp();
        let on_leaf = log_distance_bound(&sp, CoverPoint { x: s_dir.as_slice(), s: 0.0 });
        assert_abs_diff_eq!(on_leaf, 2.0 + C0, epsilon = 1e-12);
        let u_dir = sp.unstable_basis().column(0).into_owned() * 5.0;
        let once = log_distance_bound(&sp, CoverPoint { x: u_dir.as_slice(), s: 1.5 });
        let twice = log_distance_bound(&sp, CoverPoint { x: (u_dir * 2.0).as_slice(), s: 1.5 });
        assert_abs_diff_eq!(twice - once, 2.0 / sp.sigma() * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(once, 2.0 / sp.sigma() * 5f64.ln() + 1.5 + C0, epsilon = 1e-12);
    }

    #[test]
    fn stable_vectors_contract() {
        let a = ToralMatrix::cat_map();
        let sp = compute_splitting(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cert = contraction_certificate(&a, &sp, 1000, 20, &mut rng);
        assert!(cert.passed(1.01), "{cert:?}");
    }

    #[test]
    fn qi_on_small_table() {
        let ctx = GroupContext::new(ToralMatrix::cat_map());
        let gens = GeneratingSet::standard(2);
        let oracle = word_ball(&ctx, &gens, 8, DEFAULT_ELEMENT_BUDGET).unwrap();
        let sp = compute_splitting(ctx.toral()).unwrap();
        let r = qi_comparison(&oracle, &sp).unwrap();
        assert!(r.passed());
        assert_eq!(r.entries, oracle.len());
        assert!(r.q_hat > 0.0 && r.q_hat.is_finite());
        let small = word_ball(&ctx, &gens, 5, DEFAULT_ELEMENT_BUDGET).unwrap();
        assert!(matches!(qi_comparison(&small, &sp), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn conjugated_lattice_vectors_have_logarithmic_length() {
        // (A^k e₁, 0) = z^k e₁ z^{-k} has word length at most 2k + 1 while its norm grows like e^{σk}
        let ctx = GroupContext::new(ToralMatrix::cat_map());
        let gens = GeneratingSet::standard(2);
        let oracle = word_ball(&ctx, &gens, 11, DEFAULT_ELEMENT_BUDGET).unwrap();
        let mut x = (1i64, 0i64);
        let mut last = f64::INFINITY;
        for k in 1..=5 {
            x = (2 * x.0 + x.1, x.0 + x.1);
            let wl = oracle.word_length(&GroupElement::from_i64(&[x.0, x.1], 0)).exact().unwrap();
            assert!(wl <= 2 * k + 1);
            let ratio = f64::from(wl) / ((x.0 * x.0 + x.1 * x.1) as f64).sqrt().ln();
            // 3.73, 2.84, 2.57, ... decreasing toward 2/σ
            assert!(ratio < 4.0 && ratio <= last, "k={k} wl={wl} ratio={ratio}");
            last = ratio;
        }
    }
}
