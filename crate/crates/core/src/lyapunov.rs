//! Finite-time Lyapunov exponents along one-dimensional directions, the
//! center integral `∫ log ‖Dg|_{E^c}‖ dm`, and the Birkhoff comparison
//! between the two on small volume-preserving maps of the torus.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::group::ToralMatrix;

/// Tolerance for unit vectors and degenerate directions.
pub const DIRECTION_TOLERANCE: f64 = 1e-9;
/// Backward steps used to settle the unstable direction at a point.
pub const DEFAULT_SETTLE_STEPS: usize = 40;

/// Neumaier's compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

#[derive(Clone, Debug)]
pub enum ToyMap {
    /// `x ↦ Ax mod 1` on `T^d`.
    LinearToral { a: DMatrix<f64>, a_inv: DMatrix<f64> },
    /// Time-one map of the suspension flow on `T^d × [0,1] / (x,1) ~ (Ax,0)`:
    /// `(x, s) ↦ (Ax mod 1, s)`, the flow coordinate stored last.
    SuspensionTimeOne { a: DMatrix<f64>, a_inv: DMatrix<f64> },
    /// `g = S ∘ L` with `L(x) = Ax` and the shear `S(y) = y + h(y_d) e_1`,
    /// `h(t) = Σ_j c_j sin(2π j t)`. Shears have unit Jacobian.
    ShearPerturbed { a: DMatrix<f64>, a_inv: DMatrix<f64>, coeffs: Vec<f64> },
}

fn wrap(x: DVector<f64>) -> DVector<f64> {
    x.map(|c| c.rem_euclid(1.0))
}

impl ToyMap {
    pub fn linear(a: &ToralMatrix) -> Self {
        Self::LinearToral { a: a.matrix().to_f64(), a_inv: a.inverse().to_f64() }
    }

    pub fn suspension(a: &ToralMatrix) -> Self {
        Self::SuspensionTimeOne { a: a.matrix().to_f64(), a_inv: a.inverse().to_f64() }
    }

    pub fn shear(a: &ToralMatrix, coeffs: Vec<f64>) -> Result<Self> {
        if a.dim() < 2 {
            return invalid("the shear needs dimension at least 2");
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("shear coefficients must be finite");
        }
        Ok(Self::ShearPerturbed { a: a.matrix().to_f64(), a_inv: a.inverse().to_f64(), coeffs })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::LinearToral { a, .. } | Self::ShearPerturbed { a, .. } => a.nrows(),
            Self::SuspensionTimeOne { a, .. } => a.nrows() + 1,
        }
    }

    fn shear_terms(coeffs: &[f64], t: f64) -> (f64, f64) {
        coeffs.iter().enumerate().fold((0.0, 0.0), |(h, dh), (j, c)| {
            let w = TAU * (j + 1) as f64;
            (h + c * (w * t).sin(), dh + c * w * (w * t).cos())
        })
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::LinearToral { a, .. } => wrap(a * x),
            Self::SuspensionTimeOne { a, .. } => {
                let d = a.nrows();
                let mut y = x.clone();
                y.rows_mut(0, d).copy_from(&wrap(a * x.rows(0, d)));
                y
            }
            Self::ShearPerturbed { a, coeffs, .. } => {
                let mut y = a * x;
                let d = y.len();
                y[0] += Self::shear_terms(coeffs, y[d - 1]).0;
                wrap(y)
            }
        }
    }

    pub fn apply_inverse(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::LinearToral { a_inv, .. } => wrap(a_inv * x),
            Self::SuspensionTimeOne { a_inv, .. } => {
                let d = a_inv.nrows();
                let mut y = x.clone();
                y.rows_mut(0, d).copy_from(&wrap(a_inv * x.rows(0, d)));
                y
            }
            Self::ShearPerturbed { a_inv, coeffs, .. } => {
                let mut y = x.clone();
                let d = y.len();
                y[0] -= Self::shear_terms(coeffs, y[d - 1]).0;
                wrap(a_inv * y)
            }
        }
    }

    /// Jacobian at `x`, in closed form.
    pub fn differential(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Self::LinearToral { a, .. } => a.clone(),
            Self::SuspensionTimeOne { a, .. } => {
                let d = a.nrows();
                let mut m = DMatrix::identity(d + 1, d + 1);
                m.view_mut((0, 0), (d, d)).copy_from(a);
                m
            }
            Self::ShearPerturbed { a, coeffs, .. } => {
                let d = a.nrows();
                let y_last = (a.row(d - 1) * x)[0];
                let mut shear = DMatrix::identity(d, d);
                shear[(0, d - 1)] = Self::shear_terms(coeffs, y_last).1;
                shear * a
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum DirectionField {
    /// The same unit vector everywhere.
    Constant(DVector<f64>),
    /// The unstable line at `x`, found by pushing a fixed vector forward
    /// along the last `steps` points of the backward orbit of `x`.
    Unstable { steps: usize },
}

impl DirectionField {
    pub fn constant(v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < DIRECTION_TOLERANCE {
            return invalid("direction vector is degenerate");
        }
        Ok(Self::Constant(v / n))
    }

    /// The flow direction `∂_s` of a suspension of dimension `d`.
    pub fn flow_direction(d: usize) -> Self {
        let mut v = DVector::zeros(d + 1);
        v[d] = 1.0;
        Self::Constant(v)
    }

    pub fn at(&self, map: &ToyMap, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Self::Constant(v) => {
                if v.len() != map.dim() {
                    return invalid("direction and map dimensions differ");
                }
                Ok(v.clone())
            }
            Self::Unstable { steps } => {
                let mut back = Vec::with_capacity(*steps);
                let mut y = x.clone();
                for _ in 0..*steps {
                    y = map.apply_inverse(&y);
                    back.push(y.clone());
                }
                let mut u = DVector::from_element(map.dim(), 1.0 / (map.dim() as f64).sqrt());
                for p in back.iter().rev() {
                    u = map.differential(p) * u;
                    let n = u.norm();
                    if n < DIRECTION_TOLERANCE {
                        return Err(Error::InvalidArgument("direction collapsed while settling".into()));
                    }
                    u /= n;
                }
                Ok(u)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segment {
    /// Sum of the per-step log stretches.
    pub log_sum: f64,
    pub end_point: DVector<f64>,
    pub end_direction: DVector<f64>,
    pub log_stretches: Vec<f64>,
}

/// Runs the renormalized cocycle `n` steps from `(x, u)`.
pub fn cocycle_segment(map: &ToyMap, x: &DVector<f64>, u: &DVector<f64>, n: usize) -> Result<Segment> {
    let mut x = x.clone();
    let norm = u.norm();
    if norm < DIRECTION_TOLERANCE {
        return invalid("degenerate direction");
    }
    let mut u = u / norm;
    let mut logs = Vec::with_capacity(n);
    for _ in 0..n {
        let v = map.differential(&x) * &u;
        let stretch = v.norm();
        if !(stretch >= DIRECTION_TOLERANCE && stretch.is_finite()) {
            return invalid(format!("direction degenerated (stretch {stretch:e})"));
        }
        logs.push(stretch.ln());
        u = v / stretch;
        x = map.apply(&x);
    }
    Ok(Segment {
        log_sum: logs.iter().copied().collect::<CompensatedSum>().value(),
        end_point: x,
        end_direction: u,
        log_stretches: logs,
    })
}

/// `(1/n) Σ_{j<n} log ‖Df(x_j) u_j‖` with `u_0 = W(x)` and `u_j` renormalized.
pub fn finite_time_exponent(map: &ToyMap, field: &DirectionField, x: &DVector<f64>, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let u = field.at(map, x)?;
    Ok(cocycle_segment(map, x, &u, n)?.log_sum / n as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    /// One standard error.
    pub half_width: f64,
    pub n: usize,
}

fn mean_and_se(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value() / (n - 1) as f64
    } else {
        0.0
    };
    Estimate { estimate: mean, half_width: (var / n as f64).sqrt(), n }
}

pub fn uniform_points<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count).map(|_| DVector::from_fn(dim, |_, _| rng.gen::<f64>())).collect()
}

/// Monte Carlo estimate of `∫ log ‖Dg(x) E^c(x)‖ dm(x)` over uniform points.
pub fn center_integral<R: Rng>(map: &ToyMap, field: &DirectionField, samples: usize, rng: &mut R) -> Result<Estimate> {
    if samples < 1000 {
        return invalid("the center integral needs at least 1000 samples");
    }
    let points = uniform_points(map.dim(), samples, rng);
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let u = field.at(map, x)?;
            Ok((map.differential(x) * u).norm().ln())
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&values))
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub orbit_average: Estimate,
    pub space_average: Estimate,
    pub discrepancy: f64,
    pub combined_se: f64,
    /// Starting points and their finite-time exponents, in draw order.
    #[serde(skip)]
    pub per_start: Vec<(DVector<f64>, f64)>,
}

impl BirkhoffReport {
    /// `|discrepancy| ≤ k · combined standard error`, with a floor for
    /// integrands that are constant.
    pub fn consistent(&self, k: f64) -> bool {
        self.discrepancy.abs() <= k * self.combined_se + 1e-12
    }
}

/// Mean finite-time exponent over random starts against the center integral.
pub fn birkhoff_consistency<R: Rng>(
    map: &ToyMap,
    field: &DirectionField,
    starts: usize,
    n: usize,
    integral_samples: usize,
    rng: &mut R,
) -> Result<BirkhoffReport> {
    if starts < 2 {
        return invalid("need at least two starting points");
    }
    let points = uniform_points(map.dim(), starts, rng);
    let exps: Vec<f64> = points.par_iter().map(|x| finite_time_exponent(map, field, x, n)).collect::<Result<_>>()?;
    let orbit_average = mean_and_se(&exps);
    let space_average = center_integral(map, field, integral_samples, rng)?;
    Ok(BirkhoffReport {
        orbit_average,
        space_average,
        discrepancy: orbit_average.estimate - space_average.estimate,
        combined_se: orbit_average.half_width.hypot(space_average.half_width),
        per_start: points.into_iter().zip(exps).collect(),
    })
}

/// Largest `| |det Df(x)| − 1 |` over random points.
pub fn volume_defect<R: Rng>(map: &ToyMap, samples: usize, rng: &mut R) -> f64 {
    uniform_points(map.dim(), samples, rng)
        .iter()
        .map(|x| (map.differential(x).determinant().abs() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suspension::compute_splitting;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn golden_log() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    fn eigen_fields() -> (DirectionField, DirectionField) {
        let sp = compute_splitting(&ToralMatrix::cat_map()).unwrap();
        (
            DirectionField::constant(sp.unstable_basis().column(0).into_owned()).unwrap(),
            DirectionField::constant(sp.stable_basis().column(0).into_owned()).unwrap(),
        )
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn cat_map_exponents() {
        let map = ToyMap::linear(&ToralMatrix::cat_map());
        let (unstable, stable) = eigen_fields();
        let x = DVector::from_vec(vec![0.3, 0.7]);
        for n in [1, 10, 1000] {
            assert_abs_diff_eq!(finite_time_exponent(&map, &unstable, &x, n).unwrap(), golden_log(), epsilon = 1e-12);
        }
        // the stable direction is repelling for the forward cocycle, so keep n short
        assert_abs_diff_eq!(finite_time_exponent(&map, &stable, &x, 10).unwrap(), -golden_log(), epsilon = 1e-6);
        let settled = DirectionField::Unstable { steps: DEFAULT_SETTLE_STEPS };
        assert_abs_diff_eq!(finite_time_exponent(&map, &settled, &x, 100).unwrap(), golden_log(), epsilon = 1e-12);
        assert!(finite_time_exponent(&map, &unstable, &x, 0).is_err());
    }

    #[test]
    fn flow_direction_is_neutral() {
        let map = ToyMap::suspension(&ToralMatrix::cat_map());
        let w = DirectionField::flow_direction(2);
        let x = DVector::from_vec(vec![0.1, 0.2, 0.5]);
        assert_eq!(finite_time_exponent(&map, &w, &x, 500).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ci = center_integral(&map, &w, 1000, &mut rng).unwrap();
        assert_eq!((ci.estimate, ci.half_width), (0.0, 0.0));
    }

    #[test]
    fn constant_integrand_has_zero_width() {
        let map = ToyMap::linear(&ToralMatrix::cat_map());
        let (unstable, _) = eigen_fields();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ci = center_integral(&map, &unstable, 1000, &mut rng).unwrap();
        assert_abs_diff_eq!(ci.estimate, golden_log(), epsilon = 1e-12);
        assert!(ci.half_width < 1e-12);
        let rep = birkhoff_consistency(&map, &unstable, 10, 100, 1000, &mut rng).unwrap();
        assert!(rep.discrepancy.abs() < 1e-12 && rep.consistent(3.0));
        assert!(center_integral(&map, &unstable, 999, &mut rng).is_err());
    }

    #[test]
    fn cocycle_is_additive() {
        let map = ToyMap::shear(&ToralMatrix::cat_map(), vec![0.05, 0.01]).unwrap();
        let x = DVector::from_vec(vec![0.25, 0.6]);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let whole = cocycle_segment(&map, &x, &u, 50).unwrap();
        let first = cocycle_segment(&map, &x, &u, 20).unwrap();
        let second = cocycle_segment(&map, &first.end_point, &first.end_direction, 30).unwrap();
        assert_abs_diff_eq!(
            whole.log_sum / 50.0,
            (20.0 * (first.log_sum / 20.0) + 30.0 * (second.log_sum / 30.0)) / 50.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn time_reversal_for_linear_maps() {
        let a = ToralMatrix::cat_map();
        let fwd = ToyMap::linear(&a);
        let back = ToyMap::linear(&ToralMatrix::new(a.inverse().clone()).unwrap());
        let x = DVector::from_vec(vec![0.4, 0.1]);
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let n = 8;
        let seg = cocycle_segment(&fwd, &x, &u, n).unwrap();
        let rev = cocycle_segment(&back, &seg.end_point, &seg.end_direction, n).unwrap();
        assert_abs_diff_eq!(rev.log_sum / n as f64, -seg.log_sum / n as f64, epsilon = 1e-9);
    }

    #[test]
    fn shear_inverse_and_volume() {
        let map = ToyMap::shear(&ToralMatrix::cat_map(), vec![0.05, -0.02, 0.01]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in uniform_points(2, 200, &mut rng) {
            let back = map.apply_inverse(&map.apply(&x));
            let diff = (back - &x).map(|c| (c + 0.5).rem_euclid(1.0) - 0.5);
            assert!(diff.norm() < 1e-12);
        }
        assert!(volume_defect(&map, 1000, &mut rng) <= 1e-10);
        assert!(volume_defect(&ToyMap::suspension(&ToralMatrix::cat_map()), 1000, &mut rng) <= 1e-10);
    }

    #[test]
    fn shear_differential_matches_finite_differences() {
        let map = ToyMap::shear(&ToralMatrix::cat_map(), vec![0.05, 0.03]).unwrap();
        // stay away from wrap-around so the lift is smooth
        let x = DVector::from_vec(vec![0.11, 0.07]);
        let lift = |p: &DVector<f64>| {
            let ToyMap::ShearPerturbed { a, coeffs, .. } = &map else { unreachable!() };
            let mut y = a * p;
            y[0] += ToyMap::shear_terms(coeffs, y[1]).0;
            y
        };
        let j = map.differential(&x);
        let h = 1e-6;
        for c in 0..2 {
            let mut e = DVector::zeros(2);
            e[c] = h;
            let fd = (lift(&(&x + &e)) - lift(&(&x - &e))) / (2.0 * h);
            assert!((fd - j.column(c)).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_degenerate_directions() {
        assert!(DirectionField::constant(DVector::zeros(2)).is_err());
        let map = ToyMap::linear(&ToralMatrix::cat_map());
        let w = DirectionField::flow_direction(2);
        assert!(w.at(&map, &DVector::zeros(2)).is_err());
    }
}
