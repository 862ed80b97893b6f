//! Three operations for the static demo page in `www/`: a word-metric ball
//! census, the growth contrast between G_A and Z², and a Lyapunov trace for
//! the sheared cat map. Each has a plain Rust form, tested natively, and a
//! wasm-bindgen wrapper that returns JSON.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use unstretch_core::dynamics::GrowthPoint;
use unstretch_core::lyapunov::{cocycle_segment, uniform_points};
use unstretch_core::matrix::int_vector;
use unstretch_core::metric::CensusRow;
use unstretch_core::{
    abelian_control, classify_growth, run_iteration, word_ball, DirectionField, ElementSet, Error, GeneratingSet,
    GroupAutomorphism, GroupContext, GroupElement, IntMatrix, IterationConfig, ToralMatrix, ToyMap, Verdict,
};
use wasm_bindgen::prelude::*;

/// Keeps the page responsive: the cat-map ball at radius 11 has about 68k elements.
pub const MAX_CENSUS_RADIUS: u32 = 11;
pub const MAX_CONTRAST_STEPS: u32 = 6;
pub const MAX_TRACE_STEPS: usize = 20_000;
const BUDGET: usize = 3_000_000;

#[derive(Serialize)]
pub struct Census {
    pub rows: Vec<CensusRow>,
    pub spectral_radius: f64,
}

pub fn census(rows: &[Vec<i64>], radius: u32) -> Result<Census, Error> {
    if radius > MAX_CENSUS_RADIUS {
        return Err(Error::InvalidArgument(format!("radius is capped at {MAX_CENSUS_RADIUS} in the browser")));
    }
    let a = ToralMatrix::new(IntMatrix::from_rows(rows)?)?;
    let spectral_radius = a.spectral_radius();
    let ctx = GroupContext::new(a);
    let oracle = word_ball(&ctx, &GeneratingSet::standard(ctx.dim()), radius, BUDGET)?;
    Ok(Census { rows: oracle.census(), spectral_radius })
}

#[derive(Serialize)]
pub struct Contrast {
    pub group: Vec<GrowthPoint>,
    pub group_verdict: Verdict,
    pub control: Vec<GrowthPoint>,
    pub control_verdict: Verdict,
}

/// Cat-map set dynamics from `{e, z, e_1}` under `φ = (−I, 0, +1)` with
/// `N = 1`, next to the Z² control `{0, e_1}` under `x ↦ Ax`.
pub fn growth_contrast(k_max: u32) -> Result<Contrast, Error> {
    if k_max > MAX_CONTRAST_STEPS {
        return Err(Error::InvalidArgument(format!("steps are capped at {MAX_CONTRAST_STEPS} in the browser")));
    }
    let a = ToralMatrix::cat_map();
    let ctx = GroupContext::new(a.clone());
    let gens = GeneratingSet::standard(2);
    let minus_i = IntMatrix::from_rows(&[vec![-1, 0], vec![0, -1]])?;
    let phi = GroupAutomorphism::new(minus_i, int_vector(&[0, 0]), 1)?;
    let start: ElementSet =
        [GroupElement::identity(2), GroupElement::z_power(2, 1), GroupElement::from_i64(&[1, 0], 0)]
            .into_iter()
            .collect();
    let config = IterationConfig::new(&ctx, phi, 1, start, k_max, BUDGET)?;
    // Diameters grow by 2 per step here, so this radius keeps them exact.
    let oracle = word_ball(&ctx, &gens, 2 * k_max + 3, BUDGET)?;
    let group = run_iteration(&ctx, &gens, &oracle, &config)?.curve;
    let control = abelian_control(&a, 1, &[vec![0, 0], vec![1, 0]], 2 * k_max, BUDGET)?;
    Ok(Contrast {
        group_verdict: classify_growth(&group).verdict,
        group: group.points,
        control_verdict: classify_growth(&control).verdict,
        control: control.points,
    })
}

#[derive(Serialize)]
pub struct Trace {
    pub start: Vec<f64>,
    /// Running finite-time exponent after each step.
    pub running: Vec<f64>,
    /// `log((3+√5)/2)`, the exponent of the unperturbed map.
    pub reference: f64,
}

/// Unstable-direction trace for `g = S ∘ A` with `S(y) = y + c sin(2π y_2) e_1`.
pub fn lyapunov_trace(shear: f64, n: usize, seed: u64) -> Result<Trace, Error> {
    if n == 0 || n > MAX_TRACE_STEPS {
        return Err(Error::InvalidArgument(format!("steps must lie in 1..={MAX_TRACE_STEPS}")));
    }
    let a = ToralMatrix::cat_map();
    let map = ToyMap::shear(&a, vec![shear])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: DVector<f64> = uniform_points(2, 1, &mut rng).remove(0);
    let u = DirectionField::Unstable { steps: 40 }.at(&map, &x)?;
    let seg = cocycle_segment(&map, &x, &u, n)?;
    let mut total = 0.0;
    let running = seg
        .log_stretches
        .iter()
        .enumerate()
        .map(|(i, l)| {
            total += l;
            total / (i + 1) as f64
        })
        .collect();
    Ok(Trace { start: x.as_slice().to_vec(), running, reference: a.spectral_radius().ln() })
}

fn to_js<T: Serialize>(r: Result<T, Error>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// `matrix` is JSON rows, e.g. `[[2,1],[1,1]]`.
#[wasm_bindgen(js_name = ballCensus)]
pub fn ball_census_js(matrix: &str, radius: u32) -> Result<String, JsError> {
    let rows: Vec<Vec<i64>> = serde_json::from_str(matrix).map_err(|e| JsError::new(&format!("matrix: {e}")))?;
    to_js(census(&rows, radius))
}

#[wasm_bindgen(js_name = growthContrast)]
pub fn growth_contrast_js(k_max: u32) -> Result<String, JsError> {
    to_js(growth_contrast(k_max))
}

#[wasm_bindgen(js_name = lyapunovTrace)]
pub fn lyapunov_trace_js(shear: f64, n: usize, seed: u64) -> Result<String, JsError> {
    to_js(lyapunov_trace(shear, n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_matches_known_sizes() {
        let c = census(&[vec![2, 1], vec![1, 1]], 4).unwrap();
        let sizes: Vec<usize> = c.rows.iter().map(|r| r.ball_size).collect();
        assert_eq!(sizes, [1, 7, 33, 103, 273]);
        assert!(census(&[vec![1, 1], vec![0, 1]], 2).is_err());
        assert!(census(&[vec![2, 1], vec![1, 1]], MAX_CENSUS_RADIUS + 1).is_err());
    }

    #[test]
    fn contrast_separates_the_two_curves() {
        let c = growth_contrast(5).unwrap();
        let diams: Vec<u64> = c.group.iter().map(|p| p.diam).collect();
        assert_eq!(diams, [2, 4, 6, 8, 10, 12]);
        assert!(c.group.iter().all(|p| p.diam_is_exact));
        assert!(matches!(c.control_verdict, Verdict::Exponential { .. }));
    }

    #[test]
    fn trace_is_reproducible_and_close_to_the_reference() {
        let a = lyapunov_trace(0.05, 2000, 1).unwrap();
        let b = lyapunov_trace(0.05, 2000, 1).unwrap();
        assert_eq!(a.running, b.running);
        assert!((a.running.last().unwrap() - a.reference).abs() < 0.05);
        assert!(lyapunov_trace(0.05, 0, 1).is_err());
    }
}
