//! The nine experiments. Each one validates its inputs completely in
//! `prepare`, before any heavy computation, and then produces CSV tables and
//! a JSON results object.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use unstretch_core::boxes::{
    check_box_inclusion_u1, check_box_inclusion_un, check_phi_inclusion, choose_lambda, DEFAULT_LAMBDA_POWERS,
};
use unstretch_core::dynamics::Classification;
use unstretch_core::lyapunov::{cocycle_segment, uniform_points, volume_defect};
use unstretch_core::matrix::IntVector;
use unstretch_core::suspension::contraction_certificate;
use unstretch_core::{
    abelian_control, birkhoff_consistency, classify_growth, compute_splitting, enumerate_commuting_matrices,
    qi_comparison, run_iteration, validate_automorphism, word_ball, DirectionField, ElementSet, Error, GeneratingSet,
    GroupAutomorphism, GroupContext, GroupElement, GrowthCurve, IntMatrix, IterationConfig, ToralMatrix, ToyMap,
    Verdict, WordLength, WordLengthOracle,
};

use crate::config::{DirectionKind, ExperimentConfig, MapKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunError {
    Validation(String),
    Budget(String),
    Violation(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Budget(_) => 3,
            RunError::Violation(_) => 4,
            RunError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Validation(m) | RunError::Budget(m) | RunError::Violation(m) | RunError::Io(m) => m,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InsufficientData(_) => RunError::Validation(e.to_string()),
            Error::BudgetExceeded { .. } => RunError::Budget(e.to_string()),
            Error::Violation(_) => RunError::Violation(e.to_string()),
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Validation(msg.into()))
}

pub struct Table {
    pub file: String,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    pub tables: Vec<Table>,
    pub results: Value,
    pub verdicts: BTreeMap<String, String>,
    /// Set when the run finished early or a certified check failed; outputs are still written.
    pub status: Option<RunError>,
}

impl Outcome {
    pub fn partial(&self) -> bool {
        matches!(self.status, Some(RunError::Budget(_)))
    }
}

fn csv_table<T: Serialize>(file: &str, rows: &[T]) -> Result<Table, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| RunError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Table { file: file.to_string(), bytes })
}

fn toral(cfg: &ExperimentConfig) -> Result<ToralMatrix, RunError> {
    let m = IntMatrix::from_rows(&cfg.group.matrix).map_err(|e| RunError::Validation(e.to_string()))?;
    Ok(ToralMatrix::new(m)?)
}

fn automorphism(cfg: &ExperimentConfig, a: &ToralMatrix) -> Result<GroupAutomorphism, RunError> {
    let Some(sec) = &cfg.automorphism else {
        return Ok(GroupAutomorphism::identity(a.dim()));
    };
    let b = IntMatrix::from_rows(&sec.b).map_err(|e| RunError::Validation(e.to_string()))?;
    let v: IntVector = sec.v.iter().map(|&c| c.into()).collect();
    let phi = GroupAutomorphism::new(b, v, sec.e)?;
    if let Some(why) = validate_automorphism(a, &phi)?.reason() {
        return invalid(format!("automorphism is invalid: {why}"));
    }
    Ok(phi)
}

fn element(row: &[i64], d: usize) -> Result<GroupElement, RunError> {
    if row.len() != d + 1 {
        return invalid(format!("element {row:?} should have {} entries (x then k)", d + 1));
    }
    Ok(GroupElement::from_i64(&row[..d], row[d]))
}

fn oracle(
    ctx: &GroupContext,
    gens: &GeneratingSet,
    radius: u32,
    budget: usize,
) -> Result<(WordLengthOracle, bool), RunError> {
    match word_ball(ctx, gens, radius, budget) {
        Ok(o) => Ok((o, false)),
        Err(Error::BudgetExceeded { completed: Some(r), .. }) => Ok((word_ball(ctx, gens, r, budget)?, true)),
        Err(e) => Err(e.into()),
    }
}

fn classification_json(c: &Classification) -> Value {
    serde_json::to_value(c).expect("classification serializes")
}

fn verdict_name(v: &Verdict) -> String {
    match v {
        Verdict::Polynomial { degree } => format!("polynomial (degree {degree:.3})"),
        Verdict::Exponential { rate } => format!("exponential (rate {rate:.4})"),
        Verdict::Inconclusive { reason } => format!("inconclusive: {reason}"),
    }
}

/// A fully validated run, ready to execute.
enum Plan {
    Census { ctx: GroupContext, radius: u32, budget: usize },
    WordLength { ctx: GroupContext, radius: u32, budget: usize, elements: Vec<GroupElement> },
    Boxes { ctx: GroupContext, phi: GroupAutomorphism },
    Dynamics { ctx: GroupContext, config: IterationConfig, radius: u32, budget: usize },
    Control { a: ToralMatrix, n: u32, start: Vec<Vec<i64>>, k_max: u32, budget: usize },
    Qi { ctx: GroupContext, radii: Vec<u32>, budget: usize },
    Centralizer { a: ToralMatrix, bound: u32, signs: Vec<i8>, budget: usize },
    Lyapunov { a: ToralMatrix, map: ToyMap, field: DirectionField, reversed: bool, start: Option<DVector<f64>> },
    Birkhoff { map: ToyMap, field: DirectionField },
}

/// The map to iterate, the direction field, and whether the exponent is
/// taken under the inverse map and negated.
///
/// Stable exponents of linear maps use `λ_f(E^s) = −λ_{f⁻¹}(E^s)`: the
/// forward cocycle along `E^s` loses the direction to rounding noise within
/// a few dozen steps, while `f⁻¹` expands it.
fn lyapunov_inputs(cfg: &ExperimentConfig, a: &ToralMatrix) -> Result<(ToyMap, DirectionField, bool), RunError> {
    let ly = &cfg.lyapunov;
    let d = a.dim();
    let reversed = ly.direction == DirectionKind::Stable && ly.map != MapKind::UserPerturbation;
    let base = if reversed { ToralMatrix::new(a.inverse().clone())? } else { a.clone() };
    let map = match ly.map {
        MapKind::LinearToral => ToyMap::linear(&base),
        MapKind::SuspensionTimeOne => ToyMap::suspension(&base),
        MapKind::UserPerturbation => ToyMap::shear(a, ly.shear.clone())?,
    };
    let eigenline = |unstable: bool| -> Result<DirectionField, RunError> {
        let split = compute_splitting(a)?;
        let basis = if unstable { split.unstable_basis() } else { split.stable_basis() };
        let mut v = DVector::zeros(map.dim());
        v.rows_mut(0, d).copy_from(&basis.column(0));
        Ok(DirectionField::constant(v)?)
    };
    let field = match (ly.map, ly.direction) {
        (MapKind::UserPerturbation, DirectionKind::Unstable) => {
            if ly.settle_steps == 0 {
                return invalid("lyapunov.settle_steps must be positive");
            }
            DirectionField::Unstable { steps: ly.settle_steps }
        }
        (MapKind::UserPerturbation, k) => {
            return invalid(format!("direction {k:?} is not available for user_perturbation"))
        }
        (MapKind::SuspensionTimeOne, DirectionKind::Flow) => DirectionField::flow_direction(d),
        (_, DirectionKind::Flow) => return invalid("the flow direction needs map = \"suspension_time_one\""),
        (_, DirectionKind::Unstable) => eigenline(true)?,
        (_, DirectionKind::Stable) => eigenline(false)?,
    };
    if ly.n == 0 {
        return invalid("lyapunov.n must be positive");
    }
    Ok((map, field, reversed))
}

fn prepare(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    cfg.experiment_info().map_err(RunError::Validation)?;
    let a = toral(cfg)?;
    let d = a.dim();
    let budget = cfg.budget.elements;
    let radius = cfg.metric.bfs_radius;
    let plan = match cfg.experiment.as_str() {
        "ball-census" => Plan::Census { ctx: GroupContext::new(a), radius, budget },
        "word-length" => {
            let elements = cfg.word_length.elements.iter().map(|r| element(r, d)).collect::<Result<_, _>>()?;
            Plan::WordLength { ctx: GroupContext::new(a), radius, budget, elements }
        }
        "box-lemmas" => {
            let b = &cfg.boxes;
            if b.ell[0] < 1 || b.h[0] < 1 || b.ell[0] > b.ell[1] || b.h[0] > b.h[1] {
                return invalid("boxes.ell and boxes.h must be ranges [lo, hi] with 1 ≤ lo ≤ hi");
            }
            if b.samples == 0 {
                return invalid("boxes.samples must be positive");
            }
            let phi = automorphism(cfg, &a)?;
            Plan::Boxes { ctx: GroupContext::new(a), phi }
        }
        "set-dynamics" => {
            let phi = automorphism(cfg, &a)?;
            let start: ElementSet = cfg.dynamics.start.iter().map(|r| element(r, d)).collect::<Result<_, _>>()?;
            let ctx = GroupContext::new(a);
            let dy = &cfg.dynamics;
            let config = match (dy.ell0, dy.h0) {
                (None, None) => IterationConfig::new(&ctx, phi, dy.n, start, dy.k_max, budget)?,
                (Some(ell0), Some(h0)) => {
                    let lambda = choose_lambda(ctx.toral(), &phi, DEFAULT_LAMBDA_POWERS)?.lambda;
                    IterationConfig::with_box(&ctx, phi, dy.n, start, dy.k_max, lambda, (ell0, h0), budget)?
                }
                _ => return invalid("dynamics.ell0 and dynamics.h0 must be given together"),
            };
            Plan::Dynamics { ctx, config, radius, budget }
        }
        "abelian-control" => {
            let c = &cfg.control;
            if c.start.is_empty() || c.start.iter().any(|x| x.len() != d) {
                return invalid(format!("control.start needs nonempty vectors of length {d}"));
            }
            if cfg.dynamics.n == 0 {
                return invalid("dynamics.n must be positive");
            }
            Plan::Control { a, n: cfg.dynamics.n, start: c.start.clone(), k_max: c.k_max, budget }
        }
        "qi-compare" => {
            if cfg.qi.radii.is_empty() || cfg.qi.radii.iter().any(|&r| r < 6) {
                return invalid("qi.radii must be nonempty with every radius ≥ 6");
            }
            Plan::Qi { ctx: GroupContext::new(a), radii: cfg.qi.radii.clone(), budget }
        }
        "centralizer" => {
            let c = &cfg.centralizer;
            if c.signs.is_empty() || c.signs.iter().any(|e| e.abs() != 1) {
                return invalid("centralizer.signs must list values ±1");
            }
            Plan::Centralizer { a, bound: c.bound, signs: c.signs.clone(), budget: c.budget }
        }
        "lyapunov" => {
            let (map, field, reversed) = lyapunov_inputs(cfg, &a)?;
            let start = match &cfg.lyapunov.start_point {
                Some(p) if p.len() != map.dim() => {
                    return invalid(format!("start_point needs {} coordinates", map.dim()))
                }
                Some(p) => Some(DVector::from_column_slice(p)),
                None => None,
            };
            Plan::Lyapunov { a, map, field, reversed, start }
        }
        "birkhoff" => {
            let ly = &cfg.lyapunov;
            if ly.starts < 2 || ly.integral_samples < 1000 {
                return invalid("birkhoff needs lyapunov.starts ≥ 2 and lyapunov.integral_samples ≥ 1000");
            }
            let (map, field, reversed) = lyapunov_inputs(cfg, &a)?;
            if reversed {
                return invalid("birkhoff supports the unstable and flow directions; use the inverse matrix for E^s");
            }
            Plan::Birkhoff { map, field }
        }
        other => unreachable!("experiment_info accepted {other}"),
    };
    Ok(plan)
}

/// Validates `cfg` and runs its experiment. Validation problems come back as
/// `Err`; budget exhaustion and failed certifications come back as an
/// [`Outcome`] whose `status` is set, so partial results can still be written.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let plan = prepare(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match plan {
        Plan::Census { ctx, radius, budget } => census(&ctx, radius, budget),
        Plan::WordLength { ctx, radius, budget, elements } => word_lengths(&ctx, radius, budget, &elements),
        Plan::Boxes { ctx, phi } => box_lemmas(cfg, &ctx, &phi, &mut rng),
        Plan::Dynamics { ctx, config, radius, budget } => set_dynamics(&ctx, &config, radius, budget),
        Plan::Control { a, n, start, k_max, budget } => control(&a, n, &start, k_max, budget),
        Plan::Qi { ctx, radii, budget } => qi(&ctx, &radii, budget),
        Plan::Centralizer { a, bound, signs, budget } => centralizer(&a, bound, &signs, budget),
        Plan::Lyapunov { a, map, field, reversed, start } => lyapunov(cfg, &a, &map, &field, reversed, start, &mut rng),
        Plan::Birkhoff { map, field } => birkhoff(cfg, &map, &field, &mut rng),
    }
}

fn census(ctx: &GroupContext, radius: u32, budget: usize) -> Result<Outcome, RunError> {
    let gens = GeneratingSet::standard(ctx.dim());
    let (oracle, partial) = oracle(ctx, &gens, radius, budget)?;
    let rows = oracle.census();
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].ball_size as f64 / w[0].ball_size as f64).collect();
    let status =
        partial.then(|| RunError::Budget(format!("budget reached; census stops at radius {}", oracle.radius())));
    Ok(Outcome {
        tables: vec![csv_table("census.csv", &rows)?],
        results: json!({ "radius": oracle.radius(), "ball_size": oracle.len(), "last_growth_ratio": ratios.last() }),
        verdicts: BTreeMap::new(),
        status,
    })
}

#[derive(Serialize)]
struct WordLengthRow {
    element: String,
    word_length: u32,
    exact: bool,
}

fn word_lengths(
    ctx: &GroupContext,
    radius: u32,
    budget: usize,
    elements: &[GroupElement],
) -> Result<Outcome, RunError> {
    let gens = GeneratingSet::standard(ctx.dim());
    let (oracle, partial) = oracle(ctx, &gens, radius, budget)?;
    let rows: Vec<WordLengthRow> = elements
        .iter()
        .map(|g| match oracle.word_length(g) {
            WordLength::Exact(n) => WordLengthRow { element: g.to_string(), word_length: n, exact: true },
            WordLength::ExceedsRadius(r) => WordLengthRow { element: g.to_string(), word_length: r + 1, exact: false },
        })
        .collect();
    let status = partial.then(|| RunError::Budget(format!("budget reached; lengths known up to {}", oracle.radius())));
    Ok(Outcome {
        tables: vec![csv_table("word_lengths.csv", &rows)?],
        results: json!({ "radius": oracle.radius(), "queried": rows.len(), "beyond_radius": rows.iter().filter(|r| !r.exact).count() }),
        verdicts: BTreeMap::new(),
        status,
    })
}

#[derive(Serialize)]
struct BoxRow {
    check: String,
    ell: u64,
    h: u64,
    n: u32,
    samples: usize,
    images_checked: usize,
    violations: usize,
}

fn box_lemmas(
    cfg: &ExperimentConfig,
    ctx: &GroupContext,
    phi: &GroupAutomorphism,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome, RunError> {
    let gens = GeneratingSet::standard(ctx.dim());
    let b = &cfg.boxes;
    let lambda = choose_lambda(ctx.toral(), phi, DEFAULT_LAMBDA_POWERS)?;
    let mut reports = Vec::new();
    for ell in b.ell[0]..=b.ell[1] {
        for h in b.h[0]..=b.h[1] {
            reports.push(check_box_inclusion_u1(ctx, &gens, &lambda.lambda, ell, h, b.samples, rng)?);
            for &n in &b.n_values {
                reports.push(check_box_inclusion_un(ctx, &gens, &lambda.lambda, ell, h, n, b.samples, rng)?);
            }
            if ell >= 2 && h >= 2 {
                reports.push(check_phi_inclusion(ctx, phi, &lambda.lambda, ell, h, b.samples, rng)?);
            }
        }
    }
    let rows: Vec<BoxRow> = reports
        .iter()
        .map(|r| BoxRow {
            check: r.check.clone(),
            ell: r.ell,
            h: r.h,
            n: r.n,
            samples: r.samples,
            images_checked: r.images_checked,
            violations: r.violations.len(),
        })
        .collect();
    let total: usize = rows.iter().map(|r| r.violations).sum();
    let examples: Vec<&String> = reports.iter().flat_map(|r| r.violations.iter()).take(10).collect();
    let verdict = if total == 0 { "no violations" } else { "violated" };
    Ok(Outcome {
        tables: vec![csv_table("box_lemmas.csv", &rows)?],
        results: json!({
            "lambda": lambda,
            "checks": rows.len(),
            "images_checked": rows.iter().map(|r| r.images_checked).sum::<usize>(),
            "violations": total,
            "first_violations": examples,
        }),
        verdicts: BTreeMap::from([("box_lemmas".to_string(), verdict.to_string())]),
        status: (total > 0).then(|| RunError::Violation(format!("{total} box-lemma violations"))),
    })
}

fn set_dynamics(ctx: &GroupContext, config: &IterationConfig, radius: u32, budget: usize) -> Result<Outcome, RunError> {
    let gens = GeneratingSet::standard(ctx.dim());
    let (oracle, oracle_partial) = oracle(ctx, &gens, radius, budget)?;
    let run = match run_iteration(ctx, &gens, &oracle, config) {
        Ok(run) => run,
        Err(Error::Violation(msg)) => {
            return Ok(Outcome {
                tables: vec![],
                results: json!({ "violation": msg }),
                verdicts: BTreeMap::from([("envelope".to_string(), "violated".to_string())]),
                status: Some(RunError::Violation(msg)),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let class = classify_growth(&run.curve);
    let status = match (&run.curve.truncated, oracle_partial) {
        (Some(why), _) => Some(RunError::Budget(why.clone())),
        (None, true) => Some(RunError::Budget(format!("oracle stopped at radius {}", oracle.radius()))),
        _ => None,
    };
    Ok(Outcome {
        tables: vec![csv_table("growth.csv", &run.curve.points)?],
        results: json!({
            "envelope": run.envelope,
            "oracle_radius": oracle.radius(),
            "classification": classification_json(&class),
            "truncated": run.curve.truncated,
        }),
        verdicts: BTreeMap::from([
            ("envelope".to_string(), "certified".to_string()),
            ("growth".to_string(), verdict_name(&class.verdict)),
        ]),
        status,
    })
}

fn control(a: &ToralMatrix, n: u32, start: &[Vec<i64>], k_max: u32, budget: usize) -> Result<Outcome, RunError> {
    let curve: GrowthCurve = abelian_control(a, n, start, k_max, budget)?;
    let class = classify_growth(&curve);
    Ok(Outcome {
        tables: vec![csv_table("growth.csv", &curve.points)?],
        results: json!({
            "classification": classification_json(&class),
            "reference_rate": a.spectral_radius().ln(),
            "truncated": curve.truncated,
        }),
        verdicts: BTreeMap::from([("growth".to_string(), verdict_name(&class.verdict))]),
        status: curve.truncated.clone().map(RunError::Budget),
    })
}

fn qi(ctx: &GroupContext, radii: &[u32], budget: usize) -> Result<Outcome, RunError> {
    let gens = GeneratingSet::standard(ctx.dim());
    let split = compute_splitting(ctx.toral())?;
    let mut tables = Vec::new();
    let mut reports = Vec::new();
    let mut status = None;
    for &r in radii {
        let (oracle, partial) = oracle(ctx, &gens, r, budget)?;
        if partial {
            status = Some(RunError::Budget(format!("radius {r} exceeds the budget")));
            break;
        }
        let report = qi_comparison(&oracle, &split)?;
        tables.push(csv_table(&format!("qi_r{r}.csv"), &report.rows)?);
        reports.push(report);
    }
    let changes: Vec<f64> = reports.windows(2).map(|w| (w[1].q_hat - w[0].q_hat).abs() / w[0].q_hat).collect();
    let all_hold = reports.iter().all(|r| r.passed());
    Ok(Outcome {
        tables,
        results: json!({ "sigma": split.sigma(), "reports": reports, "relative_q_hat_changes": changes }),
        verdicts: BTreeMap::from([(
            "bound".to_string(),
            if all_hold { "holds on every entry" } else { "violated" }.to_string(),
        )]),
        status,
    })
}

#[derive(Serialize)]
struct CentralizerRow {
    e: i8,
    det: String,
    matrix: String,
}

fn centralizer(a: &ToralMatrix, bound: u32, signs: &[i8], budget: usize) -> Result<Outcome, RunError> {
    let mut rows = Vec::new();
    let mut counts = BTreeMap::new();
    for &e in signs {
        let found = enumerate_commuting_matrices(a, e, bound, budget)?;
        counts.insert(e.to_string(), found.len());
        rows.extend(found.iter().map(|m| CentralizerRow { e, det: m.det().to_string(), matrix: m.to_string() }));
    }
    Ok(Outcome {
        tables: vec![csv_table("centralizer.csv", &rows)?],
        results: json!({ "bound": bound, "counts": counts }),
        verdicts: BTreeMap::new(),
        status: None,
    })
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    log_stretch: f64,
    running_exponent: f64,
}

fn lyapunov(
    cfg: &ExperimentConfig,
    a: &ToralMatrix,
    map: &ToyMap,
    field: &DirectionField,
    reversed: bool,
    start: Option<DVector<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome, RunError> {
    let sign = if reversed { -1.0 } else { 1.0 };
    let x = match start {
        Some(x) => x,
        None => uniform_points(map.dim(), 1, rng).remove(0),
    };
    let n = cfg.lyapunov.n;
    let u = field.at(map, &x)?;
    let seg = cocycle_segment(map, &x, &u, n)?;
    let mut running = unstretch_core::lyapunov::CompensatedSum::default();
    let rows: Vec<TraceRow> = seg
        .log_stretches
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            running.add(sign * l);
            TraceRow { step: j + 1, log_stretch: sign * l, running_exponent: running.value() / (j + 1) as f64 }
        })
        .collect();
    let exponent = sign * seg.log_sum / n as f64;
    let reference = match (cfg.lyapunov.map, cfg.lyapunov.direction) {
        (_, DirectionKind::Flow) => Some(0.0),
        (MapKind::UserPerturbation, _) => None,
        (_, DirectionKind::Unstable) => Some(a.spectral_radius().ln()),
        (_, DirectionKind::Stable) => {
            let smallest = a.eigen().iter().map(|e| e.modulus).fold(f64::INFINITY, f64::min);
            Some(smallest.ln())
        }
    };
    let defect = volume_defect(map, 1000, rng);
    let mut extra = json!({});
    if matches!(cfg.lyapunov.map, MapKind::LinearToral | MapKind::SuspensionTimeOne) {
        let split = compute_splitting(a)?;
        extra = json!({ "contraction_certificate": contraction_certificate(a, &split, 1000, 20, rng) });
    }
    Ok(Outcome {
        tables: vec![csv_table("trace.csv", &rows)?],
        results: json!({
            "start_point": x.as_slice(),
            "n": n,
            "exponent": exponent,
            "reference": reference,
            "error": reference.map(|r| (exponent - r).abs()),
            "volume_defect": defect,
            "computed_via_inverse": reversed,
            "extra": extra,
        }),
        verdicts: BTreeMap::new(),
        status: None,
    })
}

#[derive(Serialize)]
struct StartRow {
    start: usize,
    point: String,
    exponent: f64,
}

fn birkhoff(
    cfg: &ExperimentConfig,
    map: &ToyMap,
    field: &DirectionField,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome, RunError> {
    let ly = &cfg.lyapunov;
    let report = birkhoff_consistency(map, field, ly.starts, ly.n, ly.integral_samples, rng)?;
    let rows: Vec<StartRow> = report
        .per_start
        .iter()
        .enumerate()
        .map(|(i, (x, e))| StartRow {
            start: i,
            point: x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
            exponent: *e,
        })
        .collect();
    let consistent = report.consistent(3.0);
    Ok(Outcome {
        tables: vec![csv_table("birkhoff.csv", &rows)?],
        results: json!({ "report": report, "z_score": report.discrepancy / report.combined_se }),
        verdicts: BTreeMap::from([(
            "birkhoff".to_string(),
            if consistent { "consistent within 3 standard errors" } else { "inconsistent" }.to_string(),
        )]),
        status: None,
    })
}
