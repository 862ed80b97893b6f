//! Run configuration: one TOML file per run, with a section per concern.
//! Sections an experiment does not use may be omitted.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub needs: &'static str,
    pub emits: &'static str,
}

/// Sorted by name.
pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "abelian-control",
        needs: "group.matrix, control.start, control.k_max, dynamics.n",
        emits: "growth.csv, summary.json",
    },
    ExperimentInfo { name: "ball-census", needs: "group.matrix, metric.bfs_radius", emits: "census.csv, summary.json" },
    ExperimentInfo {
        name: "birkhoff",
        needs: "group.matrix, lyapunov.{map, direction, n, starts, integral_samples}",
        emits: "birkhoff.csv, summary.json",
    },
    ExperimentInfo {
        name: "box-lemmas",
        needs: "group.matrix, automorphism, boxes.{ell, h, n_values, samples}",
        emits: "box_lemmas.csv, summary.json",
    },
    ExperimentInfo {
        name: "centralizer",
        needs: "group.matrix, centralizer.{bound, signs}",
        emits: "centralizer.csv, summary.json",
    },
    ExperimentInfo {
        name: "lyapunov",
        needs: "group.matrix, lyapunov.{map, direction, n}",
        emits: "trace.csv, summary.json",
    },
    ExperimentInfo { name: "qi-compare", needs: "group.matrix, qi.radii", emits: "qi_r<radius>.csv, summary.json" },
    ExperimentInfo {
        name: "set-dynamics",
        needs: "group.matrix, automorphism, dynamics.{n, start, k_max}, metric.bfs_radius",
        emits: "growth.csv, summary.json",
    },
    ExperimentInfo {
        name: "word-length",
        needs: "group.matrix, metric.bfs_radius, word_length.elements",
        emits: "word_lengths.csv, summary.json",
    },
];

pub fn experiment_names() -> impl Iterator<Item = &'static str> {
    EXPERIMENTS.iter().map(|e| e.name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub group: GroupSection,
    #[serde(default)]
    pub automorphism: Option<AutomorphismSection>,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub boxes: BoxesSection,
    #[serde(default)]
    pub word_length: WordLengthSection,
    #[serde(default)]
    pub qi: QiSection,
    #[serde(default)]
    pub centralizer: CentralizerSection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    /// Rows of the integer matrix A.
    pub matrix: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomorphismSection {
    pub b: Vec<Vec<i64>>,
    pub v: Vec<i64>,
    pub e: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSection {
    pub bfs_radius: u32,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self { bfs_radius: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    /// Cap on BFS table entries and on any iterated set.
    pub elements: usize,
    /// Advisory only; recorded in the summary.
    pub memory_mb: Option<u64>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self { elements: 20_000_000, memory_mb: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub n: u32,
    /// Elements as `[x_1, …, x_d, k]`.
    pub start: Vec<Vec<i64>>,
    pub k_max: u32,
    /// Initial box B(ℓ0, h0). When absent, the smallest box with ℓ0, h0 ≥ 2
    /// containing the start set is used.
    pub ell0: Option<u64>,
    pub h0: Option<u64>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self { n: 1, start: vec![], k_max: 6, ell0: None, h0: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// Lattice vectors `[x_1, …, x_d]`.
    pub start: Vec<Vec<i64>>,
    pub k_max: u32,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self { start: vec![], k_max: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxesSection {
    /// Inclusive range of ℓ.
    pub ell: [u64; 2],
    /// Inclusive range of h.
    pub h: [u64; 2],
    pub n_values: Vec<u32>,
    pub samples: usize,
}

impl Default for BoxesSection {
    fn default() -> Self {
        Self { ell: [2, 6], h: [2, 6], n_values: vec![1, 2, 3], samples: 1000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WordLengthSection {
    pub elements: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QiSection {
    pub radii: Vec<u32>,
}

impl Default for QiSection {
    fn default() -> Self {
        Self { radii: vec![10, 12] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralizerSection {
    /// Entry bound M for the search box [-M, M].
    pub bound: u32,
    /// Values of e to search, each ±1.
    pub signs: Vec<i8>,
    pub budget: usize,
}

impl Default for CentralizerSection {
    fn default() -> Self {
        Self { bound: 5, signs: vec![1, -1], budget: 100_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    LinearToral,
    SuspensionTimeOne,
    UserPerturbation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    /// Unstable eigenline for linear maps; the settled unstable line for the shear.
    Unstable,
    /// Stable eigenline (linear maps only).
    Stable,
    /// `∂_s` (suspension only).
    Flow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovSection {
    pub map: MapKind,
    /// Coefficients `c_j` of `h(t) = Σ c_j sin(2π j t)` for `user_perturbation`.
    pub shear: Vec<f64>,
    pub direction: DirectionKind,
    pub n: usize,
    /// Starting point for the `lyapunov` trace; drawn from the seed if absent.
    pub start_point: Option<Vec<f64>>,
    pub starts: usize,
    pub integral_samples: usize,
    /// Backward steps used to settle the unstable line on nonlinear maps.
    pub settle_steps: usize,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        Self {
            map: MapKind::LinearToral,
            shear: vec![],
            direction: DirectionKind::Unstable,
            n: 1000,
            start_point: None,
            starts: 100,
            integral_samples: 10_000,
            settle_steps: 40,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn experiment_info(&self) -> Result<&'static ExperimentInfo, String> {
        EXPERIMENTS.iter().find(|e| e.name == self.experiment).ok_or_else(|| {
            let nearest = experiment_names()
                .min_by_key(|n| strsim::levenshtein(n, &self.experiment))
                .expect("experiment list is not empty");
            format!("unknown experiment '{}'; did you mean '{nearest}'?", self.experiment)
        })
    }
}
