use std::path::PathBuf;

use causet_qft::discrete::KVariant;
use causet_qft::generators::Region;
use causet_qft::interacting::Orientation;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Gen,
    Analyze,
    Green,
    Spectrum,
    Sj,
    Converge,
    Correlate,
    Interact,
    Rce,
    Validate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OperatorChoice {
    /// Preferred-past operator with two-layer Cauchy rows.
    #[default]
    Plambda,
    /// Sorkin's four-layer operator with `k`-layer Cauchy rows.
    Sorkin,
    /// Lattice bulk operator; needs a lattice source.
    Lattice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PastChoice {
    #[default]
    MaxLayer,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StateChoice {
    /// The SJ two-point function.
    #[default]
    Sj,
    /// `H = 0`, `W = (i/2)E`.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprinkleConfig {
    pub region: Region,
    pub density: f64,
}

/// `V = Σ_p Σ_i c_i φ_i^p` over the listed powers; `couplings` has one entry
/// per element or a single entry used everywhere off the past boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub powers: Vec<usize>,
    pub couplings: Vec<f64>,
    /// Numerical coupling used when summing the series.
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersConfig {
    pub hbar: i32,
    pub lambda: u32,
}

impl Default for OrdersConfig {
    fn default() -> Self {
        OrdersConfig { hbar: 2, lambda: 2 }
    }
}

/// Everything one run needs. Each subcommand fills one of these from its
/// flags; `run --config` reads it from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// `"RxC"` diamond lattice.
    #[serde(default)]
    pub lattice: Option<String>,
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub sprinkle: Option<SprinkleConfig>,
    /// JSON file with a `"ret"` matrix, used instead of building an operator.
    #[serde(default)]
    pub green: Option<PathBuf>,
    #[serde(default)]
    pub operator: Option<OperatorChoice>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub kvariant: Option<KVariant>,
    #[serde(default)]
    pub preferred_past: Option<PastChoice>,
    #[serde(default)]
    pub interaction: Option<InteractionConfig>,
    #[serde(default)]
    pub orders: Option<OrdersConfig>,
    #[serde(default)]
    pub orientation: Option<Orientation>,
    #[serde(default)]
    pub state: Option<StateChoice>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory for CSV projections of the matrices in the output.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Field expression for `converge`.
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub points_per_side: Option<usize>,
    #[serde(default)]
    pub delta0: Option<f64>,
    /// Length dimension of the field for `converge`.
    #[serde(default)]
    pub dim: Option<i32>,
    /// Elements whose field values are correlated.
    #[serde(default)]
    pub points: Option<Vec<usize>>,
    /// Explicit smearing vectors, used instead of `points`.
    #[serde(default)]
    pub smearings: Option<Vec<Vec<f64>>>,
    /// Lattice cell `[i, j]` subdivided for `rce`.
    #[serde(default)]
    pub subdivide: Option<[usize; 2]>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            input: None,
            lattice: None,
            ell: None,
            sprinkle: None,
            green: None,
            operator: None,
            k: None,
            kvariant: None,
            preferred_past: None,
            interaction: None,
            orders: None,
            orientation: None,
            state: None,
            seed: None,
            output: None,
            csv: None,
            tol: None,
            f: None,
            levels: None,
            points_per_side: None,
            delta0: None,
            dim: None,
            points: None,
            smearings: None,
            subdivide: None,
        }
    }
}
