//! Shared domain types and their invariants.
//!
//! Everything downstream (reservoir runs, connectome math, evaluation) works
//! on these types; constructors validate so the rest of the pipeline can
//! assume well-formed data.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the symmetry check `|w_ij - w_ji| <= SYMMETRY_TOL`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance above 1.0 allowed for correlation magnitudes.
pub const RANGE_TOL: f64 = 1e-12;

/// A length-T sequence of D-dimensional real vectors, stored time-major:
/// row t is the measurement at timepoint t.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Array2<f64>,
}

impl TimeSeries {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "time series must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some((t, d)) = first_non_finite(&data) {
            return Err(Error::Data(format!(
                "non-finite value at timepoint {t}, channel {d}"
            )));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Number of timepoints T.
    pub fn timepoints(&self) -> usize {
        self.data.nrows()
    }

    /// Number of channels D.
    pub fn channels(&self) -> usize {
        self.data.ncols()
    }
}

/// Symmetric R x R matrix of pairwise couplings (a subject connectome or a
/// population template), with an optional group tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectome {
    weights: Array2<f64>,
    label: Option<String>,
}

impl Connectome {
    /// Validates squareness, R >= 2, finiteness, symmetry within
    /// [`SYMMETRY_TOL`] and magnitude within `1 + RANGE_TOL`.
    pub fn new(weights: Array2<f64>, label: Option<String>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::Dimension(format!(
                "connectome must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let r = weights.nrows();
        if r < 2 {
            return Err(Error::Dimension(format!(
                "connectome needs at least 2 nodes, got {r}"
            )));
        }
        if let Some((i, j)) = first_non_finite(&weights) {
            return Err(Error::Data(format!("non-finite weight at ({i}, {j})")));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let gap = (weights[[i, j]] - weights[[j, i]]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "asymmetric weights at ({i}, {j}): |{} - {}| = {gap:e}",
                        weights[[i, j]],
                        weights[[j, i]]
                    )));
                }
            }
        }
        if let Some(w) = weights.iter().find(|w| w.abs() > 1.0 + RANGE_TOL) {
            return Err(Error::Validation(format!(
                "weight {w} outside [-1, 1]"
            )));
        }
        Ok(Self { weights, label })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Number of nodes R.
    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Strict upper triangle flattened row-major; the feature vector used by
    /// template-shot classification.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let r = self.dim();
        let mut v = Vec::with_capacity(r * (r - 1) / 2);
        for i in 0..r {
            for j in (i + 1)..r {
                v.push(self.weights[[i, j]]);
            }
        }
        v
    }

    /// Frobenius distance to another connectome of the same dimension.
    pub fn frobenius_distance(&self, other: &Connectome) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "connectome dims differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let sum: f64 = self
            .weights
            .iter()
            .zip(other.weights.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum.sqrt())
    }
}

/// Pointwise nonlinearity of the reservoir units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }
}

/// Placement of the leak term in the state update.
///
/// `LeakOutside`: h(t+1) = (1-a) h(t) + a * act(W_in x(t+1) + W_res h(t))
/// `LeakInside`:  h(t)   = act(a W_in x(t) + (1-a) W_res h(t-1))
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateForm {
    #[default]
    LeakOutside,
    LeakInside,
}

/// Configuration of the encoding reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    /// Number of reservoir neurons M.
    #[serde(default = "defaults::size")]
    pub size: usize,
    /// Leak rate in [0, 1].
    #[serde(default = "defaults::leak_encode")]
    pub leak: f64,
    /// Spectral radius the recurrent matrix is rescaled to.
    #[serde(default = "defaults::radius_encode")]
    pub spectral_target: f64,
    /// Multiplier applied to the input matrix.
    #[serde(default = "defaults::input_scaling")]
    pub input_scaling: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub update_form: UpdateForm,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
}

mod defaults {
    pub fn size() -> usize {
        111
    }
    pub fn leak_encode() -> f64 {
        0.5
    }
    pub fn radius_encode() -> f64 {
        1.45
    }
    pub fn input_scaling() -> f64 {
        1.0
    }
    pub fn seed() -> u64 {
        42
    }
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            size: defaults::size(),
            leak: defaults::leak_encode(),
            spectral_target: defaults::radius_encode(),
            input_scaling: defaults::input_scaling(),
            activation: Activation::Tanh,
            update_form: UpdateForm::LeakOutside,
            seed: defaults::seed(),
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("reservoir size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.leak) || !self.leak.is_finite() {
            return Err(Error::Config(format!(
                "leak must lie in [0, 1], got {}",
                self.leak
            )));
        }
        if !(self.spectral_target > 0.0) || !self.spectral_target.is_finite() {
            return Err(Error::Config(format!(
                "spectral_target must be positive, got {}",
                self.spectral_target
            )));
        }
        if !(self.input_scaling > 0.0) || !self.input_scaling.is_finite() {
            return Err(Error::Config(format!(
                "input_scaling must be positive, got {}",
                self.input_scaling
            )));
        }
        Ok(())
    }
}

/// Fixed input and recurrent weight matrices plus their scaling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirWeights {
    pub(crate) w_in: Array2<f64>,
    pub(crate) w_res: Array2<f64>,
    pub(crate) spectral_target: f64,
    pub(crate) achieved_radius: f64,
}

impl ReservoirWeights {
    /// M x D input matrix.
    pub fn w_in(&self) -> &Array2<f64> {
        &self.w_in
    }

    /// M x M recurrent matrix.
    pub fn w_res(&self) -> &Array2<f64> {
        &self.w_res
    }

    /// Number of reservoir neurons M.
    pub fn size(&self) -> usize {
        self.w_res.nrows()
    }

    /// Input dimensionality D.
    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn spectral_target(&self) -> f64 {
        self.spectral_target
    }

    /// Estimated spectral radius of `w_res` after scaling.
    pub fn achieved_radius(&self) -> f64 {
        self.achieved_radius
    }
}

/// One subject in a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub path: PathBuf,
    pub group: String,
}

/// Dataset manifest: atlas dimensionality plus the subject roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectManifest {
    pub atlas_dim: usize,
    pub subjects: Vec<SubjectEntry>,
}

impl SubjectManifest {
    pub fn validate(&self) -> Result<()> {
        if self.atlas_dim == 0 {
            return Err(Error::Validation("atlas_dim must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate subject id {:?}", s.id)));
            }
        }
        Ok(())
    }

    /// Group names in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.subjects {
            if !out.iter().any(|g| g == &s.group) {
                out.push(s.group.clone());
            }
        }
        out
    }

    pub fn subjects_in_group<'a>(&'a self, group: &str) -> Vec<&'a SubjectEntry> {
        self.subjects.iter().filter(|s| s.group == group).collect()
    }
}

/// Per-lag squared-correlation scores and their cumulative memory capacity
/// for one input modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub modality: String,
    pub tau_max: u32,
    /// lag -> mean squared Pearson correlation, each in [0, 1].
    pub per_lag_rho2: BTreeMap<u32, f64>,
    /// Sum of the per-lag scores; bounded by `tau_max`.
    pub mc: f64,
}

/// Confusion-matrix-derived classification metrics, with the raw counts so
/// every rate can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub positive_label: String,
    pub negative_label: String,
}

/// Per-fold evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fold_index: usize,
    /// Mean over groups of the per-group template-to-test Frobenius distance.
    pub centeredness: f64,
    pub centeredness_by_group: BTreeMap<String, f64>,
    /// Measure -> mean KL divergence, averaged over groups.
    pub kl_by_measure: BTreeMap<String, f64>,
    pub kl_by_group: BTreeMap<String, BTreeMap<String, f64>>,
    pub classification: ClassificationMetrics,
    pub mc_by_group: BTreeMap<String, Vec<MCReport>>,
    pub train_ids_by_group: BTreeMap<String, Vec<String>>,
    pub test_ids: Vec<String>,
}

pub(crate) fn first_non_finite(m: &Array2<f64>) -> Option<(usize, usize)> {
    m.indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|((i, j), _)| (i, j))
}
