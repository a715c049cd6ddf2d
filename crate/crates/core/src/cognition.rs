//! Cognitive phase: the population template becomes the recurrent matrix of
//! a reservoir whose per-lag linear readouts reconstruct delayed inputs; the
//! cumulative reconstruction quality is the memory capacity.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    Activation, Connectome, MCReport, ReservoirConfig, ReservoirWeights, TimeSeries, UpdateForm,
};
use crate::reservoir::{run_reservoir, sample_uniform, scale_to_spectral_radius, StateSequence};

/// Configuration of the cognitive reservoir and the delayed-recall task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CognitiveConfig {
    /// Spectral radius the template is rescaled to.
    #[serde(default = "cdef::radius")]
    pub spectral_target: f64,
    #[serde(default = "cdef::input_scaling")]
    pub input_scaling: f64,
    /// Leak rate in [0, 1]. Note the leak_inside form with leak 1 has no
    /// recurrence at all; use leak < 1 or leak_outside when memory matters.
    #[serde(default = "cdef::leak")]
    pub leak: f64,
    /// Largest recall lag scored.
    #[serde(default = "cdef::tau_max")]
    pub tau_max: u32,
    /// Leading fraction of the sequence used for readout training.
    #[serde(default = "cdef::train_fraction")]
    pub train_fraction: f64,
    /// Training states discarded as transient; `None` means one tenth of
    /// the training window.
    #[serde(default)]
    pub washout: Option<usize>,
    #[serde(default = "cdef::ridge")]
    pub ridge_lambda: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "cdef::update_form")]
    pub update_form: UpdateForm,
    #[serde(default = "cdef::seed")]
    pub seed: u64,
}

mod cdef {
    use crate::model::UpdateForm;

    pub fn radius() -> f64 {
        0.99
    }
    pub fn input_scaling() -> f64 {
        1.0
    }
    pub fn leak() -> f64 {
        1.0
    }
    pub fn tau_max() -> u32 {
        20
    }
    pub fn train_fraction() -> f64 {
        0.8
    }
    pub fn ridge() -> f64 {
        1e-8
    }
    pub fn update_form() -> UpdateForm {
        UpdateForm::LeakInside
    }
    pub fn seed() -> u64 {
        42
    }
}

impl Default for CognitiveConfig {
    fn default() -> Self {
        Self {
            spectral_target: cdef::radius(),
            input_scaling: cdef::input_scaling(),
            leak: cdef::leak(),
            tau_max: cdef::tau_max(),
            train_fraction: cdef::train_fraction(),
            washout: None,
            ridge_lambda: cdef::ridge(),
            activation: Activation::Tanh,
            update_form: cdef::update_form(),
            seed: cdef::seed(),
        }
    }
}

impl CognitiveConfig {
    pub fn validate(&self) -> Result<()> {
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
        if !(0.0..=1.0).contains(&self.leak) || !self.leak.is_finite() {
            return Err(Error::Config(format!("leak must lie in [0, 1], got {}", self.leak)));
        }
        if self.tau_max == 0 {
            return Err(Error::Config("tau_max must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::Config(format!(
                "ridge_lambda must be >= 0, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }

    fn run_config(&self, size: usize) -> ReservoirConfig {
        ReservoirConfig {
            size,
            leak: self.leak,
            spectral_target: self.spectral_target,
            input_scaling: self.input_scaling,
            activation: self.activation,
            update_form: self.update_form,
            seed: self.seed,
        }
    }
}

/// Trained readout matrices, one per recall lag.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    per_lag: BTreeMap<u32, Array2<f64>>,
}

impl ReadoutWeights {
    pub fn per_lag(&self) -> &BTreeMap<u32, Array2<f64>> {
        &self.per_lag
    }

    pub fn get(&self, tau: u32) -> Option<&Array2<f64>> {
        self.per_lag.get(&tau)
    }
}

/// Rescales the template to the configured spectral radius and draws a
/// fresh uniform input matrix from the config seed.
pub fn build_cognitive_reservoir(
    cbt: &Connectome,
    cfg: &CognitiveConfig,
    input_dim: usize,
) -> Result<ReservoirWeights> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::Dimension("input dimension must be >= 1".into()));
    }
    let (w_res, achieved) = scale_to_spectral_radius(cbt.weights().clone(), cfg.spectral_target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w_in = sample_uniform(cbt.dim(), input_dim, &mut rng) * cfg.input_scaling;
    Ok(ReservoirWeights {
        w_in,
        w_res,
        spectral_target: cfg.spectral_target,
        achieved_radius: achieved,
    })
}

/// Shifts the input forward by `tau` steps; the first `tau` rows are zero.
pub fn make_delay_target(input: &TimeSeries, tau: u32) -> TimeSeries {
    let t = input.timepoints();
    let d = input.channels();
    let tau = tau as usize;
    let mut data = Array2::<f64>::zeros((t, d));
    if tau < t {
        data.slice_mut(s![tau.., ..])
            .assign(&input.data().slice(s![..t - tau, ..]));
    }
    TimeSeries::new(data).expect("shifted copy of a valid series is valid")
}

fn ridge_hint(e: Error, lambda: f64) -> Error {
    match e {
        Error::Numerical(msg) if lambda == 0.0 => {
            Error::Numerical(format!("{msg}; set ridge lambda > 0"))
        }
        other => other,
    }
}

/// Closed-form ridge regression of targets onto post-washout states:
/// W = Y^T H (H^T H + lambda I)^-1, returned as a D_out x M matrix.
pub fn train_readout(
    states: &StateSequence,
    target: &TimeSeries,
    lambda: f64,
    washout: usize,
) -> Result<Array2<f64>> {
    if states.timepoints() != target.timepoints() {
        return Err(Error::Dimension(format!(
            "states have {} timepoints but targets have {}",
            states.timepoints(),
            target.timepoints()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let t = states.timepoints();
    if washout >= t {
        return Err(Error::InsufficientData(format!(
            "washout {washout} swallows all {t} timepoints"
        )));
    }
    let m = states.size();
    if t - washout <= m {
        log::warn!(
            "ridge system has {} rows for {m} features; expect a degenerate fit",
            t - washout
        );
    }
    let h = states.states().slice(s![washout.., ..]);
    let y = target.data().slice(s![washout.., ..]);
    let mut g = h.t().dot(&h);
    for i in 0..m {
        g[[i, i]] += lambda;
    }
    let l = linalg::cholesky_factor(&g).map_err(|e| ridge_hint(e, lambda))?;
    let x = linalg::cholesky_solve(&l, &h.t().dot(&y));
    Ok(x.t().to_owned())
}

/// Applies a readout to every state: prediction(t) = W h(t).
pub fn predict_readout(w_out: &Array2<f64>, states: &StateSequence) -> Result<TimeSeries> {
    if w_out.ncols() != states.size() {
        return Err(Error::Dimension(format!(
            "readout expects {} state features, reservoir has {}",
            w_out.ncols(),
            states.size()
        )));
    }
    TimeSeries::new(states.states().dot(&w_out.t()))
}

/// Memory capacity of an explicit reservoir on one input sequence.
///
/// The reservoir runs once over the whole sequence from the zero state. The
/// leading `train_fraction` of timepoints trains one ridge readout per lag
/// (post-washout rows only); predictions on the remaining test states are
/// correlated per dimension with the true lagged input, squared, averaged
/// over dimensions (constant sequences contribute 0), and summed over lags.
pub fn memory_capacity_with_weights(
    weights: &ReservoirWeights,
    modality: &TimeSeries,
    cfg: &CognitiveConfig,
    modality_name: &str,
) -> Result<MCReport> {
    cfg.validate()?;
    let t = modality.timepoints();
    let d = modality.channels();
    if d != weights.input_dim() {
        return Err(Error::Dimension(format!(
            "modality has {d} channels but reservoir expects {}",
            weights.input_dim()
        )));
    }
    let t_train = (t as f64 * cfg.train_fraction).floor() as usize;
    let n_test = t - t_train;
    if n_test <= cfg.tau_max as usize + 2 {
        return Err(Error::InsufficientData(format!(
            "test split has {n_test} timepoints; needs more than tau_max + 2 = {}",
            cfg.tau_max + 2
        )));
    }
    let washout = cfg.washout.unwrap_or(t_train / 10);
    if t_train < washout + 2 {
        return Err(Error::InsufficientData(format!(
            "washout {washout} leaves fewer than 2 of {t_train} training timepoints"
        )));
    }

    let rcfg = cfg.run_config(weights.size());
    let h0 = Array1::zeros(weights.size());
    let seq = run_reservoir(weights, modality, &rcfg, &h0)?;
    let states = seq.states();
    let h_train = states.slice(s![washout..t_train, ..]);
    let h_test = states.slice(s![t_train.., ..]);

    // One Gram factorization serves every lag.
    let m = weights.size();
    let mut g = h_train.t().dot(&h_train);
    for i in 0..m {
        g[[i, i]] += cfg.ridge_lambda;
    }
    let l = linalg::cholesky_factor(&g).map_err(|e| ridge_hint(e, cfg.ridge_lambda))?;

    let scores: Vec<(u32, f64)> = (1..=cfg.tau_max)
        .into_par_iter()
        .map(|tau| {
            let target = make_delay_target(modality, tau);
            let y_train = target.data().slice(s![washout..t_train, ..]);
            let x = linalg::cholesky_solve(&l, &h_train.t().dot(&y_train));
            let pred = h_test.dot(&x);
            let truth = target.data().slice(s![t_train.., ..]);
            let mut sum = 0.0;
            for dim in 0..d {
                let yv: Vec<f64> = truth.column(dim).to_vec();
                let pv: Vec<f64> = pred.column(dim).to_vec();
                if let Some(r) = linalg::pearson(&yv, &pv) {
                    sum += r * r;
                }
            }
            (tau, sum / d as f64)
        })
        .collect();

    let mut per_lag_rho2 = BTreeMap::new();
    let mut mc = 0.0;
    for (tau, score) in scores {
        per_lag_rho2.insert(tau, score);
        mc += score;
    }
    Ok(MCReport {
        modality: modality_name.to_owned(),
        tau_max: cfg.tau_max,
        per_lag_rho2,
        mc,
    })
}

/// Memory capacity of the template-driven cognitive reservoir.
pub fn memory_capacity(
    cbt: &Connectome,
    modality: &TimeSeries,
    cfg: &CognitiveConfig,
) -> Result<MCReport> {
    let weights = build_cognitive_reservoir(cbt, cfg, modality.channels())?;
    memory_capacity_with_weights(&weights, modality, cfg, "")
}

/// Runs `memory_capacity` for each named modality against one template.
pub fn mc_suite(
    cbt: &Connectome,
    modalities: &[(String, TimeSeries)],
    cfg: &CognitiveConfig,
) -> Result<Vec<MCReport>> {
    modalities
        .iter()
        .map(|(name, series)| {
            let mut report = memory_capacity(cbt, series, cfg)?;
            report.modality = name.clone();
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn delay_line_weights(n: usize) -> ReservoirWeights {
        let mut w_in = Array2::<f64>::zeros((n, 1));
        w_in[[0, 0]] = 1.0;
        let w_res = Array2::from_shape_fn((n, n), |(i, j)| if i == j + 1 { 1.0 } else { 0.0 });
        ReservoirWeights::from_parts(w_in, w_res).unwrap()
    }

    fn delay_line_cfg() -> CognitiveConfig {
        CognitiveConfig {
            leak: 1.0,
            activation: Activation::Linear,
            update_form: UpdateForm::LeakOutside,
            ridge_lambda: 1e-10,
            ..CognitiveConfig::default()
        }
    }

    #[test]
    fn delay_target_shifts_and_pads() {
        let input = TimeSeries::new(array![[3.0], [4.0], [5.0], [6.0]]).unwrap();
        let shifted = make_delay_target(&input, 1);
        assert_eq!(
            shifted.data().column(0).to_vec(),
            vec![0.0, 3.0, 4.0, 5.0]
        );
        assert_eq!(make_delay_target(&input, 0).data(), input.data());
        assert!(make_delay_target(&input, 9).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cognitive_reservoir_scales_identity_template() {
        let cbt = Connectome::new(Array2::eye(5), None).unwrap();
        let cfg = CognitiveConfig::default();
        let w = build_cognitive_reservoir(&cbt, &cfg, 3).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 0.99 } else { 0.0 };
                assert!((w.w_res()[[i, j]] - want).abs() < 1e-9);
            }
        }
        assert_eq!(w.w_in().dim(), (5, 3));

        // same template, different seeds: recurrent part fixed, inputs fresh
        let other = build_cognitive_reservoir(&cbt, &CognitiveConfig { seed: 7, ..cfg }, 3).unwrap();
        assert_eq!(w.w_res(), other.w_res());
        assert_ne!(w.w_in(), other.w_in());

        // all-zero couplings cannot be scaled
        let flat = Connectome::new(Array2::zeros((4, 4)), None).unwrap();
        assert!(matches!(
            build_cognitive_reservoir(&flat, &CognitiveConfig::default(), 2),
            Err(Error::Numerical(_))
        ));
    }

    fn random_states(t: usize, m: usize, seed: u64) -> StateSequence {
        // drive a random stable reservoir to get a full-rank state matrix
        let cfg = ReservoirConfig {
            size: m,
            spectral_target: 0.9,
            seed,
            ..ReservoirConfig::default()
        };
        let w = crate::reservoir::init_reservoir(&cfg, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let input =
            TimeSeries::new(Array2::from_shape_fn((t, 2), |_| rng.gen_range(-1.0..1.0))).unwrap();
        run_reservoir(&w, &input, &cfg, &Array1::zeros(m)).unwrap()
    }

    #[test]
    fn readout_satisfies_normal_equations() {
        let states = random_states(200, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target =
            TimeSeries::new(Array2::from_shape_fn((200, 3), |_| rng.gen_range(-1.0..1.0)))
                .unwrap();
        let lambda = 1e-6;
        let w = train_readout(&states, &target, lambda, 0).unwrap();
        assert_eq!(w.dim(), (3, 10));

        // gradient residual: (H^T H + lambda I) W^T - H^T Y ~ 0
        let h = states.states();
        let y = target.data();
        let mut g = h.t().dot(h);
        for i in 0..10 {
            g[[i, i]] += lambda;
        }
        let rhs = h.t().dot(y);
        let resid = g.dot(&w.t()) - &rhs;
        let rel = frob(&resid) / frob(&rhs);
        assert!(rel < 1e-10, "relative residual {rel}");

        // heavy shrinkage collapses the solution
        let heavy = train_readout(&states, &target, 1e9, 0).unwrap();
        assert!(frob(&heavy) < 1e-6 * frob(&w));
    }

    fn frob(a: &Array2<f64>) -> f64 {
        a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn prediction_is_the_linear_map() {
        let states = random_states(50, 6, 4);
        let zero = Array2::<f64>::zeros((2, 6));
        let pred = predict_readout(&zero, &states).unwrap();
        assert!(pred.data().iter().all(|&v| v == 0.0));

        let eye = Array2::<f64>::eye(6);
        let pred = predict_readout(&eye, &states).unwrap();
        assert_eq!(pred.data(), states.states());

        let bad = Array2::<f64>::zeros((2, 5));
        assert!(predict_readout(&bad, &states).is_err());
    }

    #[test]
    fn delay_line_memory_is_its_depth() {
        let weights = delay_line_weights(10);
        let cfg = delay_line_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let input =
            TimeSeries::new(Array2::from_shape_fn((1000, 1), |_| rng.gen_range(-1.0..1.0)))
                .unwrap();
        let report = memory_capacity_with_weights(&weights, &input, &cfg, "iid").unwrap();
        assert!(
            (9.0..=10.0).contains(&report.mc),
            "delay-line mc {}",
            report.mc
        );
        for tau in 1..=9u32 {
            assert!(report.per_lag_rho2[&tau] > 0.999, "lag {tau}");
        }
        assert!(report.per_lag_rho2.values().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn constant_input_has_no_recallable_memory() {
        let weights = delay_line_weights(10);
        let cfg = delay_line_cfg();
        let input = TimeSeries::new(Array2::from_elem((500, 1), 0.7)).unwrap();
        let report = memory_capacity_with_weights(&weights, &input, &cfg, "flat").unwrap();
        assert_eq!(report.mc, 0.0);
        assert!(report.per_lag_rho2.values().all(|&r| r == 0.0));
    }

    #[test]
    fn short_sequences_are_rejected() {
        let weights = delay_line_weights(10);
        let cfg = delay_line_cfg();
        let input = TimeSeries::new(Array2::from_elem((60, 1), 0.1)).unwrap();
        // 20% of 60 = 12 test points, not more than tau_max + 2 = 22
        assert!(matches!(
            memory_capacity_with_weights(&weights, &input, &cfg, "x"),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn suite_is_deterministic_over_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut w = Array2::<f64>::eye(8);
        for i in 0..8 {
            for j in (i + 1)..8 {
                let v = rng.gen_range(-0.4..0.4);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        let cbt = Connectome::new(w, None).unwrap();
        let series =
            TimeSeries::new(Array2::from_shape_fn((400, 2), |_| rng.gen_range(-1.0..1.0)))
                .unwrap();
        let cfg = CognitiveConfig {
            leak: 0.5,
            update_form: UpdateForm::LeakOutside,
            ..CognitiveConfig::default()
        };
        let reports = mc_suite(
            &cbt,
            &[
                ("one".to_string(), series.clone()),
                ("two".to_string(), series.clone()),
            ],
            &cfg,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].mc, reports[1].mc);
        assert_eq!(reports[0].modality, "one");
        assert!(reports[0].mc <= f64::from(cfg.tau_max));

        assert!(mc_suite(&cbt, &[], &cfg).unwrap().is_empty());
    }
}
