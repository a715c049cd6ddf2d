//! Fixed random reservoir: construction, spectral scaling, state runs and
//! the echo-state contraction probe.

use ndarray::{Array1, Array2, ArrayView1};
use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    first_non_finite, ReservoirConfig, ReservoirWeights, TimeSeries, UpdateForm,
};

/// Any state component beyond this magnitude aborts a run as divergent.
pub const STATE_GUARD: f64 = 1e100;
/// Default relative tolerance for spectral-radius estimation.
pub const RADIUS_TOL: f64 = 1e-10;
/// Default iteration cap for spectral-radius estimation.
pub const RADIUS_MAX_ITER: usize = 10_000;

/// Reservoir states over time: row t holds h(t+1), the state after
/// consuming input row t, starting from `initial_state` = h(0).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    states: Array2<f64>,
    initial_state: Array1<f64>,
}

impl StateSequence {
    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn into_states(self) -> Array2<f64> {
        self.states
    }

    pub fn initial_state(&self) -> &Array1<f64> {
        &self.initial_state
    }

    pub fn timepoints(&self) -> usize {
        self.states.nrows()
    }

    pub fn size(&self) -> usize {
        self.states.ncols()
    }
}

/// Estimates the spectral radius by normalized repeated squaring. Gelfand's
/// formula gives rho = lim ||W^m||^(1/m), and doubling m each step (one
/// matrix squaring) shrinks the log-space error like 2^-k no matter how the
/// eigenvalue moduli cluster; complex pairs and defective matrices need no
/// special handling. Fully deterministic. `max_iter` caps the squarings.
///
/// Zero matrices and powers that vanish (e.g. nilpotent shifts) report
/// radius 0. Non-convergence is an error carrying the last estimate.
pub fn estimate_spectral_radius(w: &Array2<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = w.nrows();
    if n != w.ncols() {
        return Err(Error::Dimension(format!(
            "spectral radius needs a square matrix, got {}x{}",
            n,
            w.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Config(format!(
            "invalid estimator settings: tol {tol}, max_iter {max_iter}"
        )));
    }
    if let Some((i, j)) = first_non_finite(w) {
        return Err(Error::Data(format!("non-finite entry at ({i}, {j})")));
    }
    if n == 1 {
        return Ok(w[[0, 0]].abs());
    }

    let frob = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s0 = frob(w);
    if s0 == 0.0 {
        return Ok(0.0);
    }
    // ln rho = sum_k 2^-k ln s_k, where s_k renormalizes the k-th squaring;
    // s_k <= 1 for k >= 1, so the weighted tail is controlled
    let mut c = w / s0;
    let mut log_rho = s0.ln();
    let mut weight = 1.0f64;
    let mut prev_a = f64::NAN;
    let mut err_bound = f64::INFINITY;
    for _ in 0..max_iter {
        let sq = c.dot(&c);
        let s = frob(&sq);
        if s == 0.0 {
            return Ok(0.0); // the power vanished: nilpotent up to roundoff
        }
        weight *= 0.5;
        let a = s.ln();
        let delta = weight * a;
        let next = log_rho + delta;
        // geometric tail bound; the drift term covers defective matrices,
        // whose per-squaring log norms keep creeping
        let drift = if prev_a.is_finite() { (a - prev_a).abs() } else { a.abs() };
        err_bound = 2.0 * weight * (1.0 + a.abs() + drift);
        prev_a = a;
        let settled = delta != 0.0 && next == log_rho;
        log_rho = next;
        // log-space absolute error is relative error on rho itself
        if settled || err_bound <= tol {
            return Ok(log_rho.exp());
        }
        c = sq / s;
    }
    Err(Error::Numerical(format!(
        "spectral radius estimate did not converge within {max_iter} squarings \
         (last estimate {:.6e}, error bound {err_bound:.1e})",
        log_rho.exp()
    )))
}

fn norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales a matrix so its estimated spectral radius hits `target`.
/// Returns the scaled matrix and the re-estimated radius.
pub fn scale_to_spectral_radius(w: Array2<f64>, target: f64) -> Result<(Array2<f64>, f64)> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Config(format!(
            "spectral target must be positive, got {target}"
        )));
    }
    let est = estimate_spectral_radius(&w, RADIUS_TOL, RADIUS_MAX_ITER)?;
    if est == 0.0 {
        return Err(Error::Numerical(
            "cannot rescale a matrix with spectral radius 0".into(),
        ));
    }
    let scaled = w * (target / est);
    let achieved = estimate_spectral_radius(&scaled, RADIUS_TOL, RADIUS_MAX_ITER)?;
    Ok((scaled, achieved))
}

pub(crate) fn sample_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    Array2::from_shape_fn((rows, cols), |_| rng.sample(dist))
}

/// Draws `w_in` then `w_res` with i.i.d. uniform [-1, 1] entries from the
/// configured seed, scales inputs by `input_scaling` and the recurrent
/// matrix to `spectral_target`.
pub fn init_reservoir(cfg: &ReservoirConfig, input_dim: usize) -> Result<ReservoirWeights> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::Dimension("input dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w_in = sample_uniform(cfg.size, input_dim, &mut rng) * cfg.input_scaling;
    let raw = sample_uniform(cfg.size, cfg.size, &mut rng);
    let (w_res, achieved) = scale_to_spectral_radius(raw, cfg.spectral_target)?;
    Ok(ReservoirWeights {
        w_in,
        w_res,
        spectral_target: cfg.spectral_target,
        achieved_radius: achieved,
    })
}

impl ReservoirWeights {
    /// Wraps explicit weight matrices as-is (no rescaling); the achieved
    /// radius is estimated from `w_res` directly.
    pub fn from_parts(w_in: Array2<f64>, w_res: Array2<f64>) -> Result<Self> {
        if w_res.nrows() != w_res.ncols() {
            return Err(Error::Dimension(format!(
                "recurrent matrix must be square, got {}x{}",
                w_res.nrows(),
                w_res.ncols()
            )));
        }
        if w_in.nrows() != w_res.nrows() {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows but reservoir has {} neurons",
                w_in.nrows(),
                w_res.nrows()
            )));
        }
        if first_non_finite(&w_in).is_some() || first_non_finite(&w_res).is_some() {
            return Err(Error::Data("non-finite reservoir weight".into()));
        }
        let achieved = estimate_spectral_radius(&w_res, RADIUS_TOL, RADIUS_MAX_ITER)?;
        Ok(Self {
            w_in,
            w_res,
            spectral_target: achieved,
            achieved_radius: achieved,
        })
    }
}

#[inline]
fn step(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    h: &Array1<f64>,
    x: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let a = cfg.leak;
    match cfg.update_form {
        UpdateForm::LeakOutside => {
            let pre = weights.w_in.dot(&x) + weights.w_res.dot(h);
            let mut out = pre.mapv(|p| cfg.activation.apply(p));
            out.zip_mut_with(h, |o, &hi| *o = (1.0 - a) * hi + a * *o);
            out
        }
        UpdateForm::LeakInside => {
            let pre = weights.w_in.dot(&x) * a + weights.w_res.dot(h) * (1.0 - a);
            pre.mapv(|p| cfg.activation.apply(p))
        }
    }
}

/// Runs the reservoir over a full input sequence from state `h0`, returning
/// the state after each timepoint. Aborts with a divergence error if any
/// state component leaves [-STATE_GUARD, STATE_GUARD].
pub fn run_reservoir(
    weights: &ReservoirWeights,
    input: &TimeSeries,
    cfg: &ReservoirConfig,
    h0: &Array1<f64>,
) -> Result<StateSequence> {
    cfg.validate()?;
    if input.channels() != weights.input_dim() {
        return Err(Error::Dimension(format!(
            "input has {} channels but reservoir expects {}",
            input.channels(),
            weights.input_dim()
        )));
    }
    if h0.len() != weights.size() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries but reservoir has {} neurons",
            h0.len(),
            weights.size()
        )));
    }
    if h0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite initial state".into()));
    }
    let t = input.timepoints();
    let m = weights.size();
    let mut states = Array2::<f64>::zeros((t, m));
    let mut h = h0.clone();
    for ti in 0..t {
        h = step(weights, cfg, &h, input.data().row(ti));
        if h.iter().any(|v| !v.is_finite() || v.abs() > STATE_GUARD) {
            return Err(Error::Divergence { timestep: ti + 1 });
        }
        states.row_mut(ti).assign(&h);
    }
    Ok(StateSequence {
        states,
        initial_state: h0.clone(),
    })
}

/// Drives two random initial states with one shared random input sequence
/// and reports `(final_gap < tol, final_gap)`. A trajectory that blows up
/// counts as non-contracting (gap = infinity), not as an error.
pub fn check_echo_state(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    probe_len: usize,
    tol: f64,
    seed: u64,
) -> Result<(bool, f64)> {
    cfg.validate()?;
    if probe_len < 10 {
        return Err(Error::Config(format!(
            "echo-state probe needs >= 10 steps, got {probe_len}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("probe tolerance must be positive, got {tol}")));
    }
    let m = weights.size();
    let d = weights.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ha = sample_uniform(1, m, &mut rng).row(0).to_owned();
    let mut hb = sample_uniform(1, m, &mut rng).row(0).to_owned();
    let inputs = sample_uniform(probe_len, d, &mut rng);
    let mut gap = f64::INFINITY;
    for ti in 0..probe_len {
        let x = inputs.row(ti);
        ha = step(weights, cfg, &ha, x);
        hb = step(weights, cfg, &hb, x);
        let blown = ha
            .iter()
            .chain(hb.iter())
            .any(|v| !v.is_finite() || v.abs() > STATE_GUARD);
        if blown {
            return Ok((false, f64::INFINITY));
        }
        gap = norm(&(&ha - &hb));
    }
    Ok((gap < tol, gap))
}
