//! Seeded generators for stand-in cohorts and stimulus streams: grouped
//! BOLD-like multichannel series and three stimulus archetypes of graded
//! temporal complexity.

use std::str::FromStr;

use ndarray::Array2;
use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeSeries;

/// What a cohort group shares: a channel-mixing structure and a noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    /// Seeds the group's latent-to-channel mixing matrix.
    pub structure_seed: u64,
    /// Standard deviation of i.i.d. channel noise added per subject.
    pub noise_sigma: f64,
}

/// Stable per-item seed stream: splitmix64 steps of the master seed, so
/// item k can be generated without generating items 0..k.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const LATENT_DIMS: usize = 5;
const LATENT_PHI: f64 = 0.9;

/// One group's worth of subjects: every subject mixes its own smooth latent
/// trajectories through the group's fixed mixing matrix, plus channel noise.
/// Subject i depends only on (seed, i), so generation order is irrelevant.
pub fn synth_bold(
    n_subjects: usize,
    rois: usize,
    timepoints: usize,
    profile: &GroupProfile,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    if rois < 2 {
        return Err(Error::Dimension(format!("need at least 2 rois, got {rois}")));
    }
    if timepoints < 10 {
        return Err(Error::Dimension(format!(
            "need at least 10 timepoints, got {timepoints}"
        )));
    }
    if !(profile.noise_sigma >= 0.0) || !profile.noise_sigma.is_finite() {
        return Err(Error::Config(format!(
            "noise sigma must be >= 0, got {}",
            profile.noise_sigma
        )));
    }

    // group mixing matrix: unit rows so channel pair correlations reflect
    // the angles between mixing vectors
    let mut srng = ChaCha8Rng::seed_from_u64(profile.structure_seed);
    let mut mixing = Array2::<f64>::zeros((rois, LATENT_DIMS));
    for mut row in mixing.rows_mut() {
        loop {
            for v in row.iter_mut() {
                *v = srng.sample(StandardNormal);
            }
            let norm = row.dot(&row).sqrt();
            if norm > 1e-6 {
                row.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }

    let innovation = (1.0 - LATENT_PHI * LATENT_PHI).sqrt();
    (0..n_subjects)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut latent = Array2::<f64>::zeros((timepoints, LATENT_DIMS));
            for l in 0..LATENT_DIMS {
                latent[[0, l]] = rng.sample(StandardNormal);
            }
            for t in 1..timepoints {
                for l in 0..LATENT_DIMS {
                    let w: f64 = rng.sample(StandardNormal);
                    latent[[t, l]] = LATENT_PHI * latent[[t - 1, l]] + innovation * w;
                }
            }
            let mut data = latent.dot(&mixing.t());
            if profile.noise_sigma > 0.0 {
                for v in data.iter_mut() {
                    let e: f64 = rng.sample(StandardNormal);
                    *v += profile.noise_sigma * e;
                }
            }
            TimeSeries::new(data)
        })
        .collect()
}

/// Stimulus archetypes ordered by temporal complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModalityKind {
    /// Random frames held for 10 to 20 steps.
    VisualLike,
    /// Small-step random walk clamped to [-1, 1].
    TextLike,
    /// Sums of sinusoids with slowly drifting phase plus faint noise.
    AudioLike,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 3] =
        [ModalityKind::VisualLike, ModalityKind::TextLike, ModalityKind::AudioLike];

    pub fn name(self) -> &'static str {
        match self {
            ModalityKind::VisualLike => "visual-like",
            ModalityKind::TextLike => "text-like",
            ModalityKind::AudioLike => "audio-like",
        }
    }
}

impl FromStr for ModalityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visual-like" => Ok(ModalityKind::VisualLike),
            "text-like" => Ok(ModalityKind::TextLike),
            "audio-like" => Ok(ModalityKind::AudioLike),
            other => Err(Error::Config(format!(
                "unknown modality kind {other:?}; expected visual-like, text-like or audio-like"
            ))),
        }
    }
}

impl std::fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One stimulus stream, T x D, every entry in [-1, 1].
pub fn synth_modality(
    kind: ModalityKind,
    timepoints: usize,
    dims: usize,
    seed: u64,
) -> Result<TimeSeries> {
    if timepoints < 50 {
        return Err(Error::Dimension(format!(
            "need at least 50 timepoints, got {timepoints}"
        )));
    }
    if dims == 0 {
        return Err(Error::Dimension("need at least 1 dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(-1.0f64, 1.0);
    let mut data = Array2::<f64>::zeros((timepoints, dims));
    match kind {
        ModalityKind::VisualLike => {
            let block_len = Uniform::new_inclusive(10usize, 20);
            let mut t = 0;
            while t < timepoints {
                let len = rng.sample(block_len).min(timepoints - t);
                let frame: Vec<f64> = (0..dims).map(|_| rng.sample(unit)).collect();
                for step in t..t + len {
                    for (d, &v) in frame.iter().enumerate() {
                        data[[step, d]] = v;
                    }
                }
                t += len;
            }
        }
        ModalityKind::TextLike => {
            for d in 0..dims {
                data[[0, d]] = rng.sample(unit);
            }
            for t in 1..timepoints {
                for d in 0..dims {
                    let step = 0.1 * rng.sample(unit);
                    data[[t, d]] = (data[[t - 1, d]] + step).clamp(-1.0, 1.0);
                }
            }
        }
        ModalityKind::AudioLike => {
            for d in 0..dims {
                let tones: Vec<(f64, f64, f64)> = (0..3)
                    .map(|_| {
                        let amp = rng.gen_range(0.5..1.0);
                        let omega = rng.gen_range(0.1..0.8);
                        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                        (amp, omega, phase)
                    })
                    .collect();
                let mut drift = 0.0;
                let mut peak = 0.0f64;
                for t in 0..timepoints {
                    let jitter: f64 = rng.sample(StandardNormal);
                    drift += 0.02 * jitter;
                    let noise: f64 = rng.sample(StandardNormal);
                    let mut v = 0.01 * noise;
                    for &(amp, omega, phase) in &tones {
                        v += amp * (omega * t as f64 + phase + drift).sin();
                    }
                    data[[t, d]] = v;
                    peak = peak.max(v.abs());
                }
                if peak > 0.0 {
                    for t in 0..timepoints {
                        data[[t, d]] /= peak;
                    }
                }
            }
        }
    }
    TimeSeries::new(data)
}
