//! Subject encoding and population templates: BOLD series pass through one
//! shared reservoir, channel correlations of the resulting states form a
//! per-subject connectome, and group connectomes are mean-aggregated.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::model::{Connectome, ReservoirConfig, ReservoirWeights, SubjectManifest, TimeSeries};
use crate::reservoir::{init_reservoir, run_reservoir};

/// Runs one subject's series through the reservoir and returns the state
/// trajectory as the subject's learned signals (same shape T x R, no
/// washout). The reservoir must have as many neurons as the series has
/// channels so the downstream connectome stays R x R.
pub fn learn_signals(
    weights: &ReservoirWeights,
    bold: &TimeSeries,
    cfg: &ReservoirConfig,
) -> Result<TimeSeries> {
    if weights.size() != bold.channels() {
        return Err(Error::Config(format!(
            "reservoir size {} must equal the channel count {}",
            weights.size(),
            bold.channels()
        )));
    }
    let h0 = Array1::zeros(weights.size());
    let states = run_reservoir(weights, bold, cfg, &h0)?;
    TimeSeries::new(states.into_states())
}

/// Pairwise Pearson correlations of the signal channels. The diagonal is
/// exactly 1; a constant channel correlates 0 with everything else.
pub fn pearson_connectome(signals: &TimeSeries) -> Result<Connectome> {
    let t = signals.timepoints();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 timepoints for correlations, got {t}"
        )));
    }
    let r = signals.channels();
    let x = signals.data();
    let means = x.mean_axis(Axis(0)).expect("t >= 2");
    let centered = x - &means;
    let ss: Vec<f64> = (0..r)
        .map(|i| centered.column(i).iter().map(|v| v * v).sum())
        .collect();
    let degenerate: Vec<bool> = (0..r)
        .map(|i| linalg::is_degenerate(ss[i], means[i], t))
        .collect();
    if degenerate.iter().any(|&d| d) {
        log::warn!(
            "{} constant channel(s); their correlations are set to 0",
            degenerate.iter().filter(|&&d| d).count()
        );
    }
    let mut w = Array2::<f64>::eye(r);
    for i in 0..r {
        if degenerate[i] {
            continue;
        }
        let ci = centered.column(i);
        for j in (i + 1)..r {
            if degenerate[j] {
                continue;
            }
            let rho = (ci.dot(&centered.column(j)) / (ss[i].sqrt() * ss[j].sqrt()))
                .clamp(-1.0, 1.0);
            w[[i, j]] = rho;
            w[[j, i]] = rho;
        }
    }
    Connectome::new(w, None)
}

/// Elementwise mean of connectomes. Each entry's addends are sorted before
/// summation, so the result is bit-identical under any input permutation.
pub fn aggregate_cbt(connectomes: &[Connectome]) -> Result<Connectome> {
    let Some(first) = connectomes.first() else {
        return Err(Error::InsufficientData(
            "cannot aggregate an empty set of connectomes".into(),
        ));
    };
    let r = first.dim();
    for c in connectomes {
        if c.dim() != r {
            return Err(Error::Dimension(format!(
                "mixed connectome sizes: {} vs {r}",
                c.dim()
            )));
        }
    }
    let k = connectomes.len() as f64;
    let mut w = Array2::<f64>::eye(r);
    let mut vals = vec![0.0f64; connectomes.len()];
    for i in 0..r {
        for j in (i + 1)..r {
            for (v, c) in vals.iter_mut().zip(connectomes) {
                *v = c.weights()[[i, j]];
            }
            vals.sort_by(f64::total_cmp);
            let mean = vals.iter().sum::<f64>() / k;
            w[[i, j]] = mean;
            w[[j, i]] = mean;
        }
        // diagonal: mean of the (usually all-1) diagonal entries
        for (v, c) in vals.iter_mut().zip(connectomes) {
            *v = c.weights()[[i, i]];
        }
        vals.sort_by(f64::total_cmp);
        w[[i, i]] = vals.iter().sum::<f64>() / k;
    }
    let label = connectomes
        .iter()
        .map(|c| c.label())
        .reduce(|a, b| if a == b { a } else { None })
        .flatten()
        .map(str::to_owned);
    Connectome::new(w, label)
}

fn encode_entry(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    entry: &crate::model::SubjectEntry,
    atlas_dim: usize,
) -> Result<Connectome> {
    let go = || -> Result<Connectome> {
        let ts = io::load_timeseries(&entry.path, Some(atlas_dim))?;
        let signals = learn_signals(weights, &ts, cfg)?;
        Ok(pearson_connectome(&signals)?.with_label(entry.group.clone()))
    };
    go().map_err(|e| Error::Subject {
        id: entry.id.clone(),
        source: Box::new(e),
    })
}

/// Encodes every subject in the manifest with one shared reservoir, in
/// manifest order. Subjects are processed in parallel; output order (and
/// every bit of it) is independent of the thread count.
pub fn encode_cohort(
    manifest: &SubjectManifest,
    cfg: &ReservoirConfig,
) -> Result<Vec<Connectome>> {
    manifest.validate()?;
    if cfg.size != manifest.atlas_dim {
        return Err(Error::Config(format!(
            "reservoir size {} must equal atlas_dim {}",
            cfg.size, manifest.atlas_dim
        )));
    }
    let weights = init_reservoir(cfg, manifest.atlas_dim)?;
    manifest
        .subjects
        .par_iter()
        .map(|entry| encode_entry(&weights, cfg, entry, manifest.atlas_dim))
        .collect()
}

/// Builds the population template for one group: encode each of its
/// subjects with the shared reservoir, then mean-aggregate.
pub fn build_group_cbt(
    manifest: &SubjectManifest,
    group: &str,
    cfg: &ReservoirConfig,
) -> Result<Connectome> {
    manifest.validate()?;
    if cfg.size != manifest.atlas_dim {
        return Err(Error::Config(format!(
            "reservoir size {} must equal atlas_dim {}",
            cfg.size, manifest.atlas_dim
        )));
    }
    let members = manifest.subjects_in_group(group);
    if members.is_empty() {
        return Err(Error::InsufficientData(format!(
            "manifest has no subjects in group {group:?}"
        )));
    }
    let weights = init_reservoir(cfg, manifest.atlas_dim)?;
    let connectomes: Vec<Connectome> = members
        .par_iter()
        .map(|entry| encode_entry(&weights, cfg, entry, manifest.atlas_dim))
        .collect::<Result<_>>()?;
    Ok(aggregate_cbt(&connectomes)?.with_label(group.to_owned()))
}
