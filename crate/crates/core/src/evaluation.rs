//! Cross-validated evaluation of group templates: how centered each template
//! sits in its held-out cohort, how well the pair separates the groups, how
//! faithfully template topology matches held-out subjects, and what memory
//! capacity each template offers as a reservoir.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cognition::{mc_suite, CognitiveConfig};
use crate::connectome::{aggregate_cbt, encode_cohort};
use crate::error::{Error, Result};
use crate::graphmetrics::topology_report;
use crate::model::{
    ClassificationMetrics, Connectome, EvalReport, MCReport, ReservoirConfig, SubjectManifest,
    TimeSeries,
};

/// A stratified partition of the cohort into k folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: BTreeMap<String, usize>,
    seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }
}

/// Shuffles each group independently and deals its subjects round-robin, so
/// per-group fold sizes differ by at most one.
pub fn make_folds(manifest: &SubjectManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    manifest.validate()?;
    if k == 0 {
        return Err(Error::Config("fold count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    for group in manifest.groups() {
        let mut ids: Vec<&str> =
            manifest.subjects_in_group(&group).iter().map(|s| s.id.as_str()).collect();
        if ids.len() < k {
            return Err(Error::InsufficientData(format!(
                "group {group:?} has {} subjects, fewer than {k} folds",
                ids.len()
            )));
        }
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            assignments.insert(id.to_string(), i % k);
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Mean Frobenius distance from the template to each held-out connectome.
pub fn centeredness(cbt: &Connectome, test_subjects: &[Connectome]) -> Result<f64> {
    if test_subjects.is_empty() {
        return Err(Error::InsufficientData("centeredness needs at least one subject".into()));
    }
    let mut total = 0.0;
    for subject in test_subjects {
        total += cbt.frobenius_distance(subject)?;
    }
    Ok(total / test_subjects.len() as f64)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Nearest-template classification of held-out subjects, using the strict
/// upper triangle as the feature vector. With one training point per class
/// this is exactly the hard-margin linear separator between the two
/// templates. Ties go to `cbt_a`; `cbt_a`'s label is the positive class.
pub fn classify_cbt_shot(
    cbt_a: &Connectome,
    cbt_b: &Connectome,
    subjects: &[(Connectome, String)],
) -> Result<ClassificationMetrics> {
    let label_a = cbt_a
        .label()
        .ok_or_else(|| Error::Validation("first template carries no label".into()))?
        .to_string();
    let label_b = cbt_b
        .label()
        .ok_or_else(|| Error::Validation("second template carries no label".into()))?
        .to_string();
    if label_a == label_b {
        return Err(Error::Validation(format!(
            "templates must carry distinct labels, both are {label_a:?}"
        )));
    }
    if cbt_a.dim() != cbt_b.dim() {
        return Err(Error::Dimension(format!(
            "template dims differ: {} vs {}",
            cbt_a.dim(),
            cbt_b.dim()
        )));
    }
    if subjects.is_empty() {
        return Err(Error::InsufficientData("classification needs at least one subject".into()));
    }

    let feat_a = cbt_a.upper_triangle();
    let feat_b = cbt_b.upper_triangle();
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (subject, truth) in subjects {
        if truth != &label_a && truth != &label_b {
            return Err(Error::Validation(format!(
                "subject label {truth:?} is neither {label_a:?} nor {label_b:?}"
            )));
        }
        if subject.dim() != cbt_a.dim() {
            return Err(Error::Dimension(format!(
                "subject dim {} does not match template dim {}",
                subject.dim(),
                cbt_a.dim()
            )));
        }
        let feat = subject.upper_triangle();
        let predicted_a = euclid(&feat, &feat_a) <= euclid(&feat, &feat_b);
        match (predicted_a, truth == &label_a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }

    let precision = ratio_or_zero(tp, tp + fp);
    let recall = ratio_or_zero(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy: ratio_or_zero(tp + tn, tp + tn + fp + fn_),
        sensitivity: recall,
        specificity: ratio_or_zero(tn, tn + fp),
        f1,
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
        positive_label: label_a,
        negative_label: label_b,
    })
}

/// Cross-fold means of every fold-level metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub folds: usize,
    pub centeredness: f64,
    pub centeredness_by_group: BTreeMap<String, f64>,
    pub kl_by_measure: BTreeMap<String, f64>,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// group -> modality -> mean memory capacity
    pub mc_by_group: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Runs the whole battery across a stratified k-fold split of a two-group
/// cohort. Per fold: templates from training subjects only, every metric
/// from held-out subjects; the report keeps the id bookkeeping so the split
/// can be audited.
pub fn run_full_evaluation(
    manifest: &SubjectManifest,
    cfg: &ReservoirConfig,
    cogcfg: &CognitiveConfig,
    modalities: &[(String, TimeSeries)],
    k: usize,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    manifest.validate()?;
    if k < 2 {
        return Err(Error::Config(format!(
            "need at least 2 folds to separate train from test, got {k}"
        )));
    }
    let groups = manifest.groups();
    if groups.len() != 2 {
        return Err(Error::Config(format!(
            "evaluation needs exactly 2 groups, manifest has {}: {groups:?}",
            groups.len()
        )));
    }
    let connectomes = encode_cohort(manifest, cfg)?;
    let plan = make_folds(manifest, k, seed)?;

    let mut reports = Vec::with_capacity(k);
    for fold in 0..k {
        let report = evaluate_fold(manifest, &connectomes, &plan, fold, &groups, cogcfg, modalities)
            .map_err(|e| Error::Fold { index: fold, source: Box::new(e) })?;
        reports.push(report);
    }
    Ok(reports)
}

fn evaluate_fold(
    manifest: &SubjectManifest,
    connectomes: &[Connectome],
    plan: &FoldPlan,
    fold: usize,
    groups: &[String],
    cogcfg: &CognitiveConfig,
    modalities: &[(String, TimeSeries)],
) -> Result<EvalReport> {
    let mut train_ids_by_group = BTreeMap::new();
    let mut test_ids = Vec::new();
    let mut cbts: Vec<Connectome> = Vec::with_capacity(2);
    let mut centeredness_by_group = BTreeMap::new();
    let mut kl_by_group = BTreeMap::new();
    let mut mc_by_group: BTreeMap<String, Vec<MCReport>> = BTreeMap::new();
    let mut test_labeled: Vec<(Connectome, String)> = Vec::new();

    for (entry, conn) in manifest.subjects.iter().zip(connectomes) {
        if plan.fold_of(&entry.id) == Some(fold) {
            test_ids.push(entry.id.clone());
            test_labeled.push((conn.clone(), entry.group.clone()));
        }
    }

    for group in groups {
        let mut train_ids = Vec::new();
        let mut train_conns = Vec::new();
        let mut test_conns = Vec::new();
        for (entry, conn) in manifest.subjects.iter().zip(connectomes) {
            if &entry.group != group {
                continue;
            }
            if plan.fold_of(&entry.id) == Some(fold) {
                test_conns.push(conn.clone());
            } else {
                train_ids.push(entry.id.clone());
                train_conns.push(conn.clone());
            }
        }
        let cbt = aggregate_cbt(&train_conns)?;
        centeredness_by_group.insert(group.clone(), centeredness(&cbt, &test_conns)?);
        kl_by_group.insert(group.clone(), topology_report(&cbt, &test_conns)?);
        mc_by_group.insert(group.clone(), mc_suite(&cbt, modalities, cogcfg)?);
        train_ids_by_group.insert(group.clone(), train_ids);
        cbts.push(cbt);
    }

    let classification = classify_cbt_shot(&cbts[0], &cbts[1], &test_labeled)?;

    let group_count = groups.len() as f64;
    let centeredness_mean =
        centeredness_by_group.values().sum::<f64>() / group_count;
    let mut kl_by_measure = BTreeMap::new();
    for report in kl_by_group.values() {
        for (measure, kl) in report {
            *kl_by_measure.entry(measure.clone()).or_insert(0.0) += kl / group_count;
        }
    }

    Ok(EvalReport {
        fold_index: fold,
        centeredness: centeredness_mean,
        centeredness_by_group,
        kl_by_measure,
        kl_by_group,
        classification,
        mc_by_group,
        train_ids_by_group,
        test_ids,
    })
}

/// Arithmetic means across folds.
pub fn summarize(reports: &[EvalReport]) -> Result<EvalSummary> {
    if reports.is_empty() {
        return Err(Error::InsufficientData("no fold reports to summarize".into()));
    }
    let n = reports.len() as f64;
    let mut centeredness_by_group: BTreeMap<String, f64> = BTreeMap::new();
    let mut kl_by_measure: BTreeMap<String, f64> = BTreeMap::new();
    let mut mc_by_group: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for report in reports {
        for (g, v) in &report.centeredness_by_group {
            *centeredness_by_group.entry(g.clone()).or_insert(0.0) += v / n;
        }
        for (m, v) in &report.kl_by_measure {
            *kl_by_measure.entry(m.clone()).or_insert(0.0) += v / n;
        }
        for (g, mcs) in &report.mc_by_group {
            let slot = mc_by_group.entry(g.clone()).or_default();
            for mc in mcs {
                *slot.entry(mc.modality.clone()).or_insert(0.0) += mc.mc / n;
            }
        }
    }
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(EvalSummary {
        folds: reports.len(),
        centeredness: mean(|r| r.centeredness),
        centeredness_by_group,
        kl_by_measure,
        accuracy: mean(|r| r.classification.accuracy),
        sensitivity: mean(|r| r.classification.sensitivity),
        specificity: mean(|r| r.classification.specificity),
        f1: mean(|r| r.classification.f1),
        mc_by_group,
    })
}
