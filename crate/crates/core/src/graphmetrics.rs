//! Weighted-graph centralities over connectomes plus histogram KL divergence
//! for comparing node-value distributions between subjects and a template.
//!
//! Every measure works on absolute off-diagonal weights: magnitudes carry the
//! connection salience, and none of the measures tolerate negative edges.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Connectome;

pub const KL_BINS: usize = 20;
pub const KL_SMOOTHING: f64 = 1e-10;
pub const PAGERANK_DAMPING: f64 = 0.85;
const CENTRALITY_TOL: f64 = 1e-12;
const CENTRALITY_MAX_ITER: usize = 100_000;

/// Off-diagonal absolute weights; the common substrate of all measures.
fn abs_adjacency(c: &Connectome) -> Array2<f64> {
    let r = c.dim();
    Array2::from_shape_fn((r, r), |(i, j)| if i == j { 0.0 } else { c.weights()[[i, j]].abs() })
}

/// s_i = sum of absolute off-diagonal weights in row i.
pub fn node_strength(c: &Connectome) -> Vec<f64> {
    abs_adjacency(c).rows().into_iter().map(|row| row.sum()).collect()
}

/// Principal eigenvector of the absolute adjacency, unit 2-norm,
/// entrywise non-negative.
///
/// Power iteration runs on A + I: the shift leaves eigenvectors alone but
/// breaks the +/- rho oscillation on bipartite graphs.
pub fn eigenvector_centrality(c: &Connectome, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Config("need tol > 0 and max_iter >= 1".into()));
    }
    let a = abs_adjacency(c);
    let r = c.dim();
    let mut x = Array1::from_elem(r, (r as f64).sqrt().recip());
    for _ in 0..max_iter {
        let mut next = a.dot(&x);
        next += &x; // the +I shift
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            // unreachable for A >= 0 and x > 0, kept as a guard
            return Err(Error::Numerical("eigenvector iterate vanished".into()));
        }
        next /= norm;
        let delta = (&next - &x).iter().map(|d| d.abs()).fold(0.0, f64::max);
        x = next;
        if delta <= tol {
            return Ok(x.to_vec());
        }
    }
    Err(Error::Numerical(format!(
        "eigenvector centrality did not converge in {max_iter} iterations"
    )))
}

/// Stationary distribution of the damped random walk on row-normalized
/// absolute weights; zero-strength nodes teleport uniformly. Sums to 1.
pub fn pagerank(c: &Connectome, damping: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&damping) {
        return Err(Error::Config(format!("damping must lie in [0, 1], got {damping}")));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Config("need tol > 0 and max_iter >= 1".into()));
    }
    let a = abs_adjacency(c);
    let r = c.dim();
    let rn = r as f64;
    let strengths: Vec<f64> = a.rows().into_iter().map(|row| row.sum()).collect();
    // row-stochastic transitions for non-dangling rows
    let mut p = a;
    for (i, &s) in strengths.iter().enumerate() {
        if s > 0.0 {
            p.row_mut(i).mapv_inplace(|v| v / s);
        }
    }
    let mut x = Array1::from_elem(r, 1.0 / rn);
    for _ in 0..max_iter {
        let dangling: f64 = strengths
            .iter()
            .zip(x.iter())
            .filter(|(&s, _)| s == 0.0)
            .map(|(_, &xi)| xi)
            .sum();
        let mut next = p.t().dot(&x);
        next.mapv_inplace(|v| damping * v);
        let base = damping * dangling / rn + (1.0 - damping) / rn;
        next += base;
        let delta: f64 = next.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta <= tol {
            let total = x.sum();
            x /= total;
            return Ok(x.to_vec());
        }
    }
    Err(Error::Numerical(format!(
        "pagerank did not converge in {max_iter} iterations"
    )))
}

/// Laplacian energy: sum of squared strengths plus twice the squared edge
/// weights. Equals trace(L^2) for L = D - A.
fn laplacian_energy(strengths: &[f64], sq_edge_sum: f64) -> f64 {
    strengths.iter().map(|s| s * s).sum::<f64>() + 2.0 * sq_edge_sum
}

/// LC(v) = E(G) - E(G minus v): the energy the graph loses when node v and
/// its incident edges are deleted.
pub fn laplacian_centrality(c: &Connectome) -> Vec<f64> {
    let a = abs_adjacency(c);
    let r = c.dim();
    let strengths: Vec<f64> = a.rows().into_iter().map(|row| row.sum()).collect();
    let mut sq_edge_sum = 0.0;
    for i in 0..r {
        for j in (i + 1)..r {
            sq_edge_sum += a[[i, j]] * a[[i, j]];
        }
    }
    let total = laplacian_energy(&strengths, sq_edge_sum);
    (0..r)
        .map(|v| {
            let mut reduced_sq = sq_edge_sum;
            let mut reduced_strength_sq = 0.0;
            for i in 0..r {
                if i == v {
                    continue;
                }
                let w = a[[i, v]];
                reduced_sq -= w * w;
                let s = strengths[i] - w;
                reduced_strength_sq += s * s;
            }
            total - (reduced_strength_sq + 2.0 * reduced_sq)
        })
        .collect()
}

/// Connected components over edges with nonzero absolute weight.
fn components(a: &Array2<f64>) -> Vec<Vec<usize>> {
    let r = a.nrows();
    let mut seen = vec![false; r];
    let mut out = Vec::new();
    for start in 0..r {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for v in 0..r {
                if !seen[v] && a[[u, v]] > 0.0 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Information centrality after Stephenson and Zelen: invert B = L + J per
/// connected component, read pairwise effective resistances off B^-1, and
/// report IC(u) = n_c / sum_v R_uv. Isolated nodes get 0.
pub fn information_centrality(c: &Connectome) -> Result<Vec<f64>> {
    let a = abs_adjacency(c);
    let r = c.dim();
    let mut ic = vec![0.0; r];
    for comp in components(&a) {
        let n = comp.len();
        if n < 2 {
            continue;
        }
        // component Laplacian plus the all-ones matrix
        let mut b = Array2::<f64>::from_elem((n, n), 1.0);
        for (bi, &gi) in comp.iter().enumerate() {
            let mut degree = 0.0;
            for (bj, &gj) in comp.iter().enumerate() {
                if bi != bj {
                    let w = a[[gi, gj]];
                    degree += w;
                    b[[bi, bj]] -= w;
                }
            }
            b[[bi, bi]] += degree;
        }
        let cmat = linalg::solve_spd(&b, &Array2::eye(n)).map_err(|_| {
            Error::Numerical("information centrality: component matrix not invertible".into())
        })?;
        for (bu, &gu) in comp.iter().enumerate() {
            let mut resistance_sum = 0.0;
            for bv in 0..n {
                if bv != bu {
                    resistance_sum += cmat[[bu, bu]] + cmat[[bv, bv]] - 2.0 * cmat[[bu, bv]];
                }
            }
            ic[gu] = n as f64 / resistance_sum;
        }
    }
    Ok(ic)
}

/// Histogram KL divergence KL(P||Q) between two real samples over shared
/// equal-width bins spanning the pooled range, with additive smoothing so
/// empty bins stay finite. A degenerate pooled range gives 0.
pub fn kl_divergence(
    samples_p: &[f64],
    samples_q: &[f64],
    bins: usize,
    smoothing: f64,
) -> Result<f64> {
    if samples_p.is_empty() || samples_q.is_empty() {
        return Err(Error::InsufficientData("kl divergence needs non-empty samples".into()));
    }
    if bins == 0 {
        return Err(Error::Config("kl divergence needs at least one bin".into()));
    }
    if !(smoothing > 0.0) || !smoothing.is_finite() {
        return Err(Error::Config(format!("smoothing must be positive, got {smoothing}")));
    }
    if let Some(v) = samples_p.iter().chain(samples_q).find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample value {v}")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in samples_p.iter().chain(samples_q) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(0.0);
    }
    let histogram = |samples: &[f64]| -> Vec<f64> {
        let mut counts = vec![0.0f64; bins];
        for &v in samples {
            let idx = (((v - lo) / range) * bins as f64).floor() as usize;
            counts[idx.min(bins - 1)] += 1.0;
        }
        let total = samples.len() as f64 + bins as f64 * smoothing;
        counts.iter().map(|c| (c + smoothing) / total).collect()
    };
    let p = histogram(samples_p);
    let q = histogram(samples_q);
    let kl: f64 = p
        .iter()
        .zip(q.iter())
        .map(|(&pb, &qb)| pb * (pb / qb).ln())
        .sum();
    Ok(kl.max(0.0))
}

fn measure_vectors(c: &Connectome) -> Result<[Vec<f64>; 5]> {
    Ok([
        node_strength(c),
        eigenvector_centrality(c, CENTRALITY_TOL, CENTRALITY_MAX_ITER)?,
        pagerank(c, PAGERANK_DAMPING, CENTRALITY_TOL, CENTRALITY_MAX_ITER)?,
        laplacian_centrality(c),
        information_centrality(c)?,
    ])
}

pub const MEASURE_NAMES: [&str; 5] =
    ["strength", "eigenvector", "pagerank", "laplacian", "information"];

/// Per-measure mean KL(subject || template) of node-value distributions
/// over a held-out set of subjects.
pub fn topology_report(
    cbt: &Connectome,
    test_subjects: &[Connectome],
) -> Result<BTreeMap<String, f64>> {
    if test_subjects.is_empty() {
        return Err(Error::InsufficientData("topology report needs at least one subject".into()));
    }
    let reference = measure_vectors(cbt)?;
    let per_subject: Vec<[f64; 5]> = test_subjects
        .par_iter()
        .map(|subject| {
            let vectors = measure_vectors(subject)?;
            let mut kls = [0.0; 5];
            for (k, (sv, rv)) in vectors.iter().zip(reference.iter()).enumerate() {
                kls[k] = kl_divergence(sv, rv, KL_BINS, KL_SMOOTHING)?;
            }
            Ok(kls)
        })
        .collect::<Result<_>>()?;
    let mut report = BTreeMap::new();
    for (k, name) in MEASURE_NAMES.iter().enumerate() {
        let mean = per_subject.iter().map(|kls| kls[k]).sum::<f64>() / per_subject.len() as f64;
        report.insert((*name).to_string(), mean);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn connectome(w: Array2<f64>) -> Connectome {
        Connectome::new(w, None).unwrap()
    }

    fn complete_uniform(r: usize, w: f64) -> Connectome {
        connectome(Array2::from_shape_fn((r, r), |(i, j)| if i == j { 1.0 } else { w }))
    }

    fn random_connectome(r: usize, seed: u64) -> Connectome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Array2::<f64>::eye(r);
        for i in 0..r {
            for j in (i + 1)..r {
                let v = rng.gen_range(-1.0..1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        connectome(w)
    }

    /// path graph 1-2-3 with unit edges embedded in a valid connectome
    fn path3() -> Connectome {
        connectome(array![[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    }

    #[test]
    fn strength_sums_absolute_offdiagonals() {
        assert_eq!(node_strength(&complete_uniform(3, 1.0)), vec![2.0, 2.0, 2.0]);
        let signed = connectome(array![[1.0, 0.5, 0.0], [0.5, 1.0, -0.5], [0.0, -0.5, 1.0]]);
        assert_eq!(node_strength(&signed), vec![0.5, 1.0, 0.5]);
        let empty = connectome(Array2::eye(4));
        assert_eq!(node_strength(&empty), vec![0.0; 4]);
    }

    #[test]
    fn eigenvector_centrality_symmetric_cases() {
        let ec = eigenvector_centrality(&complete_uniform(5, 0.8), 1e-13, 10_000).unwrap();
        for v in &ec {
            assert!((v - 0.2f64.sqrt()).abs() < 1e-10);
        }
        let pair = connectome(array![[1.0, 0.6], [0.6, 1.0]]);
        let ec = eigenvector_centrality(&pair, 1e-13, 10_000).unwrap();
        for v in &ec {
            assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        }
        // no edges: iteration starts uniform and stays there
        let ec = eigenvector_centrality(&connectome(Array2::eye(4)), 1e-13, 10).unwrap();
        for v in &ec {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn eigenvector_centrality_matches_rayleigh_residual() {
        let c = random_connectome(6, 11);
        let ec = eigenvector_centrality(&c, 1e-14, 100_000).unwrap();
        let a = abs_adjacency(&c);
        let x = Array1::from_vec(ec.clone());
        let ax = a.dot(&x);
        let lambda = x.dot(&ax);
        let resid = (&ax - &(&x * lambda)).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(resid < 1e-9, "residual {resid}");
        assert!(ec.iter().all(|&v| v >= 0.0));
        let norm: f64 = ec.iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pagerank_uniform_and_dangling() {
        let pr = pagerank(&complete_uniform(4, 0.5), PAGERANK_DAMPING, 1e-14, 100_000).unwrap();
        for v in &pr {
            assert!((v - 0.25).abs() < 1e-10);
        }
        // all nodes dangling: exact uniform immediately
        let pr = pagerank(&connectome(Array2::eye(5)), PAGERANK_DAMPING, 1e-14, 100).unwrap();
        for v in &pr {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let pr = pagerank(&random_connectome(9, 3), PAGERANK_DAMPING, 1e-13, 100_000).unwrap();
        let total: f64 = pr.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(pr.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn pagerank_matches_definitional_fixed_point() {
        // x = d P^T x + d * dangling/R + (1-d)/R must hold at the solution
        let c = connectome(array![
            [1.0, 0.9, 0.1, 0.0],
            [0.9, 1.0, 0.4, 0.0],
            [0.1, 0.4, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0]
        ]);
        let d = PAGERANK_DAMPING;
        let pr = pagerank(&c, d, 1e-15, 1_000_000).unwrap();
        let a = abs_adjacency(&c);
        let x = Array1::from_vec(pr.clone());
        let mut fixed = Array1::<f64>::from_elem(4, 0.0);
        let mut dangling = 0.0;
        for i in 0..4 {
            let s = a.row(i).sum();
            if s == 0.0 {
                dangling += x[i];
                continue;
            }
            for j in 0..4 {
                fixed[j] += d * x[i] * a[[i, j]] / s;
            }
        }
        for j in 0..4 {
            fixed[j] += d * dangling / 4.0 + (1.0 - d) / 4.0;
            assert!((fixed[j] - x[j]).abs() < 1e-10, "node {j}");
        }
    }

    #[test]
    fn laplacian_centrality_hand_and_oracle() {
        let pair = connectome(array![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(laplacian_centrality(&pair), vec![4.0, 4.0]);

        // node 2 is isolated: removing it changes nothing
        let lc = laplacian_centrality(&connectome(array![
            [1.0, 0.7, 0.0],
            [0.7, 1.0, 0.0],
            [0.0, 0.0, 1.0]
        ]));
        assert_eq!(lc[2], 0.0);
        assert!(lc[0] > 0.0 && (lc[0] - lc[1]).abs() < 1e-15);

        // energy equals trace(L^2) on random graphs
        let c = random_connectome(8, 5);
        let a = abs_adjacency(&c);
        let strengths: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
        let mut sq = 0.0;
        for i in 0..8 {
            for j in (i + 1)..8 {
                sq += a[[i, j]] * a[[i, j]];
            }
        }
        let mut l = -a.clone();
        for i in 0..8 {
            l[[i, i]] = strengths[i];
        }
        let trace_l2 = l.dot(&l).diag().sum();
        assert!((laplacian_energy(&strengths, sq) - trace_l2).abs() < 1e-10);

        // fast per-node removal equals brute-force subgraph energy
        let lc = laplacian_centrality(&c);
        let total = laplacian_energy(&strengths, sq);
        for (v, &lc_v) in lc.iter().enumerate() {
            let keep: Vec<usize> = (0..8).filter(|&i| i != v).collect();
            let mut sub_sq = 0.0;
            let mut sub_strengths = vec![0.0; keep.len()];
            for (bi, &gi) in keep.iter().enumerate() {
                for (bj, &gj) in keep.iter().enumerate() {
                    if bi < bj {
                        sub_sq += a[[gi, gj]] * a[[gi, gj]];
                    }
                    if bi != bj {
                        sub_strengths[bi] += a[[gi, gj]];
                    }
                }
            }
            let brute = total - laplacian_energy(&sub_strengths, sub_sq);
            assert!((lc_v - brute).abs() < 1e-10, "node {v}");
        }
    }

    #[test]
    fn information_centrality_symmetry_and_path() {
        let pair = connectome(array![[1.0, 1.0], [1.0, 1.0]]);
        let ic = information_centrality(&pair).unwrap();
        assert!((ic[0] - ic[1]).abs() < 1e-12);

        let ic = information_centrality(&complete_uniform(5, 0.3)).unwrap();
        for v in &ic {
            assert!((v - ic[0]).abs() < 1e-12);
        }

        // unit path 1-2-3: resistances are 1, 1, 2, so IC = (1, 1.5, 1)
        let ic = information_centrality(&path3()).unwrap();
        assert!((ic[0] - 1.0).abs() < 1e-12);
        assert!((ic[1] - 1.5).abs() < 1e-12);
        assert!((ic[2] - 1.0).abs() < 1e-12);

        // endpoints of a longer path rank below the interior
        let mut w = Array2::<f64>::eye(4);
        for i in 0..3 {
            w[[i, i + 1]] = 0.8;
            w[[i + 1, i]] = 0.8;
        }
        let ic = information_centrality(&connectome(w)).unwrap();
        assert!(ic[0] < ic[1] && ic[3] < ic[2]);
        assert!((ic[0] - ic[3]).abs() < 1e-12);
    }

    #[test]
    fn information_centrality_components() {
        // two bonded pairs and one isolated node
        let mut w = Array2::<f64>::eye(5);
        w[[0, 1]] = 0.9;
        w[[1, 0]] = 0.9;
        w[[2, 3]] = 0.4;
        w[[3, 2]] = 0.4;
        let ic = information_centrality(&connectome(w)).unwrap();
        assert_eq!(ic[4], 0.0);
        assert!((ic[0] - ic[1]).abs() < 1e-12);
        assert!((ic[2] - ic[3]).abs() < 1e-12);
        // stronger bond, higher centrality
        assert!(ic[0] > ic[2]);
    }

    #[test]
    fn kl_divergence_reference_values() {
        let p: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        assert_eq!(kl_divergence(&p, &p, KL_BINS, KL_SMOOTHING).unwrap(), 0.0);

        // masses (3/4, 1/4) vs (1/4, 3/4) over two shared bins
        let a = [0.0, 0.0, 0.0, 1.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        let kl = kl_divergence(&a, &b, 2, KL_SMOOTHING).unwrap();
        assert!((kl - 0.5 * 3.0f64.ln()).abs() < 1e-6, "kl {kl}");

        // disjoint supports stay finite thanks to smoothing
        let lo = [0.0, 0.01, 0.02];
        let hi = [0.98, 0.99, 1.0];
        let kl = kl_divergence(&lo, &hi, KL_BINS, KL_SMOOTHING).unwrap();
        assert!(kl.is_finite() && kl > 1.0);

        // all samples equal: degenerate range
        assert_eq!(kl_divergence(&[2.0, 2.0], &[2.0], KL_BINS, KL_SMOOTHING).unwrap(), 0.0);

        assert!(kl_divergence(&[], &[1.0], KL_BINS, KL_SMOOTHING).is_err());
        assert!(kl_divergence(&[1.0], &[], KL_BINS, KL_SMOOTHING).is_err());
    }

    #[test]
    fn centralities_are_permutation_equivariant() {
        let r = 10;
        let c = random_connectome(r, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut perm: Vec<usize> = (0..r).collect();
        for i in (1..r).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let permuted = connectome(Array2::from_shape_fn((r, r), |(i, j)| {
            c.weights()[[perm[i], perm[j]]]
        }));

        let originals = measure_vectors(&c).unwrap();
        let shuffled = measure_vectors(&permuted).unwrap();
        for (orig, shuf) in originals.iter().zip(shuffled.iter()) {
            for i in 0..r {
                assert!(
                    (shuf[i] - orig[perm[i]]).abs() < 1e-9,
                    "measure mismatch at node {i}"
                );
            }
        }
    }

    #[test]
    fn topology_report_zero_for_self_and_single_subject_mean() {
        let cbt = random_connectome(12, 23);
        let report = topology_report(&cbt, std::slice::from_ref(&cbt)).unwrap();
        assert_eq!(report.len(), 5);
        for (name, kl) in &report {
            assert!(*kl < 1e-9, "{name} self-KL {kl}");
        }

        let subject = random_connectome(12, 24);
        let single = topology_report(&cbt, std::slice::from_ref(&subject)).unwrap();
        let strength_kl = kl_divergence(
            &node_strength(&subject),
            &node_strength(&cbt),
            KL_BINS,
            KL_SMOOTHING,
        )
        .unwrap();
        assert!((single["strength"] - strength_kl).abs() < 1e-15);

        assert!(topology_report(&cbt, &[]).is_err());
    }
}
