//! Density-adaptive transformation of affinities into a joint-probability
//! graph, plus modularity-based community detection (Louvain with consensus,
//! Leiden over multiple seeds, and binary diclustering).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ModiscoError, Result};
use crate::fine::SparseRows;
use crate::util::fast_exp_neg;

/// y = log(1/(0.5*max(x,0)) - 1); nonpositive affinities map to +inf.
pub fn affinity_to_distance(x: f64) -> f64 {
    let c = 0.5 * x.max(0.0);
    if c <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 / c - 1.0).ln()
    }
}

/// Sparse distance rows (finite entries only; omitted entries are +inf).
pub fn distances_from_affinities(aff: &SparseRows) -> SparseRows {
    aff.iter()
        .map(|row| {
            row.iter()
                .filter_map(|&(j, a)| {
                    let d = affinity_to_distance(a);
                    d.is_finite().then_some((j, d))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct BetaResult {
    pub beta: f64,
    /// True when the target perplexity was unreachable and the returned
    /// beta is a search boundary.
    pub boundary: bool,
}

/// Shannon entropy in bits of p_j proportional to exp(-beta * d_j).
fn entropy_bits(dists: &[f64], beta: f64) -> f64 {
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut weighted = 0.0;
    for &d in dists {
        let s = d - dmin;
        let p = fast_exp_neg(-beta * s);
        z += p;
        weighted += p * s;
    }
    (z.ln() + beta * weighted / z) / std::f64::consts::LN_2
}

/// Binary-search beta so that 2^H of p_j ∝ exp(-beta d_j) hits the target
/// perplexity within 1e-4 in log2 units (at most 200 iterations).
pub fn beta_for_perplexity(dists: &[f64], target_perplexity: f64) -> Result<BetaResult> {
    if dists.is_empty() || dists.iter().any(|d| !d.is_finite()) {
        return Err(ModiscoError::Validation(
            "beta calibration needs a nonempty row of finite distances".into(),
        ));
    }
    let target_bits = target_perplexity.log2();
    // H(0) = log2(k) is the maximum; too few neighbors means boundary
    if (dists.len() as f64).log2() <= target_bits {
        let exact = (dists.len() as f64).log2() == target_bits;
        return Ok(BetaResult {
            beta: 0.0,
            boundary: !exact,
        });
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut iters = 0;
    while entropy_bits(dists, hi) > target_bits {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if iters > 100 {
            // all non-minimal mass already negligible; cannot go lower
            return Ok(BetaResult {
                beta: hi,
                boundary: true,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = entropy_bits(dists, mid);
        if (h - target_bits).abs() < 1e-4 {
            return Ok(BetaResult {
                beta: mid,
                boundary: false,
            });
        }
        if h > target_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaResult {
        beta: 0.5 * (lo + hi),
        boundary: true,
    })
}

/// Row-stochastic conditional probabilities with per-row calibrated beta.
/// Returns the rows and each row's beta.
pub fn conditional_probs(
    dmat: &SparseRows,
    perplexity: f64,
) -> Result<(SparseRows, Vec<BetaResult>)> {
    for (i, row) in dmat.iter().enumerate() {
        if row.is_empty() {
            return Err(ModiscoError::Validation(format!(
                "node {i} has no finite distances (isolated)"
            )));
        }
    }
    let betas: Vec<BetaResult> = dmat
        .par_iter()
        .map(|row| {
            let d: Vec<f64> = row.iter().map(|&(_, v)| v).collect();
            beta_for_perplexity(&d, perplexity)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: SparseRows = dmat
        .par_iter()
        .zip(betas.par_iter())
        .map(|(row, b)| {
            let dmin = row.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
            let mut out: Vec<(usize, f64)> = row
                .iter()
                .map(|&(j, d)| (j, fast_exp_neg(-b.beta * (d - dmin))))
                .collect();
            let z: f64 = out.iter().map(|&(_, p)| p).sum();
            for e in &mut out {
                e.1 /= z;
            }
            out
        })
        .collect();
    Ok((rows, betas))
}

/// Symmetric joint-probability graph with total mass 1 over ordered pairs.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    pub n: usize,
    /// Neighbors j != i with weight w_ij; both directions stored.
    pub adj: Vec<Vec<(usize, f64)>>,
    pub self_loops: Vec<f64>,
}

impl SparseGraph {
    pub fn degree(&self, i: usize) -> f64 {
        self.self_loops[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// 2m: total weight over ordered pairs plus self loops.
    pub fn total_weight(&self) -> f64 {
        (0..self.n).map(|i| self.degree(i)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_weight()
    }
}

/// p_ij = (p_{j|i} + p_{i|j}) / (2N); symmetric, sums to 1 over ordered pairs.
pub fn symmetrize(cond: &SparseRows, n: usize) -> SparseGraph {
    let scale = 1.0 / (2.0 * n as f64);
    let mut maps: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); n];
    for (i, row) in cond.iter().enumerate() {
        for &(j, p) in row {
            if i != j {
                *maps[i].entry(j).or_insert(0.0) += p * scale;
                *maps[j].entry(i).or_insert(0.0) += p * scale;
            }
        }
    }
    SparseGraph {
        n,
        adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops: vec![0.0; n],
    }
}

#[derive(Debug, Clone)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub modularity: f64,
}

impl ClusterLabels {
    pub fn num_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Relabel to contiguous ids starting at 0, ordered by first appearance.
pub fn compact_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().copied().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

/// Q = sum_c [ Sin_c/(2m) - (Stot_c/(2m))^2 ] on the weighted graph.
pub fn modularity(graph: &SparseGraph, labels: &[usize]) -> f64 {
    let two_m = graph.total_weight();
    if two_m == 0.0 {
        return 0.0;
    }
    let nc = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut s_in = vec![0.0; nc];
    let mut s_tot = vec![0.0; nc];
    for i in 0..graph.n {
        let c = labels[i];
        s_tot[c] += graph.degree(i);
        s_in[c] += graph.self_loops[i];
        for &(j, w) in &graph.adj[i] {
            if labels[j] == c {
                s_in[c] += w;
            }
        }
    }
    (0..nc)
        .map(|c| s_in[c] / two_m - (s_tot[c] / two_m).powi(2))
        .sum()
}

/// One pass of Louvain-style local moves; returns whether any node moved.
/// With `allow_new_communities` false a node may only join communities that
/// already exist (it may still stay put).
fn local_move_pass(
    graph: &SparseGraph,
    labels: &mut [usize],
    comm_tot: &mut [f64],
    order: &[usize],
    two_m: f64,
) -> bool {
    let mut moved = false;
    let mut weight_to: Vec<f64> = vec![0.0; comm_tot.len()];
    for &i in order {
        let ki = graph.degree(i);
        let old = labels[i];
        let mut candidates: Vec<usize> = Vec::new();
        for &(j, w) in &graph.adj[i] {
            let c = labels[j];
            if weight_to[c] == 0.0 && !candidates.contains(&c) {
                candidates.push(c);
            }
            weight_to[c] += w;
        }
        comm_tot[old] -= ki;
        let gain = |c: usize, w_to: f64| w_to - ki * comm_tot[c] / two_m;
        let mut best_c = old;
        let mut best_gain = gain(old, weight_to[old]);
        for &c in &candidates {
            if c == old {
                continue;
            }
            let g = gain(c, weight_to[c]);
            // strict improvement only; ties favor staying put, and among
            // movers the first candidate in adjacency order (deterministic)
            if g > best_gain + 1e-12 {
                best_gain = g;
                best_c = c;
            }
        }
        comm_tot[best_c] += ki;
        if best_c != old {
            labels[i] = best_c;
            moved = true;
        }
        for &c in &candidates {
            weight_to[c] = 0.0;
        }
        weight_to[old] = 0.0;
    }
    moved
}

/// Aggregate the graph by communities: one node per community, edge weights
/// summed, intra-community weight becomes a self loop.
fn aggregate(graph: &SparseGraph, labels: &[usize]) -> SparseGraph {
    let nc = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut self_loops = vec![0.0; nc];
    let mut maps: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); nc];
    for i in 0..graph.n {
        let ci = labels[i];
        self_loops[ci] += graph.self_loops[i];
        for &(j, w) in &graph.adj[i] {
            let cj = labels[j];
            if ci == cj {
                self_loops[ci] += w; // both directions accumulate here
            } else {
                *maps[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    // intra-community ordered pairs were double counted into the self loop;
    // that matches the ordered-pair convention (self loop = full internal mass)
    SparseGraph {
        n: nc,
        adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops,
    }
}

#[derive(Debug, Clone)]
pub struct LouvainResult {
    /// Labels per hierarchy level, projected to original nodes.
    /// levels[0] is the finest; the last entry is the top level.
    pub levels: Vec<ClusterLabels>,
}

impl LouvainResult {
    pub fn top(&self) -> &ClusterLabels {
        self.levels.last().unwrap()
    }

    pub fn lowest(&self) -> &ClusterLabels {
        self.levels.first().unwrap()
    }
}

/// Two-phase Louvain: seed-shuffled local moves, then aggregation, iterated
/// to a fixed point. Optional initial labels; with max_communities=2 the
/// initial label set is never exceeded (no new communities are created
/// during local moves in any case).
pub fn louvain(
    graph: &SparseGraph,
    seed: u64,
    init: Option<&[usize]>,
    max_communities: Option<usize>,
) -> LouvainResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_m = graph.total_weight();
    let mut current = graph.clone();
    // projection[i]: current-graph node holding original node i
    let mut projection: Vec<usize> = (0..graph.n).collect();
    let mut levels: Vec<ClusterLabels> = Vec::new();
    let mut init_labels: Option<Vec<usize>> = init.map(compact_labels);
    if let (Some(cap), Some(l)) = (max_communities, &init_labels) {
        debug_assert!(l.iter().copied().max().map_or(0, |m| m + 1) <= cap);
    }
    loop {
        let mut labels = init_labels
            .take()
            .unwrap_or_else(|| (0..current.n).collect());
        let nc0 = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut comm_tot = vec![0.0; nc0];
        for i in 0..current.n {
            comm_tot[labels[i]] += current.degree(i);
        }
        let mut order: Vec<usize> = (0..current.n).collect();
        order.shuffle(&mut rng);
        if two_m > 0.0 {
            while local_move_pass(&current, &mut labels, &mut comm_tot, &order, two_m) {}
        }
        let labels = compact_labels(&labels);
        let projected: Vec<usize> = projection.iter().map(|&p| labels[p]).collect();
        let q = modularity(graph, &projected);
        let nc = labels.iter().copied().max().map_or(0, |m| m + 1);
        levels.push(ClusterLabels {
            labels: projected,
            modularity: q,
        });
        if nc == current.n || two_m == 0.0 {
            break;
        }
        current = aggregate(&current, &labels);
        projection = projection.iter().map(|&p| labels[p]).collect();
    }
    LouvainResult { levels }
}

/// Louvain with consensus: n_runs seeded runs build a co-membership graph
/// (top level); Louvain then reruns on the consensus graph with fresh seeds
/// until `patience` consecutive seeds bring no modularity improvement.
/// Returns the best run's lowest-level labels.
pub fn louvain_consensus_cluster(
    graph: &SparseGraph,
    n_runs: usize,
    patience: usize,
    base_seed: u64,
) -> ClusterLabels {
    let n = graph.n;
    let runs: Vec<Vec<usize>> = (0..n_runs as u64)
        .map(|s| louvain(graph, base_seed.wrapping_add(s), None, None).top().labels.clone())
        .collect();
    // consensus co-membership fraction; dense, so this path is quadratic in n
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let co = runs.iter().filter(|r| r[i] == r[j]).count();
            if co > 0 {
                let w = co as f64 / n_runs as f64;
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
    }
    let consensus = SparseGraph {
        n,
        adj,
        self_loops: vec![0.0; n],
    };
    let mut best: Option<LouvainResult> = None;
    let mut since_improved = 0;
    let mut seed = base_seed.wrapping_add(n_runs as u64);
    while since_improved < patience {
        let res = louvain(&consensus, seed, None, None);
        let better = best
            .as_ref()
            .map_or(true, |b| res.top().modularity > b.top().modularity + 1e-12);
        if better {
            best = Some(res);
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        seed = seed.wrapping_add(1);
    }
    let best = best.unwrap();
    let lowest = best.lowest();
    ClusterLabels {
        labels: compact_labels(&lowest.labels),
        modularity: modularity(graph, &lowest.labels),
    }
}

/// Leiden: local move + randomized refinement + aggregation per seed,
/// iterated until modularity stops improving; best of n_seeds by modularity
/// (ties to the lowest seed).
pub fn leiden_multi_seed(
    graph: &SparseGraph,
    n_seeds: usize,
    init: Option<&[usize]>,
    base_seed: u64,
) -> ClusterLabels {
    let results: Vec<ClusterLabels> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| leiden_once(graph, base_seed.wrapping_add(s), init))
        .collect();
    results
        .into_iter()
        .reduce(|a, b| if b.modularity > a.modularity + 1e-12 { b } else { a })
        .expect("n_seeds >= 1")
}

const LEIDEN_THETA: f64 = 0.01;

fn leiden_once(graph: &SparseGraph, seed: u64, init: Option<&[usize]>) -> ClusterLabels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_m = graph.total_weight();
    let mut current = graph.clone();
    let mut projection: Vec<usize> = (0..graph.n).collect();
    let mut final_labels: Vec<usize> = init
        .map(compact_labels)
        .unwrap_or_else(|| (0..graph.n).collect());
    if two_m == 0.0 {
        let labels = compact_labels(&final_labels);
        let q = modularity(graph, &labels);
        return ClusterLabels { labels, modularity: q };
    }
    let mut labels: Vec<usize> = final_labels.clone();
    loop {
        // phase 1: local moves
        let nc0 = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut comm_tot = vec![0.0; nc0];
        for i in 0..current.n {
            comm_tot[labels[i]] += current.degree(i);
        }
        let mut order: Vec<usize> = (0..current.n).collect();
        order.shuffle(&mut rng);
        while local_move_pass(&current, &mut labels, &mut comm_tot, &order, two_m) {}
        let coarse = compact_labels(&labels);
        let nc = coarse.iter().copied().max().map_or(0, |m| m + 1);
        final_labels = projection.iter().map(|&p| coarse[p]).collect();
        if nc == current.n {
            break;
        }
        // phase 2: refinement within each coarse community
        let refined = refine_partition(&current, &coarse, two_m, &mut rng);
        if refined.iter().copied().max().map_or(0, |m| m + 1) == current.n {
            // refinement kept every node a singleton: aggregation would be
            // a no-op and the loop would never shrink the graph
            break;
        }
        // phase 3: aggregate on the refined partition, initialize from coarse
        let next = aggregate(&current, &refined);
        let mut rep_coarse = vec![0usize; next.n];
        for i in 0..current.n {
            rep_coarse[refined[i]] = coarse[i];
        }
        projection = projection.iter().map(|&p| refined[p]).collect();
        current = next;
        labels = rep_coarse;
    }
    let labels = compact_labels(&final_labels);
    let q = modularity(graph, &labels);
    ClusterLabels {
        labels,
        modularity: q,
    }
}

/// Leiden refinement: start from singletons; singleton nodes merge into a
/// connected refined community inside their coarse community, chosen among
/// positive-gain options with probability proportional to exp(gain/theta).
fn refine_partition(
    graph: &SparseGraph,
    coarse: &[usize],
    two_m: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = graph.n;
    let mut refined: Vec<usize> = (0..n).collect();
    let mut ref_tot: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();
    let mut ref_size: Vec<usize> = vec![1; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut weight_to: Vec<f64> = vec![0.0; n];
    for &i in &order {
        if ref_size[refined[i]] > 1 {
            continue; // only singletons move, keeping refined sets connected
        }
        let ki = graph.degree(i);
        let mut candidates: Vec<usize> = Vec::new();
        for &(j, w) in &graph.adj[i] {
            if coarse[j] != coarse[i] {
                continue;
            }
            let r = refined[j];
            if r == refined[i] {
                continue;
            }
            if weight_to[r] == 0.0 && !candidates.contains(&r) {
                candidates.push(r);
            }
            weight_to[r] += w;
        }
        let old = refined[i];
        ref_tot[old] -= ki;
        let mut gains: Vec<(usize, f64)> = Vec::new();
        for &r in &candidates {
            let g = weight_to[r] - ki * ref_tot[r] / two_m;
            if g > 0.0 {
                gains.push((r, g));
            }
        }
        if !gains.is_empty() {
            let weights: Vec<f64> = gains.iter().map(|&(_, g)| (g / LEIDEN_THETA).min(700.0).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.gen::<f64>() * total;
            let mut chosen = gains[0].0;
            for (k, &(r, _)) in gains.iter().enumerate() {
                draw -= weights[k];
                if draw <= 0.0 {
                    chosen = r;
                    break;
                }
            }
            ref_size[chosen] += 1;
            ref_size[old] -= 1;
            ref_tot[chosen] += ki;
            refined[i] = chosen;
        } else {
            ref_tot[old] += ki;
        }
        for &r in &candidates {
            weight_to[r] = 0.0;
        }
    }
    compact_labels(&refined)
}

/// Binary clustering: Louvain from random 2-way initializations, repeated
/// with new seeds until `patience` consecutive seeds fail to improve
/// modularity. Never returns more than 2 clusters.
pub fn dicluster(graph: &SparseGraph, patience: usize, base_seed: u64) -> ClusterLabels {
    assert!(graph.n >= 2, "dicluster needs at least 2 nodes");
    let mut best: Option<ClusterLabels> = None;
    let mut since_improved = 0;
    let mut seed = base_seed;
    while since_improved < patience {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let init: Vec<usize> = (0..graph.n).map(|_| rng.gen_range(0..2usize)).collect();
        let res = louvain(graph, seed, Some(&init), Some(2));
        let top = res.top();
        debug_assert!(top.labels.iter().copied().max().map_or(0, |m| m + 1) <= 2);
        let better = best
            .as_ref()
            .map_or(true, |b| top.modularity > b.modularity + 1e-12);
        if better {
            best = Some(top.clone());
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        seed = seed.wrapping_add(1);
    }
    let mut best = best.unwrap();
    best.labels = compact_labels(&best.labels);
    best
}
