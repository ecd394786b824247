//! Acceptance criteria for the motif discovery pipeline. Each test prints a
//! single PASS/FAIL line for its criterion (visible with --nocapture).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modisco::aggregate::{aggregate_cluster, Motif};
use modisco::cluster::{beta_for_perplexity, conditional_probs, SparseGraph};
use modisco::config::PipelineConfig;
use modisco::dataset::{load_dataset, save_dataset, ResultsBundle};
use modisco::fine::{best_alignment_cj, continuous_jaccard, SparseRows};
use modisco::metacluster::percentile_transform;
use modisco::pipeline::run_pipeline;
use modisco::postprocess::{
    crosscorr_similarity, density_sensitive_sim, detect_spurious_merge, iterative_merge,
    motif_beta, normalized_corr, MergeCriteria, PostprocessContext,
};
use modisco::seqlets::{fdr_thresholds, isotonic_regression, Seqlet};
use modisco::synth::{generate_synthetic, log_odds_matrix, PlantedPwm, SynthConfig};

fn report(criterion: usize, name: &str, ok: bool) {
    println!(
        "acceptance {criterion} ({name}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance criterion {criterion} ({name}) failed");
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_reference_toy_values() {
    let a = [-1.0, -1.0, -2.0, 4.0, -1.0, -1.0, -1.0];
    let b = [0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0];
    let c = [-1.0, -1.0, -2.0, 0.0, -1.0, -1.0, -1.0];
    let ok = (continuous_jaccard(&a, &b) - 4.0 / 11.0).abs() < 1e-12
        && (continuous_jaccard(&a, &c) - 7.0 / 11.0).abs() < 1e-12
        && (normalized_corr(&a, &b) - 0.98).abs() < 0.005
        && (normalized_corr(&a, &c) - 0.87).abs() < 0.005;
    report(1, "reference toy values", ok);
}

// ---------------------------------------------------------------- criterion 2

/// Independent perplexity oracle: 2^H of p_j proportional to exp(-beta d_j).
fn perplexity_oracle(dists: &[f64], beta: f64) -> f64 {
    let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let ps: Vec<f64> = dists.iter().map(|&d| (-beta * (d - dmin)).exp()).collect();
    let z: f64 = ps.iter().sum();
    let h: f64 = ps
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / z;
            -q * q.log2()
        })
        .sum();
    h.exp2()
}

#[test]
fn criterion_2_perplexity_calibration() {
    // equal distances: achieved perplexity is exactly k
    let mut ok = true;
    for k in [2usize, 7, 64] {
        let dists = vec![1.25; k];
        let beta = beta_for_perplexity(&dists, k as f64).unwrap();
        ok &= (perplexity_oracle(&dists, beta.beta) - k as f64).abs() < 1e-9;
    }
    // random rows: achieved perplexity within 1e-3 in log2 of the target
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let dists: Vec<f64> = (0..500).map(|_| rng.gen_range(0.2..5.0)).collect();
        let target = rng.gen_range(5.0..100.0);
        let beta = beta_for_perplexity(&dists, target).unwrap();
        ok &= !beta.boundary;
        ok &= (perplexity_oracle(&dists, beta.beta).log2() - target.log2()).abs() < 1e-3;
    }
    // runtime: 1e4 rows of width 500 in under a second
    let dmat: SparseRows = (0..10_000)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(i as u64);
            (0..500)
                .map(|j| (if j >= i { j + 1 } else { j }, r.gen_range(0.2..5.0)))
                .collect()
        })
        .collect();
    // best of three attempts, to factor out contention from parallel tests
    let elapsed = (0..3)
        .map(|_| {
            let start = Instant::now();
            let (rows, _) = conditional_probs(&dmat, 30.0).unwrap();
            ok &= rows.len() == 10_000;
            start.elapsed()
        })
        .min()
        .unwrap();
    ok &= elapsed.as_secs_f64() < 1.0;
    println!("  beta calibration for 10^4 x 500 took {elapsed:?}");
    report(2, "perplexity calibration", ok);
}

// ---------------------------------------------------------------- criterion 3

/// O(n^2) pool-adjacent-violators oracle.
fn pav_oracle(y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut vals: Vec<f64> = y.to_vec();
    let mut wts: Vec<f64> = w.to_vec();
    let mut sizes: Vec<usize> = vec![1; y.len()];
    loop {
        let mut violated = None;
        for i in 0..vals.len().saturating_sub(1) {
            if vals[i] > vals[i + 1] + 1e-15 {
                violated = Some(i);
                break;
            }
        }
        match violated {
            None => break,
            Some(i) => {
                let wsum = wts[i] + wts[i + 1];
                let pooled = (vals[i] * wts[i] + vals[i + 1] * wts[i + 1]) / wsum;
                vals[i] = pooled;
                wts[i] = wsum;
                sizes[i] += sizes[i + 1];
                vals.remove(i + 1);
                wts.remove(i + 1);
                sizes.remove(i + 1);
            }
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, s) in vals.iter().zip(sizes.iter()) {
        out.extend(std::iter::repeat(*v).take(*s));
    }
    out
}

#[test]
fn criterion_3_isotonic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let y: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0)).collect();
        let fitted = isotonic_regression(&x, &y, &w).unwrap();
        let oracle = pav_oracle(&y, &w);
        ok &= fitted
            .iter()
            .zip(oracle.iter())
            .all(|(a, b)| (a - b).abs() < 1e-10);
    }
    report(3, "isotonic regression vs PAV oracle", ok);
}

// ---------------------------------------------------------------- criterion 4

fn graph_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> SparseGraph {
    let mut adj = vec![Vec::new(); n];
    for &(i, j, w) in edges {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    SparseGraph {
        n,
        adj,
        self_loops: vec![0.0; n],
    }
}

/// Direct double-sum modularity over ordered pairs.
fn modularity_direct(graph: &SparseGraph, labels: &[usize]) -> f64 {
    let n = graph.n;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = graph.self_loops[i];
        for &(j, w) in &graph.adj[i] {
            a[i][j] = w;
        }
    }
    let deg: Vec<f64> = (0..n)
        .map(|i| a[i].iter().sum::<f64>() + a[i][i])
        .collect();
    let two_m: f64 = deg.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                let aij = if i == j { 2.0 * a[i][i] } else { a[i][j] };
                q += aij / two_m - (deg[i] / two_m) * (deg[j] / two_m);
            }
        }
    }
    q
}

/// All partitions of n items as restricted growth strings.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            current[pos] = label;
            rec(current, pos + 1, max_used.max(label), out);
        }
    }
    if n > 0 {
        rec(&mut current, 1, 0, &mut out);
    }
    out
}

#[test]
fn criterion_4_clustering_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    for case in 0..50 {
        let a = rng.gen_range(2..=4);
        let b = rng.gen_range(2..=4);
        let n = a + b;
        let mut edges = Vec::new();
        for i in 0..a {
            for j in (i + 1)..a {
                edges.push((i, j, 1.0));
            }
        }
        for i in a..n {
            for j in (i + 1)..n {
                edges.push((i, j, 1.0));
            }
        }
        // weak bridge between the cliques
        edges.push((
            rng.gen_range(0..a),
            rng.gen_range(a..n),
            rng.gen_range(0.05..0.4),
        ));
        let graph = graph_from_edges(n, &edges);

        let best_enum = all_partitions(n)
            .iter()
            .map(|labels| modularity_direct(&graph, labels))
            .fold(f64::NEG_INFINITY, f64::max);

        let louvain = modisco::cluster::louvain_consensus_cluster(&graph, 20, 10, case);
        let leiden = modisco::cluster::leiden_multi_seed(&graph, 10, None, case);
        for result in [&louvain, &leiden] {
            // reported modularity matches the direct formula
            ok &= (result.modularity - modularity_direct(&graph, &result.labels)).abs() < 1e-12;
            // and attains the enumerated optimum
            ok &= (result.modularity - best_enum).abs() < 1e-9;
        }
    }
    report(4, "modularity and clustering oracles", ok);
}

// ---------------------------------------------------------------- criterion 5

fn laplace_draws(rng: &mut ChaCha8Rng, n: usize, lambda: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln() / lambda;
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

#[test]
fn criterion_5_fdr_calibration() {
    let lambda = 1.5;
    let sigma = std::f64::consts::SQRT_2 / lambda;
    let n = 100_000;
    let mut ok = true;

    let mut total_pass_frac = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let orig = laplace_draws(&mut rng, n, lambda);
        let null = laplace_draws(&mut rng, n, lambda);
        let t = fdr_thresholds(&orig, &null, 0.05).unwrap();
        let passing = orig.iter().filter(|&&v| t.passes(v)).count();
        total_pass_frac += passing as f64 / n as f64;
    }
    let mean_pass = total_pass_frac / 20.0;
    println!("  orig == null mean passing fraction: {mean_pass:.5}");
    ok &= mean_pass < 0.01;

    // planted +10 sigma signal with 5% mass
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let mut orig = laplace_draws(&mut rng, n * 95 / 100, lambda);
    let signal: Vec<f64> = (0..n / 20)
        .map(|_| 10.0 * sigma + rng.gen_range(-0.1..0.1) * sigma)
        .collect();
    orig.extend(signal.iter());
    let null = laplace_draws(&mut rng, n, lambda);
    let t = fdr_thresholds(&orig, &null, 0.05).unwrap();
    let recall =
        signal.iter().filter(|&&v| t.passes(v)).count() as f64 / signal.len() as f64;
    println!("  signal recall: {recall:.4}");
    ok &= recall > 0.95;
    report(5, "FDR calibration", ok);
}

// ---------------------------------------------------------------- criterion 6

fn planted_pwm(name: &str, rows: &[[f64; 4]]) -> PlantedPwm {
    PlantedPwm {
        name: name.into(),
        pwm: rows.to_vec(),
        tasks: vec![("t0".into(), 1)],
    }
}

fn two_plant_synth() -> SynthConfig {
    let s = 0.91;
    let w = 0.03;
    // two dissimilar 12-bp patterns
    let pwm_a: Vec<[f64; 4]> = (0..12)
        .map(|p| {
            let mut row = [w; 4];
            row[[0, 1, 2, 3, 0, 2, 1, 3, 2, 0, 3, 1][p]] = s;
            row
        })
        .collect();
    let pwm_b: Vec<[f64; 4]> = (0..12)
        .map(|p| {
            let mut row = [w; 4];
            row[[3, 3, 0, 0, 1, 1, 3, 0, 0, 2, 2, 2][p]] = s;
            row
        })
        .collect();
    SynthConfig {
        tasks: vec!["t0".into()],
        num_sequences: 500,
        sequence_length: 200,
        motifs: vec![planted_pwm("a", &pwm_a), planted_pwm("b", &pwm_b)],
        noise_sigma: 0.1,
        plant_fraction: 1.0,
        margin: 30,
        fixed_position: None,
    }
}

fn end_to_end_config() -> PipelineConfig {
    PipelineConfig {
        // a larger neighborhood and a softer size floor suit this dataset's
        // scale (hundreds of seqlets rather than tens of thousands)
        perplexity: 30.0,
        final_min_cluster_size: 20,
        ..Default::default()
    }
}

/// Best sliding-window Pearson between an averaged contribution track and a
/// planted log-odds pattern, over both orientations.
fn best_pattern_match(contrib: &[[f64; 4]], pattern: &[[f64; 4]]) -> f64 {
    let flat: Vec<f64> = pattern.iter().flatten().copied().collect();
    let rc: Vec<f64> = pattern
        .iter()
        .rev()
        .flat_map(|row| [row[3], row[2], row[1], row[0]])
        .collect();
    let w = pattern.len();
    let mut best = f64::NEG_INFINITY;
    for start in 0..=contrib.len().saturating_sub(w) {
        let window: Vec<f64> = contrib[start..start + w].iter().flatten().copied().collect();
        for target in [&flat, &rc] {
            best = best.max(modisco::util::pearson(&window, target));
        }
    }
    best
}

fn plants_recovered(results: &ResultsBundle, synth_cfg: &SynthConfig) -> bool {
    synth_cfg.motifs.iter().all(|plant| {
        let pattern = log_odds_matrix(&plant.pwm);
        results.metaclusters.iter().any(|mc| {
            mc.motifs
                .iter()
                .any(|m| best_pattern_match(&m.tracks[0].contrib, &pattern) >= 0.9)
        })
    })
}

#[test]
fn criterion_6_end_to_end_recovery() {
    let synth_cfg = two_plant_synth();
    let synth = generate_synthetic(&synth_cfg, 606).unwrap();
    let config = end_to_end_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let runs: Vec<String> = (0..3)
        .map(|_| {
            let out = pool.install(|| run_pipeline(&synth.dataset, &config)).unwrap();
            serde_json::to_string(&out).unwrap()
        })
        .collect();
    let elapsed = start.elapsed();
    println!("  three single-threaded runs took {elapsed:?}");
    let first: ResultsBundle = serde_json::from_str(&runs[0]).unwrap();
    let total_motifs: usize = first.metaclusters.iter().map(|m| m.motifs.len()).sum();
    println!("  {} motifs returned", total_motifs);
    let ok = total_motifs >= 2
        && plants_recovered(&first, &synth_cfg)
        && runs.iter().all(|r| r == &runs[0])
        && elapsed.as_secs_f64() / 3.0 < 300.0;
    report(6, "end-to-end planted-motif recovery", ok);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_spurious_merge_round_trip() {
    let synth_cfg = two_plant_synth();
    let synth = generate_synthetic(&synth_cfg, 707).unwrap();
    // build seqlets directly from the plant coordinates, 50 per pattern
    let mut per_plant: Vec<Vec<Seqlet>> = vec![Vec::new(); 2];
    for plant in &synth.plants {
        let which = if plant.motif == "a" { 0 } else { 1 };
        if per_plant[which].len() >= 50 {
            continue;
        }
        let start = plant.start.saturating_sub(10);
        let end = (plant.end + 10).min(synth_cfg.sequence_length);
        per_plant[which].push(Seqlet::slice(
            &synth.dataset,
            plant.sequence_index,
            start,
            end,
            12,
            0,
        ));
    }
    let pooled: Vec<Seqlet> = per_plant.concat();
    let motif = aggregate_cluster(&pooled, &[0], 0.7, true).unwrap();
    let ctx = PostprocessContext {
        dataset: &synth.dataset,
        relevant_tasks: vec![0],
        min_overlap: 0.7,
        revcomp: true,
        perplexity: 10.0,
        trim_window: 12,
        flank: 4,
        sliding_window: 12,
        seed: 7,
    };
    let split = detect_spurious_merge(motif, &ctx, 30, 0.8).unwrap();
    println!("  split into {} sub-motifs", split.len());
    let mut ok = split.len() == 2;
    if ok {
        // each sub-motif matches a distinct plant at Pearson >= 0.9
        let mut matched = [false; 2];
        for sub in &split {
            for (k, plant) in synth_cfg.motifs.iter().enumerate() {
                let r = best_pattern_match(&sub.tracks[0].contrib, &log_odds_matrix(&plant.pwm));
                if r >= 0.9 {
                    matched[k] = true;
                }
            }
        }
        ok &= matched[0] && matched[1];
    }
    report(7, "spurious-merge round trip", ok);
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8a_continuous_jaccard_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let v1: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cj = continuous_jaccard(&v1, &v2);
        ok &= cj.abs() <= 1.0 + 1e-12;
        ok &= (cj - continuous_jaccard(&v2, &v1)).abs() < 1e-12;
        let c = rng.gen_range(0.1..10.0);
        let s1: Vec<f64> = v1.iter().map(|x| x * c).collect();
        let s2: Vec<f64> = v2.iter().map(|x| x * c).collect();
        ok &= (cj - continuous_jaccard(&s1, &s2)).abs() < 1e-9;
        if v1.iter().any(|&x| x != 0.0) {
            ok &= (continuous_jaccard(&v1, &v1) - 1.0).abs() < 1e-12;
        }
    }
    report(8, "continuous Jaccard property suite", ok);
}

#[test]
fn criterion_8b_ecdf_rank_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(82);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=40);
        let tasks = rng.gen_range(1..=3);
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..tasks).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let scales: Vec<f64> = (0..tasks).map(|_| rng.gen_range(0.01..100.0)).collect();
        let scaled: Vec<Vec<f64>> = raw
            .iter()
            .map(|row| row.iter().zip(&scales).map(|(v, s)| v * s).collect())
            .collect();
        let a = percentile_transform(&raw, false);
        let b = percentile_transform(&scaled, false);
        ok &= a.values == b.values;
    }
    report(8, "ECDF transform rank invariance", ok);
}

#[test]
fn criterion_8c_dataset_round_trip() {
    let mut ok = true;
    for case in 0..1000u64 {
        let cfg = SynthConfig {
            tasks: vec!["t0".into()],
            num_sequences: 2,
            sequence_length: 14,
            motifs: vec![planted_pwm("m", &[[0.7, 0.1, 0.1, 0.1]; 4])],
            noise_sigma: 0.2,
            plant_fraction: 1.0,
            margin: 4,
            fixed_position: None,
        };
        let synth = generate_synthetic(&cfg, case).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a");
        let second = dir.path().join("b");
        save_dataset(&synth.dataset, &first).unwrap();
        let loaded = load_dataset(&first).unwrap();
        save_dataset(&loaded, &second).unwrap();
        for entry in std::fs::read_dir(&first).unwrap() {
            let name = entry.unwrap().file_name();
            let x = std::fs::read(first.join(&name)).unwrap();
            let y = std::fs::read(second.join(&name)).unwrap();
            ok &= x == y;
        }
    }
    report(8, "dataset round-trip byte identity", ok);
}

#[test]
fn criterion_8d_dicluster_at_most_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(84);
    let mut ok = true;
    for case in 0..1000u64 {
        let n = rng.gen_range(2..=8);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.6 {
                    edges.push((i, j, rng.gen_range(0.1..1.0)));
                }
            }
        }
        let graph = graph_from_edges(n, &edges);
        let labels = modisco::cluster::dicluster(&graph, 3, case);
        ok &= labels.num_clusters() <= 2;
        ok &= labels.labels.len() == n;
    }
    report(8, "dicluster label bound", ok);
}

#[test]
fn criterion_8e_post_merge_no_similar_pair() {
    let mut ok = true;
    let criteria = MergeCriteria::default();
    for case in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8500 + case);
        let cfg = SynthConfig {
            tasks: vec!["t0".into()],
            num_sequences: 9,
            sequence_length: 40,
            motifs: vec![planted_pwm(
                "m",
                &[
                    [0.8, 0.1, 0.05, 0.05],
                    [0.05, 0.8, 0.1, 0.05],
                    [0.05, 0.05, 0.8, 0.1],
                    [0.1, 0.05, 0.05, 0.8],
                    [0.8, 0.1, 0.05, 0.05],
                    [0.05, 0.8, 0.1, 0.05],
                ],
            )],
            noise_sigma: rng.gen_range(0.05..0.5),
            plant_fraction: 1.0,
            margin: 10,
            fixed_position: None,
        };
        let synth = generate_synthetic(&cfg, case).unwrap();
        let ctx = PostprocessContext {
            dataset: &synth.dataset,
            relevant_tasks: vec![0],
            min_overlap: 0.7,
            revcomp: true,
            perplexity: 3.0,
            trim_window: 8,
            flank: 2,
            sliding_window: 6,
            seed: case,
        };
        let motifs: Vec<Motif> = (0..3)
            .map(|k| {
                let seqlets: Vec<Seqlet> = (0..3)
                    .map(|i| {
                        let si = 3 * k + i;
                        let start = rng.gen_range(5..20);
                        Seqlet::slice(&synth.dataset, si, start, start + 14, 6, 0)
                    })
                    .collect();
                ctx.rebuild(&seqlets).unwrap()
            })
            .collect();
        let merged = iterative_merge(motifs, &criteria, &ctx).unwrap();
        // at the fixed point, no surviving pair is mergeable: similar pairs
        // must also be dissimilar (self-blocking)
        let pooled: Vec<_> = merged
            .iter()
            .flat_map(|m| m.members.iter())
            .map(|mm| mm.feature_matrix(&[0]))
            .collect();
        let betas: Vec<f64> = merged
            .iter()
            .map(|m| motif_beta(m, &pooled, &ctx).unwrap().beta)
            .collect();
        for i in 0..merged.len() {
            for j in (i + 1)..merged.len() {
                let c = crosscorr_similarity(&merged[i], &merged[j], &[0], 0.7, true);
                let fi = merged[i].feature_matrix(&[0]);
                let fj = merged[j].feature_matrix(&[0]);
                let d = modisco::cluster::affinity_to_distance(
                    best_alignment_cj(&fi, &fj, 0.7, true).unwrap().similarity,
                );
                let p = density_sensitive_sim(betas[i], betas[j], d);
                if criteria.is_similar(p, c) {
                    ok &= criteria.is_dissimilar(p, c);
                }
            }
        }
    }
    report(8, "post-merge no-similar-pair invariant", ok);
}
