//! End-to-end orchestration of the three pipeline phases.

use crate::aggregate::{
    aggregate_clusters, center_and_standardize, expand_to_fill, sign_consistency_filter,
    trim_to_support, Motif,
};
use crate::cluster::{
    conditional_probs, distances_from_affinities, leiden_multi_seed, louvain_consensus_cluster,
    symmetrize,
};
use crate::coarse::coarse_affmat_and_neighbors;
use crate::config::PipelineConfig;
use crate::dataset::{
    Dataset, MemberCoord, MetaclusterResult, MotifResult, MotifTaskTracks, ResultsBundle,
};
use crate::error::Result;
use crate::fine::{fine_affmat, noise_filter, SparseRows};
use crate::metacluster::{metacluster_assign, percentile_transform, ActivityPattern, Metacluster};
use crate::postprocess::{
    detect_spurious_merge, final_flank_expand, iterative_merge, reassign_small_clusters,
    PostprocessContext,
};
use crate::seqlets::{
    adjust_thresholds_by_frac, extract_seqlets_one_task, fdr_thresholds, fit_laplace_null,
    sample_null, union_seqlets, window_sums, window_sums_1d, Seqlet,
};
use crate::util::{stage_seed, Ecdf};

/// Phase 1a for one task: thresholds from the FDR fit, adjusted by the
/// passing-fraction bounds, then greedy extraction. Also returns the
/// adjusted thresholds for the metaclustering strong-threshold record.
fn extract_task_seqlets(
    dataset: &Dataset,
    task: usize,
    config: &PipelineConfig,
) -> Result<(Vec<Seqlet>, Option<crate::seqlets::ThresholdPair>)> {
    let w = config.sliding_window_size;
    let mut orig: Vec<f64> = Vec::new();
    for seq in &dataset.sequences {
        if seq.len() >= w {
            orig.extend(window_sums(&seq.tracks[task].contrib, w)?);
        }
    }
    if orig.is_empty() {
        return Ok((Vec::new(), None));
    }
    let task_name = &dataset.tasks[task];
    let null_windows: Vec<f64> = match dataset.nulls.as_ref().and_then(|m| m.get(task_name)) {
        Some(rows) => {
            let mut out = Vec::new();
            for row in rows {
                if row.len() >= w {
                    out.extend(window_sums_1d(row, w)?);
                }
            }
            out
        }
        None => {
            let model = fit_laplace_null(&orig)?;
            let seed = stage_seed(config.master_seed, &format!("null/{task_name}"));
            sample_null(&model, orig.len(), seed)
        }
    };
    let fitted = fdr_thresholds(&orig, &null_windows, config.target_fdr)?;
    let adjusted = adjust_thresholds_by_frac(
        &orig,
        &fitted,
        config.min_passing_windows_frac,
        config.max_passing_windows_frac,
        config.separate_pos_neg_thresholds,
    );
    log::info!(
        "task {task_name}: thresholds [{:.4}, {:.4}], cdf cutoffs ({:.4}, {:.4})",
        adjusted.neg_threshold,
        adjusted.pos_threshold,
        adjusted.transformed_cdf_cutoffs.0,
        adjusted.transformed_cdf_cutoffs.1
    );
    let seqlets = extract_seqlets_one_task(dataset, task, &adjusted, w, config.flank_size)?;
    Ok((seqlets, Some(adjusted)))
}

/// Strong compatibility threshold for metaclustering: the most lenient
/// (smallest) per-task percentile, within the seqlet score distribution,
/// of any task's final window threshold.
fn strong_threshold_from_seqlets(
    seqlets: &[Seqlet],
    thresholds: &[Option<crate::seqlets::ThresholdPair>],
) -> f64 {
    let mut strong = 1.0f64;
    for (t, pair) in thresholds.iter().enumerate() {
        let Some(pair) = pair else { continue };
        let ecdf = Ecdf::new(seqlets.iter().map(|s| s.task_scores[t].abs()));
        for mag in [pair.pos_threshold, -pair.neg_threshold] {
            if mag.is_finite() {
                strong = strong.min(ecdf.eval(mag));
            }
        }
    }
    strong
}

/// Drop rows into the kept-index subspace, remapping column indices and
/// discarding entries that point at removed rows.
fn subset_sparse(rows: &SparseRows, keep: &[usize]) -> SparseRows {
    let mut map = vec![usize::MAX; rows.len()];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = new;
    }
    keep.iter()
        .map(|&old| {
            rows[old]
                .iter()
                .filter(|&&(j, _)| map[j] != usize::MAX)
                .map(|&(j, v)| (map[j], v))
                .collect()
        })
        .collect()
}

fn subset_vec<T: Clone>(items: &[T], keep: &[usize]) -> Vec<T> {
    keep.iter().map(|&i| items[i].clone()).collect()
}

/// Trim, expand, and standardize one motif; None when boundary editing
/// leaves too little span or drops every member.
fn edit_motif(
    motif: &Motif,
    dataset: &Dataset,
    relevant_tasks: &[usize],
    config: &PipelineConfig,
) -> Option<Motif> {
    let trimmed = trim_to_support(
        motif,
        config.frac_support_to_trim_to,
        config.min_num_to_trim_to,
    )
    .ok()?;
    let expanded = expand_to_fill(&trimmed, dataset, config.sliding_window_size).ok()?;
    center_and_standardize(
        &expanded,
        dataset,
        relevant_tasks,
        config.trim_to_window_size,
        config.initial_flank_to_add,
        config.sliding_window_size,
    )
    .ok()
}

/// Phase 2 for one seqlet set: affinities, noise filtering, density
/// transform, community detection, aggregation, and boundary editing.
fn cluster_and_aggregate(
    seqlets: Vec<Seqlet>,
    pattern: &ActivityPattern,
    dataset: &Dataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Vec<Motif>> {
    if seqlets.len() < 2 {
        log::info!("fewer than 2 seqlets; no clusters formed");
        return Ok(Vec::new());
    }
    let relevant_tasks = pattern.relevant_tasks();
    let spec = config.kmer_spec();
    let (coarse, neighbors) = coarse_affmat_and_neighbors(
        &seqlets,
        &spec,
        pattern,
        config.nearest_neighbors_to_compute,
        config.revcomp,
    )?;
    let fine = fine_affmat(
        &seqlets,
        &neighbors,
        pattern,
        config.min_overlap_while_sliding,
        config.revcomp,
    )?;
    let kept = noise_filter(&coarse, &fine, config.affmat_correlation_threshold);
    log::info!(
        "noise filter kept {} of {} seqlets",
        kept.len(),
        seqlets.len()
    );
    let mut seqlets = subset_vec(&seqlets, &kept);
    let mut fine = subset_sparse(&fine, &kept);
    // drop seqlets left with no finite-distance neighbor: the density
    // transform is undefined for them and they cannot join any community
    let mut dmat = distances_from_affinities(&fine);
    loop {
        let connected: Vec<usize> = (0..dmat.len()).filter(|&i| !dmat[i].is_empty()).collect();
        if connected.len() == dmat.len() {
            break;
        }
        log::info!(
            "dropping {} isolated seqlets before clustering",
            dmat.len() - connected.len()
        );
        seqlets = subset_vec(&seqlets, &connected);
        fine = subset_sparse(&fine, &connected);
        dmat = distances_from_affinities(&fine);
    }
    let n = seqlets.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let (cond, _) = conditional_probs(&dmat, config.perplexity)?;
    let graph = symmetrize(&cond, n);
    let labels = if config.use_louvain {
        louvain_consensus_cluster(
            &graph,
            config.louvain_membership_average_n_runs,
            config.louvain_patience,
            seed,
        )
    } else {
        leiden_multi_seed(&graph, config.leiden_n_seeds, None, seed)
    };
    let mut clusters: Vec<Vec<Seqlet>> = vec![Vec::new(); labels.num_clusters()];
    for (s, &l) in seqlets.into_iter().zip(labels.labels.iter()) {
        clusters[l].push(s);
    }
    log::info!(
        "community detection found {} clusters (modularity {:.4})",
        clusters.len(),
        labels.modularity
    );
    let raw = aggregate_clusters(
        &clusters,
        &relevant_tasks,
        config.min_overlap_while_sliding,
        config.revcomp,
    )?;
    let edited: Vec<Motif> = raw
        .iter()
        .filter_map(|m| edit_motif(m, dataset, &relevant_tasks, config))
        .collect();
    let motifs = sign_consistency_filter(edited, pattern);
    log::info!(
        "{} motifs survive boundary editing and the sign filter",
        motifs.len()
    );
    Ok(motifs)
}

fn motif_to_result(motif: &Motif, dataset: &Dataset) -> MotifResult {
    MotifResult {
        length: motif.len,
        num_members: motif.num_members(),
        members: motif
            .members
            .iter()
            .map(|m| MemberCoord {
                sequence_index: m.seqlet.coord.sequence_index,
                start: m.seqlet.coord.start,
                end: m.seqlet.coord.end,
                revcomp: m.revcomp,
                offset: m.offset as i64,
            })
            .collect(),
        seq_frequency: motif.seqfreq.clone(),
        tracks: motif
            .tracks
            .iter()
            .enumerate()
            .map(|(t, tr)| MotifTaskTracks {
                task: dataset.tasks[t].clone(),
                contrib: tr.contrib.clone(),
                hyp: tr.hyp.clone(),
            })
            .collect(),
    }
}

/// Run the full pipeline. Deterministic given the dataset bytes, the
/// configuration, and `config.master_seed`.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<ResultsBundle> {
    dataset.validate()?;
    config.validate()?;

    // Phase 1: extraction and metaclustering
    let num_tasks = dataset.tasks.len();
    let mut per_task: Vec<Vec<Seqlet>> = Vec::with_capacity(num_tasks);
    let mut thresholds = Vec::with_capacity(num_tasks);
    for task in 0..num_tasks {
        let (seqlets, pair) = extract_task_seqlets(dataset, task, config)?;
        log::info!("task {}: {} seqlets extracted", dataset.tasks[task], seqlets.len());
        thresholds.push(pair);
        per_task.push(seqlets);
    }
    let unified = union_seqlets(per_task, config.overlap_portion);
    log::info!("{} seqlets after cross-task union", unified.len());
    if unified.is_empty() {
        return Ok(ResultsBundle {
            metaclusters: Vec::new(),
        });
    }

    let raw_scores: Vec<Vec<f64>> = unified.iter().map(|s| s.task_scores.clone()).collect();
    let transformed = percentile_transform(&raw_scores, config.separate_pos_neg_thresholds);
    let strong = strong_threshold_from_seqlets(&unified, &thresholds);
    let metaclusters: Vec<Metacluster> = metacluster_assign(
        &transformed,
        strong,
        config.weak_threshold,
        config.min_metacluster_size,
        config.min_metacluster_size_frac,
        config.max_seqlets_per_metacluster,
    )?
    .into_iter()
    .filter(|mc| mc.pattern.num_nonzero() > 0)
    .collect();
    log::info!(
        "{} metaclusters with a nonzero activity pattern",
        metaclusters.len()
    );

    // Phases 2 and 3 per metacluster
    let mut results = Vec::new();
    for (mi, mc) in metaclusters.iter().enumerate() {
        let seqlets: Vec<Seqlet> = mc
            .seqlet_indices
            .iter()
            .map(|&i| unified[i].clone())
            .collect();
        log::info!(
            "metacluster {mi} (pattern {:?}): {} seqlets",
            mc.pattern.0,
            seqlets.len()
        );
        let mut motifs = cluster_and_aggregate(
            seqlets,
            &mc.pattern,
            dataset,
            config,
            stage_seed(config.master_seed, &format!("cluster/mc{mi}/round0")),
        )?;
        for round in 1..=config.extra_cluster_rounds {
            let pooled: Vec<Seqlet> = motifs
                .iter()
                .flat_map(|m| m.members.iter().map(|mm| mm.seqlet.clone()))
                .collect();
            if pooled.len() < 2 {
                break;
            }
            motifs = cluster_and_aggregate(
                pooled,
                &mc.pattern,
                dataset,
                config,
                stage_seed(config.master_seed, &format!("cluster/mc{mi}/round{round}")),
            )?;
        }

        let ctx = PostprocessContext {
            dataset,
            relevant_tasks: mc.pattern.relevant_tasks(),
            min_overlap: config.min_overlap_while_sliding,
            revcomp: config.revcomp,
            perplexity: config.perplexity,
            trim_window: config.trim_to_window_size,
            flank: config.initial_flank_to_add,
            sliding_window: config.sliding_window_size,
            seed: stage_seed(config.master_seed, &format!("postprocess/mc{mi}")),
        };
        let mut split = Vec::new();
        for motif in motifs {
            split.extend(detect_spurious_merge(
                motif,
                &ctx,
                config.min_size_for_spurious_merge_detection,
                config.threshold_for_spurious_merge_detection,
            )?);
        }
        log::info!("metacluster {mi}: {} motifs after spurious-merge splits", split.len());
        let merged = iterative_merge(split, &config.merge_criteria, &ctx)?;
        log::info!("metacluster {mi}: {} motifs after merging", merged.len());
        let assigned = reassign_small_clusters(
            merged,
            config.final_min_cluster_size,
            config.min_similarity_for_seqlet_assignment,
            &ctx,
        )?;
        let mut finals = final_flank_expand(assigned, config.final_flank_to_add, &ctx)?;
        finals.sort_by(|a, b| b.num_members().cmp(&a.num_members()));
        log::info!("metacluster {mi}: {} final motifs", finals.len());
        results.push(MetaclusterResult {
            activity_pattern: mc.pattern.0.clone(),
            num_seqlets: mc.seqlet_indices.len(),
            motifs: finals.iter().map(|m| motif_to_result(m, dataset)).collect(),
        });
    }
    Ok(ResultsBundle {
        metaclusters: results,
    })
}
