//! Phase 3 postprocessing: split spuriously merged motifs, merge redundant
//! motifs with density-sensitive similarity, reassign seqlets from disbanded
//! small clusters, and expand final flanks.

use rayon::prelude::*;

use crate::aggregate::{
    aggregate_cluster, center_and_standardize, reslice_member, Motif, MotifMember,
};
use crate::cluster::{
    affinity_to_distance, beta_for_perplexity, conditional_probs, dicluster, symmetrize,
    BetaResult,
};
use crate::dataset::Dataset;
use crate::error::{ModiscoError, Result};
use crate::fine::{
    best_alignment_cj, continuous_jaccard_at_offset, FeatureMatrix, SparseRows,
};
use crate::seqlets::Seqlet;
use crate::util::pearson;

/// Shared knobs for the postprocessing stage.
#[derive(Debug, Clone)]
pub struct PostprocessContext<'a> {
    pub dataset: &'a Dataset,
    pub relevant_tasks: Vec<usize>,
    /// min_overlap_while_sliding, used by every alignment search here.
    pub min_overlap: f64,
    pub revcomp: bool,
    pub perplexity: f64,
    /// Standardization window (trim_to_window_size) and flank
    /// (initial_flank_to_add) applied after re-aggregation.
    pub trim_window: usize,
    pub flank: usize,
    pub sliding_window: usize,
    pub seed: u64,
}

impl PostprocessContext<'_> {
    /// Aggregate pooled seqlets and restore the standardized length.
    pub fn rebuild(&self, seqlets: &[Seqlet]) -> Result<Motif> {
        let motif = aggregate_cluster(seqlets, &self.relevant_tasks, self.min_overlap, self.revcomp)?;
        center_and_standardize(
            &motif,
            self.dataset,
            &self.relevant_tasks,
            self.trim_window,
            self.flank,
            self.sliding_window,
        )
    }
}

/// Pairwise Continuous Jaccard between member feature matrices at their
/// existing alignments (no alignment search). Dense, symmetric, unit diag.
pub fn within_motif_affmat(motif: &Motif, relevant_tasks: &[usize]) -> Vec<Vec<f64>> {
    let n = motif.members.len();
    let features: Vec<FeatureMatrix> = motif
        .members
        .par_iter()
        .map(|m| m.feature_matrix(relevant_tasks))
        .collect();
    let mut aff = vec![vec![0.0; n]; n];
    for i in 0..n {
        aff[i][i] = 1.0;
        for j in (i + 1)..n {
            let rel = motif.members[j].offset - motif.members[i].offset;
            let v = continuous_jaccard_at_offset(&features[i], &features[j], rel);
            aff[i][j] = v;
            aff[j][i] = v;
        }
    }
    aff
}

/// Mean/magnitude-normalized correlation: subtract means, divide by the
/// centered Euclidean norms, dot (i.e. the Pearson correlation).
pub fn normalized_corr(a: &[f64], b: &[f64]) -> f64 {
    pearson(a, b)
}

fn motif_rows(motif: &Motif, relevant_tasks: &[usize], revcomp: bool) -> Vec<Vec<f64>> {
    let width = 8 * relevant_tasks.len();
    let mut rows = vec![Vec::with_capacity(width); motif.len];
    for (p, row) in rows.iter_mut().enumerate() {
        let sp = if revcomp { motif.len - 1 - p } else { p };
        for &t in relevant_tasks {
            let h = motif.tracks[t].hyp[sp];
            let c = motif.tracks[t].contrib[sp];
            if revcomp {
                row.extend_from_slice(&[h[3], h[2], h[1], h[0]]);
                row.extend_from_slice(&[c[3], c[2], c[1], c[0]]);
            } else {
                row.extend_from_slice(&h);
                row.extend_from_slice(&c);
            }
        }
    }
    rows
}

/// Cross-correlation similarity of two motifs: flatten the averaged tracks
/// over each admissible alignment window, Pearson-correlate, and take the
/// maximum over offsets and orientations.
pub fn crosscorr_similarity(
    m1: &Motif,
    m2: &Motif,
    relevant_tasks: &[usize],
    min_overlap: f64,
    revcomp: bool,
) -> f64 {
    let rows1 = motif_rows(m1, relevant_tasks, false);
    let l1 = m1.len as isize;
    let l2 = m2.len as isize;
    let need = (min_overlap * m1.len.min(m2.len) as f64).ceil().max(1.0) as isize;
    let orientations: Vec<Vec<Vec<f64>>> = if revcomp {
        vec![
            motif_rows(m2, relevant_tasks, false),
            motif_rows(m2, relevant_tasks, true),
        ]
    } else {
        vec![motif_rows(m2, relevant_tasks, false)]
    };
    let mut best = f64::NEG_INFINITY;
    for rows2 in &orientations {
        for off in (1 - l2)..l1 {
            let lo = off.max(0);
            let hi = l1.min(off + l2);
            if hi - lo < need {
                continue;
            }
            let mut a = Vec::with_capacity(((hi - lo) as usize) * rows1[0].len());
            let mut b = Vec::with_capacity(a.capacity());
            for p in lo..hi {
                a.extend_from_slice(&rows1[p as usize]);
                b.extend_from_slice(&rows2[(p - off) as usize]);
            }
            let c = normalized_corr(&a, &b);
            if c > best {
                best = c;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Split a motif whose within-motif affinity graph diclusters into two
/// sub-motifs that correlate poorly; recurses on the splits.
pub fn detect_spurious_merge(
    motif: Motif,
    ctx: &PostprocessContext,
    min_size: usize,
    corr_threshold: f64,
) -> Result<Vec<Motif>> {
    if motif.num_members() <= min_size {
        return Ok(vec![motif]);
    }
    let aff = within_motif_affmat(&motif, &ctx.relevant_tasks);
    let n = aff.len();
    let dmat: SparseRows = aff
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .filter_map(|(j, &a)| {
                    let d = affinity_to_distance(a);
                    d.is_finite().then_some((j, d))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if dmat.iter().any(|row| row.is_empty()) {
        // an isolated member leaves the density transform undefined; keep
        // the motif intact rather than split on degenerate evidence
        return Ok(vec![motif]);
    }
    let (cond, _) = conditional_probs(&dmat, ctx.perplexity.min((n - 1) as f64))?;
    let graph = symmetrize(&cond, n);
    let labels = dicluster(&graph, 20, ctx.seed);
    if labels.num_clusters() < 2 {
        return Ok(vec![motif]);
    }
    let mut sides: [Vec<Seqlet>; 2] = [Vec::new(), Vec::new()];
    for (m, &l) in motif.members.iter().zip(labels.labels.iter()) {
        sides[l].push(m.seqlet.clone());
    }
    if sides[0].is_empty() || sides[1].is_empty() {
        return Ok(vec![motif]);
    }
    let sub0 = aggregate_cluster(&sides[0], &ctx.relevant_tasks, ctx.min_overlap, ctx.revcomp)?;
    let sub1 = aggregate_cluster(&sides[1], &ctx.relevant_tasks, ctx.min_overlap, ctx.revcomp)?;
    let corr = crosscorr_similarity(&sub0, &sub1, &ctx.relevant_tasks, ctx.min_overlap, ctx.revcomp);
    if corr < corr_threshold {
        let mut out = detect_spurious_merge(sub0, ctx, min_size, corr_threshold)?;
        out.extend(detect_spurious_merge(sub1, ctx, min_size, corr_threshold)?);
        Ok(out)
    } else {
        Ok(vec![motif])
    }
}

/// Calibrate a motif's beta so the perplexity over its distances to all
/// pooled seqlets equals its member count.
pub fn motif_beta(
    motif: &Motif,
    seqlet_features: &[FeatureMatrix],
    ctx: &PostprocessContext,
) -> Result<BetaResult> {
    let fm = motif.feature_matrix(&ctx.relevant_tasks);
    let dists: Vec<f64> = seqlet_features
        .par_iter()
        .map(|sf| {
            best_alignment_cj(&fm, sf, ctx.min_overlap, ctx.revcomp)
                .map(|r| affinity_to_distance(r.similarity))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|d| d.is_finite())
        .collect();
    if dists.is_empty() {
        return Err(ModiscoError::Validation(
            "motif has no finite distances to the seqlet pool".into(),
        ));
    }
    beta_for_perplexity(&dists, motif.num_members() as f64)
}

/// exp(-max(beta_i, beta_j) * d_ij): the tighter cluster decides the scale.
pub fn density_sensitive_sim(beta_i: f64, beta_j: f64, d_ij: f64) -> f64 {
    (-beta_i.max(beta_j) * d_ij).exp()
}

/// Merge criteria: a pair is `similar` when (p, c) exceeds any (p_min, c_min)
/// disjunct, and `dissimilar` when it falls under any (p_max, c_max).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MergeCriteria {
    pub similar: Vec<(f64, f64)>,
    pub dissimilar: Vec<(f64, f64)>,
}

impl Default for MergeCriteria {
    fn default() -> Self {
        MergeCriteria {
            similar: vec![(1e-4, 0.84), (1e-5, 0.87), (1e-6, 0.90)],
            dissimilar: vec![(0.1, 0.75), (0.01, 0.80), (0.001, 0.83), (1e-7, 0.90)],
        }
    }
}

impl MergeCriteria {
    pub fn is_similar(&self, p: f64, c: f64) -> bool {
        self.similar.iter().any(|&(pm, cm)| p > pm && c > cm)
    }

    pub fn is_dissimilar(&self, p: f64, c: f64) -> bool {
        self.dissimilar.iter().any(|&(pm, cm)| p < pm && c < cm)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
            r
        } else {
            i
        }
    }

    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.0[ri.max(rj)] = ri.min(rj);
        }
    }
}

/// One sweep's pairwise similarity measurements.
fn pairwise_measurements(
    motifs: &[Motif],
    ctx: &PostprocessContext,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = motifs.len();
    let features: Vec<FeatureMatrix> = motifs
        .iter()
        .map(|m| m.feature_matrix(&ctx.relevant_tasks))
        .collect();
    // betas against the pooled member seqlets of every motif
    let pooled: Vec<FeatureMatrix> = motifs
        .iter()
        .flat_map(|m| m.members.iter())
        .map(|mm| mm.feature_matrix(&ctx.relevant_tasks))
        .collect();
    let betas: Vec<f64> = motifs
        .iter()
        .map(|m| motif_beta(m, &pooled, ctx).map(|b| b.beta))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let measured: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let c = crosscorr_similarity(
                &motifs[i],
                &motifs[j],
                &ctx.relevant_tasks,
                ctx.min_overlap,
                ctx.revcomp,
            );
            let d = best_alignment_cj(&features[i], &features[j], ctx.min_overlap, ctx.revcomp)
                .map(|r| affinity_to_distance(r.similarity))?;
            let p = density_sensitive_sim(betas[i], betas[j], d);
            Ok((c, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cmat = vec![vec![0.0; n]; n];
    let mut pmat = vec![vec![0.0; n]; n];
    for (&(i, j), &(c, p)) in pairs.iter().zip(measured.iter()) {
        log::debug!(
            "merge pair ({i}, {j}): c = {c:.4}, p = {p:.3e}, betas ({:.3}, {:.3})",
            betas[i],
            betas[j]
        );
        cmat[i][j] = c;
        cmat[j][i] = c;
        pmat[i][j] = p;
        pmat[j][i] = p;
    }
    Ok((cmat, pmat))
}

/// Iteratively merge redundant motifs. Pairs are visited in descending
/// cross-correlation; a similar pair merges unless some cross-pair between
/// the two pending merge-sets is dissimilar. Merged sets are re-aggregated
/// and the sweep repeats until a fixed point.
pub fn iterative_merge(
    mut motifs: Vec<Motif>,
    criteria: &MergeCriteria,
    ctx: &PostprocessContext,
) -> Result<Vec<Motif>> {
    loop {
        let n = motifs.len();
        if n <= 1 {
            return Ok(motifs);
        }
        let (cmat, pmat) = pairwise_measurements(&motifs, ctx)?;
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        pairs.sort_by(|&(a, b), &(x, y)| {
            cmat[x][y]
                .partial_cmp(&cmat[a][b])
                .unwrap()
                .then((a, b).cmp(&(x, y)))
        });
        let mut uf = UnionFind::new(n);
        let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut merged_any = false;
        for (i, j) in pairs {
            if !criteria.is_similar(pmat[i][j], cmat[i][j]) {
                continue;
            }
            let (ri, rj) = (uf.find(i), uf.find(j));
            if ri == rj {
                continue;
            }
            let conflict = sets[ri].iter().any(|&a| {
                sets[rj]
                    .iter()
                    .any(|&b| criteria.is_dissimilar(pmat[a][b], cmat[a][b]))
            });
            if conflict {
                continue;
            }
            uf.union(ri, rj);
            let root = uf.find(ri);
            let other = if root == ri { rj } else { ri };
            let moved = std::mem::take(&mut sets[other]);
            sets[root].extend(moved);
            merged_any = true;
        }
        if !merged_any {
            return Ok(motifs);
        }
        let mut next = Vec::new();
        for set in sets.into_iter().filter(|s| !s.is_empty()) {
            if set.len() == 1 {
                next.push(motifs[set[0]].clone());
            } else {
                let pooled: Vec<Seqlet> = set
                    .iter()
                    .flat_map(|&i| motifs[i].members.iter().map(|m| m.seqlet.clone()))
                    .collect();
                next.push(ctx.rebuild(&pooled)?);
            }
        }
        motifs = next;
    }
}

/// Disband motifs under `final_min_size` members; orphans rejoin the
/// surviving motif of highest best-alignment Continuous Jaccard when that
/// similarity exceeds `min_sim`, and are dropped otherwise.
pub fn reassign_small_clusters(
    motifs: Vec<Motif>,
    final_min_size: usize,
    min_sim: f64,
    ctx: &PostprocessContext,
) -> Result<Vec<Motif>> {
    let (mut survivors, disbanded): (Vec<Motif>, Vec<Motif>) = motifs
        .into_iter()
        .partition(|m| m.num_members() >= final_min_size);
    if disbanded.is_empty() {
        return Ok(survivors);
    }
    if survivors.is_empty() {
        log::warn!("no motifs reached final_min_size; all seqlets dropped");
        return Ok(survivors);
    }
    let motif_fms: Vec<FeatureMatrix> = survivors
        .iter()
        .map(|m| m.feature_matrix(&ctx.relevant_tasks))
        .collect();
    let orphans: Vec<MotifMember> = disbanded
        .into_iter()
        .flat_map(|m| m.members.into_iter())
        .collect();
    let mut changed = vec![false; survivors.len()];
    for orphan in orphans {
        let fm = orphan.feature_matrix(&ctx.relevant_tasks);
        let mut best: Option<(usize, crate::fine::AlignmentResult)> = None;
        for (k, mfm) in motif_fms.iter().enumerate() {
            let aln = best_alignment_cj(mfm, &fm, ctx.min_overlap, ctx.revcomp)?;
            if best.map_or(true, |(_, b)| aln.similarity > b.similarity) {
                best = Some((k, aln));
            }
        }
        let (k, aln) = best.unwrap();
        if aln.similarity > min_sim {
            // the orphan's feature matrix was already in motif orientation,
            // so a revcomp alignment flips it relative to that
            survivors[k].members.push(MotifMember {
                seqlet: orphan.seqlet,
                offset: aln.offset,
                revcomp: orphan.revcomp != aln.revcomp,
            });
            changed[k] = true;
        }
    }
    let num_tasks = ctx.dataset.tasks.len();
    for (m, c) in survivors.iter_mut().zip(changed) {
        if c {
            m.recompute_averages(num_tasks);
        }
    }
    Ok(survivors)
}

/// Expand every member by `flank` positions per side, dropping members whose
/// source sequence lacks the room.
pub fn final_flank_expand(
    motifs: Vec<Motif>,
    flank: usize,
    ctx: &PostprocessContext,
) -> Result<Vec<Motif>> {
    if flank == 0 {
        return Ok(motifs);
    }
    let num_tasks = ctx.dataset.tasks.len();
    let mut out = Vec::with_capacity(motifs.len());
    for motif in motifs {
        let lo = -(flank as isize);
        let hi = motif.len as isize + flank as isize;
        let members: Vec<MotifMember> = motif
            .members
            .iter()
            .filter_map(|m| reslice_member(m, ctx.dataset, lo, hi, ctx.sliding_window))
            .collect();
        if members.is_empty() {
            log::warn!("final flank expansion dropped every member of a motif");
            continue;
        }
        let mut expanded = Motif {
            members,
            len: motif.len + 2 * flank,
            seqfreq: Vec::new(),
            tracks: Vec::new(),
            trim_flagged: motif.trim_flagged,
        };
        expanded.recompute_averages(num_tasks);
        out.push(expanded);
    }
    Ok(out)
}
