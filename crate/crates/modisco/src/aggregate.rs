//! Motif aggregation: collapse a cluster of seqlets into an averaged motif,
//! then edit its boundaries (trim weakly supported flanks, expand members to
//! fill the span, center and standardize lengths) and filter motifs whose
//! total contribution disagrees with the metacluster's activity pattern.

use rayon::prelude::*;

use crate::dataset::{BaseRow, Dataset, TaskTracks};
use crate::error::{ModiscoError, Result};
use crate::fine::{
    best_alignment_cj_with_basis, build_feature_matrix, feature_matrix_from_blocks, FeatureMatrix,
    OverlapBasis,
};
use crate::metacluster::ActivityPattern;
use crate::seqlets::Seqlet;

#[derive(Debug, Clone)]
pub struct MotifMember {
    pub seqlet: Seqlet,
    /// Start of this member relative to the motif span start.
    pub offset: isize,
    pub revcomp: bool,
}

impl MotifMember {
    fn len(&self) -> usize {
        self.seqlet.len()
    }

    /// Does this member cover motif position `p`?
    fn covers(&self, p: usize) -> bool {
        let p = p as isize;
        p >= self.offset && p < self.offset + self.len() as isize
    }

    /// Seqlet row index for motif position `p` (caller checks coverage).
    fn row_index(&self, p: usize) -> usize {
        let rel = p as isize - self.offset;
        if self.revcomp {
            self.len() - 1 - rel as usize
        } else {
            rel as usize
        }
    }

    fn onehot_row(&self, p: usize) -> BaseRow {
        let row = self.seqlet.onehot[self.row_index(p)];
        if self.revcomp {
            [row[3], row[2], row[1], row[0]]
        } else {
            row
        }
    }

    fn contrib_row(&self, p: usize, task: usize) -> BaseRow {
        let row = self.seqlet.tracks[task].contrib[self.row_index(p)];
        if self.revcomp {
            [row[3], row[2], row[1], row[0]]
        } else {
            row
        }
    }

    fn hyp_row(&self, p: usize, task: usize) -> BaseRow {
        let row = self.seqlet.tracks[task].hyp[self.row_index(p)];
        if self.revcomp {
            [row[3], row[2], row[1], row[0]]
        } else {
            row
        }
    }

    /// Feature matrix in motif orientation (reverse-complemented when the
    /// member is aligned on the reverse strand).
    pub fn feature_matrix(&self, relevant_tasks: &[usize]) -> FeatureMatrix {
        let f = build_feature_matrix(&self.seqlet, relevant_tasks);
        if self.revcomp {
            f.reverse_complement()
        } else {
            f
        }
    }
}

/// An aggregated pattern: member seqlets with alignments plus positionwise
/// averaged tracks over the motif span.
#[derive(Debug, Clone)]
pub struct Motif {
    pub members: Vec<MotifMember>,
    pub len: usize,
    /// Positionwise mean one-hot frequency over covering members.
    pub seqfreq: Vec<BaseRow>,
    /// Positionwise mean contribution/hypothetical tracks per task.
    pub tracks: Vec<TaskTracks>,
    /// Set when trim_to_support found no position above threshold.
    pub trim_flagged: bool,
}

impl Motif {
    /// Build a motif from members; offsets are shifted so the span starts
    /// at 0 and the length covers every member.
    pub fn from_members(mut members: Vec<MotifMember>, num_tasks: usize) -> Motif {
        assert!(!members.is_empty());
        let lo = members.iter().map(|m| m.offset).min().unwrap();
        let hi = members
            .iter()
            .map(|m| m.offset + m.len() as isize)
            .max()
            .unwrap();
        for m in &mut members {
            m.offset -= lo;
        }
        let mut motif = Motif {
            members,
            len: (hi - lo) as usize,
            seqfreq: Vec::new(),
            tracks: Vec::new(),
            trim_flagged: false,
        };
        motif.recompute_averages(num_tasks);
        motif
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.tracks.len()
    }

    /// Positionwise mean over members covering each position. Positions in
    /// the span covered by no member (possible after trimming) stay zero.
    pub fn recompute_averages(&mut self, num_tasks: usize) {
        let len = self.len;
        let mut seqfreq = vec![[0.0; 4]; len];
        let mut tracks: Vec<TaskTracks> = (0..num_tasks)
            .map(|_| TaskTracks {
                contrib: vec![[0.0; 4]; len],
                hyp: vec![[0.0; 4]; len],
            })
            .collect();
        for p in 0..len {
            let mut count = 0usize;
            for m in &self.members {
                if !m.covers(p) {
                    continue;
                }
                count += 1;
                let oh = m.onehot_row(p);
                for b in 0..4 {
                    seqfreq[p][b] += oh[b];
                }
                for (t, track) in tracks.iter_mut().enumerate() {
                    let c = m.contrib_row(p, t);
                    let h = m.hyp_row(p, t);
                    for b in 0..4 {
                        track.contrib[p][b] += c[b];
                        track.hyp[p][b] += h[b];
                    }
                }
            }
            if count > 0 {
                let inv = 1.0 / count as f64;
                for b in 0..4 {
                    seqfreq[p][b] *= inv;
                }
                for track in &mut tracks {
                    for b in 0..4 {
                        track.contrib[p][b] *= inv;
                        track.hyp[p][b] *= inv;
                    }
                }
            }
        }
        self.seqfreq = seqfreq;
        self.tracks = tracks;
    }

    /// Feature matrix of the averaged tracks over the relevant tasks
    /// (hyp then contrib block per task, matching seqlet feature matrices).
    pub fn feature_matrix(&self, relevant_tasks: &[usize]) -> FeatureMatrix {
        let blocks: Vec<&[BaseRow]> = relevant_tasks
            .iter()
            .flat_map(|&t| {
                [
                    self.tracks[t].hyp.as_slice(),
                    self.tracks[t].contrib.as_slice(),
                ]
            })
            .collect();
        feature_matrix_from_blocks(&blocks)
    }

    /// Total averaged contribution for one task (summed over the span).
    pub fn total_contribution(&self, task: usize) -> f64 {
        self.tracks[task]
            .contrib
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .sum()
    }
}

/// Greedy aggregation: seed with the seqlet of largest total central
/// contribution over the relevant tasks, then merge the rest in descending
/// order, each aligned against the running averaged feature matrix.
pub fn aggregate_cluster(
    seqlets: &[Seqlet],
    relevant_tasks: &[usize],
    min_overlap: f64,
    revcomp: bool,
) -> Result<Motif> {
    if seqlets.is_empty() {
        return Err(ModiscoError::Validation(
            "cannot aggregate an empty cluster".into(),
        ));
    }
    let num_tasks = seqlets[0].tracks.len();
    let mut order: Vec<usize> = (0..seqlets.len()).collect();
    let magnitude = |s: &Seqlet| -> f64 {
        relevant_tasks
            .iter()
            .map(|&t| s.task_scores[t].abs())
            .sum()
    };
    order.sort_by(|&a, &b| {
        magnitude(&seqlets[b])
            .partial_cmp(&magnitude(&seqlets[a]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut motif = Motif::from_members(
        vec![MotifMember {
            seqlet: seqlets[order[0]].clone(),
            offset: 0,
            revcomp: false,
        }],
        num_tasks,
    );
    for &idx in order.iter().skip(1) {
        let seqlet = &seqlets[idx];
        let motif_fm = motif.feature_matrix(relevant_tasks);
        let seqlet_fm = build_feature_matrix(seqlet, relevant_tasks);
        let aln = best_alignment_cj_with_basis(
            &motif_fm,
            &seqlet_fm,
            min_overlap,
            revcomp,
            OverlapBasis::SecondLen,
        )?;
        let mut members = std::mem::take(&mut motif.members);
        members.push(MotifMember {
            seqlet: seqlet.clone(),
            offset: aln.offset,
            revcomp: aln.revcomp,
        });
        motif = Motif::from_members(members, num_tasks);
    }
    Ok(motif)
}

/// Center position of a member in motif coordinates.
fn member_center(m: &MotifMember) -> isize {
    m.offset + (m.len() / 2) as isize
}

/// Trim flanks with weak support: positions whose member-center count falls
/// below max(frac * histogram max, min_num) are dropped from each end, along
/// with the members centered there.
pub fn trim_to_support(motif: &Motif, frac: f64, min_num: usize) -> Result<Motif> {
    if motif.members.is_empty() {
        return Err(ModiscoError::Validation("cannot trim an empty motif".into()));
    }
    let num_tasks = motif.num_tasks();
    let mut counts = vec![0usize; motif.len];
    for m in &motif.members {
        let c = member_center(m);
        if c >= 0 && (c as usize) < motif.len {
            counts[c as usize] += 1;
        }
    }
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let threshold = (frac * max_count as f64).max(min_num as f64);
    let first = counts.iter().position(|&c| c as f64 >= threshold);
    let (lo, hi, flagged) = match first {
        Some(first) => {
            let last = counts.iter().rposition(|&c| c as f64 >= threshold).unwrap();
            (first, last, false)
        }
        None => {
            // nothing passes: keep the single best-supported position
            let best = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            (best, best, true)
        }
    };
    let members: Vec<MotifMember> = motif
        .members
        .iter()
        .filter(|m| {
            let c = member_center(m);
            c >= lo as isize && c <= hi as isize
        })
        .cloned()
        .collect();
    if members.is_empty() {
        return Err(ModiscoError::Validation(
            "trimming removed every member".into(),
        ));
    }
    // the span is the bounding box of the surviving members, so a cluster
    // whose centers all coincide keeps its full extent
    let mut out = Motif::from_members(members, num_tasks);
    out.trim_flagged = flagged;
    Ok(out)
}

/// Translate a member's motif-coordinate window to source coordinates.
/// Returns None when the source sequence cannot supply the span.
fn source_window(
    m: &MotifMember,
    motif_lo: isize,
    motif_hi: isize,
    seq_len: usize,
) -> Option<(usize, usize)> {
    let start = m.seqlet.coord.start as isize;
    let lm = m.len() as isize;
    let (lo, hi) = if m.revcomp {
        // motif position p maps to source start + (lm - 1) - (p - offset)
        let hi = start + lm - 1 - (motif_lo - m.offset) + 1;
        let lo = start + lm - 1 - (motif_hi - 1 - m.offset);
        (lo, hi)
    } else {
        let lo = start + (motif_lo - m.offset);
        (lo, lo + (motif_hi - motif_lo))
    };
    (lo >= 0 && hi as usize <= seq_len && lo < hi).then_some((lo as usize, hi as usize))
}

/// Re-slice a member's source sequence so it exactly covers the motif
/// window [motif_lo, motif_hi); None when the source lacks the span.
pub fn reslice_member(
    m: &MotifMember,
    dataset: &Dataset,
    motif_lo: isize,
    motif_hi: isize,
    sliding_window: usize,
) -> Option<MotifMember> {
    let seq_len = dataset.sequences[m.seqlet.coord.sequence_index].len();
    source_window(m, motif_lo, motif_hi, seq_len).map(|(lo, hi)| MotifMember {
        seqlet: Seqlet::slice(
            dataset,
            m.seqlet.coord.sequence_index,
            lo,
            hi,
            sliding_window,
            m.seqlet.source_task,
        ),
        offset: 0,
        revcomp: m.revcomp,
    })
}

/// Expand every member to cover the full motif span by re-slicing its
/// source sequence; members that would cross a sequence boundary are
/// dropped. Afterwards every retained member spans the whole motif.
pub fn expand_to_fill(motif: &Motif, dataset: &Dataset, sliding_window: usize) -> Result<Motif> {
    let num_tasks = motif.num_tasks();
    let members: Vec<MotifMember> = motif
        .members
        .iter()
        .filter_map(|m| reslice_member(m, dataset, 0, motif.len as isize, sliding_window))
        .collect();
    if members.is_empty() {
        return Err(ModiscoError::Validation(
            "expansion dropped every member".into(),
        ));
    }
    let mut out = Motif {
        members,
        len: motif.len,
        seqfreq: Vec::new(),
        tracks: Vec::new(),
        trim_flagged: motif.trim_flagged,
    };
    out.recompute_averages(num_tasks);
    Ok(out)
}

/// Center on the `window`-length sub-span with the highest total |contrib| +
/// |hyp| magnitude over the relevant tasks (leftmost tie), then re-slice
/// every member to that window plus `flank` on each side. Output length is
/// exactly window + 2*flank.
pub fn center_and_standardize(
    motif: &Motif,
    dataset: &Dataset,
    relevant_tasks: &[usize],
    window: usize,
    flank: usize,
    sliding_window: usize,
) -> Result<Motif> {
    if motif.len < window {
        return Err(ModiscoError::Validation(format!(
            "motif span {} shorter than standardization window {window}",
            motif.len
        )));
    }
    let num_tasks = motif.num_tasks();
    let per_pos: Vec<f64> = (0..motif.len)
        .map(|p| {
            relevant_tasks
                .iter()
                .map(|&t| {
                    let c: f64 = motif.tracks[t].contrib[p].iter().map(|v| v.abs()).sum();
                    let h: f64 = motif.tracks[t].hyp[p].iter().map(|v| v.abs()).sum();
                    c + h
                })
                .sum()
        })
        .collect();
    let mut best_start = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut running: f64 = per_pos[..window].iter().sum();
    for w in 0..=(motif.len - window) {
        if w > 0 {
            running += per_pos[w + window - 1] - per_pos[w - 1];
        }
        if running > best_score + 1e-12 {
            best_score = running;
            best_start = w;
        }
    }
    let lo = best_start as isize - flank as isize;
    let hi = (best_start + window + flank) as isize;
    let members: Vec<MotifMember> = motif
        .members
        .iter()
        .filter_map(|m| reslice_member(m, dataset, lo, hi, sliding_window))
        .collect();
    if members.is_empty() {
        return Err(ModiscoError::Validation(
            "standardization dropped every member".into(),
        ));
    }
    let mut out = Motif {
        members,
        len: window + 2 * flank,
        seqfreq: Vec::new(),
        tracks: Vec::new(),
        trim_flagged: motif.trim_flagged,
    };
    out.recompute_averages(num_tasks);
    Ok(out)
}

/// Keep a motif iff, for each relevant task, the sign of its total averaged
/// contribution equals the activity pattern's sign (zero totals drop).
pub fn sign_consistency_filter(motifs: Vec<Motif>, pattern: &ActivityPattern) -> Vec<Motif> {
    motifs
        .into_iter()
        .filter(|m| {
            pattern.0.iter().enumerate().all(|(t, &sign)| {
                if sign == 0 {
                    return true;
                }
                let total = m.total_contribution(t);
                (total > 0.0 && sign > 0) || (total < 0.0 && sign < 0)
            })
        })
        .collect()
}

/// Aggregate several clusters in parallel (greedy order within a cluster is
/// sequential; clusters are independent).
pub fn aggregate_clusters(
    clusters: &[Vec<Seqlet>],
    relevant_tasks: &[usize],
    min_overlap: f64,
    revcomp: bool,
) -> Result<Vec<Motif>> {
    clusters
        .par_iter()
        .map(|c| aggregate_cluster(c, relevant_tasks, min_overlap, revcomp))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SequenceRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One-sequence dataset with random bases/tracks, deterministic per seed.
    fn random_dataset(len: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut onehot = vec![[0.0; 4]; len];
        let mut contrib = vec![[0.0; 4]; len];
        let mut hyp = vec![[0.0; 4]; len];
        for p in 0..len {
            let b = rng.gen_range(0..4usize);
            onehot[p][b] = 1.0;
            for x in 0..4 {
                hyp[p][x] = rng.gen_range(-1.0..1.0);
            }
            contrib[p][b] = hyp[p][b];
        }
        Dataset {
            tasks: vec!["t0".into()],
            sequences: vec![SequenceRecord {
                onehot,
                tracks: vec![TaskTracks { contrib, hyp }],
            }],
            nulls: None,
        }
    }

    /// Copy the window [src, src+len) of sequence 0 to [dst, dst+len).
    fn copy_window(ds: &mut Dataset, src: usize, dst: usize, len: usize) {
        let seq = &mut ds.sequences[0];
        for k in 0..len {
            seq.onehot[dst + k] = seq.onehot[src + k];
            seq.tracks[0].contrib[dst + k] = seq.tracks[0].contrib[src + k];
            seq.tracks[0].hyp[dst + k] = seq.tracks[0].hyp[src + k];
        }
    }

    #[test]
    fn identical_seqlets_average_to_common_tracks() {
        let ds = random_dataset(40, 1);
        let s = Seqlet::slice(&ds, 0, 10, 25, 5, 0);
        let motif = aggregate_cluster(&[s.clone(), s.clone(), s.clone()], &[0], 0.7, true).unwrap();
        assert_eq!(motif.len, 15);
        assert_eq!(motif.num_members(), 3);
        for p in 0..15 {
            for b in 0..4 {
                assert!((motif.seqfreq[p][b] - s.onehot[p][b]).abs() < 1e-12);
                assert!((motif.tracks[0].contrib[p][b] - s.tracks[0].contrib[p][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_seqlet_offset_recovered() {
        let mut ds = random_dataset(60, 2);
        // make [30, 42) an exact copy of [10, 22); against a seqlet covering
        // [8, 20), the copy's content sits 2 positions later (a row i equals
        // copy row i - 2), so the recovered alignment offset is +2
        copy_window(&mut ds, 10, 30, 12);
        let a = Seqlet::slice(&ds, 0, 8, 20, 5, 0);
        let b = Seqlet::slice(&ds, 0, 30, 42, 5, 0);
        // force a to seed by boosting its central contribution
        let motif = {
            let mut a = a.clone();
            a.task_scores = vec![1e9];
            aggregate_cluster(&[a, b], &[0], 0.3, false).unwrap()
        };
        assert_eq!(motif.num_members(), 2);
        // second member sits 2 to the right of the first
        let rel = motif.members[1].offset - motif.members[0].offset;
        assert_eq!(rel, 2);
        assert_eq!(motif.len, 14); // span grew by the protrusion
    }

    #[test]
    fn singleton_cluster_is_the_seqlet() {
        let ds = random_dataset(30, 3);
        let s = Seqlet::slice(&ds, 0, 5, 20, 5, 0);
        let motif = aggregate_cluster(&[s.clone()], &[0], 0.7, true).unwrap();
        assert_eq!(motif.len, s.len());
        for p in 0..s.len() {
            assert_eq!(motif.tracks[0].hyp[p], s.tracks[0].hyp[p]);
        }
    }

    #[test]
    fn averages_recomputable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = random_dataset(80, 4);
        let seqlets: Vec<Seqlet> = (0..6)
            .map(|_| {
                let start = rng.gen_range(0..60);
                Seqlet::slice(&ds, 0, start, start + 15, 5, 0)
            })
            .collect();
        let motif = aggregate_cluster(&seqlets, &[0], 0.5, true).unwrap();
        // independent recomputation straight from members
        for p in 0..motif.len {
            let covering: Vec<&MotifMember> =
                motif.members.iter().filter(|m| m.covers(p)).collect();
            if covering.is_empty() {
                continue;
            }
            for b in 0..4 {
                let want: f64 = covering.iter().map(|m| m.contrib_row(p, 0)[b]).sum::<f64>()
                    / covering.len() as f64;
                assert!((motif.tracks[0].contrib[p][b] - want).abs() < 1e-9);
            }
        }
    }

    /// Motif with members placed to produce a known center histogram.
    fn motif_with_centers(centers: &[(isize, usize)], ds: &Dataset) -> Motif {
        // members of length 1 so center == offset
        let members: Vec<MotifMember> = centers
            .iter()
            .flat_map(|&(pos, count)| {
                (0..count).map(move |_| MotifMember {
                    seqlet: Seqlet::slice(ds, 0, 10, 11, 1, 0),
                    offset: pos,
                    revcomp: false,
                })
            })
            .collect();
        Motif::from_members(members, 1)
    }

    #[test]
    fn trim_drops_weak_ends() {
        let ds = random_dataset(30, 5);
        // center histogram [1, 5, 10, 5, 1]
        let motif = motif_with_centers(&[(0, 1), (1, 5), (2, 10), (3, 5), (4, 1)], &ds);
        let trimmed = trim_to_support(&motif, 0.2, 2).unwrap();
        assert!(!trimmed.trim_flagged);
        assert_eq!(trimmed.len, 3); // positions 1..=3 survive
        assert_eq!(trimmed.num_members(), 20);
    }

    #[test]
    fn trim_uniform_unchanged_and_min_num_dominates() {
        let ds = random_dataset(30, 6);
        let motif = motif_with_centers(&[(0, 5), (1, 5), (2, 5)], &ds);
        let t = trim_to_support(&motif, 0.2, 2).unwrap();
        assert_eq!(t.len, motif.len);
        assert_eq!(t.num_members(), motif.num_members());
        // min_num larger than every count: fall back to the best position
        let t2 = trim_to_support(&motif, 0.2, 30).unwrap();
        assert!(t2.trim_flagged);
        assert_eq!(t2.len, 1);
        assert_eq!(t2.num_members(), 5);
    }

    #[test]
    fn expand_refills_from_source() {
        let ds = random_dataset(50, 7);
        // two members: one spans the whole motif, one is 5 short at the left
        let full = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 20, 35, 5, 0),
            offset: 0,
            revcomp: false,
        };
        let short = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 30, 40, 5, 0),
            offset: 5,
            revcomp: false,
        };
        let motif = Motif::from_members(vec![full, short], 1);
        assert_eq!(motif.len, 15);
        let expanded = expand_to_fill(&motif, &ds, 5).unwrap();
        assert_eq!(expanded.num_members(), 2);
        for m in &expanded.members {
            assert_eq!(m.offset, 0);
            assert_eq!(m.len(), 15);
        }
        // the short member was re-sliced to [25, 40)
        assert_eq!(expanded.members[1].seqlet.coord.start, 25);
        assert_eq!(expanded.members[1].seqlet.coord.end, 40);
    }

    #[test]
    fn expand_drops_boundary_member() {
        let ds = random_dataset(50, 8);
        let full = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 10, 25, 5, 0),
            offset: 0,
            revcomp: false,
        };
        // needs 5 columns left of source position 0: impossible
        let stuck = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 0, 10, 5, 0),
            offset: 5,
            revcomp: false,
        };
        let motif = Motif::from_members(vec![full, stuck], 1);
        let expanded = expand_to_fill(&motif, &ds, 5).unwrap();
        assert_eq!(expanded.num_members(), 1);
        assert_eq!(expanded.members[0].seqlet.coord.start, 10);
    }

    #[test]
    fn revcomp_member_expansion_maps_coordinates() {
        let ds = random_dataset(60, 9);
        let full = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 20, 32, 5, 0),
            offset: 0,
            revcomp: false,
        };
        // rc member 4 short at the left of the motif: the missing motif
        // columns come from the source positions just past its right end
        let rc = MotifMember {
            seqlet: Seqlet::slice(&ds, 0, 40, 48, 5, 0),
            offset: 4,
            revcomp: true,
        };
        let motif = Motif::from_members(vec![full, rc], 1);
        let expanded = expand_to_fill(&motif, &ds, 5).unwrap();
        assert_eq!(expanded.num_members(), 2);
        let m = &expanded.members[1];
        assert!(m.revcomp);
        assert_eq!(m.len(), 12);
        assert_eq!(m.seqlet.coord.start, 40);
        assert_eq!(m.seqlet.coord.end, 52);
        // motif position 0 should equal the complement of source row 51
        let oh = m.onehot_row(0);
        let src = ds.sequences[0].onehot[51];
        assert_eq!(oh, [src[3], src[2], src[1], src[0]]);
    }

    #[test]
    fn standardize_centers_on_mass() {
        let mut ds = random_dataset(100, 10);
        // scale up importance in [44, 50) so the best 6-wide window is there
        {
            let t = &mut ds.sequences[0].tracks[0];
            for p in 44..50 {
                for b in 0..4 {
                    t.contrib[p][b] *= 50.0;
                    t.hyp[p][b] *= 50.0;
                }
            }
        }
        let s1 = Seqlet::slice(&ds, 0, 30, 60, 5, 0);
        let s2 = Seqlet::slice(&ds, 0, 30, 60, 5, 0);
        let motif = aggregate_cluster(&[s1, s2], &[0], 0.7, false).unwrap();
        let std = center_and_standardize(&motif, &ds, &[0], 6, 3, 5).unwrap();
        assert_eq!(std.len, 12);
        for m in &std.members {
            // window [14, 20) in motif coords -> source [44, 50), flank 3
            assert_eq!(m.seqlet.coord.start, 41);
            assert_eq!(m.seqlet.coord.end, 53);
        }
        // flank 0 keeps exactly the window
        let tight = center_and_standardize(&motif, &ds, &[0], 6, 0, 5).unwrap();
        assert_eq!(tight.len, 6);
        // span shorter than the window errors
        assert!(center_and_standardize(&tight, &ds, &[0], 30, 0, 5).is_err());
    }

    #[test]
    fn uniform_output_lengths() {
        let ds = random_dataset(200, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut lens = Vec::new();
        for _ in 0..3 {
            let start = rng.gen_range(30..120);
            let width = rng.gen_range(20..40);
            let s = Seqlet::slice(&ds, 0, start, start + width, 5, 0);
            let motif = aggregate_cluster(&[s.clone(), s], &[0], 0.7, false).unwrap();
            let std = center_and_standardize(&motif, &ds, &[0], 10, 4, 5).unwrap();
            lens.push(std.len);
        }
        assert!(lens.iter().all(|&l| l == 18));
    }

    #[test]
    fn sign_filter() {
        let ds = random_dataset(40, 13);
        let s = Seqlet::slice(&ds, 0, 10, 25, 5, 0);
        let motif = aggregate_cluster(&[s], &[0], 0.7, false).unwrap();
        let total = motif.total_contribution(0);
        let pos_pattern = ActivityPattern(vec![1]);
        let neg_pattern = ActivityPattern(vec![-1]);
        let kept_pos = sign_consistency_filter(vec![motif.clone()], &pos_pattern).len();
        let kept_neg = sign_consistency_filter(vec![motif.clone()], &neg_pattern).len();
        if total > 0.0 {
            assert_eq!((kept_pos, kept_neg), (1, 0));
        } else {
            assert_eq!((kept_pos, kept_neg), (0, 1));
        }
        // zero-total motif is dropped under either sign
        let mut zeroed = motif.clone();
        for row in &mut zeroed.tracks[0].contrib {
            *row = [0.0; 4];
        }
        assert!(sign_consistency_filter(vec![zeroed.clone()], &pos_pattern).is_empty());
        assert!(sign_consistency_filter(vec![zeroed], &neg_pattern).is_empty());
        // irrelevant tasks are ignored
        let kept = sign_consistency_filter(
            vec![motif],
            &ActivityPattern(vec![0]),
        )
        .len();
        assert_eq!(kept, 1);
    }
}
