//! Fine affinity: Continuous Jaccard similarity between seqlet feature
//! matrices over all admissible alignments, plus the noise filter that
//! drops seqlets whose fine affinities disagree with the coarse pass.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dataset::BaseRow;
use crate::error::{ModiscoError, Result};
use crate::metacluster::ActivityPattern;
use crate::seqlets::Seqlet;
use crate::util::{average_ranks, pearson};

/// L x width feature matrix, row-major. The width is 8 per relevant task
/// (hyp block then contrib block, 4 columns each, L1-normalized per block).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub len: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn total_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Reverse positions and complement each 4-column base block.
    pub fn reverse_complement(&self) -> FeatureMatrix {
        assert!(self.width % 4 == 0, "width must be a multiple of 4");
        let mut data = Vec::with_capacity(self.data.len());
        for i in (0..self.len).rev() {
            let row = self.row(i);
            for block in row.chunks_exact(4) {
                data.extend_from_slice(&[block[3], block[2], block[1], block[0]]);
            }
        }
        FeatureMatrix {
            len: self.len,
            width: self.width,
            data,
        }
    }
}

/// Concatenate L x 4 blocks along the feature axis, L1-normalizing each
/// block independently. All-zero blocks are kept all-zero.
pub fn feature_matrix_from_blocks(blocks: &[&[BaseRow]]) -> FeatureMatrix {
    assert!(!blocks.is_empty());
    let len = blocks[0].len();
    assert!(blocks.iter().all(|b| b.len() == len));
    let norms: Vec<f64> = blocks
        .iter()
        .map(|b| {
            let s: f64 = b.iter().flat_map(|row| row.iter()).map(|v| v.abs()).sum();
            if s == 0.0 {
                1.0
            } else {
                s
            }
        })
        .collect();
    let width = 4 * blocks.len();
    let mut data = Vec::with_capacity(len * width);
    for pos in 0..len {
        for (b, block) in blocks.iter().enumerate() {
            for x in 0..4 {
                data.push(block[pos][x] / norms[b]);
            }
        }
    }
    FeatureMatrix { len, width, data }
}

/// Feature matrix of a seqlet over the given relevant tasks: hyp then
/// contrib block per task, in task order. Tracks are used as-is (no sign
/// flipping for negative-activity tasks).
pub fn build_feature_matrix(seqlet: &Seqlet, relevant_tasks: &[usize]) -> FeatureMatrix {
    assert!(!relevant_tasks.is_empty());
    let blocks: Vec<&[BaseRow]> = relevant_tasks
        .iter()
        .flat_map(|&t| {
            [
                seqlet.tracks[t].hyp.as_slice(),
                seqlet.tracks[t].contrib.as_slice(),
            ]
        })
        .collect();
    feature_matrix_from_blocks(&blocks)
}

/// Real-valued intersection and union of a pair of numbers.
#[inline]
pub fn intersect_union(x: f64, y: f64) -> (f64, f64) {
    let ax = x.abs();
    let ay = y.abs();
    (ax.min(ay) * x.signum_or_zero() * y.signum_or_zero(), ax.max(ay))
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    #[inline]
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// Continuous Jaccard similarity of two equal-length vectors: sum of
/// intersections over sum of unions, 0 when the union sum is 0.
pub fn continuous_jaccard(v1: &[f64], v2: &[f64]) -> f64 {
    assert_eq!(v1.len(), v2.len());
    let mut inter = 0.0;
    let mut uni = 0.0;
    for (&x, &y) in v1.iter().zip(v2.iter()) {
        let (i, u) = intersect_union(x, y);
        inter += i;
        uni += u;
    }
    if uni == 0.0 {
        0.0
    } else {
        inter / uni
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub similarity: f64,
    /// Start of S2 relative to the start of S1.
    pub offset: isize,
    pub revcomp: bool,
}

/// Length the minimum-overlap fraction is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapBasis {
    /// min(L1, L2): pairwise seqlet comparison.
    MinLen,
    /// L2: aligning a seqlet (S2) against a running motif average (S1).
    SecondLen,
}

/// Offsets of S2 relative to S1 whose non-padded overlap is at least
/// ceil(min_overlap * min(L1, L2)) positions. Ordered by |offset|
/// ascending, positive before negative.
pub fn admissible_offsets(l1: usize, l2: usize, min_overlap: f64) -> Vec<isize> {
    admissible_offsets_with_basis(l1, l2, min_overlap, OverlapBasis::MinLen)
}

pub fn admissible_offsets_with_basis(
    l1: usize,
    l2: usize,
    min_overlap: f64,
    basis: OverlapBasis,
) -> Vec<isize> {
    let basis_len = match basis {
        OverlapBasis::MinLen => l1.min(l2),
        OverlapBasis::SecondLen => l2,
    };
    let need = (min_overlap * basis_len as f64).ceil().max(1.0) as isize;
    let l1 = l1 as isize;
    let l2 = l2 as isize;
    let mut offsets: Vec<isize> = ((1 - l2)..l1)
        .filter(|&off| (l1.min(off + l2) - off.max(0)) >= need)
        .collect();
    offsets.sort_by_key(|&off| (off.abs(), std::cmp::Reverse(off)));
    offsets
}

/// Continuous Jaccard of s2 placed at `offset` relative to s1, both
/// zero-padded to the union span. Precomputed total |.| sums let us touch
/// only the overlap: union total = T1 + T2 - sum of overlap min(|x|,|y|).
fn cj_at_offset(s1: &FeatureMatrix, s2: &FeatureMatrix, t1: f64, t2: f64, offset: isize) -> f64 {
    let lo = offset.max(0) as usize;
    let hi = (s1.len as isize).min(offset + s2.len as isize) as usize;
    let mut inter = 0.0;
    let mut min_sum = 0.0;
    for p1 in lo..hi {
        let p2 = (p1 as isize - offset) as usize;
        for (&x, &y) in s1.row(p1).iter().zip(s2.row(p2).iter()) {
            let ax = x.abs();
            let ay = y.abs();
            let m = ax.min(ay);
            min_sum += m;
            inter += m * x.signum_or_zero() * y.signum_or_zero();
        }
    }
    let uni = t1 + t2 - min_sum;
    if uni == 0.0 {
        0.0
    } else {
        inter / uni
    }
}

/// Continuous Jaccard of S2 placed at a fixed offset relative to S1
/// (zero-padded union convention), without any alignment search.
pub fn continuous_jaccard_at_offset(s1: &FeatureMatrix, s2: &FeatureMatrix, offset: isize) -> f64 {
    cj_at_offset(s1, s2, s1.total_abs(), s2.total_abs(), offset)
}

/// Maximum Continuous Jaccard over all admissible alignments of S2 against
/// S1, optionally also trying the reverse complement of S2. Ties break to
/// the smallest |offset| and the forward orientation.
pub fn best_alignment_cj(
    s1: &FeatureMatrix,
    s2: &FeatureMatrix,
    min_overlap: f64,
    revcomp: bool,
) -> Result<AlignmentResult> {
    best_alignment_cj_with_basis(s1, s2, min_overlap, revcomp, OverlapBasis::MinLen)
}

pub fn best_alignment_cj_with_basis(
    s1: &FeatureMatrix,
    s2: &FeatureMatrix,
    min_overlap: f64,
    revcomp: bool,
    basis: OverlapBasis,
) -> Result<AlignmentResult> {
    let offsets = admissible_offsets_with_basis(s1.len, s2.len, min_overlap, basis);
    if offsets.is_empty() {
        return Err(ModiscoError::Validation(format!(
            "no admissible alignment offsets for lengths {} and {} at min_overlap {}",
            s1.len, s2.len, min_overlap
        )));
    }
    let t1 = s1.total_abs();
    let t2 = s2.total_abs();
    let rc = if revcomp {
        Some(s2.reverse_complement())
    } else {
        None
    };
    let mut best: Option<AlignmentResult> = None;
    for is_rc in [false, true] {
        let mat = match (is_rc, &rc) {
            (false, _) => s2,
            (true, Some(m)) => m,
            (true, None) => break,
        };
        for &off in &offsets {
            let sim = cj_at_offset(s1, mat, t1, t2, off);
            // offsets are pre-ordered so a strict > keeps the tie rules
            if best.map_or(true, |b| sim > b.similarity) {
                best = Some(AlignmentResult {
                    similarity: sim,
                    offset: off,
                    revcomp: is_rc,
                });
            }
        }
    }
    Ok(best.unwrap())
}

pub type SparseRows = Vec<Vec<(usize, f64)>>;

/// Fine affinity over the coarse nearest-neighbor support. Each unordered
/// pair appearing in either neighbor list is scored once (best-alignment
/// Continuous Jaccard is symmetric) and mirrored into both rows.
pub fn fine_affmat(
    seqlets: &[Seqlet],
    neighbor_lists: &[Vec<usize>],
    pattern: &ActivityPattern,
    min_overlap: f64,
    revcomp: bool,
) -> Result<SparseRows> {
    let n = seqlets.len();
    if neighbor_lists.len() != n {
        return Err(ModiscoError::Validation(
            "neighbor list count does not match seqlet count".into(),
        ));
    }
    let relevant = pattern.relevant_tasks();
    let features: Vec<FeatureMatrix> = seqlets
        .par_iter()
        .map(|s| build_feature_matrix(s, &relevant))
        .collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, nbrs) in neighbor_lists.iter().enumerate() {
        for &j in nbrs {
            if i != j {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    let sims: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            best_alignment_cj(&features[i], &features[j], min_overlap, revcomp)
                .map(|r| r.similarity)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: SparseRows = vec![Vec::new(); n];
    for (&(i, j), &sim) in pairs.iter().zip(sims.iter()) {
        rows[i].push((j, sim));
        rows[j].push((i, sim));
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|e| e.0);
    }
    Ok(rows)
}

/// Spearman rank correlation: Pearson of average ranks, ties averaged.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return 0.0;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Keep seqlet i iff the Spearman correlation between its coarse and fine
/// affinity rows (restricted to the fine support) meets the threshold.
pub fn noise_filter(coarse: &[Vec<f64>], fine: &SparseRows, threshold: f64) -> Vec<usize> {
    let mut keep = Vec::new();
    for (i, row) in fine.iter().enumerate() {
        let fine_vals: Vec<f64> = row.iter().map(|&(_, v)| v).collect();
        let coarse_vals: Vec<f64> = row.iter().map(|&(j, _)| coarse[i][j]).collect();
        if spearman_rho(&coarse_vals, &fine_vals) >= threshold {
            keep.push(i);
        }
    }
    keep
}
