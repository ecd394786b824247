//! Seqlet identification: sliding-window scoring, null modeling, FDR-based
//! thresholding, greedy per-sequence extraction, and the cross-task union.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{BaseRow, Dataset, TaskTracks};
use crate::error::{ModiscoError, Result};
use crate::util::{quantile, quantile_sorted, Ecdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqletCoord {
    pub sequence_index: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub revcomp: bool,
}

impl SeqletCoord {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A located window of a sequence carrying snapshots of all tracks.
#[derive(Debug, Clone)]
pub struct Seqlet {
    pub coord: SeqletCoord,
    pub onehot: Vec<BaseRow>,
    /// Parallel to the dataset task list.
    pub tracks: Vec<TaskTracks>,
    /// Central sliding-window contribution sum per task.
    pub task_scores: Vec<f64>,
    /// Task this seqlet was extracted for (tasks are indices into the
    /// dataset task list).
    pub source_task: usize,
}

impl Seqlet {
    /// Snapshot the span `[start, end)` of a sequence. `sliding_window` sets
    /// the centered core used for per-task scores.
    pub fn slice(
        dataset: &Dataset,
        sequence_index: usize,
        start: usize,
        end: usize,
        sliding_window: usize,
        source_task: usize,
    ) -> Self {
        let seq = &dataset.sequences[sequence_index];
        assert!(end <= seq.len() && start < end);
        let onehot = seq.onehot[start..end].to_vec();
        let tracks: Vec<TaskTracks> = seq
            .tracks
            .iter()
            .map(|t| TaskTracks {
                contrib: t.contrib[start..end].to_vec(),
                hyp: t.hyp[start..end].to_vec(),
            })
            .collect();
        let mut seqlet = Seqlet {
            coord: SeqletCoord {
                sequence_index,
                start,
                end,
                revcomp: false,
            },
            onehot,
            tracks,
            task_scores: Vec::new(),
            source_task,
        };
        seqlet.task_scores = (0..dataset.tasks.len())
            .map(|ti| central_contribution(&seqlet, ti, sliding_window))
            .collect();
        seqlet
    }

    pub fn len(&self) -> usize {
        self.onehot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onehot.is_empty()
    }
}

/// Sum of the contribution track over the centered `window` rows.
pub fn central_contribution(seqlet: &Seqlet, task: usize, window: usize) -> f64 {
    let l = seqlet.len();
    let w = window.min(l);
    let start = (l - w) / 2;
    seqlet.tracks[task].contrib[start..start + w]
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .sum()
}

/// Per-position sums of an L x 4 track, then sliding windows of width `w`.
pub fn window_sums(contrib: &[BaseRow], w: usize) -> Result<Vec<f64>> {
    let per_pos: Vec<f64> = contrib.iter().map(|row| row.iter().sum()).collect();
    window_sums_1d(&per_pos, w)
}

pub fn window_sums_1d(per_pos: &[f64], w: usize) -> Result<Vec<f64>> {
    let l = per_pos.len();
    if w == 0 || w > l {
        return Err(ModiscoError::Config(format!(
            "window size {w} invalid for sequence of length {l}"
        )));
    }
    let mut out = Vec::with_capacity(l - w + 1);
    let mut acc: f64 = per_pos[..w].iter().sum();
    out.push(acc);
    for i in w..l {
        acc += per_pos[i] - per_pos[i - w];
        out.push(acc);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum NullModel {
    /// Caller-provided null window scores, passed through on sampling.
    Empirical(Vec<f64>),
    Laplace {
        mode: f64,
        lambda_pos: f64,
        lambda_neg: f64,
        /// Fraction of observed scores that were positive after re-centering.
        pos_weight: f64,
    },
}

/// Histogram-peak mode estimate: bin width (p99 - p1) / 100, peak bin center.
fn histogram_mode(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p1 = quantile_sorted(&sorted, 0.01);
    let p99 = quantile_sorted(&sorted, 0.99);
    let width = (p99 - p1) / 100.0;
    if width <= 0.0 {
        return quantile_sorted(&sorted, 0.5);
    }
    let lo = sorted[0];
    let nbins = ((sorted[sorted.len() - 1] - lo) / width).ceil() as usize + 1;
    let mut counts = vec![0usize; nbins];
    for &s in &sorted {
        let bin = (((s - lo) / width) as usize).min(nbins - 1);
        counts[bin] += 1;
    }
    let best = (0..nbins).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
    lo + (best as f64 + 0.5) * width
}

/// Fit one-tailed Laplace branches to the re-centered score distribution,
/// taking for each side the fastest-decaying lambda over the percentile grid
/// 5%, 10%, ..., 95%.
pub fn fit_laplace_null(window_scores: &[f64]) -> Result<NullModel> {
    if window_scores.is_empty() {
        return Err(ModiscoError::Validation("no window scores to fit".into()));
    }
    let mode = histogram_mode(window_scores);
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for &s in window_scores {
        let c = s - mode;
        if c > 0.0 {
            pos.push(c);
        } else if c < 0.0 {
            neg.push(-c);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(ModiscoError::Validation(
            "need scores on both sides of the mode to fit a null".into(),
        ));
    }
    let side_lambda = |side: &mut Vec<f64>| -> f64 {
        side.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best = f64::NEG_INFINITY;
        for step in 1..=19 {
            let q = step as f64 * 0.05;
            let x = quantile_sorted(side, q);
            if x > 0.0 {
                best = best.max(-(1.0 - q).ln() / x);
            }
        }
        best
    };
    let lambda_pos = side_lambda(&mut pos);
    let lambda_neg = side_lambda(&mut neg);
    if !(lambda_pos > 0.0) || !(lambda_neg > 0.0) {
        return Err(ModiscoError::Validation(
            "degenerate score distribution: could not fit lambdas".into(),
        ));
    }
    Ok(NullModel::Laplace {
        mode,
        lambda_pos,
        lambda_neg,
        pos_weight: pos.len() as f64 / (pos.len() + neg.len()) as f64,
    })
}

pub fn sample_null(model: &NullModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        NullModel::Empirical(scores) => {
            let mut out = scores.clone();
            while out.len() < n {
                out.push(scores[rng.gen_range(0..scores.len())]);
            }
            out
        }
        NullModel::Laplace {
            mode,
            lambda_pos,
            lambda_neg,
            pos_weight,
        } => {
            let n_pos = ((n as f64) * pos_weight).round() as usize;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let draw = -(1.0 - u).ln();
                if i < n_pos {
                    out.push(mode + draw / lambda_pos);
                } else {
                    out.push(mode - draw / lambda_neg);
                }
            }
            out
        }
    }
}

/// Weighted pool-adjacent-violators: the nondecreasing fit minimizing
/// weighted squared error.
pub fn isotonic_regression(x: &[f64], y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(ModiscoError::Validation(format!(
            "isotonic regression length mismatch: {} / {} / {}",
            x.len(),
            y.len(),
            weights.len()
        )));
    }
    if x.windows(2).any(|w| w[0] > w[1]) {
        return Err(ModiscoError::Validation("x must be nondecreasing".into()));
    }
    let n = y.len();
    // blocks of (weighted sum, weight, count)
    let mut sums: Vec<f64> = Vec::with_capacity(n);
    let mut ws: Vec<f64> = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        sums.push(y[i] * weights[i]);
        ws.push(weights[i]);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len();
            let prev_mean = sums[k - 2] / ws[k - 2].max(f64::MIN_POSITIVE);
            let cur_mean = sums[k - 1] / ws[k - 1].max(f64::MIN_POSITIVE);
            if prev_mean <= cur_mean {
                break;
            }
            let (s, w, c) = (sums.pop().unwrap(), ws.pop().unwrap(), counts.pop().unwrap());
            *sums.last_mut().unwrap() += s;
            *ws.last_mut().unwrap() += w;
            *counts.last_mut().unwrap() += c;
        }
    }
    let mut fitted = Vec::with_capacity(n);
    for b in 0..sums.len() {
        let mean = sums[b] / ws[b].max(f64::MIN_POSITIVE);
        for _ in 0..counts[b] {
            fitted.push(mean);
        }
    }
    Ok(fitted)
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdPair {
    pub pos_threshold: f64,
    pub neg_threshold: f64,
    /// ECDF of |original window scores| evaluated at each threshold.
    pub transformed_cdf_cutoffs: (f64, f64),
    /// Set when no score achieved the target FDR on that side.
    pub pos_saturated: bool,
    pub neg_saturated: bool,
}

impl ThresholdPair {
    pub fn passes(&self, v: f64) -> bool {
        (v > 0.0 && v >= self.pos_threshold) || (v < 0.0 && v <= self.neg_threshold)
    }
}

fn one_sided_threshold(orig: &[f64], null: &[f64], target_fdr: f64) -> (f64, bool) {
    if orig.is_empty() {
        return (f64::INFINITY, true);
    }
    if null.is_empty() {
        // nothing from the null on this side: everything passes
        let min = orig.iter().cloned().fold(f64::INFINITY, f64::min);
        return (min, false);
    }
    let w_null = orig.len() as f64 / null.len() as f64;
    let mut pts: Vec<(f64, f64, f64)> = Vec::with_capacity(orig.len() + null.len());
    for &v in orig {
        pts.push((v, 1.0, 1.0));
    }
    for &v in null {
        pts.push((v, 0.0, w_null));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let ws: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let fitted = isotonic_regression(&xs, &ys, &ws).expect("sorted inputs");
    for i in 0..xs.len() {
        if 1.0 - fitted[i] <= target_fdr {
            return (xs[i], false);
        }
    }
    (f64::INFINITY, true)
}

fn cdf_cutoffs(orig_windows: &[f64], pos_t: f64, neg_t: f64) -> (f64, f64) {
    let abs_ecdf = Ecdf::new(orig_windows.iter().map(|v| v.abs()));
    let eval = |t: f64| {
        if t.is_finite() {
            abs_ecdf.eval(t.abs())
        } else {
            1.0
        }
    };
    (eval(pos_t), eval(neg_t))
}

/// FDR-controlled window thresholds via isotonic regression of
/// original-vs-null labels, fit separately per sign.
pub fn fdr_thresholds(orig_windows: &[f64], null_windows: &[f64], target_fdr: f64) -> Result<ThresholdPair> {
    if orig_windows.is_empty() || null_windows.is_empty() {
        return Err(ModiscoError::Validation(
            "fdr_thresholds requires non-empty original and null scores".into(),
        ));
    }
    let orig_pos: Vec<f64> = orig_windows.iter().cloned().filter(|&v| v > 0.0).collect();
    let null_pos: Vec<f64> = null_windows.iter().cloned().filter(|&v| v > 0.0).collect();
    let orig_neg: Vec<f64> = orig_windows.iter().map(|&v| -v).filter(|&v| v > 0.0).collect();
    let null_neg: Vec<f64> = null_windows.iter().map(|&v| -v).filter(|&v| v > 0.0).collect();
    let (pos_threshold, pos_saturated) = one_sided_threshold(&orig_pos, &null_pos, target_fdr);
    let (neg_mag, neg_saturated) = one_sided_threshold(&orig_neg, &null_neg, target_fdr);
    let neg_threshold = -neg_mag;
    let transformed_cdf_cutoffs = cdf_cutoffs(orig_windows, pos_threshold, neg_threshold);
    Ok(ThresholdPair {
        pos_threshold,
        neg_threshold,
        transformed_cdf_cutoffs,
        pos_saturated,
        neg_saturated,
    })
}

/// Readjust thresholds so that the passing fraction lands inside
/// [min_frac, max_frac].
pub fn adjust_thresholds_by_frac(
    windows: &[f64],
    t: &ThresholdPair,
    min_frac: f64,
    max_frac: f64,
    separate_pos_neg: bool,
) -> ThresholdPair {
    assert!(min_frac > 0.0 && min_frac <= max_frac && max_frac < 1.0);
    let mut out = *t;
    if separate_pos_neg {
        let pos: Vec<f64> = windows.iter().cloned().filter(|&v| v > 0.0).collect();
        let neg: Vec<f64> = windows.iter().map(|&v| -v).filter(|&v| v > 0.0).collect();
        if !pos.is_empty() {
            let frac = pos.iter().filter(|&&v| v >= t.pos_threshold).count() as f64 / pos.len() as f64;
            let target = clamp_violation(frac, min_frac, max_frac);
            if let Some(target) = target {
                out.pos_threshold = quantile(&pos, 1.0 - target);
                out.pos_saturated = false;
            }
        }
        if !neg.is_empty() {
            let frac = neg.iter().filter(|&&v| v >= -t.neg_threshold).count() as f64 / neg.len() as f64;
            let target = clamp_violation(frac, min_frac, max_frac);
            if let Some(target) = target {
                out.neg_threshold = -quantile(&neg, 1.0 - target);
                out.neg_saturated = false;
            }
        }
    } else {
        let frac = windows.iter().filter(|&&v| t.passes(v)).count() as f64 / windows.len() as f64;
        if let Some(target) = clamp_violation(frac, min_frac, max_frac) {
            let abs: Vec<f64> = windows.iter().map(|v| v.abs()).collect();
            let thr = quantile(&abs, 1.0 - target);
            out.pos_threshold = thr;
            out.neg_threshold = -thr;
            out.pos_saturated = false;
            out.neg_saturated = false;
        }
    }
    out.transformed_cdf_cutoffs = cdf_cutoffs(windows, out.pos_threshold, out.neg_threshold);
    out
}

fn clamp_violation(frac: f64, min_frac: f64, max_frac: f64) -> Option<f64> {
    if frac < min_frac {
        Some(min_frac)
    } else if frac > max_frac {
        Some(max_frac)
    } else {
        None
    }
}

/// Greedy per-sequence extraction: repeatedly take the surviving window of
/// highest magnitude, expand by the flank, and drop windows overlapping the
/// emitted span by more than half.
pub fn extract_seqlets_one_task(
    dataset: &Dataset,
    task: usize,
    thresholds: &ThresholdPair,
    w: usize,
    flank: usize,
) -> Result<Vec<Seqlet>> {
    let span_len = w + 2 * flank;
    let mut out = Vec::new();
    for (si, seq) in dataset.sequences.iter().enumerate() {
        if seq.len() < w {
            continue;
        }
        let sums = window_sums(&seq.tracks[task].contrib, w)?;
        let mut alive: Vec<usize> = (0..sums.len())
            .filter(|&i| {
                thresholds.passes(sums[i]) && i >= flank && i + w + flank <= seq.len()
            })
            .collect();
        while !alive.is_empty() {
            let &best = alive
                .iter()
                .max_by(|&&a, &&b| {
                    sums[a]
                        .abs()
                        .partial_cmp(&sums[b].abs())
                        .unwrap()
                        .then(b.cmp(&a)) // tie: lower start index wins
                })
                .unwrap();
            let start = best - flank;
            let end = best + w + flank;
            out.push(Seqlet::slice(dataset, si, start, end, w, task));
            alive.retain(|&j| {
                let js = j as i64 - flank as i64;
                let je = (j + w + flank) as i64;
                let overlap = (je.min(end as i64) - js.max(start as i64)).max(0);
                (overlap as f64) <= 0.5 * span_len as f64
            });
        }
    }
    out.sort_by_key(|s| (s.coord.sequence_index, s.coord.start));
    Ok(out)
}

fn overlap_frac(a: &SeqletCoord, b: &SeqletCoord) -> f64 {
    if a.sequence_index != b.sequence_index {
        return 0.0;
    }
    let overlap = (a.end.min(b.end) as i64 - a.start.max(b.start) as i64).max(0);
    let shorter = a.len().min(b.len()).max(1);
    overlap as f64 / shorter as f64
}

/// Union the per-task seqlet lists, resolving pairs that overlap by more
/// than `overlap_portion` of the shorter span in favor of the seqlet with
/// the higher own-task transformed score.
pub fn union_seqlets(per_task_lists: Vec<Vec<Seqlet>>, overlap_portion: f64) -> Vec<Seqlet> {
    // percentile of each seqlet's own-task |score| within its task's list,
    // so the resolution scores are comparable across tasks
    let mut scored: Vec<(f64, usize, usize)> = Vec::new(); // (score, task order, flat index)
    let mut flat: Vec<Seqlet> = Vec::new();
    for (task_order, list) in per_task_lists.into_iter().enumerate() {
        let ecdf = Ecdf::new(list.iter().map(|s| s.task_scores[s.source_task].abs()));
        for seqlet in list {
            let t = ecdf.eval(seqlet.task_scores[seqlet.source_task].abs());
            scored.push((t, task_order, flat.len()));
            flat.push(seqlet);
        }
    }
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b].0
            .partial_cmp(&scored[a].0)
            .unwrap()
            .then(scored[a].1.cmp(&scored[b].1))
            .then(flat[a].coord.start.cmp(&flat[b].coord.start))
            .then(flat[a].coord.sequence_index.cmp(&flat[b].coord.sequence_index))
    });
    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let c = flat[idx].coord;
        if kept
            .iter()
            .all(|&k| overlap_frac(&c, &flat[k].coord) <= overlap_portion)
        {
            kept.push(idx);
        }
    }
    kept.sort_by_key(|&k| (flat[k].coord.sequence_index, flat[k].coord.start));
    let mut keep_flags = vec![false; flat.len()];
    for &k in &kept {
        keep_flags[k] = true;
    }
    let mut out: Vec<(usize, Seqlet)> = flat
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep_flags[*i])
        .collect();
    out.sort_by_key(|(_, s)| (s.coord.sequence_index, s.coord.start));
    out.into_iter().map(|(_, s)| s).collect()
}
