//! Metaclustering: percentile score transform and activity-pattern
//! assignment.

use crate::error::{ModiscoError, Result};
use crate::util::Ecdf;

pub const MAX_TASKS: usize = 10;

/// A {-1, 0, +1} vector over tasks. Zero entries place no constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivityPattern(pub Vec<i8>);

impl ActivityPattern {
    pub fn num_nonzero(&self) -> usize {
        self.0.iter().filter(|&&v| v != 0).count()
    }

    pub fn relevant_tasks(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] != 0).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Metacluster {
    pub pattern: ActivityPattern,
    /// Indices into the unified seqlet list.
    pub seqlet_indices: Vec<usize>,
}

/// Per-seqlet per-task transformed scores in [-1, 1].
#[derive(Debug, Clone)]
pub struct TransformedScores {
    /// rows = seqlets, columns = tasks
    pub values: Vec<Vec<f64>>,
}

/// Replace each raw score by its signed percentile within the task column.
/// Default mode ranks |score| against the column's absolute values; separate
/// mode ranks positives among positives and negatives among negatives.
pub fn percentile_transform(raw: &[Vec<f64>], separate_pos_neg: bool) -> TransformedScores {
    let n = raw.len();
    if n == 0 {
        return TransformedScores { values: Vec::new() };
    }
    let tasks = raw[0].len();
    let mut values = vec![vec![0.0; tasks]; n];
    for t in 0..tasks {
        let column: Vec<f64> = raw.iter().map(|r| r[t]).collect();
        if separate_pos_neg {
            let pos = Ecdf::new(column.iter().cloned().filter(|&v| v > 0.0));
            let neg = Ecdf::new(column.iter().cloned().filter(|&v| v < 0.0).map(|v| -v));
            for i in 0..n {
                let v = column[i];
                values[i][t] = if v > 0.0 {
                    pos.eval(v)
                } else if v < 0.0 {
                    -neg.eval(-v)
                } else {
                    0.0
                };
            }
        } else {
            let abs = Ecdf::new(column.iter().map(|v| v.abs()));
            for i in 0..n {
                let v = column[i];
                values[i][t] = v.signum() * abs.eval(v.abs());
            }
        }
    }
    TransformedScores { values }
}

/// True iff every nonzero pattern entry is exceeded in its direction.
pub fn compatible(v: &[f64], p: &ActivityPattern, threshold: f64) -> bool {
    assert_eq!(v.len(), p.0.len());
    v.iter()
        .zip(p.0.iter())
        .all(|(&vi, &pi)| pi == 0 || vi * pi as f64 > threshold)
}

fn all_patterns(n: usize) -> Vec<ActivityPattern> {
    let mut out = Vec::with_capacity(3usize.pow(n as u32));
    let mut current = vec![0i8; n];
    loop {
        out.push(ActivityPattern(current.clone()));
        // count in base 3 over {-1, 0, 1}
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            current[i] += 1;
            if current[i] > 1 {
                current[i] = -1;
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// Assign every seqlet to the most specific surviving activity pattern it is
/// weakly compatible with, then cap each metacluster's size.
pub fn metacluster_assign(
    scores: &TransformedScores,
    strong_threshold: f64,
    weak_threshold: f64,
    min_size: usize,
    min_frac: f64,
    max_seqlets_per_metacluster: usize,
) -> Result<Vec<Metacluster>> {
    let n = scores.values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let tasks = scores.values[0].len();
    if tasks > MAX_TASKS {
        return Err(ModiscoError::Config(format!(
            "{tasks} tasks exceeds the supported maximum of {MAX_TASKS}; \
             consider running one task at a time"
        )));
    }
    let weak = weak_threshold.min(strong_threshold);
    let patterns = all_patterns(tasks);
    let floor = (min_size as f64).min(min_frac * n as f64);

    let surviving: Vec<ActivityPattern> = patterns
        .into_iter()
        .filter(|p| {
            let count = scores
                .values
                .iter()
                .filter(|v| compatible(v, p, strong_threshold))
                .count();
            count as f64 >= floor
        })
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); surviving.len()];
    for (si, v) in scores.values.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (pi, p) in surviving.iter().enumerate() {
            if !compatible(v, p, weak) {
                continue;
            }
            best = Some(match best {
                None => pi,
                Some(cur) => {
                    let (a, b) = (&surviving[cur], &surviving[pi]);
                    if b.num_nonzero() > a.num_nonzero() {
                        pi
                    } else if b.num_nonzero() == a.num_nonzero()
                        && constrained_min_abs(v, b) > constrained_min_abs(v, a)
                    {
                        pi
                    } else {
                        cur
                    }
                }
            });
        }
        if let Some(pi) = best {
            members[pi].push(si);
        }
    }

    let mut out: Vec<Metacluster> = surviving
        .into_iter()
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(pattern, mut seqlet_indices)| {
            if seqlet_indices.len() > max_seqlets_per_metacluster {
                let relevant = pattern.relevant_tasks();
                seqlet_indices.sort_by(|&a, &b| {
                    let sa: f64 = relevant.iter().map(|&t| scores.values[a][t].abs()).sum();
                    let sb: f64 = relevant.iter().map(|&t| scores.values[b][t].abs()).sum();
                    sb.partial_cmp(&sa).unwrap().then(a.cmp(&b))
                });
                seqlet_indices.truncate(max_seqlets_per_metacluster);
                seqlet_indices.sort_unstable();
            }
            Metacluster {
                pattern,
                seqlet_indices,
            }
        })
        .collect();
    // biggest metaclusters first; ties by pattern for determinism
    out.sort_by(|a, b| {
        b.seqlet_indices
            .len()
            .cmp(&a.seqlet_indices.len())
            .then_with(|| a.pattern.0.cmp(&b.pattern.0))
    });
    Ok(out)
}

/// Tie-break aggregate: the minimum |transformed score| over the pattern's
/// constrained tasks.
fn constrained_min_abs(v: &[f64], p: &ActivityPattern) -> f64 {
    p.0.iter()
        .enumerate()
        .filter(|(_, &pi)| pi != 0)
        .map(|(i, _)| v[i].abs())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_transform_by_hand() {
        let raw = vec![vec![5.0], vec![-3.0], vec![1.0]];
        let t = percentile_transform(&raw, false);
        assert!((t.values[0][0] - 1.0).abs() < 1e-12);
        assert!((t.values[1][0] + 2.0 / 3.0).abs() < 1e-12);
        assert!((t.values[2][0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_transform_degenerate_ties() {
        let raw = vec![vec![2.0], vec![2.0], vec![2.0]];
        let t = percentile_transform(&raw, false);
        assert!(t.values.iter().all(|v| (v[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn percentile_transform_rank_invariance() {
        let raw = vec![vec![5.0, 0.1], vec![-3.0, -0.4], vec![1.0, 0.2]];
        let scaled: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| vec![r[0] * 7.5, r[1] * 0.003])
            .collect();
        let a = percentile_transform(&raw, false);
        let b = percentile_transform(&scaled, false);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn compatible_cases() {
        let p10 = ActivityPattern(vec![1, 0]);
        assert!(compatible(&[0.9, -0.2], &p10, 0.8));
        let p1m1 = ActivityPattern(vec![1, -1]);
        assert!(!compatible(&[0.9, -0.2], &p1m1, 0.8));
        // all-zeros pattern is compatible with everything
        let zeros = ActivityPattern(vec![0, 0]);
        assert!(compatible(&[-0.99, 0.0], &zeros, 0.99));
    }

    #[test]
    fn single_task_forced_outcome() {
        let raw: Vec<Vec<f64>> = (1..=20).map(|i| vec![i as f64]).collect();
        let t = percentile_transform(&raw, false);
        let mcs = metacluster_assign(&t, 0.0, 0.8, 2, 0.01, 1000).unwrap();
        let nonzero: Vec<&Metacluster> =
            mcs.iter().filter(|m| m.pattern.num_nonzero() > 0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].pattern, ActivityPattern(vec![1]));
        assert_eq!(nonzero[0].seqlet_indices.len(), 20);
    }

    #[test]
    fn fewest_zeros_wins() {
        // many seqlets strong on both tasks so (1,1), (1,0), (0,1) survive
        let mut raw: Vec<Vec<f64>> = Vec::new();
        for i in 0..30 {
            let v = 1.0 + i as f64 * 0.01;
            raw.push(vec![v, v]);
        }
        let t = percentile_transform(&raw, false);
        let mcs = metacluster_assign(&t, 0.0, 0.8, 5, 0.01, 1000).unwrap();
        let assigned: Vec<&Metacluster> = mcs
            .iter()
            .filter(|m| !m.seqlet_indices.is_empty() && m.pattern.num_nonzero() > 0)
            .collect();
        assert_eq!(assigned.len(), 1);
        assert_eq!(assigned[0].pattern, ActivityPattern(vec![1, 1]));
    }

    #[test]
    fn two_task_synthetic_split() {
        // 100 task0-specific and 100 task1-specific seqlets
        let mut raw: Vec<Vec<f64>> = Vec::new();
        for i in 0..100 {
            raw.push(vec![10.0 + i as f64, 0.01 * (i as f64 % 7.0 - 3.0)]);
        }
        for i in 0..100 {
            raw.push(vec![0.01 * (i as f64 % 7.0 - 3.0), 10.0 + i as f64]);
        }
        let t = percentile_transform(&raw, false);
        let mcs = metacluster_assign(&t, 0.5, 0.5, 50, 0.01, 1000).unwrap();
        let specific: Vec<&Metacluster> = mcs
            .iter()
            .filter(|m| m.pattern.num_nonzero() == 1 && !m.seqlet_indices.is_empty())
            .collect();
        assert_eq!(specific.len(), 2);
        for mc in specific {
            assert_eq!(mc.seqlet_indices.len(), 100);
            if mc.pattern == ActivityPattern(vec![1, 0]) {
                assert!(mc.seqlet_indices.iter().all(|&i| i < 100));
            } else {
                assert_eq!(mc.pattern, ActivityPattern(vec![0, 1]));
                assert!(mc.seqlet_indices.iter().all(|&i| i >= 100));
            }
        }
    }

    #[test]
    fn weak_compatibility_invariant() {
        let raw: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 - 25.0) / 5.0, (i as f64 % 11.0) - 5.0])
            .collect();
        let t = percentile_transform(&raw, false);
        let strong = 0.4;
        let weak = 0.3;
        let mcs = metacluster_assign(&t, strong, weak, 3, 0.01, 1000).unwrap();
        for mc in &mcs {
            for &si in &mc.seqlet_indices {
                assert!(compatible(&t.values[si], &mc.pattern, weak.min(strong)));
            }
        }
    }

    #[test]
    fn too_many_tasks_refused() {
        let raw = vec![vec![1.0; 11]];
        let t = percentile_transform(&raw, false);
        assert!(matches!(
            metacluster_assign(&t, 0.5, 0.5, 1, 0.01, 10),
            Err(ModiscoError::Config(_))
        ));
    }

    #[test]
    fn cap_keeps_largest_scores() {
        let raw: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64]).collect();
        let t = percentile_transform(&raw, false);
        let mcs = metacluster_assign(&t, 0.0, 0.0, 1, 0.0, 3).unwrap();
        let mc = mcs
            .iter()
            .find(|m| m.pattern == ActivityPattern(vec![1]))
            .unwrap();
        assert_eq!(mc.seqlet_indices, vec![7, 8, 9]);
    }
}
