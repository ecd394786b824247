//! Pipeline configuration: every tunable parameter with its default.

use serde::{Deserialize, Serialize};

use crate::coarse::GappedKmerSpec;
use crate::error::{ModiscoError, Result};
use crate::postprocess::MergeCriteria;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Phase 1a: seqlet extraction
    pub sliding_window_size: usize,
    pub flank_size: usize,
    pub target_fdr: f64,
    pub min_passing_windows_frac: f64,
    pub max_passing_windows_frac: f64,
    pub separate_pos_neg_thresholds: bool,
    pub overlap_portion: f64,

    // Phase 1b: metaclustering
    pub min_metacluster_size: usize,
    pub min_metacluster_size_frac: f64,
    pub weak_threshold: f64,
    pub max_seqlets_per_metacluster: usize,

    // Phase 2: affinities and clustering
    pub nearest_neighbors_to_compute: usize,
    pub revcomp: bool,
    pub kmer_len: usize,
    pub kmer_max_gapped_positions: usize,
    pub kmer_max_mismatches: usize,
    pub min_overlap_while_sliding: f64,
    pub affmat_correlation_threshold: f64,
    pub perplexity: f64,
    pub use_louvain: bool,
    pub louvain_membership_average_n_runs: usize,
    pub louvain_patience: usize,
    pub leiden_n_seeds: usize,

    // Phase 2: motif aggregation and boundary editing
    pub frac_support_to_trim_to: f64,
    pub min_num_to_trim_to: usize,
    pub trim_to_window_size: usize,
    pub initial_flank_to_add: usize,
    pub extra_cluster_rounds: usize,

    // Phase 3: postprocessing
    pub min_size_for_spurious_merge_detection: usize,
    pub threshold_for_spurious_merge_detection: f64,
    pub merge_criteria: MergeCriteria,
    pub final_min_cluster_size: usize,
    pub min_similarity_for_seqlet_assignment: f64,
    pub final_flank_to_add: usize,

    pub master_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sliding_window_size: 21,
            flank_size: 10,
            target_fdr: 0.01,
            min_passing_windows_frac: 0.03,
            max_passing_windows_frac: 0.2,
            separate_pos_neg_thresholds: false,
            overlap_portion: 0.5,
            min_metacluster_size: 100,
            min_metacluster_size_frac: 0.01,
            weak_threshold: 0.8,
            max_seqlets_per_metacluster: 20000,
            nearest_neighbors_to_compute: 500,
            revcomp: true,
            kmer_len: 8,
            kmer_max_gapped_positions: 3,
            kmer_max_mismatches: 2,
            min_overlap_while_sliding: 0.7,
            affmat_correlation_threshold: 0.15,
            perplexity: 10.0,
            use_louvain: false,
            louvain_membership_average_n_runs: 200,
            louvain_patience: 50,
            leiden_n_seeds: 50,
            frac_support_to_trim_to: 0.2,
            min_num_to_trim_to: 30,
            trim_to_window_size: 30,
            initial_flank_to_add: 10,
            extra_cluster_rounds: 1,
            min_size_for_spurious_merge_detection: 30,
            threshold_for_spurious_merge_detection: 0.8,
            merge_criteria: MergeCriteria::default(),
            final_min_cluster_size: 30,
            min_similarity_for_seqlet_assignment: 0.2,
            final_flank_to_add: 10,
            master_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fracs = [
            ("target_fdr", self.target_fdr),
            ("min_passing_windows_frac", self.min_passing_windows_frac),
            ("max_passing_windows_frac", self.max_passing_windows_frac),
            ("overlap_portion", self.overlap_portion),
            ("min_metacluster_size_frac", self.min_metacluster_size_frac),
            ("min_overlap_while_sliding", self.min_overlap_while_sliding),
            ("frac_support_to_trim_to", self.frac_support_to_trim_to),
        ];
        for (name, v) in fracs {
            if !(v > 0.0 && v < 1.0) {
                return Err(ModiscoError::Config(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if self.min_passing_windows_frac > self.max_passing_windows_frac {
            return Err(ModiscoError::Config(
                "min_passing_windows_frac exceeds max_passing_windows_frac".into(),
            ));
        }
        let sizes = [
            ("sliding_window_size", self.sliding_window_size),
            ("max_seqlets_per_metacluster", self.max_seqlets_per_metacluster),
            ("nearest_neighbors_to_compute", self.nearest_neighbors_to_compute),
            ("trim_to_window_size", self.trim_to_window_size),
            ("leiden_n_seeds", self.leiden_n_seeds),
            (
                "louvain_membership_average_n_runs",
                self.louvain_membership_average_n_runs,
            ),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(ModiscoError::Config(format!("{name} must be positive")));
            }
        }
        if self.perplexity <= 0.0 {
            return Err(ModiscoError::Config("perplexity must be positive".into()));
        }
        if self.trim_to_window_size > self.sliding_window_size + 2 * self.flank_size {
            return Err(ModiscoError::Config(
                "trim_to_window_size exceeds the extracted seqlet length".into(),
            ));
        }
        if self.merge_criteria.similar.is_empty() || self.merge_criteria.dissimilar.is_empty() {
            return Err(ModiscoError::Config(
                "merge criteria lists must be nonempty".into(),
            ));
        }
        self.kmer_spec().validate()
    }

    pub fn kmer_spec(&self) -> GappedKmerSpec {
        GappedKmerSpec {
            kmer_len: self.kmer_len,
            max_gapped_positions: self.kmer_max_gapped_positions,
            max_mismatches: self.kmer_max_mismatches,
        }
    }

    /// Extracted seqlet length before any boundary editing.
    pub fn seqlet_len(&self) -> usize {
        self.sliding_window_size + 2 * self.flank_size
    }
}
