//! Coarse affinity: gapped k-mer embeddings of seqlets and cosine
//! similarity, used to pick nearest neighbors for the fine pass.
//!
//! A gapped k-mer is a length-k string over {A, C, G, T, gap}. Matching a
//! window allows up to `max_mismatches` lettered positions to disagree with
//! the present sequence; gap positions are excluded from both matching and
//! scoring, mismatch positions are excluded from scoring only.

use rayon::prelude::*;

use crate::dataset::BaseRow;
use crate::error::{ModiscoError, Result};
use crate::metacluster::ActivityPattern;
use crate::seqlets::Seqlet;

#[derive(Debug, Clone, Copy)]
pub struct GappedKmerSpec {
    pub kmer_len: usize,
    pub max_gapped_positions: usize,
    pub max_mismatches: usize,
}

impl Default for GappedKmerSpec {
    fn default() -> Self {
        GappedKmerSpec {
            kmer_len: 8,
            max_gapped_positions: 3,
            max_mismatches: 2,
        }
    }
}

impl GappedKmerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kmer_len == 0 || self.kmer_len > 10 {
            return Err(ModiscoError::Config(format!(
                "kmer_len {} out of supported range 1..=10",
                self.kmer_len
            )));
        }
        if self.max_gapped_positions + self.max_mismatches >= self.kmer_len {
            return Err(ModiscoError::Config(
                "gaps + mismatches must be smaller than kmer_len".into(),
            ));
        }
        Ok(())
    }

    /// Number of distinct gapped k-mer ids (base-5 digit strings).
    pub fn id_space(&self) -> usize {
        5usize.pow(self.kmer_len as u32)
    }
}

/// Sparse embedding: (gapped k-mer id, total score), sorted by id.
#[derive(Debug, Clone, Default)]
pub struct GkmEmbedding {
    pub entries: Vec<(u32, f64)>,
}

impl GkmEmbedding {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Embedding of the reverse-complemented seqlet: ids are remapped by
    /// reversing digit order and complementing letters (gaps stay gaps).
    pub fn reverse_complement(&self, spec: &GappedKmerSpec) -> GkmEmbedding {
        let k = spec.kmer_len;
        let mut entries: Vec<(u32, f64)> = self
            .entries
            .iter()
            .map(|&(id, v)| (rc_id(id, k), v))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        GkmEmbedding { entries }
    }
}

fn rc_id(id: u32, k: usize) -> u32 {
    let mut digits = [0u32; 10];
    let mut rest = id;
    for d in digits.iter_mut().take(k) {
        *d = rest % 5;
        rest /= 5;
    }
    let mut out = 0u32;
    for i in 0..k {
        let d = digits[k - 1 - i];
        let c = if d == 4 { 4 } else { 3 - d };
        out += c * 5u32.pow(i as u32);
    }
    out
}

/// Sum of sign(pattern_t) * hyp_t over the pattern's relevant tasks.
pub fn summed_hyp_track(seqlet: &Seqlet, pattern: &ActivityPattern) -> Result<Vec<BaseRow>> {
    let relevant = pattern.relevant_tasks();
    if relevant.is_empty() {
        return Err(ModiscoError::Validation(
            "all-zero activity pattern has no relevant tasks".into(),
        ));
    }
    let l = seqlet.len();
    let mut out = vec![[0.0; 4]; l];
    for &t in &relevant {
        let sign = pattern.0[t] as f64;
        for (pos, row) in seqlet.tracks[t].hyp.iter().enumerate() {
            for b in 0..4 {
                out[pos][b] += sign * row[b];
            }
        }
    }
    Ok(out)
}

/// One (gap set, mismatch set) exclusion template, precomputed per spec.
struct MaskEntry {
    gap_positions: Vec<u8>,
    mism_positions: Vec<u8>,
}

pub struct GkmEngine {
    spec: GappedKmerSpec,
    masks: Vec<MaskEntry>,
    pow5: Vec<u32>,
}

impl GkmEngine {
    pub fn new(spec: GappedKmerSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.kmer_len;
        let mut masks = Vec::new();
        let mut gap_sets: Vec<Vec<u8>> = Vec::new();
        subsets_up_to(k, spec.max_gapped_positions, &mut gap_sets);
        for gaps in &gap_sets {
            let remaining: Vec<u8> = (0..k as u8).filter(|p| !gaps.contains(p)).collect();
            let max_m = spec
                .max_mismatches
                .min(k - gaps.len() - 1); // gaps + mismatches < k
            let mut mism_sets: Vec<Vec<u8>> = Vec::new();
            subsets_of_up_to(&remaining, max_m, &mut mism_sets);
            for mism in mism_sets {
                masks.push(MaskEntry {
                    gap_positions: gaps.clone(),
                    mism_positions: mism,
                });
            }
        }
        let pow5 = (0..k).map(|i| 5u32.pow(i as u32)).collect();
        Ok(GkmEngine { spec, masks, pow5 })
    }

    pub fn spec(&self) -> &GappedKmerSpec {
        &self.spec
    }

    /// Embed one seqlet given its present-base indices and summed hyp track.
    pub fn embed(&self, bases: &[usize], summed_hyp: &[BaseRow], scratch: &mut GkmScratch) -> GkmEmbedding {
        let k = self.spec.kmer_len;
        if bases.len() < k {
            return GkmEmbedding::default();
        }
        scratch.begin(self.spec.id_space());
        let mut present = vec![0.0f64; k];
        for start in 0..=(bases.len() - k) {
            let window = &bases[start..start + k];
            let mut base_id = 0u32;
            let mut total = 0.0;
            for i in 0..k {
                let b = window[i];
                base_id += (b as u32) * self.pow5[i];
                present[i] = summed_hyp[start + i][b];
                total += present[i];
            }
            for mask in &self.masks {
                let mut score = total;
                let mut id = base_id;
                for &g in &mask.gap_positions {
                    let gi = g as usize;
                    score -= present[gi];
                    id += (4 - window[gi] as u32) * self.pow5[gi];
                }
                for &m in &mask.mism_positions {
                    score -= present[m as usize];
                }
                // enumerate mismatch letterings (each letter != present base)
                match mask.mism_positions.len() {
                    0 => scratch.add(id, score),
                    1 => {
                        let p = mask.mism_positions[0] as usize;
                        let b = window[p] as u32;
                        for l in 0..4u32 {
                            if l != b {
                                scratch.add(swap_digit(id, b, l, self.pow5[p]), score);
                            }
                        }
                    }
                    2 => {
                        let p0 = mask.mism_positions[0] as usize;
                        let p1 = mask.mism_positions[1] as usize;
                        let b0 = window[p0] as u32;
                        let b1 = window[p1] as u32;
                        for l0 in 0..4u32 {
                            if l0 == b0 {
                                continue;
                            }
                            let id0 = swap_digit(id, b0, l0, self.pow5[p0]);
                            for l1 in 0..4u32 {
                                if l1 != b1 {
                                    scratch.add(swap_digit(id0, b1, l1, self.pow5[p1]), score);
                                }
                            }
                        }
                    }
                    _ => {
                        // general case for larger mismatch budgets
                        self.add_mismatch_combos(&mask.mism_positions, window, id, score, 0, scratch);
                    }
                }
            }
        }
        scratch.collect()
    }

    fn add_mismatch_combos(
        &self,
        positions: &[u8],
        window: &[usize],
        id: u32,
        score: f64,
        depth: usize,
        scratch: &mut GkmScratch,
    ) {
        if depth == positions.len() {
            scratch.add(id, score);
            return;
        }
        let p = positions[depth] as usize;
        let b = window[p] as u32;
        for l in 0..4u32 {
            if l != b {
                let next = swap_digit(id, b, l, self.pow5[p]);
                self.add_mismatch_combos(positions, window, next, score, depth + 1, scratch);
            }
        }
    }

    pub fn embed_seqlet(
        &self,
        seqlet: &Seqlet,
        pattern: &ActivityPattern,
        scratch: &mut GkmScratch,
    ) -> Result<GkmEmbedding> {
        let summed = summed_hyp_track(seqlet, pattern)?;
        let bases: Vec<usize> = (0..seqlet.len())
            .map(|pos| {
                let row = &seqlet.onehot[pos];
                (0..4).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap()
            })
            .collect();
        Ok(self.embed(&bases, &summed, scratch))
    }
}

/// Swap the digit at a position from `from` to `to` in a base-5 id.
#[inline]
fn swap_digit(id: u32, from: u32, to: u32, pow: u32) -> u32 {
    (id as i64 + (to as i64 - from as i64) * pow as i64) as u32
}

fn subsets_up_to(n: usize, max_size: usize, out: &mut Vec<Vec<u8>>) {
    let all: Vec<u8> = (0..n as u8).collect();
    subsets_of_up_to(&all, max_size, out);
}

fn subsets_of_up_to(items: &[u8], max_size: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(items: &[u8], start: usize, remaining: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        out.push(current.clone());
        if remaining == 0 {
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            rec(items, i + 1, remaining - 1, current, out);
            current.pop();
        }
    }
    let mut current = Vec::new();
    rec(items, 0, max_size, &mut current, out);
}

/// Reusable dense accumulator over the gapped k-mer id space.
pub struct GkmScratch {
    acc: Vec<f64>,
    stamp: Vec<u32>,
    epoch: u32,
    touched: Vec<u32>,
}

impl GkmScratch {
    pub fn new() -> Self {
        GkmScratch {
            acc: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            touched: Vec::new(),
        }
    }

    fn begin(&mut self, size: usize) {
        if self.acc.len() < size {
            self.acc = vec![0.0; size];
            self.stamp = vec![0; size];
            self.epoch = 0;
        }
        self.epoch += 1;
        self.touched.clear();
    }

    #[inline]
    fn add(&mut self, id: u32, v: f64) {
        let i = id as usize;
        if self.stamp[i] != self.epoch {
            self.stamp[i] = self.epoch;
            self.acc[i] = v;
            self.touched.push(id);
        } else {
            self.acc[i] += v;
        }
    }

    fn collect(&mut self) -> GkmEmbedding {
        self.touched.sort_unstable();
        let entries = self
            .touched
            .iter()
            .map(|&id| (id, self.acc[id as usize]))
            .filter(|(_, v)| *v != 0.0)
            .collect();
        GkmEmbedding { entries }
    }
}

impl Default for GkmScratch {
    fn default() -> Self {
        Self::new()
    }
}

/// Sparse dot product over sorted entry lists.
pub fn embedding_dot(a: &GkmEmbedding, b: &GkmEmbedding) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut dot = 0.0;
    while i < a.entries.len() && j < b.entries.len() {
        match a.entries[i].0.cmp(&b.entries[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a.entries[i].1 * b.entries[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

pub fn cosine_affinity(a: &GkmEmbedding, b: &GkmEmbedding) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    embedding_dot(a, b) / (na * nb)
}

/// All-pairs dots of `rows` against `cols` via blocked dense f32 matmul
/// over chunks of the id space.
fn dense_all_dots(rows: &[GkmEmbedding], cols: &[GkmEmbedding], id_space: usize) -> Vec<f32> {
    const BLOCK: usize = 4096;
    let n = rows.len();
    let m = cols.len();
    let mut c = vec![0.0f32; n * m];
    let mut a_block = vec![0.0f32; n * BLOCK];
    let mut b_block = vec![0.0f32; m * BLOCK];
    let mut row_cursor = vec![0usize; n];
    let mut col_cursor = vec![0usize; m];
    let mut lo = 0usize;
    while lo < id_space {
        let hi = (lo + BLOCK).min(id_space) as u32;
        let width = hi as usize - lo;
        let mut any = false;
        a_block[..n * width].fill(0.0);
        for (r, emb) in rows.iter().enumerate() {
            let cur = &mut row_cursor[r];
            while *cur < emb.entries.len() && emb.entries[*cur].0 < hi {
                let (id, v) = emb.entries[*cur];
                a_block[r * width + (id as usize - lo)] = v as f32;
                *cur += 1;
                any = true;
            }
        }
        b_block[..m * width].fill(0.0);
        for (r, emb) in cols.iter().enumerate() {
            let cur = &mut col_cursor[r];
            while *cur < emb.entries.len() && emb.entries[*cur].0 < hi {
                let (id, v) = emb.entries[*cur];
                b_block[r * width + (id as usize - lo)] = v as f32;
                *cur += 1;
                any = true;
            }
        }
        if any {
            unsafe {
                matrixmultiply::sgemm(
                    n,
                    width,
                    m,
                    1.0,
                    a_block.as_ptr(),
                    width as isize,
                    1,
                    b_block.as_ptr(),
                    1,
                    width as isize,
                    1.0,
                    c.as_mut_ptr(),
                    m as isize,
                    1,
                );
            }
        }
        lo += BLOCK;
    }
    c
}

/// Full coarse affinity matrix plus per-row top-k neighbor lists.
pub fn coarse_affmat_and_neighbors(
    seqlets: &[Seqlet],
    spec: &GappedKmerSpec,
    pattern: &ActivityPattern,
    k: usize,
    revcomp: bool,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<usize>>)> {
    let n = seqlets.len();
    if n < 2 {
        return Err(ModiscoError::Validation(
            "need at least 2 seqlets for an affinity matrix".into(),
        ));
    }
    let engine = GkmEngine::new(*spec)?;
    let embeddings: Vec<GkmEmbedding> = seqlets
        .par_iter()
        .map_init(GkmScratch::new, |scratch, s| {
            engine.embed_seqlet(s, pattern, scratch)
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = embeddings.iter().map(|e| e.norm()).collect();

    let fwd = dense_all_dots(&embeddings, &embeddings, spec.id_space());
    let rc_dots = if revcomp {
        let rc: Vec<GkmEmbedding> = embeddings
            .par_iter()
            .map(|e| e.reverse_complement(spec))
            .collect();
        Some(dense_all_dots(&embeddings, &rc, spec.id_space()))
    } else {
        None
    };

    let mut aff = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        aff[i][i] = if norms[i] > 0.0 { 1.0 } else { 0.0 };
        for j in (i + 1)..n {
            let denom = norms[i] * norms[j];
            let v = if denom == 0.0 {
                0.0
            } else {
                let mut d = fwd[i * n + j] as f64;
                if let Some(rc) = &rc_dots {
                    d = d.max(rc[i * n + j] as f64);
                }
                (d / denom).clamp(-1.0, 1.0)
            };
            aff[i][j] = v;
            aff[j][i] = v;
        }
    }

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| aff[i][b].partial_cmp(&aff[i][a]).unwrap().then(a.cmp(&b)));
            idx.truncate(k);
            idx
        })
        .collect();
    Ok((aff, neighbors))
}
