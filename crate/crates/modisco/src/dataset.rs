//! Input dataset model and on-disk formats.
//!
//! A dataset directory holds `manifest.json` plus raw little-endian f32
//! binary files in row-major order, one file per track, concatenated across
//! sequences: `onehot.bin`, `contrib_<task>.bin`, `hyp_<task>.bin`, and
//! optionally `null_<task>.bin` described by `null_manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ModiscoError, Result};

pub type BaseRow = [f64; 4];

/// Per-task tracks of one sequence: actual contributions (nonzero only on
/// the present base) and hypothetical contributions (all four bases).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTracks {
    pub contrib: Vec<BaseRow>,
    pub hyp: Vec<BaseRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub onehot: Vec<BaseRow>,
    /// Parallel to `Dataset::tasks`.
    pub tracks: Vec<TaskTracks>,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.onehot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onehot.is_empty()
    }

    /// Index of the present base at `pos`.
    pub fn base_at(&self, pos: usize) -> usize {
        let row = &self.onehot[pos];
        (0..4).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tasks: Vec<String>,
    pub sequences: Vec<SequenceRecord>,
    /// Optional per-task null tracks: 1-D per-position scores (already
    /// summed across the four bases), used only through window sums.
    pub nulls: Option<BTreeMap<String, Vec<Vec<f64>>>>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for (si, rec) in self.sequences.iter().enumerate() {
            let l = rec.onehot.len();
            if rec.tracks.len() != self.tasks.len() {
                return Err(ModiscoError::Validation(format!(
                    "sequence {si}: {} task tracks, expected {}",
                    rec.tracks.len(),
                    self.tasks.len()
                )));
            }
            for (pos, row) in rec.onehot.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                let ok = row.iter().all(|&v| v == 0.0 || v == 1.0) && sum == 1.0;
                if !ok {
                    return Err(ModiscoError::Validation(format!(
                        "sequence {si} position {pos}: onehot row {row:?} does not sum to 1"
                    )));
                }
            }
            for (ti, tr) in rec.tracks.iter().enumerate() {
                if tr.contrib.len() != l || tr.hyp.len() != l {
                    return Err(ModiscoError::Validation(format!(
                        "sequence {si} task {}: track length mismatch ({} / {} vs {l})",
                        self.tasks[ti],
                        tr.contrib.len(),
                        tr.hyp.len()
                    )));
                }
                for (pos, (c, o)) in tr.contrib.iter().zip(rec.onehot.iter()).enumerate() {
                    for b in 0..4 {
                        if o[b] == 0.0 && c[b] != 0.0 {
                            return Err(ModiscoError::Validation(format!(
                                "sequence {si} task {} position {pos}: contribution {} on absent base {b}",
                                self.tasks[ti], c[b]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tasks: Vec<String>,
    num_sequences: usize,
    sequence_lengths: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NullManifest {
    tasks: Vec<String>,
    num_tracks: usize,
    track_lengths: Vec<usize>,
}

fn read_f32_file(path: &Path, expected: usize) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(ModiscoError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| ModiscoError::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(ModiscoError::Format(format!(
            "{}: expected {} f32 values ({} bytes), found {} bytes",
            path.display(),
            expected,
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_f32_file(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    for v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, &buf).map_err(|e| ModiscoError::io(path, e))
}

fn rows_from_flat(flat: &[f64]) -> Vec<BaseRow> {
    flat.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(ModiscoError::MissingFile(manifest_path));
    }
    let manifest: Manifest = serde_json::from_slice(
        &fs::read(&manifest_path).map_err(|e| ModiscoError::io(&manifest_path, e))?,
    )
    .map_err(|e| ModiscoError::Format(format!("manifest.json: {e}")))?;
    if manifest.sequence_lengths.len() != manifest.num_sequences {
        return Err(ModiscoError::Format(format!(
            "manifest.json: {} sequence_lengths for num_sequences={}",
            manifest.sequence_lengths.len(),
            manifest.num_sequences
        )));
    }
    let total: usize = manifest.sequence_lengths.iter().sum();

    let onehot_flat = read_f32_file(&dir.join("onehot.bin"), total * 4)?;
    let mut per_task: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for task in &manifest.tasks {
        let contrib = read_f32_file(&dir.join(format!("contrib_{task}.bin")), total * 4)?;
        let hyp = read_f32_file(&dir.join(format!("hyp_{task}.bin")), total * 4)?;
        per_task.push((contrib, hyp));
    }

    let mut sequences = Vec::with_capacity(manifest.num_sequences);
    let mut offset = 0usize;
    for &l in &manifest.sequence_lengths {
        let onehot = rows_from_flat(&onehot_flat[offset * 4..(offset + l) * 4]);
        let tracks = per_task
            .iter()
            .map(|(c, h)| TaskTracks {
                contrib: rows_from_flat(&c[offset * 4..(offset + l) * 4]),
                hyp: rows_from_flat(&h[offset * 4..(offset + l) * 4]),
            })
            .collect();
        sequences.push(SequenceRecord { onehot, tracks });
        offset += l;
    }

    let null_manifest_path = dir.join("null_manifest.json");
    let nulls = if null_manifest_path.exists() {
        let nm: NullManifest = serde_json::from_slice(
            &fs::read(&null_manifest_path).map_err(|e| ModiscoError::io(&null_manifest_path, e))?,
        )
        .map_err(|e| ModiscoError::Format(format!("null_manifest.json: {e}")))?;
        let total_null: usize = nm.track_lengths.iter().sum();
        let mut map = BTreeMap::new();
        for task in &nm.tasks {
            let flat = read_f32_file(&dir.join(format!("null_{task}.bin")), total_null)?;
            let mut tracks = Vec::with_capacity(nm.num_tracks);
            let mut off = 0usize;
            for &l in &nm.track_lengths {
                tracks.push(flat[off..off + l].to_vec());
                off += l;
            }
            map.insert(task.clone(), tracks);
        }
        Some(map)
    } else {
        None
    };

    let dataset = Dataset {
        tasks: manifest.tasks,
        sequences,
        nulls,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ModiscoError::io(dir, e))?;
    let manifest = Manifest {
        tasks: dataset.tasks.clone(),
        num_sequences: dataset.sequences.len(),
        sequence_lengths: dataset.sequences.iter().map(|s| s.len()).collect(),
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| ModiscoError::io(&manifest_path, e))?;

    write_f32_file(
        &dir.join("onehot.bin"),
        dataset
            .sequences
            .iter()
            .flat_map(|s| s.onehot.iter().flat_map(|r| r.iter().copied())),
    )?;
    for (ti, task) in dataset.tasks.iter().enumerate() {
        write_f32_file(
            &dir.join(format!("contrib_{task}.bin")),
            dataset
                .sequences
                .iter()
                .flat_map(move |s| s.tracks[ti].contrib.iter().flat_map(|r| r.iter().copied())),
        )?;
        write_f32_file(
            &dir.join(format!("hyp_{task}.bin")),
            dataset
                .sequences
                .iter()
                .flat_map(move |s| s.tracks[ti].hyp.iter().flat_map(|r| r.iter().copied())),
        )?;
    }
    if let Some(nulls) = &dataset.nulls {
        let first = nulls.values().next();
        let track_lengths: Vec<usize> = first
            .map(|tracks| tracks.iter().map(|t| t.len()).collect())
            .unwrap_or_default();
        let nm = NullManifest {
            tasks: nulls.keys().cloned().collect(),
            num_tracks: track_lengths.len(),
            track_lengths,
        };
        let nm_path = dir.join("null_manifest.json");
        fs::write(&nm_path, serde_json::to_vec_pretty(&nm).expect("serializes"))
            .map_err(|e| ModiscoError::io(&nm_path, e))?;
        for (task, tracks) in nulls {
            write_f32_file(
                &dir.join(format!("null_{task}.bin")),
                tracks.iter().flat_map(|t| t.iter().copied()),
            )?;
        }
    }
    Ok(())
}

// ── Results ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MemberCoord {
    pub sequence_index: usize,
    pub start: usize,
    pub end: usize,
    pub revcomp: bool,
    /// Offset of the member within the motif coordinate frame.
    pub offset: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MotifTaskTracks {
    pub task: String,
    pub contrib: Vec<BaseRow>,
    pub hyp: Vec<BaseRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MotifResult {
    pub length: usize,
    pub num_members: usize,
    pub members: Vec<MemberCoord>,
    pub seq_frequency: Vec<BaseRow>,
    pub tracks: Vec<MotifTaskTracks>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetaclusterResult {
    pub activity_pattern: Vec<i8>,
    pub num_seqlets: usize,
    pub motifs: Vec<MotifResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ResultsBundle {
    pub metaclusters: Vec<MetaclusterResult>,
}

impl ResultsBundle {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        for mc in &self.metaclusters {
            for motif in &mc.motifs {
                for m in &motif.members {
                    let l = dataset
                        .sequences
                        .get(m.sequence_index)
                        .map(|s| s.len())
                        .ok_or_else(|| {
                            ModiscoError::Validation(format!(
                                "member references sequence {} out of range",
                                m.sequence_index
                            ))
                        })?;
                    if m.start >= m.end || m.end > l {
                        return Err(ModiscoError::Validation(format!(
                            "member span [{}, {}) outside sequence {} of length {l}",
                            m.start, m.end, m.sequence_index
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes `results.json` plus one TSV per motif. Output bytes are a pure
/// function of the bundle contents.
pub fn save_results(results: &ResultsBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ModiscoError::io(dir, e))?;
    let json_path = dir.join("results.json");
    fs::write(
        &json_path,
        serde_json::to_vec_pretty(results).expect("results serialize"),
    )
    .map_err(|e| ModiscoError::io(&json_path, e))?;

    for (mi, mc) in results.metaclusters.iter().enumerate() {
        for (pi, motif) in mc.motifs.iter().enumerate() {
            let path = dir.join(format!("metacluster_{mi}_motif_{pi}.tsv"));
            let mut out = Vec::new();
            let mut header = vec!["pos".to_string()];
            for b in ["A", "C", "G", "T"] {
                header.push(format!("seq_{b}"));
            }
            for tr in &motif.tracks {
                for b in ["A", "C", "G", "T"] {
                    header.push(format!("contrib_{}_{b}", tr.task));
                }
                for b in ["A", "C", "G", "T"] {
                    header.push(format!("hyp_{}_{b}", tr.task));
                }
            }
            writeln!(out, "{}", header.join("\t")).unwrap();
            for pos in 0..motif.length {
                let mut row = vec![pos.to_string()];
                for b in 0..4 {
                    row.push(fmt_float(motif.seq_frequency[pos][b]));
                }
                for tr in &motif.tracks {
                    for b in 0..4 {
                        row.push(fmt_float(tr.contrib[pos][b]));
                    }
                    for b in 0..4 {
                        row.push(fmt_float(tr.hyp[pos][b]));
                    }
                }
                writeln!(out, "{}", row.join("\t")).unwrap();
            }
            fs::write(&path, out).map_err(|e| ModiscoError::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn load_results(dir: &Path) -> Result<ResultsBundle> {
    let path = dir.join("results.json");
    if !path.exists() {
        return Err(ModiscoError::MissingFile(path));
    }
    serde_json::from_slice(&fs::read(&path).map_err(|e| ModiscoError::io(&path, e))?)
        .map_err(|e| ModiscoError::Format(format!("results.json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_dataset() -> Dataset {
        let mk_seq = |bases: &[usize], scale: f64| {
            let l = bases.len();
            let mut onehot = vec![[0.0; 4]; l];
            let mut contrib = vec![[0.0; 4]; l];
            let mut hyp = vec![[0.0; 4]; l];
            for (i, &b) in bases.iter().enumerate() {
                onehot[i][b] = 1.0;
                contrib[i][b] = scale * (i as f64 + 1.0);
                for x in 0..4 {
                    hyp[i][x] = scale * 0.5 * (x as f64 - 1.0);
                }
            }
            SequenceRecord {
                onehot,
                tracks: vec![TaskTracks { contrib, hyp }],
            }
        };
        Dataset {
            tasks: vec!["t0".into()],
            sequences: vec![mk_seq(&[0, 1, 2, 3, 0], 0.25), mk_seq(&[3, 3, 1, 0], -0.5)],
            nulls: None,
        }
    }

    #[test]
    fn roundtrip_identity() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.sequences.len(), 2);
        assert_eq!(loaded, ds);
        // save(load(save(x))) is byte-identical
        let dir2 = tempfile::tempdir().unwrap();
        save_dataset(&loaded, dir2.path()).unwrap();
        for name in ["manifest.json", "onehot.bin", "contrib_t0.bin", "hyp_t0.bin"] {
            assert_eq!(
                fs::read(dir.path().join(name)).unwrap(),
                fs::read(dir2.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
    }

    #[test]
    fn null_tracks_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = tiny_dataset();
        let mut nulls = BTreeMap::new();
        nulls.insert("t0".to_string(), vec![vec![0.5, -0.25, 0.0], vec![1.0, 2.0]]);
        ds.nulls = Some(nulls);
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn missing_track_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&tiny_dataset(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("contrib_t0.bin")).unwrap();
        match load_dataset(dir.path()) {
            Err(ModiscoError::MissingFile(p)) => {
                assert!(p.ends_with("contrib_t0.bin"));
            }
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn bad_onehot_row_rejected() {
        let mut ds = tiny_dataset();
        ds.sequences[0].onehot[1] = [1.0, 1.0, 0.0, 0.0];
        assert!(matches!(ds.validate(), Err(ModiscoError::Validation(_))));
    }

    #[test]
    fn contrib_off_present_base_rejected() {
        let mut ds = tiny_dataset();
        // sequence 0 position 1 has base C; put contribution on G
        ds.sequences[0].tracks[0].contrib[1][2] = 0.3;
        assert!(matches!(ds.validate(), Err(ModiscoError::Validation(_))));
    }

    #[test]
    fn empty_results_and_tsv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let empty = ResultsBundle::default();
        save_results(&empty, dir.path()).unwrap();
        let loaded = load_results(dir.path()).unwrap();
        assert!(loaded.metaclusters.is_empty());

        let motif = MotifResult {
            length: 10,
            num_members: 1,
            members: vec![MemberCoord {
                sequence_index: 0,
                start: 0,
                end: 10,
                revcomp: false,
                offset: 0,
            }],
            seq_frequency: vec![[0.25; 4]; 10],
            tracks: vec![MotifTaskTracks {
                task: "t0".into(),
                contrib: vec![[0.1; 4]; 10],
                hyp: vec![[0.2; 4]; 10],
            }],
        };
        let bundle = ResultsBundle {
            metaclusters: vec![MetaclusterResult {
                activity_pattern: vec![1],
                num_seqlets: 1,
                motifs: vec![motif],
            }],
        };
        save_results(&bundle, dir.path()).unwrap();
        let tsv = fs::read_to_string(dir.path().join("metacluster_0_motif_0.tsv")).unwrap();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 11); // header + 10 data rows
        for line in &lines {
            assert_eq!(line.split('\t').count(), 1 + 4 * 3);
        }
    }

    #[test]
    fn save_results_deterministic() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let bundle = ResultsBundle {
            metaclusters: vec![MetaclusterResult {
                activity_pattern: vec![1, -1],
                num_seqlets: 0,
                motifs: vec![],
            }],
        };
        save_results(&bundle, dir1.path()).unwrap();
        save_results(&bundle, dir2.path()).unwrap();
        assert_eq!(
            fs::read(dir1.path().join("results.json")).unwrap(),
            fs::read(dir2.path().join("results.json")).unwrap()
        );
    }
}
