//! Synthetic planted-motif datasets for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SequenceRecord, TaskTracks};
use crate::error::{ModiscoError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedPwm {
    pub name: String,
    /// Per-position base probabilities (A, C, G, T). Rows need not be exactly
    /// normalized; they are renormalized before use.
    pub pwm: Vec<[f64; 4]>,
    /// Tasks this motif contributes to, with sign (+1 / -1).
    pub tasks: Vec<(String, i8)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub tasks: Vec<String>,
    pub num_sequences: usize,
    pub sequence_length: usize,
    pub motifs: Vec<PlantedPwm>,
    /// Noise standard deviation relative to the mean planted log-odds magnitude.
    pub noise_sigma: f64,
    /// Fraction of sequences that receive a plant (round-robin over motifs).
    #[serde(default = "default_plant_fraction")]
    pub plant_fraction: f64,
    /// Keep plants at least this far from sequence ends.
    #[serde(default = "default_margin")]
    pub margin: usize,
    /// Fix every plant at this position instead of sampling uniformly.
    #[serde(default)]
    pub fixed_position: Option<usize>,
}

fn default_plant_fraction() -> f64 {
    1.0
}

fn default_margin() -> usize {
    30
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Plant {
    pub sequence_index: usize,
    pub motif: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub plants: Vec<Plant>,
}

/// Log-odds of a PWM row against a uniform background, with a probability
/// floor so absent bases stay finite.
pub fn log_odds_row(row: &[f64; 4]) -> [f64; 4] {
    let total: f64 = row.iter().sum();
    let mut out = [0.0; 4];
    for b in 0..4 {
        let p = (row[b] / total).max(1e-3);
        out[b] = (p / 0.25).ln();
    }
    out
}

pub fn log_odds_matrix(pwm: &[[f64; 4]]) -> Vec<[f64; 4]> {
    pwm.iter().map(log_odds_row).collect()
}

fn signal_scale(cfg: &SynthConfig) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for m in &cfg.motifs {
        for lo in log_odds_matrix(&m.pwm) {
            let dominant = lo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            total += dominant.abs();
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    // Box-Muller; one draw per call keeps the stream simple and reproducible.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn q32(v: f64) -> f64 {
    v as f32 as f64
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Synthetic> {
    for m in &cfg.motifs {
        if m.pwm.len() > cfg.sequence_length {
            return Err(ModiscoError::Config(format!(
                "motif {} is longer than the sequences ({} > {})",
                m.name,
                m.pwm.len(),
                cfg.sequence_length
            )));
        }
        for (task, sign) in &m.tasks {
            if !cfg.tasks.contains(task) {
                return Err(ModiscoError::Config(format!(
                    "motif {} references unknown task {task}",
                    m.name
                )));
            }
            if *sign != 1 && *sign != -1 {
                return Err(ModiscoError::Config(format!(
                    "motif {} has task sign {sign}, expected 1 or -1",
                    m.name
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = signal_scale(cfg);
    let noise_sd = cfg.noise_sigma * scale;
    let log_odds: Vec<Vec<[f64; 4]>> = cfg.motifs.iter().map(|m| log_odds_matrix(&m.pwm)).collect();

    let mut sequences = Vec::with_capacity(cfg.num_sequences);
    let mut plants = Vec::new();
    for si in 0..cfg.num_sequences {
        let l = cfg.sequence_length;
        let mut bases: Vec<usize> = (0..l).map(|_| rng.gen_range(0..4usize)).collect();

        let plant_here = !cfg.motifs.is_empty()
            && (si as f64 + 0.5) / cfg.num_sequences as f64 <= cfg.plant_fraction;
        let mut plant_info: Option<(usize, usize)> = None; // (motif index, start)
        if plant_here {
            let mi = si % cfg.motifs.len();
            let mlen = cfg.motifs[mi].pwm.len();
            let start = match cfg.fixed_position {
                Some(p) => p.min(l - mlen),
                None => {
                    let lo = cfg.margin.min(l - mlen);
                    let hi = (l - mlen).saturating_sub(cfg.margin).max(lo);
                    rng.gen_range(lo..=hi)
                }
            };
            for (k, row) in cfg.motifs[mi].pwm.iter().enumerate() {
                let total: f64 = row.iter().sum();
                let draw: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = 3;
                for b in 0..4 {
                    acc += row[b];
                    if draw < acc {
                        chosen = b;
                        break;
                    }
                }
                bases[start + k] = chosen;
            }
            plant_info = Some((mi, start));
            plants.push(Plant {
                sequence_index: si,
                motif: cfg.motifs[mi].name.clone(),
                start,
                end: start + mlen,
            });
        }

        let mut onehot = vec![[0.0; 4]; l];
        for (pos, &b) in bases.iter().enumerate() {
            onehot[pos][b] = 1.0;
        }
        let mut tracks: Vec<TaskTracks> = cfg
            .tasks
            .iter()
            .map(|_| TaskTracks {
                contrib: vec![[0.0; 4]; l],
                hyp: vec![[0.0; 4]; l],
            })
            .collect();
        for (ti, _) in cfg.tasks.iter().enumerate() {
            for pos in 0..l {
                let b = bases[pos];
                tracks[ti].contrib[pos][b] = q32(normal(&mut rng, noise_sd));
                for x in 0..4 {
                    tracks[ti].hyp[pos][x] = q32(normal(&mut rng, noise_sd));
                }
            }
        }
        if let Some((mi, start)) = plant_info {
            let lo = &log_odds[mi];
            for (task, sign) in &cfg.motifs[mi].tasks {
                let ti = cfg.tasks.iter().position(|t| t == task).unwrap();
                let s = *sign as f64;
                for (k, lo_row) in lo.iter().enumerate() {
                    let pos = start + k;
                    let b = bases[pos];
                    tracks[ti].contrib[pos][b] =
                        q32(s * lo_row[b] + normal(&mut rng, noise_sd));
                    for x in 0..4 {
                        tracks[ti].hyp[pos][x] =
                            q32(s * lo_row[x] + normal(&mut rng, noise_sd));
                    }
                }
            }
        }
        sequences.push(SequenceRecord { onehot, tracks });
    }

    let dataset = Dataset {
        tasks: cfg.tasks.clone(),
        sequences,
        nulls: None,
    };
    dataset.validate()?;
    Ok(Synthetic { dataset, plants })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> SynthConfig {
        SynthConfig {
            tasks: vec!["t0".into()],
            num_sequences: 4,
            sequence_length: 80,
            motifs: vec![PlantedPwm {
                name: "m0".into(),
                pwm: vec![[0.85, 0.05, 0.05, 0.05]; 6],
                tasks: vec![("t0".into(), 1)],
            }],
            noise_sigma: 0.0,
            plant_fraction: 1.0,
            margin: 10,
            fixed_position: Some(50),
        }
    }

    #[test]
    fn zero_noise_contrib_confined_to_plant() {
        let syn = generate_synthetic(&base_cfg(), 1).unwrap();
        for (si, seq) in syn.dataset.sequences.iter().enumerate() {
            for pos in 0..seq.len() {
                let total: f64 = seq.tracks[0].contrib[pos].iter().map(|v| v.abs()).sum();
                let in_plant = (50..56).contains(&pos);
                if in_plant {
                    assert!(total != 0.0, "seq {si} pos {pos} should carry signal");
                } else {
                    assert_eq!(total, 0.0, "seq {si} pos {pos} should be silent");
                }
            }
        }
        assert_eq!(syn.plants.len(), 4);
        assert!(syn.plants.iter().all(|p| p.start == 50 && p.end == 56));
    }

    #[test]
    fn deterministic_in_cfg_and_seed() {
        let mut cfg = base_cfg();
        cfg.noise_sigma = 0.3;
        cfg.fixed_position = None;
        let a = generate_synthetic(&cfg, 42).unwrap();
        let b = generate_synthetic(&cfg, 42).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.plants, b.plants);
        let c = generate_synthetic(&cfg, 43).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn motif_longer_than_sequence_rejected() {
        let mut cfg = base_cfg();
        cfg.motifs[0].pwm = vec![[0.25; 4]; 100];
        assert!(matches!(
            generate_synthetic(&cfg, 0),
            Err(ModiscoError::Config(_))
        ));
    }

    #[test]
    fn generated_dataset_validates_with_noise() {
        let mut cfg = base_cfg();
        cfg.noise_sigma = 0.5;
        let syn = generate_synthetic(&cfg, 9).unwrap();
        syn.dataset.validate().unwrap();
    }
}
