//! Synthetic local datasets.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::harness::config::{Family, ObjectiveConfig};
use crate::objectives::{LocalObjective, ObjectiveKind};

/// Offsets the data stream from the schedule and delay streams of the same seed.
const DATA_STREAM: u64 = 0x6461_7461;

/// Builds one local objective per node.
///
/// Averaging puts value 1 on `round(fraction_ones * n)` random nodes and 0
/// elsewhere. Regression draws `X_i` with standard normal entries and
/// targets `m_j + cos(m_j) + eps`, `m_j` the mean of column `j`. Classification
/// draws balanced classes centered at `-1` and `+1`.
pub fn generate_dataset(cfg: &ObjectiveConfig, n: usize, seed: u64) -> Result<Vec<LocalObjective>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DATA_STREAM);
    match cfg.family {
        Family::Averaging => {
            let ones = (cfg.fraction_ones * n as f64).round() as usize;
            let chosen = sample(&mut rng, n, ones.min(n));
            let mut values = vec![0.0; n];
            for i in chosen.iter() {
                values[i] = 1.0;
            }
            Ok(values
                .into_iter()
                .map(|v| LocalObjective::quadratic(DVector::from_element(1, v)))
                .collect())
        }
        Family::Regression => {
            let std = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
            let noise = Normal::new(0.0, cfg.noise_var.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let samples = sample_count(cfg, &mut rng);
                    let x = DMatrix::from_fn(cfg.dim, samples, |_, _| std.sample(&mut rng));
                    let y = DVector::from_fn(samples, |j, _| {
                        let m: f64 = x.column(j).mean();
                        m + m.cos() + noise.sample(&mut rng)
                    });
                    LocalObjective::ridge(x, y, cfg.reg)
                })
                .collect()
        }
        Family::Classification => {
            let std = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let samples = sample_count(cfg, &mut rng);
                    let labels = DVector::from_fn(samples, |j, _| if j % 2 == 0 { -1.0 } else { 1.0 });
                    let x = DMatrix::from_fn(cfg.dim, samples, |_, j| labels[j] + std.sample(&mut rng));
                    LocalObjective::logistic(x, labels, cfg.reg)
                })
                .collect()
        }
    }
}

fn sample_count(cfg: &ObjectiveConfig, rng: &mut ChaCha8Rng) -> usize {
    match cfg.samples_range {
        Some([lo, hi]) => rng.random_range(lo..=hi),
        None => cfg.samples,
    }
}

/// Writes one objective per block: a header line `node <i> <family> <d> <N> <reg>`
/// followed by `d` feature rows and one target/label row. Averaging blocks
/// carry the target on a single row.
pub fn write_dataset(objs: &[LocalObjective], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let row = |out: &mut String, vals: &mut dyn Iterator<Item = f64>| {
        let cells: Vec<String> = vals.map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    };
    for (i, f) in objs.iter().enumerate() {
        match f.kind() {
            ObjectiveKind::QuadraticConsensus { target } => {
                let _ = writeln!(out, "node {i} averaging {} 0 0", target.len());
                row(&mut out, &mut target.iter().copied());
            }
            ObjectiveKind::RidgeRegression { features, targets, reg }
            | ObjectiveKind::Logistic {
                features,
                labels: targets,
                reg,
            } => {
                let family = if f.is_quadratic() { "regression" } else { "classification" };
                let _ = writeln!(
                    out,
                    "node {i} {family} {} {} {reg:.17e}",
                    features.nrows(),
                    features.ncols()
                );
                for r in features.row_iter() {
                    row(&mut out, &mut r.iter().copied());
                }
                row(&mut out, &mut targets.iter().copied());
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<LocalObjective>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut objs = Vec::new();
    let parse_row = |(no, line): (usize, &str), len: usize| -> Result<Vec<f64>> {
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    line: no + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != len {
            return Err(Error::Parse {
                line: no + 1,
                msg: format!("expected {len} values, got {}", vals.len()),
            });
        }
        Ok(vals)
    };
    while let Some((no, header)) = lines.next() {
        let bad = |msg: &str| Error::Parse {
            line: no + 1,
            msg: msg.to_string(),
        };
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "node" {
            return Err(bad("expected `node <i> <family> <d> <N> <reg>`"));
        }
        let d: usize = parts[3].parse().map_err(|_| bad("bad dimension"))?;
        let samples: usize = parts[4].parse().map_err(|_| bad("bad sample count"))?;
        let reg: f64 = parts[5].parse().map_err(|_| bad("bad regularization"))?;
        let mut next = || lines.next().ok_or_else(|| bad("truncated block"));
        let obj = match parts[2] {
            "averaging" => LocalObjective::quadratic(DVector::from_vec(parse_row(next()?, d)?)),
            family @ ("regression" | "classification") => {
                let mut x = DMatrix::zeros(d, samples);
                for r in 0..d {
                    let vals = parse_row(next()?, samples)?;
                    x.row_mut(r).copy_from_slice(&vals);
                }
                let y = DVector::from_vec(parse_row(next()?, samples)?);
                if family == "regression" {
                    LocalObjective::ridge(x, y, reg)?
                } else {
                    LocalObjective::logistic(x, y, reg)?
                }
            }
            _ => return Err(bad("unknown family")),
        };
        objs.push(obj);
    }
    Ok(objs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: Family) -> ObjectiveConfig {
        ObjectiveConfig {
            family,
            dim: 50,
            samples: 150,
            samples_range: None,
            noise_var: 0.25,
            reg: 1.0,
            fraction_ones: 0.1,
        }
    }

    #[test]
    fn averaging_has_ten_percent_ones() {
        let objs = generate_dataset(&cfg(Family::Averaging), 100, 3).unwrap();
        let ones = objs
            .iter()
            .filter(|f| matches!(f.kind(), ObjectiveKind::QuadraticConsensus { target } if target[0] == 1.0))
            .count();
        assert_eq!(ones, 10);
    }

    #[test]
    fn homogeneous_regression_shape() {
        let objs = generate_dataset(&cfg(Family::Regression), 4, 0).unwrap();
        for f in &objs {
            let ObjectiveKind::RidgeRegression { features, reg, .. } = f.kind() else {
                panic!("wrong family");
            };
            assert_eq!((features.nrows(), features.ncols()), (50, 150));
            assert_eq!(*reg, 1.0);
        }
    }

    #[test]
    fn heterogeneous_counts_stay_in_range() {
        let mut c = cfg(Family::Regression);
        c.samples_range = Some([50, 300]);
        let objs = generate_dataset(&c, 40, 9).unwrap();
        let counts: Vec<usize> = objs
            .iter()
            .map(|f| match f.kind() {
                ObjectiveKind::RidgeRegression { features, .. } => features.ncols(),
                _ => unreachable!(),
            })
            .collect();
        assert!(counts.iter().all(|&k| (50..=300).contains(&k)));
        assert!(counts.iter().min() != counts.iter().max());
    }

    #[test]
    fn large_heterogeneous_classification_optimum_converges() {
        let mut c = cfg(Family::Classification);
        c.samples_range = Some([50, 300]);
        let objs = generate_dataset(&c, 100, 1).unwrap();
        let opt = crate::objectives::centralized_optimum(&objs).unwrap();
        let g = objs.iter().fold(DVector::zeros(50), |a, f| a + f.gradient(&opt.x));
        assert!(g.norm() <= crate::objectives::OPTIMUM_TOL * 100.0);
    }

    #[test]
    fn classification_is_balanced_and_separated() {
        let mut c = cfg(Family::Classification);
        c.dim = 5;
        c.samples = 20;
        let objs = generate_dataset(&c, 2, 1).unwrap();
        let ObjectiveKind::Logistic { features, labels, .. } = objs[0].kind() else {
            panic!("wrong family");
        };
        assert_eq!(labels.iter().filter(|&&l| l > 0.0).count(), 10);
        let pos: f64 = (0..20).filter(|&j| labels[j] > 0.0).map(|j| features.column(j).mean()).sum();
        assert!(pos > 0.0);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_dataset(&cfg(Family::Regression), 3, 5).unwrap();
        let b = generate_dataset(&cfg(Family::Regression), 3, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.kind(), y.kind());
        }
    }

    #[test]
    fn dataset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Family::Classification);
        c.dim = 3;
        c.samples = 4;
        let mut objs = generate_dataset(&c, 2, 2).unwrap();
        c.family = Family::Regression;
        objs.extend(generate_dataset(&c, 1, 2).unwrap());
        objs.push(LocalObjective::quadratic(DVector::from_vec(vec![0.25, -1.5])));
        let path = dir.path().join("data.txt");
        write_dataset(&objs, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), objs.len());
        for (x, y) in objs.iter().zip(&back) {
            assert_eq!(x.kind(), y.kind());
        }
    }
}
