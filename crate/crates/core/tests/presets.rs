use std::path::PathBuf;

use descent_mesh::harness::config::{Algorithm, Family};
use descent_mesh::harness::{run_experiment, ExperimentConfig};

fn configs() -> Vec<(String, ExperimentConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let cfg = ExperimentConfig::read_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_name().unwrap().to_string_lossy().into_owned(), cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_preset_parses() {
    let all = configs();
    assert_eq!(all.len(), 5);
    for (name, cfg) in &all {
        if cfg.algorithms.list.contains(&Algorithm::Ssda) {
            assert_eq!(
                cfg.edge_iterations(),
                cfg.ssda_iterations() * cfg.topology.n / 4,
                "{name}"
            );
        }
        if cfg.objective.family == Family::Averaging {
            assert!(cfg.algorithms.list.contains(&Algorithm::Heavyball));
            assert_eq!((cfg.algorithms.heavyball_omega, cfg.algorithms.heavyball_beta), (1.0, 0.5));
        }
    }
}

#[test]
fn shrunk_presets_run() {
    for (name, mut cfg) in configs() {
        cfg.seeds = vec![0];
        cfg.topology.n = 16;
        cfg.objective.dim = cfg.objective.dim.min(4);
        cfg.objective.samples = cfg.objective.samples.min(8);
        if cfg.objective.samples_range.is_some() {
            cfg.objective.samples_range = Some([4, 12]);
        }
        cfg.record_every = 5;
        cfg.algorithms.iterations = cfg.algorithms.iterations.map(|_| 200);
        cfg.algorithms.ssda_iterations = cfg.algorithms.ssda_iterations.map(|_| 20);
        let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        for trace in &out.runs[0].traces {
            let first = trace.records.first().unwrap();
            let last = trace.last().unwrap();
            let err = |r: &descent_mesh::TraceRecord| {
                if cfg.objective.family == Family::Averaging {
                    r.consensus_err
                } else {
                    r.max_subopt
                }
            };
            assert!(err(last) < err(first), "{name}/{}", trace.algorithm);
        }
    }
}
