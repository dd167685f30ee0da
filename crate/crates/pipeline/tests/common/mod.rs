#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kdloc::config::{DatasetSource, RunConfig};
use kdloc_core::net::NetworkSpec;
use kdloc_core::synth::SyntheticSpec;

pub fn tiny_synthetic() -> SyntheticSpec {
    SyntheticSpec { train_samples: 48, test_samples: 24, seed: 7, ..SyntheticSpec::default() }
}

/// A configuration small enough to train in well under a second.
pub fn tiny_config() -> RunConfig {
    let mut c = RunConfig {
        dataset: DatasetSource::Synthetic(tiny_synthetic()),
        network: NetworkSpec::small_cnn([1, 32, 32], 2, 2, 2),
        ..RunConfig::default()
    };
    c.training.max_epochs = 3;
    c.training.batch_size = 16;
    c.hessian.max_samples = 16;
    c.hessian.spectrum.top_k = 3;
    c.hessian.spectrum.lanczos_steps = 20;
    c.hessian.spectrum.trace_max_probes = 20;
    c.hessian.spectrum.esd.probes = 2;
    c.hessian.spectrum.esd.lanczos_steps = 10;
    c.hessian.spectrum.esd.grid = 64;
    c
}

pub fn write_config(path: &Path, config: &RunConfig) {
    std::fs::write(path, serde_json::to_string_pretty(config).unwrap()).unwrap();
}

/// Every file under `root`, keyed by its path relative to `root`.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
