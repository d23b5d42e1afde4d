#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pigmix::corpus;
use pigmix::model_file::save_model;
use pigmix_core::dataset::{Normalization, SyntheticConfig};
use pigmix_core::mixnet::{ModelWeights, NetworkConfig};

pub const BIN: &str = env!("CARGO_BIN_EXE_pigmix");

pub fn pigmix(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "pigmix failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parsed stderr error document and exit code.
pub fn failure(o: &Output) -> (i32, serde_json::Value) {
    assert!(
        !o.status.success(),
        "expected failure, got {}",
        String::from_utf8_lossy(&o.stdout)
    );
    let err = String::from_utf8_lossy(&o.stderr);
    let last = err.lines().last().unwrap_or_default();
    (
        o.status.code().unwrap(),
        serde_json::from_str(last).expect("error JSON on stderr"),
    )
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic corpus, an untrained small model, and a small table in `dir`.
pub struct Fixture {
    pub corpus: PathBuf,
    pub model: PathBuf,
    pub lut: PathBuf,
}

pub fn small_config() -> NetworkConfig {
    NetworkConfig {
        layer_sizes: vec![207, 12, 41],
        epochs: 0,
        ..NetworkConfig::default()
    }
}

pub fn fixture(dir: &Path) -> Fixture {
    let corpus = dir.join("corpus");
    corpus::synth(&corpus, &SyntheticConfig::default(), Normalization::default()).unwrap();
    let model = dir.join("model.bin");
    save_model(&model, &ModelWeights::init(small_config()).unwrap()).unwrap();
    let lut = dir.join("lut.bin");
    stdout(&pigmix(&[
        "build-lut",
        "--model",
        p(&model),
        "--corpus",
        p(&corpus),
        "--out",
        p(&lut),
        "--pigments-subset",
        "1,4,9,13",
        "--quantities-ul",
        "10,40,90,160",
    ]));
    Fixture { corpus, model, lut }
}
