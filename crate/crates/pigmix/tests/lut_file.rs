use std::path::Path;

use pigmix::lut_file::{build_lut_file, load_lut, BuildOptions};
use pigmix_core::dataset::{synthetic_corpus, Corpus, SyntheticConfig};
use pigmix_core::mixnet::{ModelWeights, NetworkConfig};
use pigmix_core::palette::{Lut, LutBuildConfig, LutProvenance, BUILD_CHUNK};

fn setup(seed: u64) -> (Corpus, ModelWeights, LutProvenance) {
    let corpus = synthetic_corpus(&SyntheticConfig::default()).unwrap();
    let w = ModelWeights::init(NetworkConfig {
        layer_sizes: vec![207, 10, 41],
        seed,
        ..NetworkConfig::default()
    })
    .unwrap();
    let prov = LutProvenance {
        model_hash: [seed as u8; 32],
        config: LutBuildConfig {
            quantities_ul: (10..=160).step_by(10).collect(),
            ..LutBuildConfig::default()
        },
    };
    (corpus, w, prov)
}

fn build(
    path: &Path,
    c: &Corpus,
    w: &ModelWeights,
    prov: &LutProvenance,
    opts: BuildOptions,
) -> pigmix::lut_file::BuildOutcome {
    build_lut_file(path, w, &c.records, &c.substrate, prov, &opts, |_, _| {}).unwrap()
}

#[test]
fn interrupted_build_resumes_to_the_same_bytes() {
    let d = tempfile::tempdir().unwrap();
    let (c, w, prov) = setup(1);
    let whole = d.path().join("whole.bin");
    let o = build(&whole, &c, &w, &prov, BuildOptions::default());
    assert_eq!((o.total, o.resumed_from), (208 * 208, 0));

    let part = d.path().join("part.bin");
    let small = BuildOptions {
        group: BUILD_CHUNK,
        stop_after: Some(5 * BUILD_CHUNK + 17),
    };
    let o = build(&part, &c, &w, &prov, small);
    assert_eq!(o.written, 5 * BUILD_CHUNK + 17);
    let err = load_lut(&part).unwrap_err().to_string();
    assert!(err.contains("incomplete"), "{err}");

    // a torn trailing record is discarded before resuming
    let mut f = std::fs::OpenOptions::new().append(true).open(&part).unwrap();
    std::io::Write::write_all(&mut f, &[1, 2, 3]).unwrap();
    drop(f);

    let o = build(&part, &c, &w, &prov, BuildOptions::default());
    assert_eq!(o.resumed_from, 5 * BUILD_CHUNK + 17);
    assert_eq!(std::fs::read(&part).unwrap(), std::fs::read(&whole).unwrap());

    let loaded = load_lut(&whole).unwrap();
    let direct = Lut::build(&w, &c.records, &c.substrate, prov.clone()).unwrap();
    assert_eq!(loaded.lut.entries(), direct.entries());
    assert_eq!(loaded.lut.provenance(), &prov);
}

#[test]
fn different_model_restarts_the_build() {
    let d = tempfile::tempdir().unwrap();
    let (c, w1, p1) = setup(1);
    let (_, w2, p2) = setup(2);
    let path = d.path().join("lut.bin");
    build(
        &path,
        &c,
        &w1,
        &p1,
        BuildOptions {
            group: BUILD_CHUNK,
            stop_after: Some(BUILD_CHUNK),
        },
    );
    let o = build(&path, &c, &w2, &p2, BuildOptions::default());
    assert_eq!(o.resumed_from, 0);
    let fresh = d.path().join("fresh.bin");
    build(&fresh, &c, &w2, &p2, BuildOptions::default());
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&fresh).unwrap());
}
