//! Corpus directories.
//!
//! A corpus directory holds `pigments.csv`, `mixtures.csv` and
//! `manifest.json`. The manifest records where the data came from, the
//! feature normalization and the train/test split, so every later stage
//! relabels and resplits to exactly the same samples.

use std::path::{Path, PathBuf};

use pigmix_core::dataset::{
    label_all, split, synthetic_corpus, Corpus, DatasetSplit, LabelType, MixSample, Normalization, SplitCounts,
    SyntheticConfig, TEST_FRACTION,
};
use serde::{Deserialize, Serialize};

use crate::error::{create_dir, read_to_string, write_atomic, AppError, AppResult};
use crate::spectra_csv::{parse_mixtures, parse_pigments, write_mixtures, write_pigments, PigmentFile};

pub const PIGMENTS_FILE: &str = "pigments.csv";
pub const MIXTURES_FILE: &str = "mixtures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Synthetic(SyntheticConfig),
    Ingested { pigments: String, mixtures: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub type_i: usize,
    pub type_m: usize,
    pub train: usize,
    pub test: usize,
    pub split: SplitCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub source: CorpusSource,
    pub split_seed: u64,
    /// Always "stratified": each label type is split on its own, then doubled.
    pub split_method: String,
    pub test_fraction: f64,
    pub normalization: Normalization,
    pub counts: LabelCounts,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl Manifest {
    fn describe(source: CorpusSource, samples: &[MixSample], s: &DatasetSplit, norm: Normalization) -> Self {
        let count = |l| samples.iter().filter(|x| x.label == l).count();
        Manifest {
            format_version: MANIFEST_VERSION,
            source,
            split_seed: s.seed,
            split_method: "stratified".into(),
            test_fraction: TEST_FRACTION,
            normalization: norm,
            counts: LabelCounts {
                type_i: count(LabelType::TypeI),
                type_m: count(LabelType::TypeM),
                train: s.train.len(),
                test: s.test.len(),
                split: s.counts,
            },
            train_ids: s.train.iter().map(MixSample::id).collect(),
            test_ids: s.test.iter().map(MixSample::id).collect(),
        }
    }
}

/// A corpus with its labels and split.
#[derive(Clone, Debug)]
pub struct LoadedCorpus {
    pub dir: PathBuf,
    pub corpus: Corpus,
    pub manifest: Manifest,
    pub samples: Vec<MixSample>,
    pub split: DatasetSplit,
}

fn write_dir(
    dir: &Path,
    corpus: &Corpus,
    source: CorpusSource,
    seed: u64,
    norm: Normalization,
) -> AppResult<LoadedCorpus> {
    let samples = label_all(corpus, &norm)?;
    let s = split(&samples, seed);
    let manifest = Manifest::describe(source, &samples, &s, norm);
    create_dir(dir)?;
    let pf = PigmentFile {
        records: corpus.records.clone(),
        substrate: corpus.substrate,
        black_backing: corpus.black_backing.clone(),
    };
    write_atomic(&dir.join(PIGMENTS_FILE), write_pigments(&pf).as_bytes())?;
    write_atomic(&dir.join(MIXTURES_FILE), write_mixtures(&corpus.mixtures).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(LoadedCorpus {
        dir: dir.to_path_buf(),
        corpus: corpus.clone(),
        manifest,
        samples,
        split: s,
    })
}

/// Generate a synthetic corpus. The seed drives both the palette and the split.
pub fn synth(dir: &Path, cfg: &SyntheticConfig, norm: Normalization) -> AppResult<LoadedCorpus> {
    let corpus = synthetic_corpus(cfg)?;
    write_dir(dir, &corpus, CorpusSource::Synthetic(*cfg), cfg.seed, norm)
}

fn read_corpus(pigments: &Path, mixtures: &Path) -> AppResult<Corpus> {
    let pf = parse_pigments(&read_to_string(pigments)?, pigments)?;
    let mx = parse_mixtures(&read_to_string(mixtures)?, mixtures)?;
    Ok(Corpus::new(pf.records, pf.substrate, mx, pf.black_backing)?)
}

/// Validate measured files and write them as a corpus directory.
pub fn ingest(pigments: &Path, mixtures: &Path, dir: &Path, seed: u64, norm: Normalization) -> AppResult<LoadedCorpus> {
    let corpus = read_corpus(pigments, mixtures)?;
    let source = CorpusSource::Ingested {
        pigments: pigments.display().to_string(),
        mixtures: mixtures.display().to_string(),
    };
    write_dir(dir, &corpus, source, seed, norm)
}

/// Read a corpus directory and check that relabeling reproduces its manifest.
pub fn load(dir: &Path) -> AppResult<LoadedCorpus> {
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        return Err(AppError::NotReady(format!("no corpus at {}", dir.display())));
    }
    let manifest: Manifest =
        serde_json::from_str(&read_to_string(&mpath)?).map_err(|e| AppError::format(&mpath, e.to_string()))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(AppError::format(
            &mpath,
            format!("unsupported manifest version {}", manifest.format_version),
        ));
    }
    let corpus = read_corpus(&dir.join(PIGMENTS_FILE), &dir.join(MIXTURES_FILE))?;
    let samples = label_all(&corpus, &manifest.normalization)?;
    let s = split(&samples, manifest.split_seed);
    let again = Manifest::describe(manifest.source.clone(), &samples, &s, manifest.normalization);
    if again != manifest {
        return Err(AppError::format(&mpath, "manifest does not match the corpus files"));
    }
    Ok(LoadedCorpus {
        dir: dir.to_path_buf(),
        corpus,
        manifest,
        samples,
        split: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_then_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig::default();
        let made = synth(dir.path(), &cfg, Normalization::default()).unwrap();
        assert_eq!(made.manifest.counts.type_i, 442);
        assert_eq!(made.manifest.counts.type_m, 780);
        assert_eq!((made.manifest.counts.train, made.manifest.counts.test), (1956, 488));
        let back = load(dir.path()).unwrap();
        assert_eq!(back.corpus, made.corpus);
        assert_eq!(back.split, made.split);

        let again = tempfile::tempdir().unwrap();
        let re = ingest(
            &dir.path().join(PIGMENTS_FILE),
            &dir.path().join(MIXTURES_FILE),
            again.path(),
            cfg.seed,
            Normalization::default(),
        )
        .unwrap();
        assert_eq!(re.corpus, made.corpus);
        for f in [PIGMENTS_FILE, MIXTURES_FILE] {
            assert_eq!(
                std::fs::read(dir.path().join(f)).unwrap(),
                std::fs::read(again.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        synth(dir.path(), &SyntheticConfig::default(), Normalization::default()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&p)
            .unwrap()
            .replace("\"split_seed\": 7", "\"split_seed\": 8");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load(dir.path()), Err(AppError::Format { .. })));
        assert!(matches!(load(&dir.path().join("nope")), Err(AppError::NotReady(_))));
    }
}
