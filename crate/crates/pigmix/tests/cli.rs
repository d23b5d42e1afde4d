mod common;

use std::path::Path;

use common::*;
use pigmix::exit;
use pigmix::model_file::load_model;

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let d = tempfile::tempdir().unwrap();
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let out = stdout(&pigmix(&["synth", "--seed", seed, "--out", p(dir)]));
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["counts"]["train"], 1956);
    }
    let (ba, bb, bc) = (read_dir_bytes(&a), read_dir_bytes(&b), read_dir_bytes(&c));
    assert_eq!(ba.len(), 3);
    assert_eq!(ba, bb);
    assert_ne!(ba, bc);
}

#[test]
fn train_and_build_lut_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let corpus = d.path().join("corpus");
    stdout(&pigmix(&["synth", "--out", p(&corpus)]));
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"layer_sizes":[207,16,41],"batch_size":64,"epochs":5}"#).unwrap();
    let mut models = Vec::new();
    for name in ["m1.bin", "m2.bin"] {
        let m = d.path().join(name);
        stdout(&pigmix(&[
            "train",
            "--corpus",
            p(&corpus),
            "--config",
            p(&cfg),
            "--out",
            p(&m),
        ]));
        models.push(std::fs::read(&m).unwrap());
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.path().join(format!("{name}.report.json"))).unwrap()).unwrap();
        assert_eq!(report["report"]["epochs_run"], 5);
        assert!(report["report"]["wall_time_s"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(models[0], models[1]);
    let w = load_model(&d.path().join("m1.bin")).unwrap().weights;
    assert_eq!(w.step, 5 * 1956u64.div_ceil(64));

    let mut luts = Vec::new();
    for (name, threads) in [("l1.bin", "1"), ("l2.bin", "3")] {
        let l = d.path().join(name);
        stdout(&pigmix(&[
            "build-lut",
            "--model",
            p(&d.path().join("m1.bin")),
            "--corpus",
            p(&corpus),
            "--out",
            p(&l),
            "--quantities-ul",
            "10,50,100,160",
            "--threads",
            threads,
        ]));
        luts.push(std::fs::read(&l).unwrap());
    }
    assert_eq!(luts[0], luts[1]);
    let lut = pigmix::lut_file::load_lut(&d.path().join("l1.bin")).unwrap();
    assert_eq!(lut.lut.len(), 52 * 52);
}

#[test]
fn checkpoints_and_divergence() {
    let d = tempfile::tempdir().unwrap();
    let corpus = d.path().join("corpus");
    stdout(&pigmix(&["synth", "--out", p(&corpus)]));
    let cfg = d.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"layer_sizes":[207,8,41],"learning_rate":1e300,"output_activation":"linear","epochs":10}"#,
    )
    .unwrap();
    let m = d.path().join("m.bin");
    let (code, err) = failure(&pigmix(&[
        "train",
        "--corpus",
        p(&corpus),
        "--config",
        p(&cfg),
        "--out",
        p(&m),
    ]));
    assert_eq!(code, exit::DIVERGED);
    assert_eq!(err["error"]["code"], "diverged");
    let saved = load_model(&m).unwrap().weights;
    assert!(saved.params.iter().all(|v| v.is_finite()));

    let good = d.path().join("good.json");
    std::fs::write(&good, r#"{"layer_sizes":[207,8,41],"epochs":4}"#).unwrap();
    let ck = d.path().join("ck.bin");
    stdout(&pigmix(&[
        "train",
        "--corpus",
        p(&corpus),
        "--config",
        p(&good),
        "--out",
        p(&ck),
        "--epochs",
        "3",
        "--checkpoint-every",
        "2",
    ]));
    assert_eq!(load_model(&ck).unwrap().weights.step, 3);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = failure(&pigmix(&[
        "match",
        "--lut",
        p(&d.path().join("none.bin")),
        "--rgb",
        "64,108,57",
    ]));
    assert_eq!(code, exit::NOT_READY);
    assert_eq!(err["error"]["code"], "not_ready");
    assert_eq!(err["schema_version"], 1);

    let (code, err) = failure(&pigmix(&["match", "--lut", "x", "--rgb", "64,108"]));
    assert_eq!(code, exit::USAGE);
    assert_eq!(err["error"]["code"], "usage");
    let (code, _) = failure(&pigmix(&["frobnicate"]));
    assert_eq!(code, exit::USAGE);

    let (code, _) = failure(&pigmix(&[
        "train",
        "--corpus",
        p(&d.path().join("nope")),
        "--out",
        "m.bin",
    ]));
    assert_eq!(code, exit::NOT_READY);

    let garbage = d.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a table").unwrap();
    let (code, err) = failure(&pigmix(&["match", "--lut", p(&garbage), "--rgb", "1,2,3"]));
    assert_eq!(code, exit::INVALID_INPUT);
    assert_eq!(err["error"]["code"], "format");
}

#[test]
fn ingest_validates_and_names_missing_rows() {
    let d = tempfile::tempdir().unwrap();
    let corpus = d.path().join("corpus");
    stdout(&pigmix(&["synth", "--out", p(&corpus)]));
    let pig = corpus.join("pigments.csv");
    let mix = corpus.join("mixtures.csv");

    let out = stdout(&pigmix(&[
        "ingest",
        "--pigments",
        p(&pig),
        "--mixtures",
        p(&mix),
        "--out",
        p(&d.path().join("re")),
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(
        (v["counts"]["type_i"].as_u64(), v["counts"]["type_m"].as_u64()),
        (Some(442), Some(780))
    );

    let text = std::fs::read_to_string(&pig).unwrap();
    let dropped: String = text
        .lines()
        .filter(|l| !l.starts_with("3, Rw, 0.12,") && !l.starts_with("3,Rw,0.12,"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(dropped.len() < text.len(), "fixture row not found");
    let bad = d.path().join("bad.csv");
    std::fs::write(&bad, dropped).unwrap();
    let (code, err) = failure(&pigmix(&[
        "ingest",
        "--pigments",
        p(&bad),
        "--mixtures",
        p(&mix),
        "--out",
        p(&d.path().join("x")),
    ]));
    assert_eq!(code, exit::INVALID_INPUT);
    let missing = &err["error"]["missing"];
    assert_eq!(missing.as_array().unwrap().len(), 1);
    assert_eq!(missing[0]["pigment"], 3);
    assert_eq!(missing[0]["quantity_ml"], 0.12);
    assert_eq!(missing[0]["role"], "Rw");
}

#[test]
fn eval_and_compare_km_write_reports() {
    let d = tempfile::tempdir().unwrap();
    let f = fixture(d.path());
    let out = d.path().join("report");
    let v: serde_json::Value = serde_json::from_str(&stdout(&pigmix(&[
        "eval",
        "--corpus",
        p(&f.corpus),
        "--model",
        p(&f.model),
        "--out",
        p(&out),
    ])))
    .unwrap();
    assert!(v["fraction_below_5"].is_number());
    let v: serde_json::Value = serde_json::from_str(&stdout(&pigmix(&[
        "compare-km",
        "--corpus",
        p(&f.corpus),
        "--model",
        p(&f.model),
        "--cases",
        "15",
        "--out",
        p(&out),
    ])))
    .unwrap();
    assert_eq!(v["cases"], 15);
    for name in [
        "eval_report.json",
        "per_sample_delta_e.csv",
        "symmetry_gaps.csv",
        "delta_e_histogram.svg",
        "delta_e_cdf.svg",
        "km_comparison.json",
        "km_comparison.csv",
        "km_comparison.svg",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let csv = std::fs::read_to_string(out.join("per_sample_delta_e.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 488);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["model_hash"], load_model(&f.model).unwrap().hash_hex());
}
