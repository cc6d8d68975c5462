use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blendscope::imaging::Image;
use blendscope::model::{load_checkpoint, save_checkpoint};
use blendscope::synth::read_bundle;

fn blendscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blendscope"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = blendscope(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    blendscope(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Faces plus a manifest under `root`; returns the manifest path.
fn corpus(root: &Path, count: usize) -> PathBuf {
    let faces = root.join("faces");
    let manifest = root.join("manifest.jsonl");
    ok(&[
        "faces",
        "--out-dir",
        s(&faces),
        "--count",
        &count.to_string(),
        "--seed",
        "4",
    ]);
    ok(&[
        "manifest",
        "--real-dir",
        s(&faces.join("images")),
        "--landmarks-dir",
        s(&faces.join("landmarks")),
        "--seed",
        "2",
        "--out",
        s(&manifest),
    ]);
    manifest
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), 8);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        ok(&["synth", "--manifest", s(&manifest), "--out-dir", s(out), "--size", "32"]);
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(ta.len() > 8 * 5);
    // the snapshots name their own output directories; everything else must match
    let strip = |t: Vec<(PathBuf, Vec<u8>)>| -> Vec<_> {
        t.into_iter().filter(|(p, _)| !p.ends_with("run_config.json")).collect()
    };
    assert_eq!(strip(ta), strip(tb));
}

#[test]
fn dead_model_scores_auc_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), 12);
    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&run),
        "--size",
        "32",
        "--epochs",
        "1",
        "--batch-size",
        "4",
    ]);
    let (config, mut params) = load_checkpoint(run.join("model.bin")).unwrap();
    params.cls.weight.data.iter_mut().for_each(|v| *v = 0.0);
    params.cls.bias.iter_mut().for_each(|v| *v = 0.0);
    let dead = tmp.path().join("dead.bin");
    save_checkpoint(&dead, &config, &params).unwrap();

    let metrics = tmp.path().join("metrics.json");
    ok(&[
        "eval",
        "--checkpoint",
        s(&dead),
        "--manifest",
        s(&manifest),
        "--size",
        "32",
        "--out",
        s(&metrics),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&metrics).unwrap()).unwrap();
    assert_eq!(report["auc"].as_f64(), Some(0.5));
    assert!(metrics.with_file_name("metrics.json.scores.csv").exists());
}

#[test]
fn viz_of_real_sample_has_blank_heatmap_and_uniform_consistency() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), 6);
    let bundles = tmp.path().join("bundles");
    ok(&[
        "synth",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&bundles),
        "--size",
        "32",
    ]);
    let real = fs::read_dir(&bundles)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .find(|p| read_bundle(p).unwrap().meta.label == 0)
        .expect("manifest mixes real samples in");
    let png = tmp.path().join("viz.png");
    ok(&["viz", "--bundle", s(&real), "--out", s(&png)]);

    let strip = Image::read(&png).unwrap();
    let w = 32;
    assert_eq!((strip.height(), strip.width()), (32, 5 * w));
    for i in 0..32 {
        for j in 0..w {
            for c in 0..3 {
                assert_eq!(
                    strip.get(i, 3 * w + j, c),
                    strip.get(i, j, c),
                    "heatmap panel not blank"
                );
                assert_eq!(
                    strip.get(i, 4 * w + j, c),
                    strip.get(0, 4 * w, c),
                    "consistency panel not uniform"
                );
            }
        }
    }
}

#[test]
fn replayed_eval_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), 8);
    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&run),
        "--size",
        "32",
        "--epochs",
        "1",
    ]);
    let metrics = tmp.path().join("m.json");
    ok(&[
        "eval",
        "--checkpoint",
        s(&run.join("model.bin")),
        "--manifest",
        s(&manifest),
        "--size",
        "32",
        "--out",
        s(&metrics),
    ]);
    let scores = tmp.path().join("m.json.scores.csv");
    let before = (fs::read(&metrics).unwrap(), fs::read(&scores).unwrap());
    fs::remove_file(&metrics).unwrap();
    fs::remove_file(&scores).unwrap();
    ok(&["replay", s(&tmp.path().join("m.json.run.json"))]);
    assert_eq!(before, (fs::read(&metrics).unwrap(), fs::read(&scores).unwrap()));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["train", "--bogus"]), 2);
    assert_eq!(code(&["--help"]), 0);
    // missing input data
    assert_eq!(
        code(&[
            "synth",
            "--manifest",
            s(&t.join("none.jsonl")),
            "--out-dir",
            s(&t.join("o"))
        ]),
        3
    );
    assert_eq!(
        code(&["viz", "--bundle", s(&t.join("nothing")), "--out", s(&t.join("v.png"))]),
        3
    );

    let manifest = corpus(t, 6);
    // size not accepted by the model
    assert_eq!(
        code(&[
            "train",
            "--manifest",
            s(&manifest),
            "--out-dir",
            s(&t.join("r1")),
            "--size",
            "40"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "perturb",
            "--image-dir",
            s(&t.join("faces/images")),
            "--kind",
            "noise",
            "--severity",
            "9",
            "--out-dir",
            s(&t.join("p"))
        ]),
        2
    );
    // an absurd unclipped learning rate blows the weights up
    assert_eq!(
        code(&[
            "train",
            "--manifest",
            s(&manifest),
            "--out-dir",
            s(&t.join("r2")),
            "--size",
            "32",
            "--epochs",
            "3",
            "--lr-start",
            "1e6",
            "--lr-peak",
            "1e6",
            "--clip-norm",
            "0",
        ]),
        4
    );
}

#[test]
fn perturb_writes_one_png_per_input() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    ok(&[
        "faces",
        "--out-dir",
        s(&t.join("faces")),
        "--count",
        "3",
        "--size",
        "32",
    ]);
    let out = t.join("blur");
    ok(&[
        "perturb",
        "--image-dir",
        s(&t.join("faces/images")),
        "--kind",
        "blur",
        "--severity",
        "2",
        "--out-dir",
        s(&out),
    ]);
    let pngs = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 3);
}
