use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "model.embed=8",
    "--set",
    "model.hidden=12",
    "--set",
    "model.head_hidden=16",
    "--set",
    "train.batch_size=8",
];

fn gshot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gshot")).args(args).env("GSHOT_THREADS", "1").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = gshot(args);
    assert!(out.status.success(), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--particles", "5", "--count", "100", "--seed", "7", "--out", p(d)]);
    }
    for f in ["spring.txt", "config.json", "run.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(a.join("spring.txt")).unwrap();
    assert_eq!(text.matches("t # ").count(), 100);
    let config = fs::read_to_string(a.join("config.json")).unwrap();
    assert!(config.contains("\"seed\": 7"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    assert_eq!(gshot(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gshot(&["synth", "--out", out, "--set", "train.lr=1"]).status.code(), Some(1));
    assert_eq!(gshot(&["synth", "--out", out, "--set", "train.dropout=2"]).status.code(), Some(1));
    assert_eq!(gshot(&["synth", "--out", out, "--threads", "0"]).status.code(), Some(1));
    assert_eq!(gshot(&["synth", "--out", out, "--particles", "1"]).status.code(), Some(1));
    assert_eq!(gshot(&["canon", "/nonexistent/file.txt", "--out", out]).status.code(), Some(2));
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "t # 0\nv 0 A\nv 1 B\ne 0 7 x\n").unwrap();
    assert_eq!(gshot(&["canon", p(&bad), "--out", out]).status.code(), Some(2));
    assert_eq!(gshot(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 3, "meta.inner_steps": 4}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["synth", "--count", "5", "--config", p(&cfg), "--set", "meta.inner_steps=6", "--out", p(&out)]);
    let snap: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(snap["seed"], 3);
    assert_eq!(snap["meta.inner_steps"], 6);
    // the snapshot is itself a valid config file
    let again = dir.path().join("again");
    ok(&["synth", "--count", "5", "--config", p(&out.join("config.json")), "--out", p(&again)]);
    assert_eq!(fs::read(out.join("spring.txt")).unwrap(), fs::read(again.join("spring.txt")).unwrap());
    fs::write(&cfg, r#"{"meta.nope": 4}"#).unwrap();
    assert_eq!(gshot(&["synth", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(1));
}

#[test]
fn canon_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--particles", "4", "--count", "20", "--out", p(&data)]);
    let spring = data.join("spring.txt");
    let c = dir.path().join("canon");
    ok(&["canon", p(&spring), "--unlabeled-edges", "--out", p(&c)]);
    assert_eq!(fs::read_to_string(c.join("codes.txt")).unwrap().lines().count(), 20);
    let s = dir.path().join("split");
    ok(&["split", p(&spring), "--train", "0.5", "--validation", "0.25", "--test", "0.25", "--out", p(&s)]);
    let count = |f: &str| fs::read_to_string(s.join(f)).unwrap().matches("t # ").count();
    assert_eq!((count("train.txt"), count("validation.txt"), count("test.txt")), (10, 5, 5));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = |s: &str| dir.path().join(s);
    for (name, n, count) in [("aux4", "4", "40"), ("aux6", "6", "40"), ("target", "5", "40")] {
        ok(&["synth", "--particles", n, "--count", count, "--seed", "1", "--out", p(&path(name))]);
    }
    let split = path("split");
    ok(&["split", p(&path("target").join("spring.txt")), "--train", "0.5", "--validation", "0.25", "--test", "0.25", "--out", p(&split)]);
    let train = split.join("train.txt");
    let test = split.join("test.txt");
    let val = split.join("validation.txt");

    let meta = path("meta");
    ok(&with_small(&[
        "meta-train",
        "--aux",
        p(&path("aux4").join("spring.txt")),
        "--aux",
        p(&path("aux6").join("spring.txt")),
        "--vocab-from",
        p(&train),
        "--iterations",
        "20",
        "--set",
        "meta.inner_steps=3",
        "--out",
        p(&meta),
    ]));
    assert_eq!(fs::read_to_string(meta.join("meta_log.tsv")).unwrap().lines().count(), 21);

    let ft = path("ft");
    ok(&with_small(&[
        "fine-tune",
        "--target",
        p(&train),
        "--validation",
        p(&val),
        "--init",
        p(&meta.join("model.ckpt")),
        "--epochs",
        "3",
        "--out",
        p(&ft),
    ]));
    assert!(ft.join("batches.tsv").exists());

    let scratch = path("scratch");
    ok(&with_small(&["fine-tune", "--target", p(&train), "--vanilla", "--epochs", "2", "--vocab-from", p(&test), "--out", p(&scratch)]));
    assert!(!scratch.join("batches.tsv").exists());

    let pre = path("pre");
    ok(&with_small(&["pretrain", "--aux", p(&path("aux4").join("spring.txt")), "--vocab-from", p(&train), "--epochs", "1", "--out", p(&pre)]));

    let gen = path("gen");
    ok(&["generate", "--model", p(&ft.join("model.ckpt")), "--count", "20", "--reference", p(&train), "--out", p(&gen)]);
    let report = fs::read_to_string(gen.join("generation_report.tsv")).unwrap();
    assert!(report.contains("requested\t20"));

    // an untrained model may fail to emit any graph; evaluate against the
    // training set itself when that happens
    let graphs = gen.join("graphs.txt");
    let generated = if fs::read_to_string(&graphs).unwrap().is_empty() { train.clone() } else { graphs };
    let eval = path("eval");
    let out = ok(&["evaluate", "--generated", p(&generated), "--test", p(&test), "--train", p(&train), "--out", p(&eval)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("nspdk_mmd\t"));
    assert!(stdout.contains("edge_label_mmd\tN/A"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json.as_object().unwrap().len(), 14);
    for d in [&meta, &ft, &scratch, &pre, &gen, &eval] {
        assert!(d.join("config.json").exists() && d.join("run.json").exists(), "{}", d.display());
    }
}

#[test]
fn fine_tune_is_reproducible_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--particles", "4", "--count", "12", "--out", p(&data)]);
    let spring = data.join("spring.txt");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&with_small(&["fine-tune", "--target", p(&spring), "--epochs", "2", "--seed", "5", "--out", p(d)]));
    }
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
    // rerunning from the snapshot reproduces the checkpoint
    let c = dir.path().join("c");
    ok(&["fine-tune", "--target", p(&spring), "--config", p(&a.join("config.json")), "--out", p(&c)]);
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(c.join("model.ckpt")).unwrap());
}

#[test]
fn divergence_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--particles", "4", "--count", "8", "--out", p(&data)]);
    let out = gshot(&with_small(&[
        "fine-tune",
        "--target",
        p(&data.join("spring.txt")),
        "--epochs",
        "3",
        "--set",
        "train.learning_rate=1e308",
        "--out",
        p(&dir.path().join("o")),
    ]));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
