use std::path::Path;
use std::process::{Command, Output};

use quadrecon::metrics::MetricsReport;
use quadrecon::Mesh;

fn quadrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadrecon")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = quadrecon(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
[model]
k = 6
d_point = 4
point_hidden = 6
neighbor_width = 4
face_widths = [8, 8, 8, 8]
d_face = 6
classifier_widths = [8, 8, 6, 6, 4]

[train]
epochs = 2

[metrics]
chamfer_samples = 300
"#;

#[test]
fn missing_checkpoint_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    ok(&["synth", "--kind", "plane-grid", "--res-u", "6", "--res-v", "6", "--out", s(&bundle)]);
    let missing = dir.path().join("nowhere/model.ckpt");
    let out = quadrecon(&[
        "pipeline",
        "--cloud",
        s(&bundle.join("cloud.ply")),
        "--model",
        s(&missing),
        "--out",
        s(&dir.path().join("m.obj")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/model.ckpt"), "{err}");
}

#[test]
fn bad_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "threshhold = 0.4\n").unwrap();
    let out = quadrecon(&["--config", s(&cfg), "candidates", "--cloud", "x.ply", "--out", "y.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.toml"));
}

#[test]
fn stages_and_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = p("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let c = s(&cfg);

    for (name, kind, seed) in [("a", "plane-grid", "1"), ("b", "torus", "2")] {
        ok(&["--config", c, "--seed", seed, "synth", "--kind", kind, "--res-u", "8", "--res-v", "6", "--out", s(&p(name))]);
    }

    // Stage-level outputs agree with the bundle written by synth.
    ok(&["--config", c, "candidates", "--cloud", s(&p("a/cloud.ply")), "--out", s(&p("cands.txt"))]);
    assert_eq!(std::fs::read(p("cands.txt")).unwrap(), std::fs::read(p("a/candidates.txt")).unwrap());
    ok(&[
        "label",
        "--candidates",
        s(&p("cands.txt")),
        "--reference",
        s(&p("a/reference.obj")),
        "--out",
        s(&p("labels.txt")),
    ]);
    assert_eq!(std::fs::read(p("labels.txt")).unwrap(), std::fs::read(p("a/labels.txt")).unwrap());

    let (bundle_a, bundle_b, model) = (p("a"), p("b"), p("m.ckpt"));
    let train = |out: &str, extra: &[&str]| {
        let mut args = vec!["--config", c, "train", "--bundle", s(&bundle_a), s(&bundle_b)];
        let o = p(out);
        args.extend(["--out", s(&o)]);
        args.extend(extra);
        ok(&args);
        std::fs::read(o).unwrap()
    };
    let log = p("train.log");
    let first = train("m.ckpt", &["--log", s(&log)]);
    assert_eq!(train("m2.ckpt", &[]), first, "training is deterministic");
    let lines: Vec<String> = std::fs::read_to_string(&log).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split_whitespace().count(), 5);
    assert_ne!(train("nofe.ckpt", &["--no-face-encoder", "--no-face-loss", "--drop-finfo", "coords,sines"]), first);

    let pipeline = |out: &str, extra: &[&str]| {
        let mut args = vec!["--config", c, "pipeline", "--cloud", s(&bundle_a), "--model", s(&model)];
        let (o, r) = (p(out), p(&format!("{out}.report")));
        args.extend(["--out", s(&o), "--report", s(&r), "--threshold", "0.0"]);
        args.extend(extra);
        let table = ok(&args);
        assert!(table.contains("watertightness"));
        let mesh: Mesh = quadrecon::mesh::read_obj(&o).unwrap();
        let report = MetricsReport::from_key_values(&std::fs::read_to_string(&r).unwrap()).unwrap();
        (std::fs::read(o).unwrap(), mesh, report)
    };
    let (bytes, mesh, report) = pipeline("out.obj", &[]);
    assert!(report.in_range());
    assert!(report.precision.is_some());
    assert_eq!(report.faces, mesh.faces.len());
    assert_eq!(pipeline("out.obj", &[]).0, bytes, "pipeline is deterministic");

    // Raw mode equals infer's assembled mesh.
    let (raw_bytes, _, _) = pipeline("raw.obj", &["--skip-fill", "--skip-prune"]);
    ok(&[
        "--config",
        c,
        "infer",
        "--cloud",
        s(&p("a/cloud.ply")),
        "--model",
        s(&p("m.ckpt")),
        "--out",
        s(&p("infer.obj")),
        "--threshold",
        "0.0",
    ]);
    assert_eq!(std::fs::read(p("infer.obj")).unwrap(), raw_bytes);

    ok(&["postprocess", "--mesh", s(&p("infer.obj")), "--out", s(&p("pp.obj"))]);
    let pp: Mesh = quadrecon::mesh::read_obj(p("pp.obj")).unwrap();
    assert_eq!(quadrecon::mesh::edge_stats(&pp).unwrap().non_manifold(), 0);

    let table = ok(&[
        "evaluate",
        "--mesh",
        s(&p("a/reference.obj")),
        "--target",
        s(&p("a/cloud.ply")),
        "--predicted",
        s(&p("labels.txt")),
        "--truth",
        s(&p("a/labels.txt")),
    ]);
    assert!(table.contains("precision"));
}

#[test]
fn help_lists_flags() {
    let help = ok(&["pipeline", "--help"]);
    for flag in ["--angle-tol", "--max-passes", "--skip-fill", "--skip-prune", "--config", "--seed"] {
        assert!(help.contains(flag), "{flag}");
    }
    let help = ok(&["train", "--help"]);
    for flag in ["--no-face-encoder", "--no-face-loss", "--drop-finfo"] {
        assert!(help.contains(flag), "{flag}");
    }
}
