use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ibpqam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibpqam"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn constellation_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = ibpqam(&["constellation", "-M", "16", "--out", p(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# "));
    assert_eq!(lines[1], "label_bits,i,q,prefix_bits,point_class");
    assert_eq!(lines.len(), 2 + 16);
    assert!(lines[2].starts_with("0000,"));
    let classes: Vec<&str> = lines[2..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(classes.iter().filter(|&&c| c == "safe").count(), 4);
    assert_eq!(classes.iter().filter(|&&c| c == "2-level").count(), 4);
    // prefix column is the top two label bits
    for l in &lines[2..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(&f[0][..2], f[3]);
    }
}

#[test]
fn point_class_blank_off_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    assert!(
        ibpqam(&["constellation", "--alpha", "0.5", "--out", p(&out)])
            .status
            .success()
    );
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(',')));
}

#[test]
fn invalid_arguments_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for args in [
        vec!["constellation", "--alpha", "1.5", "--out", p(&out)],
        vec!["constellation", "-M", "32", "--out", p(&out)],
        vec!["curves", "--alphas", "0", "--out", p(&out)],
        vec!["curves", "--snr-db", "10:0:1", "--out", p(&out)],
        vec!["curves", "--symbols", "0", "--out", p(&out)],
        vec![
            "--workers",
            "0",
            "curves",
            "--symbols",
            "10",
            "--snr-db",
            "5",
            "--out",
            p(&out),
        ],
        vec![
            "semantic",
            "--synth",
            "5",
            "--tau",
            "-1",
            "--out-prefix",
            p(&out),
        ],
        vec!["semantic", "--out-prefix", p(&out)],
        vec!["bogus"],
    ] {
        let o = ibpqam(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?} wrote output");
    }
}

#[test]
fn malformed_payload_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let payload = dir.path().join("p.json");
    let prefix = dir.path().join("run");
    for body in [
        "not json",
        r#"[{"entries": [[300, 0.5]]}]"#,
        r#"[{"entries": [[1, 0.5], [1, 0.2]]}]"#,
    ] {
        fs::write(&payload, body).unwrap();
        let o = ibpqam(&[
            "semantic",
            "--payload",
            p(&payload),
            "--out-prefix",
            p(&prefix),
        ]);
        assert_eq!(o.status.code(), Some(3), "{body}");
    }
    let o = ibpqam(&[
        "semantic",
        "--payload",
        p(&dir.path().join("missing.json")),
        "--out-prefix",
        p(&prefix),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn curves_rows_follow_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = ibpqam(&[
        "curves",
        "--schemes",
        "mqam,ibp",
        "-M",
        "16",
        "--alphas",
        "0.5",
        "--snr-db",
        "0:10:5",
        "--symbols",
        "2000",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&out)
        .unwrap();
    assert_eq!(r.headers().unwrap().len(), 18);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r[0].to_string(), r[2].to_string(), r[3].to_string()))
        .collect();
    assert_eq!(keys[0], ("mqam".into(), "1".into(), "0".into()));
    assert_eq!(keys[3], ("ibp".into(), "0.5".into(), "0".into()));
    assert_eq!(keys[5].2, "10");
    for row in &rows {
        let ser: f64 = row[4].parse().unwrap();
        let iser: f64 = row[5].parse().unwrap();
        let user: f64 = row[6].parse().unwrap();
        assert!((ser - iser - user).abs() < 1e-12);
    }
}

#[test]
fn noiseless_semantic_run() {
    let dir = tempfile::tempdir().unwrap();
    let payload = dir.path().join("p.json");
    fs::write(
        &payload,
        r#"[{"entries": [[3, 0.7], [9, 0.2], [200, 0.1]]}, {"entries": [[0, 1.0]]}]"#,
    )
    .unwrap();
    let prefix = dir.path().join("run");
    let o = ibpqam(&[
        "semantic",
        "--payload",
        p(&payload),
        "--snr-db",
        "inf",
        "--mask",
        "topic",
        "--out-prefix",
        p(&prefix),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["config"]["snr_db"].is_null());
    assert_eq!(metrics["config"]["mask"], "topic_branch");
    for s in metrics["schemes"].as_array().unwrap() {
        assert_eq!(s["mean_cos_sim"], 1.0);
        assert_eq!(s["task_accuracy"], 1.0);
    }
    assert!(metrics["heatmap_tv_distance"].as_f64().unwrap() > 0.0);
    for scheme in ["ibp", "mqam"] {
        let text =
            fs::read_to_string(dir.path().join(format!("run.{scheme}.heatmap.csv"))).unwrap();
        assert_eq!(text.lines().nth(1), Some("label_bits,i,q,count"));
        let total: u64 = text
            .lines()
            .skip(2)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        // two dominant entries ride the 2-bit prefixes
        assert_eq!(total, 80 / 2);
    }
}

#[test]
fn seeds_change_noisy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let prefix = dir.path().join(name);
        let o = ibpqam(&[
            "semantic",
            "--synth",
            "200",
            "--snr-db",
            "8",
            "--seed",
            seed,
            "--out-prefix",
            p(&prefix),
        ]);
        assert!(o.status.success());
        fs::read(dir.path().join(format!("{name}.metrics.json"))).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}
