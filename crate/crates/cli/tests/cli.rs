use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cif_simul::simul::{oracle_weights, waitk_delay, BlockConfig, Corpus};
use cif_simul::{integrate_and_fire, CifConfig, IntegrationTrace, ReadWriteTrace, WeightSequence};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    cli_env(args, &[])
}

fn cli_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cif-simul"));
    cmd.args(args).env_remove("CIF_SIMUL_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join("corpus.json");
    ok(&[
        "synth",
        "--out",
        s(&path),
        "--n-utts",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    path
}

#[test]
fn oracle_simulation_matches_offline_firings() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 8, 5);
    let out = dir.path().join("traces");
    ok(&[
        "simulate",
        "--corpus",
        s(&c),
        "--out",
        s(&out),
        "--block-ms",
        "160",
        "--lookahead-ms",
        "80",
    ]);
    let corpus = Corpus::from_manifest_json(&fs::read_to_string(&c).unwrap()).unwrap();
    let cfg = CifConfig::default();
    for u in &corpus.utterances {
        let offline = integrate_and_fire(&u.features, &WeightSequence(oracle_weights(u)), &cfg).unwrap();
        let text = fs::read_to_string(out.join(format!("{}.cif.jsonl", u.id))).unwrap();
        let online = IntegrationTrace::<f64>::from_jsonl(&text).unwrap();
        assert_eq!(online, offline, "{}", u.id);
        assert_eq!(online.fire_frames(), u.true_boundaries);
        let trace = ReadWriteTrace::from_jsonl(&fs::read_to_string(out.join(format!("{}.trace.jsonl", u.id))).unwrap())
            .unwrap();
        assert_eq!(trace.tokens(), u.target.tokens());
    }
    let index: Value = serde_json::from_str(&fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    let ids: Vec<&str> = index["utterances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), 8);
}

#[test]
fn waitk_simulation_follows_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 4, 2);
    let out = dir.path().join("w");
    ok(&[
        "simulate",
        "--corpus",
        s(&c),
        "--out",
        s(&out),
        "--policy",
        "waitk",
        "--k",
        "2",
    ]);
    let blocks = BlockConfig::from_ms(640.0, 320.0, 40.0).unwrap();
    let corpus = Corpus::from_manifest_json(&fs::read_to_string(&c).unwrap()).unwrap();
    for u in &corpus.utterances {
        let t = ReadWriteTrace::from_jsonl(&fs::read_to_string(out.join(format!("{}.trace.jsonl", u.id))).unwrap())
            .unwrap();
        assert_eq!(t.target_len(), u.target.len());
        for (i, (_, elapsed, _)) in t.writes().enumerate() {
            assert_eq!(elapsed, waitk_delay(i + 1, 2, u.frames(), &blocks));
        }
    }
    assert!(!out.join(format!("{}.cif.jsonl", corpus.utterances[0].id)).exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = dir.path().join("o");
    assert_eq!(code(&cli(&["simulate", "--corpus", s(&missing), "--out", s(&o)])), 2);
    assert_eq!(code(&cli(&["metrics", "--traces", s(dir.path()), "--out", s(&o)])), 2);
    assert_eq!(code(&cli(&["gradcheck"])), 2);
    assert_eq!(code(&cli(&["simulate", "--beta", "-1", "--out", s(&o)])), 2);
    assert_eq!(code(&cli(&["frobnicate"])), 2);
    assert_eq!(
        code(&cli_env(&["gradcheck", "--all"], &[("CIF_SIMUL_THREADS", "0")])),
        2
    );
    let c = corpus(dir.path(), 2, 0);
    let out = cli(&["simulate", "--corpus", s(&c), "--frame-ms", "10", "--out", s(&o)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame"));
}

fn write_fixture(dir: &Path) {
    // Writes after 56 and 108 of 120 one-millisecond frames.
    let trace = "{\"frame_ms\":1.0,\"source_frames\":120,\"target_len\":2}\n\
        {\"type\":\"read\",\"frames\":56}\n\
        {\"type\":\"write\",\"token\":0,\"elapsed_frames\":56}\n\
        {\"type\":\"read\",\"frames\":52}\n\
        {\"type\":\"write\",\"token\":1,\"elapsed_frames\":108}\n\
        {\"type\":\"read\",\"frames\":12}\n";
    fs::write(dir.join("fix.trace.jsonl"), trace).unwrap();
}

#[test]
fn metrics_reproduce_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    fs::create_dir(&traces).unwrap();
    write_fixture(&traces);
    let report = dir.path().join("r.json");
    ok(&["metrics", "--traces", s(&traces), "--out", s(&report)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let row = &v["utterances"][0];
    assert_eq!(row["id"], "fix");
    assert!((row["ap"].as_f64().unwrap() - 164.0 / 240.0).abs() < 1e-9);
    assert!((row["al_ms"].as_f64().unwrap() - 52.0).abs() < 1e-9);
    assert!((row["dal_ms"].as_f64().unwrap() - 56.0).abs() < 1e-9);
    // No compute stamps: the computation-aware fields are left out.
    assert!(row.get("dal_ca_ms").is_none());
    assert!(v["mean"].get("delta_ms").is_none());
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "id,ap,al_ms,dal_ms,target_len,source_ms");
    assert!(lines[1].starts_with("fix,"));
    assert!(lines[2].starts_with("MEAN,"));
}

#[test]
fn metrics_report_computation_aware_fields_when_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t");
    fs::create_dir(&traces).unwrap();
    let trace = "{\"frame_ms\":40.0,\"source_frames\":3,\"target_len\":3}\n\
        {\"type\":\"read\",\"frames\":1}\n\
        {\"type\":\"write\",\"token\":0,\"elapsed_frames\":1,\"compute_ms\":10.0}\n\
        {\"type\":\"read\",\"frames\":1}\n\
        {\"type\":\"write\",\"token\":1,\"elapsed_frames\":2,\"compute_ms\":10.0}\n\
        {\"type\":\"read\",\"frames\":1}\n\
        {\"type\":\"write\",\"token\":2,\"elapsed_frames\":3,\"compute_ms\":10.0}\n";
    fs::write(traces.join("a.trace.jsonl"), trace).unwrap();
    let report = dir.path().join("r.json");
    ok(&["metrics", "--traces", s(&traces), "--out", s(&report)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((v["mean"]["dal_ca_ms"].as_f64().unwrap() - 60.0).abs() < 1e-9);
    assert!((v["mean"]["delta_ms"].as_f64().unwrap() - 20.0).abs() < 1e-9);
}

#[test]
fn malformed_trace_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    fs::write(
        dir.path().join("bad.trace.jsonl"),
        "{\"frame_ms\":1.0,\"source_frames\":2,\"target_len\":1}\n{\"type\":\"read\",\"frames\":2}\n{\"type\":\"wrte\"}\n",
    )
    .unwrap();
    let out = cli(&[
        "metrics",
        "--traces",
        s(dir.path()),
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.trace.jsonl") && err.contains("line 3"), "{err}");
}

#[test]
fn plot_of_the_three_frame_example() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("f");
    fs::create_dir(&feats).unwrap();
    // One feature column, then the weight column.
    fs::write(feats.join("ex.csv"), "1,0.6\n2,0.7\n3,0.9\n").unwrap();
    let out = dir.path().join("o");
    ok(&[
        "simulate",
        "--features",
        s(&feats),
        "--predictor",
        "column",
        "--block-ms",
        "40",
        "--lookahead-ms",
        "0",
        "--out",
        s(&out),
    ]);
    let prefix = dir.path().join("plot");
    ok(&[
        "plot-policy",
        "--trace",
        s(&out.join("ex.trace.jsonl")),
        "--integration",
        s(&out.join("ex.cif.jsonl")),
        "--out",
        s(&prefix),
    ]);
    assert_eq!(
        fs::read_to_string(dir.path().join("plot.csv")).unwrap(),
        "frame,token\n2,1\n3,2\n"
    );
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke=\"red\"") && svg.contains("fill=\"blue\""));
}

#[test]
fn plot_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    ok(&["plot-policy", "--trace", s(&empty), "--out", s(&dir.path().join("e"))]);
    assert_eq!(fs::read_to_string(dir.path().join("e.csv")).unwrap(), "frame,token\n");
    assert!(!fs::read_to_string(dir.path().join("e.svg"))
        .unwrap()
        .contains("stroke-width=\"1.5\""));

    write_fixture(dir.path());
    let cif = dir.path().join("x.cif.jsonl");
    fs::write(
        &cif,
        "{\"frames\":3,\"dim\":1,\"beta\":1.0,\"residual\":0.0,\"firings\":0}\n",
    )
    .unwrap();
    let out = cli(&[
        "plot-policy",
        "--trace",
        s(&dir.path().join("fix.trace.jsonl")),
        "--integration",
        s(&cif),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(code(&out), 2);

    // Wait-k: one WRITE per block after the first k blocks.
    let c = corpus(dir.path(), 1, 3);
    let w = dir.path().join("w");
    ok(&[
        "simulate",
        "--corpus",
        s(&c),
        "--out",
        s(&w),
        "--policy",
        "waitk",
        "--k",
        "3",
        "--block-ms",
        "40",
        "--lookahead-ms",
        "0",
    ]);
    let id = "utt00000";
    ok(&[
        "plot-policy",
        "--trace",
        s(&w.join(format!("{id}.trace.jsonl"))),
        "--out",
        s(&dir.path().join("wk")),
    ]);
    let csv = fs::read_to_string(dir.path().join("wk.csv")).unwrap();
    let corpus = Corpus::from_manifest_json(&fs::read_to_string(&c).unwrap()).unwrap();
    let u = corpus.utterances[0].frames();
    for (i, line) in csv.lines().skip(1).enumerate() {
        assert_eq!(line, format!("{},{}", (3 + i).min(u), i + 1));
    }
}

#[test]
fn gradcheck_passes_and_prints_the_error() {
    let stdout = ok(&["gradcheck", "--all", "--seed", "17"]);
    assert!(stdout.contains("max rel err"));
    assert_eq!(stdout.matches(" ok").count(), 8);
    let out = cli(&["gradcheck", "--check", "dal", "--tol", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn longutt_respects_the_minimum_duration() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 40, 9);
    let long = dir.path().join("long.json");
    ok(&["longutt", "--manifest", s(&c), "--L", "20", "--out", s(&long)]);
    let corpus = Corpus::from_manifest_json(&fs::read_to_string(&long).unwrap()).unwrap();
    for (i, u) in corpus.utterances.iter().enumerate() {
        let last_of_talk = corpus.utterances.get(i + 1).is_none_or(|n| n.talk_id != u.talk_id);
        assert!(u.duration_s() >= 20.0 || last_of_talk, "{}: {} s", u.id, u.duration_s());
    }
}

#[test]
fn two_phase_training_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let p0 = dir.path().join("p0.json");
    let p1 = dir.path().join("p1.json");
    let common = ["--seed", "3", "--n-utts", "30", "--heldout", "10", "--lr", "0.01"];
    let mut a = vec!["train-toy", "--steps", "200", "--lambda-lat", "0", "--out", s(&p0)];
    a.extend(common);
    ok(&a);
    let report = dir.path().join("r.json");
    let mut b = vec![
        "train-toy",
        "--steps",
        "50",
        "--lambda-lat",
        "2",
        "--init",
        s(&p0),
        "--out",
        s(&p1),
        "--report",
        s(&report),
    ];
    b.extend(common);
    ok(&b);
    assert_ne!(fs::read(&p0).unwrap(), fs::read(&p1).unwrap());
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["heldout_utterances"], 10);
    assert!(v["final_train_loss"]["lat"].as_f64().unwrap() > 0.0);

    let mut bad = vec!["train-toy", "--steps", "1", "--init", s(&report), "--out", s(&p1)];
    bad.extend(common);
    assert_eq!(code(&cli(&bad)), 2);
}
