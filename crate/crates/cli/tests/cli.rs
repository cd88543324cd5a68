use std::path::Path;
use std::process::Command;

use bkr::{load_dataset, Generator, RngStream};
use bkr_cli::{cmd_benchmark, cmd_generate, cmd_matrix, cmd_test, dataset_stem, RunConfig};
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bkr"))
}

fn generate(dir: &Path, n: usize, rho: f64, seed: u64) -> std::path::PathBuf {
    let csv = dir.join("d.csv");
    let status = bin()
        .args(["generate", "--n", &n.to_string(), "--rho", &rho.to_string(), "--seed", &seed.to_string()])
        .arg("--out")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    csv
}

fn small_cfg() -> RunConfig {
    RunConfig {
        n_mc: 200,
        n_perm: 100,
        seed: 5,
        ..RunConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempdir().unwrap();
    let csv = generate(dir.path(), 50, 0.8, 1);
    let run = |threads: &str| {
        bin()
            .args(["matrix", "--mc-samples", "150", "--seed", "9", "--threads", threads])
            .arg(&csv)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("4");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn matrix_on_two_columns_agrees_with_test() {
    let dir = tempdir().unwrap();
    let csv = generate(dir.path(), 40, 0.6, 2);
    let d: bkr::Dataset = load_dataset(&csv, dir.path().join("d.schema.json")).unwrap();
    for rank in [None, Some(16)] {
        let cfg = RunConfig {
            nystrom_rank: rank,
            ..small_cfg()
        };
        let t = cmd_test(&d, "X", "D_X", &cfg).unwrap();
        let m = cmd_matrix(&d, &["X".into(), "D_X".into()], &cfg).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.posterior_mean[0][1], t.posterior_mean);
        assert_eq!(m.pairs[0].p_dependent, t.p_dependent);
        assert_eq!(m.pairs[0].tau_mean, t.tau_mean);
        assert_eq!(m.pairs[0].decision, t.decision);
    }
}

#[test]
fn emitted_benchmark_data_round_trips() {
    let dir = tempdir().unwrap();
    let cfg = small_cfg();
    cmd_benchmark(Generator::D2, 20, &[0.5], 2, &cfg, Some(dir.path())).unwrap();
    for rep in 0..2 {
        let stem = dataset_stem(Generator::D2, 0.5, rep);
        let loaded: bkr::Dataset = load_dataset(
            dir.path().join(format!("{stem}.csv")),
            dir.path().join(format!("{stem}.schema.json")),
        )
        .unwrap();
        let fresh = Generator::D2
            .generate::<f64, _>(20, 0.5, &mut RngStream::data(cfg.seed, rep).rng())
            .unwrap()
            .dataset;
        assert_eq!(loaded, fresh);
    }
    let generated = cmd_generate(Generator::D1, 10, 0.3, 4).unwrap();
    assert_eq!(generated.n_rows(), 10);
}

#[test]
fn benchmark_writes_json_and_csv() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let status = bin()
        .args(["benchmark", "--n", "20", "--reps", "1", "--rho", "0.5", "--mc-samples", "50", "--permutations", "50"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
    assert_eq!(json["generator"], "d1");
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(csv.starts_with("generator,n,rho"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let csv = generate(dir.path(), 20, 0.5, 3);
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();
    let path = csv.to_str().unwrap();
    assert_eq!(code(&["test", path, "X", "Y", "--mc-samples", "20"]), 0);
    assert_eq!(code(&["test", path, "X"]), 1);
    assert_eq!(code(&["test", path, "X", "Y", "--gamma", "1.5"]), 1);
    assert_eq!(code(&["test", path, "X", "Y", "--nystrom-rank", "zero"]), 1);
    assert_eq!(code(&["test", path, "X", "missing_column"]), 2);

    let ragged = dir.path().join("r.csv");
    std::fs::write(&ragged, "v\n1.0;2.0;3.0\n1.0;2.0\n").unwrap();
    std::fs::write(
        dir.path().join("r.schema.json"),
        r#"{"columns":[{"name":"v","type":"numeric-vector","dim":3}]}"#,
    )
    .unwrap();
    assert_eq!(code(&["matrix", ragged.to_str().unwrap()]), 2);

    let constant = dir.path().join("c.csv");
    std::fs::write(&constant, "a,b\n1,0.5\n1,0.1\n1,0.9\n1,0.3\n").unwrap();
    std::fs::write(
        dir.path().join("c.schema.json"),
        r#"{"columns":[{"name":"a","type":"numeric"},{"name":"b","type":"numeric"}]}"#,
    )
    .unwrap();
    assert_eq!(code(&["test", constant.to_str().unwrap(), "a", "b"]), 3);
}

#[test]
fn missing_cells_give_marginal_matrix() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let mut body = String::from("a,b,c\n");
    for i in 0..30 {
        let a = (i as f64 * 0.37).sin();
        let b = if i == 4 { String::new() } else { format!("{}", a * 2.0 + 0.01 * i as f64) };
        body.push_str(&format!("{a},{b},{}\n", if i % 3 == 0 { "u" } else { "v" }));
    }
    std::fs::write(&csv, body).unwrap();
    std::fs::write(
        dir.path().join("m.schema.json"),
        r#"{"columns":[{"name":"a","type":"numeric"},{"name":"b","type":"numeric"},{"name":"c","type":"categorical"}]}"#,
    )
    .unwrap();
    let d: bkr::Dataset = load_dataset(&csv, dir.path().join("m.schema.json")).unwrap();
    let r = cmd_matrix(&d, &[], &small_cfg()).unwrap();
    assert!(r.joint.is_none());
    assert_eq!(r.pairs[0].n, 29);
    assert_eq!(r.pairs[1].n, 30);
}
