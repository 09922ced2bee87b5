use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qdpsim"));
    cmd.env_remove("QDPSIM_SEED");
    cmd
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qdpsim-cli-{}-{}", name, std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const GOLDEN_HEADERS: &[(&str, &str)] = &[
    (
        r#"{"version":1,"scenario":"grover","strategy":{"kind":"exact"},"params":{"L":1,"N":2,"delta0":0.6}}"#,
        "step,trace_distance,mixedness,depth,width,p_success",
    ),
    (
        r#"{"version":1,"scenario":"dbi","seed":1,"params":{"dim":3,"N":2}}"#,
        "step,trace_distance,mixedness,cost,depth,width,p_success",
    ),
    (
        r#"{"version":1,"scenario":"qite","strategy":{"kind":"exact"},"params":{"N":2}}"#,
        "step,trace_distance,mixedness,energy,depth,width,p_success",
    ),
    (
        r#"{"version":1,"scenario":"osd","seed":1,"params":{"dA":2,"dB":2,"N":2}}"#,
        "step,trace_distance,mixedness,offdiag_norm,depth,width,p_success",
    ),
    (
        r#"{"version":1,"scenario":"channel-error","seed":1,"params":{"s":0.4,"ms":[4]}}"#,
        "m,s,measured,bound",
    ),
    (
        r#"{"version":1,"scenario":"cost","params":{"L":1,"N":2}}"#,
        "step,unfolding_step_calls,unfolding_total_calls,qdp_depth,qdp_width",
    ),
];

#[test]
fn csv_headers_are_stable() {
    let dir = scratch("headers");
    for (cfg, header) in GOLDEN_HEADERS {
        let out = bin()
            .arg("run")
            .arg(write_config(&dir, cfg))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}: {}",
            cfg,
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(stdout(&out).lines().next().unwrap(), *header);
    }
}

#[test]
fn grover_exact_golden_rows() {
    let dir = scratch("golden");
    let cfg = write_config(&dir, GOLDEN_HEADERS[0].0);
    let out = bin().arg("run").arg(cfg).output().unwrap();
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows[0],
        [
            "0",
            "5.9999999999999998e-1",
            "0.0000000000000000e0",
            "0",
            "1",
            "1.0000000000000000e0"
        ]
    );
    assert_eq!(&rows[2][3..5], ["2", "1"]);
    let d2: f64 = rows[2][1].parse().unwrap();
    assert!((d2 - 1.016e-4).abs() < 1e-6);
}

#[test]
fn file_output_is_byte_identical_across_runs() {
    let dir = scratch("determinism");
    let cfg = write_config(
        &dir,
        r#"{"version":1,"scenario":"grover","seed":9,"strategy":{"kind":"qdp","m":12},"params":{"L":1,"N":2,"delta0":0.5,"dim":4}}"#,
    );
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.join(format!("out{}.csv", k));
        let st = bin()
            .arg("run")
            .arg(&cfg)
            .arg("--output")
            .arg(&path)
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn json_mirrors_csv() {
    let dir = scratch("json");
    let cfg = write_config(&dir, GOLDEN_HEADERS[0].0);
    let out = bin()
        .args(["run", "--format", "json"])
        .arg(cfg)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["columns"][0], "step");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["metadata"]["scenario"], "grover");
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
}

#[test]
fn seed_override_from_environment() {
    let dir = scratch("seed");
    let cfg = write_config(
        &dir,
        r#"{"version":1,"scenario":"dbi","seed":1,"params":{"dim":3,"N":1}}"#,
    );
    let base = stdout(&bin().arg("run").arg(&cfg).output().unwrap());
    let env = stdout(
        &bin()
            .arg("run")
            .arg(&cfg)
            .env("QDPSIM_SEED", "2")
            .output()
            .unwrap(),
    );
    let flag = stdout(
        &bin()
            .arg("run")
            .arg(&cfg)
            .args(["--seed", "2"])
            .output()
            .unwrap(),
    );
    assert_ne!(base, env);
    assert_eq!(env, flag);
}

#[test]
fn cost_subcommand() {
    let out = bin()
        .args(["cost", "--scenario", "grover", "--L", "2", "--N", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "4");
    assert_eq!(last[1], "250");
}

#[test]
fn compare_lists_one_row_per_strategy() {
    let dir = scratch("compare");
    let cfg = write_config(
        &dir,
        r#"{"version":1,"scenario":"grover","params":{"L":1,"N":2,"delta0":0.6},
            "strategies":[{"kind":"exact"},{"kind":"unfolding"},{"kind":"qdp","m":64},{"kind":"hybrid","n1":1,"n2":1,"m":64}]}"#,
    );
    let out = bin().arg("compare").arg(cfg).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "strategy,final_distance,mixedness,depth,width,circuit_size,p_success"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("unfolding(gc=1),"));
    let width = |l: &str| l.rsplit(',').nth(2).unwrap().parse::<u128>().unwrap();
    assert_eq!(width(lines[3]), 65 * 65);
    assert_eq!(width(lines[4]), 65);
}

#[test]
fn exit_codes() {
    let dir = scratch("exit");
    let bad = write_config(
        &dir,
        r#"{"version":1,"scenario":"grover","params":{"L":1}}"#,
    );
    assert_eq!(
        bin().arg("run").arg(bad).output().unwrap().status.code(),
        Some(2)
    );
    let unknown = write_config(
        &dir,
        r#"{"version":1,"scenario":"grover","params":{"L":1,"N":1,"delta0":0.5},"extra":1}"#,
    );
    assert_eq!(
        bin()
            .arg("run")
            .arg(unknown)
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    let infeasible = write_config(
        &dir,
        r#"{"version":1,"scenario":"grover","strategy":{"kind":"qdp","m":8,"imr":{"reduction_factor":2.0,"copies_out":1,"failure_threshold":0.01}},"params":{"L":1,"N":2,"delta0":0.6}}"#,
    );
    let out = bin().arg("run").arg(infeasible).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}
