use std::path::Path;
use std::process::Command;

use hphdg_cli::{parse_config, run};

fn solve_config(dir: &Path, extra: &str) -> hphdg_cli::RunConfig {
    let text = format!("problem = \"e1\"\noutput_dir = {:?}\n{extra}", dir.display().to_string());
    parse_config(&text).unwrap()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn zero_cycles_write_one_row_and_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&solve_config(dir.path(), "max_cycles = 0\n")).unwrap();
    assert_eq!(out.result.history.len(), 1);
    let (header, rows) = read_rows(&dir.path().join("history.csv"));
    assert_eq!(
        header,
        [
            "cycle",
            "n_elements",
            "n_trace_dofs",
            "n_volume_dofs",
            "global_indicator",
            "max_local_indicator",
            "l2_error",
            "wall_ms"
        ]
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1], "32");
    for f in ["audit.txt", "mesh.json", "solution.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let mesh: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("mesh.json")).unwrap()).unwrap();
    assert_eq!(mesh["elements"].as_array().unwrap().len(), 32);
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert!(sol["elements"].as_array().is_some_and(|e| e.len() == 32));
}

#[test]
fn repeated_runs_are_identical_up_to_wall_time() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&solve_config(a.path(), "max_cycles = 3\n")).unwrap();
    run(&solve_config(b.path(), "max_cycles = 3\n")).unwrap();
    let (ha, ra) = read_rows(&a.path().join("history.csv"));
    let (hb, rb) = read_rows(&b.path().join("history.csv"));
    assert_eq!(ha, hb);
    let wall = ha.iter().position(|h| h == "wall_ms").unwrap();
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        for (i, (u, v)) in x.iter().zip(y).enumerate() {
            if i != wall {
                assert_eq!(u, v, "column {}", ha[i]);
            }
        }
    }
    for f in ["mesh.json", "solution.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn adjoint_run_adds_output_columns() {
    let dir = tempfile::tempdir().unwrap();
    run(&solve_config(dir.path(), "criterion = \"adjoint\"\nmax_cycles = 1\n")).unwrap();
    let (header, rows) = read_rows(&dir.path().join("history.csv"));
    let i = header.iter().position(|h| h == "output_value").unwrap();
    assert_eq!(header[i + 1], "output_error_estimate");
    assert_eq!(header.last().unwrap(), "wall_ms");
    assert!(rows.iter().all(|r| r[i].parse::<f64>().is_ok() && r[i + 1].parse::<f64>().is_ok()));
}

#[test]
fn missing_exact_solution_leaves_the_error_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("problem = \"e2\"\nmax_cycles = 0\noutput_dir = {:?}\n", dir.path().display().to_string());
    run(&parse_config(&text).unwrap()).unwrap();
    let (header, rows) = read_rows(&dir.path().join("history.csv"));
    let i = header.iter().position(|h| h == "l2_error").unwrap();
    assert_eq!(rows[0][i], "");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hphdg"))
}

#[test]
fn binary_solve_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"hp1\"\nmax_cycles = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).status().unwrap();
    assert!(st.success());
    assert!(out_dir.join("history.csv").exists());
    let out = bin().args(["audit", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn binary_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "problem = \"e1\"\nomega = 1.5\n").unwrap();
    let out = bin().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega"));
}

#[test]
fn binary_flux_check() {
    let out = bin().args(["oracle-fluxcheck", "--system", "convection-diffusion", "--samples", "200"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin().args(["oracle-fluxcheck", "--system", "nonsense"]).output().unwrap();
    assert!(!out.status.success());
}
