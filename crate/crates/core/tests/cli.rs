use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/examples/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn polyconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyconf"))
        .args(args)
        .env_remove("POLYCONF_TOL")
        .output()
        .unwrap()
}

fn run_to(dir: &Path, file: &str, args: &[&str]) -> (i32, PathBuf) {
    let path = dir.join(file);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--output", &p]);
    let out = polyconf(&all);
    (out.status.code().unwrap(), path)
}

const MOBIUS: [&str; 9] = [
    "verify",
    "--gallery",
    "mobius",
    "a=1",
    "b=1",
    "--algebra",
    "euclid2",
    "--grid",
    "[-0.4,0.4]^2@21",
];

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (c1, a) = run_to(dir.path(), "a.json", &MOBIUS);
    let (c2, b) = run_to(dir.path(), "b.json", &MOBIUS);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let (_, json) = run_to(dir.path(), "r.json", &MOBIUS);
    let mut csv_args = MOBIUS.to_vec();
    csv_args.extend(["--format", "csv"]);
    let (_, csv) = run_to(dir.path(), "r.csv", &csv_args);
    let json_text = std::fs::read_to_string(json).unwrap();
    let csv_text = std::fs::read_to_string(csv).unwrap();
    let report: Value = serde_json::from_str(&json_text).unwrap();
    assert_eq!(report["schema"], 1);

    let rows: Vec<&str> = csv_text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "index,x1,x2,p1,p2,s1,s2,residual,degenerate");
    let points = report["points"].as_array().unwrap();
    assert_eq!(rows.len() - 1, points.len());
    for (row, point) in rows[1..].iter().zip(points) {
        let cells: Vec<&str> = row.split(',').collect();
        let mut expected = vec![point["index"].to_string()];
        for key in ["x", "p", "s"] {
            for v in point[key].as_array().unwrap() {
                expected.push(format!("{:.16e}", v.as_f64().unwrap()));
            }
        }
        expected.push(format!("{:.16e}", point["residual"].as_f64().unwrap()));
        expected.push(point["degenerate"].to_string());
        assert_eq!(cells, expected);
    }
    let max = format!(
        "{:.16e}",
        report["aggregates"]["max_residual"].as_f64().unwrap()
    );
    assert!(csv_text.contains(&format!("# aggregates.max_residual,{max}\n")));
    assert!(json_text.contains(&max));
}

#[test]
fn non_solution_exits_one_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let map = data("square_stretch.map");
    let (code, path) = run_to(
        dir.path(),
        "fail.json",
        &[
            "verify",
            "--map",
            &map,
            "--algebra",
            "euclid2",
            "--grid",
            "[0.5,1.5]^2@5",
        ],
    );
    assert_eq!(code, 1);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["aggregates"]["max_residual"].as_f64().unwrap() > 1e-2);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.map");
    std::fs::write(&broken, "dim = 2\nf1 = x1 +\nf2 = x2\n").unwrap();
    let broken = broken.to_str().unwrap();
    let cases: [&[&str]; 6] = [
        &["verify", "--map", broken, "--grid", "[0,1]^2@3"],
        &["verify", "--map", "/nonexistent.map", "--grid", "[0,1]^2@3"],
        &["algebra-info", "--algebra", "quaternions"],
        &[
            "verify",
            "--gallery",
            "scaled",
            "c=2",
            "--grid",
            "[0,1]^2@3",
            "--exclude",
            "1",
        ],
        &[
            "verify",
            "--gallery",
            "mobius",
            "a=1",
            "b=1",
            "--grid",
            "[0,1]^2",
        ],
        &[
            "verify",
            "--gallery",
            "mobius",
            "a=1",
            "b=1",
            "c=2",
            "--grid",
            "[0,1]^2@3",
        ],
    ];
    for args in cases {
        let out = polyconf(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
    let missing = dir.path().join("never.json");
    polyconf(&[
        "verify",
        "--map",
        broken,
        "--grid",
        "[0,1]^2@3",
        "--output",
        missing.to_str().unwrap(),
    ]);
    assert!(!missing.exists());
}

#[test]
fn parse_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.map");
    std::fs::write(&broken, "dim = 2\nf1 = x1 +\nf2 = x2\n").unwrap();
    let out = polyconf(&[
        "verify",
        "--map",
        broken.to_str().unwrap(),
        "--grid",
        "[0,1]^2@3",
    ]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn tolerance_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let map = data("square_stretch.map");
    let args = [
        "verify",
        "--map",
        &map,
        "--grid",
        "[0.5,1.5]^2@5",
        "--fd-tol",
        "10",
        "--output",
        out.to_str().unwrap(),
    ];
    let loose = Command::new(env!("CARGO_BIN_EXE_polyconf"))
        .args(args)
        .env("POLYCONF_TOL", "100")
        .status()
        .unwrap();
    assert_eq!(loose.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["tolerance"].as_f64(), Some(100.0));

    let mut strict = args.to_vec();
    strict.extend(["--tol", "1e-3"]);
    let code = Command::new(env!("CARGO_BIN_EXE_polyconf"))
        .args(&strict)
        .env("POLYCONF_TOL", "100")
        .status()
        .unwrap();
    assert_eq!(code.code(), Some(1), "--tol overrides the environment");
}

#[test]
fn algebra_info_prints_the_h4_tensors() {
    let out = polyconf(&[
        "algebra-info",
        "--algebra",
        "H4psi",
        "--output",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ε = (1, 1, 1, 1)"), "{text}");
    assert!(text.contains("q = diag(1, 1, 1, 1)"));
    assert!(text.contains("degenerate: false"));
}

#[test]
fn report_goes_to_stdout_by_default() {
    let out = polyconf(&[
        "recover",
        "--gallery",
        "scaled",
        "c=2",
        "--point",
        "0.1,0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["command"], "recover");
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn algebra_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("c.alg");
    std::fs::write(
        &def,
        polyconf::algebra::AlgebraSpec::complex().to_definition(),
    )
    .unwrap();
    let out = polyconf(&[
        "algebra-info",
        "--algebra",
        def.to_str().unwrap(),
        "--output",
        "/dev/null",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("q = diag(2, -2)"));
}

#[test]
fn every_subcommand_passes_on_a_solution() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 6] = [
        &[
            "trace",
            "--gallery",
            "h4_log",
            "a=1",
            "b=1",
            "--algebra",
            "H4psi",
            "--grid",
            "[0.5,1.5]^4@3",
        ],
        &[
            "compose",
            "--f-gallery",
            "scaled",
            "c=2",
            "--g-gallery",
            "mobius",
            "a=1",
            "b=1",
            "--grid",
            "[-0.4,0.4]^2@7",
        ],
        &[
            "analytic-check",
            "--gallery",
            "h4_log",
            "a=1",
            "b=0",
            "--algebra",
            "H4psi",
            "--grid",
            "[0.5,1.5]^4@3",
        ],
        &[
            "basis-check",
            "--map",
            &data("h4_twist.map"),
            "--grid",
            "[-1,1]^4@3",
        ],
        &[
            "source-solve",
            "--case",
            "h4x-laplace",
            "--coeffs",
            "1,0,0,0;0,1,0,0;0,0,1,1",
        ],
        &[
            "recover",
            "--gallery",
            "mobius",
            "a=1",
            "b=1",
            "--point=-0.2,0.3",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let (code, path) = run_to(dir.path(), &format!("{i}.json"), args);
        assert_eq!(code, 0, "{args:?}");
        let report: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(report["passed"], true);
    }
}

#[test]
fn analytic_check_rejects_the_mobius_map() {
    let out = polyconf(&[
        "analytic-check",
        "--gallery",
        "mobius",
        "a=1",
        "b=1",
        "--algebra",
        "C",
        "--grid",
        "[0.1,0.4]^2@4",
        "--output",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
