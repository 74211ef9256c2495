use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_painleve");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("PAINLEVE_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const BASE_ARGS: [&str; 10] = [
    "--eps",
    "1",
    "--alpha1",
    "0.9",
    "--alpha2",
    "0.8",
    "--phi1",
    "1.5707963267948966",
    "--phi2",
    "1.0471975511965976",
];

#[test]
fn connect_writes_one_row_to_stdout_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["connect"];
    args.extend(BASE_ARGS);
    let o = run_in(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), row.len());
    let i1 = header.iter().position(|h| *h == "I1").unwrap();
    let v: f64 = row[i1].parse().unwrap();
    assert!((v - 0.178_788_403_237_682_53).abs() < 1e-12);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn degrees_flag_converts_angles() {
    let dir = tempfile::tempdir().unwrap();
    let rad = run_in(
        dir.path(),
        &[
            "connect",
            "--eps",
            "1",
            "--alpha1",
            "0.9",
            "--alpha2",
            "0.8",
            "--phi1",
            "1.5707963267948966",
            "--phi2",
            "0",
        ],
    );
    let deg = run_in(
        dir.path(),
        &[
            "--degrees",
            "connect",
            "--eps",
            "1",
            "--alpha1",
            "0.9",
            "--alpha2",
            "0.8",
            "--phi1",
            "90",
            "--phi2",
            "0",
        ],
    );
    assert_eq!(stdout(&rad), stdout(&deg));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec![
            "connect", "--eps", "-1", "--alpha1", "0.9", "--alpha2", "0.8", "--phi1", "0",
            "--phi2", "0",
        ],
        vec!["connect", "--bogus"],
        vec![
            "simulate", "--eps", "1", "--alpha1", "0.9", "--alpha2", "0.8", "--phi1", "0",
            "--phi2", "0", "--x0", "5",
        ],
        vec!["c1", "--resolution", "0"],
    ] {
        let o = run_in(dir.path(), &args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    let mut text = String::from("x,u1,du1,u2,du2\n");
    for i in 0..=2000 {
        text += &format!("{},0,0,0,0\n", 100.0 + 0.1 * i as f64);
    }
    std::fs::write(&path, text).unwrap();
    let o = run_in(
        dir.path(),
        &["fit", "--input", path.to_str().unwrap(), "--eps", "1"],
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let mut args = vec!["simulate"];
    args.extend(BASE_ARGS);
    args.extend([
        "--x0",
        "-300",
        "--x1",
        "300",
        "--refined-seed",
        "-o",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(run_in(dir.path(), &args).status.code(), Some(0));
    let o = run_in(
        dir.path(),
        &[
            "fit",
            "-i",
            traj.to_str().unwrap(),
            "--eps",
            "1",
            "--sideband",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eps,sigma,I1,I2,sin_phi1,cos_phi1,sin_phi2,cos_phi2,rms_residual"
    );
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[1], -1.0);
    assert!((row[2] - 0.1788).abs() < 0.01 && (row[3] - 0.2962).abs() < 0.01);
}

#[test]
fn config_file_supplies_and_checks_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# base inputs\neps = 1\nalpha1 = 0.9\nalpha2 = 0.8\nphi1 = 1.5707963267948966\nphi2 = 1.0471975511965976\n").unwrap();
    let with_cfg = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "connect"]);
    let mut args = vec!["connect"];
    args.extend(BASE_ARGS);
    let direct = run_in(dir.path(), &args);
    assert_eq!(with_cfg.status.code(), Some(0));
    assert_eq!(stdout(&with_cfg), stdout(&direct));

    std::fs::write(
        &cfg,
        "eps = 1\nalpha1 = 0.9\nalpha2 = 0.8\nphi1 = 0\nphi2 = 0\nstray = 3\n",
    )
    .unwrap();
    let o = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "connect"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_output_does_not_depend_on_threads() {
    let args = [
        "scan",
        "--sweep",
        "phi1",
        "--lo",
        "0.2",
        "--hi",
        "3",
        "--points",
        "4",
        "--eps",
        "1",
        "--alpha1",
        "0.5",
        "--alpha2",
        "0.4",
        "--phi2",
        "1",
        "--pipeline",
        "both",
        "--x0",
        "-120",
        "--x1",
        "120",
    ];
    let a = Command::new(BIN)
        .args(args)
        .env("PAINLEVE_THREADS", "1")
        .output()
        .unwrap();
    let b = Command::new(BIN)
        .args(["--threads", "3"])
        .args(args)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 5);
}

#[test]
fn c1_and_average_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["c1", "--resolution", "512"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("resolution,c1,limit,difference\n"));
    let o = run_in(
        dir.path(),
        &[
            "average",
            "--action",
            "0.001",
            "--eps",
            "1",
            "--samples",
            "20000",
            "--seed",
            "4",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let again = run_in(
        dir.path(),
        &[
            "average",
            "--action",
            "0.001",
            "--eps",
            "1",
            "--samples",
            "20000",
            "--seed",
            "4",
        ],
    );
    assert_eq!(o.stdout, again.stdout);
}
