use std::path::Path;
use std::process::{Command, Output};

fn afc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn afc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_info_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = afc(&["mesh-info", "--m", "10"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("nodes = 121"), "{s}");
    assert!(s.contains("triangles = 200"));
    assert!(s.contains("h0 = 0.1"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(afc(&["run", "--problem", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(afc(&["mesh-info", "--m", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(afc(&["run", "--scheme", "upwind"], dir.path()).status.code(), Some(2));
    assert_eq!(
        afc(&["temporal", "--m", "4", "--n0", "10,20", "--ref-n0", "20"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        afc(&["spatial", "--problem", "burgers"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        afc(&["run", "--config", "missing.cfg"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(afc(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = afc(
        &[
            "run",
            "--problem",
            "burgers",
            "--m",
            "8",
            "--n0",
            "10",
            "--t-final",
            "1e100",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn dmp_table_signs() {
    let dir = tempfile::tempdir().unwrap();
    let o = afc(&["dmp", "--m", "10", "--steps", "10", "--out", "dmp.csv"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("dmp.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,standard,afc"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[2] >= -1e-12));
    assert!(rows.iter().any(|r| r[1] < -1e-4));
    assert_eq!(rows[0][1..], [0.0, 0.0]);
    assert_eq!(rows[10][1..], [0.0, 0.0]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("study.cfg"),
        "# small temporal study\nproblem = burgers\nm = 6\nn0 = 5,10\nref-n0 = 40\nscheme = afc\nout = from_config.csv\n",
    )
    .unwrap();
    let o = afc(
        &["temporal", "--config", "study.cfg", "--out", "from_flag.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("from_config.csv").exists());
    let csv = std::fs::read_to_string(dir.path().join("from_flag.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "resolution,error,order,variant,problem");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("5,") && lines[1].ends_with(",,afc,burgers"));
    let order: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!(order > 1.0 && order < 3.0);
    assert!(stdout(&o).contains("burgers / afc"));

    std::fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(afc(&["run", "--config", "bad.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn spatial_study_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = afc(
        &[
            "spatial",
            "--problem",
            "poly-advect",
            "--m",
            "8,16",
            "--scheme",
            "all",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(csv.contains("low-order,poly-advect"));
}

#[test]
fn run_writes_state_and_limiter_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = afc(
        &[
            "run",
            "--problem",
            "trig-burgers",
            "--m",
            "6",
            "--out",
            "u.csv",
            "--dump-limiter",
            "lim",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("maximum principle held"));
    assert!(s.contains("L2 error"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("u.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 49
    );
    let nodes = std::fs::read_to_string(dir.path().join("lim_nodes.csv")).unwrap();
    assert!(nodes.starts_with("node,x,y,is_boundary,p_plus"));
    assert_eq!(nodes.lines().count(), 1 + 49);
    let edges = std::fs::read_to_string(dir.path().join("lim_edges.csv")).unwrap();
    assert!(edges.starts_with("i,j,d_ij,r_ij,a_ij"));
    // M (M + 1) horizontal and as many vertical edges, plus M^2 diagonals.
    assert_eq!(edges.lines().count(), 1 + 2 * 6 * 7 + 36);
}

#[test]
fn afc_threads_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(["spatial", "--problem", "poly-advect", "--m", "4,8"])
        .env("AFC_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(["spatial", "--problem", "poly-advect", "--m", "4,8"])
        .env("AFC_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
}
