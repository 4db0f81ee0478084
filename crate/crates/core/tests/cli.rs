use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stcon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stcon"))
        .args(args)
        .current_dir(dir)
        .env_remove("STCON_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_converges_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = stcon(
        dir.path(),
        &[
            "run", "--N", "8", "--seed", "3", "--out", "o", "--name", "a",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("name,graph,N,"));
    assert!(lines[1].starts_with("a,ring8,8,5,2,1,"));
    assert!(lines[1].contains(",converged,"));
    let csv = fs::read_to_string(dir.path().join("o/a.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    assert!(dir.path().join("o/a.summary.csv").exists());
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["x", "y"] {
        let o = stcon(
            dir.path(),
            &[
                "run", "--N", "10", "--t", "2", "--alpha", "unit", "--seed", "9", "--out", ".",
                "--name", name,
            ],
        );
        assert_eq!(o.status.code(), Some(0));
    }
    let x = fs::read(dir.path().join("x.csv")).unwrap();
    let y = fs::read(dir.path().join("y.csv")).unwrap();
    assert_eq!(x, y);
    let mp = stcon(
        dir.path(),
        &[
            "run",
            "--N",
            "10",
            "--t",
            "2",
            "--alpha",
            "unit",
            "--seed",
            "9",
            "--mode",
            "message_passing",
            "--out",
            ".",
            "--name",
            "z",
        ],
    );
    assert_eq!(mp.status.code(), Some(0));
    assert_eq!(x, fs::read(dir.path().join("z.csv")).unwrap());
}

#[test]
fn exit_codes_follow_terminal_status() {
    let dir = tempfile::tempdir().unwrap();
    let stalled = stcon(
        dir.path(),
        &["run", "--N", "8", "--alpha", "two_over_L", "--out", "."],
    );
    assert_eq!(stalled.status.code(), Some(2));
    assert!(stdout(&stalled).contains(",stagnated,"));
    let capped = stcon(
        dir.path(),
        &["run", "--N", "8", "--max-iters", "5", "--out", "."],
    );
    assert_eq!(capped.status.code(), Some(3));
    assert!(stdout(&capped).contains(",max_iters,5,"));
}

#[test]
fn configuration_errors_exit_with_five() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--alpha", "custom:0", "--out", "."][..],
        &["run", "--r", "9", "--out", "."],
        &["run", "--graph", "star", "--out", "."],
        &["run", "--bogus"],
        &["verify", "--samples", "0"],
        &["verify", "--suite", "nothing"],
        &["spectra", "--N", "1"],
    ] {
        let o = stcon(dir.path(), args);
        assert_eq!(o.status.code(), Some(5), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
    let o = stcon(dir.path(), &["run", "--alpha", "custom:0", "--out", "."]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn edge_list_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("g.txt"),
        "# path plus chord\n0 1\n1 2\n2 3\n3 4\n4 5\n0 3\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "graph = edges\nedges = g.txt\nd = 4\nr = 2\nseed = 5\n",
    )
    .unwrap();
    let o = stcon(
        dir.path(),
        &[
            "run", "--config", "run.cfg", "--t", "2", "--out", ".", "--name", "e",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(&fields[2..6], &["6", "4", "2", "2"]);
    fs::write(
        dir.path().join("bad.cfg"),
        "graph = edges\nedges = g.txt\nwidth = 3\n",
    )
    .unwrap();
    assert_eq!(
        stcon(dir.path(), &["run", "--config", "bad.cfg"])
            .status
            .code(),
        Some(5)
    );
    fs::write(dir.path().join("split.txt"), "0 1\n2 3\n").unwrap();
    let o = stcon(
        dir.path(),
        &[
            "run",
            "--graph",
            "edges",
            "--edges",
            "split.txt",
            "--out",
            ".",
        ],
    );
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_stcon"));
        c.args(["run", "--N", "6", "--max-iters", "3", "--name", name])
            .current_dir(dir.path());
        match env {
            Some(e) => c.env("STCON_OUT", e),
            None => c.env_remove("STCON_OUT"),
        };
        if let Some(f) = flag {
            c.args(["--out", f]);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(3));
    };
    run("p1", None, None);
    assert!(dir.path().join("stcon-out/p1.csv").exists());
    run("p2", Some("from-env"), None);
    assert!(dir.path().join("from-env/p2.csv").exists());
    assert!(!dir.path().join("stcon-out/p2.csv").exists());
    run("p3", Some("from-env"), Some("from-flag"));
    assert!(dir.path().join("from-flag/p3.csv").exists());
    assert!(!dir.path().join("from-env/p3.csv").exists());
}

#[test]
fn verify_none_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = stcon(dir.path(), &["verify", "--suite", "none"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn verify_manifold_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = stcon(
        dir.path(),
        &[
            "verify",
            "--suite",
            "manifold",
            "--samples",
            "50",
            "--seed",
            "4",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(!out.is_empty());
    for line in out.lines() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 6, "{line}");
        let (samples, passes, skips): (usize, usize, usize) = (
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
            f[4].parse().unwrap(),
        );
        assert_eq!(passes + skips, samples, "{line}");
        if passes == 0 {
            assert_eq!(f[5], "inf");
        } else {
            let slack: f64 = f[5].parse().unwrap();
            assert!(slack.is_finite() && slack > -1e-9, "{line}");
        }
    }
    let again = stcon(
        dir.path(),
        &[
            "verify",
            "--suite",
            "manifold",
            "--samples",
            "50",
            "--seed",
            "4",
            "--threads",
            "3",
        ],
    );
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn spectra_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = stcon(dir.path(), &["spectra", "--N", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 15);
    let value = |key: &str| -> f64 {
        out.lines()
            .find(|l| l.split_whitespace().next() == Some(key))
            .and_then(|l| l.split_whitespace().last())
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("L_t") - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(value("min_multistep_t"), 164.0);
    let lazy = stdout(&stcon(dir.path(), &["spectra", "--N", "30", "--lazy"]));
    assert!(lazy
        .lines()
        .any(|l| l.starts_with("L_t") && l.ends_with("0.6666666666666667")));
}

#[test]
fn fig1_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = stcon(dir.path(), &["fig1", "--seed", "7", "--out", "f"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("f/fig1_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 11);
    let plot = fs::read_to_string(dir.path().join("f/fig1.gp")).unwrap();
    for line in summary.lines().skip(1) {
        let csv = line.rsplit(',').next().unwrap();
        assert!(dir.path().join("f").join(csv).exists());
        assert!(plot.contains(csv));
    }
}
