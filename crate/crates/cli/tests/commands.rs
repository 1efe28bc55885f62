use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn markmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markmle")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_masses_and_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cs.csv");
    fs::write(&input, "t1,j,z\n1,1,0.5\n2,2,\n3,1,1.5\n").unwrap();
    let (out, marg) = (dir.path().join("m.csv"), dir.path().join("x.csv"));
    let o = markmle(&["fit", "--input", s(&input), "--output", s(&out), "--marginal", s(&marg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        read(&out),
        "d,r,z,mass\n0,1,0.5,0.3333333333333333\n2,3,1.5,0.6666666666666666\n"
    );
    assert_eq!(read(&marg), "x,value\n1,0.3333333333333333\n3,1\n");
}

#[test]
fn fit_reports_the_censored_tail() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cs.csv");
    fs::write(&input, "t1,j,z\n1,1,0.5\n2,2,\n").unwrap();
    let out = dir.path().join("m.csv");
    let o = markmle(&["fit", "--input", s(&input), "--output", s(&out), "--bound", "upper"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&out), "d,r,z,mass\n0,1,0.5,0.5\n2,inf,,0.5\n");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let bad = write("bad.csv", "t1,j,z\n1,1,0.5\nx,1,0.2\n");
    let o = markmle(&["fit", "--input", s(&bad), "--output", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let inv = write("inv.csv", "t1,t2,j,z\n2,1,3,\n");
    assert_eq!(code(&markmle(&["fit", "--input", s(&inv), "--output", s(&out)])), 3);
    assert_eq!(
        code(&markmle(&["fit", "--input", "/nonexistent/x.csv", "--output", s(&out)])),
        1
    );
    assert_eq!(
        code(&markmle(&["limit", "--model", "bogus", "--output", s(dir.path())])),
        2
    );
    assert_eq!(
        code(&markmle(&[
            "simulate",
            "--example",
            "9",
            "--n",
            "10",
            "--seed",
            "1",
            "--out-dir",
            s(dir.path())
        ])),
        2
    );
    assert_eq!(
        code(&markmle(&[
            "simulate",
            "--example",
            "1",
            "--n",
            "0",
            "--seed",
            "1",
            "--out-dir",
            s(dir.path())
        ])),
        3
    );
    assert_eq!(code(&markmle(&["fit"])), 2);
}

#[test]
fn limit_writes_surface_and_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let o = markmle(&[
        "limit",
        "--example",
        "1",
        "--grid-step",
        "0.05",
        "--output",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let marginal = read(&dir.path().join("marginal.csv"));
    let row = marginal.lines().find(|l| l.starts_with("0.25,")).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.0920569).abs() < 1e-6, "{v}");
    let surface = read(&dir.path().join("surface.csv"));
    assert!(surface.starts_with("x,y,value\n"));
    for line in surface.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[2] >= 0.0 && f[2] <= 1.0);
    }
}

#[test]
fn check_prints_the_report() {
    let o = markmle(&["check", "--example", "1"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("verdict: inconsistent"));
    assert!(text.contains("x,lambda_x_limit,lambda_x_true,gap"));
    let o = markmle(&["check", "--model", "uncensored"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("verdict: consistent_within_tol"));
}

#[test]
fn simulate_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = markmle(&[
        "simulate",
        "--example",
        "2",
        "--n",
        "300",
        "--seed",
        "7",
        "--out-dir",
        s(dir.path()),
        "--repaired",
        "--grid-k",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "dataset.csv",
        "marginal.csv",
        "surface.csv",
        "repaired.csv",
        "summary.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary = read(&dir.path().join("summary.csv"));
    assert!(summary
        .starts_with("example,n,seed,replication,events,sup_gap_limit,sup_gap_truth,sup_gap_repaired\n2,300,7,0,"));

    // the written dataset refits to the marginal the simulation reported
    let marg = dir.path().join("refit.csv");
    let masses = dir.path().join("masses.csv");
    let o = markmle(&[
        "fit",
        "--input",
        s(&dir.path().join("dataset.csv")),
        "--output",
        s(&masses),
        "--marginal",
        s(&marg),
    ]);
    assert_eq!(code(&o), 0);
    let steps: Vec<(f64, f64)> = read(&marg)
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    for line in read(&dir.path().join("marginal.csv")).lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let x: f64 = f[0].parse().unwrap();
        let expect = steps.iter().take_while(|(t, _)| *t <= x).last().map_or(0.0, |s| s.1);
        let got: f64 = f[1].parse().unwrap();
        assert!((got - expect).abs() < 1e-12, "x = {x}: {got} vs {expect}");
    }
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_markmle"))
            .args([
                "simulate",
                "--example",
                "4",
                "--n",
                "500",
                "--seed",
                "3",
                "--replications",
                "4",
                "--out-dir",
                s(dir.path()),
            ])
            .env("MARKMLE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        ["dataset.csv", "marginal.csv", "surface.csv", "summary.csv"].map(|f| read(&dir.path().join(f)))
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(one[3].lines().count(), 5);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_markmle"))
        .args(["check", "--example", "1"])
        .env("MARKMLE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn repair_covers_every_risk_column() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(
        code(&markmle(&[
            "simulate",
            "--example",
            "1",
            "--n",
            "400",
            "--seed",
            "5",
            "--out-dir",
            s(&sim)
        ])),
        0
    );
    let out = dir.path().join("r.csv");
    let o = markmle(&[
        "repair",
        "--input",
        s(&sim.join("dataset.csv")),
        "--grid-max",
        "4",
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iterations"));
    let text = read(&out);
    let mut last = [0.0f64; 22];
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let risk: usize = f[0].parse().unwrap();
        let v: f64 = f[2].parse().unwrap();
        assert!((1..=21).contains(&risk));
        assert!(v >= last[risk] - 1e-15, "risk {risk} not monotone");
        last[risk] = v;
    }
    let risks: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(risks.len(), 21);
    let total: f64 = last.iter().sum();
    assert!(total <= 1.0 + 1e-9);
    assert_eq!(
        code(&markmle(&[
            "repair",
            "--input",
            s(&sim.join("dataset.csv")),
            "--grid-max",
            "-1",
            "--output",
            s(&out)
        ])),
        2
    );
}

#[test]
fn dataset_csv_reparses_identically() {
    use markmle::simulate::{gen_example, ExampleSpec};
    let dir = tempfile::tempdir().unwrap();
    for id in 1..=4u8 {
        let out = dir.path().join(format!("ex{id}"));
        let o = markmle(&[
            "simulate",
            "--example",
            &id.to_string(),
            "--n",
            "2000",
            "--seed",
            "42",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(code(&o), 0);
        let back = markmle_cli::io::read_observations(&out.join("dataset.csv")).unwrap();
        assert_eq!(back, gen_example(&ExampleSpec::new(id, 2000, 42).unwrap()));
    }
}

#[test]
fn limit_window_and_model_selection() {
    let dir = tempfile::tempdir().unwrap();
    let o = markmle(&["limit", "--example", "1", "--tau", "0.45", "--output", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = markmle(&["limit", "--example", "1", "--tau", "0.6", "--output", s(dir.path())]);
    assert_eq!(code(&o), 4);
    assert!(!o.stderr.is_empty() && o.stdout.is_empty());
    assert_eq!(code(&markmle(&["limit", "--output", s(dir.path())])), 2);
    assert_eq!(
        code(&markmle(&[
            "limit",
            "--example",
            "1",
            "--model",
            "example1",
            "--output",
            s(dir.path())
        ])),
        2
    );
}
