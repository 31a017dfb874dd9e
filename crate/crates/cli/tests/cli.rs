use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nearpoints")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data row of a two-line CSV as (header, values).
fn row(o: &Output) -> Vec<(String, String)> {
    let text = stdout(o);
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let vals: Vec<&str> = lines.next().unwrap().split(',').collect();
    head.into_iter().zip(vals).map(|(h, v)| (h.to_string(), v.to_string())).collect()
}

fn field(r: &[(String, String)], key: &str) -> String {
    r.iter().find(|(h, _)| h == key).unwrap().1.clone()
}

#[test]
fn count_small_example() {
    let o = run(&["count", "--curve", "veronese", "--q", "10", "--delta", "0.25"]);
    assert!(o.status.success());
    let r = row(&o);
    assert_eq!(field(&r, "A_lo"), "3");
    assert_eq!(field(&r, "A_hi"), "3");
    let o = run(&["count", "--curve", "veronese", "--q", "10", "--delta", "0.25", "--exact"]);
    assert_eq!(field(&row(&o), "exact"), "true");
}

#[test]
fn count_rejects_bad_delta() {
    let o = run(&["count", "--curve", "veronese", "--q", "10", "--delta", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
}

#[test]
fn count_reads_curve_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("twisted.txt");
    fs::write(&path, "id = twisted\nf1_coeffs = 0, 0, 1\nf2_coeffs = 0, 0, 0, 1\n").unwrap();
    let o = run(&["count", "--curve", path.to_str().unwrap(), "--q", "10", "--delta", "0.25", "--exact"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&row(&o), "A_lo"), "3");
}

#[test]
fn sandwich_row() {
    let o = run(&["sandwich", "--curve", "veronese", "--q", "100000", "--delta", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("q,delta,B2_half,A_lo,A_hi,B1_threehalf,holds\n"));
    assert_eq!(field(&row(&o), "holds"), "true");
}

#[test]
fn selberg_coefficients() {
    let o = run(&["selberg", "--alpha", "-0.1", "--beta", "0.1", "--J", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,re_plus,im_plus,re_minus,im_minus");
    assert_eq!(lines.len(), 1 + 21);
    let b0: Vec<f64> = lines[11].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!((b0[0] - (0.2 + 1.0 / 11.0)).abs() < 1e-12);
    assert!((b0[2] - (0.2 - 1.0 / 11.0)).abs() < 1e-12);
}

#[test]
fn sublevel_commands() {
    let o = run(&["prop5", "--curve-planar", "x2", "--J", "8", "--lambda", "0.25"]);
    assert!(o.status.success());
    assert_eq!(field(&row(&o), "J"), "8");
    let o = run(&["measure", "--j1", "0", "--j2", "1", "--lambda", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let total: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((total - (0.1f64.sqrt() + 1.0 - 0.9f64.sqrt())).abs() < 1e-9);
}

#[test]
fn lemma_and_eterm_commands() {
    let o = run(&["lemma3", "--phi", "x2", "--K", "1,2", "--U", "10", "--delta", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&row(&o), "pairs"), "155");
    let o = run(&["lemma4", "--phi", "0, 0, 1", "--K", "1,2", "--U", "10", "--delta", "0.1", "--Lambda", "0.5"]);
    assert!(o.status.success());
    let o = run(&["eterm", "--curve", "veronese", "--q", "10000", "--delta", "0.2"]);
    assert!(o.status.success());
    let e: f64 = field(&row(&o), "E").parse().unwrap();
    assert!(e > 0.0);
}

#[test]
fn scan_fit_round_trip_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.cfg");
    fs::write(
        &cfg,
        "# small grid\ncurves = veronese\nq_list = 1000, 10000, 100000\ndelta_rule = power:1,0.15\ntiming = false\n",
    )
    .unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for (out, threads) in [(&out1, "1"), (&out2, "4")] {
        let o = run(&["--threads", threads, "scan", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(&out1).unwrap();
    assert_eq!(a, fs::read(&out2).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("curve,q,delta,A_lo,A_hi,B1,B2,E,q0,r,runtime_ms\n"));
    let o = run(&["fit", "--input", out1.to_str().unwrap(), "--x", "q", "--y", "A_lo"]);
    assert!(o.status.success());
    let slope: f64 = field(&row(&o), "slope").parse().unwrap();
    assert!(slope > 0.5 && slope < 0.9);
}

#[test]
fn scan_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "curves = veronese\ndelta_rule = fixed:0.1\ncolour = blue\n").unwrap();
    let o = run(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_cells() {
    let o = run(&["verify", "--curve", "veronese", "--rule", "power:1,0.15", "--q-list", "1000,10000"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
    // every cell skipped: still a clean exit with only the header
    let o = run(&["verify", "--curve", "veronese", "--rule", "theorem:5", "--q-list", "10000"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}
