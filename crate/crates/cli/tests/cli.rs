use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn twotier(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twotier"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_SWEEP: &str = "\
# two quick scenarios
distance_points = 4
sweep_scenarios = 22/50/500, 22/53/500
trials = 2000
configs = 100
";

#[test]
fn unknown_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "femtocells_per_cell = 3\n");
    let out = twotier(&["--config", &cfg, "outage-sweep"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key"), "{err}");
    assert!(err.contains("avg_femtocells"), "accepted keys listed: {err}");
}

#[test]
fn invalid_values_exit_2() {
    let dir = TempDir::new().unwrap();
    for body in ["alpha = four\n", "r_femto_m = 600\n", "eps_macro = 1.5\n", "rings\n"] {
        let cfg = write_config(dir.path(), body);
        let out = twotier(&[
            "--config",
            &cfg,
            "--out",
            dir.path().to_str().unwrap(),
            "capacity-sweep",
        ]);
        assert_eq!(out.status.code(), Some(2), "{body:?}");
    }
}

#[test]
fn missing_config_file_exits_2() {
    let out = twotier(&["--config", "/nonexistent/run.cfg", "validate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outage_sweep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = twotier(&["--config", &cfg, "--out", out_dir.to_str().unwrap(), "outage-sweep"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(fs::read_to_string(out_dir.join("outage_sweep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);

    let mut lines = files[0].lines();
    assert_eq!(
        lines.next(),
        Some("tier,distance_m,P_f_dbm,P_m_dbm,R_m,analytic_q,simulated_q,sim_stderr")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 4);
    assert_eq!(rows[0][..5], ["mue", "50", "22", "50", "500"]);
    assert_eq!(rows[4][0], "fue");
    assert_eq!(rows[8][3], "53");
    for r in &rows {
        for v in &r[5..7] {
            let q: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&q));
        }
    }
}

#[test]
fn seed_changes_simulation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = dir.path().join(seed);
        let out = twotier(&[
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out_dir.to_str().unwrap(),
            "outage-sweep",
        ]);
        assert!(out.status.success());
        files.push(fs::read_to_string(out_dir.join("outage_sweep.csv")).unwrap());
    }
    assert_ne!(files[0], files[1]);
}

#[test]
fn capacity_sweep_writes_both_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "capacity_femtocells = 0, 10, 20\npositions = 4\ncapacity_configs = 20\n",
    );
    let out = twotier(&[
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "capacity-sweep",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("eps_macro 0.45"));

    let sweep = fs::read_to_string(dir.path().join("capacity_sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(
        lines.next(),
        Some("avg_femtocells,spatial_throughput,tc_eps045,tc_eps0475")
    );
    let firsts: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(firsts, ["0", "10", "20"]);

    let curves = fs::read_to_string(dir.path().join("capacity_outage_curves.csv")).unwrap();
    assert!(curves.starts_with("avg_femtocells,q_macro_raw,q_macro,q_femto_raw,q_femto\n"));
    assert_eq!(curves.lines().count(), 4);
}

#[test]
fn fit_ratios_reproduces_frozen_surrogates() {
    let dir = TempDir::new().unwrap();
    let out = twotier(&["--out", dir.path().to_str().unwrap(), "fit-ratios"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fits = fs::read_to_string(dir.path().join("ratio_fits.csv")).unwrap();
    let rows: Vec<Vec<&str>> = fits.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let frozen = twotier::ratio_approx::SurrogateSet::fitted_defaults();
    for (row, kind) in rows.iter().zip(twotier_cli::commands::FITTED_KINDS) {
        assert_eq!(row[0], kind.label());
        let p = frozen.get(kind);
        assert!((row[5].parse::<f64>().unwrap() - p.m).abs() < 1e-8);
        assert!((row[6].parse::<f64>().unwrap() - p.s).abs() < 1e-8);
    }
    for slug in ["rayleigh_over_rayleigh", "lognormal_over_rayleigh"] {
        let pdf = fs::read_to_string(dir.path().join(format!("ratio_pdf_{slug}.csv"))).unwrap();
        assert!(pdf.starts_with("z,exact,moment_matched,fitted\n"), "{slug}");
    }
}

#[test]
fn low_precision_validation_warns_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = twotier(&["--trials", "100", "--out", dir.path().to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("WARN outage_mue")), "{text}");
    assert!(!text.lines().any(|l| l.starts_with("FAIL")), "{text}");
    assert_eq!(
        fs::read_to_string(dir.path().join("validate_report.txt")).unwrap(),
        text
    );
}

#[test]
fn uncorrelated_table_fails_validation_with_exit_3() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("zeros.csv");
    let mut csv = String::from("pair,delta\n");
    for pair in [
        "psi/psi0|psi/psi0",
        "psi/psi0|phi/psi0",
        "phi/psi0|phi/psi0",
        "psi/phi0|psi/phi0",
        "psi/phi0|phi/phi0",
        "phi/phi0|phi/phi0",
    ] {
        csv.push_str(&format!("{pair},0\n"));
    }
    fs::write(&table, csv).unwrap();
    let cfg = write_config(dir.path(), &format!("correlation_csv = {}\n", table.display()));
    let out = twotier(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL fw_ccdf_two_rayleigh")));
}
