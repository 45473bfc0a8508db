use std::path::Path;
use std::process::{Command, Output};

fn rabi_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rabi-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Header and data lines of a CSV, comment lines dropped.
fn csv_body(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn spectrum_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "spectrum".to_string(),
            "--model=h2".into(),
            "--delta=0.01".into(),
            "--epsilon=0.005".into(),
            "--eta=0".into(),
            "--axis=xx".into(),
            "--sweep=lambda=0:1:11".into(),
            "--k=4".into(),
            format!("--output={}", p.display()),
        ]
    };
    for p in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_rabi-lab")).args(args(p)).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(!text.contains('\r'));
    assert!(text.lines().next().unwrap().starts_with("# spec={\"n_spins\":2"));
    let (header, rows) = csv_body(&text);
    assert_eq!(header, ["lambda", "cutoff", "e0", "e1", "e2", "e3"]);
    assert_eq!(rows.len(), 11);
    // 17 significant digits
    assert_eq!(rows[0][2].split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
    let e0 = column(&header, &rows, "e0");
    assert!((e0[0] - (-0.015)).abs() < 1e-12);
    assert!(e0.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn parity_report_for_biased_pair() {
    let o = rabi_lab(&["parity", "--model", "h2b", "--eta", "0.1", "--lambda", "0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_body(&stdout(&o));
    assert_eq!(header, ["lambda", "cutoff", "h_frobenius", "commutator_frobenius", "commutator_spectral"]);
    let spectral = column(&header, &rows, "commutator_spectral")[0];
    assert!((spectral - 0.2).abs() < 1e-10);

    let o = rabi_lab(&["parity", "--model", "h2", "--lambda", "0.3", "--axis", "zz"]);
    let (header, rows) = csv_body(&stdout(&o));
    assert_eq!(column(&header, &rows, "commutator_frobenius")[0], 0.0);
}

#[test]
fn scaling_lower_branch_csv() {
    let o = rabi_lab(&["scaling", "--kappa", "0.01", "--delta", "0.01", "--epsilon", "0", "--beta-rel", "0.5:1.5:41"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let (header, rows) = csv_body(&text);
    assert_eq!(header.join(","), "kappa,beta,beta_over_beta_c,alpha,sigma_z_analytic,sigma_z_numeric,cutoff");
    assert_eq!(rows.len(), 41);
    let rel = column(&header, &rows, "beta_over_beta_c");
    let numeric = column(&header, &rows, "sigma_z_numeric");
    let mid = rel.iter().position(|&r| (r - 1.0).abs() < 1e-12).unwrap();
    assert!((numeric[mid] + 1.0 / 3f64.sqrt()).abs() < 0.02);
}

#[test]
fn negative_alpha_range_parses() {
    let o = rabi_lab(&["scaling", "--kappa", "0.001", "--alpha", "-0.3:0.3:3", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let alpha = v["rows"][0]["alpha"].as_f64().unwrap();
    assert!((alpha + 0.3).abs() < 1e-12);
}

#[test]
fn json_fields_match_csv_header() {
    let csv = rabi_lab(&["adiabatic", "--eta", "0.1", "--epsilon", "0.005", "--sweep", "lambda=0:1:3", "--exact"]);
    let json = rabi_lab(&[
        "adiabatic", "--eta", "0.1", "--epsilon", "0.005", "--sweep", "lambda=0:1:3", "--exact", "--format", "json",
    ]);
    assert!(json.status.success(), "{}", stderr(&json));
    let (header, rows) = csv_body(&stdout(&csv));
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    let first = v["rows"][0].as_object().unwrap();
    assert_eq!(first.keys().cloned().collect::<Vec<_>>(), header);
    assert_eq!(v["rows"].as_array().unwrap().len(), rows.len());
    assert_eq!(v["spec"]["ising_axis"], "xx");
    // λ = 0, η = 0.1 adiabatic values
    assert!((first["e1_minus"].as_f64().unwrap() + 0.1101249).abs() < 1e-6);
    assert!((first["e2_plus"].as_f64().unwrap() - 0.1111187).abs() < 1e-6);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    std::fs::write(
        &cfg,
        r#"
n_spins = 2
tunneling = [0.01, 0.01]
boson_freq = 1.0
coupling = 0.0
ising_edges = [[1, 2, 0.005]]
bias = [0.1, 0.0]
ising_axis = "xx"
cutoff = "auto"
k = 3

[grid]
parameter = "lambda"
start = 0.0
stop = 0.5
count = 3
"#,
    )
    .unwrap();
    let from_cfg = rabi_lab(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(from_cfg.status.success(), "{}", stderr(&from_cfg));
    let from_flags = rabi_lab(&[
        "spectrum", "--model", "h2b", "--epsilon", "0.005", "--eta", "0.1", "--sweep", "lambda=0:0.5:3", "--k", "3",
    ]);
    assert_eq!(stdout(&from_cfg), stdout(&from_flags));

    let fixed = rabi_lab(&["spectrum", "--config", cfg.to_str().unwrap(), "--cutoff", "30"]);
    let (header, rows) = csv_body(&stdout(&fixed));
    assert!(column(&header, &rows, "cutoff").iter().all(|&c| c == 30.0));
}

#[test]
fn ion_map_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ion.toml");
    let o = rabi_lab(&[
        "ion-map",
        "--rabi=0.02",
        "--detuning=-0.002",
        "--trap-freq=1.0",
        "--lamb-dicke=0.4",
        "--splitting=0.01",
        "--ion-coupling=0.005",
        &format!("--emit-config={}", cfg.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_body(&stdout(&o));
    assert_eq!(column(&header, &rows, "tunneling_1")[0], 0.01);
    assert_eq!(column(&header, &rows, "tunneling_2")[0], -0.01);
    assert_eq!(column(&header, &rows, "coupling")[0], 0.2);
    assert_eq!(column(&header, &rows, "bias_1")[0], 0.001);
    let spec = rabi_lab(&["spectrum", "--config", cfg.to_str().unwrap(), "--k", "2"]);
    assert!(spec.status.success(), "{}", stderr(&spec));
    assert!(stdout(&spec).contains("\"ising_axis\":\"zz\""));
}

#[test]
fn converge_table_marks_recommendation() {
    let o = rabi_lab(&["converge", "--model", "h2b", "--eta", "0.1", "--lambda", "0.5", "--cutoffs", "10,20,30,40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_body(&stdout(&o));
    assert_eq!(&header[..3], ["cutoff", "recommended", "e0"]);
    assert_eq!(column(&header, &rows, "recommended").iter().sum::<f64>(), 1.0);
}

#[test]
fn chain_scaling_without_closed_form() {
    let o = rabi_lab(&[
        "scaling", "--model", "chain", "--n-spins", "3", "--eta", "1e-4", "--epsilon", "0.001", "--beta", "1:2:3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_body(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[0].is_empty() && r[4].is_empty()));
    assert!(column(&header, &rows, "cutoff").iter().all(|&c| c >= 20.0));
    let o = rabi_lab(&["scaling", "--model", "chain", "--kappa", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
}

fn assert_error(o: &Output, exit: i32, code: &str) {
    assert_eq!(o.status.code(), Some(exit), "{}", stderr(o));
    let err = stderr(o);
    let last = err.lines().last().unwrap();
    assert!(last.starts_with(&format!("error: code={code}")), "{err}");
}

#[test]
fn validation_errors_exit_one() {
    assert_error(&rabi_lab(&["transmogrify"]), 1, "usage");
    assert_error(&rabi_lab(&["spectrum", "--sweep", "lambda=0:1:0"]), 1, "usage");
    assert_error(&rabi_lab(&["spectrum", "--model", "h2", "--eta", "0.1"]), 1, "invalid_parameter");
    assert_error(
        &rabi_lab(&["spectrum", "--model", "star", "--n-spins", "8", "--cutoff", "100"]),
        1,
        "dimension_limit",
    );
    assert_error(&rabi_lab(&["scaling", "--kappa", "0.01", "--delta", "0.01", "--epsilon", "0.01"]), 1, "degenerate_kappa");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_spins = \"two\"\n").unwrap();
    assert_error(&rabi_lab(&["spectrum", "--config", bad.to_str().unwrap()]), 1, "config");
    assert_error(&rabi_lab(&["spectrum", "--config", "/nonexistent.toml"]), 1, "config");
}

#[test]
fn numerical_failures_exit_two() {
    assert_error(
        &rabi_lab(&["converge", "--model", "h2b", "--eta", "0.1", "--lambda", "2", "--cutoffs", "5,6"]),
        2,
        "cutoff_not_converged",
    );
}

#[test]
fn verify_hooks_turn_criteria_red() {
    let o = rabi_lab(&["verify", "--criteria", "8,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let o = rabi_lab(&["verify", "--criteria", "4", "--inject-d-sign-error"]);
    assert_error(&o, 2, "acceptance_failed");
    assert!(stdout(&o).starts_with("FAIL  4"));

    let o = rabi_lab(&["verify", "--criteria", "4", "--force-cutoff", "2:5"]);
    assert_error(&o, 2, "acceptance_failed");
}
