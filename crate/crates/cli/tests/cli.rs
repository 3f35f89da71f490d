use std::path::Path;
use std::process::{Command, Output};

fn otfs_sim(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs-sim"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn capacity_table_rows_match_formula() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cap.json",
        r#"{"experiment": "capacity_table",
            "frame": [{"kind": "RCP", "M": 32, "N": 16, "Lcp": 5}, {"kind": "FCP", "M": 32, "N": 16, "Lcp": 5}],
            "snr_db": [0, 10]}"#,
    );
    let out = otfs_sim(&["capacity_table"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut rd = csv::Reader::from_path(dir.path().join("capacity_table.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        [
            "config",
            "M",
            "N",
            "Lcp",
            "Lzs",
            "snr_db",
            "capacity",
            "spectral_eff_factor"
        ]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let want = [
        ("RCP", "0", 512.0 / 517.0),
        ("RCP", "10", 512.0 / 517.0 * 11f64.log2()),
        ("FCP", "0", 32.0 / 37.0),
        ("FCP", "10", 32.0 / 37.0 * 11f64.log2()),
    ];
    for (row, (kind, snr, cap)) in rows.iter().zip(want) {
        assert_eq!(&row[0], kind);
        assert_eq!(&row[5], snr);
        let got: f64 = row[6].parse().unwrap();
        assert!((got - cap).abs() <= 1e-15 * cap, "{kind} {snr}: {got} vs {cap}");
    }

    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("capacity_table.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["experiment"], "capacity_table");
    assert!(side["library_version"].is_string());
    assert_eq!(side["columns"].as_array().unwrap().len(), 8);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ber.json",
        r#"{"experiment": "ber_sweep",
            "frame": {"kind": "RZP", "M": 8, "N": 4, "Lcp": 2},
            "channel": {"random": {"L": 2, "k_max": 1, "max_delay": 2}},
            "snr_db": [4], "detector": "MMSE", "trials": 20, "master_seed": 1}"#,
    );
    let read = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(otfs_sim(&["ber_sweep", "--seed", seed], &cfg, &out).status.success());
        std::fs::read_to_string(out.join("ber_sweep.csv")).unwrap()
    };
    let a = read("7", "a");
    let b = read("8", "b");
    assert!(a.lines().nth(1).unwrap().ends_with(",20,7"));
    assert!(b.lines().nth(1).unwrap().ends_with(",20,8"));
    assert_eq!(a, read("7", "c"));
}

#[test]
fn schema_errors_exit_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "bad.json",
        r#"{"experiment": "power_table", "frame": {"kind": "RCP", "M": 4, "N": 4, "Lcp": 1}, "snr": [1]}"#,
    );
    let out = otfs_sim(&["power_table"], &unknown, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr"));

    let ok = write(
        dir.path(),
        "ok.json",
        r#"{"experiment": "power_table", "frame": {"kind": "RCP", "M": 4, "N": 4, "Lcp": 1}}"#,
    );
    let out = otfs_sim(&["capacity_table"], &ok, dir.path());
    assert_eq!(out.status.code(), Some(2));

    let long_delay = write(
        dir.path(),
        "delay.json",
        r#"{"experiment": "ber_sweep", "frame": {"kind": "RCP", "M": 8, "N": 4, "Lcp": 1},
            "channel": {"random": {"L": 2, "k_max": 1, "max_delay": 3}}, "snr_db": [0]}"#,
    );
    let out = otfs_sim(&["ber_sweep"], &long_delay, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("ber_sweep.csv").exists());
}
