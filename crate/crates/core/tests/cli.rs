use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sepval(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepval"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn runs_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["random-lqr", "--s", "30", "--bands", "1,2"],
        &["allen-cahn-cost", "--s", "20", "--horizon", "2", "--bands", "2,5"],
        &[
            "export-dataset",
            "--model",
            "random",
            "--s",
            "6",
            "--j",
            "2",
            "--l",
            "1",
            "--sampler",
            "uniform",
            "--count",
            "25",
        ],
        &["a1-check", "--s", "5"],
    ];
    for args in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(sepval(a.path(), args).status.success(), "{args:?}");
        assert!(sepval(b.path(), args).status.success(), "{args:?}");
        let fa = csv_files(a.path());
        assert!(!fa.is_empty());
        for f in fa {
            let g = b.path().join(f.file_name().unwrap());
            assert_eq!(
                std::fs::read(&f).unwrap(),
                std::fs::read(&g).unwrap(),
                "{}",
                f.display()
            );
        }
    }
}

#[test]
fn every_csv_has_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = sepval(dir.path(), &["heat", "--s", "8"]);
    assert!(out.status.success());
    let files = csv_files(dir.path());
    assert!(files.iter().any(|f| f.ends_with("decay.csv")));
    assert!(files.iter().any(|f| f.ends_with("fit.csv")));
    assert!(dir.path().join("P.txt").exists());
    for f in files {
        let side = f.with_extension("json");
        let meta: serde_json::Value = serde_json::from_str(&read(&side)).unwrap();
        assert_eq!(meta["experiment"], "heat");
        assert_eq!(meta["parameters"]["s"], 8);
        assert_eq!(meta["file"], f.file_name().unwrap().to_str().unwrap());
        let text = read(&f);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }
}

#[test]
fn random_lqr_fit_has_one_row_per_band() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sepval(dir.path(), &["random-lqr", "--s", "40"]).status.success());
    let fit = read(&dir.path().join("fit.csv"));
    let lines: Vec<&str> = fit.lines().collect();
    assert_eq!(lines.len(), 5, "{fit}");
    for r in [1, 2, 4, 8] {
        assert!(dir.path().join(format!("decay_r{r}.csv")).exists());
    }
}

#[test]
fn cost_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = sepval(dir.path(), &["allen-cahn-cost", "--s", "20", "--horizon", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(&dir.path().join("cost_error.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "r,err_sigma_1e-4,err_sigma_1e-3");
    let rows: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["2", "5", "10", "20"]);
    assert!(dir.path().join("trajectory_sigma_1e-4.csv").exists());
}

#[test]
fn config_file_values_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "experiment = \"heat\"\ns = 6\nc = 2.0\n").unwrap();
    let out_dir = dir.path().join("o");
    let cfg_s = cfg.to_str().unwrap();
    assert!(sepval(&out_dir, &["--config", cfg_s, "heat"]).status.success());
    let meta: serde_json::Value = serde_json::from_str(&read(&out_dir.join("decay.json"))).unwrap();
    assert_eq!(meta["parameters"]["s"], 6);
    assert_eq!(meta["parameters"]["c"], 2.0);
    assert_eq!(read(&out_dir.join("decay.csv")).lines().count(), 7);

    assert!(sepval(&out_dir, &["--config", cfg_s, "heat", "--s", "9"])
        .status
        .success());
    let meta: serde_json::Value = serde_json::from_str(&read(&out_dir.join("decay.json"))).unwrap();
    assert_eq!(meta["parameters"]["s"], 9);
    assert_eq!(meta["parameters"]["c"], 2.0);

    let wrong = sepval(&out_dir, &["--config", cfg_s, "random-lqr"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "s = 6\nsteps = 3\n").unwrap();
    let out = sepval(dir.path(), &["--config", cfg.to_str().unwrap(), "heat"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    assert_eq!(sepval(dir.path(), &["heat", "--s", "1"]).status.code(), Some(2));
    assert_eq!(sepval(dir.path(), &["heat", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        sepval(dir.path(), &["random-lqr", "--s", "4", "--bands", "4"])
            .status
            .code(),
        Some(2)
    );

    let out = sepval(dir.path(), &["--max-iter", "1", "random-lqr", "--s", "30"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    assert_eq!(sepval(&file, &["heat"]).status.code(), Some(4));
    let missing = dir.path().join("nope.toml");
    let out = sepval(dir.path(), &["--config", missing.to_str().unwrap(), "heat"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn plot_script_on_request() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sepval(dir.path(), &["--plot", "graph-demo", "--s", "4"])
        .status
        .success());
    assert!(dir.path().join("distances.csv").exists());
    assert!(dir.path().join("neighborhoods.csv").exists());
    assert!(dir.path().join("plot.gp").exists());
}
