use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slater_forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slater-forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gs_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gs.toml",
        "N = 2\nL_range = [3, 5]\nU_list = [1.0]\n",
    );
    let out = dir.path().join("out");
    let o = slater_forge(&[
        "gs-sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--restarts",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("gs_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"restarts\": 2"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gs_sweep.csv"));
}

#[test]
fn seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "q.toml",
        "kind = \"quench_fidelity\"\nL = 7\nN = 2\nL_i_list = [3]\nt_grid = [1.0, 2.0]\nM_list = [3]\n",
    );
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = slater_forge(&[
            "quench-fidelity",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
            "--restarts",
            "2",
        ]);
        assert!(o.status.success());
        fs::read(out.join("quench_fidelity.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let wrong_kind = write(dir.path(), "a.toml", "kind = \"slow_tail\"\n");
    let unknown_key = write(dir.path(), "b.toml", "N = 2\nbogus = 1\n");
    let bad_m = write(dir.path(), "c.toml", "N = 3\nL_range = [5]\nM_list = [2]\n");
    for cfg in [&wrong_kind, &unknown_key, &bad_m] {
        let o = slater_forge(&["gs-sweep", "--config", cfg]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
    }
    let o = slater_forge(&["gs-sweep", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = slater_forge(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_reads_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    // two fermions on four sites: (|01> + |23>) / sqrt 2
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dump = format!(
        "# d=4 n=2 count=6\n0 0,1 {s:.16e} 0\n1 0,2 0 0\n2 0,3 0 0\n3 1,2 0 0\n4 1,3 0 0\n5 2,3 {s:.16e} 0\n"
    );
    write(dir.path(), "psi.txt", &dump);
    let cfg = write(
        dir.path(),
        "opt.toml",
        "wavefunction = \"psi.txt\"\nM_list = [2, 4]\n",
    );
    let out = dir.path().join("out");
    let o = slater_forge(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("optimize_summary.csv")).unwrap();
    let values: Vec<f64> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((values[0] - 0.5).abs() < 1e-10);
    assert!((values[1] - 1.0).abs() < 1e-12);
    assert!(out.join("orbitals_M2.txt").exists() && out.join("amplitudes_M4.csv").exists());
}

#[test]
fn shipped_configs_are_valid() {
    use slater_forge_core::experiment::ExperimentSpec;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let spec = ExperimentSpec::from_file(&path).unwrap();
        spec.resolved().validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 7);
}
