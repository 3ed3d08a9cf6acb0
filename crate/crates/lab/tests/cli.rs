use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rwre_lab::record::plotdata_csv;
use rwre_lab::RunRecord;

fn rwre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwre")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn single_record(root: &Path) -> (std::path::PathBuf, RunRecord) {
    let dirs: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    let text = fs::read_to_string(dirs[0].join("record.json")).unwrap();
    (dirs[0].clone(), serde_json::from_str(&text).unwrap())
}

#[test]
fn velocity_run_writes_a_consistent_record() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "v.toml", "dim = 1\nalphas = 3, 1\nseed = 7\nsteps = 2000\nruns = 20\n");
    let out = tmp.path().join("runs");
    let res = rwre(&["velocity", "--manifest", &manifest, "--workers", "2", "--out", out.to_str().unwrap()]);
    assert!(res.status.code().is_some_and(|c| c == 0 || c == 1), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("theorem1") && stdout.contains("record:"));

    let (dir, record) = single_record(&out);
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with(&format!("velocity-{}", &record.digest[..16])));
    assert_eq!(record.schema, "rwre.run.v1");
    assert_eq!(fs::read_to_string(dir.join("metrics.csv")).unwrap(), plotdata_csv(&record.metrics));
    for v in &record.verdicts {
        assert_eq!(v.recompute(&record.metrics), Some(v.passed), "{}", v.name);
    }
    assert_eq!(record.passed, record.verdicts.iter().all(|v| v.passed));
    assert_eq!(res.status.code(), Some(if record.passed { 0 } else { 1 }));
    let names: Vec<_> = record.metrics.iter().map(|m| m.name.as_str()).collect();
    assert!(names.contains(&"v_1") && names.contains(&"v_exact"));
}

#[test]
fn rerun_is_appended_not_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "e.toml", "dim = 2\nalphas = 1, 1, 1, 1.5\nseed = 3\n");
    let out = tmp.path().join("runs");
    for _ in 0..2 {
        let res = rwre(&["expansion", "--manifest", &manifest, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let mut names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert_eq!(names[1], format!("{}-2", names[0]));
    let record: RunRecord =
        serde_json::from_str(&fs::read_to_string(out.join(&names[0]).join("record.json")).unwrap()).unwrap();
    assert!(record.metrics.iter().any(|m| m.name == "smallness"));
}

#[test]
fn invalid_manifest_reports_every_field_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "bad.toml", "dim = 1\nalphas = 3, x\nseed = 1\nbogus = 4\nsteps 10\n");
    let res = rwre(&["velocity", "--manifest", &manifest, "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8(res.stderr).unwrap();
    for needle in ["alphas", "bogus", "line 5"] {
        assert!(err.contains(needle), "missing {needle:?} in {err}");
    }
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn missing_requirements_are_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "k.toml", "dim = 1\nalphas = 2, 1\nseed = 1\nradius = 1\n");
    let res = rwre(&["kalikow", "--manifest", &manifest, "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("delta") && err.contains("samples"), "{err}");
}

#[test]
fn green_flags_override_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "g.toml", "dim = 1\nalphas = 3, 1\nseed = 5\nmode = fourier\n");
    let out = tmp.path().join("runs");
    let res = rwre(&[
        "green", "--manifest", &manifest, "--mode", "killed", "--radius", "2", "--delta", "0.9", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let (_, record) = single_record(&out);
    assert!(record.manifest.contains("mode = killed"));
    let r = record.metrics.iter().find(|m| m.name == "return_identity_residual").unwrap();
    assert!(r.value <= 1e-10);
}

#[test]
fn dump_env_rows_are_probability_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write(tmp.path(), "d.toml", "dim = 2\nalphas = 1, 2, 3, 4\nseed = 9\n");
    let csv = tmp.path().join("env.csv");
    let res = rwre(&["dump-env", "--manifest", &manifest, "--radius", "1", "--out", csv.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert_eq!(r.len(), header.len());
        let probs = &r[r.len() - 4..];
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let again = rwre(&["dump-env", "--manifest", &manifest, "--radius", "1"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    let res = rwre(&["dump-env", "--manifest", &manifest]);
    assert_eq!(res.status.code(), Some(2));
}
