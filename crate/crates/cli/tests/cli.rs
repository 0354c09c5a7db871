use std::path::Path;
use std::process::{Command, Output};

fn clab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clab")).args(args).current_dir(dir).env_remove("CLAB_OUT").output().expect("spawn clab")
}

const SMALL: [&str; 8] = [
    "--override",
    "geometry.n_r=9",
    "--override",
    "geometry.n_theta=8",
    "--override",
    "geometry.n_t=9",
    "--override",
    "experiment.n_samples=6",
];

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL).collect()
}

#[test]
fn stability_reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = clab(&with_small(&["stability", "--seed", "5", "--out", out]), tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["stability.json", "ratios.csv", "ratios.svg"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let manifest = |d: &str| -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap()
    };
    let (ma, mb) = (manifest("a"), manifest("b"));
    assert_eq!(ma["digest"], mb["digest"]);
    assert_eq!(ma["seed"], 5);
    assert_eq!(ma["artifacts"].as_array().unwrap().len(), 3);

    let o = clab(&with_small(&["stability", "--seed", "6", "--out", "c"]), tmp.path());
    assert!(o.status.success());
    let c = std::fs::read(tmp.path().join("c/stability.json")).unwrap();
    assert_ne!(c, std::fs::read(tmp.path().join("a/stability.json")).unwrap());
}

#[test]
fn missing_config_exits_with_config_code_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = clab(&["stability", "--config", "does/not/exist.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does/not/exist.toml"));
}

#[test]
fn unknown_key_and_invalid_geometry_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = clab(&["forward", "--override", "geometry.nr=9"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let o = clab(&with_small(&["forward", "--out", "g", "--override", "geometry.r1=0.5"]), tmp.path());
    assert_eq!(o.status.code(), Some(5));
    let o = clab(&with_small(&["stability", "--out", "k", "--override", "experiment.k=0.01"]), tmp.path());
    assert_eq!(o.status.code(), Some(9));
}

#[test]
fn convergence_suite_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = clab(&["convergence", "--out", "conv"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("conv/convergence.csv")).unwrap();
    assert!(csv.starts_with("axis,scheme,resolution,error,slope"));
}

#[test]
fn positivity_fails_with_check_code_for_a_noncooperative_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    let args = with_small(&["positivity", "--out", "p", "--override", "coefficients.preset=coupled2"]);
    assert_eq!(clab(&args, tmp.path()).status.code(), Some(0));
    let mut bad = with_small(&["positivity", "--out", "q", "--override", "coefficients.preset=custom"]);
    bad.extend(["--override", "coefficients.components=[{}, {}]", "--override", "coefficients.coupling=[[0, 1], [0, 0]]"]);
    let o = clab(&bad, tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("q/positivity.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["report"]["pass"], false);
}

#[test]
fn out_dir_falls_back_to_env_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_clab"))
        .args(with_small(&["forward"]))
        .current_dir(tmp.path())
        .env("CLAB_OUT", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from-env/manifest.json").exists());
    assert!(clab(&with_small(&["forward"]), tmp.path()).status.success());
    assert!(tmp.path().join("clab-out/observation.svg").exists());
}

#[test]
fn run_dispatches_on_config_kind_with_a_carleman_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[experiment]\nkind = \"carleman\"\n[weights]\nlambda = [0.5, 1.0]\ns = [1.0, 2.0]\n").unwrap();
    let o = clab(&with_small(&["run", "--config", cfg.to_str().unwrap(), "--out", "r"]), tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scan = std::fs::read_to_string(tmp.path().join("r/carleman_scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 1 + 4);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let mut args = vec!["forward", "--config", path.to_str().unwrap(), "--out", "s"];
        args.extend(SMALL);
        let o = clab(&args, tmp.path());
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}
