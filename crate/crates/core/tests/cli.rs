use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use ndarray::Array2;
use semrobo::cli::{main_with_args, EXIT_OK, EXIT_USAGE};
use semrobo::neural::{to_idx_bytes, LabeledImageSet, MnistPaths, IMAGE_PIXELS};
use semrobo::rng::SimRng;
use semrobo::world::ScenarioConfig;
use sha2::{Digest, Sha256};

fn template_digits(n: usize, seed: u64) -> LabeledImageSet {
    let mut t = SimRng::new(1);
    let templates: Vec<Vec<f64>> =
        (0..10).map(|_| (0..IMAGE_PIXELS).map(|_| if t.next_f64() < 0.2 { 1.0 } else { 0.0 }).collect()).collect();
    let mut rng = SimRng::new(seed);
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let images = Array2::from_shape_fn((n, IMAGE_PIXELS), |(i, p)| {
        (templates[labels[i] as usize][p] + rng.uniform(-0.1, 0.1)).clamp(0.0, 1.0)
    });
    LabeledImageSet::new(images, labels).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn data(&self) -> PathBuf {
        self.root.join("mnist")
    }
    fn vae(&self) -> PathBuf {
        self.root.join("vae.semw")
    }
    fn classifier(&self) -> PathBuf {
        self.root.join("cls.semw")
    }
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Synthetic IDX files plus small trained models, built once.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let paths = MnistPaths::in_dir(&root.join("mnist"));
        fs::create_dir_all(root.join("mnist")).unwrap();
        for (set, img, lbl) in [
            (template_digits(300, 2), &paths.train_images, &paths.train_labels),
            (template_digits(60, 3), &paths.test_images, &paths.test_labels),
        ] {
            let (i, l) = to_idx_bytes(&set);
            fs::write(img, i).unwrap();
            fs::write(lbl, l).unwrap();
        }
        let f = Fixture { _dir: dir, root };
        for (kind, out) in [("classifier", f.classifier()), ("vae", f.vae())] {
            let code = main_with_args([
                "semrobo",
                "train",
                "--kind",
                kind,
                "--epochs",
                "1",
                "--data-dir",
                &s(&f.data()),
                "--out",
                &s(&out),
            ]);
            assert_eq!(code, EXIT_OK, "training {kind}");
        }
        f
    })
}

fn scenario_args(f: &Fixture, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "--weights-vae".into(),
        s(&f.vae()),
        "--weights-classifier".into(),
        s(&f.classifier()),
        "--data-dir".into(),
        s(&f.data()),
        "--out".into(),
        s(out),
    ];
    v.extend(extra.iter().map(|x| x.to_string()));
    v
}

fn cli(cmd: &str, rest: Vec<String>) -> i32 {
    let mut args = vec!["semrobo".to_string(), cmd.to_string()];
    args.extend(rest);
    main_with_args(args)
}

#[test]
fn train_writes_weights_and_history() {
    let f = fixture();
    assert!(f.classifier().exists() && f.vae().exists());
    let hist = fs::read_to_string(format!("{}.loss.csv", s(&f.vae()))).unwrap();
    assert!(hist.starts_with("epoch,total,recon,kl\n1,"));
}

#[test]
fn train_is_reproducible() {
    let f = fixture();
    let out = f.root.join("again.semw");
    let code = main_with_args([
        "semrobo",
        "train",
        "--kind",
        "classifier",
        "--epochs",
        "1",
        "--data-dir",
        &s(&f.data()),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(fs::read(&out).unwrap(), fs::read(f.classifier()).unwrap());
}

#[test]
fn train_input_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.semw");
    let code = main_with_args([
        "semrobo",
        "train",
        "--kind",
        "vae",
        "--data-dir",
        &s(&dir.path().join("nope")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!out.exists());
    let code = main_with_args([
        "semrobo",
        "train",
        "--kind",
        "classifier",
        "--epochs",
        "0",
        "--data-dir",
        &s(&fixture().data()),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!out.exists());
}

#[test]
fn run_is_deterministic_and_writes_manifest() {
    let f = fixture();
    let a = f.root.join("run_a");
    let b = f.root.join("run_b");
    for out in [&a, &b] {
        assert_eq!(cli("run", scenario_args(f, out, &["--seed", "7", "--branch", "semcom"])), EXIT_OK);
    }
    let csv = "metrics_seed7_SemCom.csv";
    assert_eq!(fs::read(a.join(csv)).unwrap(), fs::read(b.join(csv)).unwrap());
    assert!(a.join("summary_seed7_SemCom.json").exists());
    assert!(a.join("cumulative_seed7_SemCom.svg").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    let vae_hash = hex::encode(Sha256::digest(fs::read(f.vae()).unwrap()));
    assert_eq!(manifest["weights_vae"]["sha256"], vae_hash.as_str());
    assert_eq!(manifest["effective_config"]["seed"], 7);
    assert_eq!(manifest["data"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_writes_artifacts() {
    let f = fixture();
    let out = f.root.join("cmp");
    assert_eq!(cli("compare", scenario_args(f, &out, &["--sweep", "5,10"])), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("compare_seed1.json")).unwrap()).unwrap();
    assert_eq!(report["semcom_bits"], 3200);
    assert_eq!(report["raw_bits"], 125_440);
    assert_eq!(report["ratio"], 39.2);
    for name in [
        "metrics_seed1_SemCom.csv",
        "metrics_seed1_Raw.csv",
        "cumulative_seed1.svg",
        "sweep_seed1.csv",
        "sweep_seed1.svg",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(
        fs::read_to_string(out.join("sweep_seed1.csv")).unwrap(),
        "n_devices,semcom_bits,raw_bits\n5,800,31360\n10,1600,62720\n"
    );
}

#[test]
fn bad_configs_exit_2() {
    let f = fixture();
    let bad = f.root.join("bad.json");
    fs::write(&bad, "{\"width_m\": 100,,}").unwrap();
    let out = f.root.join("bad_out");
    assert_eq!(cli("run", scenario_args(f, &out, &["--config", &s(&bad), "--branch", "raw"])), EXIT_USAGE);

    let invalid = f.root.join("invalid.json");
    let cfg = ScenarioConfig { n_robots: 0, ..Default::default() };
    fs::write(&invalid, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cli("compare", scenario_args(f, &out, &["--config", &s(&invalid)])), EXIT_USAGE);

    let missing = f.root.join("missing.semw");
    let mut args = scenario_args(f, &out, &["--branch", "raw"]);
    args[1] = s(&missing);
    assert_eq!(cli("run", args), EXIT_USAGE);
}

#[test]
fn binary_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"width_m\": 100,\n  \"height_m\": ]\n}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_semrobo")).args(["agent-plan", "--config", &s(&bad)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn agent_plan_offline() {
    let dir = tempfile::tempdir().unwrap();
    let applied = dir.path().join("applied.json");
    for backend in ["rule", "llm"] {
        let out = Command::new(env!("CARGO_BIN_EXE_semrobo"))
            .args(["agent-plan", "--backend", backend, "--apply", &s(&applied)])
            .env_remove("AGENT_LLM_BASE_URL")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["plan"]["recommendation"]["num_robots"], 4);
        assert_eq!(v["commands"]["task_commands"][0], "deploy 4 robots, nearest-first");
        assert_eq!(v["commands"]["connectivity_commands"][0], "branch = SemCom");
        let cfg = ScenarioConfig::from_json_str(&fs::read_to_string(&applied).unwrap()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_robots, 4);
    }
}

#[test]
fn agent_plan_unreachable_endpoint_exits_0() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = Command::new(env!("CARGO_BIN_EXE_semrobo"))
        .args(["agent-plan", "--backend", "llm"])
        .env("AGENT_LLM_BASE_URL", format!("http://127.0.0.1:{port}"))
        .env("AGENT_LLM_API_KEY", "sk-never-printed")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["plan"]["source"], "RuleFallback");
    assert!(!String::from_utf8_lossy(&out.stderr).contains("sk-never-printed"));
}
