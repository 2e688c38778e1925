use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3

[dataset.surrogate]
num_users = 30
num_items = 60

[experiment]
horizon = 5
slate_size = 1
checkpoints = [2, 5]

[experiment.protocol]
kind = "cold_start"
test_users = 5
train_fraction = 0.5

[experiment.propagation]
scheme = "lightgcn"
depth = 1
layer_weights = [0.5, 0.5]
teleport = 1.0

[experiment.pretrain]
dim = 4
max_epochs = 5
batch_size = 128
learning_rate = 0.5

[regret]
horizon = 40
replications = 3
checkpoints = [10, 40]

[regret.env]
num_items = 10
"#;

fn igcf() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_igcf"));
    for (k, _) in std::env::vars() {
        if k.starts_with("IGCF_") {
            c.env_remove(k);
        }
    }
    c
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    igcf()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn evaluate_without_model_source_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = run(&["evaluate"], &cfg, &dir.path().join("out"));
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("--snapshot"));
}

#[test]
fn pretrain_then_evaluate_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let pre = dir.path().join("pre");
    let o = run(&["pretrain"], &cfg, &pre);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "snapshot.bin",
        "embeddings.csv",
        "item_vectors.csv",
        "losses.csv",
        "id_map.csv",
        "pretrain_summary.json",
    ] {
        assert!(pre.join(f).exists(), "missing {f}");
    }
    let m = manifest(&pre);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seed"], 3);
    assert!(m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["hash"].as_str().unwrap().len() == 64));

    let snap = pre.join("snapshot.bin");
    let eval = dir.path().join("eval");
    let o = run(&["evaluate", "--snapshot", snap.to_str().unwrap()], &cfg, &eval);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(eval.join("interactions.csv")).unwrap();
    assert!(csv.starts_with("experiment,policy,user,round,slot,item,theta,reward"));
    // 4 default policies × 5 users × 5 rounds × 1 slot.
    assert_eq!(csv.lines().count(), 1 + 4 * 5 * 5);

    let o = igcf().arg("inspect-snapshot").arg(&snap).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["dim"], 4);
    assert_eq!(report["num_items"], 60);
}

#[test]
fn identical_runs_give_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["evaluate", "--pretrain"], &cfg, out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(a.join("metrics.json")).unwrap(),
        fs::read(b.join("metrics.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("interactions.csv")).unwrap(),
        fs::read(b.join("interactions.csv")).unwrap()
    );
}

#[test]
fn flags_and_env_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("o");
    let o = igcf()
        .env("IGCF_T", "3")
        .env("IGCF_POLICIES", "pop,random")
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ])
        .args(["evaluate", "--pretrain"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["experiment"]["horizon"], 3);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    let names: Vec<&str> = summary["policies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["policy"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["pop", "random"]);
}

#[test]
fn regret_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("r");
    let o = run(&["regret", "--policies", "oracle,ucb_true"], &cfg, &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let curve = fs::read_to_string(out.join("curves/ucb_true.csv")).unwrap();
    assert!(curve.starts_with("rep,t,inst_regret,cum_regret"));
    assert_eq!(curve.lines().count(), 1 + 3 * 40);
    let oracle = fs::read_to_string(out.join("curves/oracle.csv")).unwrap();
    assert!(oracle.lines().skip(1).all(|l| l.ends_with(",0,0")));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(out.join("regret_summary.json")).unwrap()).unwrap();
    assert!((s["reference_bound"].as_f64().unwrap() - 2097.046178540895).abs() < 1e-9);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    assert_eq!(code(&run(&["regret"], &cfg, &out)), 2);

    let cfg = write_config(dir.path(), "[dataset]\npath = \"/definitely/missing.dat\"\n");
    assert_eq!(code(&run(&["evaluate", "--pretrain"], &cfg, &out)), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "user,item,value\nu1,i1,not-a-number\n").unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "[dataset]\npath = {:?}\nformat = \"csv_triplets\"\n",
            bad.to_str().unwrap()
        ),
    );
    let o = run(&["evaluate", "--pretrain"], &cfg, &out);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("record 2"));
    assert_eq!(manifest(&out)["status"], "partial");

    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"not a snapshot").unwrap();
    assert_eq!(code(&igcf().arg("inspect-snapshot").arg(&junk).output().unwrap()), 3);

    let cfg = write_config(
        dir.path(),
        &TINY.replace("learning_rate = 0.5", "learning_rate = 1e12\ninit_scale = 1.0"),
    );
    let o = run(&["pretrain"], &cfg, &out);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn id_map_recovers_original_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratings.csv");
    let mut text = String::from("user,item,value,timestamp\n");
    let mut pairs = HashSet::new();
    for u in 0..12 {
        for i in 0..9 {
            if (u * 7 + i * 3) % 4 != 0 {
                text.push_str(&format!(
                    "user{u},item-{},{},{}\n",
                    i * 11,
                    1 + (u + i) % 5,
                    u * 100 + i
                ));
                pairs.insert((format!("user{u}"), format!("item-{}", i * 11)));
            }
        }
    }
    fs::write(&data, text).unwrap();
    let cfg = TINY.replace(
        "[dataset.surrogate]\nnum_users = 30\nnum_items = 60\n",
        &format!(
            "[dataset]\npath = {:?}\nformat = \"csv_triplets\"\n",
            data.to_str().unwrap()
        ),
    );
    let cfg = write_config(
        dir.path(),
        &cfg.replace("test_users = 5", "test_users = 2")
            .replace("horizon = 5", "horizon = 2"),
    );
    let out = dir.path().join("o");
    let o = run(&["pretrain"], &cfg, &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let map = fs::read_to_string(out.join("dataset_id_map.csv")).unwrap();
    let mut forward: HashMap<(String, String), usize> = HashMap::new();
    let mut seen: HashSet<(String, usize)> = HashSet::new();
    for line in map.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let idx: usize = f[2].parse().unwrap();
        assert!(
            forward.insert((f[0].into(), f[1].into()), idx).is_none(),
            "duplicate id {line}"
        );
        assert!(seen.insert((f[0].into(), idx)), "duplicate index {line}");
    }
    let users: HashSet<&String> = pairs.iter().map(|(u, _)| u).collect();
    let items: HashSet<&String> = pairs.iter().map(|(_, i)| i).collect();
    assert_eq!(forward.keys().filter(|(k, _)| k == "user").count(), users.len());
    assert_eq!(forward.keys().filter(|(k, _)| k == "item").count(), items.len());
    for u in &users {
        let idx = forward[&("user".to_string(), (*u).clone())];
        assert!(idx < users.len());
    }
    for i in &items {
        let idx = forward[&("item".to_string(), (*i).clone())];
        assert!(idx < items.len());
    }
}
