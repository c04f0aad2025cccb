use std::path::Path;
use std::process::{Command, Output};

fn rbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbd"))
        .args(args)
        .env_remove("RBD_DATA_DIR")
        .output()
        .expect("run rbd")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "data.source=synthetic\ndata.synthetic.dim=8\ndata.synthetic.classes=3\n\
data.synthetic.train=120\ndata.synthetic.val=30\nnetwork.widths=8,6,3\noptimizer.d=6\n";

#[test]
fn validate_demands_a_learning_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", "optimizer.rule=rbd\n");
    let o = rbd(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("optimizer.learning_rate"), "{}", stderr(&o));
}

#[test]
fn validate_prints_every_resolved_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", "optimizer.learning_rate=-2\n");
    let o = rbd(&["validate", &cfg, "--override", "optimizer.d=10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("optimizer.d=10"));
    assert!(out.contains("seed.basis=2"));
    assert!(out.contains("optimizer.scheme=single"));
}

#[test]
fn unknown_keys_get_suggestions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.cfg", "optimizer.learning_rate=-3\nmomntum=0.9\noptimizer.rulee=sgd\n");
    let o = rbd(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 2") && e.contains("momentum"), "{e}");
    assert!(e.contains("`optimizer.rule`"), "{e}");
}

#[test]
fn unknown_suite_lists_the_valid_ones() {
    let o = rbd(&["suite", "tabel1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for s in ["table1", "table2", "hybrid", "compartments", "distributed", "ortho", "landscape", "dimscan"] {
        assert!(e.contains(s), "{e}");
    }
}

#[test]
fn mnist_without_a_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = rbd(&["train", "--override", "optimizer.learning_rate=-3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("RBD_DATA_DIR"));
}

#[test]
fn divergence_exits_with_the_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &format!("{SMALL}optimizer.rule=sgd\noptimizer.learning_rate=1000\n"));
    let out = dir.path().join("o");
    let o = rbd(&["train", "--config", &cfg, "--epochs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn train_writes_self_describing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.cfg", &format!("{SMALL}optimizer.rule=rbd\noptimizer.learning_rate=-2\n"));
    let out = dir.path().join("run");
    let o = rbd(&["train", "--config", &cfg, "--epochs", "3", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.contains("# seed.basis=7"));
    assert!(traj.contains("# optimizer.learning_rate=-2"));
    let rows: Vec<&str> = traj.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("epoch,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["epochs"], 3);
    assert!(out.join("checkpoint.bin").exists());
}

#[test]
fn sweep_and_suite_run_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.cfg",
        &format!("{SMALL}optimizer.rule=sgd\nsweep.max_exponent=0\nsweep.min_exponent=-4\nsuite.dims=10,100\nsuite.pairs=10\n"),
    );
    let out = dir.path().join("sweep");
    let o = rbd(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("best exponent"));
    assert!(out.join("sweep.csv").exists());

    let out = dir.path().join("ortho");
    let o = rbd(&["suite", "ortho", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("ortho.csv").exists());
    assert!(out.join("manifest.json").exists());
}
