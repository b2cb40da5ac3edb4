use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn proxops(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxops"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = proxops(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

#[test]
fn gen_configs_writes_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["gen-configs", "--scale", "desk", "--out", "grid"]);
    let files = files_in(&tmp.path().join("grid/configs"));
    let configs = files.iter().filter(|p| p.extension().is_some_and(|e| e == "json"));
    assert_eq!(configs.count(), 46);
    let note = std::fs::read_to_string(tmp.path().join("grid/configs/grid_note.txt")).unwrap();
    assert!(note.contains("460"));
}

#[test]
fn train_evaluate_report_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let stdout = ok(
        dir,
        &[
            "train", "--task", "inspection", "--space", "discrete", "--umax", "1.0", "--choices", "3",
            "--out", "runs", "--seed", "0", "--seed", "1", "--timesteps", "4096",
            "--eval-interval", "4096", "--cases", "3",
        ],
    );
    assert_eq!(stdout.lines().count(), 2);
    let config_dirs = files_in(&dir.join("runs"));
    assert_eq!(config_dirs.len(), 1);
    let run = config_dirs[0].join("seed_0");
    for f in ["config.json", "eval_log.csv", "train_log.csv", "final_policy.bin", "final_eval.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert!(!run.join(".lock").exists());

    ok(
        dir,
        &["evaluate", "--policy", run.to_str().unwrap(), "--cases", "2", "--deterministic", "--out", "eval"],
    );
    let eval = std::fs::read_to_string(dir.join("eval/final_eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 3);

    ok(dir, &["report", "--runs", "runs", "--out", "report"]);
    let table = std::fs::read_to_string(dir.join("report/report_inspection_u1.csv")).unwrap();
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("discrete-3,2,6,"), "{row}");

    ok(dir, &["plot", "--kind", "all", "--runs", "runs", "--out", "plots"]);
    let svgs = files_in(&dir.join("plots"));
    assert!(!svgs.is_empty());
    assert!(svgs.iter().all(|p| std::fs::read_to_string(p).unwrap().starts_with("<svg")));
}

#[test]
fn bad_checkpoint_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("junk.bin"), b"not a policy").unwrap();
    let out = proxops(
        tmp.path(),
        &["evaluate", "--policy", "junk.bin", "--task", "docking", "--space", "continuous", "--umax", "0.1"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("junk.bin") && err.contains("PXPV"), "{err}");
}

#[test]
fn unknown_task_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = proxops(tmp.path(), &["train", "--task", "rendezvous"]);
    assert!(!out.status.success());
}
