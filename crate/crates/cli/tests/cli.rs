//! End-to-end runs of the `frwkv` binary.

use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set", "synth.length=240",
    "--set", "synth.vars=2",
    "--set", "seq_len=16",
    "--set", "horizon=4",
    "--set", "d_model=8",
    "--set", "epochs=2",
];

fn frwkv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frwkv")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_out<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--out", out];
    v.extend_from_slice(TINY);
    v.extend_from_slice(extra);
    v
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn train_then_eval_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    let o = frwkv(&with_out("train", out, &[]));
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["checkpoint.frwkv", "metrics.csv", "metrics.txt", "loss_curve.csv", "timing.csv", "config.resolved.txt"] {
        assert!(Path::new(out).join(f).is_file(), "missing {f}");
    }
    let metrics = lines(&Path::new(out).join("metrics.csv"));
    assert_eq!(metrics[0], "split,horizon,windows,units,mse,mae,best_epoch,best_val_loss,epochs_run");
    let train_row: Vec<&str> = metrics[1].split(',').collect();

    let o = frwkv(&with_out("eval", out, &[]));
    assert!(o.status.success(), "{}", stderr(&o));
    let eval = lines(&Path::new(out).join("eval.csv"));
    assert_eq!(eval[1].split(',').collect::<Vec<_>>(), train_row[..6]);
}

#[test]
fn echoed_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(frwkv(&with_out("train", a.to_str().unwrap(), &["--seed", "7"])).status.success());
    let echoed = a.join("config.resolved.txt");
    let o = frwkv(&["train", "--config", echoed.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
    assert!(std::fs::read_to_string(&echoed).unwrap().contains("seed = 7"));
}

#[test]
fn missing_dataset_fails_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = frwkv(&["train", "--out", out.to_str().unwrap(), "--set", "data=/no/such/etth1.csv", "--set", "schema=etth1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/no/such/etth1.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let o = frwkv(&["train", "--set", "learning_rate=0.1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert!(frwkv(&with_out("train", out, &[])).status.success());
    let o = frwkv(&with_out("eval", out, &["--set", "horizon=8"]));
    assert!(!o.status.success());
}

#[test]
fn ablation_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abl");
    let out = out.to_str().unwrap();
    let o = frwkv(&with_out("ablate", out, &["--set", "seeds=0,1", "--set", "epochs=1"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = lines(&Path::new(out).join("ablation.csv"));
    assert_eq!(rows[0], "variant,seed,mse,mae");
    assert_eq!(rows.len(), 1 + 3 * 2 + 3);
    for v in ["full", "no-fr", "no-la"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{v},"))).count(), 3);
        assert!(rows.iter().any(|r| r.starts_with(&format!("{v},mean,"))));
    }
    for r in &rows[1..] {
        let cells: Vec<&str> = r.split(',').collect();
        assert!(cells[2].parse::<f64>().unwrap().is_finite() && cells[3].parse::<f64>().unwrap().is_finite());
    }
}

fn attr(svg: &str, axis: &str) -> f64 {
    let key = format!(r#"data-axis="{axis}" data-value=""#);
    let start = svg.find(&key).unwrap() + key.len();
    svg[start..].split('"').next().unwrap().parse().unwrap()
}

#[test]
fn plot_two_points_and_bounds_cover_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    std::fs::write(&csv, "epoch,train,val\n1,0.9,1.2\n2,-0.3,0.4\n").unwrap();
    let o = frwkv(&["plot", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("curve.svg")).unwrap();
    assert!(attr(&svg, "x-min") <= 1.0 && attr(&svg, "x-max") >= 2.0);
    assert!(attr(&svg, "y-min") <= -0.3 && attr(&svg, "y-max") >= 1.2);
    assert_eq!(svg.matches(r#"class="series""#).count(), 2);
}

#[test]
fn plot_empty_csv_errors_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "epoch,loss\n").unwrap();
    let o = frwkv(&["plot", csv.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!dir.path().join("empty.svg").exists());
}
