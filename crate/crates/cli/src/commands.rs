//! The subcommands. Each reads a [`RunConfig`] and writes its artifacts
//! under the configured output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frwkv::checkpoint;
use frwkv::data::{load_csv, make_windows, synth_multiperiodic, WindowedDataset};
use frwkv::model::{FrwkvModel, Variant};
use frwkv::train::{evaluate, run_ablation, train, AblationReport, EvalMetrics, MetricsReport};

use crate::bench::{bench_scaling, ScalingReport};
use crate::config::{DataSource, RunConfig};
use crate::plot::plot_csv;

pub const CHECKPOINT_FILE: &str = "checkpoint.frwkv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_TXT: &str = "metrics.txt";
pub const LOSS_CURVE_CSV: &str = "loss_curve.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_TXT: &str = "ablation.txt";
pub const SCALING_CSV: &str = "scaling.csv";
pub const SCALING_TXT: &str = "scaling.txt";

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Loads or generates the series and cuts it into windows.
pub fn load_data(cfg: &RunConfig) -> Result<WindowedDataset> {
    let table = match &cfg.data {
        DataSource::Csv { path, schema } => {
            if !path.exists() {
                bail!("dataset not found: {}", path.display());
            }
            load_csv(path, *schema)?
        }
        DataSource::Synthetic {
            length,
            vars,
            periods,
            noise,
            seed,
        } => synth_multiperiodic(*length, *vars, periods, *noise, *seed)?,
    };
    Ok(make_windows(&table, cfg.model.seq_len, cfg.model.horizon, cfg.split, cfg.scale)?)
}

fn model_config(cfg: &RunConfig, data: &WindowedDataset) -> frwkv::model::ModelConfig {
    frwkv::model::ModelConfig {
        n_vars: data.n_vars(),
        ..cfg.model
    }
}

fn metrics_row(m: &EvalMetrics) -> String {
    format!("{},{},{},{},{},{}", m.split, m.horizon, m.windows, m.units, m.mse, m.mae)
}

/// Trains one model. Writes the checkpoint, `metrics.csv`,
/// `loss_curve.csv`, `timing.csv` and `metrics.txt`.
pub fn cmd_train(cfg: &RunConfig) -> Result<MetricsReport> {
    let data = load_data(cfg)?;
    cfg.echo()?;
    let mut model = FrwkvModel::build(model_config(cfg, &data), cfg.variant)?;
    let report = train(&mut model, &data, &cfg.train)?;
    let out = &cfg.out;
    checkpoint::save(&model, out.join(CHECKPOINT_FILE))?;

    let mut csv = String::from("split,horizon,windows,units,mse,mae,best_epoch,best_val_loss,epochs_run\n");
    writeln!(csv, "{},{},{},{}", metrics_row(&report.test), report.best_epoch, report.best_val_loss, report.epochs.len()).unwrap();
    write(out, METRICS_CSV, &csv)?;

    let mut curve = String::from("epoch,train_loss,val_loss\n");
    let mut timing = String::from("epoch,seconds\n");
    for e in &report.epochs {
        writeln!(curve, "{},{},{}", e.epoch, e.train_loss, e.val_loss).unwrap();
        writeln!(timing, "{},{}", e.epoch, e.seconds).unwrap();
    }
    write(out, LOSS_CURVE_CSV, &curve)?;
    write(out, TIMING_CSV, &timing)?;

    let per_epoch = report.epochs.iter().map(|e| e.seconds).sum::<f64>() / report.epochs.len() as f64;
    let mut txt = String::new();
    writeln!(txt, "variant        {}", cfg.variant).unwrap();
    writeln!(txt, "parameters     {}", model.parameter_count()).unwrap();
    writeln!(txt, "epochs run     {}{}", report.epochs.len(), if report.stopped_early { " (early stop)" } else { "" }).unwrap();
    writeln!(txt, "best epoch     {} (val mse {:.6})", report.best_epoch, report.best_val_loss).unwrap();
    writeln!(txt, "test windows   {}", report.test.windows).unwrap();
    writeln!(txt, "test mse       {:.6}", report.test.mse).unwrap();
    writeln!(txt, "test mae       {:.6}", report.test.mae).unwrap();
    writeln!(txt, "units          {}", report.test.units).unwrap();
    writeln!(txt, "seconds/epoch  {per_epoch:.3}").unwrap();
    write(out, METRICS_TXT, &txt)?;
    Ok(report)
}

/// Scores a saved checkpoint on `eval_split`; writes `eval.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalMetrics> {
    let path = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let model = checkpoint::load(&path)?;
    let data = load_data(cfg)?;
    cfg.echo()?;
    let m = evaluate(&model, &data, cfg.eval_split)?;
    write(&cfg.out, EVAL_CSV, &format!("split,horizon,windows,units,mse,mae\n{}\n", metrics_row(&m)))?;
    Ok(m)
}

/// Trains all three variants for every seed; writes `ablation.csv` and
/// `ablation.txt`.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblationReport> {
    let data = load_data(cfg)?;
    cfg.echo()?;
    let report = run_ablation(&data, model_config(cfg, &data), &cfg.train, &cfg.seeds)?;

    let mut csv = String::from("variant,seed,mse,mae\n");
    for r in &report.rows {
        writeln!(csv, "{},{},{},{}", r.variant, r.seed, r.mse, r.mae).unwrap();
    }
    for v in Variant::ALL {
        let (mse, mae) = report.mean(v).expect("every variant ran");
        writeln!(csv, "{v},mean,{mse},{mae}").unwrap();
    }
    write(&cfg.out, ABLATION_CSV, &csv)?;

    let mut txt = format!("test metrics ({} units)\n\n{:<8}{:>8}{:>12}{:>12}\n", report.units, "variant", "seed", "mse", "mae");
    for r in &report.rows {
        writeln!(txt, "{:<8}{:>8}{:>12.6}{:>12.6}", r.variant, r.seed, r.mse, r.mae).unwrap();
    }
    for v in Variant::ALL {
        let (mse, mae) = report.mean(v).expect("every variant ran");
        writeln!(txt, "{:<8}{:>8}{:>12.6}{:>12.6}", v, "mean", mse, mae).unwrap();
    }
    let wins = report.wins(Variant::Full);
    writeln!(txt, "\nfull has the lowest mse on {} of {} seeds {:?}", wins.len(), cfg.seeds.len(), wins).unwrap();
    write(&cfg.out, ABLATION_TXT, &txt)?;
    Ok(report)
}

/// Times the encoder scan over `bench.lengths`; writes `scaling.csv` and
/// `scaling.txt`.
pub fn cmd_bench_scaling(cfg: &RunConfig) -> Result<ScalingReport> {
    cfg.echo()?;
    let report = bench_scaling(cfg.model.d_model, cfg.model.heads, cfg.model.seed, &cfg.bench)?;
    let mut csv = String::from("seq_len,median_seconds,state_floats,steps,flops\n");
    for r in &report.rows {
        writeln!(csv, "{},{},{},{},{}", r.seq_len, r.median_seconds, r.state_floats, r.steps, r.flops).unwrap();
    }
    write(&cfg.out, SCALING_CSV, &csv)?;

    let mut txt = format!(
        "encoder scan, d_model={} heads={}, median of {} runs after {} warmup\n\n{:>8}{:>14}{:>10}{:>14}\n",
        cfg.model.d_model, cfg.model.heads, cfg.bench.repeats, cfg.bench.warmup, "T", "seconds", "state", "flops"
    );
    for r in &report.rows {
        writeln!(txt, "{:>8}{:>14.6e}{:>10}{:>14}", r.seq_len, r.median_seconds, r.state_floats, r.flops).unwrap();
    }
    writeln!(txt, "\nlog-log slope alpha = {:.3}", report.alpha).unwrap();
    writeln!(txt, "runtime ratio of the two longest lengths = {:.3}", report.last_ratio).unwrap();
    write(&cfg.out, SCALING_TXT, &txt)?;
    Ok(report)
}

/// Renders each CSV to an SVG next to it, or into `out` when given.
pub fn cmd_plot(inputs: &[PathBuf], out: Option<&Path>) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        bail!("plot needs at least one CSV file");
    }
    inputs
        .iter()
        .map(|input| {
            let dir = match out {
                Some(d) => d.to_path_buf(),
                None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            plot_csv(input, &dir)
        })
        .collect()
}
