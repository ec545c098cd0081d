//! `key = value` run configuration with a fixed schema.
//!
//! Values are layered: schema defaults, then the `--config` file, then each
//! `--set` override in order, then the dedicated `--seed` and `--out` flags.
//! Unknown keys are rejected at every layer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use frwkv::data::{CsvSchema, SplitSpec};
use frwkv::model::{ModelConfig, Variant};
use frwkv::train::TrainConfig;

/// Name of the echoed configuration inside the output directory.
pub const RESOLVED_FILE: &str = "config.resolved.txt";

/// `(key, default, description)`
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("data", "synthetic", "CSV path, or `synthetic`"),
    ("schema", "none", "benchmark name whose published shape the CSV must match, or `none`"),
    ("split", "standard", "single | standard | ett-hourly | ett-15min | ratios:<train>,<test>"),
    ("scale", "true", "z-score every variable with training-split statistics"),
    ("synth.length", "2000", "rows of the synthetic series"),
    ("synth.vars", "3", "variables of the synthetic series"),
    ("synth.periods", "24,12,7.3", "comma-separated sinusoid periods"),
    ("synth.noise", "0.1", "standard deviation of additive Gaussian noise"),
    ("synth.seed", "42", "seed of the synthetic generator"),
    ("variant", "full", "full | no-fr | no-la"),
    ("seq_len", "96", "input window length"),
    ("horizon", "96", "forecast length"),
    ("d_model", "16", "channel width"),
    ("heads", "2", "attention heads; must divide d_model"),
    ("layers", "1", "encoder blocks per branch"),
    ("seed", "0", "initialization and shuffling seed"),
    ("lr", "0.001", "Adam learning rate"),
    ("batch_size", "32", "windows per step"),
    ("epochs", "100", "maximum epochs"),
    ("patience", "10", "epochs without validation improvement before stopping"),
    ("clip_norm", "5.0", "global gradient-norm clip"),
    ("seeds", "0,1,2", "seeds for `ablate`"),
    ("checkpoint", "", "checkpoint read by `eval`; empty means <out>/checkpoint.frwkv"),
    ("eval_split", "test", "split scored by `eval`"),
    ("bench.lengths", "256,512,1024,2048,4096", "ascending sequence lengths for `bench-scaling`"),
    ("bench.repeats", "7", "timed runs per length (at least 5)"),
    ("bench.warmup", "2", "untimed runs per length"),
    ("out", "out", "output directory"),
];

/// Raw string values keyed by schema name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConfig(BTreeMap<String, String>);

impl Default for RawConfig {
    fn default() -> Self {
        Self(SCHEMA.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect())
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let slot = self
            .0
            .get_mut(key)
            .ok_or_else(|| anyhow!("unknown config key '{key}' (run with --help for the schema)"))?;
        *slot = value.trim().to_string();
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.0[key]
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("override '{o}' is not key=value"))?;
            self.set(k.trim(), v).with_context(|| format!("in --set {o}"))?;
        }
        Ok(())
    }

    /// Merges a config file; `#` starts a comment.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.merge_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), i + 1) {
                bail!("line {}: key '{k}' already set on line {prev}", i + 1);
            }
            self.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    /// Every key, one `key = value` line each, in schema order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, _, help) in SCHEMA {
            writeln!(out, "# {help}").unwrap();
            writeln!(out, "{k} = {}", self.0[*k]).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic { length: usize, vars: usize, periods: Vec<f64>, noise: f64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub repeats: usize,
    pub warmup: usize,
}

/// Typed view of a [`RawConfig`]. `model.n_vars` is filled in once the data
/// is loaded.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub data: DataSource,
    pub split: SplitSpec,
    pub scale: bool,
    pub variant: Variant,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub checkpoint: Option<PathBuf>,
    pub eval_split: frwkv::data::Split,
    pub bench: BenchConfig,
    pub out: PathBuf,
}

fn parse<T: FromStr>(raw: &RawConfig, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let v = raw.get(key);
    v.parse().map_err(|e| anyhow!("config key '{key}': cannot parse '{v}': {e}"))
}

fn parse_list<T: FromStr>(raw: &RawConfig, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.get(key)
        .split(',')
        .map(|s| s.trim().parse().map_err(|e| anyhow!("config key '{key}': cannot parse '{s}': {e}")))
        .collect()
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let data = match raw.get("data") {
            "synthetic" => DataSource::Synthetic {
                length: parse(&raw, "synth.length")?,
                vars: parse(&raw, "synth.vars")?,
                periods: parse_list(&raw, "synth.periods")?,
                noise: parse(&raw, "synth.noise")?,
                seed: parse(&raw, "synth.seed")?,
            },
            path => {
                let schema = match raw.get("schema") {
                    "none" => CsvSchema::default(),
                    name => CsvSchema::benchmark(name).ok_or_else(|| anyhow!("config key 'schema': unknown benchmark '{name}'"))?,
                };
                DataSource::Csv {
                    path: PathBuf::from(path),
                    schema,
                }
            }
        };
        let seed = parse(&raw, "seed")?;
        let model = ModelConfig {
            seq_len: parse(&raw, "seq_len")?,
            horizon: parse(&raw, "horizon")?,
            n_vars: 1,
            d_model: parse(&raw, "d_model")?,
            heads: parse(&raw, "heads")?,
            layers: parse(&raw, "layers")?,
            seed,
        };
        model.validate()?;
        let train = TrainConfig {
            lr: parse(&raw, "lr")?,
            batch_size: parse(&raw, "batch_size")?,
            max_epochs: parse(&raw, "epochs")?,
            patience: parse(&raw, "patience")?,
            clip_norm: parse(&raw, "clip_norm")?,
            seed,
        };
        train.validate()?;
        let bench = BenchConfig {
            lengths: parse_list(&raw, "bench.lengths")?,
            repeats: parse(&raw, "bench.repeats")?,
            warmup: parse(&raw, "bench.warmup")?,
        };
        if bench.repeats < 5 {
            bail!("config key 'bench.repeats' must be at least 5");
        }
        if bench.lengths.iter().any(|&l| l < 2) || bench.lengths.windows(2).any(|w| w[0] >= w[1]) {
            bail!("config key 'bench.lengths' must be ascending and each >= 2");
        }
        let seeds = parse_list(&raw, "seeds")?;
        if seeds.is_empty() {
            bail!("config key 'seeds' is empty");
        }
        let checkpoint = match raw.get("checkpoint") {
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        Ok(Self {
            data,
            split: parse(&raw, "split")?,
            scale: parse(&raw, "scale")?,
            variant: parse(&raw, "variant")?,
            model,
            train,
            seeds,
            checkpoint,
            eval_split: parse(&raw, "eval_split")?,
            bench,
            out: PathBuf::from(raw.get("out")),
            raw,
        })
    }

    /// Writes the fully resolved configuration into the output directory.
    pub fn echo(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(RESOLVED_FILE);
        std::fs::write(&path, self.raw.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
