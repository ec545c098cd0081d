//! Plain-text model checkpoints.
//!
//! ```text
//! frwkv-checkpoint v1
//! config seq_len=96 horizon=96 n_vars=7 d_model=16 heads=2 layers=1 seed=0
//! variant full
//! param revin.gamma 1 7
//! 1.0 1.0 1.0 1.0 1.0 1.0 1.0
//! ...
//! ```
//!
//! Each `param` line gives a name, a rank and the dimensions; the next line
//! holds the row-major values, printed so they parse back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FrwkvError, Result};
use crate::model::{FrwkvModel, ModelConfig, Variant};

const MAGIC: &str = "frwkv-checkpoint v1";

pub fn to_string(model: &FrwkvModel) -> String {
    let c = model.config();
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "config seq_len={} horizon={} n_vars={} d_model={} heads={} layers={} seed={}",
        c.seq_len, c.horizon, c.n_vars, c.d_model, c.heads, c.layers, c.seed
    )
    .unwrap();
    writeln!(out, "variant {}", model.variant()).unwrap();
    for p in model.params().iter() {
        let shape = p.tensor.shape();
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        writeln!(out, "param {} {} {}", p.name, shape.len(), dims.join(" ")).unwrap();
        let vals: Vec<String> = p.tensor.data().iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", vals.join(" ")).unwrap();
    }
    out
}

pub fn save(model: &FrwkvModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(model)).map_err(|e| FrwkvError::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<FrwkvModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FrwkvError::io(path, e))?;
    from_str(&text).map_err(|e| match e {
        FrwkvError::Data(msg) => FrwkvError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn bad(line: usize, msg: impl std::fmt::Display) -> FrwkvError {
    FrwkvError::Data(format!("checkpoint line {line}: {msg}"))
}

fn parse_config(line: usize, text: &str) -> Result<ModelConfig> {
    let body = text.strip_prefix("config ").ok_or_else(|| bad(line, "expected 'config'"))?;
    let mut cfg = ModelConfig::default();
    let mut seen = 0;
    for pair in body.split_whitespace() {
        let (k, v) = pair.split_once('=').ok_or_else(|| bad(line, format!("malformed '{pair}'")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| bad(line, format!("bad value for {k}")));
        match k {
            "seq_len" => cfg.seq_len = num(v)?,
            "horizon" => cfg.horizon = num(v)?,
            "n_vars" => cfg.n_vars = num(v)?,
            "d_model" => cfg.d_model = num(v)?,
            "heads" => cfg.heads = num(v)?,
            "layers" => cfg.layers = num(v)?,
            "seed" => cfg.seed = v.parse().map_err(|_| bad(line, "bad value for seed"))?,
            other => return Err(bad(line, format!("unknown key '{other}'"))),
        }
        seen += 1;
    }
    if seen != 7 {
        return Err(bad(line, "config must list all seven keys"));
    }
    Ok(cfg)
}

pub fn from_str(text: &str) -> Result<FrwkvModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| FrwkvError::Data(format!("checkpoint truncated, expected {what}")));
    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err(bad(n, format!("expected '{MAGIC}'")));
    }
    let (n, cfg_line) = next("config")?;
    let config = parse_config(n, cfg_line)?;
    let (n, var_line) = next("variant")?;
    let variant: Variant = var_line
        .strip_prefix("variant ")
        .ok_or_else(|| bad(n, "expected 'variant'"))?
        .parse()?;
    let mut model = FrwkvModel::build(config, variant)?;
    let mut seen = std::collections::HashSet::new();
    while let Ok((n, header)) = next("param") {
        if header.trim().is_empty() {
            continue;
        }
        let mut parts = header.split_whitespace();
        if parts.next() != Some("param") {
            return Err(bad(n, "expected 'param'"));
        }
        let name = parts.next().ok_or_else(|| bad(n, "missing name"))?;
        let rank: usize = parts.next().and_then(|r| r.parse().ok()).ok_or_else(|| bad(n, "bad rank"))?;
        let dims: Vec<usize> = parts.map(|d| d.parse().map_err(|_| bad(n, "bad dimension"))).collect::<Result<_>>()?;
        if dims.len() != rank {
            return Err(bad(n, format!("rank {rank} but {} dimensions", dims.len())));
        }
        let id = model.params().find(name).ok_or_else(|| bad(n, format!("unknown parameter '{name}'")))?;
        if !seen.insert(id) {
            return Err(bad(n, format!("duplicate parameter '{name}'")));
        }
        if model.params().get(id).shape() != dims.as_slice() {
            return Err(bad(n, format!("{name} has shape {:?}, model expects {:?}", dims, model.params().get(id).shape())));
        }
        let (vn, vals) = next("values")?;
        let vals: Vec<f64> = vals
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(vn, format!("'{v}' is not a finite number")))
            })
            .collect::<Result<_>>()?;
        let dst = model.params_mut().get_mut(id).data_mut();
        if vals.len() != dst.len() {
            return Err(bad(vn, format!("{name} needs {} values, found {}", dst.len(), vals.len())));
        }
        dst.copy_from_slice(&vals);
    }
    if seen.len() != model.params().len() {
        return Err(FrwkvError::Data(format!("checkpoint holds {} of {} parameters", seen.len(), model.params().len())));
    }
    Ok(model)
}
