//! Series loading, chronological splits, sliding windows and synthetic data.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FrwkvError, Result};
use crate::tensor::Tensor;

/// A multivariate series, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub names: Vec<String>,
    /// `[L_total, N]`
    pub values: Tensor,
    /// Raw first-column labels; the model never reads them.
    pub timestamps: Vec<String>,
}

impl SeriesTable {
    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Expected dimensions of a named benchmark file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvSchema {
    pub n_vars: Option<usize>,
    pub rows: Option<usize>,
}

impl CsvSchema {
    /// Published sizes of the standard long-horizon benchmarks.
    pub fn benchmark(name: &str) -> Option<Self> {
        let (n, rows) = match name.to_ascii_lowercase().as_str() {
            "ettm1" | "ettm2" => (7, 69680),
            "etth1" | "etth2" => (7, 17420),
            "ecl" | "electricity" => (321, 26304),
            "exchange" | "exchange_rate" => (9, 7588),
            "weather" => (21, 52696),
            "solar" => (137, 52179),
            _ => return None,
        };
        Some(Self {
            n_vars: Some(n),
            rows: Some(rows),
        })
    }
}

/// Reads a CSV with a header row, a timestamp first column and numeric
/// remaining columns. Blank or unparsable cells are errors.
pub fn load_csv(path: impl AsRef<Path>, schema: CsvSchema) -> Result<SeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| FrwkvError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let parse_err = |row: usize, column: usize, message: String| FrwkvError::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, 1, e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(parse_err(1, 1, "need a timestamp column and at least one variable".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let n = names.len();
    let mut values = Vec::new();
    let mut timestamps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, 1, e.to_string()))?;
        if record.len() != n + 1 {
            return Err(parse_err(line, record.len().min(n + 1), format!("expected {} fields, found {}", n + 1, record.len())));
        }
        timestamps.push(record[0].to_owned());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(parse_err(line, j + 1, "missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("non-finite value '{cell}'")));
            }
            values.push(v);
        }
    }
    let rows = timestamps.len();
    if let Some(expect) = schema.n_vars {
        if expect != n {
            return Err(FrwkvError::Data(format!("{}: expected {expect} variables, found {n}", path.display())));
        }
    }
    if let Some(expect) = schema.rows {
        if expect != rows {
            return Err(FrwkvError::Data(format!("{}: expected {expect} rows, found {rows}", path.display())));
        }
    }
    Ok(SeriesTable {
        names,
        values: Tensor::new(&[rows, n], values)?,
        timestamps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = FrwkvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(FrwkvError::config(format!("unknown split '{other}'"))),
        }
    }
}

/// How rows are divided into chronological train/val/test segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    /// Every row belongs to the training segment.
    Single,
    /// 12/4/4 months of 30 days at the given sampling rate.
    Ett { samples_per_day: usize },
    /// Leading fractions for train and test; validation takes the rest.
    Ratios { train: f64, test: f64 },
}

impl SplitSpec {
    pub const ETT_HOURLY: SplitSpec = SplitSpec::Ett { samples_per_day: 24 };
    pub const ETT_15MIN: SplitSpec = SplitSpec::Ett { samples_per_day: 96 };
    pub const STANDARD: SplitSpec = SplitSpec::Ratios { train: 0.7, test: 0.2 };

    /// Row ranges `[start, end)` for train, val and test.
    pub fn segments(&self, len: usize) -> Result<[(usize, usize); 3]> {
        match *self {
            SplitSpec::Single => Ok([(0, len), (len, len), (len, len)]),
            SplitSpec::Ett { samples_per_day } => {
                let month = 30 * samples_per_day;
                let (a, b, c) = (12 * month, 16 * month, 20 * month);
                if len < c {
                    return Err(FrwkvError::Data(format!("ETT split needs {c} rows, series has {len}")));
                }
                Ok([(0, a), (a, b), (b, c)])
            }
            SplitSpec::Ratios { train, test } => {
                if !(train > 0.0 && test >= 0.0 && train + test <= 1.0) {
                    return Err(FrwkvError::config(format!("bad split ratios train={train} test={test}")));
                }
                let n_train = (len as f64 * train) as usize;
                let n_test = (len as f64 * test) as usize;
                let n_val = len - n_train - n_test;
                Ok([(0, n_train), (n_train, n_train + n_val), (n_train + n_val, len)])
            }
        }
    }
}

impl FromStr for SplitSpec {
    type Err = FrwkvError;

    /// `single`, `ett-hourly`, `ett-15min`, `standard`, or
    /// `ratios:<train>,<test>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SplitSpec::Single),
            "ett-hourly" => Ok(SplitSpec::ETT_HOURLY),
            "ett-15min" => Ok(SplitSpec::ETT_15MIN),
            "standard" => Ok(SplitSpec::STANDARD),
            other => {
                let bad = || FrwkvError::config(format!("unknown split spec '{other}'"));
                let rest = other.strip_prefix("ratios:").ok_or_else(bad)?;
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(SplitSpec::Ratios {
                    train: a.trim().parse().map_err(|_| bad())?,
                    test: b.trim().parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SplitSpec::Single => f.write_str("single"),
            SplitSpec::Ett { samples_per_day: 24 } => f.write_str("ett-hourly"),
            SplitSpec::Ett { samples_per_day: 96 } => f.write_str("ett-15min"),
            SplitSpec::Ett { samples_per_day } => write!(f, "ett-{samples_per_day}/day"),
            SplitSpec::Ratios { train, test } => write!(f, "ratios:{train},{test}"),
        }
    }
}

/// Per-variable z-score fit on the training segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(values: &Tensor, rows: (usize, usize)) -> Self {
        let n = values.shape()[1];
        let count = (rows.1 - rows.0) as f64;
        let mut mean = vec![0.0; n];
        let mut std = vec![0.0; n];
        for r in rows.0..rows.1 {
            for j in 0..n {
                mean[j] += values.data()[r * n + j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for r in rows.0..rows.1 {
            for j in 0..n {
                std[j] += (values.data()[r * n + j] - mean[j]).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / count).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn transform(&self, values: &Tensor) -> Tensor {
        let n = self.mean.len();
        let data = values
            .data()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.mean[k % n]) / self.std[k % n])
            .collect();
        Tensor::from_parts(values.shape().to_vec(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    /// First input row; the target starts at `start + seq_len`.
    pub start: usize,
    pub split: Split,
}

/// Stride-1 windows over a (possibly globally scaled) series. Windows are
/// materialized into tensors on demand by [`WindowedDataset::batch`].
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    series: Tensor,
    seq_len: usize,
    horizon: usize,
    windows: Vec<Window>,
    segments: [(usize, usize); 3],
    scaler: Option<Scaler>,
}

/// Builds stride-1 windows that lie entirely inside one split segment.
/// When `scale` is set, a z-score fit on the training rows is applied to the
/// whole series first.
pub fn make_windows(table: &SeriesTable, seq_len: usize, horizon: usize, split: SplitSpec, scale: bool) -> Result<WindowedDataset> {
    if seq_len < 2 || horizon < 1 {
        return Err(FrwkvError::config(format!("invalid window seq_len={seq_len} horizon={horizon}")));
    }
    let span = seq_len + horizon;
    let len = table.len();
    if len < span {
        return Err(FrwkvError::Data(format!(
            "series has {len} rows; windows need at least {span} (seq_len {seq_len} + horizon {horizon})"
        )));
    }
    let segments = split.segments(len)?;
    let mut windows = Vec::new();
    for (split, &(start, end)) in Split::ALL.iter().zip(&segments) {
        let seg = end - start;
        if seg == 0 {
            continue;
        }
        if seg < span {
            return Err(FrwkvError::Data(format!(
                "{split} segment has {seg} rows; windows need at least {span} (seq_len {seq_len} + horizon {horizon})"
            )));
        }
        windows.extend((start..=end - span).map(|s| Window { start: s, split: *split }));
    }
    let scaler = scale.then(|| Scaler::fit(&table.values, segments[0]));
    let series = match &scaler {
        Some(s) => s.transform(&table.values),
        None => table.values.clone(),
    };
    Ok(WindowedDataset {
        series,
        seq_len,
        horizon,
        windows,
        segments,
        scaler,
    })
}

impl WindowedDataset {
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_vars(&self) -> usize {
        self.series.shape()[1]
    }

    pub fn series(&self) -> &Tensor {
        &self.series
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn segments(&self) -> [(usize, usize); 3] {
        self.segments
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// Indices into [`WindowedDataset::windows`] for one split, in time order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.windows.len()).filter(|&i| self.windows[i].split == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.windows.iter().filter(|w| w.split == split).count()
    }

    pub fn input_rows(&self, w: &Window) -> std::ops::Range<usize> {
        w.start..w.start + self.seq_len
    }

    pub fn target_rows(&self, w: &Window) -> std::ops::Range<usize> {
        w.start + self.seq_len..w.start + self.seq_len + self.horizon
    }

    /// Inputs `[B, N, T]` and targets `[B, N, τ]` for the given windows.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Tensor) {
        let n = self.n_vars();
        let (t, tau) = (self.seq_len, self.horizon);
        let mut x = vec![0.0; idx.len() * n * t];
        let mut y = vec![0.0; idx.len() * n * tau];
        let s = self.series.data();
        for (b, &wi) in idx.iter().enumerate() {
            let w = &self.windows[wi];
            for v in 0..n {
                for (k, r) in self.input_rows(w).enumerate() {
                    x[(b * n + v) * t + k] = s[r * n + v];
                }
                for (k, r) in self.target_rows(w).enumerate() {
                    y[(b * n + v) * tau + k] = s[r * n + v];
                }
            }
        }
        (
            Tensor::from_parts(vec![idx.len(), n, t], x),
            Tensor::from_parts(vec![idx.len(), n, tau], y),
        )
    }
}

/// Sum of unit-amplitude sinusoids at `periods` with random phases per
/// variable and period, plus i.i.d. Gaussian noise.
pub fn synth_multiperiodic(length: usize, n_vars: usize, periods: &[f64], noise_std: f64, seed: u64) -> Result<SeriesTable> {
    if periods.is_empty() || periods.iter().any(|p| !(*p >= 2.0)) {
        return Err(FrwkvError::config(format!("periods must be non-empty and >= 2, got {periods:?}")));
    }
    if noise_std < 0.0 {
        return Err(FrwkvError::config("noise_std must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..n_vars * periods.len()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut values = vec![0.0; length * n_vars];
    for t in 0..length {
        for v in 0..n_vars {
            let mut x = 0.0;
            for (pi, p) in periods.iter().enumerate() {
                x += (2.0 * PI * t as f64 / p + phases[v * periods.len() + pi]).sin();
            }
            if noise_std > 0.0 {
                x += noise.sample(&mut rng);
            }
            values[t * n_vars + v] = x;
        }
    }
    Ok(SeriesTable {
        names: (0..n_vars).map(|v| format!("v{v}")).collect(),
        values: Tensor::new(&[length, n_vars], values)?,
        timestamps: (0..length).map(|t| t.to_string()).collect(),
    })
}
