mod common;

use std::io::Write;

use common::dft::dft;
use frwkv::data::{load_csv, make_windows, synth_multiperiodic, CsvSchema, Split, SplitSpec};

#[test]
fn windows_never_look_ahead_or_cross_splits() {
    let table = synth_multiperiodic(17420, 2, &[24.0], 0.1, 1).unwrap();
    let data = make_windows(&table, 96, 96, SplitSpec::ETT_HOURLY, true).unwrap();
    let segs = data.segments();
    for w in data.windows() {
        let (inp, tgt) = (data.input_rows(w), data.target_rows(w));
        assert_eq!(inp.end, tgt.start);
        let seg = segs[w.split as usize];
        assert!(inp.start >= seg.0 && tgt.end <= seg.1);
    }
    let last = |s: Split| data.windows().iter().filter(|w| w.split == s).map(|w| data.target_rows(w).end).max().unwrap();
    let first = |s: Split| data.windows().iter().filter(|w| w.split == s).map(|w| w.start).min().unwrap();
    assert!(last(Split::Train) <= first(Split::Val));
    assert!(last(Split::Val) <= first(Split::Test));
    assert_eq!(data.count(Split::Train), 8640 - 192 + 1);
    assert_eq!(data.count(Split::Val), 2880 - 192 + 1);
    assert_eq!(data.count(Split::Test), 2880 - 192 + 1);
}

#[test]
fn standard_ratio_counts() {
    let table = synth_multiperiodic(1000, 1, &[10.0], 0.0, 2).unwrap();
    let data = make_windows(&table, 24, 12, SplitSpec::STANDARD, false).unwrap();
    let [tr, va, te] = data.segments();
    assert_eq!((tr, va, te), ((0, 700), (700, 800), (800, 1000)));
    for (s, (a, b)) in Split::ALL.into_iter().zip([tr, va, te]) {
        assert_eq!(data.count(s), b - a - 36 + 1);
    }
}

#[test]
fn period_eight_energy_at_bin_twelve() {
    let table = synth_multiperiodic(96, 1, &[8.0], 0.0, 3).unwrap();
    let (re, im) = dft(table.values.data());
    let power: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect();
    let total: f64 = power.iter().sum();
    assert!(power[12] / total > 1.0 - 1e-12);
    let s = frwkv::spectral::rfft(&frwkv::Tensor::from_vec(table.values.data().to_vec())).unwrap();
    let peak = (0..s.bins()).max_by(|&a, &b| {
        let pa = s.re.data()[a].powi(2) + s.im.data()[a].powi(2);
        let pb = s.re.data()[b].powi(2) + s.im.data()[b].powi(2);
        pa.total_cmp(&pb)
    });
    assert_eq!(peak, Some(12));
}

#[test]
fn csv_written_then_loaded_is_exact() {
    let table = synth_multiperiodic(50, 3, &[7.0, 3.0], 0.5, 4).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "date,{}", table.names.join(",")).unwrap();
    for (r, row) in table.values.data().chunks(3).enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(f, "t{r},{}", cells.join(",")).unwrap();
    }
    let back = load_csv(f.path(), CsvSchema { n_vars: Some(3), rows: Some(50) }).unwrap();
    assert_eq!(back.values, table.values);
    assert_eq!(back.names, table.names);
}
