//! CSV and plot-data files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::config::Algorithm;
use crate::report::mean_stderr;
use crate::sweep::SweepRecord;
use crate::{HarnessError, Result};

pub const HEADER: [&str; 14] = [
    "setup_id",
    "trial_id",
    "algorithm",
    "M",
    "K",
    "T_dl",
    "P_dl_db",
    "sr_true",
    "sr_est",
    "sr_bound",
    "iterations",
    "runtime_microseconds",
    "per_user_power_fractions",
    "degenerate",
];

/// Twelve significant digits, printed in the shortest form that reads back
/// to the same value.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

fn to_fields(r: &SweepRecord) -> Vec<String> {
    vec![
        r.setup_id.to_string(),
        r.trial_id.to_string(),
        r.algorithm.to_string(),
        r.antennas.to_string(),
        r.users.to_string(),
        r.pilots.to_string(),
        format_float(r.power_db),
        format_float(r.sr_true),
        format_float(r.sr_est),
        format_float(r.sr_bound),
        r.iterations.to_string(),
        r.runtime_microseconds.to_string(),
        r.power_fractions.iter().map(|&f| format_float(f)).collect::<Vec<_>>().join(";"),
        u8::from(r.degenerate).to_string(),
    ]
}

fn from_fields(fields: &csv::StringRecord) -> std::result::Result<SweepRecord, String> {
    if fields.len() != HEADER.len() {
        return Err(format!("expected {} columns, found {}", HEADER.len(), fields.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    }
    let fractions = if fields[12].is_empty() {
        Vec::new()
    } else {
        fields[12].split(';').map(|s| num::<f64>(s, "power fraction")).collect::<std::result::Result<_, _>>()?
    };
    Ok(SweepRecord {
        setup_id: num(&fields[0], HEADER[0])?,
        trial_id: num(&fields[1], HEADER[1])?,
        algorithm: fields[2].parse::<Algorithm>()?,
        antennas: num(&fields[3], HEADER[3])?,
        users: num(&fields[4], HEADER[4])?,
        pilots: num(&fields[5], HEADER[5])?,
        power_db: num(&fields[6], HEADER[6])?,
        sr_true: num(&fields[7], HEADER[7])?,
        sr_est: num(&fields[8], HEADER[8])?,
        sr_bound: num(&fields[9], HEADER[9])?,
        iterations: num(&fields[10], HEADER[10])?,
        runtime_microseconds: num(&fields[11], HEADER[11])?,
        power_fractions: fractions,
        degenerate: match &fields[13] {
            "0" => false,
            "1" => true,
            other => return Err(format!("bad degenerate flag `{other}`")),
        },
    })
}

pub fn write_records<W: Write>(records: &[SweepRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(to_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> std::result::Result<Vec<SweepRecord>, String> {
    let mut rd = csv::Reader::from_reader(reader);
    let header = rd.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err("unexpected header".into());
    }
    rd.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| e.to_string())?;
            from_fields(&row).map_err(|e| format!("row {}: {e}", i + 2))
        })
        .collect()
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

pub fn write_results(records: &[SweepRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    write_records(records, BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io { path: path.to_path_buf(), source },
        other => HarnessError::Format { path: path.to_path_buf(), message: format!("{other:?}") },
    })
}

pub fn read_results(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = File::open(path).map_err(io_error(path))?;
    read_records(file).map_err(|message| HarnessError::Format { path: path.to_path_buf(), message })
}

/// One block per (algorithm, T_dl) series with rows `P_dl_db mean stderr`
/// of the true-channel sum rate; blocks are separated by blank lines.
pub fn plot_data(records: &[SweepRecord]) -> String {
    let mut series: BTreeMap<(Algorithm, usize), BTreeMap<i64, (f64, Vec<f64>)>> = BTreeMap::new();
    for r in records {
        // group powers on a 1e-9 dB lattice
        let key = (r.power_db * 1e9).round() as i64;
        series.entry((r.algorithm, r.pilots)).or_default().entry(key).or_insert_with(|| (r.power_db, Vec::new())).1.push(r.sr_true);
    }
    let blocks: Vec<String> = series
        .iter()
        .map(|((algorithm, pilots), points)| {
            let mut block = format!("# {algorithm} T_dl={pilots}\n");
            for (db, values) in points.values() {
                let (mean, stderr) = mean_stderr(values);
                block.push_str(&format!("{} {} {}\n", format_float(*db), format_float(mean), format_float(stderr)));
            }
            block
        })
        .collect();
    blocks.join("\n")
}

pub fn emit_plot_data(records: &[SweepRecord], path: &Path) -> Result<()> {
    std::fs::write(path, plot_data(records)).map_err(io_error(path))
}
