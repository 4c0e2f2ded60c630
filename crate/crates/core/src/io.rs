//! CSV formats and atomic file output.
//!
//! * samples: one observation per row, `d` numeric columns, optional single
//!   header row (detected when the first row does not parse as numbers);
//! * centroids: `e` integer lattice-index columns then `d` coordinates, rows
//!   in lexicographic lattice order;
//! * report tables with fixed column sets.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bitwise the values that were written.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::optimizer::FitResult;
use crate::quantizer::{Configuration, SampleSet};
use crate::theory::{ConsistencyReport, Lemma1Report, UllnReport};

/// Write `contents` to a sibling temporary file and rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::param("out", format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn parse_err(source: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        reason: reason.into(),
    }
}

fn read_rows(text: &str, source: &str) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(source, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    Ok(rows)
}

fn is_numeric_row(rec: &csv::StringRecord) -> bool {
    rec.iter().all(|f| f.parse::<f64>().is_ok())
}

/// Parse sample CSV text.
pub fn parse_samples(text: &str, source: &str) -> Result<SampleSet> {
    let mut rows = read_rows(text, source)?;
    if rows.first().is_some_and(|r| !is_numeric_row(r)) {
        rows.remove(0);
    }
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let dim = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (line, rec) in rows.iter().enumerate() {
        if rec.len() != dim {
            return Err(parse_err(
                source,
                format!("row {} has {} columns, expected {dim}", line + 1, rec.len()),
            ));
        }
        for field in rec {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(source, format!("row {}: `{field}` is not a number", line + 1)))?;
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::OutOfUnitCube(format!(
                    "{source} row {}: value {v} outside [0, 1]",
                    line + 1
                )));
            }
            data.push(v);
        }
    }
    SampleSet::new(dim, data)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path)?;
    parse_samples(&text, &path.display().to_string())
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn samples_csv(samples: &SampleSet) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record((0..samples.dim()).map(|c| format!("x{c}")))?;
    for w in samples.points() {
        wtr.write_record(w.iter().map(|v| v.to_string()))?;
    }
    finish(wtr)
}

pub fn centroids_csv(x: &Configuration, lattice: &Lattice) -> Result<String> {
    if x.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            got: x.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..lattice.rank())
        .map(|a| format!("i{a}"))
        .chain((0..x.dim()).map(|c| format!("x{c}")))
        .collect();
    wtr.write_record(&header)?;
    for (i, p) in x.points().enumerate() {
        let row: Vec<String> = lattice
            .coords(i)
            .iter()
            .map(|c| c.to_string())
            .chain(p.iter().map(|v| v.to_string()))
            .collect();
        wtr.write_record(&row)?;
    }
    finish(wtr)
}

/// Parse centroid CSV text for `lattice`; every lattice point must appear once.
pub fn parse_centroids(text: &str, source: &str, lattice: &Lattice) -> Result<Configuration> {
    let mut rows = read_rows(text, source)?;
    if rows.first().is_some_and(|r| !is_numeric_row(r)) {
        rows.remove(0);
    }
    let e = lattice.rank();
    let width = rows.first().map_or(0, |r| r.len());
    if width <= e {
        return Err(parse_err(
            source,
            format!("need {e} index columns plus at least one coordinate, found {width} columns"),
        ));
    }
    let dim = width - e;
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; lattice.len()];
    for (line, rec) in rows.iter().enumerate() {
        if rec.len() != width {
            return Err(parse_err(source, format!("row {} has {} columns, expected {width}", line + 1, rec.len())));
        }
        let idx: Vec<i64> = rec
            .iter()
            .take(e)
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(source, format!("row {}: bad lattice index", line + 1)))?;
        let flat = lattice
            .index_of(&idx)
            .ok_or_else(|| parse_err(source, format!("row {}: index {idx:?} not in lattice", line + 1)))?;
        let coords: Vec<f64> = rec
            .iter()
            .skip(e)
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(source, format!("row {}: bad coordinate", line + 1)))?;
        if slots[flat].replace(coords).is_some() {
            return Err(parse_err(source, format!("index {idx:?} appears twice")));
        }
    }
    if let Some(missing) = slots.iter().position(Option::is_none) {
        return Err(parse_err(
            source,
            format!("no row for lattice index {:?}", lattice.coords(missing)),
        ));
    }
    Configuration::new(dim, slots.into_iter().flatten().flatten().collect())
}

pub fn read_centroids(path: &Path, lattice: &Lattice) -> Result<Configuration> {
    let text = fs::read_to_string(path)?;
    parse_centroids(&text, &path.display().to_string(), lattice)
}

pub fn restarts_csv(res: &FitResult) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["restart", "final_vn", "iterations", "separation", "repairs"])?;
    for r in &res.per_restart {
        wtr.write_record([
            r.restart.to_string(),
            r.final_vn.to_string(),
            r.iterations.to_string(),
            r.separation.to_string(),
            r.repairs.to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn lemma1_csv(report: &Lemma1Report) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["config_id", "cell", "alpha", "delta", "estimate", "stderr", "bound", "pass"])?;
    for r in &report.records {
        wtr.write_record([
            r.config_id.to_string(),
            r.cell.to_string(),
            r.alpha.to_string(),
            r.delta.to_string(),
            r.estimate.to_string(),
            r.stderr.to_string(),
            r.bound.to_string(),
            r.pass.to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn ulln_csv(report: &UllnReport) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["n", "seed", "sup_discrepancy"])?;
    for r in &report.rows {
        wtr.write_record([r.n.to_string(), r.seed.to_string(), r.sup_discrepancy.to_string()])?;
    }
    finish(wtr)
}

pub fn consistency_csv(report: &ConsistencyReport) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["n", "seed", "vn_best", "v_of_fit", "v_ref", "gap"])?;
    for r in &report.rows {
        wtr.write_record([
            r.n.to_string(),
            r.seed.to_string(),
            r.vn_best.to_string(),
            r.v_of_fit.to_string(),
            r.v_ref.to_string(),
            r.gap.to_string(),
        ])?;
    }
    finish(wtr)
}
