//! CSV serialisation of result and summary rows.

use std::io::Write;
use std::path::Path;

use crate::error::HarnessError;
use crate::experiment::ResultRow;
use crate::summary::SummaryRow;

pub const RESULT_HEADER: [&str; 11] = [
    "environment",
    "algorithm",
    "beta",
    "H",
    "K",
    "trial",
    "seed",
    "suboptimality",
    "wallclock",
    "pessimism_flag",
    "chose_optimal_first_action",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "environment",
    "algorithm",
    "beta",
    "H",
    "K",
    "trials",
    "mean_suboptimality",
    "p10",
    "p90",
    "pessimism_frequency",
    "optimal_action_frequency",
];

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A record type with a fixed CSV layout.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRecord for ResultRow {
    const HEADER: &'static [&'static str] = &RESULT_HEADER;

    fn fields(&self) -> Vec<String> {
        vec![
            self.environment.clone(),
            self.algorithm.clone(),
            format_float(self.beta),
            self.horizon.to_string(),
            self.k.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            format_float(self.suboptimality),
            format_float(self.wallclock),
            self.pessimism_flag.to_string(),
            self.chose_optimal_first_action.to_string(),
        ]
    }
}

impl CsvRecord for SummaryRow {
    const HEADER: &'static [&'static str] = &SUMMARY_HEADER;

    fn fields(&self) -> Vec<String> {
        vec![
            self.environment.clone(),
            self.algorithm.clone(),
            format_float(self.beta),
            self.horizon.to_string(),
            self.k.to_string(),
            self.trials.to_string(),
            format_float(self.mean_suboptimality),
            format_float(self.p10),
            format_float(self.p90),
            format_float(self.pessimism_frequency),
            format_float(self.optimal_action_frequency),
        ]
    }
}

/// Writes a header and one line per record to `out`.
pub fn write_csv<R: CsvRecord, W: Write>(records: &[R], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(R::HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv<R: CsvRecord>(records: &[R], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| HarnessError::csv(path, e))
}

/// Reads result rows written by [`emit_csv`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>, HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = reader.headers().map_err(|e| HarnessError::csv(path, e))?;
    if header.iter().ne(RESULT_HEADER) {
        return Err(HarnessError::Validation(format!(
            "{}: expected header {}",
            path.display(),
            RESULT_HEADER.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| HarnessError::csv(path, e)))
        .collect()
}
