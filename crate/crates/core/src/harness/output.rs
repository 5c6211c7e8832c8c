use std::io::Write;

use crate::error::{Error, Result};

use super::ExperimentRow;

pub const CSV_HEADER: &str =
    "gamma,lambda,n,d_closed,d_empirical,sigma2_closed,sigma2_empirical,sigma2_probability_scale,recovered_beta,seed";

/// Writes rows as CSV with [`CSV_HEADER`]; absent optionals are empty.
pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER.split(','))
        .map_err(|e| Error::Output(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

/// Writes rows as a JSON array of objects with the CSV field names.
pub fn write_rows_json<W: Write>(rows: &[ExperimentRow], mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, rows).map_err(|e| Error::Output(e.to_string()))?;
    writeln!(writer).map_err(|e| Error::Output(e.to_string()))
}
