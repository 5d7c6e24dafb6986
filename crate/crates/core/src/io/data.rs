use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::likelihood::{Dataset, Specimen};
use crate::scalar::Real;

pub const DATASET_HEADER: [&str; 3] = ["specimen_id", "failure_time_s", "loading_rate_psi_per_s"];

fn parse_num<F: Real>(s: &str) -> Option<F> {
    F::from_str_radix(s.trim(), 10).ok()
}

/// Reads a dataset CSV. `source` names the input in error messages.
///
/// `mu_s` overrides the reference time; by default it is the mean failure
/// time.
pub fn read_dataset<F: Real, R: Read>(reader: R, source: &str, mu_s: Option<F>) -> Result<Dataset<F>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(parse_err(1, format!("header must be `{}`", DATASET_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, what: &str| -> Result<F> {
            parse_num(&rec[i]).ok_or_else(|| parse_err(line, format!("{what}: `{}` is not a number", &rec[i])))
        };
        let time = field(1, "failure_time_s")?;
        let rate = field(2, "loading_rate_psi_per_s")?;
        let invalid = |message: String| Error::Validation {
            path: source.to_string(),
            row: row + 1,
            line,
            message,
        };
        if !(time > F::zero() && time.is_finite()) {
            return Err(invalid(format!("failure time must be positive, got {time}")));
        }
        if !(rate > F::zero() && rate.is_finite()) {
            return Err(invalid(format!("loading rate must be positive, got {rate}")));
        }
        records.push(Specimen {
            id: rec[0].to_string(),
            time,
            rate,
        });
    }
    if records.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Dataset::new(records, mu_s)
}

pub fn load_dataset<F: Real>(path: &Path, mu_s: Option<F>) -> Result<Dataset<F>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(f, &path.display().to_string(), mu_s)
}

/// Writes values in shortest round-trip form, so reading back is exact.
pub fn write_dataset<F: Real, W: Write>(writer: W, data: &Dataset<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_HEADER)?;
    for r in &data.records {
        w.write_record([r.id.clone(), r.time.to_string(), r.rate.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<dataset output>", e))?;
    Ok(())
}

pub fn write_dataset_file<F: Real>(path: &Path, data: &Dataset<F>) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(std::io::BufWriter::new(f), data)
}
