use std::path::Path;

use crate::harness::ScalingRecord;
use crate::{BenchError, Result};

pub const CSV_HEADER: &str = "strategy,ranks,threads,median_s,min_s,max_s,fft_frac,transpose_frac";

fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Renders `records` in the order given. Floats use nine significant
/// digits in scientific notation, independent of locale.
pub fn to_csv_string(records: &[ScalingRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in records {
        w.write_record([
            r.strategy.clone(),
            r.ranks.to_string(),
            r.threads.to_string(),
            num(r.median_s),
            num(r.min_s),
            num(r.max_s),
            num(r.fft_frac),
            num(r.transpose_frac),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn emit_csv(records: &[ScalingRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(records)).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<ScalingRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let err = |line: usize, message: String| BenchError::Csv { line, message };

    let header = rows
        .next()
        .ok_or_else(|| err(1, "missing header".into()))?
        .map_err(|e| err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(err(1, format!("expected header `{CSV_HEADER}`")));
    }

    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| err(line, e.to_string()))?;
        if row.len() != 8 {
            return Err(err(line, format!("expected 8 fields, found {}", row.len())));
        }
        let int = |k: usize, name: &str| {
            row[k]
                .parse::<usize>()
                .map_err(|e| err(line, format!("{name}: {e}")))
        };
        let float = |k: usize, name: &str| {
            row[k]
                .parse::<f64>()
                .map_err(|e| err(line, format!("{name}: {e}")))
        };
        let median_s = float(3, "median_s")?;
        out.push(ScalingRecord {
            strategy: row[0].to_string(),
            ranks: int(1, "ranks")?,
            threads: int(2, "threads")?,
            median_s,
            min_s: float(4, "min_s")?,
            max_s: float(5, "max_s")?,
            fft_frac: float(6, "fft_frac")?,
            transpose_frac: float(7, "transpose_frac")?,
            error: median_s.is_nan().then(|| "failed point".to_string()),
        });
    }
    Ok(out)
}
