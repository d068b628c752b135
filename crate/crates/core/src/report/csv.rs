//! Results table. One row per (task, interference, THR%) cell, with the
//! column layout fixed by [`HEADER`].

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::report::experiment::{ResultRow, WorkloadKey};

pub const HEADER: [&str; 11] = [
    "backend",
    "task_pattern",
    "task_fp_bytes",
    "interf_pattern",
    "interf_fp_bytes",
    "thr_pct",
    "elapsed",
    "mem_accesses",
    "llc_refills",
    "slowdown",
    "rf",
];

/// Shortest round-tripping decimal, always with a decimal point.
pub fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || !v.is_finite() {
        s
    } else {
        s + ".0"
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.backend.as_str().to_owned(),
            r.task.pattern.to_string(),
            r.task.fp_bytes.to_string(),
            r.interference.pattern.to_string(),
            r.interference.fp_bytes.to_string(),
            r.thr_pct.to_string(),
            format_float(r.elapsed),
            r.mem_accesses.to_string(),
            r.llc_refills.map(|v| v.to_string()).unwrap_or_default(),
            format_float(r.slowdown),
            r.rf.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(std::io::BufWriter::new(f), rows)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|e: T::Err| {
        Error::InvalidCsv(format!("line {line}, column `{}`: {e} (`{raw}`)", HEADER[idx]))
    })
}

fn optional<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if rec.get(idx).is_none_or(str::is_empty) {
        Ok(None)
    } else {
        field(rec, idx, line).map(Some)
    }
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::InvalidCsv(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(ResultRow {
            backend: field(&rec, 0, line)?,
            task: WorkloadKey {
                pattern: field(&rec, 1, line)?,
                fp_bytes: field(&rec, 2, line)?,
            },
            interference: WorkloadKey {
                pattern: field(&rec, 3, line)?,
                fp_bytes: field(&rec, 4, line)?,
            },
            thr_pct: field(&rec, 5, line)?,
            elapsed: field(&rec, 6, line)?,
            mem_accesses: field(&rec, 7, line)?,
            llc_refills: optional(&rec, 8, line)?,
            slowdown: field(&rec, 9, line)?,
            rf: optional(&rec, 10, line)?,
        });
    }
    Ok(rows)
}

pub fn read_file(path: &Path) -> Result<Vec<ResultRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::spec::Backend;
    use crate::workload::TrafficPattern;

    fn row(thr: u32, slowdown: f64, rf: Option<f64>) -> ResultRow {
        ResultRow {
            backend: Backend::Sim,
            task: WorkloadKey {
                pattern: TrafficPattern::Memcpy,
                fp_bytes: 2 << 20,
            },
            interference: WorkloadKey {
                pattern: TrafficPattern::Memset,
                fp_bytes: 512 << 10,
            },
            thr_pct: thr,
            elapsed: 1000.0 * slowdown,
            mem_accesses: 64,
            llc_refills: rf.map(|_| 7),
            slowdown,
            rf,
        }
    }

    fn to_string(rows: &[ResultRow]) -> String {
        let mut buf = Vec::new();
        write_rows(&mut buf, rows).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn floats_keep_a_decimal_point() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(1.3), "1.3");
        assert_eq!(format_float(123456.0), "123456.0");
        assert_eq!(format_float(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn empty_results_give_a_header_only_file() {
        assert_eq!(to_string(&[]), format!("{}\n", HEADER.join(",")));
        assert!(read_rows(to_string(&[]).as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn layout_and_round_trip() {
        let rows = vec![row(0, 1.0, Some(1.0)), row(50, 1.0 / 3.0, None)];
        let text = to_string(&rows);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[1],
            "sim,MEMCPY,2097152,MEMSET,524288,0,1000.0,64,7,1.0,1.0"
        );
        assert!(lines[2].ends_with(",64,,0.3333333333333333,"));
        assert_eq!(read_rows(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(read_rows("a,b\n1,2\n".as_bytes()), Err(Error::InvalidCsv(_))));
        let bad = format!("{}\nsim,MEMCPY,x,MEMSET,1,0,1.0,1,,1.0,\n", HEADER.join(","));
        match read_rows(bad.as_bytes()) {
            Err(Error::InvalidCsv(msg)) => assert!(msg.contains("task_fp_bytes"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
