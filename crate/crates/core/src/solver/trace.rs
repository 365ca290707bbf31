use std::io::{self, Write};

use serde::Serialize;

pub const TRACE_HEADER: &str = "t,epochs,primal,dual,gap,updates,wall_s";

/// One duality-gap checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub epochs: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub updates: u64,
    pub wall_s: f64,
}

/// Locale-independent real formatting: plain decimal for moderate
/// magnitudes, shortest exponent form otherwise.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_trace_csv<W: Write>(mut out: W, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_real(r.epochs),
            fmt_real(r.primal),
            fmt_real(r.dual),
            fmt_real(r.gap),
            r.updates,
            fmt_real(r.wall_s)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-6, 3.141592653589793, 1e20, 0.30000000000000004, 1e-300] {
            let s = fmt_real(x);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_layout() {
        let rec = TraceRecord {
            t: 3,
            epochs: 1.5,
            primal: 0.25,
            dual: 0.125,
            gap: 0.125,
            updates: 12,
            wall_s: 0.0,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[rec]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,epochs,primal,dual,gap,updates,wall_s\n3,1.5,0.25,0.125,0.125,12,0\n");
    }
}
