use std::io::{Read, Write};

use super::{BenchError, SpectrumRow, SweepResult, SweepRow};
use crate::optim::HistoryRow;

pub const SWEEP_HEADER: [&str; 8] = ["method", "target", "n_train", "n_params", "seed", "train_rmse_rel", "test_rmse_rel", "wall_seconds"];

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(out: W, result: &SweepResult) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.method.clone(),
            r.target.clone(),
            r.n_train.to_string(),
            r.n_params.to_string(),
            r.seed.to_string(),
            fmt_f64(r.train_rmse_rel),
            fmt_f64(r.test_rmse_rel),
            fmt_f64(r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sweep CSV. Rows with non-finite losses come back flagged.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<SweepResult, BenchError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(BenchError::Format(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str| BenchError::Format(format!("row {}: bad {field}", line + 1));
        let int = |i: usize| rec[i].trim().parse::<u64>().map_err(|_| bad(SWEEP_HEADER[i]));
        let float = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| bad(SWEEP_HEADER[i]));
        let mut row = SweepRow {
            method: rec[0].to_string(),
            target: rec[1].to_string(),
            n_train: int(2)? as usize,
            n_params: int(3)? as usize,
            seed: int(4)?,
            train_rmse_rel: float(5)?,
            test_rmse_rel: float(6)?,
            wall_seconds: float(7)?,
            error: None,
        };
        if row.is_flagged() {
            row.error = Some("flagged".into());
        }
        rows.push(row);
    }
    Ok(SweepResult { rows })
}

pub fn write_history_csv<W: Write>(out: W, history: &[HistoryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "mse", "rmse_rel", "phase"])?;
    for r in history {
        w.write_record([r.step.to_string(), fmt_f64(r.mse), fmt_f64(r.rmse_rel), r.phase.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(out: W, rows: &[SpectrumRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "eigenvalue", "grad_projection_abs"])?;
    for r in rows {
        w.write_record([r.index.to_string(), fmt_f64(r.eigenvalue), fmt_f64(r.grad_projection_abs)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, 2f64.powi(-52), 1e-300, 123456789.123456789, -7.25e17, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn sweep_csv_round_trip() {
        let row = |n, loss: f64| SweepRow {
            method: "simplex".into(),
            target: "xy".into(),
            n_train: n,
            n_params: 3 * n,
            seed: 4,
            train_rmse_rel: 0.0,
            test_rmse_rel: loss,
            wall_seconds: 0.5,
            error: None,
        };
        let res = SweepResult { rows: vec![row(128, 1.0 / 3.0), row(256, f64::NAN)] };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &res).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,target,n_train,n_params,seed,train_rmse_rel,test_rmse_rel,wall_seconds\n"));
        let back = read_sweep_csv(&buf[..]).unwrap();
        assert_eq!(back.rows[0], res.rows[0]);
        assert!(back.rows[1].is_flagged());
        assert!(read_sweep_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
