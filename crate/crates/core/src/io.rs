//! CSV formats. Floats are written with 17 significant digits so that every
//! value reads back bit-for-bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fit::FitReport;
use crate::model::{EquationParams, Trajectory, TrajectoryMeta};

pub const TRAJECTORY_HEADER: [&str; 5] = ["x", "u1", "du1", "u2", "du2"];
pub const SPECTRUM_HEADER: [&str; 4] = ["t", "lambda1", "lambda2", "lambda3"];

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    if traj.params.n() != 2 {
        return Err(Error::UnsupportedDimension {
            got: traj.params.n(),
            expected: 2,
        });
    }
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (i, &x) in traj.xs().iter().enumerate() {
        let f = traj.flat(i);
        out.write_record([x, f[0], f[2], f[1], f[3]].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a trajectory written by [`write_trajectory`]; `ε` is not stored in
/// the file and must be supplied.
pub fn read_trajectory<R: Read>(r: R, params: EquationParams) -> Result<Trajectory> {
    params.require_n(2)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::domain(format!(
            "trajectory header must be {}, got {}",
            TRAJECTORY_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut states = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 5];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field.parse().map_err(|_| {
                Error::domain(format!(
                    "row {}: cannot parse {field:?} as a number",
                    line + 2
                ))
            })?;
        }
        if rec.len() != 5 {
            return Err(Error::domain(format!(
                "row {}: expected 5 fields",
                line + 2
            )));
        }
        xs.push(v[0]);
        states.extend_from_slice(&[v[1], v[3], v[2], v[4]]);
    }
    Trajectory::new(params, TrajectoryMeta::default(), xs, states)
}

pub fn write_fit_report<W: Write>(report: &FitReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(FitReport::CSV_HEADER)?;
    out.write_record(report.csv_record().map(fmt_f64))?;
    out.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(rows: &[(f64, Vec<f64>)], w: W) -> Result<()> {
    let mut out = writer(w);
    let width = rows.first().map_or(3, |r| r.1.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=width).map(|k| format!("lambda{k}")));
    out.write_record(&header)?;
    for (t, ev) in rows {
        let mut rec = vec![fmt_f64(*t)];
        rec.extend(ev.iter().map(|&v| fmt_f64(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip_is_exact() {
        let p = EquationParams::two(0.3).unwrap();
        let xs = vec![-1.0, 0.1, 1.0 / 3.0];
        let states: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() / 7.0).collect();
        let t = Trajectory::new(p.clone(), TrajectoryMeta::default(), xs, states).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,u1,du1,u2,du2\n"));
        let back = read_trajectory(buf.as_slice(), p).unwrap();
        assert_eq!(back.xs(), t.xs());
        for i in 0..t.len() {
            assert_eq!(back.flat(i), t.flat(i));
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let p = EquationParams::two(1.0).unwrap();
        assert!(read_trajectory("x,u1,u2\n0,0,0\n".as_bytes(), p).is_err());
    }

    #[test]
    fn spectrum_header() {
        let mut buf = Vec::new();
        write_spectrum(&[(0.5, vec![1.0, 2.0, 3.0])], &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("t,lambda1,lambda2,lambda3\n"));
    }
}
