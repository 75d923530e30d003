//! CSV import/export for trajectories, schedules, histories and ladders.
//!
//! Every writer takes preamble lines that are emitted first as `# ` comments;
//! readers skip such lines.

use std::io::{Read, Write};

use crate::approximation::TruncationReport;
use crate::dynamics::{ControlSchedule, OutputMap, TrajectoryBundle};
use crate::solver::HistoryRow;
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn writer<W: Write>(mut w: W, preamble: &[String]) -> Result<csv::Writer<W>> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

/// Columns `t, member, coord0..`; one row per grid time and member.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &TrajectoryBundle, preamble: &[String]) -> Result<()> {
    let mut out = writer(w, preamble)?;
    let mut header = vec!["t".to_string(), "member".to_string()];
    header.extend(numbered("coord", traj.dim));
    out.write_record(&header).map_err(csv_err)?;
    for (j, t) in traj.times.iter().enumerate() {
        for k in 0..traj.len() {
            let mut row = vec![t.to_string(), k.to_string()];
            row.extend(traj.state(k, j).iter().map(f64::to_string));
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    finish(out)
}

/// Columns `step, u0..`.
pub fn write_schedule_csv<W: Write>(w: W, sched: &ControlSchedule, preamble: &[String]) -> Result<()> {
    let mut out = writer(w, preamble)?;
    let mut header = vec!["step".to_string()];
    header.extend(numbered("u", sched.controls()));
    out.write_record(&header).map_err(csv_err)?;
    for j in 0..sched.steps() {
        let mut row = vec![j.to_string()];
        row.extend(sched.row(j).iter().map(f64::to_string));
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

/// Reads a `step, u0..` table; steps must be `0..S` in order.
pub fn read_schedule_csv<R: Read>(r: R, horizon: f64) -> Result<ControlSchedule> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("step") || header.len() < 2 {
        return Err(Error::Parse("schedule CSV must start with a `step` column and have controls".into()));
    }
    let controls = header.len() - 1;
    let mut values = Vec::new();
    let mut steps = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let step: usize = rec[0].trim().parse().map_err(|_| Error::Parse(format!("bad step `{}`", &rec[0])))?;
        if step != steps {
            return Err(Error::Parse(format!("expected step {steps}, found {step}")));
        }
        for f in rec.iter().skip(1) {
            values.push(f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad control value `{f}`")))?);
        }
        steps += 1;
    }
    ControlSchedule::new(horizon, steps, controls, values)
}

/// Columns `iter, loss, grad_norm, step`.
pub fn write_history_csv<W: Write>(w: W, history: &[HistoryRow], preamble: &[String]) -> Result<()> {
    let mut out = writer(w, preamble)?;
    out.write_record(["iter", "loss", "grad_norm", "step"]).map_err(csv_err)?;
    for h in history {
        out.write_record([h.iter.to_string(), h.loss.to_string(), h.grad_norm.to_string(), h.step.to_string()])
            .map_err(csv_err)?;
    }
    finish(out)
}

/// Columns `member, z0.., target0.., error`: terminal state, target and
/// Euclidean norm of the (wrapped) residual.
pub fn write_terminal_csv<W: Write>(
    w: W,
    traj: &TrajectoryBundle,
    targets: &[Vec<f64>],
    pmap: &OutputMap,
    preamble: &[String],
) -> Result<()> {
    let s = targets.first().map_or(0, Vec::len);
    let mut out = writer(w, preamble)?;
    let mut header = vec!["member".to_string()];
    header.extend(numbered("z", traj.dim));
    header.extend(numbered("target", s));
    header.push("error".into());
    out.write_record(&header).map_err(csv_err)?;
    for (k, c) in targets.iter().enumerate() {
        let z = traj.terminal(k);
        let r = pmap.residual(traj.manifold, z, c);
        let mut row = vec![k.to_string()];
        row.extend(z.iter().map(f64::to_string));
        row.extend(c.iter().map(f64::to_string));
        row.push(crate::geometry::norm(&r).to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

/// Columns `member, x0.., label0.., prediction0.., error` for classification
/// runs; `error` is the Euclidean norm of `prediction − label`.
pub fn write_predictions_csv<W: Write>(
    w: W,
    data: &[Vec<f64>],
    labels: &[Vec<f64>],
    predictions: &[Vec<f64>],
    preamble: &[String],
) -> Result<()> {
    let d = data.first().map_or(0, Vec::len);
    let s = labels.first().map_or(0, Vec::len);
    let mut out = writer(w, preamble)?;
    let mut header = vec!["member".to_string()];
    header.extend(numbered("x", d));
    header.extend(numbered("label", s));
    header.extend(numbered("prediction", s));
    header.push("error".into());
    out.write_record(&header).map_err(csv_err)?;
    for (k, x) in data.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().map(f64::to_string));
        row.extend(labels[k].iter().map(f64::to_string));
        row.extend(predictions[k].iter().map(f64::to_string));
        let err: Vec<f64> = predictions[k].iter().zip(&labels[k]).map(|(p, l)| p - l).collect();
        row.push(crate::geometry::norm(&err).to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

/// Columns `n, sup_error, deriv_sup`.
pub fn write_ladder_csv<W: Write>(w: W, reports: &[TruncationReport], preamble: &[String]) -> Result<()> {
    let mut out = writer(w, preamble)?;
    out.write_record(["n", "sup_error", "deriv_sup"]).map_err(csv_err)?;
    for r in reports {
        out.write_record([r.order.to_string(), r.sup_error.to_string(), r.deriv_sup.to_string()])
            .map_err(csv_err)?;
    }
    finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_csv_round_trip() {
        let s = ControlSchedule::new(2.0, 3, 2, vec![0.1, -0.2, 1e-17, 3.0, -4.5, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_schedule_csv(&mut buf, &s, &["lieflow test".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# lieflow test\nstep,u0,u1\n0,0.1,-0.2\n"));
        let back = read_schedule_csv(buf.as_slice(), 2.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schedule_csv_rejects_gaps() {
        let text = "step,u0\n0,1\n2,1\n";
        assert!(read_schedule_csv(text.as_bytes(), 1.0).is_err());
        assert!(read_schedule_csv("x,u0\n0,1\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn predictions_columns() {
        let mut buf = Vec::new();
        let data = [vec![1.0, 2.0], vec![0.5, -1.0]];
        let labels = [vec![1.0], vec![-1.0]];
        let preds = [vec![0.7], vec![-1.0]];
        write_predictions_csv(&mut buf, &data, &labels, &preds, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "member,x0,x1,label0,prediction0,error");
        assert!(lines[1].starts_with("0,1,2,1,0.7,0.3"));
        assert_eq!(lines[2], "1,0.5,-1,-1,-1,0");
    }

    #[test]
    fn history_header() {
        let mut buf = Vec::new();
        let rows = [HistoryRow {
            iter: 0,
            loss: 1.5,
            grad_norm: 2.0,
            step: 0.0,
        }];
        write_history_csv(&mut buf, &rows, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,loss,grad_norm,step\n0,1.5,2,0\n");
    }
}
