use std::io::Write;

use super::{PairTrace, VerifyError};

/// `t,x_1..x_n,xt_1..xt_n,V,diff_norm`.
pub fn trace_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x_{i}")));
    h.extend((1..=n).map(|i| format!("xt_{i}")));
    h.push("V".into());
    h.push("diff_norm".into());
    h
}

pub fn write_trace_csv<W: Write>(trace: &PairTrace, out: W) -> Result<(), VerifyError> {
    let n = trace.x.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_csv_header(n))?;
    for k in 0..trace.len() {
        let mut row = Vec::with_capacity(2 * n + 3);
        row.push(trace.times[k].to_string());
        row.extend(trace.x[k].iter().map(|v| v.to_string()));
        row.extend(trace.x_tilde[k].iter().map(|v| v.to_string()));
        row.push(trace.v_series[k].to_string());
        row.push(trace.diff_norm_series[k].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `pair,t,diff_norm,log10_diff_norm`, one row per sample of every pair.
pub fn write_convergence_long_csv<W: Write>(traces: &[PairTrace], out: W) -> Result<(), VerifyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "t", "diff_norm", "log10_diff_norm"])?;
    for (i, tr) in traces.iter().enumerate() {
        for (t, d) in tr.times.iter().zip(&tr.diff_norm_series) {
            w.write_record([i.to_string(), t.to_string(), d.to_string(), d.log10().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
